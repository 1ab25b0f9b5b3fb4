//! Offline optima over a whole stream and `(1-1/e)`-regret accounting.
//!
//! Every argmax over items breaks ties toward the lower ground-set index: a
//! candidate replaces the incumbent only when it is better by more than
//! [`TIE_TOL`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::submodular::{FunctionStream, ItemSet, SetFunction};
use crate::trace::Trace;

pub const TIE_TOL: f64 = 1e-12;

/// Largest `C(n, <=k) * T` the exhaustive oracle accepts.
pub const BRUTE_FORCE_LIMIT: f64 = 1e8;

/// `1 - 1/e`.
pub fn one_minus_inv_e() -> f64 {
    1.0 - (-1f64).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Exact,
    Greedy,
}

impl OracleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OracleKind::Exact => "exact",
            OracleKind::Greedy => "greedy",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineOpt {
    pub set: ItemSet,
    /// `sum_t f_t(set)`.
    pub value: f64,
}

/// `sum_t f_t(items)`.
pub fn stream_value(stream: &FunctionStream, items: &[usize]) -> f64 {
    stream.rounds().iter().map(|f| f.value(items)).sum()
}

/// `sum_{j <= k} C(n, j)` as a float.
pub fn subsets_up_to(n: usize, k: usize) -> f64 {
    let mut total = 0.0;
    let mut c = 1.0;
    for j in 0..=k.min(n) {
        total += c;
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    total
}

/// Exact `max_{|S| <= k} sum_t f_t(S)` by enumerating subsets in
/// lexicographic order.
pub fn brute_force_opt(stream: &FunctionStream, k: usize) -> Result<OfflineOpt> {
    let n = stream.ground().len();
    let evals = subsets_up_to(n, k) * stream.horizon() as f64;
    if evals > BRUTE_FORCE_LIMIT {
        return Err(Error::Size(format!(
            "exhaustive search needs {evals:.3e} evaluations (limit {BRUTE_FORCE_LIMIT:.0e}); use the greedy oracle"
        )));
    }
    let mut best = OfflineOpt {
        set: ItemSet::empty(),
        value: stream_value(stream, &[]),
    };
    let mut current = Vec::with_capacity(k);
    enumerate(stream, n, k.min(n), 0, &mut current, &mut best);
    Ok(best)
}

fn enumerate(stream: &FunctionStream, n: usize, k: usize, start: usize, current: &mut Vec<usize>, best: &mut OfflineOpt) {
    if current.len() == k {
        return;
    }
    for a in start..n {
        current.push(a);
        let v = stream_value(stream, current);
        if v > best.value + TIE_TOL {
            *best = OfflineOpt {
                set: ItemSet::from_indices(current.iter().copied()),
                value: v,
            };
        }
        enumerate(stream, n, k, a + 1, current, best);
        current.pop();
    }
}

/// `k` steps of best marginal gain on `sum_t f_t`.
pub fn greedy_opt(stream: &FunctionStream, k: usize) -> Result<OfflineOpt> {
    let n = stream.ground().len();
    let mut set = ItemSet::empty();
    let mut value = stream_value(stream, &[]);
    for _ in 0..k.min(n) {
        let mut pick: Option<(usize, f64)> = None;
        for a in (0..n).filter(|&a| !set.contains(a)) {
            let v = stream_value(stream, set.with(a).as_slice());
            if pick.is_none_or(|(_, b)| v > b + TIE_TOL) {
                pick = Some((a, v));
            }
        }
        let (a, v) = pick.expect("k <= n leaves a candidate");
        set.insert(a);
        value = v;
    }
    Ok(OfflineOpt { set, value })
}

pub fn offline_opt(stream: &FunctionStream, k: usize, kind: OracleKind) -> Result<OfflineOpt> {
    match kind {
        OracleKind::Exact => brute_force_opt(stream, k),
        OracleKind::Greedy => greedy_opt(stream, k),
    }
}

/// Regret of one trace against the offline optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub opt_set: Vec<String>,
    pub opt_value: f64,
    /// `sum_t f_t(S_t)`, recomputed from the stream.
    pub payoff: f64,
    /// `(1-1/e) opt_value - payoff`.
    pub regret_1e: f64,
    /// `opt_value - payoff`.
    pub raw_regret: f64,
    /// Cumulative `(1-1/e)`-regret after each round, against the final
    /// offline set.
    pub series: Vec<f64>,
    pub oracle_kind: OracleKind,
    /// True when the offline value came from the greedy oracle.
    pub approximate: bool,
    /// For traces with explore rounds: the `(1-1/e)`-regret of the held sets
    /// (union of the experts' items) instead of the probed sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explore_adjusted_regret_1e: Option<f64>,
}

impl RegretReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Score `trace` on `stream` with the chosen offline oracle.
pub fn regret_report(trace: &Trace, stream: &FunctionStream, k: usize, kind: OracleKind) -> Result<RegretReport> {
    let opt = offline_opt(stream, k, kind)?;
    regret_report_with_opt(trace, stream, &opt, kind)
}

/// [`regret_report`] with a precomputed offline optimum.
pub fn regret_report_with_opt(
    trace: &Trace,
    stream: &FunctionStream,
    opt: &OfflineOpt,
    kind: OracleKind,
) -> Result<RegretReport> {
    let n = stream.ground().len();
    if trace.horizon() != stream.horizon() {
        return Err(Error::Mismatch(format!(
            "trace has {} rounds, stream has {}",
            trace.horizon(),
            stream.horizon()
        )));
    }
    if let Some(max) = opt.set.iter().max() {
        if max >= n {
            return Err(Error::Mismatch(format!("offline set uses item {max} but n = {n}")));
        }
    }
    let c = one_minus_inv_e();
    let mut series = Vec::with_capacity(trace.horizon());
    let (mut payoff, mut best, mut held_payoff) = (0.0, 0.0, 0.0);
    for (r, f) in trace.rounds.iter().zip(stream.rounds()) {
        if r.set.iter().chain(r.choices.iter().copied()).any(|a| a >= n) {
            return Err(Error::Mismatch(format!("round {} uses an item outside the {n}-item ground set", r.t)));
        }
        payoff += f.value(r.set.as_slice());
        best += f.value(opt.set.as_slice());
        held_payoff += f.value(r.held_set().as_slice());
        series.push(c * best - payoff);
    }
    let has_explore = trace.rounds.iter().any(|r| r.explore);
    Ok(RegretReport {
        opt_set: stream.ground().names(&opt.set),
        opt_value: opt.value,
        payoff,
        regret_1e: c * opt.value - payoff,
        raw_regret: opt.value - payoff,
        series,
        oracle_kind: kind,
        approximate: kind == OracleKind::Greedy,
        explore_adjusted_regret_1e: has_explore.then(|| c * opt.value - held_payoff),
    })
}

/// `(1-1/e) opt - payoff` against the sum of the experts' realized regrets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpertDecomposition {
    pub lhs: f64,
    pub rhs: f64,
}

impl ExpertDecomposition {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

/// Needs a trace recorded with feedback.
pub fn expert_decomposition(trace: &Trace, opt_value: f64) -> Result<ExpertDecomposition> {
    let histories = trace
        .feedback
        .as_ref()
        .ok_or_else(|| Error::param("trace was not recorded with feedback"))?;
    let rhs = histories
        .iter()
        .map(|h| h.realized_regret())
        .sum::<Result<f64>>()?;
    Ok(ExpertDecomposition {
        lhs: one_minus_inv_e() * opt_value - trace.total_payoff(),
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submodular::{GroundSet, SubmodularOracle};
    use crate::trace::{RoundRecord, RunParams};

    fn two_round() -> FunctionStream {
        let g = GroundSet::new(["a", "b", "c"]).unwrap();
        let f1 = SubmodularOracle::coverage(vec![0.9, 0.1, 0.5]).unwrap();
        let f2 = SubmodularOracle::coverage(vec![0.1, 0.9, 0.5]).unwrap();
        FunctionStream::new(g, vec![f1, f2]).unwrap()
    }

    fn constant_trace(set: &[usize], t: usize) -> Trace {
        Trace {
            params: RunParams {
                k: set.len(),
                eta: 0.1,
                gamma: None,
            },
            rounds: (1..=t)
                .map(|t| RoundRecord {
                    t,
                    set: ItemSet::from_indices(set.iter().copied()),
                    payoff: 0.0,
                    explore: false,
                    choices: set.to_vec(),
                    probe: None,
                })
                .collect(),
            feedback: None,
        }
    }

    #[test]
    fn two_round_instance() {
        let s = two_round();
        let bf = brute_force_opt(&s, 2).unwrap();
        assert_eq!(bf.set.as_slice(), &[0, 1]);
        assert!((bf.value - 1.82).abs() < 1e-12);
        let gr = greedy_opt(&s, 2).unwrap();
        assert_eq!(gr.set.as_slice(), &[0, 1]);
        assert!((gr.value - 1.82).abs() < 1e-12);
        // Three-way tie at k = 1 goes to `a`.
        assert_eq!(greedy_opt(&s, 1).unwrap().set.as_slice(), &[0]);
        assert_eq!(brute_force_opt(&s, 1).unwrap().set.as_slice(), &[0]);
    }

    #[test]
    fn trivial_budgets() {
        let s = two_round();
        assert_eq!(brute_force_opt(&s, 0).unwrap().value, 0.0);
        assert_eq!(brute_force_opt(&s, 5).unwrap().set.as_slice(), &[0, 1, 2]);
        assert_eq!(greedy_opt(&s, 5).unwrap().set.as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn size_limit() {
        assert_eq!(subsets_up_to(3, 2), 7.0);
        assert_eq!(subsets_up_to(3, 9), 8.0);
        let g = GroundSet::with_size(40).unwrap();
        let f = SubmodularOracle::coverage(vec![0.1; 40]).unwrap();
        let s = FunctionStream::new(g, vec![f; 200]).unwrap();
        assert!(matches!(brute_force_opt(&s, 5), Err(Error::Size(_))));
    }

    #[test]
    fn regret_algebra() {
        let s = two_round();
        let c = one_minus_inv_e();
        let r = regret_report(&constant_trace(&[0, 1], 2), &s, 2, OracleKind::Exact).unwrap();
        assert!((r.regret_1e + (-1f64).exp() * r.opt_value).abs() < 1e-12);
        assert_eq!(r.opt_set, vec!["a", "b"]);
        let r = regret_report(&constant_trace(&[], 2), &s, 2, OracleKind::Exact).unwrap();
        assert!((r.regret_1e - c * r.opt_value).abs() < 1e-12);
        assert_eq!(r.series.len(), 2);
        assert_eq!(*r.series.last().unwrap(), r.regret_1e);
        assert!(!r.approximate);
        assert!(regret_report(&constant_trace(&[0], 3), &s, 2, OracleKind::Exact).is_err());
        assert!(regret_report(&constant_trace(&[7], 2), &s, 2, OracleKind::Exact).is_err());
    }
}

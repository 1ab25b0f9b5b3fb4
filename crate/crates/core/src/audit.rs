//! Empirical privacy estimates on neighboring streams.
//!
//! A mechanism is run `N` times on `F` and `N` times on `F'` with
//! independent seeds. Its public output (the sequence of played sets) is
//! tallied either as whole sequences or as per-round `(t, set)` events, and
//!
//! ```text
//! eps_hat = max_o | ln((count_F(o) + alpha) / (count_F'(o) + alpha)) |
//! ```
//!
//! over every observed outcome `o`. The estimate can refute a privacy claim
//! (when it exceeds `eps + slack`) but never certify one; every report says
//! so in its `caveat` field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::warn;
use rand::SeedableRng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{calibrate_gamma, explore_tail_bound, run_bandit, BanditConfig, BanditVariant};
use crate::error::{Error, Result};
use crate::experiment::{load_stream, parse_json, read_text, relative_to, Algorithm, SCHEMA_VERSION};
use crate::full_info::{run_full_info_with, LearningRate};
use crate::oracles::subsets_up_to;
use crate::rng::Rng;
use crate::submodular::{generate_stream, neighboring_stream, FunctionStream, GroundSet, SetFunction, StreamSpec, SubmodularOracle};
use crate::trace::Trace;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_SLACK: f64 = 0.1;
pub const MAX_SEQUENCE_OUTCOMES: f64 = 1e4;
/// Fewer trials than this are run but flagged as underpowered.
pub const MIN_REPORTED_TRIALS: usize = 10_000;
pub const CAVEAT: &str = "empirical audit: can refute a privacy claim, never certify one";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    FullSequence,
    PerRound,
}

impl Granularity {
    /// Whole sequences for `T <= 4`, per-round events otherwise.
    pub fn default_for(horizon: usize) -> Self {
        if horizon <= 4 {
            Granularity::FullSequence
        } else {
            Granularity::PerRound
        }
    }
}

/// The algorithm under audit, minus its seed.
#[derive(Clone, Debug, PartialEq)]
pub enum Mechanism {
    FullInfo {
        k: usize,
        rate: LearningRate,
    },
    Bandit {
        variant: BanditVariant,
        k: usize,
        eps: f64,
        delta: f64,
        gamma: Option<f64>,
        eta: Option<f64>,
    },
}

impl Mechanism {
    pub fn k(&self) -> usize {
        match self {
            Mechanism::FullInfo { k, .. } | Mechanism::Bandit { k, .. } => *k,
        }
    }

    pub fn run(&self, stream: &FunctionStream, seed: u64) -> Result<Trace> {
        match self {
            Mechanism::FullInfo { k, rate } => run_full_info_with(stream, *k, *rate, seed, false),
            Mechanism::Bandit {
                variant,
                k,
                eps,
                delta,
                gamma,
                eta,
            } => {
                let cfg = BanditConfig {
                    variant: *variant,
                    eps: *eps,
                    delta: *delta,
                    k: *k,
                    gamma: *gamma,
                    eta: *eta,
                    seed,
                };
                run_bandit(stream, &cfg)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct AuditConfig {
    pub mechanism: Mechanism,
    pub f: FunctionStream,
    pub f_prime: FunctionStream,
    /// Trials per stream.
    pub trials: usize,
    /// `None` picks [`Granularity::default_for`].
    pub granularity: Option<Granularity>,
    pub alpha: f64,
    /// Bootstrap replicates for the standard error.
    pub bootstrap: usize,
    pub seed_base: u64,
}

impl AuditConfig {
    pub fn new(mechanism: Mechanism, f: FunctionStream, f_prime: FunctionStream, trials: usize) -> Self {
        Self {
            mechanism,
            f,
            f_prime,
            trials,
            granularity: None,
            alpha: DEFAULT_ALPHA,
            bootstrap: 200,
            seed_base: 0,
        }
    }

    pub fn with_seed_base(mut self, seed: u64) -> Self {
        self.seed_base = seed;
        self
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity.unwrap_or_else(|| Granularity::default_for(self.f.horizon()))
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("audit needs at least one trial per stream"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::param(format!("smoothing alpha must be positive, got {}", self.alpha)));
        }
        let differing = differing_rounds(&self.f, &self.f_prime)?;
        if differing > 1 {
            return Err(Error::Mismatch(format!(
                "streams differ in {differing} rounds; neighbors differ in at most one"
            )));
        }
        if self.granularity() == Granularity::FullSequence {
            let sets = subsets_up_to(self.f.ground().len(), self.mechanism.k());
            let outcomes = sets.powi(self.f.horizon() as i32);
            if outcomes > MAX_SEQUENCE_OUTCOMES {
                return Err(Error::Granularity { outcomes });
            }
        }
        if self.trials < MIN_REPORTED_TRIALS {
            warn!("audit with {} trials per stream is below the {MIN_REPORTED_TRIALS} floor", self.trials);
        }
        Ok(())
    }
}

/// Number of rounds where the two streams' functions differ.
pub fn differing_rounds(f: &FunctionStream, f_prime: &FunctionStream) -> Result<usize> {
    if f.ground() != f_prime.ground() || f.horizon() != f_prime.horizon() {
        return Err(Error::Mismatch("audit streams must share ground set and horizon".into()));
    }
    Ok(f.rounds().iter().zip(f_prime.rounds()).filter(|(a, b)| a != b).count())
}

/// Tallies of outcomes, grouped so that counts within a group sum to the
/// number of trials (one group for whole sequences, one per round
/// otherwise).
type Counts = BTreeMap<(u64, Vec<u64>), u64>;

fn outcome_keys(trace: &Trace, granularity: Granularity) -> Vec<(u64, Vec<u64>)> {
    let masks = trace.rounds.iter().map(|r| r.set.mask());
    match granularity {
        Granularity::FullSequence => vec![(0, masks.collect())],
        Granularity::PerRound => masks.enumerate().map(|(t, m)| (t as u64 + 1, vec![m])).collect(),
    }
}

fn merge(mut a: Counts, b: Counts) -> Counts {
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

struct Tally {
    all: Counts,
    /// Trials accepted by the filter.
    kept: Counts,
    explore_counts: Vec<usize>,
}

fn tally<S, K>(config: &AuditConfig, stream: &FunctionStream, seed_of: S, keep: K) -> Result<Tally>
where
    S: Fn(usize) -> u64 + Sync,
    K: Fn(&Trace) -> bool + Sync,
{
    let granularity = config.granularity();
    let mechanism = &config.mechanism;
    let empty = || Tally {
        all: Counts::new(),
        kept: Counts::new(),
        explore_counts: Vec::new(),
    };
    (0..config.trials)
        .into_par_iter()
        .map(|i| -> Result<Tally> {
            let trace = mechanism.run(stream, seed_of(i))?;
            let mut t = empty();
            let keys = outcome_keys(&trace, granularity);
            if keep(&trace) {
                t.kept = keys.iter().map(|k| (k.clone(), 1)).collect();
            }
            t.all = keys.into_iter().map(|k| (k, 1)).collect();
            t.explore_counts.push(trace.explore_count());
            Ok(t)
        })
        .try_reduce(empty, |mut a, b| {
            a.all = merge(a.all, b.all);
            a.kept = merge(a.kept, b.kept);
            a.explore_counts.extend(b.explore_counts);
            Ok(a)
        })
}

/// One row of the ratio table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRatio {
    /// 0 for whole sequences, else the 1-based round.
    pub round: u64,
    /// Played-set bitmasks (one per round for whole sequences).
    pub outcome: Vec<u64>,
    pub count_f: u64,
    pub count_f_prime: u64,
    pub log_ratio: f64,
}

/// `max |ln((c + alpha) / (c' + alpha))|` over the union of keys.
pub fn eps_hat_from_counts(f: &Counts, f_prime: &Counts, alpha: f64) -> f64 {
    ratio_table(f, f_prime, alpha)
        .iter()
        .map(|r| r.log_ratio.abs())
        .fold(0.0, f64::max)
}

fn ratio_table(f: &Counts, f_prime: &Counts, alpha: f64) -> Vec<EventRatio> {
    let mut keys: Vec<&(u64, Vec<u64>)> = f.keys().chain(f_prime.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|key| {
            let a = f.get(key).copied().unwrap_or(0);
            let b = f_prime.get(key).copied().unwrap_or(0);
            EventRatio {
                round: key.0,
                outcome: key.1.clone(),
                count_f: a,
                count_f_prime: b,
                log_ratio: ((a as f64 + alpha) / (b as f64 + alpha)).ln(),
            }
        })
        .collect()
}

/// Resample each group's counts from the multinomial they estimate.
fn resample(counts: &Counts, rng: &mut Rng) -> Counts {
    let mut groups: BTreeMap<u64, Vec<(&Vec<u64>, u64)>> = BTreeMap::new();
    for ((g, key), &c) in counts {
        groups.entry(*g).or_default().push((key, c));
    }
    let mut out = Counts::new();
    for (g, cells) in groups {
        let mut remaining_n: u64 = cells.iter().map(|(_, c)| c).sum();
        let mut remaining_mass = remaining_n as f64;
        for (key, c) in cells {
            let draw = if remaining_n == 0 {
                0
            } else if c as f64 >= remaining_mass {
                remaining_n
            } else {
                Binomial::new(remaining_n, c as f64 / remaining_mass)
                    .expect("probability in [0, 1]")
                    .sample(rng)
            };
            remaining_n -= draw;
            remaining_mass -= c as f64;
            if draw > 0 {
                out.insert((g, key.clone()), draw);
            }
        }
    }
    out
}

fn bootstrap_se(f: &Counts, f_prime: &Counts, alpha: f64, replicates: usize, seed: u64) -> f64 {
    if replicates < 2 {
        return f64::NAN;
    }
    let mut rng = Rng::seed_from_u64(seed ^ 0x5eed_b007);
    let samples: Vec<f64> = (0..replicates)
        .map(|_| eps_hat_from_counts(&resample(f, &mut rng), &resample(f_prime, &mut rng), alpha))
        .collect();
    let mean = samples.iter().sum::<f64>() / replicates as f64;
    (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (replicates - 1) as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub eps_hat: f64,
    /// Bootstrap standard error of `eps_hat`.
    pub std_error: f64,
    pub slack: f64,
    /// Bandit audits only: empirical `P(M >= 2 gamma T)`.
    pub exceedance: Option<f64>,
    /// Bandit audits only: `exp(-8 gamma^2 T)`.
    pub bound: Option<f64>,
    pub trials: usize,
    pub granularity: Granularity,
    pub alpha: f64,
    pub underpowered: bool,
    pub caveat: String,
    pub table: Vec<EventRatio>,
}

impl AuditReport {
    /// True when the estimate exceeds `eps + slack`.
    pub fn refutes(&self, eps: f64) -> bool {
        self.eps_hat > eps + self.slack
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn seeds(base: u64) -> (impl Fn(usize) -> u64 + Sync, impl Fn(usize) -> u64 + Sync) {
    (
        move |i: usize| base.wrapping_add(2 * i as u64),
        move |i: usize| base.wrapping_add(2 * i as u64 + 1),
    )
}

/// Estimate the privacy loss between the output distributions on `F` and
/// `F'`.
pub fn estimate_epsilon(config: &AuditConfig) -> Result<AuditReport> {
    config.validate()?;
    let (seed_f, seed_fp) = seeds(config.seed_base);
    let f = tally(config, &config.f, seed_f, |_| true)?;
    let fp = tally(config, &config.f_prime, seed_fp, |_| true)?;
    Ok(report(config, &f.all, &fp.all, None, None))
}

fn report(config: &AuditConfig, cf: &Counts, cfp: &Counts, exceedance: Option<f64>, bound: Option<f64>) -> AuditReport {
    let table = ratio_table(cf, cfp, config.alpha);
    AuditReport {
        eps_hat: table.iter().map(|r| r.log_ratio.abs()).fold(0.0, f64::max),
        std_error: bootstrap_se(cf, cfp, config.alpha, config.bootstrap, config.seed_base),
        slack: DEFAULT_SLACK,
        exceedance,
        bound,
        trials: config.trials,
        granularity: config.granularity(),
        alpha: config.alpha,
        underpowered: config.trials < MIN_REPORTED_TRIALS,
        caveat: CAVEAT.to_string(),
        table,
    }
}

/// Bandit audit: the explore-count tail next to its analytic bound, and
/// `eps_hat` restricted to trials with `M < 2 gamma T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditDeltaReport {
    pub gamma: f64,
    /// Conditioned on `M < 2 gamma T`.
    pub conditioned: AuditReport,
    pub eps_hat_unconditioned: f64,
}

pub fn audit_bandit_delta(config: &AuditConfig) -> Result<BanditDeltaReport> {
    let Mechanism::Bandit { k, gamma, .. } = &config.mechanism else {
        return Err(Error::param("audit_bandit_delta needs a bandit mechanism"));
    };
    config.validate()?;
    let horizon = config.f.horizon();
    let gamma = match gamma {
        Some(g) => *g,
        None => calibrate_gamma(*k, config.f.ground().len(), horizon)?.gamma,
    };
    let threshold = 2.0 * gamma * horizon as f64;
    let below = |t: &Trace| (t.explore_count() as f64) < threshold;

    let (seed_f, seed_fp) = seeds(config.seed_base);
    let f = tally(config, &config.f, seed_f, below)?;
    let fp = tally(config, &config.f_prime, seed_fp, below)?;

    let total = f.explore_counts.len() + fp.explore_counts.len();
    let hits = f
        .explore_counts
        .iter()
        .chain(&fp.explore_counts)
        .filter(|&&m| m as f64 >= threshold)
        .count();
    let exceedance = hits as f64 / total as f64;
    Ok(BanditDeltaReport {
        gamma,
        conditioned: report(
            config,
            &f.kept,
            &fp.kept,
            Some(exceedance),
            Some(explore_tail_bound(gamma, horizon)),
        ),
        eps_hat_unconditioned: eps_hat_from_counts(&f.all, &fp.all, config.alpha),
    })
}

/// The negative-test pair: `F` repeats a function whose best singleton is
/// item 0; `F'` swaps round 1 for one whose best singleton is item 1.
pub fn distinguishing_pair(n: usize, horizon: usize) -> Result<(FunctionStream, FunctionStream)> {
    if n < 2 {
        return Err(Error::param("distinguishing pair needs n >= 2"));
    }
    let favor = |item: usize| {
        let mut p = vec![0.0; n];
        p[item] = 1.0;
        SubmodularOracle::coverage(p)
    };
    let (a, b) = (favor(0)?, favor(1)?);
    let ground = GroundSet::with_size(n)?;
    let f = FunctionStream::new(ground, vec![a.clone(); horizon])?;
    let f_prime = neighboring_stream(&f, 1, b)?;
    debug_assert!(f.round(1)?.value(&[0]) > f_prime.round(1)?.value(&[0]));
    Ok((f, f_prime))
}

fn default_bootstrap() -> usize {
    200
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// Where the two audited streams come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StreamPair {
    /// See [`distinguishing_pair`].
    Distinguishing { n: usize, horizon: usize },
    /// `F` from `spec`; `F'` replaces round `round` with that round of the
    /// stream generated under `replacement_seed`.
    Neighbor {
        spec: StreamSpec,
        round: usize,
        replacement_seed: u64,
    },
    /// `F` and `F'` both from `spec`.
    Identical { spec: StreamSpec },
    /// Two stream files, relative to the audit file.
    Files { f: PathBuf, f_prime: PathBuf },
}

/// JSON audit description read by the command-line runner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditFile {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    pub streams: StreamPair,
    pub trials: usize,
    #[serde(default)]
    pub granularity: Option<Granularity>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Run [`audit_bandit_delta`] instead of [`estimate_epsilon`].
    #[serde(default)]
    pub bandit_delta: bool,
}

impl AuditFile {
    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = Self::from_json(&read_text(path)?)?;
        if let StreamPair::Files { f, f_prime } = &mut file.streams {
            *f = relative_to(path, f);
            *f_prime = relative_to(path, f_prime);
        }
        Ok(file)
    }

    pub fn to_config(&self) -> Result<AuditConfig> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let mechanism = match (self.algorithm, self.algorithm.bandit_variant()) {
            (Algorithm::FullInfo, _) => Mechanism::FullInfo {
                k: self.k,
                rate: match self.eta {
                    Some(eta) => LearningRate::NonPrivate { eta },
                    None => LearningRate::Private {
                        eps: self.eps,
                        delta: self.delta,
                    },
                },
            },
            (_, Some(variant)) => Mechanism::Bandit {
                variant,
                k: self.k,
                eps: self.eps,
                delta: self.delta,
                gamma: self.gamma,
                eta: self.eta,
            },
            _ => return Err(Error::config("algorithm", "audits cover the discrete algorithms only")),
        };
        let (f, f_prime) = match &self.streams {
            StreamPair::Distinguishing { n, horizon } => distinguishing_pair(*n, *horizon)?,
            StreamPair::Neighbor {
                spec,
                round,
                replacement_seed,
            } => {
                let f = generate_stream(spec)?;
                let other = generate_stream(&spec.with_seed(*replacement_seed))?;
                let g = neighboring_stream(&f, *round, other.round(*round)?.clone())?;
                (f, g)
            }
            StreamPair::Identical { spec } => {
                let f = generate_stream(spec)?;
                (f.clone(), f)
            }
            StreamPair::Files { f, f_prime } => (load_stream(f)?, load_stream(f_prime)?),
        };
        Ok(AuditConfig {
            mechanism,
            f,
            f_prime,
            trials: self.trials,
            granularity: self.granularity,
            alpha: self.alpha,
            bootstrap: self.bootstrap,
            seed_base: self.seed_base,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fi(eta: f64) -> Mechanism {
        Mechanism::FullInfo {
            k: 1,
            rate: LearningRate::NonPrivate { eta },
        }
    }

    #[test]
    fn estimator_properties() {
        let mut a = Counts::new();
        let mut b = Counts::new();
        a.insert((0, vec![1]), 90);
        a.insert((0, vec![2]), 10);
        b.insert((0, vec![1]), 10);
        b.insert((0, vec![2]), 90);
        let e = eps_hat_from_counts(&a, &b, 0.5);
        assert_eq!(e, eps_hat_from_counts(&b, &a, 0.5));
        assert!((e - (90.5f64 / 10.5).ln()).abs() < 1e-12);
        assert!(eps_hat_from_counts(&a, &b, 5.0) <= e);
        // Unseen on one side stays finite.
        b.remove(&(0, vec![2]));
        assert!(eps_hat_from_counts(&a, &b, 0.5).is_finite());
    }

    #[test]
    fn resample_preserves_group_totals() {
        let mut c = Counts::new();
        c.insert((1, vec![1]), 30);
        c.insert((1, vec![2]), 70);
        c.insert((2, vec![1]), 100);
        let mut rng = Rng::seed_from_u64(1);
        let r = resample(&c, &mut rng);
        let g1: u64 = r.iter().filter(|((g, _), _)| *g == 1).map(|(_, v)| v).sum();
        assert_eq!(g1, 100);
        assert_eq!(r[&(2, vec![1])], 100);
    }

    #[test]
    fn rejects_non_neighbors_and_large_spaces() {
        let (f, fp) = distinguishing_pair(2, 3).unwrap();
        let g = crate::submodular::GroundSet::with_size(2).unwrap();
        let far = FunctionStream::new(g, vec![fp.round(1).unwrap().clone(); 3]).unwrap();
        let cfg = AuditConfig::new(fi(0.1), f.clone(), far, 10);
        assert!(matches!(estimate_epsilon(&cfg), Err(Error::Mismatch(_))));

        let (f, fp) = distinguishing_pair(8, 4).unwrap();
        let cfg = AuditConfig::new(
            Mechanism::FullInfo {
                k: 3,
                rate: LearningRate::NonPrivate { eta: 0.1 },
            },
            f,
            fp,
            10,
        );
        assert!(matches!(estimate_epsilon(&cfg), Err(Error::Granularity { .. })));
    }

    #[test]
    fn granularity_default() {
        assert_eq!(Granularity::default_for(4), Granularity::FullSequence);
        assert_eq!(Granularity::default_for(5), Granularity::PerRound);
    }

    #[test]
    fn strong_learner_is_flagged() {
        let (f, fp) = distinguishing_pair(2, 3).unwrap();
        let mut cfg = AuditConfig::new(fi(5.0), f, fp, 2_000);
        cfg.bootstrap = 20;
        let r = estimate_epsilon(&cfg).unwrap();
        assert!(r.refutes(0.5));
        assert!(r.underpowered);
        assert_eq!(r.caveat, CAVEAT);
    }
}

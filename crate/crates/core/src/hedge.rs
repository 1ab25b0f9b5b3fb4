//! The Hedge (multiplicative weights) expert over a finite action set, the
//! privacy-calibrated learning rates, and the regret certificate
//!
//! ```text
//! max_i sum_t g_t(i) - sum_t x_t·g_t  <=  eta · sum_t x_t·g_t²  +  ln(N) / eta
//! ```
//!
//! which holds deterministically for the distributions Hedge produces,
//! whatever the payoff sequence.
//!
//! Weights are stored as logarithms: `w_1 = (1, .., 1)` is the zero vector,
//! an update adds `eta · g`, and the distribution is a softmax. An all-zero
//! payoff vector leaves the state bit-for-bit unchanged.

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for [`Certificate::passes`].
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// One Hedge instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpertState {
    log_weights: Vec<f64>,
    probs: Vec<f64>,
    eta: f64,
    updates: usize,
}

impl ExpertState {
    /// Uniform weights over `n` actions.
    pub fn new(n: usize, eta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("hedge needs at least one action"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param(format!("hedge learning rate must be positive, got {eta}")));
        }
        Ok(Self {
            log_weights: vec![0.0; n],
            probs: vec![1.0 / n as f64; n],
            eta,
            updates: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Number of updates applied so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    /// The induced distribution `x(i) = w(i) / sum_j w(j)`.
    pub fn distribution(&self) -> &[f64] {
        &self.probs
    }

    /// Draw an action: one uniform number against the cumulative
    /// distribution in index order. A draw landing exactly on a boundary goes
    /// to the lower index; zero-probability actions are never returned.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            cum += p;
            last = i;
            if u <= cum {
                return i;
            }
        }
        last
    }

    /// `w(i) <- w(i) · exp(eta · g(i))`.
    pub fn update(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: g.len(),
            });
        }
        if let Some((index, &value)) = g.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::PayoffRange { index, value });
        }
        for (l, &gi) in self.log_weights.iter_mut().zip(g) {
            *l += self.eta * gi;
        }
        self.refresh();
        self.updates += 1;
        Ok(())
    }

    fn refresh(&mut self) {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (p, &l) in self.probs.iter_mut().zip(&self.log_weights) {
            *p = (l - max).exp();
            total += *p;
        }
        for p in &mut self.probs {
            *p /= total;
        }
    }
}

/// One recorded Hedge step: the distribution used, the payoff vector fed
/// back afterwards, and the sampled action.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryStep {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub choice: usize,
}

/// The recorded run of one expert.
#[derive(Clone, Debug, PartialEq)]
pub struct HedgeHistory {
    pub eta: f64,
    pub steps: Vec<HistoryStep>,
}

impl HedgeHistory {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, x: Vec<f64>, g: Vec<f64>, choice: usize) {
        self.steps.push(HistoryStep { x, g, choice });
    }

    fn dim(&self) -> Result<usize> {
        let n = self.steps.first().map_or(0, |s| s.x.len());
        for s in &self.steps {
            if s.x.len() != n || s.g.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: if s.x.len() != n { s.x.len() } else { s.g.len() },
                });
            }
            if s.choice >= n {
                return Err(Error::Dimension {
                    expected: n,
                    got: s.choice + 1,
                });
            }
        }
        Ok(n)
    }

    fn column_sums(&self, n: usize) -> Vec<f64> {
        let mut sums = vec![0.0; n];
        for s in &self.steps {
            for (acc, g) in sums.iter_mut().zip(&s.g) {
                *acc += g;
            }
        }
        sums
    }

    /// Realized regret against the best fixed action, using the sampled
    /// actions: `max_a sum_t g_t(a) - sum_t g_t(choice_t)`.
    pub fn realized_regret(&self) -> Result<f64> {
        let n = self.dim()?;
        if n == 0 {
            return Ok(0.0);
        }
        let best = self.column_sums(n).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let got: f64 = self.steps.iter().map(|s| s.g[s.choice]).sum();
        Ok(best - got)
    }
}

/// Both sides of the Hedge regret inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    /// `max_i sum_t g_t(i) - sum_t x_t·g_t`.
    pub lhs: f64,
    /// `eta · sum_t x_t·g_t² + ln(N) / eta`.
    pub rhs: f64,
}

impl Certificate {
    pub fn passes(&self) -> bool {
        self.lhs <= self.rhs + CERTIFICATE_TOL
    }
}

/// Evaluate both sides of the regret inequality on a recorded history.
pub fn regret_certificate(history: &HedgeHistory) -> Result<Certificate> {
    let n = history.dim()?;
    if n == 0 {
        return Ok(Certificate { lhs: 0.0, rhs: 0.0 });
    }
    let mut expected = 0.0;
    let mut second = 0.0;
    for s in &history.steps {
        for (x, g) in s.x.iter().zip(&s.g) {
            expected += x * g;
            second += x * g * g;
        }
    }
    let best = history.column_sums(n).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let eta = history.eta;
    Ok(Certificate {
        lhs: best - expected,
        rhs: eta * second + (n as f64).ln() / eta,
    })
}

fn check_privacy_params(what: &str, eps: f64, delta: f64, k: usize) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::param(format!("{what}: requires eps > 0 (got eps={eps})")));
    }
    if k == 0 {
        return Err(Error::param(format!("{what}: requires k >= 1")));
    }
    if !(delta > 0.0 && delta < 1.0) || (k as f64 / delta) <= 1.0 {
        return Err(Error::param(format!(
            "{what}: requires 0 < delta < 1 and k/delta > 1 (got k={k}, delta={delta})"
        )));
    }
    Ok(())
}

/// `eps / (k · sqrt(32 · rounds · ln(k/delta)))`, the learning rate that
/// makes `k` chained Hedge experts jointly `(eps, delta)`-private when each
/// is queried `rounds` times.
fn eta_for_rounds(eps: f64, delta: f64, k: usize, rounds: f64) -> f64 {
    let k = k as f64;
    eps / (k * (32.0 * rounds * (k / delta).ln()).sqrt())
}

/// Learning rate for the full-information algorithm:
/// `eps / (k · sqrt(32 T ln(k/delta)))`.
pub fn calibrate_eta_full_info(eps: f64, delta: f64, k: usize, horizon: usize) -> Result<f64> {
    check_privacy_params("calibrate_eta_full_info", eps, delta, k)?;
    if horizon == 0 {
        return Err(Error::param("calibrate_eta_full_info: requires T >= 1"));
    }
    Ok(eta_for_rounds(eps, delta, k, horizon as f64))
}

/// Learning rate for the interval bandit algorithm, which resamples only
/// after exploration and expects fewer than `2 gamma T` of those:
/// `eps / (k · sqrt(32 (2 gamma T) ln(k/delta)))`.
pub fn calibrate_eta_bandit(eps: f64, delta: f64, k: usize, horizon: usize, gamma: f64) -> Result<f64> {
    check_privacy_params("calibrate_eta_bandit", eps, delta, k)?;
    if horizon == 0 {
        return Err(Error::param("calibrate_eta_bandit: requires T >= 1"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(format!("calibrate_eta_bandit: requires 0 < gamma <= 1 (got {gamma})")));
    }
    Ok(eta_for_rounds(eps, delta, k, 2.0 * gamma * horizon as f64))
}

/// Learning rate when the explore count `M` is known in advance:
/// `eps / (k · sqrt(32 (M + 1) ln(k/delta)))`.
pub fn calibrate_eta_explore_count(eps: f64, delta: f64, k: usize, explore_count: usize) -> Result<f64> {
    check_privacy_params("calibrate_eta_explore_count", eps, delta, k)?;
    Ok(eta_for_rounds(eps, delta, k, explore_count as f64 + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn init_is_uniform() {
        let s = ExpertState::new(4, 0.1).unwrap();
        assert_eq!(s.distribution(), &[0.25; 4]);
        assert_eq!(ExpertState::new(1, 0.1).unwrap().distribution(), &[1.0]);
        assert!(ExpertState::new(4, 0.0).is_err());
        assert!(ExpertState::new(4, -1.0).is_err());
        assert!(ExpertState::new(0, 1.0).is_err());
    }

    #[test]
    fn update_by_ln2_gives_two_thirds() {
        let mut s = ExpertState::new(2, 2f64.ln()).unwrap();
        s.update(&[1.0, 0.0]).unwrap();
        let x = s.distribution();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_update_is_identity() {
        let mut s = ExpertState::new(3, 0.7).unwrap();
        s.update(&[0.2, 0.9, 0.4]).unwrap();
        let before = s.clone();
        s.update(&[0.0; 3]).unwrap();
        assert_eq!(s.log_weights(), before.log_weights());
        assert_eq!(s.distribution(), before.distribution());
    }

    #[test]
    fn updates_are_additive() {
        let g1 = [0.3, 0.1, 0.5];
        let g2 = [0.2, 0.6, 0.4];
        let mut a = ExpertState::new(3, 0.9).unwrap();
        a.update(&g1).unwrap();
        a.update(&g2).unwrap();
        let mut b = ExpertState::new(3, 0.9).unwrap();
        let sum: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| x + y).collect();
        b.update(&sum).unwrap();
        for (x, y) in a.distribution().iter().zip(b.distribution()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn payoff_range_and_dimension_errors() {
        let mut s = ExpertState::new(2, 0.1).unwrap();
        assert!(matches!(s.update(&[1.2, 0.0]), Err(Error::PayoffRange { index: 0, .. })));
        assert!(matches!(s.update(&[-0.1, 0.0]), Err(Error::PayoffRange { .. })));
        assert!(matches!(s.update(&[0.1]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn sampling_frequencies_match_weights() {
        let mut s = ExpertState::new(2, 2f64.ln()).unwrap();
        s.update(&[1.0, 0.0]).unwrap();
        let mut rng = stream_rng(11, 0);
        let draws = 1_000_000;
        let zeros = (0..draws).filter(|_| s.sample(&mut rng) == 0).count();
        let freq = zeros as f64 / draws as f64;
        assert!((freq - 2.0 / 3.0).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn sampling_single_action_and_determinism() {
        let s = ExpertState::new(1, 0.5).unwrap();
        let mut rng = stream_rng(1, 0);
        assert!((0..100).all(|_| s.sample(&mut rng) == 0));
        let s = ExpertState::new(5, 0.5).unwrap();
        let a: Vec<usize> = {
            let mut r = stream_rng(3, 9);
            (0..50).map(|_| s.sample(&mut r)).collect()
        };
        let b: Vec<usize> = {
            let mut r = stream_rng(3, 9);
            (0..50).map(|_| s.sample(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn certificate_single_round() {
        let g = vec![0.9, 0.1, 0.5];
        let mut h = HedgeHistory::new(0.3);
        h.push(vec![1.0 / 3.0; 3], g.clone(), 0);
        let c = regret_certificate(&h).unwrap();
        let mean = g.iter().sum::<f64>() / 3.0;
        assert!((c.lhs - (0.9 - mean)).abs() < 1e-15);
        assert!(c.passes());
    }

    #[test]
    fn certificate_dimension_mismatch() {
        let mut h = HedgeHistory::new(0.3);
        h.push(vec![0.5, 0.5], vec![0.1, 0.2, 0.3], 0);
        assert!(regret_certificate(&h).is_err());
    }

    #[test]
    fn calibration_examples() {
        let eta = calibrate_eta_full_info(1.0, 0.01, 2, 100).unwrap();
        let oracle = 1.0 / (2.0 * (3200.0 * 200f64.ln()).sqrt());
        assert!((eta - oracle).abs() < 1e-15);
        assert!((eta - 0.003840).abs() < 5e-7);

        let eta = calibrate_eta_full_info(1.0, 0.01, 1, 32).unwrap();
        assert!((eta - 0.0145622063).abs() < 1e-10);

        let e1 = calibrate_eta_full_info(1.0, 0.001, 3, 500).unwrap();
        let e2 = calibrate_eta_full_info(2.0, 0.001, 3, 500).unwrap();
        assert!((e2 - 2.0 * e1).abs() < 1e-15);
    }

    #[test]
    fn bandit_calibration() {
        let eta = calibrate_eta_bandit(1.0, 0.01, 1, 100, 0.5).unwrap();
        assert!((eta - 1.0 / (32.0 * 100.0 * 100f64.ln()).sqrt()).abs() < 1e-15);
        assert!((eta - 0.0082376279).abs() < 1e-10);

        let a = calibrate_eta_bandit(1.0, 0.01, 2, 300, 1.0).unwrap();
        let b = calibrate_eta_full_info(1.0, 0.01, 2, 600).unwrap();
        assert_eq!(a, b);

        let mut prev = f64::INFINITY;
        for t in [10, 100, 1000, 10_000] {
            let e = calibrate_eta_bandit(1.0, 0.01, 2, t, 0.3).unwrap();
            assert!(e < prev);
            prev = e;
        }
        assert!(calibrate_eta_bandit(1.0, 0.01, 2, 100, 0.0).is_err());
        assert!(calibrate_eta_bandit(1.0, 0.01, 2, 100, 1.5).is_err());
    }

    #[test]
    fn calibration_preconditions() {
        let err = calibrate_eta_full_info(1.0, 2.0, 1, 100).unwrap_err().to_string();
        assert!(err.contains("calibrate_eta_full_info"), "{err}");
        assert!(calibrate_eta_full_info(0.0, 0.1, 1, 100).is_err());
        assert!(calibrate_eta_full_info(1.0, 0.1, 0, 100).is_err());
        assert!(calibrate_eta_full_info(1.0, 0.1, 1, 0).is_err());
    }
}

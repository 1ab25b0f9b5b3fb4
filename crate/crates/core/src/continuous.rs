//! Online maximization of monotone DR-submodular functions over a box.
//!
//! `K` online linear optimizers run in parallel. Each round optimizer `k`
//! proposes `v^k`, the learner plays `x_t = (1/K) sum_k v^k`, and optimizer
//! `k` is then fed the gradient of `f_t` at the partial average
//! `x^k = (1/K) sum_{i<k} v^i` (the origin for `k = 0`). The domain must
//! contain the origin for those partial averages to be feasible.

use std::io::Write;

use log::warn;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{noise_rng, stream_rng, Rng, STREAM_PARAMS};

const DOMAIN_TOL: f64 = 1e-12;

/// `prod_j [lo_j, hi_j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::param("box domain needs dimension >= 1"));
        }
        for (j, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::param(format!("box coordinate {j}: need finite lo <= hi, got [{l}, {h}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[0, 1]^n`.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains_origin(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(&l, &h)| l <= 0.0 && 0.0 <= h)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (j, &v) in x.iter().enumerate() {
            let (lo, hi) = (self.lo[j], self.hi[j]);
            if !(v >= lo - DOMAIN_TOL && v <= hi + DOMAIN_TOL) {
                return Err(Error::OutsideDomain { coord: j, value: v, lo, hi });
            }
        }
        Ok(())
    }

    /// `sup_{x in box} ||x||_2`.
    pub fn radius(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `argmax_{v in box} g·v`, coordinatewise; the midpoint on a zero entry.
    pub fn linear_argmax(&self, g: &[f64], out: &mut [f64]) {
        for j in 0..self.dim() {
            out[j] = if g[j] > 0.0 {
                self.hi[j]
            } else if g[j] < 0.0 {
                self.lo[j]
            } else {
                0.5 * (self.lo[j] + self.hi[j])
            };
        }
    }

    /// `max_{v in box} g·v`.
    pub fn linear_max(&self, g: &[f64]) -> f64 {
        g.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&gj, (&l, &h))| (gj * l).max(gj * h))
            .sum()
    }

    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| l + (h - l) * rng.random::<f64>())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DrFamily {
    /// `1 - prod_a (1 - p_a x_a)`.
    MultilinearCoverage { p: Vec<f64> },
    /// `scale (a·x - x'Hx / 2)`.
    ConcaveQuadratic { a: Vec<f64>, h: Vec<Vec<f64>>, scale: f64 },
}

/// A differentiable round function for the continuous learner.
///
/// Constructors check shapes and ranges only; whether a particular oracle
/// is DR-submodular and monotone on a domain is what [`check_dr`] tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrOracle {
    family: DrFamily,
}

impl DrOracle {
    pub fn multilinear_coverage(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::param("multilinear coverage needs n >= 1"));
        }
        if let Some((i, &v)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!("coverage probability p[{i}] = {v} outside [0, 1]")));
        }
        Ok(Self {
            family: DrFamily::MultilinearCoverage { p },
        })
    }

    pub fn concave_quadratic(a: Vec<f64>, h: Vec<Vec<f64>>, scale: f64) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::param("concave quadratic needs n >= 1"));
        }
        if h.len() != n || h.iter().any(|row| row.len() != n) {
            return Err(Error::param(format!("H must be {n}x{n}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param(format!("scale must be positive, got {scale}")));
        }
        if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("linear term a must be finite and nonnegative"));
        }
        for i in 0..n {
            for j in 0..n {
                if !h[i][j].is_finite() || h[i][j] != h[j][i] {
                    return Err(Error::param(format!("H must be finite and symmetric (entry {i},{j})")));
                }
            }
        }
        Ok(Self {
            family: DrFamily::ConcaveQuadratic { a, h, scale },
        })
    }

    pub fn family(&self) -> &DrFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            DrFamily::MultilinearCoverage { p } => p.len(),
            DrFamily::ConcaveQuadratic { a, .. } => a.len(),
        }
    }

    /// Closed-form value; no domain check.
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.family {
            DrFamily::MultilinearCoverage { p } => 1.0 - p.iter().zip(x).map(|(p, x)| 1.0 - p * x).product::<f64>(),
            DrFamily::ConcaveQuadratic { a, h, scale } => {
                let lin: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
                let quad: f64 = h
                    .iter()
                    .zip(x)
                    .map(|(row, xi)| xi * row.iter().zip(x).map(|(hij, xj)| hij * xj).sum::<f64>())
                    .sum();
                scale * (lin - 0.5 * quad)
            }
        }
    }

    /// Closed-form gradient; no domain check.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.family {
            DrFamily::MultilinearCoverage { p } => {
                for a in 0..p.len() {
                    out[a] = p[a]
                        * p.iter()
                            .zip(x)
                            .enumerate()
                            .filter(|(b, _)| *b != a)
                            .map(|(_, (pb, xb))| 1.0 - pb * xb)
                            .product::<f64>();
                }
            }
            DrFamily::ConcaveQuadratic { a, h, scale } => {
                for (i, row) in h.iter().enumerate() {
                    out[i] = scale * (a[i] - row.iter().zip(x).map(|(hij, xj)| hij * xj).sum::<f64>());
                }
            }
        }
    }

    /// Smoothness constant: a Frobenius-norm bound on the Hessian, valid on
    /// `[0, 1]^n` for coverage and everywhere for the quadratic.
    pub fn beta(&self) -> f64 {
        match &self.family {
            DrFamily::MultilinearCoverage { p } => {
                let mut s = 0.0;
                for (a, pa) in p.iter().enumerate() {
                    for (b, pb) in p.iter().enumerate() {
                        if a != b {
                            s += (pa * pb).powi(2);
                        }
                    }
                }
                s.sqrt()
            }
            DrFamily::ConcaveQuadratic { h, scale, .. } => {
                scale * h.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
            }
        }
    }

    /// Upper bound on `||grad f(x)||_2` over `domain`.
    pub fn gradient_bound(&self, domain: &BoxDomain) -> f64 {
        let reach = |j: usize| domain.lo[j].abs().max(domain.hi[j].abs());
        match &self.family {
            DrFamily::MultilinearCoverage { p } => {
                let factor: Vec<f64> = (0..p.len())
                    .map(|b| (1.0 - p[b] * domain.lo[b]).abs().max((1.0 - p[b] * domain.hi[b]).abs()))
                    .collect();
                (0..p.len())
                    .map(|a| {
                        let prod: f64 = (0..p.len()).filter(|&b| b != a).map(|b| factor[b]).product();
                        (p[a] * prod).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            DrFamily::ConcaveQuadratic { a, h, scale } => (0..a.len())
                .map(|i| {
                    let m = a[i] + (0..a.len()).map(|j| h[i][j].abs() * reach(j)).sum::<f64>();
                    (scale * m).powi(2)
                })
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Evaluate after checking `x` lies in `domain`.
pub fn eval_dr(oracle: &DrOracle, domain: &BoxDomain, x: &[f64]) -> Result<f64> {
    check_dims(oracle, domain)?;
    domain.check(x)?;
    Ok(oracle.value(x))
}

/// Gradient after checking `x` lies in `domain`.
pub fn grad_dr(oracle: &DrOracle, domain: &BoxDomain, x: &[f64]) -> Result<Vec<f64>> {
    check_dims(oracle, domain)?;
    domain.check(x)?;
    let mut g = vec![0.0; x.len()];
    oracle.gradient_into(x, &mut g);
    Ok(g)
}

fn check_dims(oracle: &DrOracle, domain: &BoxDomain) -> Result<()> {
    if oracle.dim() != domain.dim() {
        return Err(Error::Dimension {
            expected: domain.dim(),
            got: oracle.dim(),
        });
    }
    Ok(())
}

pub const DR_PAIR_TOL: f64 = 1e-9;
pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-5;

/// First failure found by [`check_dr`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DrViolation {
    /// `x <= y` but `grad f(x)[coord] < grad f(y)[coord]`.
    NotDr { x: Vec<f64>, y: Vec<f64>, coord: usize },
    NotMonotone { x: Vec<f64>, coord: usize },
    Gradient {
        x: Vec<f64>,
        coord: usize,
        analytic: f64,
        numeric: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DrCheck {
    pub holds: bool,
    pub witness: Option<DrViolation>,
    /// Largest gradient/central-difference relative error seen.
    pub max_rel_error: f64,
}

/// Relative error used by the finite-difference check; the floor keeps
/// near-zero partials from amplifying rounding noise.
pub fn fd_relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1e-3)
}

/// Sample `m` comparable pairs `x <= y` in `domain` and check the DR
/// inequality, monotonicity and central-difference gradient agreement.
pub fn check_dr(oracle: &DrOracle, domain: &BoxDomain, m: usize, seed: u64) -> Result<DrCheck> {
    if m == 0 {
        return Err(Error::param("check_dr needs m >= 1 sample pairs"));
    }
    check_dims(oracle, domain)?;
    let n = domain.dim();
    let mut rng = stream_rng(seed, STREAM_PARAMS);
    let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
    let mut max_rel_error: f64 = 0.0;
    let mut witness = None;
    for _ in 0..m {
        let x = domain.sample(&mut rng);
        let y: Vec<f64> = x
            .iter()
            .zip(&domain.hi)
            .map(|(&xj, &h)| xj + (h - xj) * rng.random::<f64>())
            .collect();
        oracle.gradient_into(&x, &mut gx);
        oracle.gradient_into(&y, &mut gy);
        for j in 0..n {
            let numeric = central_difference(oracle, &x, j);
            let rel = fd_relative_error(gx[j], numeric);
            max_rel_error = max_rel_error.max(rel);
            if witness.is_some() {
                continue;
            }
            if gx[j] < gy[j] - DR_PAIR_TOL {
                witness = Some(DrViolation::NotDr {
                    x: x.clone(),
                    y: y.clone(),
                    coord: j,
                });
            } else if gx[j] < -DR_PAIR_TOL {
                witness = Some(DrViolation::NotMonotone { x: x.clone(), coord: j });
            } else if rel > FD_REL_TOL {
                witness = Some(DrViolation::Gradient {
                    x: x.clone(),
                    coord: j,
                    analytic: gx[j],
                    numeric,
                });
            }
        }
    }
    Ok(DrCheck {
        holds: witness.is_none(),
        witness,
        max_rel_error,
    })
}

fn central_difference(oracle: &DrOracle, x: &[f64], j: usize) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[j] += FD_STEP;
    xm[j] -= FD_STEP;
    (oracle.value(&xp) - oracle.value(&xm)) / (2.0 * FD_STEP)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KCalibration {
    pub k: usize,
    pub raw: f64,
    pub clamped: bool,
}

/// Number of inner optimizers: `sqrt(sqrt(T) / ln(T)^2.5)` rounded half up,
/// at least 1 (with a warning when the raw value is below 1).
pub fn calibrate_k(horizon: usize) -> Result<KCalibration> {
    if horizon < 2 {
        return Err(Error::param(format!("calibrate_k: requires T >= 2, got {horizon}")));
    }
    let t = horizon as f64;
    let raw = (t.sqrt() / t.ln().powf(2.5)).sqrt();
    let clamped = raw < 1.0;
    if clamped {
        warn!("K formula gives {raw:.4} < 1 at T={horizon}; using K=1");
    }
    Ok(KCalibration {
        k: ((raw + 0.5).floor() as usize).max(1),
        raw,
        clamped,
    })
}

/// An online linear maximizer over a box.
pub trait LinearOptimizer: Send {
    /// The point to play this round.
    fn predict(&mut self) -> Vec<f64>;
    /// Reveal this round's linear objective `v -> g·v`.
    fn observe(&mut self, g: &[f64]) -> Result<()>;
}

/// Plays the box maximizer of the cumulative gradient.
#[derive(Clone, Debug)]
pub struct FollowTheLeader {
    domain: BoxDomain,
    cumulative: Vec<f64>,
}

impl FollowTheLeader {
    pub fn new(domain: BoxDomain) -> Self {
        let n = domain.dim();
        Self {
            domain,
            cumulative: vec![0.0; n],
        }
    }
}

impl LinearOptimizer for FollowTheLeader {
    fn predict(&mut self) -> Vec<f64> {
        let mut v = vec![0.0; self.domain.dim()];
        self.domain.linear_argmax(&self.cumulative, &mut v);
        v
    }

    fn observe(&mut self, g: &[f64]) -> Result<()> {
        accumulate(&mut self.cumulative, g)
    }
}

fn accumulate(acc: &mut [f64], g: &[f64]) -> Result<()> {
    if g.len() != acc.len() {
        return Err(Error::Dimension {
            expected: acc.len(),
            got: g.len(),
        });
    }
    for (a, v) in acc.iter_mut().zip(g) {
        *a += v;
    }
    Ok(())
}

/// Binary-tree aggregation of per-node Gaussian noise for running sums.
///
/// After `t` insertions the released noise is the sum of the nodes in the
/// dyadic decomposition of `t`; each insertion touches at most `levels`
/// nodes.
#[derive(Clone, Debug)]
pub struct TreeAggregator {
    nodes: Vec<Option<Vec<f64>>>,
    sigma: f64,
    count: usize,
    dim: usize,
    rng: Rng,
}

impl TreeAggregator {
    pub fn new(dim: usize, horizon: usize, sigma: f64, rng: Rng) -> Self {
        Self {
            nodes: vec![None; tree_levels(horizon)],
            sigma,
            count: 0,
            dim,
            rng,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Advance by one insertion.
    pub fn step(&mut self) {
        self.count += 1;
        let level = self.count.trailing_zeros() as usize;
        if level >= self.nodes.len() {
            self.nodes.resize(level + 1, None);
        }
        for node in &mut self.nodes[..level] {
            *node = None;
        }
        let sigma = self.sigma;
        let fresh = (0..self.dim)
            .map(|_| sigma * self.rng.sample::<f64, _>(StandardNormal))
            .collect();
        self.nodes[level] = Some(fresh);
    }

    /// Noise covering the first `count` insertions.
    pub fn noise(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for node in self.nodes.iter().flatten() {
            for (o, z) in out.iter_mut().zip(node) {
                *o += z;
            }
        }
        out
    }
}

/// `floor(log2 T) + 1`.
pub fn tree_levels(horizon: usize) -> usize {
    (usize::BITS - horizon.max(1).leading_zeros()) as usize
}

/// Gaussian noise scale for the tree mechanism: `sqrt(L) * sensitivity *
/// sqrt(2 ln(1.25/delta')) / eps'`.
pub fn tree_sigma(eps: f64, delta_prime: f64, sensitivity: f64, horizon: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::param(format!("optimizer eps must be positive, got {eps}")));
    }
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(Error::param(format!("delta' must lie in (0, 1), got {delta_prime}")));
    }
    let levels = tree_levels(horizon) as f64;
    Ok(levels.sqrt() * sensitivity * (2.0 * (1.25 / delta_prime).ln()).sqrt() / eps)
}

/// Follow-the-leader on tree-noised cumulative gradients.
#[derive(Clone, Debug)]
pub struct NoisyFollowTheLeader {
    inner: FollowTheLeader,
    tree: TreeAggregator,
}

impl NoisyFollowTheLeader {
    pub fn new(domain: BoxDomain, horizon: usize, sigma: f64, rng: Rng) -> Self {
        let n = domain.dim();
        Self {
            inner: FollowTheLeader::new(domain),
            tree: TreeAggregator::new(n, horizon, sigma, rng),
        }
    }
}

impl LinearOptimizer for NoisyFollowTheLeader {
    fn predict(&mut self) -> Vec<f64> {
        let mut noisy = self.tree.noise();
        for (z, c) in noisy.iter_mut().zip(&self.inner.cumulative) {
            *z += c;
        }
        let mut v = vec![0.0; noisy.len()];
        self.inner.domain.linear_argmax(&noisy, &mut v);
        v
    }

    fn observe(&mut self, g: &[f64]) -> Result<()> {
        self.inner.observe(g)?;
        self.tree.step();
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    FollowTheLeader,
    NoisyFollowTheLeader,
}

pub const DEFAULT_DELTA_PRIME: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrConfig {
    pub eps: f64,
    /// Number of inner optimizers; `None` uses [`calibrate_k`].
    #[serde(default)]
    pub k: Option<usize>,
    pub optimizer: OptimizerKind,
    #[serde(default = "default_delta_prime")]
    pub delta_prime: f64,
    pub seed: u64,
}

fn default_delta_prime() -> f64 {
    DEFAULT_DELTA_PRIME
}

impl DrConfig {
    pub fn new(eps: f64, optimizer: OptimizerKind, seed: u64) -> Self {
        Self {
            eps,
            k: None,
            optimizer,
            delta_prime: DEFAULT_DELTA_PRIME,
            seed,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn resolve_k(&self, horizon: usize) -> Result<usize> {
        match self.k {
            Some(0) => Err(Error::param("K must be >= 1")),
            Some(k) => Ok(k),
            None => Ok(calibrate_k(horizon)?.k),
        }
    }
}

/// State of one continuous run.
pub struct DrState {
    domain: BoxDomain,
    optimizers: Vec<Box<dyn LinearOptimizer>>,
    horizon: usize,
    round: usize,
    /// Per optimizer: cumulative gradient and cumulative earned `g·v`.
    cum_grad: Vec<Vec<f64>>,
    earned: Vec<f64>,
}

impl DrState {
    pub fn new(domain: BoxDomain, optimizers: Vec<Box<dyn LinearOptimizer>>, horizon: usize) -> Result<Self> {
        if optimizers.is_empty() {
            return Err(Error::param("need at least one linear optimizer"));
        }
        if !domain.contains_origin() {
            return Err(Error::param("box domain must contain the origin"));
        }
        let k = optimizers.len();
        let n = domain.dim();
        Ok(Self {
            domain,
            optimizers,
            horizon,
            round: 0,
            cum_grad: vec![vec![0.0; n]; k],
            earned: vec![0.0; k],
        })
    }

    pub fn k(&self) -> usize {
        self.optimizers.len()
    }

    /// Realized regret of each optimizer against the best fixed box point.
    pub fn linear_regrets(&self) -> Vec<f64> {
        self.cum_grad
            .iter()
            .zip(&self.earned)
            .map(|(g, e)| self.domain.linear_max(g) - e)
            .collect()
    }
}

/// Play one round: returns `(x_t, f_t(x_t))`.
pub fn dr_round(state: &mut DrState, f: &DrOracle) -> Result<(Vec<f64>, f64)> {
    if state.round >= state.horizon {
        return Err(Error::HorizonExceeded(state.horizon));
    }
    check_dims(f, &state.domain)?;
    let n = state.domain.dim();
    let k = state.optimizers.len();
    let mut vs = Vec::with_capacity(k);
    for (i, opt) in state.optimizers.iter_mut().enumerate() {
        let v = opt.predict();
        if let Err(e) = state.domain.check(&v) {
            return Err(Error::ContractViolation {
                index: i,
                reason: e.to_string(),
            });
        }
        vs.push(v);
    }
    state.round += 1;
    let inv_k = 1.0 / k as f64;
    let mut partial = vec![0.0; n];
    let mut g = vec![0.0; n];
    for (i, v) in vs.iter().enumerate() {
        f.gradient_into(&partial, &mut g);
        state.optimizers[i].observe(&g)?;
        for j in 0..n {
            state.cum_grad[i][j] += g[j];
        }
        state.earned[i] += g.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        for j in 0..n {
            partial[j] += inv_k * v[j];
        }
    }
    let value = f.value(&partial);
    Ok((partial, value))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRound {
    pub t: usize,
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousTrace {
    pub k: usize,
    /// Budget given to each optimizer.
    pub eps_prime: f64,
    /// Tree noise scale (0 for the non-private optimizer).
    pub sigma: f64,
    pub rounds: Vec<ContinuousRound>,
    pub linear_regrets: Vec<f64>,
}

impl ContinuousTrace {
    pub fn total_value(&self) -> f64 {
        self.rounds.iter().map(|r| r.value).sum()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.rounds {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Run the meta-algorithm over `stream`. Each optimizer gets `eps / K`.
pub fn run_dr(stream: &[DrOracle], domain: &BoxDomain, config: &DrConfig) -> Result<ContinuousTrace> {
    let horizon = stream.len();
    if horizon == 0 {
        return Err(Error::param("continuous stream is empty"));
    }
    for f in stream {
        check_dims(f, domain)?;
    }
    if !(config.eps > 0.0) {
        return Err(Error::param(format!("eps must be positive, got {}", config.eps)));
    }
    let k = config.resolve_k(horizon)?;
    let eps_prime = config.eps / k as f64;
    let sigma = match config.optimizer {
        OptimizerKind::FollowTheLeader => 0.0,
        OptimizerKind::NoisyFollowTheLeader => {
            let g = stream.iter().map(|f| f.gradient_bound(domain)).fold(0.0, f64::max);
            tree_sigma(eps_prime, config.delta_prime, 2.0 * g, horizon)?
        }
    };
    let optimizers: Vec<Box<dyn LinearOptimizer>> = (0..k)
        .map(|i| -> Box<dyn LinearOptimizer> {
            match config.optimizer {
                OptimizerKind::FollowTheLeader => Box::new(FollowTheLeader::new(domain.clone())),
                OptimizerKind::NoisyFollowTheLeader => Box::new(NoisyFollowTheLeader::new(
                    domain.clone(),
                    horizon,
                    sigma,
                    noise_rng(config.seed, i),
                )),
            }
        })
        .collect();
    let mut state = DrState::new(domain.clone(), optimizers, horizon)?;
    let mut rounds = Vec::with_capacity(horizon);
    for (t, f) in stream.iter().enumerate() {
        let (x, value) = dr_round(&mut state, f)?;
        rounds.push(ContinuousRound { t: t + 1, x, value });
    }
    Ok(ContinuousTrace {
        k,
        eps_prime,
        sigma,
        linear_regrets: state.linear_regrets(),
        rounds,
    })
}

/// Both sides of the regret decomposition
/// `(1-1/e) max_x sum f_t(x) - sum f_t(x_t) <= (1/K) sum_k r_k + beta R^2 T / (2K)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    pub lhs: f64,
    pub rhs: f64,
}

impl Decomposition {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

pub fn decomposition(trace: &ContinuousTrace, stream: &[DrOracle], domain: &BoxDomain, best_total: f64) -> Result<Decomposition> {
    if trace.rounds.len() != stream.len() {
        return Err(Error::Mismatch(format!(
            "trace has {} rounds, stream has {}",
            trace.rounds.len(),
            stream.len()
        )));
    }
    let k = trace.k as f64;
    let beta = stream.iter().map(DrOracle::beta).fold(0.0, f64::max);
    let r = domain.radius();
    let lhs = (1.0 - (-1f64).exp()) * best_total - trace.total_value();
    let rhs = trace.linear_regrets.iter().sum::<f64>() / k + beta * r * r * stream.len() as f64 / (2.0 * k);
    Ok(Decomposition { lhs, rhs })
}

/// `max_x sum_t f_t(x)` over a regular grid with `resolution` cells per
/// axis; returns the maximizing grid point and the value.
pub fn grid_max(stream: &[DrOracle], domain: &BoxDomain, resolution: usize) -> Result<(Vec<f64>, f64)> {
    if resolution == 0 {
        return Err(Error::param("grid resolution must be >= 1"));
    }
    let n = domain.dim();
    let per_axis = resolution + 1;
    let points = (per_axis as f64).powi(n as i32);
    if points * stream.len() as f64 > 1e8 {
        return Err(Error::Size(format!(
            "grid of {points} points over {} rounds exceeds 1e8 evaluations",
            stream.len()
        )));
    }
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    loop {
        for j in 0..n {
            x[j] = domain.lo[j] + (domain.hi[j] - domain.lo[j]) * idx[j] as f64 / resolution as f64;
        }
        let total: f64 = stream.iter().map(|f| f.value(&x)).sum();
        if total > best.1 {
            best = (x.clone(), total);
        }
        let mut j = 0;
        while j < n {
            idx[j] += 1;
            if idx[j] < per_axis {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == n {
            return Ok(best);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrFamilyKind {
    MultilinearCoverage,
    ConcaveQuadratic,
}

/// Random monotone DR streams on the unit box.
///
/// Coverage draws `p_a ~ U[0.05, 0.95]`. The quadratic draws
/// `a_i ~ U[0.5, 1]` and a symmetric nonnegative `H` whose row sums are at
/// most `a_i`, which keeps the gradient nonnegative on `[0, 1]^n`; `scale`
/// is `1 / sum a` so values stay in `[0, 1]`.
pub fn generate_dr_stream(kind: DrFamilyKind, n: usize, horizon: usize, seed: u64) -> Result<Vec<DrOracle>> {
    if n == 0 || horizon == 0 {
        return Err(Error::param("DR stream needs n >= 1 and T >= 1"));
    }
    let mut rng = stream_rng(seed, STREAM_PARAMS);
    (0..horizon)
        .map(|_| match kind {
            DrFamilyKind::MultilinearCoverage => {
                DrOracle::multilinear_coverage((0..n).map(|_| 0.05 + 0.9 * rng.random::<f64>()).collect())
            }
            DrFamilyKind::ConcaveQuadratic => {
                let a: Vec<f64> = (0..n).map(|_| 0.5 + 0.5 * rng.random::<f64>()).collect();
                let mut h = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in i..n {
                        let v = rng.random::<f64>();
                        h[i][j] = v;
                        h[j][i] = v;
                    }
                }
                let shrink = (0..n)
                    .map(|i| a[i] / h[i].iter().sum::<f64>().max(f64::MIN_POSITIVE))
                    .fold(f64::INFINITY, f64::min)
                    .min(1.0);
                for row in &mut h {
                    for v in row.iter_mut() {
                        *v *= shrink;
                    }
                }
                let scale = 1.0 / a.iter().sum::<f64>();
                DrOracle::concave_quadratic(a, h, scale)
            }
        })
        .collect()
}

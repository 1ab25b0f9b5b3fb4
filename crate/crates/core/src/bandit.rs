//! Bandit-feedback private online maximization.
//!
//! Each round flips a `Bernoulli(gamma)` coin. On an explore round one
//! expert `i` and one item `a` are drawn uniformly, the learner plays
//! `S^{i-1} + a` (the first `i-1` experts' items plus `a`) and only expert
//! `i` receives a nonzero feedback vector: the observed set value at entry
//! `a`. Three variants:
//!
//! * [`BanditVariant::Interval`]: experts resample only right after an
//!   explore round; exploit rounds replay the held set and touch no state.
//!   Learning rate `eps / (k sqrt(32 (2 gamma T) ln(k/delta)))`.
//! * [`BanditVariant::Presampled`]: all `T` coins are drawn up front, `M` is
//!   their count, and the rate uses `M + 1` instead of `2 gamma T`.
//! * [`BanditVariant::Naive`]: experts resample every round and exploit
//!   rounds feed all-zero vectors; the rate is the full-information one.

use log::warn;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedge::{calibrate_eta_bandit, calibrate_eta_explore_count, calibrate_eta_full_info, ExpertState, HedgeHistory};
use crate::rng::{expert_rng, stream_rng, Rng, EXPLORE_COIN, EXPLORE_EXPERT, EXPLORE_ITEM};
use crate::submodular::{FunctionStream, ItemSet, SetFunction, SubmodularOracle};
use crate::trace::{ExploreRecord, RoundRecord, RunParams, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanditVariant {
    Interval,
    Presampled,
    Naive,
}

/// Result of the exploration-rate formula `k ((16 n ln n)^2 / T)^{1/3}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaCalibration {
    /// `min(1, raw)`.
    pub gamma: f64,
    pub raw: f64,
    pub clamped: bool,
}

/// Exploration probability, clamped to 1 (with a warning) when the formula
/// exceeds it at small horizons.
pub fn calibrate_gamma(k: usize, n: usize, horizon: usize) -> Result<GammaCalibration> {
    if n < 2 {
        return Err(Error::param(format!("calibrate_gamma: requires n >= 2 so that ln n > 0 (got n={n})")));
    }
    if k == 0 || horizon == 0 {
        return Err(Error::param("calibrate_gamma: requires k >= 1 and T >= 1"));
    }
    let n = n as f64;
    let raw = k as f64 * ((16.0 * n * n.ln()).powi(2) / horizon as f64).cbrt();
    let clamped = raw > 1.0;
    if clamped {
        warn!("exploration rate {raw:.4} exceeds 1 at T={horizon}; clamping to 1");
    }
    Ok(GammaCalibration {
        gamma: raw.min(1.0),
        raw,
        clamped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditConfig {
    pub variant: BanditVariant,
    pub eps: f64,
    pub delta: f64,
    pub k: usize,
    /// Exploration probability; `None` uses [`calibrate_gamma`].
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Replaces the calibrated learning rate (no privacy claim).
    #[serde(default)]
    pub eta: Option<f64>,
    pub seed: u64,
}

impl BanditConfig {
    pub fn new(variant: BanditVariant, k: usize, eps: f64, delta: f64, seed: u64) -> Self {
        Self {
            variant,
            eps,
            delta,
            k,
            gamma: None,
            eta: None,
            seed,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn resolve_gamma(&self, n: usize, horizon: usize) -> Result<f64> {
        match self.gamma {
            Some(g) if g > 0.0 && g <= 1.0 => Ok(g),
            Some(g) => Err(Error::param(format!("gamma must lie in (0, 1], got {g}"))),
            None => Ok(calibrate_gamma(self.k, n, horizon)?.gamma),
        }
    }
}

/// The per-expert estimator entry: `f(prefix + a)` when this round explored
/// expert `expert` at item `item`, else 0.
pub fn estimator_entry(
    f: &SubmodularOracle,
    prefix: &ItemSet,
    probe: Option<&ExploreRecord>,
    expert: usize,
    item: usize,
) -> Result<f64> {
    match probe {
        Some(p) if p.expert == expert && p.item == item => f.eval(&prefix.with(item)),
        _ => Ok(0.0),
    }
}

/// The full estimator vector for one expert.
pub fn estimator_vector(
    f: &SubmodularOracle,
    prefix: &ItemSet,
    probe: Option<&ExploreRecord>,
    expert: usize,
) -> Result<Vec<f64>> {
    (0..f.len())
        .map(|a| estimator_entry(f, prefix, probe, expert, a))
        .collect()
}

/// State of one bandit run.
#[derive(Clone, Debug)]
pub struct BanditState {
    variant: BanditVariant,
    experts: Vec<ExpertState>,
    expert_rngs: Vec<Rng>,
    coin_rng: Rng,
    index_rng: Rng,
    item_rng: Rng,
    flags: Option<Vec<bool>>,
    choices: Vec<usize>,
    gamma: f64,
    horizon: usize,
    round: usize,
    histories: Option<Vec<HedgeHistory>>,
    zero: Vec<f64>,
}

impl BanditState {
    pub fn new(n: usize, horizon: usize, config: &BanditConfig) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::param("k must be >= 1"));
        }
        if horizon == 0 {
            return Err(Error::param("horizon T must be >= 1"));
        }
        let gamma = config.resolve_gamma(n, horizon)?;
        let mut coin_rng = stream_rng(config.seed, EXPLORE_COIN);
        let flags = match config.variant {
            BanditVariant::Presampled => Some(
                (0..horizon)
                    .map(|_| coin_rng.random::<f64>() < gamma)
                    .collect::<Vec<_>>(),
            ),
            _ => None,
        };
        let eta = match (config.eta, config.variant) {
            (Some(eta), _) => {
                if !(eta > 0.0 && eta.is_finite()) {
                    return Err(Error::param(format!("learning rate override must be positive, got {eta}")));
                }
                eta
            }
            (None, BanditVariant::Interval) => calibrate_eta_bandit(config.eps, config.delta, config.k, horizon, gamma)?,
            (None, BanditVariant::Presampled) => {
                let m = flags.as_ref().map_or(0, |f| f.iter().filter(|&&b| b).count());
                calibrate_eta_explore_count(config.eps, config.delta, config.k, m)?
            }
            (None, BanditVariant::Naive) => calibrate_eta_full_info(config.eps, config.delta, config.k, horizon)?,
        };
        let experts: Vec<ExpertState> = (0..config.k)
            .map(|_| ExpertState::new(n, eta))
            .collect::<Result<_>>()?;
        let mut expert_rngs: Vec<Rng> = (0..config.k).map(|i| expert_rng(config.seed, i)).collect();
        // The naive variant samples at the top of every round instead.
        let choices = match config.variant {
            BanditVariant::Naive => Vec::new(),
            _ => experts
                .iter()
                .zip(&mut expert_rngs)
                .map(|(e, r)| e.sample(r))
                .collect(),
        };
        Ok(Self {
            variant: config.variant,
            experts,
            expert_rngs,
            coin_rng,
            index_rng: stream_rng(config.seed, EXPLORE_EXPERT),
            item_rng: stream_rng(config.seed, EXPLORE_ITEM),
            flags,
            choices,
            gamma,
            horizon,
            round: 0,
            histories: None,
            zero: vec![0.0; n],
        })
    }

    pub fn record_feedback(mut self) -> Self {
        let eta = self.eta();
        self.histories = Some(vec![HedgeHistory::new(eta); self.experts.len()]);
        self
    }

    pub fn eta(&self) -> f64 {
        self.experts[0].eta()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn experts(&self) -> &[ExpertState] {
        &self.experts
    }

    /// Pre-drawn explore flags (presampled variant only).
    pub fn flags(&self) -> Option<&[bool]> {
        self.flags.as_deref()
    }

    /// Play one round, drawing the explore decision from the variant's
    /// coin source.
    pub fn play_round(&mut self, f: &SubmodularOracle) -> Result<RoundRecord> {
        if self.round >= self.horizon {
            return Err(Error::HorizonExceeded(self.horizon));
        }
        let explore = match &self.flags {
            Some(flags) => flags[self.round],
            None => self.coin_rng.random::<f64>() < self.gamma,
        };
        self.play_round_forced(f, explore)
    }

    /// Play one round with the explore decision supplied by the caller.
    pub fn play_round_forced(&mut self, f: &SubmodularOracle, explore: bool) -> Result<RoundRecord> {
        if self.round >= self.horizon {
            return Err(Error::HorizonExceeded(self.horizon));
        }
        let n = self.zero.len();
        if f.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: f.len(),
            });
        }
        self.round += 1;
        if self.variant == BanditVariant::Naive {
            self.resample();
        }
        let held = self.choices.clone();

        if !explore {
            let set = ItemSet::from_indices(held.iter().copied());
            let payoff = f.value(set.as_slice());
            if self.variant == BanditVariant::Naive {
                for (j, e) in self.experts.iter_mut().enumerate() {
                    if let Some(h) = &mut self.histories {
                        h[j].push(e.distribution().to_vec(), self.zero.clone(), held[j]);
                    }
                    e.update(&self.zero)?;
                }
            }
            return Ok(RoundRecord {
                t: self.round,
                set,
                payoff,
                explore: false,
                choices: held,
                probe: None,
            });
        }

        let k = self.experts.len();
        let i = self.index_rng.random_range(0..k);
        let a = self.item_rng.random_range(0..n);
        let set = ItemSet::from_indices(held[..i].iter().copied().chain([a]));
        let value = f.value(set.as_slice());
        let mut ghat = self.zero.clone();
        ghat[a] = value;
        for (j, e) in self.experts.iter_mut().enumerate() {
            let g = if j == i { &ghat } else { &self.zero };
            if let Some(h) = &mut self.histories {
                h[j].push(e.distribution().to_vec(), g.clone(), held[j]);
            }
            e.update(g)?;
        }
        if self.variant != BanditVariant::Naive {
            self.resample();
        }
        Ok(RoundRecord {
            t: self.round,
            set,
            payoff: value,
            explore: true,
            choices: held,
            probe: Some(ExploreRecord {
                expert: i,
                item: a,
                value,
            }),
        })
    }

    fn resample(&mut self) {
        self.choices = self
            .experts
            .iter()
            .zip(&mut self.expert_rngs)
            .map(|(e, r)| e.sample(r))
            .collect();
    }

    fn finish(self, rounds: Vec<RoundRecord>) -> Trace {
        Trace {
            params: RunParams {
                k: self.experts.len(),
                eta: self.eta(),
                gamma: Some(self.gamma),
            },
            rounds,
            feedback: self.histories,
        }
    }
}

/// Run one bandit variant over a whole stream.
pub fn run_bandit(stream: &FunctionStream, config: &BanditConfig) -> Result<Trace> {
    run_bandit_with(stream, config, false)
}

pub fn run_bandit_with(stream: &FunctionStream, config: &BanditConfig, record: bool) -> Result<Trace> {
    let mut state = BanditState::new(stream.ground().len(), stream.horizon(), config)?;
    if record {
        state = state.record_feedback();
    }
    let rounds = stream
        .rounds()
        .iter()
        .map(|f| state.play_round(f))
        .collect::<Result<Vec<_>>>()?;
    Ok(state.finish(rounds))
}

/// Fraction of traces whose explore count `M` reaches `2 gamma T`.
pub fn explore_count_tail(traces: &[Trace], gamma: f64, horizon: usize) -> Result<f64> {
    let counts: Vec<usize> = traces.iter().map(Trace::explore_count).collect();
    explore_count_tail_from_counts(&counts, gamma, horizon)
}

/// [`explore_count_tail`] on bare explore counts.
pub fn explore_count_tail_from_counts(counts: &[usize], gamma: f64, horizon: usize) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::param("explore_count_tail: no traces"));
    }
    if counts.len() < 100 {
        return Err(Error::param(format!(
            "explore_count_tail: needs at least 100 traces, got {}",
            counts.len()
        )));
    }
    let threshold = 2.0 * gamma * horizon as f64;
    let hits = counts.iter().filter(|&&m| m as f64 >= threshold).count();
    Ok(hits as f64 / counts.len() as f64)
}

/// The tail bound `exp(-8 gamma^2 T)` quoted for `P(M >= 2 gamma T)`.
pub fn explore_tail_bound(gamma: f64, horizon: usize) -> f64 {
    (-8.0 * gamma * gamma * horizon as f64).exp()
}

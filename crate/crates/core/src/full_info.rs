//! Full-information private online maximization with `k` ordered Hedge
//! experts.
//!
//! Each round every expert samples one item; the union is played. Once the
//! round function is revealed, expert `i` is fed the marginal gains of every
//! item over the items chosen by experts `1..i-1` in the same round. All
//! experts share the learning rate `eps / (k sqrt(32 T ln(k/delta)))`.

use crate::error::{Error, Result};
use crate::hedge::{calibrate_eta_full_info, ExpertState, HedgeHistory};
use crate::rng::{expert_rng, Rng};
use crate::submodular::{FunctionStream, ItemSet, SetFunction, SubmodularOracle};
use crate::trace::{RoundRecord, RunParams, Trace};

/// How the shared learning rate is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LearningRate {
    /// Calibrated for `(eps, delta)`-privacy over the horizon.
    Private { eps: f64, delta: f64 },
    /// A fixed rate with no privacy claim (`eps = ∞`), for non-private
    /// baselines.
    NonPrivate { eta: f64 },
}

impl LearningRate {
    pub fn resolve(&self, k: usize, horizon: usize) -> Result<f64> {
        match *self {
            LearningRate::Private { eps, delta } => calibrate_eta_full_info(eps, delta, k, horizon),
            LearningRate::NonPrivate { eta } => {
                if eta > 0.0 && eta.is_finite() {
                    Ok(eta)
                } else {
                    Err(Error::param(format!("non-private learning rate must be positive, got {eta}")))
                }
            }
        }
    }
}

/// The `k` experts of one run plus their sampling streams.
#[derive(Clone, Debug)]
pub struct CascadeState {
    experts: Vec<ExpertState>,
    rngs: Vec<Rng>,
    horizon: usize,
    round: usize,
    histories: Option<Vec<HedgeHistory>>,
    prefix_buf: Vec<usize>,
    gain_buf: Vec<f64>,
}

impl CascadeState {
    pub fn new(n: usize, k: usize, horizon: usize, rate: LearningRate, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k must be >= 1"));
        }
        let eta = rate.resolve(k, horizon)?;
        Ok(Self {
            experts: (0..k).map(|_| ExpertState::new(n, eta)).collect::<Result<_>>()?,
            rngs: (0..k).map(|i| expert_rng(seed, i)).collect(),
            horizon,
            round: 0,
            histories: None,
            prefix_buf: Vec::with_capacity(k),
            gain_buf: vec![0.0; n],
        })
    }

    /// Keep every expert's (distribution, feedback, choice) sequence.
    pub fn record_feedback(mut self) -> Self {
        let eta = self.eta();
        self.histories = Some(vec![HedgeHistory::new(eta); self.experts.len()]);
        self
    }

    pub fn eta(&self) -> f64 {
        self.experts[0].eta()
    }

    pub fn k(&self) -> usize {
        self.experts.len()
    }

    pub fn experts(&self) -> &[ExpertState] {
        &self.experts
    }

    pub fn rounds_played(&self) -> usize {
        self.round
    }

    /// Play one round against `f`.
    pub fn play_round(&mut self, f: &SubmodularOracle) -> Result<RoundRecord> {
        if self.round >= self.horizon {
            return Err(Error::HorizonExceeded(self.horizon));
        }
        let n = self.experts[0].len();
        if f.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: f.len(),
            });
        }
        self.round += 1;
        let choices: Vec<usize> = self
            .experts
            .iter()
            .zip(&mut self.rngs)
            .map(|(e, rng)| e.sample(rng))
            .collect();
        let set = ItemSet::from_indices(choices.iter().copied());
        let payoff = f.value(set.as_slice());

        // Feedback only after the set is fixed.
        self.prefix_buf.clear();
        for (i, expert) in self.experts.iter_mut().enumerate() {
            self.prefix_buf.sort_unstable();
            self.prefix_buf.dedup();
            f.marginals_into(&self.prefix_buf, &mut self.gain_buf);
            if let Some(h) = &mut self.histories {
                h[i].push(expert.distribution().to_vec(), self.gain_buf.clone(), choices[i]);
            }
            expert.update(&self.gain_buf)?;
            self.prefix_buf.push(choices[i]);
        }

        Ok(RoundRecord {
            t: self.round,
            set,
            payoff,
            explore: false,
            choices,
            probe: None,
        })
    }

    fn into_histories(self) -> Option<Vec<HedgeHistory>> {
        self.histories
    }
}

/// Run the private full-information algorithm over a whole stream.
pub fn run_full_info(stream: &FunctionStream, k: usize, eps: f64, delta: f64, seed: u64) -> Result<Trace> {
    run_full_info_with(stream, k, LearningRate::Private { eps, delta }, seed, false)
}

/// Run with an explicit learning-rate policy, optionally recording every
/// expert's feedback for certificate replay (memory `T·k·n`).
pub fn run_full_info_with(
    stream: &FunctionStream,
    k: usize,
    rate: LearningRate,
    seed: u64,
    record: bool,
) -> Result<Trace> {
    let mut state = CascadeState::new(stream.ground().len(), k, stream.horizon(), rate, seed)?;
    if record {
        state = state.record_feedback();
    }
    let rounds = stream
        .rounds()
        .iter()
        .map(|f| state.play_round(f))
        .collect::<Result<Vec<_>>>()?;
    let params = RunParams {
        k,
        eta: state.eta(),
        gamma: None,
    };
    Ok(Trace {
        params,
        rounds,
        feedback: state.into_histories(),
    })
}

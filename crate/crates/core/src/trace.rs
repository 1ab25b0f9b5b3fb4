//! Per-round output of the discrete algorithms and its JSON-lines encoding.
//!
//! One line per round:
//!
//! ```json
//! {"t":1,"set":["a","c"],"payoff":0.75,"explore":false,"choices":["a","c"]}
//! ```
//!
//! Bandit explore rounds carry an extra `probe` object with the 1-based
//! expert index, the probed item and the observed value.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedge::HedgeHistory;
use crate::submodular::{GroundSet, ItemSet};

/// The (expert, item) pair probed on an explore round and the value seen.
#[derive(Clone, Debug, PartialEq)]
pub struct ExploreRecord {
    /// 0-based expert index.
    pub expert: usize,
    pub item: usize,
    /// `f_t(S_t^{i-1} + a)`.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// 1-based round.
    pub t: usize,
    /// The set actually played.
    pub set: ItemSet,
    /// `f_t(set)`.
    pub payoff: f64,
    pub explore: bool,
    /// Each expert's current item `a_t^i`, in expert order.
    pub choices: Vec<usize>,
    pub probe: Option<ExploreRecord>,
}

impl RoundRecord {
    /// Union of the experts' choices: the set an exploit round would play.
    pub fn held_set(&self) -> ItemSet {
        ItemSet::from_indices(self.choices.iter().copied())
    }
}

/// Effective parameters of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub k: usize,
    pub eta: f64,
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub params: RunParams,
    pub rounds: Vec<RoundRecord>,
    /// Per-expert Hedge histories, when recording was requested.
    pub feedback: Option<Vec<HedgeHistory>>,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn explore_count(&self) -> usize {
        self.rounds.iter().filter(|r| r.explore).count()
    }

    pub fn total_payoff(&self) -> f64 {
        self.rounds.iter().map(|r| r.payoff).sum()
    }

    pub fn write_jsonl<W: Write>(&self, ground: &GroundSet, mut w: W) -> Result<()> {
        for r in &self.rounds {
            let line = RoundLine {
                t: r.t,
                set: ground.names(&r.set),
                payoff: r.payoff,
                explore: r.explore,
                choices: r.choices.iter().map(|&i| ground.name(i).to_string()).collect(),
                probe: r.probe.as_ref().map(|p| ProbeLine {
                    expert: p.expert + 1,
                    item: ground.name(p.item).to_string(),
                    value: p.value,
                }),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Parse round lines back. Parameters and feedback are not part of the
    /// line format; they come back as `params` with `eta = NaN`.
    pub fn read_jsonl<R: BufRead>(ground: &GroundSet, r: R) -> Result<Self> {
        let mut rounds = Vec::new();
        let mut k = 0;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: RoundLine = serde_json::from_str(&line)?;
            let choices = l
                .choices
                .iter()
                .map(|s| ground.index_of(s))
                .collect::<Result<Vec<_>>>()?;
            k = k.max(choices.len());
            let probe = match l.probe {
                Some(p) => {
                    if p.expert == 0 {
                        return Err(Error::param("probe expert index is 1-based"));
                    }
                    Some(ExploreRecord {
                        expert: p.expert - 1,
                        item: ground.index_of(&p.item)?,
                        value: p.value,
                    })
                }
                None => None,
            };
            rounds.push(RoundRecord {
                t: l.t,
                set: ground.resolve(&l.set)?,
                payoff: l.payoff,
                explore: l.explore,
                choices,
                probe,
            });
        }
        Ok(Self {
            params: RunParams {
                k,
                eta: f64::NAN,
                gamma: None,
            },
            rounds,
            feedback: None,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoundLine {
    t: usize,
    set: Vec<String>,
    payoff: f64,
    explore: bool,
    choices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probe: Option<ProbeLine>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeLine {
    expert: usize,
    item: String,
    value: f64,
}

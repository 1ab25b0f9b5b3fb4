//! Function streams (the private database `F = f_1, .., f_T`), their seeded
//! generators, and the JSON stream file format.
//!
//! Stream file:
//!
//! ```json
//! {"ground":["a","b"],"rounds":[{"family":"coverage","params":{"p":{"a":0.5,"b":0.25}}},
//!  {"family":"capped_modular","params":{"w":{"a":0.6,"b":0.6},"cap":1.0}}]}
//! ```
//!
//! Parameter maps are keyed by item name and serialized in sorted key order,
//! so writing a parsed stream reproduces the canonical bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_PARAMS};

use super::ground::GroundSet;
use super::oracle::{Family, SubmodularOracle};

/// The ordered database of round functions.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionStream {
    ground: GroundSet,
    rounds: Vec<SubmodularOracle>,
}

impl FunctionStream {
    pub fn new(ground: GroundSet, rounds: Vec<SubmodularOracle>) -> Result<Self> {
        if rounds.is_empty() {
            return Err(Error::param("stream horizon T must be >= 1"));
        }
        if let Some(t) = rounds.iter().position(|f| f.len() != ground.len()) {
            return Err(Error::Mismatch(format!(
                "round {} has {} parameters for a ground set of {}",
                t + 1,
                rounds[t].len(),
                ground.len()
            )));
        }
        Ok(Self { ground, rounds })
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn rounds(&self) -> &[SubmodularOracle] {
        &self.rounds
    }

    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    /// Round `t`, 1-based.
    pub fn round(&self, t: usize) -> Result<&SubmodularOracle> {
        if t == 0 || t > self.rounds.len() {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: self.rounds.len(),
            });
        }
        Ok(&self.rounds[t - 1])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: StreamDoc = serde_json::from_str(s)?;
        Self::from_doc(doc)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn read_json<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        Self::from_json(&s)
    }

    fn to_doc(&self) -> StreamDoc {
        let named = |v: &[f64]| -> BTreeMap<String, f64> {
            self.ground
                .items()
                .iter()
                .cloned()
                .zip(v.iter().copied())
                .collect()
        };
        StreamDoc {
            ground: self.ground.items().to_vec(),
            rounds: self
                .rounds
                .iter()
                .map(|f| match f.family() {
                    Family::Coverage { p } => RoundDoc::Coverage { p: named(p) },
                    Family::CappedModular { w, cap } => RoundDoc::CappedModular {
                        w: named(w),
                        cap: *cap,
                    },
                })
                .collect(),
        }
    }

    fn from_doc(doc: StreamDoc) -> Result<Self> {
        let ground = GroundSet::new(doc.ground)?;
        let dense = |m: &BTreeMap<String, f64>| -> Result<Vec<f64>> {
            let mut v = vec![0.0; ground.len()];
            for (k, x) in m {
                v[ground.index_of(k)?] = *x;
            }
            Ok(v)
        };
        let rounds = doc
            .rounds
            .iter()
            .map(|r| match r {
                RoundDoc::Coverage { p } => SubmodularOracle::coverage(dense(p)?),
                RoundDoc::CappedModular { w, cap } => SubmodularOracle::capped_modular(dense(w)?, *cap),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ground, rounds)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamDoc {
    ground: Vec<String>,
    rounds: Vec<RoundDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
enum RoundDoc {
    Coverage { p: BTreeMap<String, f64> },
    CappedModular { w: BTreeMap<String, f64>, cap: f64 },
}

/// Replace round `t` (1-based) with `replacement`.
pub fn neighboring_stream(
    stream: &FunctionStream,
    t: usize,
    replacement: SubmodularOracle,
) -> Result<FunctionStream> {
    stream.round(t)?;
    if replacement.len() != stream.ground.len() {
        return Err(Error::Dimension {
            expected: stream.ground.len(),
            got: replacement.len(),
        });
    }
    let mut rounds = stream.rounds.clone();
    rounds[t - 1] = replacement;
    FunctionStream::new(stream.ground.clone(), rounds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Coverage,
    CappedModular,
}

/// How each round's per-item parameters are drawn. Draws are independent
/// across rounds and items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamDistribution {
    /// Every item's parameter ~ Uniform[low, high].
    IidUniform { low: f64, high: f64 },
    /// The favorite item (by index) has a fixed elevated parameter; all
    /// others ~ Uniform[others_low, others_high].
    PlantedFavorite {
        favorite: usize,
        favorite_value: f64,
        others_low: f64,
        others_high: f64,
    },
}

fn default_cap() -> f64 {
    1.0
}

/// Recipe for a reproducible stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub family: FamilyKind,
    /// Ground set size `n`.
    pub n: usize,
    /// Horizon `T`.
    pub horizon: usize,
    pub distribution: ParamDistribution,
    /// Cap for the capped-modular family; ignored for coverage.
    #[serde(default = "default_cap")]
    pub cap: f64,
    pub seed: u64,
}

impl StreamSpec {
    pub fn iid_uniform(family: FamilyKind, n: usize, horizon: usize, seed: u64) -> Self {
        Self {
            family,
            n,
            horizon,
            distribution: ParamDistribution::IidUniform { low: 0.0, high: 1.0 },
            cap: 1.0,
            seed,
        }
    }

    /// Coverage stream where item 0 is clicked with probability 0.9 every
    /// round and every other item with an independent Uniform[0, 0.3] draw.
    pub fn planted_favorite(n: usize, horizon: usize, seed: u64) -> Self {
        Self {
            family: FamilyKind::Coverage,
            n,
            horizon,
            distribution: ParamDistribution::PlantedFavorite {
                favorite: 0,
                favorite_value: 0.9,
                others_low: 0.0,
                others_high: 0.3,
            },
            cap: 1.0,
            seed,
        }
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("stream spec: n must be >= 1"));
        }
        if self.horizon == 0 {
            return Err(Error::param("stream spec: horizon T must be >= 1"));
        }
        let upper = match self.family {
            FamilyKind::Coverage => 1.0,
            FamilyKind::CappedModular => {
                if !(self.cap > 0.0 && self.cap <= 1.0) {
                    return Err(Error::param(format!("stream spec: cap {} outside (0, 1]", self.cap)));
                }
                f64::INFINITY
            }
        };
        let interval = |lo: f64, hi: f64, what: &str| -> Result<()> {
            if !(lo >= 0.0 && lo <= hi && hi <= upper) {
                return Err(Error::param(format!(
                    "stream spec: {what} range [{lo}, {hi}] invalid (need 0 <= low <= high <= {upper})"
                )));
            }
            Ok(())
        };
        match &self.distribution {
            ParamDistribution::IidUniform { low, high } => interval(*low, *high, "uniform"),
            ParamDistribution::PlantedFavorite {
                favorite,
                favorite_value,
                others_low,
                others_high,
            } => {
                if *favorite >= self.n {
                    return Err(Error::param(format!(
                        "stream spec: favorite index {favorite} >= n = {}",
                        self.n
                    )));
                }
                interval(*favorite_value, *favorite_value, "favorite")?;
                interval(*others_low, *others_high, "others")
            }
        }
    }
}

/// Build the stream a spec describes. Pure in `(spec, seed)`.
pub fn generate_stream(spec: &StreamSpec) -> Result<FunctionStream> {
    spec.validate()?;
    let ground = GroundSet::with_size(spec.n)?;
    let mut rng = stream_rng(spec.seed, STREAM_PARAMS);
    let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let mut rounds = Vec::with_capacity(spec.horizon);
    for _ in 0..spec.horizon {
        let params: Vec<f64> = (0..spec.n)
            .map(|a| match &spec.distribution {
                ParamDistribution::IidUniform { low, high } => uniform(*low, *high),
                ParamDistribution::PlantedFavorite {
                    favorite,
                    favorite_value,
                    others_low,
                    others_high,
                } => {
                    // Draw for every item so the other items' values do not
                    // depend on which index is the favorite.
                    let draw = uniform(*others_low, *others_high);
                    if a == *favorite {
                        *favorite_value
                    } else {
                        draw
                    }
                }
            })
            .collect();
        rounds.push(match spec.family {
            FamilyKind::Coverage => SubmodularOracle::coverage(params)?,
            FamilyKind::CappedModular => SubmodularOracle::capped_modular(params, spec.cap)?,
        });
    }
    FunctionStream::new(ground, rounds)
}

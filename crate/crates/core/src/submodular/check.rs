//! Exhaustive property checkers over all subsets of a small ground set.
//!
//! Enumeration order is fixed: `B` by ascending bitmask, then `A ⊆ B` by
//! ascending bitmask, then `x ∉ B` by ascending index. The reported witness
//! is the first violation in that order.

use crate::error::{Error, Result};

use super::ground::{GroundSet, ItemSet};
use super::oracle::SetFunction;
use super::CHECK_TOL;

/// Largest ground set the checkers will enumerate.
pub const MAX_CHECK_SIZE: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub a: ItemSet,
    pub b: ItemSet,
    /// The added element for diminishing-returns violations.
    pub x: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOutcome {
    pub holds: bool,
    pub witness: Option<Violation>,
}

impl CheckOutcome {
    fn ok() -> Self {
        Self {
            holds: true,
            witness: None,
        }
    }

    fn fail(a: u64, b: u64, x: Option<usize>) -> Self {
        Self {
            holds: false,
            witness: Some(Violation {
                a: ItemSet::from_mask(a),
                b: ItemSet::from_mask(b),
                x,
            }),
        }
    }
}

fn table<F: SetFunction + ?Sized>(f: &F, ground: &GroundSet) -> Result<Vec<f64>> {
    let n = ground.len();
    if f.ground_size() != n {
        return Err(Error::Dimension {
            expected: n,
            got: f.ground_size(),
        });
    }
    if n > MAX_CHECK_SIZE {
        return Err(Error::Size(format!(
            "exhaustive check needs |U| <= {MAX_CHECK_SIZE}, got {n}"
        )));
    }
    let mut buf = Vec::with_capacity(n);
    Ok((0..1u64 << n)
        .map(|mask| {
            buf.clear();
            buf.extend((0..n).filter(|&i| mask >> i & 1 == 1));
            f.value(&buf)
        })
        .collect())
}

/// Diminishing returns: `f(A+x) - f(A) >= f(B+x) - f(B) - tol` for all
/// `A ⊆ B ⊆ U`, `x ∉ B`.
pub fn check_submodular<F: SetFunction + ?Sized>(f: &F, ground: &GroundSet) -> Result<CheckOutcome> {
    let v = table(f, ground)?;
    let n = ground.len();
    let full = (1u64 << n) - 1;
    for b in 0..=full {
        for a in (0..=b).filter(|a| a & !b == 0) {
            for x in (0..n).filter(|&x| b >> x & 1 == 0) {
                let bit = 1u64 << x;
                let gain_a = v[(a | bit) as usize] - v[a as usize];
                let gain_b = v[(b | bit) as usize] - v[b as usize];
                if gain_a < gain_b - CHECK_TOL {
                    return Ok(CheckOutcome::fail(a, b, Some(x)));
                }
            }
        }
    }
    Ok(CheckOutcome::ok())
}

/// `f(A) <= f(B) + tol` for all `A ⊆ B ⊆ U`.
pub fn check_monotone<F: SetFunction + ?Sized>(f: &F, ground: &GroundSet) -> Result<CheckOutcome> {
    let v = table(f, ground)?;
    let full = (1u64 << ground.len()) - 1;
    for b in 0..=full {
        for a in (0..=b).filter(|a| a & !b == 0) {
            if v[a as usize] > v[b as usize] + CHECK_TOL {
                return Ok(CheckOutcome::fail(a, b, None));
            }
        }
    }
    Ok(CheckOutcome::ok())
}

/// `f(∅) = 0` and `0 <= f(S) <= 1` for every `S`. A failing set is reported
/// as the witness's `b` (with `a = ∅`).
pub fn check_bounds<F: SetFunction + ?Sized>(f: &F, ground: &GroundSet) -> Result<CheckOutcome> {
    let v = table(f, ground)?;
    if v[0].abs() > CHECK_TOL {
        return Ok(CheckOutcome::fail(0, 0, None));
    }
    match v
        .iter()
        .position(|&x| !(x >= -CHECK_TOL && x <= 1.0 + CHECK_TOL))
    {
        Some(mask) => Ok(CheckOutcome::fail(0, mask as u64, None)),
        None => Ok(CheckOutcome::ok()),
    }
}

//! Ground sets, the monotone submodular function families, and exhaustive
//! property checkers.
//!
//! Two closed-form families are supported:
//!
//! * **Coverage** with click probabilities `p`:
//!   `f(S) = 1 - prod_{a in S} (1 - p_a)`, the probability that at least one
//!   displayed item is clicked.
//! * **Capped modular** with weights `w` and cap `c`:
//!   `f(S) = min(c, sum_{a in S} w_a)`.
//!
//! Both are normalized (`f(∅) = 0`), bounded in `[0, 1]`, monotone and
//! submodular by construction. The checkers in [`check`] verify those
//! properties by enumeration for any [`SetFunction`], including hand-built
//! tables used as counterexamples.

pub mod check;
mod ground;
mod oracle;
pub mod stream;

pub use check::{check_bounds, check_monotone, check_submodular, CheckOutcome, Violation};
pub use ground::{GroundSet, ItemSet};
pub use oracle::{Family, SetFunction, SubmodularOracle, TableFunction};
pub use stream::{
    generate_stream, neighboring_stream, FamilyKind, FunctionStream, ParamDistribution, StreamSpec,
};

/// Absolute tolerance used by the property checkers.
pub const CHECK_TOL: f64 = 1e-12;

//! Differentially private online maximization of monotone submodular
//! functions under a cardinality constraint.
//!
//! * [`submodular`]: ground sets, coverage and capped-modular oracles,
//!   seeded function streams and exhaustive property checkers.
//! * [`hedge`]: the Hedge expert, calibrated learning rates and the regret
//!   certificate.
//! * [`full_info`]: the full-information algorithm with `k` ordered experts.
//! * [`bandit`]: the bandit-feedback variants.
//! * [`continuous`]: the DR-submodular meta-algorithm over boxes.
//! * [`oracles`]: offline optima and `(1-1/e)`-regret reports.
//! * [`audit`]: empirical privacy estimation on neighboring streams.
//! * [`experiment`]: config-driven runs, sweeps and slope fits.

pub mod audit;
pub mod bandit;
pub mod continuous;
pub mod error;
pub mod experiment;
pub mod full_info;
pub mod hedge;
pub mod oracles;
pub mod rng;
pub mod submodular;
pub mod trace;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/set-functions.md")]
    mod set_functions {}
    #[doc = include_str!("../../../book/src/hedge.md")]
    mod hedge {}
    #[doc = include_str!("../../../book/src/full-information.md")]
    mod full_information {}
    #[doc = include_str!("../../../book/src/bandit.md")]
    mod bandit {}
    #[doc = include_str!("../../../book/src/regret.md")]
    mod regret {}
    #[doc = include_str!("../../../book/src/continuous.md")]
    mod continuous {}
    #[doc = include_str!("../../../book/src/auditing.md")]
    mod auditing {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

//! Multioutput learnability at desk scale.
//!
//! Finite function classes, bounded losses, combinatorial dimensions, batch and
//! online reductions, and a seeded harness that checks regret and excess-risk
//! bounds against exact oracles.

pub mod batch;
pub mod dimensions;
pub mod domain;
pub mod error;
pub mod harness;
pub mod io;
pub mod losses;
pub mod online;
pub mod rng;

pub use domain::{
    best_risk, exact_risk, Example, FiniteDistribution, FunctionClass, InstanceId, LabelKind,
    LabelVec, Predictor, Stream,
};
pub use error::{MorError, Result};
pub use losses::{LossKind, LossSpec, PNorm, Psi};
pub use rng::SeedSpec;

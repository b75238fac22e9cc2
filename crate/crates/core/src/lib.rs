//! Locally differentially private stochastic optimization for linear
//! classifiers.
//!
//! The crate implements three trainers that share one update loop:
//!
//! * `sgd` — plain stochastic subgradient descent, no privacy;
//! * `djw` — private SGD where every gradient goes through the
//!   sign-randomized sampling mechanism of [`mech::privatize_gradient`];
//! * `prestige` — private curriculum learning: labels are perturbed by
//!   randomized response, visits are gated by a decreasing margin
//!   threshold, and the surviving gradients are privatized.
//!
//! Every randomized primitive is seedable through [`RngHandle`] so runs
//! replay bit for bit, and each mechanism ships with analytic channel
//! probabilities that the statistical test suite checks against
//! Monte-Carlo estimates.

pub mod data;
pub mod error;
pub mod mech;
pub mod model;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
pub use mech::{BoundConvention, DesignMatrix, PrivacySpec};
pub use model::{Dataset, Example, LossFamily, LossSpec, ModelState, RegularizedObjective};
pub use optim::{EpochRow, Method, RunRecord, TrainConfig, VisitTrace};
pub use rng::RngHandle;

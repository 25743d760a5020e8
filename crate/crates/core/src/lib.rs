//! Adversarial score estimates, Langevin samplers and the Monte Carlo
//! experiments that probe their escape times and sampling error.
//!
//! Module map:
//!
//! - [`bump`]: smooth radial profile gluing field branches.
//! - [`score_fields`]: exact target scores and the adversarial estimates.
//! - [`sde`]: ULA steps, exact OU transitions, first-exit detection.
//! - [`special`]: chi-square / noncentral chi-square distribution functions.
//! - [`metrics`]: L^p score error, TV witnesses, KL, Sinkhorn, general position.
//! - [`score_net`]: denoising score matching with a small MLP.
//! - [`experiments`]: seeded experiment recipes writing JSON/CSV reports.

pub mod bump;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod score_fields;
pub mod score_net;
pub mod sde;
pub mod seeding;
pub mod special;

pub use error::{LabError, Result};
pub use score_fields::ScoreField;

//! Minimum number of nulls, minimum data volume and asymptotic power when
//! rejections must be trustworthy under a conditional pFDR criterion in the
//! random-effects multiple-testing model.
//!
//! Layers, bottom up:
//! - [`special_fn`]: log-space normal and incomplete gamma tails, `ψ`.
//! - [`model`]: parameters, odds threshold `Q_α`, likelihood-ratio thresholds, posterior.
//! - [`exact`]: exact event probabilities, `N*` and `V*`.
//! - [`asymptotics`]: closed-form leading terms.
//! - [`power`]: large-N power and pFDR of thresholding procedures.
//! - [`convergence`]: exact-versus-asymptotic diagnostics.
//! - [`sim`]: Monte Carlo simulator used as an independent check.

pub mod asymptotics;
pub mod convergence;
pub mod error;
pub mod exact;
pub mod model;
pub mod power;
pub mod sim;
pub mod special_fn;

pub use error::{Error, Result};
pub use exact::{ExtendedCount, Provenance, TailSplit, VolumeResult};
pub use model::{FamilySpec, GammaScale, ModelParams, NormalMean, RegimeSpec};
pub use power::{PowerReport, ThresholdProcedure};
pub use sim::{SimConfig, SimFamily, SimReport};
pub use special_fn::LogProb;

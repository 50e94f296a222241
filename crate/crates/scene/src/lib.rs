//! Nonparametric estimation of conditional survival functions from
//! right-censored data. A conditional generator network turns auxiliary noise
//! plus covariates into synthetic event times; training drives the empirical
//! survival curves those samples induce to satisfy weighted self-consistency
//! identities, with a discriminator network supplying adversarial weights.
//!
//! The crate also ships the machinery used to validate the estimator at desk
//! scale: the Kaplan-Meier estimator and its self-consistency residual, a
//! brute-force fixed-point solver as an independent oracle,
//! proportional-hazards and proportional-odds simulators with closed-form
//! truth, weight-path variable importance with in-training pruning, and
//! evaluation protocols (empirical bands, quantile series, cross-validated
//! concordance).
//!
//! Start with the runnable programs under `examples/`; each demonstrates one
//! capability end to end. The `scene` binary exposes the same functionality
//! as a small file-in/file-out command line.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod io;
pub mod loss;
pub mod nn;
pub mod oracle;
pub mod selfcheck;
pub mod simulation;
pub mod survival;
pub mod trainer;

pub use error::{Error, Result};
pub use generator::GeneratorModel;
pub use survival::{Dataset, Record, SurvivalCurve};
pub use trainer::{TrainConfig, TrainedModel};

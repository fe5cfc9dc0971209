//! Estimation of stochastic direct and indirect effects for mediation
//! analysis with an intermediate confounder.
//!
//! The mediator is intervened on stochastically: its value is drawn from
//! its distribution conditional on baseline covariates, marginalized over
//! the treatment-affected intermediate confounder, at a chosen instrument
//! level. The crate provides a targeted substitution estimator built on
//! sequential regressions with weighted fluctuation steps, plus weighting
//! and estimating-equation comparators, influence-curve and bootstrap
//! inference, and a simulation laboratory with exact enumeration oracles.

pub mod cli;
pub mod data;
pub mod engine;
pub mod error;
pub mod inference;
pub mod intervention;
pub mod linmod;
pub mod model;
pub mod rng;
pub mod simlab;

pub use data::{ingest_csv, ColumnMapping, Dataset};
pub use engine::{
    estimate_effects, estimate_psi, EffectsReport, EstimateOptions, Estimand, EstimatorKind,
    ScmVariant, VarianceSpec,
};
pub use error::{Error, Result};
pub use inference::{bootstrap_variance, compute_eic, ic_variance};
pub use intervention::{fit_intervention, load_external_policy, InterventionPolicy};
pub use model::{ModelSpec, Term, Var};
pub use simlab::{compute_truth, generate_dgm, run_study, DgmCoefficients, DgmSpec, TruthSet};

//! Surrogate modelling of chemical equilibria with Kolmogorov-Arnold networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`autodiff`] is a tape-based reverse-mode engine over dense `f64` tensors.
//! * [`spline`] evaluates uniform B-spline bases and their derivatives.
//! * [`nn`] builds MLPs and KANs on top of the two, counts parameters and
//!   (de)serializes checkpoints.
//! * [`train`] holds the loss, Adam, the plateau scheduler, the training loop
//!   and a seeded random hyperparameter search.
//! * [`thermo`] is the equilibrium oracle for the (Ba,Sr,Ra)SO4-NaCl-H2O
//!   system: mixing models, activity models and a Gibbs energy minimizer.
//! * [`data`] samples recipes with a Sobol sequence, generates and ingests
//!   datasets, preprocesses columns and splits rows.
//! * [`metrics`] computes RMSE, RRMSE and relative-error distributions.
//!
//! Throughout, "degree" means polynomial degree of the spline pieces. A
//! "7th-order" KAN activation in the usual KAN vocabulary is a degree-7
//! spline here.

pub mod autodiff;
pub mod data;
pub mod metrics;
pub mod nn;
pub mod spline;
pub mod thermo;
pub mod train;

pub use autodiff::{Graph, Tensor, Var};
pub use data::{CaseStudy, Dataset, Preprocessor, SplitPlan};
pub use metrics::ErrorReport;
pub use nn::{Checkpoint, KanConfig, MlpConfig, Network, NetworkConfig};
pub use spline::SplineGrid;
pub use thermo::{EquilibriumState, MixingModel, Recipe, SolidSolutionModel, ThermoData};
pub use train::{SearchSpace, TrainConfig, TrainReport};

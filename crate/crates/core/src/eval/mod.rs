//! Statistical validation: synthetic models with known structure, Hausdorff
//! distance, Monte-Carlo integrated squared error and convergence-rate runs.

pub mod fixtures;
pub mod hausdorff;
pub mod mise;
pub mod models;
pub mod rates;

pub use hausdorff::{directed_hausdorff, hausdorff};
pub use mise::{mise_estimate, MiseEstimate, QuadratureGrid};
pub use models::{ModelKind, SyntheticModel};
pub use rates::{rate_experiment, RateOptions, RateReport, RateTarget, Schedule};

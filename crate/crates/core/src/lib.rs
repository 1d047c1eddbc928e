//! Generalized density functions from marked point samples.
//!
//! A [`WeightedSample`] of points `X_i` with positive marks `Y_i` and a
//! bandwidth define the weighted Gaussian kernel estimate [`GdfModel`]. On top
//! of it the crate finds modes with weighted mean shift, ridge points with
//! weighted subspace-constrained mean shift, clusters the sample by mean shift
//! destination and measures how strongly clusters connect through an
//! absorbing random walk.

pub mod artifact;
pub mod cli;
pub mod clustering;
pub mod connectivity;
pub mod error;
pub mod eval;
pub mod gdf;
pub mod ingest;
mod linalg;
pub mod modes;
pub mod ridges;

pub use clustering::{cluster, ClusterAssignment};
pub use connectivity::{absorb, build_chain, connectivity, connectivity_matrix, mode_weight, ChainBlocks, ConnectivityResult};
pub use error::{GdfError, Result};
pub use gdf::{kernel_value, GdfDerivatives, GdfModel, WeightedSample};
pub use modes::{ascend, collect_modes, mean_shift_step, AscentConfig, ModeSet, Trajectory};
pub use ridges::{eigen_frame, scms_step, trace_ridge, EigenFrame, RidgePointSet};

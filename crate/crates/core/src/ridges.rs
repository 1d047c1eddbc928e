//! Weighted subspace-constrained mean shift (SCMS).
//!
//! Each update moves `x` by `V(x) V(x)^T m(x)`, where `m` is the weighted
//! mean shift vector and the columns of `V` are the Hessian eigenvectors for
//! all but the largest eigenvalue. Fixed points are ridge points: the
//! gradient vanishes in the constrained directions and `lambda_2 < 0`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GdfError, Result};
use crate::gdf::{GdfModel, LOW_DENSITY_FLOOR};
use crate::linalg::descending_eigen;
use crate::modes::{AscentConfig, StopReason, Trajectory};

/// Default relative ridge tolerance (fraction of the largest seed gradient norm).
pub const DEFAULT_RIDGE_TOL: f64 = 1e-6;

/// Relative eigengap below which the constrained subspace is considered ill-defined.
pub const DEGENERATE_GAP: f64 = 1e-10;

/// Sorted spectrum of a Hessian and the basis of its trailing eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFrame {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvector of the largest eigenvalue.
    pub leading: DVector<f64>,
    /// `d x (d-1)` matrix `[v_2, ..., v_d]`.
    pub basis: DMatrix<f64>,
}

impl EigenFrame {
    /// Orthogonal projector `V V^T` onto the trailing eigenspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    pub fn second_eigenvalue(&self) -> f64 {
        self.eigenvalues[1]
    }

    /// True when the two largest eigenvalues are too close to separate `v_1` from `V`.
    pub fn is_degenerate(&self) -> bool {
        let scale = self.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        self.eigenvalues[0] - self.eigenvalues[1] < DEGENERATE_GAP * scale
    }

    /// `V V^T v` without forming the projector.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }
}

/// Full symmetric eigendecomposition of a Hessian, split into `v_1` and `V`.
pub fn eigen_frame(hessian: &DMatrix<f64>) -> Result<EigenFrame> {
    let d = hessian.nrows();
    if hessian.ncols() != d {
        return Err(GdfError::InvalidInput("Hessian is not square".into()));
    }
    if d < 2 {
        return Err(GdfError::UnsupportedDimension(d));
    }
    let asym = (hessian - hessian.transpose()).amax();
    if asym > 1e-12 * hessian.amax().max(f64::MIN_POSITIVE) {
        return Err(GdfError::InvalidInput(format!("Hessian is not symmetric (max asymmetry {asym:e})")));
    }
    let (eigenvalues, vectors) = descending_eigen(hessian)?;
    Ok(EigenFrame {
        eigenvalues,
        leading: vectors.column(0).into_owned(),
        basis: vectors.columns(1, d - 1).into_owned(),
    })
}

struct ScmsUpdate {
    next: Vec<f64>,
    value: f64,
    step: f64,
}

fn scms_update(model: &GdfModel, x: &[f64]) -> Result<ScmsUpdate> {
    let moments = model.moments(x, true);
    if moments.weight <= LOW_DENSITY_FLOOR {
        return Err(GdfError::LowDensity(format!(
            "weighted kernel sum {:e} at {x:?} is below the underflow floor",
            moments.weight
        )));
    }
    let der = model.derivatives_from(&moments);
    let frame = eigen_frame(&der.hessian)?;
    let shift = DVector::from_iterator(x.len(), moments.first.iter().map(|v| v / moments.weight));
    let step = frame.project(&shift);
    let next = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
    Ok(ScmsUpdate { next, value: der.value, step: step.norm() })
}

/// One SCMS update `x + V(x) V(x)^T m(x)`.
pub fn scms_step(model: &GdfModel, x: &[f64]) -> Result<Vec<f64>> {
    model.check_query(x)?;
    if model.dim() < 2 {
        return Err(GdfError::UnsupportedDimension(model.dim()));
    }
    scms_update(model, x).map(|u| u.next)
}

/// Iterate [`scms_step`] from `x0` until the projected step is shorter than `step_tol * h`.
pub fn scms_trajectory(model: &GdfModel, x0: &[f64], cfg: &AscentConfig) -> Result<Trajectory> {
    cfg.validate()?;
    model.check_query(x0)?;
    if model.dim() < 2 {
        return Err(GdfError::UnsupportedDimension(model.dim()));
    }
    let tol = cfg.step_tol * model.bandwidth();
    let mut points = vec![x0.to_vec()];
    let mut values = Vec::new();
    let mut stop = StopReason::MaxIterations;
    for _ in 0..cfg.max_iters {
        let u = match scms_update(model, points.last().unwrap()) {
            Ok(u) => u,
            Err(GdfError::LowDensity(_)) => {
                stop = StopReason::LowDensity;
                break;
            }
            Err(e) => return Err(e),
        };
        values.push(u.value);
        points.push(u.next);
        if u.step < tol {
            stop = StopReason::Converged;
            break;
        }
    }
    while values.len() < points.len() {
        values.push(model.value(&points[values.len()])?);
    }
    Ok(Trajectory { points, values, converged: stop == StopReason::Converged, stop })
}

/// Converged SCMS endpoints that pass the ridge predicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RidgePointSet {
    pub points: Vec<Vec<f64>>,
    /// `|V V^T grad f|` at each point.
    pub projected_grad_norms: Vec<f64>,
    pub second_eigenvalues: Vec<f64>,
    pub values: Vec<f64>,
    /// Absolute acceptance threshold on the projected gradient norm.
    pub ridge_tol: f64,
}

impl RidgePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-seed result of ridge tracing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeOutcome {
    Retained(usize),
    Failed(StopReason),
    BelowDensityFloor,
    /// `lambda_2 >= 0` at the endpoint.
    NotRidge,
    /// Projected gradient above the ridge tolerance.
    NotStationary,
    /// `lambda_1 ~ lambda_2`: the constrained subspace is ill-defined.
    Degenerate,
}

impl RidgeOutcome {
    pub fn code(&self) -> &'static str {
        match self {
            RidgeOutcome::Retained(_) => "retained",
            RidgeOutcome::Failed(s) => s.code(),
            RidgeOutcome::BelowDensityFloor => "below_density_floor",
            RidgeOutcome::NotRidge => "not_ridge",
            RidgeOutcome::NotStationary => "not_stationary",
            RidgeOutcome::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RidgeOptions {
    pub ascent: AscentConfig,
    pub density_floor: f64,
    /// Multiplies the largest gradient norm over the seeds to give the absolute ridge tolerance.
    pub relative_ridge_tol: f64,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        Self { ascent: AscentConfig::default(), density_floor: 0.0, relative_ridge_tol: DEFAULT_RIDGE_TOL }
    }
}

#[derive(Debug, Clone)]
pub struct RidgeSearch {
    pub ridge: RidgePointSet,
    pub outcomes: Vec<RidgeOutcome>,
}

/// Trace ridge points from every seed with the default relative ridge tolerance.
pub fn trace_ridge(
    model: &GdfModel,
    seeds: &[Vec<f64>],
    cfg: &AscentConfig,
    density_floor: f64,
) -> Result<RidgePointSet> {
    let opts = RidgeOptions { ascent: *cfg, density_floor, relative_ridge_tol: DEFAULT_RIDGE_TOL };
    trace_ridge_with(model, seeds, &opts).map(|s| s.ridge)
}

/// Trace ridge points and report what happened to each seed.
pub fn trace_ridge_with(model: &GdfModel, seeds: &[Vec<f64>], opts: &RidgeOptions) -> Result<RidgeSearch> {
    opts.ascent.validate()?;
    if model.dim() < 2 {
        return Err(GdfError::UnsupportedDimension(model.dim()));
    }
    if seeds.is_empty() {
        return Err(GdfError::InvalidInput("no seeds given".into()));
    }
    if !(opts.density_floor >= 0.0 && opts.density_floor.is_finite()) {
        return Err(GdfError::InvalidInput(format!("density floor must be >= 0, got {}", opts.density_floor)));
    }
    if !(opts.relative_ridge_tol > 0.0 && opts.relative_ridge_tol.is_finite()) {
        return Err(GdfError::InvalidInput(format!(
            "ridge tolerance must be > 0, got {}",
            opts.relative_ridge_tol
        )));
    }
    for s in seeds {
        model.check_query(s)?;
    }

    let max_grad = seeds
        .par_iter()
        .map(|s| model.gradient(s).map(|g| g.norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let ridge_tol = opts.relative_ridge_tol * max_grad;

    struct Endpoint {
        point: Vec<f64>,
        value: f64,
        projected: f64,
        lambda2: f64,
        degenerate: bool,
        stop: StopReason,
    }

    let ends: Vec<Endpoint> = seeds
        .par_iter()
        .map(|s| {
            let t = scms_trajectory(model, s, &opts.ascent)?;
            let point = t.endpoint().to_vec();
            if !t.converged {
                return Ok(Endpoint { point, value: 0.0, projected: f64::INFINITY, lambda2: 0.0, degenerate: false, stop: t.stop });
            }
            let der = model.derivatives(&point)?;
            let frame = eigen_frame(&der.hessian)?;
            Ok(Endpoint {
                projected: frame.project(&der.gradient).norm(),
                lambda2: frame.second_eigenvalue(),
                degenerate: frame.is_degenerate(),
                value: der.value,
                point,
                stop: t.stop,
            })
        })
        .collect::<Result<_>>()?;

    let mut ridge = RidgePointSet {
        points: vec![],
        projected_grad_norms: vec![],
        second_eigenvalues: vec![],
        values: vec![],
        ridge_tol,
    };
    let outcomes: Vec<RidgeOutcome> = ends
        .into_iter()
        .map(|e| {
            if e.stop != StopReason::Converged {
                RidgeOutcome::Failed(e.stop)
            } else if e.value < opts.density_floor {
                RidgeOutcome::BelowDensityFloor
            } else if e.degenerate {
                RidgeOutcome::Degenerate
            } else if !(e.lambda2 < 0.0) {
                RidgeOutcome::NotRidge
            } else if !(e.projected <= ridge_tol) {
                RidgeOutcome::NotStationary
            } else {
                ridge.points.push(e.point);
                ridge.projected_grad_norms.push(e.projected);
                ridge.second_eigenvalues.push(e.lambda2);
                ridge.values.push(e.value);
                RidgeOutcome::Retained(ridge.points.len() - 1)
            }
        })
        .collect();

    if ridge.is_empty() {
        let mut counts = std::collections::BTreeMap::new();
        for o in &outcomes {
            *counts.entry(o.code()).or_insert(0usize) += 1;
        }
        return Err(GdfError::EmptyResult(format!("no ridge point retained; seed outcomes: {counts:?}")));
    }
    Ok(RidgeSearch { ridge, outcomes })
}

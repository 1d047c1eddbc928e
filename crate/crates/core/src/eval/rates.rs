//! Convergence-rate experiments: run the full pipeline over a schedule of
//! `(n, h)` cells, measure the error against ground truth, and fit the
//! log-log slope of the mean error against `n`.

use rand::seq::index::sample as sample_indices;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::hausdorff::hausdorff;
use super::mise::{mise_estimate, QuadratureGrid};
use super::models::SyntheticModel;
use crate::artifact::fmt_f64;
use crate::error::{GdfError, Result};
use crate::gdf::GdfModel;
use crate::modes::{grid_seeds, search_modes, AscentConfig};
use crate::ridges::{trace_ridge_with, RidgeOptions, DEFAULT_RIDGE_TOL};

/// Minimum replicate count per cell.
pub const MIN_REPLICATES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateTarget {
    /// Integrated squared error of all derivatives of the given order.
    Mise(usize),
    /// Hausdorff distance between estimated and true modes.
    ModeHausdorff,
    /// Hausdorff distance between SCMS ridge points and the true ridge.
    RidgeHausdorff,
}

impl RateTarget {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mise0" => Ok(RateTarget::Mise(0)),
            "mise1" => Ok(RateTarget::Mise(1)),
            "mise2" => Ok(RateTarget::Mise(2)),
            "mode" | "mode_hausdorff" => Ok(RateTarget::ModeHausdorff),
            "ridge" | "ridge_hausdorff" => Ok(RateTarget::RidgeHausdorff),
            other => Err(GdfError::InvalidInput(format!(
                "unknown target {other:?} (expected mise0, mise1, mise2, mode or ridge)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            RateTarget::Mise(k) => format!("mise{k}"),
            RateTarget::ModeHausdorff => "mode_hausdorff".into(),
            RateTarget::RidgeHausdorff => "ridge_hausdorff".into(),
        }
    }
}

/// Sample sizes with their bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub cells: Vec<(usize, f64)>,
}

impl Schedule {
    /// `h = c * n^(-gamma)` for each `n`.
    pub fn power_law(ns: &[usize], c: f64, gamma: f64) -> Self {
        Self { cells: ns.iter().map(|&n| (n, c * (n as f64).powf(-gamma))).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateOptions {
    pub replicates: usize,
    pub seed: u64,
    pub ascent: AscentConfig,
    /// Mode and ridge searches start from at most this many data points, drawn at random.
    pub max_seeds: usize,
    /// Initial quadrature resolution per axis for the MISE targets.
    pub quadrature_per_axis: usize,
    /// Estimated modes below this fraction of the highest mode value are ignored.
    pub mode_floor: f64,
    /// Number of points used to discretize the true ridge.
    pub ridge_resolution: usize,
    /// Ridge searches start from a uniform mesh with this many nodes per axis.
    pub ridge_mesh: usize,
    /// Ridge points (and mesh seeds) with an estimate below this fraction of the
    /// 90th percentile of the estimate over the sample are discarded.
    pub ridge_floor: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            replicates: MIN_REPLICATES,
            seed: 0,
            ascent: AscentConfig::default(),
            max_seeds: 400,
            quadrature_per_axis: 256,
            mode_floor: 0.05,
            ridge_resolution: 720,
            ridge_mesh: 60,
            ridge_floor: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl CellStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
        Self { mean, std, median, min: sorted[0], max: sorted[m - 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub n: usize,
    pub h: f64,
    pub cell_seed: u64,
    pub replicate_seeds: Vec<u64>,
    pub errors: Vec<f64>,
    pub stats: CellStats,
    /// Mode target only: error of the same estimates against the modes of the
    /// point density alone, ignoring the marks.
    pub unweighted_truth_errors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    /// 95% confidence band on the slope.
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub model: String,
    pub target: String,
    pub options: RateOptions,
    pub cells: Vec<CellReport>,
    /// Fit of `ln(mean error)` against `ln(n)`; absent with fewer than two cells.
    pub fit: Option<SlopeFit>,
}

impl RateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,h,replicates,mean,std,median,min,max,cell_seed\n");
        for c in &self.cells {
            let s = &c.stats;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.n,
                fmt_f64(c.h),
                c.errors.len(),
                fmt_f64(s.mean),
                fmt_f64(s.std),
                fmt_f64(s.median),
                fmt_f64(s.min),
                fmt_f64(s.max),
                c.cell_seed
            ));
        }
        out
    }
}

/// Ordinary least squares of `y` on `x` with a 95% t-band on the slope.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let m = x.len();
    if m < 2 || y.len() != m {
        return None;
    }
    let mf = m as f64;
    let mx = x.iter().sum::<f64>() / mf;
    let my = y.iter().sum::<f64>() / mf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (std_error, half) = if m > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        let se = (rss / (mf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, mf - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY);
        (se, t * se)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Some(SlopeFit { slope, intercept, std_error, lower: slope - half, upper: slope + half })
}

fn mix_seed(base: u64, cell: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ (cell as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 90th percentile of the estimate over the sample points.
fn reference_level(model: &GdfModel) -> Result<f64> {
    let mut values = model
        .sample()
        .points()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|x| model.value(x))
        .collect::<Result<Vec<f64>>>()?;
    values.sort_by(f64::total_cmp);
    Ok(values[(values.len() - 1) * 9 / 10])
}

/// Error of one replicate; the second value is the mode error against the unweighted truth.
fn replicate_error(
    model: &SyntheticModel,
    target: RateTarget,
    n: usize,
    h: f64,
    seed: u64,
    opts: &RateOptions,
) -> Result<(f64, Option<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = model.sample(n, &mut rng)?;
    let seeds: Vec<Vec<f64>> = sample_indices(&mut rng, n, opts.max_seeds.min(n))
        .into_iter()
        .map(|i| sample.point(i).to_vec())
        .collect();
    let fitted = GdfModel::new(sample, h)?;
    match target {
        RateTarget::Mise(_) => unreachable!("handled by mise_estimate"),
        RateTarget::ModeHausdorff => {
            let truth = model.true_modes()?;
            if truth.is_empty() {
                return Err(GdfError::InvalidInput(format!("model {} has no mode target", model.name())));
            }
            let found = search_modes(&fitted, &seeds, &opts.ascent)?.modes;
            let top = found.values.iter().copied().fold(0.0, f64::max);
            let kept: Vec<Vec<f64>> = found
                .modes
                .iter()
                .zip(&found.values)
                .filter(|(_, v)| **v >= opts.mode_floor * top)
                .map(|(m, _)| m.clone())
                .collect();
            let unweighted = model.density_modes()?;
            Ok((hausdorff(&kept, &truth)?, Some(hausdorff(&kept, &unweighted)?)))
        }
        RateTarget::RidgeHausdorff => {
            let truth = model.ridge_points(opts.ridge_resolution);
            if truth.is_empty() {
                return Err(GdfError::InvalidInput(format!("model {} has no ridge target", model.name())));
            }
            let floor = opts.ridge_floor * reference_level(&fitted)?;
            let mut mesh = Vec::new();
            for x in grid_seeds(&fitted, opts.ridge_mesh) {
                if fitted.value(&x)? >= floor {
                    mesh.push(x);
                }
            }
            if mesh.is_empty() {
                return Err(GdfError::EmptyResult("no mesh seed above the ridge density floor".into()));
            }
            let ropts = RidgeOptions { ascent: opts.ascent, density_floor: floor, relative_ridge_tol: DEFAULT_RIDGE_TOL };
            let ridge = trace_ridge_with(&fitted, &mesh, &ropts)?.ridge;
            Ok((hausdorff(&ridge.points, &truth)?, None))
        }
    }
}

/// Run every cell of the schedule and fit the rate.
pub fn rate_experiment(
    model: &SyntheticModel,
    target: RateTarget,
    schedule: &Schedule,
    opts: &RateOptions,
) -> Result<RateReport> {
    if opts.replicates < MIN_REPLICATES {
        return Err(GdfError::InvalidInput(format!(
            "at least {MIN_REPLICATES} replicates per cell are required, got {}",
            opts.replicates
        )));
    }
    if schedule.cells.is_empty() {
        return Err(GdfError::InvalidInput("empty schedule".into()));
    }
    opts.ascent.validate()?;
    if !(opts.mode_floor >= 0.0 && opts.ridge_floor >= 0.0 && opts.max_seeds > 0 && opts.ridge_mesh > 0) {
        return Err(GdfError::InvalidInput("floors must be >= 0 and seed counts positive".into()));
    }

    let mut cells = Vec::with_capacity(schedule.cells.len());
    for (ci, &(n, h)) in schedule.cells.iter().enumerate() {
        let cell_seed = mix_seed(opts.seed, ci);
        let wrap = |e: GdfError| GdfError::Cell { cell: format!("#{ci} (n={n}, h={h})"), source: Box::new(e) };
        let report = match target {
            RateTarget::Mise(k) => {
                let grid = QuadratureGrid::covering(model, opts.quadrature_per_axis).map_err(wrap)?;
                let est = mise_estimate(model, n, h, k, opts.replicates, &grid, cell_seed).map_err(wrap)?;
                CellReport {
                    n,
                    h,
                    cell_seed,
                    stats: CellStats::from_values(&est.per_replicate),
                    errors: est.per_replicate,
                    replicate_seeds: est.replicate_seeds,
                    unweighted_truth_errors: None,
                }
            }
            _ => {
                let mut master = ChaCha8Rng::seed_from_u64(cell_seed);
                let replicate_seeds: Vec<u64> = (0..opts.replicates).map(|_| master.next_u64()).collect();
                let results = replicate_seeds
                    .par_iter()
                    .map(|&s| replicate_error(model, target, n, h, s, opts))
                    .collect::<Result<Vec<_>>>()
                    .map_err(wrap)?;
                let errors: Vec<f64> = results.iter().map(|r| r.0).collect();
                let secondary: Option<Vec<f64>> = results.iter().map(|r| r.1).collect();
                CellReport {
                    n,
                    h,
                    cell_seed,
                    stats: CellStats::from_values(&errors),
                    errors,
                    replicate_seeds,
                    unweighted_truth_errors: secondary,
                }
            }
        };
        cells.push(report);
    }

    let x: Vec<f64> = cells.iter().map(|c| (c.n as f64).ln()).collect();
    let y: Vec<f64> = cells.iter().map(|c| c.stats.mean.ln()).collect();
    Ok(RateReport {
        model: model.name().to_string(),
        target: target.name(),
        options: opts.clone(),
        fit: fit_slope(&x, &y),
        cells,
    })
}

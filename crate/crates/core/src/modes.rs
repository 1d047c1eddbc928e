//! Weighted mean shift: ascent to local modes of the estimator, and
//! deduplication of trajectory endpoints into a mode inventory.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GdfError, Result};
use crate::gdf::{CompensatedSum, GdfModel, KERNEL_CUTOFF, LOW_DENSITY_FLOOR};
use crate::linalg::top_eigenvalue;

/// Endpoints within this many bandwidths of a representative are averaged into the mode.
pub const TIGHT_RADIUS: f64 = 1e-2;

/// Stopping and merging parameters, all relative to the bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AscentConfig {
    /// Stop once a step is shorter than `step_tol * h`.
    pub step_tol: f64,
    pub max_iters: usize,
    /// Endpoints closer than `merge_radius * h` are the same mode.
    pub merge_radius: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self { step_tol: 1e-7, max_iters: 500, merge_radius: 0.5 }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_tol.is_finite() && self.step_tol > 0.0) {
            return Err(GdfError::InvalidInput(format!("step_tol must be > 0, got {}", self.step_tol)));
        }
        if self.max_iters == 0 {
            return Err(GdfError::InvalidInput("max_iters must be at least 1".into()));
        }
        if !(self.merge_radius.is_finite() && self.merge_radius > 0.0) {
            return Err(GdfError::InvalidInput(format!(
                "merge_radius must be > 0, got {}",
                self.merge_radius
            )));
        }
        Ok(())
    }
}

/// Why an iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    LowDensity,
}

impl StopReason {
    pub fn code(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LowDensity => "low_density",
        }
    }
}

/// Iterates of one ascent; `values[t]` is the estimator at `points[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub converged: bool,
    pub stop: StopReason,
}

impl Trajectory {
    pub fn endpoint(&self) -> &[f64] {
        self.points.last().expect("trajectory holds at least its seed")
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }
}

/// Mean shift update and the weighted kernel sum at `x`.
pub(crate) fn shift_with_weight(model: &GdfModel, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let d = model.dim();
    let h = model.bandwidth();
    let inv_two_h2 = 0.5 / (h * h);
    let cutoff_sq = KERNEL_CUTOFF * KERNEL_CUTOFF * h * h;
    let sample = model.sample();
    let mut den = CompensatedSum::default();
    let mut num = vec![CompensatedSum::default(); d];
    for (p, &y) in sample.points().zip(sample.weights()) {
        let sq: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if sq > cutoff_sq {
            continue;
        }
        let term = y * (-sq * inv_two_h2).exp();
        den.add(term);
        for k in 0..d {
            num[k].add(term * p[k]);
        }
    }
    let den = den.total();
    if den <= LOW_DENSITY_FLOOR {
        return Err(GdfError::LowDensity(format!(
            "weighted kernel sum {den:e} at {x:?} is below the underflow floor"
        )));
    }
    Ok((num.iter().map(|s| s.total() / den).collect(), den))
}

/// One weighted mean shift update: the kernel- and mark-weighted average of the data around `x`.
pub fn mean_shift_step(model: &GdfModel, x: &[f64]) -> Result<Vec<f64>> {
    model.check_query(x)?;
    shift_with_weight(model, x).map(|(next, _)| next)
}

/// Iterate [`mean_shift_step`] from `x0` until the step is shorter than
/// `step_tol * h` or `max_iters` is reached.
pub fn ascend(model: &GdfModel, x0: &[f64], cfg: &AscentConfig) -> Result<Trajectory> {
    cfg.validate()?;
    model.check_query(x0)?;
    let tol = cfg.step_tol * model.bandwidth();
    let scale = model.value_scale();

    let mut points = vec![x0.to_vec()];
    let mut values = Vec::new();
    let mut stop = StopReason::MaxIterations;
    for _ in 0..cfg.max_iters {
        let x = points.last().unwrap();
        let (next, weight) = match shift_with_weight(model, x) {
            Ok(r) => r,
            Err(GdfError::LowDensity(_)) => {
                stop = StopReason::LowDensity;
                break;
            }
            Err(e) => return Err(e),
        };
        values.push(weight * scale);
        let step = distance(x, &next);
        points.push(next);
        if step < tol {
            stop = StopReason::Converged;
            break;
        }
    }
    while values.len() < points.len() {
        let x = &points[values.len()];
        values.push(model.value(x)?);
    }
    Ok(Trajectory { points, values, converged: stop == StopReason::Converged, stop })
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Deduplicated local maxima of the estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSet {
    pub modes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Largest Hessian eigenvalue at each mode (always negative).
    pub top_eigenvalues: Vec<f64>,
    /// Number of seeds whose trajectory ended at each mode.
    pub basin_counts: Vec<usize>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// What became of one seed during mode collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedOutcome {
    /// Trajectory ended at the retained mode with this index.
    Mode(usize),
    /// Trajectory did not converge.
    Failed(StopReason),
    /// Trajectory converged to a candidate that is not a local maximum.
    Saddle,
}

/// Mode inventory together with the per-seed bookkeeping behind it.
#[derive(Debug, Clone)]
pub struct ModeSearch {
    pub modes: ModeSet,
    pub outcomes: Vec<SeedOutcome>,
    pub endpoints: Vec<Vec<f64>>,
}

/// Ascend from every seed, merge endpoints within `merge_radius * h` and keep
/// the candidates that are local maxima.
pub fn collect_modes(model: &GdfModel, seeds: &[Vec<f64>], cfg: &AscentConfig) -> Result<ModeSet> {
    search_modes(model, seeds, cfg).map(|s| s.modes)
}

/// [`collect_modes`] with per-seed outcomes.
///
/// Merging visits converged endpoints in order of decreasing estimator value
/// (ties by seed index); an endpoint further than the merge radius from every
/// earlier representative becomes a new representative. Each converged
/// endpoint is then labelled with its nearest representative, and the mode is
/// the mean of the endpoints within `TIGHT_RADIUS * h` of that representative.
pub fn search_modes(model: &GdfModel, seeds: &[Vec<f64>], cfg: &AscentConfig) -> Result<ModeSearch> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(GdfError::InvalidInput("no seeds given".into()));
    }
    for s in seeds {
        model.check_query(s)?;
    }
    let runs: Vec<(Vec<f64>, f64, StopReason)> = seeds
        .par_iter()
        .map(|s| {
            let t = ascend(model, s, cfg)?;
            Ok((t.endpoint().to_vec(), *t.values.last().unwrap(), t.stop))
        })
        .collect::<Result<_>>()?;

    let radius = cfg.merge_radius * model.bandwidth();
    let mut order: Vec<usize> = (0..runs.len()).filter(|&i| runs[i].2 == StopReason::Converged).collect();
    order.sort_by(|&a, &b| runs[b].1.total_cmp(&runs[a].1).then(a.cmp(&b)));

    let mut leaders: Vec<usize> = Vec::new();
    for &i in &order {
        if leaders.iter().all(|&l| distance(&runs[l].0, &runs[i].0) > radius) {
            leaders.push(i);
        }
    }

    let nearest: Vec<Option<usize>> = runs
        .iter()
        .map(|(pos, _, stop)| {
            (*stop == StopReason::Converged).then(|| {
                (0..leaders.len())
                    .min_by(|&a, &b| {
                        distance(&runs[leaders[a]].0, pos)
                            .total_cmp(&distance(&runs[leaders[b]].0, pos))
                            .then(a.cmp(&b))
                    })
                    .expect("a converged endpoint implies at least one representative")
            })
        })
        .collect();

    // Endpoints of one basin agree only to the stopping tolerance, so the
    // leader among them is decided by rounding in the estimator values. The
    // representative is the mean of the endpoints packed around the leader,
    // which does not depend on that choice.
    let tight = TIGHT_RADIUS * model.bandwidth();
    let d = model.dim();
    let mut leader_mode = vec![None; leaders.len()];
    let mut modes = ModeSet { modes: vec![], values: vec![], top_eigenvalues: vec![], basin_counts: vec![] };
    for (li, &l) in leaders.iter().enumerate() {
        let centre = &runs[l].0;
        let mut sum = vec![CompensatedSum::default(); d];
        let mut count = 0usize;
        for (i, (pos, _, _)) in runs.iter().enumerate() {
            if nearest[i] == Some(li) && distance(pos, centre) <= tight {
                for k in 0..d {
                    sum[k].add(pos[k]);
                }
                count += 1;
            }
        }
        let pos: Vec<f64> = sum.iter().map(|s| s.total() / count as f64).collect();
        let value = model.value(&pos)?;
        let hessian = model.hessian(&pos)?;
        let lambda = top_eigenvalue(&hessian)?;
        let scale = hessian.amax();
        if value > 0.0 && scale > 0.0 && lambda < -1e-12 * scale {
            leader_mode[li] = Some(modes.modes.len());
            modes.modes.push(pos);
            modes.values.push(value);
            modes.top_eigenvalues.push(lambda);
            modes.basin_counts.push(0);
        }
    }

    let mut outcomes = Vec::with_capacity(runs.len());
    for (i, (_, _, stop)) in runs.iter().enumerate() {
        let Some(li) = nearest[i] else {
            outcomes.push(SeedOutcome::Failed(*stop));
            continue;
        };
        match leader_mode[li] {
            Some(j) => {
                modes.basin_counts[j] += 1;
                outcomes.push(SeedOutcome::Mode(j));
            }
            None => outcomes.push(SeedOutcome::Saddle),
        }
    }

    if modes.is_empty() {
        let failed = outcomes.iter().filter(|o| matches!(o, SeedOutcome::Failed(_))).count();
        let saddles = outcomes.iter().filter(|o| matches!(o, SeedOutcome::Saddle)).count();
        return Err(GdfError::EmptyResult(format!(
            "no mode retained from {} seeds ({failed} did not converge, {saddles} ended at non-maxima)",
            seeds.len()
        )));
    }
    let endpoints = runs.into_iter().map(|r| r.0).collect();
    Ok(ModeSearch { modes, outcomes, endpoints })
}

/// Gradient norm implied by a final step of `step_tol * h` at a point with estimator value `value`.
pub fn gradient_tolerance(model: &GdfModel, cfg: &AscentConfig, value: f64) -> f64 {
    cfg.step_tol * value / model.bandwidth()
}

/// Uniform mesh over the bounding box of the sample with `per_axis` nodes per coordinate.
pub fn grid_seeds(model: &GdfModel, per_axis: usize) -> Vec<Vec<f64>> {
    let sample = model.sample();
    let d = sample.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in sample.points() {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let per_axis = per_axis.max(1);
    let axis = |k: usize, i: usize| {
        if per_axis == 1 {
            0.5 * (lo[k] + hi[k])
        } else {
            lo[k] + (hi[k] - lo[k]) * i as f64 / (per_axis - 1) as f64
        }
    };
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|k| {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    axis(k, i)
                })
                .collect()
        })
        .collect()
}

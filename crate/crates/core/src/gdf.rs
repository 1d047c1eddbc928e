//! Weighted Gaussian-kernel estimator of a generalized density function.
//!
//! Given marked points `(X_i, Y_i)` the estimator is
//!
//! ```text
//! f(x) = 1/(n h^d) * sum_i Y_i K((x - X_i) / h),   K(u) = (2 pi)^(-d/2) exp(-|u|^2 / 2)
//! ```
//!
//! with analytic gradient and Hessian. All sums run over the sample in
//! ascending index order with compensated accumulation, so results are
//! reproducible bit for bit.

use std::cell::Cell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{GdfError, Result};

/// Kernel terms whose scaled distance exceeds this radius contribute exactly zero.
pub const KERNEL_CUTOFF: f64 = 40.0;

/// Weighted kernel sums at or below this are treated as an empty neighbourhood.
pub const LOW_DENSITY_FLOOR: f64 = f64::MIN_POSITIVE;

thread_local! {
    static KERNEL_EVALS: Cell<u64> = const { Cell::new(0) };
}

/// Number of kernel terms evaluated on the current thread so far.
pub fn kernel_evaluations() -> u64 {
    KERNEL_EVALS.with(|c| c.get())
}

fn count_evaluations(n: usize) {
    KERNEL_EVALS.with(|c| c.set(c.get() + n as u64));
}

/// Standard multivariate normal density at `u`.
pub fn kernel_value(u: &[f64]) -> Result<f64> {
    if u.iter().any(|v| !v.is_finite()) {
        return Err(GdfError::InvalidInput("kernel argument is not finite".into()));
    }
    let sq: f64 = u.iter().map(|v| v * v).sum();
    Ok(normalization(u.len()) * (-0.5 * sq).exp())
}

fn normalization(dim: usize) -> f64 {
    (2.0 * PI).powf(-(dim as f64) / 2.0)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Marked point sample `{(X_i, Y_i)}` with strictly positive marks.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    coords: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
}

impl WeightedSample {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if let Some(i) = points.iter().position(|p| p.len() != dim) {
            return Err(GdfError::InvalidInput(format!(
                "point {i} has length {} but the first point has length {dim}",
                points[i].len()
            )));
        }
        let coords = points.into_iter().flatten().collect();
        Self::from_flat(coords, dim, weights)
    }

    /// Build from row-major coordinates of shape `n x dim`.
    pub fn from_flat(coords: Vec<f64>, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(GdfError::InvalidInput("dimension must be at least 1".into()));
        }
        if weights.is_empty() {
            return Err(GdfError::InvalidInput("sample is empty".into()));
        }
        if coords.len() != weights.len() * dim {
            return Err(GdfError::InvalidInput(format!(
                "{} coordinates do not match {} points of dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(GdfError::InvalidInput(format!(
                "point {} has a non-finite coordinate",
                i / dim
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(GdfError::InvalidInput(format!(
                "weight of point {i} is {} (marks must be finite and > 0)",
                weights[i]
            )));
        }
        Ok(Self { coords, weights, dim })
    }

    /// Sample with every mark equal to one.
    pub fn unweighted(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Same points with marks multiplied by `c > 0`.
    pub fn scaled_weights(&self, c: f64) -> Result<Self> {
        let weights = self.weights.iter().map(|w| w * c).collect();
        Self::from_flat(self.coords.clone(), self.dim, weights)
    }

    /// Same points with all marks replaced by one.
    pub fn with_unit_weights(&self) -> Self {
        Self {
            coords: self.coords.clone(),
            weights: vec![1.0; self.len()],
            dim: self.dim,
        }
    }
}

/// Value, gradient and Hessian of the estimator at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct GdfDerivatives {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    /// Every kernel term underflowed: the query point is far from all data.
    pub low_density: bool,
}

/// Raw kernel moments about `x`, before normalization:
/// `weight = sum Y_i e_i`, `first = sum Y_i e_i (X_i - x)`,
/// `second = sum Y_i e_i (X_i - x)(X_i - x)^T`, with `e_i = exp(-|x - X_i|^2 / 2h^2)`.
#[derive(Debug, Clone)]
pub(crate) struct KernelMoments {
    pub weight: f64,
    pub first: Vec<f64>,
    pub second: Option<Vec<f64>>,
}

/// A sample together with a bandwidth; answers value, gradient and Hessian queries.
#[derive(Debug, Clone)]
pub struct GdfModel {
    sample: WeightedSample,
    bandwidth: f64,
    weight_cap: Option<f64>,
}

impl GdfModel {
    pub fn new(sample: WeightedSample, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(GdfError::InvalidInput(format!(
                "bandwidth must be finite and > 0, got {bandwidth}"
            )));
        }
        Ok(Self { sample, bandwidth, weight_cap: None })
    }

    /// Declare an upper bound on the marks; construction fails if any mark exceeds it.
    pub fn with_weight_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap.is_finite() && cap > 0.0) {
            return Err(GdfError::InvalidInput(format!("weight cap must be > 0, got {cap}")));
        }
        let max = self.sample.max_weight();
        if max > cap {
            return Err(GdfError::InvalidInput(format!(
                "largest mark {max} exceeds the declared cap {cap}"
            )));
        }
        self.weight_cap = Some(cap);
        Ok(self)
    }

    pub fn sample(&self) -> &WeightedSample {
        &self.sample
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn weight_cap(&self) -> Option<f64> {
        self.weight_cap
    }

    pub fn dim(&self) -> usize {
        self.sample.dim
    }

    /// Same model with marks multiplied by `c`.
    pub fn with_scaled_weights(&self, c: f64) -> Result<Self> {
        Self::new(self.sample.scaled_weights(c)?, self.bandwidth)
    }

    pub(crate) fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(GdfError::InvalidInput(format!(
                "query has dimension {} but the sample has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GdfError::InvalidInput("query point is not finite".into()));
        }
        Ok(())
    }

    /// `1 / (n h^d)` times the kernel normalization.
    pub(crate) fn value_scale(&self) -> f64 {
        let d = self.dim() as i32;
        normalization(self.dim()) / (self.sample.len() as f64 * self.bandwidth.powi(d))
    }

    /// One ascending pass over the sample. `with_second` also accumulates the
    /// outer-product moments needed for the Hessian.
    pub(crate) fn moments(&self, x: &[f64], with_second: bool) -> KernelMoments {
        let d = self.dim();
        let inv_two_h2 = 0.5 / (self.bandwidth * self.bandwidth);
        let cutoff_sq = KERNEL_CUTOFF * KERNEL_CUTOFF * self.bandwidth * self.bandwidth;
        let mut weight = CompensatedSum::default();
        let mut first = vec![CompensatedSum::default(); d];
        let mut second = if with_second {
            vec![CompensatedSum::default(); d * d]
        } else {
            Vec::new()
        };
        let mut diff = vec![0.0; d];

        for (p, &y) in self.sample.points().zip(&self.sample.weights) {
            let mut sq = 0.0;
            for k in 0..d {
                diff[k] = p[k] - x[k];
                sq += diff[k] * diff[k];
            }
            if sq > cutoff_sq {
                continue;
            }
            let term = y * (-sq * inv_two_h2).exp();
            weight.add(term);
            for k in 0..d {
                first[k].add(term * diff[k]);
            }
            if with_second {
                for a in 0..d {
                    let ta = term * diff[a];
                    for b in a..d {
                        second[a * d + b].add(ta * diff[b]);
                    }
                }
            }
        }
        count_evaluations(self.sample.len());

        let second = with_second.then(|| {
            let mut m = vec![0.0; d * d];
            for a in 0..d {
                for b in a..d {
                    let v = second[a * d + b].total();
                    m[a * d + b] = v;
                    m[b * d + a] = v;
                }
            }
            m
        });
        KernelMoments {
            weight: weight.total(),
            first: first.iter().map(CompensatedSum::total).collect(),
            second,
        }
    }

    fn gradient_from(&self, m: &KernelMoments) -> DVector<f64> {
        let s = self.value_scale() / (self.bandwidth * self.bandwidth);
        DVector::from_iterator(self.dim(), m.first.iter().map(|v| v * s))
    }

    fn hessian_from(&self, m: &KernelMoments) -> DMatrix<f64> {
        let d = self.dim();
        let h2 = self.bandwidth * self.bandwidth;
        let s = self.value_scale() / (h2 * h2);
        let second = m.second.as_ref().expect("second moments requested");
        DMatrix::from_fn(d, d, |a, b| {
            let diag = if a == b { h2 * m.weight } else { 0.0 };
            (second[a * d + b] - diag) * s
        })
    }

    /// Estimator value at `x`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_query(x)?;
        Ok(self.moments(x, false).weight * self.value_scale())
    }

    /// `1/(n h^(d+2)) * sum_i Y_i (X_i - x) K((x - X_i)/h)`.
    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_query(x)?;
        Ok(self.gradient_from(&self.moments(x, false)))
    }

    /// `1/(n h^(d+4)) * sum_i ((X_i - x)(X_i - x)^T - h^2 I) Y_i K((x - X_i)/h)`.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_query(x)?;
        Ok(self.hessian_from(&self.moments(x, true)))
    }

    /// Value, gradient and Hessian from a single pass over the sample.
    pub fn derivatives(&self, x: &[f64]) -> Result<GdfDerivatives> {
        self.check_query(x)?;
        Ok(self.derivatives_from(&self.moments(x, true)))
    }

    pub(crate) fn derivatives_from(&self, m: &KernelMoments) -> GdfDerivatives {
        GdfDerivatives {
            value: m.weight * self.value_scale(),
            gradient: self.gradient_from(m),
            hessian: self.hessian_from(m),
            low_density: m.weight <= LOW_DENSITY_FLOOR,
        }
    }

    /// Unweighted kernel density estimate at `x` (all marks treated as one).
    pub fn unweighted_value(&self, x: &[f64]) -> Result<f64> {
        self.check_query(x)?;
        let inv_two_h2 = 0.5 / (self.bandwidth * self.bandwidth);
        let cutoff_sq = KERNEL_CUTOFF * KERNEL_CUTOFF * self.bandwidth * self.bandwidth;
        let mut acc = CompensatedSum::default();
        for p in self.sample.points() {
            let sq: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if sq <= cutoff_sq {
                acc.add((-sq * inv_two_h2).exp());
            }
        }
        count_evaluations(self.sample.len());
        Ok(acc.total() * self.value_scale())
    }
}

/// Silverman-style rule-of-thumb bandwidth. Heuristic only: it targets a
/// Gaussian reference density and ignores the marks.
pub fn rule_of_thumb_bandwidth(sample: &WeightedSample) -> f64 {
    let n = sample.len() as f64;
    let d = sample.dim();
    let mut spread = 0.0;
    for k in 0..d {
        let mean = sample.points().map(|p| p[k]).sum::<f64>() / n;
        let var = sample.points().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        spread += var.sqrt();
    }
    spread /= d as f64;
    let df = d as f64;
    (4.0 / (df + 2.0)).powf(1.0 / (df + 4.0)) * n.powf(-1.0 / (df + 4.0)) * spread
}

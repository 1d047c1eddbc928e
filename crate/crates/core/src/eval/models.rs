//! Synthetic generalized densities with known structure.
//!
//! Every model is `f(x) = mu(x) p(x)` where `p` is an equal-weight mixture of
//! isotropic Gaussians (the circle model uses a fine angular mixture as its
//! closed form) and `mu` is a clamped linear mark mean.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{GdfError, Result};
use crate::gdf::WeightedSample;

/// Angular resolution of the circle model's closed form.
const CIRCLE_NODES: usize = 720;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Standard normal in d=1, marks identically one.
    Gaussian1d,
    /// Two unit-variance Gaussians at (-2, 0) and (2, 0) with mark mean `2 + 0.4 x_1`.
    Mixture2d,
    /// Noisy circle of radius 2, noise sd 0.2, marks identically one.
    Circle2d,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian1d" => Ok(ModelKind::Gaussian1d),
            "mixture2d" => Ok(ModelKind::Mixture2d),
            "circle2d" => Ok(ModelKind::Circle2d),
            other => Err(GdfError::InvalidInput(format!(
                "unknown model {other:?} (expected gaussian1d, mixture2d or circle2d)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Gaussian1d => "gaussian1d",
            ModelKind::Mixture2d => "mixture2d",
            ModelKind::Circle2d => "circle2d",
        }
    }
}

/// `mu(x) = max(intercept + slope . x, floor)`, optionally observed with
/// multiplicative Gamma noise of mean one.
#[derive(Debug, Clone, PartialEq)]
struct MarkMean {
    intercept: f64,
    slope: Vec<f64>,
    floor: f64,
    noise_shape: Option<f64>,
}

impl MarkMean {
    fn constant(dim: usize) -> Self {
        Self { intercept: 1.0, slope: vec![0.0; dim], floor: 0.0, noise_shape: None }
    }

    fn linear(&self, x: &[f64]) -> f64 {
        self.intercept + self.slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.linear(x).max(self.floor)
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        if self.linear(x) > self.floor {
            DVector::from_column_slice(&self.slope)
        } else {
            DVector::zeros(self.slope.len())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Sampler {
    Components,
    Circle { radius: f64 },
}

/// Value, gradient and Hessian of a closed-form function.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    pub kind: ModelKind,
    dim: usize,
    sigma: f64,
    centers: Vec<Vec<f64>>,
    sampler: Sampler,
    mark: MarkMean,
}

impl SyntheticModel {
    pub fn new(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Gaussian1d => Self {
                kind,
                dim: 1,
                sigma: 1.0,
                centers: vec![vec![0.0]],
                sampler: Sampler::Components,
                mark: MarkMean::constant(1),
            },
            ModelKind::Mixture2d => Self {
                kind,
                dim: 2,
                sigma: 1.0,
                centers: vec![vec![-2.0, 0.0], vec![2.0, 0.0]],
                sampler: Sampler::Components,
                mark: MarkMean { intercept: 2.0, slope: vec![0.4, 0.0], floor: 0.05, noise_shape: Some(4.0) },
            },
            ModelKind::Circle2d => {
                let radius = 2.0;
                let centers = (0..CIRCLE_NODES)
                    .map(|i| {
                        let t = 2.0 * PI * i as f64 / CIRCLE_NODES as f64;
                        vec![radius * t.cos(), radius * t.sin()]
                    })
                    .collect();
                Self {
                    kind,
                    dim: 2,
                    sigma: 0.2,
                    centers,
                    sampler: Sampler::Circle { radius },
                    mark: MarkMean::constant(2),
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Draw `n` marked points.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<WeightedSample> {
        let mut coords = Vec::with_capacity(n * self.dim);
        let mut weights = Vec::with_capacity(n);
        let noise = match self.mark.noise_shape {
            Some(shape) => Some(Gamma::new(shape, 1.0 / shape).map_err(|e| GdfError::InvalidInput(e.to_string()))?),
            None => None,
        };
        for _ in 0..n {
            let center: Vec<f64> = match self.sampler {
                Sampler::Components => self.centers[rng.random_range(0..self.centers.len())].clone(),
                Sampler::Circle { radius } => {
                    let t = rng.random::<f64>() * 2.0 * PI;
                    vec![radius * t.cos(), radius * t.sin()]
                }
            };
            let x: Vec<f64> = center
                .iter()
                .map(|c| c + self.sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let mu = self.mark.value(&x);
            let y = match &noise {
                Some(g) => mu * g.sample(rng),
                None => mu,
            };
            coords.extend(x);
            weights.push(y);
        }
        WeightedSample::from_flat(coords, self.dim, weights)
    }

    /// Point density `p` and its derivatives.
    pub fn density(&self, x: &[f64]) -> Derivatives {
        let d = self.dim;
        let s2 = self.sigma * self.sigma;
        let norm = (2.0 * PI * s2).powf(-(d as f64) / 2.0) / self.centers.len() as f64;
        let mut value = 0.0;
        let mut gradient = DVector::zeros(d);
        let mut hessian = DMatrix::zeros(d, d);
        for c in &self.centers {
            let diff = DVector::from_iterator(d, x.iter().zip(c).map(|(a, b)| a - b));
            let phi = norm * (-0.5 * diff.norm_squared() / s2).exp();
            value += phi;
            gradient -= &diff * (phi / s2);
            hessian += (&diff * diff.transpose() / (s2 * s2) - DMatrix::identity(d, d) / s2) * phi;
        }
        Derivatives { value, gradient, hessian }
    }

    /// Mark mean `mu(x)`.
    pub fn mark_mean(&self, x: &[f64]) -> f64 {
        self.mark.value(x)
    }

    /// `f = mu p` and its derivatives (`mu` is piecewise linear, so its Hessian vanishes).
    pub fn gdf(&self, x: &[f64]) -> Derivatives {
        let p = self.density(x);
        let mu = self.mark.value(x);
        let dmu = self.mark.gradient(x);
        let cross = &p.gradient * dmu.transpose();
        Derivatives {
            value: mu * p.value,
            gradient: &p.gradient * mu + &dmu * p.value,
            hessian: &p.hessian * mu + &cross + cross.transpose(),
        }
    }

    /// Box covering six noise standard deviations around every mixture centre.
    pub fn support_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for c in &self.centers {
            for k in 0..self.dim {
                lo[k] = lo[k].min(c[k] - 6.0 * self.sigma);
                hi[k] = hi[k].max(c[k] + 6.0 * self.sigma);
            }
        }
        (lo, hi)
    }

    /// Local maxima of `p` alone.
    pub fn density_modes(&self) -> Result<Vec<Vec<f64>>> {
        match self.kind {
            ModelKind::Circle2d => Ok(vec![]),
            _ => self.centers.iter().map(|c| newton_maximize(|x| self.density(x), c)).collect(),
        }
    }

    /// Local maxima of `f = mu p`, located by Newton iteration started at the modes of `p`.
    pub fn true_modes(&self) -> Result<Vec<Vec<f64>>> {
        match self.kind {
            ModelKind::Circle2d => Ok(vec![]),
            _ => self.density_modes()?.iter().map(|c| newton_maximize(|x| self.gdf(x), c)).collect(),
        }
    }

    /// Radius of the ridge circle (maximiser of the radial profile of `p`).
    pub fn ridge_radius(&self) -> Option<f64> {
        match self.sampler {
            Sampler::Circle { radius } => {
                let profile = |r: f64| self.density(&[r, 0.0]).value;
                Some(golden_section_max(profile, radius - 5.0 * self.sigma, radius + 5.0 * self.sigma, 1e-12))
            }
            Sampler::Components => None,
        }
    }

    /// `count` evenly spaced points on the true ridge, or empty when the model has no ridge target.
    pub fn ridge_points(&self, count: usize) -> Vec<Vec<f64>> {
        match self.ridge_radius() {
            Some(r) => (0..count)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / count as f64;
                    vec![r * t.cos(), r * t.sin()]
                })
                .collect(),
            None => vec![],
        }
    }

    /// Chi-square goodness-of-fit p-value of the sampler against a one-dimensional
    /// summary with known distribution (first coordinate, or angle for the circle),
    /// using 20 equiprobable bins.
    pub fn goodness_of_fit<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<f64> {
        const BINS: usize = 20;
        let s = self.sample(n, rng)?;
        let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
        let mut counts = [0usize; BINS];
        for p in s.points() {
            let u = match self.sampler {
                Sampler::Circle { .. } => (p[1].atan2(p[0]) + PI) / (2.0 * PI),
                Sampler::Components => {
                    self.centers.iter().map(|c| std_normal.cdf((p[0] - c[0]) / self.sigma)).sum::<f64>()
                        / self.centers.len() as f64
                }
            };
            counts[((u * BINS as f64) as usize).min(BINS - 1)] += 1;
        }
        let expected = n as f64 / BINS as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let chi = ChiSquared::new((BINS - 1) as f64).expect("valid dof");
        Ok(1.0 - chi.cdf(stat))
    }
}

fn newton_maximize(f: impl Fn(&[f64]) -> Derivatives, start: &[f64]) -> Result<Vec<f64>> {
    let mut x = DVector::from_column_slice(start);
    for _ in 0..200 {
        let d = f(x.as_slice());
        let step = d
            .hessian
            .lu()
            .solve(&d.gradient)
            .ok_or_else(|| GdfError::Numeric("singular Hessian during Newton iteration".into()))?;
        x -= &step;
        if step.norm() <= 1e-12 * (1.0 + x.norm()) {
            let end = f(x.as_slice());
            if end.gradient.norm() > 1e-10 {
                break;
            }
            if end.hessian.symmetric_eigenvalues().max() >= 0.0 {
                return Err(GdfError::Numeric("Newton iteration converged to a non-maximum".into()));
            }
            return Ok(x.as_slice().to_vec());
        }
    }
    Err(GdfError::Numeric(format!("Newton iteration from {start:?} did not converge")))
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    while (b - a).abs() > tol {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}

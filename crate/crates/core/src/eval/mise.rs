//! Monte-Carlo mean integrated squared error of the estimator and its derivatives.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::models::{Derivatives, SyntheticModel};
use crate::error::{GdfError, Result};
use crate::gdf::{CompensatedSum, GdfDerivatives, GdfModel};

/// Largest tolerated probability mass of the point density outside the grid.
pub const MAX_BOUNDARY_MASS: f64 = 0.01;

/// Relative change below which a grid refinement counts as converged.
pub const GRID_TOLERANCE: f64 = 0.01;

impl From<GdfDerivatives> for Derivatives {
    fn from(d: GdfDerivatives) -> Self {
        Derivatives { value: d.value, gradient: d.gradient, hessian: d.hessian }
    }
}

/// Tensor-product midpoint rule on a box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub per_axis: usize,
}

impl QuadratureGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || per_axis == 0 || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(GdfError::InvalidInput("quadrature box must be non-degenerate".into()));
        }
        Ok(Self { lo, hi, per_axis })
    }

    /// Grid over the model's support box.
    pub fn covering(model: &SyntheticModel, per_axis: usize) -> Result<Self> {
        let (lo, hi) = model.support_box();
        Self::new(lo, hi, per_axis)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn refined(&self) -> Self {
        Self { per_axis: self.per_axis * 2, ..self.clone() }
    }

    pub fn cell_volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) / self.per_axis as f64).product()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let m = self.per_axis;
        (0..m.pow(d as u32))
            .map(|mut idx| {
                (0..d)
                    .map(|k| {
                        let i = idx % m;
                        idx /= m;
                        self.lo[k] + (self.hi[k] - self.lo[k]) * (i as f64 + 0.5) / m as f64
                    })
                    .collect()
            })
            .collect()
    }

    /// Midpoint-rule integral of `f`; nodes are evaluated in parallel and summed in a fixed order.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let values = self.nodes().par_iter().map(|x| f(x)).collect::<Result<Vec<_>>>()?;
        let mut acc = CompensatedSum::default();
        values.into_iter().for_each(|v| acc.add(v));
        Ok(acc.total() * self.cell_volume())
    }
}

/// Squared error summed over all order-`k` partial derivatives (mixed partials counted once).
pub fn derivative_squared_error(k: usize, a: &Derivatives, b: &Derivatives) -> f64 {
    match k {
        0 => (a.value - b.value).powi(2),
        1 => (&a.gradient - &b.gradient).norm_squared(),
        _ => {
            let d = a.hessian.nrows();
            let mut s = 0.0;
            for i in 0..d {
                for j in i..d {
                    s += (a.hessian[(i, j)] - b.hessian[(i, j)]).powi(2);
                }
            }
            s
        }
    }
}

fn check_order(k: usize) -> Result<()> {
    if k > 2 {
        return Err(GdfError::InvalidInput(format!(
            "derivative order {k} is not supported (orders 0, 1 and 2 only)"
        )));
    }
    Ok(())
}

/// Integrated squared error between two functions over the grid.
pub fn integrated_squared_error<A, B>(grid: &QuadratureGrid, k: usize, estimate: A, truth: B) -> Result<f64>
where
    A: Fn(&[f64]) -> Result<Derivatives> + Sync,
    B: Fn(&[f64]) -> Derivatives + Sync,
{
    check_order(k)?;
    grid.integrate(|x| Ok(derivative_squared_error(k, &estimate(x)?, &truth(x))))
}

/// Integrated squared error of one fitted estimator against the model's closed form.
pub fn model_ise(model: &SyntheticModel, fitted: &GdfModel, k: usize, grid: &QuadratureGrid) -> Result<f64> {
    integrated_squared_error(
        grid,
        k,
        |x| {
            if k == 0 {
                let value = fitted.value(x)?;
                let d = x.len();
                Ok(Derivatives {
                    value,
                    gradient: nalgebra::DVector::zeros(d),
                    hessian: nalgebra::DMatrix::zeros(d, d),
                })
            } else {
                fitted.derivatives(x).map(Derivatives::from)
            }
        },
        |x| model.gdf(x),
    )
}

/// Probability mass of the point density outside the grid box.
pub fn boundary_mass(model: &SyntheticModel, grid: &QuadratureGrid) -> Result<f64> {
    Ok(1.0 - grid.integrate(|x| Ok(model.density(x).value))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiseEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub per_replicate: Vec<f64>,
    pub replicate_seeds: Vec<u64>,
    /// Resolution actually used after grid refinement.
    pub per_axis: usize,
    pub grid_converged: bool,
}

/// Monte-Carlo average over `replicates` samples of size `n` of the integrated
/// squared error of all order-`k` derivatives. The grid is refined by doubling
/// on the first replicate until the estimate changes by less than 1%.
pub fn mise_estimate(
    model: &SyntheticModel,
    n: usize,
    h: f64,
    k: usize,
    replicates: usize,
    grid: &QuadratureGrid,
    seed: u64,
) -> Result<MiseEstimate> {
    check_order(k)?;
    if replicates == 0 || n == 0 {
        return Err(GdfError::InvalidInput("need at least one replicate and one point".into()));
    }
    if grid.dim() != model.dim() {
        return Err(GdfError::InvalidInput("grid dimension does not match the model".into()));
    }
    let outside = boundary_mass(model, grid)?;
    if outside > MAX_BOUNDARY_MASS {
        return Err(GdfError::InvalidInput(format!(
            "grid leaves {:.3}% of the probability mass outside (limit 1%)",
            outside * 100.0
        )));
    }

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let replicate_seeds: Vec<u64> = (0..replicates).map(|_| master.next_u64()).collect();
    let fit = |s: u64| -> Result<GdfModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        GdfModel::new(model.sample(n, &mut rng)?, h)
    };

    let first = fit(replicate_seeds[0])?;
    let max_nodes = match model.dim() {
        1 => 1 << 14,
        _ => 1 << 18,
    };
    let mut grid = grid.clone();
    let mut current = model_ise(model, &first, k, &grid)?;
    let mut grid_converged = false;
    while grid.refined().per_axis.pow(grid.dim() as u32) <= max_nodes {
        let finer = grid.refined();
        let next = model_ise(model, &first, k, &finer)?;
        let change = (next - current).abs() / next.abs().max(f64::MIN_POSITIVE);
        grid = finer;
        current = next;
        if change < GRID_TOLERANCE {
            grid_converged = true;
            break;
        }
    }

    let mut per_replicate = vec![current];
    per_replicate.extend(
        replicate_seeds[1..]
            .par_iter()
            .map(|&s| model_ise(model, &fit(s)?, k, &grid))
            .collect::<Result<Vec<_>>>()?,
    );
    let r = per_replicate.len() as f64;
    let mean = per_replicate.iter().sum::<f64>() / r;
    let var = if per_replicate.len() > 1 {
        per_replicate.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    Ok(MiseEstimate {
        mean,
        std_error: (var / r).sqrt(),
        per_replicate,
        replicate_seeds,
        per_axis: grid.per_axis,
        grid_converged,
    })
}

//! Absorbing Markov chain over data points and modes, and the cluster
//! connectivity matrix derived from its absorption probabilities.
//!
//! States are the `k` modes (absorbing) followed by the `n` data points. From
//! data point `X_i` the chain moves to data point `X_j` with probability
//! proportional to `Y_j K((X_i - X_j)/h)` and to mode `M_m` with probability
//! proportional to `W_m K((X_i - M_m)/h)`; every row shares one normalizer.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::clustering::ClusterAssignment;
use crate::error::{GdfError, Result};
use crate::gdf::{CompensatedSum, GdfModel, WeightedSample, KERNEL_CUTOFF, LOW_DENSITY_FLOOR};
use crate::modes::ModeSet;

/// Largest number of data points the dense solver accepts by default.
pub const DEFAULT_MAX_POINTS: usize = 10_000;

/// Transient blocks of the transition matrix `[[I_k, 0], [S, T]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainBlocks {
    /// `n x k`, data point to mode.
    pub s: DMatrix<f64>,
    /// `n x n`, data point to data point.
    pub t: DMatrix<f64>,
    pub mode_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityResult {
    /// `n x k` absorption probabilities.
    pub absorbing: DMatrix<f64>,
    /// `k x k`, symmetric, zero diagonal.
    pub omega: DMatrix<f64>,
    /// Mark-weighted probability that a point of cluster `j` is absorbed at its own mode.
    pub self_connectivity: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct OmegaTable<'a> {
    omega: Vec<Vec<f64>>,
    self_connectivity: &'a [f64],
}

impl ConnectivityResult {
    pub fn to_json(&self) -> serde_json::Value {
        let k = self.omega.nrows();
        let omega = (0..k).map(|i| (0..k).map(|j| self.omega[(i, j)]).collect()).collect();
        serde_json::to_value(OmegaTable { omega, self_connectivity: &self.self_connectivity })
            .expect("plain numbers serialize")
    }
}

#[inline]
fn scaled_kernel(a: &[f64], b: &[f64], inv_two_h2: f64, cutoff_sq: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    if sq > cutoff_sq {
        0.0
    } else {
        (-sq * inv_two_h2).exp()
    }
}

/// Mark imputed at a mode: the ratio of the weighted to the unweighted kernel
/// estimate there, i.e. the kernel-regression estimate of the mean mark.
pub fn mode_weight(model: &GdfModel, mode: &[f64]) -> Result<f64> {
    model.check_query(mode)?;
    let h = model.bandwidth();
    let inv_two_h2 = 0.5 / (h * h);
    let cutoff_sq = (KERNEL_CUTOFF * h).powi(2);
    let sample = model.sample();
    let mut weighted = CompensatedSum::default();
    let mut plain = CompensatedSum::default();
    for (p, &y) in sample.points().zip(sample.weights()) {
        let e = scaled_kernel(p, mode, inv_two_h2, cutoff_sq);
        weighted.add(y * e);
        plain.add(e);
    }
    let plain = plain.total();
    if plain <= LOW_DENSITY_FLOOR {
        return Err(GdfError::Numeric(format!("unweighted kernel sum underflows at mode {mode:?}")));
    }
    Ok(weighted.total() / plain)
}

/// Transition blocks with the default point cap.
pub fn build_chain(model: &GdfModel, modes: &ModeSet) -> Result<ChainBlocks> {
    build_chain_capped(model, modes, DEFAULT_MAX_POINTS)
}

pub fn build_chain_capped(model: &GdfModel, modes: &ModeSet, max_points: usize) -> Result<ChainBlocks> {
    if modes.is_empty() {
        return Err(GdfError::InvalidInput("mode set is empty".into()));
    }
    let sample = model.sample();
    let n = sample.len();
    if n > max_points {
        return Err(GdfError::CapacityExceeded { n, cap: max_points });
    }
    let k = modes.len();
    let mode_weights = modes.modes.iter().map(|m| mode_weight(model, m)).collect::<Result<Vec<_>>>()?;

    let h = model.bandwidth();
    let inv_two_h2 = 0.5 / (h * h);
    let cutoff_sq = (KERNEL_CUTOFF * h).powi(2);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = sample.point(i);
            let to_data: Vec<f64> = sample
                .points()
                .zip(sample.weights())
                .map(|(xj, &y)| y * scaled_kernel(xi, xj, inv_two_h2, cutoff_sq))
                .collect();
            let to_modes: Vec<f64> = modes
                .modes
                .iter()
                .zip(&mode_weights)
                .map(|(m, &w)| w * scaled_kernel(xi, m, inv_two_h2, cutoff_sq))
                .collect();
            let mut total = CompensatedSum::default();
            to_data.iter().chain(&to_modes).for_each(|&v| total.add(v));
            let total = total.total();
            if !(total > 0.0) {
                return Err(GdfError::IsolatedPoint(i));
            }
            Ok((
                to_modes.into_iter().map(|v| v / total).collect(),
                to_data.into_iter().map(|v| v / total).collect(),
            ))
        })
        .collect::<Result<_>>()?;

    let s = DMatrix::from_fn(n, k, |i, j| rows[i].0[j]);
    let t = DMatrix::from_fn(n, n, |i, j| rows[i].1[j]);
    Ok(ChainBlocks { s, t, mode_weights })
}

/// Absorption probabilities `A` solving `(I - T) A = S` by LU factorization.
pub fn absorb(blocks: &ChainBlocks) -> Result<DMatrix<f64>> {
    let n = blocks.t.nrows();
    if blocks.t.ncols() != n || blocks.s.nrows() != n {
        return Err(GdfError::InvalidInput("chain blocks have inconsistent shapes".into()));
    }
    let system = DMatrix::<f64>::identity(n, n) - &blocks.t;
    let a = system
        .lu()
        .solve(&blocks.s)
        .ok_or_else(|| GdfError::Numeric("I - T is singular".into()))?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(GdfError::Numeric("absorption probabilities are not finite".into()));
    }
    Ok(a)
}

/// Symmetrized mark-weighted cross-absorption between clusters. The diagonal
/// of the returned matrix is zero; self-absorption is reported separately.
pub fn connectivity_matrix(
    absorbing: &DMatrix<f64>,
    assignment: &ClusterAssignment,
    sample: &WeightedSample,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = sample.len();
    let k = assignment.num_clusters();
    if absorbing.nrows() != n || absorbing.ncols() != k || assignment.labels.len() != n {
        return Err(GdfError::InvalidInput(format!(
            "absorbing matrix is {}x{}, expected {n}x{k}",
            absorbing.nrows(),
            absorbing.ncols()
        )));
    }
    let mut mass = vec![CompensatedSum::default(); k];
    let mut flow = vec![CompensatedSum::default(); k * k];
    for (l, label) in assignment.labels.iter().enumerate() {
        let Some(i) = *label else { continue };
        if i >= k {
            return Err(GdfError::InvalidInput(format!("label {i} of point {l} exceeds {k} clusters")));
        }
        let y = sample.weights()[l];
        mass[i].add(y);
        for j in 0..k {
            flow[i * k + j].add(y * absorbing[(l, j)]);
        }
    }
    let mass: Vec<f64> = mass.iter().map(CompensatedSum::total).collect();
    if let Some(j) = mass.iter().position(|m| *m <= 0.0) {
        return Err(GdfError::InvalidInput(format!("cluster {j} has no members")));
    }
    let b = |i: usize, j: usize| flow[i * k + j].total() / mass[i];
    let mut omega = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let v = 0.5 * (b(i, j) + b(j, i));
            omega[(i, j)] = v;
            omega[(j, i)] = v;
        }
    }
    Ok((omega, (0..k).map(|j| b(j, j)).collect()))
}

/// Chain, absorption and connectivity for a clustered sample.
pub fn connectivity(model: &GdfModel, assignment: &ClusterAssignment) -> Result<(ChainBlocks, ConnectivityResult)> {
    let blocks = build_chain(model, &assignment.modes)?;
    let absorbing = absorb(&blocks)?;
    let (omega, self_connectivity) = connectivity_matrix(&absorbing, assignment, model.sample())?;
    Ok((blocks, ConnectivityResult { absorbing, omega, self_connectivity }))
}

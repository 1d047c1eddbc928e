//! Mode clustering: each data point belongs to the mode its weighted mean
//! shift trajectory ends at.

use serde::Serialize;

use crate::error::{GdfError, Result};
use crate::gdf::GdfModel;
use crate::modes::{search_modes, AscentConfig, ModeSet, SeedOutcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    /// Mode index per data point; `None` for points listed in `unassigned`.
    pub labels: Vec<Option<usize>>,
    pub modes: ModeSet,
    /// Points whose trajectory failed or ended at a non-maximum, ascending.
    pub unassigned: Vec<usize>,
    /// Why each entry of `unassigned` has no label.
    pub unassigned_reasons: Vec<SeedOutcome>,
    /// Trajectory endpoint of every data point.
    pub endpoints: Vec<Vec<f64>>,
}

impl ClusterAssignment {
    pub fn num_clusters(&self) -> usize {
        self.modes.len()
    }

    /// Indices of the data points in cluster `j`.
    pub fn members(&self, j: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| (*l == Some(j)).then_some(i))
            .collect()
    }
}

/// Cluster the sample by the destinations of weighted mean shift seeded at every data point.
pub fn cluster(model: &GdfModel, cfg: &AscentConfig) -> Result<ClusterAssignment> {
    let seeds: Vec<Vec<f64>> = model.sample().points().map(<[f64]>::to_vec).collect();
    let search = search_modes(model, &seeds, cfg).map_err(|e| match e {
        GdfError::EmptyResult(msg) => GdfError::EmptyResult(format!("clustering produced no clusters: {msg}")),
        other => other,
    })?;

    let mut labels = Vec::with_capacity(seeds.len());
    let mut unassigned = Vec::new();
    let mut unassigned_reasons = Vec::new();
    for (i, outcome) in search.outcomes.iter().enumerate() {
        match outcome {
            SeedOutcome::Mode(j) => labels.push(Some(*j)),
            other => {
                labels.push(None);
                unassigned.push(i);
                unassigned_reasons.push(*other);
            }
        }
    }
    Ok(ClusterAssignment {
        labels,
        modes: search.modes,
        unassigned,
        unassigned_reasons,
        endpoints: search.endpoints,
    })
}

//! Exact Hausdorff distance between finite point sets.

use crate::error::{GdfError, Result};
use crate::modes::distance;

fn validate(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(GdfError::InvalidInput("Hausdorff distance needs two non-empty sets".into()));
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|p| p.len() != d) {
        return Err(GdfError::InvalidInput("points of differing dimension".into()));
    }
    if a.iter().chain(b).flatten().any(|v| !v.is_finite()) {
        return Err(GdfError::InvalidInput("non-finite coordinate".into()));
    }
    Ok(())
}

/// `max_{x in a} min_{y in b} |x - y|`.
pub fn directed_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    validate(a, b)?;
    Ok(directed(a, b))
}

fn directed(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| distance(x, y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Smallest `r` such that each set lies within distance `r` of the other.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    validate(a, b)?;
    Ok(directed(a, b).max(directed(b, a)))
}

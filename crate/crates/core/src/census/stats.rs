//! Model-size criteria and per-vortex physical statistics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;

/// Entries of a coefficient block whose magnitude exceeds twice the sample
/// standard deviation of the block's entries.
pub fn effective_params_one(block: &DMatrix<f64>) -> usize {
    let n = block.len();
    if n == 0 {
        return 0;
    }
    let mean = block.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        block.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let threshold = 2.0 * var.sqrt();
    block.iter().filter(|v| v.abs() > threshold).count()
}

/// Sum of [`effective_params_one`] over all vortices.
pub fn effective_params<'a>(blocks: impl IntoIterator<Item = &'a DMatrix<f64>>) -> usize {
    blocks.into_iter().map(effective_params_one).sum()
}

/// `(RSS/MN) / (1 − p/MN)²`
pub fn gcv(rss: f64, p: usize, rows: usize, cols: usize) -> Result<f64> {
    let area = (rows * cols) as f64;
    if p as f64 >= area {
        return Err(Error::Domain(format!("p = {p} must be below MN = {area}")));
    }
    let shrink = 1.0 - p as f64 / area;
    Ok(rss / area / (shrink * shrink))
}

/// Physical summary of one reconstructed vortex field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexStatistics {
    /// `Σ v̂ Δx²`
    pub circulation: f64,
    /// `Σ v̂² Δx² / A`, `A = MN Δx²`
    pub enstrophy: f64,
    /// Signed value of largest magnitude.
    pub peak: f64,
    /// `Δx² · #{|v̂| > e⁻¹ |peak|}`
    pub size: f64,
}

impl VortexStatistics {
    pub fn sign(&self) -> i8 {
        if self.peak >= 0.0 {
            1
        } else {
            -1
        }
    }
}

pub fn vortex_statistics(v: &Field, grid_spacing: f64) -> Result<VortexStatistics> {
    let cell = grid_spacing * grid_spacing;
    let peak = v
        .data()
        .iter()
        .copied()
        .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if peak == 0.0 {
        return Err(Error::EmptyVortex);
    }
    let cut = (-1.0f64).exp() * peak.abs();
    let count = v.data().iter().filter(|x| x.abs() > cut).count();
    let area = v.len() as f64 * cell;
    Ok(VortexStatistics {
        circulation: v.sum() * cell,
        enstrophy: v.sum_sq() * cell / area,
        peak,
        size: count as f64 * cell,
    })
}

//! Planted-vortex fields with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{periodic_distance, Field};

/// One planted Gaussian `a·exp(−r²/σ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedVortex {
    pub row: usize,
    pub col: usize,
    pub amplitude: f64,
    pub sigma2: f64,
}

impl PlantedVortex {
    /// Continuous-domain circulation `a·π·σ²`.
    pub fn circulation(&self) -> f64 {
        self.amplitude * std::f64::consts::PI * self.sigma2
    }
}

/// Background structures added on top of the planted vortices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub noise_sd: f64,
    /// Peak amplitude of a thin sinusoidal filament, if any.
    pub filament: Option<f64>,
}

/// Field and the truth list it was built from.
#[derive(Clone, Debug)]
pub struct SyntheticField {
    pub field: Field,
    pub truth: Vec<PlantedVortex>,
}

/// Renders periodic Gaussians plus background on an `n × n` grid.
pub fn synthesize(
    specs: &[PlantedVortex],
    background: &Background,
    n: usize,
    seed: u64,
) -> Result<SyntheticField> {
    if n == 0 {
        return Err(Error::Spec("grid size must be positive".into()));
    }
    if !(background.noise_sd.is_finite() && background.noise_sd >= 0.0) {
        return Err(Error::Spec(format!("noise sd {} must be ≥ 0", background.noise_sd)));
    }
    for (i, v) in specs.iter().enumerate() {
        if v.row >= n || v.col >= n {
            return Err(Error::Spec(format!("vortex {i} at ({}, {}) lies outside the grid", v.row, v.col)));
        }
        if !(v.sigma2.is_finite() && v.sigma2 > 0.0) || !v.amplitude.is_finite() {
            return Err(Error::Spec(format!("vortex {i} has invalid amplitude or width")));
        }
        for (j, w) in specs[..i].iter().enumerate() {
            if periodic_distance((v.row, v.col), (w.row, w.col), n, n) < 1.0 {
                return Err(Error::Spec(format!("vortices {j} and {i} share a centre")));
            }
        }
    }
    let mut field = Field::zeros(n, n);
    for v in specs {
        add_gaussian(&mut field, v);
    }
    if let Some(amp) = background.filament {
        add_filament(&mut field, amp);
    }
    if background.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, background.noise_sd).expect("sd checked above");
        field.data_mut().iter_mut().for_each(|x| *x += rng.sample(normal));
    }
    Ok(SyntheticField {
        field,
        truth: specs.to_vec(),
    })
}

/// Adds `a·exp(−r²/σ²)` summed over the nearest periodic images.
pub fn add_gaussian(field: &mut Field, v: &PlantedVortex) {
    let (m, n) = field.shape();
    let reach = (6.0 * v.sigma2.sqrt()).ceil() as isize;
    let axis = |centre: usize, len: usize| -> Vec<f64> {
        // Periodised 1D Gaussian factor on the whole axis.
        let mut out = vec![0.0; len];
        for d in -reach..=reach {
            let idx = (centre as isize + d).rem_euclid(len as isize) as usize;
            out[idx] += (-((d * d) as f64) / v.sigma2).exp();
        }
        out
    };
    let fr = axis(v.row, m);
    let fc = axis(v.col, n);
    for (r, a) in fr.iter().enumerate() {
        if *a == 0.0 {
            continue;
        }
        for (c, b) in fc.iter().enumerate() {
            field[(r, c)] += v.amplitude * a * b;
        }
    }
}

/// Thin ridge of width ~2 px along `row = n/2 + (n/8)·sin(2π·col/n)`.
fn add_filament(field: &mut Field, amplitude: f64) {
    let (m, n) = field.shape();
    for c in 0..n {
        let centre = m as f64 / 2.0 + m as f64 / 8.0 * (2.0 * std::f64::consts::PI * c as f64 / n as f64).sin();
        for r in 0..m {
            let mut d = (r as f64 - centre).abs();
            d = d.min(m as f64 - d);
            field[(r, c)] += amplitude * (-d * d / 4.0).exp();
        }
    }
}

/// Parameters for [`random_layout`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayoutSpec {
    pub count: usize,
    pub amplitude: (f64, f64),
    pub sigma2: (f64, f64),
    pub min_separation: f64,
}

/// Draws `count` vortices with random signs, amplitudes and widths, at
/// least `min_separation` apart on the torus.
pub fn random_layout(n: usize, spec: &LayoutSpec, rng: &mut impl Rng) -> Result<Vec<PlantedVortex>> {
    let mut out: Vec<PlantedVortex> = Vec::with_capacity(spec.count);
    let mut attempts = 0usize;
    while out.len() < spec.count {
        attempts += 1;
        if attempts > 10_000 * spec.count.max(1) {
            return Err(Error::Spec(format!(
                "cannot place {} vortices {} px apart on a {n}x{n} grid",
                spec.count, spec.min_separation
            )));
        }
        let row = rng.random_range(0..n);
        let col = rng.random_range(0..n);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let amplitude = sign * rng.random_range(spec.amplitude.0..=spec.amplitude.1);
        let sigma2 = rng.random_range(spec.sigma2.0..=spec.sigma2.1);
        if out
            .iter()
            .all(|v| periodic_distance((v.row, v.col), (row, col), n, n) >= spec.min_separation)
        {
            out.push(PlantedVortex { row, col, amplitude, sigma2 });
        }
    }
    Ok(out)
}

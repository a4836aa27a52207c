//! Gaussian vortex template and its MRA regression basis.
//!
//! The template `τ(x) = η·exp(−‖x‖²/σ²)` is rendered on an odd `P × P`
//! patch, embedded in the periodic grid with its centre at `(0, 0)` and
//! decomposed into `3J + 1` MRA channels `Z_k`. Fitting the template at a
//! location `μ` then reduces to cross-correlations of the response channels
//! with the `Z_k`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::modwt::{channel_count, FilterKind, MraPlan, WaveletFilter};
use crate::solver::{condition_number, diagonal_scaling, Ridge};
use crate::spectral::HalfSpectrum;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    /// Peak amplitude η (vorticity units).
    pub eta: f64,
    /// Squared width σ² (px²).
    pub sigma2: f64,
    /// Odd patch size P (px).
    pub patch: usize,
    pub filter: FilterKind,
    pub levels: usize,
}

impl Default for TemplateSpec {
    fn default() -> Self {
        TemplateSpec {
            eta: 1.0,
            sigma2: 9.0,
            patch: 33,
            filter: FilterKind::La8,
            levels: 6,
        }
    }
}

impl TemplateSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Spec(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::Spec(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if self.patch.is_multiple_of(2) {
            return Err(Error::Spec(format!("patch size must be odd, got {}", self.patch)));
        }
        if (self.patch as f64) < 8.0 * self.sigma2.sqrt() {
            return Err(Error::Spec(format!(
                "patch {} is smaller than 8·σ = {:.1}; the template would be truncated",
                self.patch,
                8.0 * self.sigma2.sqrt()
            )));
        }
        Ok(())
    }

    /// Smallest odd patch with `P ≥ 8σ`.
    pub fn minimal_patch(sigma2: f64) -> usize {
        let p = (8.0 * sigma2.sqrt()).ceil() as usize;
        p | 1
    }

    /// The `P × P` rendered template, centre at `(P/2, P/2)`.
    pub fn render_patch(&self) -> Field {
        let c = (self.patch / 2) as f64;
        Field::from_fn(self.patch, self.patch, |r, col| {
            let dr = r as f64 - c;
            let dc = col as f64 - c;
            self.eta * (-(dr * dr + dc * dc) / self.sigma2).exp()
        })
    }
}

/// MRA channels of the embedded template with the structures that make
/// all-location regression cheap.
#[derive(Clone, Debug)]
pub struct TemplateBasis {
    eta: f64,
    levels: usize,
    filter: WaveletFilter,
    embedded: Field,
    channels: Vec<Field>,
    spectra: Vec<HalfSpectrum>,
    sums: Vec<f64>,
    gram: DMatrix<f64>,
}

/// Builds the Gaussian template basis for an `rows × cols` grid.
pub fn build_template(spec: &TemplateSpec, rows: usize, cols: usize) -> Result<TemplateBasis> {
    spec.validate()?;
    TemplateBasis::from_patch(
        &spec.render_patch(),
        spec.eta,
        &WaveletFilter::new(spec.filter),
        spec.levels,
        rows,
        cols,
    )
}

impl TemplateBasis {
    /// Builds a basis from an arbitrary odd-sized patch. `eta` is recorded as
    /// the patch's nominal amplitude.
    pub fn from_patch(
        patch: &Field,
        eta: f64,
        filter: &WaveletFilter,
        levels: usize,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        check_patch(patch, rows, cols)?;
        let plan = MraPlan::new(rows, cols, filter, levels)?;
        Self::with_plan(patch, eta, &plan)
    }

    pub fn with_plan(patch: &Field, eta: f64, plan: &MraPlan) -> Result<Self> {
        let (rows, cols) = plan.shape();
        check_patch(patch, rows, cols)?;
        let embedded = embed_centered(patch, rows, cols);
        let spec = plan.fft().forward(&embedded);
        let k_count = plan.num_channels();
        let spectra: Vec<HalfSpectrum> = (0..k_count)
            .into_par_iter()
            .map(|k| plan.channel_spectrum(&spec, k))
            .collect();
        let channels: Vec<Field> = spectra.par_iter().map(|s| plan.fft().inverse(s)).collect();
        let sums: Vec<f64> = spectra.iter().map(|s| s.get(0, 0).re).collect();
        let gram = spectral_gram(&spectra, &sums, rows * cols);
        Ok(TemplateBasis {
            eta,
            levels: plan.levels(),
            filter: plan.filter().clone(),
            embedded,
            channels,
            spectra,
            sums,
            gram,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn filter(&self) -> &WaveletFilter {
        &self.filter
    }

    pub fn shape(&self) -> (usize, usize) {
        self.embedded.shape()
    }

    /// Number of template channels `3J + 1`.
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Template embedded with its centre at `(0, 0)`.
    pub fn embedded(&self) -> &Field {
        &self.embedded
    }

    pub fn channels(&self) -> &[Field] {
        &self.channels
    }

    pub fn spectra(&self) -> &[HalfSpectrum] {
        &self.spectra
    }

    /// `Σ_x Z_k(x)` per channel.
    pub fn channel_sums(&self) -> &[f64] {
        &self.sums
    }

    /// `(3J+2) × (3J+2)` Gram matrix of the channels plus a constant column.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Copy with every channel multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> TemplateBasis {
        let k = self.num_channels();
        let mut gram = self.gram.clone();
        for i in 0..=k {
            for j in 0..=k {
                let w = match (i < k, j < k) {
                    (true, true) => factor * factor,
                    (false, false) => 1.0,
                    _ => factor,
                };
                gram[(i, j)] *= w;
            }
        }
        TemplateBasis {
            eta: self.eta * factor,
            levels: self.levels,
            filter: self.filter.clone(),
            embedded: self.embedded.scaled(factor),
            channels: self.channels.iter().map(|c| c.scaled(factor)).collect(),
            spectra: self
                .spectra
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    s.scale(factor);
                    s
                })
                .collect(),
            sums: self.sums.iter().map(|v| v * factor).collect(),
            gram,
        }
    }
}

fn check_patch(patch: &Field, rows: usize, cols: usize) -> Result<()> {
    let (pr, pc) = patch.shape();
    if pr % 2 == 0 || pc % 2 == 0 {
        return Err(Error::Spec(format!("template patch must have odd sides, got {pr}x{pc}")));
    }
    if pr > rows || pc > cols {
        return Err(Error::Size(format!(
            "template patch {pr}x{pc} does not fit a {rows}x{cols} grid"
        )));
    }
    Ok(())
}

/// Places `patch` so that its centre lands on grid point `(0, 0)`.
pub fn embed_centered(patch: &Field, rows: usize, cols: usize) -> Field {
    let (cr, cc) = (patch.rows() / 2, patch.cols() / 2);
    let mut out = Field::zeros(rows, cols);
    for a in 0..patch.rows() {
        for b in 0..patch.cols() {
            let r = (a + rows - cr) % rows;
            let c = (b + cols - cc) % cols;
            out[(r, c)] += patch[(a, b)];
        }
    }
    out
}

/// Gram matrix from channel spectra by Parseval:
/// `G_km = (1/MN) Σ_f Ẑ_k(f)·conj(Ẑ_m(f))`.
fn spectral_gram(spectra: &[HalfSpectrum], sums: &[f64], area: usize) -> DMatrix<f64> {
    let k = spectra.len();
    let mut g = DMatrix::zeros(k + 1, k + 1);
    let rows = spectra[0].rows();
    let cols = spectra[0].cols();
    let half = spectra[0].half_cols();
    let weight = |idx: usize| {
        let kc = idx / rows;
        if kc == 0 || (cols.is_multiple_of(2) && kc == half - 1) {
            1.0
        } else {
            2.0
        }
    };
    for i in 0..k {
        for j in i..k {
            let v: f64 = spectra[i]
                .as_slice()
                .iter()
                .zip(spectra[j].as_slice())
                .enumerate()
                .map(|(idx, (a, b))| weight(idx) * (a * b.conj()).re)
                .sum::<f64>()
                / area as f64;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        g[(i, k)] = sums[i];
        g[(k, i)] = sums[i];
    }
    g[(k, k)] = area as f64;
    g
}

/// Condition number of the diagonally scaled regularised Gram matrix;
/// `+∞` when it is singular.
pub fn gram_condition(basis: &TemplateBasis, ridge: &Ridge, noise_var: f64) -> f64 {
    let mut a = basis.gram().clone();
    for (i, r) in ridge.diagonal(basis.gram(), noise_var).into_iter().enumerate() {
        a[(i, i)] += r;
    }
    condition_number(&diagonal_scaling(&a))
}

/// Number of regression columns including the intercept, `3J + 2`.
pub fn design_width(levels: usize) -> usize {
    channel_count(levels) + 1
}

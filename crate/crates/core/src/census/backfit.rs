//! Multi-vortex backfitting carried out in coefficient space.
//!
//! For vortices at `a` and `b` the design cross-products are
//! `H(a, b) = Z̃(a)ᵀ Z̃(b)` with template block `T_km(b − a)`, where
//! `T_km(δ) = Σ_x Z_k(x)·Z_m(x − δ)`, and intercept entries `ΣZ_k` and `MN`.
//! Refitting vortex `s` against its partial residual is then
//! `β_s = A⁻¹·(b_s − Σ_{s'≠s} H(μ_s, μ_s')·β_s')` with `b_s = Z̃(μ_s)ᵀY`,
//! which equals the pixel-space update exactly.
//!
//! The sweeps share their fixed point with the joint block system
//! `Σ_t (H_st + δ_st·R)·β_t = b_s`, which can also be solved directly. Coarse
//! channels of neighbouring vortices are nearly collinear when the ridge is
//! small, and the sweeps then stall.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::Field;
use crate::solver::NormalSolver;
use crate::spectral::Fft2;
use crate::template::TemplateBasis;

/// Lag maps `T_km` for `k ≤ m`. Cloning shares the maps.
#[derive(Clone, Debug)]
pub struct CrossGram {
    k: usize,
    rows: usize,
    cols: usize,
    /// Template amplitude relative to the one the maps were built at.
    factor: f64,
    sums: Vec<f64>,
    maps: Arc<Vec<Field>>,
}

impl CrossGram {
    pub fn new(basis: &TemplateBasis) -> Self {
        let k = basis.num_channels();
        let (rows, cols) = basis.shape();
        let fft = Fft2::new(rows, cols);
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect();
        let spectra = basis.spectra();
        let maps = pairs
            .par_iter()
            .map(|&(a, b)| fft.inverse(&spectra[a].mul_conj(&spectra[b])))
            .collect();
        CrossGram {
            k,
            rows,
            cols,
            factor: 1.0,
            sums: basis.channel_sums().to_vec(),
            maps: Arc::new(maps),
        }
    }

    /// The same table for the basis scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> CrossGram {
        CrossGram {
            factor: self.factor * factor,
            ..self.clone()
        }
    }

    fn pair_index(&self, a: usize, b: usize) -> usize {
        // Row-major upper triangle.
        a * self.k - a * (a + 1) / 2 + b
    }

    /// `T_km(δ)` at lag `(dr, dc)`.
    pub fn lag(&self, k: usize, m: usize, dr: isize, dc: isize) -> f64 {
        let (k, m, dr, dc) = if k <= m { (k, m, dr, dc) } else { (m, k, -dr, -dc) };
        let r = dr.rem_euclid(self.rows as isize) as usize;
        let c = dc.rem_euclid(self.cols as isize) as usize;
        self.factor * self.factor * self.maps[self.pair_index(k, m)].data()[r * self.cols + c]
    }

    /// `H(a, b)`, `(K+1) × (K+1)`.
    pub fn block(&self, a: (usize, usize), b: (usize, usize)) -> DMatrix<f64> {
        let k = self.k;
        let dr = b.0 as isize - a.0 as isize;
        let dc = b.1 as isize - a.1 as isize;
        let area = (self.rows * self.cols) as f64;
        DMatrix::from_fn(k + 1, k + 1, |i, j| match (i < k, j < k) {
            (true, true) => self.lag(i, j, dr, dc),
            (true, false) => self.factor * self.sums[i],
            (false, true) => self.factor * self.sums[j],
            (false, false) => area,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.k
    }
}

/// `tr(XᵀY)`
pub(crate) fn frob(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

/// How [`Backfitter::fit`] reaches the backfitting fixed point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackfitMethod {
    /// Solve the joint block system from an incrementally updated Cholesky
    /// factor, then run one cyclic sweep to measure `max |Δβ|`.
    #[default]
    Direct,
    /// Gauss–Seidel sweeps, stopped at the sweep cap if they stall.
    Cyclic,
}

impl std::str::FromStr for BackfitMethod {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(BackfitMethod::Direct),
            "cyclic" => Ok(BackfitMethod::Cyclic),
            _ => Err(crate::error::Error::Spec(format!(
                "unknown backfit method '{s}' (expected direct or cyclic)"
            ))),
        }
    }
}

/// Convergence settings for [`Backfitter`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackfitControl {
    pub method: BackfitMethod,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for BackfitControl {
    fn default() -> Self {
        BackfitControl {
            method: BackfitMethod::Direct,
            tolerance: 1e-6,
            max_sweeps: 50,
        }
    }
}

/// Outcome of one backfit.
#[derive(Clone, Debug)]
pub struct BackfitReport {
    pub sweeps: usize,
    /// `max |Δβ|` of the last sweep is below the tolerance.
    pub converged: bool,
    /// The joint system was solved directly.
    pub direct: bool,
    pub rss: f64,
}

/// Coefficients and cached cross-products for a growing set of vortices.
#[derive(Clone, Debug)]
pub struct Backfitter<'a> {
    gram: &'a CrossGram,
    solver: &'a NormalSolver,
    /// `Σ_l ‖Y_l‖²`
    energy: f64,
    centers: Vec<(usize, usize)>,
    rhs: Vec<DMatrix<f64>>,
    betas: Vec<DMatrix<f64>>,
    /// `blocks[s][t] = H(μ_s, μ_t)`
    blocks: Vec<Vec<DMatrix<f64>>>,
    /// `sqrt(diag(G + R))`, the same for every vortex.
    scale: Vec<f64>,
    /// Lower Cholesky factor of the scaled joint matrix; `None` once an
    /// update has failed.
    factor: Option<DMatrix<f64>>,
}

impl<'a> Backfitter<'a> {
    pub fn new(gram: &'a CrossGram, solver: &'a NormalSolver, energy: f64) -> Self {
        assert_eq!(gram.num_channels() + 1, solver.dim(), "gram and solver disagree on K");
        let own = gram.block((0, 0), (0, 0));
        let scale = (0..solver.dim())
            .map(|i| (own[(i, i)] + solver.ridge()[i]).sqrt())
            .map(|v| if v > 0.0 { v } else { 1.0 })
            .collect();
        Backfitter {
            gram,
            solver,
            energy,
            centers: Vec::new(),
            rhs: Vec::new(),
            betas: Vec::new(),
            blocks: Vec::new(),
            scale,
            factor: Some(DMatrix::zeros(0, 0)),
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[(usize, usize)] {
        &self.centers
    }

    /// `(K+1) × K` coefficient matrices, intercept row last.
    pub fn betas(&self) -> &[DMatrix<f64>] {
        &self.betas
    }

    /// `b_c − Σ_s H(c, μ_s)·β_s`: the template/residual cross-products at `c`.
    pub fn partial_rhs(&self, center: (usize, usize), rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut r = rhs.clone();
        for (s, beta) in self.betas.iter().enumerate() {
            r -= self.gram.block(center, self.centers[s]) * beta;
        }
        r
    }

    /// RSS decrease from adding a vortex at `center` with the others held
    /// fixed: `2·tr(β*ᵀr) − tr(β*ᵀGβ*)` with `β* = A⁻¹r`.
    pub fn single_step_gain(&self, center: (usize, usize), rhs: &DMatrix<f64>) -> f64 {
        let r = self.partial_rhs(center, rhs);
        let beta = self.solver.inverse() * &r;
        let g = self.gram.block(center, center);
        2.0 * frob(&beta, &r) - frob(&beta, &(g * &beta))
    }

    /// Appends a vortex, initialised by its single-step fit.
    pub fn push(&mut self, center: (usize, usize), rhs: DMatrix<f64>) {
        let beta = self.solver.inverse() * self.partial_rhs(center, &rhs);
        let s = self.centers.len();
        let column: Vec<DMatrix<f64>> = self.centers.iter().map(|&c| self.gram.block(c, center)).collect();
        for (row, block) in self.blocks.iter_mut().zip(&column) {
            row.push(block.clone());
        }
        let mut new_row: Vec<DMatrix<f64>> = column.iter().map(|b| b.transpose()).collect();
        new_row.push(self.gram.block(center, center));
        self.blocks.push(new_row);
        self.centers.push(center);
        self.rhs.push(rhs);
        self.betas.push(beta);
        self.factor = self.factor.take().and_then(|l| self.extend_factor(l, s));
    }

    /// Appends block row `s` to the Cholesky factor `l` of the first `s`
    /// vortices.
    fn extend_factor(&self, l: DMatrix<f64>, s: usize) -> Option<DMatrix<f64>> {
        let d = self.scale.len();
        let old = s * d;
        let scaled = |block: &DMatrix<f64>| {
            DMatrix::from_fn(d, d, |i, j| block[(i, j)] / (self.scale[i] * self.scale[j]))
        };
        let mut cross = DMatrix::zeros(old, d);
        for t in 0..s {
            cross.view_mut((t * d, 0), (d, d)).copy_from(&scaled(&self.blocks[t][s]));
        }
        let x = if old > 0 { l.solve_lower_triangular(&cross)? } else { cross };
        let mut own = self.blocks[s][s].clone();
        for (i, r) in self.solver.ridge().iter().enumerate() {
            own[(i, i)] += r;
        }
        let schur = scaled(&own) - x.transpose() * &x;
        let l22 = schur.cholesky()?.unpack();
        let mut next = DMatrix::zeros(old + d, old + d);
        next.view_mut((0, 0), (old, old)).copy_from(&l);
        next.view_mut((old, 0), (d, old)).copy_from(&x.transpose());
        next.view_mut((old, old), (d, d)).copy_from(&l22);
        Some(next)
    }

    /// Brings the coefficients to the backfitting fixed point.
    pub fn fit(&mut self, control: &BackfitControl) -> BackfitReport {
        match control.method {
            BackfitMethod::Direct => {
                let direct = self.solve_joint();
                let delta = self.sweep();
                let sweeps = 1;
                let converged = delta < control.tolerance;
                if !converged && !direct {
                    return self.cycle(control, sweeps);
                }
                BackfitReport {
                    sweeps,
                    converged,
                    direct,
                    rss: self.rss(),
                }
            }
            BackfitMethod::Cyclic => self.cycle(control, 0),
        }
    }

    /// Gauss–Seidel sweeps up to the cap.
    fn cycle(&mut self, control: &BackfitControl, mut sweeps: usize) -> BackfitReport {
        let mut converged = self.centers.is_empty();
        while !converged && sweeps < control.max_sweeps {
            sweeps += 1;
            converged = self.sweep() < control.tolerance;
        }
        BackfitReport {
            sweeps,
            converged,
            direct: false,
            rss: self.rss(),
        }
    }

    /// One Gauss–Seidel pass; returns `max |Δβ|`.
    fn sweep(&mut self) -> f64 {
        let n = self.centers.len();
        let mut delta = 0.0f64;
        for s in 0..n {
            let mut r = self.rhs[s].clone();
            for t in 0..n {
                if t != s {
                    r -= &self.blocks[s][t] * &self.betas[t];
                }
            }
            let new = self.solver.inverse() * r;
            delta = delta.max((&new - &self.betas[s]).amax());
            self.betas[s] = new;
        }
        delta
    }

    /// Solves `Σ_t (H_st + δ_st·R)·β_t = b_s` for all vortices at once.
    /// Returns false, leaving the coefficients untouched, if the system is
    /// numerically singular.
    pub fn solve_joint(&mut self) -> bool {
        let n = self.centers.len();
        if n == 0 {
            return true;
        }
        let d = self.scale.len();
        let k = d - 1;
        let rhs = DMatrix::from_fn(n * d, k, |i, j| self.rhs[i / d][(i % d, j)] / self.scale[i % d]);
        let solution = match &self.factor {
            Some(l) => l
                .solve_lower_triangular(&rhs)
                .and_then(|y| l.tr_solve_lower_triangular(&y)),
            None => self.dense_joint().lu().solve(&rhs),
        };
        let Some(solution) = solution.filter(|x| x.iter().all(|v| v.is_finite())) else {
            return false;
        };
        for s in 0..n {
            self.betas[s] = DMatrix::from_fn(d, k, |i, j| solution[(s * d + i, j)] / self.scale[i]);
        }
        true
    }

    /// Scaled joint matrix, assembled in full.
    fn dense_joint(&self) -> DMatrix<f64> {
        let n = self.centers.len();
        let d = self.scale.len();
        let mut a = DMatrix::zeros(n * d, n * d);
        for s in 0..n {
            for t in 0..n {
                a.view_mut((s * d, t * d), (d, d)).copy_from(&self.blocks[s][t]);
            }
            for (i, r) in self.solver.ridge().iter().enumerate() {
                a[(s * d + i, s * d + i)] += r;
            }
        }
        DMatrix::from_fn(n * d, n * d, |i, j| a[(i, j)] / (self.scale[i % d] * self.scale[j % d]))
    }

    /// `Σ_l‖Y_l‖² − 2Σ_s tr(β_sᵀb_s) + Σ_{s,t} tr(β_sᵀH_st β_t)`
    pub fn rss(&self) -> f64 {
        let n = self.centers.len();
        let mut rss = self.energy;
        for s in 0..n {
            rss -= 2.0 * frob(&self.betas[s], &self.rhs[s]);
            for t in 0..n {
                rss += frob(&self.betas[s], &(&self.blocks[s][t] * &self.betas[t]));
            }
        }
        rss
    }
}

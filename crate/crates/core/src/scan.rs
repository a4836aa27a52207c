//! Single-template regression at every grid location.
//!
//! With responses `Y_l` (the MRA channels of the field) and the design
//! `Z̃(μ) = [Z_1(·−μ), …, Z_K(·−μ), 1]`, the location-`μ` fit is
//! `β̂(μ) = A⁻¹·C(μ)` with `A = G + R` and `C_kl(μ) = Σ_x Z_k(x−μ)·Y_l(x)`.
//! Folding `A⁻¹` into the template spectra gives dual spectra
//! `Ŵ_k = Σ_m A⁻¹_km Ẑ_m`, so every coefficient map is one inverse transform
//! of `Ŷ_l·conj(Ŵ_k)` plus a constant from the intercept column.

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::modwt::{modwt2d_forward, Direction, FilterKind, MraPlan, MraStack, WaveletFilter};
use crate::solver::{NormalSolver, Ridge};
use crate::spectral::{Fft2, HalfSpectrum};
use crate::template::TemplateBasis;

/// Fitted coefficients for one location: rows are template channels followed
/// by the intercept, columns are response channels.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMatrix {
    full: DMatrix<f64>,
}

impl CoefficientMatrix {
    /// Wraps a `(K+1) × K` matrix whose last row holds intercepts.
    pub fn from_full(full: DMatrix<f64>) -> Self {
        assert_eq!(full.nrows(), full.ncols() + 1, "expected (K+1) x K coefficients");
        CoefficientMatrix { full }
    }

    /// `(3J+1) × (3J+1)` template-channel block.
    pub fn block(&self) -> DMatrix<f64> {
        let k = self.full.ncols();
        self.full.rows(0, k).into_owned()
    }

    /// Including the intercept row.
    pub fn full(&self) -> &DMatrix<f64> {
        &self.full
    }

    /// Intercept of the smooth-channel response.
    pub fn intercept_phi(&self) -> f64 {
        let k = self.full.ncols();
        self.full[(k, k - 1)]
    }

    /// Λ of this matrix; see [`lambda_value`].
    pub fn lambda(&self) -> f64 {
        let k = self.full.ncols();
        lambda_value(&self.full.rows(0, k).into_owned())
    }
}

/// `min(‖β − I‖²_F, ‖β + I‖²_F) = Σβ² + K − 2|tr β|` over the square block.
pub fn lambda_value(block: &DMatrix<f64>) -> f64 {
    let k = block.nrows();
    let sq: f64 = block.iter().map(|v| v * v).sum();
    (sq + k as f64 - 2.0 * block.trace().abs()).max(0.0)
}

/// Spectra and summaries of the response channels of one field.
#[derive(Clone, Debug)]
pub struct Responses {
    channels: Vec<Field>,
    spectra: Vec<HalfSpectrum>,
    sums: Vec<f64>,
    energies: Vec<f64>,
}

impl Responses {
    pub fn from_field(plan: &MraPlan, f: &Field) -> Result<Self> {
        let spectra = plan.channel_spectra(f)?;
        let channels: Vec<Field> = spectra.par_iter().map(|s| plan.fft().inverse(s)).collect();
        Ok(Self::assemble(channels, spectra))
    }

    pub fn from_stack(fft: &Fft2, stack: &MraStack) -> Result<Self> {
        if stack.shape() != fft.shape() {
            return Err(Error::Shape(format!(
                "MRA stack is {:?}, transform expects {:?}",
                stack.shape(),
                fft.shape()
            )));
        }
        let spectra = stack.channels().par_iter().map(|c| fft.forward(c)).collect();
        Ok(Self::assemble(stack.channels().to_vec(), spectra))
    }

    fn assemble(channels: Vec<Field>, spectra: Vec<HalfSpectrum>) -> Self {
        let sums = channels.iter().map(Field::sum).collect();
        let energies = channels.iter().map(Field::sum_sq).collect();
        Responses {
            channels,
            spectra,
            sums,
            energies,
        }
    }

    pub fn channels(&self) -> &[Field] {
        &self.channels
    }

    pub fn spectra(&self) -> &[HalfSpectrum] {
        &self.spectra
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// `Σ_l ‖Y_l‖²`
    pub fn total_energy(&self) -> f64 {
        self.energies.iter().sum()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.channels[0].shape()
    }
}

/// Regularised single-template regression shared by all locations.
#[derive(Clone, Debug)]
pub struct TemplateRegression {
    basis: TemplateBasis,
    solver: NormalSolver,
    duals: Vec<HalfSpectrum>,
    fft: Fft2,
}

impl TemplateRegression {
    pub fn new(basis: &TemplateBasis, ridge: &Ridge, noise_var: f64) -> Result<Self> {
        ridge.validate()?;
        let diag = ridge.diagonal(basis.gram(), noise_var);
        let solver = NormalSolver::new(basis.gram(), &diag)?;
        let (rows, cols) = basis.shape();
        let fft = Fft2::new(rows, cols);
        let k = basis.num_channels();
        let ainv = solver.inverse();
        let duals = (0..k)
            .into_par_iter()
            .map(|row| {
                let mut w = fft.zero_spectrum();
                for (m, z) in basis.spectra().iter().enumerate() {
                    w.axpy(ainv[(row, m)], z);
                }
                w
            })
            .collect();
        Ok(TemplateRegression {
            basis: basis.clone(),
            solver,
            duals,
            fft,
        })
    }

    pub fn basis(&self) -> &TemplateBasis {
        &self.basis
    }

    pub fn solver(&self) -> &NormalSolver {
        &self.solver
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    fn check(&self, resp: &Responses) -> Result<()> {
        if resp.shape() != self.basis.shape() || resp.num_channels() != self.basis.num_channels() {
            return Err(Error::Shape(format!(
                "responses {:?} with {} channels vs template {:?} with {}",
                resp.shape(),
                resp.num_channels(),
                self.basis.shape(),
                self.basis.num_channels()
            )));
        }
        Ok(())
    }

    /// Map of `β̂_kl(μ)` for template row `k < K` and response `l`.
    fn beta_map(&self, resp: &Responses, k: usize, l: usize) -> Field {
        let kk = self.basis.num_channels();
        let (rows, cols) = self.basis.shape();
        let mut prod = resp.spectra[l].mul_conj(&self.duals[k]);
        let offset = self.solver.inverse()[(k, kk)] * resp.sums[l];
        let dc = prod.get(0, 0) + Complex64::new(offset * (rows * cols) as f64, 0.0);
        prod.set(0, 0, dc);
        self.fft.inverse(&prod)
    }

    /// Λ at every location without materialising the coefficient maps.
    pub fn lambda_map(&self, resp: &Responses) -> Result<Field> {
        self.check(resp)?;
        let k = self.basis.num_channels();
        let (rows, cols) = self.basis.shape();
        let zero = || (vec![0.0; rows * cols], vec![0.0; rows * cols]);
        let (sq, tr) = (0..k * k)
            .into_par_iter()
            .fold(zero, |(mut sq, mut tr), idx| {
                let (row, l) = (idx / k, idx % k);
                let map = self.beta_map(resp, row, l);
                for (s, v) in sq.iter_mut().zip(map.data()) {
                    *s += v * v;
                }
                if row == l {
                    for (t, v) in tr.iter_mut().zip(map.data()) {
                        *t += v;
                    }
                }
                (sq, tr)
            })
            .reduce(zero, |(mut a, mut b), (c, d)| {
                a.iter_mut().zip(&c).for_each(|(x, y)| *x += y);
                b.iter_mut().zip(&d).for_each(|(x, y)| *x += y);
                (a, b)
            });
        let data = sq
            .iter()
            .zip(&tr)
            .map(|(s, t)| (s + k as f64 - 2.0 * t.abs()).max(0.0))
            .collect();
        Field::new(rows, cols, data)
    }

    /// All coefficient maps, `(K+1) · K` fields. Memory grows as `K²·M·N`.
    pub fn coefficient_maps(&self, resp: &Responses) -> Result<CoefficientMaps> {
        self.check(resp)?;
        let k = self.basis.num_channels();
        let mut maps: Vec<Field> = (0..k * k)
            .into_par_iter()
            .map(|idx| self.beta_map(resp, idx / k, idx % k))
            .collect();
        let (rows, cols) = self.basis.shape();
        // Intercept row: β̂_Il(μ) = Σ_m A⁻¹_Im C_ml(μ).
        let ainv = self.solver.inverse();
        for l in 0..k {
            let mut w = self.fft.zero_spectrum();
            for (m, z) in self.basis.spectra().iter().enumerate() {
                w.axpy(ainv[(k, m)], z);
            }
            let mut prod = resp.spectra[l].mul_conj(&w);
            let dc = prod.get(0, 0)
                + Complex64::new(ainv[(k, k)] * resp.sums[l] * (rows * cols) as f64, 0.0);
            prod.set(0, 0, dc);
            maps.push(self.fft.inverse(&prod));
        }
        Ok(CoefficientMaps { k, maps })
    }

    /// Right-hand sides `C(μ) = Z̃(μ)ᵀY` at the given points, `(K+1) × K`
    /// each, via one inverse transform per template/response pair.
    pub fn rhs_at(&self, resp: &Responses, points: &[(usize, usize)]) -> Result<Vec<DMatrix<f64>>> {
        self.check(resp)?;
        let k = self.basis.num_channels();
        let cols = self.basis.shape().1;
        let samples: Vec<Vec<f64>> = (0..k * k)
            .into_par_iter()
            .map(|idx| {
                let (m, l) = (idx / k, idx % k);
                let map = self.fft.inverse(&resp.spectra[l].mul_conj(&self.basis.spectra()[m]));
                points.iter().map(|&(r, c)| map.data()[r * cols + c]).collect()
            })
            .collect();
        Ok((0..points.len())
            .map(|p| {
                DMatrix::from_fn(k + 1, k, |m, l| {
                    if m < k {
                        samples[m * k + l][p]
                    } else {
                        resp.sums[l]
                    }
                })
            })
            .collect())
    }

    /// `C(μ)` by direct sums over the grid.
    pub fn rhs_direct(&self, resp: &Responses, (r, c): (usize, usize)) -> Result<DMatrix<f64>> {
        self.check(resp)?;
        let k = self.basis.num_channels();
        let shifted: Vec<Field> = self
            .basis
            .channels()
            .iter()
            .map(|z| z.shifted(r as isize, c as isize))
            .collect();
        Ok(DMatrix::from_fn(k + 1, k, |m, l| {
            if m < k {
                shifted[m].dot(&resp.channels[l])
            } else {
                resp.sums[l]
            }
        }))
    }

    /// Fit at a single location.
    pub fn fit_at(&self, resp: &Responses, point: (usize, usize)) -> Result<CoefficientMatrix> {
        let rhs = self.rhs_direct(resp, point)?;
        Ok(CoefficientMatrix::from_full(self.solver.solve(&rhs)))
    }
}

/// Coefficient maps `β̂_kl(μ)` for every location.
#[derive(Clone, Debug)]
pub struct CoefficientMaps {
    k: usize,
    /// `maps[row · K + l]`, rows `0..=K` with the intercept last.
    maps: Vec<Field>,
}

impl CoefficientMaps {
    pub fn at(&self, r: usize, c: usize) -> CoefficientMatrix {
        let k = self.k;
        CoefficientMatrix::from_full(DMatrix::from_fn(k + 1, k, |row, l| {
            self.maps[row * k + l][(r, c)]
        }))
    }

    pub fn map(&self, row: usize, l: usize) -> &Field {
        &self.maps[row * self.k + l]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.maps[0].shape()
    }
}

/// Fits the template at every location of the field whose MRA is `y`.
pub fn fit_all_locations(
    y: &MraStack,
    basis: &TemplateBasis,
    ridge: &Ridge,
    noise_var: f64,
) -> Result<CoefficientMaps> {
    if y.levels() != basis.levels() {
        return Err(Error::Shape(format!(
            "MRA has J = {}, template has J = {}",
            y.levels(),
            basis.levels()
        )));
    }
    let reg = TemplateRegression::new(basis, ridge, noise_var)?;
    let resp = Responses::from_stack(reg.fft(), y)?;
    reg.coefficient_maps(&resp)
}

/// Λ at every location of a materialised coefficient-map array.
pub fn lambda_map(betas: &CoefficientMaps) -> Field {
    let (rows, cols) = betas.shape();
    Field::from_fn(rows, cols, |r, c| betas.at(r, c).lambda())
}

/// Periodic 3×3 weighted average with weights `1/(1+d)` for neighbour
/// distance `d ∈ {0, 1, √2}`, normalised to unit sum.
pub fn smooth_lambda(lambda: &Field) -> Field {
    let w = smoothing_weights();
    let (m, n) = lambda.shape();
    Field::from_fn(m, n, |r, c| {
        let mut acc = 0.0;
        for (a, row) in w.iter().enumerate() {
            for (b, wt) in row.iter().enumerate() {
                acc += wt * lambda.get_wrapped(r as isize + a as isize - 1, c as isize + b as isize - 1);
            }
        }
        acc
    })
}

/// Normalised 3×3 smoothing kernel.
pub fn smoothing_weights() -> [[f64; 3]; 3] {
    let corner = 1.0 / (1.0 + std::f64::consts::SQRT_2);
    let edge = 0.5;
    let total = 1.0 + 4.0 * edge + 4.0 * corner;
    let (c, e, z) = (corner / total, edge / total, 1.0 / total);
    [[c, e, c], [e, z, e], [c, e, c]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub row: usize,
    pub col: usize,
    /// Smoothed Λ at the point.
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub struct CandidateSet {
    /// Ascending by `lambda`.
    pub points: Vec<Candidate>,
    pub lambda_map: Field,
    pub smoothed_map: Field,
}

/// Strict periodic 8-neighbourhood minima, ascending, at most `max_candidates`.
pub fn find_candidates(smoothed: &Field, max_candidates: usize) -> Vec<Candidate> {
    let (m, n) = smoothed.shape();
    let mut out = Vec::new();
    for r in 0..m {
        for c in 0..n {
            let v = smoothed[(r, c)];
            let mut is_min = true;
            'nb: for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let rr = (r as isize + dr).rem_euclid(m as isize) as usize;
                    let cc = (c as isize + dc).rem_euclid(n as isize) as usize;
                    if (rr, cc) == (r, c) || smoothed[(rr, cc)] <= v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                out.push(Candidate { row: r, col: c, lambda: v });
            }
        }
    }
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then((a.row, a.col).cmp(&(b.row, b.col))));
    out.truncate(max_candidates);
    out
}

/// Noise level from the finest diagonal Haar coefficients,
/// `σ̂ = 2·median|w_1^d| / 0.6745` (`w_1^d` has standard deviation `σ/2`
/// under white noise).
pub fn estimate_noise_sd(f: &Field) -> f64 {
    if f.rows() < 2 || f.cols() < 2 {
        return 0.0;
    }
    let haar = WaveletFilter::new(FilterKind::Haar);
    let coeffs = modwt2d_forward(f, &haar, 1).expect("a 2x2 grid admits one level");
    let mut mags: Vec<f64> = coeffs.detail(1, Direction::D).data().iter().map(|v| v.abs()).collect();
    let mid = mags.len() / 2;
    let (_, median, _) = mags.select_nth_unstable_by(mid, f64::total_cmp);
    2.0 * *median / 0.6745
}

/// Output of [`scan_field`].
#[derive(Clone, Debug)]
pub struct ScanOutput {
    pub candidates: CandidateSet,
    pub noise_sd: f64,
    /// Condition number of the scaled regularised normal matrix.
    pub condition: f64,
    pub regression: TemplateRegression,
    pub responses: Responses,
}

/// MRA of `f`, Λ map, smoothing and candidate extraction in one pass.
pub fn scan_field(
    f: &Field,
    plan: &MraPlan,
    basis: &TemplateBasis,
    ridge: &Ridge,
    max_candidates: usize,
) -> Result<ScanOutput> {
    let noise_sd = estimate_noise_sd(f);
    let regression = TemplateRegression::new(basis, ridge, noise_sd * noise_sd)?;
    let responses = Responses::from_field(plan, f)?;
    let lambda = regression.lambda_map(&responses)?;
    let smoothed = smooth_lambda(&lambda);
    let points = find_candidates(&smoothed, max_candidates);
    Ok(ScanOutput {
        candidates: CandidateSet {
            points,
            lambda_map: lambda,
            smoothed_map: smoothed,
        },
        noise_sd,
        condition: regression.solver().condition(),
        regression,
        responses,
    })
}

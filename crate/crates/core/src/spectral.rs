//! Real-to-complex 2D discrete Fourier transforms on periodic grids.
//!
//! Only the non-negative column frequencies `0..=N/2` are stored; the rest
//! follow from conjugate symmetry of a real field's spectrum. The half
//! spectrum is held column-major (`H × M`, `H = N/2 + 1`) so that the
//! column-direction transforms run over contiguous memory.

use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Field;

/// Planned forward/inverse transforms for one grid shape. Plans are
/// immutable and shareable across threads; scratch is allocated per call.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    half: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

/// Half-plane spectrum of a real `rows × cols` field.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpectrum {
    rows: usize,
    cols: usize,
    half: usize,
    /// `data[kc * rows + kr]`
    data: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be non-empty");
        let mut real_planner = RealFftPlanner::<f64>::new();
        let mut planner = FftPlanner::<f64>::new();
        Fft2 {
            rows,
            cols,
            half: cols / 2 + 1,
            r2c: real_planner.plan_fft_forward(cols),
            c2r: real_planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn zero_spectrum(&self) -> HalfSpectrum {
        HalfSpectrum {
            rows: self.rows,
            cols: self.cols,
            half: self.half,
            data: vec![Complex64::new(0.0, 0.0); self.half * self.rows],
        }
    }

    pub fn forward(&self, f: &Field) -> HalfSpectrum {
        assert_eq!(f.shape(), (self.rows, self.cols), "field shape does not match plan");
        self.forward_slice(f.data())
    }

    /// Forward transform of row-major real values.
    pub fn forward_slice(&self, values: &[f64]) -> HalfSpectrum {
        let (m, n, h) = (self.rows, self.cols, self.half);
        assert_eq!(values.len(), m * n);
        let mut spec = self.zero_spectrum();
        let mut row_in = self.r2c.make_input_vec();
        let mut row_out = self.r2c.make_output_vec();
        let mut scratch = self.r2c.make_scratch_vec();
        for r in 0..m {
            row_in.copy_from_slice(&values[r * n..(r + 1) * n]);
            self.r2c
                .process_with_scratch(&mut row_in, &mut row_out, &mut scratch)
                .expect("buffer sizes fixed by plan");
            for (kc, v) in row_out.iter().enumerate() {
                spec.data[kc * m + r] = *v;
            }
        }
        let mut col_scratch = vec![Complex64::new(0.0, 0.0); self.col_fwd.get_inplace_scratch_len()];
        debug_assert_eq!(spec.data.len(), h * m);
        self.col_fwd.process_with_scratch(&mut spec.data, &mut col_scratch);
        spec
    }

    /// Inverse transform, including the `1/(MN)` normalisation.
    pub fn inverse(&self, spec: &HalfSpectrum) -> Field {
        let mut out = vec![0.0; self.rows * self.cols];
        self.inverse_into(spec.clone(), &mut out);
        Field::from_vec_unchecked(self.rows, self.cols, out)
    }

    /// Inverse transform consuming the spectrum, writing row-major values.
    pub fn inverse_into(&self, mut spec: HalfSpectrum, out: &mut [f64]) {
        let (m, n, h) = (self.rows, self.cols, self.half);
        assert_eq!((spec.rows, spec.cols), (m, n), "spectrum shape does not match plan");
        assert_eq!(out.len(), m * n);
        let mut col_scratch = vec![Complex64::new(0.0, 0.0); self.col_inv.get_inplace_scratch_len()];
        self.col_inv.process_with_scratch(&mut spec.data, &mut col_scratch);
        let mut row_in = self.c2r.make_input_vec();
        let mut row_out = self.c2r.make_output_vec();
        let mut scratch = self.c2r.make_scratch_vec();
        let norm = 1.0 / (m * n) as f64;
        for r in 0..m {
            for (kc, v) in row_in.iter_mut().enumerate().take(h) {
                *v = spec.data[kc * m + r];
            }
            // A real row has real DC and Nyquist bins; drop round-off there.
            row_in[0].im = 0.0;
            if n % 2 == 0 {
                row_in[h - 1].im = 0.0;
            }
            self.c2r
                .process_with_scratch(&mut row_in, &mut row_out, &mut scratch)
                .expect("buffer sizes fixed by plan");
            for (o, v) in out[r * n..(r + 1) * n].iter_mut().zip(&row_out) {
                *o = v * norm;
            }
        }
    }
}

impl HalfSpectrum {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored column frequencies, `cols/2 + 1`.
    pub fn half_cols(&self) -> usize {
        self.half
    }

    /// Stored coefficient at row frequency `kr` and column frequency `kc ≤ N/2`.
    pub fn get(&self, kr: usize, kc: usize) -> Complex64 {
        self.data[kc * self.rows + kr]
    }

    pub fn set(&mut self, kr: usize, kc: usize, v: Complex64) {
        self.data[kc * self.rows + kr] = v;
    }

    /// Coefficient at any frequency, using conjugate symmetry for `kc > N/2`.
    pub fn get_full(&self, kr: usize, kc: usize) -> Complex64 {
        if kc < self.half {
            self.get(kr, kc)
        } else {
            let kr2 = (self.rows - kr) % self.rows;
            self.get(kr2, self.cols - kc).conj()
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Visits every stored coefficient with its `(kr, kc)` frequency index.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(usize, usize, &mut Complex64)) {
        let m = self.rows;
        for (i, v) in self.data.iter_mut().enumerate() {
            f(i % m, i / m, v);
        }
    }

    /// Pointwise `self · conj(other)`: the spectrum of a cross-correlation.
    pub fn mul_conj(&self, other: &HalfSpectrum) -> HalfSpectrum {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        HalfSpectrum {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b.conj())
                .collect(),
            ..*self
        }
    }

    pub fn mul(&self, other: &HalfSpectrum) -> HalfSpectrum {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        HalfSpectrum {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
            ..*self
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `self += alpha · other`
    pub fn axpy(&mut self, alpha: f64, other: &HalfSpectrum) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * alpha;
        }
    }

    /// Full-plane energy `Σ|F(k)|²`, reconstructed from the half plane.
    pub fn energy(&self) -> f64 {
        let m = self.rows;
        let nyquist = if self.cols.is_multiple_of(2) { Some(self.half - 1) } else { None };
        self.data
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let kc = i / m;
                let w = if kc == 0 || Some(kc) == nyquist { 1.0 } else { 2.0 };
                w * v.norm_sqr()
            })
            .sum()
    }
}

/// Signed integer frequency for DFT index `k` on a ring of length `n`.
pub fn signed_frequency(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rows: usize, cols: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn round_trip_even_and_odd_shapes() {
        for &(m, n) in &[(8, 8), (9, 7), (16, 10), (5, 12), (1, 6)] {
            let f = random_field(m, n, (m * 31 + n) as u64);
            let fft = Fft2::new(m, n);
            let back = fft.inverse(&fft.forward(&f));
            assert!(back.max_abs_diff(&f) < 1e-13, "{m}x{n}");
        }
    }

    #[test]
    fn parseval() {
        for &(m, n) in &[(16, 16), (12, 9), (7, 10)] {
            let f = random_field(m, n, 3);
            let spec = Fft2::new(m, n).forward(&f);
            let lhs = f.sum_sq();
            let rhs = spec.energy() / (m * n) as f64;
            assert!(((lhs - rhs) / lhs).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_dft() {
        let (m, n) = (6, 5);
        let f = random_field(m, n, 11);
        let spec = Fft2::new(m, n).forward(&f);
        for kr in 0..m {
            for kc in 0..n {
                let mut want = Complex64::new(0.0, 0.0);
                for r in 0..m {
                    for c in 0..n {
                        let ph = -2.0
                            * std::f64::consts::PI
                            * ((kr * r) as f64 / m as f64 + (kc * c) as f64 / n as f64);
                        want += Complex64::from_polar(f[(r, c)], ph);
                    }
                }
                assert!((spec.get_full(kr, kc) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn signed_frequencies() {
        assert_eq!(signed_frequency(0, 8), 0);
        assert_eq!(signed_frequency(4, 8), 4);
        assert_eq!(signed_frequency(5, 8), -3);
        assert_eq!(signed_frequency(3, 7), 3);
        assert_eq!(signed_frequency(4, 7), -3);
    }
}

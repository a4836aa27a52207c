//! Multiresolution analysis through frequency-domain channel multipliers.
//!
//! Synthesising a single channel's coefficients is a real, even filter in
//! frequency: for the level-`j` `h` channel it is `|A_j(f_r)|²·|B_j(f_c)|²`
//! with `A_j(f) = H̃(2^(j−1) f)·B_(j−1)(f)`, `B_j(f) = G̃(2^(j−1) f)·B_(j−1)(f)`
//! and `B_0 = 1`. The `3J + 1` multipliers sum to one at every frequency.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::spectral::{Fft2, HalfSpectrum};

use super::transform::check_levels;
use super::{channel_count, Channel, Direction, WaveletFilter};

/// Squared gains `|A_j|²` and `|B_j|²` on the DFT grid of one axis.
#[derive(Clone, Debug)]
struct AxisGains {
    wavelet: Vec<Vec<f64>>,
    scaling: Vec<Vec<f64>>,
}

impl AxisGains {
    fn new(filter: &WaveletFilter, n: usize, count: usize, levels: usize) -> Self {
        let g = filter.modwt_scaling();
        let h = filter.modwt_wavelet();
        let transfer = |taps: &[f64], f: f64| -> Complex64 {
            taps.iter()
                .enumerate()
                .map(|(l, &c)| Complex64::from_polar(c, -2.0 * std::f64::consts::PI * f * l as f64))
                .sum()
        };
        let mut wavelet = Vec::with_capacity(levels);
        let mut scaling = Vec::with_capacity(levels);
        let mut b = vec![Complex64::new(1.0, 0.0); count];
        for j in 1..=levels {
            let mut a_sq = Vec::with_capacity(count);
            for (k, bk) in b.iter_mut().enumerate() {
                // Reduce the argument mod 1 before scaling to keep phases exact.
                let f = ((k as u64 * (1u64 << (j - 1))) % n as u64) as f64 / n as f64;
                a_sq.push((transfer(&h, f) * *bk).norm_sqr());
                *bk *= transfer(&g, f);
            }
            wavelet.push(a_sq);
            scaling.push(b.iter().map(|v| v.norm_sqr()).collect());
        }
        AxisGains { wavelet, scaling }
    }
}

/// Precomputed MRA multipliers for one grid shape, filter and depth.
#[derive(Clone, Debug)]
pub struct MraPlan {
    rows: usize,
    cols: usize,
    levels: usize,
    filter: WaveletFilter,
    fft: Fft2,
    row_gains: AxisGains,
    col_gains: AxisGains,
}

impl MraPlan {
    pub fn new(rows: usize, cols: usize, filter: &WaveletFilter, levels: usize) -> Result<Self> {
        check_levels(rows, cols, levels)?;
        Ok(MraPlan {
            rows,
            cols,
            levels,
            filter: filter.clone(),
            fft: Fft2::new(rows, cols),
            row_gains: AxisGains::new(filter, rows, rows, levels),
            col_gains: AxisGains::new(filter, cols, cols / 2 + 1, levels),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn filter(&self) -> &WaveletFilter {
        &self.filter
    }

    pub fn num_channels(&self) -> usize {
        channel_count(self.levels)
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// Multiplier of channel `k` at row frequency `kr`, column frequency `kc ≤ N/2`.
    pub fn gain(&self, k: usize, kr: usize, kc: usize) -> f64 {
        let (rg, cg) = (&self.row_gains, &self.col_gains);
        match Channel::from_index(k, self.levels) {
            Channel::Detail { level, dir } => {
                let j = level - 1;
                match dir {
                    Direction::H => rg.wavelet[j][kr] * cg.scaling[j][kc],
                    Direction::V => rg.scaling[j][kr] * cg.wavelet[j][kc],
                    Direction::D => rg.wavelet[j][kr] * cg.wavelet[j][kc],
                }
            }
            Channel::Smooth => {
                let j = self.levels - 1;
                rg.scaling[j][kr] * cg.scaling[j][kc]
            }
        }
    }

    /// Spectrum of channel `k` of the field whose spectrum is `spec`.
    pub fn channel_spectrum(&self, spec: &HalfSpectrum, k: usize) -> HalfSpectrum {
        let mut out = spec.clone();
        out.for_each_mut(|kr, kc, v| *v *= self.gain(k, kr, kc));
        out
    }

    /// Spectra of all channels of `f`.
    pub fn channel_spectra(&self, f: &Field) -> Result<Vec<HalfSpectrum>> {
        self.check_shape(f)?;
        let spec = self.fft.forward(f);
        Ok((0..self.num_channels())
            .into_par_iter()
            .map(|k| self.channel_spectrum(&spec, k))
            .collect())
    }

    pub fn decompose(&self, f: &Field) -> Result<MraStack> {
        self.check_shape(f)?;
        let spec = self.fft.forward(f);
        let channels = (0..self.num_channels())
            .into_par_iter()
            .map(|k| self.fft.inverse(&self.channel_spectrum(&spec, k)))
            .collect();
        Ok(MraStack {
            levels: self.levels,
            channels,
        })
    }

    fn check_shape(&self, f: &Field) -> Result<()> {
        if f.shape() != (self.rows, self.cols) {
            return Err(Error::Shape(format!(
                "field is {}x{}, plan is {}x{}",
                f.rows(),
                f.cols(),
                self.rows,
                self.cols
            )));
        }
        Ok(())
    }
}

/// Additive decomposition of a field into `3J` detail fields and one smooth.
#[derive(Clone, Debug, PartialEq)]
pub struct MraStack {
    levels: usize,
    channels: Vec<Field>,
}

impl MraStack {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn channels(&self) -> &[Field] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Field> {
        self.channels
    }

    pub fn channel(&self, ch: Channel) -> &Field {
        &self.channels[ch.index(self.levels)]
    }

    pub fn detail(&self, level: usize, dir: Direction) -> &Field {
        self.channel(Channel::Detail { level, dir })
    }

    pub fn smooth(&self) -> &Field {
        self.channel(Channel::Smooth)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.channels[0].shape()
    }

    /// Sum of all channels.
    pub fn reconstruct(&self) -> Field {
        let mut acc = self.channels[0].clone();
        for c in &self.channels[1..] {
            acc.axpy(1.0, c);
        }
        acc
    }

    pub fn shifted(&self, dr: isize, dc: isize) -> MraStack {
        MraStack {
            levels: self.levels,
            channels: self.channels.iter().map(|c| c.shifted(dr, dc)).collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> MraStack {
        MraStack {
            levels: self.levels,
            channels: self.channels.iter().map(|c| c.scaled(alpha)).collect(),
        }
    }

    /// Largest channel-wise absolute difference.
    pub fn max_abs_diff(&self, other: &MraStack) -> f64 {
        self.channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// MRA of `f` with `levels` levels.
pub fn mra(f: &Field, filter: &WaveletFilter, levels: usize) -> Result<MraStack> {
    MraPlan::new(f.rows(), f.cols(), filter, levels)?.decompose(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modwt::{mra_pyramid, FilterKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(m: usize, n: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn multipliers_partition_unity() {
        for kind in FilterKind::ALL {
            let plan = MraPlan::new(16, 12, &WaveletFilter::new(kind), 3).unwrap();
            for kr in 0..16 {
                for kc in 0..7 {
                    let s: f64 = (0..10).map(|k| plan.gain(k, kr, kc)).sum();
                    assert!((s - 1.0).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn agrees_with_pyramid_synthesis() {
        for kind in FilterKind::ALL {
            let filter = WaveletFilter::new(kind);
            let f = random_field(16, 32, 2);
            let fast = mra(&f, &filter, 3).unwrap();
            let slow = mra_pyramid(&f, &filter, 3).unwrap();
            for (a, b) in fast.channels().iter().zip(&slow) {
                assert!(a.max_abs_diff(b) < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn details_have_zero_mean() {
        let f = random_field(32, 32, 4).map(|v| v + 3.0);
        let s = mra(&f, &WaveletFilter::new(FilterKind::La8), 4).unwrap();
        for c in &s.channels()[..12] {
            assert!(c.mean().abs() < 1e-12);
        }
        assert!((s.smooth().mean() - f.mean()).abs() < 1e-12);
    }

    #[test]
    fn shape_checked() {
        let plan = MraPlan::new(16, 16, &WaveletFilter::new(FilterKind::Haar), 2).unwrap();
        assert!(matches!(plan.decompose(&Field::zeros(16, 8)), Err(Error::Shape(_))));
        assert!(matches!(
            MraPlan::new(16, 16, &WaveletFilter::new(FilterKind::Haar), 5),
            Err(Error::Level(_))
        ));
    }
}

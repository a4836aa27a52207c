//! Pyramid algorithm with upsampled filters and periodic wrap-around.
//!
//! Analysis at level `j` filters with taps spaced `2^(j−1)` apart:
//! `out[t] = Σ_l f[l] · x[(t − 2^(j−1)·l) mod n]`. Synthesis applies the
//! adjoint, `out[t] = Σ_l f[l] · x[(t + 2^(j−1)·l) mod n]`.

use crate::error::{Error, Result};
use crate::grid::Field;

use super::{channel_count, Channel, Direction, WaveletFilter};

/// Validates `1 ≤ J` and `2^J ≤ min(rows, cols)`.
pub fn check_levels(rows: usize, cols: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::Level("at least one level is required".into()));
    }
    let span = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    if levels >= usize::BITS as usize || span > rows.min(cols) {
        return Err(Error::Level(format!(
            "J = {levels} needs 2^J ≤ min(M, N), grid is {rows}x{cols}"
        )));
    }
    Ok(())
}

fn periodic_filter(x: &[f64], out: &mut [f64], taps: &[f64], step: usize, adjoint: bool) {
    let n = x.len();
    let step = step % n;
    for (t, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut idx = t;
        for &f in taps {
            acc += f * x[idx];
            idx = if adjoint {
                (idx + step) % n
            } else {
                (idx + n - step) % n
            };
        }
        *o = acc;
    }
}

/// Filters every row along the column index.
fn filter_along_cols(x: &Field, taps: &[f64], step: usize, adjoint: bool) -> Field {
    let (m, n) = x.shape();
    let mut out = vec![0.0; m * n];
    for r in 0..m {
        periodic_filter(x.row(r), &mut out[r * n..(r + 1) * n], taps, step, adjoint);
    }
    Field::from_vec_unchecked(m, n, out)
}

/// Filters every column along the row index.
fn filter_along_rows(x: &Field, taps: &[f64], step: usize, adjoint: bool) -> Field {
    filter_along_cols(&x.transpose(), taps, step, adjoint).transpose()
}

/// Wavelet and scaling coefficients of a 2D MODWT, in channel order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModwtCoefficients {
    levels: usize,
    channels: Vec<Field>,
}

impl ModwtCoefficients {
    pub fn from_channels(levels: usize, channels: Vec<Field>) -> Result<Self> {
        if channels.len() != channel_count(levels) {
            return Err(Error::Shape(format!(
                "{} channels given, J = {levels} needs {}",
                channels.len(),
                channel_count(levels)
            )));
        }
        for c in &channels[1..] {
            channels[0].check_same_shape(c)?;
        }
        Ok(ModwtCoefficients { levels, channels })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn channels(&self) -> &[Field] {
        &self.channels
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

    /// `Σ_k Σ_x w_k(x)²`
    pub fn energy(&self) -> f64 {
        self.channels.iter().map(Field::sum_sq).sum()
    }

    /// Copy with every channel except `keep` set to zero.
    pub fn isolate(&self, keep: usize) -> ModwtCoefficients {
        let (m, n) = self.channels[0].shape();
        let channels = self
            .channels
            .iter()
            .enumerate()
            .map(|(k, c)| if k == keep { c.clone() } else { Field::zeros(m, n) })
            .collect();
        ModwtCoefficients {
            levels: self.levels,
            channels,
        }
    }
}

/// 2D MODWT by the separable pyramid algorithm.
pub fn modwt2d_forward(f: &Field, filter: &WaveletFilter, levels: usize) -> Result<ModwtCoefficients> {
    check_levels(f.rows(), f.cols(), levels)?;
    let g = filter.modwt_scaling();
    let h = filter.modwt_wavelet();
    let mut channels = Vec::with_capacity(channel_count(levels));
    let mut v = f.clone().with_time(None);
    for j in 1..=levels {
        let step = 1 << (j - 1);
        let low_c = filter_along_cols(&v, &g, step, false);
        let high_c = filter_along_cols(&v, &h, step, false);
        channels.push(filter_along_rows(&low_c, &h, step, false));
        channels.push(filter_along_rows(&high_c, &g, step, false));
        channels.push(filter_along_rows(&high_c, &h, step, false));
        v = filter_along_rows(&low_c, &g, step, false);
    }
    channels.push(v);
    Ok(ModwtCoefficients { levels, channels })
}

/// Inverse 2D MODWT.
pub fn modwt2d_inverse(coeffs: &ModwtCoefficients, filter: &WaveletFilter) -> Field {
    let g = filter.modwt_scaling();
    let h = filter.modwt_wavelet();
    let levels = coeffs.levels;
    let mut v = coeffs.smooth().clone();
    for j in (1..=levels).rev() {
        let step = 1 << (j - 1);
        let mut low_c = filter_along_rows(&v, &g, step, true);
        low_c.axpy(1.0, &filter_along_rows(coeffs.detail(j, Direction::H), &h, step, true));
        let mut high_c = filter_along_rows(coeffs.detail(j, Direction::V), &g, step, true);
        high_c.axpy(1.0, &filter_along_rows(coeffs.detail(j, Direction::D), &h, step, true));
        v = filter_along_cols(&low_c, &g, step, true);
        v.axpy(1.0, &filter_along_cols(&high_c, &h, step, true));
    }
    v
}

/// MRA by the pyramid route: each channel is synthesised from its own
/// coefficients with every other channel zeroed. Reference implementation
/// for [`super::MraPlan`].
pub fn mra_pyramid(f: &Field, filter: &WaveletFilter, levels: usize) -> Result<Vec<Field>> {
    let coeffs = modwt2d_forward(f, filter, levels)?;
    Ok((0..channel_count(levels))
        .map(|k| modwt2d_inverse(&coeffs.isolate(k), filter))
        .collect())
}

/// 1D MODWT of a periodic sequence, keeping every intermediate level.
#[derive(Clone, Debug, PartialEq)]
pub struct Modwt1d {
    /// `wavelet[j-1]` holds `W_j`.
    pub wavelet: Vec<Vec<f64>>,
    /// `scaling[j-1]` holds `V_j`.
    pub scaling: Vec<Vec<f64>>,
}

pub fn modwt1d(x: &[f64], filter: &WaveletFilter, levels: usize) -> Result<Modwt1d> {
    if levels == 0 || (1usize << levels.min(63)) > x.len() {
        return Err(Error::Level(format!(
            "J = {levels} needs 2^J ≤ {}",
            x.len()
        )));
    }
    let g = filter.modwt_scaling();
    let h = filter.modwt_wavelet();
    let mut out = Modwt1d {
        wavelet: Vec::with_capacity(levels),
        scaling: Vec::with_capacity(levels),
    };
    let mut v = x.to_vec();
    for j in 1..=levels {
        let step = 1 << (j - 1);
        let mut w = vec![0.0; x.len()];
        let mut next = vec![0.0; x.len()];
        periodic_filter(&v, &mut w, &h, step, false);
        periodic_filter(&v, &mut next, &g, step, false);
        out.wavelet.push(w);
        out.scaling.push(next.clone());
        v = next;
    }
    Ok(out)
}

//! Orthonormal Daubechies filter banks.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Least asymmetric LA(8) scaling coefficients, unit norm.
#[allow(clippy::excessive_precision)]
const LA8_SCALING: [f64; 8] = [
    -0.075765714789502212297,
    -0.029635527646002492421,
    0.4976186676327749893,
    0.80373875180513208112,
    0.29785779560530605208,
    -0.099219543576633532568,
    -0.01260396726203130413,
    0.032223100604051467723,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Haar,
    D4,
    La8,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::Haar, FilterKind::D4, FilterKind::La8];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Haar => "haar",
            FilterKind::D4 => "d4",
            FilterKind::La8 => "la8",
        }
    }

    pub fn taps(self) -> usize {
        match self {
            FilterKind::Haar => 2,
            FilterKind::D4 => 4,
            FilterKind::La8 => 8,
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "haar" => Ok(FilterKind::Haar),
            "d4" => Ok(FilterKind::D4),
            "la8" => Ok(FilterKind::La8),
            _ => Err(Error::UnknownFilter(s.to_string())),
        }
    }
}

/// Unit-norm scaling (`g`, low-pass) and wavelet (`h`, high-pass) filters.
///
/// Invariants: `Σg = √2`, `Σh = 0`, `Σg² = Σh² = 1`,
/// `h[l] = (−1)^l · g[L−1−l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletFilter {
    kind: FilterKind,
    g: Vec<f64>,
    h: Vec<f64>,
}

impl WaveletFilter {
    pub fn new(kind: FilterKind) -> Self {
        let g: Vec<f64> = match kind {
            FilterKind::Haar => vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            FilterKind::D4 => {
                let s3 = 3f64.sqrt();
                let d = 4.0 * std::f64::consts::SQRT_2;
                vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
            }
            FilterKind::La8 => LA8_SCALING.to_vec(),
        };
        let h = quadrature_mirror(&g);
        WaveletFilter { kind, g, h }
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn scaling(&self) -> &[f64] {
        &self.g
    }

    pub fn wavelet(&self) -> &[f64] {
        &self.h
    }

    /// MODWT working scaling filter `g/√2`.
    pub fn modwt_scaling(&self) -> Vec<f64> {
        self.g.iter().map(|v| v * FRAC_1_SQRT_2).collect()
    }

    /// MODWT working wavelet filter `h/√2`.
    pub fn modwt_wavelet(&self) -> Vec<f64> {
        self.h.iter().map(|v| v * FRAC_1_SQRT_2).collect()
    }
}

/// Looks up a filter by name (`haar`, `d4`, `la8`, case-insensitive).
pub fn filter_coefficients(name: &str) -> Result<WaveletFilter, Error> {
    Ok(WaveletFilter::new(name.parse()?))
}

/// `h[l] = (−1)^l · g[L−1−l]`
pub fn quadrature_mirror(g: &[f64]) -> Vec<f64> {
    let len = g.len();
    (0..len)
        .map(|l| if l % 2 == 0 { g[len - 1 - l] } else { -g[len - 1 - l] })
        .collect()
}

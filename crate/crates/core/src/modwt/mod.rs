//! Maximal-overlap discrete wavelet transform in one and two dimensions and
//! the additive multiresolution analysis built on it.
//!
//! Two-dimensional channels are ordered `h₁, v₁, d₁, …, h_J, v_J, d_J, φ_J`.
//! Directions are named after the structures they respond to: the `h`
//! channel is low-pass along the column index and high-pass along the row
//! index, so it picks out horizontal filaments.

mod filter;
mod mra;
mod transform;

pub use filter::{filter_coefficients, quadrature_mirror, FilterKind, WaveletFilter};
pub use mra::{mra, MraPlan, MraStack};
pub use transform::{
    check_levels, modwt1d, modwt2d_forward, modwt2d_inverse, mra_pyramid, Modwt1d,
    ModwtCoefficients,
};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    H,
    V,
    D,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::H, Direction::V, Direction::D];

    pub fn name(self) -> &'static str {
        match self {
            Direction::H => "h",
            Direction::V => "v",
            Direction::D => "d",
        }
    }

    fn offset(self) -> usize {
        match self {
            Direction::H => 0,
            Direction::V => 1,
            Direction::D => 2,
        }
    }
}

/// One member of a `3J + 1` channel stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    /// Detail at `level ∈ 1..=J`.
    Detail { level: usize, dir: Direction },
    Smooth,
}

impl Channel {
    /// Position in the stack for a transform with `levels` levels.
    pub fn index(self, levels: usize) -> usize {
        match self {
            Channel::Detail { level, dir } => {
                debug_assert!((1..=levels).contains(&level));
                3 * (level - 1) + dir.offset()
            }
            Channel::Smooth => 3 * levels,
        }
    }

    pub fn from_index(index: usize, levels: usize) -> Channel {
        assert!(index <= 3 * levels, "channel {index} out of range for J = {levels}");
        if index == 3 * levels {
            Channel::Smooth
        } else {
            Channel::Detail {
                level: index / 3 + 1,
                dir: Direction::ALL[index % 3],
            }
        }
    }

    /// Short label such as `h3` or `s6`.
    pub fn label(self, levels: usize) -> String {
        match self {
            Channel::Detail { level, dir } => format!("{}{level}", dir.name()),
            Channel::Smooth => format!("s{levels}"),
        }
    }
}

pub fn channel_count(levels: usize) -> usize {
    3 * levels + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_index_round_trip() {
        for levels in 1..=6 {
            for i in 0..channel_count(levels) {
                assert_eq!(Channel::from_index(i, levels).index(levels), i);
            }
        }
        assert_eq!(Channel::from_index(18, 6), Channel::Smooth);
        assert_eq!(
            Channel::from_index(4, 6),
            Channel::Detail { level: 2, dir: Direction::V }
        );
        assert_eq!(Channel::from_index(5, 6).label(6), "d2");
    }
}

//! Field file formats.
//!
//! `VORT` layout, all little-endian:
//!
//! | offset | size  | content                          |
//! |--------|-------|----------------------------------|
//! | 0      | 4     | ASCII `VORT`                     |
//! | 4      | 2     | version, `u16` = 1               |
//! | 6      | 4     | rows M, `u32`                    |
//! | 10     | 4     | cols N, `u32`                    |
//! | 14     | 8     | time tag, `f64` (NaN = absent)   |
//! | 22     | 8·M·N | values, `f64`, row-major         |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Field;

pub const MAGIC: &[u8; 4] = b"VORT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 22;

/// Serialises a field to `VORT` bytes.
pub fn encode_field(f: &Field) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * f.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(f.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(f.cols() as u32).to_le_bytes());
    buf.extend_from_slice(&f.time().unwrap_or(f64::NAN).to_le_bytes());
    for v in f.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Parses `VORT` bytes.
pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
        }
        return Err(Error::Corrupt(format!(
            "header truncated: {} of {HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let time = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!("empty grid {rows}x{cols}")));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format(format!("grid {rows}x{cols} too large")))?;
    if bytes.len() != expected {
        return Err(Error::Corrupt(format!(
            "expected {expected} bytes for a {rows}x{cols} field, found {}",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let time = if time.is_nan() { None } else { Some(time) };
    Ok(Field::new(rows, cols, data)?.with_time(time))
}

pub fn write_field(path: impl AsRef<Path>, f: &Field) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_field(f)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}

/// 8-bit grayscale rendering: values are clipped to mean ± 3 sd, then mapped
/// linearly from the clipped range onto 0..=255.
pub fn encode_pgm(f: &Field) -> Vec<u8> {
    let mean = f.mean();
    let sd = f.std_dev();
    let (min, max) = f
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let lo = min.max(mean - 3.0 * sd);
    let hi = max.min(mean + 3.0 * sd);
    let span = hi - lo;
    let mut buf = format!("P5\n{} {}\n255\n", f.cols(), f.rows()).into_bytes();
    buf.extend(f.data().iter().map(|&v| {
        if span > 0.0 {
            (((v.clamp(lo, hi) - lo) / span) * 255.0).round() as u8
        } else {
            128
        }
    }));
    buf
}

pub fn write_pgm(path: impl AsRef<Path>, f: &Field) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_pgm(f)).map_err(|e| Error::io(path, e))
}

//! 16-bit binary PGM export of accumulated images.
//!
//! Pixel values are mapped as `p = round((v - offset) * scale)` with
//! `offset = min(v)` and `scale = 65535 / (max(v) - min(v))`. Both are stored
//! in a header comment so values can be recovered as `p / scale + offset`.

use std::io::{self, Write};

use ndarray::Array2;

/// Mapping recorded in the header comment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmScale {
    pub scale: f64,
    pub offset: f64,
}

pub fn write_pgm16<W: Write>(grid: &Array2<f64>, mut out: W) -> io::Result<PgmScale> {
    let (h, w) = grid.dim();
    let min = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let max = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (offset, range) = if grid.is_empty() {
        (0.0, 0.0)
    } else {
        (min, max - min)
    };
    let scale = if range > 0.0 { 65535.0 / range } else { 1.0 };

    write!(out, "P5\n# scale={scale} offset={offset}\n{w} {h}\n65535\n")?;
    let mut bytes = Vec::with_capacity(w * h * 2);
    for &v in grid.iter() {
        let p = ((v - offset) * scale).round().clamp(0.0, 65535.0) as u16;
        bytes.extend_from_slice(&p.to_be_bytes());
    }
    out.write_all(&bytes)?;
    Ok(PgmScale { scale, offset })
}

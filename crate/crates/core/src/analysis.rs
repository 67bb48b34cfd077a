//! Diagnostics: cover/stego diffs, distortion accounting, change maps and
//! the integer export consumed by external steganalysis tools.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cost_model::CostMap;
use crate::error::{Error, Result};
use crate::float_plane::{self, MANTISSA_BITS};
use crate::image_io::{CoverImage, StegoImage};
use crate::scalar::Scalar;

/// Upper clamp bound for the integer export.
pub const EXPORT_CLAMP: f64 = 1e7;
pub const EXPORT_MAGIC: &[u8; 8] = b"HDRSINT1";

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedReport {
    pub width: usize,
    pub height: usize,
    /// Flipped bits per effective plane, plane 1 first. At least `n_x`
    /// entries.
    pub flips_per_plane: Vec<usize>,
    /// Changed bits outside the embedding domain (sign, exponent, protected
    /// mantissa bits, or below a pixel's capacity).
    pub out_of_domain_bits: usize,
    /// `Σ ρ` over flipped in-domain bits.
    pub total_distortion: f64,
    /// Flips divided by `pixels × planes`.
    pub change_rate: f64,
    /// Row-major, true where any bit of the pixel changed.
    pub change_map: Vec<bool>,
}

impl EmbedReport {
    pub fn total_flips(&self) -> usize {
        self.flips_per_plane.iter().sum()
    }

    pub fn changed_pixels(&self) -> usize {
        self.change_map.iter().filter(|&&c| c).count()
    }
}

/// Compares a cover with its stego bit by bit.
pub fn diff_report<F: Scalar>(
    cover: &CoverImage,
    stego: &StegoImage,
    costs: &CostMap<F>,
) -> Result<EmbedReport> {
    let shape = (cover.height(), cover.width());
    for found in [
        (stego.height(), stego.width()),
        (costs.height(), costs.width()),
    ] {
        if found != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found,
            });
        }
    }
    let cap = float_plane::capacity(cover)?;
    let mut flips = vec![0usize; cap.n_x()];
    let mut out_of_domain = 0;
    let mut distortion = 0f64;
    let mut change_map = Vec::with_capacity(cover.len());

    for (i, ((&x, &y), &n)) in cover
        .pixels()
        .iter()
        .zip(stego.pixels())
        .zip(cap.values())
        .enumerate()
    {
        let mut diff = x.to_bits() ^ y.to_bits();
        change_map.push(diff != 0);
        while diff != 0 {
            let pos = diff.trailing_zeros();
            diff &= diff - 1;
            let plane = (pos < MANTISSA_BITS)
                .then(|| float_plane::bit_plane_index(n, (MANTISSA_BITS - pos) as u8))
                .flatten();
            match plane {
                Some(k) => {
                    if flips.len() < k {
                        flips.resize(k, 0);
                    }
                    flips[k - 1] += 1;
                    distortion += costs.values()[i].to_f64_lossy();
                }
                None => out_of_domain += 1,
            }
        }
    }
    let total: usize = flips.iter().sum();
    let slots = cover.len() * flips.len();
    Ok(EmbedReport {
        width: cover.width(),
        height: cover.height(),
        change_rate: if slots == 0 { 0.0 } else { total as f64 / slots as f64 },
        flips_per_plane: flips,
        out_of_domain_bits: out_of_domain,
        total_distortion: distortion,
        change_map,
    })
}

/// `round(clamp(x, 0, 10⁷))`, rounding half away from zero.
pub fn export_value(x: f32) -> i32 {
    f64::from(x).clamp(0.0, EXPORT_CLAMP).round() as i32
}

/// Writes the clamped, rounded image: 8-byte magic, width and height as
/// little-endian `u32`, then `width × height` little-endian `i32`.
pub fn steganalysis_export(image: &CoverImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&encode_export(image))?;
    out.flush()?;
    Ok(())
}

pub fn encode_export(image: &CoverImage) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + 4 * image.len());
    buf.extend_from_slice(EXPORT_MAGIC);
    buf.extend_from_slice(&(image.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(image.height() as u32).to_le_bytes());
    for &x in image.pixels() {
        buf.extend_from_slice(&export_value(x).to_le_bytes());
    }
    buf
}

/// Parses an export back into `(width, height, values)`.
pub fn decode_export(bytes: &[u8]) -> Result<(usize, usize, Vec<i32>)> {
    if bytes.len() < 16 || &bytes[..8] != EXPORT_MAGIC {
        return Err(Error::MalformedExport("missing HDRSINT1 header".into()));
    }
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != 4 * w * h {
        return Err(Error::MalformedExport(format!(
            "expected {} sample bytes, found {}",
            4 * w * h,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((w, h, values))
}

/// Binary PGM (P5, maxval 255) of the change map: changed pixels white.
pub fn change_map_image(report: &EmbedReport, path: impl AsRef<Path>) -> Result<()> {
    write_pgm(report.width, report.height, &report.change_map, path)
}

pub fn write_pgm(
    width: usize,
    height: usize,
    mask: &[bool],
    path: impl AsRef<Path>,
) -> Result<()> {
    if mask.len() != width * height {
        return Err(Error::ShapeMismatch {
            expected: (height, width),
            found: (mask.len(), 1),
        });
    }
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{width} {height}\n255\n")?;
    let body: Vec<u8> = mask.iter().map(|&c| if c { 255 } else { 0 }).collect();
    out.write_all(&body)?;
    out.flush()?;
    Ok(())
}

//! Per-pixel flip costs and the exponent distortion-bias correction.
//!
//! A cost model maps a cover to a non-negative cost per pixel (`∞` marks a
//! wet pixel that must never change). [`correct`] then divides every cost
//! by `β = 2^|E - 127|` so that pixels far from `[1, 2)` become cheaper.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::float_plane::{FloatFields, EXPONENT_BIAS};
use crate::image_io::CoverImage;
use crate::scalar::Scalar;

/// Stabilizer added to each directional suitability before inversion.
pub const DIRECTIONAL_EPSILON: f64 = 1e-10;
/// Stabilizer added to wavelet magnitudes.
pub const WAVELET_SIGMA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum CostModel {
    /// `ρ = 1` everywhere.
    Uniform,
    /// Inverse aggregation of three directional high-pass residuals.
    #[default]
    DirectionalResidual,
    /// Relative change of undecimated Haar detail coefficients.
    WaveletRelative,
}

impl CostModel {
    pub const ALL: [CostModel; 3] = [
        CostModel::Uniform,
        CostModel::DirectionalResidual,
        CostModel::WaveletRelative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostModel::Uniform => "uniform",
            CostModel::DirectionalResidual => "directional",
            CostModel::WaveletRelative => "wavelet",
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CostModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownCostModel(s.to_string()))
    }
}

/// Row-major grid of flip costs.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMap<F> {
    width: usize,
    height: usize,
    rho: Vec<F>,
    corrected: bool,
    model: CostModel,
}

impl<F: Scalar> CostMap<F> {
    pub fn from_values(
        width: usize,
        height: usize,
        rho: Vec<F>,
        model: CostModel,
    ) -> Result<Self> {
        if rho.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: (height, width),
                found: (rho.len(), 1),
            });
        }
        if let Some(bad) = rho.iter().find(|v| v.is_nan() || **v < F::zero()) {
            return Err(Error::MalformedCover(format!("invalid cost {bad}")));
        }
        Ok(Self {
            width,
            height,
            rho,
            corrected: false,
            model,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[F] {
        &self.rho
    }

    pub fn get(&self, row: usize, col: usize) -> F {
        self.rho[row * self.width + col]
    }

    pub fn is_corrected(&self) -> bool {
        self.corrected
    }

    pub fn model(&self) -> CostModel {
        self.model
    }

    /// Marks `index` wet.
    pub fn set_wet(&mut self, index: usize) {
        self.rho[index] = F::infinity();
    }

    /// Multiplies every cost by `factor > 0`.
    pub fn scaled(&self, factor: F) -> Self {
        let mut out = self.clone();
        for v in &mut out.rho {
            *v = *v * factor;
        }
        out
    }
}

/// Computes raw (uncorrected) costs for `image`.
pub fn cost<F: Scalar>(image: &CoverImage, model: CostModel) -> CostMap<F> {
    let rho = match model {
        CostModel::Uniform => vec![F::one(); image.len()],
        CostModel::DirectionalResidual => directional_costs(image),
        CostModel::WaveletRelative => wavelet_costs(image),
    };
    CostMap {
        width: image.width(),
        height: image.height(),
        rho,
        corrected: false,
        model,
    }
}

/// Distortion bias `β = 2^|E - 127|` of one pixel.
pub fn distortion_bias<F: Scalar>(pixel: f32) -> F {
    let e = i32::from(FloatFields::from_bits(pixel.to_bits()).exponent);
    F::lit(2.0).powi((e - EXPONENT_BIAS).abs())
}

/// Applies `ρ* = ρ / β` per pixel.
pub fn correct<F: Scalar>(costs: &CostMap<F>, image: &CoverImage) -> Result<CostMap<F>> {
    if costs.corrected {
        return Err(Error::AlreadyCorrected);
    }
    if costs.width != image.width() || costs.height != image.height() {
        return Err(Error::ShapeMismatch {
            expected: (costs.height, costs.width),
            found: (image.height(), image.width()),
        });
    }
    let rho = costs
        .rho
        .iter()
        .zip(image.pixels())
        .map(|(&r, &x)| r / distortion_bias::<F>(x))
        .collect();
    Ok(CostMap {
        rho,
        corrected: true,
        ..costs.clone()
    })
}

/// Symmetric (edge-repeating) index reflection.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

struct Grid<'a, F> {
    w: usize,
    h: usize,
    v: &'a [F],
}

impl<F: Copy> Grid<'_, F> {
    #[inline]
    fn at(&self, r: isize, c: isize) -> F {
        self.v[reflect(r, self.h) * self.w + reflect(c, self.w)]
    }
}

fn to_scalar<F: Scalar>(image: &CoverImage) -> Vec<F> {
    image.pixels().iter().map(|&x| F::from_f32_pixel(x)).collect()
}

/// Directions as (row step, column step): horizontal, vertical, diagonal.
const DIRECTIONS: [(isize, isize); 3] = [(0, 1), (1, 0), (1, 1)];

fn directional_costs<F: Scalar>(image: &CoverImage) -> Vec<F> {
    let (w, h) = (image.width(), image.height());
    let px = to_scalar::<F>(image);
    let x = Grid { w, h, v: &px };
    let two = F::lit(2.0);
    let eps = F::lit(DIRECTIONAL_EPSILON);
    let mut rho = vec![F::zero(); w * h];
    for &(dr, dc) in &DIRECTIONS {
        // |[-1, 2, -1]| residual along the direction
        let mut residual = Vec::with_capacity(w * h);
        for r in 0..h as isize {
            for c in 0..w as isize {
                let v = two * x.at(r, c) - x.at(r - dr, c - dc) - x.at(r + dr, c + dc);
                residual.push(v.abs());
            }
        }
        let res = Grid { w, h, v: &residual };
        // smoothed with the mirrored absolute kernel [1, 2, 1]
        for r in 0..h as isize {
            for c in 0..w as isize {
                let xi = two * res.at(r, c) + res.at(r - dr, c - dc) + res.at(r + dr, c + dc);
                rho[r as usize * w + c as usize] =
                    rho[r as usize * w + c as usize] + (xi + eps).recip();
            }
        }
    }
    rho
}

fn wavelet_costs<F: Scalar>(image: &CoverImage) -> Vec<F> {
    let (w, h) = (image.width(), image.height());
    let px = to_scalar::<F>(image);
    let x = Grid { w, h, v: &px };
    let half = F::lit(0.5);
    let sigma = F::lit(WAVELET_SIGMA);
    // Undecimated Haar details; the 2x2 kernels are outer products of
    // lo = [1, 1]/√2 and hi = [1, -1]/√2, so every tap has magnitude 1/2.
    let mut inv = [
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
    ];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let a = x.at(r, c);
            let b = x.at(r, c + 1);
            let d = x.at(r + 1, c);
            let e = x.at(r + 1, c + 1);
            let lh = half * (a - b + d - e);
            let hl = half * (a + b - d - e);
            let hh = half * (a - b - d + e);
            inv[0].push((lh.abs() + sigma).recip());
            inv[1].push((hl.abs() + sigma).recip());
            inv[2].push((hh.abs() + sigma).recip());
        }
    }
    let mut rho = vec![F::zero(); w * h];
    for band in &inv {
        let g = Grid { w, h, v: band };
        for r in 0..h as isize {
            for c in 0..w as isize {
                // coefficients whose support contains (r, c)
                let s = g.at(r, c) + g.at(r - 1, c) + g.at(r, c - 1) + g.at(r - 1, c - 1);
                rho[r as usize * w + c as usize] = rho[r as usize * w + c as usize] + half * s;
            }
        }
    }
    rho
}

const COST_MAGIC: &str = "hdrsteg-costmap 1";

/// Writes a text header followed by little-endian `f32` costs.
pub fn write_cost_map<F: Scalar>(map: &CostMap<F>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{COST_MAGIC}")?;
    writeln!(
        out,
        "{} {} {} {}",
        map.width,
        map.height,
        map.model,
        if map.corrected { "corrected" } else { "raw" }
    )?;
    for v in &map.rho {
        let v = v.to_f32().unwrap_or(f32::INFINITY);
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_cost_map(path: impl AsRef<Path>) -> Result<CostMap<f32>> {
    let mut input = BufReader::new(File::open(path)?);
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != COST_MAGIC {
        return Err(Error::MalformedExport("bad cost map magic".into()));
    }
    line.clear();
    input.read_line(&mut line)?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [w, h, model, state] = fields[..] else {
        return Err(Error::MalformedExport("bad cost map header".into()));
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::MalformedExport(format!("bad dimension {s:?}")))
    };
    let (w, h) = (parse(w)?, parse(h)?);
    let model: CostModel = model.parse()?;
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    if raw.len() != w * h * 4 {
        return Err(Error::MalformedExport(format!(
            "expected {} payload bytes, found {}",
            w * h * 4,
            raw.len()
        )));
    }
    let rho = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let mut map = CostMap::from_values(w, h, rho, model)?;
    map.corrected = state == "corrected";
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(w: usize, h: usize, f: impl Fn(usize, usize) -> f32) -> CoverImage {
        let mut px = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                px.push(f(r, c));
            }
        }
        CoverImage::new(w, h, px).unwrap()
    }

    #[test]
    fn model_names() {
        for m in CostModel::ALL {
            assert_eq!(m.name().parse::<CostModel>().unwrap(), m);
        }
        assert!(matches!("hugo".parse::<CostModel>(), Err(Error::UnknownCostModel(_))));
    }

    #[test]
    fn uniform_is_one() {
        let im = image(5, 3, |r, c| (r * 5 + c) as f32 + 0.5);
        let m = cost::<f64>(&im, CostModel::Uniform);
        assert!(m.values().iter().all(|&v| v == 1.0));
        assert!(!m.is_corrected());
    }

    #[test]
    fn constant_image_constant_cost() {
        let im = image(9, 7, |_, _| 3.25);
        for model in [CostModel::DirectionalResidual, CostModel::WaveletRelative] {
            let m = cost::<f64>(&im, model);
            let first = m.values()[0];
            assert!(m.values().iter().all(|&v| v == first), "{model}");
        }
    }

    /// Direct evaluation of the directional formula at one pixel, written
    /// without the shared grid helpers.
    fn directional_at(x: &[Vec<f64>], r: usize, c: usize) -> f64 {
        let h = x.len() as isize;
        let w = x[0].len() as isize;
        let refl = |i: isize, n: isize| -> usize {
            if i < 0 {
                (-i - 1) as usize
            } else if i >= n {
                (2 * n - i - 1) as usize
            } else {
                i as usize
            }
        };
        let px = |r: isize, c: isize| x[refl(r, h)][refl(c, w)];
        let res = |r: isize, c: isize, dr: isize, dc: isize| {
            (2.0 * px(r, c) - px(r - dr, c - dc) - px(r + dr, c + dc)).abs()
        };
        let (r, c) = (r as isize, c as isize);
        let mut rho = 0.0;
        for (dr, dc) in [(0, 1), (1, 0), (1, 1)] {
            let at = |rr: isize, cc: isize| res(refl(rr, h) as isize, refl(cc, w) as isize, dr, dc);
            let xi = at(r - dr, c - dc) + 2.0 * at(r, c) + at(r + dr, c + dc);
            rho += 1.0 / (xi + 1e-10);
        }
        rho
    }

    #[test]
    fn edge_is_cheaper_than_flat_interior() {
        let f = |_: usize, c: usize| if c < 8 { 0.25f32 } else { 1.0 };
        let im = image(16, 16, f);
        let grid: Vec<Vec<f64>> = (0..16)
            .map(|r| (0..16).map(|c| f64::from(f(r, c))).collect())
            .collect();
        let m = cost::<f64>(&im, CostModel::DirectionalResidual);
        for r in 0..16 {
            for c in 0..16 {
                let oracle = directional_at(&grid, r, c);
                assert!((m.get(r, c) - oracle).abs() <= 1e-9 * oracle, "({r},{c})");
            }
        }
        let edge = m.get(8, 7).max(m.get(8, 8));
        let flat = m.get(8, 2).min(m.get(8, 13));
        assert!(edge < flat);

        let wv = cost::<f64>(&im, CostModel::WaveletRelative);
        assert!(wv.get(8, 8) < wv.get(8, 2));
    }

    #[test]
    fn textured_cheaper_than_smooth() {
        let im = image(32, 16, |r, c| {
            if c < 16 {
                1.0
            } else {
                1.0 + ((r * 7 + c * 13) % 5) as f32 * 0.3
            }
        });
        for model in [CostModel::DirectionalResidual, CostModel::WaveletRelative] {
            let m = cost::<f64>(&im, model);
            assert!(m.get(8, 24) < m.get(8, 4), "{model}");
        }
    }

    #[test]
    fn f32_and_f64_agree() {
        // pseudo-random texture: no residual is near zero
        let im = image(12, 10, |r, c| {
            let h = ((r * 12 + c) as u32).wrapping_mul(2_654_435_761) >> 8;
            0.1 + (h % 1000) as f32 * 0.01
        });
        for model in [CostModel::DirectionalResidual, CostModel::WaveletRelative] {
            let a = cost::<f32>(&im, model);
            let b = cost::<f64>(&im, model);
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((f64::from(*x) - y).abs() <= 1e-4 * y, "{model}");
            }
        }
    }

    #[test]
    fn correction_examples() {
        let im = CoverImage::new(3, 1, vec![1.5, 0.3167254, 0.75]).unwrap();
        let raw = CostMap::from_values(3, 1, vec![2.0f64, 2.0, 2.0], CostModel::Uniform).unwrap();
        let c = correct(&raw, &im).unwrap();
        assert_eq!(c.values(), &[2.0, 0.5, 1.0]);
        assert!(c.is_corrected());
        assert!(matches!(correct(&c, &im), Err(Error::AlreadyCorrected)));
    }

    #[test]
    fn uniform_correction_over_three_exponents() {
        // E = 126, 127, 128
        let im = CoverImage::new(3, 1, vec![0.75, 1.25, 2.5]).unwrap();
        let exps: Vec<u8> = im
            .pixels()
            .iter()
            .map(|&x| FloatFields::decompose(x).unwrap().exponent)
            .collect();
        assert_eq!(exps, vec![126, 127, 128]);
        let c = correct(&cost::<f64>(&im, CostModel::Uniform), &im).unwrap();
        assert_eq!(c.values(), &[0.5, 1.0, 0.5]);
    }

    #[test]
    fn bias_properties() {
        assert_eq!(distortion_bias::<f64>(1.0), 1.0);
        assert_eq!(distortion_bias::<f64>(1.999), 1.0);
        assert_eq!(distortion_bias::<f64>(0.3167254), 4.0);
        assert_eq!(distortion_bias::<f64>(2.0), 2.0);
        for bits in (0u32..0x7f80_0000).step_by(0x0013_5791) {
            let x = f32::from_bits(bits);
            let b = distortion_bias::<f64>(x);
            assert!(b >= 1.0);
            assert_eq!(b == 1.0, (1.0..2.0).contains(&x));
        }
    }

    #[test]
    fn wet_costs_survive_correction() {
        let im = CoverImage::new(2, 1, vec![0.5, 4.0]).unwrap();
        let mut raw = cost::<f64>(&im, CostModel::Uniform);
        raw.set_wet(1);
        let c = correct(&raw, &im).unwrap();
        assert_eq!(c.values()[0], 0.5);
        assert!(c.values()[1].is_infinite());
    }

    #[test]
    fn shape_and_value_checks() {
        assert!(CostMap::from_values(2, 2, vec![1.0f64; 3], CostModel::Uniform).is_err());
        assert!(CostMap::from_values(1, 1, vec![-1.0f64], CostModel::Uniform).is_err());
        assert!(CostMap::from_values(1, 1, vec![f64::NAN], CostModel::Uniform).is_err());
        let im = CoverImage::new(2, 1, vec![1.0, 1.0]).unwrap();
        let m = CostMap::from_values(1, 2, vec![1.0f64; 2], CostModel::Uniform).unwrap();
        assert!(matches!(correct(&m, &im), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cost");
        let im = image(6, 4, |r, c| 0.2 + (r + c) as f32);
        let mut m = correct(&cost::<f64>(&im, CostModel::WaveletRelative), &im).unwrap();
        m.set_wet(3);
        write_cost_map(&m, &path).unwrap();
        let back = read_cost_map(&path).unwrap();
        assert_eq!((back.width(), back.height()), (6, 4));
        assert_eq!(back.model(), CostModel::WaveletRelative);
        assert!(back.is_corrected());
        for (a, b) in back.values().iter().zip(m.values()) {
            assert_eq!(*a, *b as f32);
        }
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"hdrsteg-costmap 1\n6 4 wavelet corrected\n"));
    }
}

//! Float TIFF input/output, luminance extraction and experiment tiling.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, Write};
use std::path::{Path, PathBuf};

use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::tags::Tag;

use crate::error::{Error, Result};
use crate::float_plane;

/// Rec. 709 luminance weights for R, G and B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// A grayscale image of non-negative finite `f32` luminance values,
/// stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

/// Stego images share the cover representation.
pub type StegoImage = CoverImage;

impl CoverImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: (height, width),
                found: (pixels.len() / width, width),
            });
        }
        validate_samples(&pixels)?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    /// Ratio of the largest to the smallest strictly positive pixel.
    pub fn dynamic_range(&self) -> Option<f64> {
        let mut lo = f32::INFINITY;
        let mut hi = 0f32;
        for &x in &self.pixels {
            if x > 0.0 {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (hi > 0.0).then(|| f64::from(hi) / f64::from(lo))
    }

    /// Copy of the `size`×`size` block whose top-left corner is `(row, col)`.
    fn crop(&self, row: usize, col: usize, size: usize) -> CoverImage {
        let mut pixels = Vec::with_capacity(size * size);
        for r in row..row + size {
            let start = r * self.width + col;
            pixels.extend_from_slice(&self.pixels[start..start + size]);
        }
        CoverImage {
            width: size,
            height: size,
            pixels,
        }
    }
}

fn validate_samples(pixels: &[f32]) -> Result<()> {
    for (index, &value) in pixels.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::MalformedCover(format!(
                "non-finite pixel {value} at index {index}"
            )));
        }
        if value.is_sign_negative() {
            return Err(Error::NegativePixel { index, value });
        }
    }
    Ok(())
}

/// Three-channel float image with separate planes.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub red: Vec<f32>,
    pub green: Vec<f32>,
    pub blue: Vec<f32>,
}

impl RgbImage {
    pub fn from_interleaved(width: usize, height: usize, data: &[f32]) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::ShapeMismatch {
                expected: (height, width * 3),
                found: (data.len() / (width * 3).max(1), width * 3),
            });
        }
        let mut img = RgbImage {
            width,
            height,
            red: Vec::with_capacity(width * height),
            green: Vec::with_capacity(width * height),
            blue: Vec::with_capacity(width * height),
        };
        for px in data.chunks_exact(3) {
            img.red.push(px[0]);
            img.green.push(px[1]);
            img.blue.push(px[2]);
        }
        Ok(img)
    }
}

/// Luminance `0.2126 R + 0.7152 G + 0.0722 B` of each pixel.
pub fn extract_luminance(rgb: &RgbImage) -> Result<CoverImage> {
    let n = rgb.width * rgb.height;
    for channel in [&rgb.red, &rgb.green, &rgb.blue] {
        if channel.len() != n {
            return Err(Error::ShapeMismatch {
                expected: (rgb.height, rgb.width),
                found: (channel.len(), 1),
            });
        }
        validate_samples(channel)?;
    }
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let pixels = (0..n)
        .map(|i| {
            let y = wr * f64::from(rgb.red[i])
                + wg * f64::from(rgb.green[i])
                + wb * f64::from(rgb.blue[i]);
            y as f32
        })
        .collect();
    CoverImage::new(rgb.width, rgb.height, pixels)
}

/// Compression methods the reader accepts: none, LZW, Deflate (both tags),
/// PackBits. All of them reproduce the samples exactly.
const LOSSLESS_COMPRESSION: [u16; 5] = [1, 5, 8, 0x80B2, 0x8005];
/// JPEG, new-style JPEG, Kodak DCR, lossy JPEG (DNG), WebP.
const LOSSY_COMPRESSION: [u16; 5] = [6, 7, 65000, 34892, 0xC351];

struct FloatRaster {
    width: usize,
    height: usize,
    channels: u16,
    samples: Vec<f32>,
}

fn decode_float<R: Read + Seek>(reader: R, max_channels: u16) -> Result<FloatRaster> {
    let mut decoder = Decoder::new(reader)?;
    let compression = decoder
        .find_tag_unsigned::<u16>(Tag::Compression)?
        .unwrap_or(1);
    if LOSSY_COMPRESSION.contains(&compression) {
        return Err(Error::LossyCompression(compression));
    }
    if !LOSSLESS_COMPRESSION.contains(&compression) {
        return Err(Error::UnsupportedCompression(compression));
    }
    // Predictors and tiles are lossless too, but the reader only takes the
    // plain strip layout it can vouch for.
    let predictor = decoder.find_tag_unsigned::<u16>(Tag::Predictor)?.unwrap_or(1);
    if predictor != 1 {
        return Err(Error::UnsupportedSamples(format!("predictor {predictor}")));
    }
    if decoder.find_tag(Tag::TileWidth)?.is_some() {
        return Err(Error::UnsupportedSamples("tiled layout".into()));
    }
    if decoder.find_tag_unsigned::<u16>(Tag::PlanarConfiguration)?.unwrap_or(1) != 1 {
        return Err(Error::UnsupportedSamples("planar configuration".into()));
    }
    let channels = decoder
        .find_tag_unsigned::<u16>(Tag::SamplesPerPixel)?
        .unwrap_or(1);
    if channels > max_channels || channels == 2 {
        return Err(Error::MultiChannel { channels });
    }
    let bits = decoder
        .find_tag_unsigned_vec::<u16>(Tag::BitsPerSample)?
        .and_then(|v| v.first().copied())
        .unwrap_or(1);
    let format = decoder
        .find_tag_unsigned_vec::<u16>(Tag::SampleFormat)?
        .and_then(|v| v.first().copied())
        .unwrap_or(1);
    if format != 3 {
        return Err(Error::IntegerSamples { bits });
    }
    if bits != 32 {
        return Err(Error::UnsupportedSamples(format!(
            "{bits}-bit float samples"
        )));
    }
    let (width, height) = decoder.dimensions()?;
    let samples = match decoder.read_image()? {
        DecodingResult::F32(v) => v,
        _ => {
            return Err(Error::UnsupportedSamples(
                "decoder did not yield f32 samples".into(),
            ))
        }
    };
    Ok(FloatRaster {
        width: width as usize,
        height: height as usize,
        channels,
        samples,
    })
}

/// Reads a single-channel 32-bit float TIFF bit-exactly.
pub fn read_cover(path: impl AsRef<Path>) -> Result<CoverImage> {
    let file = BufReader::new(File::open(path)?);
    read_cover_from(file)
}

pub fn read_cover_from<R: Read + Seek>(reader: R) -> Result<CoverImage> {
    let raster = decode_float(reader, 1)?;
    CoverImage::new(raster.width, raster.height, raster.samples)
}

/// Reads a float TIFF that is either grayscale or RGB; RGB inputs are
/// reduced to luminance.
pub fn read_luminance(path: impl AsRef<Path>) -> Result<CoverImage> {
    let raster = decode_float(BufReader::new(File::open(path)?), 3)?;
    match raster.channels {
        1 => CoverImage::new(raster.width, raster.height, raster.samples),
        _ => extract_luminance(&RgbImage::from_interleaved(
            raster.width,
            raster.height,
            &raster.samples,
        )?),
    }
}

/// Writes a little-endian, uncompressed, single-channel float TIFF.
pub fn write_cover(image: &CoverImage, path: impl AsRef<Path>) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write_cover_to(image, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn write_cover_to<W: Write + Seek>(image: &CoverImage, writer: W) -> Result<()> {
    if image.is_empty() {
        return Err(Error::EmptyImage);
    }
    let mut encoder = TiffEncoder::new(writer)?;
    encoder.write_image::<colortype::Gray32Float>(
        image.width as u32,
        image.height as u32,
        &image.pixels,
    )?;
    Ok(())
}

pub fn write_rgb(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let mut data = Vec::with_capacity(image.red.len() * 3);
    for i in 0..image.red.len() {
        data.extend_from_slice(&[image.red[i], image.green[i], image.blue[i]]);
    }
    let mut file = BufWriter::new(File::create(path)?);
    let mut encoder = TiffEncoder::new(&mut file)?;
    encoder.write_image::<colortype::RGB32Float>(image.width as u32, image.height as u32, &data)?;
    file.flush()?;
    Ok(())
}

/// Non-overlapping `size`×`size` crops in raster order. Partial tiles at the
/// right and bottom borders are dropped.
pub fn tile(image: &CoverImage, size: usize) -> Result<Vec<CoverImage>> {
    if size == 0 || size > image.width || size > image.height {
        return Err(Error::InvalidTileSize {
            size,
            width: image.width,
            height: image.height,
        });
    }
    let mut out = Vec::with_capacity((image.width / size) * (image.height / size));
    for ty in 0..image.height / size {
        for tx in 0..image.width / size {
            out.push(image.crop(ty * size, tx * size, size));
        }
    }
    Ok(out)
}

/// Admission rule for experiment covers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapacityFilter {
    /// Minimum accepted `n_x`.
    pub min_nx: usize,
    /// If set, the max/min positive pixel ratio must exceed this value.
    pub min_dynamic_range: Option<f64>,
}

impl CapacityFilter {
    /// `n_x >= min_nx` plus dynamic range above 2⁸.
    pub fn with_range(min_nx: usize) -> Self {
        Self {
            min_nx,
            min_dynamic_range: Some(256.0),
        }
    }

    pub fn accepts(&self, image: &CoverImage) -> bool {
        let n_x = match float_plane::capacity(image) {
            Ok(cap) => cap.n_x(),
            Err(_) => return false,
        };
        if n_x < self.min_nx {
            return false;
        }
        match self.min_dynamic_range {
            None => true,
            Some(min) => image.dynamic_range().is_some_and(|dr| dr > min),
        }
    }
}

pub fn filter_by_capacity(images: Vec<CoverImage>, filter: &CapacityFilter) -> Vec<CoverImage> {
    images.into_iter().filter(|im| filter.accepts(im)).collect()
}

/// Reads a batch manifest: one path per line, blank lines and `#` comments
/// skipped. Relative paths resolve against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let entry = line.trim();
        if entry.is_empty() || entry.starts_with('#') {
            continue;
        }
        let p = PathBuf::from(entry);
        out.push(if p.is_absolute() { p } else { base.join(p) });
    }
    Ok(out)
}

//! IEEE-754 single-precision decomposition and the mantissa bit planes used
//! as embedding channels.
//!
//! Mantissa bits are indexed `b = 1` (most significant, weight 2⁻¹) through
//! `b = 23` (least significant, weight 2⁻²³). The first seven mantissa bits
//! are never modified, so every embeddable bit lies in `8..=23`.

use crate::error::{Error, Result};
use crate::image_io::{CoverImage, StegoImage};

pub const MANTISSA_BITS: u32 = 23;
pub const EXPONENT_BIAS: i32 = 127;
/// Leading mantissa bits that are never touched.
pub const PROTECTED_BITS: u8 = 7;
/// Maximum embeddable bits per pixel (`23 - 7`).
pub const MAX_CAPACITY: u8 = 16;

const MANTISSA_MASK: u32 = (1 << MANTISSA_BITS) - 1;

/// Sign, biased exponent and raw mantissa field of one `f32`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FloatFields {
    pub sign: u8,
    pub exponent: u8,
    pub mantissa: u32,
}

impl FloatFields {
    /// Splits a finite `f32` into its fields.
    pub fn decompose(x: f32) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::MalformedCover(format!("non-finite value {x}")));
        }
        Ok(Self::from_bits(x.to_bits()))
    }

    pub fn from_bits(bits: u32) -> Self {
        Self {
            sign: (bits >> 31) as u8,
            exponent: ((bits >> MANTISSA_BITS) & 0xff) as u8,
            mantissa: bits & MANTISSA_MASK,
        }
    }

    pub fn to_bits(self) -> u32 {
        (u32::from(self.sign) << 31) | (u32::from(self.exponent) << MANTISSA_BITS) | self.mantissa
    }

    pub fn recompose(self) -> f32 {
        f32::from_bits(self.to_bits())
    }

    /// Mantissa as a fraction in `[0, 1)`.
    pub fn fraction(self) -> f64 {
        f64::from(self.mantissa) / f64::from(1u32 << MANTISSA_BITS)
    }

    /// Mantissa bit `b` (1 = MSB .. 23 = LSB).
    pub fn mantissa_bit(self, b: u8) -> u8 {
        debug_assert!((1..=23).contains(&b));
        ((self.mantissa >> (MANTISSA_BITS - u32::from(b))) & 1) as u8
    }

    pub fn is_normal(self) -> bool {
        self.exponent != 0 && self.exponent != 0xff
    }

    /// Unbiased exponent `E - 127`.
    pub fn unbiased_exponent(self) -> i32 {
        i32::from(self.exponent) - EXPONENT_BIAS
    }

    /// Embeddable bit count `N` for this value.
    ///
    /// `16` when the value is at least one, `E - 111` (floored at zero) below
    /// one, and zero for zeros and denormals.
    pub fn capacity(self) -> u8 {
        if self.exponent == 0 {
            0
        } else if i32::from(self.exponent) >= EXPONENT_BIAS {
            MAX_CAPACITY
        } else {
            // E <= 126 here, so E - 111 <= 15.
            (i32::from(self.exponent) - 111).max(0) as u8
        }
    }
}

/// Mask that flips mantissa bit `b` in a raw `f32` bit pattern.
#[inline]
pub fn mantissa_mask(b: u8) -> u32 {
    1u32 << (MANTISSA_BITS - u32::from(b))
}

/// Mantissa bit index carried by plane `k` (1-based) of a pixel with
/// capacity `n`: `b = 7 + n - (k - 1)`.
#[inline]
pub fn plane_bit_index(n: u8, k: usize) -> Option<u8> {
    if k == 0 || k > usize::from(n) {
        return None;
    }
    Some(PROTECTED_BITS + n - (k as u8 - 1))
}

/// Plane index `k` that carries mantissa bit `b` for a pixel with capacity
/// `n`, if that bit is inside the embedding domain.
#[inline]
pub fn bit_plane_index(n: u8, b: u8) -> Option<usize> {
    if b <= PROTECTED_BITS || b > PROTECTED_BITS + n {
        return None;
    }
    Some(usize::from(PROTECTED_BITS + n - b) + 1)
}

/// Per-pixel embeddable bit counts `N` and their image-wide minimum `n_x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapacityMap {
    width: usize,
    height: usize,
    n: Vec<u8>,
    n_x: u8,
}

impl CapacityMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major per-pixel capacities.
    pub fn values(&self) -> &[u8] {
        &self.n
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.n[row * self.width + col]
    }

    pub fn n_x(&self) -> usize {
        usize::from(self.n_x)
    }

    /// Number of pixels per capacity value `0..=16`.
    pub fn histogram(&self) -> [usize; 17] {
        let mut h = [0usize; 17];
        for &v in &self.n {
            h[usize::from(v)] += 1;
        }
        h
    }
}

/// Computes `N` for every pixel and `n_x = min N`.
pub fn capacity(image: &CoverImage) -> Result<CapacityMap> {
    let mut n = Vec::with_capacity(image.len());
    for (index, &x) in image.pixels().iter().enumerate() {
        let fields = FloatFields::decompose(x)?;
        if fields.sign != 0 {
            return Err(Error::NegativePixel { index, value: x });
        }
        n.push(fields.capacity());
    }
    let n_x = n.iter().copied().min().unwrap_or(0);
    Ok(CapacityMap {
        width: image.width(),
        height: image.height(),
        n,
        n_x,
    })
}

/// The `K` lowest effective cover planes of an image.
///
/// Plane `k = 1` holds each pixel's effective least significant bit, and
/// plane `k` holds mantissa bit `7 + N - (k - 1)`. Bits are row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneStack {
    width: usize,
    height: usize,
    capacity: Vec<u8>,
    planes: Vec<Vec<u8>>,
}

impl PlaneStack {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_planes(&self) -> usize {
        self.planes.len()
    }

    /// Bits of plane `k` (1-based), row-major, each 0 or 1.
    pub fn plane(&self, k: usize) -> &[u8] {
        &self.planes[k - 1]
    }

    pub fn plane_mut(&mut self, k: usize) -> &mut [u8] {
        &mut self.planes[k - 1]
    }

    /// Replaces plane `k` with `bits`.
    pub fn set_plane(&mut self, k: usize, bits: Vec<u8>) -> Result<()> {
        if k == 0 || k > self.planes.len() {
            return Err(Error::CapacityExceeded {
                requested: k,
                n_x: self.planes.len(),
            });
        }
        if bits.len() != self.width * self.height {
            return Err(Error::ShapeMismatch {
                expected: (self.height, self.width),
                found: (bits.len(), 1),
            });
        }
        self.planes[k - 1] = bits;
        Ok(())
    }

    /// Mantissa bit index behind plane `k` of pixel `index`.
    pub fn bit_position(&self, index: usize, k: usize) -> u8 {
        plane_bit_index(self.capacity[index], k).expect("plane within pixel capacity")
    }
}

/// Extracts planes `1..=k_planes`.
pub fn extract_planes(
    image: &CoverImage,
    capacity: &CapacityMap,
    k_planes: usize,
) -> Result<PlaneStack> {
    check_shape(image, capacity.width, capacity.height)?;
    if k_planes == 0 || k_planes > capacity.n_x() {
        return Err(Error::CapacityExceeded {
            requested: k_planes,
            n_x: capacity.n_x(),
        });
    }
    let mut planes = vec![Vec::with_capacity(image.len()); k_planes];
    for (&x, &n) in image.pixels().iter().zip(&capacity.n) {
        let bits = x.to_bits();
        for (k, plane) in planes.iter_mut().enumerate() {
            let b = PROTECTED_BITS + n - k as u8;
            plane.push(u8::from(bits & mantissa_mask(b) != 0));
        }
    }
    Ok(PlaneStack {
        width: image.width(),
        height: image.height(),
        capacity: capacity.n.clone(),
        planes,
    })
}

/// Writes the planes of `stack` back into a copy of `image`.
pub fn write_planes(image: &CoverImage, stack: &PlaneStack) -> Result<StegoImage> {
    check_shape(image, stack.width, stack.height)?;
    let pixels = image
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let n = stack.capacity[i];
            let mut bits = x.to_bits();
            for (k, plane) in stack.planes.iter().enumerate() {
                let mask = mantissa_mask(PROTECTED_BITS + n - k as u8);
                if plane[i] != 0 {
                    bits |= mask;
                } else {
                    bits &= !mask;
                }
            }
            f32::from_bits(bits)
        })
        .collect();
    CoverImage::new(image.width(), image.height(), pixels)
}

fn check_shape(image: &CoverImage, width: usize, height: usize) -> Result<()> {
    if image.width() != width || image.height() != height {
        return Err(Error::ShapeMismatch {
            expected: (height, width),
            found: (image.height(), image.width()),
        });
    }
    Ok(())
}

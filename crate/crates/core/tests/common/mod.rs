#![allow(dead_code)]

use hdrsteg::coder::{block_ranges, stc_decode, StcCode};
use hdrsteg::CoverImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// HDR-like luminance tile: a smooth log-domain field spanning about 12
/// stops, a few bright blobs and multiplicative texture. Every pixel is at
/// least 2⁻⁶ (so `n_x >= 10`) and the max/min ratio is well above 2⁸.
pub fn hdr_tile(size: usize, seed: u64) -> CoverImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.5..4.0),
                rng.random_range(0.5..4.0),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.5..1.0),
            )
        })
        .collect();
    let blobs: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.random(), rng.random(), rng.random_range(0.02..0.08)))
        .collect();
    let norm: f64 = waves.iter().map(|w| w.3).sum();
    let mut pixels = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let (y, x) = (r as f64 / size as f64, c as f64 / size as f64);
            let mut s = 0.0;
            for &(fy, fx, ph, amp) in &waves {
                s += amp * (std::f64::consts::TAU * (fy * y + fx * x) + ph).sin();
            }
            // s / norm in [-1, 1] -> log2 level in [-5.5, 4.5]
            let mut level = -0.5 + 5.0 * s / norm;
            for &(by, bx, rad) in &blobs {
                let d2 = (y - by).powi(2) + (x - bx).powi(2);
                level += 2.0 * (-d2 / (2.0 * rad * rad)).exp();
            }
            let texture = 1.0 + 0.25 * rng.random::<f64>();
            pixels.push((level.exp2() * texture) as f32);
        }
    }
    CoverImage::new(size, size, pixels).unwrap()
}

/// Dense parity-check matrix of a code: column `j` as a bit mask over the
/// `m` rows, obtained by decoding unit vectors.
pub fn parity_columns(n: usize, m: usize, code: &StcCode) -> Vec<u32> {
    assert!(m <= 32);
    (0..n)
        .map(|j| {
            let mut e = vec![0u8; n];
            e[j] = 1;
            stc_decode(&e, m, code)
                .unwrap()
                .iter()
                .enumerate()
                .fold(0u32, |acc, (i, &b)| acc | (u32::from(b) << i))
        })
        .collect()
}

/// Same matrix built directly from the block-diagonal construction, as an
/// independent check on the decoder.
pub fn constructed_columns(n: usize, m: usize, code: &StcCode) -> Vec<u32> {
    let h = code.height() as usize;
    let sub = code.columns(n.div_ceil(m));
    let mut cols = vec![0u32; n];
    for (i, block) in block_ranges(n, m).into_iter().enumerate() {
        for (local, j) in block.enumerate() {
            for t in 0..h {
                if i + t < m && (sub[local] >> t) & 1 == 1 {
                    cols[j] |= 1 << (i + t);
                }
            }
        }
    }
    cols
}

/// Minimum of `Σ costs[j]` over positions where `y` differs from `cover`,
/// taken over every `y` with `H·y = message`. Enumerates the whole coset
/// (particular solution plus the null space, Gray-code order). `None` when
/// every coset member flips a wet position. Needs `n <= 32`.
pub fn coset_minimum(cols: &[u32], m: usize, cover: &[u8], costs: &[f64], message: &[u8]) -> Option<f64> {
    let n = cols.len();
    assert!(n <= 32 && m <= 32);
    // rows as masks over variables, with the message bit as right-hand side
    let mut rows: Vec<(u32, u8)> = (0..m)
        .map(|i| {
            let vars = (0..n).fold(0u32, |acc, j| acc | (((cols[j] >> i) & 1) << j));
            (vars, message[i] & 1)
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for var in 0..n {
        let Some(p) = (r..m).find(|&i| (rows[i].0 >> var) & 1 == 1) else {
            continue;
        };
        rows.swap(r, p);
        for i in 0..m {
            if i != r && (rows[i].0 >> var) & 1 == 1 {
                rows[i].0 ^= rows[r].0;
                rows[i].1 ^= rows[r].1;
            }
        }
        pivots.push(var);
        r += 1;
    }
    if rows[r..].iter().any(|&(_, rhs)| rhs == 1) {
        return None;
    }
    let mut y0 = 0u32;
    for (i, &var) in pivots.iter().enumerate() {
        y0 |= u32::from(rows[i].1) << var;
    }
    let free: Vec<usize> = (0..n).filter(|v| !pivots.contains(v)).collect();
    let basis: Vec<u32> = free
        .iter()
        .map(|&f| {
            let mut v = 1u32 << f;
            for (i, &var) in pivots.iter().enumerate() {
                if (rows[i].0 >> f) & 1 == 1 {
                    v |= 1 << var;
                }
            }
            v
        })
        .collect();

    let x = cover
        .iter()
        .enumerate()
        .fold(0u32, |acc, (j, &b)| acc | (u32::from(b & 1) << j));
    let distortion = |y: u32| {
        let mut diff = y ^ x;
        let mut d = 0.0;
        while diff != 0 {
            d += costs[diff.trailing_zeros() as usize];
            diff &= diff - 1;
        }
        d
    };
    let mut y = y0;
    let mut best = distortion(y);
    for g in 1u64..(1u64 << basis.len()) {
        y ^= basis[g.trailing_zeros() as usize];
        best = best.min(distortion(y));
    }
    best.is_finite().then_some(best)
}

/// `Σ costs` over changed positions.
pub fn flip_cost(cover: &[u8], stego: &[u8], costs: &[f64]) -> f64 {
    cover
        .iter()
        .zip(stego)
        .zip(costs)
        .filter(|((a, b), _)| a != b)
        .map(|(_, &c)| c)
        .sum()
}

/// Random dyadic costs, so every partial sum is exact in `f64`; about one
/// position in ten is wet when `wet` is set.
pub fn dyadic_costs(rng: &mut impl Rng, n: usize, wet: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if wet && rng.random_range(0..10) == 0 {
                f64::INFINITY
            } else {
                f64::from(rng.random_range(1..=1024u32)) / 256.0
            }
        })
        .collect()
}

pub fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// Upper `1 - alpha` quantile of χ² with `df` degrees of freedom
/// (Wilson-Hilferty), given the matching standard normal quantile `z`.
pub fn chi_square_critical(df: f64, z: f64) -> f64 {
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

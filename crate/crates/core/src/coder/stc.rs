//! Binary syndrome-trellis codes.
//!
//! The parity-check matrix `H` (`m × n`) is built from a random `h × w`
//! submatrix `Ĥ`: block `i` of consecutive columns carries the first
//! `w_i` columns of `Ĥ`, placed at rows `i..i + h` (rows past `m` are
//! dropped). Block widths are `⌊n/m⌋` or `⌈n/m⌉` so that they add up to `n`.
//! Embedding finds the stego vector with `H·y = message` that minimizes the
//! summed cost of flipped positions, by a Viterbi pass over `2^h` partial
//! syndrome states.

use std::ops::Range;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported constraint height. The backtracking table holds
/// `n · 2^h` bits.
pub const MAX_HEIGHT: u32 = 16;
pub const DEFAULT_HEIGHT: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StcCode {
    height: u32,
    seed: u64,
}

impl StcCode {
    pub fn new(height: u32, seed: u64) -> Result<Self> {
        if height == 0 || height > MAX_HEIGHT {
            return Err(Error::InvalidCode(format!(
                "constraint height {height} outside 1..={MAX_HEIGHT}"
            )));
        }
        Ok(Self { height, seed })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The first `width` columns of `Ĥ` as `h`-bit patterns (bit `t` is
    /// row `t`). Row 0 and row `h - 1` are set in every column, and columns
    /// are pairwise distinct until all `2^(h-2)` such patterns are used (a
    /// repeated column wastes a degree of freedom of the block). The
    /// sequence is a prefix-stable function of the seed.
    pub fn columns(&self, width: usize) -> Vec<u32> {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        let mask = self.state_mask();
        let edges = 1 | (1u32 << (self.height - 1));
        let patterns = 1usize << self.height.saturating_sub(2);
        let mut out: Vec<u32> = Vec::with_capacity(width);
        while out.len() < width {
            let col = (rng.next_u32() & mask) | edges;
            let fresh = out.len() % patterns;
            // distinct within the current run of `patterns` columns
            if !out[out.len() - fresh..].contains(&col) {
                out.push(col);
            }
        }
        out
    }

    fn state_mask(&self) -> u32 {
        if self.height == 32 {
            u32::MAX
        } else {
            (1u32 << self.height) - 1
        }
    }
}

/// Column range of each of the `m` blocks for a length-`n` cover.
pub fn block_ranges(n: usize, m: usize) -> Vec<Range<usize>> {
    (0..m).map(|i| i * n / m..(i + 1) * n / m).collect()
}

fn check_lengths(n: usize, m: usize) -> Result<()> {
    if m > n {
        return Err(Error::StcLength(format!(
            "message of {m} bits does not fit {n} cover bits"
        )));
    }
    Ok(())
}

/// Submatrix patterns with rows at or beyond `m` cleared, for block `i`.
fn row_mask(code: &StcCode, m: usize, i: usize) -> u32 {
    let left = m - i;
    if left < code.height as usize {
        (1u32 << left) - 1
    } else {
        code.state_mask()
    }
}

/// One trellis column: `next[s] = min(cur[s] + c0, cur[s ^ p] + c1)`,
/// recording in `out` (one bit per state) which branch, stego bit 1 or 0,
/// won. Ties go to the lower predecessor index; `s ^ p < s` exactly when
/// `s` has the highest set bit of `p`.
pub(crate) fn column_f64(
    cur: &[f64],
    next: &mut [f64],
    out: &mut [u8],
    p: usize,
    c0: f64,
    c1: f64,
    simd: bool,
) {
    let top = (usize::BITS - 1 - p.leading_zeros()) as usize;
    #[cfg(target_arch = "x86_64")]
    if simd && cur.len() >= 8 && top >= 2 {
        // SAFETY: `simd` is only set after AVX2 was detected at runtime.
        unsafe { avx2::step_f64(cur, next, out, p, top, c0, c1) };
        return;
    }
    let _ = simd;
    portable_step(cur, next, out, p, top, c0, c1);
}

/// Single-precision variant of [`column_f64`], eight states per vector.
pub(crate) fn column_f32(
    cur: &[f32],
    next: &mut [f32],
    out: &mut [u8],
    p: usize,
    c0: f32,
    c1: f32,
    simd: bool,
) {
    let top = (usize::BITS - 1 - p.leading_zeros()) as usize;
    #[cfg(target_arch = "x86_64")]
    if simd && cur.len() >= 8 && top >= 3 {
        // SAFETY: as above.
        unsafe { avx2::step_f32(cur, next, out, p, top, c0, c1) };
        return;
    }
    let _ = simd;
    portable_step(cur, next, out, p, top, c0, c1);
}

fn portable_step<F: Scalar>(
    cur: &[F],
    next: &mut [F],
    out: &mut [u8],
    p: usize,
    top: usize,
    c0: F,
    c1: F,
) {
    if cur.len() < 8 || top < 3 {
        scalar_step(cur, next, out, p, top, c0, c1);
        return;
    }
    // The low three bits of p become a fixed lane shuffle.
    match p & 7 {
        0 => chunked_step::<F, 0>(cur, next, out, p, top, c0, c1),
        1 => chunked_step::<F, 1>(cur, next, out, p, top, c0, c1),
        2 => chunked_step::<F, 2>(cur, next, out, p, top, c0, c1),
        3 => chunked_step::<F, 3>(cur, next, out, p, top, c0, c1),
        4 => chunked_step::<F, 4>(cur, next, out, p, top, c0, c1),
        5 => chunked_step::<F, 5>(cur, next, out, p, top, c0, c1),
        6 => chunked_step::<F, 6>(cur, next, out, p, top, c0, c1),
        _ => chunked_step::<F, 7>(cur, next, out, p, top, c0, c1),
    }
}

fn scalar_step<F: Scalar>(
    cur: &[F],
    next: &mut [F],
    out: &mut [u8],
    p: usize,
    top: usize,
    c0: F,
    c1: F,
) {
    out.iter_mut().for_each(|b| *b = 0);
    for s in 0..cur.len() {
        let a = cur[s] + c0;
        let b = cur[s ^ p] + c1;
        let take1 = if (s >> top) & 1 == 1 { b <= a } else { b < a };
        next[s] = if take1 { b } else { a };
        out[s / 8] |= u8::from(take1) << (s % 8);
    }
}

#[inline(always)]
fn chunked_step<F: Scalar, const LO: usize>(
    cur: &[F],
    next: &mut [F],
    out: &mut [u8],
    p: usize,
    top: usize,
    c0: F,
    c1: F,
) {
    let hi = p >> 3;
    for (c, (dst, byte)) in next.chunks_exact_mut(8).zip(out.iter_mut()).enumerate() {
        let own: &[F; 8] = cur[c * 8..c * 8 + 8].try_into().unwrap();
        let src: &[F; 8] = cur[(c ^ hi) * 8..(c ^ hi) * 8 + 8].try_into().unwrap();
        let dst: &mut [F; 8] = dst.try_into().unwrap();
        let tie1 = (c >> (top - 3)) & 1 == 1;
        let mut bits = 0u8;
        for l in 0..8 {
            let a = own[l] + c0;
            let b = src[l ^ LO] + c1;
            let take1 = (b < a) | (tie1 & (b == a));
            dst[l] = if take1 { b } else { a };
            bits |= u8::from(take1) << l;
        }
        *byte = bits;
    }
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use std::arch::x86_64::*;

    pub fn available() -> bool {
        is_x86_feature_detected!("avx2")
    }

    /// Four states per vector. Needs at least eight states and `top >= 2`.
    #[target_feature(enable = "avx2")]
    pub unsafe fn step_f64(
        cur: &[f64],
        next: &mut [f64],
        out: &mut [u8],
        p: usize,
        top: usize,
        c0: f64,
        c1: f64,
    ) {
        // lane l reads lane l ^ (p & 3) of the partner vector
        match p & 3 {
            0 => lanes_f64::<0xE4>(cur, next, out, p >> 2, top, c0, c1),
            1 => lanes_f64::<0xB1>(cur, next, out, p >> 2, top, c0, c1),
            2 => lanes_f64::<0x4E>(cur, next, out, p >> 2, top, c0, c1),
            _ => lanes_f64::<0x1B>(cur, next, out, p >> 2, top, c0, c1),
        }
    }

    #[target_feature(enable = "avx2")]
    unsafe fn lanes_f64<const IMM: i32>(
        cur: &[f64],
        next: &mut [f64],
        out: &mut [u8],
        hi: usize,
        top: usize,
        c0: f64,
        c1: f64,
    ) {
        assert!(cur.len() == next.len() && out.len() * 8 == cur.len());
        let vc0 = _mm256_set1_pd(c0);
        let vc1 = _mm256_set1_pd(c1);
        let never = _mm256_setzero_pd();
        let always = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
        let src_ptr = cur.as_ptr();
        let dst_ptr = next.as_mut_ptr();
        for (w, byte) in out.iter_mut().enumerate() {
            let mut bits = 0;
            for half in 0..2 {
                let c = 2 * w + half;
                // c ^ hi stays below len / 4 because p < len; wrapping
                // pointer arithmetic keeps debug builds free of per-load
                // precondition checks.
                let own = _mm256_loadu_pd(src_ptr.wrapping_add(4 * c));
                let partner = _mm256_loadu_pd(src_ptr.wrapping_add(4 * (c ^ hi)));
                let a = _mm256_add_pd(own, vc0);
                let b = _mm256_add_pd(_mm256_permute4x64_pd::<IMM>(partner), vc1);
                let tie = if (c >> (top - 2)) & 1 == 1 { always } else { never };
                let take1 = _mm256_or_pd(
                    _mm256_cmp_pd::<_CMP_LT_OQ>(b, a),
                    _mm256_and_pd(_mm256_cmp_pd::<_CMP_EQ_OQ>(b, a), tie),
                );
                _mm256_storeu_pd(dst_ptr.wrapping_add(4 * c), _mm256_blendv_pd(a, b, take1));
                bits |= _mm256_movemask_pd(take1) << (4 * half);
            }
            *byte = bits as u8;
        }
    }

    /// Eight states per vector, one output byte each. Needs at least eight
    /// states and `top >= 3`.
    #[target_feature(enable = "avx2")]
    pub unsafe fn step_f32(
        cur: &[f32],
        next: &mut [f32],
        out: &mut [u8],
        p: usize,
        top: usize,
        c0: f32,
        c1: f32,
    ) {
        assert!(cur.len() == next.len() && out.len() * 8 == cur.len());
        let lo = (p & 7) as i32;
        let shuffle = _mm256_xor_si256(
            _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7),
            _mm256_set1_epi32(lo),
        );
        let hi = p >> 3;
        let vc0 = _mm256_set1_ps(c0);
        let vc1 = _mm256_set1_ps(c1);
        let never = _mm256_setzero_ps();
        let always = _mm256_castsi256_ps(_mm256_set1_epi32(-1));
        let src_ptr = cur.as_ptr();
        let dst_ptr = next.as_mut_ptr();
        for (c, byte) in out.iter_mut().enumerate() {
            let own = _mm256_loadu_ps(src_ptr.wrapping_add(8 * c));
            let partner = _mm256_loadu_ps(src_ptr.wrapping_add(8 * (c ^ hi)));
            let a = _mm256_add_ps(own, vc0);
            let b = _mm256_add_ps(_mm256_permutevar8x32_ps(partner, shuffle), vc1);
            let tie = if (c >> (top - 3)) & 1 == 1 { always } else { never };
            let take1 = _mm256_or_ps(
                _mm256_cmp_ps::<_CMP_LT_OQ>(b, a),
                _mm256_and_ps(_mm256_cmp_ps::<_CMP_EQ_OQ>(b, a), tie),
            );
            _mm256_storeu_ps(dst_ptr.wrapping_add(8 * c), _mm256_blendv_ps(a, b, take1));
            *byte = _mm256_movemask_ps(take1) as u8;
        }
    }
}

fn simd_available() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        avx2::available()
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// Embeds `message` into `cover` at minimum total cost; returns the stego
/// bits. Wet positions (infinite cost) are never flipped.
pub fn stc_encode<F: Scalar>(
    cover: &[u8],
    costs: &[F],
    message: &[u8],
    code: &StcCode,
) -> Result<Vec<u8>> {
    encode_with(cover, costs, message, code, simd_available())
}

fn encode_with<F: Scalar>(
    cover: &[u8],
    costs: &[F],
    message: &[u8],
    code: &StcCode,
    simd: bool,
) -> Result<Vec<u8>> {
    let n = cover.len();
    let m = message.len();
    if costs.len() != n {
        return Err(Error::StcLength(format!(
            "{} costs for {n} cover bits",
            costs.len()
        )));
    }
    check_lengths(n, m)?;
    if m == 0 {
        return Ok(cover.to_vec());
    }

    let blocks = block_ranges(n, m);
    let width = n.div_ceil(m);
    let columns = code.columns(width);
    let states = 1usize << code.height;
    let words = states.div_ceil(8);

    // Path metrics use the cost precision and are shifted after every
    // block so that the best state sits at zero.
    let inf = F::infinity();
    let mut cur = vec![inf; states];
    let mut next = vec![inf; states];
    cur[0] = F::zero();
    // bit s of column j: stego bit chosen on the best path into state s
    let mut path = vec![0u8; n * words];

    for (i, block) in blocks.iter().enumerate() {
        let mask = row_mask(code, m, i);
        for (local, j) in block.clone().enumerate() {
            let p = (columns[local] & mask) as usize;
            let x = cover[j] & 1;
            let rho = costs[j];
            let out = &mut path[j * words..(j + 1) * words];
            if rho.is_infinite() {
                // only y = x is allowed
                for s in 0..states {
                    next[s] = if x == 0 { cur[s] } else { cur[s ^ p] };
                }
                if x == 1 {
                    out.iter_mut().for_each(|w| *w = u8::MAX);
                }
            } else {
                let (c0, c1) = if x == 0 { (F::zero(), rho) } else { (rho, F::zero()) };
                F::trellis_column(&cur, &mut next, out, p, c0, c1, simd);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        // row i is complete: keep states whose low bit equals the message
        // bit, then shift the next row in.
        let bit = usize::from(message[i] & 1);
        for t in 0..states / 2 {
            next[t] = cur[(t << 1) | bit];
        }
        for v in &mut next[states / 2..] {
            *v = inf;
        }
        let floor = next[..states / 2].iter().copied().fold(inf, F::min);
        if floor.is_finite() && floor > F::zero() {
            next[..states / 2].iter_mut().for_each(|v| *v = *v - floor);
        }
        std::mem::swap(&mut cur, &mut next);
    }

    if cur[0].is_infinite() {
        return Err(Error::StcSaturated);
    }

    let mut stego = vec![0u8; n];
    let mut state = 0usize;
    for (i, block) in blocks.iter().enumerate().rev() {
        state = (state << 1) | usize::from(message[i] & 1);
        let mask = row_mask(code, m, i);
        for (local, j) in block.clone().enumerate().rev() {
            let y = (path[j * words + state / 8] >> (state % 8)) & 1;
            stego[j] = y as u8;
            if y == 1 {
                state ^= (columns[local] & mask) as usize;
            }
        }
    }
    debug_assert_eq!(state, 0);
    Ok(stego)
}

/// Computes the `m`-bit syndrome `H·stego`.
pub fn stc_decode(stego: &[u8], message_len: usize, code: &StcCode) -> Result<Vec<u8>> {
    let n = stego.len();
    let m = message_len;
    check_lengths(n, m)?;
    if m == 0 {
        return Ok(Vec::new());
    }
    let columns = code.columns(n.div_ceil(m));
    let mut out = Vec::with_capacity(m);
    let mut state = 0u32;
    for (i, block) in block_ranges(n, m).into_iter().enumerate() {
        let mask = row_mask(code, m, i);
        for (local, j) in block.enumerate() {
            if stego[j] & 1 == 1 {
                state ^= columns[local] & mask;
            }
        }
        out.push((state & 1) as u8);
        state >>= 1;
    }
    Ok(out)
}

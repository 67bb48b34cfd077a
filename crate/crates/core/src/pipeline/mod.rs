//! End-to-end embedding and extraction.
//!
//! Sender side, in order: capacity and `n_x`, per-plane quotas, costs with
//! the exponent correction, one STC pass per plane over a keyed pixel
//! permutation, and writeback of the planes. The receiver recomputes the
//! capacity from the stego itself; exponents never change, so it sees the
//! same plane layout as the sender.

mod key;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

pub use key::{StegoKey, KEY_VERSION};

use crate::coder::{self, solve_lambda, stc_decode, stc_encode, EmbeddingPlan};
use crate::cost_model::{self, CostMap, CostModel};
use crate::error::{Error, Result};
use crate::float_plane::{self, CapacityMap};
use crate::image_io::{CoverImage, StegoImage};
use key::{mix, STREAM_PADDING, STREAM_PERMUTATION, STREAM_SIMULATION};

/// Width of the length header prepended when framing is on.
pub const LENGTH_HEADER_BITS: usize = 32;

/// Splits `m` bits over `k` planes: the first `m mod k` planes take
/// `⌈m/k⌉`, the rest `⌊m/k⌋`.
pub fn disperse(m: usize, k: usize) -> Vec<usize> {
    let (q, r) = (m / k, m % k);
    (0..k).map(|i| q + usize::from(i < r)).collect()
}

/// Total payload bits a key moves through an image of `pixels` pixels:
/// `⌊K · relative_payload · pixels⌋`.
pub fn total_bits(pixels: usize, key: &StegoKey) -> usize {
    (key.planes as f64 * key.relative_payload * pixels as f64).floor() as usize
}

/// Raw bytes to bits, most significant bit first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Bits back to bytes, most significant bit first; a partial final byte is
/// zero-filled.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i)))
        })
        .collect()
}

/// Corrected costs `ρ*` for a cover.
pub fn embedding_costs(cover: &CoverImage, model: CostModel) -> Result<CostMap<f64>> {
    cost_model::correct(&cost_model::cost::<f64>(cover, model), cover)
}

fn checked_capacity(image: &CoverImage, key: &StegoKey) -> Result<CapacityMap> {
    key.validate()?;
    let cap = float_plane::capacity(image)?;
    if cap.n_x() == 0 {
        return Err(Error::UnsuitableCover);
    }
    if key.planes > cap.n_x() {
        return Err(Error::CapacityExceeded {
            requested: key.planes,
            n_x: cap.n_x(),
        });
    }
    Ok(cap)
}

/// Keyed pixel order for plane `k`: position `i` of the STC path visits
/// pixel `order[i]`.
fn plane_order(pixels: usize, key: &StegoKey, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pixels).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(mix(key.perm_seed, STREAM_PERMUTATION + k as u64));
    order.shuffle(&mut rng);
    order
}

fn frame(message: &[u8], total: usize, key: &StegoKey) -> Result<Vec<u8>> {
    let header = if key.framing { LENGTH_HEADER_BITS } else { 0 };
    let needed = header + message.len();
    if needed > total || (key.framing && message.len() > u32::MAX as usize) {
        return Err(Error::PayloadOverflow {
            bits: needed,
            capacity: total,
        });
    }
    let mut out = Vec::with_capacity(total);
    if key.framing {
        let len = message.len() as u32;
        out.extend((0..32).rev().map(|i| ((len >> i) & 1) as u8));
    }
    out.extend(message.iter().map(|b| b & 1));
    let mut rng = ChaCha12Rng::seed_from_u64(mix(key.perm_seed, STREAM_PADDING));
    while out.len() < total {
        out.push(rng.random_range(0..2u8));
    }
    Ok(out)
}

fn deframe(mut bits: Vec<u8>, key: &StegoKey) -> Vec<u8> {
    if !key.framing {
        return bits;
    }
    if bits.len() < LENGTH_HEADER_BITS {
        return Vec::new();
    }
    let len = bits[..LENGTH_HEADER_BITS]
        .iter()
        .fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
    if len > bits.len() - LENGTH_HEADER_BITS {
        // Not something this key embedded.
        return Vec::new();
    }
    bits.truncate(LENGTH_HEADER_BITS + len);
    bits.drain(..LENGTH_HEADER_BITS);
    bits
}

/// Hides `message` (bits, 0 or 1) in `cover`.
///
/// With framing on, the message is prefixed with its 32-bit length and
/// padded with keyed pseudo-random bits up to [`total_bits`]. An empty
/// message leaves the cover untouched; extracting from an untouched cover
/// yields an empty message unless its syndromes happen to decode to a
/// valid header.
pub fn embed(cover: &CoverImage, message: &[u8], key: &StegoKey) -> Result<StegoImage> {
    let cap = checked_capacity(cover, key)?;
    if message.is_empty() {
        return Ok(cover.clone());
    }
    let n = cover.len();
    let total = total_bits(n, key);
    let payload = frame(message, total, key)?;
    let costs = embedding_costs(cover, key.cost_model)?;
    let code = key.stc_code()?;
    let mut stack = float_plane::extract_planes(cover, &cap, key.planes)?;

    let quotas = disperse(total, key.planes);
    let mut offsets = Vec::with_capacity(key.planes);
    let mut acc = 0;
    for &q in &quotas {
        offsets.push(acc);
        acc += q;
    }

    let planes: Vec<Result<Vec<u8>>> = (1..=key.planes)
        .into_par_iter()
        .map(|k| {
            let order = plane_order(n, key, k);
            let bits = stack.plane(k);
            let path_bits: Vec<u8> = order.iter().map(|&p| bits[p]).collect();
            // The trellis runs in single precision (twice the states per
            // vector); metrics are renormalized per block, so rounding can
            // only reorder paths whose costs nearly tie.
            let path_costs: Vec<f32> = order.iter().map(|&p| costs.values()[p] as f32).collect();
            let msg = &payload[offsets[k - 1]..offsets[k - 1] + quotas[k - 1]];
            let stego = stc_encode(&path_bits, &path_costs, msg, &code)?;
            let mut plane = vec![0u8; n];
            for (&p, &y) in order.iter().zip(&stego) {
                plane[p] = y;
            }
            Ok(plane)
        })
        .collect();
    for (k, plane) in planes.into_iter().enumerate() {
        stack.set_plane(k + 1, plane?)?;
    }
    float_plane::write_planes(cover, &stack)
}

/// Recovers the message bits hidden by [`embed`] with the same key.
pub fn extract(stego: &StegoImage, key: &StegoKey) -> Result<Vec<u8>> {
    key.validate()?;
    let cap = float_plane::capacity(stego)?;
    if key.planes > cap.n_x() {
        return Err(Error::KeyMismatch {
            planes: key.planes,
            n_x: cap.n_x(),
        });
    }
    let n = stego.len();
    let total = total_bits(n, key);
    let code = key.stc_code()?;
    let stack = float_plane::extract_planes(stego, &cap, key.planes)?;
    let quotas = disperse(total, key.planes);
    let chunks: Vec<Result<Vec<u8>>> = (1..=key.planes)
        .into_par_iter()
        .map(|k| {
            let bits = stack.plane(k);
            let path: Vec<u8> = plane_order(n, key, k).iter().map(|&p| bits[p]).collect();
            stc_decode(&path, quotas[k - 1], &code)
        })
        .collect();
    let mut payload = Vec::with_capacity(total);
    for chunk in chunks {
        payload.extend(chunk?);
    }
    Ok(deframe(payload, key))
}

/// Result of an optimal-embedding simulation.
#[derive(Clone, Debug)]
pub struct SimulatedEmbedding {
    pub stego: StegoImage,
    /// Row-major flip mask per plane, plane 1 first.
    pub masks: Vec<Vec<bool>>,
    /// Plan used for each plane.
    pub plans: Vec<EmbeddingPlan<f64>>,
    /// Corrected costs the plans were solved on.
    pub costs: CostMap<f64>,
}

impl SimulatedEmbedding {
    /// Pixels changed in any plane.
    pub fn change_map(&self) -> Vec<bool> {
        let n = self.stego.len();
        (0..n)
            .map(|i| self.masks.iter().any(|mask| mask[i]))
            .collect()
    }
}

/// Embeds `m` bits' worth of changes with independent Gibbs flips instead
/// of STC. Plane `k` carries its dispersed share of `m`.
pub fn simulate_embed(
    cover: &CoverImage,
    m: usize,
    key: &StegoKey,
    seed: u64,
) -> Result<SimulatedEmbedding> {
    let cap = checked_capacity(cover, key)?;
    let n = cover.len();
    let total = total_bits(n, key);
    if m > total {
        return Err(Error::PayloadOverflow {
            bits: m,
            capacity: total,
        });
    }
    let costs = embedding_costs(cover, key.cost_model)?;
    let quotas = disperse(m, key.planes);

    let mut plans: Vec<EmbeddingPlan<f64>> = Vec::with_capacity(key.planes);
    for &q in &quotas {
        let plan = match plans.iter().find(|p| p.target_bits == q) {
            Some(p) => p.clone(),
            None => solve_lambda(costs.values(), q)?,
        };
        plans.push(plan);
    }

    let mut stack = float_plane::extract_planes(cover, &cap, key.planes)?;
    let mut masks = Vec::with_capacity(key.planes);
    for (k, plan) in plans.iter().enumerate() {
        let mask = coder::simulate(plan, mix(seed, STREAM_SIMULATION + k as u64));
        let plane = stack.plane_mut(k + 1);
        for (bit, &flip) in plane.iter_mut().zip(&mask) {
            *bit ^= u8::from(flip);
        }
        masks.push(mask);
    }
    let stego = float_plane::write_planes(cover, &stack)?;
    Ok(SimulatedEmbedding {
        stego,
        masks,
        plans,
        costs,
    })
}

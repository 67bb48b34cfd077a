//! Steganography in the mantissa bit planes of 32-bit floating-point HDR
//! luminance images.
//!
//! Each pixel's embeddable mantissa bits are those whose flip still changes
//! the value at seven significant digits, excluding the first seven
//! mantissa bits. Costs from an LDR-style model are divided by an
//! exponent-derived bias, the payload is spread over the `K` lowest
//! effective planes and each plane is coded with a syndrome-trellis code.
//!
//! Costs, probabilities and the multiplier search are generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix the precision used by
//! the pipeline.

pub mod analysis;
pub mod coder;
pub mod cost_model;
mod error;
pub mod float_plane;
pub mod image_io;
pub mod pipeline;
mod scalar;

pub use analysis::{diff_report, EmbedReport};
pub use coder::{solve_lambda, stc_decode, stc_encode, EmbeddingPlan, StcCode};
pub use cost_model::{correct, cost, CostMap, CostModel};
pub use error::{Error, Result};
pub use float_plane::{capacity, CapacityMap, FloatFields, PlaneStack};
pub use image_io::{read_cover, write_cover, CoverImage, StegoImage};
pub use pipeline::{embed, extract, simulate_embed, SimulatedEmbedding, StegoKey};
pub use scalar::Scalar;

pub type CostMap32 = CostMap<f32>;
pub type CostMap64 = CostMap<f64>;
pub type EmbeddingPlan32 = EmbeddingPlan<f32>;
pub type EmbeddingPlan64 = EmbeddingPlan<f64>;

//! Minimal-distortion coding: optimal-embedding simulation and
//! syndrome-trellis codes.

mod lambda;
pub(crate) mod stc;

pub use lambda::{
    binary_entropy, entropy_at, entropy_tolerance, flip_probability, simulate, solve_lambda,
    EmbeddingPlan, MAX_BISECTION_STEPS,
};
pub use stc::{block_ranges, stc_decode, stc_encode, StcCode, DEFAULT_HEIGHT, MAX_HEIGHT};

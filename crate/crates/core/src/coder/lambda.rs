//! Payload-constrained optimal embedding: the multiplier search and the
//! independent-flip simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bisection steps on `log2 λ` once the bracket is valid.
pub const MAX_BISECTION_STEPS: usize = 80;
/// Initial bracket exponent: `λ ∈ [2⁻²⁰, 2²⁰]`.
const INITIAL_BRACKET_LOG2: f64 = 20.0;
/// Bracket growth stops once `log2 λ` leaves this range.
const BRACKET_LIMIT_LOG2: f64 = 1000.0;

/// Binary entropy in bits; `h(0) = h(1) = 0`.
pub fn binary_entropy<F: Scalar>(p: F) -> F {
    if p <= F::zero() || p >= F::one() {
        return F::zero();
    }
    let q = F::one() - p;
    -(p * p.log2() + q * q.log2())
}

/// Flip probability `e^(-λρ) / (1 + e^(-λρ))`; zero for wet costs.
pub fn flip_probability<F: Scalar>(lambda: F, rho: F) -> F {
    if rho.is_infinite() {
        return F::zero();
    }
    let t = lambda * rho;
    if t.is_nan() {
        // 0 * ∞ never happens for finite ρ; λ = ∞ only when m = 0
        return F::zero();
    }
    // 1 / (1 + e^t) is the same value and stays finite for large t.
    (F::one() + t.exp()).recip()
}

/// Total payload entropy of the flip distribution at `lambda`.
pub fn entropy_at<F: Scalar>(costs: &[F], lambda: F) -> F {
    costs
        .iter()
        .map(|&r| binary_entropy(flip_probability(lambda, r)))
        .sum()
}

/// Relative entropy tolerance for the scalar type: `1e-6`, or `√ε` when
/// the type cannot resolve that.
pub fn entropy_tolerance<F: Scalar>() -> F {
    F::lit(1e-6).max(F::epsilon().sqrt())
}

/// Flip probabilities that carry `target_bits` of entropy.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingPlan<F> {
    pub probabilities: Vec<F>,
    pub lambda: F,
    pub target_bits: usize,
}

impl<F: Scalar> EmbeddingPlan<F> {
    /// An empty plan: nothing flips.
    pub fn empty(len: usize) -> Self {
        Self {
            probabilities: vec![F::zero(); len],
            lambda: F::infinity(),
            target_bits: 0,
        }
    }

    pub fn entropy(&self) -> F {
        self.probabilities.iter().map(|&p| binary_entropy(p)).sum()
    }

    /// Expected number of flips, `Σ p`.
    pub fn expected_flips(&self) -> F {
        self.probabilities.iter().copied().sum()
    }

    /// Expected distortion `Σ p ρ` over the costs the plan was solved on.
    pub fn expected_distortion(&self, costs: &[F]) -> F {
        self.probabilities
            .iter()
            .zip(costs)
            .filter(|(p, _)| **p > F::zero())
            .map(|(&p, &r)| p * r)
            .sum()
    }

    /// Draws an independent flip for every element.
    pub fn simulate(&self, seed: u64) -> Vec<bool> {
        simulate(self, seed)
    }
}

/// Solves for `λ` so that the summed binary entropy of the flip
/// probabilities equals `m` bits.
pub fn solve_lambda<F: Scalar>(costs: &[F], m: usize) -> Result<EmbeddingPlan<F>> {
    let finite = costs.iter().filter(|r| r.is_finite()).count();
    if finite == 0 {
        return Err(Error::AllWet);
    }
    if m > finite {
        return Err(Error::EntropyCapacity {
            bits: m,
            max: finite,
        });
    }
    if m == 0 {
        return Ok(EmbeddingPlan::empty(costs.len()));
    }
    let plan = |lambda: F| EmbeddingPlan {
        probabilities: costs.iter().map(|&r| flip_probability(lambda, r)).collect(),
        lambda,
        target_bits: m,
    };
    if m == finite {
        return Ok(plan(F::zero()));
    }

    let target = F::lit(m as f64);
    let tol = entropy_tolerance::<F>() * target;
    let h = |log_lambda: f64| entropy_at(costs, F::lit(log_lambda.exp2()));

    // entropy(lo) > m > entropy(hi)
    let mut lo = -INITIAL_BRACKET_LOG2;
    let mut hi = INITIAL_BRACKET_LOG2;
    while h(lo) <= target {
        if lo < -BRACKET_LIMIT_LOG2 {
            break;
        }
        hi = lo;
        lo -= 2.0 * INITIAL_BRACKET_LOG2;
    }
    while h(hi) >= target {
        if hi > BRACKET_LIMIT_LOG2 {
            break;
        }
        lo = hi;
        hi += 2.0 * INITIAL_BRACKET_LOG2;
    }

    let mut best = (F::infinity(), lo);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let e = h(mid);
        let err = (e - target).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if err <= tol {
            break;
        }
        if e > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 > tol {
        return Err(Error::LambdaNotConverged {
            entropy: (target + best.0).to_f64_lossy(),
            target: m as f64,
        });
    }
    Ok(plan(F::lit(best.1.exp2())))
}

/// Flips each element independently with its planned probability.
pub fn simulate<F: Scalar>(plan: &EmbeddingPlan<F>, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    plan.probabilities
        .iter()
        .map(|p| {
            let u: f64 = rng.random();
            u < p.to_f64_lossy()
        })
        .collect()
}

//! Norm-bounded additive uncertainty.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::benchmark;
use crate::error::{Error, Result};
use crate::lti::{induced_linf_norm, StateSpace, TransferFunction, DEFAULT_REL_TOL};

/// Radius of the disk the random poles are drawn from.
pub const POLE_RADIUS: f64 = 0.9;

/// Parameters of a random uncertainty draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySpec {
    pub delta: f64,
    pub order: usize,
    pub seed: u64,
    pub ts: f64,
}

impl UncertaintySpec {
    pub fn new(delta: f64, order: usize, seed: u64, ts: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter("delta must be nonnegative"));
        }
        if order == 0 {
            return Err(Error::InvalidParameter("uncertainty order must be at least 1"));
        }
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::InvalidSampleTime(ts));
        }
        Ok(Self {
            delta,
            order,
            seed,
            ts,
        })
    }
}

/// The fixed model error of the benchmark (relative degree one, norm just below `3e-4`).
pub fn reference_delta() -> StateSpace {
    benchmark::model_error_tf().to_state_space()
}

fn poly_from_roots(real: &[f64], pairs: &[(f64, f64)]) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut mul = |factor: &[f64]| {
        let mut next = vec![0.0; poly.len() + factor.len() - 1];
        for (i, a) in poly.iter().enumerate() {
            for (j, b) in factor.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        poly = next;
    };
    for &p in real {
        mul(&[1.0, -p]);
    }
    for &(re, im) in pairs {
        mul(&[1.0, -2.0 * re, re * re + im * im]);
    }
    poly
}

/// Draws a stable, strictly proper SISO system with `‖Δ‖∞→∞ ≤ δ`.
///
/// Poles come in conjugate pairs drawn uniformly (by area) from the disk of
/// radius [`POLE_RADIUS`], plus one real pole when the order is odd. The
/// numerator has degree `order - 1` with standard normal coefficients. The
/// result is rescaled so that its certified norm bound equals a gain drawn
/// uniformly from `[δ/2, δ]`.
pub fn random_delta(spec: &UncertaintySpec) -> Result<StateSpace> {
    if spec.delta == 0.0 {
        return StateSpace::zero(1, 1, spec.ts);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pair_count = spec.order / 2;
    let mut pairs = Vec::with_capacity(pair_count);
    for _ in 0..pair_count {
        let radius = POLE_RADIUS * libm::sqrt(rng.gen::<f64>());
        let angle = core::f64::consts::PI * rng.gen::<f64>();
        pairs.push((radius * libm::cos(angle), radius * libm::sin(angle)));
    }
    let mut real = Vec::new();
    if spec.order % 2 == 1 {
        real.push(rng.gen_range(-POLE_RADIUS..POLE_RADIUS));
    }
    let den = poly_from_roots(&real, &pairs);
    let num: Vec<f64> = loop {
        let num: Vec<f64> = (0..spec.order)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        if num.iter().any(|&c| c != 0.0) {
            break num;
        }
    };
    let target = rng.gen_range(0.5 * spec.delta..=spec.delta);
    let shape = TransferFunction::new(&num, &den, spec.ts)?.to_state_space();
    let norm = induced_linf_norm(&shape, DEFAULT_REL_TOL)?;
    Ok(shape.scaled(target / norm))
}

//! The infinity-norm safety filter.
//!
//! The safe set holds every coefficient matrix with `‖Θ‖∞→∞ ≤ β`. Projecting
//! a command onto the commands reachable from that set, in the `∞`-norm, has a
//! closed form that only depends on `β ‖ŵ_{t:t-H+1}‖∞`: each channel is
//! saturated at `r_max`. [`safety_filter_solve`] also returns the optimal
//! coefficients; [`safety_filter_clip`] is the cheap form used online.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Maximum absolute row sum.
pub fn matrix_inf_norm(m: &DMatrix<f64>) -> f64 {
    crate::lti::norm_inf(m)
}

/// `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Coefficient matrices `Θ ∈ R^{n_r × n_w·H}` with `‖Θ‖∞→∞ ≤ β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeSet {
    beta: f64,
    n_r: usize,
    n_w: usize,
    len: usize,
}

impl SafeSet {
    pub fn new(beta: f64, n_r: usize, n_w: usize, len: usize) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            beta,
            n_r,
            n_w,
            len,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn contains(&self, theta: &DMatrix<f64>) -> bool {
        theta.shape() == (self.n_r, self.n_w * self.len) && matrix_inf_norm(theta) <= self.beta
    }

    pub fn solve(&self, r_circ: &[f64], window: &[f64]) -> Result<FilterDecision> {
        if r_circ.len() != self.n_r || window.len() != self.n_w * self.len {
            return Err(Error::DimensionMismatch("safety filter input shapes"));
        }
        safety_filter_solve(r_circ, window, self.beta)
    }
}

/// Output of the exact safety-filter program.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterDecision {
    pub r: Vec<f64>,
    pub theta: DMatrix<f64>,
    pub saturated: Vec<bool>,
    pub r_max: f64,
}

/// Output of the saturation form.
#[derive(Debug, Clone, PartialEq)]
pub struct Clipped {
    pub r: Vec<f64>,
    pub saturated: Vec<bool>,
    pub r_max: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter("beta must be finite and nonnegative"))
    }
}

fn window_extremum(window: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in window.iter().enumerate() {
        let a = v.abs();
        match best {
            Some((_, b)) if a <= b => {}
            _ => best = Some((i, a)),
        }
    }
    best.filter(|&(_, b)| b > 0.0).map(|(i, _)| i)
}

/// Minimises `‖r - r°‖∞` subject to `r = Θ ŵ_{t:t-H+1}`, `‖Θ‖∞→∞ ≤ β`.
///
/// Each row of `Θ*` places all of its weight on the first window entry of
/// largest magnitude. A zero window admits only `r = 0`, `Θ* = 0`.
pub fn safety_filter_solve(r_circ: &[f64], window: &[f64], beta: f64) -> Result<FilterDecision> {
    check_beta(beta)?;
    let n_r = r_circ.len();
    let mut theta = DMatrix::zeros(n_r, window.len());
    let Some(i0) = window_extremum(window) else {
        return Ok(FilterDecision {
            r: alloc::vec![0.0; n_r],
            theta,
            saturated: r_circ.iter().map(|&v| v != 0.0).collect(),
            r_max: 0.0,
        });
    };
    let pivot = window[i0];
    let r_max = beta * pivot.abs();
    let mut r = Vec::with_capacity(n_r);
    let mut saturated = Vec::with_capacity(n_r);
    for (i, &rc) in r_circ.iter().enumerate() {
        let magnitude = rc.abs().min(r_max);
        let coeff = (rc.abs() / pivot.abs()).min(beta);
        theta[(i, i0)] = coeff * sign(rc) * sign(pivot);
        r.push(magnitude * sign(rc));
        saturated.push(rc.abs() > r_max);
    }
    Ok(FilterDecision {
        r,
        theta,
        saturated,
        r_max,
    })
}

/// Elementwise saturation of `r°` at `r_max = β ‖window‖∞`.
pub fn safety_filter_clip(r_circ: &[f64], window: &[f64], beta: f64) -> Result<Clipped> {
    check_beta(beta)?;
    let r_max = beta * window.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let mut r = Vec::with_capacity(r_circ.len());
    let mut saturated = Vec::with_capacity(r_circ.len());
    for &rc in r_circ {
        if rc.abs() <= r_max {
            r.push(rc);
            saturated.push(false);
        } else {
            r.push(r_max * sign(rc));
            saturated.push(true);
        }
    }
    Ok(Clipped { r, saturated, r_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inf_norm_examples() {
        assert_eq!(matrix_inf_norm(&DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.5])), 3.0);
        assert_eq!(matrix_inf_norm(&DMatrix::zeros(2, 3)), 0.0);
        assert_eq!(matrix_inf_norm(&DMatrix::identity(3, 3)), 1.0);
    }

    #[test]
    fn case_a_leaves_command() {
        let d = safety_filter_solve(&[1.0], &[2.0, -1.0], 1.5).unwrap();
        assert_eq!(d.r, [1.0]);
        assert_eq!(d.r_max, 3.0);
        assert_eq!(d.saturated, [false]);
    }

    #[test]
    fn case_b_saturates() {
        let d = safety_filter_solve(&[5.0], &[2.0, -1.0], 1.5).unwrap();
        assert_eq!(d.r, [3.0]);
        assert_eq!(d.theta, DMatrix::from_row_slice(1, 2, &[1.5, 0.0]));
    }

    #[test]
    fn negative_extremum() {
        let d = safety_filter_solve(&[5.0], &[-2.0, 1.0], 1.5).unwrap();
        assert_eq!(d.theta, DMatrix::from_row_slice(1, 2, &[-1.5, 0.0]));
        assert_eq!(d.r, [3.0]);
    }

    #[test]
    fn ties_pick_first_index() {
        let d = safety_filter_solve(&[5.0], &[1.0, -2.0, 2.0], 1.0).unwrap();
        assert_eq!(d.theta, DMatrix::from_row_slice(1, 3, &[0.0, -1.0, 0.0]));
    }

    #[test]
    fn zero_window() {
        let d = safety_filter_solve(&[1.0, 0.0], &[0.0, 0.0], 2.0).unwrap();
        assert_eq!(d.r, [0.0, 0.0]);
        assert_eq!(d.theta, DMatrix::zeros(2, 2));
        let c = safety_filter_clip(&[1.0, 0.0], &[0.0, 0.0], 2.0).unwrap();
        assert_eq!(c.r, [0.0, 0.0]);
        assert_eq!(c.r_max, 0.0);
    }

    #[test]
    fn clip_examples() {
        let c = safety_filter_clip(&[5.0, -4.0], &[2.0, 0.5], 1.5).unwrap();
        assert_eq!(c.r, [3.0, -3.0]);
        assert_eq!(c.saturated, [true, true]);
        let c = safety_filter_clip(&[1.0, -0.5], &[2.0, 0.5], 1.5).unwrap();
        assert_eq!(c.r, [1.0, -0.5]);
        let c = safety_filter_clip(&[0.0], &[2.0], 1.5).unwrap();
        assert_eq!(c.r, [0.0]);
    }

    #[test]
    fn invalid_beta() {
        assert!(safety_filter_clip(&[1.0], &[1.0], -1.0).is_err());
        assert!(safety_filter_solve(&[1.0], &[1.0], f64::NAN).is_err());
        assert!(SafeSet::new(-0.1, 1, 1, 1).is_err());
    }

    #[test]
    fn safe_set_membership() {
        let set = SafeSet::new(2.0, 1, 1, 2).unwrap();
        assert!(set.contains(&DMatrix::from_row_slice(1, 2, &[1.0, -1.0])));
        assert!(!set.contains(&DMatrix::from_row_slice(1, 2, &[1.5, -1.0])));
        assert!(set.solve(&[1.0], &[1.0]).is_err());
    }
}

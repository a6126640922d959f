//! Induced ℓ∞ → ℓ∞ norm of a stable discrete-time system.
//!
//! The induced norm equals the largest, over output rows, of the summed
//! absolute impulse-response entries. It is evaluated by truncating the
//! impulse response at a finite horizon `N` and adding a certified bound on
//! the remainder.
//!
//! Tail bound: pick `m = 2^j` with `γ = ‖A^m‖∞ < 1`. Writing `M_k = C A^k`,
//! `M_{k+m} = M_k A^m`, so the sum `T` of `‖M_k‖∞` over `k > N` satisfies
//! `T ≤ γ (W + T)` where `W` is the sum over the last `m` computed terms.
//! Hence the unseen part of the impulse response is bounded by
//! `‖B‖∞ γ W / (1 - γ)`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{StateSpace, STABILITY_MARGIN};
use crate::error::{Error, Result};

/// Contraction target for `‖A^m‖∞`.
const CONTRACTION: f64 = 0.5;
const MAX_DOUBLINGS: u32 = 24;
const MAX_HORIZON: usize = 20_000_000;

/// Breakdown of a certified norm bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBound {
    /// `partial + tail`; never below the true norm.
    pub bound: f64,
    /// Largest row sum of `|h_k|` for `k = 0..=horizon`.
    pub partial: f64,
    /// Certified bound on the remaining terms.
    pub tail: f64,
    /// Index of the last impulse-response term included in `partial`.
    pub horizon: usize,
}

pub(crate) fn mat_inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Certified upper bound on the induced ℓ∞ norm within `(1 + rel_tol)` of the true value.
pub fn induced_linf_norm(g: &StateSpace, rel_tol: f64) -> Result<f64> {
    linf_norm_bound(g, rel_tol).map(|nb| nb.bound)
}

pub fn linf_norm_bound(g: &StateSpace, rel_tol: f64) -> Result<NormBound> {
    if !(rel_tol > 0.0 && rel_tol.is_finite()) {
        return Err(Error::InvalidParameter("rel_tol must be positive"));
    }
    let reduced = structural_reduction(g);
    let g = &reduced;
    let p = g.outputs();
    let mut rows = vec![0.0; p];
    for i in 0..p {
        rows[i] = g.d.row(i).iter().map(|v| v.abs()).sum();
    }
    let max_row = |rows: &[f64]| rows.iter().copied().fold(0.0, f64::max);

    if g.order() == 0 || g.inputs() == 0 || p == 0 {
        let partial = max_row(&rows);
        return Ok(NormBound {
            bound: partial,
            partial,
            tail: 0.0,
            horizon: 0,
        });
    }

    let rho = g.spectral_radius();
    if !(rho < 1.0 - STABILITY_MARGIN) {
        return Err(Error::Unstable {
            spectral_radius: rho,
        });
    }

    let mut power = g.a.clone();
    let mut m = 1usize;
    let mut doublings = 0;
    let mut gamma = mat_inf_norm(&power);
    while gamma > CONTRACTION {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::NormNotConverged { horizon: m });
        }
        power = &power * &power;
        m *= 2;
        doublings += 1;
        gamma = mat_inf_norm(&power);
    }
    let b_norm = mat_inf_norm(&g.b);

    let mut window: VecDeque<f64> = VecDeque::with_capacity(m);
    let mut window_sum = 0.0;
    let mut ca = g.c.clone();
    let mut k = 0usize;
    loop {
        let h = &ca * &g.b;
        for (i, row) in rows.iter_mut().enumerate() {
            *row += h.row(i).iter().map(|v| v.abs()).sum::<f64>();
        }
        let ca_norm = mat_inf_norm(&ca);
        if window.len() == m {
            window_sum -= window.pop_front().unwrap_or(0.0);
        }
        window.push_back(ca_norm);
        window_sum += ca_norm;

        if window.len() == m {
            let partial = max_row(&rows);
            // Recompute the window sum now and then to stop drift.
            if k % 4096 == 0 {
                window_sum = window.iter().sum();
            }
            let tail = b_norm * gamma * window_sum.max(0.0) / (1.0 - gamma);
            if tail <= rel_tol * partial {
                return Ok(NormBound {
                    bound: partial + tail,
                    partial,
                    tail,
                    horizon: k + 1,
                });
            }
        }
        k += 1;
        if k > MAX_HORIZON {
            return Err(Error::NormNotConverged { horizon: k });
        }
        ca = &ca * &g.a;
    }
}

/// Drops states that the sparsity patterns of `A`, `B`, `C` show to be
/// unreachable from the inputs or invisible at the outputs. Stacked
/// interconnections produce such states (e.g. a block with an identically
/// zero response that still carries states on both sides).
pub(crate) fn structural_reduction(g: &StateSpace) -> StateSpace {
    let n = g.order();
    let a = &g.a;
    let closure = |mut mark: Vec<bool>, forward: bool| {
        let mut stack: Vec<usize> = (0..n).filter(|&i| mark[i]).collect();
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let linked = if forward { a[(j, i)] != 0.0 } else { a[(i, j)] != 0.0 };
                if linked && !mark[j] {
                    mark[j] = true;
                    stack.push(j);
                }
            }
        }
        mark
    };
    let reach = closure((0..n).map(|i| g.b.row(i).iter().any(|v| *v != 0.0)).collect(), true);
    let see = closure((0..n).map(|j| g.c.column(j).iter().any(|v| *v != 0.0)).collect(), false);
    let keep: Vec<usize> = (0..n).filter(|&i| reach[i] && see[i]).collect();
    if keep.len() == n {
        return g.clone();
    }
    let a = a.select_rows(&keep).select_columns(&keep);
    let b = g.b.select_rows(&keep);
    let c = g.c.select_columns(&keep);
    StateSpace {
        a,
        b,
        c,
        d: g.d.clone(),
        ts: g.ts,
    }
}

/// Largest row sum of `|h_k|` for `k = 0..=horizon`, with no tail term.
pub fn truncated_l1_norm(g: &StateSpace, horizon: usize) -> f64 {
    let p = g.outputs();
    let mut rows = vec![0.0; p];
    for h in g.impulse_response(horizon + 1) {
        for (i, row) in rows.iter_mut().enumerate() {
            *row += h.row(i).iter().map(|v| v.abs()).sum::<f64>();
        }
    }
    rows.into_iter().fold(0.0, f64::max)
}

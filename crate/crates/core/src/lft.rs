//! Robust-stability analysis of the adaptive loop.
//!
//! The loop is rearranged as an interconnection `M` with inputs `(q, r, d)`
//! and outputs `(u, ŵ, y)`: the uncertainty `Δ` maps `u → q` and the adaptive
//! filter maps `ŵ → r`. With additive uncertainty `G = Ĝ + Δ` entering at the
//! plant output, and `Ŝ`, `T̂` the nominal sensitivity and complementary
//! sensitivity,
//!
//! ```text
//! u = K Ŝ (r - q - d)
//! ŵ = Ŝ (q + d)
//! y = T̂ r + Ŝ (q + d)
//! ```
//!
//! The small-gain test acts on `H = M11 diag(δ I, I)`. For the induced ℓ∞
//! norm it reduces to a two-variable LP in `(s1, β)`, solved here in closed
//! form.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::{
    close_upper, feedback_unity, hstack, induced_linf_norm, negate, series, vstack, StateSpace,
};

/// Channel sizes of the partitioned interconnection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelDims {
    /// Outputs feeding the uncertainty.
    pub n_u: usize,
    /// Uncertainty outputs.
    pub n_q: usize,
    /// Outputs feeding the adaptive filter.
    pub n_w: usize,
    /// Adaptive filter outputs.
    pub n_r: usize,
    pub n_d: usize,
    pub n_y: usize,
}

impl ChannelDims {
    pub const SISO: ChannelDims = ChannelDims {
        n_u: 1,
        n_q: 1,
        n_w: 1,
        n_r: 1,
        n_d: 1,
        n_y: 1,
    };
}

/// The four blocks of `M` plus the uncertainty level `δ`.
#[derive(Debug, Clone)]
pub struct LftPartition {
    m11: StateSpace,
    m12: StateSpace,
    m21: StateSpace,
    m22: StateSpace,
    dims: ChannelDims,
    delta: f64,
}

fn expect_shape(g: &StateSpace, outputs: usize, inputs: usize, what: &'static str) -> Result<()> {
    if g.outputs() == outputs && g.inputs() == inputs {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(what))
    }
}

impl LftPartition {
    pub fn new(
        m11: StateSpace,
        m12: StateSpace,
        m21: StateSpace,
        m22: StateSpace,
        dims: ChannelDims,
        delta: f64,
    ) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter("uncertainty level must be nonnegative"));
        }
        let upper_out = dims.n_u + dims.n_w;
        let upper_in = dims.n_q + dims.n_r;
        expect_shape(&m11, upper_out, upper_in, "M11 shape")?;
        expect_shape(&m12, upper_out, dims.n_d, "M12 shape")?;
        expect_shape(&m21, dims.n_y, upper_in, "M21 shape")?;
        expect_shape(&m22, dims.n_y, dims.n_d, "M22 shape")?;
        let ts = m11.ts();
        for g in [&m12, &m21, &m22] {
            if g.ts() != ts {
                return Err(Error::SampleTimeMismatch {
                    left: ts,
                    right: g.ts(),
                });
            }
        }
        for g in [&m11, &m12, &m21, &m22] {
            if !g.is_stable() {
                return Err(Error::Unstable {
                    spectral_radius: g.spectral_radius(),
                });
            }
        }
        Ok(Self {
            m11,
            m12,
            m21,
            m22,
            dims,
            delta,
        })
    }

    pub fn m11(&self) -> &StateSpace {
        &self.m11
    }

    pub fn m12(&self) -> &StateSpace {
        &self.m12
    }

    pub fn m21(&self) -> &StateSpace {
        &self.m21
    }

    pub fn m22(&self) -> &StateSpace {
        &self.m22
    }

    pub fn dims(&self) -> ChannelDims {
        self.dims
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter("uncertainty level must be nonnegative"));
        }
        let mut out = self.clone();
        out.delta = delta;
        Ok(out)
    }

    /// `M` as one system, inputs `(q, r, d)`, outputs `(u, ŵ, y)`.
    pub fn full(&self) -> Result<StateSpace> {
        vstack(&hstack(&self.m11, &self.m12)?, &hstack(&self.m21, &self.m22)?)
    }

    /// `d → y` after closing `uncertainty` around the `u → q` channel, with
    /// the adaptive filter removed (`r = 0`).
    pub fn close_uncertainty(&self, uncertainty: &StateSpace) -> Result<StateSpace> {
        let closed = close_upper(&self.full()?, uncertainty, self.dims.n_u, self.dims.n_q)?;
        let d = self.dims;
        closed.subsystem(d.n_w..d.n_w + d.n_y, d.n_r..d.n_r + d.n_d)
    }

    /// `(H11, H12, H21, H22)` of `H = M11 diag(δ I, I)`.
    pub fn h_blocks(&self) -> Result<[StateSpace; 4]> {
        let d = self.dims;
        let (u, w) = (0..d.n_u, d.n_u..d.n_u + d.n_w);
        let (q, r) = (0..d.n_q, d.n_q..d.n_q + d.n_r);
        Ok([
            self.m11.subsystem(u.clone(), q.clone())?.scaled(self.delta),
            self.m11.subsystem(u, r.clone())?,
            self.m11.subsystem(w.clone(), q)?.scaled(self.delta),
            self.m11.subsystem(w, r)?,
        ])
    }
}

/// Builds `M` for the adaptive loop around the nominal plant `g_hat` and the
/// inner controller `k`.
pub fn build_afdr_lft(g_hat: &StateSpace, k: &StateSpace, delta: f64) -> Result<LftPartition> {
    if !g_hat.is_siso() || !k.is_siso() {
        return Err(Error::DimensionMismatch("plant and controller must be SISO"));
    }
    let loop_gain = series(k, g_hat)?;
    let (s, t) = feedback_unity(&loop_gain)?;
    if !s.is_stable() {
        return Err(Error::Unstable {
            spectral_radius: s.spectral_radius(),
        });
    }
    let ks = controller_sensitivity(k, &loop_gain, &s)?;
    let zero = StateSpace::zero(1, 1, g_hat.ts())?;
    let m11 = vstack(&hstack(&negate(&ks), &ks)?, &hstack(&s, &zero)?)?;
    let m12 = vstack(&negate(&ks), &s)?;
    let m21 = hstack(&s, &t)?;
    LftPartition::new(m11, m12, m21, s, ChannelDims::SISO, delta)
}

/// `K S` on the closed-loop state of `loop_gain = series(k, ·)`. Cascading
/// `S` with `K` would keep the controller poles (an integrator) as an
/// unobservable but non-decaying mode.
fn controller_sensitivity(k: &StateSpace, loop_gain: &StateSpace, s: &StateSpace) -> Result<StateSpace> {
    let n = loop_gain.order();
    let mut c_k = DMatrix::zeros(1, n);
    c_k.view_mut((0, 0), (1, k.order())).copy_from(k.c());
    // `s` outputs e = inv (v - C_L x); u = C_k x + D_k e.
    let c = &c_k + k.d() * s.c();
    let d = k.d() * s.d();
    StateSpace::new(s.a().clone(), s.b().clone(), c, d, s.ts())
}

/// Induced ℓ∞ norms of the blocks of `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockNorms {
    pub h11: f64,
    pub h12: f64,
    pub h21: f64,
    pub h22: f64,
}

impl BlockNorms {
    /// `s1 (‖H11‖ - 1) + β ‖H12‖ < 0` and `s1 ‖H21‖ + β ‖H22‖ < 1` (with `s2 = 1`).
    pub fn satisfies_small_gain(&self, s1: f64, beta: f64) -> Result<bool> {
        if !(s1 > 0.0) {
            return Err(Error::InvalidParameter("s1 must be positive"));
        }
        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter("beta must be nonnegative"));
        }
        Ok(s1 * (self.h11 - 1.0) + beta * self.h12 < 0.0 && s1 * self.h21 + beta * self.h22 < 1.0)
    }

    /// Open interval of admissible `s1` for a given `β`, if nonempty.
    pub fn scaling_interval(&self, beta: f64) -> Option<(f64, f64)> {
        if self.h11 >= 1.0 {
            return None;
        }
        let lower = beta * self.h12 / (1.0 - self.h11);
        let upper = if self.h21 > 0.0 {
            (1.0 - beta * self.h22) / self.h21
        } else if beta * self.h22 < 1.0 {
            f64::INFINITY
        } else {
            return None;
        };
        (lower < upper).then_some((lower, upper))
    }

    /// A strictly feasible `s1` for `β`, or `None` when `β` cannot be certified.
    pub fn scaling_for(&self, beta: f64) -> Option<f64> {
        let (lo, hi) = self.scaling_interval(beta)?;
        let s1 = if hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo > 0.0 {
            2.0 * lo
        } else {
            1.0
        };
        (s1 > 0.0).then_some(s1)
    }

    /// Supremum of certifiable `β`.
    pub fn beta_star(&self) -> SmallGainCertificate {
        if !(self.h11 < 1.0) {
            return SmallGainCertificate {
                beta_star: 0.0,
                s1: 0.0,
                norms: *self,
                feasible: false,
            };
        }
        let margin = 1.0 - self.h11;
        let denom = self.h22 * margin + self.h21 * self.h12;
        if denom > 0.0 {
            let beta_star = margin / denom;
            let s1 = if self.h12 > 0.0 {
                self.h12 * beta_star / margin
            } else {
                // first constraint is slack; any s1 below 1/‖H21‖ works
                self.scaling_for(0.0).unwrap_or(1.0)
            };
            SmallGainCertificate {
                beta_star,
                s1,
                norms: *self,
                feasible: true,
            }
        } else {
            SmallGainCertificate {
                beta_star: f64::INFINITY,
                s1: self.scaling_for(0.0).unwrap_or(1.0),
                norms: *self,
                feasible: true,
            }
        }
    }
}

/// Result of the `β*` program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallGainCertificate {
    /// Supremum of certified FIR gains; infinite when no `β` destabilizes.
    pub beta_star: f64,
    /// Scaling at which both constraints meet (the LP vertex).
    pub s1: f64,
    pub norms: BlockNorms,
    pub feasible: bool,
}

impl SmallGainCertificate {
    /// Strictly feasible scaling for a chosen `β < β*`.
    pub fn scaling_for(&self, beta: f64) -> Option<f64> {
        if !self.feasible || !(beta < self.beta_star) {
            return None;
        }
        self.norms.scaling_for(beta)
    }
}

pub fn scaled_m11_norm_bounds(p: &LftPartition, rel_tol: f64) -> Result<BlockNorms> {
    let [h11, h12, h21, h22] = p.h_blocks()?;
    Ok(BlockNorms {
        h11: induced_linf_norm(&h11, rel_tol)?,
        h12: induced_linf_norm(&h12, rel_tol)?,
        h21: induced_linf_norm(&h21, rel_tol)?,
        h22: induced_linf_norm(&h22, rel_tol)?,
    })
}

pub fn check_scaled_small_gain(p: &LftPartition, s1: f64, beta: f64, rel_tol: f64) -> Result<bool> {
    scaled_m11_norm_bounds(p, rel_tol)?.satisfies_small_gain(s1, beta)
}

pub fn beta_star(p: &LftPartition, rel_tol: f64) -> Result<SmallGainCertificate> {
    Ok(scaled_m11_norm_bounds(p, rel_tol)?.beta_star())
}

/// Partition with memoryless blocks; handy for synthetic analyses.
pub fn static_partition(
    m11: DMatrix<f64>,
    m12: DMatrix<f64>,
    m21: DMatrix<f64>,
    m22: DMatrix<f64>,
    dims: ChannelDims,
    delta: f64,
    ts: f64,
) -> Result<LftPartition> {
    LftPartition::new(
        StateSpace::gain(m11, ts)?,
        StateSpace::gain(m12, ts)?,
        StateSpace::gain(m21, ts)?,
        StateSpace::gain(m22, ts)?,
        dims,
        delta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norms(h11: f64, h12: f64, h21: f64, h22: f64) -> BlockNorms {
        BlockNorms { h11, h12, h21, h22 }
    }

    #[test]
    fn static_m11_norms() {
        let p = static_partition(
            DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.25]),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            ChannelDims::SISO,
            1.0,
            0.01,
        )
        .unwrap();
        let n = scaled_m11_norm_bounds(&p, 1e-6).unwrap();
        assert_eq!(n, norms(0.5, 1.0, 1.0, 0.25));
        let cert = n.beta_star();
        assert!((cert.beta_star - 0.5 / (0.25 * 0.5 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_delta_scales_away_uncertainty() {
        let p = static_partition(
            DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.25]),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            ChannelDims::SISO,
            0.0,
            0.01,
        )
        .unwrap();
        let n = scaled_m11_norm_bounds(&p, 1e-6).unwrap();
        assert_eq!(n.h11, 0.0);
        assert_eq!(n.h21, 0.0);
        assert!((n.beta_star().beta_star - 4.0).abs() < 1e-15);
    }

    #[test]
    fn filter_off_is_certified() {
        let n = norms(0.3, 2.0, 5.0, 1.0);
        assert!(n.satisfies_small_gain(0.1, 0.0).unwrap());
        assert!(n.satisfies_small_gain(0.0, 0.0).is_err());
    }

    #[test]
    fn large_h11_is_infeasible() {
        let n = norms(1.0, 0.1, 0.1, 0.1);
        for s1 in [1e-3, 0.1, 1.0, 10.0] {
            for beta in [0.0, 0.1, 1.0] {
                assert!(!n.satisfies_small_gain(s1, beta).unwrap());
            }
        }
        let cert = n.beta_star();
        assert!(!cert.feasible);
        assert_eq!(cert.scaling_for(0.0), None);
    }

    #[test]
    fn decoupled_uncertainty() {
        assert!((norms(0.2, 0.0, 3.0, 0.5).beta_star().beta_star - 2.0).abs() < 1e-15);
        assert!((norms(0.2, 3.0, 0.0, 0.5).beta_star().beta_star - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unbounded_when_filter_loop_is_open() {
        let cert = norms(0.1, 2.0, 0.0, 0.0).beta_star();
        assert!(cert.feasible);
        assert!(cert.beta_star.is_infinite());
        let s1 = cert.scaling_for(1e6).unwrap();
        assert!(cert.norms.satisfies_small_gain(s1, 1e6).unwrap());
    }

    #[test]
    fn scaling_certifies_below_and_not_above() {
        let n = norms(0.4, 3.0, 0.7, 0.2);
        let cert = n.beta_star();
        let s1 = cert.scaling_for(0.999 * cert.beta_star).unwrap();
        assert!(n.satisfies_small_gain(s1, 0.999 * cert.beta_star).unwrap());
        assert!(cert.scaling_for(1.001 * cert.beta_star).is_none());
        assert!(n.satisfies_small_gain(cert.s1, 0.999 * cert.beta_star).unwrap());
    }
}

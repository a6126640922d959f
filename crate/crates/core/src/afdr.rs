//! Adaptive FIR disturbance rejection: disturbance estimation, the FIR
//! control law and its recursive least-squares coefficient update.
//!
//! Signal conventions: `ŵ_t ∈ R^{n_w}` is the estimated effective disturbance
//! (so `n_w` equals the number of measured outputs), `r°_t ∈ R^{n_r}` is the
//! FIR command, and the coefficient matrix `Θ_t` is `n_r × n_w·H`. The stacked
//! coefficient vector is `ζ = vec(Θᵀ)`, i.e. the rows of `Θ` laid end to end.

use alloc::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::{LtiState, StateSpace};
use crate::safety::matrix_inf_norm;

/// Estimates the effective disturbance `ŵ = y - T̂ r` from the model of the
/// complementary sensitivity.
#[derive(Debug, Clone)]
pub struct DisturbanceEstimator {
    model: LtiState,
}

impl DisturbanceEstimator {
    pub fn new(comp_sensitivity: StateSpace) -> Result<Self> {
        if !comp_sensitivity.is_stable() {
            return Err(Error::Unstable {
                spectral_radius: comp_sensitivity.spectral_radius(),
            });
        }
        Ok(Self {
            model: LtiState::new(comp_sensitivity),
        })
    }

    pub fn model(&self) -> &StateSpace {
        self.model.system()
    }

    /// `ŵ_t = y_t - (T̂ r)_t`, then advances the model with `r_t`.
    pub fn estimate(&mut self, r_t: &DVector<f64>, y_t: &DVector<f64>) -> Result<DVector<f64>> {
        if y_t.len() != self.model.system().outputs() {
            return Err(Error::DimensionMismatch("estimator output length"));
        }
        let m = self.model.step(r_t)?;
        Ok(y_t - m)
    }

    /// `ŵ_t` before `r_t` is known. Only valid for a strictly proper model.
    pub fn peek(&self, y_t: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.model.system().is_strictly_proper() {
            return Err(Error::AlgebraicLoop);
        }
        if y_t.len() != self.model.system().outputs() {
            return Err(Error::DimensionMismatch("estimator output length"));
        }
        Ok(y_t - self.model.free_output())
    }

    /// Feeds the command actually applied at time `t`.
    pub fn advance(&mut self, r_t: &DVector<f64>) -> Result<()> {
        self.model.advance(r_t)
    }
}

/// FIR coefficients and the regressor window `ŵ_{t:t-H+1}` (newest first).
#[derive(Debug, Clone)]
pub struct FirState {
    len: usize,
    n_w: usize,
    n_r: usize,
    theta: DMatrix<f64>,
    window: DVector<f64>,
}

impl FirState {
    pub fn new(len: usize, n_w: usize, n_r: usize) -> Result<Self> {
        if len == 0 || n_w == 0 || n_r == 0 {
            return Err(Error::InvalidParameter("FIR length and channel counts must be positive"));
        }
        Ok(Self {
            len,
            n_w,
            n_r,
            theta: DMatrix::zeros(n_r, n_w * len),
            window: DVector::zeros(n_w * len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn window(&self) -> &DVector<f64> {
        &self.window
    }

    /// Shifts the window and inserts `ŵ_t` at the front.
    pub fn push(&mut self, w_t: &[f64]) -> Result<()> {
        if w_t.len() != self.n_w {
            return Err(Error::DimensionMismatch("FIR input length"));
        }
        let total = self.window.len();
        let buf = self.window.as_mut_slice();
        buf.copy_within(0..total - self.n_w, self.n_w);
        buf[..self.n_w].copy_from_slice(w_t);
        Ok(())
    }

    /// `r° = Θ ŵ_{t:t-H+1}`.
    pub fn output(&self) -> DVector<f64> {
        &self.theta * &self.window
    }

    /// Replaces `Θ` with the matrix whose rows are consecutive slices of `ζ`.
    pub fn set_coefficients(&mut self, zeta: &DVector<f64>) -> Result<()> {
        let cols = self.n_w * self.len;
        if zeta.len() != self.n_r * cols {
            return Err(Error::DimensionMismatch("coefficient vector length"));
        }
        self.theta = DMatrix::from_row_slice(self.n_r, cols, zeta.as_slice());
        Ok(())
    }

    /// `vec(Θᵀ)`.
    pub fn coefficients(&self) -> DVector<f64> {
        DVector::from_column_slice(self.theta.transpose().as_slice())
    }

    pub fn theta_norm(&self) -> f64 {
        matrix_inf_norm(&self.theta)
    }
}

#[derive(Debug, Clone)]
enum RegressorPath {
    /// `g = T̂ ŵ` and a delay line of its last `H` values.
    Siso { filter: LtiState, delay: VecDeque<f64> },
    /// One copy of `T̂`'s state per coefficient, driven by `I ⊗ ŵ_{t:t-H+1}ᵀ`.
    Kronecker {
        model: StateSpace,
        states: DMatrix<f64>,
        window: FirState,
    },
}

/// Produces the newest block row of `Φ_t = M1 · M2(ŵ_{0:t})`.
#[derive(Debug, Clone)]
pub struct FilteredRegressor {
    path: RegressorPath,
    len: usize,
    n_w: usize,
    n_r: usize,
}

impl FilteredRegressor {
    /// Uses the scalar fast path when the model is SISO.
    pub fn new(model: StateSpace, len: usize) -> Result<Self> {
        if model.is_siso() {
            Self::siso(model, len)
        } else {
            Self::kronecker(model, len)
        }
    }

    pub fn siso(model: StateSpace, len: usize) -> Result<Self> {
        if !model.is_siso() {
            return Err(Error::DimensionMismatch("SISO regressor needs a SISO model"));
        }
        if len == 0 {
            return Err(Error::InvalidParameter("FIR length must be positive"));
        }
        let mut delay = VecDeque::with_capacity(len);
        delay.extend(core::iter::repeat(0.0).take(len));
        Ok(Self {
            path: RegressorPath::Siso {
                filter: LtiState::new(model),
                delay,
            },
            len,
            n_w: 1,
            n_r: 1,
        })
    }

    pub fn kronecker(model: StateSpace, len: usize) -> Result<Self> {
        let n_w = model.outputs();
        let n_r = model.inputs();
        let window = FirState::new(len, n_w, n_r)?;
        let states = DMatrix::zeros(model.order(), n_r * n_w * len);
        Ok(Self {
            path: RegressorPath::Kronecker {
                model,
                states,
                window,
            },
            len,
            n_w,
            n_r,
        })
    }

    pub fn params(&self) -> usize {
        self.n_r * self.n_w * self.len
    }

    pub fn outputs(&self) -> usize {
        self.n_w
    }

    /// Consumes `ŵ_t` and returns `φ_t` (`n_w × n_r·n_w·H`). Must be called
    /// exactly once per sample, in time order.
    pub fn next(&mut self, w_t: &[f64]) -> Result<DMatrix<f64>> {
        if w_t.len() != self.n_w {
            return Err(Error::DimensionMismatch("regressor input length"));
        }
        match &mut self.path {
            RegressorPath::Siso { filter, delay } => {
                let g = filter.step_scalar(w_t[0]);
                delay.pop_back();
                delay.push_front(g);
                Ok(DMatrix::from_iterator(1, delay.len(), delay.iter().copied()))
            }
            RegressorPath::Kronecker {
                model,
                states,
                window,
            } => {
                window.push(w_t)?;
                let l = self.n_w * self.len;
                let mut u = DMatrix::zeros(self.n_r, self.n_r * l);
                for i in 0..self.n_r {
                    u.view_mut((i, i * l), (1, l))
                        .copy_from(&window.window().transpose());
                }
                let phi = model.c() * &*states + model.d() * &u;
                *states = model.a() * &*states + model.b() * &u;
                Ok(phi)
            }
        }
    }
}

/// Recursive least-squares state for `min ‖Φ ζ + ŵ‖²` with forgetting.
#[derive(Debug, Clone)]
pub struct RlsState {
    zeta: DVector<f64>,
    p: DMatrix<f64>,
    forgetting: f64,
    lambda_init: f64,
}

impl RlsState {
    /// `ζ_0 = 0`, `P_0 = λ_init I`.
    pub fn new(params: usize, lambda_init: f64, forgetting: f64) -> Result<Self> {
        if !(lambda_init > 0.0 && lambda_init.is_finite()) {
            return Err(Error::InvalidParameter("lambda_init must be positive"));
        }
        if !(forgetting > 0.0 && forgetting <= 1.0) {
            return Err(Error::InvalidParameter("forgetting factor must lie in (0, 1]"));
        }
        Ok(Self {
            zeta: DVector::zeros(params),
            p: DMatrix::identity(params, params) * lambda_init,
            forgetting,
            lambda_init,
        })
    }

    pub fn zeta(&self) -> &DVector<f64> {
        &self.zeta
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn forgetting(&self) -> f64 {
        self.forgetting
    }

    pub fn lambda_init(&self) -> f64 {
        self.lambda_init
    }

    /// One RLS step with regressor `φ_t` and target `-ŵ_t`.
    pub fn update(&mut self, phi: &DMatrix<f64>, w_t: &DVector<f64>) -> Result<&DVector<f64>> {
        if phi.ncols() != self.zeta.len() || phi.nrows() != w_t.len() {
            return Err(Error::DimensionMismatch("RLS regressor shape"));
        }
        let rows = phi.nrows();
        let p_phi_t = &self.p * phi.transpose();
        let innovation_cov =
            DMatrix::identity(rows, rows) * self.forgetting + phi * &p_phi_t;
        let inv = innovation_cov
            .try_inverse()
            .ok_or(Error::InvalidParameter("singular RLS innovation covariance"))?;
        let gain = &p_phi_t * inv;
        let err = -w_t - phi * &self.zeta;
        self.zeta += &gain * err;
        self.p = (&self.p - &gain * p_phi_t.transpose()) / self.forgetting;
        let sym = (&self.p + self.p.transpose()) * 0.5;
        self.p = sym;
        Ok(&self.zeta)
    }
}

/// The complete outer-loop controller: estimator, regressor, RLS and FIR filter.
#[derive(Debug, Clone)]
pub struct AdaptiveFir {
    estimator: DisturbanceEstimator,
    regressor: FilteredRegressor,
    rls: RlsState,
    fir: FirState,
}

impl AdaptiveFir {
    pub fn new(
        comp_sensitivity: StateSpace,
        len: usize,
        lambda_init: f64,
        forgetting: f64,
    ) -> Result<Self> {
        let n_w = comp_sensitivity.outputs();
        let n_r = comp_sensitivity.inputs();
        let estimator = DisturbanceEstimator::new(comp_sensitivity.clone())?;
        let regressor = FilteredRegressor::new(comp_sensitivity, len)?;
        let rls = RlsState::new(regressor.params(), lambda_init, forgetting)?;
        let fir = FirState::new(len, n_w, n_r)?;
        Ok(Self {
            estimator,
            regressor,
            rls,
            fir,
        })
    }

    pub fn fir(&self) -> &FirState {
        &self.fir
    }

    pub fn rls(&self) -> &RlsState {
        &self.rls
    }

    /// Estimates `ŵ_t` from `y_t`, shifts it into the window and advances the
    /// regressor. When `learn` is set the RLS solution is refreshed and loaded
    /// into the FIR coefficients.
    pub fn observe(&mut self, y_t: &DVector<f64>, learn: bool) -> Result<DVector<f64>> {
        let w = self.estimator.peek(y_t)?;
        self.fir.push(w.as_slice())?;
        let phi = self.regressor.next(w.as_slice())?;
        if learn {
            let zeta = self.rls.update(&phi, &w)?.clone();
            self.fir.set_coefficients(&zeta)?;
        }
        Ok(w)
    }

    /// Unconstrained FIR command for the current window.
    pub fn command(&self) -> DVector<f64> {
        self.fir.output()
    }

    /// Records the command that was actually applied.
    pub fn apply(&mut self, r_t: &DVector<f64>) -> Result<()> {
        self.estimator.advance(r_t)
    }
}

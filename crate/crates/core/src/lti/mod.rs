//! Discrete-time LTI systems.
//!
//! Two representations are provided: [`TransferFunction`] for SISO rational
//! functions in descending powers of `z`, and [`StateSpace`] for general MIMO
//! realizations. Interconnections are always formed on state-space
//! realizations; polynomial arithmetic on closed loops is never used.

mod interconnect;
mod norm;

pub use interconnect::{close_upper, feedback_unity, hstack, negate, parallel, series, vstack};
pub(crate) use norm::mat_inf_norm as norm_inf;
pub use norm::{induced_linf_norm, linf_norm_bound, truncated_l1_norm, NormBound};

use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative tolerance of the certified induced norm.
pub const DEFAULT_REL_TOL: f64 = 1e-6;

/// Spectral radius margin below one required for a system to count as stable.
pub const STABILITY_MARGIN: f64 = 1e-9;

fn check_ts(ts: f64) -> Result<()> {
    if ts.is_finite() && ts > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSampleTime(ts))
    }
}

/// SISO rational transfer function in descending powers of `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    ts: f64,
}

impl TransferFunction {
    /// Leading zeros of the numerator are dropped. The denominator must have a
    /// nonzero leading coefficient and the function must be proper.
    pub fn new(num: &[f64], den: &[f64], ts: f64) -> Result<Self> {
        check_ts(ts)?;
        match den.first() {
            Some(&lead) if lead != 0.0 && lead.is_finite() => {}
            _ => return Err(Error::ZeroLeadingCoefficient),
        }
        let first_nonzero = num.iter().position(|&c| c != 0.0);
        let num: Vec<f64> = match first_nonzero {
            Some(i) => num[i..].to_vec(),
            None => alloc::vec![0.0],
        };
        let num_degree = num.len() - 1;
        let den_degree = den.len() - 1;
        if num_degree > den_degree {
            return Err(Error::Improper {
                num_degree,
                den_degree,
            });
        }
        Ok(Self {
            num,
            den: den.to_vec(),
            ts,
        })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.len() < self.den.len() || self.num.iter().all(|&c| c == 0.0)
    }

    /// Controllable canonical realization of order `deg(den)`.
    pub fn to_state_space(&self) -> StateSpace {
        let n = self.den.len() - 1;
        let lead = self.den[0];
        let a: Vec<f64> = self.den.iter().map(|c| c / lead).collect();
        let mut b = alloc::vec![0.0; n + 1 - self.num.len()];
        b.extend(self.num.iter().map(|c| c / lead));

        let mut am = DMatrix::zeros(n, n);
        for j in 0..n {
            am[(0, j)] = -a[j + 1];
        }
        for i in 1..n {
            am[(i, i - 1)] = 1.0;
        }
        let mut bm = DMatrix::zeros(n, 1);
        if n > 0 {
            bm[(0, 0)] = 1.0;
        }
        let cm = DMatrix::from_fn(1, n, |_, j| b[j + 1] - b[0] * a[j + 1]);
        let dm = DMatrix::from_element(1, 1, b[0]);
        StateSpace {
            a: am,
            b: bm,
            c: cm,
            d: dm,
            ts: self.ts,
        }
    }
}

impl From<&TransferFunction> for StateSpace {
    fn from(tf: &TransferFunction) -> Self {
        tf.to_state_space()
    }
}

/// Realization `x[t+1] = A x[t] + B u[t]`, `y[t] = C x[t] + D u[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    ts: f64,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        ts: f64,
    ) -> Result<Self> {
        check_ts(ts)?;
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch("A must be square"));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch("B rows must match A"));
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch("C columns must match A"));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch("D must be outputs x inputs"));
        }
        Ok(Self { a, b, c, d, ts })
    }

    /// Memoryless system `y = D u`.
    pub fn gain(d: DMatrix<f64>, ts: f64) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, m),
            DMatrix::zeros(p, 0),
            d,
            ts,
        )
    }

    /// The zero system with the given number of outputs and inputs.
    pub fn zero(outputs: usize, inputs: usize, ts: f64) -> Result<Self> {
        Self::gain(DMatrix::zeros(outputs, inputs), ts)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.inputs() == 1 && self.outputs() == 1
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|&v| v == 0.0)
    }

    /// Markov parameters `D, CB, CAB, ...` (`len` terms).
    pub fn impulse_response(&self, len: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return out;
        }
        out.push(self.d.clone());
        let mut ca = self.c.clone();
        for _ in 1..len {
            out.push(&ca * &self.b);
            ca = &ca * &self.a;
        }
        out
    }

    /// Simulate from `x0` (zero when `None`), returning one output per input sample.
    pub fn simulate(&self, u: &[DVector<f64>], x0: Option<&DVector<f64>>) -> Result<Vec<DVector<f64>>> {
        let mut state = LtiState::new(self.clone());
        if let Some(x0) = x0 {
            state.set_state(x0.clone())?;
        }
        u.iter().map(|ut| state.step(ut)).collect()
    }

    /// Single-input single-output convenience wrapper around [`simulate`](Self::simulate).
    pub fn simulate_siso(&self, u: &[f64]) -> Result<Vec<f64>> {
        if !self.is_siso() {
            return Err(Error::DimensionMismatch("simulate_siso needs a SISO system"));
        }
        let mut state = LtiState::new(self.clone());
        Ok(u.iter().map(|&ut| state.step_scalar(ut)).collect())
    }

    /// Largest eigenvalue magnitude of `A` (zero for memoryless systems).
    pub fn spectral_radius(&self) -> f64 {
        if self.order() == 0 {
            return 0.0;
        }
        let n = self.order();
        match self.a.clone().try_schur(f64::EPSILON, 200 * n) {
            Some(schur) => schur
                .complex_eigenvalues()
                .iter()
                .map(|z| libm::hypot(z.re, z.im))
                .fold(0.0, f64::max),
            None => gelfand_radius(&self.a),
        }
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0 - STABILITY_MARGIN
    }

    /// `C (zI - A)^{-1} B + D` at `z = exp(j omega Ts)`, `omega` in rad/s.
    pub fn frequency_response(&self, omega: f64) -> Result<DMatrix<Complex<f64>>> {
        let theta = omega * self.ts;
        let z = Complex::new(libm::cos(theta), libm::sin(theta));
        let d = self.d.map(|v| Complex::new(v, 0.0));
        if self.order() == 0 {
            return Ok(d);
        }
        let n = self.order();
        let shifted = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { z } else { Complex::new(0.0, 0.0) };
            diag - Complex::new(self.a[(i, j)], 0.0)
        });
        let b = self.b.map(|v| Complex::new(v, 0.0));
        let x = shifted
            .lu()
            .solve(&b)
            .ok_or(Error::InvalidParameter("frequency lies on a pole"))?;
        let c = self.c.map(|v| Complex::new(v, 0.0));
        Ok(c * x + d)
    }

    /// Subsystem from the selected inputs to the selected outputs.
    pub fn subsystem(&self, outputs: Range<usize>, inputs: Range<usize>) -> Result<Self> {
        if outputs.end > self.outputs() || inputs.end > self.inputs() {
            return Err(Error::DimensionMismatch("subsystem channel range"));
        }
        let n = self.order();
        let (p, m) = (outputs.len(), inputs.len());
        Self::new(
            self.a.clone(),
            self.b.view((0, inputs.start), (n, m)).into_owned(),
            self.c.view((outputs.start, 0), (p, n)).into_owned(),
            self.d.view((outputs.start, inputs.start), (p, m)).into_owned(),
            self.ts,
        )
    }

    /// The system multiplied by a scalar gain (applied at the output).
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: &self.c * gain,
            d: &self.d * gain,
            ts: self.ts,
        }
    }
}

/// A realization together with its evolving state, stepped one sample at a time.
#[derive(Debug, Clone)]
pub struct LtiState {
    sys: StateSpace,
    x: DVector<f64>,
}

impl LtiState {
    pub fn new(sys: StateSpace) -> Self {
        let x = DVector::zeros(sys.order());
        Self { sys, x }
    }

    pub fn system(&self) -> &StateSpace {
        &self.sys
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn set_state(&mut self, x: DVector<f64>) -> Result<()> {
        if x.len() != self.sys.order() {
            return Err(Error::DimensionMismatch("initial state length"));
        }
        self.x = x;
        Ok(())
    }

    /// `C x`, the part of the output that does not depend on the current input.
    pub fn free_output(&self) -> DVector<f64> {
        &self.sys.c * &self.x
    }

    pub fn output(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.sys.inputs() {
            return Err(Error::DimensionMismatch("input length"));
        }
        Ok(&self.sys.c * &self.x + &self.sys.d * u)
    }

    pub fn advance(&mut self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.sys.inputs() {
            return Err(Error::DimensionMismatch("input length"));
        }
        self.x = &self.sys.a * &self.x + &self.sys.b * u;
        Ok(())
    }

    pub fn step(&mut self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self.output(u)?;
        self.advance(u)?;
        Ok(y)
    }

    /// SISO free response `C x`.
    pub fn free_output_scalar(&self) -> f64 {
        self.sys.c.row(0).dot(&self.x.transpose())
    }

    /// SISO step; panics if the system is not SISO.
    pub fn step_scalar(&mut self, u: f64) -> f64 {
        let y = self.free_output_scalar() + self.sys.d[(0, 0)] * u;
        self.advance_scalar(u);
        y
    }

    pub fn advance_scalar(&mut self, u: f64) {
        let next = &self.sys.a * &self.x + self.sys.b.column(0) * u;
        self.x = next;
    }

    pub fn reset(&mut self) {
        self.x.fill(0.0);
    }
}

/// `lim ‖A^k‖^{1/k}` along `k = 2^j`; an upper bound on the spectral radius.
/// Used when the QR iteration stalls (e.g. nilpotent shift matrices).
fn gelfand_radius(a: &DMatrix<f64>) -> f64 {
    let mut p = a.clone();
    let mut log_norm = 0.0;
    let mut radius = norm::mat_inf_norm(a);
    for j in 1..=40 {
        p = &p * &p;
        let n = norm::mat_inf_norm(&p);
        if n == 0.0 {
            return 0.0;
        }
        p /= n;
        log_norm = 2.0 * log_norm + libm::log(n);
        radius = radius.min(libm::exp(log_norm / libm::pow(2.0, j as f64)));
    }
    radius
}

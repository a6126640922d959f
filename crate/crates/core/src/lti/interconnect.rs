use nalgebra::DMatrix;

use super::StateSpace;
use crate::error::{Error, Result};

fn same_ts(g1: &StateSpace, g2: &StateSpace) -> Result<f64> {
    if g1.ts == g2.ts {
        Ok(g1.ts)
    } else {
        Err(Error::SampleTimeMismatch {
            left: g1.ts,
            right: g2.ts,
        })
    }
}

pub(crate) fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub(crate) fn vcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub(crate) fn blockdiag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}

fn block2(
    a11: &DMatrix<f64>,
    a12: &DMatrix<f64>,
    a21: &DMatrix<f64>,
    a22: &DMatrix<f64>,
) -> DMatrix<f64> {
    vcat(&hcat(a11, a12), &hcat(a21, a22))
}

/// `g2 ∘ g1`: the output of `g1` drives `g2`.
pub fn series(g1: &StateSpace, g2: &StateSpace) -> Result<StateSpace> {
    let ts = same_ts(g1, g2)?;
    if g1.outputs() != g2.inputs() {
        return Err(Error::DimensionMismatch("series: g1 outputs must equal g2 inputs"));
    }
    let a = block2(
        &g1.a,
        &DMatrix::zeros(g1.order(), g2.order()),
        &(&g2.b * &g1.c),
        &g2.a,
    );
    let b = vcat(&g1.b, &(&g2.b * &g1.d));
    let c = hcat(&(&g2.d * &g1.c), &g2.c);
    let d = &g2.d * &g1.d;
    StateSpace::new(a, b, c, d, ts)
}

/// Sum of two systems driven by the same input.
pub fn parallel(g1: &StateSpace, g2: &StateSpace) -> Result<StateSpace> {
    let ts = same_ts(g1, g2)?;
    if g1.inputs() != g2.inputs() || g1.outputs() != g2.outputs() {
        return Err(Error::DimensionMismatch("parallel: I/O dimensions differ"));
    }
    StateSpace::new(
        blockdiag(&g1.a, &g2.a),
        vcat(&g1.b, &g2.b),
        hcat(&g1.c, &g2.c),
        &g1.d + &g2.d,
        ts,
    )
}

pub fn negate(g: &StateSpace) -> StateSpace {
    g.scaled(-1.0)
}

/// `[g1 g2]`: separate inputs, outputs summed.
pub fn hstack(g1: &StateSpace, g2: &StateSpace) -> Result<StateSpace> {
    let ts = same_ts(g1, g2)?;
    if g1.outputs() != g2.outputs() {
        return Err(Error::DimensionMismatch("hstack: output counts differ"));
    }
    StateSpace::new(
        blockdiag(&g1.a, &g2.a),
        blockdiag(&g1.b, &g2.b),
        hcat(&g1.c, &g2.c),
        hcat(&g1.d, &g2.d),
        ts,
    )
}

/// `[g1; g2]`: shared input, outputs stacked.
pub fn vstack(g1: &StateSpace, g2: &StateSpace) -> Result<StateSpace> {
    let ts = same_ts(g1, g2)?;
    if g1.inputs() != g2.inputs() {
        return Err(Error::DimensionMismatch("vstack: input counts differ"));
    }
    StateSpace::new(
        blockdiag(&g1.a, &g2.a),
        vcat(&g1.b, &g2.b),
        blockdiag(&g1.c, &g2.c),
        vcat(&g1.d, &g2.d),
        ts,
    )
}

/// Unity negative feedback around `loop_gain`.
///
/// Returns `(S, T)` with `S = (I + L)^{-1}` (reference to error) and
/// `T = L (I + L)^{-1}` (reference to output), both sharing the closed-loop
/// state matrix `A - B (I + D)^{-1} C`.
pub fn feedback_unity(loop_gain: &StateSpace) -> Result<(StateSpace, StateSpace)> {
    let p = loop_gain.outputs();
    if p != loop_gain.inputs() {
        return Err(Error::DimensionMismatch("feedback_unity: loop must be square"));
    }
    let eye = DMatrix::<f64>::identity(p, p);
    let inv = (&eye + &loop_gain.d)
        .try_inverse()
        .ok_or(Error::AlgebraicLoop)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::AlgebraicLoop);
    }
    let a = &loop_gain.a - &loop_gain.b * &inv * &loop_gain.c;
    let b = &loop_gain.b * &inv;
    let ts = loop_gain.ts;
    let sensitivity = StateSpace::new(a.clone(), b.clone(), -(&inv * &loop_gain.c), inv.clone(), ts)?;
    let comp = StateSpace::new(a, b, &inv * &loop_gain.c, &loop_gain.d * &inv, ts)?;
    Ok((sensitivity, comp))
}

/// Close `delta` around the upper channels of `plant`.
///
/// The first `n_w` inputs of `plant` are driven by `delta`, whose input is the
/// first `n_z` outputs of `plant`. The remaining channels form the result.
pub fn close_upper(
    plant: &StateSpace,
    delta: &StateSpace,
    n_z: usize,
    n_w: usize,
) -> Result<StateSpace> {
    let ts = same_ts(plant, delta)?;
    if delta.inputs() != n_z || delta.outputs() != n_w {
        return Err(Error::DimensionMismatch("close_upper: delta shape"));
    }
    if plant.outputs() < n_z || plant.inputs() < n_w {
        return Err(Error::DimensionMismatch("close_upper: plant too small"));
    }
    let n = plant.order();
    let (p, m) = (plant.outputs(), plant.inputs());
    let (n_y, n_u) = (p - n_z, m - n_w);

    let b1 = plant.b.view((0, 0), (n, n_w)).into_owned();
    let b2 = plant.b.view((0, n_w), (n, n_u)).into_owned();
    let c1 = plant.c.view((0, 0), (n_z, n)).into_owned();
    let c2 = plant.c.view((n_z, 0), (n_y, n)).into_owned();
    let d11 = plant.d.view((0, 0), (n_z, n_w)).into_owned();
    let d12 = plant.d.view((0, n_w), (n_z, n_u)).into_owned();
    let d21 = plant.d.view((n_z, 0), (n_y, n_w)).into_owned();
    let d22 = plant.d.view((n_z, n_w), (n_y, n_u)).into_owned();

    let e = DMatrix::<f64>::identity(n_z, n_z) - &d11 * &delta.d;
    let zinv = e.try_inverse().ok_or(Error::AlgebraicLoop)?;

    // z = zx x + zxi xi + zu u
    let zx = &zinv * &c1;
    let zxi = &zinv * &d11 * &delta.c;
    let zu = &zinv * &d12;
    // w = wx x + wxi xi + wu u
    let wx = &delta.d * &zx;
    let wxi = &delta.c + &delta.d * &zxi;
    let wu = &delta.d * &zu;

    let a = block2(
        &(&plant.a + &b1 * &wx),
        &(&b1 * &wxi),
        &(&delta.b * &zx),
        &(&delta.a + &delta.b * &zxi),
    );
    let b = vcat(&(&b2 + &b1 * &wu), &(&delta.b * &zu));
    let c = hcat(&(&c2 + &d21 * &wx), &(&d21 * &wxi));
    let d = &d22 + &d21 * &wu;
    StateSpace::new(a, b, c, d, ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::TransferFunction;

    fn gain(k: f64) -> StateSpace {
        StateSpace::gain(DMatrix::from_element(1, 1, k), 0.01).unwrap()
    }

    #[test]
    fn static_compositions() {
        assert_eq!(series(&gain(2.0), &gain(3.0)).unwrap().d()[(0, 0)], 6.0);
        assert_eq!(parallel(&gain(2.0), &gain(3.0)).unwrap().d()[(0, 0)], 5.0);
        assert_eq!(negate(&gain(2.0)).d()[(0, 0)], -2.0);
    }

    #[test]
    fn series_with_unity_is_identity() {
        let g = TransferFunction::new(&[1.0, 0.0], &[1.0, -0.5], 0.01)
            .unwrap()
            .to_state_space();
        let h = series(&g, &gain(1.0)).unwrap().impulse_response(20);
        for (k, hk) in h.iter().enumerate() {
            assert!((hk[(0, 0)] - 0.5f64.powi(k as i32)).abs() < 1e-14);
        }
    }

    #[test]
    fn feedback_of_static_gains() {
        let (s, t) = feedback_unity(&gain(1.0)).unwrap();
        assert_eq!(s.d()[(0, 0)], 0.5);
        assert_eq!(t.d()[(0, 0)], 0.5);
        let (s, t) = feedback_unity(&gain(0.0)).unwrap();
        assert_eq!(s.d()[(0, 0)], 1.0);
        assert_eq!(t.d()[(0, 0)], 0.0);
    }

    #[test]
    fn feedback_detects_algebraic_loop() {
        assert_eq!(feedback_unity(&gain(-1.0)).unwrap_err(), Error::AlgebraicLoop);
    }

    #[test]
    fn mismatches_are_rejected() {
        let g = gain(1.0);
        let slow = StateSpace::gain(DMatrix::from_element(1, 1, 1.0), 0.1).unwrap();
        assert!(matches!(series(&g, &slow), Err(Error::SampleTimeMismatch { .. })));
        let wide = StateSpace::gain(DMatrix::from_element(1, 2, 1.0), 0.01).unwrap();
        assert!(matches!(parallel(&g, &wide), Err(Error::DimensionMismatch(_))));
        assert!(matches!(series(&g, &wide), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn close_upper_static() {
        // plant: z = w + u, y = w + 2u; delta: w = 0.5 z
        let plant = StateSpace::gain(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]), 0.01).unwrap();
        let closed = close_upper(&plant, &gain(0.5), 1, 1).unwrap();
        // z = 0.5 z + u => z = 2u, w = u, y = u + 2u = 3u
        assert!((closed.d()[(0, 0)] - 3.0).abs() < 1e-15);
    }
}

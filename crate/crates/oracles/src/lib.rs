//! Slow, direct reference computations used to cross-check `afdr-core`.
//!
//! Nothing here depends on the core crate. Systems are given either as
//! transfer-function coefficients (descending powers of `z`) or as raw
//! `(A, B, C, D)` matrices.

use nalgebra::{DMatrix, DVector};

/// First `len` impulse-response samples of `num/den` by polynomial long division.
pub fn tf_impulse(num: &[f64], den: &[f64], len: usize) -> Vec<f64> {
    assert!(!den.is_empty() && den[0] != 0.0);
    assert!(num.len() <= den.len(), "improper transfer function");
    let n = den.len() - 1;
    // Pad numerator on the left so both are in powers of z^{-1}.
    let mut b = vec![0.0; den.len() - num.len()];
    b.extend_from_slice(num);
    let mut h = vec![0.0; len];
    for k in 0..len {
        let mut acc = if k <= n { b[k] } else { 0.0 };
        for i in 1..=n.min(k) {
            acc -= den[i] * h[k - i];
        }
        h[k] = acc / den[0];
    }
    h
}

/// Sum of `|h_k|` for `k < len`.
pub fn tf_l1_truncated(num: &[f64], den: &[f64], len: usize) -> f64 {
    tf_impulse(num, den, len).iter().map(|v| v.abs()).sum()
}

/// Direct-form difference-equation filter
/// `a0 y_k = Σ b_i u_{k-i} - Σ_{i≥1} a_i y_{k-i}`.
#[derive(Debug, Clone)]
pub struct TfFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    u_hist: Vec<f64>,
    y_hist: Vec<f64>,
}

impl TfFilter {
    pub fn new(num: &[f64], den: &[f64]) -> Self {
        assert!(num.len() <= den.len());
        let mut b = vec![0.0; den.len() - num.len()];
        b.extend_from_slice(num);
        let n = den.len();
        Self {
            b,
            a: den.to_vec(),
            u_hist: vec![0.0; n],
            y_hist: vec![0.0; n],
        }
    }

    /// Output at the current sample excluding the `b0 u_k` term.
    pub fn predict(&self) -> f64 {
        let n = self.a.len() - 1;
        let mut acc = 0.0;
        for i in 1..=n {
            acc += self.b[i] * self.u_hist[i - 1] - self.a[i] * self.y_hist[i - 1];
        }
        acc / self.a[0]
    }

    /// Feeds `u_k`, returns `y_k`.
    pub fn step(&mut self, u: f64) -> f64 {
        let y = self.predict() + self.b[0] * u / self.a[0];
        self.u_hist.rotate_right(1);
        self.u_hist[0] = u;
        self.y_hist.rotate_right(1);
        self.y_hist[0] = y;
        y
    }

    pub fn filter(num: &[f64], den: &[f64], u: &[f64]) -> Vec<f64> {
        let mut f = Self::new(num, den);
        u.iter().map(|&x| f.step(x)).collect()
    }
}

/// Coefficients of one SISO transfer function.
#[derive(Debug, Clone)]
pub struct Tf {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl Tf {
    pub fn new(num: &[f64], den: &[f64]) -> Self {
        Self {
            num: num.to_vec(),
            den: den.to_vec(),
        }
    }
}

/// Transfer function of a SISO realization: the denominator is
/// `det(zI - A)` (Faddeev-LeVerrier) and the numerator follows from the
/// Markov parameters.
pub fn state_space_to_tf(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> Tf {
    let n = a.nrows();
    let mut den = vec![1.0];
    let mut m = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        let am = a * &m;
        let coef = -am.trace() / k as f64;
        den.push(coef);
        m = am + DMatrix::identity(n, n) * coef;
    }
    let h: Vec<f64> = markov(a, b, c, d, n + 1).iter().map(|x| x[(0, 0)]).collect();
    let num: Vec<f64> = (0..=n)
        .map(|k| (0..=k).map(|i| den[i] * h[k - i]).sum())
        .collect();
    Tf::new(&num, &den)
}

/// Output `y` of the loop `y = (Ĝ + Δ) u + d`, `u = K (r - y)` with `r ≡ 0`,
/// simulated with separate difference equations. `Ĝ` and `Δ` must be
/// strictly proper; `delta = None` means `Δ = 0`.
pub fn direct_loop_output(g_hat: &Tf, delta: Option<&Tf>, k: &Tf, d: &[f64]) -> Vec<f64> {
    let mut g = TfFilter::new(&g_hat.num, &g_hat.den);
    let mut dl = delta.map(|t| TfFilter::new(&t.num, &t.den));
    let mut kf = TfFilter::new(&k.num, &k.den);
    let mut y = Vec::with_capacity(d.len());
    for &dk in d {
        let v = g.predict();
        let q = dl.as_ref().map_or(0.0, |f| f.predict());
        let yk = v + q + dk;
        let u = kf.step(-yk);
        g.step(u);
        if let Some(f) = dl.as_mut() {
            f.step(u);
        }
        y.push(yk);
    }
    y
}

/// Markov parameters `D, CB, CAB, ...` of a state-space system.
pub fn markov(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    len: usize,
) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    out.push(d.clone());
    let mut ca = c.clone();
    for _ in 1..len {
        out.push(&ca * b);
        ca = &ca * a;
    }
    out
}

/// Stacked window `[ŵ_t; ŵ_{t-1}; ...; ŵ_{t-H+1}]` with zeros before time 0.
pub fn window_at(w: &[DVector<f64>], t: usize, h: usize, n_w: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n_w * h);
    for j in 0..h {
        if j <= t {
            v.rows_mut(j * n_w, n_w).copy_from(&w[t - j]);
        }
    }
    v
}

/// Regressor `Φ_t` for `ζ = vec(Θᵀ)` built from the full convolution
/// `Φ_t = Σ_j h_j · (I ⊗ window_{t-j}ᵀ)`, where `h_j` are the Markov
/// parameters of the `r → y` model.
pub fn dense_regressor(markov: &[DMatrix<f64>], w: &[DVector<f64>], t: usize, h: usize) -> DMatrix<f64> {
    let n_y = markov[0].nrows();
    let n_r = markov[0].ncols();
    let n_w = w[0].len();
    let l = n_w * h;
    let mut phi = DMatrix::zeros(n_y, n_r * l);
    for j in 0..=t {
        let win = window_at(w, t - j, h, n_w);
        let hj = &markov[j];
        for i in 0..n_r {
            for c in 0..l {
                for row in 0..n_y {
                    phi[(row, i * l + c)] += hj[(row, i)] * win[c];
                }
            }
        }
    }
    phi
}

/// Minimizer of `Σ_s ρ^{n-1-s} ‖Φ_s ζ + ŵ_s‖² + (ρ^n / λ) ‖ζ‖²` over the
/// `n` samples given.
pub fn batch_least_squares(phis: &[DMatrix<f64>], ws: &[DVector<f64>], lambda: f64, rho: f64) -> DVector<f64> {
    let p = phis[0].ncols();
    let n = phis.len();
    let mut normal = DMatrix::identity(p, p) * (rho.powi(n as i32) / lambda);
    let mut rhs = DVector::zeros(p);
    for (s, (phi, w)) in phis.iter().zip(ws).enumerate() {
        let weight = rho.powi((n - 1 - s) as i32);
        normal += phi.transpose() * phi * weight;
        rhs -= phi.transpose() * w * weight;
    }
    normal.lu().solve(&rhs).expect("regularized normal equations are nonsingular")
}

/// Largest `β` for which some `s1 > 0` meets
/// `s1 (h11 - 1) + β h12 < 0` and `s1 h21 + β h22 < 1`, found by a
/// logarithmic grid over `s1` followed by golden-section refinement.
/// Returns 0 if no feasible point was found.
pub fn beta_star_search(h11: f64, h12: f64, h21: f64, h22: f64) -> f64 {
    let best_beta = |s1: f64| -> f64 {
        let a = if h12 > 0.0 { s1 * (1.0 - h11) / h12 } else { f64::INFINITY };
        let b = if h22 > 0.0 { (1.0 - s1 * h21) / h22 } else if s1 * h21 < 1.0 { f64::INFINITY } else { 0.0 };
        a.min(b).max(0.0)
    };
    if h11 >= 1.0 {
        return 0.0;
    }
    let (mut best_s, mut best) = (0.0, 0.0);
    let steps = 4000;
    for i in 0..=steps {
        let s1 = 10f64.powf(-12.0 + 24.0 * i as f64 / steps as f64);
        let b = best_beta(s1);
        if b > best {
            best = b;
            best_s = s1;
        }
    }
    if best == 0.0 || best.is_infinite() {
        return best;
    }
    let ratio = 10f64.powf(24.0 / steps as f64);
    let (mut lo, mut hi) = (best_s / ratio, best_s * ratio);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if best_beta(m1) < best_beta(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best.max(best_beta(0.5 * (lo + hi)))
}

/// Minimum of `max_i |r_i - r°_i|` over coefficient rows with `‖θ_i‖₁ ≤ β`,
/// by enumerating a grid on each row. Only practical for windows of length
/// ≤ 3. The grid error is at most `β ‖window‖_∞ / steps` per entry.
pub fn safety_brute_force(r_circ: &[f64], window: &[f64], beta: f64, steps: usize) -> f64 {
    let l = window.len();
    assert!(l <= 3, "brute force limited to short windows");
    let mut grid: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..l {
        let mut next = Vec::new();
        for p in &grid {
            let used: f64 = p.iter().map(|v: &f64| v.abs()).sum();
            for s in 0..=2 * steps {
                let v = beta * (s as f64 / steps as f64 - 1.0);
                if used + v.abs() <= beta * (1.0 + 1e-12) {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
        }
        grid = next;
    }
    let mut worst: f64 = 0.0;
    for &rc in r_circ {
        let mut best = f64::INFINITY;
        for theta in &grid {
            let r: f64 = theta.iter().zip(window).map(|(a, b)| a * b).sum();
            best = best.min((r - rc).abs());
        }
        worst = worst.max(best);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_of_first_order_lag() {
        let h = tf_impulse(&[1.0], &[1.0, -0.5], 4);
        assert_eq!(h, vec![0.0, 1.0, 0.5, 0.25]);
    }

    #[test]
    fn filter_matches_impulse() {
        let num = [0.3, 0.1];
        let den = [1.0, -0.4, 0.1];
        let mut u = vec![0.0; 20];
        u[0] = 1.0;
        let y = TfFilter::filter(&num, &den, &u);
        let h = tf_impulse(&num, &den, 20);
        for (a, b) in y.iter().zip(&h) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn realization_to_tf() {
        // Controllable canonical form of (0.3z + 0.1)/(z^2 - 0.4z + 0.1).
        let a = DMatrix::from_row_slice(2, 2, &[0.4, -0.1, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let c = DMatrix::from_row_slice(1, 2, &[0.3, 0.1]);
        let d = DMatrix::zeros(1, 1);
        let tf = state_space_to_tf(&a, &b, &c, &d);
        let expect_den = [1.0, -0.4, 0.1];
        let expect_num = [0.0, 0.3, 0.1];
        for i in 0..3 {
            assert!((tf.den[i] - expect_den[i]).abs() < 1e-15);
            assert!((tf.num[i] - expect_num[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_search_simple_case() {
        // h12 = 0: only the second constraint binds as s1 -> 0.
        let b = beta_star_search(0.5, 0.0, 1.0, 0.5);
        assert!((b - 2.0).abs() < 1e-6);
    }

    #[test]
    fn brute_force_zero_beta() {
        let c = safety_brute_force(&[0.7, -0.2], &[1.0, 2.0], 0.0, 10);
        assert!((c - 0.7).abs() < 1e-15);
    }
}

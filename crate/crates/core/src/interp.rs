//! Local polynomial interpolation of sampled data with derivatives.
//!
//! A sliding 9-point Newton-form interpolant (degree 8) gives the profile and
//! its first four derivatives; repeated finite differencing is never used.

/// Interpolant over strictly increasing sample sites.
#[derive(Debug, Clone)]
pub struct LocalPolyInterp {
    xs: Vec<f64>,
    ys: Vec<f64>,
    window: usize,
}

impl LocalPolyInterp {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, window: usize) -> Self {
        assert!(xs.len() == ys.len());
        assert!(xs.len() >= window);
        assert!(window >= 2);
        LocalPolyInterp { xs, ys, window }
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    fn window_start(&self, x: f64) -> usize {
        // index of the first sample of the centered window
        let n = self.xs.len();
        let i = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).expect("finite sample"))
        {
            Ok(i) => i,
            Err(i) => i,
        };
        let half = self.window / 2;
        i.saturating_sub(half).min(n - self.window)
    }

    /// Value and derivatives up to order `m` (inclusive) at `x`.
    /// Points outside the sampled range evaluate to zero.
    pub fn eval_derivs(&self, x: f64, m: usize) -> Vec<f64> {
        if x < self.x_min() || x > self.x_max() {
            return vec![0.0; m + 1];
        }
        let s = self.window_start(x);
        let xs = &self.xs[s..s + self.window];
        let ys = &self.ys[s..s + self.window];
        let coeffs = newton_coeffs(xs, ys);
        eval_newton_derivs(&coeffs, xs, x, m)
    }
}

/// Newton divided-difference coefficients for the interpolating polynomial.
fn newton_coeffs(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut c = ys.to_vec();
    for j in 1..n {
        for i in (j..n).rev() {
            c[i] = (c[i] - c[i - 1]) / (xs[i] - xs[i - j]);
        }
    }
    c
}

/// Evaluate a Newton-form polynomial and derivatives 0..=m at x.
fn eval_newton_derivs(coeffs: &[f64], xs: &[f64], x: f64, m: usize) -> Vec<f64> {
    let n = coeffs.len();
    // v[k] holds the k-th derivative of the partial Horner polynomial.
    let mut v = vec![0.0; m + 1];
    v[0] = coeffs[n - 1];
    for j in (0..n - 1).rev() {
        let dx = x - xs[j];
        for k in (1..=m).rev() {
            v[k] = v[k] * dx + k as f64 * v[k - 1];
        }
        v[0] = v[0] * dx + coeffs[j];
    }
    v
}

//! Wave profiles: the Karlsson-Hook soliton, analytic test profiles, and
//! profiles sampled from files, all exposing derivatives up to fourth order
//! and a residual check against the standing wave equation
//! phi'''' + sigma2 phi'' + beta phi - phi^(2p+1) = 0.

use crate::error::{CoreError, Result};
use crate::interp::LocalPolyInterp;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Frequency and dispersion parameters of the standing wave.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Parameters {
    /// Frequency parameter beta.
    pub beta: f64,
    /// Sign of the quadratic dispersion: -1, +1, or 0 for pure quartic.
    pub sigma2: i8,
    /// Nonlinearity exponent p (cubic case is p = 1).
    pub power_p: u32,
}

impl Parameters {
    pub fn new(beta: f64, sigma2: i8, power_p: u32) -> Result<Self> {
        let p = Parameters {
            beta,
            sigma2,
            power_p,
        };
        p.validate()?;
        Ok(p)
    }

    /// Hyperbolicity of the origin of the standing-wave system:
    /// sigma2 = -1 needs beta > 0 with beta != 1/4, sigma2 = +1 needs
    /// beta > 1/4, and the pure quartic case needs beta > 0.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 == -1 || self.sigma2 == 0 || self.sigma2 == 1) {
            return Err(CoreError::InvalidParameters(format!(
                "sigma2 must be -1, 0 or +1, got {}",
                self.sigma2
            )));
        }
        if self.power_p == 0 {
            return Err(CoreError::InvalidParameters(
                "power_p must be a positive integer".into(),
            ));
        }
        if !self.beta.is_finite() {
            return Err(CoreError::InvalidParameters("beta must be finite".into()));
        }
        match self.sigma2 {
            -1 => {
                if self.beta <= 0.0 {
                    return Err(CoreError::InvalidParameters(
                        "sigma2 = -1 requires beta > 0".into(),
                    ));
                }
                if (self.beta - 0.25).abs() < 1e-12 {
                    return Err(CoreError::InvalidParameters(
                        "sigma2 = -1 requires beta != 1/4 (coincident spatial rates)".into(),
                    ));
                }
            }
            1 => {
                if self.beta <= 0.25 {
                    return Err(CoreError::InvalidParameters(
                        "sigma2 = +1 requires beta > 1/4".into(),
                    ));
                }
            }
            _ => {
                if self.beta <= 0.0 {
                    return Err(CoreError::InvalidParameters(
                        "sigma2 = 0 requires beta > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn sigma2_f(&self) -> f64 {
        self.sigma2 as f64
    }
}

/// Where a profile came from; drives validation policy and defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    KarlssonHook,
    Analytic,
    Sampled,
}

type EvalFn = dyn Fn(f64) -> [f64; 5] + Send + Sync;
type HigherFn = dyn Fn(f64, usize) -> f64 + Send + Sync;

/// A soliton profile phi with derivatives up to fourth order.
///
/// Profiles are immutable after construction and cheap to clone; they can be
/// shared freely across threads.
#[derive(Clone)]
pub struct WaveProfile {
    pub params: Parameters,
    /// Half-width L of the numerical support: |phi| <= decay_tol for |x| >= L.
    pub support_halfwidth: f64,
    pub decay_tol: f64,
    source: ProfileSource,
    eval: Arc<EvalFn>,
    /// Optional exact derivatives of order >= 5; when absent, higher
    /// derivatives come from the standing-wave-equation closure.
    higher: Option<Arc<HigherFn>>,
    /// True if the decay invariant could not be met within the sampled range.
    decay_satisfied: bool,
}

impl fmt::Debug for WaveProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveProfile")
            .field("params", &self.params)
            .field("support_halfwidth", &self.support_halfwidth)
            .field("source", &self.source)
            .finish()
    }
}

pub const DEFAULT_DECAY_TOL: f64 = 1e-12;

impl WaveProfile {
    /// Exact Karlsson-Hook soliton phi(x) = sqrt(3/10) sech^2(x / (2 sqrt 5)),
    /// a standing wave at beta = 4/25, sigma2 = -1, p = 1.
    pub fn karlsson_hook() -> WaveProfile {
        let amp = (3.0_f64 / 10.0).sqrt();
        let c = 2.0 * 5.0_f64.sqrt();
        let eval = move |x: f64| -> [f64; 5] {
            let u = x / c;
            let s = 1.0 / u.cosh();
            let t = u.tanh();
            let s2 = s * s;
            let f0 = s2;
            let f1 = -2.0 * s2 * t;
            let f2 = 4.0 * s2 * t * t - 2.0 * s2 * s2;
            let f3 = -8.0 * s2 * t * t * t + 16.0 * s2 * s2 * t;
            let f4 = 16.0 * s2 * t.powi(4) - 88.0 * s2 * s2 * t * t + 16.0 * s2 * s2 * s2;
            [
                amp * f0,
                amp * f1 / c,
                amp * f2 / (c * c),
                amp * f3 / (c * c * c),
                amp * f4 / (c * c * c * c),
            ]
        };
        // smallest L with amp * sech^2(L/c) = decay_tol
        let tol = DEFAULT_DECAY_TOL;
        let support = {
            // sech^2(u) ~ 4 e^{-2u}; solve amp * sech^2(L/c) = tol by bisection
            let f = |l: f64| amp / (l / c).cosh().powi(2) - tol;
            let (mut lo, mut hi) = (1.0, 200.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        WaveProfile {
            params: Parameters {
                beta: 4.0 / 25.0,
                sigma2: -1,
                power_p: 1,
            },
            support_halfwidth: support,
            decay_tol: tol,
            source: ProfileSource::KarlssonHook,
            eval: Arc::new(eval),
            higher: None,
            decay_satisfied: true,
        }
    }

    /// Analytic profile from a closure returning (phi, phi', phi'', phi''', phi'''').
    pub fn from_fn<F>(params: Parameters, support_halfwidth: f64, eval: F) -> Result<WaveProfile>
    where
        F: Fn(f64) -> [f64; 5] + Send + Sync + 'static,
    {
        params.validate()?;
        Ok(WaveProfile {
            params,
            support_halfwidth,
            decay_tol: DEFAULT_DECAY_TOL,
            source: ProfileSource::Analytic,
            eval: Arc::new(eval),
            higher: None,
            decay_satisfied: true,
        })
    }

    /// Analytic profile that also supplies exact derivatives of order >= 5
    /// (used instead of the standing-wave closure).
    pub fn from_fn_with_higher<F, H>(
        params: Parameters,
        support_halfwidth: f64,
        eval: F,
        higher: H,
    ) -> Result<WaveProfile>
    where
        F: Fn(f64) -> [f64; 5] + Send + Sync + 'static,
        H: Fn(f64, usize) -> f64 + Send + Sync + 'static,
    {
        let mut p = WaveProfile::from_fn(params, support_halfwidth, eval)?;
        p.higher = Some(Arc::new(higher));
        Ok(p)
    }

    /// Load a sampled profile from a two-column text file (x, phi).
    ///
    /// Lines starting with '#' are comments; columns are separated by
    /// whitespace or commas. Derivatives come from a sliding 9-point local
    /// polynomial interpolant; the residual against the standing wave
    /// equation is reported, not enforced.
    pub fn load_sampled(path: &Path, params: Parameters) -> Result<WaveProfile> {
        params.validate()?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::ProfileParse(format!("{}: {e}", path.display())))?;
        Self::from_sampled_text(&text, params)
    }

    /// Parse sampled-profile text (the file format of `load_sampled`).
    pub fn from_sampled_text(text: &str, params: Parameters) -> Result<WaveProfile> {
        params.validate()?;
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(CoreError::ProfileParse(format!(
                    "line {}: expected two columns, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let x: f64 = fields[0].parse().map_err(|_| {
                CoreError::ProfileParse(format!("line {}: bad x value {:?}", lineno + 1, fields[0]))
            })?;
            let y: f64 = fields[1].parse().map_err(|_| {
                CoreError::ProfileParse(format!("line {}: bad value {:?}", lineno + 1, fields[1]))
            })?;
            if !x.is_finite() || !y.is_finite() {
                return Err(CoreError::ProfileParse(format!(
                    "line {}: non-finite entry",
                    lineno + 1
                )));
            }
            xs.push(x);
            ys.push(y);
        }
        const WINDOW: usize = 9;
        if xs.len() < 2 * WINDOW {
            return Err(CoreError::ProfileValidation(format!(
                "insufficient support: {} samples, need at least {}",
                xs.len(),
                2 * WINDOW
            )));
        }
        for i in 1..xs.len() {
            if xs[i] <= xs[i - 1] {
                return Err(CoreError::ProfileValidation(format!(
                    "sample abscissae must be strictly increasing (row {})",
                    i + 1
                )));
            }
        }
        let tol = DEFAULT_DECAY_TOL;
        // smallest L with |phi| < tol outside, capped at the sampled interval
        let cap = xs[0].abs().min(xs.last().unwrap().abs());
        let mut support = 0.0_f64;
        let mut satisfied = true;
        for (x, y) in xs.iter().zip(ys.iter()) {
            if y.abs() >= tol {
                support = support.max(x.abs());
            }
        }
        if support >= cap {
            support = cap;
            satisfied = false;
        }
        if support == 0.0 {
            support = cap;
        }
        let interp = LocalPolyInterp::new(xs, ys, WINDOW);
        let eval = move |x: f64| -> [f64; 5] {
            let d = interp.eval_derivs(x, 4);
            [d[0], d[1], d[2], d[3], d[4]]
        };
        Ok(WaveProfile {
            params,
            support_halfwidth: support,
            decay_tol: tol,
            source: ProfileSource::Sampled,
            eval: Arc::new(eval),
            higher: None,
            decay_satisfied: satisfied,
        })
    }

    pub fn source(&self) -> ProfileSource {
        self.source
    }

    pub fn is_sampled(&self) -> bool {
        self.source == ProfileSource::Sampled
    }

    pub fn decay_satisfied(&self) -> bool {
        self.decay_satisfied
    }

    /// phi and its first four derivatives at x.
    pub fn derivs(&self, x: f64) -> [f64; 5] {
        (self.eval)(x)
    }

    pub fn phi(&self, x: f64) -> f64 {
        (self.eval)(x)[0]
    }

    /// phi^{(k)} for k = 0..=max_order. Orders above four use the supplied
    /// higher-derivative closure if present, otherwise the standing wave
    /// equation phi'''' = phi^(2p+1) - sigma2 phi'' - beta phi is
    /// differentiated repeatedly (valid for genuine standing waves).
    pub fn derivs_to(&self, x: f64, max_order: usize) -> Vec<f64> {
        let base = self.derivs(x);
        let mut d: Vec<f64> = base.to_vec();
        if max_order <= 4 {
            d.truncate(max_order + 1);
            return d;
        }
        if let Some(h) = &self.higher {
            for k in 5..=max_order {
                d.push(h(x, k));
            }
            return d;
        }
        let s2 = self.params.sigma2_f();
        let beta = self.params.beta;
        let q = (2 * self.params.power_p + 1) as usize;
        for k in 5..=max_order {
            // phi^{(k)} = (phi^{2p+1})^{(k-4)} - sigma2 phi^{(k-2)} - beta phi^{(k-4)}
            let j = k - 4;
            let pow_j = derivative_of_power(&d, q, j);
            d.push(pow_j - s2 * d[k - 2] - beta * d[k - 4]);
        }
        d
    }

    /// Residual of the standing wave equation at x.
    pub fn residual_at(&self, x: f64) -> f64 {
        let d = self.derivs(x);
        let p = self.params.power_p;
        d[4] + self.params.sigma2_f() * d[2] + self.params.beta * d[0]
            - d[0].powi(2 * p as i32 + 1)
    }

    /// Maximum modulus of phi over the support (coarse grid scan).
    pub fn max_abs_phi(&self) -> f64 {
        let l = self.support_halfwidth;
        let n = 2001;
        (0..n)
            .map(|i| {
                let x = -l + 2.0 * l * (i as f64) / ((n - 1) as f64);
                self.phi(x).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// j-th derivative of phi^q given the derivative sequence d of phi
/// (d[k] = phi^{(k)}), via iterated Leibniz products.
fn derivative_of_power(d: &[f64], q: usize, j: usize) -> f64 {
    derivative_sequence_of_power(d, q, j)[j]
}

/// Derivative sequence (orders 0..=m) of phi^q from the derivative sequence
/// of phi.
pub(crate) fn derivative_sequence_of_power(d: &[f64], q: usize, m: usize) -> Vec<f64> {
    if q == 0 {
        let mut s = vec![0.0; m + 1];
        s[0] = 1.0;
        return s;
    }
    let mut seq: Vec<f64> = d[..=m.min(d.len() - 1)].to_vec();
    seq.resize(m + 1, 0.0);
    let base = seq.clone();
    for _ in 1..q {
        seq = leibniz_product(&seq, &base, m);
    }
    seq
}

/// Derivative sequence of a product: c_k = sum_j C(k,j) a_j b_{k-j}.
fn leibniz_product(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m + 1];
    for k in 0..=m {
        let mut acc = 0.0;
        for j in 0..=k {
            acc += binomial(k, j) * a[j] * b[k - j];
        }
        c[k] = acc;
    }
    c
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut num = 1.0;
    let mut den = 1.0;
    for i in 0..k {
        num *= (n - i) as f64;
        den *= (i + 1) as f64;
    }
    num / den
}

/// Maximum residual of the standing wave equation over a grid.
pub fn residual_norm(profile: &WaveProfile, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&x| profile.residual_at(x).abs())
        .fold(0.0, f64::max)
}

/// Convenience: the Karlsson-Hook profile.
pub fn kh_profile() -> WaveProfile {
    WaveProfile::karlsson_hook()
}

/// Convenience: load a sampled profile from a file.
pub fn load_sampled_profile(path: &Path, params: Parameters) -> Result<WaveProfile> {
    WaveProfile::load_sampled(path, params)
}

/// Uniform grid helper.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| a + (b - a) * (i as f64) / ((n - 1) as f64))
        .collect()
}

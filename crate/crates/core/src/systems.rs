//! First-order infinitesimally symplectic systems for the operators L+, L-
//! and the full linearization N, with their asymptotic data: spatial
//! eigenvalues, essential spectra, and real stable/unstable frames.

use crate::error::{CoreError, Result};
use crate::profiles::{derivative_sequence_of_power, Parameters, WaveProfile};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Which eigenvalue problem a first-order system encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    LPlus,
    LMinus,
    /// The full linearization N = (0, -L-; L+, 0).
    NOperator,
}

impl SystemKind {
    /// Half-dimension n: frames are 2n x n.
    pub fn half_dim(&self) -> usize {
        match self {
            SystemKind::LPlus | SystemKind::LMinus => 2,
            SystemKind::NOperator => 4,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.half_dim()
    }

    pub fn label(&self) -> &'static str {
        match self {
            SystemKind::LPlus => "L+",
            SystemKind::LMinus => "L-",
            SystemKind::NOperator => "N",
        }
    }
}

/// Coefficient-matrix generator A(x; lambda) = [[0, B], [C(x; lambda), 0]].
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub kind: SystemKind,
    pub profile: WaveProfile,
}

impl LinearSystem {
    pub fn new(kind: SystemKind, profile: WaveProfile) -> Self {
        LinearSystem { kind, profile }
    }

    pub fn params(&self) -> Parameters {
        self.profile.params
    }

    /// alpha(x) = (2p+1) phi^{2p} - beta + sigma2^2 (the L+ potential entry).
    pub fn alpha(&self, x: f64) -> f64 {
        let pr = &self.profile.params;
        let s2 = pr.sigma2_f();
        let phi = self.profile.phi(x);
        (2.0 * pr.power_p as f64 + 1.0) * phi.powi(2 * pr.power_p as i32) - pr.beta + s2 * s2
    }

    /// eta(x) = -phi^{2p} + beta - sigma2^2 (the L- potential entry).
    pub fn eta(&self, x: f64) -> f64 {
        let pr = &self.profile.params;
        let s2 = pr.sigma2_f();
        let phi = self.profile.phi(x);
        -phi.powi(2 * pr.power_p as i32) + pr.beta - s2 * s2
    }

    /// Constant B block (n x n, symmetric).
    pub fn b_block(&self) -> DMatrix<f64> {
        let s2 = self.profile.params.sigma2_f();
        match self.kind {
            SystemKind::LPlus => DMatrix::from_row_slice(2, 2, &[s2, 1.0, 1.0, 0.0]),
            SystemKind::LMinus => DMatrix::from_row_slice(2, 2, &[-s2, 1.0, 1.0, 0.0]),
            SystemKind::NOperator => DMatrix::from_row_slice(
                4,
                4,
                &[
                    s2, 0.0, 1.0, 0.0, //
                    0.0, -s2, 0.0, 1.0, //
                    1.0, 0.0, 0.0, 0.0, //
                    0.0, 1.0, 0.0, 0.0,
                ],
            ),
        }
    }

    /// C(x; lambda) block (n x n, symmetric).
    pub fn c_block(&self, x: f64, lambda: f64) -> DMatrix<f64> {
        let s2 = self.profile.params.sigma2_f();
        match self.kind {
            SystemKind::LPlus => {
                DMatrix::from_row_slice(2, 2, &[1.0, -s2, -s2, self.alpha(x) - lambda])
            }
            SystemKind::LMinus => {
                DMatrix::from_row_slice(2, 2, &[-1.0, -s2, -s2, self.eta(x) + lambda])
            }
            SystemKind::NOperator => DMatrix::from_row_slice(
                4,
                4,
                &[
                    1.0, 0.0, -s2, 0.0, //
                    0.0, -1.0, 0.0, -s2, //
                    -s2, 0.0, self.alpha(x), lambda, //
                    0.0, -s2, lambda, self.eta(x),
                ],
            ),
        }
    }

    /// x-derivatives C^{(j)}(x; lambda) for j = 0..=max_order.
    ///
    /// Only the potential entries depend on x, through phi^{2p}.
    pub fn c_block_derivs(&self, x: f64, lambda: f64, max_order: usize) -> Vec<DMatrix<f64>> {
        let n = self.kind.half_dim();
        let pr = &self.profile.params;
        let p = pr.power_p as usize;
        let d = self.profile.derivs_to(x, max_order);
        // derivative sequence of phi^{2p}
        let pow = derivative_sequence_of_power(&d, 2 * p, max_order);
        let coef_plus = 2.0 * p as f64 + 1.0;
        let mut out = Vec::with_capacity(max_order + 1);
        out.push(self.c_block(x, lambda));
        for j in 1..=max_order {
            let mut m = DMatrix::zeros(n, n);
            match self.kind {
                SystemKind::LPlus => m[(1, 1)] = coef_plus * pow[j],
                SystemKind::LMinus => m[(1, 1)] = -pow[j],
                SystemKind::NOperator => {
                    m[(2, 2)] = coef_plus * pow[j];
                    m[(3, 3)] = -pow[j];
                }
            }
            out.push(m);
        }
        out
    }

    /// Full coefficient matrix A(x; lambda).
    pub fn a_matrix(&self, x: f64, lambda: f64) -> DMatrix<f64> {
        let n = self.kind.half_dim();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        a.view_mut((0, n), (n, n)).copy_from(&self.b_block());
        a.view_mut((n, 0), (n, n)).copy_from(&self.c_block(x, lambda));
        a
    }

    /// d/d lambda of A(x; lambda). Constant in x and lambda.
    pub fn a_lambda(&self) -> DMatrix<f64> {
        let n = self.kind.half_dim();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        match self.kind {
            SystemKind::LPlus => a[(n + 1, 1)] = -1.0,
            SystemKind::LMinus => a[(n + 1, 1)] = 1.0,
            SystemKind::NOperator => {
                a[(n + 2, 3)] = 1.0;
                a[(n + 3, 2)] = 1.0;
            }
        }
        a
    }
}

/// Essential spectrum descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EssentialSpectrum {
    /// (-inf, right_endpoint] on the real axis (L+ and L-).
    HalfLine { right_endpoint: f64 },
    /// (-i inf, -i gap] and [i gap, +i inf) on the imaginary axis (N).
    ImaginaryRays { gap_endpoint: f64 },
}

/// Global maximum of the dispersion curve -k^4 + sigma2 k^2 - beta.
pub fn dispersion_max(params: &Parameters) -> f64 {
    if params.sigma2 == 1 {
        0.25 - params.beta
    } else {
        -params.beta
    }
}

/// Essential spectrum of the chosen operator.
pub fn essential_spectrum(kind: SystemKind, params: &Parameters) -> EssentialSpectrum {
    let edge = dispersion_max(params);
    match kind {
        SystemKind::LPlus | SystemKind::LMinus => EssentialSpectrum::HalfLine {
            right_endpoint: edge,
        },
        SystemKind::NOperator => EssentialSpectrum::ImaginaryRays {
            gap_endpoint: -edge,
        },
    }
}

/// Spatial eigenvalues of the asymptotic matrix, sorted by (Re, Im).
///
/// For L+/L- these solve nu^4 + sigma2 nu^2 + (beta + lambda) = 0; for N the
/// eight roots come from the two branches nu^4 + sigma2 nu^2 + beta = -+ i lambda.
pub fn spatial_eigenvalues(
    kind: SystemKind,
    params: &Parameters,
    lambda: f64,
) -> Result<Vec<Complex64>> {
    params.validate()?;
    let mut roots: Vec<Complex64> = match kind {
        SystemKind::LPlus | SystemKind::LMinus => {
            let edge = dispersion_max(params);
            if lambda <= edge + 1e-12 {
                return Err(CoreError::InsideEssentialSpectrum { lambda, edge });
            }
            quartic_roots(params, Complex64::new(lambda, 0.0))
        }
        SystemKind::NOperator => {
            let mut r = quartic_roots(params, Complex64::new(0.0, lambda));
            r.extend(quartic_roots(params, Complex64::new(0.0, -lambda)));
            r
        }
    };
    let min_re = roots
        .iter()
        .map(|z| z.re.abs())
        .fold(f64::INFINITY, f64::min);
    if min_re < 1e-9 {
        return Err(CoreError::DegenerateAsymptotics {
            lambda,
            detail: "spatial eigenvalue on the imaginary axis (hyperbolicity lost)".into(),
        });
    }
    roots.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(roots)
}

/// Roots nu of nu^4 + sigma2 nu^2 + (beta + shift) = 0.
fn quartic_roots(params: &Parameters, shift: Complex64) -> Vec<Complex64> {
    let s2 = Complex64::new(params.sigma2_f(), 0.0);
    let c = Complex64::new(params.beta, 0.0) + shift;
    let disc = (s2 * s2 - 4.0 * c).sqrt();
    let m1 = (-s2 + disc) / 2.0;
    let m2 = (-s2 - disc) / 2.0;
    let r1 = m1.sqrt();
    let r2 = m2.sqrt();
    vec![r1, -r1, r2, -r2]
}

/// Asymptotic data at a given spectral parameter: spatial eigenvalues and the
/// real stable/unstable graph frames (I; S) and (I; U).
#[derive(Debug, Clone)]
pub struct AsymptoticData {
    pub lambda: f64,
    pub mus: Vec<Complex64>,
    pub stable: DMatrix<f64>,
    pub unstable: DMatrix<f64>,
}

pub fn asymptotic_data(kind: SystemKind, params: &Parameters, lambda: f64) -> Result<AsymptoticData> {
    Ok(AsymptoticData {
        lambda,
        mus: spatial_eigenvalues(kind, params, lambda)?,
        stable: stable_frame_block(kind, params, lambda)?,
        unstable: unstable_frame_block(kind, params, lambda)?,
    })
}

/// Eigenvector of the N system for (nu, branch b in {+i, -i}), ordered
/// (u1, v1, u2, v2, u3, v3, u4, v4); the v-part is b times the u-solution.
fn eigvec_n(s2: f64, nu: Complex64, b: Complex64) -> Vec<Complex64> {
    let u1 = nu * nu + s2;
    vec![
        u1,
        b * u1,
        Complex64::new(1.0, 0.0),
        -b,
        nu,
        -b * nu,
        nu * nu * nu,
        b * nu * nu * nu,
    ]
}

/// Assemble a real n x n graph block S with frame (I; S) from a set of
/// complex eigenvectors closed under conjugation: real and imaginary parts of
/// one member of each conjugate pair give a real basis of the span.
fn real_graph_from_eigvecs(cols: Vec<Vec<Complex64>>, lambda: f64) -> Result<DMatrix<f64>> {
    let n = cols.len();
    let dim2 = cols[0].len();
    debug_assert_eq!(dim2, 2 * n);
    let mut real_cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let imag_norm = |v: &Vec<Complex64>| v.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    let scale = cols
        .iter()
        .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    for i in 0..n {
        if used[i] {
            continue;
        }
        if imag_norm(&cols[i]) <= 1e-10 * scale {
            used[i] = true;
            real_cols.push(DVector::from_iterator(dim2, cols[i].iter().map(|z| z.re)));
        } else {
            // find the conjugate partner
            let mut partner = None;
            for j in (i + 1)..n {
                if used[j] {
                    continue;
                }
                let diff: f64 = cols[i]
                    .iter()
                    .zip(cols[j].iter())
                    .map(|(a, b)| (a - b.conj()).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                if diff <= 1e-8 * scale {
                    partner = Some(j);
                    break;
                }
            }
            let j = partner.ok_or_else(|| CoreError::DegenerateAsymptotics {
                lambda,
                detail: "complex eigenvector without conjugate partner".into(),
            })?;
            used[i] = true;
            used[j] = true;
            real_cols.push(DVector::from_iterator(dim2, cols[i].iter().map(|z| z.re)));
            real_cols.push(DVector::from_iterator(dim2, cols[i].iter().map(|z| z.im)));
        }
    }
    let mut f = DMatrix::zeros(dim2, n);
    for (j, c) in real_cols.iter().enumerate() {
        f.set_column(j, c);
    }
    let x = f.rows(0, n).into_owned();
    let y = f.rows(n, n).into_owned();
    let xinv = x
        .clone()
        .try_inverse()
        .ok_or_else(|| CoreError::DegenerateAsymptotics {
            lambda,
            detail: "upper frame block not invertible (graph form unavailable)".into(),
        })?;
    Ok(&y * &xinv)
}

fn frame_block(
    kind: SystemKind,
    params: &Parameters,
    lambda: f64,
    stable: bool,
) -> Result<DMatrix<f64>> {
    let s2 = params.sigma2_f();
    let cols: Vec<Vec<Complex64>> = match kind {
        SystemKind::LPlus | SystemKind::LMinus => {
            // The spectral parameter enters the scalar asymptotic systems
            // exactly as a shift of beta, so the closed form at beta + lambda
            // applies for every admissible lambda. It is smooth through the
            // spatial-rate coincidence 1 - 4(beta + lambda) = 0, where an
            // eigenvector basis would degenerate.
            spatial_eigenvalues(kind, params, lambda)?; // hyperbolicity gate
            let beta_eff = params.beta + lambda;
            let shifted = Parameters {
                beta: beta_eff,
                ..*params
            };
            let s = stable_block_at_zero_closed_form(kind, &shifted);
            return Ok(if stable { s } else { -s });
        }
        SystemKind::NOperator => {
            if lambda == 0.0 {
                // the system decouples; interleave the L+ and L- blocks
                let sp = frame_block(SystemKind::LPlus, params, 0.0, stable)?;
                let sm = frame_block(SystemKind::LMinus, params, 0.0, stable)?;
                return Ok(interleave_blocks(&sp, &sm));
            }
            let mut cols = Vec::with_capacity(4);
            for (b_im, shift) in [(1.0, Complex64::new(0.0, lambda)), (-1.0, Complex64::new(0.0, -lambda))] {
                let b = Complex64::new(0.0, b_im);
                for nu in quartic_roots(params, shift) {
                    if nu.re.abs() < 1e-9 {
                        return Err(CoreError::DegenerateAsymptotics {
                            lambda,
                            detail: "hyperbolicity lost".into(),
                        });
                    }
                    if if stable { nu.re < 0.0 } else { nu.re > 0.0 } {
                        cols.push(eigvec_n(s2, nu, b));
                    }
                }
            }
            cols
        }
    };
    let n = kind.half_dim();
    if cols.len() != n {
        return Err(CoreError::DegenerateAsymptotics {
            lambda,
            detail: format!("expected {n} stable/unstable directions, found {}", cols.len()),
        });
    }
    real_graph_from_eigvecs(cols, lambda)
}

/// Interleave two 2x2 graph blocks into the 4x4 N graph block, matching the
/// coordinate ordering (u1, v1, u2, v2 | u3, v3, u4, v4).
fn interleave_blocks(sp: &DMatrix<f64>, sm: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            s[(2 * i, 2 * j)] = sp[(i, j)];
            s[(2 * i + 1, 2 * j + 1)] = sm[(i, j)];
        }
    }
    s
}

/// Real symmetric graph block S(lambda) of the stable subspace, frame (I; S).
pub fn stable_frame_block(kind: SystemKind, params: &Parameters, lambda: f64) -> Result<DMatrix<f64>> {
    frame_block(kind, params, lambda, true)
}

/// Real symmetric graph block U(lambda) of the unstable subspace.
pub fn unstable_frame_block(kind: SystemKind, params: &Parameters, lambda: f64) -> Result<DMatrix<f64>> {
    frame_block(kind, params, lambda, false)
}

/// Closed form of S at lambda = 0 for the scalar problems:
/// S+- = [[-+1, sigma2 - sqrt(beta)], [sigma2 - sqrt(beta), +-(sigma2 sqrt(beta) + beta - sigma2^2)]]
/// divided by sqrt(2 sqrt(beta) - sigma2).
pub fn stable_block_at_zero_closed_form(kind: SystemKind, params: &Parameters) -> DMatrix<f64> {
    let s2 = params.sigma2_f();
    let rb = params.beta.sqrt();
    let e = (2.0 * rb - s2).sqrt();
    let off = s2 - rb;
    let dd = s2 * rb + params.beta - s2 * s2;
    let (d1, d2) = match kind {
        SystemKind::LPlus => (-1.0, dd),
        SystemKind::LMinus => (1.0, -dd),
        SystemKind::NOperator => panic!("closed form applies to the scalar systems"),
    };
    DMatrix::from_row_slice(2, 2, &[d1 / e, off / e, off / e, d2 / e])
}

/// The two kernel-generating solutions of the N system at lambda = 0,
/// evaluated at x: the phase mode built on phi and the translation mode
/// built on phi'.
pub fn n_kernel_solutions(profile: &WaveProfile, x: f64) -> (DVector<f64>, DVector<f64>) {
    let d = profile.derivs(x);
    let s2 = profile.params.sigma2_f();
    // (u, v) = (0, phi):
    let phase = DVector::from_column_slice(&[
        0.0,
        d[2] + s2 * d[0],
        0.0,
        -d[0],
        0.0,
        -d[1],
        0.0,
        d[3],
    ]);
    // (u, v) = (phi', 0):
    let translation = DVector::from_column_slice(&[
        d[3] + s2 * d[1],
        0.0,
        d[1],
        0.0,
        d[2],
        0.0,
        d[4],
        0.0,
    ]);
    (phase, translation)
}

/// Brute-force scan of the dispersion maximum over k in [-10, 10].
pub fn dispersion_max_scan(params: &Parameters, step: f64) -> f64 {
    let s2 = params.sigma2_f();
    let n = (20.0 / step).ceil() as usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let k = -10.0 + 20.0 * (i as f64) / (n as f64);
        best = best.max(-k.powi(4) + s2 * k * k - params.beta);
    }
    best
}

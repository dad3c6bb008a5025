//! Standard symplectic structure on R^{2n} and Lagrangian-frame utilities.

use crate::error::{CoreError, Result};
use nalgebra::{DMatrix, DVector};

/// Standard symplectic matrix J = [[0, -I], [I, 0]] on R^{2n}.
pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

/// Symplectic form omega(u, v) = <Ju, v>.
pub fn omega(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    if u.len() != v.len() || u.len() % 2 != 0 {
        return Err(CoreError::DimensionMismatch(format!(
            "omega needs equal even dimensions, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    let n = u.len() / 2;
    // <Ju, v> with J applied implicitly
    let mut acc = 0.0;
    for i in 0..n {
        acc += -u[n + i] * v[i] + u[i] * v[n + i];
    }
    Ok(acc)
}

/// omega(u, v) for vectors known to have matching even length.
pub(crate) fn omega_unchecked(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = u.len() / 2;
    let mut acc = 0.0;
    for i in 0..n {
        acc += -u[n + i] * v[i] + u[i] * v[n + i];
    }
    acc
}

/// A 2n x n frame for a Lagrangian subspace, split into its X and Y blocks,
/// with renormalization bookkeeping.
#[derive(Debug, Clone)]
pub struct LagrangianFrame {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// Accumulated log of positive rescaling determinants applied to the frame.
    pub log_scale: f64,
    /// Current position of the frame along its path (x or lambda).
    pub position: f64,
    pub lambda: f64,
}

impl LagrangianFrame {
    pub fn from_blocks(x: DMatrix<f64>, y: DMatrix<f64>) -> Self {
        assert_eq!(x.nrows(), y.nrows());
        assert_eq!(x.ncols(), y.ncols());
        LagrangianFrame {
            x,
            y,
            log_scale: 0.0,
            position: 0.0,
            lambda: 0.0,
        }
    }

    /// Graph frame (I; S) for a symmetric block S.
    pub fn graph(s: &DMatrix<f64>) -> Self {
        let n = s.nrows();
        LagrangianFrame::from_blocks(DMatrix::identity(n, n), s.clone())
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let n = m.nrows() / 2;
        LagrangianFrame::from_blocks(m.rows(0, n).into_owned(), m.rows(n, n).into_owned())
    }

    pub fn half_dim(&self) -> usize {
        self.x.nrows()
    }

    /// Stacked 2n x n matrix (X; Y).
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.x.nrows();
        let m = self.x.ncols();
        let mut z = DMatrix::zeros(2 * n, m);
        z.rows_mut(0, n).copy_from(&self.x);
        z.rows_mut(n, n).copy_from(&self.y);
        z
    }

    /// || X^T Y - Y^T X || / ||(X;Y)||^2, the relative Lagrangian defect.
    pub fn lagrangian_defect(&self) -> f64 {
        let d = &self.x.transpose() * &self.y - &self.y.transpose() * &self.x;
        let scale = self.x.norm_squared() + self.y.norm_squared();
        if scale == 0.0 {
            0.0
        } else {
            d.norm() / scale
        }
    }
}

/// Dimension of the intersection of two column spans: the number of singular
/// values of [A | B] below tol * sigma_max.
pub fn intersection_dimension(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> usize {
    let m = concat_cols(a, b);
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return a.ncols().min(b.ncols());
    }
    sv.iter().filter(|&&s| s < tol * smax).count()
}

/// Intersection dimension together with an orthonormal ambient basis of the
/// intersection and its coefficients h with A h spanning the intersection.
pub fn intersection_basis(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: f64,
) -> (usize, DMatrix<f64>, DMatrix<f64>) {
    let m = concat_cols(a, b);
    let na = a.ncols();
    let svd = m.clone().svd(false, true);
    let sv = &svd.singular_values;
    let smax = sv.max().max(f64::MIN_POSITIVE);
    let vt = svd.v_t.expect("svd v_t");
    let total = sv.len();
    let mut h_cols: Vec<DVector<f64>> = Vec::new();
    for i in 0..total {
        if sv[i] < tol * smax {
            // null vector (h_a; h_b): columns of V for small singular values
            let hv = vt.row(i).transpose();
            h_cols.push(hv.rows(0, na).into_owned());
        }
    }
    let dim = h_cols.len();
    if dim == 0 {
        return (0, DMatrix::zeros(a.nrows(), 0), DMatrix::zeros(na, 0));
    }
    let mut h = DMatrix::zeros(na, dim);
    for (j, c) in h_cols.iter().enumerate() {
        h.set_column(j, c);
    }
    // Ambient basis W = A * h, orthonormalized with the coefficient transform
    // carried along so W = A * h_out holds for the returned h_out.
    let w = a * &h;
    let qr = w.clone().qr();
    let q = qr.q();
    let r = qr.r();
    // guard rank: columns of W should be independent
    let mut rinv_ok = true;
    for i in 0..dim {
        if r[(i, i)].abs() < 1e-12 * smax {
            rinv_ok = false;
        }
    }
    if !rinv_ok {
        // fall back to unnormalized basis
        return (dim, w, h);
    }
    let rinv = r
        .view((0, 0), (dim, dim))
        .into_owned()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::identity(dim, dim));
    (dim, q.columns(0, dim).into_owned(), &h * &rinv)
}

pub(crate) fn concat_cols(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

/// Thin QR with the triangular factor forced to a positive diagonal, so the
/// returned transform has positive determinant and the Grassmannian point is
/// unchanged. Returns (Q, R) with input = Q * R.
pub fn positive_qr(z: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = z.ncols();
    let qr = z.clone().qr();
    let mut q = qr.q().columns(0, m).into_owned();
    let mut r = qr.r().rows(0, m).into_owned();
    for i in 0..m {
        if r[(i, i)] == 0.0 {
            return Err(CoreError::Integration {
                x: f64::NAN,
                detail: "rank-deficient frame during renormalization".into(),
            });
        }
        if r[(i, i)] < 0.0 {
            for j in 0..m {
                r[(i, j)] = -r[(i, j)];
            }
            for k in 0..q.nrows() {
                q[(k, i)] = -q[(k, i)];
            }
        }
    }
    Ok((q, r))
}

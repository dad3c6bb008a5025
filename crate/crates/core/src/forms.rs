//! Higher-order crossing forms, partial signatures, and Maslov index
//! assembly for Lagrangian paths and pairs.
//!
//! At a crossing t0 of a path Lambda(t) with frame Z(t) against a reference
//! plane V, root-function chains h_0, ..., h_{k-1} satisfying
//! sum_j C(i,j) Z^{(i-j)}(t0) h_j in V for i < k produce the k-th order form
//! m^(k)(w0) = sum_j C(k,j) omega(Z^{(k-j)}(t0) h_j, w0) on the degeneracy
//! space W_k = ker m^(k-1). The per-order inertia (partial signatures) feeds
//! the Maslov index with distinct endpoint conventions.

use crate::error::{CoreError, Result};
use crate::integrate::quadrature_along_path;
use crate::profiles::binomial;
use crate::symplectic::omega_unchecked;
use crate::systems::LinearSystem;
use nalgebra::{DMatrix, DVector};

/// Independent variable of a crossing-form series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Variable {
    Space,
    Lambda,
}

/// Position of a crossing within its path, for the endpoint conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathPosition {
    Initial,
    Interior,
    Final,
}

/// One order of a crossing-form series.
#[derive(Debug, Clone)]
pub struct OrderData {
    pub order: usize,
    /// The form matrix restricted to (an orthonormalized basis of) W_k.
    pub matrix: DMatrix<f64>,
    /// Ambient representatives of the W_k basis (2n x d_k).
    pub basis: DMatrix<f64>,
    pub n_plus: usize,
    pub n_minus: usize,
}

impl OrderData {
    pub fn signature(&self) -> i64 {
        self.n_plus as i64 - self.n_minus as i64
    }
}

/// The ordered crossing-form data at one crossing.
#[derive(Debug, Clone)]
pub struct CrossingFormSeries {
    pub location: f64,
    pub variable: Variable,
    pub dim_w1: usize,
    pub orders: Vec<OrderData>,
    /// True when the per-order inertias account for the full intersection
    /// dimension (which analytic isolated crossings always achieve).
    pub closed: bool,
}

impl CrossingFormSeries {
    /// Total accounted inertia across orders.
    pub fn accounted(&self) -> usize {
        self.orders.iter().map(|o| o.n_plus + o.n_minus).sum()
    }

    pub fn n_plus_total(&self) -> usize {
        self.orders.iter().map(|o| o.n_plus).sum()
    }

    pub fn n_minus_total(&self) -> usize {
        self.orders.iter().map(|o| o.n_minus).sum()
    }

    /// Contribution to the Maslov index given the crossing's position.
    pub fn contribution(&self, position: PathPosition) -> MaslovContribution {
        let value = match position {
            PathPosition::Initial => -(self
                .orders
                .iter()
                .map(|o| o.n_minus as i64)
                .sum::<i64>()),
            PathPosition::Interior => self
                .orders
                .iter()
                .filter(|o| o.order % 2 == 1)
                .map(|o| o.signature())
                .sum(),
            PathPosition::Final => self
                .orders
                .iter()
                .map(|o| {
                    if o.order % 2 == 1 {
                        o.n_plus as i64
                    } else {
                        o.n_minus as i64
                    }
                })
                .sum(),
        };
        MaslovContribution { position, value }
    }
}

/// A single crossing's contribution to the Maslov index.
#[derive(Debug, Clone, Copy)]
pub struct MaslovContribution {
    pub position: PathPosition,
    pub value: i64,
}

/// Options for the series computation.
#[derive(Debug, Clone, Copy)]
pub struct SeriesOpts {
    pub max_order: usize,
    /// Relative kernel tolerance for rank decisions.
    pub tol: f64,
}

impl Default for SeriesOpts {
    fn default() -> Self {
        SeriesOpts {
            max_order: 9,
            tol: 1e-8,
        }
    }
}

/// Signature counts of a symmetric matrix: eigenvalues above tol * ||form||
/// count as positive, below -tol * ||form|| as negative; the rest as kernel.
pub fn partial_signatures(form: &DMatrix<f64>, tol: f64) -> (usize, usize, i64) {
    let sym = 0.5 * (form + form.transpose());
    let eig = sym.symmetric_eigenvalues();
    let scale = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let thr = tol * scale;
    let np = eig.iter().filter(|&&e| e > thr).count();
    let nm = eig.iter().filter(|&&e| e < -thr).count();
    (np, nm, np as i64 - nm as i64)
}

fn signatures_with_scale(form: &DMatrix<f64>, tol: f64, abs_scale: f64) -> (usize, usize) {
    let sym = 0.5 * (form + form.transpose());
    let eig = sym.symmetric_eigenvalues();
    let rel = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let thr = tol * rel.max(abs_scale);
    let np = eig.iter().filter(|&&e| e > thr).count();
    let nm = eig.iter().filter(|&&e| e < -thr).count();
    (np, nm)
}

fn kernel_basis(form: &DMatrix<f64>, tol: f64, abs_scale: f64) -> DMatrix<f64> {
    let sym = 0.5 * (form + form.transpose());
    let se = sym.clone().symmetric_eigen();
    let rel = se.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let thr = tol * rel.max(abs_scale);
    let keep: Vec<usize> = (0..se.eigenvalues.len())
        .filter(|&i| se.eigenvalues[i].abs() <= thr)
        .collect();
    let mut k = DMatrix::zeros(form.nrows(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        k.set_column(j, &se.eigenvectors.column(i));
    }
    k
}

/// Derivatives Z^{(k)} of a frame solving Z' = A(x; lambda) Z, computed from
/// the ODE recursion with exact coefficient derivatives (no finite
/// differencing of the path).
pub fn frame_derivatives(
    system: &LinearSystem,
    lambda: f64,
    x0: f64,
    z0: &DMatrix<f64>,
    max_order: usize,
) -> Vec<DMatrix<f64>> {
    let n = system.kind.half_dim();
    let cders = system.c_block_derivs(x0, lambda, max_order.saturating_sub(1));
    let b = system.b_block();
    // A^{(j)}: B block only at j = 0, C^{(j)} always.
    let a_j = |j: usize| -> DMatrix<f64> {
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        if j == 0 {
            a.view_mut((0, n), (n, n)).copy_from(&b);
        }
        a.view_mut((n, 0), (n, n)).copy_from(&cders[j]);
        a
    };
    let mut z: Vec<DMatrix<f64>> = vec![z0.clone()];
    for k in 0..max_order {
        let mut zk1 = DMatrix::zeros(2 * n, z0.ncols());
        for j in 0..=k {
            zk1 += binomial(k, j) * (a_j(j) * &z[k - j]);
        }
        z.push(zk1);
    }
    z
}

/// The crossing-form series from explicit frame derivatives at the crossing.
///
/// `zders[k]` is Z^{(k)}(t0) (2n x n); `v_frame` is any frame of the
/// reference Lagrangian plane V. This is the computational core shared by the
/// spatial and synthetic (oracle) paths.
pub fn crossing_series_from_derivatives(
    zders: &[DMatrix<f64>],
    v_frame: &DMatrix<f64>,
    location: f64,
    variable: Variable,
    opts: &SeriesOpts,
) -> Result<CrossingFormSeries> {
    let two_n = zders[0].nrows();
    let n = zders[0].ncols();
    if v_frame.nrows() != two_n {
        return Err(CoreError::DimensionMismatch(
            "reference frame dimension".into(),
        ));
    }
    // Defect operator D = Q^T J with Q an orthonormal frame of V:
    // w lies in V iff D w = 0 (V Lagrangian).
    let qr = v_frame.clone().qr();
    let q = qr.q().columns(0, v_frame.ncols()).into_owned();
    let j = crate::symplectic::j_matrix(two_n / 2);
    let d_op = q.transpose() * &j;
    let m = &d_op * &zders[0]; // n x n
    // kernel of M with an absolute scale from the frame itself
    let z0_scale = zders[0].norm();
    let svd = m.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let vt = svd.v_t.as_ref().unwrap();
    let thr = opts.tol * smax.max(z0_scale);
    let dim_w1 = sv.iter().filter(|&&s| s <= thr).count();
    if dim_w1 == 0 {
        return Err(CoreError::Precondition(
            "not a crossing: frame and reference are transversal".into(),
        ));
    }
    let mut h = DMatrix::zeros(n, dim_w1);
    for (jcol, i) in ((n - dim_w1)..n).enumerate() {
        h.set_column(jcol, &vt.row(i).transpose());
    }

    let mut orders: Vec<OrderData> = Vec::new();
    let mut accounted = 0usize;
    let mut k = 0usize;
    let max_order = opts.max_order.min(zders.len() - 1);
    while k < max_order && h.ncols() > 0 {
        k += 1;
        let dk = h.ncols();
        // joint least-squares chain solve for h_1..h_{k-1} given h_0 = columns of h:
        // for i in 1..k: sum_{j<=i} C(i,j) D Z^{(i-j)} h_j = 0.
        let mchain = k - 1;
        let chains: Vec<DMatrix<f64>> = if mchain == 0 {
            vec![h.clone()]
        } else {
            let mut abig = DMatrix::zeros(mchain * n, mchain * n);
            let mut rbig = DMatrix::zeros(mchain * n, dk);
            for i in 1..=mchain {
                let row = (i - 1) * n;
                let rhs = -(binomial(i, 0) * (&d_op * &zders[i] * &h));
                rbig.view_mut((row, 0), (n, dk)).copy_from(&rhs);
                for jj in 1..=i {
                    let blk = binomial(i, jj) * (&d_op * &zders[i - jj]);
                    abig.view_mut((row, (jj - 1) * n), (n, n)).copy_from(&blk);
                }
            }
            let svd_big = abig.clone().svd(true, true);
            let sol = svd_big
                .solve(&rbig, opts.tol * 1e-3)
                .map_err(|e| CoreError::Solver(format!("chain solve: {e}")))?;
            // consistency of the chain system
            let resid = (&abig * &sol - &rbig).norm();
            let rhs_scale = rbig.norm().max(z0_scale);
            if resid > 1e-6 * rhs_scale {
                return Err(CoreError::SeriesNonconvergence {
                    max_order: k,
                    dim: dim_w1,
                    accounted,
                });
            }
            let mut cs = vec![h.clone()];
            for jj in 1..=mchain {
                cs.push(sol.view(((jj - 1) * n, 0), (n, dk)).into_owned());
            }
            cs
        };
        // form matrix G[r][c] = sum_j C(k,j) omega(Z^{(k-j)} h_j^{(r)}, Z0 h0^{(c)})
        let w0 = &zders[0] * &h; // 2n x dk
        let mut g = DMatrix::zeros(dk, dk);
        let mut abs_scale = 0.0f64;
        for r in 0..dk {
            let mut acc = DVector::zeros(two_n);
            for (jj, chain) in chains.iter().enumerate().take(k) {
                let coeff = binomial(k, jj);
                acc += coeff * (&zders[k - jj] * chain.column(r));
                abs_scale += coeff * zders[k - jj].norm() * chain.column(r).norm();
            }
            for c in 0..dk {
                g[(r, c)] = omega_unchecked(&acc, &w0.column(c).into_owned());
            }
        }
        abs_scale *= w0.norm().max(1.0);
        let g = 0.5 * (&g + &g.transpose());
        let (np, nm) = signatures_with_scale(&g, opts.tol, abs_scale);
        orders.push(OrderData {
            order: k,
            matrix: g.clone(),
            basis: w0.clone(),
            n_plus: np,
            n_minus: nm,
        });
        accounted += np + nm;
        if accounted >= dim_w1 {
            break;
        }
        let kb = kernel_basis(&g, opts.tol, abs_scale);
        if kb.ncols() == 0 {
            break;
        }
        let hnew = &h * &kb;
        // re-orthonormalize the coefficient basis
        let qr = hnew.qr();
        h = qr.q().columns(0, kb.ncols()).into_owned();
    }
    let closed = accounted >= dim_w1;
    let all_zero = orders.iter().all(|o| o.n_plus + o.n_minus == 0);
    if !closed && !all_zero {
        return Err(CoreError::SeriesNonconvergence {
            max_order: opts.max_order,
            dim: dim_w1,
            accounted,
        });
    }
    Ok(CrossingFormSeries {
        location,
        variable,
        dim_w1,
        orders,
        closed,
    })
}

/// Crossing-form series in the spatial variable at a crossing of the bundle
/// frame `z0` (at x0) with the reference plane `v_frame`.
pub fn crossing_form_series(
    system: &LinearSystem,
    lambda: f64,
    x0: f64,
    z0: &DMatrix<f64>,
    v_frame: &DMatrix<f64>,
    opts: &SeriesOpts,
) -> Result<CrossingFormSeries> {
    let zders = frame_derivatives(system, lambda, x0, z0, opts.max_order);
    crossing_series_from_derivatives(&zders, v_frame, x0, Variable::Space, opts)
}

/// First-order crossing form in lambda of a bundle path against a fixed
/// reference plane, via the boundary-term-free quadrature identity
/// d/dlambda omega(w(lambda), w0) = integral of omega(A_lambda w, w).
///
/// `h0` are coefficient columns in the path's final frame spanning the
/// intersection with the reference. Higher lambda-orders arise only at the
/// zero-eigenvalue corner and are assembled from the inhomogeneous solves.
pub fn lambda_form_first_order(
    bundle: &crate::bundles::BundlePath,
    h0: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let system = bundle.system().clone();
    let lambda = bundle.lambda;
    let selector = lambda_selector(&system);
    let a = move |x: f64| system.a_matrix(x, lambda);
    quadrature_along_path(&a, &bundle.path, h0, &selector)
}

/// Symmetric selector P with w^T P w = omega(A_lambda w, w).
fn lambda_selector(system: &LinearSystem) -> DMatrix<f64> {
    let n = system.kind.half_dim();
    let a_lam = system.a_lambda();
    let j = crate::symplectic::j_matrix(n);
    let p = &j * &a_lam;
    0.5 * (&p + &p.transpose())
}

/// Relative (pair) first-order crossing form at a Gamma2 crossing lambda0:
/// quadrature of the crossing solutions over both half-lines, expressed on
/// the intersection basis. Returns (dim, basis, form matrix).
pub fn relative_lambda_form(
    system: &LinearSystem,
    ell: f64,
    lambda0: f64,
    ode_opts: &crate::integrate::OdeOpts,
    rank_tol: f64,
) -> Result<(usize, DMatrix<f64>, DMatrix<f64>)> {
    let (dim, basis, zu, zs, _h_u) =
        crate::bundles::pair_intersection(system, lambda0, ell, ode_opts, rank_tol)?;
    if dim == 0 {
        return Err(CoreError::Precondition(format!(
            "lambda0 = {lambda0} is not a crossing"
        )));
    }
    // coefficients of the basis vectors in each final frame
    let cu = solve_coefficients(zu.final_frame(), &basis)?;
    let cs = solve_coefficients(zs.final_frame(), &basis)?;
    let sysu = system.clone();
    let au = move |x: f64| sysu.a_matrix(x, lambda0);
    let g_u = quadrature_along_path(&au, &zu.path, &cu, &lambda_selector(system))?;
    let syss = system.clone();
    let as_ = move |x: f64| syss.a_matrix(x, lambda0);
    let g_s = quadrature_along_path(&as_, &zs.path, &cs, &lambda_selector(system))?;
    // unstable side integrates left-to-right: + integral over (-inf, ell];
    // stable side integrates right-to-left, so its accumulated quadrature is
    // minus the integral over [ell, +inf). The pair form is the difference of
    // the u- and s-side lambda-derivatives, i.e. the sum of both integrals.
    Ok((dim, basis, g_u - g_s))
}

fn solve_coefficients(frame: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = frame.clone().svd(true, true);
    svd.solve(basis, 1e-12)
        .map_err(|e| CoreError::Solver(format!("coefficient solve: {e}")))
}

/// Maslov index of a path from its classified crossings (endpoint conventions
/// applied per position).
pub fn maslov_index(crossings: &[(PathPosition, &CrossingFormSeries)]) -> Result<i64> {
    let mut total = 0i64;
    for (pos, series) in crossings {
        if !series.closed {
            let all_zero = series.orders.iter().all(|o| o.n_plus + o.n_minus == 0);
            if all_zero {
                // path segment inside the train contributes nothing
                continue;
            }
            return Err(CoreError::SeriesNonconvergence {
                max_order: series.orders.last().map(|o| o.order).unwrap_or(0),
                dim: series.dim_w1,
                accounted: series.accounted(),
            });
        }
        total += series.contribution(*pos).value;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::kh_profile;
    use crate::systems::{stable_frame_block, SystemKind};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn partial_signature_basics() {
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -3.0]);
        assert_eq!(partial_signatures(&d, 1e-8), (1, 1, 0));
        let z = DMatrix::zeros(3, 3);
        assert_eq!(partial_signatures(&z, 1e-8), (0, 0, 0));
    }

    #[test]
    fn frame_derivative_first_order() {
        let sys = LinearSystem::new(SystemKind::LPlus, kh_profile());
        let s = stable_frame_block(SystemKind::LPlus, &sys.params(), 0.0).unwrap();
        let z0 = crate::symplectic::LagrangianFrame::graph(&s).matrix();
        let ders = frame_derivatives(&sys, 0.0, 0.7, &z0, 1);
        // X' = B Y, Y' = C X
        let b = sys.b_block();
        let c = sys.c_block(0.7, 0.0);
        let x0 = z0.rows(0, 2).into_owned();
        let y0 = z0.rows(2, 2).into_owned();
        assert_relative_eq!((ders[1].rows(0, 2) - &b * &y0).norm(), 0.0, epsilon = 1e-13);
        assert_relative_eq!((ders[1].rows(2, 2) - &c * &x0).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn frame_derivative_matches_finite_difference() {
        // second derivative of the integrated frame vs the recursion
        let sys = LinearSystem::new(SystemKind::LPlus, kh_profile());
        let opts = crate::integrate::OdeOpts::default();
        let x0 = -1.0;
        let bp = crate::bundles::integrate_unstable(&sys, 0.0, Some(-40.0), x0 + 0.01, &opts).unwrap();
        let z0 = bp.frame_at(x0).unwrap();
        let ders = frame_derivatives(&sys, 0.0, x0, &z0, 2);
        let h = 1e-4;
        let zp = bp.frame_at(x0 + h).unwrap();
        let zm = bp.frame_at(x0 - h).unwrap();
        let fd2 = (&zp - 2.0 * &z0 + &zm) / (h * h);
        let rel = (&fd2 - &ders[2]).norm() / ders[2].norm();
        assert!(rel <= 1e-5, "relative error {rel}");
    }

    #[test]
    fn constant_invariant_frame_derivatives() {
        // phi = 0: on the graph of S all derivatives keep Y^{(k)} = S X^{(k)}
        let params = crate::profiles::Parameters::new(0.16, -1, 1).unwrap();
        let zero = crate::profiles::WaveProfile::from_fn(params, 5.0, |_| [0.0; 5]).unwrap();
        let sys = LinearSystem::new(SystemKind::LPlus, zero);
        let s = stable_frame_block(SystemKind::LPlus, &params, 0.0).unwrap();
        let z0 = crate::symplectic::LagrangianFrame::graph(&s).matrix();
        let ders = frame_derivatives(&sys, 0.0, 1.0, &z0, 5);
        for k in 0..=5 {
            let x = ders[k].rows(0, 2).into_owned();
            let y = ders[k].rows(2, 2).into_owned();
            assert!((&y - &s * &x).norm() <= 1e-10 * (1.0 + ders[k].norm()), "order {k}");
        }
    }

    #[test]
    fn rotating_line_crossing_forms() {
        // Lambda(t) = span{(cos t, sin t)}, V = span{e1}: interior crossings at
        // t = 0 and t = pi each have first-order form -1.
        let v = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        for t0 in [0.0, std::f64::consts::PI] {
            let z0 = DMatrix::from_column_slice(2, 1, &[t0.cos(), t0.sin()]);
            let z1 = DMatrix::from_column_slice(2, 1, &[-t0.sin(), t0.cos()]);
            let z2 = -&z0;
            let z3 = -&z1;
            let series = crossing_series_from_derivatives(
                &[z0, z1, z2, z3],
                &v,
                t0,
                Variable::Space,
                &SeriesOpts::default(),
            )
            .unwrap();
            assert_eq!(series.dim_w1, 1);
            assert_eq!(series.orders[0].n_minus, 1);
            assert!(series.closed);
            assert_relative_eq!(series.orders[0].matrix[(0, 0)], -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotating_line_maslov_index_is_minus_two() {
        let v = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let mut all = Vec::new();
        for t0 in [0.0, std::f64::consts::PI] {
            let z0 = DMatrix::from_column_slice(2, 1, &[t0.cos(), t0.sin()]);
            let z1 = DMatrix::from_column_slice(2, 1, &[-t0.sin(), t0.cos()]);
            let z2 = -&z0;
            let z3 = -&z1;
            all.push(
                crossing_series_from_derivatives(
                    &[z0, z1, z2, z3],
                    &v,
                    t0,
                    Variable::Space,
                    &SeriesOpts::default(),
                )
                .unwrap(),
            );
        }
        let refs: Vec<(PathPosition, &CrossingFormSeries)> = all
            .iter()
            .map(|s| (PathPosition::Interior, s))
            .collect();
        assert_eq!(maslov_index(&refs).unwrap(), -2);
    }

    #[test]
    fn single_negative_interior_crossing_counts_minus_one() {
        let v = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let z0 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let z1 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let z2 = DMatrix::zeros(2, 1);
        let series = crossing_series_from_derivatives(
            &[z0, z1, z2],
            &v,
            0.0,
            Variable::Space,
            &SeriesOpts::default(),
        )
        .unwrap();
        assert_eq!(
            maslov_index(&[(PathPosition::Interior, &series)]).unwrap(),
            -1
        );
    }

    #[test]
    fn initial_point_second_order_convention() {
        // initial crossing with m1 = 0 and m2 = diag(2 I1, -2 I2), I1 > 0,
        // I2 < 0: contribution is -n_minus(m2) = 0.
        let g2 = DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 6.4]);
        let series = CrossingFormSeries {
            location: 0.0,
            variable: Variable::Lambda,
            dim_w1: 2,
            orders: vec![
                OrderData {
                    order: 1,
                    matrix: DMatrix::zeros(2, 2),
                    basis: DMatrix::zeros(8, 2),
                    n_plus: 0,
                    n_minus: 0,
                },
                OrderData {
                    order: 2,
                    matrix: g2.clone(),
                    basis: DMatrix::zeros(8, 2),
                    n_plus: 2,
                    n_minus: 0,
                },
            ],
            closed: true,
        };
        assert_eq!(series.contribution(PathPosition::Initial).value, 0);
        // and with I1 < 0, I2 > 0 the contribution is -2
        let series2 = CrossingFormSeries {
            orders: vec![OrderData {
                order: 2,
                matrix: -g2,
                basis: DMatrix::zeros(8, 2),
                n_plus: 0,
                n_minus: 2,
            }],
            ..series
        };
        assert_eq!(series2.contribution(PathPosition::Initial).value, -2);
    }

    #[test]
    fn lambda_selector_matches_omega_identity() {
        for kind in [SystemKind::LPlus, SystemKind::LMinus, SystemKind::NOperator] {
            let sys = LinearSystem::new(kind, kh_profile());
            let p = lambda_selector(&sys);
            let a_lam = sys.a_lambda();
            let dim = kind.dim();
            let w = DVector::from_fn(dim, |i, _| ((i * 7 + 3) as f64 * 0.37).sin());
            let direct = omega_unchecked(&(&a_lam * &w), &w);
            let viap = (w.transpose() * &p * &w)[(0, 0)];
            assert_relative_eq!(direct, viap, epsilon = 1e-13);
        }
    }
}

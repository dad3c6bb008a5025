//! Oracle suite for the generic k-th order crossing-form machinery: every
//! closed-form crossing form of the scalar problems (first and third order at
//! interior crossings, and the degenerate chains of orders 3, 5, 7, 9 at
//! profile zeros) must be reproduced on engineered crossings to relative 1e-6.

use maslov_core::forms::{
    crossing_form_series, maslov_index, CrossingFormSeries, PathPosition, SeriesOpts, Variable,
};
use maslov_core::profiles::{Parameters, WaveProfile};
use maslov_core::symplectic::{j_matrix, LagrangianFrame};
use maslov_core::systems::{stable_frame_block, LinearSystem, SystemKind};
use nalgebra::{DMatrix, DVector};

const BETA: f64 = 4.0 / 25.0;
const SIGMA2: i8 = -1;

fn params() -> Parameters {
    Parameters::new(BETA, SIGMA2, 1).unwrap()
}

/// e1^2 = 2 sqrt(beta) - sigma2, the denominator of the third-order forms.
fn e1_sq() -> f64 {
    2.0 * BETA.sqrt() - SIGMA2 as f64
}

/// Polynomial profile with prescribed derivatives at x0 = 0 and exact higher
/// derivatives (zero beyond the given jet).
fn jet_profile(jet: [f64; 4]) -> WaveProfile {
    let f = move |x: f64| -> [f64; 5] {
        let [a0, a1, a2, a3] = jet;
        [
            a0 + a1 * x + a2 * x * x / 2.0 + a3 * x * x * x / 6.0,
            a1 + a2 * x + a3 * x * x / 2.0,
            a2 + a3 * x,
            a3,
            0.0,
        ]
    };
    WaveProfile::from_fn_with_higher(params(), 50.0, f, |_x, _k| 0.0).unwrap()
}

/// A unit vector z with omega(w0, z) = 0 completing span{w0, z} to a
/// Lagrangian plane transversal (except along w0) to the reference.
fn lagrangian_completion(w0: &DVector<f64>, v_frame: &DMatrix<f64>) -> DVector<f64> {
    let n2 = w0.len();
    let j = j_matrix(n2 / 2);
    let mut jw = &j * w0;
    jw.normalize_mut();
    // candidates orthogonal to J w0, i.e. with omega(w0, z) = 0
    let mut pool = Vec::new();
    for i in 0..n2 {
        let mut e = DVector::zeros(n2);
        e[i] = 1.0;
        let z = &e - &jw * jw.dot(&e);
        if z.norm() > 0.3 {
            pool.push(z);
        }
    }
    // project away the reference-plane-plus-w0 subspace and take the most
    // transversal candidate
    let mut aug = DMatrix::zeros(n2, v_frame.ncols() + 1);
    aug.columns_mut(0, v_frame.ncols()).copy_from(v_frame);
    aug.set_column(v_frame.ncols(), w0);
    let q = aug.qr().q();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for cand in pool {
        let proj = &q * (q.transpose() * &cand);
        let resid = (&cand - proj).norm();
        if best.as_ref().map(|(r, _)| resid > *r).unwrap_or(true) {
            best = Some((resid, cand));
        }
    }
    let (_, mut z) = best.unwrap();
    let c = w0.dot(&z) / w0.dot(w0);
    z -= c * w0;
    z.normalize_mut();
    z
}

struct Setup {
    system: LinearSystem,
    s_frame: DMatrix<f64>,
    s_block: DMatrix<f64>,
}

fn setup(kind: SystemKind, jet: [f64; 4]) -> Setup {
    let profile = jet_profile(jet);
    let s_block = stable_frame_block(kind, &params(), 0.0).unwrap();
    Setup {
        system: LinearSystem::new(kind, profile),
        s_frame: LagrangianFrame::graph(&s_block).matrix(),
        s_block,
    }
}

/// Frame whose span meets the reference exactly in span{a0 s1 + b0 s2}.
fn frame_dim1(st: &Setup, k0: (f64, f64)) -> DMatrix<f64> {
    let k = DVector::from_column_slice(&[k0.0, k0.1]);
    let w0 = &st.s_frame * &k;
    let z = lagrangian_completion(&w0, &st.s_frame);
    let mut f = DMatrix::zeros(4, 2);
    f.set_column(0, &w0);
    f.set_column(1, &z);
    f
}

/// Frame spanning the reference plane itself (dimension-2 crossing).
fn frame_dim2(st: &Setup, m: [f64; 4]) -> DMatrix<f64> {
    let mm = DMatrix::from_row_slice(2, 2, &m);
    &st.s_frame * &mm
}

fn series_at(st: &Setup, z0: &DMatrix<f64>) -> CrossingFormSeries {
    crossing_form_series(
        &st.system,
        0.0,
        0.0,
        z0,
        &st.s_frame,
        &SeriesOpts::default(),
    )
    .unwrap()
}

/// S-coordinates of an ambient basis vector of a graph reference (I; S):
/// the coefficients are simply the upper-half components.
fn k_coords(w: &DVector<f64>) -> (f64, f64) {
    (w[0], w[1])
}

fn assert_rel(actual: f64, expected: f64, what: &str) {
    let denom = expected.abs().max(1e-30);
    let rel = (actual - expected).abs() / denom;
    assert!(
        rel <= 1e-6,
        "{what}: got {actual:.12e}, expected {expected:.12e} (rel {rel:.2e})"
    );
}

fn order(series: &CrossingFormSeries, k: usize) -> &maslov_core::forms::OrderData {
    series
        .orders
        .iter()
        .find(|o| o.order == k)
        .unwrap_or_else(|| panic!("order {k} missing from series"))
}

fn assert_zero_through(series: &CrossingFormSeries, last_zero: usize) {
    for o in &series.orders {
        if o.order <= last_zero {
            assert_eq!(
                (o.n_plus, o.n_minus),
                (0, 0),
                "order {} expected identically zero",
                o.order
            );
        }
    }
}

// ---------- interior crossings with phi(x0) != 0 ----------

#[test]
fn lplus_first_order_form_body_crossing() {
    let phi0 = 0.3;
    let st = setup(SystemKind::LPlus, [phi0, 0.11, -0.07, 0.05]);
    let z0 = frame_dim1(&st, (0.4, 0.9));
    let series = series_at(&st, &z0);
    assert_eq!(series.dim_w1, 1);
    let o1 = order(&series, 1);
    assert_eq!((o1.n_plus, o1.n_minus), (0, 1));
    let (_a0, b0) = k_coords(&o1.basis.column(0).into_owned());
    assert_rel(o1.matrix[(0, 0)], -3.0 * phi0 * phi0 * b0 * b0, "m1 L+");
    assert!(series.closed);
}

#[test]
fn lminus_first_order_form_body_crossing() {
    let phi0 = 0.3;
    let st = setup(SystemKind::LMinus, [phi0, 0.11, -0.07, 0.05]);
    let z0 = frame_dim1(&st, (0.4, 0.9));
    let series = series_at(&st, &z0);
    let o1 = order(&series, 1);
    assert_eq!((o1.n_plus, o1.n_minus), (1, 0));
    let (_a0, b0) = k_coords(&o1.basis.column(0).into_owned());
    assert_rel(o1.matrix[(0, 0)], phi0 * phi0 * b0 * b0, "m1 L-");
}

#[test]
fn lplus_third_order_s1_crossing() {
    // W1 = span{s1}: orders 1 and 2 vanish, order 3 is
    // -6 a0^2 phi^2 / (2 sqrt(beta) - sigma2)
    let phi0 = 0.3;
    let st = setup(SystemKind::LPlus, [phi0, 0.11, -0.07, 0.05]);
    let z0 = frame_dim1(&st, (1.7, 0.0));
    let series = series_at(&st, &z0);
    assert_zero_through(&series, 2);
    let o3 = order(&series, 3);
    assert_eq!((o3.n_plus, o3.n_minus), (0, 1));
    let (a0, b0) = k_coords(&o3.basis.column(0).into_owned());
    assert!(b0.abs() <= 1e-8 * a0.abs());
    assert_rel(
        o3.matrix[(0, 0)],
        -6.0 * a0 * a0 * phi0 * phi0 / e1_sq(),
        "m3 L+ case 1",
    );
}

#[test]
fn lminus_third_order_s1_crossing() {
    let phi0 = 0.3;
    let st = setup(SystemKind::LMinus, [phi0, 0.11, -0.07, 0.05]);
    let z0 = frame_dim1(&st, (1.7, 0.0));
    let series = series_at(&st, &z0);
    assert_zero_through(&series, 2);
    let o3 = order(&series, 3);
    assert_eq!((o3.n_plus, o3.n_minus), (1, 0));
    let (a0, _b0) = k_coords(&o3.basis.column(0).into_owned());
    assert_rel(
        o3.matrix[(0, 0)],
        2.0 * a0 * a0 * phi0 * phi0 / e1_sq(),
        "m3 L- case 1",
    );
}

#[test]
fn lplus_two_dimensional_body_crossing() {
    // Lambda(t0) = S+(0): first order has one negative square supported on
    // the s2-coefficients; order 3 closes with
    // -3 phi^2 a0^2 / (2 (2 sqrt(beta) - sigma2))
    let phi0 = 0.3;
    let st = setup(SystemKind::LPlus, [phi0, 0.11, -0.07, 0.05]);
    let z0 = frame_dim2(&st, [1.3, 0.2, -0.4, 0.8]);
    let series = series_at(&st, &z0);
    assert_eq!(series.dim_w1, 2);
    let o1 = order(&series, 1);
    assert_eq!((o1.n_plus, o1.n_minus), (0, 1));
    // G1 = -3 phi^2 * (b-coeffs outer product)
    let b: Vec<f64> = (0..o1.basis.ncols())
        .map(|j| o1.basis.column(j)[1])
        .collect();
    for r in 0..2 {
        for c in 0..2 {
            assert_rel(
                o1.matrix[(r, c)],
                -3.0 * phi0 * phi0 * b[r] * b[c],
                "G1 entries dim-2",
            );
        }
    }
    let o3 = order(&series, 3);
    assert_eq!((o3.n_plus, o3.n_minus), (0, 1));
    let (a0, b0) = k_coords(&o3.basis.column(0).into_owned());
    assert!(b0.abs() <= 1e-7 * a0.abs().max(1.0), "b0 = {b0}");
    assert_rel(
        o3.matrix[(0, 0)],
        -3.0 * phi0 * phi0 * a0 * a0 / (2.0 * e1_sq()),
        "m3 L+ dim-2",
    );
    assert!(series.closed);
}

#[test]
fn lminus_two_dimensional_body_crossing() {
    let phi0 = 0.3;
    let st = setup(SystemKind::LMinus, [phi0, 0.11, -0.07, 0.05]);
    let z0 = frame_dim2(&st, [1.3, 0.2, -0.4, 0.8]);
    let series = series_at(&st, &z0);
    let o1 = order(&series, 1);
    assert_eq!((o1.n_plus, o1.n_minus), (1, 0));
    let o3 = order(&series, 3);
    assert_eq!((o3.n_plus, o3.n_minus), (1, 0));
    let (a0, _) = k_coords(&o3.basis.column(0).into_owned());
    assert_rel(
        o3.matrix[(0, 0)],
        phi0 * phi0 * a0 * a0 / (2.0 * e1_sq()),
        "m3 L- dim-2",
    );
}

// ---------- profile zeros: degenerate chains of orders 3, 5, 7, 9 ----------

#[test]
fn degenerate_case1_first_derivative() {
    // phi(x0) = 0, phi'(x0) != 0, b0 != 0: m3 = -6 phi'^2 b0^2
    let c1 = 0.8;
    let st = setup(SystemKind::LPlus, [0.0, c1, 0.0, 0.0]);
    let z0 = frame_dim1(&st, (0.4, 0.9));
    let series = series_at(&st, &z0);
    assert_zero_through(&series, 2);
    let o3 = order(&series, 3);
    assert_eq!((o3.n_plus, o3.n_minus), (0, 1));
    let (_a0, b0) = k_coords(&o3.basis.column(0).into_owned());
    assert_rel(o3.matrix[(0, 0)], -6.0 * c1 * c1 * b0 * b0, "m3 case 1(i)");
}

#[test]
fn degenerate_case1_second_derivative() {
    // phi = phi' = 0, phi'' != 0: m5 = -18 phi''^2 b0^2
    let c2 = 0.55;
    let st = setup(SystemKind::LPlus, [0.0, 0.0, c2, 0.0]);
    let z0 = frame_dim1(&st, (0.4, 0.9));
    let series = series_at(&st, &z0);
    assert_zero_through(&series, 4);
    let o5 = order(&series, 5);
    assert_eq!((o5.n_plus, o5.n_minus), (0, 1));
    let (_a0, b0) = k_coords(&o5.basis.column(0).into_owned());
    assert_rel(o5.matrix[(0, 0)], -18.0 * c2 * c2 * b0 * b0, "m5 case 1(ii)");
}

#[test]
fn degenerate_case1_third_derivative() {
    // phi = phi' = phi'' = 0, phi''' != 0: m7 = -60 phi'''^2 b0^2
    let c3 = 0.7;
    let st = setup(SystemKind::LPlus, [0.0, 0.0, 0.0, c3]);
    let z0 = frame_dim1(&st, (0.4, 0.9));
    let series = series_at(&st, &z0);
    assert_zero_through(&series, 6);
    let o7 = order(&series, 7);
    assert_eq!((o7.n_plus, o7.n_minus), (0, 1));
    let (_a0, b0) = k_coords(&o7.basis.column(0).into_owned());
    assert_rel(o7.matrix[(0, 0)], -60.0 * c3 * c3 * b0 * b0, "m7 case 1(iii)");
}

#[test]
fn degenerate_case2_first_derivative() {
    // b0 = 0 and phi vanishing to first order: m5 = -12 (6 phi'^2 a0^2 / e1^2)
    let c1 = 0.8;
    let st = setup(SystemKind::LPlus, [0.0, c1, 0.0, 0.0]);
    let z0 = frame_dim1(&st, (1.7, 0.0));
    let series = series_at(&st, &z0);
    assert_zero_through(&series, 4);
    let o5 = order(&series, 5);
    assert_eq!((o5.n_plus, o5.n_minus), (0, 1));
    let (a0, _) = k_coords(&o5.basis.column(0).into_owned());
    assert_rel(
        o5.matrix[(0, 0)],
        -12.0 * 6.0 * c1 * c1 * a0 * a0 / e1_sq(),
        "m5 case 2(i)",
    );
}

#[test]
fn degenerate_case2_second_derivative() {
    // m7 = -30 (18 phi''^2 a0^2 / e1^2)
    let c2 = 0.55;
    let st = setup(SystemKind::LPlus, [0.0, 0.0, c2, 0.0]);
    let z0 = frame_dim1(&st, (1.7, 0.0));
    let series = series_at(&st, &z0);
    assert_zero_through(&series, 6);
    let o7 = order(&series, 7);
    assert_eq!((o7.n_plus, o7.n_minus), (0, 1));
    let (a0, _) = k_coords(&o7.basis.column(0).into_owned());
    assert_rel(
        o7.matrix[(0, 0)],
        -30.0 * 18.0 * c2 * c2 * a0 * a0 / e1_sq(),
        "m7 case 2(ii)",
    );
}

#[test]
fn degenerate_case2_third_derivative() {
    // the deepest chain: m9 = -56 (60 phi'''^2 a0^2 / e1^2)
    let c3 = 0.7;
    let st = setup(SystemKind::LPlus, [0.0, 0.0, 0.0, c3]);
    let z0 = frame_dim1(&st, (1.7, 0.0));
    let series = series_at(&st, &z0);
    assert_zero_through(&series, 8);
    let o9 = order(&series, 9);
    assert_eq!((o9.n_plus, o9.n_minus), (0, 1));
    let (a0, _) = k_coords(&o9.basis.column(0).into_owned());
    assert_rel(
        o9.matrix[(0, 0)],
        -56.0 * 60.0 * c3 * c3 * a0 * a0 / e1_sq(),
        "m9 case 2(iii)",
    );
}

#[test]
fn degenerate_case3_first_derivative() {
    // two-dimensional crossing at a simple profile zero: order 3 carries one
    // negative square -6 phi'^2 on the s2-coefficients, order 5 closes with
    // -(3/4)(6 phi'^2 a0^2 / e1^2)
    let c1 = 0.8;
    let st = setup(SystemKind::LPlus, [0.0, c1, 0.0, 0.0]);
    let z0 = frame_dim2(&st, [1.1, -0.3, 0.25, 0.9]);
    let series = series_at(&st, &z0);
    assert_eq!(series.dim_w1, 2);
    assert_zero_through(&series, 2);
    let o3 = order(&series, 3);
    assert_eq!((o3.n_plus, o3.n_minus), (0, 1));
    let b: Vec<f64> = (0..o3.basis.ncols())
        .map(|j| o3.basis.column(j)[1])
        .collect();
    for r in 0..o3.matrix.nrows() {
        for c in 0..o3.matrix.ncols() {
            assert_rel(
                o3.matrix[(r, c)],
                -6.0 * c1 * c1 * b[r] * b[c],
                "G3 entries case 3(i)",
            );
        }
    }
    let o5 = order(&series, 5);
    assert_eq!((o5.n_plus, o5.n_minus), (0, 1));
    let (a0, _) = k_coords(&o5.basis.column(0).into_owned());
    assert_rel(
        o5.matrix[(0, 0)],
        -0.75 * 6.0 * c1 * c1 * a0 * a0 / e1_sq(),
        "m5 case 3(i)",
    );
    assert!(series.closed);
}

#[test]
fn degenerate_case3_second_derivative() {
    let c2 = 0.55;
    let st = setup(SystemKind::LPlus, [0.0, 0.0, c2, 0.0]);
    let z0 = frame_dim2(&st, [1.1, -0.3, 0.25, 0.9]);
    let series = series_at(&st, &z0);
    assert_zero_through(&series, 4);
    let o5 = order(&series, 5);
    assert_eq!((o5.n_plus, o5.n_minus), (0, 1));
    let o7 = order(&series, 7);
    assert_eq!((o7.n_plus, o7.n_minus), (0, 1));
    let (a0, _) = k_coords(&o7.basis.column(0).into_owned());
    assert_rel(
        o7.matrix[(0, 0)],
        -(5.0 / 6.0) * 18.0 * c2 * c2 * a0 * a0 / e1_sq(),
        "m7 case 3(ii)",
    );
}

#[test]
fn degenerate_case3_third_derivative() {
    let c3 = 0.7;
    let st = setup(SystemKind::LPlus, [0.0, 0.0, 0.0, c3]);
    let z0 = frame_dim2(&st, [1.1, -0.3, 0.25, 0.9]);
    let series = series_at(&st, &z0);
    assert_zero_through(&series, 6);
    let o7 = order(&series, 7);
    assert_eq!((o7.n_plus, o7.n_minus), (0, 1));
    let o9 = order(&series, 9);
    assert_eq!((o9.n_plus, o9.n_minus), (0, 1));
    let (a0, _) = k_coords(&o9.basis.column(0).into_owned());
    assert_rel(
        o9.matrix[(0, 0)],
        -(7.0 / 8.0) * 60.0 * c3 * c3 * a0 * a0 / e1_sq(),
        "m9 case 3(iii)",
    );
    // dimension closure across the whole series
    assert_eq!(series.accounted(), 2);
}

// ---------- end-to-end: the genuine conjugate point of the exact soliton ----------

#[test]
fn kh_conjugate_point_form_matches_closed_form() {
    use maslov_core::bundles::{integrate_unstable, locate_conjugate_points, LocateOpts};
    use maslov_core::OdeOpts;
    let profile = maslov_core::kh_profile();
    let sys = LinearSystem::new(SystemKind::LPlus, profile.clone());
    let opts = OdeOpts::default();
    let bundle = integrate_unstable(&sys, 0.0, None, 6.0, &opts).unwrap();
    let s0 = stable_frame_block(SystemKind::LPlus, &profile.params, 0.0).unwrap();
    let pts = locate_conjugate_points(
        &bundle,
        &s0,
        (bundle.path.x_first(), 6.0 - 1e-3),
        &LocateOpts::default(),
    )
    .unwrap();
    let interior: Vec<_> = pts.iter().filter(|c| !c.at_boundary).collect();
    assert_eq!(interior.len(), 1);
    let x0 = interior[0].coordinate;
    let z0 = bundle.frame_at(x0).unwrap();
    let s_frame = LagrangianFrame::graph(&s0).matrix();
    let series =
        crossing_form_series(&sys, 0.0, x0, &z0, &s_frame, &SeriesOpts::default()).unwrap();
    let o1 = order(&series, 1);
    assert_eq!((o1.n_plus, o1.n_minus), (0, 1));
    let w = o1.basis.column(0).into_owned();
    let b0 = w[1];
    let phi0 = profile.phi(x0);
    let rel = (o1.matrix[(0, 0)] + 3.0 * phi0 * phi0 * b0 * b0).abs()
        / (3.0 * phi0 * phi0 * b0 * b0);
    assert!(rel <= 1e-5, "relative deviation {rel:.2e}");
}

// ---------- synthetic Maslov-index oracles ----------

fn rotating_line_series(t0: f64) -> CrossingFormSeries {
    use maslov_core::forms::crossing_series_from_derivatives;
    let v = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let z0 = DMatrix::from_column_slice(2, 1, &[t0.cos(), t0.sin()]);
    let z1 = DMatrix::from_column_slice(2, 1, &[-t0.sin(), t0.cos()]);
    let z2 = -&z0;
    let z3 = -&z1;
    crossing_series_from_derivatives(&[z0, z1, z2, z3], &v, t0, Variable::Space, &SeriesOpts::default())
        .unwrap()
}

#[test]
fn rotating_line_on_extended_interval_has_index_minus_two() {
    // Lambda(t) = span{(cos t, sin t)}, V = span{e1}, t in [-pi/4, pi + pi/4]:
    // interior crossings at t = 0 and t = pi, each of signature -1.
    let s0 = rotating_line_series(0.0);
    let s1 = rotating_line_series(std::f64::consts::PI);
    let idx = maslov_index(&[
        (PathPosition::Interior, &s0),
        (PathPosition::Interior, &s1),
    ])
    .unwrap();
    assert_eq!(idx, -2);
}

#[test]
fn constant_path_has_index_zero() {
    // A path lying inside the train: all derivatives vanish, every form is
    // identically zero, and the zero property gives index 0.
    use maslov_core::forms::crossing_series_from_derivatives;
    let v = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let z0 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let zeros = DMatrix::zeros(2, 1);
    let series = crossing_series_from_derivatives(
        &[z0, zeros.clone(), zeros.clone(), zeros],
        &v,
        0.0,
        Variable::Space,
        &SeriesOpts::default(),
    )
    .unwrap();
    assert!(!series.closed);
    let idx = maslov_index(&[(PathPosition::Interior, &series)]).unwrap();
    assert_eq!(idx, 0);
}

//! Unstable and stable Lagrangian bundles: integration with conditioning
//! control, the determinant detection function, and crossing location in the
//! spatial and spectral parameters.

use crate::error::{CoreError, Result};
use crate::integrate::{integrate_path, FramePath, OdeOpts};
use crate::symplectic::{intersection_basis, intersection_dimension, positive_qr};
use crate::systems::{LinearSystem, SystemKind};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Which Maslov-box edge a crossing was found on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BoxEdge {
    Gamma1,
    Gamma2,
    Gamma3,
    Gamma4,
}

/// A located crossing, in x or in lambda.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CrossingLocation {
    pub coordinate: f64,
    pub dim: usize,
    pub which_edge: BoxEdge,
    /// True when the root sits at (or hugs) an interval endpoint.
    pub at_boundary: bool,
    /// True when the crossing was found as an even-order tangency
    /// (singular-value dip without a determinant sign change).
    pub even_touch: bool,
}

/// A bundle frame integrated along x at fixed lambda.
#[derive(Debug, Clone)]
pub struct BundlePath {
    pub kind: SystemKind,
    pub lambda: f64,
    pub path: FramePath,
    system: LinearSystem,
}

impl BundlePath {
    pub fn renorm_events(&self) -> Vec<(f64, i8)> {
        self.path.renorm_events()
    }

    pub fn max_lagrangian_defect(&self) -> f64 {
        self.path.max_lagrangian_defect
    }

    pub fn frame_at(&self, x: f64) -> Result<DMatrix<f64>> {
        let sys = self.system.clone();
        let lam = self.lambda;
        let a = move |x: f64| sys.a_matrix(x, lam);
        self.path.frame_at(&a, x)
    }

    pub fn final_frame(&self) -> &DMatrix<f64> {
        self.path.final_frame()
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }
}

/// Truncation point: far enough that the asymptotic initialization error is
/// below e^{-40}, and past the numerical support.
pub fn default_x_far(system: &LinearSystem, lambda: f64) -> Result<f64> {
    let mus = crate::systems::spatial_eigenvalues(system.kind, &system.params(), lambda)?;
    let min_re = mus
        .iter()
        .filter(|m| m.re > 0.0)
        .map(|m| m.re)
        .fold(f64::INFINITY, f64::min);
    Ok((system.profile.support_halfwidth + 10.0).max(40.0 / min_re))
}

/// Integrate the unstable bundle from x_start (default: -x_far) to x_end,
/// initialized on the unstable graph frame (I; U(lambda)).
pub fn integrate_unstable(
    system: &LinearSystem,
    lambda: f64,
    x_start: Option<f64>,
    x_end: f64,
    opts: &OdeOpts,
) -> Result<BundlePath> {
    let x0 = match x_start {
        Some(x) => x,
        None => -default_x_far(system, lambda)?,
    };
    let u = crate::systems::unstable_frame_block(system.kind, &system.params(), lambda)?;
    let n = system.kind.half_dim();
    let mut z0 = DMatrix::zeros(2 * n, n);
    z0.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    z0.view_mut((n, 0), (n, n)).copy_from(&u);
    let (q, _r) = positive_qr(&z0)?;
    let sys = system.clone();
    let a = move |x: f64| sys.a_matrix(x, lambda);
    let path = integrate_path(&a, x0, x_end, q, opts)?;
    Ok(BundlePath {
        kind: system.kind,
        lambda,
        path,
        system: system.clone(),
    })
}

/// Integrate the stable bundle from x_start (default: +x_far) leftwards to x_end.
pub fn integrate_stable(
    system: &LinearSystem,
    lambda: f64,
    x_start: Option<f64>,
    x_end: f64,
    opts: &OdeOpts,
) -> Result<BundlePath> {
    let x0 = match x_start {
        Some(x) => x,
        None => default_x_far(system, lambda)?,
    };
    let s = crate::systems::stable_frame_block(system.kind, &system.params(), lambda)?;
    let n = system.kind.half_dim();
    let mut z0 = DMatrix::zeros(2 * n, n);
    z0.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    z0.view_mut((n, 0), (n, n)).copy_from(&s);
    let (q, _r) = positive_qr(&z0)?;
    let sys = system.clone();
    let a = move |x: f64| sys.a_matrix(x, lambda);
    let path = integrate_path(&a, x0, x_end, q, opts)?;
    Ok(BundlePath {
        kind: system.kind,
        lambda,
        path,
        system: system.clone(),
    })
}

/// Detection value det(S X - Y) normalized by the frame Gram determinant, so
/// zeros and sign changes are invariant under positive-determinant frame
/// changes and continuous across renormalizations.
pub fn detection_value(frame: &DMatrix<f64>, s_ref: &DMatrix<f64>) -> f64 {
    let n = frame.nrows() / 2;
    let x = frame.rows(0, n);
    let y = frame.rows(n, n);
    let d = (s_ref * x - y).determinant();
    let gram = (frame.transpose() * frame).determinant();
    d / gram.sqrt()
}

/// Relative smallest singular value of [frame | reference-frame].
pub fn intersection_gap(frame: &DMatrix<f64>, ref_frame: &DMatrix<f64>) -> f64 {
    let m = crate::symplectic::concat_cols(frame, ref_frame);
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        0.0
    } else {
        sv.min() / smax
    }
}

/// The detection function of a bundle path against a graph reference (I; S).
pub struct DetectionFn<'a> {
    pub bundle: &'a BundlePath,
    pub s_ref: DMatrix<f64>,
}

impl<'a> DetectionFn<'a> {
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(detection_value(&self.bundle.frame_at(x)?, &self.s_ref))
    }

    fn ref_frame(&self) -> DMatrix<f64> {
        let n = self.s_ref.nrows();
        let mut f = DMatrix::zeros(2 * n, n);
        f.view_mut((0, 0), (n, n))
            .copy_from(&DMatrix::identity(n, n));
        f.view_mut((n, 0), (n, n)).copy_from(&self.s_ref);
        f
    }
}

/// Options for crossing location.
#[derive(Debug, Clone, Copy)]
pub struct LocateOpts {
    /// Bisection tolerance in the path coordinate.
    pub coord_tol: f64,
    /// Relative singular-value threshold classifying an intersection.
    pub rank_tol: f64,
    /// Relative singular-value gap below which a local minimum is refined.
    pub dip_threshold: f64,
    /// Refined-gap threshold classifying an even-order tangency.
    pub touch_tol: f64,
}

impl Default for LocateOpts {
    fn default() -> Self {
        LocateOpts {
            coord_tol: 1e-10,
            rank_tol: 1e-8,
            dip_threshold: 0.05,
            touch_tol: 1e-6,
        }
    }
}

/// Locate conjugate points: zeros of the detection function of the unstable
/// bundle against a fixed reference plane, on [interval.0, interval.1].
///
/// Sign changes are bisected to `coord_tol`; interior singular-value dips
/// below the rank tolerance are reported as even-order touches. Roots hugging
/// the interval ends are flagged rather than dropped.
pub fn locate_conjugate_points(
    bundle: &BundlePath,
    s_ref: &DMatrix<f64>,
    interval: (f64, f64),
    opts: &LocateOpts,
) -> Result<Vec<CrossingLocation>> {
    let det = DetectionFn {
        bundle,
        s_ref: s_ref.clone(),
    };
    let ref_frame = det.ref_frame();
    // scan over stored nodes inside the interval
    let mut xs: Vec<f64> = Vec::new();
    let mut ds: Vec<f64> = Vec::new();
    for node in &bundle.path.nodes {
        if node.x >= interval.0 - 1e-12 && node.x <= interval.1 + 1e-12 {
            xs.push(node.x);
            ds.push(detection_value(&node.z, &det.s_ref));
        }
    }
    if xs.is_empty() || *xs.last().unwrap() < interval.1 - 1e-9 {
        // path does not cover the interval end; evaluate there explicitly
        xs.push(interval.1);
        ds.push(det.eval(interval.1)?);
    }
    let dscale = ds.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let mut out = Vec::new();
    for i in 0..xs.len() - 1 {
        if ds[i] == 0.0 {
            continue; // handled as a node hit below via dip logic
        }
        if ds[i].signum() != ds[i + 1].signum() {
            let root = bisect_root(&det, xs[i], xs[i + 1], ds[i], opts.coord_tol)?;
            let frame = orthonormalized(&bundle.frame_at(root)?)?;
            let dim = intersection_dimension(&frame, &ref_frame, opts.rank_tol).max(1);
            let at_boundary =
                root - interval.0 < 10.0 * opts.coord_tol || interval.1 - root < 10.0 * opts.coord_tol;
            out.push(CrossingLocation {
                coordinate: root,
                dim,
                which_edge: BoxEdge::Gamma1,
                at_boundary,
                even_touch: false,
            });
        }
    }
    // interior |d| dips that do not change sign: candidate even-order touches
    for i in 1..xs.len().saturating_sub(1) {
        let (a, b, c) = (ds[i - 1].abs(), ds[i].abs(), ds[i + 1].abs());
        if b < a && b < c && b < 1e-10 * dscale {
            let x0 = xs[i];
            if out
                .iter()
                .any(|r: &CrossingLocation| (r.coordinate - x0).abs() < 1e-6)
            {
                continue;
            }
            let frame = orthonormalized(&bundle.frame_at(x0)?)?;
            let dim = intersection_dimension(&frame, &ref_frame, opts.rank_tol);
            if dim > 0 {
                out.push(CrossingLocation {
                    coordinate: x0,
                    dim,
                    which_edge: BoxEdge::Gamma1,
                    at_boundary: false,
                    even_touch: true,
                });
            }
        }
    }
    // endpoint tangency: flag a vanishing detection value at the right end
    if let (Some(&dlast), Some(&xlast)) = (ds.last(), xs.last()) {
        if dlast.abs() < 1e-9 * dscale && !out.iter().any(|r| (r.coordinate - xlast).abs() < 1e-6) {
            let frame = orthonormalized(&bundle.frame_at(xlast)?)?;
            let dim = intersection_dimension(&frame, &ref_frame, opts.rank_tol);
            if dim > 0 {
                out.push(CrossingLocation {
                    coordinate: xlast,
                    dim,
                    which_edge: BoxEdge::Gamma1,
                    at_boundary: true,
                    even_touch: false,
                });
            }
        }
    }
    out.sort_by(|a, b| a.coordinate.partial_cmp(&b.coordinate).unwrap());
    Ok(out)
}

fn bisect_root(det: &DetectionFn, mut a: f64, mut b: f64, da: f64, tol: f64) -> Result<f64> {
    let mut sa = da.signum();
    let mut guard = 0;
    while b - a > tol && guard < 200 {
        guard += 1;
        let mid = 0.5 * (a + b);
        let dm = det.eval(mid)?;
        if dm == 0.0 {
            return Ok(mid);
        }
        if dm.signum() == sa {
            a = mid;
            sa = dm.signum();
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Data needed to evaluate lambda-sweep determinants at one lambda.
pub struct PairEval {
    pub lambda: f64,
    pub det: f64,
    pub gap: f64,
}

/// Orthonormalize a frame by positive-diagonal QR, preserving span,
/// orientation, and continuity; this removes the column-norm spread that
/// accumulates between renormalizations and would otherwise pollute
/// singular-value gap measurements.
pub fn orthonormalized(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(positive_qr(z)?.0)
}

/// Evaluate det[E^u(ell) | E^s(ell)] on orthonormalized frames and the
/// relative singular-value gap at one lambda.
pub fn pair_determinant(
    system: &LinearSystem,
    lambda: f64,
    ell: f64,
    opts: &OdeOpts,
) -> Result<PairEval> {
    let zu = integrate_unstable(system, lambda, None, ell, opts)?;
    let zs = integrate_stable(system, lambda, None, ell, opts)?;
    let qu = orthonormalized(zu.final_frame())?;
    let qs = orthonormalized(zs.final_frame())?;
    let m = crate::symplectic::concat_cols(&qu, &qs);
    let d = m.determinant();
    let sv = m.singular_values();
    let smax = sv.max().max(1e-300);
    Ok(PairEval {
        lambda,
        det: d,
        gap: sv.min() / smax,
    })
}

/// Locate crossings of lambda -> (E^u(ell, lambda), E^s(ell, lambda)) on a
/// lambda interval: determinant sign changes refined by bisection, plus
/// even-order touches found by golden-section refinement of singular-value
/// dips. Unresolvable structure escalates through the caller's grid size.
pub fn locate_lambda_crossings(
    system: &LinearSystem,
    ell: f64,
    lambda_interval: (f64, f64),
    base_grid: usize,
    opts: &OdeOpts,
    locate: &LocateOpts,
) -> Result<Vec<CrossingLocation>> {
    let (lo, hi) = lambda_interval;
    if !(hi > lo) {
        return Err(CoreError::Precondition(format!(
            "empty lambda interval [{lo}, {hi}]"
        )));
    }
    let n = base_grid.max(8);
    let grid: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * (i as f64) / (n as f64))
        .collect();
    let evals: Vec<PairEval> = grid
        .par_iter()
        .map(|&lam| pair_determinant(system, lam, ell, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<CrossingLocation> = Vec::new();
    // determinant sign changes
    for i in 0..evals.len() - 1 {
        if evals[i].det.signum() != evals[i + 1].det.signum() {
            let root = bisect_lambda(system, ell, &evals[i], &evals[i + 1], opts, locate)?;
            let dim = rank_deficiency(system, root, ell, opts, locate)?;
            out.push(CrossingLocation {
                coordinate: root,
                dim: dim.max(1),
                which_edge: BoxEdge::Gamma2,
                at_boundary: false,
                even_touch: false,
            });
        }
    }
    // interior singular-value dips without a sign change
    for i in 0..evals.len() {
        let g = evals[i].gap;
        if g >= locate.dip_threshold {
            continue;
        }
        let left_up = i == 0 || evals[i - 1].gap > g;
        let right_up = i + 1 == evals.len() || evals[i + 1].gap > g;
        if !(left_up && right_up) {
            continue;
        }
        let a = if i == 0 { grid[0] } else { grid[i - 1] };
        let b = if i + 1 == evals.len() {
            grid[n]
        } else {
            grid[i + 1]
        };
        let (lam_min, gap_min) = golden_min_gap(system, ell, a, b, opts)?;
        if gap_min < locate.touch_tol
            && !out
                .iter()
                .any(|c| (c.coordinate - lam_min).abs() < 1e-3 * (hi - lo))
        {
            let dim = rank_deficiency(system, lam_min, ell, opts, locate)?;
            if dim > 0 {
                out.push(CrossingLocation {
                    coordinate: lam_min,
                    dim,
                    which_edge: BoxEdge::Gamma2,
                    at_boundary: false,
                    even_touch: true,
                });
            }
        }
    }
    out.sort_by(|a, b| a.coordinate.partial_cmp(&b.coordinate).unwrap());
    for c in out.iter_mut() {
        c.at_boundary =
            c.coordinate - lo < 1e-6 * (hi - lo) || hi - c.coordinate < 1e-6 * (hi - lo);
    }
    Ok(out)
}

fn golden_min_gap(
    system: &LinearSystem,
    ell: f64,
    mut a: f64,
    mut b: f64,
    opts: &OdeOpts,
) -> Result<(f64, f64)> {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INVPHI * (b - a);
    let mut x2 = a + INVPHI * (b - a);
    let mut f1 = pair_determinant(system, x1, ell, opts)?.gap;
    let mut f2 = pair_determinant(system, x2, ell, opts)?.gap;
    for _ in 0..36 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INVPHI * (b - a);
            f1 = pair_determinant(system, x1, ell, opts)?.gap;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INVPHI * (b - a);
            f2 = pair_determinant(system, x2, ell, opts)?.gap;
        }
    }
    if f1 < f2 {
        Ok((x1, f1))
    } else {
        Ok((x2, f2))
    }
}

fn bisect_lambda(
    system: &LinearSystem,
    ell: f64,
    left: &PairEval,
    right: &PairEval,
    opts: &OdeOpts,
    locate: &LocateOpts,
) -> Result<f64> {
    let mut a = left.lambda;
    let mut b = right.lambda;
    let mut sa = left.det.signum();
    let tol = locate.coord_tol.max(1e-10 * b.abs().max(1.0));
    let mut guard = 0;
    while b - a > tol && guard < 120 {
        guard += 1;
        let mid = 0.5 * (a + b);
        let e = pair_determinant(system, mid, ell, opts)?;
        if e.det == 0.0 {
            return Ok(mid);
        }
        if e.det.signum() == sa {
            a = mid;
            sa = e.det.signum();
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

fn rank_deficiency(
    system: &LinearSystem,
    lambda: f64,
    ell: f64,
    opts: &OdeOpts,
    locate: &LocateOpts,
) -> Result<usize> {
    let zu = integrate_unstable(system, lambda, None, ell, opts)?;
    let zs = integrate_stable(system, lambda, None, ell, opts)?;
    let qu = orthonormalized(zu.final_frame())?;
    let qs = orthonormalized(zs.final_frame())?;
    // looser than the generic rank tolerance: the bisected root is only
    // coord_tol-accurate so the smallest singular value bottoms out above
    // machine precision
    let dim = intersection_dimension(&qu, &qs, 1e-5);
    Ok(dim.max(usize::from(
        intersection_gap(&qu, &qs) < locate.rank_tol * 10.0,
    )))
}

/// The intersection vector(s) of the unstable and stable bundles at (ell,
/// lambda): returns (dim, ambient orthonormal basis, coefficients in the
/// unstable frame).
pub fn pair_intersection(
    system: &LinearSystem,
    lambda: f64,
    ell: f64,
    opts: &OdeOpts,
    rank_tol: f64,
) -> Result<(usize, DMatrix<f64>, BundlePath, BundlePath, DMatrix<f64>)> {
    let zu = integrate_unstable(system, lambda, None, ell, opts)?;
    let zs = integrate_stable(system, lambda, None, ell, opts)?;
    let qu = orthonormalized(zu.final_frame())?;
    let qs = orthonormalized(zs.final_frame())?;
    let (dim, basis, _hq) = intersection_basis(&qu, &qs, rank_tol);
    // coefficients of the basis in the raw unstable frame
    let h_u = zu
        .final_frame()
        .clone()
        .svd(true, true)
        .solve(&basis, 1e-13)
        .map_err(|e| CoreError::Solver(format!("intersection coefficients: {e}")))?;
    Ok((dim, basis, zu, zs, h_u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{kh_profile, Parameters, WaveProfile};
    use crate::systems::{stable_frame_block, unstable_frame_block};

    fn kh_lp() -> LinearSystem {
        LinearSystem::new(SystemKind::LPlus, kh_profile())
    }

    #[test]
    fn constant_system_stays_on_unstable_frame() {
        // phi = 0: the unstable graph frame is a fixed point of the flow.
        let params = Parameters::new(4.0 / 25.0, -1, 1).unwrap();
        let zero = WaveProfile::from_fn(params, 5.0, |_| [0.0; 5]).unwrap();
        let sys = LinearSystem::new(SystemKind::LPlus, zero);
        let opts = OdeOpts::default();
        let bp = integrate_unstable(&sys, 0.0, Some(-20.0), 10.0, &opts).unwrap();
        let u = unstable_frame_block(SystemKind::LPlus, &params, 0.0).unwrap();
        let zf = bp.final_frame();
        // span check: frame should still be the graph of U
        let x = zf.rows(0, 2).into_owned();
        let y = zf.rows(2, 2).into_owned();
        let diff = (&y - &u * &x).norm() / zf.norm();
        assert!(diff <= 1e-8, "drift off the invariant frame: {diff}");
        // and no conjugate points for the truncated constant system
        let s = stable_frame_block(SystemKind::LPlus, &params, 0.0).unwrap();
        let pts = locate_conjugate_points(&bp, &s, (-20.0, 9.9), &LocateOpts::default()).unwrap();
        assert!(pts.is_empty(), "{pts:?}");
    }

    #[test]
    fn kh_lagrangian_drift_small() {
        let sys = kh_lp();
        let opts = OdeOpts::default();
        let bp = integrate_unstable(&sys, 0.0, Some(-30.0), 6.0, &opts).unwrap();
        assert!(bp.max_lagrangian_defect() <= 1e-8);
    }

    #[test]
    fn kh_single_conjugate_point() {
        let sys = kh_lp();
        let opts = OdeOpts::default();
        let bp = integrate_unstable(&sys, 0.0, None, 6.0, &opts).unwrap();
        let s = stable_frame_block(SystemKind::LPlus, &sys.params(), 0.0).unwrap();
        let pts =
            locate_conjugate_points(&bp, &s, (bp.path.x_first(), 6.0 - 1e-3), &LocateOpts::default())
                .unwrap();
        let interior: Vec<_> = pts.iter().filter(|c| !c.at_boundary).collect();
        assert_eq!(interior.len(), 1, "{pts:?}");
        assert!(interior[0].coordinate > -2.0 && interior[0].coordinate < -1.2);
        assert_eq!(interior[0].dim, 1);
    }

    #[test]
    fn kh_lminus_no_conjugate_points() {
        let sys = LinearSystem::new(SystemKind::LMinus, kh_profile());
        let opts = OdeOpts::default();
        let bp = integrate_unstable(&sys, 0.0, None, 6.0, &opts).unwrap();
        let s = stable_frame_block(SystemKind::LMinus, &sys.params(), 0.0).unwrap();
        let pts =
            locate_conjugate_points(&bp, &s, (bp.path.x_first(), 6.0 - 1e-3), &LocateOpts::default())
                .unwrap();
        let interior: Vec<_> = pts.iter().filter(|c| !c.at_boundary).collect();
        assert!(interior.is_empty(), "{pts:?}");
    }

    #[test]
    fn transversality_of_asymptotic_frames() {
        let params = Parameters::new(4.0 / 25.0, -1, 1).unwrap();
        let s = stable_frame_block(SystemKind::LPlus, &params, 0.0).unwrap();
        let u = unstable_frame_block(SystemKind::LPlus, &params, 0.0).unwrap();
        let fs = crate::symplectic::LagrangianFrame::graph(&s).matrix();
        let fu = crate::symplectic::LagrangianFrame::graph(&u).matrix();
        assert_eq!(intersection_dimension(&fu, &fs, 1e-8), 0);
        assert_eq!(intersection_dimension(&fs, &fs, 1e-8), 2);
    }

    #[test]
    fn kh_n_corner_intersection_dimension_two() {
        let sys = LinearSystem::new(SystemKind::NOperator, kh_profile());
        let opts = OdeOpts::default();
        let (dim, _basis, _zu, _zs, _h) = pair_intersection(&sys, 0.0, 6.0, &opts, 1e-6).unwrap();
        assert_eq!(dim, 2);
    }
}

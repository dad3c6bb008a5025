//! Maslov-box orchestration: edge indices, Morse indices two ways, the
//! corner contribution, the eigenvalue lower bound, and verdicts.

use crate::bundles::{
    integrate_stable, integrate_unstable, locate_conjugate_points, locate_lambda_crossings,
    BundlePath, CrossingLocation, LocateOpts,
};
use crate::error::{CoreError, Result};
use crate::forms::{
    crossing_form_series, partial_signatures, relative_lambda_form, CrossingFormSeries, SeriesOpts,
    Variable,
};
use crate::integrate::OdeOpts;
use crate::profiles::{residual_norm, ProfileSource, WaveProfile};
use crate::solves::{correction_term, solve_inhomogeneous, InhomogeneousKind, SolveConfig};
use crate::symplectic::LagrangianFrame;
use crate::systems::{n_kernel_solutions, stable_frame_block, LinearSystem, SystemKind};
use nalgebra::DMatrix;

/// Knobs of the Maslov-box computation. All fields have defaults resolved
/// against the profile.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MaslovBoxConfig {
    /// Location of the Gamma2 edge; default 6 for the built-in soliton,
    /// otherwise support halfwidth + 2.
    pub ell: Option<f64>,
    /// Height of the box; default beta + (2p+1) max phi^2 + 1.
    pub lambda_inf: Option<f64>,
    /// Corner excision.
    pub epsilon: f64,
    /// Override of the integration start (negative far field).
    pub x_start: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub renorm_threshold: f64,
    /// Base lambda-grid resolution of the Gamma2 sweeps.
    pub lambda_grid: usize,
    /// Kernel/rank tolerance for intersection decisions.
    pub kernel_tol: f64,
    /// Zero tolerance for the I1/I2 sign decisions.
    pub zero_tol: f64,
    pub solve: SolveConfig,
    /// Escalation rounds when the two Morse-index routes disagree.
    pub max_escalations: usize,
}

impl Default for MaslovBoxConfig {
    fn default() -> Self {
        MaslovBoxConfig {
            ell: None,
            lambda_inf: None,
            epsilon: 1e-3,
            x_start: None,
            rtol: 1e-10,
            atol: 1e-12,
            renorm_threshold: 1e6,
            lambda_grid: 160,
            kernel_tol: 1e-8,
            zero_tol: 1e-8,
            solve: SolveConfig::default(),
            max_escalations: 2,
        }
    }
}

impl MaslovBoxConfig {
    pub fn ode_opts(&self) -> OdeOpts {
        OdeOpts {
            rtol: self.rtol,
            atol: self.atol,
            renorm_threshold: self.renorm_threshold,
            ..OdeOpts::default()
        }
    }

    pub fn resolve(&self, profile: &WaveProfile) -> ResolvedConfig {
        let ell = self.ell.unwrap_or(match profile.source() {
            ProfileSource::KarlssonHook => 6.0,
            _ => profile.support_halfwidth + 2.0,
        });
        let lambda_inf = self.lambda_inf.unwrap_or_else(|| {
            let m2 = profile.max_abs_phi().powi(2);
            profile.params.beta + (2.0 * profile.params.power_p as f64 + 1.0) * m2 + 1.0
        });
        ResolvedConfig {
            ell,
            lambda_inf,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ResolvedConfig {
    pub ell: f64,
    pub lambda_inf: f64,
    pub epsilon: f64,
}

/// A detected crossing with its per-order signature data.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CrossingRecord {
    pub coordinate: f64,
    pub dim: usize,
    /// Per-order (order, n_plus, n_minus).
    pub signatures: Vec<(usize, usize, usize)>,
    pub even_touch: bool,
}

impl CrossingRecord {
    fn from_series(loc: &CrossingLocation, series: &CrossingFormSeries) -> Self {
        CrossingRecord {
            coordinate: loc.coordinate,
            dim: loc.dim,
            signatures: series
                .orders
                .iter()
                .map(|o| (o.order, o.n_plus, o.n_minus))
                .collect(),
            even_touch: loc.even_touch,
        }
    }
}

/// Result of the two-route Morse index computation for one scalar operator.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MorseIndexResult {
    pub kind_label: String,
    pub count_via_conjugate_points: usize,
    pub count_via_lambda_sweep: usize,
    pub conjugate_points: Vec<CrossingRecord>,
    pub lambda_crossings: Vec<CrossingRecord>,
    /// Signed Maslov index of the spatial edge (interior conventions).
    pub gamma1_index: i64,
    /// Signed Maslov index of the lambda edge on [epsilon, lambda_inf].
    pub gamma2_index: i64,
    /// All spatial crossings sign-definite with the expected sign.
    pub monotone: bool,
    pub dimension_closure_ok: bool,
    pub max_lagrangian_defect: f64,
}

/// Verdicts of the stability analysis.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Verdicts {
    pub jones_grillakis_unstable: bool,
    pub vk_verdict: String,
    /// With P = 1, Q = 0 and I2 < 0; the spectrum is then confined to the
    /// real and imaginary axes with no real unstable point spectrum.
    pub spectrum_on_imaginary_axis: bool,
}

/// Consistency data of one run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConsistencyData {
    pub valid: bool,
    pub failed_identities: Vec<String>,
    pub gamma1_n_index: i64,
    pub gamma2_n_index: i64,
    pub corner_contribution: i8,
    pub corner_routes_agree: bool,
    pub corner_first_order_norm: f64,
    pub homotopy_sum: i64,
    pub gamma3_crossings: usize,
    pub gamma4_crossings: usize,
    pub max_lagrangian_defect: f64,
    pub dimension_closure_ok: bool,
    pub monotonicity_ok: bool,
    pub profile_residual: f64,
}

/// The full stability report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StabilityReport {
    pub beta: f64,
    pub sigma2: i8,
    pub power_p: u32,
    pub profile_source: String,
    pub support_halfwidth: f64,
    pub ell: f64,
    pub lambda_inf: f64,
    pub epsilon: f64,
    pub p: usize,
    pub q: usize,
    pub p_c: usize,
    pub q_c: usize,
    pub i1: f64,
    pub i2: f64,
    pub c: i8,
    pub lower_bound: usize,
    pub n_plus_n_detected: usize,
    pub n_real_crossings: Vec<f64>,
    pub l_plus: MorseIndexResult,
    pub l_minus: MorseIndexResult,
    pub verdicts: Verdicts,
    pub consistency: ConsistencyData,
}

/// Compute the Morse index of L+ or L- both by conjugate points (spatial
/// edge at lambda = 0 against the asymptotic stable plane) and by the
/// lambda-edge crossing count; the two must agree.
pub fn morse_index(
    kind: SystemKind,
    profile: &WaveProfile,
    cfg: &MaslovBoxConfig,
) -> Result<MorseIndexResult> {
    let resolved = cfg.resolve(profile);
    morse_index_resolved(kind, profile, cfg, &resolved)
}

fn morse_index_resolved(
    kind: SystemKind,
    profile: &WaveProfile,
    cfg: &MaslovBoxConfig,
    resolved: &ResolvedConfig,
) -> Result<MorseIndexResult> {
    assert!(matches!(kind, SystemKind::LPlus | SystemKind::LMinus));
    let system = LinearSystem::new(kind, profile.clone());
    let opts = cfg.ode_opts();
    let locate = LocateOpts {
        rank_tol: cfg.kernel_tol,
        ..LocateOpts::default()
    };

    // ---- spatial edge: conjugate points against S(0) ----
    let bundle = integrate_unstable_cfg(&system, 0.0, cfg, resolved.ell)?;
    let s0 = stable_frame_block(kind, &profile.params, 0.0)?;
    let x_lo = bundle.path.x_first();
    let pts = locate_conjugate_points(
        &bundle,
        &s0,
        (x_lo, resolved.ell - resolved.epsilon),
        &locate,
    )?;
    let s0_frame = LagrangianFrame::graph(&s0).matrix();
    let mut conj_records = Vec::new();
    let mut p_conj = 0usize;
    let mut gamma1 = 0i64;
    let mut monotone = true;
    let mut closure_ok = true;
    for loc in pts.iter().filter(|l| !l.at_boundary) {
        let z0 = bundle.frame_at(loc.coordinate)?;
        let series = crossing_form_series(
            &system,
            0.0,
            loc.coordinate,
            &z0,
            &s0_frame,
            &SeriesOpts {
                tol: cfg.kernel_tol,
                ..SeriesOpts::default()
            },
        )?;
        closure_ok &= series.closed;
        p_conj += series.dim_w1;
        gamma1 += series
            .contribution(crate::forms::PathPosition::Interior)
            .value;
        let expected_negative = kind == SystemKind::LPlus;
        let definite = if expected_negative {
            series.n_minus_total() == series.dim_w1
        } else {
            series.n_plus_total() == series.dim_w1
        };
        monotone &= definite;
        conj_records.push(CrossingRecord::from_series(loc, &series));
    }

    // ---- lambda edge: crossings of the bundle pair on [epsilon, lambda_inf] ----
    let mut grid = cfg.lambda_grid;
    let mut attempt = 0usize;
    loop {
        let crossings = locate_lambda_crossings(
            &system,
            resolved.ell,
            (resolved.epsilon, resolved.lambda_inf),
            grid,
            &opts,
            &locate,
        )?;
        let mut p_sweep = 0usize;
        let mut gamma2 = 0i64;
        let mut lam_records = Vec::new();
        for loc in &crossings {
            let (dim, _basis, form) =
                relative_lambda_form(&system, resolved.ell, loc.coordinate, &opts, 1e-5)?;
            let (np, nm, _sig) = partial_signatures(&form, 1e-6);
            p_sweep += dim;
            gamma2 += np as i64 - nm as i64;
            let expected_positive = kind == SystemKind::LPlus;
            monotone &= if expected_positive { nm == 0 && np == dim } else { np == 0 && nm == dim };
            lam_records.push(CrossingRecord {
                coordinate: loc.coordinate,
                dim,
                signatures: vec![(1, np, nm)],
                even_touch: loc.even_touch,
            });
        }
        if p_sweep == p_conj || attempt >= cfg.max_escalations {
            if p_sweep != p_conj {
                return Err(CoreError::Inconsistency(format!(
                    "{}: conjugate-point count {} != lambda-sweep count {} (grid {})",
                    kind.label(),
                    p_conj,
                    p_sweep,
                    grid
                )));
            }
            return Ok(MorseIndexResult {
                kind_label: kind.label().to_string(),
                count_via_conjugate_points: p_conj,
                count_via_lambda_sweep: p_sweep,
                conjugate_points: conj_records,
                lambda_crossings: lam_records,
                gamma1_index: gamma1,
                gamma2_index: gamma2,
                monotone,
                dimension_closure_ok: closure_ok,
                max_lagrangian_defect: bundle.max_lagrangian_defect(),
            });
        }
        attempt += 1;
        grid *= 4;
    }
}

fn integrate_unstable_cfg(
    system: &LinearSystem,
    lambda: f64,
    cfg: &MaslovBoxConfig,
    x_end: f64,
) -> Result<BundlePath> {
    integrate_unstable(system, lambda, cfg.x_start, x_end, &cfg.ode_opts())
}

/// Corner contribution: arrival along the spatial edge contributes +1 and the
/// departure along the lambda edge contributes -n_minus of the second-order
/// form diag(2 I1, -2 I2); the result must match the sign table.
pub fn corner_contribution(i1: f64, i2: f64, zero_tol: f64) -> Result<(i8, bool)> {
    let table = correction_term(i1, i2, zero_tol)?;
    let m2 = DMatrix::from_row_slice(2, 2, &[2.0 * i1, 0.0, 0.0, -2.0 * i2]);
    let (_np, nm, _sig) = partial_signatures(&m2, 1e-12);
    let via_form = 1 - nm as i8;
    Ok((table, table == via_form))
}

/// Scan the Gamma3 edge (x at lambda_inf) for crossings against the stable
/// bundle at ell. Returns number of detected crossings.
fn gamma3_crossings(
    kind: SystemKind,
    profile: &WaveProfile,
    cfg: &MaslovBoxConfig,
    resolved: &ResolvedConfig,
) -> Result<usize> {
    let system = LinearSystem::new(kind, profile.clone());
    let opts = cfg.ode_opts();
    let zs = integrate_stable(&system, resolved.lambda_inf, None, resolved.ell, &opts)?;
    let ref_frame = crate::bundles::orthonormalized(zs.final_frame())?;
    let zu = integrate_unstable_cfg(&system, resolved.lambda_inf, cfg, resolved.ell)?;
    let mut count = 0usize;
    let mut prev_sign = 0.0f64;
    for node in &zu.path.nodes {
        let zq = crate::bundles::orthonormalized(&node.z)?;
        let m = crate::symplectic::concat_cols(&zq, &ref_frame);
        let d = m.determinant();
        let sv = m.singular_values();
        if sv.min() / sv.max() < cfg.kernel_tol {
            count += 1;
        }
        if prev_sign != 0.0 && d.signum() != prev_sign {
            count += 1;
        }
        prev_sign = d.signum();
    }
    Ok(count)
}

/// Scan the Gamma4 edge (lambda at x = -infinity) for crossings of the
/// asymptotic unstable plane with the stable bundle at ell.
fn gamma4_crossings(
    kind: SystemKind,
    profile: &WaveProfile,
    cfg: &MaslovBoxConfig,
    resolved: &ResolvedConfig,
) -> Result<usize> {
    let system = LinearSystem::new(kind, profile.clone());
    let opts = cfg.ode_opts();
    let n_grid = 33;
    let mut count = 0usize;
    let mut prev_sign = 0.0f64;
    for i in 0..=n_grid {
        let lam = resolved.lambda_inf * (i as f64) / (n_grid as f64);
        let u = crate::systems::unstable_frame_block(kind, &profile.params, lam)?;
        let fu = crate::bundles::orthonormalized(&LagrangianFrame::graph(&u).matrix())?;
        let zs = integrate_stable(&system, lam, None, resolved.ell, &opts)?;
        let qs = crate::bundles::orthonormalized(zs.final_frame())?;
        let m = crate::symplectic::concat_cols(&fu, &qs);
        let d = m.determinant();
        let sv = m.singular_values();
        if sv.min() / sv.max() < cfg.kernel_tol {
            count += 1;
        }
        if prev_sign != 0.0 && d.signum() != prev_sign {
            count += 1;
        }
        prev_sign = d.signum();
    }
    Ok(count)
}

/// The corner crossing data of the N system at (ell, 0).
struct CornerData {
    first_order_norm: f64,
    second_order: CrossingFormSeries,
    dim: usize,
}

fn corner_series(
    profile: &WaveProfile,
    cfg: &MaslovBoxConfig,
    resolved: &ResolvedConfig,
    i1: f64,
    i2: f64,
) -> Result<CornerData> {
    let system = LinearSystem::new(SystemKind::NOperator, profile.clone());
    let opts = cfg.ode_opts();
    // first-order relative form at lambda = 0 by quadrature: identically zero
    let (dim, _basis, g1) = relative_lambda_form(&system, resolved.ell, 0.0, &opts, 1e-5)?;
    let g1_norm = g1.norm();
    // second-order form on the kernel-solution basis (translation, phase):
    // diag(2 I1, -2 I2)
    let (phase, translation) = n_kernel_solutions(profile, resolved.ell);
    let mut basis = DMatrix::zeros(8, 2);
    basis.set_column(0, &translation);
    basis.set_column(1, &phase);
    let m2 = DMatrix::from_row_slice(2, 2, &[2.0 * i1, 0.0, 0.0, -2.0 * i2]);
    let (np2, nm2, _) = partial_signatures(&m2, 1e-12);
    let series = CrossingFormSeries {
        location: 0.0,
        variable: Variable::Lambda,
        dim_w1: dim,
        orders: vec![
            crate::forms::OrderData {
                order: 1,
                matrix: g1,
                basis: basis.clone(),
                n_plus: 0,
                n_minus: 0,
            },
            crate::forms::OrderData {
                order: 2,
                matrix: m2,
                basis,
                n_plus: np2,
                n_minus: nm2,
            },
        ],
        closed: np2 + nm2 == dim,
    };
    Ok(CornerData {
        first_order_norm: g1_norm,
        second_order: series,
        dim,
    })
}

/// Assemble the full stability report for a profile.
pub fn assemble_report(profile: &WaveProfile, cfg: &MaslovBoxConfig) -> Result<StabilityReport> {
    profile.params.validate()?;
    let resolved = cfg.resolve(profile);
    let mut failed: Vec<String> = Vec::new();

    // profile residual policy: fatal for analytic profiles, reported for sampled
    let grid = crate::profiles::linspace(
        -profile.support_halfwidth.min(30.0),
        profile.support_halfwidth.min(30.0),
        401,
    );
    let resid = residual_norm(profile, &grid);
    if !profile.is_sampled() && resid > 1e-9 {
        return Err(CoreError::ProfileValidation(format!(
            "standing-wave residual {resid:.3e} too large for an analytic profile"
        )));
    }

    // Morse indices for both scalar operators
    let (lp, lm) = rayon::join(
        || morse_index_resolved(SystemKind::LPlus, profile, cfg, &resolved),
        || morse_index_resolved(SystemKind::LMinus, profile, cfg, &resolved),
    );
    let lp = lp?;
    let lm = lm?;
    let p = lp.count_via_lambda_sweep;
    let q = lm.count_via_lambda_sweep;
    let p_c = lp.count_via_conjugate_points;
    let q_c = lm.count_via_conjugate_points;

    // signed edge identities for the scalar problems
    if lp.gamma1_index != -(p_c as i64) {
        failed.push(format!(
            "L+ spatial edge index {} != -p_c = {}",
            lp.gamma1_index, -(p_c as i64)
        ));
    }
    if lm.gamma1_index != q_c as i64 {
        failed.push(format!(
            "L- spatial edge index {} != q_c = {}",
            lm.gamma1_index, q_c
        ));
    }
    if lp.gamma2_index != p as i64 {
        failed.push(format!(
            "L+ lambda edge index {} != P = {}",
            lp.gamma2_index, p
        ));
    }
    if lm.gamma2_index != -(q as i64) {
        failed.push(format!(
            "L- lambda edge index {} != -Q = {}",
            lm.gamma2_index, q
        ));
    }

    // inhomogeneous solves and the corner
    let u_hat = solve_inhomogeneous(InhomogeneousKind::LPlusPhi, profile, &cfg.solve)?;
    let v_hat = solve_inhomogeneous(InhomogeneousKind::LMinusPhiX, profile, &cfg.solve)?;
    let (i1, i2) = crate::solves::compute_integrals(profile, &u_hat, &v_hat);
    let (c, corner_routes_agree) = corner_contribution(i1, i2, cfg.zero_tol)?;

    // N-system lambda sweep on [epsilon, lambda_inf]
    let n_system = LinearSystem::new(SystemKind::NOperator, profile.clone());
    let opts = cfg.ode_opts();
    let locate = LocateOpts {
        rank_tol: cfg.kernel_tol,
        ..LocateOpts::default()
    };
    let n_crossings = locate_lambda_crossings(
        &n_system,
        resolved.ell,
        (resolved.epsilon, resolved.lambda_inf),
        cfg.lambda_grid,
        &opts,
        &locate,
    )?;
    let mut n_detected = 0usize;
    let mut gamma2_n = 0i64;
    let mut n_cross_lams = Vec::new();
    let mut n_signs_resolved = true;
    for loc in &n_crossings {
        let (dim, _basis, form) =
            relative_lambda_form(&n_system, resolved.ell, loc.coordinate, &opts, 1e-5)?;
        let (np, nm, _) = partial_signatures(&form, 1e-6);
        n_detected += dim;
        if np + nm < dim {
            n_signs_resolved = false;
            failed.push(format!(
                "N crossing at lambda = {:.6} has a degenerate first-order form; higher lambda-order data unavailable away from the corner",
                loc.coordinate
            ));
        }
        gamma2_n += np as i64 - nm as i64;
        n_cross_lams.push(loc.coordinate);
    }

    // corner analysis
    let corner = corner_series(profile, cfg, &resolved, i1, i2)?;
    if corner.dim != 2 {
        failed.push(format!(
            "corner intersection dimension {} != 2 (simple-kernel hypothesis)",
            corner.dim
        ));
    }
    let corner_scale = (1.0 + i1.abs() + i2.abs()).max(1.0);
    if corner.first_order_norm > 1e-6 * corner_scale {
        failed.push(format!(
            "corner first-order lambda form not zero: |m1| = {:.3e}",
            corner.first_order_norm
        ));
    }
    if !corner.second_order.closed {
        failed.push("corner second-order form degenerate (I1 or I2 vanishes)".into());
    }

    // Gamma3 / Gamma4 emptiness
    let mut g3 = 0;
    let mut g4 = 0;
    for kind in [SystemKind::LPlus, SystemKind::LMinus, SystemKind::NOperator] {
        g3 += gamma3_crossings(kind, profile, cfg, &resolved)?;
        g4 += gamma4_crossings(kind, profile, cfg, &resolved)?;
    }
    if g3 > 0 {
        failed.push(format!("{} crossings detected on the Gamma3 edge", g3));
    }
    if g4 > 0 {
        failed.push(format!("{} crossings detected on the Gamma4 edge", g4));
    }

    // homotopy identity: (Q - P) + c + Gamma2(N) = 0
    let gamma1_n = q as i64 - p as i64;
    let homotopy_sum = gamma1_n + c as i64 + gamma2_n;
    if homotopy_sum != 0 && n_signs_resolved {
        failed.push(format!(
            "homotopy sum Gamma1 + c + Gamma2 = {gamma1_n} + {c} + {gamma2_n} = {homotopy_sum} != 0"
        ));
    }

    let lower_bound = (p as i64 - q as i64 - c as i64).unsigned_abs() as usize;
    if n_detected < lower_bound {
        failed.push(format!(
            "detected real crossings {} below the lower bound {}",
            n_detected, lower_bound
        ));
    }

    // verdicts
    let jones_grillakis_unstable = (p as i64 - q as i64).abs() >= 2;
    let (vk_verdict, on_axis) = if p == 1 && q == 0 {
        if i2 > cfg.zero_tol {
            ("unstable".to_string(), false)
        } else if i2 < -cfg.zero_tol {
            ("stable".to_string(), true)
        } else {
            ("not_applicable".to_string(), false)
        }
    } else {
        ("not_applicable".to_string(), false)
    };

    let max_defect = lp
        .max_lagrangian_defect
        .max(lm.max_lagrangian_defect);
    let monotonicity_ok = lp.monotone && lm.monotone;
    let dimension_closure_ok = lp.dimension_closure_ok && lm.dimension_closure_ok;
    if !monotonicity_ok {
        failed.push("sign-definiteness of scalar-problem crossings violated".into());
    }
    if !dimension_closure_ok {
        failed.push("dimension closure failed at a crossing".into());
    }
    if !corner_routes_agree {
        failed.push("corner contribution table disagrees with the form route".into());
    }

    let valid = failed.is_empty();
    Ok(StabilityReport {
        beta: profile.params.beta,
        sigma2: profile.params.sigma2,
        power_p: profile.params.power_p,
        profile_source: match profile.source() {
            ProfileSource::KarlssonHook => "kh".into(),
            ProfileSource::Analytic => "analytic".into(),
            ProfileSource::Sampled => "sampled".into(),
        },
        support_halfwidth: profile.support_halfwidth,
        ell: resolved.ell,
        lambda_inf: resolved.lambda_inf,
        epsilon: resolved.epsilon,
        p,
        q,
        p_c,
        q_c,
        i1,
        i2,
        c,
        lower_bound,
        n_plus_n_detected: n_detected,
        n_real_crossings: n_cross_lams,
        l_plus: lp,
        l_minus: lm,
        verdicts: Verdicts {
            jones_grillakis_unstable,
            vk_verdict,
            spectrum_on_imaginary_axis: on_axis,
        },
        consistency: ConsistencyData {
            valid,
            failed_identities: failed,
            gamma1_n_index: gamma1_n,
            gamma2_n_index: gamma2_n,
            corner_contribution: c,
            corner_routes_agree,
            corner_first_order_norm: corner.first_order_norm,
            homotopy_sum,
            gamma3_crossings: g3,
            gamma4_crossings: g4,
            max_lagrangian_defect: max_defect,
            dimension_closure_ok,
            monotonicity_ok,
            profile_residual: resid,
        },
    })
}

/// Reference-plane interchange check: conjugate-point counts using the
/// asymptotic stable plane and using the stable bundle at ell agree.
pub fn reference_interchange_check(
    kind: SystemKind,
    profile: &WaveProfile,
    cfg: &MaslovBoxConfig,
) -> Result<(usize, usize)> {
    let resolved = cfg.resolve(profile);
    let system = LinearSystem::new(kind, profile.clone());
    let opts = cfg.ode_opts();
    let locate = LocateOpts {
        rank_tol: cfg.kernel_tol,
        ..LocateOpts::default()
    };
    let bundle = integrate_unstable_cfg(&system, 0.0, cfg, resolved.ell)?;
    let s0 = stable_frame_block(kind, &profile.params, 0.0)?;
    let count_s = locate_conjugate_points(
        &bundle,
        &s0,
        (bundle.path.x_first(), resolved.ell - resolved.epsilon),
        &locate,
    )?
    .iter()
    .filter(|l| !l.at_boundary)
    .map(|l| l.dim)
    .sum::<usize>();
    // stable-bundle reference: integrate E^s to ell and put it in graph form
    let zs = integrate_stable(&system, 0.0, None, resolved.ell, &opts)?;
    let zf = zs.final_frame();
    let n = kind.half_dim();
    let x = zf.rows(0, n).into_owned();
    let y = zf.rows(n, n).into_owned();
    let s_ell = &y * &x
        .try_inverse()
        .ok_or_else(|| CoreError::Precondition("stable bundle not in graph form at ell".into()))?;
    let count_e = locate_conjugate_points(
        &bundle,
        &s_ell,
        (bundle.path.x_first(), resolved.ell - resolved.epsilon),
        &locate,
    )?
    .iter()
    .filter(|l| !l.at_boundary)
    .map(|l| l.dim)
    .sum::<usize>();
    Ok((count_s, count_e))
}

//! Configuration, execution, and persistence for the stability pipeline:
//! runs the full Maslov-box computation from a config, emits eigenvalue-curve
//! CSVs, a JSON stability report, a consistency suite, and a plot script.

use anyhow::{bail, Context};
use maslov_core::bundles::{integrate_unstable, DetectionFn};
use maslov_core::maslovbox::{assemble_report, MaslovBoxConfig, StabilityReport};
use maslov_core::profiles::{Parameters, WaveProfile};
use maslov_core::systems::{stable_frame_block, LinearSystem, SystemKind};
use maslov_core::{CoreError, OdeOpts};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Exit status conventions of the pipeline.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INCONSISTENT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Full run configuration; every field has a default so `--profile kh`
/// reproduces the reference setup (ell = 6).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// "kh" or a path to a sampled-profile file.
    pub profile: String,
    pub beta: Option<f64>,
    pub sigma2: Option<i8>,
    pub power: Option<u32>,
    pub ell: Option<f64>,
    pub lambda_inf: Option<f64>,
    pub epsilon: Option<f64>,
    pub out_dir: PathBuf,
    pub curves: bool,
    pub check: bool,
    pub quiet: bool,
    /// Base lambda-grid resolution of the sweeps.
    pub lambda_grid: Option<usize>,
    /// Curve tracing grid.
    pub curve_lambda_min: f64,
    pub curve_lambda_max: f64,
    pub curve_columns: usize,
    /// Solver grid spacing override.
    pub solve_h: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profile: "kh".into(),
            beta: None,
            sigma2: None,
            power: None,
            ell: None,
            lambda_inf: None,
            epsilon: None,
            out_dir: PathBuf::from("out"),
            curves: false,
            check: false,
            quiet: false,
            lambda_grid: None,
            curve_lambda_min: -0.1,
            curve_lambda_max: 1.5,
            curve_columns: 141,
            solve_h: None,
        }
    }
}

impl RunConfig {
    pub fn load_file(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn box_config(&self) -> MaslovBoxConfig {
        let mut cfg = MaslovBoxConfig {
            ell: self.ell,
            lambda_inf: self.lambda_inf,
            ..MaslovBoxConfig::default()
        };
        if let Some(eps) = self.epsilon {
            cfg.epsilon = eps;
        }
        if let Some(g) = self.lambda_grid {
            cfg.lambda_grid = g;
        }
        if let Some(h) = self.solve_h {
            cfg.solve.h = h;
        }
        cfg
    }

    pub fn resolve_profile(&self) -> anyhow::Result<WaveProfile> {
        if self.profile == "kh" {
            if self.beta.is_some() || self.sigma2.is_some() || self.power.is_some() {
                bail!("the built-in kh profile fixes beta, sigma2 and power");
            }
            return Ok(maslov_core::kh_profile());
        }
        let path = Path::new(&self.profile);
        let beta = self
            .beta
            .ok_or_else(|| anyhow::anyhow!("--beta is required for a file profile"))?;
        let sigma2 = self
            .sigma2
            .ok_or_else(|| anyhow::anyhow!("--sigma2 is required for a file profile"))?;
        let power = self.power.unwrap_or(1);
        let params = Parameters::new(beta, sigma2, power)?;
        Ok(maslov_core::load_sampled_profile(path, params)?)
    }
}

/// One row of the eigenvalue-curve table.
#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub lambda: f64,
    pub x: f64,
    pub operator: String,
    #[serde(skip)]
    pub detection_value: f64,
}

/// Continuation-ordered eigenvalue-curve rows.
#[derive(Debug, Clone, Default)]
pub struct CurveTable {
    pub rows: Vec<CurveRow>,
}

/// Trace the curves det(S(lambda) X(x, lambda) - Y(x, lambda)) = 0 of one
/// scalar operator over a lambda grid; rows are continuation-ordered.
pub fn trace_curves(
    profile: &WaveProfile,
    kind: SystemKind,
    cfg: &RunConfig,
) -> anyhow::Result<CurveTable> {
    let boxcfg = cfg.box_config();
    let resolved = boxcfg.resolve(profile);
    let ode = boxcfg.ode_opts();
    let edge = maslov_core::systems::dispersion_max(&profile.params);
    let lam_lo = cfg.curve_lambda_min.max(edge + 0.02);
    let lam_hi = cfg.curve_lambda_max;
    if !(lam_hi > lam_lo) {
        bail!("empty curve lambda range [{lam_lo}, {lam_hi}]");
    }
    let cols = cfg.curve_columns.max(2);
    let lams: Vec<f64> = (0..cols)
        .map(|i| lam_lo + (lam_hi - lam_lo) * (i as f64) / ((cols - 1) as f64))
        .collect();
    let label = kind.label().replace('+', "plus").replace('-', "minus");
    let sys = LinearSystem::new(kind, profile.clone());
    let columns: Vec<Vec<(f64, f64, f64)>> = lams
        .par_iter()
        .map(|&lam| curve_column(&sys, lam, resolved.ell, &ode))
        .collect::<Result<Vec<_>, CoreError>>()?;
    // continuation ordering: greedy nearest-neighbor chains across columns
    let mut chains: Vec<Vec<(f64, f64, f64)>> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let window = 0.8;
    for (ci, col) in columns.iter().enumerate() {
        let lam = lams[ci];
        let mut next_open: Vec<usize> = Vec::new();
        let mut used = vec![false; col.len()];
        for &chain_idx in &open {
            let last_x = chains[chain_idx].last().unwrap().1;
            let mut best: Option<(usize, f64)> = None;
            for (ri, root) in col.iter().enumerate() {
                if used[ri] {
                    continue;
                }
                let d = (root.1 - last_x).abs();
                if d < window && best.map(|(_, bd)| d < bd).unwrap_or(true) {
                    best = Some((ri, d));
                }
            }
            if let Some((ri, _)) = best {
                used[ri] = true;
                chains[chain_idx].push((lam, col[ri].1, col[ri].2));
                next_open.push(chain_idx);
            }
        }
        for (ri, root) in col.iter().enumerate() {
            if !used[ri] {
                chains.push(vec![(lam, root.1, root.2)]);
                next_open.push(chains.len() - 1);
            }
        }
        open = next_open;
    }
    let mut table = CurveTable::default();
    for chain in chains {
        for (lam, x, d) in chain {
            table.rows.push(CurveRow {
                lambda: lam,
                x,
                operator: label.clone(),
                detection_value: d,
            });
        }
    }
    Ok(table)
}

fn curve_column(
    sys: &LinearSystem,
    lam: f64,
    ell: f64,
    ode: &OdeOpts,
) -> Result<Vec<(f64, f64, f64)>, CoreError> {
    let s = stable_frame_block(sys.kind, &sys.params(), lam)?;
    let bundle = integrate_unstable(sys, lam, None, ell, ode)?;
    let det = DetectionFn {
        bundle: &bundle,
        s_ref: s,
    };
    // scan stored nodes for sign changes, refine by bisection
    let mut roots = Vec::new();
    let nodes = &bundle.path.nodes;
    let mut prev: Option<(f64, f64)> = None;
    for node in nodes {
        let d = maslov_core::bundles::detection_value(&node.z, &det.s_ref);
        if let Some((px, pd)) = prev {
            if pd != 0.0 && d != 0.0 && pd.signum() != d.signum() {
                let (mut a, mut b, mut da) = (px, node.x, pd);
                for _ in 0..60 {
                    if b - a < 1e-11 {
                        break;
                    }
                    let mid = 0.5 * (a + b);
                    let dm = det.eval(mid)?;
                    if dm == 0.0 || dm.signum() == da.signum() {
                        a = mid;
                        da = dm;
                    } else {
                        b = mid;
                    }
                }
                let root = 0.5 * (a + b);
                roots.push((lam, root, det.eval(root)?));
            }
        }
        prev = Some((node.x, d));
    }
    Ok(roots)
}

/// Results of the consistency suite (`--check`).
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencySuite {
    pub ell_independence: bool,
    pub epsilon_independence: bool,
    pub renorm_invariance: bool,
    pub reference_interchange: bool,
    pub homotopy_sum_zero: bool,
    pub details: Vec<String>,
}

/// Run the consistency suite: the headline integers must be invariant under
/// ell -> ell + 1, epsilon sweeps, and renormalization-threshold changes.
pub fn consistency_suite(
    profile: &WaveProfile,
    cfg: &RunConfig,
    base: &StabilityReport,
) -> anyhow::Result<ConsistencySuite> {
    let mut details = Vec::new();
    let key = |r: &StabilityReport| (r.p, r.q, r.c, r.lower_bound);
    let base_key = key(base);

    let run_with = |mutate: &dyn Fn(&mut MaslovBoxConfig)| -> anyhow::Result<StabilityReport> {
        let mut boxcfg = cfg.box_config();
        mutate(&mut boxcfg);
        Ok(assemble_report(profile, &boxcfg)?)
    };

    let ell_plus = run_with(&|c: &mut MaslovBoxConfig| {
        c.ell = Some(base.ell + 1.0);
    })?;
    let ell_independence = key(&ell_plus) == base_key;
    if !ell_independence {
        details.push(format!(
            "ell+1 changed (P,Q,c,bound): {:?} -> {:?}",
            base_key,
            key(&ell_plus)
        ));
    }
    // crossings of the N sweep must also be reproduced at the shifted edge
    let mut n_match = true;
    if base.n_real_crossings.len() == ell_plus.n_real_crossings.len() {
        for (a, b) in base
            .n_real_crossings
            .iter()
            .zip(ell_plus.n_real_crossings.iter())
        {
            if (a - b).abs() > 1e-6 {
                n_match = false;
            }
        }
    } else {
        n_match = false;
    }
    if !n_match {
        details.push(format!(
            "N crossings changed under ell+1: {:?} -> {:?}",
            base.n_real_crossings, ell_plus.n_real_crossings
        ));
    }

    let mut epsilon_independence = true;
    for eps in [1e-2, 1e-3, 1e-4] {
        let r = run_with(&|c: &mut MaslovBoxConfig| {
            c.epsilon = eps;
        })?;
        if key(&r) != base_key {
            epsilon_independence = false;
            details.push(format!("epsilon {eps} changed: {:?}", key(&r)));
        }
    }

    let renorm = run_with(&|c: &mut MaslovBoxConfig| {
        c.renorm_threshold = 1e3;
    })?;
    let renorm_invariance = key(&renorm) == base_key;
    if !renorm_invariance {
        details.push(format!(
            "renormalization threshold 1e3 changed: {:?}",
            key(&renorm)
        ));
    }

    let mut reference_interchange = true;
    for kind in [SystemKind::LPlus, SystemKind::LMinus] {
        let (a, b) =
            maslov_core::maslovbox::reference_interchange_check(kind, profile, &cfg.box_config())?;
        if a != b {
            reference_interchange = false;
            details.push(format!("{}: reference interchange {a} vs {b}", kind.label()));
        }
    }

    let homotopy_sum_zero = base.consistency.homotopy_sum == 0;
    if !homotopy_sum_zero {
        details.push(format!("homotopy sum {}", base.consistency.homotopy_sum));
    }

    Ok(ConsistencySuite {
        ell_independence: ell_independence && n_match,
        epsilon_independence,
        renorm_invariance,
        reference_interchange,
        homotopy_sum_zero,
        details,
    })
}

/// Artifacts produced by a run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: StabilityReport,
    pub report_path: PathBuf,
    pub consistency: Option<ConsistencySuite>,
}

/// Execute the full pipeline per the configuration, writing report.json and
/// optional curve CSVs, plot script, and consistency.json into the output
/// directory.
pub fn run(cfg: &RunConfig) -> anyhow::Result<RunArtifacts> {
    if !cfg.out_dir.exists() {
        bail!(ConfigIo(format!(
            "output directory {} does not exist",
            cfg.out_dir.display()
        )));
    }
    let profile = cfg.resolve_profile()?;
    let boxcfg = cfg.box_config();
    let report = assemble_report(&profile, &boxcfg)?;

    let report_path = cfg.out_dir.join("report.json");
    write_json(&report_path, &report)?;

    if cfg.curves {
        for (kind, name) in [
            (SystemKind::LPlus, "curves_lplus.csv"),
            (SystemKind::LMinus, "curves_lminus.csv"),
        ] {
            let table = trace_curves(&profile, kind, cfg)?;
            let path = cfg.out_dir.join(name);
            write_curve_csv(&path, &table)?;
        }
        std::fs::write(cfg.out_dir.join("plot.gp"), plot_script(&report))
            .context("writing plot.gp")?;
    }

    let consistency = if cfg.check {
        let suite = consistency_suite(&profile, cfg, &report)?;
        write_json(&cfg.out_dir.join("consistency.json"), &suite)?;
        Some(suite)
    } else {
        None
    };

    if !cfg.quiet {
        println!(
            "P = {}, Q = {}, p_c = {}, q_c = {}, I1 = {:.6}, I2 = {:.6}, c = {}, n+(N) >= {}",
            report.p, report.q, report.p_c, report.q_c, report.i1, report.i2, report.c,
            report.lower_bound
        );
        println!(
            "verdicts: Jones-Grillakis unstable = {}, VK = {}{}",
            report.verdicts.jones_grillakis_unstable,
            report.verdicts.vk_verdict,
            if report.verdicts.spectrum_on_imaginary_axis {
                " (spectrum confined to the real and imaginary axes; no real unstable eigenvalues)"
            } else {
                ""
            }
        );
        println!(
            "consistency: valid = {}, homotopy sum = {}",
            report.consistency.valid, report.consistency.homotopy_sum
        );
    }
    Ok(RunArtifacts {
        report,
        report_path,
        consistency,
    })
}

/// Marker for configuration/IO failures (exit code 2).
#[derive(Debug)]
pub struct ConfigIo(pub String);

impl std::fmt::Display for ConfigIo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigIo {}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing")?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| {
        anyhow::Error::new(ConfigIo(format!("writing {}: {e}", path.display())))
    })?;
    Ok(())
}

fn write_curve_csv(path: &Path, table: &CurveTable) -> anyhow::Result<()> {
    let mut out = String::from("lambda,x,operator\n");
    for row in &table.rows {
        out.push_str(&format!("{:.12e},{:.12e},{}\n", row.lambda, row.x, row.operator));
    }
    std::fs::write(path, out)
        .map_err(|e| anyhow::Error::new(ConfigIo(format!("writing {}: {e}", path.display()))))?;
    Ok(())
}

fn plot_script(report: &StabilityReport) -> String {
    format!(
        "# Eigenvalue curves in the (lambda, x) plane; reads only the CSVs.\n\
         # Usage: gnuplot plot.gp\n\
         set terminal pngcairo size 1100,480\n\
         set output 'curves.png'\n\
         set multiplot layout 1,2\n\
         set xlabel 'lambda'\n\
         set ylabel 'x'\n\
         set datafile separator ','\n\
         set key off\n\
         set yrange [-{ell}:{ell}]\n\
         set arrow 1 from 0, graph 0 to 0, graph 1 nothead dt 2 lc 'gray'\n\
         set title 'L+ curves'\n\
         plot 'curves_lplus.csv' every ::1 using 1:2 with points pt 7 ps 0.35 lc rgb 'royalblue'\n\
         set title 'L- curves'\n\
         plot 'curves_lminus.csv' every ::1 using 1:2 with points pt 7 ps 0.35 lc rgb 'dark-red'\n\
         unset multiplot\n",
        ell = report.ell
    )
}

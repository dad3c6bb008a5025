use clap::{Args, Parser, Subcommand};
use maslov_cli::{ConfigIo, RunConfig, EXIT_CONFIG, EXIT_INCONSISTENT, EXIT_OK};
use maslov_core::CoreError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Maslov-index spectral stability for fourth-order NLS solitons.
#[derive(Parser)]
#[command(name = "maslov4", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full stability pipeline and write artifacts.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Optional JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in profile "kh" or a path to a sampled two-column profile file.
    #[arg(long)]
    profile: Option<String>,
    /// Frequency parameter (file profiles).
    #[arg(long)]
    beta: Option<f64>,
    /// Quadratic dispersion sign -1, 0 or 1 (file profiles).
    #[arg(long)]
    sigma2: Option<i8>,
    /// Nonlinearity exponent p (file profiles; cubic is 1).
    #[arg(long)]
    power: Option<u32>,
    /// Location of the spectral-sweep edge.
    #[arg(long)]
    ell: Option<f64>,
    /// Height of the spectral sweep.
    #[arg(long, value_name = "LAMBDA")]
    lambda_inf: Option<f64>,
    /// Corner excision.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output directory (must exist).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit eigenvalue-curve CSVs and a plot script.
    #[arg(long)]
    curves: bool,
    /// Run the consistency suite and write consistency.json.
    #[arg(long)]
    check: bool,
    /// Suppress the stdout summary.
    #[arg(long)]
    quiet: bool,
}

fn build_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &args.profile {
        cfg.profile = p.clone();
    }
    macro_rules! over {
        ($($f:ident),*) => { $( if args.$f.is_some() { cfg.$f = args.$f; } )* };
    }
    over!(beta, sigma2, power, ell, lambda_inf, epsilon);
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    cfg.curves |= args.curves;
    cfg.check |= args.check;
    cfg.quiet |= args.quiet;
    Ok(cfg)
}

fn classify(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigIo>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::ProfileParse(_))
        | Some(CoreError::ProfileValidation(_))
        | Some(CoreError::InvalidParameters(_)) => EXIT_CONFIG,
        Some(_) => EXIT_INCONSISTENT,
        None => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("MASLOV_THREADS") {
        if let Ok(n) = threads.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let Command::Run(args) = cli.command;
    let cfg = match build_config(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{}", error_json(&e, EXIT_CONFIG));
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match maslov_cli::run(&cfg) {
        Ok(artifacts) => {
            if artifacts.report.consistency.valid {
                ExitCode::from(EXIT_OK as u8)
            } else {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "error": "computation inconsistency",
                        "failed_identities": artifacts.report.consistency.failed_identities,
                        "exit_code": EXIT_INCONSISTENT,
                    })
                );
                ExitCode::from(EXIT_INCONSISTENT as u8)
            }
        }
        Err(e) => {
            let code = classify(&e);
            eprintln!("{}", error_json(&e, code));
            ExitCode::from(code as u8)
        }
    }
}

fn error_json(err: &anyhow::Error, code: i32) -> String {
    serde_json::json!({
        "error": err.to_string(),
        "exit_code": code,
    })
    .to_string()
}

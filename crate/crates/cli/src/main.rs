use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use simplex_sbp::harness::{
    residual_trace, run_convergence, spectral_sweep, verify_operators, write_csv, write_json, ExperimentConfig,
    ExperimentKind,
};
use simplex_sbp::refelem::{build_operators, ElementShape, OperatorConfig};
use simplex_sbp::{Error, Result};

/// Tensor-product SBP operators on triangles and tetrahedra, and a
/// linear-advection solver built on them.
#[derive(Debug, Parser)]
#[command(name = "simplex-sbp", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files (created if missing).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for randomized probe vectors.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for element loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Multiplies the time step chosen by the configured policy.
    #[arg(long, global = true)]
    dt_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Shape {
    Triangle,
    Tetrahedron,
}

impl From<Shape> for ElementShape {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Triangle => ElementShape::Triangle,
            Shape::Tetrahedron => ElementShape::Tetrahedron,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the SBP identity, accuracy and quadrature of the default operators.
    VerifyOperators {
        #[arg(long, value_enum)]
        shape: Option<Shape>,
        /// Operator degree; checks 1..=p with --all.
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        all: bool,
    },
    /// Integrate one configuration and record conservation/energy residuals.
    Run,
    /// Run an h- or p-convergence sweep.
    Sweep,
    /// Spectral radius of the global semi-discrete operator.
    SpectralRadius,
    /// Write the operator matrices of one degree to operators.json.
    ExportOperators {
        #[arg(long, value_enum)]
        shape: Shape,
        #[arg(long)]
        p: usize,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this subcommand needs --config <file>".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(f) = common.dt_factor {
        if !(f > 0.0) {
            return Err(Error::Config(format!("--dt-factor must be positive, got {f}")));
        }
        cfg.dt.courant *= f;
        cfg.dt.fixed = cfg.dt.fixed.map(|dt| dt * f);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: Option<&ExperimentConfig>) -> Result<PathBuf> {
    let dir = common
        .out_dir
        .clone()
        .or_else(|| cfg.and_then(|c| c.out_dir.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn expect_kind(cfg: &ExperimentConfig, allowed: &[ExperimentKind]) -> Result<()> {
    if allowed.contains(&cfg.kind) {
        Ok(())
    } else {
        Err(Error::Config(format!("field `kind`: {:?} is not valid for this subcommand", cfg.kind)))
    }
}

fn verify(common: &Common, shape: Option<Shape>, p: Option<usize>, all: bool) -> Result<()> {
    let (shape, degrees) = match (shape, p) {
        (Some(s), Some(p)) => (s.into(), if all { (1..=p).collect() } else { vec![p] }),
        _ => {
            let cfg = load_config(common)
                .map_err(|e| Error::Config(format!("give --shape and --p, or --config ({e})")))?;
            let degrees = if cfg.sweep_degrees.is_empty() { vec![cfg.degree] } else { cfg.sweep_degrees.clone() };
            (cfg.shape, degrees)
        }
    };
    let reports = verify_operators(shape, &degrees)?;
    println!(
        "{:>3} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "q", "certified", "sbp", "quadrature", "deriv", "extrap", "facet"
    );
    let mut failed = Vec::new();
    for r in &reports {
        println!(
            "{:>3} {:>10} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
            r.degree,
            r.sbp_certified,
            r.max_sbp_identity(),
            r.quadrature,
            r.differentiation,
            r.extrapolation,
            r.max_facet_condition()
        );
        if !(r.max_sbp_identity() <= 1e-12 && r.differentiation <= 1e-9 && r.extrapolation <= 1e-9) {
            failed.push(r.degree);
        }
    }
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("verify.json"), &reports)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(format!("degrees {failed:?} exceed tolerances")))
    }
}

fn run(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    expect_kind(&cfg, &[ExperimentKind::ResidualTrace])?;
    let dir = out_dir(common, Some(&cfg))?;
    let record = residual_trace(&cfg)?;
    write_csv(&dir.join("trace.csv"), &record.snapshots)?;
    write_json(&dir.join("record.json"), &record)?;
    let max_c = record.snapshots.iter().map(|s| s.conservation.abs()).fold(0.0, f64::max);
    let max_e = record.snapshots.iter().map(|s| s.energy).fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{}: {} steps of {:.3e}, L2 error {:.6e}, max |conservation| {:.3e}, max energy {:.3e}",
        record.scheme, record.steps, record.dt, record.l2_error, max_c, max_e
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn sweep(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    expect_kind(&cfg, &[ExperimentKind::HSweep, ExperimentKind::PSweep])?;
    let dir = out_dir(common, Some(&cfg))?;
    let rows = run_convergence(&cfg)?;
    write_csv(&dir.join("convergence.csv"), &rows)?;
    for r in &rows {
        let order = r.order.map_or("-".to_string(), |o| format!("{o:.3}"));
        println!("{} p={} M={} dofs={} error={:.6e} order={}", r.scheme, r.p, r.m, r.dofs, r.l2_error, order);
    }
    println!("wrote {}", dir.join("convergence.csv").display());
    Ok(())
}

fn spectral(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    expect_kind(&cfg, &[ExperimentKind::SpectralRadius])?;
    let dir = out_dir(common, Some(&cfg))?;
    let rows = spectral_sweep(&cfg)?;
    write_csv(&dir.join("spectral_radius.csv"), &rows)?;
    for r in &rows {
        println!("{} p={} M={} rho={:.6e} h*rho/|a|={:.4}", r.scheme, r.p, r.m, r.spectral_radius, r.normalized);
    }
    Ok(())
}

fn export(common: &Common, shape: Shape, p: usize) -> Result<()> {
    let ops = build_operators(&OperatorConfig::default_for(shape.into(), p))?;
    let dir = out_dir(common, None)?;
    let path: &Path = &dir.join("operators.json");
    write_json(path, &ops.export())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::VerifyOperators { shape, p, all } => verify(&cli.common, shape, p, all),
        Command::Run => run(&cli.common),
        Command::Sweep => sweep(&cli.common),
        Command::SpectralRadius => spectral(&cli.common),
        Command::ExportOperators { shape, p } => export(&cli.common, shape, p),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

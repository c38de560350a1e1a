use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use cre_rom_core::microstructure::InclusionSet;
use cre_rom_core::offline::build_offline_on_mesh;
use cre_rom_core::sweep::{
    log_contrasts, run_homogenization, run_sweep, shear_slice, write_homogenization_csv,
    write_sweep_csv,
};
use cre_rom_core::{
    build_offline, load_archive, save_archive, validate_archive, Dimensions, Error, LoadedArchive,
    Mesh, OfflineConfig, ParameterPoint,
};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const THREADS_ENV: &str = "CRE_ROM_THREADS";

#[derive(Parser)]
#[command(
    name = "cre-rom",
    version,
    about = "Certified reduced order models for two-phase plane-strain elasticity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build snapshots, POD bases and reduced operators, and write an archive.
    Offline(OfflineArgs),
    /// Certified evaluation at one parameter point, printed as JSON.
    Evaluate(EvaluateArgs),
    /// Bounds along the shear slice μ = (μ1, 0, 0, 1), as CSV.
    Sweep(SweepArgs),
    /// Effective moduli with certified intervals, as CSV.
    Homogenize(HomogenizeArgs),
    /// Run the invariant suite on an archive.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct OfflineArgs {
    #[arg(long)]
    model_dir: PathBuf,
    /// Cells per side of the structured mesh.
    #[arg(long, default_value_t = 32)]
    mesh_n: usize,
    /// Seed of the inclusion placement.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    n_samples: usize,
    /// Cap on stored displacement modes.
    #[arg(long)]
    n_phi: Option<usize>,
    /// Cap on stored stress modes.
    #[arg(long)]
    n_phi_stress: Option<usize>,
    /// Tagged mesh JSON to use instead of generating one.
    #[arg(long, conflicts_with_all = ["mesh_n", "seed"])]
    mesh: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct DimArgs {
    #[arg(long, default_value_t = 7)]
    n_phi: usize,
    /// Defaults to n_phi + 2.
    #[arg(long)]
    n_phi_stress: Option<usize>,
    /// Defaults to n_phi + 1.
    #[arg(long)]
    n_phi_enriched: Option<usize>,
}

impl DimArgs {
    fn dims(self) -> Dimensions {
        let d = Dimensions::coupled(self.n_phi);
        Dimensions {
            n_phi: self.n_phi,
            n_phi_stress: self.n_phi_stress.unwrap_or(d.n_phi_stress),
            n_phi_enriched: self.n_phi_enriched.unwrap_or(d.n_phi_enriched),
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model_dir: PathBuf,
    /// Parameter point `contrast,e11,e22,e12`.
    #[arg(long, value_parser = parse_mu, allow_hyphen_values = true)]
    mu: ParameterPoint,
    #[command(flatten)]
    dims: DimArgs,
    /// Also run the truth solve and report the true error and effectivities.
    #[arg(long)]
    truth: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[command(flatten)]
    dims: DimArgs,
    #[arg(long)]
    truth: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct HomogenizeArgs {
    #[arg(long)]
    model_dir: PathBuf,
    /// Number of log-spaced contrasts over [0.1, 10].
    #[arg(long, default_value_t = 20)]
    steps: usize,
    /// Explicit contrast list; overrides `--steps`.
    #[arg(long, value_delimiter = ',')]
    contrasts: Option<Vec<f64>>,
    #[command(flatten)]
    dims: DimArgs,
    #[arg(long)]
    truth: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model_dir: PathBuf,
    /// Only the checks that need no truth solve.
    #[arg(long)]
    quick: bool,
}

fn parse_mu(text: &str) -> Result<ParameterPoint, String> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("'{s}': {e}")))
        .collect::<Result<_, _>>()?;
    match values.as_slice() {
        [a, b, c, d] => Ok(ParameterPoint::new(*a, *b, *c, *d)),
        _ => Err(format!(
            "expected four comma-separated values, got {}",
            values.len()
        )),
    }
}

enum Failure {
    Core(Error),
    Io(io::Error),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidArgument(format!(
                "{THREADS_ENV} must be a positive integer, got '{v}'"
            ))
            .into()),
        },
        Err(_) => Ok(None),
    }
}

fn open_archive(dir: &Path) -> Result<LoadedArchive, Failure> {
    let archive = load_archive(dir)?;
    info!(
        "loaded archive {} ({} displacement, {} stress modes)",
        dir.display(),
        archive.meta.n_phi_max,
        archive.meta.n_phi_stress_max
    );
    Ok(archive)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn offline(args: OfflineArgs) -> Result<(), Failure> {
    let mut config = OfflineConfig {
        mesh_n: args.mesh_n,
        n_samples: args.n_samples,
        max_modes: args.n_phi,
        max_stress_modes: args.n_phi_stress,
        threads: threads_from_env()?,
        ..OfflineConfig::default()
    };
    config.packing.seed = args.seed;
    let build = match &args.mesh {
        Some(path) => build_offline_on_mesh(&config, Mesh::load_json(path)?, None::<InclusionSet>)?,
        None => build_offline(&config)?,
    };
    let meta = save_archive(&build, &args.model_dir)?;
    info!(
        "wrote {} ({} arrays, {} displacement and {} stress modes)",
        args.model_dir.display(),
        meta.arrays.len(),
        meta.n_phi_max,
        meta.n_phi_stress_max
    );
    Ok(())
}

fn warn_outside(archive: &LoadedArchive, mu: &ParameterPoint) {
    if !archive.model.domain.contains(mu) {
        warn!("mu = {:?} lies outside the training domain; the bounds remain valid but the model is extrapolating", mu.0);
    }
}

fn evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let archive = open_archive(&args.model_dir)?;
    warn_outside(&archive, &args.mu);
    let dims = args.dims.dims();
    let result = if args.truth {
        archive
            .model
            .evaluate_with_truth(&archive.truth, &args.mu, dims)?
    } else {
        archive.model.evaluate(&args.mu, dims)?
    };
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &result).map_err(|e| io::Error::other(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let archive = open_archive(&args.model_dir)?;
    let points = shear_slice(args.steps)?;
    let truth = args.truth.then_some(&archive.truth);
    let rows = run_sweep(&archive.model, truth, &points, args.dims.dims())?;
    let violations = rows
        .iter()
        .filter_map(|r| {
            r.evaluation
                .truth
                .map(|t| (r.evaluation.nu_low, t.err_true, r.evaluation.nu_up))
        })
        .filter(|(lo, err, up)| lo > err || err > up)
        .count();
    if violations > 0 {
        warn!("{violations} rows violate the bound ordering");
    }
    let mut out = output(&args.output)?;
    write_sweep_csv(&mut out, &rows, args.truth)?;
    out.flush()?;
    Ok(())
}

fn homogenize(args: HomogenizeArgs) -> Result<(), Failure> {
    let archive = open_archive(&args.model_dir)?;
    let contrasts = match args.contrasts {
        Some(c) => c,
        None => log_contrasts(args.steps)?,
    };
    for &c in &contrasts {
        warn_outside(&archive, &ParameterPoint::new(c, 0.0, 0.0, 1.0));
    }
    let truth = args.truth.then_some(&archive.truth);
    let rows = run_homogenization(&archive.model, truth, &contrasts, args.dims.dims())?;
    let mut out = output(&args.output)?;
    write_homogenization_csv(&mut out, &rows, args.truth)?;
    out.flush()?;
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), Failure> {
    let report = validate_archive(&args.model_dir, args.quick);
    let mut out = io::stdout().lock();
    for c in &report.checks {
        writeln!(
            out,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Offline(a) => offline(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Homogenize(a) => homogenize(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_NUMERIC
            })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Validation) => {
            eprintln!("error: validation failed");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

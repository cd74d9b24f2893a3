//! Command-line shell: argument parsing, config loading and overrides,
//! output-directory resolution, and the run/report cycle.

pub mod config;
pub mod output;
pub mod runner;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{config_hash, validate, ExperimentConfig, ExperimentKind, ARTIFACT_VERSION};
use output::{render_report, OutputWriter};
use runner::Tolerances;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] stokeslab_core::Error),
    #[error("i/o failure at {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Core(_) => "execution",
            Self::Io { .. } => "io",
        }
    }

    /// 2 = invalid config, 3 = execution or i/o failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Structured error for scripts: single JSON object on stderr.
pub fn error_json(e: &CliError) -> String {
    serde_json::json!({
        "error": { "code": e.code(), "message": e.to_string() }
    })
    .to_string()
}

#[derive(Debug, Parser)]
#[command(
    name = "stokeslab",
    version = ARTIFACT_VERSION,
    about = "Numerical laboratory for the Stokes operator with Navier slip boundary conditions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Sweep resolvent norms over sector rays and measure the sector constant.
    ProbeSector(RunArgs),
    /// Fit imaginary-power envelopes and compare contour powers to the oracle.
    Powers(RunArgs),
    /// Compare the square-root graph norm against field plus strain norms.
    SqrtDomain(RunArgs),
    /// Measure fractional-domain embedding constants on the 3D box.
    Embedding(RunArgs),
    /// Fit semigroup smoothing and decay rates.
    Semigroup(RunArgs),
    /// Ensemble maximal-regularity ratios across resolutions.
    Maxreg(RunArgs),
    /// Verify the exponential shift identity for the damped problem.
    MuShift(RunArgs),
    /// Verify dilation conjugation of the fractional calculus.
    Scaling(RunArgs),
    /// Parse and validate a config; print its normalized form and hash.
    ValidateConfig(RunArgs),
}

impl Cmd {
    fn split(&self) -> (&RunArgs, Option<ExperimentKind>) {
        match self {
            Self::ProbeSector(a) => (a, Some(ExperimentKind::ProbeSector)),
            Self::Powers(a) => (a, Some(ExperimentKind::Powers)),
            Self::SqrtDomain(a) => (a, Some(ExperimentKind::SqrtDomain)),
            Self::Embedding(a) => (a, Some(ExperimentKind::Embedding)),
            Self::Semigroup(a) => (a, Some(ExperimentKind::Semigroup)),
            Self::Maxreg(a) => (a, Some(ExperimentKind::Maxreg)),
            Self::MuShift(a) => (a, Some(ExperimentKind::MuShift)),
            Self::Scaling(a) => (a, Some(ExperimentKind::Scaling)),
            Self::ValidateConfig(a) => (a, None),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config and STOKESLAB_OUT.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 1 is serial and byte-deterministic.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Tolerance profile for pass/fail judgments.
    #[arg(long, value_enum, default_value = "default")]
    pub tolerance_profile: Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Strict,
    Default,
}

impl Profile {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Strict => "strict",
            Self::Default => "default",
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    artifact_version: &'static str,
    config_version: u32,
    config_hash: &'a str,
    kind: &'a str,
    tolerance_profile: &'a str,
    seed: u64,
    parallel: usize,
    all_pass: bool,
    checks: &'a [output::Check],
    warnings: &'a [String],
    files: &'a [String],
    results: &'a serde_json::Value,
    /// Effective configuration after flag overrides; reruns of this exact
    /// object reproduce the CSVs byte for byte (serial mode).
    config: &'a ExperimentConfig,
}

/// Top-level entry: returns the process exit code.
/// 0 = ran, all checks pass; 1 = ran, some check failed;
/// 2 = invalid config; 3 = execution failure.
pub fn entry(cli: Cli) -> i32 {
    let (args, expected) = cli.cmd.split();
    match execute(args, expected) {
        Ok(all_pass) => {
            if all_pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config parse failure: {e}")))?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    validate(&cfg).map_err(CliError::Config)?;
    Ok(cfg)
}

fn resolve_out_dir(args: &RunArgs, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    if let Some(dir) = &cfg.out_dir {
        return PathBuf::from(dir);
    }
    if let Ok(root) = std::env::var("STOKESLAB_OUT") {
        if !root.is_empty() {
            return PathBuf::from(root).join(cfg.kind.tag());
        }
    }
    PathBuf::from("stokeslab-out").join(cfg.kind.tag())
}

fn execute(args: &RunArgs, expected: Option<ExperimentKind>) -> Result<bool, CliError> {
    let cfg = load_config(args)?;
    let hash = config_hash(&cfg);

    let Some(expected) = expected else {
        // validate-config: print the normalized form and hash, do not run.
        let normalized =
            serde_json::to_string_pretty(&cfg).expect("config serialization is infallible");
        println!("{normalized}");
        println!("config_hash={hash}");
        return Ok(true);
    };
    if cfg.kind != expected {
        return Err(CliError::Config(format!(
            "config declares kind '{}' but the subcommand is '{}'",
            cfg.kind.tag(),
            expected.tag()
        )));
    }
    if args.parallel == 0 {
        return Err(CliError::Config("--parallel must be at least 1".into()));
    }
    // First initialization wins; later invocations in the same process keep
    // the existing pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(args.parallel).build_global();

    let out_dir = resolve_out_dir(args, &cfg);
    let mut writer = OutputWriter::new(&out_dir, &hash)?;
    let tol = Tolerances::for_profile(args.tolerance_profile);
    let outcome = runner::run_experiment(&cfg, &tol, &mut writer)?;

    let report = render_report(
        cfg.kind.tag(),
        &hash,
        args.tolerance_profile.tag(),
        cfg.seed(),
        &outcome,
    );
    writer.write_text("report.txt", &report)?;
    let mut files: Vec<String> = writer.files().to_vec();
    files.push("summary.json".to_string());
    let summary = Summary {
        artifact_version: ARTIFACT_VERSION,
        config_version: cfg.version,
        config_hash: &hash,
        kind: cfg.kind.tag(),
        tolerance_profile: args.tolerance_profile.tag(),
        seed: cfg.seed(),
        parallel: args.parallel,
        all_pass: outcome.all_pass(),
        checks: &outcome.checks,
        warnings: &outcome.warnings,
        files: &files,
        results: &outcome.results,
        config: &cfg,
    };
    writer.write_json("summary.json", &summary)?;

    println!(
        "stokeslab {}: {} ({} checks, {} warnings) -> {}",
        cfg.kind.tag(),
        if outcome.all_pass() { "PASS" } else { "FAIL" },
        outcome.checks.len(),
        outcome.warnings.len(),
        out_dir.display()
    );
    Ok(outcome.all_pass())
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crss::constants::{
    eigenvalue, eigenvalue_limit, modified_eigenvalue, sharp_constant, theorem_constants, InequalityParams, ModeIndex,
};
use crss::experiments::{
    emit_report, run_dual_ratio_scan, run_fs_stability_scan, run_hls_probe, run_invariance_audit, run_limit_case_scan,
    run_verify, ExperimentConfig, Report, VerifyTarget,
};
use crss::grid::{build_grid, GridFunction};
use crss::harmonics::{SpectralFunction, SphereSpace};
use crss::manifold::{distance_fs, distance_hls, DistanceOptions};

#[derive(Parser)]
#[command(name = "crss", version, about = "Sobolev-type inequalities on the CR sphere S³")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the sharp constant, exponents and derived constants.
    Constants {
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long)]
        s: f64,
    },
    /// Print the eigenvalue table as CSV.
    Eigen {
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 6)]
        jmax: u32,
    },
    /// Check one inequality on its extremizers and on random inputs.
    Verify {
        target: Target,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a parameter scan.
    Scan {
        kind: ScanKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Distance of a function to the extremizer manifold.
    Distance {
        /// Spectral coefficients (`.json`) or grid values (`.csv`).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        metric: Metric,
        #[arg(long, default_value_t = 2.0)]
        s: f64,
        /// Band limit of the working space; a `.csv` input must be sampled
        /// on this band's grid.
        #[arg(long, default_value_t = 12)]
        band: usize,
        #[arg(long, default_value_t = 5)]
        starts: usize,
        /// Write the optimizer trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Invariance audits.
    Audit {
        kind: AuditKind,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Fs,
    Hls,
    Bo,
    Loghls,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanKind {
    FsStability,
    DualRatio,
    LimitCase,
    HlsProbe,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Sobolev,
    Lp,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditKind {
    Invariance,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(run: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let config = match &run.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn finish(report: Report, run: &RunArgs, config: &ExperimentConfig) -> anyhow::Result<bool> {
    let dir = run
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| Path::new("crss-out").join(&report.experiment));
    for c in &report.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        match c.expected {
            Some(e) => println!("{verdict} {}: {:.10e} (expected {:.10e}, tol {:e})", c.name, c.value, e, c.tolerance),
            None => println!("{verdict} {}: {:.10e} (tol {:e})", c.name, c.value, c.tolerance),
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    emit_report(&report, &dir)?;
    println!("report written to {}", dir.display());
    Ok(report.passed())
}

fn run(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::Constants { n, s } => {
            let params = InequalityParams::new(n, s)?;
            let out = json!({
                "n": n,
                "s": s,
                "Q": params.homogeneous_dim(),
                "q": params.q(),
                "p": params.p(),
                "C": sharp_constant(&params),
                "lambda_00": eigenvalue(&params, ModeIndex::new(0, 0)),
                "lambda_10": eigenvalue(&params, ModeIndex::new(1, 0)),
                "theorem": theorem_constants(&params),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
        Command::Eigen { n, s, jmax } => {
            let params = InequalityParams::new(n, s)?;
            println!("j,k,lambda,lambda_mod,lambda_limit");
            for j in 0..=jmax {
                for k in 0..=jmax {
                    let mode = ModeIndex::new(j, k);
                    let limit = if k == 0 && j > 0 { eigenvalue_limit(n, j)? } else { f64::NAN };
                    println!(
                        "{j},{k},{},{},{}",
                        eigenvalue(&params, mode),
                        modified_eigenvalue(&params, mode),
                        limit
                    );
                }
            }
            Ok(true)
        }
        Command::Verify { target, run } => {
            let config = load_config(&run)?;
            let space = config.space()?;
            let target = match target {
                Target::Fs => VerifyTarget::Fs,
                Target::Hls => VerifyTarget::Hls,
                Target::Bo => VerifyTarget::Bo,
                Target::Loghls => VerifyTarget::Loghls,
            };
            let report = run_verify(&space, &config, target)?;
            finish(report, &run, &config)
        }
        Command::Scan { kind, run } => {
            let config = load_config(&run)?;
            let space = config.space()?;
            let report = match kind {
                ScanKind::FsStability => run_fs_stability_scan(&space, &config)?,
                ScanKind::DualRatio => run_dual_ratio_scan(&space, &config)?,
                ScanKind::LimitCase => run_limit_case_scan(&space, &config)?,
                ScanKind::HlsProbe => run_hls_probe(&space, &config)?,
            };
            finish(report, &run, &config)
        }
        Command::Distance { input, metric, s, band, starts, trace } => {
            let params = InequalityParams::new(1, s)?;
            let space = SphereSpace::new(band)?;
            let f = match input.extension().and_then(|e| e.to_str()) {
                Some("json") => {
                    let g = SpectralFunction::read_json(&input)?;
                    if g.band_limit() > band {
                        bail!("input band {} exceeds --band {band}", g.band_limit());
                    }
                    space.lift_spectral(g)?
                }
                Some("csv") => space.lift(GridFunction::read_csv(&input, &build_grid(band)?)?)?,
                _ => bail!("input must be a .json spectral dump or a .csv grid sample"),
            };
            if !f.is_real() {
                bail!("input function is not real");
            }
            let opts = DistanceOptions { starts, trace: trace.is_some(), ..DistanceOptions::default() };
            let result = match metric {
                Metric::Sobolev => distance_fs(&space, &f, &params, &opts),
                Metric::Lp => distance_hls(&space, &f, &params, &opts),
            }
            .with_context(|| format!("distance of {}", input.display()))?;
            if let Some(path) = trace {
                result.write_trace_csv(&path)?;
            }
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(true)
        }
        Command::Audit { kind: AuditKind::Invariance, seed, run } => {
            let mut config = load_config(&run)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let space = config.space()?;
            let report = run_invariance_audit(&space, &config)?;
            finish(report, &run, &config)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use psadmm::detector::{validate_params, ValidationReport};
use psadmm::harness::config::{DetectorKind, ExperimentConfig};
use psadmm::harness::sweep::{emit_sweep_csv, parse_alphas};
use psadmm::harness::{emit_csv, find_preset, load_config, run_experiment_report, sweep_params, trial_instance, PRESETS};
use psadmm::numerics::{gram, spectrum_bounds_lenient, DEFAULT_EIGEN_TOLERANCE, DEFAULT_POWER_ITERATIONS};
use psadmm::{Error, Result};

/// PS-ADMM massive-MIMO detection experiments.
#[derive(Parser)]
#[command(name = "detect", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Experiment config file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name, e.g. fig1a.
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path),
            (None, Some(name)) => find_preset(name)
                .map(|p| p.config())
                .ok_or_else(|| Error::InvalidArgument(format!("unknown preset `{name}`"))),
            (None, None) => unreachable!("clap requires one of --config/--preset"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER experiment and write the CSV.
    Run {
        #[command(flatten)]
        source: Source,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check convergence certificates on every iterative run.
        #[arg(long)]
        verify: bool,
        /// Worker threads (default: one per core).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Full-factorial (rho, alpha) sweep of PS-ADMM.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Comma-separated rho values.
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        /// Comma-separated alpha values; per-layer vectors as a:b:c.
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List the built-in full-scale presets.
    Presets,
    /// Validate a config and report the convergence conditions.
    Validate {
        #[command(flatten)]
        source: Source,
    },
}

fn certificate_path(csv: &Path) -> PathBuf {
    csv.with_extension("certificates.txt")
}

fn run(
    mut config: ExperimentConfig,
    seed: Option<u64>,
    trials: Option<usize>,
    out: Option<PathBuf>,
    verify: bool,
    workers: Option<usize>,
) -> Result<()> {
    if let Some(seed) = seed {
        config.master_seed = seed;
    }
    if let Some(trials) = trials {
        config.trials = trials;
    }
    if let Some(out) = out {
        config.output = out;
    }
    config.verify |= verify;
    let report = run_experiment_report(&config, workers)?;
    for r in report.records.iter().filter(|r| r.failures > 0) {
        eprintln!(
            "warning: {} failed on {} of {} trials at {} dB; their bits count as errors",
            r.detector, r.failures, config.trials, r.snr_db
        );
    }
    emit_csv(&report.records, &config.output)?;
    eprintln!("wrote {}", config.output.display());
    if config.verify {
        let path = certificate_path(&config.output);
        let mut text = format!(
            "certified runs: {}\nfailed checks: {}\n",
            report.certified_runs,
            report.certificate_log.len()
        );
        for line in &report.certificate_log {
            text.push_str(line);
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        eprintln!(
            "wrote {} ({} failed checks over {} runs)",
            path.display(),
            report.certificate_log.len(),
            report.certified_runs
        );
    }
    Ok(())
}

fn sweep(config: ExperimentConfig, rho: &[f64], alpha: &[String], out: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let alphas = alpha.iter().map(|a| parse_alphas(a)).collect::<Result<Vec<_>>>()?;
    let records = sweep_params(&config, rho, &alphas, workers)?;
    let path = out.unwrap_or(config.output);
    emit_sweep_csv(&records, &path)?;
    eprintln!("wrote {} ({} cells)", path.display(), rho.len() * alphas.len());
    Ok(())
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    let detectors: Vec<&str> = config.detectors.iter().map(|d| d.id()).collect();
    println!(
        "B = {}, U = {}, Q = {} ({}-QAM), {} trials per SNR, seed {}",
        config.receive_antennas,
        config.users,
        config.modulation.layers(),
        config.modulation.size(),
        config.trials,
        config.master_seed
    );
    println!("snr_db = {:?}", config.snr_grid_db);
    println!("detectors = {}", detectors.join(", "));
    // the conditions depend on the channel; report them for the first trial
    let (_, instance) = trial_instance(config, 0, 0)?;
    let bounds = spectrum_bounds_lenient(&gram(&instance.h), DEFAULT_EIGEN_TOLERANCE, DEFAULT_POWER_ITERATIONS)?;
    for kind in [DetectorKind::Psadmm, DetectorKind::BoxAdmm] {
        if !config.detectors.contains(&kind) {
            continue;
        }
        let params = config.params_for(kind).expect("validated config has parameters");
        let params = if kind == DetectorKind::BoxAdmm { params.without_penalty() } else { params.clone() };
        let report: ValidationReport = validate_params(&params, &bounds)?;
        println!("\n[{kind}] channel of trial 0 at {} dB", config.snr_grid_db[0]);
        println!("{report}");
    }
    Ok(())
}

fn report_error(e: &Error) {
    match e {
        Error::Validation(problems) => {
            eprintln!("error: invalid config");
            for p in problems {
                eprintln!("  - {p}");
            }
        }
        other => eprintln!("error: {other}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            source,
            seed,
            trials,
            out,
            verify,
            workers,
        } => source.load().and_then(|c| run(c, seed, trials, out, verify, workers)),
        Command::Sweep {
            source,
            rho,
            alpha,
            out,
            workers,
        } => source.load().and_then(|c| sweep(c, &rho, &alpha, out, workers)),
        Command::Presets => {
            for p in &PRESETS {
                let grid: Vec<String> = p.snr_grid_db().iter().map(|s| s.to_string()).collect();
                println!("{}  snr_db=[{}]", p.describe(), grid.join(", "));
            }
            Ok(())
        }
        Command::Validate { source } => source.load().and_then(|c| validate(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::FAILURE
        }
    }
}

//! Full-factorial `(ρ, α)` sweeps of PS-ADMM. Each cell reruns the base
//! experiment with the same seed, so every cell sees the same channels,
//! bits and noise.

use std::path::Path;

use crate::detector::DetectorParams;
use crate::error::{Error, Result};

use super::config::{DetectorKind, ExperimentConfig};
use super::csv::{format_real, format_row, CSV_HEADER};
use super::experiment::{run_experiment, BerRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub rho: f64,
    pub alphas: Vec<f64>,
    pub record: BerRecord,
}

/// Base config restricted to PS-ADMM with the given `(ρ, α)`.
pub fn cell_config(base: &ExperimentConfig, rho: f64, alphas: &[f64]) -> ExperimentConfig {
    let mut params = DetectorParams::new(rho, alphas.to_vec());
    if let Some(template) = &base.psadmm {
        params = params
            .with_max_iters(template.max_iters)
            .with_residual_tol(template.residual_tol)
            .with_init(template.init)
            .with_decision(template.decision);
    }
    ExperimentConfig {
        detectors: vec![DetectorKind::Psadmm],
        psadmm: Some(params),
        ..base.clone()
    }
}

/// Runs PS-ADMM for every `(ρ, α)` cell, ρ-major. Each `alpha_grid` entry
/// is a full per-layer vector. Every invalid cell is reported before
/// anything runs.
pub fn sweep_params(
    base: &ExperimentConfig,
    rho_grid: &[f64],
    alpha_grid: &[Vec<f64>],
    workers: Option<usize>,
) -> Result<Vec<SweepRecord>> {
    if rho_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::Validation(vec!["rho and alpha grids must be non-empty".to_string()]));
    }
    let cells: Vec<(f64, &Vec<f64>, ExperimentConfig)> = rho_grid
        .iter()
        .flat_map(|&rho| alpha_grid.iter().map(move |a| (rho, a)))
        .map(|(rho, a)| (rho, a, cell_config(base, rho, a)))
        .collect();
    let problems: Vec<String> = cells
        .iter()
        .flat_map(|(rho, a, c)| match c.validate() {
            Err(Error::Validation(p)) => p
                .into_iter()
                .map(|msg| format!("cell rho={} alpha={}: {msg}", format_real(*rho), join_alphas(a)))
                .collect(),
            _ => Vec::new(),
        })
        .collect();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let mut out = Vec::new();
    for (rho, alphas, config) in &cells {
        for record in run_experiment(config, workers)? {
            out.push(SweepRecord {
                rho: *rho,
                alphas: alphas.to_vec(),
                record,
            });
        }
    }
    Ok(out)
}

/// Per-layer penalties joined with `:`.
pub fn join_alphas(alphas: &[f64]) -> String {
    alphas.iter().map(|a| format_real(*a)).collect::<Vec<_>>().join(":")
}

/// Parses `a:b:c` into a per-layer vector.
pub fn parse_alphas(text: &str) -> Result<Vec<f64>> {
    text.split(':')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad alpha `{t}`")))
        })
        .collect()
}

/// `rho,alpha,` followed by the usual BER columns, in cell order.
pub fn sweep_to_csv(records: &[SweepRecord]) -> String {
    let mut out = format!("rho,alpha,{CSV_HEADER}\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{}\n",
            format_real(r.rho),
            join_alphas(&r.alphas),
            format_row(&r.record)
        ));
    }
    out
}

pub fn emit_sweep_csv(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, sweep_to_csv(records)).map_err(|e| Error::io(path, e))
}

//! Experiment configuration: a flat TOML file, one experiment per file.
//!
//! ```toml
//! preset = "fig1a"          # optional, every other key overrides it
//! B = 8                     # receive antennas
//! U = 2                     # users
//! Q = 1                     # layers, 4^Q-QAM
//! snr_db = [8, 10, inf]     # `inf` (or "inf") is the noiseless sentinel
//! trials = 500
//! detectors = ["psadmm", "box_admm", "mmse", "zf", "ml"]
//! seed = 1
//! rho = 20.0
//! alpha = [4.0]             # one entry per layer
//! box_admm_rho = 20.0       # defaults to rho
//! max_iters = 30
//! residual_tol = 1e-5
//! init = "zeros"            # zeros | ones | minus_ones | random:<seed>
//! decision = "x0"           # x0 | layers
//! verify = false
//! output = "ber.csv"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::baselines::ML_CANDIDATE_CAP;
use crate::detector::{DecisionRule, DetectorParams, InitMode};
use crate::error::{Error, Result};
use crate::signal::Modulation;

use super::presets::find_preset;

pub const DEFAULT_TRIALS: usize = 500;
pub const DEFAULT_OUTPUT: &str = "ber.csv";

/// Detector identifiers, ordered as they sort in CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DetectorKind {
    BoxAdmm,
    Ml,
    Mmse,
    Psadmm,
    Zf,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::BoxAdmm,
        DetectorKind::Ml,
        DetectorKind::Mmse,
        DetectorKind::Psadmm,
        DetectorKind::Zf,
    ];

    pub fn id(self) -> &'static str {
        match self {
            DetectorKind::BoxAdmm => "box_admm",
            DetectorKind::Ml => "ml",
            DetectorKind::Mmse => "mmse",
            DetectorKind::Psadmm => "psadmm",
            DetectorKind::Zf => "zf",
        }
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, DetectorKind::Psadmm | DetectorKind::BoxAdmm)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown detector `{s}`")))
    }
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(InitMode::Zeros),
            "ones" => Ok(InitMode::Ones),
            "minus_ones" => Ok(InitMode::MinusOnes),
            _ => s
                .strip_prefix("random:")
                .and_then(|seed| seed.parse().ok())
                .map(InitMode::Random)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown init mode `{s}`"))),
        }
    }
}

impl FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x0" => Ok(DecisionRule::QuantizeX0),
            "layers" => Ok(DecisionRule::LayerSigns),
            _ => Err(Error::InvalidArgument(format!("unknown decision rule `{s}`"))),
        }
    }
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub receive_antennas: usize,
    pub users: usize,
    pub modulation: Modulation,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub detectors: Vec<DetectorKind>,
    /// Parameters for `psadmm`; required when it is enabled.
    pub psadmm: Option<DetectorParams>,
    /// Parameters for `box_admm` (penalties are ignored).
    pub box_admm: Option<DetectorParams>,
    pub master_seed: u64,
    pub verify: bool,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn params_for(&self, kind: DetectorKind) -> Option<&DetectorParams> {
        match kind {
            DetectorKind::Psadmm => self.psadmm.as_ref(),
            DetectorKind::BoxAdmm => self.box_admm.as_ref(),
            _ => None,
        }
    }

    /// Bits carried by one trial, `2QU`.
    pub fn bits_per_trial(&self) -> usize {
        self.modulation.bits_per_symbol() * self.users
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let (b, u, q) = (self.receive_antennas, self.users, self.modulation.layers());
        if u == 0 {
            problems.push("U must be at least 1".to_string());
        }
        if b < u {
            problems.push(format!("B = {b} must be at least U = {u}"));
        }
        if self.trials == 0 {
            problems.push("trials must be at least 1".to_string());
        }
        if self.snr_grid_db.is_empty() {
            problems.push("snr_db must list at least one value".to_string());
        }
        for snr in &self.snr_grid_db {
            if snr.is_nan() || *snr == f64::NEG_INFINITY {
                problems.push(format!("snr_db value {snr} is not usable"));
            }
        }
        if self.detectors.is_empty() {
            problems.push("detectors must list at least one detector".to_string());
        }
        let mut seen = self.detectors.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.detectors.len() {
            problems.push("detectors contains duplicates".to_string());
        }
        if self.detectors.contains(&DetectorKind::Ml) {
            let candidates = (self.modulation.size() as f64).powi(u as i32);
            if candidates > ML_CANDIDATE_CAP as f64 {
                problems.push(format!(
                    "ml needs 4^(QU) = {candidates} candidates, above the cap of {ML_CANDIDATE_CAP}"
                ));
            }
        }
        for kind in [DetectorKind::Psadmm, DetectorKind::BoxAdmm] {
            if !self.detectors.contains(&kind) {
                continue;
            }
            let Some(params) = self.params_for(kind) else {
                problems.push(format!("{kind} is enabled but rho/alpha are missing"));
                continue;
            };
            check_params(kind, params, q, &mut problems);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

fn check_params(kind: DetectorKind, params: &DetectorParams, q: usize, problems: &mut Vec<String>) {
    if params.alphas.len() != q {
        problems.push(format!("{kind}: alpha has {} entries, Q = {q}", params.alphas.len()));
        return;
    }
    if !(params.rho.is_finite() && params.rho > 0.0) {
        problems.push(format!("{kind}: rho = {} must be positive and finite", params.rho));
        return;
    }
    for (i, a) in params.alphas.iter().enumerate() {
        if !(a.is_finite() && *a >= 0.0) {
            problems.push(format!("{kind}: alpha[{}] = {a} must be finite and non-negative", i + 1));
        } else if params.gamma(i) <= 0.0 {
            problems.push(format!(
                "{kind}: layer {} violates 4^(q-1)*rho > alpha_q ({} <= {a})",
                i + 1,
                params.gamma(i) + a
            ));
        }
    }
    if params.max_iters == 0 {
        problems.push(format!("{kind}: max_iters must be at least 1"));
    }
    if !(params.residual_tol > 0.0) {
        problems.push(format!("{kind}: residual_tol must be positive"));
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SnrEntry {
    Number(f64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    #[serde(rename = "B")]
    b: Option<i64>,
    #[serde(rename = "U")]
    u: Option<i64>,
    #[serde(rename = "Q")]
    q: Option<i64>,
    snr_db: Option<Vec<SnrEntry>>,
    trials: Option<i64>,
    detectors: Option<Vec<String>>,
    seed: Option<i64>,
    rho: Option<f64>,
    alpha: Option<Vec<f64>>,
    box_admm_rho: Option<f64>,
    max_iters: Option<i64>,
    residual_tol: Option<f64>,
    init: Option<String>,
    decision: Option<String>,
    verify: Option<bool>,
    output: Option<String>,
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Parses and validates config text, applying defaults and any preset.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))?;
    let mut problems = Vec::new();
    let base = match raw.preset.as_deref() {
        Some(name) => match find_preset(name) {
            Some(p) => Some(p.config()),
            None => {
                problems.push(format!("unknown preset `{name}`"));
                None
            }
        },
        None => None,
    };

    let count = |key: &str, value: Option<i64>, fallback: Option<usize>, problems: &mut Vec<String>| {
        match (value, fallback) {
            (Some(v), _) if v >= 0 => Some(v as usize),
            (Some(v), _) => {
                problems.push(format!("{key} = {v} must be non-negative"));
                None
            }
            (None, Some(f)) => Some(f),
            (None, None) => {
                problems.push(format!("missing required key `{key}`"));
                None
            }
        }
    };
    let b = count("B", raw.b, base.as_ref().map(|c| c.receive_antennas), &mut problems);
    let u = count("U", raw.u, base.as_ref().map(|c| c.users), &mut problems);
    let q = count("Q", raw.q, base.as_ref().map(|c| c.modulation.layers()), &mut problems);
    let trials = count(
        "trials",
        raw.trials,
        Some(base.as_ref().map_or(DEFAULT_TRIALS, |c| c.trials)),
        &mut problems,
    );
    let modulation = q.and_then(|q| match Modulation::new(q) {
        Ok(m) => Some(m),
        Err(_) => {
            problems.push(format!("Q = {q} must be between 1 and {}", Modulation::MAX_LAYERS));
            None
        }
    });

    let snr_grid_db = match raw.snr_db {
        Some(entries) => entries
            .into_iter()
            .filter_map(|e| match e {
                SnrEntry::Number(v) => Some(v),
                SnrEntry::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "Inf") => Some(f64::INFINITY),
                SnrEntry::Text(t) => {
                    problems.push(format!("snr_db entry `{t}` is not a number"));
                    None
                }
            })
            .collect(),
        None => match &base {
            Some(c) => c.snr_grid_db.clone(),
            None => {
                problems.push("missing required key `snr_db`".to_string());
                Vec::new()
            }
        },
    };

    let master_seed = match raw.seed {
        Some(s) if s >= 0 => s as u64,
        Some(s) => {
            problems.push(format!("seed = {s} must be non-negative"));
            0
        }
        None => base.as_ref().map_or(0, |c| c.master_seed),
    };

    let init = match raw.init.as_deref().map(str::parse::<InitMode>) {
        Some(Ok(i)) => i,
        Some(Err(e)) => {
            problems.push(e.to_string());
            InitMode::default()
        }
        None => InitMode::default(),
    };
    let decision = match raw.decision.as_deref().map(str::parse::<DecisionRule>) {
        Some(Ok(d)) => d,
        Some(Err(e)) => {
            problems.push(e.to_string());
            DecisionRule::default()
        }
        None => DecisionRule::default(),
    };
    let max_iters = count(
        "max_iters",
        raw.max_iters,
        Some(DetectorParams::DEFAULT_MAX_ITERS),
        &mut problems,
    )
    .unwrap_or(DetectorParams::DEFAULT_MAX_ITERS);
    let residual_tol = raw.residual_tol.unwrap_or(DetectorParams::DEFAULT_RESIDUAL_TOL);

    let base_params = base.as_ref().and_then(|c| c.psadmm.clone());
    let rho = raw.rho.or(base_params.as_ref().map(|p| p.rho));
    let alphas = raw.alpha.or(base_params.map(|p| p.alphas));
    let finish = |p: DetectorParams| {
        p.with_max_iters(max_iters)
            .with_residual_tol(residual_tol)
            .with_init(init)
            .with_decision(decision)
    };
    let psadmm = match (rho, &alphas) {
        (Some(rho), Some(a)) => Some(finish(DetectorParams::new(rho, a.clone()))),
        _ => None,
    };
    let box_admm = raw.box_admm_rho.or(rho).map(|rho| {
        let layers = q.unwrap_or(1);
        finish(DetectorParams::new(rho, vec![0.0; layers]))
    });

    let detectors = match raw.detectors {
        Some(names) => names
            .iter()
            .filter_map(|n| match n.parse::<DetectorKind>() {
                Ok(k) => Some(k),
                Err(e) => {
                    problems.push(e.to_string());
                    None
                }
            })
            .collect(),
        None => match &base {
            Some(c) => c.detectors.clone(),
            None => {
                // every non-exhaustive detector whose parameters are present
                let mut d = Vec::new();
                if psadmm.is_some() {
                    d.push(DetectorKind::Psadmm);
                }
                if box_admm.is_some() {
                    d.push(DetectorKind::BoxAdmm);
                }
                d.extend([DetectorKind::Mmse, DetectorKind::Zf]);
                d
            }
        },
    };
    let verify = raw.verify.or(base.as_ref().map(|c| c.verify)).unwrap_or(false);
    let output = raw
        .output
        .map(PathBuf::from)
        .or(base.as_ref().map(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));

    let (Some(receive_antennas), Some(users), Some(modulation), Some(trials)) = (b, u, modulation, trials) else {
        if let (Some(b), Some(u)) = (b, u) {
            if b < u {
                problems.push(format!("B = {b} must be at least U = {u}"));
            }
        }
        return Err(Error::Validation(problems));
    };
    let config = ExperimentConfig {
        receive_antennas,
        users,
        modulation,
        snr_grid_db,
        trials,
        detectors,
        psadmm,
        box_admm,
        master_seed,
        verify,
        output,
    };
    match config.validate() {
        Ok(()) if problems.is_empty() => Ok(config),
        Ok(()) => Err(Error::Validation(problems)),
        Err(Error::Validation(more)) => {
            problems.extend(more);
            Err(Error::Validation(problems))
        }
        Err(e) => Err(e),
    }
}

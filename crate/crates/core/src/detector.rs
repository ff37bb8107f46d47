//! The penalty-sharing ADMM (PS-ADMM) detector.
//!
//! The ML problem `min ||r − Hx||²` over `x ∈ X^U` is relaxed by writing
//! `x = Σ_q 2^(q−1) x_q` with box-constrained layers, penalizing
//! `−Σ (α_q/2)||x_q||²`, and splitting off the aggregate `x_0`. One iteration
//! is a Gauss–Seidel sweep over the layers (closed-form projected update),
//! then an exact `x_0` solve against the cached factorization of
//! `H^H H + ρI`, then dual ascent on `y`.
//!
//! Layer indices in this module are zero-based: layer `q` carries weight
//! `2^q` and penalty `alphas[q]`.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::augmented_lagrangian;
use crate::error::{Error, Result};
use crate::numerics::{
    dist_sqr, factor_regularized, gram, ComplexMatrix, ComplexVector, HermitianFactorization,
    SpectrumBounds,
};
use crate::signal::{hard_decision, layer_weight, recompose_layers, ChannelInstance, Modulation};

/// Starting point for `{x_q}`, `x_0` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    #[default]
    Zeros,
    /// Every entry `1 + 0j`.
    Ones,
    /// Every entry `−1 + 0j`.
    MinusOnes,
    /// Real and imaginary parts uniform on `[−1, 1]`, from the given seed.
    Random(u64),
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitMode::Zeros => f.write_str("zeros"),
            InitMode::Ones => f.write_str("ones"),
            InitMode::MinusOnes => f.write_str("minus_ones"),
            InitMode::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

/// How the continuous solution is mapped to constellation points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecisionRule {
    /// Quantize the final `x_0` to the nearest constellation point.
    #[default]
    QuantizeX0,
    /// Take the sign of every layer part and recompose.
    LayerSigns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// ADMM penalty `ρ`.
    pub rho: f64,
    /// Per-layer penalties `α_q`, one per layer.
    pub alphas: Vec<f64>,
    /// Iteration cap `K`.
    pub max_iters: usize,
    /// Stop once the successive-iterate residual drops below this.
    pub residual_tol: f64,
    pub init: InitMode,
    pub decision: DecisionRule,
}

impl DetectorParams {
    pub const DEFAULT_MAX_ITERS: usize = 30;
    pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-5;

    pub fn new(rho: f64, alphas: Vec<f64>) -> Self {
        Self {
            rho,
            alphas,
            max_iters: Self::DEFAULT_MAX_ITERS,
            residual_tol: Self::DEFAULT_RESIDUAL_TOL,
            init: InitMode::Zeros,
            decision: DecisionRule::QuantizeX0,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_residual_tol(mut self, residual_tol: f64) -> Self {
        self.residual_tol = residual_tol;
        self
    }

    pub fn with_init(mut self, init: InitMode) -> Self {
        self.init = init;
        self
    }

    pub fn with_decision(mut self, decision: DecisionRule) -> Self {
        self.decision = decision;
        self
    }

    /// Same parameters with every `α_q` set to zero (plain box-constrained ADMM).
    pub fn without_penalty(&self) -> Self {
        Self {
            alphas: vec![0.0; self.alphas.len()],
            ..self.clone()
        }
    }

    pub fn layers(&self) -> usize {
        self.alphas.len()
    }

    /// `γ_q = 4^q ρ − α_q` (zero-based `q`), the strong-convexity modulus of
    /// the layer-`q` subproblem.
    pub fn gamma(&self, q: usize) -> f64 {
        layer_weight(q).powi(2) * self.rho - self.alphas[q]
    }

    /// Rejects parameter sets for which a layer subproblem is not strictly
    /// convex (its closed-form update would be invalid).
    pub fn check(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", self.rho)));
        }
        if self.alphas.is_empty() {
            return Err(Error::InvalidArgument("at least one alpha is required".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {a}")));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "residual tolerance must be positive, got {}",
                self.residual_tol
            )));
        }
        for q in 0..self.layers() {
            let gamma = self.gamma(q);
            if !(gamma > 0.0) {
                return Err(Error::HardFailure { layer: q + 1, gamma });
            }
        }
        Ok(())
    }
}

/// Iterates `({x_q}, x_0, y)` after `k` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    pub layers: Vec<ComplexVector>,
    pub x0: ComplexVector,
    pub y: ComplexVector,
    pub k: usize,
}

impl DetectorState {
    pub fn initial(users: usize, layers: usize, init: InitMode) -> Self {
        let fill = |v: f64| ComplexVector::filled(users, Complex64::new(v, 0.0));
        match init {
            InitMode::Zeros => Self::uniform(layers, fill(0.0)),
            InitMode::Ones => Self::uniform(layers, fill(1.0)),
            InitMode::MinusOnes => Self::uniform(layers, fill(-1.0)),
            InitMode::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut draw = || -> ComplexVector {
                    (0..users)
                        .map(|_| Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
                        .collect::<Vec<_>>()
                        .into()
                };
                let layers = (0..layers).map(|_| draw()).collect();
                let x0 = draw();
                let y = draw();
                Self { layers, x0, y, k: 0 }
            }
        }
    }

    fn uniform(layers: usize, v: ComplexVector) -> Self {
        Self {
            layers: vec![v.clone(); layers],
            x0: v.clone(),
            y: v,
            k: 0,
        }
    }

    /// `Σ_q 2^q x_q`.
    pub fn aggregate(&self) -> ComplexVector {
        recompose_layers(&self.layers)
    }

    /// `||x_0 − Σ_q 2^q x_q||²`.
    pub fn primal_gap(&self) -> f64 {
        dist_sqr(&self.x0, &self.aggregate())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(ComplexVector::is_finite) && self.x0.is_finite() && self.y.is_finite()
    }
}

/// Quantities recorded for one iteration `k → k+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Augmented Lagrangian at the new iterate.
    pub lagrangian: f64,
    /// `Σ_q ||Δx_q||² + ||Δx_0||²`.
    pub residual: f64,
    /// `||Δx_q||²` per layer.
    pub layer_steps: Vec<f64>,
    pub x0_step: f64,
    /// `||Δy||²`.
    pub dual_step: f64,
    /// `||x_0 − Σ 2^q x_q||²` at the new iterate.
    pub primal_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    /// Augmented Lagrangian at the starting point.
    pub initial_lagrangian: f64,
    /// One record per completed iteration, in order.
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// 1-based index of the first iteration whose residual is below `eps`.
    pub fn first_crossing(&self, eps: f64) -> Option<usize> {
        self.records.iter().position(|r| r.residual < eps).map(|i| i + 1)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.residual)
    }
}

/// Output of one detection.
#[derive(Debug, Clone)]
pub struct Detection {
    pub x_hat: ComplexVector,
    pub trace: IterationTrace,
    pub state: DetectorState,
    /// Whether the residual tolerance was met before the iteration cap.
    pub converged: bool,
}

impl Detection {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Parameter conditions and the derived constants of the convergence
/// analysis for one channel realization.
///
/// The layer condition used here is `4^(q−1) ρ > α_q`, which is what makes
/// the layer subproblem strictly convex. (An in-text remark of the original
/// derivation reads `4^(q−2) ρ > α_q`; that exponent does not match the
/// closed-form update's denominator.)
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rho: f64,
    /// `4^(q−1) ρ > α_q` per layer.
    pub layer_ok: Vec<bool>,
    /// `ρ > √2 λ_max(H^H H)`.
    pub spectral_ok: bool,
    /// `γ_q = 4^(q−1) ρ − α_q`.
    pub gammas: Vec<f64>,
    /// `γ_0 = ρ + λ_min(H^H H)`.
    pub gamma_0: f64,
    /// `C = min{ γ_q/2, γ_0/2 − λ_max²/ρ }`; may be non-positive.
    pub c: f64,
    pub spectrum: SpectrumBounds,
}

impl ValidationReport {
    /// Evaluates every condition without failing.
    pub fn evaluate(params: &DetectorParams, bounds: &SpectrumBounds) -> Self {
        let rho = params.rho;
        let gammas: Vec<f64> = (0..params.layers()).map(|q| params.gamma(q)).collect();
        let layer_ok = gammas.iter().map(|g| *g > 0.0).collect();
        let gamma_0 = rho + bounds.lambda_min;
        let dual_term = gamma_0 / 2.0 - bounds.lambda_max.powi(2) / rho;
        let c = gammas.iter().map(|g| g / 2.0).fold(dual_term, f64::min);
        Self {
            rho,
            layer_ok,
            spectral_ok: rho > std::f64::consts::SQRT_2 * bounds.lambda_max,
            gammas,
            gamma_0,
            c,
            spectrum: bounds.clone(),
        }
    }

    pub fn layers_ok(&self) -> bool {
        self.layer_ok.iter().all(|&ok| ok)
    }

    /// Both convergence conditions hold.
    pub fn conforming(&self) -> bool {
        self.layers_ok() && self.spectral_ok
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.spectrum;
        writeln!(f, "rho = {}", self.rho)?;
        writeln!(
            f,
            "lambda_min(H^H H) = {:.6}, lambda_max(H^H H) = {:.6}{}",
            s.lambda_min,
            s.lambda_max,
            if s.converged() { "" } else { " (power iteration hit its cap)" }
        )?;
        for (q, (ok, gamma)) in self.layer_ok.iter().zip(&self.gammas).enumerate() {
            writeln!(
                f,
                "layer {}: 4^{} * rho > alpha_{} ... {} (gamma_{} = {})",
                q + 1,
                q,
                q + 1,
                if *ok { "ok" } else { "VIOLATED" },
                q + 1,
                gamma
            )?;
        }
        writeln!(
            f,
            "spectral: rho > sqrt(2) * lambda_max = {:.6} ... {}",
            std::f64::consts::SQRT_2 * s.lambda_max,
            if self.spectral_ok { "ok" } else { "not met (sufficient condition only)" }
        )?;
        writeln!(f, "gamma_0 = {}", self.gamma_0)?;
        write!(
            f,
            "C = {}{}",
            self.c,
            if self.c > 0.0 { "" } else { " (iteration bound inapplicable)" }
        )
    }
}

/// Checks both convergence conditions; fails only when a layer subproblem
/// loses strict convexity. The spectral condition is reported, not enforced.
pub fn validate_params(params: &DetectorParams, bounds: &SpectrumBounds) -> Result<ValidationReport> {
    params.check()?;
    Ok(ValidationReport::evaluate(params, bounds))
}

/// Closed-form layer update: project
/// `2^q/(4^q ρ − α_q) · (ρ x_0 − ρ Σ_{i≠q} 2^i x_i + y)` onto the box,
/// real and imaginary parts separately. `layers` must hold the fresh values
/// for `i < q` and the previous ones for `i > q`.
pub fn update_layer(
    q: usize,
    layers: &[ComplexVector],
    x0: &[Complex64],
    y: &[Complex64],
    params: &DetectorParams,
) -> ComplexVector {
    let rho = params.rho;
    let scale = layer_weight(q) / params.gamma(q);
    let project = |t: f64| t.clamp(-1.0, 1.0);
    (0..x0.len())
        .map(|u| {
            let others: Complex64 = layers
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != q)
                .map(|(i, layer)| layer_weight(i) * layer[u])
                .sum();
            let raw = scale * (rho * (x0[u] - others) + y[u]);
            Complex64::new(project(raw.re), project(raw.im))
        })
        .collect::<Vec<_>>()
        .into()
}

/// `x_0 = (H^H H + ρI)^{-1} (H^H r + ρ Σ 2^q x_q − y)`.
pub fn update_x0(
    layers: &[ComplexVector],
    y: &[Complex64],
    factor: &HermitianFactorization,
    matched: &[Complex64],
    params: &DetectorParams,
) -> Result<ComplexVector> {
    let aggregate = recompose_layers(layers);
    let rhs: Vec<Complex64> = matched
        .iter()
        .zip(aggregate.iter())
        .zip(y)
        .map(|((m, s), yi)| m + params.rho * s - yi)
        .collect();
    factor.solve(&rhs)
}

/// `y + ρ (x_0 − Σ 2^q x_q)`.
pub fn update_dual(
    y: &[Complex64],
    x0: &[Complex64],
    layers: &[ComplexVector],
    params: &DetectorParams,
) -> ComplexVector {
    let aggregate = recompose_layers(layers);
    y.iter()
        .zip(x0)
        .zip(aggregate.iter())
        .map(|((yi, xi), si)| yi + params.rho * (xi - si))
        .collect::<Vec<_>>()
        .into()
}

/// `Σ_q ||x_q' − x_q||² + ||x_0' − x_0||²`.
pub fn residual(prev: &DetectorState, next: &DetectorState) -> f64 {
    prev.layers
        .iter()
        .zip(&next.layers)
        .map(|(a, b)| dist_sqr(a, b))
        .sum::<f64>()
        + dist_sqr(&prev.x0, &next.x0)
}

/// A detector bound to one channel realization, with `H^H H + ρI` factored
/// and `H^H r` computed once.
pub struct PsAdmm<'a> {
    instance: &'a ChannelInstance,
    params: &'a DetectorParams,
    modulation: Modulation,
    factor: HermitianFactorization,
    matched: Vec<Complex64>,
}

impl<'a> PsAdmm<'a> {
    pub fn new(instance: &'a ChannelInstance, params: &'a DetectorParams, modulation: Modulation) -> Result<Self> {
        params.check()?;
        if params.layers() != modulation.layers() {
            return Err(Error::DimensionMismatch {
                expected: modulation.layers(),
                found: params.layers(),
            });
        }
        let factor = factor_regularized(&gram(&instance.h), params.rho)?;
        let matched = instance.h.adjoint_mul_vec(&instance.r);
        Ok(Self {
            instance,
            params,
            modulation,
            factor,
            matched,
        })
    }

    pub fn initial_state(&self) -> DetectorState {
        DetectorState::initial(self.instance.users(), self.modulation.layers(), self.params.init)
    }

    /// One full iteration: layer sweep, `x_0` solve, dual ascent.
    pub fn step(&self, state: &DetectorState) -> Result<DetectorState> {
        let mut layers = state.layers.clone();
        for q in 0..layers.len() {
            layers[q] = update_layer(q, &layers, &state.x0, &state.y, self.params);
        }
        let x0 = update_x0(&layers, &state.y, &self.factor, &self.matched, self.params)?;
        let y = update_dual(&state.y, &x0, &layers, self.params);
        Ok(DetectorState {
            layers,
            x0,
            y,
            k: state.k + 1,
        })
    }

    pub fn lagrangian(&self, state: &DetectorState) -> f64 {
        augmented_lagrangian(state, &self.instance.h, &self.instance.r, self.params)
    }

    pub fn run(&self) -> Result<Detection> {
        self.run_observed(|_| {})
    }

    /// Runs and also returns every iterate, starting with the initial state.
    pub fn run_recording(&self) -> Result<(Detection, Vec<DetectorState>)> {
        let mut states = Vec::new();
        let detection = self.run_observed(|s| states.push(s.clone()))?;
        Ok((detection, states))
    }

    fn run_observed(&self, mut observe: impl FnMut(&DetectorState)) -> Result<Detection> {
        let mut state = self.initial_state();
        observe(&state);
        let mut trace = IterationTrace {
            initial_lagrangian: self.lagrangian(&state),
            records: Vec::with_capacity(self.params.max_iters),
        };
        let mut converged = false;
        while state.k < self.params.max_iters {
            let next = self.step(&state)?;
            if !next.is_finite() {
                return Err(Error::NumericalBlowup { iteration: next.k });
            }
            let layer_steps: Vec<f64> = state
                .layers
                .iter()
                .zip(&next.layers)
                .map(|(a, b)| dist_sqr(a, b))
                .collect();
            let x0_step = dist_sqr(&state.x0, &next.x0);
            let record = IterationRecord {
                lagrangian: self.lagrangian(&next),
                residual: layer_steps.iter().sum::<f64>() + x0_step,
                layer_steps,
                x0_step,
                dual_step: dist_sqr(&state.y, &next.y),
                primal_gap: next.primal_gap(),
            };
            let done = record.residual < self.params.residual_tol;
            trace.records.push(record);
            observe(&next);
            state = next;
            if done {
                converged = true;
                break;
            }
        }
        let x_hat = self.decide(&state);
        Ok(Detection {
            x_hat,
            trace,
            state,
            converged,
        })
    }

    fn decide(&self, state: &DetectorState) -> ComplexVector {
        match self.params.decision {
            DecisionRule::QuantizeX0 => hard_decision(&state.x0, self.modulation),
            DecisionRule::LayerSigns => {
                let sign = |t: f64| if t >= 0.0 { 1.0 } else { -1.0 };
                let signs: Vec<ComplexVector> = state
                    .layers
                    .iter()
                    .map(|l| {
                        l.iter()
                            .map(|z| Complex64::new(sign(z.re), sign(z.im)))
                            .collect::<Vec<_>>()
                            .into()
                    })
                    .collect();
                recompose_layers(&signs)
            }
        }
    }
}

/// Runs PS-ADMM on one channel realization.
pub fn psadmm_detect(
    instance: &ChannelInstance,
    params: &DetectorParams,
    modulation: Modulation,
) -> Result<Detection> {
    PsAdmm::new(instance, params, modulation)?.run()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationBound {
    /// Upper bound on the first iteration whose residual falls below `ε`.
    Bound(f64),
    /// `C ≤ 0`: no bound follows from the sufficient-decrease argument.
    Inapplicable,
}

/// `(L1 − L*) / (C ε)` when `C > 0`.
///
/// `l1` is the augmented Lagrangian after the first iteration; `lstar` a
/// lower bound for the limit value (the final iterate's Lagrangian works,
/// since the sequence is non-increasing from there on).
pub fn iteration_bound(report: &ValidationReport, l1: f64, lstar: f64, eps: f64) -> IterationBound {
    if report.c > 0.0 {
        IterationBound::Bound((l1 - lstar) / (report.c * eps))
    } else {
        IterationBound::Inapplicable
    }
}

/// Largest box-KKT violation of the penalized objective
/// `f({x_q}) = ½||r − H Σ 2^q x_q||² − Σ (α_q/2)||x_q||²` at the state's
/// layers. Per real coordinate `t` with partial derivative `g`: `|g|` in the
/// interior, `max(0, g)` at `t = +1` and `max(0, −g)` at `t = −1`.
pub fn stationarity_residual(
    state: &DetectorState,
    h: &ComplexMatrix,
    r: &[Complex64],
    params: &DetectorParams,
) -> f64 {
    let aggregate = state.aggregate();
    let hs = h.mul_vec(&aggregate);
    let misfit: Vec<Complex64> = hs.iter().zip(r).map(|(a, b)| a - b).collect();
    let data_grad = h.adjoint_mul_vec(&misfit);
    let violation = |t: f64, g: f64| {
        if t >= 1.0 {
            g.max(0.0)
        } else if t <= -1.0 {
            (-g).max(0.0)
        } else {
            g.abs()
        }
    };
    let mut worst: f64 = 0.0;
    for (q, layer) in state.layers.iter().enumerate() {
        let w = layer_weight(q);
        for (x, dg) in layer.iter().zip(&data_grad) {
            let g = w * dg - params.alphas[q] * x;
            worst = worst.max(violation(x.re, g.re)).max(violation(x.im, g.im));
        }
    }
    worst
}

//! Gradient descent with Armijo backtracking over a bounded number of
//! step reductions, or with a fixed step.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::init::estimate_norm;
use crate::measurement::{MeasurementModel, Observation};
use crate::numerics::{nmse, norm, norm_sqr, Field, SignalVector};
use crate::objective::ObjectiveKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Backtracking,
    FixedStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub objective: ObjectiveKind,
    /// Base step μ. See [`SolverConfig::effective_step`] for how it is scaled.
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub s_max: u32,
    pub max_iters: usize,
    pub mode: StepMode,
    /// Stop once ‖g‖ ≤ tol · max(1, ‖z‖).
    pub stop_grad_tol: f64,
    /// Stop once NMSE ≤ tol; only consulted when a ground truth is supplied.
    pub stop_nmse_tol: Option<f64>,
}

impl SolverConfig {
    /// Defaults for a field: μ = 4 (real) or 7 (complex) for the amplitude
    /// losses, 0.2 for the intensity loss; α = 0.4, β = 0.2, s_max = 2,
    /// T = 5000.
    pub fn new(objective: ObjectiveKind, field: Field) -> Self {
        SolverConfig {
            objective,
            mu: default_mu(objective, field),
            alpha: 0.4,
            beta: 0.2,
            s_max: 2,
            max_iters: 5000,
            mode: StepMode::Backtracking,
            stop_grad_tol: 1e-12,
            stop_nmse_tol: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.stop_grad_tol >= 0.0) {
            return bad("stop_grad_tol must be nonnegative");
        }
        Ok(())
    }

    /// Base step actually used on this instance: μ times the model's step
    /// scale, and for the intensity loss additionally divided by η² (the
    /// squared norm estimate), since that loss is quartic in z.
    pub fn effective_step(&self, model: &MeasurementModel, obs: &Observation) -> f64 {
        let mut mu = self.mu * model.step_scale();
        if let ObjectiveKind::Wf = self.objective {
            let eta = estimate_norm(obs);
            if eta > 0.0 {
                mu /= eta * eta;
            }
        }
        mu
    }
}

pub fn default_mu(objective: ObjectiveKind, field: Field) -> f64 {
    match (objective, field) {
        (ObjectiveKind::Wf, _) => 0.2,
        (_, Field::Real) => 4.0,
        (_, Field::Complex) => 7.0,
    }
}

/// One accepted step of the line search.
#[derive(Debug, Clone)]
pub struct Backtrack<E> {
    pub step: f64,
    pub reductions: u32,
    /// Whether the Armijo condition held at the accepted step.
    pub armijo: bool,
    pub z_next: SignalVector,
    pub loss_next: f64,
    /// Whatever the loss callback produced alongside the loss.
    pub extra: E,
}

/// Finds the smallest s ∈ {0..s_max} with
/// ℓ(z − βˢμg) ≤ ℓ(z) − αβˢμ‖g‖². If none qualifies the step μβ^{s_max}
/// is taken anyway.
pub fn backtrack_step<E, F>(
    mut loss_at: F,
    z: &SignalVector,
    g: &SignalVector,
    loss_z: f64,
    mu: f64,
    alpha: f64,
    beta: f64,
    s_max: u32,
) -> Result<Backtrack<E>>
where
    F: FnMut(&SignalVector) -> (f64, E),
{
    if !g.is_finite() {
        return Err(Error::Domain("non-finite gradient".into()));
    }
    let g2 = g.norm_sqr();
    let mut step = mu;
    let mut any_finite = false;
    let mut s = 0;
    loop {
        let z_next = z.axpy(-step, g)?;
        let (loss_next, extra) = loss_at(&z_next);
        any_finite |= loss_next.is_finite();
        let armijo = loss_next <= loss_z - alpha * step * g2;
        if armijo || s >= s_max {
            if !any_finite {
                return Err(Error::Domain("loss is non-finite at every candidate step".into()));
            }
            return Ok(Backtrack {
                step,
                reductions: s,
                armijo,
                z_next,
                loss_next,
                extra,
            });
        }
        s += 1;
        step *= beta;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    /// ℓ(z_t).
    pub loss: f64,
    /// Step that produced z_t from z_{t−1} (0 at t = 0).
    pub step: f64,
    pub backtracks: u32,
    pub armijo: bool,
    /// ‖∇ℓ(z_t)‖.
    pub grad_norm: f64,
    pub nmse: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    MaxIters,
    GradConverged,
    NmseConverged,
    /// A non-finite iterate or loss was produced.
    Failed,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::MaxIters => "max_iters",
            SolverStatus::GradConverged => "grad_converged",
            SolverStatus::NmseConverged => "nmse_converged",
            SolverStatus::Failed => "failed",
        }
    }
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    pub status: SolverStatus,
}

impl SolverTrace {
    /// Number of gradient steps taken.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// Runs descent from `init`. Returns the final iterate (non-finite only when
/// the status is `Failed`) and the full trace.
pub fn run(
    model: &MeasurementModel,
    obs: &Observation,
    cfg: &SolverConfig,
    init: &SignalVector,
    truth: Option<&SignalVector>,
) -> Result<(SignalVector, SolverTrace)> {
    cfg.validate()?;
    model.check_signal(init)?;
    if obs.len() != model.m() {
        return Err(Error::dim("observation vs model", model.m(), obs.len()));
    }
    if let Some(x) = truth {
        model.check_signal(x)?;
    }
    let b = obs.amplitudes();
    let kind = cfg.objective;
    let mu = cfg.effective_step(model, obs);
    let field = model.field();

    let forward = |z: &SignalVector| {
        let mut u = vec![Complex64::new(0.0, 0.0); model.m()];
        model.forward_raw(z.as_slice(), &mut u);
        u
    };
    let measure = |z: &SignalVector| truth.map(|x| nmse(z, x)).transpose();

    let mut z = init.clone();
    let mut u = forward(&z);
    let mut loss = kind.loss_from_forward(&u, b);
    let mut records = Vec::new();
    let (mut step, mut backtracks, mut armijo) = (0.0, 0, true);
    let mut t = 0;

    let status = loop {
        if !loss.is_finite() || !z.is_finite() {
            break SolverStatus::Failed;
        }
        let g = SignalVector::from_raw(field, kind.gradient_from_forward(model, &u, b));
        let grad_norm = norm(g.as_slice());
        let err = measure(&z)?;
        records.push(IterationRecord {
            t,
            loss,
            step,
            backtracks,
            armijo,
            grad_norm,
            nmse: err,
        });
        if !grad_norm.is_finite() {
            break SolverStatus::Failed;
        }
        if let (Some(e), Some(tol)) = (err, cfg.stop_nmse_tol) {
            if e <= tol {
                break SolverStatus::NmseConverged;
            }
        }
        if grad_norm <= cfg.stop_grad_tol * z.norm().max(1.0) {
            break SolverStatus::GradConverged;
        }
        if t >= cfg.max_iters {
            break SolverStatus::MaxIters;
        }

        match cfg.mode {
            StepMode::Backtracking => {
                let outcome = backtrack_step(
                    |cand: &SignalVector| {
                        let uc = forward(cand);
                        (kind.loss_from_forward(&uc, b), uc)
                    },
                    &z,
                    &g,
                    loss,
                    mu,
                    cfg.alpha,
                    cfg.beta,
                    cfg.s_max,
                );
                let Ok(outcome) = outcome else {
                    break SolverStatus::Failed;
                };
                step = outcome.step;
                backtracks = outcome.reductions;
                armijo = outcome.armijo;
                z = outcome.z_next;
                loss = outcome.loss_next;
                u = outcome.extra;
            }
            StepMode::FixedStep => {
                z = z.axpy(-mu, &g)?;
                u = forward(&z);
                let next = kind.loss_from_forward(&u, b);
                armijo = next <= loss - cfg.alpha * mu * norm_sqr(g.as_slice());
                loss = next;
                step = mu;
                backtracks = 0;
            }
        }
        t += 1;
    };

    Ok((z, SolverTrace { records, status }))
}

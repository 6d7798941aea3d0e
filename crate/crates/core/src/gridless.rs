//! Gridless refinement of support locations.
//!
//! Starting from a grid solution `f = Σ α_i f_{θ_i}`, the weights are frozen
//! and the locations moved along the steepest-descent direction of
//! `τ(h) = φ(Σ α_i f_{θ_i + h_i}) − φ(f)`. The step length comes from a
//! regula falsi search for a zero of `μ_h′(ε) = hᵀ∇τ(εh)`; after each shift
//! the weights are reoptimized over the cone spanned by the shifted kernels.
//! The loop stops once `‖∇τ(0)‖` falls below the configured tolerance.

use log::{debug, info};

use crate::error::{Error, Result};
use crate::family::{Atom, AtomicMeasure, MixingMeasure};
use crate::solver::{check_optimality, Certificate, ConeObjective, DerivativeKind, SolverConfig, Tolerance};

/// Model hooks needed to move support points at fixed weights.
pub trait LocationObjective {
    /// Whether `theta` is a valid kernel parameter.
    fn contains(&self, theta: f64) -> bool;

    /// `φ` at a finite mixture.
    fn location_objective(&self, atoms: &[Atom]) -> Result<f64>;

    /// `φ(to) − φ(from)`.
    fn shift_change(&self, from: &[Atom], to: &[Atom]) -> Result<f64> {
        Ok(self.location_objective(to)? - self.location_objective(from)?)
    }

    /// `∂φ/∂θ_i` at fixed weights: `α_i · d/dθ D_φ(f_θ; f)` at `θ = θ_i`.
    fn location_gradient(&self, atoms: &[Atom]) -> Result<Vec<f64>>;

    /// `D_φ(f_θ; f)`.
    fn vertex_derivative(&self, theta: f64, atoms: &[Atom]) -> Result<f64>;

    /// Minimizes `φ` over the cone spanned by the kernels at the locations
    /// of `start`, starting from `start`.
    fn reoptimize(&self, start: &MixingMeasure, config: &SolverConfig) -> Result<MixingMeasure>;
}

/// `∇τ(0)` at the atoms of `f`.
pub fn tau_gradient<M: LocationObjective + ?Sized>(model: &M, atoms: &[Atom]) -> Result<Vec<f64>> {
    model.location_gradient(atoms)
}

/// Secant zero of `μ′` through `(ε_l, g_l)` and `(ε_u, g_u)`; requires
/// `g_l < 0 < g_u`.
pub fn regula_falsi_step(lower: f64, upper: f64, g_lower: f64, g_upper: f64) -> Result<f64> {
    if !(g_lower < 0.0 && g_upper > 0.0) {
        return Err(Error::Bracket {
            lower: g_lower,
            upper: g_upper,
        });
    }
    let next = (lower * g_upper - upper * g_lower) / (g_upper - g_lower);
    Ok(next.clamp(lower, upper))
}

/// Stopping and safeguarding parameters of the step-length search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    /// Factor `c` applied to the trust radius after a failed search.
    pub shrink: f64,
    pub max_iter: usize,
    /// Stop when `|μ′(ε)| ≤ rel_tol·|μ′(0)|`.
    pub rel_tol: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            shrink: 0.9,
            max_iter: 100,
            rel_tol: 1e-10,
        }
    }
}

/// Finds a root of `g` in `[lower, upper]` by regula falsi, given
/// `g(lower) < 0 < g(upper)`. A retained endpoint has its value halved when
/// it is kept twice in a row (Illinois safeguard).
pub fn regula_falsi<G: FnMut(f64) -> Result<f64>>(
    mut g: G,
    mut lower: f64,
    mut upper: f64,
    mut g_lower: f64,
    mut g_upper: f64,
    abs_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut next = regula_falsi_step(lower, upper, g_lower, g_upper)?;
    // +1 when the upper end was replaced last, −1 when the lower end was.
    let mut side = 0i8;
    for _ in 0..max_iter {
        let gn = g(next)?;
        if gn.abs() <= abs_tol || upper - lower <= f64::EPSILON * upper.abs() {
            break;
        }
        if gn > 0.0 {
            upper = next;
            g_upper = gn;
            if side == 1 {
                g_lower *= 0.5;
            }
            side = 1;
        } else {
            lower = next;
            g_lower = gn;
            if side == -1 {
                g_upper *= 0.5;
            }
            side = -1;
        }
        next = regula_falsi_step(lower, upper, g_lower, g_upper)?;
    }
    Ok(next)
}

fn shift(atoms: &[Atom], direction: &[f64], eps: f64) -> Vec<Atom> {
    atoms
        .iter()
        .zip(direction)
        .map(|(a, h)| Atom::new(a.location + eps * h, a.weight))
        .collect()
}

fn is_valid_shift<M: LocationObjective + ?Sized>(model: &M, atoms: &[Atom]) -> bool {
    atoms.iter().all(|a| model.contains(a.location))
        && atoms.windows(2).all(|w| w[0].location < w[1].location)
}

/// Step length `ε` along the unit direction `h` with `τ(εh) < 0`.
///
/// Takes the full step `ε₀` when `μ′(ε₀) < 0`; otherwise runs regula falsi
/// on `[0, ε₀]` for a stationary point of `μ`. When the resulting point does
/// not decrease `τ`, the search restarts with `ε₀ ← c·ε`.
pub fn line_search<M: LocationObjective + ?Sized>(
    model: &M,
    atoms: &[Atom],
    direction: &[f64],
    eps0: f64,
    params: LineSearchParams,
) -> Result<f64> {
    let slope = |eps: f64| -> Result<f64> {
        let shifted = shift(atoms, direction, eps);
        let grad = model.location_gradient(&shifted)?;
        Ok(grad.iter().zip(direction).map(|(g, h)| g * h).sum())
    };
    let value = |eps: f64| -> Result<f64> { model.shift_change(atoms, &shift(atoms, direction, eps)) };

    let g0 = slope(0.0)?;
    if !(g0 < 0.0) {
        return Err(Error::NoImprovement { radius: eps0 });
    }
    let floor = 1e-14 * eps0;
    let mut radius = eps0;
    while radius >= floor {
        if !is_valid_shift(model, &shift(atoms, direction, radius)) {
            radius *= params.shrink;
            continue;
        }
        let g_upper = slope(radius)?;
        // Still descending (or flat) at the boundary: take the full radius.
        let candidate = if g_upper <= 0.0 {
            radius
        } else {
            regula_falsi(slope, 0.0, radius, g0, g_upper, params.rel_tol * g0.abs(), params.max_iter)?
        };
        if candidate > 0.0 && value(candidate)? < 0.0 {
            return Ok(candidate);
        }
        radius = params.shrink * if candidate > 0.0 { candidate } else { radius };
    }
    Err(Error::NoImprovement { radius })
}

/// Largest initial step keeping the shifted locations ordered:
/// `ε₀ = ½·min gap / max|h_i|`, or `cap` for a single atom.
pub fn trust_radius(atoms: &[Atom], direction: &[f64], cap: f64) -> f64 {
    let hmax = direction.iter().fold(0.0f64, |m, h| m.max(h.abs()));
    if hmax == 0.0 {
        return cap;
    }
    let min_gap = atoms
        .windows(2)
        .map(|w| w[1].location - w[0].location)
        .fold(f64::INFINITY, f64::min);
    if min_gap.is_finite() {
        (0.5 * min_gap / hmax).min(cap)
    } else {
        cap
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneOutcome {
    pub measure: MixingMeasure,
    /// Number of shift-and-reoptimize steps taken.
    pub steps: usize,
    /// Objective before fine-tuning followed by the value after every
    /// shift and every reoptimization.
    pub objectives: Vec<f64>,
    /// Objective change of every sub-step.
    pub changes: Vec<f64>,
    /// `‖∇τ(0)‖` at the returned measure.
    pub gradient_norm: f64,
    /// Whether the gradient norm reached the tolerance.
    pub converged: bool,
}

/// Alternates location shifts and weight reoptimization until
/// `‖∇τ(0)‖ ≤ config.gridless_tol` or the step budget runs out.
pub fn fine_tune<M: LocationObjective + ?Sized>(
    model: &M,
    measure: &MixingMeasure,
    config: &SolverConfig,
) -> Result<FineTuneOutcome> {
    let params = LineSearchParams::default();
    let cap = 0.5 * (config.grid.last() - config.grid.first()).max(1e-3);
    let mut f = measure.clone();
    let mut objective = model.location_objective(f.atoms())?;
    let mut objectives = vec![objective];
    let mut changes = Vec::new();
    let mut steps = 0;
    let mut converged = false;
    let mut gradient_norm = f64::INFINITY;

    while steps < config.max_gridless_steps {
        if f.is_empty() {
            gradient_norm = 0.0;
            converged = true;
            break;
        }
        let grad = tau_gradient(model, f.atoms())?;
        gradient_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gradient_norm <= config.gridless_tol {
            converged = true;
            break;
        }
        let direction: Vec<f64> = grad.iter().map(|g| -g / gradient_norm).collect();
        let eps0 = trust_radius(f.atoms(), &direction, cap);
        let eps = match line_search(model, f.atoms(), &direction, eps0, params) {
            Ok(eps) => eps,
            Err(Error::NoImprovement { radius }) => {
                info!("fine tuning stopped: no improving shift (radius {radius:e}, ‖∇τ‖ = {gradient_norm:.3e})");
                break;
            }
            Err(e) => return Err(e),
        };
        let shifted_atoms = shift(f.atoms(), &direction, eps);
        let change = model.shift_change(f.atoms(), &shifted_atoms)?;
        let shifted = MixingMeasure::new(shifted_atoms)?;
        let shifted_objective = model.location_objective(shifted.atoms())?;
        changes.push(change);
        objectives.push(shifted_objective);

        let next = model.reoptimize(&shifted, config)?;
        let change = model.shift_change(shifted.atoms(), next.atoms())?;
        changes.push(change);
        objective = model.location_objective(next.atoms())?;
        objectives.push(objective);
        f = next;
        steps += 1;
        debug!(
            "fine tune step {steps}: ε = {eps:.3e}, ‖∇τ‖ = {gradient_norm:.3e}, φ = {objective:.15e}, {} atoms",
            f.len()
        );
    }
    Ok(FineTuneOutcome {
        measure: f,
        steps,
        objectives,
        changes,
        gradient_norm,
        converged,
    })
}

/// Runs [`fine_tune`] to `config.gridless_tol`, then keeps tightening the
/// location tolerance tenfold (at most three times) while the grid
/// certificate of the refined measure fails.
pub fn fine_tune_certified<M>(
    model: &M,
    measure: &MixingMeasure,
    config: &SolverConfig,
    tol: Tolerance,
    kind: DerivativeKind,
) -> Result<(FineTuneOutcome, Certificate)>
where
    M: LocationObjective + ConeObjective + ?Sized,
{
    let mut outcome = fine_tune(model, measure, config)?;
    let mut cert = check_optimality(model, &outcome.measure, &config.grid, tol, kind);
    let mut local = config.clone();
    for _ in 0..3 {
        if cert.pass || !outcome.converged {
            break;
        }
        local.gridless_tol *= 0.1;
        local.max_gridless_steps = config.max_gridless_steps.saturating_sub(outcome.steps);
        debug!(
            "grid certificate gap {:.3e} after fine tuning; tightening to ‖∇τ‖ ≤ {:e}",
            cert.gap(),
            local.gridless_tol
        );
        let more = fine_tune(model, &outcome.measure, &local)?;
        outcome.steps += more.steps;
        outcome.objectives.extend_from_slice(&more.objectives[1..]);
        outcome.changes.extend(more.changes);
        outcome.measure = more.measure;
        outcome.gradient_norm = more.gradient_norm;
        outcome.converged = more.converged || more.gradient_norm <= config.gridless_tol;
        cert = check_optimality(model, &outcome.measure, &config.grid, tol, kind);
    }
    Ok((outcome, cert))
}

//! Support reduction over the convex cone generated by a kernel family.
//!
//! The solver minimizes a convex objective `φ` over finite nonnegative
//! mixtures `f = Σ α_i f_{θ_i}` with `θ_i` taken from a grid. Each outer
//! iteration picks the grid point with the most negative (alternative)
//! directional derivative, adds it to the support and runs a
//! [`support_reduction_step`]: repeated unrestricted minimization over the
//! linear span of the support, stepping back to the boundary of the cone and
//! deleting a support point whenever the unconstrained solution has a
//! nonpositive weight.
//!
//! Models plug in through [`ConeObjective`].

mod baseline;

pub use baseline::{fedorov_wynn_step, line_minimize, vertex_exchange_step};

use log::{debug, info, trace};

use crate::error::{Error, Result};
use crate::family::{combine, Atom, AtomicMeasure, MixingMeasure, SignedMixingMeasure};

/// Contract between the solver and a model's objective `φ`.
///
/// Every method must be a pure function of its arguments.
pub trait ConeObjective {
    /// `φ(f)` for a finite (possibly signed) mixture.
    fn objective(&self, f: &[Atom]) -> f64;

    /// `D_φ(f_θ; f)` for every `θ` in `thetas`.
    fn vertex_derivatives(&self, thetas: &[f64], f: &[Atom]) -> Vec<f64>;

    /// `D̃_φ(f_θ; f) = w(θ)·D_φ(f_θ; f)` with `w > 0`, for every `θ` in `thetas`.
    fn alt_vertex_derivatives(&self, thetas: &[f64], f: &[Atom]) -> Vec<f64>;

    /// Minimizer of `φ` over the linear span of `{f_θ : θ ∈ support}`.
    /// `support` is strictly increasing.
    fn unrestricted_min(&self, support: &[f64]) -> Result<SignedMixingMeasure>;

    /// Same as [`unrestricted_min`](Self::unrestricted_min) with a tighter
    /// linear solve.
    fn refined_unrestricted_min(&self, support: &[f64]) -> Result<SignedMixingMeasure> {
        self.unrestricted_min(support)
    }

    /// Second derivative of `ε ↦ φ(f + ε h)`, when `φ` is quadratic.
    fn curvature(&self, _direction: &[Atom]) -> Option<f64> {
        None
    }

    /// A feasible starting measure; the solver reduces it to a stationary
    /// point over its own support before the first outer iteration.
    fn initial_measure(&self, grid: &Grid) -> Result<MixingMeasure>;

    fn dir_deriv_vertex(&self, theta: f64, f: &[Atom]) -> f64 {
        self.vertex_derivatives(&[theta], f)[0]
    }

    fn alt_dir_deriv_vertex(&self, theta: f64, f: &[Atom]) -> f64 {
        self.alt_vertex_derivatives(&[theta], f)[0]
    }

    /// `D_φ(h; f)` for a finite signed measure `h`, using linearity in `h`.
    fn dir_deriv(&self, h: &[Atom], f: &[Atom]) -> f64 {
        let thetas: Vec<f64> = h.iter().map(|a| a.location).collect();
        self.vertex_derivatives(&thetas, f)
            .iter()
            .zip(h)
            .map(|(d, a)| d * a.weight)
            .sum()
    }

    /// `φ(to) − φ(from)`. For quadratic objectives this uses the exact
    /// second-order expansion, which keeps tiny decreases visible.
    fn objective_change(&self, from: &[Atom], to: &[Atom]) -> f64 {
        let direction = combine(to, from, -1.0);
        match self.curvature(&direction) {
            Some(q) => self.dir_deriv(&direction, from) + 0.5 * q,
            None => self.objective(to) - self.objective(from),
        }
    }
}

/// A finite, strictly increasing set of candidate support points.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("grid is empty".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("grid has non-finite points".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    /// `n` equally spaced points on `[lo, hi]`, endpoints included.
    pub fn equidistant(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("grid size must be positive".into()));
        }
        if n == 1 {
            return Self::new(vec![lo]);
        }
        if !(hi > lo) {
            return Err(Error::InvalidConfig(format!(
                "grid bounds [{lo}, {hi}] are empty"
            )));
        }
        let h = (hi - lo) / (n - 1) as f64;
        Self::new((0..n).map(|i| lo + i as f64 * h).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// Which vertex score drives vertex selection and the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeKind {
    /// `D_φ(f_θ; f)`.
    Raw,
    /// `c₁/√c₂`, the curvature-normalized score.
    #[default]
    Alternative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Accuracy `η`: stop once the minimal vertex score is at least `−η`.
    pub eta: f64,
    pub grid: Grid,
    pub max_outer_iter: usize,
    /// Weights at or below this value count as absent.
    pub purge_threshold: f64,
    pub derivative: DerivativeKind,
    /// Tolerance on `|D_φ|` at support points in optimality certificates.
    pub support_tol: f64,
    /// Cap on damped Newton iterations for likelihood models.
    pub max_newton_iter: usize,
    pub gridless: bool,
    pub gridless_tol: f64,
    pub max_gridless_steps: usize,
}

impl SolverConfig {
    pub fn new(grid: Grid) -> Self {
        Self {
            eta: 1e-10,
            grid,
            max_outer_iter: 10_000,
            purge_threshold: 0.0,
            derivative: DerivativeKind::Alternative,
            support_tol: 1e-8,
            max_newton_iter: 500,
            gridless: false,
            gridless_tol: 1e-6,
            max_gridless_steps: 100_000,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.purge_threshold >= 0.0 && self.purge_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "purge threshold must be nonnegative, got {}",
                self.purge_threshold
            )));
        }
        if !(self.support_tol > 0.0) {
            return Err(Error::InvalidConfig("support tolerance must be positive".into()));
        }
        if self.gridless && !(self.gridless_tol > 0.0) {
            return Err(Error::InvalidConfig("gridless tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// One outer iteration of [`solve`] (or one damped Newton step).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Objective after the iteration.
    pub objective: f64,
    /// Objective change produced by the iteration.
    pub decrease: f64,
    pub support_size: usize,
    /// Minimal vertex score over the grid before the iteration.
    pub min_derivative: f64,
    /// Grid minimizer of the selected score (the vertex that was added).
    pub vertex: Option<f64>,
    /// Grid minimizer of the raw derivative `D_φ`.
    pub raw_vertex: Option<f64>,
    pub deletions: usize,
    /// Objective change of every inner sub-step.
    pub inner_changes: Vec<f64>,
    /// Damping factor of a Newton step.
    pub step_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverTrace {
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
    /// Minimal vertex score at termination.
    pub final_min_derivative: f64,
    pub converged: bool,
    /// Traces of nested solves (the quadratic subproblems of a Newton run).
    pub subproblems: Vec<SolverTrace>,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Objective values: the initial value followed by the value after each
    /// iteration.
    pub fn objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective)
            .chain(self.records.iter().map(|r| r.objective))
            .collect()
    }

    pub fn final_objective(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_objective, |r| r.objective)
    }
}

/// Vertex scores of `f` over `thetas`.
pub fn vertex_scores<M: ConeObjective + ?Sized>(
    model: &M,
    f: &[Atom],
    thetas: &[f64],
    kind: DerivativeKind,
) -> Vec<f64> {
    match kind {
        DerivativeKind::Raw => model.vertex_derivatives(thetas, f),
        DerivativeKind::Alternative => model.alt_vertex_derivatives(thetas, f),
    }
}

fn argmin(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
}

/// Grid point minimizing the chosen vertex score, and the minimal score.
pub fn min_dir_deriv<M: ConeObjective + ?Sized>(
    model: &M,
    f: &[Atom],
    grid: &Grid,
    kind: DerivativeKind,
) -> (f64, f64) {
    let scores = vertex_scores(model, f, grid.points(), kind);
    let (i, v) = argmin(&scores);
    (grid.points()[i], v)
}

/// Grid point minimizing `D̃_φ(f_θ; f)` and the minimal value. A
/// nonnegative value means no grid vertex is a descent direction.
pub fn min_alt_dir_deriv<M: ConeObjective + ?Sized>(
    model: &M,
    f: &[Atom],
    grid: &Grid,
) -> (f64, f64) {
    min_dir_deriv(model, f, grid, DerivativeKind::Alternative)
}

/// `λ̂ = (1 − σ_u/σ_f)^{-1}`: the fraction of the way from the current
/// weight `σ_f` to the unconstrained weight `σ_u` at which the weight hits
/// zero.
pub fn boundary_fraction(current: f64, unrestricted: f64) -> f64 {
    if current <= 0.0 {
        0.0
    } else {
        1.0 / (1.0 - unrestricted / current)
    }
}

/// Result of one [`support_reduction_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionStep {
    pub measure: MixingMeasure,
    pub deletions: usize,
    /// Objective change of every boundary move and of the final move.
    pub inner_changes: Vec<f64>,
    /// Weight of the added vertex in the first unconstrained minimizer.
    pub new_vertex_weight: Option<f64>,
}

/// Minimizes `φ` over the cone spanned by a subset of `support`, starting
/// from the feasible `current` (whose support must lie in `support`).
///
/// The returned measure is the unconstrained minimizer over its own support
/// and has all weights above `purge_threshold`.
pub fn support_reduction_step<M: ConeObjective + ?Sized>(
    model: &M,
    support: &[f64],
    current: &MixingMeasure,
    new_vertex: Option<f64>,
    purge_threshold: f64,
    refined: bool,
) -> Result<ReductionStep> {
    let mut points: Vec<f64> = support.to_vec();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let capacity = points.len();
    let mut weights: Vec<f64> = points.iter().map(|&t| current.weight_at(t)).collect();
    let minimize = |pts: &[f64]| -> Result<SignedMixingMeasure> {
        if pts.is_empty() {
            Ok(SignedMixingMeasure::default())
        } else if refined {
            model.refined_unrestricted_min(pts)
        } else {
            model.unrestricted_min(pts)
        }
    };

    let mut unrestricted = minimize(&points)?;
    let new_vertex_weight = new_vertex.map(|t| unrestricted.weight_at(t));
    let mut deletions = 0;
    let mut inner_changes = Vec::new();

    loop {
        let u = unrestricted.weights();
        let blocking: Vec<usize> = (0..points.len()).filter(|&i| u[i] <= purge_threshold).collect();
        if blocking.is_empty() {
            break;
        }
        if deletions >= capacity {
            return Err(Error::Cycling {
                deletions,
                size: capacity,
            });
        }
        let fractions: Vec<f64> = blocking
            .iter()
            .map(|&i| boundary_fraction(weights[i], u[i]).clamp(0.0, 1.0))
            .collect();
        let lambda = fractions.iter().copied().fold(f64::INFINITY, f64::min);
        let before = atoms_of(&points, &weights);
        let mut next: Vec<f64> = weights
            .iter()
            .zip(&u)
            .map(|(w, ui)| w + lambda * (ui - w))
            .collect();
        let tie = lambda + 1e-12 * lambda.abs().max(f64::MIN_POSITIVE);
        let removed: Vec<usize> = blocking
            .iter()
            .zip(&fractions)
            .filter(|(_, &fr)| fr <= tie)
            .map(|(&i, _)| i)
            .collect();
        for &i in &removed {
            next[i] = 0.0;
        }
        let keep: Vec<usize> = (0..points.len()).filter(|i| !removed.contains(i)).collect();
        points = keep.iter().map(|&i| points[i]).collect();
        weights = keep.iter().map(|&i| next[i]).collect();
        inner_changes.push(model.objective_change(&before, &atoms_of(&points, &weights)));
        deletions += removed.len();
        trace!(
            "boundary step λ = {lambda:.3e}, deleted {} point(s), {} remain",
            removed.len(),
            points.len()
        );
        unrestricted = minimize(&points)?;
    }

    let before = atoms_of(&points, &weights);
    inner_changes.push(model.objective_change(&before, unrestricted.atoms()));
    let measure = unrestricted
        .to_mixing(purge_threshold)
        .expect("all weights exceed the purge threshold");
    Ok(ReductionStep {
        measure,
        deletions,
        inner_changes,
        new_vertex_weight,
    })
}

fn atoms_of(points: &[f64], weights: &[f64]) -> Vec<Atom> {
    points
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w != 0.0)
        .map(|(&t, &w)| Atom::new(t, w))
        .collect()
}

/// Runs support reduction from the model's own starting measure.
pub fn solve<M: ConeObjective + ?Sized>(
    model: &M,
    config: &SolverConfig,
) -> Result<(MixingMeasure, SolverTrace)> {
    config.validate()?;
    let start = model.initial_measure(&config.grid)?;
    solve_from(model, config, &start)
}

/// Runs support reduction from a feasible starting measure.
pub fn solve_from<M: ConeObjective + ?Sized>(
    model: &M,
    config: &SolverConfig,
    start: &MixingMeasure,
) -> Result<(MixingMeasure, SolverTrace)> {
    config.validate()?;
    let grid = &config.grid;
    let mut f = support_reduction_step(
        model,
        &start.locations(),
        start,
        None,
        config.purge_threshold,
        false,
    )?
    .measure;
    let mut trace = SolverTrace {
        initial_objective: model.objective(f.atoms()),
        ..SolverTrace::default()
    };

    loop {
        let scores = vertex_scores(model, f.atoms(), grid.points(), config.derivative);
        let (i, min_score) = argmin(&scores);
        let vertex = grid.points()[i];
        trace.final_min_derivative = min_score;
        if min_score >= -config.eta {
            trace.converged = true;
            break;
        }
        if trace.records.len() >= config.max_outer_iter {
            info!(
                "support reduction stopped after {} iterations (min score {min_score:.3e})",
                trace.records.len()
            );
            break;
        }
        let raw_vertex = match config.derivative {
            DerivativeKind::Raw => vertex,
            DerivativeKind::Alternative => {
                let raw = model.vertex_derivatives(grid.points(), f.atoms());
                grid.points()[argmin(&raw).0]
            }
        };

        let already_present = f.weight_at(vertex) > 0.0;
        let mut support = f.locations();
        if !already_present {
            support.push(vertex);
        }
        let step = support_reduction_step(
            model,
            &support,
            &f,
            (!already_present).then_some(vertex),
            config.purge_threshold,
            already_present,
        )?;
        let decrease = model.objective_change(f.atoms(), step.measure.atoms());
        if !(decrease < 0.0) {
            debug!("step towards θ̂ = {vertex} made no progress (change {decrease:e})");
            break;
        }
        f = step.measure;
        let objective = model.objective(f.atoms());
        trace!(
            "iteration {}: θ̂ = {vertex:.6}, score {min_score:.3e}, φ = {objective:.15e}, {} atoms",
            trace.records.len() + 1,
            f.len()
        );
        trace.records.push(IterationRecord {
            objective,
            decrease,
            support_size: f.len(),
            min_derivative: min_score,
            vertex: Some(vertex),
            raw_vertex: Some(raw_vertex),
            deletions: step.deletions,
            inner_changes: step.inner_changes,
            step_length: None,
        });
    }
    Ok((f, trace))
}

/// Tolerances of an optimality certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Vertex scores on the grid must be at least `−grid`.
    pub grid: f64,
    /// `|D_φ|` at support points must be at most `support`.
    pub support: f64,
}

impl Tolerance {
    pub fn uniform(tol: f64) -> Self {
        Self {
            grid: tol,
            support: tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Minimal vertex score over the grid.
    pub min_grid_value: f64,
    pub argmin: f64,
    /// Largest `|D_φ(f_θ; f)|` over the support of `f`.
    pub max_abs_support_value: f64,
    pub kind: DerivativeKind,
    pub pass: bool,
}

impl Certificate {
    /// Largest violation of either condition (zero when both hold exactly).
    pub fn gap(&self) -> f64 {
        (-self.min_grid_value).max(self.max_abs_support_value).max(0.0)
    }
}

/// Checks the cone optimality conditions: `D_φ(f_θ; f) ≥ 0` on the grid
/// (through the score selected by `kind`) and `D_φ(f_θ; f) = 0` on the
/// support of `f`.
pub fn check_optimality<M: ConeObjective + ?Sized>(
    model: &M,
    f: &MixingMeasure,
    grid: &Grid,
    tol: Tolerance,
    kind: DerivativeKind,
) -> Certificate {
    let scores = vertex_scores(model, f.atoms(), grid.points(), kind);
    let (i, min_grid_value) = argmin(&scores);
    let max_abs_support_value = model
        .vertex_derivatives(&f.locations(), f.atoms())
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()));
    Certificate {
        min_grid_value,
        argmin: grid.points()[i],
        max_abs_support_value,
        kind,
        pass: min_grid_value >= -tol.grid && max_abs_support_value <= tol.support,
    }
}

//! Maximum likelihood Gaussian deconvolution.
//!
//! Observations are `X = θ + Z` with `Z ~ N(0, 1)` and `θ` drawn from an
//! unknown mixing distribution. The estimate minimizes the relaxed objective
//!
//! ```text
//! φ(f) = −(1/n) Σ log f(x_i) + ∫ f
//! ```
//!
//! over positive Gaussian mixtures; any minimizer has total mass one. The
//! solver is a damped Newton iteration: at the current iterate `f̄` the
//! logarithm is replaced by its second-order Taylor polynomial, the resulting
//! quadratic [`QuadLocalModel`] is minimized by support reduction, and the
//! step towards that minimizer is halved until `φ` decreases.

use log::{debug, info};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::{
    combine, mixture_eval, total_mass, Atom, AtomicMeasure, GaussianFamily, MixingMeasure, ParametricFamily,
    SignedMixingMeasure,
};
use crate::gridless::LocationObjective;
use crate::linalg::solve_spd;
use crate::sample::Sample;
use crate::solver::{
    check_optimality, solve_from, Certificate, ConeObjective, DerivativeKind, Grid, IterationRecord, SolverConfig,
    SolverTrace, Tolerance,
};

/// Maximum number of step halvings in the damped Newton update.
pub const MAX_HALVINGS: usize = 60;

/// Default grid size for the deconvolution model.
pub const DEFAULT_GRID_SIZE: usize = 500;

#[derive(Debug, Clone)]
pub struct MlModel {
    sample: Sample,
}

impl MlModel {
    pub fn new(sample: Sample) -> Self {
        Self { sample }
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    /// `n` equally spaced points on `[x_(1), x_(n)]`.
    pub fn default_grid(&self, n: usize) -> Result<Grid> {
        let (lo, hi) = (self.sample.min(), self.sample.max());
        if lo == hi {
            return Grid::new(vec![lo]);
        }
        Grid::equidistant(lo, hi, n)
    }

    /// `f(x_i)` at every observation.
    pub fn mixture_values(&self, f: &[Atom]) -> Vec<f64> {
        self.sample
            .values()
            .iter()
            .map(|&x| mixture_eval(&GaussianFamily, f, x))
            .collect()
    }

    fn positive_values(&self, f: &[Atom]) -> Result<Vec<f64>> {
        let values = self.mixture_values(f);
        match values
            .iter()
            .zip(self.sample.values())
            .find(|(v, _)| !(**v > 0.0 && v.is_finite()))
        {
            Some((_, &x)) => Err(Error::InfiniteObjective { x }),
            None => Ok(values),
        }
    }

    /// `−(1/n) Σ log f(x_i) + total_mass(f)`.
    pub fn ml_objective(&self, f: &[Atom]) -> Result<f64> {
        let values = self.positive_values(f)?;
        let n = values.len() as f64;
        Ok(-values.iter().map(|v| v.ln()).sum::<f64>() / n + total_mass(f))
    }

    /// `D_φ(f_θ; f) = 1 − (1/n) Σ f_θ(x_i)/f(x_i)`.
    pub fn ml_dir_deriv(&self, theta: f64, f: &[Atom]) -> Result<f64> {
        let values = self.positive_values(f)?;
        Ok(self.dir_deriv_with(theta, &values))
    }

    fn dir_deriv_with(&self, theta: f64, values: &[f64]) -> f64 {
        let x = self.sample.values();
        let s: f64 = x
            .iter()
            .zip(values)
            .map(|(&xi, v)| GaussianFamily.density(theta, xi) / v)
            .sum();
        1.0 - s / x.len() as f64
    }

    /// `φ(to) − φ(from)`, evaluated as `−mean log(1 + Δ/f_from) + Δmass` so
    /// that small changes are not lost to cancellation.
    pub fn ml_objective_change(&self, from: &[Atom], to: &[Atom]) -> Result<f64> {
        let base = self.positive_values(from)?;
        self.positive_values(to)?;
        let diff = combine(to, from, -1.0);
        let x = self.sample.values();
        let log_ratio: f64 = x
            .iter()
            .zip(&base)
            .map(|(&xi, b)| (mixture_eval(&GaussianFamily, &diff, xi) / b).ln_1p())
            .sum();
        Ok(-log_ratio / x.len() as f64 + total_mass(&diff))
    }

    /// Single unit atom at the grid point nearest the sample median.
    pub fn starting_iterate(&self, grid: &Grid) -> MixingMeasure {
        let median = self.sample.median();
        let theta = grid
            .points()
            .iter()
            .copied()
            .min_by(|a, b| (a - median).abs().total_cmp(&(b - median).abs()))
            .expect("grid is nonempty");
        MixingMeasure::single(theta, 1.0).expect("unit atom")
    }

    /// ML optimality certificate: `D_φ ≥ −tol.grid` on the grid and
    /// `|D_φ| ≤ tol.support` on the support.
    pub fn certificate(&self, f: &MixingMeasure, grid: &Grid, tol: Tolerance) -> Certificate {
        check_optimality(self, f, grid, tol, DerivativeKind::Raw)
    }

    /// Damped Newton iteration from [`starting_iterate`](Self::starting_iterate).
    pub fn newton_solve(&self, config: &SolverConfig) -> Result<(MixingMeasure, SolverTrace)> {
        config.validate()?;
        let start = self.starting_iterate(&config.grid);
        self.newton_from(config, &start)
    }

    /// Damped Newton iteration from a feasible starting measure.
    pub fn newton_from(&self, config: &SolverConfig, start: &MixingMeasure) -> Result<(MixingMeasure, SolverTrace)> {
        config.validate()?;
        let grid = &config.grid;
        let tol = Tolerance {
            grid: config.eta,
            support: config.support_tol,
        };
        let mut fbar = start.clone();
        let mut objective = self.ml_objective(fbar.atoms())?;
        let mut trace = SolverTrace {
            initial_objective: objective,
            ..SolverTrace::default()
        };

        loop {
            let cert = self.certificate(&fbar, grid, tol);
            trace.final_min_derivative = cert.min_grid_value;
            if cert.pass {
                trace.converged = true;
                break;
            }
            if trace.records.len() >= config.max_newton_iter {
                info!(
                    "Newton iteration stopped after {} steps (gap {:.3e})",
                    trace.records.len(),
                    cert.gap()
                );
                break;
            }
            let gap = cert.gap();
            let local = QuadLocalModel::new(&self.sample, &fbar)?;
            let inner = SolverConfig {
                eta: config.eta.max(1e-2 * gap),
                derivative: DerivativeKind::Raw,
                ..config.clone()
            };
            let (target, inner_trace) = solve_from(&local, &inner, &fbar)?;

            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial = fbar.convex_combination(&target, lambda, config.purge_threshold);
                match self.ml_objective_change(fbar.atoms(), trial.atoms()) {
                    Ok(change) if change < 0.0 => {
                        accepted = Some((trial, change));
                        break;
                    }
                    _ => lambda *= 0.5,
                }
            }
            let Some((next, change)) = accepted else {
                return Err(Error::Stall {
                    halvings: MAX_HALVINGS,
                    objective,
                    gap,
                });
            };
            fbar = next;
            objective = self.ml_objective(fbar.atoms())?;
            debug!(
                "Newton step {}: λ = {lambda}, φ = {objective:.15e}, gap {gap:.3e}, {} atoms",
                trace.records.len() + 1,
                fbar.len()
            );
            trace.records.push(IterationRecord {
                objective,
                decrease: change,
                support_size: fbar.len(),
                min_derivative: cert.min_grid_value,
                vertex: Some(cert.argmin),
                raw_vertex: Some(cert.argmin),
                deletions: inner_trace.records.iter().map(|r| r.deletions).sum(),
                inner_changes: inner_trace
                    .records
                    .iter()
                    .flat_map(|r| r.inner_changes.iter().copied())
                    .collect(),
                step_length: Some(lambda),
            });
            trace.subproblems.push(inner_trace);
        }
        Ok((fbar, trace))
    }
}

impl ConeObjective for MlModel {
    fn objective(&self, f: &[Atom]) -> f64 {
        self.ml_objective(f).unwrap_or(f64::INFINITY)
    }

    fn vertex_derivatives(&self, thetas: &[f64], f: &[Atom]) -> Vec<f64> {
        match self.positive_values(f) {
            Ok(values) => thetas.iter().map(|&t| self.dir_deriv_with(t, &values)).collect(),
            Err(_) => vec![f64::NEG_INFINITY; thetas.len()],
        }
    }

    fn alt_vertex_derivatives(&self, thetas: &[f64], f: &[Atom]) -> Vec<f64> {
        self.vertex_derivatives(thetas, f)
    }

    fn unrestricted_min(&self, support: &[f64]) -> Result<SignedMixingMeasure> {
        Err(Error::InvalidConfig(format!(
            "the likelihood over {} support points has no closed-form minimizer; use newton_solve",
            support.len()
        )))
    }

    fn initial_measure(&self, grid: &Grid) -> Result<MixingMeasure> {
        Ok(self.starting_iterate(grid))
    }

    fn objective_change(&self, from: &[Atom], to: &[Atom]) -> f64 {
        self.ml_objective_change(from, to).unwrap_or(f64::INFINITY)
    }
}

impl LocationObjective for MlModel {
    fn contains(&self, theta: f64) -> bool {
        GaussianFamily.contains(theta)
    }

    fn location_objective(&self, atoms: &[Atom]) -> Result<f64> {
        self.ml_objective(atoms)
    }

    fn shift_change(&self, from: &[Atom], to: &[Atom]) -> Result<f64> {
        self.ml_objective_change(from, to)
    }

    /// `−α_i (1/n) Σ_j ḟ_{θ_i}(x_j)/f(x_j)` with `ḟ_θ(x) = (x − θ) f_θ(x)`.
    fn location_gradient(&self, atoms: &[Atom]) -> Result<Vec<f64>> {
        let values = self.positive_values(atoms)?;
        let x = self.sample.values();
        let n = x.len() as f64;
        Ok(atoms
            .iter()
            .map(|a| {
                let s: f64 = x
                    .iter()
                    .zip(&values)
                    .map(|(&xi, v)| GaussianFamily.theta_derivative(a.location, xi) / v)
                    .sum();
                -a.weight * s / n
            })
            .collect())
    }

    fn vertex_derivative(&self, theta: f64, atoms: &[Atom]) -> Result<f64> {
        self.ml_dir_deriv(theta, atoms)
    }

    fn reoptimize(&self, start: &MixingMeasure, config: &SolverConfig) -> Result<MixingMeasure> {
        let local = SolverConfig {
            grid: Grid::new(start.locations())?,
            ..config.clone()
        };
        Ok(self.newton_from(&local, start)?.0)
    }
}

/// Quadratic model of the relaxed likelihood around `f̄`:
///
/// ```text
/// φ_q(g) = ∫g − (1/n) Σ [log f̄_i + (g_i − f̄_i) d_i − ½ (g_i − f̄_i)² d_i²]
/// ```
///
/// with `d_i = 1/f̄(x_i)`. It agrees with `φ` to first order at `f̄`.
#[derive(Debug, Clone)]
pub struct QuadLocalModel<'a> {
    sample: &'a Sample,
    reference: MixingMeasure,
    d: Vec<f64>,
    mean_log_reference: f64,
}

impl<'a> QuadLocalModel<'a> {
    pub fn new(sample: &'a Sample, reference: &MixingMeasure) -> Result<Self> {
        let mut d = Vec::with_capacity(sample.len());
        let mut log_sum = 0.0;
        for &x in sample.values() {
            let v = mixture_eval(&GaussianFamily, reference.atoms(), x);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InfiniteObjective { x });
            }
            d.push(1.0 / v);
            log_sum += v.ln();
        }
        Ok(Self {
            sample,
            reference: reference.clone(),
            d,
            mean_log_reference: log_sum / sample.len() as f64,
        })
    }

    pub fn reference(&self) -> &MixingMeasure {
        &self.reference
    }

    /// `d_i = 1/f̄(x_i)`.
    pub fn weights(&self) -> &[f64] {
        &self.d
    }

    fn n(&self) -> f64 {
        self.sample.len() as f64
    }

    /// `f_θ(x_i)·d_i` for every observation.
    fn scaled_kernel(&self, theta: f64) -> Vec<f64> {
        self.sample
            .values()
            .iter()
            .zip(&self.d)
            .map(|(&x, d)| GaussianFamily.density(theta, x) * d)
            .collect()
    }

    /// `g(x_i)·d_i` for every observation.
    fn scaled_mixture(&self, g: &[Atom]) -> Vec<f64> {
        self.sample
            .values()
            .iter()
            .zip(&self.d)
            .map(|(&x, d)| mixture_eval(&GaussianFamily, g, x) * d)
            .collect()
    }

    /// `(c₁, c₂)` such that `φ_q(g + ε f_θ) − φ_q(g) = c₁ ε + ½ c₂ ε²`.
    pub fn quad_coefficients(&self, theta: f64, g: &[Atom]) -> (f64, f64) {
        let r = self.scaled_mixture(g);
        self.coefficients_with(theta, &r)
    }

    fn coefficients_with(&self, theta: f64, r: &[f64]) -> (f64, f64) {
        let k = self.scaled_kernel(theta);
        let n = self.n();
        let (mut lin, mut cross, mut sq) = (0.0, 0.0, 0.0);
        for (ki, ri) in k.iter().zip(r) {
            lin += ki;
            cross += ri * ki;
            sq += ki * ki;
        }
        (1.0 - 2.0 * lin / n + cross / n, sq / n)
    }

    /// `φ_q(g)`.
    pub fn quad_objective(&self, g: &[Atom]) -> f64 {
        let r = self.scaled_mixture(g);
        let n = self.n();
        let (mut lin, mut sq) = (0.0, 0.0);
        for ri in &r {
            lin += ri - 1.0;
            sq += (ri - 1.0) * (ri - 1.0);
        }
        total_mass(g) - self.mean_log_reference - lin / n + 0.5 * sq / n
    }

    /// Minimizer of `φ_q` over the span of `{f_θ : θ ∈ support}`: solves
    /// `(DY)ᵀDY α = 2Yᵀd − n·1`.
    pub fn quad_unrestricted_min(&self, support: &[f64]) -> Result<SignedMixingMeasure> {
        self.solve_normal_equations(support, 1)
    }

    fn design(&self, support: &[f64]) -> DMatrix<f64> {
        let x = self.sample.values();
        DMatrix::from_fn(x.len(), support.len(), |i, j| {
            GaussianFamily.density(support[j], x[i]) * self.d[i]
        })
    }

    fn solve_normal_equations(&self, support: &[f64], refinements: usize) -> Result<SignedMixingMeasure> {
        if support.is_empty() {
            return Err(Error::InvalidConfig("support set is empty".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Singular {
                size: support.len(),
                detail: "repeated support points; merge neighbouring knots".into(),
            });
        }
        let dy = self.design(support);
        let gram = dy.tr_mul(&dy);
        let n = self.n();
        let rhs = DVector::from_iterator(
            support.len(),
            dy.column_iter().map(|c| 2.0 * c.sum() - n),
        );
        let alpha = solve_spd(&gram, &rhs, refinements).map_err(|e| match e {
            Error::Singular { size, detail } => Error::Singular {
                size,
                detail: format!("{detail}; support points too close to resolve, merge neighbouring knots"),
            },
            other => other,
        })?;
        Ok(SignedMixingMeasure::from_parts(support, alpha.as_slice()))
    }
}

impl ConeObjective for QuadLocalModel<'_> {
    fn objective(&self, f: &[Atom]) -> f64 {
        self.quad_objective(f)
    }

    fn vertex_derivatives(&self, thetas: &[f64], f: &[Atom]) -> Vec<f64> {
        let r = self.scaled_mixture(f);
        thetas.iter().map(|&t| self.coefficients_with(t, &r).0).collect()
    }

    fn alt_vertex_derivatives(&self, thetas: &[f64], f: &[Atom]) -> Vec<f64> {
        let r = self.scaled_mixture(f);
        thetas
            .iter()
            .map(|&t| {
                let (c1, c2) = self.coefficients_with(t, &r);
                c1 / c2.sqrt()
            })
            .collect()
    }

    fn unrestricted_min(&self, support: &[f64]) -> Result<SignedMixingMeasure> {
        self.quad_unrestricted_min(support)
    }

    fn refined_unrestricted_min(&self, support: &[f64]) -> Result<SignedMixingMeasure> {
        self.solve_normal_equations(support, 4)
    }

    /// `(1/n) Σ (h(x_i) d_i)²`.
    fn curvature(&self, h: &[Atom]) -> Option<f64> {
        let r = self.scaled_mixture(h);
        Some(r.iter().map(|v| v * v).sum::<f64>() / self.n())
    }

    fn initial_measure(&self, _grid: &Grid) -> Result<MixingMeasure> {
        Ok(self.reference.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model(xs: &[f64]) -> MlModel {
        MlModel::new(Sample::new(xs.to_vec()).unwrap())
    }

    #[test]
    fn objective_example() {
        let m = model(&[0.0]);
        let f = [Atom::new(0.0, 1.0)];
        let expected = 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0;
        assert_abs_diff_eq!(m.ml_objective(&f).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 1.9189385, epsilon = 1e-7);
    }

    #[test]
    fn nonpositive_mixture_is_an_infinite_objective() {
        let m = model(&[0.0, 1.0]);
        let f = [Atom::new(0.0, 1.0), Atom::new(1.0, -5.0)];
        assert!(matches!(m.ml_objective(&f), Err(Error::InfiniteObjective { .. })));
        assert!(matches!(m.ml_objective(&[]), Err(Error::InfiniteObjective { .. })));
    }

    #[test]
    fn scaling_derivative_is_mass_minus_one() {
        let m = model(&[-0.3, 0.4, 1.7]);
        let f = [Atom::new(0.0, 0.7), Atom::new(1.5, 0.6)];
        let h = 1e-5;
        let scaled = |c: f64| m.ml_objective(&f.map(|a| Atom::new(a.location, c * a.weight))).unwrap();
        let fd = (scaled(1.0 + h) - scaled(1.0 - h)) / (2.0 * h);
        assert_abs_diff_eq!(fd, total_mass(&f) - 1.0, epsilon = 1e-8);
    }

    #[test]
    fn dir_deriv_examples() {
        let m = model(&[0.2, 1.1]);
        assert_abs_diff_eq!(m.ml_dir_deriv(0.5, &[Atom::new(0.5, 1.0)]).unwrap(), 0.0, epsilon = 1e-15);
        let far = [Atom::new(0.5, 1.0), Atom::new(40.0, 1e6)];
        assert_abs_diff_eq!(m.ml_dir_deriv(40.0, &far).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn dir_deriv_matches_finite_differences() {
        let m = model(&[-1.0, 0.3, 0.9, 2.5]);
        let f = vec![Atom::new(0.0, 0.5), Atom::new(1.0, 0.4)];
        for theta in [-0.5, 0.7, 2.0] {
            let h = 1e-6;
            let plus = combine(&f, &[Atom::new(theta, 1.0)], h);
            let minus = combine(&f, &[Atom::new(theta, 1.0)], -h);
            let fd = (m.ml_objective(&plus).unwrap() - m.ml_objective(&minus).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(fd, m.ml_dir_deriv(theta, &f).unwrap(), epsilon = 1e-6);
        }
    }

    #[test]
    fn objective_change_matches_plain_difference() {
        let m = model(&[-1.0, 0.3, 0.9, 2.5]);
        let a = [Atom::new(0.0, 0.5), Atom::new(1.0, 0.4)];
        let b = [Atom::new(0.0, 0.45), Atom::new(1.2, 0.5)];
        let direct = m.ml_objective(&b).unwrap() - m.ml_objective(&a).unwrap();
        assert_abs_diff_eq!(m.ml_objective_change(&a, &b).unwrap(), direct, epsilon = 1e-14);
    }

    #[test]
    fn quad_coefficient_fixed_points() {
        let s = Sample::new(vec![-0.4, 0.1, 1.3]).unwrap();
        let fbar = MixingMeasure::single(0.3, 1.0).unwrap();
        let q = QuadLocalModel::new(&s, &fbar).unwrap();
        let (c1, c2) = q.quad_coefficients(0.3, fbar.atoms());
        assert_abs_diff_eq!(c1, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c2, 1.0, epsilon = 1e-14);
        let (c1, c2) = q.quad_coefficients(0.3, &[]);
        assert_abs_diff_eq!(c1, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c2, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn quad_coefficients_describe_the_quadratic_along_a_vertex() {
        let s = Sample::new(vec![-1.2, -0.1, 0.4, 0.8, 2.9]).unwrap();
        let fbar = MixingMeasure::new(vec![Atom::new(-0.5, 0.3), Atom::new(1.0, 0.6)]).unwrap();
        let q = QuadLocalModel::new(&s, &fbar).unwrap();
        let g = [Atom::new(0.0, 0.2), Atom::new(2.0, 0.9)];
        let theta = 0.7;
        let (c1, c2) = q.quad_coefficients(theta, &g);
        for eps in [0.05, 0.3, 1.0, 2.5] {
            let moved = combine(&g, &[Atom::new(theta, 1.0)], eps);
            let change = q.quad_objective(&moved) - q.quad_objective(&g);
            assert_abs_diff_eq!(change, c1 * eps + 0.5 * c2 * eps * eps, epsilon = 1e-10);
        }
    }

    #[test]
    fn quad_model_matches_ml_to_first_order() {
        let m = model(&[-1.2, -0.1, 0.4, 0.8, 2.9]);
        let fbar = MixingMeasure::new(vec![Atom::new(-0.5, 0.3), Atom::new(1.0, 0.6)]).unwrap();
        let q = QuadLocalModel::new(m.sample(), &fbar).unwrap();
        assert_abs_diff_eq!(q.quad_objective(fbar.atoms()), m.ml_objective(fbar.atoms()).unwrap(), epsilon = 1e-14);
        for theta in [-2.0, 0.0, 0.5, 3.0] {
            let (c1, _) = q.quad_coefficients(theta, fbar.atoms());
            assert_abs_diff_eq!(c1, m.ml_dir_deriv(theta, fbar.atoms()).unwrap(), epsilon = 1e-10);
        }
    }

    #[test]
    fn single_point_unrestricted_minimizer_restores_the_reference() {
        let s = Sample::new(vec![-0.4, 0.1, 1.3]).unwrap();
        let fbar = MixingMeasure::single(0.3, 1.0).unwrap();
        let q = QuadLocalModel::new(&s, &fbar).unwrap();
        let u = q.quad_unrestricted_min(&[0.3]).unwrap();
        assert_abs_diff_eq!(u.weights()[0], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn unrestricted_minimizer_zeroes_the_gradient() {
        let s = Sample::new(vec![-1.2, -0.1, 0.4, 0.8, 2.9, 3.3]).unwrap();
        let fbar = MixingMeasure::new(vec![Atom::new(-0.5, 0.3), Atom::new(1.0, 0.6)]).unwrap();
        let q = QuadLocalModel::new(&s, &fbar).unwrap();
        let support = [-1.0, 0.5, 2.0, 3.0];
        let u = q.quad_unrestricted_min(&support).unwrap();
        // D_q(f_θ; u) = (Vα + ν)_θ.
        for (d, _) in q.vertex_derivatives(&support, u.atoms()).iter().zip(&support) {
            assert_abs_diff_eq!(*d, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn duplicate_knots_report_a_merge() {
        let s = Sample::new(vec![0.0, 1.0]).unwrap();
        let fbar = MixingMeasure::single(0.5, 1.0).unwrap();
        let q = QuadLocalModel::new(&s, &fbar).unwrap();
        match q.quad_unrestricted_min(&[0.5, 0.5]) {
            Err(Error::Singular { detail, .. }) => assert!(detail.contains("merge")),
            other => panic!("expected a singular system, got {other:?}"),
        }
    }

    #[test]
    fn start_examples() {
        let m = model(&[0.0]);
        let grid = Grid::new(vec![0.0]).unwrap();
        assert_eq!(m.starting_iterate(&grid).atoms(), &[Atom::new(0.0, 1.0)]);
        let m = model(&[-2.0, -1.0, 1.0, 2.0]);
        let grid = Grid::equidistant(-2.0, 2.0, 9).unwrap();
        assert_eq!(m.starting_iterate(&grid).locations(), vec![0.0]);
    }

    #[test]
    fn single_observation_single_point_grid() {
        let m = model(&[0.7]);
        let config = SolverConfig::new(Grid::new(vec![0.7]).unwrap()).with_eta(1e-10);
        let (f, trace) = m.newton_solve(&config).unwrap();
        assert!(trace.converged);
        assert!(trace.iterations() <= 1);
        assert_abs_diff_eq!(f.weights()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn newton_converges_with_unit_mass() {
        let m = model(&[-0.9, -0.2, 0.1, 0.4, 1.5, 2.2, 2.8, 3.9]);
        let config = SolverConfig::new(m.default_grid(40).unwrap()).with_eta(1e-10);
        let (f, trace) = m.newton_solve(&config).unwrap();
        assert!(trace.converged);
        assert_abs_diff_eq!(f.total_mass(), 1.0, epsilon = 1e-8);
        for w in trace.objectives().windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn symmetric_location_gradient_vanishes() {
        let m = model(&[-1.3, 1.3]);
        let g = m.location_gradient(&[Atom::new(0.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn location_gradient_matches_finite_differences() {
        let m = model(&[-1.2, -0.1, 0.4, 0.8, 2.9]);
        let atoms = vec![Atom::new(-0.5, 0.3), Atom::new(1.0, 0.6)];
        let grad = m.location_gradient(&atoms).unwrap();
        let h = 1e-6;
        for i in 0..atoms.len() {
            let mut plus = atoms.clone();
            let mut minus = atoms.clone();
            plus[i].location += h;
            minus[i].location -= h;
            let fd = (m.ml_objective(&plus).unwrap() - m.ml_objective(&minus).unwrap()) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-5 * grad[i].abs().max(1e-3));
        }
    }
}

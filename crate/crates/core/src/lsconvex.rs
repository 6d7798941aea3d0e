//! Least-squares estimation of a convex decreasing density.
//!
//! The estimate minimizes `φ(f) = ½∫f² − ∫f dF_n` over positive mixtures of
//! triangular kernels. Every quantity the solver needs has a closed form in
//! terms of the Gram entries `⟨f_θ, f_τ⟩`, the integrated empirical
//! distribution function `Y_n` and the double integral
//! `H(θ; f) = ∫_0^θ ∫_0^x f(y) dy dx`.
//!
//! For a finite support the unconstrained minimizer solves the normal
//! equations `G σ = b` with `b_j = (2/θ_j²) Y_n(θ_j)`; equivalently its
//! double integral is the cubic spline interpolating `Y_n` at the knots.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::{Atom, AtomicMeasure, MixingMeasure, ParametricFamily, SignedMixingMeasure, TriangularFamily};
use crate::gridless::LocationObjective;
use crate::linalg::solve_spd;
use crate::sample::Sample;
use crate::solver::{solve, solve_from, ConeObjective, Grid, SolverConfig, SolverTrace};

/// `⟨f_θ, f_τ⟩ = ∫ f_θ f_τ`; for `θ ≤ τ` this is `2/τ − 2θ/(3τ²)`.
pub fn inner_product(theta: f64, tau: f64) -> f64 {
    let (lo, hi) = if theta <= tau { (theta, tau) } else { (tau, theta) };
    2.0 / hi - 2.0 * lo / (3.0 * hi * hi)
}

/// `∂⟨f_θ, f_τ⟩/∂θ`.
pub fn inner_product_dtheta(theta: f64, tau: f64) -> f64 {
    if theta <= tau {
        -2.0 / (3.0 * tau * tau)
    } else {
        -2.0 / (theta * theta) + 4.0 * tau / (3.0 * theta * theta * theta)
    }
}

/// `H(θ; f)` for a triangular mixture `f`.
pub fn h_integral(theta: f64, f: &[Atom]) -> f64 {
    if theta <= 0.0 {
        return 0.0;
    }
    f.iter()
        .map(|a| {
            let tau = a.location;
            let v = if theta <= tau {
                theta * theta / tau - theta * theta * theta / (3.0 * tau * tau)
            } else {
                theta - tau / 3.0
            };
            a.weight * v
        })
        .sum()
}

/// `∫ f_θ² = 4/(3θ)`.
pub fn kernel_square_norm(theta: f64) -> f64 {
    4.0 / (3.0 * theta)
}

/// Least-squares model for a sample from a convex decreasing density.
#[derive(Debug, Clone)]
pub struct LsModel {
    sample: Sample,
    upper: f64,
}

impl LsModel {
    pub fn new(sample: Sample) -> Result<Self> {
        if sample.min() < 0.0 {
            return Err(Error::InvalidSample(format!(
                "convex decreasing densities live on [0, ∞); found observation {}",
                sample.min()
            )));
        }
        let upper = 3.0 * sample.max();
        Ok(Self { sample, upper })
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    /// Default upper end `K = 3·x_(n)` of the parameter range.
    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    /// `n` equally spaced grid points on `(0, K]`.
    pub fn default_grid(&self, n: usize) -> Result<Grid> {
        positive_grid(0.0, self.upper, n)
    }

    /// `Y_n(θ) = ∫_0^θ F_n`.
    pub fn y_n(&self, theta: f64) -> f64 {
        self.sample.integrated_ecdf(theta.max(0.0))
    }

    /// `∫ f_θ dF_n = (2/θ²) Y_n(θ)`.
    pub fn data_term(&self, theta: f64) -> f64 {
        2.0 * self.y_n(theta) / (theta * theta)
    }

    /// `(1/n) Σ_j ∂f_θ(x_j)/∂θ`.
    pub fn data_term_dtheta(&self, theta: f64) -> f64 {
        let x = self.sample.values();
        // Observations at or beyond θ contribute nothing.
        let k = x.partition_point(|&v| v < theta);
        let below: f64 = x[..k].iter().sum();
        (4.0 * below - 2.0 * theta * k as f64) / (x.len() as f64 * theta.powi(3))
    }

    pub fn h(&self, theta: f64, f: &[Atom]) -> f64 {
        h_integral(theta, f)
    }

    /// `φ(f) = ½ σᵀGσ − σᵀb`.
    pub fn ls_objective(&self, f: &[Atom]) -> f64 {
        let quad: f64 = f
            .iter()
            .map(|a| {
                a.weight
                    * f.iter()
                        .map(|b| b.weight * inner_product(a.location, b.location))
                        .sum::<f64>()
            })
            .sum();
        let linear: f64 = f.iter().map(|a| a.weight * self.data_term(a.location)).sum();
        0.5 * quad - linear
    }

    /// `D_φ(f_θ; f) = (2/θ²)(H(θ; f) − Y_n(θ))`.
    pub fn ls_dir_deriv(&self, theta: f64, f: &[Atom]) -> f64 {
        2.0 / (theta * theta) * (h_integral(theta, f) - self.y_n(theta))
    }

    /// `c₁/√c₂` with `c₁ = D_φ(f_θ; f)` and `c₂ = 4/(3θ)`.
    pub fn ls_alt_dir_deriv(&self, theta: f64, f: &[Atom]) -> f64 {
        self.ls_dir_deriv(theta, f) * (0.75 * theta).sqrt()
    }

    /// `d/dθ D_φ(f_θ; f)`.
    pub fn ls_dir_deriv_dtheta(&self, theta: f64, f: &[Atom]) -> f64 {
        let gram: f64 = f
            .iter()
            .map(|a| a.weight * inner_product_dtheta(theta, a.location))
            .sum();
        gram - self.data_term_dtheta(theta)
    }

    fn check_support(&self, support: &[f64]) -> Result<()> {
        if support.is_empty() {
            return Err(Error::InvalidConfig("support set is empty".into()));
        }
        for &t in support {
            TriangularFamily.check(t)?;
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Singular {
                size: support.len(),
                detail: "support points must be distinct and increasing".into(),
            });
        }
        Ok(())
    }

    fn solve_normal_equations(&self, support: &[f64], refinements: usize) -> Result<SignedMixingMeasure> {
        self.check_support(support)?;
        let p = support.len();
        let gram = DMatrix::from_fn(p, p, |i, j| inner_product(support[i], support[j]));
        let rhs = DVector::from_iterator(p, support.iter().map(|&t| self.data_term(t)));
        let sigma = solve_spd(&gram, &rhs, refinements)?;
        Ok(SignedMixingMeasure::from_parts(support, sigma.as_slice()))
    }

    /// Minimizer of `φ` over the linear span of `{f_θ : θ ∈ support}`.
    pub fn ls_unrestricted_min(&self, support: &[f64]) -> Result<SignedMixingMeasure> {
        self.solve_normal_equations(support, 1)
    }

    /// Starting atom: `θ⁽⁰⁾ = 3x̄ₙ` when `x_(n) < 3x̄ₙ`, otherwise the smallest
    /// grid point beyond `x_(n)`; weight `3/2·(1 − x̄ₙ/θ⁽⁰⁾)`.
    pub fn ls_start(&self, grid: &Grid) -> Result<MixingMeasure> {
        let mean = self.sample.mean();
        let max = self.sample.max();
        let theta0 = if max < 3.0 * mean {
            3.0 * mean
        } else {
            grid.points()
                .iter()
                .copied()
                .find(|&t| t > max)
                .unwrap_or(3.0 * max)
        };
        if !(theta0 > 0.0) {
            return Err(Error::InvalidSample("sample has no positive observation".into()));
        }
        MixingMeasure::single(theta0, 1.5 * (1.0 - mean / theta0))
    }

    /// Least-squares fit on a grid.
    pub fn fit(&self, config: &SolverConfig) -> Result<(MixingMeasure, SolverTrace)> {
        solve(self, config)
    }
}

/// `n` equally spaced points on `[lo, hi]`; when `lo ≤ 0` the left end is
/// excluded (points `lo + i·(hi − lo)/n`, `i = 1..=n`) and nonpositive points
/// are dropped, since `f_θ` needs `θ > 0`.
pub fn positive_grid(lo: f64, hi: f64, n: usize) -> Result<Grid> {
    if lo > 0.0 {
        return Grid::equidistant(lo, hi, n);
    }
    if n == 0 || !(hi > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "grid [{lo}, {hi}] with {n} points has no positive point"
        )));
    }
    let h = (hi - lo) / n as f64;
    Grid::new(
        (1..=n)
            .map(|i| lo + i as f64 * h)
            .filter(|&t| t > 0.0)
            .collect(),
    )
}

impl ConeObjective for LsModel {
    fn objective(&self, f: &[Atom]) -> f64 {
        self.ls_objective(f)
    }

    fn vertex_derivatives(&self, thetas: &[f64], f: &[Atom]) -> Vec<f64> {
        thetas.iter().map(|&t| self.ls_dir_deriv(t, f)).collect()
    }

    fn alt_vertex_derivatives(&self, thetas: &[f64], f: &[Atom]) -> Vec<f64> {
        thetas.iter().map(|&t| self.ls_alt_dir_deriv(t, f)).collect()
    }

    fn unrestricted_min(&self, support: &[f64]) -> Result<SignedMixingMeasure> {
        self.ls_unrestricted_min(support)
    }

    fn refined_unrestricted_min(&self, support: &[f64]) -> Result<SignedMixingMeasure> {
        self.solve_normal_equations(support, 4)
    }

    /// `‖h‖² = Σ_ij h_i h_j ⟨f_θi, f_θj⟩`.
    fn curvature(&self, h: &[Atom]) -> Option<f64> {
        Some(
            h.iter()
                .map(|a| {
                    a.weight
                        * h.iter()
                            .map(|b| b.weight * inner_product(a.location, b.location))
                            .sum::<f64>()
                })
                .sum(),
        )
    }

    fn initial_measure(&self, grid: &Grid) -> Result<MixingMeasure> {
        self.ls_start(grid)
    }

    /// `∫ h f − ∫ h dF_n`, computed from Gram entries.
    fn dir_deriv(&self, h: &[Atom], f: &[Atom]) -> f64 {
        h.iter()
            .map(|a| {
                let cross: f64 = f
                    .iter()
                    .map(|b| b.weight * inner_product(a.location, b.location))
                    .sum();
                a.weight * (cross - self.data_term(a.location))
            })
            .sum()
    }
}

impl LocationObjective for LsModel {
    fn contains(&self, theta: f64) -> bool {
        TriangularFamily.contains(theta)
    }

    fn location_objective(&self, atoms: &[Atom]) -> Result<f64> {
        Ok(self.ls_objective(atoms))
    }

    fn location_gradient(&self, atoms: &[Atom]) -> Result<Vec<f64>> {
        Ok(atoms
            .iter()
            .map(|a| a.weight * self.ls_dir_deriv_dtheta(a.location, atoms))
            .collect())
    }

    fn vertex_derivative(&self, theta: f64, atoms: &[Atom]) -> Result<f64> {
        Ok(self.ls_dir_deriv(theta, atoms))
    }

    fn reoptimize(&self, start: &MixingMeasure, config: &SolverConfig) -> Result<MixingMeasure> {
        let grid = Grid::new(start.locations())?;
        let local = SolverConfig {
            grid,
            ..config.clone()
        };
        Ok(solve_from(self, &local, start)?.0)
    }
}

//! Parametric generator families `f_θ` and finite atomic mixing measures.
//!
//! A mixture is `g(x) = Σ_i w_i f_{θ_i}(x)` for a measure with atoms
//! `(θ_i, w_i)`. Two kernel families are provided:
//!
//! * [`TriangularFamily`]: `f_θ(x) = 2(θ − x)/θ²` on `[0, θ)`, whose positive
//!   mixtures are exactly the convex decreasing functions on `[0, ∞)`.
//! * [`GaussianFamily`]: unit-variance normal densities centred at `θ`.
//!
//! Both kernels integrate to one, so the total mass of a measure equals the
//! integral of its mixture.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// A kernel family `θ ↦ f_θ` with a parameter domain.
pub trait ParametricFamily {
    fn name(&self) -> &'static str;

    /// Whether `theta` belongs to the parameter domain.
    fn contains(&self, theta: f64) -> bool;

    /// `f_θ(x)`, with `θ` assumed to lie in the domain.
    fn density(&self, theta: f64, x: f64) -> f64;

    /// `∂f_θ(x)/∂θ`, with `θ` assumed to lie in the domain.
    fn theta_derivative(&self, theta: f64, x: f64) -> f64;

    /// `∫_{-∞}^x f_θ(y) dy`.
    fn cdf(&self, theta: f64, x: f64) -> f64;

    fn check(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::Domain {
                family: self.name(),
                theta,
            })
        }
    }

    /// Checked evaluation of `f_θ(x)`.
    fn kernel_eval(&self, theta: f64, x: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(self.density(theta, x))
    }

    /// Checked evaluation of `∂f_θ(x)/∂θ`.
    fn kernel_theta_deriv(&self, theta: f64, x: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(self.theta_derivative(theta, x))
    }
}

/// `f_θ(x) = 2(θ − x)/θ²` for `0 ≤ x < θ`, zero elsewhere; `θ > 0`.
///
/// The value at `x = 0` is the right limit `2/θ`, so that
/// `∫ f_θ dF_n = (2/θ²)·Y_n(θ)` holds for samples containing zeros.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TriangularFamily;

impl ParametricFamily for TriangularFamily {
    fn name(&self) -> &'static str {
        "triangular"
    }

    fn contains(&self, theta: f64) -> bool {
        theta.is_finite() && theta > 0.0
    }

    fn density(&self, theta: f64, x: f64) -> f64 {
        if (0.0..theta).contains(&x) {
            2.0 * (theta - x) / (theta * theta)
        } else {
            0.0
        }
    }

    // The kernel has a kink at x = θ; the derivative there is taken as 0.
    fn theta_derivative(&self, theta: f64, x: f64) -> f64 {
        if (0.0..theta).contains(&x) {
            (4.0 * x - 2.0 * theta) / (theta * theta * theta)
        } else {
            0.0
        }
    }

    fn cdf(&self, theta: f64, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= theta {
            1.0
        } else {
            x * (2.0 * theta - x) / (theta * theta)
        }
    }
}

/// Unit-variance normal density `f_θ(x) = (2π)^{-1/2} exp(−(x − θ)²/2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GaussianFamily;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal distribution function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl ParametricFamily for GaussianFamily {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn contains(&self, theta: f64) -> bool {
        theta.is_finite()
    }

    fn density(&self, theta: f64, x: f64) -> f64 {
        let z = x - theta;
        INV_SQRT_2PI * (-0.5 * z * z).exp()
    }

    fn theta_derivative(&self, theta: f64, x: f64) -> f64 {
        (x - theta) * self.density(theta, x)
    }

    fn cdf(&self, theta: f64, x: f64) -> f64 {
        std_normal_cdf(x - theta)
    }
}

/// One support point of an atomic measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(location: f64, weight: f64) -> Self {
        Self { location, weight }
    }
}

/// Shared read access to the atoms of a measure, sorted by location.
pub trait AtomicMeasure {
    fn atoms(&self) -> &[Atom];

    fn len(&self) -> usize {
        self.atoms().len()
    }

    fn is_empty(&self) -> bool {
        self.atoms().is_empty()
    }

    fn locations(&self) -> Vec<f64> {
        self.atoms().iter().map(|a| a.location).collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.atoms().iter().map(|a| a.weight).collect()
    }

    fn total_mass(&self) -> f64 {
        total_mass(self.atoms())
    }

    /// Weight at `location`, zero when it is not an atom.
    fn weight_at(&self, location: f64) -> f64 {
        let atoms = self.atoms();
        match atoms.binary_search_by(|a| a.location.total_cmp(&location)) {
            Ok(i) => atoms[i].weight,
            Err(_) => 0.0,
        }
    }
}

/// `Σ_i w_i f_{θ_i}(x)`.
pub fn mixture_eval<F: ParametricFamily + ?Sized>(family: &F, atoms: &[Atom], x: f64) -> f64 {
    atoms
        .iter()
        .map(|a| a.weight * family.density(a.location, x))
        .sum()
}

/// `Σ_i w_i F_{θ_i}(x)`: the distribution function of the mixture.
pub fn mixture_cdf<F: ParametricFamily + ?Sized>(family: &F, atoms: &[Atom], x: f64) -> f64 {
    atoms
        .iter()
        .map(|a| a.weight * family.cdf(a.location, x))
        .sum()
}

pub fn total_mass(atoms: &[Atom]) -> f64 {
    atoms.iter().map(|a| a.weight).sum()
}

/// `a + scale·b` as a list of atoms sorted by location.
pub(crate) fn combine(a: &[Atom], b: &[Atom], scale: f64) -> Vec<Atom> {
    normalize(
        a.iter()
            .copied()
            .chain(b.iter().map(|x| Atom::new(x.location, scale * x.weight)))
            .collect(),
    )
}

/// Sort by location and merge atoms sharing a location.
fn normalize(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match out.last_mut() {
            Some(last) if last.location == atom.location => last.weight += atom.weight,
            _ => out.push(atom),
        }
    }
    out
}

/// A finite nonnegative atomic measure with strictly positive weights and
/// strictly increasing locations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixingMeasure {
    atoms: Vec<Atom>,
}

impl MixingMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(location: f64, weight: f64) -> Result<Self> {
        Self::new(vec![Atom::new(location, weight)])
    }

    /// Builds a measure, merging atoms at equal locations.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if !a.location.is_finite() || !a.weight.is_finite() {
                return Err(Error::InvalidMeasure(format!(
                    "non-finite atom ({}, {})",
                    a.location, a.weight
                )));
            }
            if a.weight <= 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "weight {} at {} is not strictly positive",
                    a.weight, a.location
                )));
            }
        }
        Ok(Self {
            atoms: normalize(atoms),
        })
    }

    /// Keeps the atoms whose weight exceeds `threshold`.
    pub fn purged(&self, threshold: f64) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .copied()
                .filter(|a| a.weight > threshold)
                .collect(),
        }
    }

    pub fn to_signed(&self) -> SignedMixingMeasure {
        SignedMixingMeasure {
            atoms: self.atoms.clone(),
        }
    }

    /// `(1 − λ)·self + λ·other`, for `λ ∈ [0, 1]`, dropping atoms whose
    /// combined weight is not above `threshold`.
    pub fn convex_combination(&self, other: &Self, lambda: f64, threshold: f64) -> Self {
        let mut atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.location, (1.0 - lambda) * a.weight))
            .chain(
                other
                    .atoms
                    .iter()
                    .map(|a| Atom::new(a.location, lambda * a.weight)),
            )
            .collect();
        atoms = normalize(atoms);
        atoms.retain(|a| a.weight > threshold);
        Self { atoms }
    }

    pub fn into_atoms(self) -> Vec<Atom> {
        self.atoms
    }
}

impl AtomicMeasure for MixingMeasure {
    fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
}

/// A finite signed atomic measure with strictly increasing locations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedMixingMeasure {
    atoms: Vec<Atom>,
}

impl SignedMixingMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if let Some(a) = atoms
            .iter()
            .find(|a| !a.location.is_finite() || !a.weight.is_finite())
        {
            return Err(Error::InvalidMeasure(format!(
                "non-finite atom ({}, {})",
                a.location, a.weight
            )));
        }
        Ok(Self {
            atoms: normalize(atoms),
        })
    }

    /// Builds a measure from parallel location/weight slices; locations must
    /// already be strictly increasing.
    pub(crate) fn from_parts(locations: &[f64], weights: &[f64]) -> Self {
        debug_assert!(locations.windows(2).all(|w| w[0] < w[1]));
        Self {
            atoms: locations
                .iter()
                .zip(weights)
                .map(|(&t, &w)| Atom::new(t, w))
                .collect(),
        }
    }

    /// `self − other` as a signed measure on the union of supports.
    pub fn difference<M: AtomicMeasure + ?Sized>(&self, other: &M) -> Self {
        let atoms = self
            .atoms
            .iter()
            .copied()
            .chain(other.atoms().iter().map(|a| Atom::new(a.location, -a.weight)))
            .collect();
        Self {
            atoms: normalize(atoms),
        }
    }

    /// Converts to a nonnegative measure if every weight exceeds `threshold`.
    pub fn to_mixing(&self, threshold: f64) -> Option<MixingMeasure> {
        if self.atoms.iter().all(|a| a.weight > threshold) {
            Some(MixingMeasure {
                atoms: self.atoms.clone(),
            })
        } else {
            None
        }
    }
}

impl AtomicMeasure for SignedMixingMeasure {
    fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
}

impl From<&MixingMeasure> for SignedMixingMeasure {
    fn from(m: &MixingMeasure) -> Self {
        m.to_signed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn simpson<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, n: usize) -> f64 {
        let n = if n % 2 == 1 { n + 1 } else { n };
        let h = (b - a) / n as f64;
        let mut s = g(a) + g(b);
        for i in 1..n {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += c * g(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn kernel_values() {
        assert_abs_diff_eq!(TriangularFamily.kernel_eval(2.0, 1.0).unwrap(), 0.5);
        assert_eq!(TriangularFamily.kernel_eval(1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            GaussianFamily.kernel_eval(0.0, 0.0).unwrap(),
            0.398_942_3,
            epsilon = 1e-7
        );
        assert_abs_diff_eq!(INV_SQRT_2PI, 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-16);
    }

    #[test]
    fn kernel_derivative_values() {
        assert_eq!(GaussianFamily.kernel_theta_deriv(0.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            GaussianFamily.kernel_theta_deriv(1.0, 2.0).unwrap(),
            GaussianFamily.density(1.0, 2.0),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(GaussianFamily.density(1.0, 2.0), 0.241_970_7, epsilon = 1e-7);
        assert_eq!(TriangularFamily.kernel_theta_deriv(2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            TriangularFamily.kernel_eval(0.0, 0.5),
            Err(Error::Domain { .. })
        ));
        assert!(TriangularFamily.kernel_theta_deriv(-1.0, 0.5).is_err());
        assert!(GaussianFamily.kernel_eval(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn kernels_integrate_to_one() {
        for &theta in &[0.01, 0.3, 1.0, 2.7, 16.5] {
            let t = TriangularFamily;
            let mass = simpson(|x| t.density(theta, x), 0.0, theta, 2000);
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
        }
        for &theta in &[-3.0, 0.0, 1.5, 7.9] {
            let g = GaussianFamily;
            let mass = simpson(|x| g.density(theta, x), theta - 12.0, theta + 12.0, 4000);
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn theta_derivative_matches_central_differences() {
        let h = 1e-6;
        for &(theta, x) in &[(2.0, 0.3), (2.0, 1.7), (0.5, 0.1), (5.0, 4.2)] {
            let t = TriangularFamily;
            let fd = (t.density(theta + h, x) - t.density(theta - h, x)) / (2.0 * h);
            let exact = t.theta_derivative(theta, x);
            assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1e-3), "{fd} vs {exact}");
        }
        for &(theta, x) in &[(0.0, 1.0), (1.0, -0.5), (-2.0, 0.7), (3.0, 3.5)] {
            let g = GaussianFamily;
            let fd = (g.density(theta + h, x) - g.density(theta - h, x)) / (2.0 * h);
            let exact = g.theta_derivative(theta, x);
            assert!((fd - exact).abs() <= 1e-5 * exact.abs(), "{fd} vs {exact}");
        }
    }

    #[test]
    fn cdf_matches_integral_of_density() {
        let t = TriangularFamily;
        assert_abs_diff_eq!(
            t.cdf(2.0, 0.8),
            simpson(|x| t.density(2.0, x), 0.0, 0.8, 1000),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(std_normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(std_normal_cdf(1.959_963_984_540_054), 0.975, epsilon = 1e-11);
    }

    #[test]
    fn mixture_examples() {
        let t = TriangularFamily;
        assert_eq!(mixture_eval(&t, MixingMeasure::empty().atoms(), 1.3), 0.0);
        let one = MixingMeasure::single(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(mixture_eval(&t, one.atoms(), 1.0), 0.5);
        let two = MixingMeasure::new(vec![Atom::new(2.0, 0.5), Atom::new(1.0, 0.5)]).unwrap();
        assert_abs_diff_eq!(mixture_eval(&t, two.atoms(), 0.0), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn total_mass_examples() {
        assert_eq!(MixingMeasure::empty().total_mass(), 0.0);
        let m = MixingMeasure::new(vec![Atom::new(1.0, 0.25), Atom::new(3.0, 0.75)]).unwrap();
        assert_abs_diff_eq!(m.total_mass(), 1.0);
        let s = SignedMixingMeasure::new(vec![Atom::new(2.0, -0.5), Atom::new(4.0, 1.5)]).unwrap();
        assert_abs_diff_eq!(s.total_mass(), 1.0);
    }

    #[test]
    fn measures_are_sorted_and_merged() {
        let m = MixingMeasure::new(vec![
            Atom::new(3.0, 0.5),
            Atom::new(1.0, 0.25),
            Atom::new(3.0, 0.25),
        ])
        .unwrap();
        assert_eq!(m.locations(), vec![1.0, 3.0]);
        assert_eq!(m.weights(), vec![0.25, 0.75]);
        assert_eq!(m.weight_at(3.0), 0.75);
        assert_eq!(m.weight_at(2.0), 0.0);
        assert!(MixingMeasure::new(vec![Atom::new(1.0, 0.0)]).is_err());
        assert!(MixingMeasure::new(vec![Atom::new(1.0, -1.0)]).is_err());
    }

    #[test]
    fn purge_and_combination() {
        let a = MixingMeasure::new(vec![Atom::new(1.0, 1e-13), Atom::new(2.0, 1.0)]).unwrap();
        assert_eq!(a.purged(1e-12).locations(), vec![2.0]);
        let b = MixingMeasure::single(3.0, 2.0).unwrap();
        let c = a.convex_combination(&b, 0.25, 1e-12);
        assert_eq!(c.locations(), vec![2.0, 3.0]);
        assert_abs_diff_eq!(c.weights()[0], 0.75);
        assert_abs_diff_eq!(c.weights()[1], 0.5);
        let d = b.to_signed().difference(&a);
        assert_eq!(d.locations(), vec![1.0, 2.0, 3.0]);
        assert_eq!(d.weights(), vec![-1e-13, -1.0, 2.0]);
        assert!(d.to_mixing(0.0).is_none());
    }
}

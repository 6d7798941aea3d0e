//! Classical vertex direction steps on the convex hull (mass-one mixtures):
//! the Fedorov–Wynn step and the vertex exchange step.

use crate::family::{combine, Atom, AtomicMeasure, MixingMeasure};

use super::{argmin, ConeObjective, Grid};

const GOLDEN_TOL: f64 = 1e-10;

/// `argmin_{ε∈[0,1]} φ(f + ε·direction)`.
///
/// Quadratic objectives use the closed-form vertex of the parabola; other
/// objectives use golden-section search to `1e-10`.
pub fn line_minimize<M: ConeObjective + ?Sized>(model: &M, f: &[Atom], direction: &[Atom]) -> f64 {
    if let Some(q) = model.curvature(direction) {
        let slope = model.dir_deriv(direction, f);
        if slope >= 0.0 {
            return 0.0;
        }
        if q <= 0.0 {
            return 1.0;
        }
        return (-slope / q).clamp(0.0, 1.0);
    }
    let value = |eps: f64| {
        let g = combine(f, direction, eps);
        let v = model.objective(&g);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (value(c), value(d));
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = value(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = value(d);
        }
    }
    let mid = 0.5 * (a + b);
    // The interior search cannot land exactly on an endpoint.
    [0.0, mid, 1.0]
        .into_iter()
        .map(|e| (e, value(e)))
        .fold((0.0, f64::INFINITY), |best, (e, v)| if v < best.1 { (e, v) } else { best })
        .0
}

/// `D_φ(f_θ − f; f)` for every grid point.
fn hull_derivatives<M: ConeObjective + ?Sized>(model: &M, f: &MixingMeasure, thetas: &[f64]) -> Vec<f64> {
    let self_term = model.dir_deriv(f.atoms(), f.atoms());
    model
        .vertex_derivatives(thetas, f.atoms())
        .into_iter()
        .map(|d| d - self_term)
        .collect()
}

/// One Fedorov–Wynn step: `(1 − ε̂) f + ε̂ f_θ̂` with `θ̂` the grid minimizer
/// of `D_φ(f_θ − f; f)` and `ε̂` the optimal mixing fraction.
pub fn fedorov_wynn_step<M: ConeObjective + ?Sized>(
    model: &M,
    f: &MixingMeasure,
    grid: &Grid,
) -> MixingMeasure {
    let derivs = hull_derivatives(model, f, grid.points());
    let (i, value) = argmin(&derivs);
    if !(value < 0.0) {
        return f.clone();
    }
    let vertex = MixingMeasure::single(grid.points()[i], 1.0).expect("unit atom");
    let direction = combine(vertex.atoms(), f.atoms(), -1.0);
    let eps = line_minimize(model, f.atoms(), &direction);
    if eps <= 0.0 {
        return f.clone();
    }
    f.convex_combination(&vertex, eps, 0.0)
}

/// One vertex exchange step: move mass `ε̂ μ_f({θ̌})` from the worst support
/// point `θ̌` to the best grid vertex `θ̂`.
pub fn vertex_exchange_step<M: ConeObjective + ?Sized>(
    model: &M,
    f: &MixingMeasure,
    grid: &Grid,
) -> MixingMeasure {
    if f.is_empty() {
        return f.clone();
    }
    let derivs = hull_derivatives(model, f, grid.points());
    let (i, best) = argmin(&derivs);
    let best_theta = grid.points()[i];
    let support = f.locations();
    let support_derivs = hull_derivatives(model, f, &support);
    let (j, worst) = support_derivs
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
    let worst_theta = support[j];
    if !(best < worst) || best_theta == worst_theta {
        return f.clone();
    }
    let mass = f.atoms()[j].weight;
    let direction = vec_sorted(vec![
        Atom::new(best_theta, mass),
        Atom::new(worst_theta, -mass),
    ]);
    let eps = line_minimize(model, f.atoms(), &direction);
    if eps <= 0.0 {
        return f.clone();
    }
    let moved = eps * mass;
    let atoms: Vec<Atom> = f
        .atoms()
        .iter()
        .map(|a| {
            if a.location == worst_theta {
                let w = if eps >= 1.0 { 0.0 } else { a.weight - moved };
                Atom::new(a.location, w)
            } else {
                *a
            }
        })
        .filter(|a| a.weight > 0.0)
        .chain(std::iter::once(Atom::new(best_theta, moved)))
        .collect();
    MixingMeasure::new(atoms).expect("exchange keeps weights positive")
}

fn vec_sorted(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    atoms
}

#![allow(dead_code)]

use mixfit::family::{GaussianFamily, ParametricFamily, TriangularFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Simpson on every interval between consecutive (sorted) breakpoints.
pub fn piecewise_simpson<F: Fn(f64) -> f64>(f: F, breaks: &[f64], n: usize) -> f64 {
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| simpson(&f, w[0], w[1], n))
        .sum()
}

pub fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1e-300)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let factor = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= factor * p;
            }
            b[col + 1 + offset] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

pub fn exponential_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect()
}

/// Every nonempty subset of `0..p` as index vectors.
pub fn subsets(p: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1 << p)).map(move |mask| (0..p).filter(|&j| mask & (1 << j) != 0).collect())
}

/// `⟨f_θ, f_τ⟩` by quadrature on the pieces where the product is a polynomial.
pub fn triangular_gram_quadrature(theta: f64, tau: f64) -> f64 {
    let hi = theta.min(tau);
    simpson(
        |x| TriangularFamily.density(theta, x) * TriangularFamily.density(tau, x),
        0.0,
        hi * (1.0 - 1e-15),
        20,
    )
}

/// Cone minimum of the least-squares objective over the grid, by solving the
/// unconstrained problem on every support subset and keeping the best
/// subset whose weights are all positive.
pub fn ls_exhaustive(sample: &[f64], grid: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let b: Vec<f64> = grid
        .iter()
        .map(|&t| sample.iter().map(|&x| TriangularFamily.density(t, x)).sum::<f64>() / n)
        .collect();
    let gram: Vec<Vec<f64>> = grid
        .iter()
        .map(|&s| grid.iter().map(|&t| triangular_gram_quadrature(s, t)).collect())
        .collect();
    let mut best = 0.0f64;
    for subset in subsets(grid.len()) {
        let a: Vec<Vec<f64>> = subset.iter().map(|&i| subset.iter().map(|&j| gram[i][j]).collect()).collect();
        let rhs: Vec<f64> = subset.iter().map(|&i| b[i]).collect();
        let Some(sigma) = dense_solve(a.clone(), rhs.clone()) else {
            continue;
        };
        if sigma.iter().any(|&s| s <= 0.0) {
            continue;
        }
        let quad: f64 = (0..subset.len())
            .map(|i| sigma[i] * (0..subset.len()).map(|j| a[i][j] * sigma[j]).sum::<f64>())
            .sum();
        let value = 0.5 * quad - sigma.iter().zip(&rhs).map(|(s, r)| s * r).sum::<f64>();
        best = best.min(value);
    }
    best
}

/// Minimizer of the relaxed likelihood over the span of Gaussian kernels at
/// `thetas`, by damped Newton in weight space. `None` when Newton does not
/// converge.
pub fn ml_span_minimum(sample: &[f64], thetas: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = sample.len() as f64;
    let p = thetas.len();
    let y: Vec<Vec<f64>> = sample
        .iter()
        .map(|&x| thetas.iter().map(|&t| GaussianFamily.density(t, x)).collect())
        .collect();
    let value = |alpha: &[f64]| -> f64 {
        let mut s = 0.0;
        for row in &y {
            let f: f64 = row.iter().zip(alpha).map(|(k, a)| k * a).sum();
            if !(f > 0.0) {
                return f64::INFINITY;
            }
            s -= f.ln();
        }
        s / n + alpha.iter().sum::<f64>()
    };
    let mut alpha = vec![1.0 / p as f64; p];
    let mut current = value(&alpha);
    for _ in 0..500 {
        let mut grad = vec![1.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for row in &y {
            let f: f64 = row.iter().zip(&alpha).map(|(k, a)| k * a).sum();
            for i in 0..p {
                grad[i] -= row[i] / (f * n);
                for j in 0..p {
                    hess[i][j] += row[i] * row[j] / (f * f * n);
                }
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-10 {
            return Some((alpha, current));
        }
        let step = dense_solve(hess, grad.iter().map(|g| -g).collect())?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = alpha.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let v = value(&trial);
            if v <= current {
                alpha = trial;
                current = v;
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                return if gnorm < 1e-8 { Some((alpha, current)) } else { None };
            }
        }
    }
    None
}

/// Cone minimum of the relaxed likelihood over the grid by exhaustive
/// enumeration of support subsets.
pub fn ml_exhaustive(sample: &[f64], grid: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for subset in subsets(grid.len()) {
        let thetas: Vec<f64> = subset.iter().map(|&i| grid[i]).collect();
        if let Some((alpha, v)) = ml_span_minimum(sample, &thetas) {
            if alpha.iter().all(|&a| a > 0.0) {
                best = best.min(v);
            }
        }
    }
    best
}

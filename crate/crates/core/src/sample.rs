//! Sorted observations with the empirical distribution function `F_n` and its
//! running integral `Y_n(θ) = ∫_0^θ F_n(x) dx`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    // prefix[k] = x_1 + … + x_k
    prefix: Vec<f64>,
}

impl Sample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSample("sample is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite observation {v}")));
        }
        values.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &v in &values {
            acc += v;
            prefix.push(acc);
        }
        Ok(Self { values, prefix })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.prefix[self.values.len()] / self.values.len() as f64
    }

    pub fn median(&self) -> f64 {
        let n = self.values.len();
        if n % 2 == 1 {
            self.values[n / 2]
        } else {
            0.5 * (self.values[n / 2 - 1] + self.values[n / 2])
        }
    }

    /// Number of observations strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v < x)
    }

    /// `F_n(x) = #{x_i ≤ x} / n`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }

    /// `Y_n(θ) = (1/n) Σ_i (θ − x_i)⁺`.
    pub fn integrated_ecdf(&self, theta: f64) -> f64 {
        let k = self.count_below(theta);
        (k as f64 * theta - self.prefix[k]) / self.values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_empty_and_nan() {
        assert!(Sample::new(vec![]).is_err());
        assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn sorts_and_summarizes() {
        let s = Sample::new(vec![3.0, 1.0, 2.0, 6.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0, 6.0]);
        assert_eq!(s.min(), 1.0);
        assert_eq!(s.max(), 6.0);
        assert_abs_diff_eq!(s.mean(), 3.0);
        assert_abs_diff_eq!(s.median(), 2.5);
        assert_abs_diff_eq!(s.ecdf(2.0), 0.5);
        assert_abs_diff_eq!(s.ecdf(0.5), 0.0);
    }

    #[test]
    fn integrated_ecdf_examples() {
        let one = Sample::new(vec![1.0]).unwrap();
        assert_abs_diff_eq!(one.integrated_ecdf(2.0), 1.0);
        assert_eq!(one.integrated_ecdf(0.7), 0.0);
        assert_eq!(one.integrated_ecdf(1.0), 0.0);
        let two = Sample::new(vec![1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(two.integrated_ecdf(3.0), 1.0);
    }

    #[test]
    fn integrated_ecdf_matches_direct_sum() {
        let s = Sample::new(vec![0.2, 0.9, 0.9, 1.4, 3.3]).unwrap();
        for i in 0..50 {
            let t = i as f64 * 0.1;
            let direct: f64 =
                s.values().iter().map(|&x| (t - x).max(0.0)).sum::<f64>() / s.len() as f64;
            assert_abs_diff_eq!(s.integrated_ecdf(t), direct, epsilon = 1e-14);
        }
    }
}

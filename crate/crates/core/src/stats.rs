//! Normal and Student-t helpers.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

/// Standard normal cdf, Φ(x) = ½ erfc(−x/√2).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided 95% Student-t coefficient for `dof` degrees of freedom.
/// Zero degrees of freedom falls back to the normal 1.96.
pub fn t95(dof: usize) -> f64 {
    if dof == 0 {
        return 1.96;
    }
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive dof")
        .inverse_cdf(0.975)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation; 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_normal_values() {
        // standard normal table
        for (x, p) in [(0.0, 0.5), (1.0, 0.841_344_746_068_542_9), (-1.96, 0.024_997_895_148_220_435), (3.0, 0.998_650_101_968_369_9)] {
            assert!((normal_cdf(x) - p).abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn tabulated_t_values() {
        assert!((t95(1) - 12.706).abs() < 1e-3);
        assert!((t95(4) - 2.776).abs() < 1e-3);
        assert!((t95(9) - 2.262).abs() < 1e-3);
        assert_eq!(t95(0), 1.96);
    }
}

//! Small statistics helpers for the property checkers.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// `p`-quantile of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_quantile(df: u64, p: f64) -> f64 {
    assert!(df > 0, "chi-square needs at least one degree of freedom");
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

/// Pearson statistic of `counts` against a common expected count.
pub fn chi_square_statistic(counts: &[u64], expected: f64) -> f64 {
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// Standard deviation of a binomial(trials, p) count.
pub fn binomial_sigma(trials: u64, p: f64) -> f64 {
    (trials as f64 * p * (1.0 - p)).sqrt()
}

/// Running moments of a sample, enough for the mean, the standard deviation
/// and their standard errors.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    count: u64,
    sum: f64,
    sum_sq: f64,
    sum_cube: f64,
    sum_quad: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let x2 = x * x;
        self.count += 1;
        self.sum += x;
        self.sum_sq += x2;
        self.sum_cube += x2 * x;
        self.sum_quad += x2 * x2;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Population variance (divisor `count`).
    fn central_second(&self) -> f64 {
        let n = self.count as f64;
        let m = self.mean();
        (self.sum_sq / n - m * m).max(0.0)
    }

    fn central_fourth(&self) -> f64 {
        let n = self.count as f64;
        let m = self.mean();
        let (s1, s2, s3, s4) = (
            self.sum / n,
            self.sum_sq / n,
            self.sum_cube / n,
            self.sum_quad / n,
        );
        (s4 - 4.0 * m * s3 + 6.0 * m * m * s2 - 4.0 * m.powi(3) * s1 + m.powi(4)).max(0.0)
    }

    /// Sample standard deviation (divisor `count - 1`).
    pub fn std_dev(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        (self.central_second() * n / (n - 1.0)).sqrt()
    }

    pub fn std_error_of_mean(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.std_dev() / (self.count as f64).sqrt()
    }

    /// Delta-method standard error of the sample standard deviation; does
    /// not assume normality.
    pub fn std_error_of_std_dev(&self) -> f64 {
        let var = self.central_second();
        if self.count < 2 || var == 0.0 {
            return 0.0;
        }
        let var_of_var = (self.central_fourth() - var * var).max(0.0) / self.count as f64;
        var_of_var.sqrt() / (2.0 * var.sqrt())
    }
}

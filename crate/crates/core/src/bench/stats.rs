use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and two-sided Student-t confidence interval of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Fewer than two values: the interval is undefined and reported as NaN.
    pub degenerate: bool,
}

pub fn summarize(values: &[f64], level: f64) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            n,
            mean: f64::NAN,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            degenerate: true,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Summary {
            n,
            mean,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            degenerate: true,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let half = t_quantile(level, n - 1) * (var / n as f64).sqrt();
    Summary {
        n,
        mean,
        ci_lo: mean - half,
        ci_hi: mean + half,
        degenerate: false,
    }
}

/// Upper `(1 + level) / 2` quantile of Student's t with `dof` degrees of freedom.
pub fn t_quantile(level: f64, dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + level / 2.0)
}

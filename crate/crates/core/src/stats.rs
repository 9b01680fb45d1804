//! Small statistics toolbox: binomial and sample-mean estimates with
//! standard errors, weighted least squares, and Student-t quantiles.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point estimate with its standard error and sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub n: u64,
}

impl Estimate {
    /// Bernoulli frequency with binomial standard error.
    pub fn from_indicator(successes: u64, n: u64) -> Estimate {
        let p = successes as f64 / n as f64;
        Estimate {
            value: p,
            se: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }

    /// Sample mean with the usual s/sqrt(n) standard error.
    pub fn from_samples(values: &[f64]) -> Estimate {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Estimate {
            value: mean,
            se: (var / n).sqrt(),
            n: values.len() as u64,
        }
    }

    /// |this - other| within k joint standard errors.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        let joint = (self.se.powi(2) + other.se.powi(2)).sqrt();
        (self.value - other.value).abs() <= k * joint
    }
}

/// Weighted least-squares line fit y ≈ intercept + slope·x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub points: usize,
}

/// Fit with weights 1/se_i²; `points` are (x, y, se_y).
pub fn weighted_line_fit(points: &[(f64, f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::UndefinedFit(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut swy = 0.0;
    for &(x, y, se) in points {
        let w = 1.0 / se.max(1e-300).powi(2);
        sw += w;
        swx += w * x;
        swy += w * y;
    }
    let xbar = swx / sw;
    let ybar = swy / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y, se) in points {
        let w = 1.0 / se.max(1e-300).powi(2);
        sxx += w * (x - xbar) * (x - xbar);
        sxy += w * (x - xbar) * (y - ybar);
    }
    if sxx <= 0.0 {
        return Err(Error::UndefinedFit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: ybar - slope * xbar,
        slope_se: (1.0 / sxx).sqrt(),
        points: points.len(),
    })
}

/// Two-sided Student-t critical value at confidence `level` (e.g. 0.95).
pub fn t_critical(df: u64, level: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let t = StudentsT::new(0.0, 1.0, df as f64).expect("valid dof");
    t.inverse_cdf(0.5 + level / 2.0)
}

//! Chi-squared distribution function and quantiles.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};

fn distribution(dof: usize) -> Result<ChiSquared> {
    if dof == 0 {
        return Err(invalid("chi-squared needs at least one degree of freedom"));
    }
    ChiSquared::new(dof as f64).map_err(|e| invalid(e.to_string()))
}

pub fn chi2_cdf(x: f64, dof: usize) -> f64 {
    distribution(dof).map_or(f64::NAN, |d| d.cdf(x))
}

/// Upper tail `1 - F(x)`, computed directly for accuracy in the tail.
pub fn chi2_sf(x: f64, dof: usize) -> f64 {
    distribution(dof).map_or(f64::NAN, |d| d.sf(x))
}

pub fn chi2_quantile(level: f64, dof: usize) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("level {level} outside (0, 1)")));
    }
    Ok(distribution(dof)?.inverse_cdf(level))
}

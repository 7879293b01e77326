//! A 95% confidence region and a Wald test for the common axis.
//!
//! Prints the region boundary as `x,y,z` rows after the summary.

use std::f64::consts::PI;

use subsphere::synthetic::Noise;
use subsphere::{
    axis_confidence_region, axis_wald_test, estimate_asymptotics, fit, generate, FitConfig, GeneratorSpec, LossKind,
    RandomSeed, SubsphereParams, UnitVector,
};

fn main() -> subsphere::Result<()> {
    let c0 = UnitVector::from_slice(&[0.3, -0.2, 0.93])?;
    let truth = SubsphereParams::new(c0.clone(), vec![PI / 6.0, PI / 4.0, PI / 3.0, 5.0 * PI / 12.0])?;
    let data = generate(&GeneratorSpec::new(truth, 400, Noise::gaussian(0.1), RandomSeed(3)))?.sample;

    let fitted = fit(&data, &FitConfig::new(LossKind::Intrinsic))?;
    let est = estimate_asymptotics(&data, &fitted.params, LossKind::Intrinsic)?;
    let region = axis_confidence_region(&est, 0.95)?;
    let test = axis_wald_test(&est, &c0)?;

    println!("fitted axis      {:.5?}", est.fitted_axis().as_slice());
    println!("axis covariance  {:.3?}", est.axis_covariance().as_slice());
    println!("χ² quantile      {:.4}", region.chi2_quantile);
    println!("covers truth     {}", region.covers(&c0)?);
    println!("Wald statistic   {:.4}  p = {:.4}", test.statistic, test.p_value);
    for p in &region.boundary_points_on_sphere {
        let x = p.as_slice();
        println!("{:.6},{:.6},{:.6}", x[0], x[1], x[2]);
    }
    Ok(())
}

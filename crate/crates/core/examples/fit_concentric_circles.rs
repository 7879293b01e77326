//! Fit four concentric circles under each loss and compare with the truth.

use std::f64::consts::PI;

use subsphere::synthetic::Noise;
use subsphere::{fit, generate, param_distance, FitConfig, GeneratorSpec, LossKind, RandomSeed, SubsphereParams, UnitVector};

fn main() -> subsphere::Result<()> {
    let c = UnitVector::from_slice(&[0.3, -0.2, 0.93])?;
    let truth = SubsphereParams::new(c, vec![PI / 6.0, PI / 4.0, PI / 3.0, 5.0 * PI / 12.0])?;
    let spec = GeneratorSpec::new(truth.clone(), 200, Noise::gaussian(0.05), RandomSeed(7));
    let data = generate(&spec)?.sample;

    for kind in LossKind::ALL {
        let result = fit(&data, &FitConfig::new(kind))?;
        let p = result.params.representative();
        println!(
            "{kind:>10}: d = {:.5}  objective {:.4e}  iterations {:>2}  converged {}  center {:.4?}",
            param_distance(p, &truth)?,
            result.objective.total,
            result.iterations,
            result.converged,
            p.center().as_slice()
        );
    }
    Ok(())
}

//! The four residuals for points at growing distance from a small circle,
//! and the objective of one sample under each loss.

use std::f64::consts::PI;

use subsphere::sphere::TangentFrame;
use subsphere::synthetic::Noise;
use subsphere::{generate, objective, residual_distance, GeneratorSpec, LossKind, RandomSeed, SubsphereParams, UnitVector};

fn main() -> subsphere::Result<()> {
    let c = UnitVector::basis(3, 2);
    let r = PI / 4.0;
    let frame = TangentFrame::at(&c);

    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "offset", "intrinsic", "extrinsic", "slicing", "naive");
    for offset in [0.0, 0.05, 0.2, 0.5, 1.0] {
        let theta: f64 = r + offset;
        let x = UnitVector::new(c.coords() * theta.cos() + frame.basis().column(0) * theta.sin())?;
        let row: Vec<String> = LossKind::ALL
            .iter()
            .map(|k| residual_distance(*k, &x, &c, r).map(|d| format!("{d:>10.5}")))
            .collect::<subsphere::Result<_>>()?;
        println!("{offset:>8.2} {}", row.join(" "));
    }

    let truth = SubsphereParams::new(c, vec![PI / 6.0, PI / 3.0])?;
    let data = generate(&GeneratorSpec::new(truth.clone(), 100, Noise::gaussian(0.05), RandomSeed(1)))?.sample;
    for kind in LossKind::ALL {
        let value = objective(kind, &data, &truth)?;
        println!("{kind:>10} objective at truth: {:.3e}", value.total);
    }
    Ok(())
}

//! Axis variance against the number of concentric circles, and the block
//! structure of the plug-in matrices.

use std::f64::consts::PI;

use subsphere::synthetic::mc::{McTarget, McTemplate};
use subsphere::synthetic::{GenerationMode, Noise};
use subsphere::{
    corollary_blocks, estimate_asymptotics, fit, generate, mc_study, FitConfig, GeneratorSpec, LossKind, McConfig,
    RandomSeed, SubsphereParams, UnitVector,
};

fn main() -> subsphere::Result<()> {
    let center = UnitVector::from_slice(&[0.3, -0.2, 0.93])?;
    let pattern = vec![PI / 6.0, PI / 4.0, PI / 3.0, 5.0 * PI / 12.0];

    let truth = SubsphereParams::new(center.clone(), pattern.clone())?;
    let data = generate(&GeneratorSpec::new(truth, 2000, Noise::gaussian(0.1), RandomSeed(5)))?.sample;
    let fitted = fit(&data, &FitConfig::new(LossKind::Intrinsic))?;
    let blocks = corollary_blocks(&estimate_asymptotics(&data, &fitted.params, LossKind::Intrinsic)?);
    println!("Σ_φ1 = {:.4?}", blocks.sigma_phi1.as_slice());
    println!("A_φ1 = {:.4?}", blocks.a_phi1.as_slice());
    println!("largest off-diagonal of Σ22: {:.3e}", blocks.sigma22_max_offdiag);
    println!("largest off-diagonal of A22: {:.3e}", blocks.a22_max_offdiag);

    let config = McConfig {
        replicates: 200,
        n_grid: vec![200],
        k_grid: vec![2, 4, 8],
        loss: LossKind::Intrinsic,
        template: McTemplate {
            center,
            radii_pattern: pattern,
            mode: GenerationMode::RotationalModel,
            noise: Noise::gaussian(0.1),
            a1_epsilon: None,
        },
        level: 0.95,
        seed: RandomSeed(8),
        target: McTarget::Population { n: 50_000 },
        restarts: 1,
        alternative_angle: None,
    };
    print!("{}", mc_study(&config)?.tables());
    Ok(())
}

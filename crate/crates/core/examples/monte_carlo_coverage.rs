//! A small coverage study: how often the 95% axis region covers the target,
//! and how often the Wald test rejects a true and a rotated axis.
//!
//! Pass a replicate count as the first argument (default 200).

use std::f64::consts::PI;

use subsphere::synthetic::mc::{McTarget, McTemplate};
use subsphere::synthetic::{GenerationMode, Noise};
use subsphere::{mc_study, LossKind, McConfig, RandomSeed, UnitVector};

fn main() -> subsphere::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let config = McConfig {
        replicates,
        n_grid: vec![50, 200, 800],
        k_grid: vec![4],
        loss: LossKind::Intrinsic,
        template: McTemplate {
            center: UnitVector::from_slice(&[0.3, -0.2, 0.93])?,
            radii_pattern: vec![PI / 6.0, PI / 4.0, PI / 3.0, 5.0 * PI / 12.0],
            mode: GenerationMode::RotationalModel,
            noise: Noise::gaussian(0.1),
            a1_epsilon: None,
        },
        level: 0.95,
        seed: RandomSeed(42),
        target: McTarget::Population { n: 50_000 },
        restarts: 1,
        alternative_angle: Some(0.05),
    };
    let report = mc_study(&config)?;
    print!("{}", report.tables());
    Ok(())
}

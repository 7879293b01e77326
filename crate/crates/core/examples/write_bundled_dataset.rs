//! Regenerates the bundled dataset in `data/`: four noiseless concentric
//! circles, the generator spec and the truth.

use std::f64::consts::PI;
use std::fs::File;
use std::path::Path;

use subsphere::harness::{to_versioned_json, write_dataset};
use subsphere::synthetic::Noise;
use subsphere::{generate, GeneratorSpec, RandomSeed, SubsphereParams, UnitVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let c = UnitVector::from_slice(&[0.3, -0.2, 0.93])?;
    let truth = SubsphereParams::new(c, vec![PI / 6.0, PI / 4.0, PI / 3.0, 5.0 * PI / 12.0])?;
    let spec = GeneratorSpec::new(truth, 60, Noise::gaussian(1e-12), RandomSeed(2024));
    let generated = generate(&spec)?;

    std::fs::write(dir.join("concentric_k4_spec.json"), to_versioned_json(&spec)?)?;
    std::fs::write(dir.join("concentric_k4_truth.json"), to_versioned_json(&generated.truth)?)?;
    write_dataset(&generated.sample, File::create(dir.join("concentric_k4.csv"))?)?;
    println!("wrote {} observations to {}", generated.sample.n(), dir.display());
    Ok(())
}

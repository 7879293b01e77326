//! Distances, exponential and log maps, projection onto a small circle and
//! rotations about an axis on S^2.

use std::f64::consts::PI;

use nalgebra::DVector;
use subsphere::{
    exp_map, extrinsic_distance, geodesic_distance, log_map, project_to_subsphere, rotation_fixing_axis,
    RandomSeed, TangentVector, UnitVector,
};

fn main() -> subsphere::Result<()> {
    let north = UnitVector::basis(3, 2);
    let x = UnitVector::from_slice(&[1.0, 1.0, 1.0])?;

    println!("geodesic   d(N, x) = {:.6}", geodesic_distance(&north, &x)?);
    println!("extrinsic  d(N, x) = {:.6}", extrinsic_distance(&north, &x)?);

    // at the north pole the tangent frame is the first two coordinate axes
    let v = TangentVector::new(north.clone(), DVector::from_vec(vec![PI / 2.0, 0.0]))?;
    let y = exp_map(&north, &v)?;
    println!("exp_N(π/2, 0) = {:?}", y.as_slice());
    let back = log_map(&north, &y)?;
    println!("log_N of that = {:?}", back.components.as_slice());

    // nearest point on the circle of radius π/4 about the pole
    let p = project_to_subsphere(&x, &north, PI / 4.0)?;
    println!("projection of x onto [N, π/4] = {:?}", p.as_slice());

    let rot = rotation_fixing_axis(&north, PI / 2.0, RandomSeed(0));
    println!("x rotated by π/2 about N = {:?}", rot.apply(&x).as_slice());
    Ok(())
}

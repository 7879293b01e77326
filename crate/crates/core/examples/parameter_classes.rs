//! The two parameterizations of one set of concentric circles and the
//! distance between classes.

use std::f64::consts::PI;

use subsphere::{canonicalize, param_distance, SubsphereParams, UnitVector};

fn main() -> subsphere::Result<()> {
    let c = UnitVector::from_slice(&[0.0, 0.6, 0.8])?;
    let p = SubsphereParams::new(c, vec![PI / 6.0, 2.0 * PI / 3.0, 3.0 * PI / 4.0])?;
    let q = p.flip();
    println!("p      = {:?} {:?}", p.center().as_slice(), p.radii());
    println!("flip p = {:?} {:?}", q.center().as_slice(), q.radii());
    println!("d(p, flip p) = {}", param_distance(&p, &q)?);

    // the canonical member has radius sum below Kπ/2
    let canon = canonicalize(&p);
    let r = canon.representative();
    println!("canonical: {:?} {:?}", r.center().as_slice(), r.radii());
    assert_eq!(canon, canonicalize(&q));

    let nearby = SubsphereParams::new(p.center().clone(), vec![PI / 6.0 + 0.01, 2.0 * PI / 3.0, 3.0 * PI / 4.0])?;
    println!("d(p, nearby) = {:.4}", param_distance(&p, &nearby)?);
    println!("json: {}", serde_json::to_string(&canon).expect("serializable"));
    Ok(())
}

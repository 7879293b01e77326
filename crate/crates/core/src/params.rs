//! Parameter space `S^m × (0, π)^K` of concentric subspheres and its quotient
//! under `(c, r) ~ (-c, π - r)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sphere::{geodesic_distance, UnitVector};

/// A center `c` and radii `r_1..r_K`, each in `(0, π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SubsphereParams {
    center: UnitVector,
    radii: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    center: UnitVector,
    radii: Vec<f64>,
}

impl TryFrom<RawParams> for SubsphereParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        SubsphereParams::new(raw.center, raw.radii)
    }
}

impl From<SubsphereParams> for RawParams {
    fn from(p: SubsphereParams) -> Self {
        RawParams {
            center: p.center,
            radii: p.radii,
        }
    }
}

impl SubsphereParams {
    pub fn new(center: UnitVector, radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(invalid("at least one radius is required"));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && **r < PI)) {
            return Err(invalid(format!("radius {r} outside (0, π)")));
        }
        Ok(SubsphereParams { center, radii })
    }

    pub fn center(&self) -> &UnitVector {
        &self.center
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Number of concentric subspheres, `K`.
    pub fn k(&self) -> usize {
        self.radii.len()
    }

    /// Sphere dimension `m`.
    pub fn m(&self) -> usize {
        self.center.sphere_dim()
    }

    /// Chart dimension `m + K`.
    pub fn nu(&self) -> usize {
        self.m() + self.k()
    }

    /// The other member of the equivalence class, `(-c, π - r)`.
    pub fn flip(&self) -> SubsphereParams {
        SubsphereParams {
            center: self.center.neg(),
            radii: self.radii.iter().map(|r| PI - r).collect(),
        }
    }

    pub fn canonicalize(&self) -> SubsphereClass {
        canonicalize(self)
    }

    fn check_compatible(&self, other: &SubsphereParams) -> Result<()> {
        if self.center.ambient_dim() != other.center.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.center.ambient_dim(),
                found: other.center.ambient_dim(),
            });
        }
        if self.k() != other.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                found: other.k(),
            });
        }
        Ok(())
    }
}

/// An equivalence class `[c, r]`, held by its canonical representative.
///
/// The representative has radius sum below `Kπ/2`. On the tie set the first
/// nonzero coordinate of the center is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubsphereParams", into = "SubsphereParams")]
pub struct SubsphereClass {
    representative: SubsphereParams,
}

impl TryFrom<SubsphereParams> for SubsphereClass {
    type Error = Error;
    fn try_from(p: SubsphereParams) -> Result<Self> {
        Ok(canonicalize(&p))
    }
}

impl From<SubsphereClass> for SubsphereParams {
    fn from(c: SubsphereClass) -> Self {
        c.representative
    }
}

impl SubsphereClass {
    pub fn representative(&self) -> &SubsphereParams {
        &self.representative
    }

    pub fn into_representative(self) -> SubsphereParams {
        self.representative
    }

    /// Member of the class whose center lies in the same hemisphere as
    /// `reference`.
    pub fn aligned_with(&self, reference: &UnitVector) -> SubsphereParams {
        if self.representative.center.dot(reference) < 0.0 {
            self.representative.flip()
        } else {
            self.representative.clone()
        }
    }
}

const TIE_TOLERANCE: f64 = 1e-12;

/// Canonical representative of the class of `p`. Idempotent.
pub fn canonicalize(p: &SubsphereParams) -> SubsphereClass {
    let k = p.k() as f64;
    let half = k * PI / 2.0;
    let sum: f64 = p.radii.iter().sum();
    let flip = if (sum - half).abs() <= TIE_TOLERANCE * k {
        let first = p.center.as_slice().iter().find(|v| **v != 0.0).copied();
        matches!(first, Some(v) if v < 0.0)
    } else {
        sum > half
    };
    let representative = if flip { p.flip() } else { p.clone() };
    SubsphereClass { representative }
}

/// Quotient distance `min(d_1, d_2)` between the classes of `p1` and `p2`.
///
/// `d_1` compares `p1` with `p2` directly, `d_2` compares it with the flipped
/// `(-c_2, π - r_2)`; both combine the axis angle and the radius differences
/// in an `l2` sum.
pub fn param_distance(p1: &SubsphereParams, p2: &SubsphereParams) -> Result<f64> {
    p1.check_compatible(p2)?;
    let same = geodesic_distance(&p1.center, &p2.center)?;
    let opposite = geodesic_distance(&p1.center, &p2.center.neg())?;
    let mut direct = same * same;
    let mut flipped = opposite * opposite;
    for (a, b) in p1.radii.iter().zip(&p2.radii) {
        let d = a - b;
        direct += d * d;
        let f = PI - (a + b);
        flipped += f * f;
    }
    Ok(direct.sqrt().min(flipped.sqrt()))
}

//! Geometry of the unit sphere `S^m` embedded in `R^(m+1)`.
//!
//! Tangent coordinates at a point `c` are expressed in an orthonormal basis of
//! `c^⊥` obtained from a Householder reflection that carries `e_(m+1)` onto
//! `c`. At `c = e_(m+1)` the basis is `e_1, ..., e_m` and the exponential map
//! reduces to `(v sin|v| / |v|, cos|v|)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::RandomSeed;

/// `|sin θ|` below which a point is treated as lying on the axis `±c`.
pub const POLE_TOLERANCE: f64 = 1e-12;

/// A point on `S^m`, stored as its unit-norm embedding in `R^(m+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(DVector<f64>);

impl UnitVector {
    /// Normalizes `coords` onto the sphere. Requires at least two finite,
    /// not-all-zero coordinates.
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(invalid("unit vector needs at least 2 coordinates"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(invalid("unit vector coordinates must be finite"));
        }
        let norm = coords.norm();
        if norm == 0.0 {
            return Err(invalid("cannot normalize the zero vector"));
        }
        // already-unit input is kept bit-for-bit so normalization is idempotent
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(UnitVector(coords));
        }
        Ok(UnitVector(coords / norm))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    /// The `k`-th standard basis vector of `R^dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(dim >= 2 && k < dim, "basis vector out of range");
        let mut v = DVector::zeros(dim);
        v[k] = 1.0;
        UnitVector(v)
    }

    /// Intrinsic dimension `m` of the sphere this point lives on.
    pub fn sphere_dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn ambient_dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn neg(&self) -> UnitVector {
        UnitVector(-&self.0)
    }


    fn check_same_dim(&self, other: &UnitVector) -> Result<()> {
        if self.0.len() != other.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                found: other.0.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        UnitVector::new(DVector::from_vec(v))
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(u: UnitVector) -> Self {
        u.0.as_slice().to_vec()
    }
}

/// Angle between two unit vectors, `2 atan2(|x - y|, |x + y|)`.
///
/// Equal to `arccos(x·y)` but keeps full relative precision near 0 and π.
fn angle_between(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let diff = (x - y).norm();
    let sum = (x + y).norm();
    2.0 * diff.atan2(sum)
}

/// [`angle_between`] on raw coordinate slices of equal length.
pub(crate) fn angle_slices(x: &[f64], y: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (a, b) in x.iter().zip(y) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Great-circle distance in `[0, π]`.
pub fn geodesic_distance(x: &UnitVector, y: &UnitVector) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok(angle_between(&x.0, &y.0))
}

/// Chordal distance in the embedding, in `[0, 2]`.
pub fn extrinsic_distance(x: &UnitVector, y: &UnitVector) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok((&x.0 - &y.0).norm())
}

/// Orthonormal basis of the tangent space at a base point.
///
/// Columns of `basis` are `H e_1, ..., H e_m` for the Householder reflection
/// `H` with `H e_(m+1) = ±c`; the sign is chosen so the reflection vector
/// never suffers cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    base: UnitVector,
    basis: DMatrix<f64>,
}

impl TangentFrame {
    pub fn at(base: &UnitVector) -> Self {
        let dim = base.ambient_dim();
        let m = dim - 1;
        let c = &base.0;
        // w = e + c maps e to -c, w = e - c maps e to c; both give the same
        // span for the first m columns.
        let mut w = c.clone();
        if c[m] >= 0.0 {
            w[m] += 1.0;
        } else {
            w.neg_mut();
            w[m] += 1.0;
        }
        let ww = w.norm_squared();
        let mut basis = DMatrix::zeros(dim, m);
        for k in 0..m {
            let scale = 2.0 * w[k] / ww;
            for row in 0..dim {
                let e = if row == k { 1.0 } else { 0.0 };
                basis[(row, k)] = e - scale * w[row];
            }
        }
        TangentFrame {
            base: base.clone(),
            basis,
        }
    }

    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    /// `(m+1) × m` matrix whose columns span `T_c S^m`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Tangent coordinates of an ambient vector, `Bᵀ x`.
    pub fn coordinates(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(x)
    }

    pub fn exp(&self, components: &DVector<f64>) -> UnitVector {
        let norm = components.norm();
        if norm == 0.0 {
            return self.base.clone();
        }
        let direction = &self.basis * components;
        let point = &self.base.0 * norm.cos() + direction * (norm.sin() / norm);
        // renormalize away rounding drift
        let n = point.norm();
        UnitVector(point / n)
    }

    pub fn log(&self, x: &UnitVector) -> Result<DVector<f64>> {
        self.base.check_same_dim(x)?;
        let c = &self.base.0;
        let t = c.dot(&x.0);
        let tangential = &x.0 - c * t;
        let sin = tangential.norm();
        if sin <= POLE_TOLERANCE {
            if t < 0.0 {
                return Err(Error::CutLocus);
            }
            return Ok(DVector::zeros(self.dim()));
        }
        let theta = angle_between(c, &x.0);
        Ok(self.coordinates(&tangential) * (theta / sin))
    }
}

/// Chart coordinates of a tangent vector at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: UnitVector,
    pub components: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: UnitVector, components: DVector<f64>) -> Result<Self> {
        if components.len() != base.sphere_dim() {
            return Err(Error::DimensionMismatch {
                expected: base.sphere_dim(),
                found: components.len(),
            });
        }
        Ok(TangentVector { base, components })
    }

    pub fn zero(base: UnitVector) -> Self {
        let m = base.sphere_dim();
        TangentVector {
            base,
            components: DVector::zeros(m),
        }
    }

    pub fn norm(&self) -> f64 {
        self.components.norm()
    }
}

/// `Exp_c(v)`; `v` must be based at `c`.
pub fn exp_map(c: &UnitVector, v: &TangentVector) -> Result<UnitVector> {
    if v.base != *c {
        return Err(Error::BaseMismatch);
    }
    TangentVector::new(c.clone(), v.components.clone())?;
    Ok(TangentFrame::at(c).exp(&v.components))
}

/// `Exp_c⁻¹(x)`; fails at the antipode of `c`.
pub fn log_map(c: &UnitVector, x: &UnitVector) -> Result<TangentVector> {
    let components = TangentFrame::at(c).log(x)?;
    Ok(TangentVector {
        base: c.clone(),
        components,
    })
}

/// Closest point to `x` on the subsphere `{y : c·y = cos r}`.
pub fn project_to_subsphere(x: &UnitVector, c: &UnitVector, r: f64) -> Result<UnitVector> {
    x.check_same_dim(c)?;
    if !(r > 0.0 && r < PI) {
        return Err(invalid(format!("radius {r} outside (0, π)")));
    }
    let t = c.dot(x);
    let tangential = &x.0 - &c.0 * t;
    let sin = tangential.norm();
    if sin <= POLE_TOLERANCE {
        return Err(Error::PoleProjection);
    }
    let a = tangential / sin;
    let p = &c.0 * r.cos() + a * r.sin();
    let n = p.norm();
    Ok(UnitVector(p / n))
}

/// An element of `SO(m+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation(DMatrix<f64>);

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        Rotation(DMatrix::identity(dim, dim))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn apply(&self, x: &UnitVector) -> UnitVector {
        let y = &self.0 * &x.0;
        let n = y.norm();
        UnitVector(y / n)
    }

    /// Rotation by `theta` in the plane spanned by orthonormal `u`, `v`,
    /// taking `u` towards `v`.
    fn plane(u: &DVector<f64>, v: &DVector<f64>, theta: f64) -> Self {
        let dim = u.len();
        let (s, co) = theta.sin_cos();
        let uu = u * u.transpose();
        let vv = v * v.transpose();
        let vu = v * u.transpose();
        let uv = u * v.transpose();
        Rotation(DMatrix::identity(dim, dim) + (uu + vv) * (co - 1.0) + (vu - uv) * s)
    }
}

/// A rotation that fixes the axis `c`.
///
/// On `S^2` this is the rotation by `theta` about `c` (Rodrigues). For `m > 2`
/// the rotation acts by `theta` in a 2-plane of `c^⊥` drawn uniformly from
/// `seed`. On `S^1` the stabilizer of `c` in `SO(2)` is trivial and the
/// identity is returned.
pub fn rotation_fixing_axis(c: &UnitVector, theta: f64, seed: RandomSeed) -> Rotation {
    let dim = c.ambient_dim();
    match c.sphere_dim() {
        1 => Rotation::identity(dim),
        2 => {
            let k = &c.0;
            let cross = DMatrix::from_row_slice(
                3,
                3,
                &[0.0, -k[2], k[1], k[2], 0.0, -k[0], -k[1], k[0], 0.0],
            );
            let (s, co) = theta.sin_cos();
            Rotation(DMatrix::identity(3, 3) + &cross * s + (&cross * &cross) * (1.0 - co))
        }
        m => {
            let frame = TangentFrame::at(c);
            let mut rng = seed.rng();
            let mut draw = || -> DVector<f64> {
                DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng))
            };
            // Gram-Schmidt in tangent coordinates; degenerate draws are
            // measure-zero but retried for safety.
            let (a, b) = loop {
                let a = draw();
                let b = draw();
                let an = a.norm();
                if an < 1e-12 {
                    continue;
                }
                let a = a / an;
                let b = &b - &a * a.dot(&b);
                let bn = b.norm();
                if bn < 1e-12 {
                    continue;
                }
                break (a, b / bn);
            };
            let u = frame.basis() * a;
            let v = frame.basis() * b;
            Rotation::plane(&u, &v, theta)
        }
    }
}

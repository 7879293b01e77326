//! Residual distances from a point to a subsphere, the normalized least-squares
//! objective over a polysphere sample, and its derivatives in tangent-chart
//! coordinates.
//!
//! Derivatives are taken with respect to `u = (u_1, u_2) ∈ R^m × R^K` where the
//! parameters are `(Exp_c(B u_1), r + u_2)` for the Householder frame `B` at
//! `c`, evaluated at `u = 0`. Every loss has closed-form first and second
//! derivatives, written in terms of `t = c·x` and `a = Bᵀx`, whose chart
//! derivatives at the origin are `∇t = a` and `∇²t = -t I`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::PolysphereSample;
use crate::error::{invalid, Error, Result};
use crate::params::SubsphereParams;
use crate::sphere::{angle_slices, TangentFrame, UnitVector, POLE_TOLERANCE};
use crate::summation::{ExactSum, VecSum};

/// Default radius of the axis neighbourhood that triggers an A1 warning.
pub const DEFAULT_A1_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `|arccos(x·c) - r|`
    Intrinsic,
    /// `|x - P_[c,r] x|`
    Extrinsic,
    /// `|c·x - cos r|`
    Slicing,
    /// `| |x - c| - 2 sin(r/2) |`
    #[serde(rename = "naive")]
    NaiveExtrinsic,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::Intrinsic,
        LossKind::Extrinsic,
        LossKind::Slicing,
        LossKind::NaiveExtrinsic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Intrinsic => "intrinsic",
            LossKind::Extrinsic => "extrinsic",
            LossKind::Slicing => "slicing",
            LossKind::NaiveExtrinsic => "naive",
        }
    }

    /// Whether the residual is unchanged by `(c, r) -> (-c, π - r)`.
    ///
    /// The naive extrinsic residual compares `|x - c|` with `2 sin(r/2)`; under
    /// the flip this becomes `|x + c|` against `2 cos(r/2)`, which agrees only
    /// when `arccos(x·c) + r = π`.
    pub fn is_flip_invariant(self) -> bool {
        !matches!(self, LossKind::NaiveExtrinsic)
    }

    /// Whether smoothness needs data to stay away from the axis.
    pub fn needs_a1(self) -> bool {
        !matches!(self, LossKind::Slicing)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown loss '{s}'")))
    }
}

/// Chordal radius `2 sin(r/2)` of a subsphere of geodesic radius `r`.
pub fn chordal_radius(r: f64) -> f64 {
    2.0 * (r / 2.0).sin()
}

fn sin_from_axis(x: &[f64], c: &[f64], t: f64) -> f64 {
    let mut s = 0.0;
    for (xk, ck) in x.iter().zip(c) {
        let d = xk - t * ck;
        s += d * d;
    }
    s.sqrt()
}

/// Distance from `x` to the subsphere `[c, r]` under `kind`.
pub fn residual_distance(kind: LossKind, x: &UnitVector, c: &UnitVector, r: f64) -> Result<f64> {
    if x.ambient_dim() != c.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: c.ambient_dim(),
            found: x.ambient_dim(),
        });
    }
    if !(r > 0.0 && r < PI) {
        return Err(invalid(format!("radius {r} outside (0, π)")));
    }
    residual_unchecked(kind, x.as_slice(), c.as_slice(), r).ok_or(Error::PoleProjection)
}

fn residual_unchecked(kind: LossKind, x: &[f64], c: &[f64], r: f64) -> Option<f64> {
    match kind {
        LossKind::Intrinsic => Some((angle_slices(x, c) - r).abs()),
        LossKind::Extrinsic => {
            let t: f64 = x.iter().zip(c).map(|(a, b)| a * b).sum();
            if sin_from_axis(x, c, t) <= POLE_TOLERANCE {
                return None;
            }
            // 2 - 2(t cos r + sqrt(1 - t²) sin r) = 4 sin²((θ - r)/2)
            Some(2.0 * ((angle_slices(x, c) - r).abs() / 2.0).sin())
        }
        LossKind::Slicing => {
            let t: f64 = x.iter().zip(c).map(|(a, b)| a * b).sum();
            Some((t - r.cos()).abs())
        }
        LossKind::NaiveExtrinsic => {
            let chord: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            Some((chord - chordal_radius(r)).abs())
        }
    }
}

/// Normalized objective `(1/nK) Σ_i Σ_j ρ²(x_ij, [c, r_j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    /// `n × K` squared residuals.
    pub per_point: DMatrix<f64>,
    /// Points within [`DEFAULT_A1_EPSILON`] of `±c` (always 0 for slicing).
    pub a1_violations: usize,
}

/// Number of data points closer than `epsilon` to either pole of `center`.
pub fn count_a1_violations(data: &PolysphereSample, center: &UnitVector, epsilon: f64) -> usize {
    let c = center.as_slice();
    let neg = center.neg();
    data.observations()
        .flatten()
        .filter(|x| {
            angle_slices(x.as_slice(), c) < epsilon || angle_slices(x.as_slice(), neg.as_slice()) < epsilon
        })
        .count()
}

fn check_sample(data: &PolysphereSample, p: &SubsphereParams) -> Result<()> {
    data.check_dims(p.m(), p.k())
}

pub fn objective(kind: LossKind, data: &PolysphereSample, p: &SubsphereParams) -> Result<ObjectiveValue> {
    check_sample(data, p)?;
    let (n, k) = (data.n(), data.k());
    let c = p.center().as_slice();
    let mut per_point = DMatrix::zeros(n, k);
    let mut acc = ExactSum::new();
    for (i, obs) in data.observations().enumerate() {
        for (j, x) in obs.iter().enumerate() {
            let d = residual_unchecked(kind, x.as_slice(), c, p.radii()[j]).ok_or(Error::PoleProjection)?;
            let sq = d * d;
            per_point[(i, j)] = sq;
            acc.add(sq);
        }
    }
    let a1_violations = if kind.needs_a1() {
        count_a1_violations(data, p.center(), DEFAULT_A1_EPSILON)
    } else {
        0
    };
    if a1_violations > 0 {
        log::warn!(
            "{a1_violations} observations within {DEFAULT_A1_EPSILON} rad of the axis; {kind} loss is not smooth there"
        );
    }
    Ok(ObjectiveValue {
        total: acc.sum() / (n * k) as f64,
        per_point,
        a1_violations,
    })
}

/// Objective total only, skipping the residual grid and A1 scan.
pub(crate) fn objective_total(kind: LossKind, data: &PolysphereSample, p: &SubsphereParams) -> Result<f64> {
    let c = p.center().as_slice();
    let mut acc = ExactSum::new();
    for obs in data.observations() {
        for (j, x) in obs.iter().enumerate() {
            let d = residual_unchecked(kind, x.as_slice(), c, p.radii()[j]).ok_or(Error::PoleProjection)?;
            acc.add(d * d);
        }
    }
    Ok(acc.sum() / acc.len() as f64)
}

/// Chart derivatives of one squared residual at the chart origin.
#[derive(Debug, Clone)]
pub(crate) struct PointDerivatives {
    pub grad_axis: DVector<f64>,
    pub grad_radius: f64,
    pub hess_axis: DMatrix<f64>,
    pub hess_cross: DVector<f64>,
    pub hess_radius: f64,
}

pub(crate) fn point_derivatives(kind: LossKind, frame: &TangentFrame, x: &UnitVector, r: f64) -> Option<PointDerivatives> {
    let c = frame.base();
    let m = frame.dim();
    let t = c.dot(x);
    let a = frame.coordinates(x.coords());
    let s = a.norm();
    let eye = DMatrix::<f64>::identity(m, m);
    let outer = &a * a.transpose();
    match kind {
        LossKind::Slicing => {
            let delta = t - r.cos();
            let (sr, cr) = r.sin_cos();
            Some(PointDerivatives {
                grad_axis: &a * (2.0 * delta),
                grad_radius: 2.0 * delta * sr,
                hess_axis: &outer * 2.0 - &eye * (2.0 * delta * t),
                hess_cross: &a * (2.0 * sr),
                hess_radius: 2.0 * sr * sr + 2.0 * delta * cr,
            })
        }
        LossKind::Intrinsic | LossKind::Extrinsic => {
            if s <= POLE_TOLERANCE {
                return None;
            }
            let theta = angle_slices(x.as_slice(), c.as_slice());
            let grad_theta = &a * (-1.0 / s);
            let hess_theta = (&eye - &outer / (s * s)) * (t / s);
            let gg = &grad_theta * grad_theta.transpose();
            let delta = theta - r;
            // ρ² as a function g(δ): intrinsic δ², extrinsic 2 - 2 cos δ
            let (g1, g2) = match kind {
                LossKind::Intrinsic => (2.0 * delta, 2.0),
                _ => (2.0 * delta.sin(), 2.0 * delta.cos()),
            };
            Some(PointDerivatives {
                grad_axis: &grad_theta * g1,
                grad_radius: -g1,
                hess_axis: gg * g2 + hess_theta * g1,
                hess_cross: &grad_theta * (-g2),
                hess_radius: g2,
            })
        }
        LossKind::NaiveExtrinsic => {
            let d = 2.0 * (angle_slices(x.as_slice(), c.as_slice()) / 2.0).sin();
            if d <= POLE_TOLERANCE {
                return None;
            }
            let e = chordal_radius(r);
            let delta = d - e;
            let grad_d = &a * (-1.0 / d);
            let hess_d = &eye * (t / d) - &outer / (d * d * d);
            let (sh, ch) = (r / 2.0).sin_cos();
            Some(PointDerivatives {
                grad_axis: &grad_d * (2.0 * delta),
                grad_radius: -2.0 * delta * ch,
                hess_axis: (&grad_d * grad_d.transpose()) * 2.0 + hess_d * (2.0 * delta),
                hess_cross: &grad_d * (-2.0 * ch),
                hess_radius: 2.0 * ch * ch + delta * sh,
            })
        }
    }
}

/// Accumulates K-averaged derivatives of one observation tuple into
/// `grad` (length ν) and `hess` (ν × ν, upper triangle plus diagonal).
fn observation_terms(
    kind: LossKind,
    frame: &TangentFrame,
    obs_index: usize,
    obs: &[UnitVector],
    radii: &[f64],
    mut sink: impl FnMut(usize, usize, f64),
    mut grad_sink: impl FnMut(usize, f64),
) -> Result<()> {
    let m = frame.dim();
    let k = radii.len() as f64;
    for (j, x) in obs.iter().enumerate() {
        let pd = point_derivatives(kind, frame, x, radii[j]).ok_or(Error::NonSmooth {
            obs: obs_index,
            group: j,
        })?;
        for a in 0..m {
            grad_sink(a, pd.grad_axis[a] / k);
            for b in a..m {
                sink(a, b, pd.hess_axis[(a, b)] / k);
            }
            sink(a, m + j, pd.hess_cross[a] / k);
        }
        grad_sink(m + j, pd.grad_radius / k);
        sink(m + j, m + j, pd.hess_radius / k);
    }
    Ok(())
}

fn symmetric_from_upper(nu: usize, upper: &[f64]) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(nu, nu);
    for a in 0..nu {
        for b in a..nu {
            h[(a, b)] = upper[a * nu + b];
            h[(b, a)] = upper[a * nu + b];
        }
    }
    h
}

/// Gradient and Hessian of the objective in the chart anchored at `p`.
pub fn objective_derivatives(
    kind: LossKind,
    data: &PolysphereSample,
    p: &SubsphereParams,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_sample(data, p)?;
    let frame = TangentFrame::at(p.center());
    objective_derivatives_in(kind, data, &frame, p.radii())
}

pub(crate) fn objective_derivatives_in(
    kind: LossKind,
    data: &PolysphereSample,
    frame: &TangentFrame,
    radii: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let nu = frame.dim() + radii.len();
    let mut grad = VecSum::new(nu);
    let mut hess = VecSum::new(nu * nu);
    for (i, obs) in data.observations().enumerate() {
        observation_terms(
            kind,
            frame,
            i,
            obs,
            radii,
            |a, b, v| hess.add(a * nu + b, v),
            |a, v| grad.add(a, v),
        )?;
    }
    let n = data.n() as f64;
    let g = DVector::from_vec(grad.sums()) / n;
    let h = symmetric_from_upper(nu, &hess.sums()) / n;
    Ok((g, h))
}

pub fn objective_gradient(kind: LossKind, data: &PolysphereSample, p: &SubsphereParams) -> Result<DVector<f64>> {
    objective_derivatives(kind, data, p).map(|(g, _)| g)
}

pub fn objective_hessian(kind: LossKind, data: &PolysphereSample, p: &SubsphereParams) -> Result<DMatrix<f64>> {
    objective_derivatives(kind, data, p).map(|(_, h)| h)
}

/// Per-observation gradients `∇ρ²(X_i, p)` and Hessians `Hρ²(X_i, p)` of the
/// K-averaged squared residual, in the chart anchored at `p`.
pub fn observation_derivatives(
    kind: LossKind,
    data: &PolysphereSample,
    p: &SubsphereParams,
) -> Result<Vec<(DVector<f64>, DMatrix<f64>)>> {
    check_sample(data, p)?;
    let frame = TangentFrame::at(p.center());
    let nu = p.nu();
    data.observations()
        .enumerate()
        .map(|(i, obs)| {
            let mut g = DVector::zeros(nu);
            let mut upper = vec![0.0; nu * nu];
            observation_terms(
                kind,
                &frame,
                i,
                obs,
                p.radii(),
                |a, b, v| upper[a * nu + b] += v,
                |a, v| g[a] += v,
            )?;
            Ok((g, symmetric_from_upper(nu, &upper)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::RandomSeed;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn random_unit(rng: &mut impl Rng, dim: usize) -> UnitVector {
        UnitVector::new(DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    fn on_subsphere(c: &UnitVector, r: f64, phi: f64) -> UnitVector {
        let f = TangentFrame::at(c);
        let mut dir = DVector::zeros(f.dim());
        dir[0] = phi.cos();
        if f.dim() > 1 {
            dir[1] = phi.sin();
        }
        UnitVector::new(c.coords() * r.cos() + f.basis() * dir * r.sin()).unwrap()
    }

    /// Sample whose points sit at least 0.2 rad from either pole of `c`.
    fn smooth_sample(rng: &mut impl Rng, c: &UnitVector, n: usize, k: usize) -> PolysphereSample {
        let obs = (0..n)
            .map(|_| {
                (0..k)
                    .map(|_| loop {
                        let x = random_unit(rng, c.ambient_dim());
                        if x.dot(c).abs() < 0.98 {
                            break x;
                        }
                    })
                    .collect()
            })
            .collect();
        PolysphereSample::new(obs).unwrap()
    }

    /// Objective at the chart point `u` around `p`; the finite-difference
    /// oracle only sees objective values.
    fn chart_objective(kind: LossKind, data: &PolysphereSample, p: &SubsphereParams, u: &DVector<f64>) -> f64 {
        let m = p.m();
        let frame = TangentFrame::at(p.center());
        let c = frame.exp(&u.rows(0, m).into_owned());
        let radii = p.radii().iter().enumerate().map(|(j, r)| r + u[m + j]).collect();
        objective(kind, data, &SubsphereParams::new(c, radii).unwrap()).unwrap().total
    }

    fn fd_gradient(kind: LossKind, data: &PolysphereSample, p: &SubsphereParams, h: f64) -> DVector<f64> {
        let nu = p.nu();
        DVector::from_fn(nu, |a, _| {
            let mut up = DVector::zeros(nu);
            up[a] = h;
            let down = -&up;
            (chart_objective(kind, data, p, &up) - chart_objective(kind, data, p, &down)) / (2.0 * h)
        })
    }

    fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        diff / scale
    }

    #[test]
    fn names_round_trip() {
        for kind in LossKind::ALL {
            assert_eq!(kind.name().parse::<LossKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
            assert_eq!(serde_json::from_str::<LossKind>(&json).unwrap(), kind);
        }
        assert!("geodesic".parse::<LossKind>().is_err());
    }

    #[test]
    fn residual_zero_on_subsphere() {
        let mut rng = RandomSeed(1).rng();
        for _ in 0..500 {
            let c = random_unit(&mut rng, 3);
            let r = rng.random_range(0.05..PI - 0.05);
            let x = on_subsphere(&c, r, rng.random_range(0.0..2.0 * PI));
            for kind in LossKind::ALL {
                assert!(residual_distance(kind, &x, &c, r).unwrap() < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn residual_positive_off_subsphere() {
        let c = UnitVector::basis(3, 2);
        let x = on_subsphere(&c, 1.0, 0.3);
        for kind in LossKind::ALL {
            assert!(residual_distance(kind, &x, &c, 0.7).unwrap() > 1e-3);
        }
    }

    #[test]
    fn slicing_in_polar_configuration() {
        let x = UnitVector::from_slice(&[0.0, 1.0]).unwrap();
        let c = UnitVector::from_slice(&[0.0, 1.0]).unwrap();
        let d = residual_distance(LossKind::Slicing, &x, &c, PI / 4.0).unwrap();
        assert!((d - (1.0 - FRAC_1_SQRT_2)).abs() < 1e-15);
    }

    #[test]
    fn slicing_matches_half_squared_chord_gap() {
        let mut rng = RandomSeed(2).rng();
        for _ in 0..10_000 {
            let x = random_unit(&mut rng, 3);
            let c = random_unit(&mut rng, 3);
            let r = rng.random_range(1e-3..PI - 1e-3);
            let chord2 = (x.coords() - c.coords()).norm_squared();
            let re = chordal_radius(r);
            let alt = 0.5 * (chord2 - re * re).abs();
            let d = residual_distance(LossKind::Slicing, &x, &c, r).unwrap();
            assert!((d - alt).abs() < 1e-12);
            // L_S = L_0 / 4
            assert!((d * d - (chord2 - re * re).powi(2) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extrinsic_matches_closed_form_and_projection() {
        let mut rng = RandomSeed(3).rng();
        for _ in 0..10_000 {
            let x = random_unit(&mut rng, 3);
            let c = random_unit(&mut rng, 3);
            let r = rng.random_range(1e-3..PI - 1e-3);
            let d = residual_distance(LossKind::Extrinsic, &x, &c, r).unwrap();
            let t = x.dot(&c);
            let closed = (2.0 - 2.0 * (t * r.cos() + (1.0 - t * t).sqrt() * r.sin())).max(0.0).sqrt();
            let p = crate::sphere::project_to_subsphere(&x, &c, r).unwrap();
            let proj = (x.coords() - p.coords()).norm();
            assert!((d - proj).abs() < 1e-10);
            assert!((d - closed).abs() < 1e-7);
        }
        let c = UnitVector::basis(3, 0);
        assert_eq!(residual_distance(LossKind::Extrinsic, &c, &c, 1.0), Err(Error::PoleProjection));
        assert!(residual_distance(LossKind::Intrinsic, &c, &c, 1.0).is_ok());
        assert!(residual_distance(LossKind::NaiveExtrinsic, &c.neg(), &c, 1.0).is_ok());
    }

    #[test]
    fn extrinsic_and_intrinsic_agree_to_second_order() {
        // 4 sin²(δ/2) = δ² - δ⁴/12 + O(δ⁶)
        let c = UnitVector::basis(3, 2);
        for k in 1..40 {
            let delta = PI / 2.0 * 0.8f64.powi(k);
            let x = on_subsphere(&c, 1.0 + delta, 0.2);
            let li = residual_distance(LossKind::Intrinsic, &x, &c, 1.0).unwrap().powi(2);
            let le = residual_distance(LossKind::Extrinsic, &x, &c, 1.0).unwrap().powi(2);
            assert!((le - li).abs() <= li * li / 12.0 + 1e-15, "k={k}");
            assert!((le - li / 2.0).abs() > li / 4.0);
        }
    }

    #[test]
    fn flip_behaviour_of_residuals() {
        let mut rng = RandomSeed(4).rng();
        for _ in 0..10_000 {
            let x = random_unit(&mut rng, 3);
            let c = random_unit(&mut rng, 3);
            let r = rng.random_range(1e-3..PI - 1e-3);
            for kind in [LossKind::Intrinsic, LossKind::Extrinsic, LossKind::Slicing] {
                let a = residual_distance(kind, &x, &c, r).unwrap();
                let b = residual_distance(kind, &x, &c.neg(), PI - r).unwrap();
                assert!((a - b).abs() < 1e-12, "{kind}");
            }
        }
        // naive: invariant only where θ + r = π
        let c = UnitVector::basis(3, 2);
        let x = on_subsphere(&c, 0.5, 0.0);
        let a = residual_distance(LossKind::NaiveExtrinsic, &x, &c, 0.9).unwrap();
        let b = residual_distance(LossKind::NaiveExtrinsic, &x, &c.neg(), PI - 0.9).unwrap();
        assert!((a - b).abs() > 1e-3);
        let a = residual_distance(LossKind::NaiveExtrinsic, &x, &c, PI - 0.5).unwrap();
        let b = residual_distance(LossKind::NaiveExtrinsic, &x, &c.neg(), 0.5).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn distances_vanish_together() {
        // every residual is 1-Lipschitz in the radial offset δ, and for radii
        // bounded away from the poles δ is in turn bounded by 8× each residual
        let mut rng = RandomSeed(5).rng();
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            for _ in 0..1000 {
                let c = random_unit(&mut rng, 3);
                let r = rng.random_range(0.3..PI - 0.3);
                let delta = rng.random_range(-eps..eps);
                let x = on_subsphere(&c, r + delta, rng.random_range(0.0..2.0 * PI));
                let intrinsic = residual_distance(LossKind::Intrinsic, &x, &c, r).unwrap();
                for kind in LossKind::ALL {
                    let d = residual_distance(kind, &x, &c, r).unwrap();
                    assert!(d <= 1.0001 * eps, "{kind} {d} {eps}");
                    assert!(intrinsic <= 8.0 * d + 1e-12, "{kind} {d} {intrinsic}");
                }
            }
        }
    }

    fn noiseless_sample(c: &UnitVector, radii: &[f64], n: usize) -> PolysphereSample {
        let obs = (0..n)
            .map(|i| {
                radii
                    .iter()
                    .enumerate()
                    .map(|(j, r)| on_subsphere(c, *r, 2.0 * PI * (i as f64 + 0.3 * j as f64) / n as f64))
                    .collect()
            })
            .collect();
        PolysphereSample::new(obs).unwrap()
    }

    #[test]
    fn objective_basics() {
        let c = UnitVector::from_slice(&[0.2, -0.3, 0.9]).unwrap();
        let radii = [0.4, 1.1, 2.0];
        let data = noiseless_sample(&c, &radii, 12);
        let p = SubsphereParams::new(c.clone(), radii.to_vec()).unwrap();
        for kind in LossKind::ALL {
            let v = objective(kind, &data, &p).unwrap();
            assert!(v.total < 1e-24, "{kind}");
            let g = objective_gradient(kind, &data, &p).unwrap();
            assert!(g.amax() < 1e-8, "{kind} {g}");
        }
        let x = on_subsphere(&c, 0.9, 0.1);
        let single = PolysphereSample::new(vec![vec![x.clone()]]).unwrap();
        let q = SubsphereParams::new(c.clone(), vec![0.5]).unwrap();
        for kind in LossKind::ALL {
            let d = residual_distance(kind, &x, &c, 0.5).unwrap();
            assert!((objective(kind, &single, &q).unwrap().total - d * d).abs() < 1e-15);
        }
        let wrong = SubsphereParams::new(c, vec![0.5, 0.6]).unwrap();
        assert!(objective(LossKind::Slicing, &single, &wrong).is_err());
    }

    #[test]
    fn objective_mean_of_grid_and_flip_invariance() {
        let mut rng = RandomSeed(6).rng();
        for _ in 0..200 {
            let c = random_unit(&mut rng, 3);
            let data = smooth_sample(&mut rng, &c, 7, 3);
            let radii = (0..3).map(|_| rng.random_range(0.1..PI - 0.1)).collect();
            let p = SubsphereParams::new(c, radii).unwrap();
            for kind in LossKind::ALL {
                let v = objective(kind, &data, &p).unwrap();
                assert!((v.total - v.per_point.mean()).abs() < 1e-12);
                if kind.is_flip_invariant() {
                    let f = objective(kind, &data, &p.flip()).unwrap();
                    assert!((v.total - f.total).abs() < 1e-12, "{kind}");
                }
            }
        }
    }

    #[test]
    fn a1_violations_are_counted_not_rejected() {
        let c = UnitVector::basis(3, 2);
        let near = UnitVector::from_slice(&[1e-5, 0.0, 1.0]).unwrap();
        let data = PolysphereSample::new(vec![vec![near], vec![on_subsphere(&c, 1.0, 0.0)]]).unwrap();
        let p = SubsphereParams::new(c, vec![1.0]).unwrap();
        assert_eq!(objective(LossKind::Intrinsic, &data, &p).unwrap().a1_violations, 1);
        assert_eq!(objective(LossKind::Slicing, &data, &p).unwrap().a1_violations, 0);
    }

    #[test]
    fn slicing_radius_gradient_by_hand() {
        let mut rng = RandomSeed(7).rng();
        let c = random_unit(&mut rng, 3);
        for k in [1usize, 3] {
            let data = smooth_sample(&mut rng, &c, 9, k);
            let radii: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..PI - 0.2)).collect();
            let p = SubsphereParams::new(c.clone(), radii.clone()).unwrap();
            let g = objective_gradient(LossKind::Slicing, &data, &p).unwrap();
            for j in 0..k {
                let mean = data.group(j).map(|x| x.dot(&c) - radii[j].cos()).sum::<f64>() / 9.0;
                let by_hand = 2.0 * mean * radii[j].sin() / k as f64;
                assert!((g[2 + j] - by_hand).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RandomSeed(8).rng();
        for kind in LossKind::ALL {
            for trial in 0..100 {
                let dim = if trial % 4 == 0 { 4 } else { 3 };
                let c = random_unit(&mut rng, dim);
                let k = rng.random_range(1..4);
                let data = smooth_sample(&mut rng, &c, 8, k);
                let radii = (0..k).map(|_| rng.random_range(0.2..PI - 0.2)).collect();
                let p = SubsphereParams::new(c, radii).unwrap();
                let (g, h) = objective_derivatives(kind, &data, &p).unwrap();
                let fd = fd_gradient(kind, &data, &p, 1e-6);
                let err = relative_error(g.as_slice(), fd.as_slice());
                assert!(err < 1e-6, "{kind} gradient rel err {err}");
                assert!((&h - h.transpose()).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn hessians_match_finite_differences_of_gradient() {
        let mut rng = RandomSeed(9).rng();
        for kind in LossKind::ALL {
            for _ in 0..50 {
                let c = random_unit(&mut rng, 3);
                let k = rng.random_range(1..4);
                let data = smooth_sample(&mut rng, &c, 8, k);
                let radii: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..PI - 0.2)).collect();
                let p = SubsphereParams::new(c.clone(), radii.clone()).unwrap();
                let h = objective_hessian(kind, &data, &p).unwrap();
                let nu = p.nu();
                let step = 1e-5;
                let mut fd = DMatrix::zeros(nu, nu);
                for b in 0..nu {
                    let mut col = DVector::zeros(nu);
                    for a in 0..nu {
                        let mut ua = DVector::zeros(nu);
                        ua[a] = step;
                        let mut ub = DVector::zeros(nu);
                        ub[b] = step;
                        let f = |u: DVector<f64>| chart_objective(kind, &data, &p, &u);
                        col[a] = (f(&ua + &ub) - f(&ua - &ub) - f(-&ua + &ub) + f(-&ua - &ub)) / (4.0 * step * step);
                    }
                    fd.set_column(b, &col);
                }
                let err = relative_error(h.as_slice(), fd.as_slice());
                assert!(err < 1e-4, "{kind} hessian rel err {err}");
            }
        }
    }

    #[test]
    fn non_smooth_configurations_are_errors() {
        let c = UnitVector::basis(3, 2);
        let data = PolysphereSample::new(vec![vec![c.clone()], vec![on_subsphere(&c, 1.0, 0.0)]]).unwrap();
        let p = SubsphereParams::new(c.clone(), vec![1.0]).unwrap();
        for kind in [LossKind::Intrinsic, LossKind::Extrinsic, LossKind::NaiveExtrinsic] {
            assert_eq!(
                objective_gradient(kind, &data, &p).unwrap_err(),
                Error::NonSmooth { obs: 0, group: 0 }
            );
        }
        assert!(objective_gradient(LossKind::Slicing, &data, &p).is_ok());
        let antipodal = PolysphereSample::new(vec![vec![c.neg()]]).unwrap();
        assert!(objective_gradient(LossKind::NaiveExtrinsic, &antipodal, &p).is_ok());
        assert!(objective_gradient(LossKind::Intrinsic, &antipodal, &p).is_err());
    }

    #[test]
    fn observation_derivatives_average_to_objective_derivatives() {
        let mut rng = RandomSeed(10).rng();
        let c = random_unit(&mut rng, 3);
        let data = smooth_sample(&mut rng, &c, 11, 2);
        let p = SubsphereParams::new(c, vec![0.7, 2.1]).unwrap();
        for kind in LossKind::ALL {
            let per = observation_derivatives(kind, &data, &p).unwrap();
            let (g, h) = objective_derivatives(kind, &data, &p).unwrap();
            let gm = per.iter().fold(DVector::zeros(4), |acc, (g, _)| acc + g) / 11.0;
            let hm = per.iter().fold(DMatrix::zeros(4, 4), |acc, (_, h)| acc + h) / 11.0;
            assert!((gm - g).amax() < 1e-14);
            assert!((hm - h).amax() < 1e-14);
        }
    }
}

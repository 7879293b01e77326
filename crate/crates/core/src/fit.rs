//! Sample least-squares fits of concentric subspheres.
//!
//! The slicing loss has a closed-form minimizer: the axis is the eigenvector
//! of the pooled within-group scatter with the smallest eigenvalue, and each
//! radius follows from the mean projection onto that axis. The other losses
//! are minimized by descent on the axis alone, with the radii profiled out in
//! closed form at every trial axis. The descent starts from the slicing fit
//! plus seeded perturbations of it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PolysphereSample;
use crate::error::{invalid, Error, Result};
use crate::loss::{
    count_a1_violations, objective, objective_derivatives_in, objective_total, LossKind,
    ObjectiveValue, DEFAULT_A1_EPSILON,
};
use crate::params::{canonicalize, param_distance, SubsphereClass, SubsphereParams};
use crate::seed::RandomSeed;
use crate::sphere::{angle_slices, TangentFrame, UnitVector};
use crate::summation::{exact_mean, exact_sum, ExactSum};

/// Iterates keep radii inside `[RADIUS_MARGIN, π - RADIUS_MARGIN]`.
pub const RADIUS_MARGIN: f64 = 1e-6;

/// Smallest-eigenvalue ties closer than this (per point) are flagged.
pub const EIGEN_TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub loss: LossKind,
    pub max_iters: usize,
    /// Stop once the chart-gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop once an accepted step moves less than this in `param_distance`.
    pub step_tol: f64,
    /// Random restarts in addition to the eigen initializer.
    pub restarts: usize,
    /// Standard deviation, in radians, of restart perturbations.
    pub restart_scale: f64,
    pub seed: RandomSeed,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            loss: LossKind::Intrinsic,
            max_iters: 200,
            grad_tol: 1e-9,
            step_tol: 1e-12,
            restarts: 3,
            restart_scale: 0.3,
            seed: RandomSeed(0),
        }
    }
}

impl FitConfig {
    pub fn new(loss: LossKind) -> Self {
        FitConfig {
            loss,
            ..FitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0 && self.step_tol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if !(self.restart_scale > 0.0 && self.restart_scale.is_finite()) {
            return Err(invalid("restart_scale must be positive"));
        }
        Ok(())
    }
}

/// Where the winning descent started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initializer {
    Eigen,
    /// The eigen axis with its sign reversed; only tried for losses that are
    /// not flip-invariant.
    EigenFlipped,
    Restart(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub loss: LossKind,
    /// Canonical representative of the fitted class.
    pub params: SubsphereClass,
    /// The representative at which the objective was minimized. Differs from
    /// `params` only in sign convention, and only matters for losses that are
    /// not flip-invariant.
    pub minimizer: SubsphereParams,
    /// Objective at `minimizer`; the minimum over all starts.
    pub objective: ObjectiveValue,
    pub iterations: usize,
    pub converged: bool,
    pub initializer: Initializer,
    /// Points within the default A1 neighbourhood of `±ĉ`.
    pub a1_warnings: usize,
    /// The smallest scatter eigenvalue was not simple (eigen paths only).
    pub non_unique: bool,
    pub gradient_norm: f64,
    /// Objective after every accepted step of the winning start.
    pub trace: Vec<f64>,
}

fn clamp_radius(r: f64) -> f64 {
    r.clamp(RADIUS_MARGIN, PI - RADIUS_MARGIN)
}

/// Radii minimizing the objective for a fixed axis.
///
/// - intrinsic: mean angle to the axis
/// - extrinsic: `atan2(Σ sin θ, Σ cos θ)`
/// - slicing: `arccos` of the mean projection
/// - naive: `2 arcsin` of half the mean chord to the axis
pub fn profile_radii(kind: LossKind, data: &PolysphereSample, center: &UnitVector) -> Vec<f64> {
    let c = center.as_slice();
    (0..data.k())
        .map(|j| {
            let r = match kind {
                LossKind::Intrinsic => exact_mean(data.group(j).map(|x| angle_slices(x.as_slice(), c))),
                LossKind::Extrinsic => {
                    let mut sin = ExactSum::new();
                    let mut cos = ExactSum::new();
                    for x in data.group(j) {
                        let theta = angle_slices(x.as_slice(), c);
                        sin.add(theta.sin());
                        cos.add(theta.cos());
                    }
                    sin.sum().atan2(cos.sum())
                }
                LossKind::Slicing => exact_mean(data.group(j).map(|x| x.dot(center))).clamp(-1.0, 1.0).acos(),
                LossKind::NaiveExtrinsic => {
                    let half_chord = exact_mean(data.group(j).map(|x| (x.coords() - center.coords()).norm())) / 2.0;
                    2.0 * half_chord.clamp(0.0, 1.0).asin()
                }
            };
            clamp_radius(r)
        })
        .collect()
}

fn scatter(data: &PolysphereSample, centered: bool) -> DMatrix<f64> {
    let dim = data.m() + 1;
    let means: Vec<Vec<f64>> = (0..data.k())
        .map(|j| {
            (0..dim)
                .map(|a| if centered { exact_mean(data.group(j).map(|x| x.as_slice()[a])) } else { 0.0 })
                .collect()
        })
        .collect();
    let total = (data.n() * data.k()) as f64;
    let mut s = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in a..dim {
            let v = exact_sum(data.observations().flat_map(|obs| {
                obs.iter().enumerate().map(|(j, x)| {
                    let x = x.as_slice();
                    (x[a] - means[j][a]) * (x[b] - means[j][b])
                })
            })) / total;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    s
}

fn sign_normalized(v: DVector<f64>) -> DVector<f64> {
    match v.iter().find(|x| **x != 0.0) {
        Some(x) if *x < 0.0 => -v,
        _ => v,
    }
}

/// Smallest-eigenvalue eigenvector and whether it is tied.
fn smallest_eigenvector(s: DMatrix<f64>) -> (DVector<f64>, bool) {
    let eig = SymmetricEigen::new(s);
    let min = eig.eigenvalues.min();
    let mut tied: Vec<DVector<f64>> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] - min <= EIGEN_TIE_TOLERANCE)
        .map(|i| sign_normalized(eig.eigenvectors.column(i).into_owned()))
        .collect();
    let non_unique = tied.len() > 1;
    tied.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    (tied.pop().expect("eigenvalue set is non-empty"), non_unique)
}

fn eigen_result(data: &PolysphereSample, centered: bool) -> Result<FitResult> {
    let (v, non_unique) = smallest_eigenvector(scatter(data, centered));
    let center = UnitVector::new(v)?;
    let radii = if centered {
        profile_radii(LossKind::Slicing, data, &center)
    } else {
        vec![PI / 2.0; data.k()]
    };
    let minimizer = SubsphereParams::new(center, radii)?;
    let params = canonicalize(&minimizer);
    let minimizer = params.representative().clone();
    let obj = objective(LossKind::Slicing, data, &minimizer)?;
    let frame = TangentFrame::at(minimizer.center());
    let (g, _) = objective_derivatives_in(LossKind::Slicing, data, &frame, minimizer.radii())?;
    Ok(FitResult {
        loss: LossKind::Slicing,
        a1_warnings: count_a1_violations(data, minimizer.center(), DEFAULT_A1_EPSILON),
        trace: vec![obj.total],
        params,
        minimizer,
        objective: obj,
        iterations: 0,
        converged: true,
        initializer: Initializer::Eigen,
        non_unique,
        gradient_norm: g.norm(),
    })
}

/// Exact minimizer of the slicing objective.
pub fn fit_slicing(data: &PolysphereSample) -> Result<FitResult> {
    eigen_result(data, true)
}

/// Slicing fit restricted to great subspheres (all radii `π/2`).
pub fn fit_great_subsphere(data: &PolysphereSample) -> Result<FitResult> {
    eigen_result(data, false)
}

struct Descent {
    params: SubsphereParams,
    total: f64,
    iterations: usize,
    converged: bool,
    gradient_norm: f64,
    trace: Vec<f64>,
}

fn profiled(kind: LossKind, data: &PolysphereSample, center: UnitVector) -> Result<(SubsphereParams, f64)> {
    let radii = profile_radii(kind, data, &center);
    let p = SubsphereParams::new(center, radii)?;
    let total = objective_total(kind, data, &p)?;
    Ok((p, total))
}

/// Newton direction on the profiled axis objective, or steepest descent when
/// the profiled Hessian is not positive definite.
fn descent_direction(g: &DVector<f64>, h: &DMatrix<f64>, m: usize) -> DVector<f64> {
    let nu = g.len();
    let g1 = g.rows(0, m).into_owned();
    let mut hp = h.view((0, 0), (m, m)).into_owned();
    let mut profile_ok = true;
    for j in m..nu {
        let hjj = h[(j, j)];
        if hjj <= 0.0 {
            profile_ok = false;
            break;
        }
        let cross = h.view((0, j), (m, 1)).into_owned();
        hp -= &cross * cross.transpose() / hjj;
    }
    if profile_ok {
        if let Some(chol) = hp.cholesky() {
            let dir = -chol.solve(&g1);
            if dir.dot(&g1) < 0.0 && dir.iter().all(|v| v.is_finite()) {
                return dir;
            }
        }
    }
    -g1
}

const MAX_STEP: f64 = 0.5;
const ARMIJO: f64 = 1e-4;

fn descend(kind: LossKind, data: &PolysphereSample, start: UnitVector, cfg: &FitConfig) -> Result<Descent> {
    let m = data.m();
    let (mut p, mut total) = profiled(kind, data, start)?;
    let mut trace = vec![total];
    let mut iterations = 0;
    let mut gradient_norm;
    loop {
        let frame = TangentFrame::at(p.center());
        let (g, h) = objective_derivatives_in(kind, data, &frame, p.radii())?;
        gradient_norm = g.norm();
        if gradient_norm <= cfg.grad_tol || iterations >= cfg.max_iters {
            break;
        }
        let g1 = g.rows(0, m).into_owned();
        let mut dir = descent_direction(&g, &h, m);
        let len = dir.norm();
        if len > MAX_STEP {
            dir *= MAX_STEP / len;
        }
        let slope = g1.dot(&dir);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = frame.exp(&(&dir * alpha));
            if let Ok((q, f)) = profiled(kind, data, trial) {
                if f <= total + ARMIJO * alpha * slope && f <= total {
                    accepted = Some((q, f));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((q, f)) = accepted else {
            break;
        };
        iterations += 1;
        let step = param_distance(&p, &q)?;
        p = q;
        total = f;
        trace.push(total);
        if step < cfg.step_tol {
            let frame = TangentFrame::at(p.center());
            gradient_norm = objective_derivatives_in(kind, data, &frame, p.radii())?.0.norm();
            break;
        }
    }
    Ok(Descent {
        params: p,
        total,
        iterations,
        converged: gradient_norm <= cfg.grad_tol,
        gradient_norm,
        trace,
    })
}

/// Least-squares fit under `config.loss`.
///
/// Restarts run in parallel; the winner is the lowest objective with ties
/// going to the earliest start, so the result does not depend on scheduling.
pub fn fit(data: &PolysphereSample, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let kind = config.loss;
    if kind == LossKind::Slicing {
        return fit_slicing(data);
    }
    let eigen = fit_slicing(data)?;
    let axis = eigen.minimizer.center().clone();
    let frame = TangentFrame::at(&axis);
    let mut starts = vec![(Initializer::Eigen, axis.clone())];
    if !kind.is_flip_invariant() {
        starts.push((Initializer::EigenFlipped, axis.neg()));
    }
    for k in 0..config.restarts {
        let mut rng = config.seed.derive(&[0x5EED, k as u64]).rng();
        let z = DVector::from_fn(data.m(), |_, _| StandardNormal.sample(&mut rng));
        starts.push((Initializer::Restart(k), frame.exp(&(z * config.restart_scale))));
    }
    let runs: Vec<(Initializer, Result<Descent>)> = starts
        .into_par_iter()
        .map(|(init, c)| (init, descend(kind, data, c, config)))
        .collect();
    let mut best: Option<(Initializer, Descent)> = None;
    let mut first_error = None;
    for (init, run) in runs {
        match run {
            Ok(d) => {
                if best.as_ref().is_none_or(|(_, b)| d.total < b.total) {
                    best = Some((init, d));
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let Some((initializer, d)) = best else {
        return Err(first_error.unwrap_or(Error::InvalidInput("no starting points".into())));
    };
    let obj = objective(kind, data, &d.params)?;
    Ok(FitResult {
        loss: kind,
        params: canonicalize(&d.params),
        a1_warnings: count_a1_violations(data, d.params.center(), DEFAULT_A1_EPSILON),
        minimizer: d.params,
        objective: obj,
        iterations: d.iterations,
        converged: d.converged,
        initializer,
        non_unique: false,
        gradient_norm: d.gradient_norm,
        trace: d.trace,
    })
}

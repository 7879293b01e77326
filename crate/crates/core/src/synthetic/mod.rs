//! Seeded synthetic samples from the rotational model and from noisy
//! concentric subspheres.
//!
//! In the rotational model observation `i` draws one angle `θ_i` and rotates
//! every base point `μ_j` by it about the true axis. In the noisy-subsphere
//! model each point sits at an independent uniform position on its circle.
//! Noise is then applied to each point separately.

pub mod mc;
mod vmf;

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use mc::{mc_study, McConfig, McReport};
pub use vmf::sample_vmf;

use crate::data::PolysphereSample;
use crate::error::{invalid, Error, Result};
use crate::params::SubsphereParams;
use crate::seed::RandomSeed;
use crate::sphere::{rotation_fixing_axis, TangentFrame, UnitVector};

/// Draws per point before A1 truncation is declared infeasible.
pub const MAX_REJECTIONS: usize = 1_000_000;

const TAG_ANGLE: u64 = 1;
const TAG_NOISE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    /// One uniform angle per observation, shared by all groups.
    #[default]
    RotationalModel,
    /// Independent uniform positions on each subsphere.
    NoisySubsphere,
}

/// Per-group noise parameters; a single value applies to every group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Noise {
    /// Isotropic Gaussian in the tangent space, pushed through `Exp`; `sigma`
    /// is the per-axis standard deviation in radians.
    TangentGaussian { sigma: Vec<f64> },
    VonMisesFisher { kappa: Vec<f64> },
}

impl Noise {
    pub fn gaussian(sigma: f64) -> Self {
        Noise::TangentGaussian { sigma: vec![sigma] }
    }

    pub fn vmf(kappa: f64) -> Self {
        Noise::VonMisesFisher { kappa: vec![kappa] }
    }

    fn values(&self) -> &[f64] {
        match self {
            Noise::TangentGaussian { sigma } => sigma,
            Noise::VonMisesFisher { kappa } => kappa,
        }
    }

    fn value(&self, j: usize) -> f64 {
        let v = self.values();
        v[j % v.len()]
    }

    fn apply(&self, j: usize, y: &UnitVector, rng: &mut impl Rng) -> UnitVector {
        match self {
            Noise::TangentGaussian { .. } => {
                let sigma = self.value(j);
                let z = DVector::from_fn(y.sphere_dim(), |_, _| rng.sample::<f64, _>(StandardNormal) * sigma);
                TangentFrame::at(y).exp(&z)
            }
            Noise::VonMisesFisher { .. } => sample_vmf(y, self.value(j), rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    pub truth: SubsphereParams,
    #[serde(default)]
    pub mode: GenerationMode,
    pub noise: Noise,
    /// Requires a single noise value shared by all groups.
    #[serde(default = "default_true")]
    pub iid_across_j: bool,
    /// Redraw any point within this angle of `±c₀`.
    #[serde(default)]
    pub a1_epsilon: Option<f64>,
    /// Rotational-model base points; defaults to equispaced longitudes.
    #[serde(default)]
    pub base_points: Option<Vec<UnitVector>>,
    pub seed: RandomSeed,
}

fn default_true() -> bool {
    true
}

impl GeneratorSpec {
    pub fn new(truth: SubsphereParams, n: usize, noise: Noise, seed: RandomSeed) -> Self {
        GeneratorSpec {
            m: truth.m(),
            k: truth.k(),
            n,
            truth,
            mode: GenerationMode::RotationalModel,
            noise,
            iid_across_j: true,
            a1_epsilon: None,
            base_points: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.n == 0 {
            return Err(invalid("m, K and n must be positive"));
        }
        if self.truth.m() != self.m || self.truth.k() != self.k {
            return Err(invalid(format!(
                "truth has m = {}, K = {}, spec says m = {}, K = {}",
                self.truth.m(),
                self.truth.k(),
                self.m,
                self.k
            )));
        }
        let values = self.noise.values();
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("noise parameters must be positive"));
        }
        if self.iid_across_j && values.len() != 1 {
            return Err(invalid("iid_across_j needs exactly one noise value"));
        }
        if !self.iid_across_j && values.len() != self.k {
            return Err(invalid(format!("expected {} per-group noise values, got {}", self.k, values.len())));
        }
        if let Some(eps) = self.a1_epsilon {
            if !(0.0..PI / 4.0).contains(&eps) {
                return Err(invalid("a1_epsilon must lie in [0, π/4)"));
            }
        }
        if let Some(points) = &self.base_points {
            if points.len() != self.k {
                return Err(invalid(format!("expected {} base points, got {}", self.k, points.len())));
            }
            for (mu, r) in points.iter().zip(self.truth.radii()) {
                if mu.ambient_dim() != self.m + 1 {
                    return Err(Error::DimensionMismatch {
                        expected: self.m + 1,
                        found: mu.ambient_dim(),
                    });
                }
                if (mu.dot(self.truth.center()).clamp(-1.0, 1.0).acos() - r).abs() > 1e-9 {
                    return Err(invalid("base point does not lie on its subsphere"));
                }
            }
        }
        Ok(())
    }
}

/// A generated sample with the quantities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub sample: PolysphereSample,
    pub truth: SubsphereParams,
    pub base_points: Vec<UnitVector>,
    /// Rotation angle of each observation (rotational model only).
    pub angles: Vec<f64>,
}

/// Point on `[c, r]` at the given tangent direction (unit, ambient).
fn on_subsphere(c: &UnitVector, r: f64, direction: &DVector<f64>) -> UnitVector {
    UnitVector::new(c.coords() * r.cos() + direction * r.sin()).expect("point on subsphere is nonzero")
}

/// Base points at longitudes `2πj/K` in the tangent frame of the axis.
pub fn equispaced_base_points(truth: &SubsphereParams) -> Vec<UnitVector> {
    let frame = TangentFrame::at(truth.center());
    let k = truth.k();
    truth
        .radii()
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let phi = 2.0 * PI * j as f64 / k as f64;
            let mut t = DVector::zeros(truth.m());
            t[0] = phi.cos();
            if truth.m() > 1 {
                t[1] = phi.sin();
            } else {
                t[0] = 1.0;
            }
            on_subsphere(truth.center(), *r, &(frame.basis() * t))
        })
        .collect()
}

fn near_axis(x: &UnitVector, c: &UnitVector, eps: f64) -> bool {
    let t = x.dot(c).abs().min(1.0);
    t.acos() < eps
}

fn uniform_direction(frame: &TangentFrame, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(frame.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 0.0 {
            return frame.basis() * (g / n);
        }
    }
}

/// Draws a sample. Each point has its own derived random stream, so the
/// output does not depend on how the work is scheduled.
pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    let truth = &spec.truth;
    let c = truth.center();
    let base = spec.base_points.clone().unwrap_or_else(|| equispaced_base_points(truth));
    let frame = TangentFrame::at(c);
    let eps = spec.a1_epsilon.unwrap_or(0.0);
    let rows: Vec<Result<(f64, Vec<UnitVector>)>> = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let angle_seed = spec.seed.derive(&[TAG_ANGLE, i as u64]);
            let theta = angle_seed.rng().random_range(0.0..2.0 * PI);
            let rotation = match spec.mode {
                GenerationMode::RotationalModel => Some(rotation_fixing_axis(c, theta, angle_seed.derive(&[0]))),
                GenerationMode::NoisySubsphere => None,
            };
            let mut obs = Vec::with_capacity(spec.k);
            for j in 0..spec.k {
                let mut rng = spec.seed.derive(&[TAG_NOISE, i as u64, j as u64]).rng();
                let mut accepted = None;
                for _ in 0..MAX_REJECTIONS {
                    let y = match &rotation {
                        Some(rot) => rot.apply(&base[j]),
                        None => on_subsphere(c, truth.radii()[j], &uniform_direction(&frame, &mut rng)),
                    };
                    let x = spec.noise.apply(j, &y, &mut rng);
                    if eps == 0.0 || !near_axis(&x, c, eps) {
                        accepted = Some(x);
                        break;
                    }
                }
                obs.push(accepted.ok_or(Error::TruncationInfeasible)?);
            }
            Ok((theta, obs))
        })
        .collect();
    let mut angles = Vec::with_capacity(spec.n);
    let mut observations = Vec::with_capacity(spec.n);
    for row in rows {
        let (theta, obs) = row?;
        angles.push(theta);
        observations.push(obs);
    }
    if spec.mode == GenerationMode::NoisySubsphere {
        angles.clear();
    }
    Ok(Generated {
        sample: PolysphereSample::new(observations)?,
        truth: truth.clone(),
        base_points: base,
        angles,
    })
}

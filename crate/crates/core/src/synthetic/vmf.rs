//! von Mises-Fisher sampling on `S^m`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::sphere::{TangentFrame, UnitVector};

/// Cosine of the angle to the mean direction.
///
/// On `S^2` the inverse CDF is available in closed form; elsewhere Wood's
/// rejection sampler is used.
pub(crate) fn sample_cosine(m: usize, kappa: f64, rng: &mut impl Rng) -> f64 {
    if m == 2 {
        let u: f64 = rng.random();
        // 1 + ln(u + (1 - u) e^{-2κ}) / κ, arranged to stay accurate for large κ
        let w = 1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa;
        return w.clamp(-1.0, 1.0);
    }
    wood_cosine(m, kappa, rng)
}

pub(crate) fn wood_cosine(m: usize, kappa: f64, rng: &mut impl Rng) -> f64 {
    let d = m as f64;
    let b = d / (2.0 * kappa + (4.0 * kappa * kappa + d * d).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + d * (1.0 - x0 * x0).ln();
    let beta = Beta::new(d / 2.0, d / 2.0).expect("positive shape parameters");
    loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + d * (1.0 - x0 * w).ln() - c >= u.ln() {
            return w.clamp(-1.0, 1.0);
        }
    }
}

/// One draw from `vMF(mean, kappa)`.
pub fn sample_vmf(mean: &UnitVector, kappa: f64, rng: &mut impl Rng) -> UnitVector {
    let m = mean.sphere_dim();
    let w = sample_cosine(m, kappa, rng);
    let frame = TangentFrame::at(mean);
    let dir = loop {
        let g = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            break frame.basis() * (g / norm);
        }
    };
    let x = mean.coords() * w + dir * (1.0 - w * w).max(0.0).sqrt();
    UnitVector::new(x).expect("vMF draw is nonzero")
}

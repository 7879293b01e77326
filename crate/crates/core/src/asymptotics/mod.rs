//! Plug-in asymptotic inference at a fitted class.
//!
//! With per-observation chart gradients `g_i` and Hessians `H_i` of the
//! K-averaged squared residual at the fit, `Â` is the mean of the `H_i`, `Σ̂`
//! the sample covariance (divisor `n - 1`) of the `g_i`, and the covariance of
//! the chart coordinates of the estimate is `Â⁻¹ Σ̂ Â⁻ᵀ / n`. Regions and tests
//! for the axis use its leading `m × m` block.

pub mod chi2;
mod chart;

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use chart::{chart_at, ProductChart};

use crate::data::PolysphereSample;
use crate::error::{invalid, Error, Result};
use crate::loss::{objective_total, observation_derivatives, LossKind};
use crate::params::{SubsphereClass, SubsphereParams};
use crate::sphere::{geodesic_distance, TangentFrame, UnitVector};
use crate::summation::{exact_sum, VecSum};
use chi2::{chi2_quantile, chi2_sf};

/// `Â` with a condition number above this is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Serde adapter writing a matrix as a list of rows.
pub(crate) mod rows {
    use nalgebra::DMatrix;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix"));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticEstimate {
    pub chart: ProductChart,
    pub loss: LossKind,
    #[serde(rename = "A_hat", with = "rows")]
    pub a_hat: DMatrix<f64>,
    #[serde(rename = "Sigma_hat", with = "rows")]
    pub sigma_hat: DMatrix<f64>,
    #[serde(with = "rows")]
    pub sandwich: DMatrix<f64>,
    /// Mean per-observation gradient; zero at an exact stationary point.
    pub mean_gradient: Vec<f64>,
    pub condition_number: f64,
    pub n: usize,
    pub nu: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
}

impl AsymptoticEstimate {
    /// Leading `m × m` block of the sandwich, the covariance of the axis
    /// coordinates.
    pub fn axis_covariance(&self) -> DMatrix<f64> {
        self.sandwich.view((0, 0), (self.m, self.m)).into_owned()
    }

    pub fn fitted_axis(&self) -> &UnitVector {
        self.chart.anchor().center()
    }

    fn axis_precision(&self) -> Result<DMatrix<f64>> {
        self.axis_covariance()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::SingularCovariance)
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Estimate at a specific representative of the fitted class.
pub fn estimate_asymptotics_at(
    data: &PolysphereSample,
    p: &SubsphereParams,
    kind: LossKind,
) -> Result<AsymptoticEstimate> {
    let (n, nu) = (data.n(), p.nu());
    if n < nu + 1 {
        return Err(invalid(format!("need at least {} observations, got {n}", nu + 1)));
    }
    let terms = observation_derivatives(kind, data, p)?;
    let mut hess = VecSum::new(nu * nu);
    for (_, h) in &terms {
        for (idx, v) in h.iter().enumerate() {
            hess.add(idx, *v);
        }
    }
    let nf = n as f64;
    let a_hat = symmetrize(&(DMatrix::from_column_slice(nu, nu, &hess.sums()) / nf));
    let mean: Vec<f64> = (0..nu).map(|a| exact_sum(terms.iter().map(|(g, _)| g[a])) / nf).collect();
    let mut sigma_hat = DMatrix::zeros(nu, nu);
    for a in 0..nu {
        for b in a..nu {
            let v = exact_sum(terms.iter().map(|(g, _)| (g[a] - mean[a]) * (g[b] - mean[b]))) / (nf - 1.0);
            sigma_hat[(a, b)] = v;
            sigma_hat[(b, a)] = v;
        }
    }
    let condition = condition_number(&a_hat);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularHessian { condition });
    }
    let a_inv = a_hat
        .clone()
        .try_inverse()
        .ok_or(Error::SingularHessian { condition })?;
    let sandwich = symmetrize(&(&a_inv * &sigma_hat * a_inv.transpose() / nf));
    Ok(AsymptoticEstimate {
        chart: chart_at(p),
        loss: kind,
        a_hat,
        sigma_hat,
        sandwich,
        mean_gradient: mean,
        condition_number: condition,
        n,
        nu,
        m: p.m(),
        k: p.k(),
    })
}

/// Plug-in estimate at the fitted class.
///
/// For flip-invariant losses the canonical representative is used. The naive
/// extrinsic loss distinguishes the two members, so the one with the lower
/// objective is used.
pub fn estimate_asymptotics(
    data: &PolysphereSample,
    fitted: &SubsphereClass,
    kind: LossKind,
) -> Result<AsymptoticEstimate> {
    let mut p = fitted.representative().clone();
    if !kind.is_flip_invariant() {
        let flipped = p.flip();
        if objective_total(kind, data, &flipped)? < objective_total(kind, data, &p)? {
            p = flipped;
        }
    }
    estimate_asymptotics_at(data, &p, kind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub level: f64,
    pub chi2_quantile: f64,
    pub dof: usize,
    /// The fitted axis, where the region is centered.
    pub center: UnitVector,
    /// `V₁₁⁻¹`; the region is `{u : uᵀ V₁₁⁻¹ u ≤ chi2_quantile}` in axis
    /// chart coordinates.
    #[serde(with = "rows")]
    pub ellipsoid_matrix: DMatrix<f64>,
    /// Boundary mapped onto the sphere: a closed polyline for `m = 2`, the
    /// endpoints of the principal semi-axes otherwise.
    pub boundary_points_on_sphere: Vec<UnitVector>,
}

const BOUNDARY_POINTS: usize = 64;

impl ConfidenceRegion {
    /// Whether the class of axes `±c0` lies in the region.
    pub fn covers(&self, c0: &UnitVector) -> Result<bool> {
        let u = axis_coordinates(&self.center, c0)?;
        Ok((u.transpose() * &self.ellipsoid_matrix * &u)[(0, 0)] <= self.chi2_quantile)
    }
}

fn axis_coordinates(center: &UnitVector, c0: &UnitVector) -> Result<DVector<f64>> {
    let aligned = if center.dot(c0) < 0.0 { c0.neg() } else { c0.clone() };
    if geodesic_distance(center, &aligned)? >= FRAC_PI_2 {
        return Err(Error::OutsideChart);
    }
    TangentFrame::at(center).log(&aligned)
}

pub fn axis_confidence_region(est: &AsymptoticEstimate, level: f64) -> Result<ConfidenceRegion> {
    let q = chi2_quantile(level, est.m)?;
    let v = est.axis_covariance();
    let precision = est.axis_precision()?;
    let frame = est.chart.frame();
    let eig = SymmetricEigen::new(v);
    let boundary = if est.m == 2 {
        let l = est.axis_covariance().cholesky().ok_or(Error::SingularCovariance)?.unpack();
        (0..BOUNDARY_POINTS)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / BOUNDARY_POINTS as f64;
                let u = &l * DVector::from_vec(vec![phi.cos(), phi.sin()]) * q.sqrt();
                frame.exp(&u)
            })
            .collect()
    } else {
        let mut points = Vec::with_capacity(2 * est.m);
        for (i, lambda) in eig.eigenvalues.iter().enumerate() {
            let axis = eig.eigenvectors.column(i) * (lambda.max(0.0) * q).sqrt();
            points.push(frame.exp(&axis.clone_owned()));
            points.push(frame.exp(&(-axis)));
        }
        points
    };
    Ok(ConfidenceRegion {
        level,
        chi2_quantile: q,
        dof: est.m,
        center: est.fitted_axis().clone(),
        ellipsoid_matrix: symmetrize(&precision),
        boundary_points_on_sphere: boundary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Wald test of `H₀: [c] = [c0]` using the axis block of the sandwich.
pub fn axis_wald_test(est: &AsymptoticEstimate, c0: &UnitVector) -> Result<TestResult> {
    if c0.ambient_dim() != est.m + 1 {
        return Err(Error::DimensionMismatch {
            expected: est.m + 1,
            found: c0.ambient_dim(),
        });
    }
    let u = axis_coordinates(est.fitted_axis(), c0)?;
    let precision = est.axis_precision()?;
    let statistic = (u.transpose() * precision * &u)[(0, 0)].max(0.0);
    Ok(TestResult {
        statistic,
        dof: est.m,
        p_value: chi2_sf(statistic, est.m),
    })
}

/// The plug-in matrices split into axis and radius blocks, in the
/// convention where the objective is summed over groups rather than
/// averaged and the axis blocks carry an explicit factor `K`:
///
/// ```text
/// Σ = [ K Σ_φ1   Σ12 ]     A = [ K A_φ1   A12 ]
///     [ Σ12ᵀ     Σ22 ]         [ A12ᵀ     A22 ]
/// ```
///
/// Under that convention `Σ = K² Σ̂` and `A = K Â`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryBlocks {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(with = "rows")]
    pub sigma_phi1: DMatrix<f64>,
    #[serde(with = "rows")]
    pub sigma12: DMatrix<f64>,
    #[serde(with = "rows")]
    pub sigma22: DMatrix<f64>,
    #[serde(with = "rows")]
    pub a_phi1: DMatrix<f64>,
    #[serde(with = "rows")]
    pub a12: DMatrix<f64>,
    #[serde(with = "rows")]
    pub a22: DMatrix<f64>,
    /// Largest off-diagonal magnitude of `Σ22`; near zero when the errors
    /// are i.i.d. across groups.
    pub sigma22_max_offdiag: f64,
    pub a22_max_offdiag: f64,
}

fn max_offdiag(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                best = best.max(m[(i, j)].abs());
            }
        }
    }
    best
}

pub fn corollary_blocks(est: &AsymptoticEstimate) -> CorollaryBlocks {
    let (m, k) = (est.m, est.k);
    let kf = k as f64;
    let block = |x: &DMatrix<f64>, r: usize, c: usize, nr: usize, nc: usize| x.view((r, c), (nr, nc)).into_owned();
    let sigma22 = block(&est.sigma_hat, m, m, k, k) * (kf * kf);
    let a22 = block(&est.a_hat, m, m, k, k) * kf;
    CorollaryBlocks {
        k,
        sigma_phi1: block(&est.sigma_hat, 0, 0, m, m) * kf,
        sigma12: block(&est.sigma_hat, 0, m, m, k) * (kf * kf),
        a_phi1: block(&est.a_hat, 0, 0, m, m),
        a12: block(&est.a_hat, 0, m, m, k) * kf,
        sigma22_max_offdiag: max_offdiag(&sigma22),
        a22_max_offdiag: max_offdiag(&a22),
        sigma22,
        a22,
    }
}

impl CorollaryBlocks {
    /// `(Σ̂, Â)` rebuilt from the blocks.
    pub fn reassemble(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (m, k) = (self.sigma_phi1.nrows(), self.k);
        let kf = k as f64;
        let mut sigma = DMatrix::zeros(m + k, m + k);
        let mut a = DMatrix::zeros(m + k, m + k);
        sigma.view_mut((0, 0), (m, m)).copy_from(&(&self.sigma_phi1 / kf));
        sigma.view_mut((0, m), (m, k)).copy_from(&(&self.sigma12 / (kf * kf)));
        sigma.view_mut((m, 0), (k, m)).copy_from(&(self.sigma12.transpose() / (kf * kf)));
        sigma.view_mut((m, m), (k, k)).copy_from(&(&self.sigma22 / (kf * kf)));
        a.view_mut((0, 0), (m, m)).copy_from(&self.a_phi1);
        a.view_mut((0, m), (m, k)).copy_from(&(&self.a12 / kf));
        a.view_mut((m, 0), (k, m)).copy_from(&(self.a12.transpose() / kf));
        a.view_mut((m, m), (k, k)).copy_from(&(&self.a22 / kf));
        (sigma, a)
    }
}

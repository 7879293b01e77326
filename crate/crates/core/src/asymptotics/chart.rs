use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rows;
use crate::error::{Error, Result};
use crate::params::{SubsphereClass, SubsphereParams};
use crate::sphere::TangentFrame;

/// Exponential chart of `S^m × (0, π)^K` at an anchor.
///
/// The first `m` coordinates are the log of the center in the anchor's
/// tangent frame, the last `K` are radius offsets `r - r_anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChart", into = "RawChart")]
pub struct ProductChart {
    anchor: SubsphereParams,
    frame: TangentFrame,
}

#[derive(Serialize, Deserialize)]
struct RawChart {
    anchor: SubsphereParams,
    #[serde(with = "rows")]
    basis: DMatrix<f64>,
    nu: usize,
    m: usize,
    #[serde(rename = "K")]
    k: usize,
}

impl From<ProductChart> for RawChart {
    fn from(c: ProductChart) -> Self {
        RawChart {
            basis: c.basis(),
            nu: c.nu(),
            m: c.m(),
            k: c.k(),
            anchor: c.anchor,
        }
    }
}

impl TryFrom<RawChart> for ProductChart {
    type Error = Error;
    // the basis is a deterministic function of the anchor, so it is rebuilt
    fn try_from(raw: RawChart) -> Result<Self> {
        let chart = chart_at(&raw.anchor);
        if raw.nu != chart.nu() || raw.m != chart.m() || raw.k != chart.k() {
            return Err(Error::DimensionMismatch {
                expected: chart.nu(),
                found: raw.nu,
            });
        }
        Ok(chart)
    }
}

pub fn chart_at(p: &SubsphereParams) -> ProductChart {
    ProductChart {
        anchor: p.clone(),
        frame: TangentFrame::at(p.center()),
    }
}

impl ProductChart {
    pub fn anchor(&self) -> &SubsphereParams {
        &self.anchor
    }

    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }

    /// `m × (m+1)` matrix with orthonormal rows spanning `T_c S^m`.
    pub fn basis(&self) -> DMatrix<f64> {
        self.frame.basis().transpose()
    }

    pub fn m(&self) -> usize {
        self.anchor.m()
    }

    pub fn k(&self) -> usize {
        self.anchor.k()
    }

    pub fn nu(&self) -> usize {
        self.anchor.nu()
    }

    /// Chart coordinates of the representative `p` itself.
    pub fn params_to_chart(&self, p: &SubsphereParams) -> Result<DVector<f64>> {
        if p.k() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                found: p.k(),
            });
        }
        let axis = self.frame.log(p.center())?;
        let m = self.m();
        Ok(DVector::from_fn(self.nu(), |i, _| {
            if i < m {
                axis[i]
            } else {
                p.radii()[i - m] - self.anchor.radii()[i - m]
            }
        }))
    }

    /// Chart coordinates of the class member closest to the anchor.
    pub fn class_to_chart(&self, class: &SubsphereClass) -> Result<DVector<f64>> {
        self.params_to_chart(&class.aligned_with(self.anchor.center()))
    }

    pub fn chart_to_params(&self, v: &DVector<f64>) -> Result<SubsphereParams> {
        if v.len() != self.nu() {
            return Err(Error::DimensionMismatch {
                expected: self.nu(),
                found: v.len(),
            });
        }
        let m = self.m();
        let center = self.frame.exp(&v.rows(0, m).into_owned());
        let radii = self
            .anchor
            .radii()
            .iter()
            .enumerate()
            .map(|(j, r)| r + v[m + j])
            .collect();
        SubsphereParams::new(center, radii)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::param_distance;
    use crate::seed::RandomSeed;
    use crate::sphere::UnitVector;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn anchor() -> SubsphereParams {
        let c = UnitVector::from_slice(&[-0.2, 0.5, 0.4]).unwrap();
        SubsphereParams::new(c, vec![0.4, 1.2, 2.0]).unwrap()
    }

    #[test]
    fn anchor_maps_to_origin() {
        let chart = chart_at(&anchor());
        assert_eq!(chart.params_to_chart(&anchor()).unwrap(), DVector::zeros(5));
        assert_eq!(chart.nu(), 5);
    }

    #[test]
    fn basis_rows_orthonormal_and_orthogonal_to_center() {
        let chart = chart_at(&anchor());
        let b = chart.basis();
        assert_eq!(b.shape(), (2, 3));
        assert!((&b * b.transpose() - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!((&b * anchor().center().coords()).amax() < 1e-12);
    }

    #[test]
    fn round_trip_on_nearby_params() {
        let chart = chart_at(&anchor());
        let mut rng = RandomSeed(12).rng();
        for _ in 0..1000 {
            let v = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.1);
            let p = chart.chart_to_params(&v).unwrap();
            let back = chart.params_to_chart(&p).unwrap();
            assert!((back - &v).amax() < 1e-10);
            let again = chart.chart_to_params(&chart.params_to_chart(&p).unwrap()).unwrap();
            assert!(param_distance(&again, &p).unwrap() < 1e-10);
        }
    }

    #[test]
    fn radius_coordinates_are_offsets() {
        let chart = chart_at(&anchor());
        let p = SubsphereParams::new(anchor().center().clone(), vec![0.5, 1.0, 2.5]).unwrap();
        let v = chart.params_to_chart(&p).unwrap();
        assert_eq!(v[2], 0.5 - 0.4);
        assert_eq!(v[3], 1.0 - 1.2);
        assert_eq!(v[4], 2.5 - 2.0);
    }

    #[test]
    fn class_coordinates_ignore_representative() {
        let chart = chart_at(&anchor());
        let p = chart.chart_to_params(&DVector::from_vec(vec![0.1, -0.05, 0.02, 0.0, -0.1])).unwrap();
        let a = chart.class_to_chart(&p.canonicalize()).unwrap();
        let b = chart.class_to_chart(&p.flip().canonicalize()).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let chart = chart_at(&anchor());
        let json = serde_json::to_value(&chart).unwrap();
        assert_eq!(json["nu"], 5);
        assert_eq!(json["K"], 3);
        assert_eq!(json["basis"].as_array().unwrap().len(), 2);
        let back: ProductChart = serde_json::from_value(json).unwrap();
        assert_eq!(back, chart);
    }
}

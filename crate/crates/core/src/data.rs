use crate::error::{invalid, Error, Result};
use crate::sphere::UnitVector;

/// `n` observations on the polysphere `(S^m)^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolysphereSample {
    m: usize,
    k: usize,
    // row-major over (observation, group)
    points: Vec<UnitVector>,
}

impl PolysphereSample {
    /// Builds a sample from observation tuples; every tuple must have the
    /// same length and every point the same dimension.
    pub fn new(observations: Vec<Vec<UnitVector>>) -> Result<Self> {
        let first = observations
            .first()
            .ok_or_else(|| invalid("sample must contain at least one observation"))?;
        let k = first.len();
        if k == 0 {
            return Err(invalid("observations must contain at least one point"));
        }
        let dim = first[0].ambient_dim();
        let mut points = Vec::with_capacity(observations.len() * k);
        for obs in observations {
            if obs.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: obs.len(),
                });
            }
            for x in obs {
                if x.ambient_dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: x.ambient_dim(),
                    });
                }
                points.push(x);
            }
        }
        Ok(PolysphereSample {
            m: dim - 1,
            k,
            points,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.k
    }

    pub fn point(&self, obs: usize, group: usize) -> &UnitVector {
        &self.points[obs * self.k + group]
    }

    pub fn observation(&self, obs: usize) -> &[UnitVector] {
        &self.points[obs * self.k..(obs + 1) * self.k]
    }

    pub fn observations(&self) -> impl ExactSizeIterator<Item = &[UnitVector]> + '_ {
        self.points.chunks(self.k)
    }

    pub fn group(&self, group: usize) -> impl Iterator<Item = &UnitVector> + '_ {
        self.points.iter().skip(group).step_by(self.k)
    }

    /// Reorders observations; `order[i]` names the source of the new `i`-th.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: order.len(),
            });
        }
        let observations = order
            .iter()
            .map(|&i| self.observation(i).to_vec())
            .collect();
        Self::new(observations)
    }

    pub(crate) fn check_dims(&self, m: usize, k: usize) -> Result<()> {
        if self.m != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: self.m,
            });
        }
        if self.k != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: self.k,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_and_validation() {
        let a = UnitVector::basis(3, 0);
        let b = UnitVector::basis(3, 1);
        let s = PolysphereSample::new(vec![vec![a.clone(), b.clone()], vec![b.clone(), a.clone()]])
            .unwrap();
        assert_eq!((s.m(), s.k(), s.n()), (2, 2, 2));
        assert_eq!(s.point(1, 0), &b);
        assert_eq!(s.group(1).cloned().collect::<Vec<_>>(), vec![b.clone(), a.clone()]);
        let p = s.permuted(&[1, 0]).unwrap();
        assert_eq!(p.point(0, 0), &b);
        assert!(PolysphereSample::new(vec![]).is_err());
        assert!(PolysphereSample::new(vec![vec![a.clone()], vec![a.clone(), b]]).is_err());
        assert!(PolysphereSample::new(vec![vec![a], vec![UnitVector::basis(4, 0)]]).is_err());
    }
}

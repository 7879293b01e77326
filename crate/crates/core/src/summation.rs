//! Correctly rounded floating-point summation.
//!
//! Every reduction over observations goes through [`ExactSum`]. The result is
//! the exact sum rounded once, so it does not depend on the order in which
//! terms arrive. That makes fits bit-for-bit invariant under permutation of
//! the observations and independent of thread scheduling.

/// Shewchuk-style accumulator of non-overlapping partials.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
    // non-finite terms bypass the partials
    special: f64,
    count: usize,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        self.count += 1;
        if !value.is_finite() {
            self.special += value;
            return;
        }
        let mut x = value;
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn sum(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // half-way correction so the final rounding is exact
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.count as f64
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = ExactSum::new();
        acc.extend(iter);
        acc
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<ExactSum>().sum()
}

pub fn exact_mean<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<ExactSum>().mean()
}

/// Element-wise exact accumulation of fixed-length vectors.
#[derive(Debug, Clone)]
pub(crate) struct VecSum {
    slots: Vec<ExactSum>,
}

impl VecSum {
    pub fn new(len: usize) -> Self {
        Self {
            slots: vec![ExactSum::new(); len],
        }
    }

    pub fn add(&mut self, index: usize, value: f64) {
        self.slots[index].add(value);
    }

    pub fn sums(&self) -> Vec<f64> {
        self.slots.iter().map(ExactSum::sum).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cancels_catastrophically_large_terms() {
        let s = exact_sum([1e100, 1.0, -1e100, 1e-100]);
        assert_eq!(s, 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
    }

    #[test]
    fn empty_and_special() {
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
        assert!(exact_sum([1.0, f64::NAN]).is_nan());
        assert_eq!(exact_sum([1.0, f64::INFINITY]), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn order_independent(mut v in proptest::collection::vec(-1e6f64..1e6, 0..64), seed in any::<u64>()) {
            let forward = exact_sum(v.iter().copied());
            // deterministic shuffle
            let mut state = seed | 1;
            for i in (1..v.len()).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                v.swap(i, (state % (i as u64 + 1)) as usize);
            }
            prop_assert_eq!(forward.to_bits(), exact_sum(v.iter().copied()).to_bits());
        }
    }
}

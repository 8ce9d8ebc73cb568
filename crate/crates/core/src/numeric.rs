//! Small numeric helpers shared across modules.

use crate::Scalar;

/// Neumaier compensated accumulator. Summation order is the caller's order,
/// so results are reproducible for a fixed input sequence.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }

    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp = self.comp + ((self.sum - t) + v);
        } else {
            self.comp = self.comp + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

pub fn sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn mean<T: Scalar>(values: &[T]) -> T {
    sum(values.iter().copied()) / T::from_count(values.len())
}

/// Sample variance with denominator `len - 1`.
pub fn sample_variance<T: Scalar>(values: &[T]) -> T {
    let m = mean(values);
    sum(values.iter().map(|&v| (v - m) * (v - m))) / T::from_count(values.len() - 1)
}

/// Type-7 (linear interpolation) quantile of an ascending slice.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::lit(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median<T: Scalar>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    quantile_sorted(&v, 0.5)
}

/// Logistic map, the inverse of `logit`.
pub fn logistic<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub fn logit<T: Scalar>(t: T) -> T {
    (t / (T::one() - t)).ln()
}

/// Standard normal quantile.
pub fn normal_quantile<T: Scalar>(p: T) -> T {
    use statrs::distribution::{ContinuousCDF, Normal};
    T::lit(Normal::standard().inverse_cdf(p.as_f64()))
}

pub fn normal_cdf<T: Scalar>(z: T) -> T {
    use statrs::distribution::{ContinuousCDF, Normal};
    T::lit(Normal::standard().cdf(z.as_f64()))
}

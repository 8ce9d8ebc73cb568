//! Paired samples, the `1/(n+1)`-jump empirical cdf, and induced order
//! statistics (concomitants).

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::Scalar;

/// `n >= 2` finite pairs `(x_k, y_k)`: `x` is the response (asset return),
/// `y` the explanatory variable (market return).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedSample<T> {
    x: Vec<T>,
    y: Vec<T>,
    tie_count: usize,
}

impl<T: Scalar> PairedSample<T> {
    pub fn new(pairs: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        let (x, y) = pairs.into_iter().unzip();
        Self::from_columns(x, y)
    }

    pub fn from_columns(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidParameter(format!(
                "column lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::DegenerateSample(format!("need n >= 2 pairs, got {}", x.len())));
        }
        if let Some(k) = x.iter().zip(&y).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value in pair {k}")));
        }
        let tie_count = count_ties(&y);
        Ok(Self { x, y, tie_count })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn pair(&self, k: usize) -> (T, T) {
        (self.x[k], self.y[k])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }

    /// Number of y-values that repeat an earlier one, i.e. `n - #distinct(y)`.
    pub fn tie_count(&self) -> usize {
        self.tie_count
    }

    /// Builds the sample `(x_{idx[0]}, y_{idx[0]}), ...`; used for resampling.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::from_columns(
            idx.iter().map(|&i| self.x[i]).collect(),
            idx.iter().map(|&i| self.y[i]).collect(),
        )
    }

    pub fn map_x(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_columns(self.x.iter().map(|&v| f(v)).collect(), self.y.clone())
    }

    pub fn map_y(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_columns(self.x.clone(), self.y.iter().map(|&v| f(v)).collect())
    }
}

fn count_ties<T: Scalar>(y: &[T]) -> usize {
    let mut sorted = y.to_vec();
    sorted.sort_by(total);
    sorted.windows(2).filter(|w| w[0] == w[1]).count()
}

fn total<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("finite values are totally ordered")
}

/// The sample sorted by `y`, with `x` carried along as induced order statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SortedSample<T> {
    pub y_order: Vec<T>,
    pub x_induced: Vec<T>,
    /// `permutation[k]` is the original index of the k-th smallest `y`.
    pub permutation: Vec<usize>,
}

impl<T: Scalar> SortedSample<T> {
    pub fn len(&self) -> usize {
        self.y_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_order.is_empty()
    }

    /// Undoes the sort, recovering the original sample exactly.
    pub fn inverse_permute(&self) -> Result<PairedSample<T>> {
        let n = self.len();
        let mut x = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        for (k, &orig) in self.permutation.iter().enumerate() {
            x[orig] = self.x_induced[k];
            y[orig] = self.y_order[k];
        }
        PairedSample::from_columns(x, y)
    }

    /// `#{j : y_j <= y_order[k]}` for every position `k`; tied values all get
    /// the count of their whole tie group.
    pub fn le_counts(&self) -> Vec<usize> {
        let n = self.len();
        let mut counts = vec![0; n];
        let mut end = n;
        for k in (0..n).rev() {
            if k + 1 < n && self.y_order[k] != self.y_order[k + 1] {
                end = k + 1;
            }
            counts[k] = end;
        }
        counts
    }
}

/// `F_hat(y) = #{k : y_k <= y} / (n+1)`.
pub fn empirical_cdf<T: Scalar>(sample: &PairedSample<T>, y: T) -> T {
    let count = sample.y.iter().filter(|&&v| v <= y).count();
    T::from_count(count) / T::from_count(sample.len() + 1)
}

/// Stable sort by `y`.
pub fn sort_induced<T: Scalar>(sample: &PairedSample<T>) -> SortedSample<T> {
    let mut permutation: Vec<usize> = (0..sample.len()).collect();
    permutation.sort_by(|&a, &b| total(&sample.y[a], &sample.y[b]));
    SortedSample {
        y_order: permutation.iter().map(|&i| sample.y[i]).collect(),
        x_induced: permutation.iter().map(|&i| sample.x[i]).collect(),
        permutation,
    }
}

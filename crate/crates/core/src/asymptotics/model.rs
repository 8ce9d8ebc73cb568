use std::fmt;
use std::sync::Arc;

use crate::empirical::PairedSample;
use crate::error::Result;
use crate::rng::{stream_rng, StreamRng};
use crate::weights::{MomentProfile, WeightFunction};
use crate::Scalar;

pub type RealFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
pub type PairSampler<T> = Arc<dyn Fn(&mut StreamRng) -> (T, T) + Send + Sync>;

/// Analytic description of the joint law of `(X, Y)` through the quantile
/// function of `Y` and the first two conditional moments of `X` given `Y`.
#[derive(Clone)]
pub struct BivariateModel<T> {
    pub name: String,
    /// `F_Y^{-1}` on (0,1).
    pub quantile: RealFn<T>,
    /// `g(y) = E[X | Y = y]`.
    pub cond_mean: RealFn<T>,
    /// `v^2(y) = Var[X | Y = y]`.
    pub cond_var: RealFn<T>,
    pub mean_x: T,
    pub mean_y: T,
    pub var_y: T,
    /// Draws one `(x, y)` pair.
    pub sampler: PairSampler<T>,
    pub moment_profile: MomentProfile,
    /// Points in (0,1) where `F_Y^{-1}` or `g o F_Y^{-1}` is not smooth.
    pub breakpoints: Vec<T>,
}

impl<T: Scalar> BivariateModel<T> {
    pub fn quantile_regression(&self, t: T) -> T {
        (self.cond_mean)((self.quantile)(t))
    }

    /// `n` i.i.d. pairs from stream `stream` of `seed`.
    pub fn sample(&self, n: usize, seed: u64, stream: u64) -> Result<PairedSample<T>> {
        let mut rng = stream_rng(seed, stream);
        let (x, y): (Vec<T>, Vec<T>) = (0..n).map(|_| (self.sampler)(&mut rng)).unzip();
        PairedSample::from_columns(x, y)
    }

    /// Model breakpoints merged with the jump points of `w`.
    pub fn breakpoints_with(&self, w: &WeightFunction<T>) -> Vec<T> {
        let mut all: Vec<T> = self.breakpoints.iter().chain(&w.discontinuities).copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        all.dedup();
        all
    }
}

impl<T: Scalar> fmt::Debug for BivariateModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BivariateModel")
            .field("name", &self.name)
            .field("mean_x", &self.mean_x)
            .field("mean_y", &self.mean_y)
            .field("var_y", &self.var_y)
            .field("moment_profile", &self.moment_profile)
            .finish_non_exhaustive()
    }
}

//! Pairs bootstrap (naive and m-out-of-n) for `Delta`, with percentile or
//! basic intervals and the induced test of `H0: Delta = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::PairedSample;
use crate::error::{Error, Result};
use crate::estimators::{delta_hat, BetaEstimates};
use crate::numeric::{quantile_sorted, sample_variance};
use crate::rng::{index_below, stream_rng};
use crate::weights::WeightFunction;
use crate::Scalar;

/// Fraction of degenerate resamples above which the bootstrap is abandoned.
const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Naive,
    MOutOfN,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "naive" => Ok(Scheme::Naive),
            "m_out_of_n" | "moutofn" => Ok(Scheme::MOutOfN),
            other => Err(Error::InvalidParameter(format!("unknown bootstrap scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Percentile,
    /// Reflected around the point estimate.
    Basic,
}

impl std::str::FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "percentile" => Ok(CiMethod::Percentile),
            "basic" => Ok(CiMethod::Basic),
            other => Err(Error::InvalidParameter(format!("unknown CI method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSpec {
    pub replicates: usize,
    pub scheme: Scheme,
    /// Resample size for m-out-of-n; `ceil(n^(2/3))` when absent.
    pub m: Option<usize>,
    pub confidence_level: f64,
    pub ci_method: CiMethod,
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            replicates: 2000,
            scheme: Scheme::Naive,
            m: None,
            confidence_level: 0.95,
            ci_method: CiMethod::Percentile,
            seed: 0,
        }
    }
}

impl BootstrapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 100 {
            return Err(Error::InvalidParameter(format!(
                "bootstrap needs at least 100 replicates, got {}",
                self.replicates
            )));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence level must be in (0,1), got {}",
                self.confidence_level
            )));
        }
        if self.scheme == Scheme::Naive && self.m.is_some() {
            return Err(Error::InvalidParameter("m is only meaningful for the m-out-of-n scheme".into()));
        }
        Ok(())
    }

    /// Resample size for a sample of size `n`.
    pub fn resample_size(&self, n: usize) -> Result<usize> {
        match self.scheme {
            Scheme::Naive => Ok(n),
            Scheme::MOutOfN => {
                let m = self.m.unwrap_or_else(|| default_m(n));
                if m < 2 || m >= n {
                    return Err(Error::InvalidParameter(format!("m must satisfy 2 <= m < n = {n}, got {m}")));
                }
                Ok(m)
            }
        }
    }
}

/// `ceil(n^(2/3))`, computed exactly for integers.
pub fn default_m(n: usize) -> usize {
    let n2 = (n as u128) * (n as u128);
    let mut m = (n2 as f64).cbrt().ceil() as u128;
    while m > 0 && (m - 1).pow(3) >= n2 {
        m -= 1;
    }
    while m.pow(3) < n2 {
        m += 1;
    }
    m as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceReport<T> {
    pub point: BetaEstimates<T>,
    pub ci_low: T,
    pub ci_high: T,
    pub reject_h0_delta_zero: bool,
    pub bootstrap_failures: usize,
    /// Standard deviation of the resample deltas (at resample size `m_used`).
    pub resample_sd: T,
    pub m_used: usize,
    pub spec_echo: BootstrapSpec,
    pub notes: Vec<String>,
}

/// Successful resample deltas, in resample order, and the failure count.
pub fn resample_deltas<T: Scalar>(
    sample: &PairedSample<T>,
    w: &WeightFunction<T>,
    spec: &BootstrapSpec,
) -> Result<(Vec<T>, usize)> {
    spec.validate()?;
    let n = sample.len();
    let m = spec.resample_size(n)?;
    let outcomes: Vec<Result<T>> = (0..spec.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(spec.seed, b as u64);
            let idx: Vec<usize> = (0..m).map(|_| index_below(&mut rng, n)).collect();
            Ok(delta_hat(&sample.select(&idx)?, w)?.delta_hat)
        })
        .collect();
    let mut deltas = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    for o in outcomes {
        match o {
            Ok(d) => deltas.push(d),
            Err(e) if e.is_degenerate() => failures += 1,
            Err(e) => return Err(e),
        }
    }
    if failures as f64 > MAX_FAILURE_RATE * spec.replicates as f64 {
        return Err(Error::UnstableBootstrap { failures, replicates: spec.replicates });
    }
    Ok((deltas, failures))
}

/// Interval from resample deltas; `deltas` need not be sorted.
pub fn interval<T: Scalar>(point: T, deltas: &[T], n: usize, m: usize, spec: &BootstrapSpec) -> (T, T) {
    let mut sorted = deltas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite deltas"));
    let alpha = 1.0 - spec.confidence_level;
    let q_lo = quantile_sorted(&sorted, alpha / 2.0);
    let q_hi = quantile_sorted(&sorted, 1.0 - alpha / 2.0);
    match spec.ci_method {
        CiMethod::Percentile => (q_lo, q_hi),
        CiMethod::Basic => {
            // The resample spread is at size m; rescale it to size n.
            let r = T::lit((m as f64 / n as f64).sqrt());
            (point - r * (q_hi - point), point - r * (q_lo - point))
        }
    }
}

pub fn bootstrap_delta<T: Scalar>(
    sample: &PairedSample<T>,
    w: &WeightFunction<T>,
    spec: &BootstrapSpec,
) -> Result<InferenceReport<T>> {
    spec.validate()?;
    let point = delta_hat(sample, w)?;
    let n = sample.len();
    let m = spec.resample_size(n)?;
    let (deltas, failures) = resample_deltas(sample, w, spec)?;
    if deltas.len() < 2 {
        return Err(Error::UnstableBootstrap { failures, replicates: spec.replicates });
    }
    let (ci_low, ci_high) = interval(point.delta_hat, &deltas, n, m, spec);
    // Deltas at rounding level (exactly linear data) are not evidence against H0.
    let slack = T::lit(64.0) * T::epsilon() * (point.beta_hat.abs() + point.beta_g_hat.abs());
    let reject = ci_low - slack > T::zero() || ci_high + slack < T::zero();

    let mut notes = Vec::new();
    if spec.scheme == Scheme::MOutOfN {
        notes.push(match spec.ci_method {
            CiMethod::Basic => format!("basic interval rescaled by sqrt(m/n) with m = {m}"),
            CiMethod::Percentile => {
                format!("percentile interval from size-{m} resamples is not rescaled to size {n}; it is conservative")
            }
        });
    }
    if failures > 0 {
        notes.push(format!("{failures} degenerate resamples skipped"));
    }
    if point.tie_count > 0 {
        notes.push(format!("sample has {} tied y-values; ranks use <=-counts", point.tie_count));
    }
    Ok(InferenceReport {
        resample_sd: sample_variance(&deltas).sqrt(),
        point,
        ci_low,
        ci_high,
        reject_h0_delta_zero: reject,
        bootstrap_failures: failures,
        m_used: m,
        spec_echo: BootstrapSpec { m: (spec.scheme == Scheme::MOutOfN).then_some(m), ..*spec },
        notes,
    })
}

/// Rejects `H0: Delta = 0` when 0 lies outside the bootstrap interval.
pub fn test_delta_zero<T: Scalar>(
    sample: &PairedSample<T>,
    w: &WeightFunction<T>,
    spec: &BootstrapSpec,
) -> Result<(bool, (T, T))> {
    let r = bootstrap_delta(sample, w, spec)?;
    Ok((r.reject_h0_delta_zero, (r.ci_low, r.ci_high)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{make_cte, make_identity, make_pht};

    fn spec(reps: usize, seed: u64) -> BootstrapSpec {
        BootstrapSpec { replicates: reps, seed, ..Default::default() }
    }

    fn noisy_sample(n: usize) -> PairedSample<f64> {
        let mut rng = stream_rng(5, 0);
        PairedSample::new((0..n).map(|_| {
            let y = crate::rng::open_unit(&mut rng);
            (y * y + 0.1 * (crate::rng::open_unit(&mut rng) - 0.5), y)
        }))
        .unwrap()
    }

    #[test]
    fn default_m_is_ceil_two_thirds_power() {
        assert_eq!(default_m(1000), 100);
        assert_eq!(default_m(1001), 101);
        assert_eq!(default_m(8), 4);
        assert_eq!(default_m(9), 5);
    }

    #[test]
    fn exact_linear_gives_degenerate_interval() {
        let s = PairedSample::new((1..=50).map(|k| {
            let y = (k as f64 * 0.37).sin();
            (2.0 * y, y)
        }))
        .unwrap();
        for w in [make_identity(), make_pht(0.75).unwrap(), make_cte(0.5).unwrap()] {
            let r = bootstrap_delta(&s, &w, &spec(200, 1)).unwrap();
            assert!(r.ci_low.abs() < 1e-12 && r.ci_high.abs() < 1e-12);
            assert!(!r.reject_h0_delta_zero);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = noisy_sample(300);
        let w = make_pht(0.75).unwrap();
        let a = bootstrap_delta(&s, &w, &spec(300, 9)).unwrap();
        let b = bootstrap_delta(&s, &w, &spec(300, 9)).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_delta(&s, &w, &spec(300, 10)).unwrap();
        assert_ne!(a.ci_low, c.ci_low);
    }

    #[test]
    fn resamples_match_direct_estimation() {
        let s = noisy_sample(60);
        let w = make_cte(0.7).unwrap();
        let sp = spec(100, 3);
        let (deltas, failures) = resample_deltas(&s, &w, &sp).unwrap();
        assert_eq!(failures, 0);
        for (b, d) in deltas.iter().enumerate().take(20) {
            let mut rng = stream_rng(sp.seed, b as u64);
            let idx: Vec<usize> = (0..60).map(|_| index_below(&mut rng, 60)).collect();
            assert_eq!(*d, delta_hat(&s.select(&idx).unwrap(), &w).unwrap().delta_hat);
        }
    }

    #[test]
    fn higher_level_widens_interval() {
        let s = noisy_sample(200);
        let w = make_identity();
        let sp = spec(400, 2);
        let (deltas, _) = resample_deltas(&s, &w, &sp).unwrap();
        let point = delta_hat(&s, &w).unwrap().delta_hat;
        let mut prev = 0.0;
        for level in [0.5, 0.8, 0.9, 0.95, 0.99] {
            for method in [CiMethod::Percentile, CiMethod::Basic] {
                let sp = BootstrapSpec { confidence_level: level, ci_method: method, ..sp };
                let (lo, hi) = interval(point, &deltas, 200, 200, &sp);
                assert!(lo <= hi);
                if method == CiMethod::Percentile {
                    assert!(hi - lo >= prev);
                    prev = hi - lo;
                }
            }
        }
    }

    #[test]
    fn m_out_of_n_rescales_basic_interval() {
        let s = noisy_sample(400);
        let w = make_identity();
        let sp = BootstrapSpec { scheme: Scheme::MOutOfN, ci_method: CiMethod::Basic, ..spec(300, 4) };
        let r = bootstrap_delta(&s, &w, &sp).unwrap();
        assert_eq!(r.m_used, default_m(400));
        assert_eq!(r.spec_echo.m, Some(default_m(400)));
        let (deltas, _) = resample_deltas(&s, &w, &sp).unwrap();
        let naive_width = {
            let (lo, hi) = interval(r.point.delta_hat, &deltas, 400, 400, &sp);
            hi - lo
        };
        let ratio = (r.ci_high - r.ci_low) / naive_width;
        assert!((ratio - (r.m_used as f64 / 400.0).sqrt()).abs() < 1e-12);
        assert!(r.notes.iter().any(|n| n.contains("rescaled")));
    }

    #[test]
    fn tiny_sample_still_reports() {
        let s = noisy_sample(10);
        let r = bootstrap_delta(&s, &make_identity(), &spec(200, 8)).unwrap();
        assert!(r.ci_low <= r.ci_high);
        assert!(r.ci_high - r.ci_low > 0.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let s = noisy_sample(20);
        let w = make_identity();
        assert!(bootstrap_delta(&s, &w, &spec(50, 0)).is_err());
        let bad_m = BootstrapSpec { scheme: Scheme::MOutOfN, m: Some(20), ..spec(100, 0) };
        assert!(bootstrap_delta(&s, &w, &bad_m).is_err());
        let bad_level = BootstrapSpec { confidence_level: 1.0, ..spec(100, 0) };
        assert!(bootstrap_delta(&s, &w, &bad_level).is_err());
    }

    #[test]
    fn degenerate_resamples_abort_when_frequent() {
        // Two distinct y-values: many size-n resamples of a 3-point sample collapse.
        let s = PairedSample::new([(0.0, 0.0), (1.0, 1.0), (3.0, 1.0)]).unwrap();
        let err = bootstrap_delta(&s, &make_identity(), &spec(200, 0)).unwrap_err();
        assert!(matches!(err, Error::UnstableBootstrap { .. } | Error::DegenerateWeight(_)));
    }
}

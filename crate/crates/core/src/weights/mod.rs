//! Weight functions `w: (0,1) -> R` used by the weighted-Gini beta.
//!
//! Every weight carries regularity metadata (growth exponent, continuity
//! class, `L_q` membership of `w^2`) that the assumption checker reads. For
//! the built-in families the metadata is derived in closed form; tabulated
//! weights only get a dense-grid numeric certificate.

mod assumptions;
mod spec;

pub use assumptions::{
    check_theorem_assumptions, AssumptionReport, ConditionVerdict, MomentProfile, Theorem, Verdict,
};
pub use spec::WeightSpec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::logistic;
use crate::Scalar;

/// Safety factor applied to the grid supremum when storing the growth constant.
pub const GROWTH_CONSTANT_SAFETY: f64 = 1.1;

const CERTIFY_GRID_POINTS: usize = 10_000;
const CERTIFY_LOGIT_SPAN: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum WeightFamily<T> {
    /// Proportional hazards transform, `nu (1-t)^(nu-1)`.
    Pht { nu: T },
    /// Conditional tail expectation indicator, `1{t > nu}`.
    Cte { nu: T },
    /// `w(t) = t`, the classical Gini weight.
    Identity,
    /// Piecewise-linear interpolant with constant extrapolation.
    Tabulated { grid: Vec<(T, T)> },
}

/// Growth exponent `b` bounding `|w|` and `t(1-t)|w'|` by `c (t(1-t))^(-b/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "b", rename_all = "kebab-case")]
pub enum BExponent {
    Certified(f64),
    /// No `b < 1` works.
    UnboundedGrowth,
}

impl BExponent {
    pub fn value(self) -> Option<f64> {
        match self {
            BExponent::Certified(b) => Some(b),
            BExponent::UnboundedGrowth => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuityClass {
    ContinuousOnClosed,
    BoundedDiscontinuous,
    Unbounded,
}

/// The set of `q in [1, inf]` with `w^2 in L_q`. Always an initial segment of
/// `[1, inf]`, since `L_q` shrinks as `q` grows on a probability space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LqExponents {
    /// Right end of the segment; `None` means the segment reaches `q = inf`.
    pub upper: Option<f64>,
    pub upper_inclusive: bool,
}

impl LqExponents {
    pub fn all() -> Self {
        Self { upper: None, upper_inclusive: true }
    }

    pub fn below(upper: f64) -> Self {
        Self { upper: Some(upper), upper_inclusive: false }
    }

    pub fn contains(&self, q: f64) -> bool {
        if q < 1.0 {
            return false;
        }
        match self.upper {
            None => true,
            Some(u) => q < u || (self.upper_inclusive && q == u),
        }
    }

    pub fn contains_infinity(&self) -> bool {
        self.upper.is_none()
    }

    pub fn is_empty(&self) -> bool {
        !self.contains(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certification {
    Symbolic,
    NumericOnly { disclaimer: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightMeta {
    pub b_exponent: BExponent,
    /// Constant `c` of the growth bound; `None` when growth is unbounded.
    pub growth_constant: Option<f64>,
    pub continuity_class: ContinuityClass,
    pub l2q_exponents: LqExponents,
    pub certification: Certification,
}

/// An immutable weight function with its regularity metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightFunction<T> {
    pub family: WeightFamily<T>,
    /// Strictly increasing points in (0,1) where `w` or `w'` jumps.
    pub discontinuities: Vec<T>,
    pub meta: WeightMeta,
}

pub fn make_pht<T: Scalar>(nu: T) -> Result<WeightFunction<T>> {
    if !(nu.is_finite() && nu > T::zero()) {
        return Err(Error::InvalidParameter(format!("PHT requires nu > 0, got {nu}")));
    }
    let v = nu.as_f64();
    let (b, continuity) = if v >= 1.0 {
        (BExponent::Certified(0.0), ContinuityClass::ContinuousOnClosed)
    } else if v > 0.5 {
        (BExponent::Certified(2.0 * (1.0 - v)), ContinuityClass::Unbounded)
    } else {
        (BExponent::UnboundedGrowth, ContinuityClass::Unbounded)
    };
    let l2q = if v >= 1.0 {
        LqExponents::all()
    } else {
        // (1-t)^(2q(nu-1)) is integrable iff q < 1/(2(1-nu)); empty when nu <= 1/2.
        LqExponents::below(1.0 / (2.0 * (1.0 - v)))
    };
    Ok(finish(WeightFamily::Pht { nu }, Vec::new(), b, continuity, l2q, Certification::Symbolic))
}

pub fn make_cte<T: Scalar>(nu: T) -> Result<WeightFunction<T>> {
    if !(nu > T::zero() && nu < T::one()) {
        return Err(Error::InvalidParameter(format!("CTE requires 0 < nu < 1, got {nu}")));
    }
    Ok(finish(
        WeightFamily::Cte { nu },
        vec![nu],
        BExponent::Certified(0.0),
        ContinuityClass::BoundedDiscontinuous,
        LqExponents::all(),
        Certification::Symbolic,
    ))
}

pub fn make_identity<T: Scalar>() -> WeightFunction<T> {
    finish(
        WeightFamily::Identity,
        Vec::new(),
        BExponent::Certified(0.0),
        ContinuityClass::ContinuousOnClosed,
        LqExponents::all(),
        Certification::Symbolic,
    )
}

pub fn make_tabulated<T: Scalar>(grid: Vec<(T, T)>) -> Result<WeightFunction<T>> {
    if grid.len() < 2 {
        return Err(Error::InvalidParameter("tabulated weight needs at least 2 points".into()));
    }
    for (i, &(t, v)) in grid.iter().enumerate() {
        if !(t > T::zero() && t < T::one()) {
            return Err(Error::InvalidParameter(format!("grid point {i}: t = {t} outside (0,1)")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("grid point {i}: non-finite value")));
        }
        if i > 0 && t <= grid[i - 1].0 {
            return Err(Error::InvalidParameter(format!(
                "grid t-values must be strictly increasing (point {i})"
            )));
        }
    }
    let slopes: Vec<T> = std::iter::once(T::zero())
        .chain(grid.windows(2).map(|p| (p[1].1 - p[0].1) / (p[1].0 - p[0].0)))
        .chain(std::iter::once(T::zero()))
        .collect();
    let kinks = grid
        .iter()
        .enumerate()
        .filter(|(i, _)| slopes[*i] != slopes[i + 1])
        .map(|(_, &(t, _))| t)
        .collect();
    Ok(finish(
        WeightFamily::Tabulated { grid },
        kinks,
        BExponent::Certified(0.0),
        ContinuityClass::ContinuousOnClosed,
        LqExponents::all(),
        Certification::NumericOnly {
            disclaimer: "bounded by construction; regularity checked on a dense grid only".into(),
        },
    ))
}

fn finish<T: Scalar>(
    family: WeightFamily<T>,
    discontinuities: Vec<T>,
    b_exponent: BExponent,
    continuity_class: ContinuityClass,
    l2q_exponents: LqExponents,
    certification: Certification,
) -> WeightFunction<T> {
    let mut w = WeightFunction {
        family,
        discontinuities,
        meta: WeightMeta {
            b_exponent,
            growth_constant: None,
            continuity_class,
            l2q_exponents,
            certification,
        },
    };
    if let BExponent::Certified(b) = b_exponent {
        w.meta.growth_constant = Some(GROWTH_CONSTANT_SAFETY * w.growth_supremum(b));
    }
    w
}

impl<T: Scalar> WeightFunction<T> {
    pub fn evaluate(&self, t: T) -> T {
        match &self.family {
            WeightFamily::Pht { nu } => *nu * (T::one() - t).powf(*nu - T::one()),
            WeightFamily::Cte { nu } => {
                if t > *nu {
                    T::one()
                } else {
                    T::zero()
                }
            }
            WeightFamily::Identity => t,
            WeightFamily::Tabulated { grid } => interpolate(grid, t),
        }
    }

    /// `w'(t)`, or `None` at the finitely many points where it does not exist.
    pub fn derivative(&self, t: T) -> Option<T> {
        if self.discontinuities.contains(&t) {
            return None;
        }
        Some(match &self.family {
            WeightFamily::Pht { nu } => {
                let two = T::lit(2.0);
                -*nu * (*nu - T::one()) * (T::one() - t).powf(*nu - two)
            }
            WeightFamily::Cte { .. } => T::zero(),
            WeightFamily::Identity => T::one(),
            WeightFamily::Tabulated { grid } => {
                let (first, last) = (grid[0], grid[grid.len() - 1]);
                if t < first.0 || t > last.0 {
                    T::zero()
                } else {
                    let i = grid.partition_point(|p| p.0 <= t).clamp(1, grid.len() - 1);
                    (grid[i].1 - grid[i - 1].1) / (grid[i].0 - grid[i - 1].0)
                }
            }
        })
    }

    pub fn is_constant(&self) -> bool {
        match &self.family {
            WeightFamily::Pht { nu } => *nu == T::one(),
            WeightFamily::Tabulated { grid } => grid.iter().all(|p| p.1 == grid[0].1),
            _ => false,
        }
    }

    /// `sup |w(t)| (t(1-t))^(b/2)` and the same for `t(1-t)|w'(t)|` over a
    /// logit-spaced grid.
    fn growth_supremum(&self, b: f64) -> f64 {
        let mut sup = 0.0f64;
        for t in certification_grid::<T>() {
            let tt = (t * (T::one() - t)).as_f64();
            let damp = tt.powf(b / 2.0);
            sup = sup.max(self.evaluate(t).as_f64().abs() * damp);
            if let Some(d) = self.derivative(t) {
                sup = sup.max(tt * d.as_f64().abs() * damp);
            }
        }
        sup
    }

    /// Numeric spot-check of the growth bound at `t`.
    pub fn within_growth_bound(&self, t: T) -> bool {
        let (Some(b), Some(c)) = (self.meta.b_exponent.value(), self.meta.growth_constant) else {
            return false;
        };
        let tt = (t * (T::one() - t)).as_f64();
        let bound = c * tt.powf(-b / 2.0);
        let ok_w = self.evaluate(t).as_f64().abs() <= bound;
        let ok_d = self.derivative(t).is_none_or(|d| tt * d.as_f64().abs() <= bound);
        ok_w && ok_d
    }

    pub fn label(&self) -> String {
        match &self.family {
            WeightFamily::Pht { nu } => format!("pht:{nu}"),
            WeightFamily::Cte { nu } => format!("cte:{nu}"),
            WeightFamily::Identity => "identity".into(),
            WeightFamily::Tabulated { grid } => format!("tabulated[{}]", grid.len()),
        }
    }
}

fn interpolate<T: Scalar>(grid: &[(T, T)], t: T) -> T {
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = grid.partition_point(|p| p.0 <= t);
    let (t0, w0) = grid[i - 1];
    let (t1, w1) = grid[i];
    w0 + (t - t0) * (w1 - w0) / (t1 - t0)
}

fn certification_grid<T: Scalar>() -> impl Iterator<Item = T> {
    let step = 2.0 * CERTIFY_LOGIT_SPAN / (CERTIFY_GRID_POINTS - 1) as f64;
    (0..CERTIFY_GRID_POINTS)
        .map(move |i| logistic(T::lit(-CERTIFY_LOGIT_SPAN + step * i as f64)))
        .filter(|t| *t > T::zero() && *t < T::one())
}

//! Static checks of the consistency (T1, T2) and asymptotic normality (T3)
//! conditions against weight metadata and a model's moment profile.
//!
//! These are metadata checks, not proofs: a condition that cannot be decided
//! from the supplied information is reported as `Unverifiable`.

use serde::{Deserialize, Serialize};

use super::{BExponent, Certification, ContinuityClass, WeightFunction};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Strong consistency: continuous `w` on `[0,1]`, finite `E[X]`, `E[Y^2]`, `E[XY]`.
    T1,
    /// Weak consistency: continuous `F_Y`, `E[(E[X^2|Y])^p] < inf`, `w^2 in L_q`, `1/p + 1/q = 1`.
    T2,
    /// Asymptotic normality under growth conditions (i)-(iii).
    T3,
}

impl std::str::FromStr for Theorem {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T1" => Ok(Theorem::T1),
            "T2" => Ok(Theorem::T2),
            "T3" => Ok(Theorem::T3),
            other => Err(crate::Error::InvalidParameter(format!("unknown theorem '{other}'"))),
        }
    }
}

/// What is known about the joint law of `(X, Y)`.
///
/// Moment orders are suprema: `y_moment_sup = s` certifies `E|Y|^r < inf` for
/// every `r < s` and nothing at `r >= s`. `f64::INFINITY` means all moments.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentProfile {
    pub y_moment_sup: Option<f64>,
    pub x_moment_sup: Option<f64>,
    /// Supremum of `p` with `E[(E[X^2|Y])^p] < inf`.
    pub cond_second_moment_p: Option<f64>,
    /// `gamma` with `v^2 o F_Y^{-1}(t) <= c (t(1-t))^(-gamma)`; 0 when `v^2` is bounded.
    pub cond_var_growth: Option<f64>,
    pub y_cdf_continuous: Option<bool>,
    /// `F_Y^{-1}` and `g o F_Y^{-1}` continuous on (0,1).
    pub quantile_regression_continuous: Option<bool>,
}

impl MomentProfile {
    /// Everything finite, bounded conditional variance, continuous laws.
    pub fn all_moments_bounded_variance() -> Self {
        Self {
            y_moment_sup: Some(f64::INFINITY),
            x_moment_sup: Some(f64::INFINITY),
            cond_second_moment_p: Some(f64::INFINITY),
            cond_var_growth: Some(0.0),
            y_cdf_continuous: Some(true),
            quantile_regression_continuous: Some(true),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Unverifiable,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub condition: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub theorem: Theorem,
    pub verdict: Verdict,
    /// First violated condition, else first unverifiable one.
    pub binding_condition: Option<String>,
    pub conditions: Vec<ConditionVerdict>,
    pub b_exponent: Option<f64>,
    /// `r = max{4, 2/(1-b)}` for T3.
    pub required_moment_order: Option<f64>,
    pub numeric_only: bool,
}

impl AssumptionReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionVerdict> {
        self.conditions.iter().find(|c| c.condition == name)
    }
}

fn cond(condition: &str, verdict: Verdict, detail: impl Into<String>) -> ConditionVerdict {
    ConditionVerdict { condition: condition.to_string(), verdict, detail: detail.into() }
}

/// Verdict for "E|Z|^r < inf" given a moment supremum.
fn moment_verdict(sup: Option<f64>, r: f64) -> Verdict {
    match sup {
        None => Verdict::Unverifiable,
        Some(s) if s > r => Verdict::Satisfied,
        Some(s) if s < r => Verdict::Violated,
        Some(_) => Verdict::Unverifiable,
    }
}

fn bool_verdict(flag: Option<bool>) -> Verdict {
    match flag {
        Some(true) => Verdict::Satisfied,
        Some(false) => Verdict::Violated,
        None => Verdict::Unverifiable,
    }
}

fn conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p <= 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

pub fn check_theorem_assumptions<T: Scalar>(
    w: &WeightFunction<T>,
    theorem: Theorem,
    moments: &MomentProfile,
) -> AssumptionReport {
    let mut b_out = None;
    let mut r_out = None;
    let conditions = match theorem {
        Theorem::T1 => check_t1(w, moments),
        Theorem::T2 => check_t2(w, moments),
        Theorem::T3 => {
            let (c, b, r) = check_t3(w, moments);
            b_out = b;
            r_out = r;
            c
        }
    };
    let verdict = conditions.iter().map(|c| c.verdict).max().unwrap_or(Verdict::Satisfied);
    let binding_condition = conditions
        .iter()
        .find(|c| c.verdict == Verdict::Violated)
        .or_else(|| conditions.iter().find(|c| c.verdict == Verdict::Unverifiable))
        .map(|c| c.condition.clone());
    AssumptionReport {
        theorem,
        verdict,
        binding_condition,
        conditions,
        b_exponent: b_out,
        required_moment_order: r_out,
        numeric_only: matches!(w.meta.certification, Certification::NumericOnly { .. }),
    }
}

fn check_t1<T: Scalar>(w: &WeightFunction<T>, m: &MomentProfile) -> Vec<ConditionVerdict> {
    let continuity = match w.meta.continuity_class {
        ContinuityClass::ContinuousOnClosed => {
            cond("w-continuous", Verdict::Satisfied, "w is continuous on [0,1]")
        }
        ContinuityClass::BoundedDiscontinuous => {
            let at: Vec<String> = w.discontinuities.iter().map(|d| d.to_string()).collect();
            cond("w-continuous", Verdict::Violated, format!("discontinuity at {}", at.join(", ")))
        }
        ContinuityClass::Unbounded => {
            cond("w-continuous", Verdict::Violated, "w is unbounded near the endpoints of [0,1]")
        }
    };
    // E|XY| is finite by Hoelder whenever 1/sx + 1/sy < 1.
    let cross = match (m.x_moment_sup, m.y_moment_sup) {
        (Some(sx), Some(sy)) if 1.0 / sx + 1.0 / sy < 1.0 => Verdict::Satisfied,
        _ => Verdict::Unverifiable,
    };
    vec![
        continuity,
        cond("E[X]", moment_verdict(m.x_moment_sup, 1.0), "first moment of X"),
        cond("E[Y^2]", moment_verdict(m.y_moment_sup, 2.0), "second moment of Y"),
        cond("E[XY]", cross, "cross moment certified via Hoelder from marginal moment orders"),
    ]
}

fn check_t2<T: Scalar>(w: &WeightFunction<T>, m: &MomentProfile) -> Vec<ConditionVerdict> {
    let l2q = w.meta.l2q_exponents;
    let conj = if l2q.is_empty() {
        cond("p-q-conjugacy", Verdict::Violated, "w^2 is not in L_1, so w^2 is in no L_q, q >= 1")
    } else if l2q.contains_infinity() && moment_verdict(m.x_moment_sup, 2.0) == Verdict::Satisfied {
        cond("p-q-conjugacy", Verdict::Satisfied, "p = 1 (E[X^2] finite), q = inf (w bounded)")
    } else {
        match m.cond_second_moment_p {
            Some(p_sup) if p_sup > 1.0 => {
                // Any p < p_sup is certified; its conjugate q can be pushed down to conj(p_sup).
                let q_inf = conjugate(p_sup);
                let feasible = match l2q.upper {
                    None => true,
                    Some(u) => q_inf < u,
                };
                if feasible {
                    cond(
                        "p-q-conjugacy",
                        Verdict::Satisfied,
                        format!("p < {p_sup} with conjugate q > {q_inf} inside the L_q range of w^2"),
                    )
                } else {
                    cond(
                        "p-q-conjugacy",
                        Verdict::Unverifiable,
                        format!("certified p < {p_sup} needs q > {q_inf}, beyond the L_q range of w^2"),
                    )
                }
            }
            _ => cond(
                "p-q-conjugacy",
                Verdict::Unverifiable,
                "no certified p with E[(E[X^2|Y])^p] finite",
            ),
        }
    };
    vec![
        cond("F_Y-continuous", bool_verdict(m.y_cdf_continuous), "continuity of the cdf of Y"),
        cond("E[Y^2]", moment_verdict(m.y_moment_sup, 2.0), "second moment of Y"),
        conj,
    ]
}

fn check_t3<T: Scalar>(
    w: &WeightFunction<T>,
    m: &MomentProfile,
) -> (Vec<ConditionVerdict>, Option<f64>, Option<f64>) {
    let mut out = vec![cond(
        "F_Y-continuous",
        bool_verdict(m.y_cdf_continuous),
        "continuity of the cdf of Y",
    )];
    out.push(if w.discontinuities.is_empty() {
        cond("w-piecewise-C1", Verdict::Satisfied, "w is continuously differentiable on (0,1)")
    } else {
        let v = bool_verdict(m.quantile_regression_continuous);
        cond(
            "w-piecewise-C1",
            v,
            format!(
                "w' jumps at {} point(s); F_Y^-1 and g o F_Y^-1 must be continuous there",
                w.discontinuities.len()
            ),
        )
    });
    let b = match w.meta.b_exponent {
        BExponent::Certified(b) if b < 1.0 => {
            out.push(cond("T3(i)", Verdict::Satisfied, format!("b = {b}")));
            b
        }
        BExponent::Certified(b) => {
            out.push(cond("T3(i)", Verdict::Violated, format!("smallest certified b = {b} >= 1")));
            out.push(cond("T3(ii)", Verdict::Unverifiable, "depends on b from (i)"));
            out.push(cond("T3(iii)", Verdict::Unverifiable, "depends on b from (i)"));
            return (out, None, None);
        }
        BExponent::UnboundedGrowth => {
            out.push(cond("T3(i)", Verdict::Violated, "no b in [0,1) bounds the growth of w"));
            out.push(cond("T3(ii)", Verdict::Unverifiable, "depends on b from (i)"));
            out.push(cond("T3(iii)", Verdict::Unverifiable, "depends on b from (i)"));
            return (out, None, None);
        }
    };
    let r = f64::max(4.0, 2.0 / (1.0 - b));
    // Need some r1 > r with E|Y|^r1 finite: exists iff the supremum exceeds r.
    let moment = match m.y_moment_sup {
        None => Verdict::Unverifiable,
        Some(s) if s > r => Verdict::Satisfied,
        Some(_) => Verdict::Violated,
    };
    out.push(cond(
        "T3(ii)",
        moment,
        format!("need E|Y|^r1 finite for some r1 > r = {r}; moment supremum {:?}", m.y_moment_sup),
    ));
    let limit = 2.0 / r;
    let growth = match m.cond_var_growth {
        None => Verdict::Unverifiable,
        Some(g) if g < limit => Verdict::Satisfied,
        Some(_) => Verdict::Unverifiable,
    };
    out.push(cond(
        "T3(iii)",
        growth,
        format!("v^2 o F^-1 growth exponent {:?} must be below 2/r = {limit}", m.cond_var_growth),
    ));
    (out, Some(b), Some(r))
}

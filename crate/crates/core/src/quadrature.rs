//! Quadrature on `(eps, 1-eps)`.
//!
//! Integrals are computed in logit coordinates `t = 1/(1+e^{-x})`, which
//! clusters nodes near both endpoints where quantile functions and unbounded
//! weights blow up. Known breakpoints (jumps of `w` or `w'`) split the range
//! so that every piece is smooth. Ordinary integrals use Romberg
//! (trapezoid + Richardson); Riemann-Stieltjes double sums over the
//! Brownian-bridge kernel use midpoint-evaluated increments on a grid that is
//! doubled until the Richardson-extrapolated value settles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{logistic, logit, CompensatedSum};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Base number of Stieltjes grid cells.
    pub grid_size: usize,
    /// Endpoint cutoff: integrals run over `(eps_q, 1 - eps_q)`.
    pub eps_q: f64,
    /// Relative change below which refinement stops.
    pub rel_tol: f64,
    pub max_refinements: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { grid_size: 4096, eps_q: 1e-12, rel_tol: 1e-8, max_refinements: 16 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_q > 0.0 && self.eps_q < 0.01) {
            return Err(Error::InvalidParameter(format!("eps_q must be in (0, 0.01), got {}", self.eps_q)));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParameter(format!("rel_tol must be in (0,1), got {}", self.rel_tol)));
        }
        if self.grid_size < 16 {
            return Err(Error::InvalidParameter("grid_size must be at least 16".into()));
        }
        if self.max_refinements < 2 {
            return Err(Error::InvalidParameter("max_refinements must be at least 2".into()));
        }
        Ok(())
    }

    pub fn with_eps(self, eps_q: f64) -> Self {
        Self { eps_q, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral<T> {
    pub value: T,
    /// Integral of `|f|`, the natural scale for relative tolerances.
    pub abs_value: T,
    pub error_estimate: T,
    pub evaluations: usize,
    /// Deepest Romberg level reached over all pieces.
    pub levels: usize,
}

/// Splits `(eps, 1-eps)` at the breakpoints that fall strictly inside it.
pub fn pieces<T: Scalar>(breakpoints: &[T], eps: T) -> Vec<(T, T)> {
    let lo = eps;
    let hi = T::one() - eps;
    let mut cuts: Vec<T> = breakpoints.iter().copied().filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);
    edges.windows(2).map(|e| (e[0], e[1])).collect()
}

/// `int_{eps}^{1-eps} f(t) dt` to relative tolerance `spec.rel_tol`.
pub fn integrate<T: Scalar>(
    f: impl Fn(T) -> T,
    breakpoints: &[T],
    spec: &QuadratureSpec,
) -> Result<Integral<T>> {
    integrate_with_floor(f, breakpoints, spec, T::zero())
}

/// As [`integrate`], but also accepts convergence once the change falls below
/// `abs_floor`. Integrands that cancel to rounding noise need this.
pub fn integrate_with_floor<T: Scalar>(
    f: impl Fn(T) -> T,
    breakpoints: &[T],
    spec: &QuadratureSpec,
    abs_floor: T,
) -> Result<Integral<T>> {
    let eps = T::lit(spec.eps_q);
    let mut total = Integral {
        value: T::zero(),
        abs_value: T::zero(),
        error_estimate: T::zero(),
        evaluations: 0,
        levels: 0,
    };
    let mut value = CompensatedSum::new();
    let mut abs_value = CompensatedSum::new();
    let ps = pieces(breakpoints, eps);
    let piece_floor = abs_floor / T::from_count(ps.len());
    for (a, b) in ps {
        let part = romberg(&f, a, b, spec, piece_floor)?;
        value.add(part.value);
        abs_value.add(part.abs_value);
        total.error_estimate = total.error_estimate + part.error_estimate;
        total.evaluations += part.evaluations;
        total.levels = total.levels.max(part.levels);
    }
    total.value = value.value();
    total.abs_value = abs_value.value();
    Ok(total)
}

fn romberg<T: Scalar>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    spec: &QuadratureSpec,
    abs_floor: T,
) -> Result<Integral<T>> {
    const MIN_LEVELS: usize = 4;
    let (xa, xb) = (logit(a), logit(b));
    // Evaluate strictly inside the piece so jumps at its ends contribute their
    // one-sided limits, whatever the logit round trip does.
    let lo = a + a * T::epsilon();
    let hi = b - b * T::epsilon();
    let g = |x: T| -> Result<(T, T)> {
        let t = logistic(x).max(lo).min(hi);
        let jac = t * logistic(-x);
        let v = f(t) * jac;
        if !v.is_finite() {
            return Err(Error::NumericQuality(format!("integrand not finite at t = {t}")));
        }
        Ok((v, v.abs()))
    };
    let half = T::lit(0.5);
    let mut panels = 8usize;
    let mut h = (xb - xa) / T::from_count(panels);
    let (ga, aa) = g(xa)?;
    let (gb, ab) = g(xb)?;
    let mut sum = CompensatedSum::new();
    let mut abs_sum = CompensatedSum::new();
    sum.add((ga + gb) * half);
    abs_sum.add((aa + ab) * half);
    for i in 1..panels {
        let (v, a) = g(xa + h * T::from_count(i))?;
        sum.add(v);
        abs_sum.add(a);
    }
    let mut evaluations = panels + 1;
    let mut rows: Vec<Vec<T>> = vec![vec![sum.value() * h]];
    let mut passes = 0;
    for level in 1..=spec.max_refinements {
        h = h * half;
        for i in 0..panels {
            let (v, a) = g(xa + h * T::from_count(2 * i + 1))?;
            sum.add(v);
            abs_sum.add(a);
        }
        evaluations += panels;
        panels *= 2;
        let mut row = vec![sum.value() * h];
        let mut factor = T::one();
        for j in 1..=level {
            factor = factor * T::lit(4.0);
            let prev = rows[level - 1][j - 1];
            row.push(row[j - 1] + (row[j - 1] - prev) / (factor - T::one()));
        }
        let best = row[level];
        let diff = (best - rows[level - 1][level - 1]).abs();
        let abs_value = abs_sum.value() * h;
        rows.push(row);
        let scale = best.abs().max(abs_value);
        // Two consecutive passes guard against a coincidentally small difference.
        if diff <= T::lit(spec.rel_tol) * scale + abs_floor {
            passes += 1;
        } else {
            passes = 0;
        }
        if level >= MIN_LEVELS && passes >= 2 {
            return Ok(Integral { value: best, abs_value, error_estimate: diff, evaluations, levels: level });
        }
    }
    Err(Error::NumericQuality(format!(
        "quadrature did not converge on (t = {}, {}) after {} refinements",
        logistic(xa),
        logistic(xb),
        spec.max_refinements
    )))
}

/// Cells uniform in logit coordinates on each smooth piece.
#[derive(Debug, Clone)]
pub struct StieltjesGrid<T> {
    /// Cell boundaries in `t`, ascending. Piece boundaries are shared nodes.
    pub nodes: Vec<T>,
    /// Cell midpoints (in logit coordinates), mapped back to `t`.
    pub mids: Vec<T>,
}

impl<T: Scalar> StieltjesGrid<T> {
    fn build(piece_bounds: &[(T, T)], cells: &[usize]) -> Self {
        let mut nodes = Vec::new();
        let mut mids = Vec::new();
        for (&(a, b), &m) in piece_bounds.iter().zip(cells) {
            let (xa, xb) = (logit(a), logit(b));
            let h = (xb - xa) / T::from_count(m);
            if nodes.is_empty() {
                nodes.push(a);
            }
            for i in 0..m {
                let x0 = xa + h * T::from_count(i);
                mids.push(logistic(x0 + h * T::lit(0.5)));
                nodes.push(if i + 1 == m { b } else { logistic(x0 + h) });
            }
        }
        Self { nodes, mids }
    }

    pub fn cells(&self) -> usize {
        self.mids.len()
    }

    /// `H(t_{i+1}) - H(t_i)` for every cell.
    pub fn increments(&self, h: impl Fn(T) -> T) -> Vec<T> {
        let values: Vec<T> = self.nodes.iter().map(|&t| h(t)).collect();
        values.windows(2).map(|v| v[1] - v[0]).collect()
    }
}

/// `sum_i sum_j a_i b_j (min(s_i, s_j) - s_i s_j)` for ascending `s`, in O(n).
pub fn bridge_form<T: Scalar>(s: &[T], a: &[T], b: &[T]) -> T {
    assert!(s.len() == a.len() && s.len() == b.len(), "bridge_form length mismatch");
    let n = s.len();
    let mut min_part = CompensatedSum::new();
    let mut a_tail = T::zero();
    let mut b_tail = T::zero();
    let mut a_tail_c = CompensatedSum::new();
    let mut b_tail_c = CompensatedSum::new();
    for k in (0..n).rev() {
        // a_tail / b_tail hold sums over j > k.
        min_part.add(s[k] * (a[k] * b[k] + a[k] * b_tail + b[k] * a_tail));
        a_tail_c.add(a[k]);
        b_tail_c.add(b[k]);
        a_tail = a_tail_c.value();
        b_tail = b_tail_c.value();
    }
    let mut sa = CompensatedSum::new();
    let mut sb = CompensatedSum::new();
    for k in 0..n {
        sa.add(a[k] * s[k]);
        sb.add(b[k] * s[k]);
    }
    min_part.value() - sa.value() * sb.value()
}

/// Terms computed on one grid plus a magnitude used as an absolute tolerance
/// scale when the terms themselves cancel to zero.
#[derive(Debug, Clone)]
pub struct GridTerms<T> {
    pub terms: Vec<T>,
    pub scale: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct StieltjesOutcome<T> {
    /// Richardson-extrapolated terms from the two finest grids.
    pub terms: Vec<T>,
    pub scale: T,
    /// `(cells, raw terms)` for every grid visited.
    pub history: Vec<(usize, Vec<T>)>,
}

/// Doubles the grid from `spec.grid_size` cells until the extrapolated terms
/// change by less than `rel_tol` (relative to `max(sum |terms|, scale)`).
pub fn refine_stieltjes<T: Scalar>(
    breakpoints: &[T],
    spec: &QuadratureSpec,
    max_doublings: usize,
    eval: impl Fn(&StieltjesGrid<T>) -> Result<GridTerms<T>>,
) -> Result<StieltjesOutcome<T>> {
    let bounds = pieces(breakpoints, T::lit(spec.eps_q));
    let lengths: Vec<f64> = bounds.iter().map(|&(a, b)| (logit(b) - logit(a)).as_f64()).collect();
    let total: f64 = lengths.iter().sum();
    let base: Vec<usize> = lengths
        .iter()
        .map(|l| ((spec.grid_size as f64 * l / total).round() as usize).max(4))
        .collect();

    let mut history: Vec<(usize, Vec<T>)> = Vec::new();
    let mut prev_extrap: Option<Vec<T>> = None;
    for level in 0..=max_doublings {
        let cells: Vec<usize> = base.iter().map(|&c| c << level).collect();
        let grid = StieltjesGrid::build(&bounds, &cells);
        let current = eval(&grid)?;
        if current.terms.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericQuality("Stieltjes sum is not finite".into()));
        }
        let extrap: Option<Vec<T>> = history.last().map(|(_, coarse)| {
            current
                .terms
                .iter()
                .zip(coarse)
                .map(|(&fine, &c)| fine + (fine - c) / T::lit(3.0))
                .collect()
        });
        history.push((grid.cells(), current.terms.clone()));
        if let (Some(now), Some(before)) = (&extrap, &prev_extrap) {
            let mag = now.iter().map(|v| v.abs()).fold(T::zero(), |a, b| a + b).max(current.scale);
            let change = now.iter().zip(before).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max);
            if change <= T::lit(spec.rel_tol) * mag {
                return Ok(StieltjesOutcome { terms: now.clone(), scale: current.scale, history });
            }
        }
        prev_extrap = extrap;
    }
    Err(Error::NumericQuality(format!(
        "Stieltjes sums did not settle after {max_doublings} grid doublings"
    )))
}

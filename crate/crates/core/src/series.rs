//! Evaluation of truncated realizations and max-modulus growth on circles.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coeff::SampleSeries;
use crate::error::{Error, Result};
use crate::sigma::SigmaModel;

pub const DEFAULT_ANGULAR_POINTS: usize = 1024;
pub const MAX_ANGULAR_POINTS: usize = 1 << 16;
/// Relative change under grid doubling below which the adaptive maximum stops refining.
pub const ADAPTIVE_REL_TOL: f64 = 1e-3;
/// Default inflation of the deterministic tail bound for random coefficients.
pub const DEFAULT_CONFIDENCE_MULTIPLIER: f64 = 6.0;

const MAX_PLAN_TERMS: u64 = 1_000_000;
/// Term ratio at or below which the remainder is capped geometrically.
const RATIO_CAP: f64 = 0.5;

/// Where and how finely to measure `M_f(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirclePlan {
    pub radius: f64,
    /// Number of equally spaced angles; a power of two.
    pub angular_points: usize,
    /// Number of leading coefficients used.
    pub truncation: usize,
    /// Certified bound on the neglected tail at this radius.
    pub tail_bound: f64,
}

impl CirclePlan {
    pub fn new(radius: f64, angular_points: usize, truncation: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be finite and > 0, got {radius}")));
        }
        if !angular_points.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("angular points must be a power of two, got {angular_points}")));
        }
        Ok(CirclePlan { radius, angular_points, truncation, tail_bound: 0.0 })
    }
}

/// A polynomial value with a bound on its rounding error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    /// `2 N eps * sum |xi_k| |z|^k`, the classical Horner bound.
    pub error_bound: f64,
}

/// Horner evaluation of `sum_k coefficients[k] z^k`.
pub fn horner(coefficients: &[Complex64], z: Complex64) -> Complex64 {
    coefficients.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// `sum_{k < N} xi_k z^k` over the whole stored series.
pub fn eval_truncated(series: &SampleSeries, z: Complex64) -> Result<Evaluation> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("evaluation point must be finite, got {z}")));
    }
    let value = horner(&series.coefficients, z);
    let r = z.norm();
    let abs_sum = series.coefficients.iter().rev().fold(0.0, |acc, c| acc * r + c.norm());
    let n = series.n_terms() as f64;
    Ok(Evaluation { value, error_bound: 2.0 * n * f64::EPSILON * abs_sum })
}

/// Max of `|f_N(r e^{i theta})|` over the plan's angular grid.
pub fn max_modulus(series: &SampleSeries, plan: &CirclePlan) -> Result<f64> {
    if plan.truncation > series.n_terms() {
        return Err(Error::InsufficientTerms { needed: plan.truncation, available: series.n_terms() });
    }
    let coeffs = &series.coefficients[..plan.truncation];
    let m = plan.angular_points;
    let step = std::f64::consts::TAU / m as f64;
    let modulus = |j: usize| horner(coeffs, Complex64::from_polar(plan.radius, step * j as f64)).norm();
    let best = if m * plan.truncation >= 1 << 15 {
        (0..m).into_par_iter().map(modulus).reduce(|| 0.0, f64::max)
    } else {
        (0..m).map(modulus).fold(0.0, f64::max)
    };
    Ok(best)
}

/// Doubles the angular grid from `plan.angular_points` until the maximum moves by less
/// than 0.1% (capped at 2^16 points). Returns the maximum and the grid size used.
pub fn max_modulus_adaptive(series: &SampleSeries, plan: &CirclePlan) -> Result<(f64, usize)> {
    let mut plan = *plan;
    let mut current = max_modulus(series, &plan)?;
    while plan.angular_points < MAX_ANGULAR_POINTS {
        plan.angular_points *= 2;
        let refined = max_modulus(series, &plan)?;
        let change = (refined - current).abs() / refined.max(f64::MIN_POSITIVE);
        current = current.max(refined);
        if change < ADAPTIVE_REL_TOL {
            break;
        }
    }
    Ok((current, plan.angular_points))
}

/// Smallest `N` with `multiplier * sum_{n >= N} sigma_n r^n <= eps`.
///
/// The sum is accumulated exactly up to the first index where the term ratio is
/// at most 1/2 and the remaining terms keep shrinking fast enough; from there on
/// the remainder is capped by a geometric series with that ratio.
pub fn truncation_bound(sigma: &SigmaModel, r: f64, eps: f64, confidence_multiplier: f64) -> Result<CirclePlan> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be finite and > 0, got {r}")));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be finite and > 0, got {eps}")));
    }
    if !(confidence_multiplier.is_finite() && confidence_multiplier > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence multiplier must be finite and > 0, got {confidence_multiplier}"
        )));
    }
    if let Some(root) = sigma.asymptotics().root_limsup {
        if root * r >= 1.0 {
            return Err(Error::NoPlan(format!(
                "r = {r} is not inside the radius of convergence {}",
                crate::ext::reciprocal(root)
            )));
        }
    }
    let ln_r = r.ln();
    let ln_term = |n: u64| -> Result<f64> { Ok(sigma.log_sigma_at(n)? + n as f64 * ln_r) };
    let budget = eps / confidence_multiplier;

    // Scan forward until a capped remainder fits in the budget.
    let mut terms = Vec::new();
    let mut current = ln_term(0)?;
    let mut capped = None;
    for n in 0..MAX_PLAN_TERMS {
        let next = ln_term(n + 1)?;
        terms.push(current.exp());
        let ratio = if current == f64::NEG_INFINITY {
            if next == f64::NEG_INFINITY {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (next - current).exp()
        };
        if ratio <= RATIO_CAP {
            let cap = current.exp() / (1.0 - ratio);
            if cap <= budget {
                capped = Some((n as usize, cap));
                break;
            }
        }
        current = next;
    }
    let (cap_index, cap) = capped.ok_or_else(|| {
        Error::NoPlan(format!(
            "term ratio of sigma_n r^n did not settle at or below {RATIO_CAP} within {MAX_PLAN_TERMS} terms at r = {r}"
        ))
    })?;

    // Walk back while the exact partial sum plus the cap still fits.
    let mut tail = cap;
    let mut n_used = cap_index;
    while n_used > 0 {
        let candidate = tail + terms[n_used - 1];
        if candidate > budget {
            break;
        }
        tail = candidate;
        n_used -= 1;
    }
    let n_used = n_used.max(1);
    Ok(CirclePlan {
        radius: r,
        angular_points: DEFAULT_ANGULAR_POINTS,
        truncation: n_used,
        tail_bound: confidence_multiplier * tail,
    })
}

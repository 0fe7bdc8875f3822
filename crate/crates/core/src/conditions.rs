//! Summability checks for tail conditions and log moments of tail distributions.
//!
//! Positive series are classified from finitely many terms:
//!
//! * converges: the integral-test remainder `int_K^inf a(x) dx` is bounded by
//!   left-endpoint upper sums over doubling panels (valid for nonincreasing
//!   terms), capped geometrically once consecutive panels shrink by at least
//!   half, and the bound is below 1;
//! * diverges: partial sums pass 1e6, or `k ln k a_k` over the last decade of
//!   indices never drops below its maximum over the previous decade, which by
//!   comparison with `sum 1/(k ln k)` means the sum is infinite;
//! * inconclusive otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext;
use crate::tail::TailModel;

pub const DEFAULT_MAX_TERMS: usize = 10_000;
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
/// Smallest index range for which the harmonic-log comparison is attempted.
pub const MIN_WITNESS_TERMS: usize = 100;

const WITNESS_SLACK: f64 = 1e-9;
const RATIO_CAP: f64 = 0.5;
const SUB_PANELS: usize = 8;
const MAX_PANELS: usize = 1100;
const MOMENT_PANELS: usize = 1000;
const MOMENT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    /// `sum_k T(Q^k) < inf`.
    TailSummability,
    /// `sum_k P(|eta_k| / sigma_k < q^k) < inf`.
    LowerQ,
    /// `sum_k T_k(k^{delta k}) < inf`.
    OrderUpper,
    /// `sum_k P(sigma_k / |eta_k| > k^{delta k}) < inf`.
    OrderLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceWitness {
    PartialSumThreshold {
        index: usize,
        #[serde(with = "ext")]
        partial_sum: f64,
    },
    /// `k ln k a_k >= constant` for every `k` in `[from, to]`, without decreasing.
    HarmonicLogComparison {
        from: usize,
        to: usize,
        #[serde(with = "ext")]
        constant: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Converges {
        #[serde(with = "ext")]
        partial_sum: f64,
        #[serde(with = "ext")]
        remainder_bound: f64,
    },
    Diverges {
        witness: DivergenceWitness,
    },
    Inconclusive {
        #[serde(with = "ext")]
        partial_sum: f64,
        terms_used: usize,
    },
}

impl Verdict {
    pub fn converges(&self) -> bool {
        matches!(self, Verdict::Converges { .. })
    }

    pub fn diverges(&self) -> bool {
        matches!(self, Verdict::Diverges { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVerdict {
    pub parameter: f64,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: ConditionId,
    pub parameter_name: String,
    pub verdicts: Vec<ParameterVerdict>,
}

impl ConditionVerdict {
    pub fn all_converge(&self) -> bool {
        self.verdicts.iter().all(|v| v.verdict.converges())
    }

    pub fn all_diverge(&self) -> bool {
        self.verdicts.iter().all(|v| v.verdict.diverges())
    }
}

/// Classify `sum_{k=1}^inf a(k)` where `a` is nonincreasing on `[1, inf)` with values in `[0, 1]`.
///
/// `a` is evaluated at real arguments for the integral remainder. Values outside
/// `[0, 1]` are reported through `out_of_range`.
pub fn classify_series(
    a: impl Fn(f64) -> f64,
    max_terms: usize,
    out_of_range: impl Fn(f64, f64) -> Error,
) -> Result<Verdict> {
    if max_terms == 0 {
        return Err(Error::InvalidArgument("max_terms must be at least 1".into()));
    }
    let term = |x: f64| -> Result<f64> {
        let v = a(x);
        if !(0.0..=1.0).contains(&v) {
            return Err(out_of_range(x, v));
        }
        Ok(v)
    };
    let mut terms = Vec::with_capacity(max_terms);
    let mut sum = 0.0;
    for k in 1..=max_terms {
        let v = term(k as f64)?;
        sum += v;
        terms.push(v);
        if sum > DIVERGENCE_THRESHOLD {
            return Ok(Verdict::Diverges {
                witness: DivergenceWitness::PartialSumThreshold { index: k, partial_sum: sum },
            });
        }
        if v == 0.0 {
            return Ok(Verdict::Converges { partial_sum: sum, remainder_bound: 0.0 });
        }
    }
    let remainder = integral_remainder(&term, max_terms as f64)?;
    if remainder.is_finite() && remainder < 1.0 {
        return Ok(Verdict::Converges { partial_sum: sum, remainder_bound: remainder });
    }
    if let Some(witness) = harmonic_log_witness(&terms, 1) {
        return Ok(Verdict::Diverges { witness });
    }
    Ok(Verdict::Inconclusive { partial_sum: sum, terms_used: max_terms })
}

/// Upper bound on `int_start^inf a(x) dx` for nonincreasing `a`; `inf` when not certified.
fn integral_remainder(term: &impl Fn(f64) -> Result<f64>, start: f64) -> Result<f64> {
    let mut left = start;
    let mut width = 1.0;
    let mut total = 0.0;
    let mut previous: Option<f64> = None;
    for _ in 0..MAX_PANELS {
        let right = left + width;
        if !right.is_finite() {
            break;
        }
        let h = width / SUB_PANELS as f64;
        let mut panel = 0.0;
        let mut hit_zero = false;
        for j in 0..SUB_PANELS {
            let v = term(left + j as f64 * h)?;
            if v == 0.0 {
                hit_zero = true;
                break;
            }
            panel += h * v;
        }
        total += panel;
        if hit_zero {
            return Ok(total);
        }
        if let Some(prev) = previous {
            let ratio = panel / prev;
            if ratio <= RATIO_CAP {
                return Ok(total + panel * ratio / (1.0 - ratio));
            }
        }
        previous = Some(panel);
        left = right;
        width *= 2.0;
    }
    Ok(f64::INFINITY)
}

/// Looks for `w_i = x_i ln x_i c_i` (with `x_i = offset + i`) over the last decade of
/// `values` never falling below its maximum over the previous decade.
fn harmonic_log_witness(values: &[f64], offset: usize) -> Option<DivergenceWitness> {
    let n = values.len();
    if n < MIN_WITNESS_TERMS {
        return None;
    }
    // 1-based positions [n/100, n/10) and [n/10, n] once shifted by `offset`.
    let weight = |i: usize| {
        let x = (i + offset) as f64;
        x * x.ln() * values[i]
    };
    let prev_from = (n / 100).max(1);
    let last_from = n / 10;
    let prev_max = (prev_from..last_from).map(weight).fold(0.0, f64::max);
    let last_min = (last_from..n).map(weight).fold(f64::INFINITY, f64::min);
    if prev_max > 0.0 && last_min >= prev_max * (1.0 - WITNESS_SLACK) {
        Some(DivergenceWitness::HarmonicLogComparison {
            from: last_from + offset,
            to: n - 1 + offset,
            constant: last_min,
        })
    } else {
        None
    }
}

fn verdict_grid(
    condition: ConditionId,
    parameter_name: &str,
    grid: &[f64],
    classify: impl Fn(f64) -> Result<Verdict> + Sync,
) -> Result<ConditionVerdict> {
    let verdicts = grid
        .par_iter()
        .map(|&p| Ok(ParameterVerdict { parameter: p, verdict: classify(p)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionVerdict { condition, parameter_name: parameter_name.into(), verdicts })
}

/// `sum_k T(Q^k)` for every `Q` in the grid.
pub fn check_tail_summability(tail: &TailModel, q_grid: &[f64], max_terms: usize) -> Result<ConditionVerdict> {
    if let Some(q) = q_grid.iter().find(|q| !(q.is_finite() && **q > 1.0)) {
        return Err(Error::InvalidArgument(format!("every Q must be finite and > 1, got {q}")));
    }
    tail.verify_monotone()?;
    verdict_grid(ConditionId::TailSummability, "Q", q_grid, |q| {
        let ln_q = q.ln();
        classify_series(
            |x| tail.survival_ln(x * ln_q),
            max_terms,
            |x, v| Error::TailModel(format!("T(Q^{x}) = {v} lies outside [0, 1]")),
        )
    })
}

/// `sum_k rule(q, k)` for every `q` in the grid, where `rule(q, k) = P(|eta_k| / sigma_k < q^k)`.
pub fn check_q_condition(
    rule: impl Fn(f64, f64) -> f64 + Sync,
    q_grid: &[f64],
    max_terms: usize,
) -> Result<ConditionVerdict> {
    if let Some(q) = q_grid.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::InvalidArgument(format!("every q must lie in (0, 1), got {q}")));
    }
    verdict_grid(ConditionId::LowerQ, "q", q_grid, |q| {
        classify_series(
            |x| rule(q, x),
            max_terms,
            |x, v| Error::Model(format!("lower-tail probability at k = {x}, q = {q} is {v}, outside [0, 1]")),
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderDirection {
    /// Upper-tail probabilities `T_k(k^{delta k})`.
    Upper,
    /// Probabilities `P(sigma_k / |eta_k| > k^{delta k})`.
    Lower,
}

/// `sum_k rule(k, delta k ln k)` for every `delta`, where `rule(k, ln_u)` is the
/// indicated per-index probability at threshold `u = e^{ln_u}`.
pub fn check_order_conditions(
    rule: impl Fn(f64, f64) -> f64 + Sync,
    delta_grid: &[f64],
    direction: OrderDirection,
    max_terms: usize,
) -> Result<ConditionVerdict> {
    if let Some(d) = delta_grid.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::InvalidArgument(format!("every delta must be finite and > 0, got {d}")));
    }
    let condition = match direction {
        OrderDirection::Upper => ConditionId::OrderUpper,
        OrderDirection::Lower => ConditionId::OrderLower,
    };
    verdict_grid(condition, "delta", delta_grid, |delta| {
        classify_series(
            |x| rule(x, delta * x * x.ln()),
            max_terms,
            |x, v| Error::TailModel(format!("tail at k = {x}, delta = {delta} is {v}, outside [0, 1]")),
        )
    })
}

/// The same tail at every index, as a rule for [`check_order_conditions`].
pub fn uniform_tail_rule(tail: &TailModel) -> impl Fn(f64, f64) -> f64 + Sync + '_ {
    move |_k, ln_u| tail.survival_ln(ln_u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogMomentVariant {
    /// `E ln(e + nu)`.
    LogEPlusNu,
    /// `E ln(e + tau)`; the same functional, for a common-factor variable.
    LogEPlusTau,
    /// `E ln nu / ln ln nu`, with the argument clamped below at `e^e`.
    LogOverLogLog,
}

const E_TO_E: f64 = 15.154_262_241_479_262;

impl LogMomentVariant {
    pub fn g(self, u: f64) -> f64 {
        match self {
            LogMomentVariant::LogEPlusNu | LogMomentVariant::LogEPlusTau => (std::f64::consts::E + u).ln(),
            LogMomentVariant::LogOverLogLog => {
                let l = u.max(E_TO_E).ln();
                l / l.ln()
            }
        }
    }

    pub fn g_prime(self, u: f64) -> f64 {
        match self {
            LogMomentVariant::LogEPlusNu | LogMomentVariant::LogEPlusTau => 1.0 / (std::f64::consts::E + u),
            LogMomentVariant::LogOverLogLog => {
                if u <= E_TO_E {
                    0.0
                } else {
                    let l = u.ln();
                    let ll = l.ln();
                    (ll - 1.0) / (u * ll * ll)
                }
            }
        }
    }
}

/// `E g(nu) = g(u0) + int_{u0}^inf g'(u) T(u) du` for the variable with tail `T`.
///
/// The integral runs over doubling panels. It is finite once `T` reaches 0 or
/// once panel contributions shrink geometrically and the extrapolated rest is
/// negligible; it is `+inf` when partial values pass 1e6 or the panels pass the
/// harmonic-log comparison.
pub fn log_moment(tail: &TailModel, variant: LogMomentVariant) -> Result<f64> {
    tail.verify_monotone()?;
    let u0 = tail.support_floor();
    let integrand = |u: f64| variant.g_prime(u) * tail.survival(u);
    let mut value = variant.g(u0);
    let mut panels: Vec<f64> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let (mut left, mut right) = if u0 < 1.0 { (u0, 1.0) } else { (u0, 2.0 * u0) };
    for _ in 0..MOMENT_PANELS {
        if !right.is_finite() {
            break;
        }
        let part = quadrature::integrate(integrand, left, right, 1e-15 * value.max(1.0)).integral;
        value += part;
        if value > DIVERGENCE_THRESHOLD {
            return Ok(f64::INFINITY);
        }
        if tail.survival(right) == 0.0 {
            return Ok(value);
        }
        if let Some(&prev) = panels.last() {
            ratios.push(if prev > 0.0 { part / prev } else { f64::INFINITY });
        }
        panels.push(part);
        if ratios.len() >= 4 {
            let worst = ratios[ratios.len() - 4..].iter().copied().fold(0.0, f64::max);
            if worst < 1.0 {
                let rest = part * worst / (1.0 - worst);
                if rest <= MOMENT_REL_TOL * value {
                    return Ok(value + rest);
                }
            }
        }
        if panels.len() >= MIN_WITNESS_TERMS
            && panels.len().is_multiple_of(10)
            && harmonic_log_witness(&panels, 1).is_some()
        {
            return Ok(f64::INFINITY);
        }
        left = right;
        right *= 2.0;
    }
    Err(Error::Inconclusive { partial: value })
}

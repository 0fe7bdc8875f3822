//! Tail functions `u -> T(u) = P(|eta| > u)`.
//!
//! Tails are evaluated from `ln u` so that thresholds such as `Q^k` or
//! `k^(delta k)` can be passed without overflowing.

use std::fmt;
use std::sync::Arc;

use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

type TailFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum TailFamily {
    /// `min(1, u^(-b))`, support floor 1.
    Power { b: f64 },
    /// `1 / sqrt(ln y)` for `y >= e`, clamped to 1 below `e`.
    LogSqrt,
    /// `min(1, 2 exp(-u^2 / 2))`.
    Subgaussian,
    /// `P(|N(0,1)| > u) = erfc(u / sqrt 2)`.
    GaussianModulus,
    /// `min(1, 1 / ln u)`, support floor `e`.
    InverseLog,
    /// Degenerate variable equal to `at`.
    PointMass { at: f64 },
    /// Rule evaluated at `u` (not `ln u`).
    Custom(TailFn),
}

impl fmt::Debug for TailFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailFamily::Power { b } => write!(f, "Power {{ b: {b} }}"),
            TailFamily::LogSqrt => write!(f, "LogSqrt"),
            TailFamily::Subgaussian => write!(f, "Subgaussian"),
            TailFamily::GaussianModulus => write!(f, "GaussianModulus"),
            TailFamily::InverseLog => write!(f, "InverseLog"),
            TailFamily::PointMass { at } => write!(f, "PointMass {{ at: {at} }}"),
            TailFamily::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TailModel {
    family: TailFamily,
    support_floor: f64,
    monotone_certified: bool,
}

const E: f64 = std::f64::consts::E;

impl TailModel {
    pub fn power(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidArgument(format!("power tail exponent must be > 0, got {b}")));
        }
        Ok(Self::certified(TailFamily::Power { b }, 1.0))
    }

    pub fn log_sqrt() -> Self {
        Self::certified(TailFamily::LogSqrt, E)
    }

    pub fn subgaussian() -> Self {
        Self::certified(TailFamily::Subgaussian, 0.0)
    }

    pub fn gaussian_modulus() -> Self {
        Self::certified(TailFamily::GaussianModulus, 0.0)
    }

    pub fn inverse_log() -> Self {
        Self::certified(TailFamily::InverseLog, E)
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        if !(at.is_finite() && at >= 0.0) {
            return Err(Error::InvalidArgument(format!("point mass location must be finite and >= 0, got {at}")));
        }
        Ok(Self::certified(TailFamily::PointMass { at }, at))
    }

    /// A user rule `u -> T(u)`; monotonicity is spot-checked, not assumed.
    pub fn custom(support_floor: f64, rule: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(support_floor.is_finite() && support_floor >= 0.0) {
            return Err(Error::InvalidArgument(format!("support floor must be finite and >= 0, got {support_floor}")));
        }
        Ok(TailModel { family: TailFamily::Custom(Arc::new(rule)), support_floor, monotone_certified: false })
    }

    fn certified(family: TailFamily, support_floor: f64) -> Self {
        TailModel { family, support_floor, monotone_certified: true }
    }

    pub fn family(&self) -> &TailFamily {
        &self.family
    }

    pub fn support_floor(&self) -> f64 {
        self.support_floor
    }

    pub fn monotone_certified(&self) -> bool {
        self.monotone_certified
    }

    pub fn has_closed_form_inverse(&self) -> bool {
        !matches!(self.family, TailFamily::Custom(_))
    }

    /// `T(u)`.
    pub fn survival(&self, u: f64) -> f64 {
        if u < self.support_floor {
            return 1.0;
        }
        match &self.family {
            TailFamily::Custom(rule) => rule(u),
            _ => self.survival_ln(u.ln()),
        }
    }

    /// `T(e^ln_u)`.
    pub fn survival_ln(&self, ln_u: f64) -> f64 {
        match &self.family {
            TailFamily::Power { b } => {
                if ln_u <= 0.0 {
                    1.0
                } else {
                    (-b * ln_u).exp()
                }
            }
            TailFamily::LogSqrt => {
                if ln_u <= 1.0 {
                    1.0
                } else {
                    1.0 / ln_u.sqrt()
                }
            }
            TailFamily::InverseLog => {
                if ln_u <= 1.0 {
                    1.0
                } else {
                    1.0 / ln_u
                }
            }
            TailFamily::Subgaussian => {
                let u = ln_u.exp();
                (2.0 * (-0.5 * u * u).exp()).min(1.0)
            }
            TailFamily::GaussianModulus => erfc(ln_u.exp() / std::f64::consts::SQRT_2),
            TailFamily::PointMass { at } => {
                if ln_u.exp() < *at {
                    1.0
                } else {
                    0.0
                }
            }
            TailFamily::Custom(rule) => {
                let u = ln_u.exp();
                if u < self.support_floor {
                    1.0
                } else {
                    rule(u)
                }
            }
        }
    }

    /// Spot-check monotonicity on a logarithmic grid. Certified tails pass trivially.
    pub fn verify_monotone(&self) -> Result<()> {
        if self.monotone_certified {
            return Ok(());
        }
        let start = self.support_floor.max(1e-3);
        let mut prev = 1.0_f64;
        // 10^(j/16) for j up to 16 * 300 covers thresholds to 1e300.
        for j in 0..=16 * 300 {
            let u = start * 10f64.powf(j as f64 / 16.0);
            let t = self.survival(u);
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::TailModel(format!("T({u}) = {t} lies outside [0, 1]")));
            }
            if t > prev + 1e-12 {
                return Err(Error::TailModel(format!("tail increases near u = {u}: {prev} -> {t}")));
            }
            prev = t;
        }
        Ok(())
    }
}

/// `inf { u : T(u) <= p }` for `p` in `(0, 1)`.
pub fn inverse_tail_sample(tail: &TailModel, p: f64) -> Result<f64> {
    Ok(inverse_tail_sample_ln(tail, p)?.exp())
}

/// `ln` of [`inverse_tail_sample`]; stays finite for tails whose quantiles overflow `f64`.
pub fn inverse_tail_sample_ln(tail: &TailModel, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("uniform value must lie in (0, 1), got {p}")));
    }
    let ln_floor = tail.support_floor.ln();
    let ln_u = match &tail.family {
        TailFamily::Power { b } => -p.ln() / b,
        TailFamily::LogSqrt => 1.0 / (p * p),
        TailFamily::InverseLog => 1.0 / p,
        TailFamily::Subgaussian => (2.0 * (2.0 / p).ln()).sqrt().ln(),
        TailFamily::GaussianModulus => (std::f64::consts::SQRT_2 * erfc_inv(p)).ln(),
        TailFamily::PointMass { at } => at.ln(),
        TailFamily::Custom(_) => return bisect_inverse(tail, p).map(f64::ln),
    };
    Ok(ln_u.max(ln_floor))
}

fn bisect_inverse(tail: &TailModel, p: f64) -> Result<f64> {
    let floor = tail.support_floor;
    let check = |u: f64| -> Result<f64> {
        let t = tail.survival(u);
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TailModel(format!("T({u}) = {t} lies outside [0, 1]")));
        }
        Ok(t)
    };
    if check(floor)? <= p {
        return Ok(floor);
    }
    let mut lo = floor;
    let mut t_lo = check(lo)?;
    let mut hi = if floor > 0.0 { floor * 2.0 } else { 1.0 };
    loop {
        let t_hi = check(hi)?;
        if t_hi > t_lo + 1e-12 {
            return Err(Error::TailModel(format!("tail is not monotone between {lo} and {hi}")));
        }
        if t_hi <= p {
            break;
        }
        lo = hi;
        t_lo = t_hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::TailModel(format!("no quantile found for p = {p}: tail stays above it")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let t = check(mid)?;
        if t > t_lo + 1e-12 {
            return Err(Error::TailModel(format!("tail is not monotone near {mid}")));
        }
        if t <= p {
            hi = mid;
        } else {
            lo = mid;
            t_lo = t;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_inverses() {
        let p2 = TailModel::power(2.0).unwrap();
        assert!((inverse_tail_sample(&p2, 0.25).unwrap() - 2.0).abs() < 1e-14);
        let ls = TailModel::log_sqrt();
        assert!((inverse_tail_sample(&ls, 0.5).unwrap() - 4f64.exp()).abs() < 1e-10);
        let sg = TailModel::subgaussian();
        let p = 2.0 * (-2.0f64).exp();
        assert!((inverse_tail_sample(&sg, p).unwrap() - 2.0).abs() < 1e-12);
        let pm = TailModel::point_mass(4.0).unwrap();
        assert_eq!(inverse_tail_sample(&pm, 0.3).unwrap(), 4.0);
    }

    #[test]
    fn bisection_agrees_with_closed_form() {
        // oracle route: the same tail as an opaque rule, inverted by bisection
        let opaque = TailModel::custom(E, |y: f64| 1.0 / y.ln().sqrt()).unwrap();
        let closed = TailModel::log_sqrt();
        for p in [0.9, 0.5, 0.3, 0.2] {
            let a = inverse_tail_sample(&opaque, p).unwrap();
            let b = inverse_tail_sample(&closed, p).unwrap();
            assert!((a - b).abs() <= 1e-9 * b, "p = {p}: {a} vs {b}");
        }
        let sg = TailModel::custom(0.0, |u: f64| (2.0 * (-0.5 * u * u).exp()).min(1.0)).unwrap();
        let p = 2.0 * (-2.0f64).exp();
        assert!((inverse_tail_sample(&sg, p).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_modulus_inverse_round_trips() {
        let g = TailModel::gaussian_modulus();
        for p in [0.9, 0.5, 0.05, 1e-6] {
            let u = inverse_tail_sample(&g, p).unwrap();
            assert!((g.survival(u) - p).abs() <= 1e-10 * p.max(1e-3), "p = {p}");
        }
    }

    #[test]
    fn log_domain_quantiles_do_not_overflow() {
        let ls = TailModel::log_sqrt();
        let l = inverse_tail_sample_ln(&ls, 1e-3).unwrap();
        assert_eq!(l, 1e6);
        assert_eq!(inverse_tail_sample(&ls, 1e-3).unwrap(), f64::INFINITY);
    }

    #[test]
    fn non_monotone_custom_tail_is_rejected() {
        let bad = TailModel::custom(1.0, |u: f64| if u > 10.0 && u < 20.0 { 0.9 } else { 1.0 / u }).unwrap();
        assert!(matches!(bad.verify_monotone(), Err(Error::TailModel(_))));
        assert!(matches!(inverse_tail_sample(&bad, 0.05), Err(Error::TailModel(_))));
        let good = TailModel::custom(1.0, |u: f64| 1.0 / u).unwrap();
        assert!(good.verify_monotone().is_ok());
    }

    #[test]
    fn survival_below_floor_is_one() {
        let ls = TailModel::log_sqrt();
        assert_eq!(ls.survival(1.0), 1.0);
        assert_eq!(ls.survival_ln(0.5), 1.0);
        assert!((ls.survival(4f64.exp()) - 0.5).abs() < 1e-15);
        let pm = TailModel::point_mass(4.0).unwrap();
        assert_eq!(pm.survival(3.9), 1.0);
        assert_eq!(pm.survival(4.0), 0.0);
    }

    #[test]
    fn out_of_range_uniform_is_an_argument_error() {
        let p = TailModel::power(1.0).unwrap();
        assert!(inverse_tail_sample(&p, 0.0).is_err());
        assert!(inverse_tail_sample(&p, 1.0).is_err());
    }
}

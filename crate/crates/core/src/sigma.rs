//! Deterministic coefficient-scale sequences `n -> sigma_n`.
//!
//! Every built-in family is evaluated in the log domain, so `ln sigma_n` is
//! available far beyond the point where `sigma_n` itself under- or overflows.
//! Built-in families also carry their closed-form asymptotics (root limsup,
//! order and the coefficient-formula type), which the theory engine prefers
//! over windowed estimates.

use std::fmt;
use std::sync::Arc;

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// How an explicit list is continued past its last entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    /// Indices past the end are an error.
    #[default]
    ErrorBeyondEnd,
    RepeatLast,
    /// Continue with the ratio of the last two entries.
    GeometricFromLastTwo,
}

type RuleFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// User-supplied evaluation rule.
#[derive(Clone)]
pub enum CustomRule {
    /// Returns `sigma_n`; negative or non-finite outputs are rejected.
    Linear(RuleFn),
    /// Returns `ln sigma_n`; `-inf` means `sigma_n = 0`, NaN and `+inf` are rejected.
    LogDomain(RuleFn),
}

#[derive(Clone)]
pub enum SigmaFamily {
    /// `sigma_n = c`.
    Constant(f64),
    /// `sigma_n = a^(-n)`.
    Geometric(f64),
    /// `sigma_n = (n!)^(-alpha)`.
    FactorialPower(f64),
    /// `sigma_n = n^(-theta n)`.
    SuperGeometric(f64),
    ExplicitList {
        values: Vec<f64>,
        extension: Extension,
    },
    Custom(CustomRule),
}

impl fmt::Debug for SigmaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaFamily::Constant(c) => write!(f, "Constant({c})"),
            SigmaFamily::Geometric(a) => write!(f, "Geometric({a})"),
            SigmaFamily::FactorialPower(a) => write!(f, "FactorialPower({a})"),
            SigmaFamily::SuperGeometric(t) => write!(f, "SuperGeometric({t})"),
            SigmaFamily::ExplicitList { values, extension } => {
                write!(f, "ExplicitList(len={}, {:?})", values.len(), extension)
            }
            SigmaFamily::Custom(CustomRule::Linear(_)) => write!(f, "Custom(linear)"),
            SigmaFamily::Custom(CustomRule::LogDomain(_)) => write!(f, "Custom(log)"),
        }
    }
}

/// Closed-form asymptotics of a sigma sequence. `None` means unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Asymptotics {
    /// `limsup sigma_n^(1/n)`.
    pub root_limsup: Option<f64>,
    /// `limsup n ln n / |ln sigma_n|`.
    pub order: Option<f64>,
    /// `limsup n^(1/order) sigma_n^(1/n)`.
    pub paper_type: Option<f64>,
}

/// A coefficient-scale sequence, optionally multiplied by `scale * n^poly_exponent`.
///
/// The multipliers leave every asymptotic quantity unchanged, since
/// `(c n^p)^(1/n) -> 1`.
#[derive(Clone, Debug)]
pub struct SigmaModel {
    family: SigmaFamily,
    scale: f64,
    poly_exponent: f64,
    asymptotics: Asymptotics,
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite and > 0, got {x}")))
    }
}

impl SigmaModel {
    fn with_family(family: SigmaFamily, asymptotics: Asymptotics) -> Self {
        SigmaModel { family, scale: 1.0, poly_exponent: 0.0, asymptotics }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidArgument(format!("constant must be finite and >= 0, got {c}")));
        }
        let root = if c == 0.0 { 0.0 } else { 1.0 };
        Ok(Self::with_family(SigmaFamily::Constant(c), Asymptotics { root_limsup: Some(root), ..Default::default() }))
    }

    pub fn geometric(a: f64) -> Result<Self> {
        let a = positive("geometric base a", a)?;
        Ok(Self::with_family(
            SigmaFamily::Geometric(a),
            Asymptotics { root_limsup: Some(1.0 / a), ..Default::default() },
        ))
    }

    pub fn factorial_power(alpha: f64) -> Result<Self> {
        let alpha = positive("factorial power alpha", alpha)?;
        Ok(Self::with_family(
            SigmaFamily::FactorialPower(alpha),
            Asymptotics {
                root_limsup: Some(0.0),
                order: Some(1.0 / alpha),
                // n^alpha (n!)^(-alpha/n) -> e^alpha by Stirling.
                paper_type: Some(alpha.exp()),
            },
        ))
    }

    pub fn super_geometric(theta: f64) -> Result<Self> {
        let theta = positive("super-geometric theta", theta)?;
        Ok(Self::with_family(
            SigmaFamily::SuperGeometric(theta),
            Asymptotics { root_limsup: Some(0.0), order: Some(1.0 / theta), paper_type: Some(1.0) },
        ))
    }

    pub fn explicit(values: Vec<f64>, extension: Extension) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("explicit sigma list is empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("explicit sigma[{i}] = {v} is not finite and >= 0")));
        }
        if extension == Extension::GeometricFromLastTwo {
            let n = values.len();
            if n < 2 || values[n - 2] == 0.0 {
                return Err(Error::InvalidArgument(
                    "geometric extension needs two trailing entries with a nonzero penultimate one".into(),
                ));
            }
        }
        Ok(Self::with_family(SigmaFamily::ExplicitList { values, extension }, Asymptotics::default()))
    }

    pub fn custom_linear(rule: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        Self::with_family(SigmaFamily::Custom(CustomRule::Linear(Arc::new(rule))), Asymptotics::default())
    }

    pub fn custom_log(rule: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        Self::with_family(SigmaFamily::Custom(CustomRule::LogDomain(Arc::new(rule))), Asymptotics::default())
    }

    /// Attach user-supplied asymptotics. They are never inferred for custom rules.
    pub fn with_asymptotics(mut self, asymptotics: Asymptotics) -> Self {
        self.asymptotics = asymptotics;
        self
    }

    /// Drop the closed-form asymptotics so that every consumer falls back to windowed estimates.
    pub fn without_asymptotics(mut self) -> Self {
        self.asymptotics = Asymptotics::default();
        self
    }

    /// Multiply every `sigma_n` by `c > 0`.
    pub fn scaled(mut self, c: f64) -> Result<Self> {
        self.scale *= positive("scale", c)?;
        Ok(self)
    }

    /// Multiply `sigma_n` by `n^p` (the factor is 1 at `n = 0`).
    pub fn with_poly_prefactor(mut self, p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::InvalidArgument(format!("polynomial exponent must be finite, got {p}")));
        }
        self.poly_exponent += p;
        Ok(self)
    }

    pub fn family(&self) -> &SigmaFamily {
        &self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn poly_exponent(&self) -> f64 {
        self.poly_exponent
    }

    pub fn asymptotics(&self) -> Asymptotics {
        self.asymptotics
    }

    /// `ln sigma_n`, `-inf` when `sigma_n = 0`.
    pub fn log_sigma_at(&self, n: u64) -> Result<f64> {
        let base = match &self.family {
            SigmaFamily::Constant(c) => c.ln(),
            SigmaFamily::Geometric(a) => -(n as f64) * a.ln(),
            SigmaFamily::FactorialPower(alpha) => -alpha * ln_factorial(n),
            SigmaFamily::SuperGeometric(theta) => {
                if n == 0 {
                    0.0
                } else {
                    let n = n as f64;
                    -theta * n * n.ln()
                }
            }
            SigmaFamily::ExplicitList { values, extension } => explicit_log(values, *extension, n)?,
            SigmaFamily::Custom(CustomRule::Linear(rule)) => {
                let v = rule(n);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::ModelEvaluation { index: n, value: v });
                }
                v.ln()
            }
            SigmaFamily::Custom(CustomRule::LogDomain(rule)) => {
                let v = rule(n);
                if v.is_nan() || v == f64::INFINITY {
                    return Err(Error::ModelEvaluation { index: n, value: v });
                }
                v
            }
        };
        if base == f64::NEG_INFINITY {
            return Ok(base);
        }
        let mut out = base;
        if self.scale != 1.0 {
            out += self.scale.ln();
        }
        if self.poly_exponent != 0.0 && n > 0 {
            out += self.poly_exponent * (n as f64).ln();
        }
        Ok(out)
    }

    /// `sigma_n`, obtained by exponentiating the log value (`+inf`/`0` on overflow/underflow).
    pub fn sigma_at(&self, n: u64) -> Result<f64> {
        Ok(self.log_sigma_at(n)?.exp())
    }
}

fn explicit_log(values: &[f64], extension: Extension, n: u64) -> Result<f64> {
    let len = values.len();
    if let Some(v) = usize::try_from(n).ok().and_then(|i| values.get(i)) {
        return Ok(v.ln());
    }
    let last = values[len - 1];
    match extension {
        Extension::ErrorBeyondEnd => Err(Error::BeyondExplicitList { index: n, len }),
        Extension::RepeatLast => Ok(last.ln()),
        Extension::GeometricFromLastTwo => {
            let step = last.ln() - values[len - 2].ln();
            let beyond = (n - (len as u64 - 1)) as f64;
            if last == 0.0 {
                Ok(f64::NEG_INFINITY)
            } else {
                Ok(last.ln() + beyond * step)
            }
        }
    }
}

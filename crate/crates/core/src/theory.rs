//! Deterministic characteristics of a sigma sequence: radius, order and type.
//!
//! Built-in families answer from their closed forms. Everything else falls
//! back to a windowed surrogate for the limsup: the supremum over the outer
//! half-window `[n_max/2, n_max]`, reported together with the supremum over
//! `[n_max/4, n_max/2]` and their relative gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext;
use crate::sigma::SigmaModel;

pub const DEFAULT_WINDOW: (u64, u64) = (2, 4096);
/// Radius is declared infinite when the log of the root sup falls by at least this much
/// from the inner to the outer half-window.
pub const ROOT_DRIFT_ENTIRE: f64 = 0.01;

/// A windowed supremum with its stability diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowedSup {
    /// Sup over `[n_max/2, n_max]`.
    #[serde(with = "ext")]
    pub estimate: f64,
    /// Sup over `[n_max/4, n_max/2]` (clipped below at `n_min`).
    #[serde(with = "ext")]
    pub inner: f64,
    /// `|estimate - inner| / max(|estimate|, |inner|)`, 0 when both vanish.
    #[serde(with = "ext")]
    pub relative_gap: f64,
    pub window: (u64, u64),
}

fn check_window(window: (u64, u64)) -> Result<()> {
    let (n_min, n_max) = window;
    if n_min < 2 || n_max < 2 * n_min {
        return Err(Error::InvalidArgument(format!("window ({n_min}, {n_max}) needs n_min >= 2 and n_max >= 2 n_min")));
    }
    Ok(())
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let scale = a.abs().max(b.abs());
    if scale.is_infinite() {
        return f64::INFINITY;
    }
    (a - b).abs() / scale
}

/// Outer and inner sups of `value(n)`, where `value` returns `None` for skipped indices.
fn windowed_sup(
    window: (u64, u64),
    mut value: impl FnMut(u64) -> Result<Option<f64>>,
) -> Result<(Option<f64>, Option<f64>)> {
    let (n_min, n_max) = window;
    let outer_start = n_max / 2;
    let inner_start = (n_max / 4).max(n_min);
    let mut sup = |from: u64, to: u64| -> Result<Option<f64>> {
        let mut best: Option<f64> = None;
        for n in from..=to {
            if let Some(v) = value(n)? {
                best = Some(best.map_or(v, |b| b.max(v)));
            }
        }
        Ok(best)
    };
    let outer = sup(outer_start, n_max)?;
    let inner = sup(inner_start, outer_start.saturating_sub(1).max(inner_start))?;
    Ok((outer, inner))
}

/// `limsup (e^{ln_rule(n)})^{1/n}` from a log-domain rule; `-inf` stands for zero.
pub fn limsup_root_ln(ln_rule: impl Fn(u64) -> Result<f64>, window: (u64, u64)) -> Result<WindowedSup> {
    check_window(window)?;
    let (outer, inner) = windowed_sup(window, |n| {
        let l = ln_rule(n)?;
        if l.is_nan() || l == f64::INFINITY {
            return Err(Error::NonFiniteSequence { index: n });
        }
        Ok(Some(l / n as f64))
    })?;
    let estimate = outer.unwrap_or(f64::NEG_INFINITY).exp();
    let inner = inner.unwrap_or(f64::NEG_INFINITY).exp();
    Ok(WindowedSup { estimate, inner, relative_gap: relative_gap(estimate, inner), window })
}

/// `limsup rule(n)^{1/n}` for a rule returning nonnegative values.
pub fn limsup_root(rule: impl Fn(u64) -> f64, window: (u64, u64)) -> Result<WindowedSup> {
    limsup_root_ln(
        |n| {
            let v = rule(n);
            if !(v >= 0.0) || v == f64::INFINITY {
                return Err(Error::NonFiniteSequence { index: n });
            }
            Ok(v.ln())
        },
        window,
    )
}

/// Where a characteristic came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    WindowedEstimate {
        window: (u64, u64),
        #[serde(with = "ext")]
        residual_spread: f64,
    },
}

/// A value in `[0, inf]` with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristic {
    pub value: f64,
    pub provenance: Provenance,
}

impl Characteristic {
    fn analytic(value: f64) -> Self {
        Characteristic { value, provenance: Provenance::Analytic }
    }

    fn windowed(value: f64, sup: &WindowedSup) -> Self {
        Characteristic {
            value,
            provenance: Provenance::WindowedEstimate { window: sup.window, residual_spread: sup.relative_gap },
        }
    }
}

/// Radius of convergence `1 / limsup sigma_n^{1/n}`.
///
/// Without closed-form asymptotics the root sup is windowed; a sup that is 0, or
/// that keeps falling between the two half-windows (log drift of at least
/// [`ROOT_DRIFT_ENTIRE`]), is read as a root limsup of 0 and gives radius `inf`.
pub fn radius_of(sigma: &SigmaModel) -> Result<Characteristic> {
    radius_windowed(sigma, DEFAULT_WINDOW)
}

pub fn radius_windowed(sigma: &SigmaModel, window: (u64, u64)) -> Result<Characteristic> {
    if let Some(root) = sigma.asymptotics().root_limsup {
        return Ok(Characteristic::analytic(ext::reciprocal(root)));
    }
    let sup = limsup_root_ln(|n| sigma.log_sigma_at(n), window)?;
    let falling = sup.estimate > 0.0 && (sup.inner / sup.estimate).ln() >= ROOT_DRIFT_ENTIRE;
    let radius = if sup.estimate == 0.0 || falling { f64::INFINITY } else { ext::reciprocal(sup.estimate) };
    Ok(Characteristic::windowed(radius, &sup))
}

/// Windowed `limsup n ln n / |ln sigma_n|`, ignoring closed forms.
pub fn order_windowed(sigma: &SigmaModel, window: (u64, u64)) -> Result<Characteristic> {
    check_window(window)?;
    if radius_windowed(sigma, window)?.value != f64::INFINITY {
        return Err(Error::NotEntire);
    }
    let value = |n: u64| -> Result<Option<f64>> {
        let l = sigma.log_sigma_at(n)?;
        if l == f64::NEG_INFINITY {
            return Ok(None);
        }
        if l == 0.0 {
            return Err(Error::DegenerateOrder { index: n });
        }
        let nf = n as f64;
        Ok(Some(nf * nf.ln() / l.abs()))
    };
    match windowed_sup(window, value)? {
        (Some(outer), inner) => {
            let inner = inner.unwrap_or(outer);
            let sup = WindowedSup { estimate: outer, inner, relative_gap: relative_gap(outer, inner), window };
            Ok(Characteristic::windowed(outer, &sup))
        }
        (None, _) => Err(Error::DegenerateSeries),
    }
}

/// Order `limsup n ln n / |ln sigma_n|`; requires an infinite radius.
pub fn order_of(sigma: &SigmaModel) -> Result<Characteristic> {
    if let (Some(order), Some(root)) = (sigma.asymptotics().order, sigma.asymptotics().root_limsup) {
        if root != 0.0 {
            return Err(Error::NotEntire);
        }
        return Ok(Characteristic::analytic(order));
    }
    order_windowed(sigma, DEFAULT_WINDOW)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidArgument(format!("order must be finite and > 0, got {rho}")));
    }
    Ok(())
}

/// Windowed `limsup n^{1/rho} sigma_n^{1/n}`, ignoring closed forms.
pub fn paper_type_windowed(sigma: &SigmaModel, rho: f64, window: (u64, u64)) -> Result<Characteristic> {
    check_rho(rho)?;
    let sup = limsup_root_ln(|n| Ok(sigma.log_sigma_at(n)? + n as f64 * (n as f64).ln() / rho), window)?;
    Ok(Characteristic::windowed(sup.estimate, &sup))
}

/// Coefficient-formula type `limsup n^{1/rho} sigma_n^{1/n}`.
///
/// The closed form is used only when `rho` is the model's own order; at any other
/// order the value is estimated.
pub fn paper_type_of(sigma: &SigmaModel, rho: f64) -> Result<Characteristic> {
    check_rho(rho)?;
    let a = sigma.asymptotics();
    if let (Some(order), Some(t)) = (a.order, a.paper_type) {
        if order == rho {
            return Ok(Characteristic::analytic(t));
        }
    }
    paper_type_windowed(sigma, rho, DEFAULT_WINDOW)
}

/// Classical type `paper_type^rho / (e rho)`.
pub fn levin_type_of(paper_type: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(paper_type >= 0.0) {
        return Err(Error::InvalidArgument(format!("type must be >= 0, got {paper_type}")));
    }
    Ok((rho * paper_type.ln() - 1.0 - rho.ln()).exp())
}

/// All characteristics of a model. `order` and the types are present only for entire series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristics {
    pub radius: Characteristic,
    pub order: Option<Characteristic>,
    pub paper_type: Option<Characteristic>,
    pub levin_type: Option<Characteristic>,
}

pub fn characterize(sigma: &SigmaModel) -> Result<Characteristics> {
    let radius = radius_of(sigma)?;
    if radius.value != f64::INFINITY {
        return Ok(Characteristics { radius, order: None, paper_type: None, levin_type: None });
    }
    let order = order_of(sigma)?;
    if !(order.value.is_finite() && order.value > 0.0) {
        return Ok(Characteristics { radius, order: Some(order), paper_type: None, levin_type: None });
    }
    let paper_type = paper_type_of(sigma, order.value)?;
    let levin = levin_type_of(paper_type.value, order.value)?;
    let provenance = match (order.provenance, paper_type.provenance) {
        (Provenance::Analytic, Provenance::Analytic) => Provenance::Analytic,
        (_, p @ Provenance::WindowedEstimate { .. }) | (p, _) => p,
    };
    Ok(Characteristics {
        radius,
        order: Some(order),
        paper_type: Some(paper_type),
        levin_type: Some(Characteristic { value: levin, provenance }),
    })
}

#[derive(Serialize, Deserialize)]
struct CharacteristicsJson {
    #[serde(with = "ext")]
    radius: f64,
    #[serde(with = "ext::opt", skip_serializing_if = "Option::is_none", default)]
    order: Option<f64>,
    #[serde(with = "ext::opt", skip_serializing_if = "Option::is_none", default)]
    paper_type: Option<f64>,
    #[serde(with = "ext::opt", skip_serializing_if = "Option::is_none", default)]
    levin_type: Option<f64>,
    provenance: ProvenanceJson,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceJson {
    radius: Provenance,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    order: Option<Provenance>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    paper_type: Option<Provenance>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    levin_type: Option<Provenance>,
}

impl Characteristics {
    pub fn to_json(&self) -> serde_json::Value {
        let doc = CharacteristicsJson {
            radius: self.radius.value,
            order: self.order.map(|c| c.value),
            paper_type: self.paper_type.map(|c| c.value),
            levin_type: self.levin_type.map(|c| c.value),
            provenance: ProvenanceJson {
                radius: self.radius.provenance,
                order: self.order.map(|c| c.provenance),
                paper_type: self.paper_type.map(|c| c.provenance),
                levin_type: self.levin_type.map(|c| c.provenance),
            },
        };
        serde_json::to_value(doc).expect("characteristics serialize")
    }
}

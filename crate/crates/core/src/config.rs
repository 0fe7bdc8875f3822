//! Configuration files: TOML with one model, experiment or sweep per file.
//!
//! See `docs/config.md` for the full schema. Numbers accept `inf`.

use std::path::Path;

use serde::Deserialize;

use crate::coeff::{BaseSampler, CoefficientFamily, CoefficientModel, PhaseRule};
use crate::conditions::{LogMomentVariant, OrderDirection, DEFAULT_MAX_TERMS};
use crate::empirical::{
    ExpectedVerdict, ExperimentConfig, GrowthOptions, Measurement, Target, TargetKind, TargetProvenance,
    DEFAULT_WINDOW_FRACTION,
};
use crate::error::{Error, Result};
use crate::series::DEFAULT_ANGULAR_POINTS;
use crate::sigma::{Extension, SigmaModel};
use crate::tail::TailModel;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SigmaSpec {
    Constant {
        c: f64,
        #[serde(flatten)]
        mult: Multipliers,
    },
    Geometric {
        a: f64,
        #[serde(flatten)]
        mult: Multipliers,
    },
    FactorialPower {
        alpha: f64,
        #[serde(flatten)]
        mult: Multipliers,
    },
    SuperGeometric {
        theta: f64,
        #[serde(flatten)]
        mult: Multipliers,
    },
    Explicit {
        values: Vec<f64>,
        #[serde(default)]
        extension: ExtensionSpec,
        #[serde(flatten)]
        mult: Multipliers,
    },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
pub struct Multipliers {
    pub scale: Option<f64>,
    pub poly_exponent: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionSpec {
    #[default]
    Error,
    RepeatLast,
    Geometric,
}

impl SigmaSpec {
    pub fn build(&self) -> Result<SigmaModel> {
        let (model, mult) = match self {
            SigmaSpec::Constant { c, mult } => (SigmaModel::constant(*c), mult),
            SigmaSpec::Geometric { a, mult } => (SigmaModel::geometric(*a), mult),
            SigmaSpec::FactorialPower { alpha, mult } => (SigmaModel::factorial_power(*alpha), mult),
            SigmaSpec::SuperGeometric { theta, mult } => (SigmaModel::super_geometric(*theta), mult),
            SigmaSpec::Explicit { values, extension, mult } => {
                let ext = match extension {
                    ExtensionSpec::Error => Extension::ErrorBeyondEnd,
                    ExtensionSpec::RepeatLast => Extension::RepeatLast,
                    ExtensionSpec::Geometric => Extension::GeometricFromLastTwo,
                };
                (SigmaModel::explicit(values.clone(), ext), mult)
            }
        };
        let mut model = model.map_err(to_config)?;
        if let Some(c) = mult.scale {
            model = model.scaled(c).map_err(to_config)?;
        }
        if let Some(p) = mult.poly_exponent {
            model = model.with_poly_prefactor(p).map_err(to_config)?;
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TailSpec {
    Power { b: f64 },
    LogSqrt,
    Subgaussian,
    GaussianModulus,
    InverseLog,
    PointMass { at: f64 },
}

impl TailSpec {
    pub fn build(&self) -> Result<TailModel> {
        match self {
            TailSpec::Power { b } => TailModel::power(*b).map_err(to_config),
            TailSpec::LogSqrt => Ok(TailModel::log_sqrt()),
            TailSpec::Subgaussian => Ok(TailModel::subgaussian()),
            TailSpec::GaussianModulus => Ok(TailModel::gaussian_modulus()),
            TailSpec::InverseLog => Ok(TailModel::inverse_log()),
            TailSpec::PointMass { at } => TailModel::point_mass(*at).map_err(to_config),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TailSpec::Power { b } => format!("power(b={b})"),
            TailSpec::LogSqrt => "log_sqrt".into(),
            TailSpec::Subgaussian => "subgaussian".into(),
            TailSpec::GaussianModulus => "gaussian_modulus".into(),
            TailSpec::InverseLog => "inverse_log".into(),
            TailSpec::PointMass { at } => format!("point_mass(at={at})"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct BranchSpec {
    pub probability: f64,
    pub sigma: SigmaSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientSpec {
    /// Either `sigma` (isotropic, `beta = gamma = sigma / sqrt 2`) or both `beta` and `gamma`.
    ComplexGaussian {
        id: Option<String>,
        sigma: Option<SigmaSpec>,
        beta: Option<SigmaSpec>,
        gamma: Option<SigmaSpec>,
    },
    ScaledIid {
        id: Option<String>,
        sigma: SigmaSpec,
        tail: TailSpec,
        #[serde(default = "default_sampler")]
        sampler: String,
        #[serde(default)]
        phase: PhaseSpec,
    },
    Deterministic {
        id: Option<String>,
        sigma: SigmaSpec,
    },
    DeterministicMixture {
        id: Option<String>,
        branches: Vec<BranchSpec>,
    },
    CommonFactor {
        id: Option<String>,
        tail: TailSpec,
        #[serde(default = "default_sampler")]
        sampler: String,
    },
}

fn default_sampler() -> String {
    "inverse_tail".into()
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSpec {
    #[default]
    Uniform,
    Rademacher,
}

impl CoefficientSpec {
    pub fn build(&self) -> Result<CoefficientModel> {
        let id = |id: &Option<String>, default: &str| id.clone().unwrap_or_else(|| default.to_string());
        match self {
            CoefficientSpec::ComplexGaussian { id: i, sigma, beta, gamma } => match (sigma, beta, gamma) {
                (Some(s), None, None) => {
                    CoefficientModel::complex_gaussian_isotropic(id(i, "complex_gaussian"), &s.build()?)
                }
                (None, Some(b), Some(g)) => CoefficientModel::new(
                    id(i, "complex_gaussian"),
                    CoefficientFamily::ComplexGaussian { beta: b.build()?, gamma: g.build()? },
                ),
                _ => Err(Error::Config("complex_gaussian needs either `sigma` or both `beta` and `gamma`".into())),
            },
            CoefficientSpec::ScaledIid { id: i, sigma, tail, sampler, phase } => CoefficientModel::new(
                id(i, "scaled_iid"),
                CoefficientFamily::ScaledIid {
                    sigma: sigma.build()?,
                    base_tail: tail.build()?,
                    base_sampler: BaseSampler::parse(sampler)?,
                    phase: match phase {
                        PhaseSpec::Uniform => PhaseRule::Uniform,
                        PhaseSpec::Rademacher => PhaseRule::Rademacher,
                    },
                },
            ),
            CoefficientSpec::Deterministic { id: i, sigma } => {
                CoefficientModel::deterministic(id(i, "deterministic"), &sigma.build()?)
            }
            CoefficientSpec::DeterministicMixture { id: i, branches } => {
                let branches =
                    branches.iter().map(|b| Ok((b.probability, b.sigma.build()?))).collect::<Result<Vec<_>>>()?;
                CoefficientModel::new(id(i, "mixture"), CoefficientFamily::DeterministicMixture { branches })
            }
            CoefficientSpec::CommonFactor { id: i, tail, sampler } => CoefficientModel::new(
                id(i, "common_factor"),
                CoefficientFamily::CommonFactor { tau_tail: tail.build()?, tau_sampler: BaseSampler::parse(sampler)? },
            ),
        }
        .map_err(to_config)
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        Error::InvalidArgument(m) | Error::TailModel(m) | Error::Model(m) => Error::Config(m),
        other => Error::Config(other.to_string()),
    }
}

fn parse<T: for<'de> Deserialize<'de>>(source: &str) -> Result<T> {
    toml::from_str(source).map_err(|e| Error::Config(e.to_string()))
}

pub fn read_source(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

// ---- theory ----

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryFile {
    pub sigma: SigmaSpec,
    #[serde(default)]
    pub conditions: ConditionsSpec,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsSpec {
    #[serde(default)]
    pub tail_summability: Vec<TailSummabilitySpec>,
    #[serde(default)]
    pub q_condition: Vec<QConditionSpec>,
    #[serde(default)]
    pub order: Vec<OrderConditionSpec>,
    #[serde(default)]
    pub log_moment: Vec<LogMomentSpec>,
}

fn default_max_terms() -> usize {
    DEFAULT_MAX_TERMS
}

#[derive(Debug, Clone, Deserialize)]
pub struct TailSummabilitySpec {
    pub tail: TailSpec,
    pub q_grid: Vec<f64>,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
}

/// Lower-tail condition with `P(|eta| < x) = 1 - T(x)`.
#[derive(Debug, Clone, Deserialize)]
pub struct QConditionSpec {
    pub tail: TailSpec,
    pub q_grid: Vec<f64>,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OrderConditionSpec {
    pub tail: TailSpec,
    pub delta_grid: Vec<f64>,
    pub direction: OrderDirection,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LogMomentSpec {
    pub tail: TailSpec,
    pub variant: LogMomentVariant,
}

pub fn parse_theory(source: &str) -> Result<TheoryFile> {
    let file: TheoryFile = parse(source)?;
    file.sigma.build()?;
    let c = &file.conditions;
    let tails = c
        .tail_summability
        .iter()
        .map(|x| &x.tail)
        .chain(c.q_condition.iter().map(|x| &x.tail))
        .chain(c.order.iter().map(|x| &x.tail))
        .chain(c.log_moment.iter().map(|x| &x.tail));
    for t in tails {
        t.build()?;
    }
    Ok(file)
}

// ---- experiments ----

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub coefficients: CoefficientSpec,
    pub experiment: ExperimentSpec,
    #[serde(default, rename = "target")]
    pub targets: Vec<TargetSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    Radius,
    OrderCoefficient,
    GrowthOrder,
    GrowthType,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub measurement: MeasurementKind,
    pub n_terms: Option<usize>,
    pub window_fraction: Option<f64>,
    pub r_grid: Option<Vec<f64>>,
    pub rho: Option<f64>,
    #[serde(flatten)]
    pub growth: GrowthSpec,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
pub struct GrowthSpec {
    pub eps: Option<f64>,
    pub confidence_multiplier: Option<f64>,
    pub angular_points: Option<usize>,
}

impl GrowthSpec {
    fn options(&self) -> Result<GrowthOptions> {
        let d = GrowthOptions::default();
        let opts = GrowthOptions {
            eps: self.eps.unwrap_or(d.eps),
            confidence_multiplier: self.confidence_multiplier.unwrap_or(d.confidence_multiplier),
            angular_points: self.angular_points.unwrap_or(DEFAULT_ANGULAR_POINTS),
        };
        if !(opts.eps > 0.0 && opts.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be finite and > 0, got {}", opts.eps)));
        }
        if !(opts.confidence_multiplier > 0.0 && opts.confidence_multiplier.is_finite()) {
            return Err(Error::Config("confidence_multiplier must be finite and > 0".into()));
        }
        if !opts.angular_points.is_power_of_two() {
            return Err(Error::Config(format!("angular_points must be a power of two, got {}", opts.angular_points)));
        }
        Ok(opts)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceSpec {
    Analytic,
    PaperExample,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKindSpec {
    Median { expected: f64, tolerance: f64 },
    FractionWithin { expected: f64, tolerance: f64, min_fraction: f64 },
    AllWithin { expected: f64, tolerance: f64 },
    BranchFraction { branches: Vec<f64>, fractions: Vec<f64>, tolerance: f64 },
    BranchRelative { branches: Vec<f64>, tolerance: f64 },
    TailCondition { tail: TailSpec, q_grid: Vec<f64>, expect: ExpectedSpec },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedSpec {
    Converges,
    Diverges,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    pub provenance: ProvenanceSpec,
    #[serde(flatten)]
    pub kind: TargetKindSpec,
}

impl TargetSpec {
    fn build(&self) -> Result<Target> {
        let kind = match &self.kind {
            TargetKindSpec::Median { expected, tolerance } => {
                TargetKind::Median { expected: *expected, tolerance: *tolerance }
            }
            TargetKindSpec::FractionWithin { expected, tolerance, min_fraction } => {
                TargetKind::FractionWithin { expected: *expected, tolerance: *tolerance, min_fraction: *min_fraction }
            }
            TargetKindSpec::AllWithin { expected, tolerance } => {
                TargetKind::AllWithin { expected: *expected, tolerance: *tolerance }
            }
            TargetKindSpec::BranchFraction { branches, fractions, tolerance } => TargetKind::BranchFraction {
                branches: branches.clone(),
                fractions: fractions.clone(),
                tolerance: *tolerance,
            },
            TargetKindSpec::BranchRelative { branches, tolerance } => {
                TargetKind::BranchRelative { branches: branches.clone(), tolerance: *tolerance }
            }
            TargetKindSpec::TailCondition { tail, q_grid, expect } => TargetKind::TailCondition {
                tail: tail.build()?,
                tail_label: tail.label(),
                q_grid: q_grid.clone(),
                expect: match expect {
                    ExpectedSpec::Converges => ExpectedVerdict::Converges,
                    ExpectedSpec::Diverges => ExpectedVerdict::Diverges,
                },
            },
        };
        Ok(Target {
            name: self.name.clone(),
            kind,
            provenance: match self.provenance {
                ProvenanceSpec::Analytic => TargetProvenance::Analytic,
                ProvenanceSpec::PaperExample => TargetProvenance::PaperExample,
            },
        })
    }
}

fn require<T: Clone>(value: &Option<T>, key: &str, measurement: &str) -> Result<T> {
    value.clone().ok_or_else(|| Error::Config(format!("missing field `experiment.{key}` (required for {measurement})")))
}

/// Parses and validates an experiment file. `seed_override` replaces `base_seed`.
pub fn parse_experiment(source: &str, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let file: ExperimentFile = parse(source)?;
    let e = &file.experiment;
    let measurement = match e.measurement {
        MeasurementKind::Radius => Measurement::Radius {
            n_terms: require(&e.n_terms, "n_terms", "radius")?,
            window_fraction: e.window_fraction.unwrap_or(DEFAULT_WINDOW_FRACTION),
        },
        MeasurementKind::OrderCoefficient => Measurement::OrderCoefficient {
            n_terms: require(&e.n_terms, "n_terms", "order_coefficient")?,
            window_fraction: e.window_fraction.unwrap_or(DEFAULT_WINDOW_FRACTION),
        },
        MeasurementKind::GrowthOrder => Measurement::GrowthOrder {
            r_grid: require(&e.r_grid, "r_grid", "growth_order")?,
            options: e.growth.options()?,
        },
        MeasurementKind::GrowthType => Measurement::GrowthType {
            rho: require(&e.rho, "rho", "growth_type")?,
            r_grid: require(&e.r_grid, "r_grid", "growth_type")?,
            options: e.growth.options()?,
        },
    };
    let targets = file.targets.iter().map(TargetSpec::build).collect::<Result<Vec<_>>>()?;
    ExperimentConfig::new(
        e.name.clone(),
        file.coefficients.build()?,
        e.replicates,
        seed_override.unwrap_or(e.base_seed),
        measurement,
        targets,
        source,
    )
}

// ---- sweeps ----

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub coefficients: CoefficientSpec,
    pub sweep: SweepSpec,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SweepSpec {
    pub r_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Order used for the type fit; the fit is skipped when absent.
    pub rho: Option<f64>,
    #[serde(flatten)]
    pub growth: GrowthSpec,
}

/// A validated sweep: model, grid (at least 3 increasing radii), seed and options.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub model: CoefficientModel,
    pub sigma: SigmaModel,
    pub r_grid: Vec<f64>,
    pub seed: u64,
    pub rho: Option<f64>,
    pub options: GrowthOptions,
}

pub fn parse_sweep(source: &str, seed_override: Option<u64>) -> Result<SweepConfig> {
    let file: SweepFile = parse(source)?;
    let s = &file.sweep;
    if s.r_grid.len() < 3 {
        return Err(Error::Config(format!("sweep.r_grid needs at least 3 radii for a fit, got {}", s.r_grid.len())));
    }
    if s.r_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) || s.r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("sweep.r_grid must be positive and strictly increasing: {:?}", s.r_grid)));
    }
    if let Some(rho) = s.rho {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Config(format!("sweep.rho must be finite and > 0, got {rho}")));
        }
    }
    let model = file.coefficients.build()?;
    let sigma =
        model.scale_model().ok_or_else(|| Error::Config("sweeps need a model with a single scale sequence".into()))?;
    Ok(SweepConfig {
        model,
        sigma,
        r_grid: s.r_grid.clone(),
        seed: seed_override.unwrap_or(s.seed),
        rho: s.rho,
        options: s.growth.options()?,
    })
}

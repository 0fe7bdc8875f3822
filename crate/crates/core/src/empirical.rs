//! Estimators on sampled realizations and seeded Monte Carlo experiments.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use statrs::statistics::{Data, Max, Median, Min, OrderStatistics};

use crate::coeff::{sample, CoefficientModel, SampleSeries};
use crate::conditions::{check_tail_summability, ConditionVerdict, DEFAULT_MAX_TERMS};
use crate::error::{Error, Result};
use crate::ext;
use crate::series::{max_modulus_adaptive, truncation_bound, CirclePlan, DEFAULT_CONFIDENCE_MULTIPLIER};
use crate::sigma::SigmaModel;
use crate::tail::TailModel;
use crate::theory::radius_of;

pub const DEFAULT_WINDOW_FRACTION: f64 = 0.25;
/// Experiments fail when more than this fraction of replicates raise an error.
pub const REPLICATE_ERROR_BUDGET: f64 = 0.01;

/// `|xi_n|^{1/n}` for `n = 1, ..., n_terms - 1` (element `i` is index `i + 1`).
pub fn empirical_root_sequence(series: &SampleSeries) -> Result<Vec<f64>> {
    if series.n_terms() < 2 {
        return Err(Error::InvalidArgument(format!("root sequence needs at least 2 terms, got {}", series.n_terms())));
    }
    Ok(series.log_moduli.iter().enumerate().skip(1).map(|(n, l)| (l / n as f64).exp()).collect())
}

/// A tail-window estimate with the relative change against the preceding window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowEstimate {
    #[serde(with = "ext")]
    pub estimate: f64,
    #[serde(with = "ext")]
    pub stability_gap: f64,
    /// Indices dropped from the final window (zero or unit coefficients).
    pub skipped: usize,
}

/// `[start, end)` index ranges of the final window and the one before it.
fn windows(n_terms: usize, window_fraction: f64) -> Result<((usize, usize), (usize, usize))> {
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("window fraction must lie in (0, 1), got {window_fraction}")));
    }
    let width = ((n_terms as f64 * window_fraction).ceil() as usize).clamp(1, n_terms / 2);
    let last = (n_terms - width, n_terms);
    let prev = ((n_terms - 2 * width).max(1), n_terms - width);
    Ok((last, prev))
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if a.is_finite() && b.is_finite() {
        (a - b).abs() / a.abs().max(b.abs())
    } else {
        f64::INFINITY
    }
}

/// Radius estimate `1 / sup |xi_n|^{1/n}` over the final `window_fraction` of indices.
pub fn empirical_radius(series: &SampleSeries, window_fraction: f64) -> Result<WindowEstimate> {
    let n = series.n_terms();
    if n < 64 {
        return Err(Error::InvalidArgument(format!("radius estimation needs at least 64 terms, got {n}")));
    }
    let ((a, b), (c, d)) = windows(n, window_fraction)?;
    let log_sup =
        |from: usize, to: usize| (from..to).map(|k| series.log_moduli[k] / k as f64).fold(f64::NEG_INFINITY, f64::max);
    let last = log_sup(a, b);
    if last == f64::NEG_INFINITY {
        return Err(Error::DegenerateSeries);
    }
    let estimate = (-last).exp();
    let previous = (-log_sup(c, d)).exp();
    let skipped = (a..b).filter(|&k| series.log_moduli[k] == f64::NEG_INFINITY).count();
    Ok(WindowEstimate { estimate, stability_gap: relative_change(estimate, previous), skipped })
}

/// Windowed sup of `n ln n / |ln |xi_n||`, skipping `|xi_n|` in `{0, 1}`.
pub fn empirical_order_coefficient(series: &SampleSeries, window_fraction: f64) -> Result<WindowEstimate> {
    let n = series.n_terms();
    if n < 256 {
        return Err(Error::InvalidArgument(format!("coefficient order needs at least 256 terms, got {n}")));
    }
    let ((a, b), (c, d)) = windows(n, window_fraction)?;
    let sup = |from: usize, to: usize| {
        let mut skipped = 0;
        let mut best: Option<f64> = None;
        for k in from..to {
            let l = series.log_moduli[k];
            if l == f64::NEG_INFINITY || l == 0.0 {
                skipped += 1;
                continue;
            }
            let kf = k as f64;
            let v = kf * kf.ln() / l.abs();
            best = Some(best.map_or(v, |x: f64| x.max(v)));
        }
        (best, skipped)
    };
    let (last, skipped) = sup(a, b);
    if 2 * skipped > b - a {
        return Err(Error::UnreliableEstimate { skipped, window: b - a });
    }
    let estimate = last.ok_or(Error::DegenerateSeries)?;
    let previous = sup(c, d).0.unwrap_or(f64::INFINITY);
    Ok(WindowEstimate { estimate, stability_gap: relative_change(estimate, previous), skipped })
}

/// Truncation and angular resolution used by the growth fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthOptions {
    /// Absolute bound on the neglected tail at each radius.
    pub eps: f64,
    pub confidence_multiplier: f64,
    /// Starting grid size for the adaptive maximum.
    pub angular_points: usize,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        GrowthOptions { eps: 1e-10, confidence_multiplier: DEFAULT_CONFIDENCE_MULTIPLIER, angular_points: 1024 }
    }
}

/// `M_f(r)` at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthPoint {
    pub r: f64,
    #[serde(with = "ext")]
    pub max_modulus: f64,
    pub n_used: usize,
    #[serde(with = "ext")]
    pub tail_bound: f64,
}

/// A least-squares fit over the growth grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    #[serde(with = "ext")]
    pub estimate: f64,
    #[serde(with = "ext")]
    pub intercept: f64,
    /// Euclidean norm of the fit residuals.
    #[serde(with = "ext")]
    pub residual: f64,
    pub points: Vec<GrowthPoint>,
}

fn check_grid(r_grid: &[f64]) -> Result<()> {
    if r_grid.len() < 2 {
        return Err(Error::InvalidArgument(format!("growth fit needs at least 2 radii, got {}", r_grid.len())));
    }
    if r_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!("r grid must be positive and strictly increasing: {r_grid:?}")));
    }
    Ok(())
}

/// Truncation plans for every radius of the grid.
pub fn growth_plans(sigma: &SigmaModel, r_grid: &[f64], opts: &GrowthOptions) -> Result<Vec<CirclePlan>> {
    check_grid(r_grid)?;
    r_grid
        .iter()
        .map(|&r| {
            let mut plan = truncation_bound(sigma, r, opts.eps, opts.confidence_multiplier)?;
            plan.angular_points = opts.angular_points;
            Ok(plan)
        })
        .collect()
}

/// `M_f(r)` on the grid, rejecting points with `M_f(r) < 3`.
pub fn growth_points(
    series: &SampleSeries,
    sigma: &SigmaModel,
    r_grid: &[f64],
    opts: &GrowthOptions,
) -> Result<Vec<GrowthPoint>> {
    if series.log_moduli.iter().all(|l| *l == f64::NEG_INFINITY) {
        return Err(Error::DegenerateSeries);
    }
    if radius_of(sigma)?.value != f64::INFINITY {
        return Err(Error::NotEntire);
    }
    let plans = growth_plans(sigma, r_grid, opts)?;
    plans
        .iter()
        .map(|plan| {
            let (m, _) = max_modulus_adaptive(series, plan)?;
            if !(m >= 3.0) {
                return Err(Error::GridTooSmall { r: plan.radius, max_modulus: m });
            }
            Ok(GrowthPoint { r: plan.radius, max_modulus: m, n_used: plan.truncation, tail_bound: plan.tail_bound })
        })
        .collect()
}

/// Ordinary least squares `y = slope x + intercept`; returns `(slope, intercept, residual norm)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum::<f64>().sqrt();
    (slope, intercept, residual)
}

/// Slope of `ln ln M_f(r)` against `ln r`.
pub fn empirical_order(
    series: &SampleSeries,
    sigma: &SigmaModel,
    r_grid: &[f64],
    opts: &GrowthOptions,
) -> Result<GrowthFit> {
    let points = growth_points(series, sigma, r_grid, opts)?;
    let x: Vec<f64> = points.iter().map(|p| p.r.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.max_modulus.ln().ln()).collect();
    let (estimate, intercept, residual) = least_squares(&x, &y);
    Ok(GrowthFit { estimate, intercept, residual, points })
}

/// Slope `beta` of the fit `ln M_f(r) = beta r^rho + c`.
pub fn empirical_type(
    series: &SampleSeries,
    sigma: &SigmaModel,
    rho: f64,
    r_grid: &[f64],
    opts: &GrowthOptions,
) -> Result<GrowthFit> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidArgument(format!("order must be finite and > 0, got {rho}")));
    }
    let points = growth_points(series, sigma, r_grid, opts)?;
    let x: Vec<f64> = points.iter().map(|p| p.r.powf(rho)).collect();
    let y: Vec<f64> = points.iter().map(|p| p.max_modulus.ln()).collect();
    let (estimate, intercept, residual) = least_squares(&x, &y);
    Ok(GrowthFit { estimate, intercept, residual, points })
}

/// What each replicate measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measurement {
    Radius {
        n_terms: usize,
        window_fraction: f64,
    },
    OrderCoefficient {
        n_terms: usize,
        window_fraction: f64,
    },
    /// Growth-fit order; the truncation comes from the model's scale sequence.
    GrowthOrder {
        r_grid: Vec<f64>,
        options: GrowthOptions,
    },
    GrowthType {
        rho: f64,
        r_grid: Vec<f64>,
        options: GrowthOptions,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetProvenance {
    Analytic,
    PaperExample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedVerdict {
    Converges,
    Diverges,
}

/// An acceptance check. Tolerances are strict: `|x - expected| < tolerance`.
#[derive(Debug, Clone)]
pub enum TargetKind {
    Median {
        expected: f64,
        tolerance: f64,
    },
    /// At least `min_fraction` of the estimates within tolerance.
    FractionWithin {
        expected: f64,
        tolerance: f64,
        min_fraction: f64,
    },
    AllWithin {
        expected: f64,
        tolerance: f64,
    },
    /// The share of estimates nearest to each branch value is within `tolerance` of `fractions`.
    BranchFraction {
        branches: Vec<f64>,
        fractions: Vec<f64>,
        tolerance: f64,
    },
    /// Every estimate lies within relative `tolerance` of its nearest branch value.
    BranchRelative {
        branches: Vec<f64>,
        tolerance: f64,
    },
    /// The tail summability condition returns the expected verdict at every `Q`.
    TailCondition {
        tail: TailModel,
        tail_label: String,
        q_grid: Vec<f64>,
        expect: ExpectedVerdict,
    },
}

#[derive(Debug, Clone)]
pub struct Target {
    pub name: String,
    pub kind: TargetKind,
    pub provenance: TargetProvenance,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: CoefficientModel,
    pub replicates: usize,
    /// Replicate `i` uses seed `base_seed + i` (wrapping).
    pub base_seed: u64,
    pub measurement: Measurement,
    pub targets: Vec<Target>,
    /// SHA-256 of the configuration source.
    pub config_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn check_tolerance(name: &str, tolerance: f64) -> Result<()> {
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(Error::Config(format!("target {name:?}: tolerance must be finite and >= 0, got {tolerance}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Validates the configuration. `source` is hashed for provenance.
    pub fn new(
        name: impl Into<String>,
        model: CoefficientModel,
        replicates: usize,
        base_seed: u64,
        measurement: Measurement,
        targets: Vec<Target>,
        source: &str,
    ) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        match &measurement {
            Measurement::Radius { n_terms, window_fraction }
            | Measurement::OrderCoefficient { n_terms, window_fraction } => {
                if *n_terms < 2 {
                    return Err(Error::Config(format!("n_terms must be at least 2, got {n_terms}")));
                }
                if !(*window_fraction > 0.0 && *window_fraction < 1.0) {
                    return Err(Error::Config(format!("window_fraction must lie in (0, 1), got {window_fraction}")));
                }
            }
            Measurement::GrowthOrder { r_grid, .. } | Measurement::GrowthType { r_grid, .. } => {
                check_grid(r_grid).map_err(|e| Error::Config(e.to_string()))?;
                if model.scale_model().is_none() {
                    return Err(Error::Config("growth measurements need a model with a single scale sequence".into()));
                }
            }
        }
        for t in &targets {
            match &t.kind {
                TargetKind::Median { tolerance, .. } | TargetKind::AllWithin { tolerance, .. } => {
                    check_tolerance(&t.name, *tolerance)?
                }
                TargetKind::FractionWithin { tolerance, min_fraction, .. } => {
                    check_tolerance(&t.name, *tolerance)?;
                    if !(0.0..=1.0).contains(min_fraction) {
                        return Err(Error::Config(format!("target {:?}: min_fraction must lie in [0, 1]", t.name)));
                    }
                }
                TargetKind::BranchFraction { branches, fractions, tolerance } => {
                    check_tolerance(&t.name, *tolerance)?;
                    if branches.is_empty() || branches.len() != fractions.len() {
                        return Err(Error::Config(format!(
                            "target {:?}: branches and fractions must match in length",
                            t.name
                        )));
                    }
                }
                TargetKind::BranchRelative { branches, tolerance } => {
                    check_tolerance(&t.name, *tolerance)?;
                    if branches.is_empty() {
                        return Err(Error::Config(format!("target {:?}: no branch values", t.name)));
                    }
                }
                TargetKind::TailCondition { q_grid, .. } => {
                    if q_grid.is_empty() || q_grid.iter().any(|q| !(q.is_finite() && *q > 1.0)) {
                        return Err(Error::Config(format!("target {:?}: every Q must be finite and > 1", t.name)));
                    }
                }
            }
        }
        Ok(ExperimentConfig {
            name: name.into(),
            model,
            replicates,
            base_seed,
            measurement,
            targets,
            config_hash: sha256_hex(source.as_bytes()),
        })
    }

    pub fn seed(&self, replicate: usize) -> u64 {
        self.base_seed.wrapping_add(replicate as u64)
    }
}

/// One replicate: an estimate with its diagnostic, or the error it raised.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub seed: u64,
    #[serde(with = "ext::opt")]
    pub estimate: Option<f64>,
    /// Stability gap for windowed estimates, fit residual for growth fits.
    #[serde(with = "ext::opt")]
    pub diagnostic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub replicates: usize,
    pub errors: usize,
    #[serde(with = "ext::opt")]
    pub median: Option<f64>,
    #[serde(with = "ext::opt")]
    pub q1: Option<f64>,
    #[serde(with = "ext::opt")]
    pub q3: Option<f64>,
    #[serde(with = "ext::opt")]
    pub iqr: Option<f64>,
    #[serde(with = "ext::opt")]
    pub min: Option<f64>,
    #[serde(with = "ext::opt")]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetResult {
    pub name: String,
    pub provenance: TargetProvenance,
    pub description: String,
    /// The statistic compared against the target (median, fraction, worst deviation, ...).
    #[serde(with = "ext::vec")]
    pub observed: Vec<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<ConditionVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportProvenance {
    pub config_hash: String,
    pub base_seed: u64,
    pub first_seed: u64,
    pub last_seed: u64,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub model_id: String,
    pub measurement: Measurement,
    pub provenance: ReportProvenance,
    pub summary: Summary,
    pub targets: Vec<TargetResult>,
    pub error_budget_exceeded: bool,
    pub pass: bool,
    #[serde(skip)]
    pub outcomes: Vec<ReplicateOutcome>,
}

impl ExperimentReport {
    pub fn estimates(&self) -> Vec<f64> {
        self.outcomes.iter().filter_map(|o| o.estimate).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["estimates"] =
            serde_json::to_value(self.outcomes.iter().map(|o| o.estimate.map(ext_value)).collect::<Vec<_>>())
                .expect("estimates serialize");
        v
    }

    /// CSV with columns `index,seed,estimate,diagnostic,error`.
    pub fn write_replicates_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,seed,estimate,diagnostic,error")?;
        for o in &self.outcomes {
            let num = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
            let err = o.error.as_deref().map(|e| format!("\"{}\"", e.replace('"', "\"\""))).unwrap_or_default();
            writeln!(out, "{},{},{},{},{}", o.index, o.seed, num(o.estimate), num(o.diagnostic), err)?;
        }
        Ok(())
    }
}

fn ext_value(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::json!(x.to_string())
    }
}

fn measure_one(config: &ExperimentConfig, seed: u64) -> Result<(f64, f64)> {
    match &config.measurement {
        Measurement::Radius { n_terms, window_fraction } => {
            let s = sample(&config.model, seed, *n_terms)?;
            let w = empirical_radius(&s, *window_fraction)?;
            Ok((w.estimate, w.stability_gap))
        }
        Measurement::OrderCoefficient { n_terms, window_fraction } => {
            let s = sample(&config.model, seed, *n_terms)?;
            let w = empirical_order_coefficient(&s, *window_fraction)?;
            Ok((w.estimate, w.stability_gap))
        }
        Measurement::GrowthOrder { r_grid, options } | Measurement::GrowthType { r_grid, options, .. } => {
            let sigma = config.model.scale_model().ok_or_else(|| Error::Model("model has no scale sequence".into()))?;
            let n = growth_plans(&sigma, r_grid, options)?.iter().map(|p| p.truncation).max().unwrap_or(1);
            let s = sample(&config.model, seed, n)?;
            let fit = match &config.measurement {
                Measurement::GrowthType { rho, .. } => empirical_type(&s, &sigma, *rho, r_grid, options)?,
                _ => empirical_order(&s, &sigma, r_grid, options)?,
            };
            Ok((fit.estimate, fit.residual))
        }
    }
}

fn summarize(estimates: &[f64], replicates: usize, errors: usize) -> Summary {
    if estimates.is_empty() {
        return Summary { replicates, errors, median: None, q1: None, q3: None, iqr: None, min: None, max: None };
    }
    let mut data = Data::new(estimates.to_vec());
    Summary {
        replicates,
        errors,
        median: Some(data.median()),
        q1: Some(data.lower_quartile()),
        q3: Some(data.upper_quartile()),
        iqr: Some(data.interquartile_range()),
        min: Some(data.min()),
        max: Some(data.max()),
    }
}

fn nearest(branches: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, b) in branches.iter().enumerate() {
        if (x - b).abs() < (x - branches[best]).abs() {
            best = i;
        }
    }
    best
}

fn evaluate_target(target: &Target, estimates: &[f64], median: Option<f64>) -> Result<TargetResult> {
    let within = |x: f64, e: f64, tol: f64| (x - e).abs() < tol;
    let count = estimates.len().max(1) as f64;
    let (description, observed, pass, condition) = match &target.kind {
        TargetKind::Median { expected, tolerance } => {
            let m = median.unwrap_or(f64::NAN);
            (format!("median within {tolerance} of {expected}"), vec![m], within(m, *expected, *tolerance), None)
        }
        TargetKind::FractionWithin { expected, tolerance, min_fraction } => {
            let f = estimates.iter().filter(|x| within(**x, *expected, *tolerance)).count() as f64 / count;
            (
                format!("at least {min_fraction} of estimates within {tolerance} of {expected}"),
                vec![f],
                !estimates.is_empty() && f >= *min_fraction,
                None,
            )
        }
        TargetKind::AllWithin { expected, tolerance } => {
            let worst = estimates.iter().map(|x| (x - expected).abs()).fold(0.0, f64::max);
            let inside = estimates.iter().filter(|x| within(**x, *expected, *tolerance)).count() as f64 / count;
            (
                format!("every estimate within {tolerance} of {expected}"),
                vec![worst, inside],
                !estimates.is_empty() && worst < *tolerance,
                None,
            )
        }
        TargetKind::BranchFraction { branches, fractions, tolerance } => {
            let mut counts = vec![0usize; branches.len()];
            for x in estimates {
                counts[nearest(branches, *x)] += 1;
            }
            let observed: Vec<f64> = counts.iter().map(|c| *c as f64 / count).collect();
            let pass = !estimates.is_empty() && observed.iter().zip(fractions).all(|(o, f)| within(*o, *f, *tolerance));
            (format!("share nearest to each of {branches:?} within {tolerance} of {fractions:?}"), observed, pass, None)
        }
        TargetKind::BranchRelative { branches, tolerance } => {
            let worst = estimates
                .iter()
                .map(|x| {
                    let b = branches[nearest(branches, *x)];
                    (x - b).abs() / b.abs()
                })
                .fold(0.0, f64::max);
            (
                format!("every estimate within relative {tolerance} of its nearest value in {branches:?}"),
                vec![worst],
                !estimates.is_empty() && worst < *tolerance,
                None,
            )
        }
        TargetKind::TailCondition { tail, tail_label, q_grid, expect } => {
            let verdict = check_tail_summability(tail, q_grid, DEFAULT_MAX_TERMS)?;
            let pass = match expect {
                ExpectedVerdict::Converges => verdict.all_converge(),
                ExpectedVerdict::Diverges => verdict.all_diverge(),
            };
            let matching = verdict
                .verdicts
                .iter()
                .filter(|v| match expect {
                    ExpectedVerdict::Converges => v.verdict.converges(),
                    ExpectedVerdict::Diverges => v.verdict.diverges(),
                })
                .count() as f64;
            (
                format!("sum T(Q^k) for tail {tail_label} {expect:?} at every Q in {q_grid:?}").to_lowercase(),
                vec![matching / q_grid.len() as f64],
                pass,
                Some(verdict),
            )
        }
    };
    Ok(TargetResult {
        name: target.name.clone(),
        provenance: target.provenance,
        description,
        observed,
        pass,
        condition,
    })
}

/// Runs every replicate on a pool of `workers` threads and evaluates the targets.
///
/// Results do not depend on `workers`: replicate `i` only sees seed `base_seed + i`.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<ReplicateOutcome> = pool.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|index| {
                let seed = config.seed(index);
                match measure_one(config, seed) {
                    Ok((estimate, diagnostic)) => ReplicateOutcome {
                        index,
                        seed,
                        estimate: Some(estimate),
                        diagnostic: Some(diagnostic),
                        error: None,
                    },
                    Err(e) => {
                        ReplicateOutcome { index, seed, estimate: None, diagnostic: None, error: Some(e.to_string()) }
                    }
                }
            })
            .collect()
    });
    let estimates: Vec<f64> = outcomes.iter().filter_map(|o| o.estimate).collect();
    let errors = outcomes.len() - estimates.len();
    let summary = summarize(&estimates, config.replicates, errors);
    let targets =
        config.targets.iter().map(|t| evaluate_target(t, &estimates, summary.median)).collect::<Result<Vec<_>>>()?;
    let error_budget_exceeded = errors as f64 > REPLICATE_ERROR_BUDGET * config.replicates as f64;
    let pass = !error_budget_exceeded && targets.iter().all(|t| t.pass);
    Ok(ExperimentReport {
        experiment: config.name.clone(),
        model_id: config.model.id().to_string(),
        measurement: config.measurement.clone(),
        provenance: ReportProvenance {
            config_hash: config.config_hash.clone(),
            base_seed: config.base_seed,
            first_seed: config.seed(0),
            last_seed: config.seed(config.replicates - 1),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        summary,
        targets,
        error_budget_exceeded,
        pass,
        outcomes,
    })
}

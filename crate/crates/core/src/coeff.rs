//! Random coefficient families and seeded, prefix-stable sampling.
//!
//! A [`SampleSeries`] keeps both the complex coefficients (for evaluation)
//! and `ln |xi_k|` computed in the log domain, so root-test and order
//! estimators keep working after the coefficients themselves underflow.

use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ext::log_add_exp;
use crate::rng::{CounterRng, SAMPLE_STREAM};
use crate::sigma::{Asymptotics, SigmaModel};
use crate::tail::{inverse_tail_sample_ln, TailModel};

// Lane assignment inside a coefficient's stream.
const LANE_RE: u64 = 0;
const LANE_IM: u64 = 1;
const LANE_MAGNITUDE: u64 = 2;
const LANE_PHASE: u64 = 3;
// Lanes inside SAMPLE_STREAM.
const LANE_BRANCH: u64 = 0;
const LANE_TAU: u64 = 1;

/// Rule producing a nonnegative base magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseSampler {
    /// Inverse-transform sampling from the attached tail model.
    InverseTail,
    /// `|N(0, 1)|` from the normal quantile.
    GaussianModulus,
}

impl BaseSampler {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "inverse_tail" => Ok(BaseSampler::InverseTail),
            "gaussian_modulus" => Ok(BaseSampler::GaussianModulus),
            other => Err(Error::Config(format!(
                "unsupported base sampler {other:?} (expected \"inverse_tail\" or \"gaussian_modulus\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseRule {
    /// Uniform phase on the unit circle.
    #[default]
    Uniform,
    /// Real coefficients with a Rademacher sign.
    Rademacher,
}

#[derive(Debug, Clone)]
pub enum CoefficientFamily {
    /// `xi_k = eta_k + i zeta_k`, `eta_k ~ N(0, beta_k^2)`, `zeta_k ~ N(0, gamma_k^2)`, all independent.
    ComplexGaussian { beta: SigmaModel, gamma: SigmaModel },
    /// `xi_k = sigma_k * m_k * phase_k` with i.i.d. base magnitudes `m_k`.
    ScaledIid { sigma: SigmaModel, base_tail: TailModel, base_sampler: BaseSampler, phase: PhaseRule },
    /// One branch drawn per sample, then `xi_k = sigma_k` of that branch.
    DeterministicMixture { branches: Vec<(f64, SigmaModel)> },
    /// One `tau` drawn per sample, `xi_k = tau` for every `k`.
    CommonFactor { tau_tail: TailModel, tau_sampler: BaseSampler },
}

#[derive(Debug, Clone)]
pub struct CoefficientModel {
    id: String,
    family: CoefficientFamily,
}

impl CoefficientModel {
    /// Validates the family; every configuration error surfaces here rather than while sampling.
    pub fn new(id: impl Into<String>, family: CoefficientFamily) -> Result<Self> {
        match &family {
            CoefficientFamily::ComplexGaussian { .. } => {}
            CoefficientFamily::ScaledIid { base_tail, base_sampler, .. } => {
                if *base_sampler == BaseSampler::InverseTail {
                    base_tail.verify_monotone()?;
                }
            }
            CoefficientFamily::DeterministicMixture { branches } => {
                if branches.is_empty() {
                    return Err(Error::InvalidArgument("mixture needs at least one branch".into()));
                }
                if let Some((p, _)) = branches.iter().find(|(p, _)| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::InvalidArgument(format!("branch probability {p} is invalid")));
                }
                let total: f64 = branches.iter().map(|(p, _)| p).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!("branch probabilities sum to {total}, not 1")));
                }
            }
            CoefficientFamily::CommonFactor { tau_tail, tau_sampler } => {
                if *tau_sampler == BaseSampler::InverseTail {
                    tau_tail.verify_monotone()?;
                }
            }
        }
        Ok(CoefficientModel { id: id.into(), family })
    }

    /// Complex Gaussian with `beta_k = gamma_k = sigma_k / sqrt 2`, so `E|xi_k|^2 = sigma_k^2`.
    pub fn complex_gaussian_isotropic(id: impl Into<String>, sigma: &SigmaModel) -> Result<Self> {
        let half = sigma.clone().scaled(std::f64::consts::FRAC_1_SQRT_2)?;
        Self::new(id, CoefficientFamily::ComplexGaussian { beta: half.clone(), gamma: half })
    }

    /// Deterministic coefficients `xi_k = sigma_k` (a one-branch mixture).
    pub fn deterministic(id: impl Into<String>, sigma: &SigmaModel) -> Result<Self> {
        Self::new(id, CoefficientFamily::DeterministicMixture { branches: vec![(1.0, sigma.clone())] })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn family(&self) -> &CoefficientFamily {
        &self.family
    }

    /// The scale sequence `sigma_k` of the coefficients, when the family has a single one.
    ///
    /// For the complex Gaussian this is `sqrt(beta_k^2 + gamma_k^2)`.
    pub fn scale_model(&self) -> Option<SigmaModel> {
        match &self.family {
            CoefficientFamily::ComplexGaussian { beta, gamma } => Some(hypot_model(beta, gamma)),
            CoefficientFamily::ScaledIid { sigma, .. } => Some(sigma.clone()),
            CoefficientFamily::DeterministicMixture { branches } if branches.len() == 1 => Some(branches[0].1.clone()),
            _ => None,
        }
    }

    /// The tail that governs the coefficient magnitudes, when there is one.
    pub fn governing_tail(&self) -> Option<&TailModel> {
        match &self.family {
            CoefficientFamily::ScaledIid { base_tail, .. } => Some(base_tail),
            CoefficientFamily::CommonFactor { tau_tail, .. } => Some(tau_tail),
            _ => None,
        }
    }
}

fn hypot_model(beta: &SigmaModel, gamma: &SigmaModel) -> SigmaModel {
    let (b, g) = (beta.clone(), gamma.clone());
    let ab = beta.asymptotics();
    let ag = gamma.asymptotics();
    let root_limsup = match (ab.root_limsup, ag.root_limsup) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    };
    // The larger sequence dominates: larger order wins, equal orders take the larger type.
    let (order, paper_type) = match (ab.order, ag.order) {
        (Some(ob), Some(og)) if ob > og => (Some(ob), ab.paper_type),
        (Some(ob), Some(og)) if og > ob => (Some(og), ag.paper_type),
        (Some(ob), Some(_)) => (Some(ob), ab.paper_type.zip(ag.paper_type).map(|(x, y)| x.max(y))),
        _ => (None, None),
    };
    SigmaModel::custom_log(move |n| {
        let lb = b.log_sigma_at(n).unwrap_or(f64::NAN);
        let lg = g.log_sigma_at(n).unwrap_or(f64::NAN);
        0.5 * log_add_exp(2.0 * lb, 2.0 * lg)
    })
    .with_asymptotics(Asymptotics { root_limsup, order, paper_type })
}

/// A truncated realization `xi_0, ..., xi_{n_terms - 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    pub seed: u64,
    pub model_id: String,
    pub coefficients: Vec<Complex64>,
    /// `ln |xi_k|`, `-inf` for zero coefficients.
    pub log_moduli: Vec<f64>,
}

impl SampleSeries {
    /// Deterministic series from explicit coefficients; log moduli are taken from the values.
    pub fn from_coefficients(model_id: impl Into<String>, coefficients: Vec<Complex64>) -> Self {
        let log_moduli = coefficients.iter().map(|c| c.norm().ln()).collect();
        SampleSeries { seed: 0, model_id: model_id.into(), coefficients, log_moduli }
    }

    /// Deterministic series from log moduli with zero phase.
    pub fn from_log_moduli(model_id: impl Into<String>, log_moduli: Vec<f64>) -> Self {
        let coefficients = log_moduli.iter().map(|l| Complex64::new(l.exp(), 0.0)).collect();
        SampleSeries { seed: 0, model_id: model_id.into(), coefficients, log_moduli }
    }

    pub fn n_terms(&self) -> usize {
        self.coefficients.len()
    }

    /// CSV with columns `k,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,re,im")?;
        for (k, c) in self.coefficients.iter().enumerate() {
            writeln!(out, "{k},{:?},{:?}", c.re, c.im)?;
        }
        Ok(())
    }

    /// Binary dump: magic, seed, model id, term count, then `(re, im)` pairs and the log moduli.
    /// All integers and floats are little-endian 64-bit.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&self.seed.to_le_bytes())?;
        let id = self.model_id.as_bytes();
        out.write_all(&(id.len() as u64).to_le_bytes())?;
        out.write_all(id)?;
        out.write_all(&(self.coefficients.len() as u64).to_le_bytes())?;
        for c in &self.coefficients {
            out.write_all(&c.re.to_le_bytes())?;
            out.write_all(&c.im.to_le_bytes())?;
        }
        for l in &self.log_moduli {
            out.write_all(&l.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Io("not a sample-series dump (bad magic)".into()));
        }
        let seed = read_u64(&mut input)?;
        let id_len = read_u64(&mut input)? as usize;
        let mut id = vec![0u8; id_len];
        input.read_exact(&mut id)?;
        let model_id = String::from_utf8(id).map_err(|e| Error::Io(e.to_string()))?;
        let n = read_u64(&mut input)? as usize;
        let mut coefficients = Vec::with_capacity(n);
        for _ in 0..n {
            let re = read_f64(&mut input)?;
            let im = read_f64(&mut input)?;
            coefficients.push(Complex64::new(re, im));
        }
        let log_moduli = (0..n).map(|_| read_f64(&mut input)).collect::<Result<_>>()?;
        Ok(SampleSeries { seed, model_id, coefficients, log_moduli })
    }
}

/// Magic header of the binary dump.
pub const BINARY_MAGIC: &[u8; 8] = b"RPSSER01";

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Draw `n_terms` coefficients of `model` under `seed`.
///
/// Coefficient `k` depends only on `(seed, k)` and, for the dependent families,
/// on the per-sample draw; extending `n_terms` never changes earlier entries.
pub fn sample(model: &CoefficientModel, seed: u64, n_terms: usize) -> Result<SampleSeries> {
    if n_terms == 0 {
        return Err(Error::InvalidArgument("n_terms must be at least 1".into()));
    }
    let rng = CounterRng::new(seed);
    let pairs: Vec<(Complex64, f64)> = match &model.family {
        CoefficientFamily::ComplexGaussian { beta, gamma } => {
            (0..n_terms as u64).into_par_iter().map(|k| gaussian_term(&rng, beta, gamma, k)).collect::<Result<_>>()?
        }
        CoefficientFamily::ScaledIid { sigma, base_tail, base_sampler, phase } => (0..n_terms as u64)
            .into_par_iter()
            .map(|k| {
                let ln_sigma = sigma.log_sigma_at(k)?;
                let ln_m = base_draw_ln(&rng, *base_sampler, base_tail, k, LANE_MAGNITUDE)?;
                let ln_mod = ln_sigma + ln_m;
                let u = rng.uniform(k, LANE_PHASE);
                let unit = match phase {
                    PhaseRule::Uniform => Complex64::from_polar(1.0, std::f64::consts::TAU * u),
                    PhaseRule::Rademacher => Complex64::new(if u < 0.5 { -1.0 } else { 1.0 }, 0.0),
                };
                Ok((unit * ln_mod.exp(), ln_mod))
            })
            .collect::<Result<_>>()?,
        CoefficientFamily::DeterministicMixture { branches } => {
            let u = rng.uniform(SAMPLE_STREAM, LANE_BRANCH);
            let sigma = pick_branch(branches, u);
            (0..n_terms as u64)
                .map(|k| {
                    let l = sigma.log_sigma_at(k)?;
                    Ok((Complex64::new(l.exp(), 0.0), l))
                })
                .collect::<Result<_>>()?
        }
        CoefficientFamily::CommonFactor { tau_tail, tau_sampler } => {
            let ln_tau = base_draw_ln(&rng, *tau_sampler, tau_tail, SAMPLE_STREAM, LANE_TAU)?;
            vec![(Complex64::new(ln_tau.exp(), 0.0), ln_tau); n_terms]
        }
    };
    let (coefficients, log_moduli) = pairs.into_iter().unzip();
    Ok(SampleSeries { seed, model_id: model.id.clone(), coefficients, log_moduli })
}

fn gaussian_term(rng: &CounterRng, beta: &SigmaModel, gamma: &SigmaModel, k: u64) -> Result<(Complex64, f64)> {
    let ln_b = beta.log_sigma_at(k)?;
    let ln_g = gamma.log_sigma_at(k)?;
    let z1 = rng.standard_normal(k, LANE_RE);
    let z2 = rng.standard_normal(k, LANE_IM);
    let re = ln_b.exp() * z1;
    let im = ln_g.exp() * z2;
    let ln_mod = 0.5 * log_add_exp(2.0 * (ln_b + z1.abs().ln()), 2.0 * (ln_g + z2.abs().ln()));
    Ok((Complex64::new(re, im), ln_mod))
}

fn base_draw_ln(rng: &CounterRng, sampler: BaseSampler, tail: &TailModel, stream: u64, lane: u64) -> Result<f64> {
    let u = rng.uniform(stream, lane);
    match sampler {
        BaseSampler::InverseTail => inverse_tail_sample_ln(tail, u),
        BaseSampler::GaussianModulus => Ok(crate::rng::normal_quantile(u).abs().ln()),
    }
}

fn pick_branch(branches: &[(f64, SigmaModel)], u: f64) -> &SigmaModel {
    let mut acc = 0.0;
    for (p, sigma) in branches {
        acc += p;
        if u < acc {
            return sigma;
        }
    }
    &branches[branches.len() - 1].1
}

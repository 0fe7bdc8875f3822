//! The `rpslab` command line: `theory`, `verify` and `sweep`.
//!
//! Exit codes: 0 pass, 1 acceptance failure, 2 configuration error,
//! 3 replicate-error budget exceeded, 4 numerical-domain error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::coeff::sample;
use crate::conditions::{
    check_order_conditions, check_q_condition, check_tail_summability, log_moment, uniform_tail_rule, ConditionVerdict,
};
use crate::config;
use crate::empirical::{growth_plans, growth_points, least_squares, run_experiment, sha256_hex};
use crate::error::{Error, Result};
use crate::ext;
use crate::theory::characterize;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "rpslab", version, about = "Random power series: characteristics, sampling and Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Radius, order and type of a sigma sequence, plus tail-condition verdicts.
    Theory(RunArgs),
    /// Run a Monte Carlo experiment and check its acceptance targets.
    Verify(RunArgs),
    /// Tabulate M_f(r) over a radius grid with order and type fits.
    Sweep(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    fn json(self) -> bool {
        self != Format::Csv
    }

    fn csv(self) -> bool {
        self != Format::Json
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Exit code for an error raised before or while computing.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    name: String,
    sha256: String,
    bytes: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config: String,
    config_sha256: String,
    base_seed: Option<u64>,
    code_version: &'static str,
    files: Vec<ManifestEntry>,
}

/// Collects output files and writes them, then the manifest.
struct Emitter {
    out: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Emitter {
    fn new(out: &Path) -> Self {
        Emitter { out: out.to_path_buf(), files: Vec::new() }
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
    }

    fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn finish(self, subcommand: &str, args: &RunArgs, source: &str, base_seed: Option<u64>) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        let mut entries = Vec::new();
        for (name, bytes) in &self.files {
            std::fs::write(self.out.join(name), bytes)?;
            entries.push(ManifestEntry { name: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        }
        let manifest = Manifest {
            subcommand,
            config: args.config.display().to_string(),
            config_sha256: sha256_hex(source.as_bytes()),
            base_seed,
            code_version: env!("CARGO_PKG_VERSION"),
            files: entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(self.out.join("manifest.json"), text)?;
        Ok(())
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Theory(args) => cmd_theory(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

#[derive(Serialize)]
struct LabelledVerdict {
    tail: String,
    #[serde(flatten)]
    verdict: ConditionVerdict,
}

#[derive(Serialize)]
struct MomentEntry {
    tail: String,
    variant: crate::conditions::LogMomentVariant,
    #[serde(with = "ext::opt")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inconclusive: Option<String>,
}

pub fn cmd_theory(args: &RunArgs) -> Result<i32> {
    let source = config::read_source(&args.config)?;
    let file = config::parse_theory(&source)?;
    let sigma = file.sigma.build()?;
    let characteristics = characterize(&sigma)?;

    let mut conditions = Vec::new();
    for c in &file.conditions.tail_summability {
        let tail = c.tail.build()?;
        conditions.push(LabelledVerdict {
            tail: c.tail.label(),
            verdict: check_tail_summability(&tail, &c.q_grid, c.max_terms)?,
        });
    }
    for c in &file.conditions.q_condition {
        let tail = c.tail.build()?;
        let lower = |q: f64, k: f64| 1.0 - tail.survival_ln(k * q.ln());
        conditions
            .push(LabelledVerdict { tail: c.tail.label(), verdict: check_q_condition(lower, &c.q_grid, c.max_terms)? });
    }
    for c in &file.conditions.order {
        let tail = c.tail.build()?;
        conditions.push(LabelledVerdict {
            tail: c.tail.label(),
            verdict: check_order_conditions(uniform_tail_rule(&tail), &c.delta_grid, c.direction, c.max_terms)?,
        });
    }
    let mut moments = Vec::new();
    for m in &file.conditions.log_moment {
        let tail = m.tail.build()?;
        let (value, inconclusive) = match log_moment(&tail, m.variant) {
            Ok(v) => (Some(v), None),
            Err(e @ Error::Inconclusive { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        moments.push(MomentEntry { tail: m.tail.label(), variant: m.variant, value, inconclusive });
    }

    let mut emit = Emitter::new(&args.out);
    emit.json("characteristics.json", &characteristics.to_json());
    emit.json("verdicts.json", &serde_json::json!({ "conditions": conditions, "log_moments": moments }));
    emit.finish("theory", args, &source, args.seed)?;
    Ok(EXIT_PASS)
}

pub fn cmd_verify(args: &RunArgs) -> Result<i32> {
    let source = config::read_source(&args.config)?;
    let cfg = config::parse_experiment(&source, args.seed)?;
    let report = run_experiment(&cfg, args.workers)?;
    let mut emit = Emitter::new(&args.out);
    if args.format.json() {
        emit.json("report.json", &report.to_json());
    }
    if args.format.csv() {
        let mut csv = Vec::new();
        report.write_replicates_csv(&mut csv)?;
        emit.raw("replicates.csv", csv);
    }
    emit.finish("verify", args, &source, Some(cfg.base_seed))?;
    for t in &report.targets {
        println!("[{}] {}: {}", if t.pass { "PASS" } else { "FAIL" }, t.name, t.description);
    }
    if report.error_budget_exceeded {
        eprintln!(
            "error: {} of {} replicates raised errors (budget {}%)",
            report.summary.errors,
            report.summary.replicates,
            crate::empirical::REPLICATE_ERROR_BUDGET * 100.0
        );
        return Ok(EXIT_BUDGET);
    }
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

pub fn cmd_sweep(args: &RunArgs) -> Result<i32> {
    let source = config::read_source(&args.config)?;
    let cfg = config::parse_sweep(&source, args.seed)?;
    let plans = growth_plans(&cfg.sigma, &cfg.r_grid, &cfg.options)?;
    let n_terms = plans.iter().map(|p| p.truncation).max().unwrap_or(1);
    let series = sample(&cfg.model, cfg.seed, n_terms)?;
    let points = growth_points(&series, &cfg.sigma, &cfg.r_grid, &cfg.options)?;

    let ln_r: Vec<f64> = points.iter().map(|p| p.r.ln()).collect();
    let ln_ln_m: Vec<f64> = points.iter().map(|p| p.max_modulus.ln().ln()).collect();
    let (slope, intercept, residual) = least_squares(&ln_r, &ln_ln_m);
    let type_fit = cfg.rho.map(|rho| {
        let x: Vec<f64> = points.iter().map(|p| p.r.powf(rho)).collect();
        let y: Vec<f64> = points.iter().map(|p| p.max_modulus.ln()).collect();
        let (beta, c, res) = least_squares(&x, &y);
        serde_json::json!({ "rho": rho, "beta": beta, "intercept": c, "residual": res })
    });

    let mut emit = Emitter::new(&args.out);
    if args.format.csv() {
        let mut csv = String::from("r,max_modulus,ln_max_modulus,ln_ln_max_modulus,fitted_ln_ln,n_used,tail_bound\n");
        for (p, x) in points.iter().zip(&ln_r) {
            let ln_m = p.max_modulus.ln();
            csv.push_str(&format!(
                "{:?},{:?},{:?},{:?},{:?},{},{:?}\n",
                p.r,
                p.max_modulus,
                ln_m,
                ln_m.ln(),
                slope * x + intercept,
                p.n_used,
                p.tail_bound
            ));
        }
        emit.raw("sweep.csv", csv.into_bytes());
    }
    if args.format.json() {
        let mut fit = serde_json::json!({
            "model_id": cfg.model.id(),
            "seed": cfg.seed,
            "n_terms": n_terms,
            "order_fit": { "slope": slope, "intercept": intercept, "residual": residual },
            "points": points,
        });
        if let Some(t) = type_fit {
            fit["type_fit"] = t;
        }
        emit.json("sweep_fit.json", &fit);
    }
    emit.finish("sweep", args, &source, Some(cfg.seed))?;
    Ok(EXIT_PASS)
}

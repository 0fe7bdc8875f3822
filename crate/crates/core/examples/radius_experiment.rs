//! A Monte Carlo radius experiment built in code rather than from a config file.
use rpslab::empirical::{run_experiment, ExperimentConfig, Measurement, Target, TargetKind, TargetProvenance};
use rpslab::{CoefficientModel, SigmaModel};

fn main() -> rpslab::Result<()> {
    let model = CoefficientModel::complex_gaussian_isotropic("geometric 2", &SigmaModel::geometric(2.0)?)?;
    let target = Target {
        name: "median near 2".into(),
        kind: TargetKind::Median { expected: 2.0, tolerance: 0.04 },
        provenance: TargetProvenance::Analytic,
    };
    let measurement = Measurement::Radius { n_terms: 2000, window_fraction: 0.25 };
    let cfg = ExperimentConfig::new("geometric radius", model, 100, 1, measurement, vec![target], "in code")?;
    let report = run_experiment(&cfg, 4)?;
    println!("median {:?}, iqr {:?}", report.summary.median, report.summary.iqr);
    for t in &report.targets {
        println!("[{}] {}", if t.pass { "PASS" } else { "FAIL" }, t.description);
    }
    Ok(())
}

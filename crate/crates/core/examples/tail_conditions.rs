//! Summability verdicts and log moments for a few tails.
use rpslab::conditions::{check_tail_summability, log_moment, LogMomentVariant, DEFAULT_MAX_TERMS};
use rpslab::TailModel;

fn main() -> rpslab::Result<()> {
    for (name, tail) in [
        ("u^-1", TailModel::power(1.0)?),
        ("subgaussian", TailModel::subgaussian()),
        ("1/sqrt(ln y)", TailModel::log_sqrt()),
    ] {
        let v = check_tail_summability(&tail, &[1.5, 2.0, 4.0], DEFAULT_MAX_TERMS)?;
        let m = log_moment(&tail, LogMomentVariant::LogEPlusNu)?;
        println!("{name}: E ln(e + nu) = {m}");
        for p in &v.verdicts {
            println!("  Q = {}: {}", p.parameter, serde_json::to_string(&p.verdict).expect("json"));
        }
    }
    Ok(())
}

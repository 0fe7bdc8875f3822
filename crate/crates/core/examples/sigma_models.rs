//! Scale sequences in the log domain, including values far below f64 range.
use rpslab::SigmaModel;

fn main() -> rpslab::Result<()> {
    let models = [
        ("constant 1", SigmaModel::constant(1.0)?),
        ("geometric 2", SigmaModel::geometric(2.0)?),
        ("1/sqrt(n!)", SigmaModel::factorial_power(0.5)?),
        ("n^(-n/2)", SigmaModel::super_geometric(0.5)?),
        ("n^2 / n!", SigmaModel::factorial_power(1.0)?.with_poly_prefactor(2.0)?),
    ];
    println!("{:<12} {:>14} {:>14} {:>16}", "model", "sigma_10", "sigma_100", "ln sigma_10000");
    for (name, m) in &models {
        println!(
            "{:<12} {:>14.6e} {:>14.6e} {:>16.4}",
            name,
            m.sigma_at(10)?,
            m.sigma_at(100)?,
            m.log_sigma_at(10_000)?
        );
    }
    Ok(())
}

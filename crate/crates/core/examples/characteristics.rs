//! Radius, order and both type conventions, closed form against windowed estimates.
use rpslab::theory::{characterize, order_windowed, radius_windowed, DEFAULT_WINDOW};
use rpslab::SigmaModel;

fn main() -> rpslab::Result<()> {
    for (name, sigma) in [
        ("geometric 3", SigmaModel::geometric(3.0)?),
        ("1/sqrt(n!)", SigmaModel::factorial_power(0.5)?),
        ("n^(-n)", SigmaModel::super_geometric(1.0)?),
    ] {
        let c = characterize(&sigma)?;
        println!("{name}: {}", serde_json::to_string(&c.to_json()).expect("json"));
        let blind = sigma.without_asymptotics();
        let r = radius_windowed(&blind, DEFAULT_WINDOW)?;
        print!("  windowed radius {}", r.value);
        if r.value.is_infinite() {
            print!(", windowed order {}", order_windowed(&blind, DEFAULT_WINDOW)?.value);
        }
        println!();
    }
    Ok(())
}

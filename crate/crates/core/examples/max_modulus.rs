//! Truncation plans and the maximum of |f| on circles, for f(z) = e^z.
use rpslab::series::max_modulus_adaptive;
use rpslab::{sample, truncation_bound, CoefficientModel, SigmaModel};

fn main() -> rpslab::Result<()> {
    let sigma = SigmaModel::factorial_power(1.0)?;
    let exp = CoefficientModel::deterministic("exp", &sigma)?;
    for r in [1.0, 5.0, 10.0, 20.0] {
        let plan = truncation_bound(&sigma, r, 1e-10, 6.0)?;
        let series = sample(&exp, 0, plan.truncation)?;
        let (m, grid) = max_modulus_adaptive(&series, &plan)?;
        println!(
            "r = {r:>4}: N = {:>3}, grid {grid:>5}, M(r) = {m:.6e}, e^r = {:.6e}, tail <= {:.1e}",
            plan.truncation,
            r.exp(),
            plan.tail_bound
        );
    }
    Ok(())
}

//! Order and type of the planar Gaussian analytic function from its growth on circles.
use rpslab::empirical::{empirical_order, empirical_type, growth_plans, GrowthOptions};
use rpslab::{sample, CoefficientModel, SigmaModel};

fn main() -> rpslab::Result<()> {
    let sigma = SigmaModel::factorial_power(0.5)?;
    let model = CoefficientModel::complex_gaussian_isotropic("planar", &sigma)?;
    let grid = [4.0, 6.0, 8.0, 10.0, 12.0, 14.0];
    let opts = GrowthOptions::default();
    let n = growth_plans(&sigma, &grid, &opts)?.iter().map(|p| p.truncation).max().unwrap_or(1);
    for seed in 0..5 {
        let s = sample(&model, seed, n)?;
        let order = empirical_order(&s, &sigma, &grid, &opts)?;
        let beta = empirical_type(&s, &sigma, 2.0, &grid, &opts)?;
        println!(
            "seed {seed}: order {:.4} (residual {:.3}), beta {:.4}",
            order.estimate, order.residual, beta.estimate
        );
    }
    Ok(())
}

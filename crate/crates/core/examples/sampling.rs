//! Draw coefficients, show prefix stability and write the series to CSV.
use rpslab::{sample, CoefficientModel, SigmaModel};

fn main() -> rpslab::Result<()> {
    let sigma = SigmaModel::factorial_power(0.5)?;
    let model = CoefficientModel::complex_gaussian_isotropic("planar", &sigma)?;
    let short = sample(&model, 42, 8)?;
    let long = sample(&model, 42, 1000)?;
    assert_eq!(short.coefficients[..], long.coefficients[..8]);
    for (k, c) in short.coefficients.iter().enumerate() {
        println!("xi_{k} = {:+.6} {:+.6}i", c.re, c.im);
    }
    let mut out = std::io::stdout().lock();
    sample(&model, 42, 4)?.write_csv(&mut out).expect("stdout");
    Ok(())
}

//! Build a few speed laws, read off their equilibrium quantities, and check
//! which feedback gains the sharp stability condition admits at each one.
//!
//!     cargo run --example equilibrium_balance

use refab::model::{equilibrium_summary, VelocityModel};
use refab::spectral::predicted_stable;

fn main() -> refab::Result<()> {
    let laws: Vec<(&str, VelocityModel)> = vec![
        ("reciprocal 1/(1+s)", VelocityModel::reciprocal_for(1.0)),
        ("affine, ratio -0.5", VelocityModel::affine_with_ratio(-0.5, 1.0, 1.0)?),
        ("affine, ratio  1.5", VelocityModel::affine_with_ratio(1.5, 1.0, 1.0)?),
        (
            "tabulated ramp",
            VelocityModel::tabulated(
                vec![0.0, 0.5, 1.0, 2.0, 4.0],
                vec![2.0, 1.6, 1.2, 0.8, 0.4],
            )?,
        ),
    ];

    println!("{:<22} {:>10} {:>10} {:>10}   stable gains", "law", "speed", "flux", "d");
    for (name, v) in &laws {
        let eq = equilibrium_summary(1.0, v)?;
        // The sharp condition: the loop decays exactly when d > -1 and the
        // feedback gain has magnitude below one.
        let gains = if eq.d > -1.0 { "|k| < 1" } else { "none (d <= -1)" };
        println!(
            "{:<22} {:>10.4} {:>10.4} {:>10.4}   {}",
            name, eq.lambda_bar, eq.flux_bar, eq.d, gains
        );
    }

    println!();
    println!("spot checks of the sharp condition at d = -0.5:");
    for k in [-1.2, -0.9, 0.0, 0.9, 1.2] {
        println!("  k = {k:>5}: predicted {}", if predicted_stable(-0.5, k) { "stable" } else { "unstable" });
    }
    Ok(())
}

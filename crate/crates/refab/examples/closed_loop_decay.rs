//! Simulate the closed loop from a perturbed equilibrium and fit the decay
//! rate of the deviation norms.
//!
//!     cargo run --example closed_loop_decay

use refab::lyapunov::{fit_decay_rate, DecayOutcome, NormSeries};
use refab::model::{ClosedLoopConfig, VelocityModel};
use refab::scenario::{InitialProfile, PerturbationShape};
use refab::solver::simulate;

fn main() -> refab::Result<()> {
    let mut cfg = ClosedLoopConfig::new(1.0, 0.5, VelocityModel::reciprocal_for(1.0));
    cfg.n_cells = 400;
    cfg.t_final = 16.0;
    cfg.record_every = 8;

    let initial = InitialProfile::Perturbation {
        shape: PerturbationShape::Sine,
        mode: 1,
        amplitude: 0.05,
    }
    .build(&cfg, 0)?;

    let rec = simulate(&cfg, &initial)?;
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "W", "L1 dev", "L2 dev");
    for i in (0..rec.len()).step_by(rec.len() / 8) {
        println!(
            "{:>6.2} {:>12.6} {:>12.3e} {:>12.3e}",
            rec.times[i], rec.mass[i], rec.l1[i], rec.l2[i]
        );
    }

    for (name, which) in [("L1", NormSeries::L1), ("L2", NormSeries::L2)] {
        match fit_decay_rate(&rec, which, None)? {
            DecayOutcome::Fit(f) => println!(
                "{name}: alpha = {:.4} (r^2 = {:.5}, {} points)",
                f.alpha, f.r_squared, f.n_points
            ),
            DecayOutcome::Extinct { time } => println!("{name}: hit zero at t = {time:.3}"),
        }
    }
    Ok(())
}

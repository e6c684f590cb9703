//! Watch an energy certificate decrease along closed-loop runs, in both the
//! mildly and the strongly load-reactive regimes.
//!
//!     cargo run --example energy_certificates

use refab::lyapunov::{certified_rate, monitor, select_beta};
use refab::model::{ClosedLoopConfig, VelocityModel};
use refab::scenario::{certificate_for, InitialProfile, PerturbationShape};
use refab::solver::simulate;

fn run_one(d: f64, k: f64) -> refab::Result<()> {
    let velocity = VelocityModel::affine_with_ratio(d, 1.0, 1.0)?;
    let mut cfg = ClosedLoopConfig::new(1.0, k, velocity);
    cfg.n_cells = 200;
    cfg.cfl = 0.25;
    cfg.t_final = 8.0;
    cfg.record_every = 1;
    cfg.freeze_velocity = true;

    let initial = InitialProfile::Perturbation {
        shape: PerturbationShape::Sine,
        mode: 1,
        amplitude: 0.05,
    }
    .build(&cfg, 0)?;
    let rec = simulate(&cfg, &initial)?;

    let functional = certificate_for(d, k)?;
    let series = monitor(&rec, &functional)?;
    let v0 = series.values[0];
    let vn = *series.values.last().unwrap();
    println!(
        "d = {d:>4}, k = {k:>4}: {:?}",
        functional
    );
    println!(
        "    V(0) = {v0:.3e}, V(T) = {vn:.3e}, largest single-step increase {:.2e}",
        series.max_increase
    );
    if d.abs() < 1.0 {
        let beta = select_beta(d, k)?;
        println!(
            "    certified decay rate {:.4} (weight beta = {beta:.4})",
            certified_rate(d, k, beta)?
        );
    }
    Ok(())
}

fn main() -> refab::Result<()> {
    println!("mild regime |d| < 1 (weighted deviation functional):");
    run_one(-0.5, 0.3)?;
    run_one(0.9, 0.5)?;
    println!();
    println!("strong regime d >= 1 (shifted-variable functional):");
    run_one(1.0, 0.3)?;
    run_one(1.5, -0.4)?;
    Ok(())
}

//! Test a computed trajectory against the integral (weak) form of the
//! conservation law with a smooth test function. The residual shrinks at
//! first order as the grid refines, which is the solver's accuracy.
//!
//!     cargo run --example weak_form_residual

use refab::model::{ClosedLoopConfig, VelocityModel};
use refab::scenario::InitialProfile;
use refab::solver::simulate;
use refab::weak::{weak_residual, TestFunction};

fn main() -> refab::Result<()> {
    let tau = 1.0;
    println!("{:>8} {:>14} {:>8}", "cells", "|residual|", "order");
    let mut prev: Option<f64> = None;
    for n in [50, 100, 200, 400] {
        let mut cfg = ClosedLoopConfig::new(0.0, 0.4, VelocityModel::reciprocal());
        cfg.n_cells = n;
        cfg.t_final = tau;
        cfg.record_every = 1;

        let initial =
            InitialProfile::Bump { center: 0.5, width: 0.4, height: 1.0 }.build(&cfg, 0)?;
        let rec = simulate(&cfg, &initial)?;
        let r = weak_residual(&rec, &cfg, &TestFunction::ramp(tau))?.abs();
        match prev {
            Some(p) => println!("{n:>8} {r:>14.6e} {:>8.2}", (p / r).log2()),
            None => println!("{n:>8} {r:>14.6e} {:>8}", "-"),
        }
        prev = Some(r);
    }
    println!("\n(the ramp test function vanishes at the outflow and the final time,");
    println!(" so no unknown boundary terms enter the balance)");
    Ok(())
}

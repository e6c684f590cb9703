//! Cross-check the two solvers: the conservative upwind scheme against the
//! semi-Lagrangian tracer. Their gap shrinks at first order in the cell
//! width, which is each scheme's own accuracy.
//!
//!     cargo run --example solver_agreement

use refab::characteristic::simulate_characteristic;
use refab::model::{ClosedLoopConfig, VelocityModel};
use refab::scenario::InitialProfile;
use refab::solver::simulate;

fn main() -> refab::Result<()> {
    println!("{:>8} {:>14} {:>14} {:>8}", "cells", "L1 gap", "sup gap", "order");
    let mut prev: Option<f64> = None;
    for n in [100, 200, 400, 800] {
        let mut cfg = ClosedLoopConfig::new(0.0, 0.3, VelocityModel::reciprocal());
        cfg.n_cells = n;
        cfg.cfl = 0.4;
        cfg.t_final = 1.0;
        cfg.record_every = 10_000;

        let initial =
            InitialProfile::Bump { center: 0.4, width: 0.3, height: 2.0 }.build(&cfg, 0)?;
        let up = simulate(&cfg, &initial)?;
        let (ch, _) = simulate_characteristic(&cfg, &initial)?;

        let a = up.snapshots.last().unwrap();
        let b = ch.snapshots.last().unwrap();
        let l1: f64 = a
            .cells
            .iter()
            .zip(&b.cells)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            * a.dx();
        let sup = a
            .cells
            .iter()
            .zip(&b.cells)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        let order = prev.map(|p: f64| (p / l1).log2());
        match order {
            Some(o) => println!("{n:>8} {l1:>14.6e} {sup:>14.6e} {o:>8.2}"),
            None => println!("{n:>8} {l1:>14.6e} {sup:>14.6e} {:>8}", "-"),
        }
        prev = Some(l1);
    }
    Ok(())
}

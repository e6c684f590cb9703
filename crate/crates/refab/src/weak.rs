//! Weak-form residual of a computed trajectory.
//!
//! A trajectory solves the transport loop in the weak sense when, for every
//! smooth `phi` with `phi(tau, .) = 0` and `phi(., 1) = 0`,
//!
//! ```text
//! R(phi) = int_0^tau int_0^1 rho (phi_t + lambda(W) phi_x) dx dt
//!        + int_0^1 rho0(x) phi(0, x) dx
//!        + int_0^tau u(t) phi(t, 0) dt
//! ```
//!
//! vanishes. Evaluating `R` on recorded output gives an a-posteriori check
//! that is independent of how the trajectory was produced: the quadrature
//! (midpoints in space, interval midpoints in time with averaged states) makes
//! the residual of a first-order scheme shrink linearly under refinement.

use crate::error::{Error, Result};
use crate::model::{equilibrium_summary, ClosedLoopConfig};
use crate::solver::TrajectoryRecord;

/// How exactly the admissibility conditions must hold at quadrature points.
const ADMISSIBILITY_TOL: f64 = 1e-12;

/// A smooth space-time test function on `[0, tau] x [0, 1]`, supplied with
/// its partial derivatives.
pub struct TestFunction {
    pub tau: f64,
    pub phi: Box<dyn Fn(f64, f64) -> f64>,
    pub phi_t: Box<dyn Fn(f64, f64) -> f64>,
    pub phi_x: Box<dyn Fn(f64, f64) -> f64>,
}

impl TestFunction {
    pub fn new(
        tau: f64,
        phi: impl Fn(f64, f64) -> f64 + 'static,
        phi_t: impl Fn(f64, f64) -> f64 + 'static,
        phi_x: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Self {
        TestFunction {
            tau,
            phi: Box::new(phi),
            phi_t: Box::new(phi_t),
            phi_x: Box::new(phi_x),
        }
    }

    /// The bilinear ramp `(tau - t)(1 - x)`: the simplest admissible function
    /// that exercises both the interior and the inflow boundary term.
    pub fn ramp(tau: f64) -> Self {
        TestFunction::new(
            tau,
            move |t, x| (tau - t) * (1.0 - x),
            move |_, x| -(1.0 - x),
            move |t, _| -(tau - t),
        )
    }
}

/// Evaluate the weak residual of a recorded trajectory against `phi`.
///
/// The record must start at `t = 0`, end at `t = tau`, and keep a snapshot at
/// every sampled time (which `simulate` guarantees).
pub fn weak_residual(
    rec: &TrajectoryRecord,
    cfg: &ClosedLoopConfig,
    tf: &TestFunction,
) -> Result<f64> {
    if rec.len() < 2 {
        return Err(Error::BadTrajectory("need at least two recorded times".into()));
    }
    if rec.snapshots.len() != rec.len() {
        return Err(Error::BadTrajectory("record is missing snapshots".into()));
    }
    if rec.times[0] != 0.0 {
        return Err(Error::BadTrajectory(format!(
            "record starts at {} instead of 0",
            rec.times[0]
        )));
    }
    let t_end = *rec.times.last().unwrap();
    if (t_end - tf.tau).abs() > 1e-12 * tf.tau.max(1.0) {
        return Err(Error::BadTrajectory(format!(
            "record ends at {} but the test function lives on [0, {}]",
            t_end, tf.tau
        )));
    }
    let eq = equilibrium_summary(cfg.rho_bar, &cfg.velocity)?;
    let first = &rec.snapshots[0];
    let n = first.n_cells();
    let dx = first.dx();

    // Admissibility: phi must vanish on the final slice and the outflow side.
    let mut worst = 0.0f64;
    for j in 0..n {
        worst = worst.max((tf.phi)(tf.tau, first.center(j)).abs());
    }
    worst = worst.max((tf.phi)(tf.tau, 0.0).abs());
    worst = worst.max((tf.phi)(tf.tau, 1.0).abs());
    for i in 0..rec.len() - 1 {
        let tm = 0.5 * (rec.times[i] + rec.times[i + 1]);
        worst = worst.max((tf.phi)(tm, 1.0).abs());
        worst = worst.max((tf.phi)(rec.times[i], 1.0).abs());
    }
    if worst > ADMISSIBILITY_TOL {
        return Err(Error::BadTestFunction(format!(
            "phi must vanish at t = tau and at x = 1 (largest violation {worst:.3e})"
        )));
    }

    let mut interior = 0.0f64;
    let mut boundary = 0.0f64;
    for i in 0..rec.len() - 1 {
        let t0 = rec.times[i];
        let t1 = rec.times[i + 1];
        let dt = t1 - t0;
        let tm = 0.5 * (t0 + t1);
        let w_avg = 0.5 * (rec.mass[i] + rec.mass[i + 1]);
        let lambda = if cfg.freeze_velocity {
            eq.lambda_bar
        } else {
            cfg.velocity.lambda(w_avg)?
        };
        let a = &rec.snapshots[i];
        let b = &rec.snapshots[i + 1];
        let mut slab = 0.0f64;
        for j in 0..n {
            let x = a.center(j);
            let rho_avg = 0.5 * (a.cells[j] + b.cells[j]);
            slab += rho_avg * ((tf.phi_t)(tm, x) + lambda * (tf.phi_x)(tm, x));
        }
        interior += dt * dx * slab;
        let u_avg = 0.5 * (rec.influx[i] + rec.influx[i + 1]);
        boundary += dt * u_avg * (tf.phi)(tm, 0.0);
    }

    let mut initial = 0.0f64;
    for j in 0..n {
        initial += first.cells[j] * (tf.phi)(0.0, first.center(j));
    }
    initial *= dx;

    Ok(interior + initial + boundary)
}

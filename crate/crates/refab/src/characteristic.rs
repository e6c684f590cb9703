//! Semi-Lagrangian cross-check solver.
//!
//! The transport speed depends on time only, so every characteristic in a step
//! is a straight shift by the common displacement
//!
//! ```text
//! delta = dt * (lambda(W(t)) + lambda(W(t + dt))) / 2
//! ```
//!
//! The end-of-step load is not known up front, so each step runs a fixed-point
//! iteration: guess the end load, shift the field, re-measure the load, repeat
//! until the guess is reproduced. Feet that trace back into the domain read the
//! old field by linear interpolation; feet that trace back through the inflow
//! boundary are filled from the feedback law evaluated at the crossing time,
//! with the load interpolated linearly inside the step.
//!
//! The method is not conservative to roundoff like the flux-form scheme, which
//! is exactly why it is useful: agreement between the two solvers is evidence
//! that both discretize the same dynamics.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{equilibrium_summary, ClosedLoopConfig, EquilibriumSummary};
use crate::solver::{DensityField, LoopState, TrajectoryRecord, BLOWUP_GUARD};

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITERS: usize = 50;
const MAX_DT_HALVINGS: usize = 5;

/// One sample of the outflow boundary trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub t: f64,
    /// Accumulated characteristic displacement at `t`.
    pub xi: f64,
    /// Density at the outflow boundary at `t`.
    pub outflow_density: f64,
    pub mass: f64,
}

/// Ring buffer of outflow-boundary samples, indexed by displacement.
///
/// A value leaving at displacement `xi` entered the domain at displacement
/// `xi - 1`, so keeping a bit more than one unit of lookback is enough to
/// relate the outflow trace to the inflow that produced it.
#[derive(Debug, Clone, Default)]
pub struct BoundaryTraceHistory {
    entries: VecDeque<TraceEntry>,
    lookback: f64,
}

impl BoundaryTraceHistory {
    pub fn new() -> Self {
        BoundaryTraceHistory { entries: VecDeque::new(), lookback: 1.2 }
    }

    pub fn with_lookback(lookback: f64) -> Self {
        BoundaryTraceHistory { entries: VecDeque::new(), lookback }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter()
    }

    pub fn push(&mut self, entry: TraceEntry) -> Result<()> {
        if let Some(last) = self.entries.back() {
            if entry.xi < last.xi {
                return Err(Error::BadTrajectory(format!(
                    "displacement went backwards: {} after {}",
                    entry.xi, last.xi
                )));
            }
        }
        self.entries.push_back(entry);
        self.prune();
        Ok(())
    }

    fn prune(&mut self) {
        let Some(last) = self.entries.back() else { return };
        let cutoff = last.xi - self.lookback;
        // Keep one entry at or before the cutoff so interpolation still
        // brackets the full lookback window.
        while self.entries.len() > 2 {
            if self.entries[1].xi <= cutoff {
                self.entries.pop_front();
            } else {
                break;
            }
        }
    }

    /// Outflow density at a given displacement, linearly interpolated.
    /// Returns `None` outside the stored span.
    pub fn outflow_at_displacement(&self, xi: f64) -> Option<f64> {
        let first = self.entries.front()?;
        let last = self.entries.back()?;
        if xi < first.xi || xi > last.xi {
            return None;
        }
        let idx = self.entries.partition_point(|e| e.xi <= xi);
        if idx == 0 {
            return Some(first.outflow_density);
        }
        if idx >= self.entries.len() {
            return Some(last.outflow_density);
        }
        let a = self.entries[idx - 1];
        let b = self.entries[idx];
        if b.xi == a.xi {
            return Some(b.outflow_density);
        }
        let w = (xi - a.xi) / (b.xi - a.xi);
        Some(a.outflow_density + w * (b.outflow_density - a.outflow_density))
    }
}

/// Linear interpolation of a cell-centered field at position `z`, with
/// constant extrapolation past the last center.
fn interp_cells(cells: &[f64], dx: f64, z: f64) -> f64 {
    let n = cells.len();
    let x0 = 0.5 * dx;
    if z >= 1.0 - x0 {
        return cells[n - 1];
    }
    let j = (((z - x0) / dx).floor().max(0.0) as usize).min(n - 2);
    let xj = (j as f64 + 0.5) * dx;
    let frac = ((z - xj) / dx).clamp(0.0, 1.0);
    cells[j] + frac * (cells[j + 1] - cells[j])
}

/// Semi-Lagrangian stepper for the same closed loop as the upwind scheme.
#[derive(Debug, Clone)]
pub struct CharacteristicStepper {
    cfg: ClosedLoopConfig,
    eq: EquilibriumSummary,
}

/// What one committed characteristic step reports back.
#[derive(Debug, Clone, Copy)]
pub struct CharacteristicStep {
    pub state: LoopState,
    pub dt: f64,
    /// Displacement accumulated over the step.
    pub delta: f64,
    pub fixed_point_iters: usize,
    pub dt_halvings: usize,
}

impl CharacteristicStepper {
    pub fn new(cfg: &ClosedLoopConfig) -> Result<Self> {
        let eq = equilibrium_summary(cfg.rho_bar, &cfg.velocity)?;
        Ok(CharacteristicStepper { cfg: cfg.clone(), eq })
    }

    pub fn equilibrium(&self) -> EquilibriumSummary {
        self.eq
    }

    fn lambda_at(&self, w: f64) -> Result<f64> {
        let lam = if self.cfg.freeze_velocity {
            self.eq.lambda_bar
        } else {
            self.cfg.velocity.lambda(w)?
        };
        if !(lam > 0.0) || !lam.is_finite() {
            return Err(Error::DegenerateSpeed { at: w, lambda: lam });
        }
        Ok(lam)
    }

    /// Inflow density given the outflow density and the load.
    fn inflow_density(&self, rho_out: f64, w: f64, lambda: f64) -> f64 {
        if self.cfg.freeze_velocity {
            self.cfg.rho_bar
                + self.cfg.k * (rho_out - self.cfg.rho_bar)
                + (self.cfg.k - 1.0) * self.eq.d * (w - self.cfg.rho_bar)
        } else {
            let y = rho_out * lambda;
            let u = self.eq.flux_bar + self.cfg.k * (y - self.eq.flux_bar);
            u / lambda
        }
    }

    /// Loop quantities for the current state (same convention as the upwind
    /// stepper).
    pub fn loop_state(&self, f: &DensityField) -> Result<LoopState> {
        let mass = f.total_mass();
        let lambda = self.lambda_at(mass)?;
        let rho_last = *f.cells.last().expect("nonempty field");
        let inflow = self.inflow_density(rho_last, mass, lambda);
        Ok(LoopState { mass, lambda, influx: inflow * lambda, outflux: rho_last * lambda, inflow })
    }

    /// Build the shifted field for a trial step; returns (cells, end mass).
    fn shifted(
        &self,
        f: &DensityField,
        state: &LoopState,
        dt: f64,
        w_star: f64,
    ) -> Result<(Vec<f64>, f64)> {
        let dx = f.dx();
        let x0 = 0.5 * dx;
        let lam1 = self.lambda_at(w_star)?;
        let delta = 0.5 * dt * (state.lambda + lam1);
        let n = f.cells.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let x = (i as f64 + 0.5) * dx;
            let z = x - delta;
            let v = if z >= x0 {
                interp_cells(&f.cells, dx, z)
            } else if z >= 0.0 {
                state.inflow + (f.cells[0] - state.inflow) * (z / x0)
            } else {
                // Entered through x = 0 at fraction theta of the step.
                let theta = 1.0 - x / delta;
                let w_s = state.mass + theta * (w_star - state.mass);
                let lam_s = self.lambda_at(w_s)?;
                let rho_out_s = interp_cells(&f.cells, dx, 1.0 - theta * delta);
                self.inflow_density(rho_out_s, w_s, lam_s)
            };
            out.push(v);
        }
        let mass = dx * out.iter().sum::<f64>();
        Ok((out, mass))
    }

    /// Advance one step of length at most `dt_target`, halving on fixed-point
    /// trouble. The field is updated in place.
    pub fn step(&self, f: &mut DensityField, dt_target: f64) -> Result<CharacteristicStep> {
        if !(dt_target > 0.0) {
            return Err(Error::BadParameter(format!("step size {dt_target} must be positive")));
        }
        let state = self.loop_state(f)?;
        let mut dt = dt_target;
        for halving in 0..=MAX_DT_HALVINGS {
            let mut w_star = state.mass;
            for iter in 0..FIXED_POINT_MAX_ITERS {
                let (cells, w_new) = self.shifted(f, &state, dt, w_star)?;
                if (w_new - w_star).abs() <= FIXED_POINT_TOL * w_new.abs().max(1.0) {
                    let lam1 = self.lambda_at(w_new)?;
                    let delta = 0.5 * dt * (state.lambda + lam1);
                    f.cells = cells;
                    f.t += dt;
                    let max_abs = f.max_abs();
                    if max_abs > BLOWUP_GUARD {
                        return Err(Error::BlowUp { t: f.t, norm: max_abs });
                    }
                    return Ok(CharacteristicStep {
                        state,
                        dt,
                        delta,
                        fixed_point_iters: iter + 1,
                        dt_halvings: halving,
                    });
                }
                w_star = w_new;
            }
            dt *= 0.5;
        }
        Err(Error::FixedPointDiverged { t: f.t, halvings: MAX_DT_HALVINGS as u32 })
    }
}

/// One semi-Lagrangian step (standalone form).
pub fn step_characteristic(f: &DensityField, cfg: &ClosedLoopConfig) -> Result<DensityField> {
    let stepper = CharacteristicStepper::new(cfg)?;
    let state = stepper.loop_state(f)?;
    let dt = cfg.cfl * f.dx() / state.lambda;
    let mut next = f.clone();
    stepper.step(&mut next, dt)?;
    Ok(next)
}

/// Integrate the closed loop with the semi-Lagrangian scheme. Produces the
/// same record layout as the flux-form `simulate`, so runs can be compared
/// column by column. Also returns the outflow trace history.
pub fn simulate_characteristic(
    cfg: &ClosedLoopConfig,
    rho0: &DensityField,
) -> Result<(TrajectoryRecord, BoundaryTraceHistory)> {
    cfg.validate()?;
    if rho0.n_cells() != cfg.n_cells {
        return Err(Error::BadParameter(format!(
            "initial field has {} cells, config says {}",
            rho0.n_cells(),
            cfg.n_cells
        )));
    }
    if !(rho0.t < cfg.t_final) {
        return Err(Error::BadParameter(format!(
            "initial time {} is not before t_final {}",
            rho0.t, cfg.t_final
        )));
    }
    let stepper = CharacteristicStepper::new(cfg)?;
    let mut f = rho0.clone();
    let mut rec = TrajectoryRecord { rho_bar: cfg.rho_bar, ..Default::default() };
    let mut history = BoundaryTraceHistory::new();

    let state = stepper.loop_state(&f)?;
    let mut xi = 0.0f64;
    rec.push_sample(&f, &state, xi);
    history.push(TraceEntry {
        t: f.t,
        xi,
        outflow_density: *f.cells.last().unwrap(),
        mass: state.mass,
    })?;

    let mut step_index = 0usize;
    while f.t < cfg.t_final {
        let state = stepper.loop_state(&f)?;
        let dt_target = (cfg.cfl * f.dx() / state.lambda).min(cfg.t_final - f.t);
        let step = stepper.step(&mut f, dt_target)?;
        xi += step.delta;
        // Land exactly on the final time when the target was the remainder.
        if (cfg.t_final - f.t).abs() < 1e-12 * cfg.t_final.max(1.0) {
            f.t = cfg.t_final;
        }
        history.push(TraceEntry {
            t: f.t,
            xi,
            outflow_density: *f.cells.last().unwrap(),
            mass: f.total_mass(),
        })?;
        step_index += 1;
        if step_index.is_multiple_of(cfg.record_every) || f.t >= cfg.t_final {
            let now = stepper.loop_state(&f)?;
            rec.push_sample(&f, &now, xi);
        }
    }
    Ok((rec, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VelocityModel;
    use crate::solver::simulate;

    fn bump(center: f64, width: f64, height: f64) -> impl Fn(f64) -> f64 {
        move |x: f64| {
            let z = (x - center) / width;
            if z.abs() < 0.5 {
                let c = (std::f64::consts::PI * z).cos();
                height * c * c
            } else {
                0.0
            }
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        for k in [-0.5, 0.0, 0.5] {
            let mut cfg = ClosedLoopConfig::new(1.0, k, VelocityModel::reciprocal_for(1.0));
            cfg.n_cells = 40;
            let f = DensityField::new(0.0, vec![1.0; 40]);
            let next = step_characteristic(&f, &cfg).unwrap();
            for &r in &next.cells {
                assert!((r - 1.0).abs() < 1e-13, "k = {k}");
            }
        }
    }

    #[test]
    fn matches_upwind_exactly_at_unit_courant_frozen_speed() {
        // Frozen speed 1 and cfl = 1 make both schemes an exact one-cell
        // shift, so the trajectories agree to roundoff.
        let mut cfg = ClosedLoopConfig::new(0.0, 0.0, VelocityModel::reciprocal());
        cfg.n_cells = 50;
        cfg.cfl = 1.0;
        cfg.freeze_velocity = true;
        cfg.t_final = 0.6;
        cfg.record_every = 10;
        let f0 = DensityField::from_fn(50, bump(0.4, 0.3, 1.0));
        let up = simulate(&cfg, &f0).unwrap();
        let (ch, _) = simulate_characteristic(&cfg, &f0).unwrap();
        assert_eq!(up.len(), ch.len());
        for (a, b) in up.snapshots.iter().zip(&ch.snapshots) {
            for (x, y) in a.cells.iter().zip(&b.cells) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn agrees_with_upwind_on_the_nonlinear_loop_under_refinement() {
        let l1_gap = |n: usize| {
            let mut cfg = ClosedLoopConfig::new(0.5, 0.3, VelocityModel::reciprocal_for(0.5));
            cfg.n_cells = n;
            cfg.cfl = 0.5;
            cfg.t_final = 1.0;
            cfg.record_every = 100000;
            let f0 = DensityField::from_fn(n, |x| 0.5 + bump(0.5, 0.4, 0.6)(x));
            let up = simulate(&cfg, &f0).unwrap();
            let (ch, _) = simulate_characteristic(&cfg, &f0).unwrap();
            let a = up.snapshots.last().unwrap();
            let b = ch.snapshots.last().unwrap();
            a.dx()
                * a.cells
                    .iter()
                    .zip(&b.cells)
                    .map(|(x, y)| (x - y).abs())
                    .sum::<f64>()
        };
        let coarse = l1_gap(100);
        let fine = l1_gap(200);
        assert!(coarse < 0.05, "coarse gap {coarse}");
        assert!(fine < coarse / 1.5, "gap did not shrink: {coarse} -> {fine}");
    }

    #[test]
    fn load_stays_close_to_the_flux_form_scheme() {
        let mut cfg = ClosedLoopConfig::new(0.5, 0.7, VelocityModel::reciprocal_for(0.5));
        cfg.n_cells = 200;
        cfg.cfl = 0.5;
        cfg.t_final = 2.0;
        cfg.record_every = 100000;
        let f0 = DensityField::from_fn(200, |x| 0.5 + bump(0.3, 0.25, 0.5)(x));
        let up = simulate(&cfg, &f0).unwrap();
        let (ch, _) = simulate_characteristic(&cfg, &f0).unwrap();
        let wu = *up.mass.last().unwrap();
        let wc = *ch.mass.last().unwrap();
        assert!((wu - wc).abs() < 1e-3, "W gap {:.3e}", (wu - wc).abs());
    }

    #[test]
    fn history_rejects_backward_displacement() {
        let mut h = BoundaryTraceHistory::new();
        h.push(TraceEntry { t: 0.0, xi: 0.0, outflow_density: 1.0, mass: 1.0 }).unwrap();
        h.push(TraceEntry { t: 1.0, xi: 0.5, outflow_density: 1.0, mass: 1.0 }).unwrap();
        let bad = h.push(TraceEntry { t: 2.0, xi: 0.4, outflow_density: 1.0, mass: 1.0 });
        assert!(matches!(bad, Err(Error::BadTrajectory(_))));
    }

    #[test]
    fn history_prunes_but_keeps_one_unit_of_lookback() {
        let mut h = BoundaryTraceHistory::with_lookback(1.0);
        for i in 0..=30 {
            let xi = 0.1 * i as f64;
            h.push(TraceEntry { t: xi, xi, outflow_density: xi, mass: 1.0 }).unwrap();
        }
        let first = h.entries().next().unwrap().xi;
        let last = h.entries().last().unwrap().xi;
        assert!(last - first >= 1.0 - 1e-12, "span {}", last - first);
        assert!(h.len() <= 13, "len {}", h.len());
        // Interior lookups reproduce the linear ramp.
        let v = h.outflow_at_displacement(2.35).unwrap();
        assert!((v - 2.35).abs() < 1e-12);
        assert!(h.outflow_at_displacement(0.0).is_none());
    }

    #[test]
    fn trace_history_tracks_displacement_monotonically() {
        let mut cfg = ClosedLoopConfig::new(0.5, 0.5, VelocityModel::reciprocal_for(0.5));
        cfg.n_cells = 80;
        cfg.t_final = 3.0;
        cfg.record_every = 20;
        let f0 = DensityField::from_fn(80, |x| 0.5 + bump(0.5, 0.3, 0.4)(x));
        let (_, h) = simulate_characteristic(&cfg, &f0).unwrap();
        let xs: Vec<f64> = h.entries().map(|e| e.xi).collect();
        assert!(xs.windows(2).all(|p| p[1] >= p[0]));
        let span = xs.last().unwrap() - xs.first().unwrap();
        assert!(span >= 1.0, "span {span}");
    }
}

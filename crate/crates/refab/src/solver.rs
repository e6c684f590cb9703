//! Explicit upwind finite-volume solver for the closed loop.
//!
//! The density lives on a uniform grid of cell averages over [0, 1]. Because
//! the transport speed `lambda(W(t))` is space-independent, the exact flux is
//! `rho * lambda` with the upwind cell value; the nonlocal speed is frozen over
//! each step and the step size obeys `dt = cfl * dx / lambda(W)`, so the
//! Courant number equals `cfl` exactly regardless of the load.
//!
//! Boundary closure per step:
//!
//! ```text
//! y = rho[n-1] * lambda            (measured outflux)
//! u = flux_bar + k (y - flux_bar)  (feedback influx)
//! inflow density = u / lambda
//! ```
//!
//! With `freeze_velocity` the speed is pinned to `lambda(rho_bar)` and the
//! inflow density follows the linearized loop,
//! `rho_in = rho_bar + k (rho[n-1] - rho_bar) + (k-1) d (W - rho_bar)`,
//! which reproduces the linearization of the feedback law exactly (the d-term
//! is the first-order trace of the load-dependent speed).

use crate::error::{Error, Result};
use crate::model::{equilibrium_summary, ClosedLoopConfig, EquilibriumSummary};

/// Norm guard past which a run is declared blown up.
pub const BLOWUP_GUARD: f64 = 1e12;

/// Cell-averaged density at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub t: f64,
    pub cells: Vec<f64>,
}

/// Compensated (Neumaier) sum; keeps grid sums honest to a few ulps.
fn csum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

impl DensityField {
    pub fn new(t: f64, cells: Vec<f64>) -> Self {
        DensityField { t, cells }
    }

    /// Sample an analytic profile into cell averages with 3-point Gauss
    /// quadrature per cell.
    pub fn from_fn(n_cells: usize, profile: impl Fn(f64) -> f64) -> Self {
        let dx = 1.0 / n_cells as f64;
        // Gauss-Legendre nodes +-sqrt(3/5) on the reference cell.
        let off = 0.5 * (3.0f64 / 5.0).sqrt() * dx;
        let (w0, w1) = (5.0 / 18.0, 8.0 / 18.0);
        let cells = (0..n_cells)
            .map(|i| {
                let c = (i as f64 + 0.5) * dx;
                w0 * profile(c - off) + w1 * profile(c) + w0 * profile(c + off)
            })
            .collect();
        DensityField { t: 0.0, cells }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.cells.len() as f64
    }

    /// Center coordinate of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    /// Total load `W = integral of rho`, exact for cell averages.
    pub fn total_mass(&self) -> f64 {
        self.dx() * csum(self.cells.iter().copied())
    }

    /// L1 norm of the deviation from `rho_bar`.
    pub fn l1_dev(&self, rho_bar: f64) -> f64 {
        self.dx() * csum(self.cells.iter().map(|&r| (r - rho_bar).abs()))
    }

    /// L2 norm of the deviation from `rho_bar`.
    pub fn l2_dev(&self, rho_bar: f64) -> f64 {
        (self.dx() * csum(self.cells.iter().map(|&r| (r - rho_bar) * (r - rho_bar)))).sqrt()
    }

    /// Sup norm of the raw density.
    pub fn max_abs(&self) -> f64 {
        self.cells.iter().fold(0.0f64, |m, &r| m.max(r.abs()))
    }
}

/// Instantaneous loop quantities at one recorded time.
#[derive(Debug, Clone, Copy)]
pub struct LoopState {
    pub mass: f64,
    pub lambda: f64,
    pub influx: f64,
    pub outflux: f64,
    /// Inflow density `u / lambda`.
    pub inflow: f64,
}

/// Precomputed per-run data for stepping.
#[derive(Debug, Clone)]
pub struct UpwindStepper {
    cfg: ClosedLoopConfig,
    eq: EquilibriumSummary,
}

impl UpwindStepper {
    pub fn new(cfg: &ClosedLoopConfig) -> Result<Self> {
        let eq = equilibrium_summary(cfg.rho_bar, &cfg.velocity)?;
        Ok(UpwindStepper { cfg: cfg.clone(), eq })
    }

    pub fn equilibrium(&self) -> EquilibriumSummary {
        self.eq
    }

    /// Evaluate speed, fluxes and inflow density for the current state.
    pub fn loop_state(&self, f: &DensityField) -> Result<LoopState> {
        let mass = f.total_mass();
        let lambda = if self.cfg.freeze_velocity {
            self.eq.lambda_bar
        } else {
            self.cfg.velocity.lambda(mass)?
        };
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::DegenerateSpeed { at: mass, lambda });
        }
        let rho_last = *f.cells.last().expect("nonempty field");
        let outflux = rho_last * lambda;
        let inflow = if self.cfg.freeze_velocity {
            self.cfg.rho_bar
                + self.cfg.k * (rho_last - self.cfg.rho_bar)
                + (self.cfg.k - 1.0) * self.eq.d * (mass - self.cfg.rho_bar)
        } else {
            let u = self.eq.flux_bar + self.cfg.k * (outflux - self.eq.flux_bar);
            u / lambda
        };
        Ok(LoopState { mass, lambda, influx: inflow * lambda, outflux, inflow })
    }

    /// Advance one step. `t_stop` caps the step so runs land exactly on their
    /// final time. Returns the loop state the step was computed from.
    pub fn step(&self, f: &mut DensityField, t_stop: f64) -> Result<LoopState> {
        let state = self.loop_state(f)?;
        let dx = f.dx();
        let dt_full = self.cfg.cfl * dx / state.lambda;
        let clipped = dt_full >= t_stop - f.t;
        let dt = if clipped { t_stop - f.t } else { dt_full };
        let c = state.lambda * dt / dx;
        debug_assert!(c <= self.cfg.cfl + 1e-12);

        let mut prev = state.inflow;
        let mut max_abs = 0.0f64;
        for r in f.cells.iter_mut() {
            let cur = *r;
            *r = cur - c * (cur - prev);
            max_abs = max_abs.max(r.abs());
            prev = cur;
        }
        f.t = if clipped { t_stop } else { f.t + dt };
        if max_abs > BLOWUP_GUARD {
            return Err(Error::BlowUp { t: f.t, norm: max_abs });
        }
        Ok(state)
    }
}

/// One explicit upwind step of the closed loop (standalone form).
pub fn step_upwind(f: &DensityField, cfg: &ClosedLoopConfig) -> Result<DensityField> {
    let stepper = UpwindStepper::new(cfg)?;
    let mut next = f.clone();
    stepper.step(&mut next, f64::INFINITY)?;
    Ok(next)
}

/// Time series of a run, sampled every `record_every` steps (plus the initial
/// and final states). Snapshots are kept at the same stride.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// Total load W.
    pub mass: Vec<f64>,
    pub influx: Vec<f64>,
    pub outflux: Vec<f64>,
    /// L1 norm of rho - rho_bar.
    pub l1: Vec<f64>,
    /// L2 norm of rho - rho_bar.
    pub l2: Vec<f64>,
    /// Accumulated characteristic displacement, the integral of lambda(W).
    pub displacement: Vec<f64>,
    pub snapshots: Vec<DensityField>,
    pub rho_bar: f64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Append one sampled instant (used by every solver that fills a record).
    pub fn push_sample(&mut self, f: &DensityField, state: &LoopState, xi: f64) {
        self.times.push(f.t);
        self.mass.push(state.mass);
        self.influx.push(state.influx);
        self.outflux.push(state.outflux);
        self.l1.push(f.l1_dev(self.rho_bar));
        self.l2.push(f.l2_dev(self.rho_bar));
        self.displacement.push(xi);
        self.snapshots.push(f.clone());
    }
}

/// Integrate the closed loop from `rho0` to `cfg.t_final`.
pub fn simulate(cfg: &ClosedLoopConfig, rho0: &DensityField) -> Result<TrajectoryRecord> {
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
    let stepper = UpwindStepper::new(cfg)?;
    let mut f = rho0.clone();
    let mut rec = TrajectoryRecord { rho_bar: cfg.rho_bar, ..Default::default() };

    let state = stepper.loop_state(&f)?;
    if f.max_abs() > BLOWUP_GUARD {
        return Err(Error::BlowUp { t: f.t, norm: f.max_abs() });
    }
    let mut xi = 0.0f64;
    rec.push_sample(&f, &state, xi);

    let mut step_index = 0usize;
    while f.t < cfg.t_final {
        let t_before = f.t;
        let state = stepper.step(&mut f, cfg.t_final)?;
        xi += state.lambda * (f.t - t_before);
        step_index += 1;
        if step_index.is_multiple_of(cfg.record_every) || f.t >= cfg.t_final {
            let now = stepper.loop_state(&f)?;
            rec.push_sample(&f, &now, xi);
        }
    }
    Ok(rec)
}

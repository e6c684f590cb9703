//! Quadratic energy functionals that certify closed-loop decay.
//!
//! Two families are implemented, matching the two regimes of the
//! speed-sensitivity ratio `d`:
//!
//! * `|d| < 1`: a spatially weighted deviation energy with a load term,
//!
//!   ```text
//!   L = int exp(-beta x) (rho - rho_bar)^2 dx + a (W - rho_bar)^2
//!   ```
//!
//!   where `beta` is found by halving until three inequalities hold
//!   (positive definiteness, boundary dissipation, cross-term domination)
//!   and `a = (exp(-beta) - k) d / (1 - k)`.
//!
//! * `d >= 1`: the load term is absorbed into the shifted variable
//!   `xi = (rho - rho_bar) + d (W - rho_bar)`, which satisfies the plain
//!   boundary relation `xi(0) = k xi(1)` in the linear regime, giving
//!
//!   ```text
//!   V = (2 A / (1 - k^2)) V1 + V2,
//!   V1 = int (rho - rho_bar)^2 dx + d (W - rho_bar)^2,
//!   V2 = int exp(-x) xi^2 dx
//!   ```
//!
//! All integrals use the midpoint rule on cell averages, which is exactly the
//! quadrature under which the upwind scheme decreases these functionals step
//! by step (up to roundoff) in the frozen-speed regime.

use crate::error::{Error, Result};
use crate::solver::{DensityField, TrajectoryRecord};

/// Weighted deviation energy `dx * sum exp(-beta x_i) (rho_i - rho_bar)^2`.
pub fn weighted_norm(f: &DensityField, rho_bar: f64, beta: f64) -> f64 {
    let dx = f.dx();
    dx * f
        .cells
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let x = (i as f64 + 0.5) * dx;
            (-beta * x).exp() * (r - rho_bar) * (r - rho_bar)
        })
        .sum::<f64>()
}

/// Sharp constant of the discrete Cauchy-Schwarz bound
/// `(W - rho_bar)^2 <= K * weighted_norm`: `K = dx * sum exp(beta x_i)`.
/// Approaches `(exp(beta) - 1) / beta` from below under refinement.
pub fn cauchy_schwarz_prefactor(beta: f64, n_cells: usize) -> f64 {
    let dx = 1.0 / n_cells as f64;
    dx * (0..n_cells)
        .map(|i| (beta * (i as f64 + 0.5) * dx).exp())
        .sum::<f64>()
}

/// Load-term weight `a = (exp(-beta) - k) d / (1 - k)` of the small-`d`
/// functional.
pub fn mass_coupling_weight(d: f64, k: f64, beta: f64) -> Result<f64> {
    if k == 1.0 {
        return Err(Error::WrongCase(
            "the weighted functional needs a gain different from 1".into(),
        ));
    }
    Ok(((-beta).exp() - k) * d / (1.0 - k))
}

/// Largest `beta`, halving from 1, for which the small-`d` functional
/// certifies decay: positive definiteness, boundary dissipation
/// `exp(-beta) > k^2`, and cross-term domination. Requires `|d| < 1` and
/// `|k| < 1`.
pub fn select_beta(d: f64, k: f64) -> Result<f64> {
    if d.abs() >= 1.0 || k.abs() >= 1.0 {
        return Err(Error::WrongCase(format!(
            "beta selection needs |d| < 1 and |k| < 1, got d = {d}, k = {k}"
        )));
    }
    let mut beta = 1.0f64;
    while beta > 1e-8 {
        let a = mass_coupling_weight(d, k, beta)?;
        let growth = (beta.exp() - 1.0) / beta;
        let positive = a > -1.0 / growth;
        let boundary = (-beta).exp() > k * k;
        let cross = 1.0 - d * d * growth * growth * (-beta).exp() > 0.0;
        if positive && boundary && cross {
            return Ok(beta);
        }
        beta *= 0.5;
    }
    Err(Error::WrongCase(format!(
        "no admissible weight exponent found for d = {d}, k = {k}"
    )))
}

/// Guaranteed decay rate of the small-`d` functional at the selected
/// `beta`, in rescaled time.
pub fn certified_rate(d: f64, k: f64, beta: f64) -> Result<f64> {
    let a = mass_coupling_weight(d, k, beta)?;
    let growth = (beta.exp() - 1.0) / beta;
    let margin = 1.0 - d * d * growth * growth * (-beta).exp();
    if margin <= 0.0 || (-beta).exp() <= k * k {
        return Err(Error::WrongCase(format!(
            "beta = {beta} does not certify decay for d = {d}, k = {k}"
        )));
    }
    let c3 = (1.0 + a * growth).max(1.0);
    Ok(beta * margin / c3)
}

/// Shifted deviation `xi_i = (rho_i - rho_bar) + d (W - rho_bar)`.
pub fn xi_field(f: &DensityField, rho_bar: f64, d: f64) -> Vec<f64> {
    let w_dev = f.total_mass() - rho_bar;
    f.cells.iter().map(|&r| (r - rho_bar) + d * w_dev).collect()
}

/// `V1 = dx * sum (rho_i - rho_bar)^2 + d (W - rho_bar)^2`.
pub fn deviation_load_energy(f: &DensityField, rho_bar: f64, d: f64) -> f64 {
    let w_dev = f.total_mass() - rho_bar;
    let dx = f.dx();
    dx * f.cells.iter().map(|&r| (r - rho_bar) * (r - rho_bar)).sum::<f64>() + d * w_dev * w_dev
}

/// `V2 = dx * sum exp(-x_i) xi_i^2`.
pub fn shifted_boundary_energy(f: &DensityField, rho_bar: f64, d: f64) -> f64 {
    let dx = f.dx();
    let xi = xi_field(f, rho_bar, d);
    dx * xi
        .iter()
        .enumerate()
        .map(|(i, &v)| (-((i as f64 + 0.5) * dx)).exp() * v * v)
        .sum::<f64>()
}

/// Coupling constant `A = max(1e-6, k^2 + 2 d^2 (1-k)^2 (1 - 1/e))` that
/// bounds how much the boundary can pump `V1` per crossing.
pub fn amplification_constant(d: f64, k: f64) -> f64 {
    (k * k + 2.0 * d * d * (1.0 - k) * (1.0 - k) * (1.0 - (-1.0f64).exp())).max(1e-6)
}

/// A concrete energy functional, ready to evaluate on snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LyapunovFunctional {
    /// `int exp(-beta x) (rho - rho_bar)^2 + mass_weight (W - rho_bar)^2`.
    WeightedDeviation { beta: f64, mass_weight: f64 },
    /// `(2 A / (1 - k^2)) V1 + V2` for the shifted variable;
    /// needs `d >= 1` and `|k| < 1`.
    LoadCoupled { d: f64, k: f64 },
}

impl LyapunovFunctional {
    /// Small-`d` functional with `beta` and `a` chosen automatically.
    pub fn weighted_for(d: f64, k: f64) -> Result<Self> {
        let beta = select_beta(d, k)?;
        let mass_weight = mass_coupling_weight(d, k, beta)?;
        Ok(LyapunovFunctional::WeightedDeviation { beta, mass_weight })
    }

    /// Large-`d` functional for the shifted variable.
    pub fn load_coupled(d: f64, k: f64) -> Result<Self> {
        if d < 1.0 || k.abs() >= 1.0 {
            return Err(Error::WrongCase(format!(
                "the shifted functional needs d >= 1 and |k| < 1, got d = {d}, k = {k}"
            )));
        }
        Ok(LyapunovFunctional::LoadCoupled { d, k })
    }

    pub fn evaluate(&self, f: &DensityField, rho_bar: f64) -> f64 {
        match *self {
            LyapunovFunctional::WeightedDeviation { beta, mass_weight } => {
                let w_dev = f.total_mass() - rho_bar;
                weighted_norm(f, rho_bar, beta) + mass_weight * w_dev * w_dev
            }
            LyapunovFunctional::LoadCoupled { d, k } => {
                let a = amplification_constant(d, k);
                2.0 * a / (1.0 - k * k) * deviation_load_energy(f, rho_bar, d)
                    + shifted_boundary_energy(f, rho_bar, d)
            }
        }
    }
}

/// Functional evaluated along a recorded trajectory.
#[derive(Debug, Clone)]
pub struct MonitorSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Per-interval log-slopes `ln(F_i / F_{i-1}) / (t_i - t_{i-1})`;
    /// the first entry is NaN.
    pub ratios: Vec<f64>,
    /// Largest single-interval increase, clamped at zero. A certified
    /// functional keeps this at roundoff level.
    pub max_increase: f64,
}

/// Evaluate `functional` on every snapshot of a record.
pub fn monitor(rec: &TrajectoryRecord, functional: &LyapunovFunctional) -> Result<MonitorSeries> {
    if rec.snapshots.len() != rec.times.len() || rec.is_empty() {
        return Err(Error::BadTrajectory(
            "record must keep a snapshot at every sampled time".into(),
        ));
    }
    let values: Vec<f64> = rec
        .snapshots
        .iter()
        .map(|s| functional.evaluate(s, rec.rho_bar))
        .collect();
    let mut ratios = Vec::with_capacity(values.len());
    ratios.push(f64::NAN);
    let mut max_increase = 0.0f64;
    for i in 1..values.len() {
        let dt = rec.times[i] - rec.times[i - 1];
        ratios.push((values[i] / values[i - 1]).ln() / dt);
        max_increase = max_increase.max(values[i] - values[i - 1]);
    }
    Ok(MonitorSeries { times: rec.times.clone(), values, ratios, max_increase })
}

/// Exponential fit of one decaying series.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// Decay rate: the fit is `c * exp(-alpha t)`.
    pub alpha: f64,
    pub c: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// What fitting a series produced.
#[derive(Debug, Clone, Copy)]
pub enum DecayOutcome {
    Fit(DecayFit),
    /// The series reached zero (or below); no log-linear fit is possible.
    Extinct { time: f64 },
}

/// Which recorded norm to fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormSeries {
    L1,
    L2,
}

/// Least-squares fit of `ln v` against `t` over a window (default: the last
/// 90% of the time span, skipping initial transients).
pub fn fit_series(
    times: &[f64],
    values: &[f64],
    window: Option<(f64, f64)>,
) -> Result<DecayOutcome> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::BadTrajectory("need two aligned samples to fit".into()));
    }
    let (t_lo, t_hi) = window.unwrap_or_else(|| {
        let t0 = times[0];
        let t1 = *times.last().unwrap();
        (t0 + 0.1 * (t1 - t0), t1)
    });
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < t_lo || t > t_hi {
            continue;
        }
        if v <= 0.0 {
            return Ok(DecayOutcome::Extinct { time: t });
        }
        pts.push((t, v.ln()));
    }
    let n = pts.len();
    if n < 2 {
        return Err(Error::BadTrajectory(format!(
            "window [{t_lo}, {t_hi}] holds {n} samples, need at least 2"
        )));
    }
    let nf = n as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let stt = pts.iter().map(|p| (p.0 - mean_t) * (p.0 - mean_t)).sum::<f64>();
    let sty = pts.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum::<f64>();
    if stt == 0.0 {
        return Err(Error::BadTrajectory("all samples at one time".into()));
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let ss_tot = pts.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum::<f64>();
    let ss_res = pts
        .iter()
        .map(|p| {
            let e = p.1 - (slope * p.0 + intercept);
            e * e
        })
        .sum::<f64>();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayOutcome::Fit(DecayFit {
        alpha: -slope,
        c: intercept.exp(),
        r_squared,
        window: (t_lo, t_hi),
        n_points: n,
    }))
}

/// Fit one of the recorded deviation norms of a run.
pub fn fit_decay_rate(
    rec: &TrajectoryRecord,
    norm: NormSeries,
    window: Option<(f64, f64)>,
) -> Result<DecayOutcome> {
    let values = match norm {
        NormSeries::L1 => &rec.l1,
        NormSeries::L2 => &rec.l2,
    };
    fit_series(&rec.times, values, window)
}

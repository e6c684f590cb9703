//! Parameter sweep over the (d, k) plane: theorem prediction vs computed
//! zeros, with an optional time-domain decay fit at each point.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lyapunov::{fit_decay_rate, DecayOutcome, NormSeries};
use crate::model::{ClosedLoopConfig, VelocityModel};
use crate::scenario::{InitialProfile, PerturbationShape};
use crate::solver::simulate;
use crate::spectral::{classify_stability, SpectralProblem};

/// Relative snap threshold: grid values this close to zero (from rounding
/// `min + i * step`) are written as exactly zero.
const ZERO_SNAP: f64 = 1e-12;

/// What to sweep and how finely.
#[derive(Debug, Clone)]
pub struct RegionScanSpec {
    pub d_min: f64,
    pub d_max: f64,
    pub d_step: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub k_step: f64,
    /// Skip points within this distance of the degenerate lines `d = -1`
    /// and `|k| = 1`.
    pub margin: f64,
    /// Conjugate mode pairs the zero search must cover.
    pub n_modes: usize,
    /// Also run a frozen-loop simulation at each point and fit its decay.
    pub simulate_and_fit: bool,
}

impl Default for RegionScanSpec {
    fn default() -> Self {
        RegionScanSpec {
            d_min: -1.5,
            d_max: 2.0,
            d_step: 0.25,
            k_min: -1.4,
            k_max: 1.4,
            k_step: 0.2,
            margin: 0.05,
            n_modes: 4,
            simulate_and_fit: false,
        }
    }
}

/// One scanned point.
#[derive(Debug, Clone)]
pub struct RegionRow {
    pub d: f64,
    pub k: f64,
    /// Rightmost growth exponent; NaN when the point failed.
    pub s_est: f64,
    pub stable: bool,
    pub by_theorem: bool,
    /// Theorem and computation disagree (or the point failed).
    pub mismatch: bool,
    /// Fitted decay exponent of the frozen-loop run, when requested.
    pub alpha_sim: Option<f64>,
    pub error: Option<String>,
}

fn axis(min: f64, max: f64, step: f64, what: &str) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::BadParameter(format!("{what} step {step} must be positive")));
    }
    if !(max >= min) {
        return Err(Error::BadParameter(format!("{what} range [{min}, {max}] is empty")));
    }
    let n = ((max - min) / step).round() as usize;
    let scale = 1.0f64.max(min.abs()).max(max.abs());
    Ok((0..=n)
        .map(|i| {
            let v = min + i as f64 * step;
            if v.abs() <= ZERO_SNAP * scale {
                0.0
            } else {
                v
            }
        })
        .collect())
}

impl RegionScanSpec {
    fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0) {
            return Err(Error::BadParameter(format!(
                "margin {} must be nonnegative",
                self.margin
            )));
        }
        axis(self.d_min, self.d_max, self.d_step, "d")?;
        axis(self.k_min, self.k_max, self.k_step, "k")?;
        Ok(())
    }

    /// The grid points actually scanned, `(d, k)` in row-major `(d, k)` order,
    /// with the degenerate bands excluded.
    pub fn grid(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let ds = axis(self.d_min, self.d_max, self.d_step, "d")?;
        let ks = axis(self.k_min, self.k_max, self.k_step, "k")?;
        let mut pts = Vec::with_capacity(ds.len() * ks.len());
        for &d in &ds {
            if (d + 1.0).abs() <= self.margin {
                continue;
            }
            for &k in &ks {
                if (k.abs() - 1.0).abs() <= self.margin {
                    continue;
                }
                pts.push((d, k));
            }
        }
        Ok(pts)
    }
}

fn fit_frozen_alpha(d: f64, k: f64) -> Result<f64> {
    let velocity = VelocityModel::affine_with_ratio(d, 1.0, 1.0)?;
    let mut cfg = ClosedLoopConfig::new(1.0, k, velocity);
    cfg.n_cells = 200;
    cfg.cfl = 0.4;
    cfg.t_final = 8.0;
    cfg.record_every = 4;
    cfg.freeze_velocity = true;
    let initial = InitialProfile::Perturbation {
        shape: PerturbationShape::Sine,
        mode: 1,
        amplitude: 0.05,
    }
    .build(&cfg, 0)?;
    let rec = simulate(&cfg, &initial)?;
    match fit_decay_rate(&rec, NormSeries::L2, None)? {
        DecayOutcome::Fit(f) => Ok(f.alpha),
        DecayOutcome::Extinct { .. } => Ok(f64::INFINITY),
    }
}

fn scan_point(spec: &RegionScanSpec, d: f64, k: f64) -> RegionRow {
    let p = SpectralProblem::new(d, k);
    let mut row = match classify_stability(&p, spec.n_modes) {
        Ok(v) => RegionRow {
            d,
            k,
            s_est: v.s_est,
            stable: v.spectrally_stable,
            by_theorem: v.by_theorem,
            mismatch: v.by_theorem != v.spectrally_stable,
            alpha_sim: None,
            error: if v.converged {
                None
            } else {
                Some("zero count did not converge".into())
            },
        },
        Err(e) => RegionRow {
            d,
            k,
            s_est: f64::NAN,
            stable: false,
            by_theorem: crate::spectral::predicted_stable(d, k),
            mismatch: true,
            alpha_sim: None,
            error: Some(e.to_string()),
        },
    };
    if spec.simulate_and_fit && row.error.is_none() {
        match fit_frozen_alpha(d, k) {
            Ok(a) => row.alpha_sim = Some(a),
            Err(e) => {
                // A blow-up on an unstable point is information, not failure.
                if row.by_theorem {
                    row.error = Some(e.to_string());
                } else {
                    row.alpha_sim = Some(f64::NEG_INFINITY);
                }
            }
        }
    }
    row
}

/// Scan the grid in parallel. Rows come back sorted by `(d, k)`; per-point
/// failures are recorded in the row instead of aborting the sweep.
pub fn region_scan(spec: &RegionScanSpec) -> Result<Vec<RegionRow>> {
    let pts = spec.grid()?;
    let mut rows: Vec<RegionRow> = pts
        .par_iter()
        .map(|&(d, k)| scan_point(spec, d, k))
        .collect();
    rows.sort_by(|a, b| a.d.total_cmp(&b.d).then(a.k.total_cmp(&b.k)));
    Ok(rows)
}

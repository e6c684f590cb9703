//! Named experiment setups: initial data, a closed-loop config, and the
//! analyses to run on the result.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::characteristic::simulate_characteristic;
use crate::error::{Error, Result};
use crate::export::read_snapshot_csv;
use crate::lyapunov::{
    fit_decay_rate, fit_series, monitor, DecayOutcome, LyapunovFunctional, MonitorSeries,
    NormSeries,
};
use crate::model::{equilibrium_summary, ClosedLoopConfig};
use crate::solver::{simulate, DensityField, TrajectoryRecord};
use crate::spectral::{spectral_abscissa, AbscissaEstimate, SpectralProblem};
use crate::weak::{weak_residual, TestFunction};

/// A run is declared flushed out when the sup norm falls below this fraction
/// of its initial value.
pub const EXTINCTION_RATIO: f64 = 1e-8;

/// Shape of a perturbation layered on the working level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationShape {
    /// `amplitude * sin(2 pi mode x)`: zero mean.
    Sine,
    /// A raised-cosine hump of width `1/mode`, centered.
    Bump,
    /// Independent uniform cell noise in `[-amplitude, amplitude]`.
    Noise,
}

/// How the initial density is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Constant { value: f64 },
    /// `rho_bar + height cos^2(pi (x - center) / width)` inside the support
    /// `|x - center| < width / 2`, `rho_bar` outside.
    Bump { center: f64, width: f64, height: f64 },
    /// `rho_bar` plus the given perturbation shape.
    Perturbation { shape: PerturbationShape, mode: u32, amplitude: f64 },
    /// Cell averages from a two-column snapshot file; the grid must match.
    Csv { path: PathBuf },
}

impl InitialProfile {
    pub fn build(&self, cfg: &ClosedLoopConfig, seed: u64) -> Result<DensityField> {
        let n = cfg.n_cells;
        let rho_bar = cfg.rho_bar;
        match self {
            InitialProfile::Constant { value } => {
                Ok(DensityField::new(0.0, vec![*value; n]))
            }
            InitialProfile::Bump { center, width, height } => {
                if !(*width > 0.0) {
                    return Err(Error::BadParameter(format!("bump width {width} must be positive")));
                }
                let (c, w, h) = (*center, *width, *height);
                Ok(DensityField::from_fn(n, move |x| {
                    let z = (x - c) / w;
                    if z.abs() < 0.5 {
                        let cosv = (std::f64::consts::PI * z).cos();
                        rho_bar + h * cosv * cosv
                    } else {
                        rho_bar
                    }
                }))
            }
            InitialProfile::Perturbation { shape, mode, amplitude } => {
                if *mode == 0 {
                    return Err(Error::BadParameter("perturbation mode must be >= 1".into()));
                }
                let (m, a) = (*mode as f64, *amplitude);
                match shape {
                    PerturbationShape::Sine => Ok(DensityField::from_fn(n, move |x| {
                        rho_bar + a * (2.0 * std::f64::consts::PI * m * x).sin()
                    })),
                    PerturbationShape::Bump => {
                        let w = 1.0 / m;
                        Ok(DensityField::from_fn(n, move |x| {
                            let z = (x - 0.5) / w;
                            if z.abs() < 0.5 {
                                let cosv = (std::f64::consts::PI * z).cos();
                                rho_bar + a * cosv * cosv
                            } else {
                                rho_bar
                            }
                        }))
                    }
                    PerturbationShape::Noise => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        let cells =
                            (0..n).map(|_| rho_bar + rng.gen_range(-a..=a)).collect();
                        Ok(DensityField::new(0.0, cells))
                    }
                }
            }
            InitialProfile::Csv { path } => {
                let f = read_snapshot_csv(path)?;
                if f.n_cells() != n {
                    return Err(Error::BadInputFile {
                        path: path.display().to_string(),
                        reason: format!("{} rows, config wants {n} cells", f.n_cells()),
                    });
                }
                Ok(f)
            }
        }
    }
}

/// An analysis to run on the finished trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analysis {
    DecayFit,
    Lyapunov,
    Extinction,
    WeakResidual,
    Spectrum,
    CrossCheck,
}

/// A complete experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub config: ClosedLoopConfig,
    pub initial: InitialProfile,
    pub analyses: Vec<Analysis>,
}

/// When (if ever) the run flushed out completely.
#[derive(Debug, Clone, Copy)]
pub struct ExtinctionReport {
    pub extinct: bool,
    /// First recorded time with sup norm below the threshold.
    pub time: Option<f64>,
    /// Characteristic displacement at that time.
    pub displacement: Option<f64>,
    pub threshold: f64,
}

/// What one analysis produced.
#[derive(Debug, Clone)]
pub enum AnalysisResult {
    DecayFit { l1: DecayOutcome, l2: DecayOutcome },
    Lyapunov { functional: LyapunovFunctional, series: MonitorSeries },
    Extinction(ExtinctionReport),
    WeakResidual { tau: f64, residual: f64 },
    Spectrum(AbscissaEstimate),
    /// Final-time gap between the flux-form and semi-Lagrangian solvers.
    CrossCheck { l1_gap: f64, sup_gap: f64 },
}

/// A finished run with its analyses.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub record: TrajectoryRecord,
    pub initial: DensityField,
    pub results: Vec<AnalysisResult>,
}

fn decay_json(o: &DecayOutcome) -> serde_json::Value {
    match o {
        DecayOutcome::Fit(f) => serde_json::json!({
            "alpha": f.alpha,
            "c": f.c,
            "r_squared": f.r_squared,
            "window": [f.window.0, f.window.1],
            "n_points": f.n_points,
        }),
        DecayOutcome::Extinct { time } => serde_json::json!({ "extinct_at": time }),
    }
}

impl AnalysisResult {
    /// Key under which this result appears in a summary file.
    pub fn label(&self) -> &'static str {
        match self {
            AnalysisResult::DecayFit { .. } => "decay_fit",
            AnalysisResult::Lyapunov { .. } => "lyapunov",
            AnalysisResult::Extinction(_) => "extinction",
            AnalysisResult::WeakResidual { .. } => "weak_residual",
            AnalysisResult::Spectrum(_) => "spectrum",
            AnalysisResult::CrossCheck { .. } => "cross_check",
        }
    }

    /// Summary-file form of the result.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            AnalysisResult::DecayFit { l1, l2 } => serde_json::json!({
                "l1": decay_json(l1),
                "l2": decay_json(l2),
            }),
            AnalysisResult::Lyapunov { functional, series } => {
                let functional = match functional {
                    LyapunovFunctional::WeightedDeviation { beta, mass_weight } => {
                        serde_json::json!({
                            "kind": "weighted_deviation",
                            "beta": beta,
                            "mass_weight": mass_weight,
                        })
                    }
                    LyapunovFunctional::LoadCoupled { d, k } => serde_json::json!({
                        "kind": "load_coupled",
                        "d": d,
                        "k": k,
                    }),
                };
                let fit = fit_series(&series.times, &series.values, None)
                    .map(|o| decay_json(&o))
                    .unwrap_or(serde_json::Value::Null);
                serde_json::json!({
                    "functional": functional,
                    "initial": series.values.first(),
                    "final": series.values.last(),
                    "max_increase": series.max_increase,
                    "fit": fit,
                })
            }
            AnalysisResult::Extinction(rep) => serde_json::json!({
                "extinct": rep.extinct,
                "time": rep.time,
                "displacement": rep.displacement,
                "threshold": rep.threshold,
            }),
            AnalysisResult::WeakResidual { tau, residual } => serde_json::json!({
                "tau": tau,
                "residual": residual,
            }),
            AnalysisResult::Spectrum(est) => serde_json::json!({
                "s_est": est.s_est,
                "rate": est.rate,
                "asymptote": est.asymptote,
                "degenerate": est.degenerate,
                "converged": est.roots.converged,
                "n_roots": est.roots.roots.len(),
                "dominant": est.dominant.map(|mu| vec![mu.re, mu.im]),
            }),
            AnalysisResult::CrossCheck { l1_gap, sup_gap } => serde_json::json!({
                "l1_gap": l1_gap,
                "sup_gap": sup_gap,
            }),
        }
    }
}

/// Scan the snapshots for total flush-out.
pub fn detect_extinction(rec: &TrajectoryRecord, initial_sup: f64) -> ExtinctionReport {
    let threshold = EXTINCTION_RATIO * initial_sup;
    for (i, snap) in rec.snapshots.iter().enumerate() {
        if snap.max_abs() <= threshold {
            return ExtinctionReport {
                extinct: true,
                time: Some(rec.times[i]),
                displacement: Some(rec.displacement[i]),
                threshold,
            };
        }
    }
    ExtinctionReport { extinct: false, time: None, displacement: None, threshold }
}

/// Pick the energy certificate matching the equilibrium's regime.
pub fn certificate_for(d: f64, k: f64) -> Result<LyapunovFunctional> {
    if d.abs() < 1.0 && k.abs() < 1.0 {
        LyapunovFunctional::weighted_for(d, k)
    } else if d >= 1.0 && k.abs() < 1.0 {
        LyapunovFunctional::load_coupled(d, k)
    } else {
        Err(Error::WrongCase(format!(
            "no energy certificate available for d = {d}, k = {k}"
        )))
    }
}

/// Run the scenario and every requested analysis.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioRun> {
    let initial = s.initial.build(&s.config, s.seed)?;
    let record = simulate(&s.config, &initial)?;
    let eq = equilibrium_summary(s.config.rho_bar, &s.config.velocity)?;
    let mut results = Vec::with_capacity(s.analyses.len());
    for a in &s.analyses {
        let r = match a {
            Analysis::DecayFit => AnalysisResult::DecayFit {
                l1: fit_decay_rate(&record, NormSeries::L1, None)?,
                l2: fit_decay_rate(&record, NormSeries::L2, None)?,
            },
            Analysis::Lyapunov => {
                let functional = certificate_for(eq.d, s.config.k)?;
                let series = monitor(&record, &functional)?;
                AnalysisResult::Lyapunov { functional, series }
            }
            Analysis::Extinction => {
                AnalysisResult::Extinction(detect_extinction(&record, initial.max_abs()))
            }
            Analysis::WeakResidual => {
                let tau = s.config.t_final;
                let residual = weak_residual(&record, &s.config, &TestFunction::ramp(tau))?;
                AnalysisResult::WeakResidual { tau, residual }
            }
            Analysis::Spectrum => {
                let p = SpectralProblem::from_equilibrium(&eq, s.config.k);
                AnalysisResult::Spectrum(spectral_abscissa(&p, 8, eq.lambda_bar)?)
            }
            Analysis::CrossCheck => {
                let (alt, _) = simulate_characteristic(&s.config, &initial)?;
                let a = record.snapshots.last().expect("records are nonempty");
                let b = alt.snapshots.last().expect("records are nonempty");
                let l1_gap = a.dx()
                    * a.cells
                        .iter()
                        .zip(&b.cells)
                        .map(|(x, y)| (x - y).abs())
                        .sum::<f64>();
                let sup_gap = a
                    .cells
                    .iter()
                    .zip(&b.cells)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max);
                AnalysisResult::CrossCheck { l1_gap, sup_gap }
            }
        };
        results.push(r);
    }
    Ok(ScenarioRun { record, initial, results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VelocityModel;

    fn base_scenario() -> Scenario {
        let mut config = ClosedLoopConfig::new(0.0, 0.5, VelocityModel::reciprocal());
        config.n_cells = 80;
        config.t_final = 3.0;
        config.record_every = 10;
        Scenario {
            name: "test".into(),
            seed: 0,
            config,
            initial: InitialProfile::Bump { center: 0.5, width: 0.4, height: 5.0 },
            analyses: vec![],
        }
    }

    #[test]
    fn bump_initial_mass_is_half_height_times_width() {
        let s = base_scenario();
        let f = s.initial.build(&s.config, 0).unwrap();
        assert!((f.total_mass() - 1.0).abs() < 1e-10, "mass {}", f.total_mass());
    }

    #[test]
    fn sine_perturbation_keeps_the_mean() {
        let mut s = base_scenario();
        s.config.rho_bar = 1.0;
        s.config.velocity = VelocityModel::reciprocal_for(1.0);
        s.initial =
            InitialProfile::Perturbation { shape: PerturbationShape::Sine, mode: 2, amplitude: 0.3 };
        let f = s.initial.build(&s.config, 0).unwrap();
        assert!((f.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_is_reproducible_per_seed() {
        let mut s = base_scenario();
        s.initial = InitialProfile::Perturbation {
            shape: PerturbationShape::Noise,
            mode: 1,
            amplitude: 0.1,
        };
        let a = s.initial.build(&s.config, 42).unwrap();
        let b = s.initial.build(&s.config, 42).unwrap();
        let c = s.initial.build(&s.config, 43).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_ne!(a.cells, c.cells);
    }

    #[test]
    fn zero_gain_run_reports_extinction_with_unit_displacement() {
        let mut s = base_scenario();
        s.config.k = 0.0;
        s.config.t_final = 4.0;
        s.config.record_every = 1;
        s.analyses = vec![Analysis::Extinction];
        let run = run_scenario(&s).unwrap();
        match &run.results[0] {
            AnalysisResult::Extinction(rep) => {
                assert!(rep.extinct);
                let disp = rep.displacement.unwrap();
                assert!((1.0..1.2).contains(&disp), "displacement {disp}");
            }
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn decay_is_at_least_the_dominant_spectral_rate() {
        let mut s = base_scenario();
        s.config.rho_bar = 1.0;
        s.config.velocity = VelocityModel::reciprocal_for(1.0);
        s.config.k = 0.5;
        s.config.n_cells = 200;
        s.config.t_final = 12.0;
        s.config.record_every = 4;
        s.config.freeze_velocity = true;
        s.initial = InitialProfile::Perturbation {
            shape: PerturbationShape::Sine,
            mode: 1,
            amplitude: 0.05,
        };
        s.analyses = vec![Analysis::DecayFit, Analysis::Spectrum];
        let run = run_scenario(&s).unwrap();
        let alpha = match &run.results[0] {
            AnalysisResult::DecayFit { l2: DecayOutcome::Fit(fit), .. } => fit.alpha,
            other => panic!("unexpected {other:?}"),
        };
        let rate = match &run.results[1] {
            AnalysisResult::Spectrum(est) => -est.rate,
            other => panic!("unexpected {other:?}"),
        };
        // A sine start is mostly made of the faster oscillatory pair, so the
        // fitted slope sits between the slowest mode's rate and a few times
        // it; it can never undercut the slowest mode.
        assert!(rate > 0.0, "spectral rate {rate}");
        assert!(alpha > 0.9 * rate, "alpha {alpha} undercuts spectral {rate}");
        assert!(alpha < 4.0 * rate, "alpha {alpha} implausibly fast vs {rate}");
    }

    #[test]
    fn cross_check_gap_is_small_on_a_short_run() {
        let mut s = base_scenario();
        s.config.n_cells = 200;
        s.config.t_final = 1.0;
        s.analyses = vec![Analysis::CrossCheck];
        let run = run_scenario(&s).unwrap();
        match &run.results[0] {
            AnalysisResult::CrossCheck { l1_gap, sup_gap } => {
                assert!(*l1_gap < 0.05, "l1 gap {l1_gap}");
                assert!(*sup_gap < 0.5, "sup gap {sup_gap}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn certificate_selection_matches_regimes() {
        assert!(matches!(
            certificate_for(-0.5, 0.3),
            Ok(LyapunovFunctional::WeightedDeviation { .. })
        ));
        assert!(matches!(
            certificate_for(1.5, 0.3),
            Ok(LyapunovFunctional::LoadCoupled { .. })
        ));
        assert!(certificate_for(-1.5, 0.3).is_err());
        assert!(certificate_for(0.5, 1.2).is_err());
    }
}

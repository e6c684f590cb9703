//! TOML job files for the command-line front end.
//!
//! Three shapes are understood: a scenario (simulation plus analyses), a
//! zero-search job, and a parameter-region sweep. Unknown keys are rejected
//! so typos fail loudly, and relative paths inside a file resolve against
//! the file's own directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::export::read_text;
use crate::model::{ClosedLoopConfig, VelocityModel};
use crate::region::RegionScanSpec;
use crate::scenario::{Analysis, InitialProfile, PerturbationShape, Scenario};
use crate::spectral::{SpectralProblem, Window};

fn config_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {msg}", path.display()))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default)]
    seed: u64,
    config: LoopFile,
    initial: InitialFile,
    #[serde(default)]
    analyses: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopFile {
    rho_bar: f64,
    k: f64,
    velocity: Option<VelocityFile>,
    n_cells: Option<usize>,
    cfl: Option<f64>,
    t_final: Option<f64>,
    record_every: Option<usize>,
    freeze_velocity: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VelocityFile {
    kind: String,
    coeffs: Option<Vec<f64>>,
    table: Option<PathBuf>,
    valid_range: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialFile {
    kind: String,
    value: Option<f64>,
    center: Option<f64>,
    width: Option<f64>,
    height: Option<f64>,
    shape: Option<String>,
    mode: Option<u32>,
    amplitude: Option<f64>,
    path: Option<PathBuf>,
}

fn read_velocity_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = read_text(path)?;
    let bad = |reason: String| Error::BadInputFile {
        path: path.display().to_string(),
        reason,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some("s,lambda") => {}
        Some(other) => return Err(bad(format!("expected header 's,lambda', got '{other}'"))),
        None => return Err(bad("empty file".into())),
    }
    let mut s = Vec::new();
    let mut lam = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(bad(format!("line {}: expected two columns", lineno + 2))),
        };
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))
        };
        s.push(parse(a)?);
        lam.push(parse(b)?);
    }
    Ok((s, lam))
}

impl VelocityFile {
    fn build(&self, rho_bar: f64, base: &Path, path: &Path) -> Result<VelocityModel> {
        let reject = |field: &str, present: bool| {
            if present {
                Err(config_err(
                    path,
                    format!("velocity kind '{}' does not take '{field}'", self.kind),
                ))
            } else {
                Ok(())
            }
        };
        let model = match self.kind.as_str() {
            "reciprocal" => {
                reject("coeffs", self.coeffs.is_some())?;
                reject("table", self.table.is_some())?;
                match self.valid_range {
                    Some([lo, hi]) => VelocityModel::reciprocal_on(lo, hi)?,
                    None => VelocityModel::reciprocal_for(rho_bar),
                }
            }
            "analytic" => {
                reject("table", self.table.is_some())?;
                let coeffs = self
                    .coeffs
                    .clone()
                    .ok_or_else(|| config_err(path, "velocity kind 'analytic' needs 'coeffs'"))?;
                let [lo, hi] = self.valid_range.unwrap_or([
                    -0.5 * (1.0 + rho_bar.abs()),
                    10.0 * (1.0 + rho_bar.abs()),
                ]);
                VelocityModel::polynomial(coeffs, lo, hi)?
            }
            "tabulated" => {
                reject("coeffs", self.coeffs.is_some())?;
                let table = self
                    .table
                    .as_ref()
                    .ok_or_else(|| config_err(path, "velocity kind 'tabulated' needs 'table'"))?;
                let (s, lam) = read_velocity_table(&resolve(base, table))?;
                let model = VelocityModel::tabulated(s, lam)?;
                match self.valid_range {
                    Some([lo, hi]) => model.with_range(lo, hi)?,
                    None => model,
                }
            }
            other => {
                return Err(config_err(
                    path,
                    format!("unknown velocity kind '{other}' (reciprocal, analytic, tabulated)"),
                ))
            }
        };
        model.validate(64)?;
        Ok(model)
    }
}

impl InitialFile {
    fn build(&self, base: &Path, path: &Path) -> Result<InitialProfile> {
        let need = |field: &str, v: Option<f64>| {
            v.ok_or_else(|| {
                config_err(path, format!("initial kind '{}' needs '{field}'", self.kind))
            })
        };
        let reject = |field: &str, present: bool| {
            if present {
                Err(config_err(
                    path,
                    format!("initial kind '{}' does not take '{field}'", self.kind),
                ))
            } else {
                Ok(())
            }
        };
        match self.kind.as_str() {
            "constant" => {
                reject("center", self.center.is_some())?;
                reject("shape", self.shape.is_some())?;
                reject("path", self.path.is_some())?;
                Ok(InitialProfile::Constant { value: need("value", self.value)? })
            }
            "bump" => {
                reject("value", self.value.is_some())?;
                reject("shape", self.shape.is_some())?;
                reject("path", self.path.is_some())?;
                Ok(InitialProfile::Bump {
                    center: need("center", self.center)?,
                    width: need("width", self.width)?,
                    height: need("height", self.height)?,
                })
            }
            "perturbation" => {
                reject("value", self.value.is_some())?;
                reject("center", self.center.is_some())?;
                reject("path", self.path.is_some())?;
                let shape = match self.shape.as_deref() {
                    Some("sine") => PerturbationShape::Sine,
                    Some("bump") => PerturbationShape::Bump,
                    Some("noise") => PerturbationShape::Noise,
                    Some(other) => {
                        return Err(config_err(
                            path,
                            format!("unknown perturbation shape '{other}' (sine, bump, noise)"),
                        ))
                    }
                    None => {
                        return Err(config_err(path, "initial kind 'perturbation' needs 'shape'"))
                    }
                };
                Ok(InitialProfile::Perturbation {
                    shape,
                    mode: self.mode.unwrap_or(1),
                    amplitude: need("amplitude", self.amplitude)?,
                })
            }
            "csv" => {
                reject("value", self.value.is_some())?;
                reject("center", self.center.is_some())?;
                reject("shape", self.shape.is_some())?;
                let p = self
                    .path
                    .as_ref()
                    .ok_or_else(|| config_err(path, "initial kind 'csv' needs 'path'"))?;
                Ok(InitialProfile::Csv { path: resolve(base, p) })
            }
            other => Err(config_err(
                path,
                format!("unknown initial kind '{other}' (constant, bump, perturbation, csv)"),
            )),
        }
    }
}

fn parse_analysis(name: &str, path: &Path) -> Result<Analysis> {
    match name {
        "decay_fit" => Ok(Analysis::DecayFit),
        "lyapunov" => Ok(Analysis::Lyapunov),
        "extinction" => Ok(Analysis::Extinction),
        "weak_residual" => Ok(Analysis::WeakResidual),
        "spectrum" => Ok(Analysis::Spectrum),
        "cross_check" => Ok(Analysis::CrossCheck),
        other => Err(config_err(
            path,
            format!(
                "unknown analysis '{other}' (decay_fit, lyapunov, extinction, weak_residual, \
                 spectrum, cross_check)"
            ),
        )),
    }
}

/// Load a scenario description.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = read_text(path)?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|e| config_err(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let velocity = match &file.config.velocity {
        Some(v) => v.build(file.config.rho_bar, &base, path)?,
        None => VelocityModel::reciprocal_for(file.config.rho_bar),
    };
    let mut config = ClosedLoopConfig::new(file.config.rho_bar, file.config.k, velocity);
    if let Some(n) = file.config.n_cells {
        config.n_cells = n;
    }
    if let Some(c) = file.config.cfl {
        config.cfl = c;
    }
    if let Some(t) = file.config.t_final {
        config.t_final = t;
    }
    if let Some(r) = file.config.record_every {
        config.record_every = r;
    }
    if let Some(fr) = file.config.freeze_velocity {
        config.freeze_velocity = fr;
    }
    config.validate()?;
    let initial = file.initial.build(&base, path)?;
    let analyses = file
        .analyses
        .iter()
        .map(|a| parse_analysis(a, path))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario { name: file.name, seed: file.seed, config, initial, analyses })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumFile {
    spectrum: SpectrumSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumSection {
    d: Option<f64>,
    equilibrium: Option<f64>,
    velocity: Option<VelocityFile>,
    k: f64,
    n_modes: Option<usize>,
    window: Option<WindowFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowFile {
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
}

/// A loaded zero-search job.
#[derive(Debug, Clone)]
pub struct SpectrumJob {
    pub problem: SpectralProblem,
    /// Explicit window; `None` means size one from the mode count.
    pub window: Option<Window>,
    pub n_modes: usize,
    /// Converts growth exponents to physical time.
    pub time_scale: f64,
}

/// Load a zero-search job.
pub fn load_spectrum(path: &Path) -> Result<SpectrumJob> {
    let text = read_text(path)?;
    let file: SpectrumFile = toml::from_str(&text).map_err(|e| config_err(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let sec = file.spectrum;
    let (d, time_scale) = match (sec.d, sec.equilibrium) {
        (Some(d), None) => {
            if sec.velocity.is_some() {
                return Err(config_err(path, "'velocity' only makes sense with 'equilibrium'"));
            }
            (d, 1.0)
        }
        (None, Some(rho_bar)) => {
            let velocity = match &sec.velocity {
                Some(v) => v.build(rho_bar, &base, path)?,
                None => VelocityModel::reciprocal_for(rho_bar),
            };
            let eq = crate::model::equilibrium_summary(rho_bar, &velocity)?;
            (eq.d, eq.lambda_bar)
        }
        (Some(_), Some(_)) => {
            return Err(config_err(path, "give either 'd' or 'equilibrium', not both"))
        }
        (None, None) => return Err(config_err(path, "give either 'd' or 'equilibrium'")),
    };
    let window = match sec.window {
        Some(w) => Some(Window::new(w.re_min, w.re_max, w.im_min, w.im_max)?),
        None => None,
    };
    Ok(SpectrumJob {
        problem: SpectralProblem::new(d, sec.k),
        window,
        n_modes: sec.n_modes.unwrap_or(8),
        time_scale,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionFile {
    region: RegionSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionSection {
    d_min: f64,
    d_max: f64,
    d_step: f64,
    k_min: f64,
    k_max: f64,
    k_step: f64,
    margin: Option<f64>,
    n_modes: Option<usize>,
    simulate_and_fit: Option<bool>,
}

/// Load a region-sweep job.
pub fn load_region(path: &Path) -> Result<RegionScanSpec> {
    let text = read_text(path)?;
    let file: RegionFile = toml::from_str(&text).map_err(|e| config_err(path, e))?;
    let sec = file.region;
    let defaults = RegionScanSpec::default();
    Ok(RegionScanSpec {
        d_min: sec.d_min,
        d_max: sec.d_max,
        d_step: sec.d_step,
        k_min: sec.k_min,
        k_max: sec.k_max,
        k_step: sec.k_step,
        margin: sec.margin.unwrap_or(defaults.margin),
        n_modes: sec.n_modes.unwrap_or(defaults.n_modes),
        simulate_and_fit: sec.simulate_and_fit.unwrap_or(defaults.simulate_and_fit),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::tempdir;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_scenario_gets_defaults() {
        let dir = tempdir().unwrap();
        let p = write(
            dir.path(),
            "s.toml",
            "name = 'relax'\n\
             [config]\nrho_bar = 1.0\nk = 0.5\n\
             [initial]\nkind = 'constant'\nvalue = 1.0\n",
        );
        let s = load_scenario(&p).unwrap();
        assert_eq!(s.name, "relax");
        assert_eq!(s.seed, 0);
        assert!(s.analyses.is_empty());
        assert_eq!(s.config.rho_bar, 1.0);
        assert!(matches!(s.initial, InitialProfile::Constant { value } if value == 1.0));
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        let dir = tempdir().unwrap();
        let p = write(
            dir.path(),
            "s.toml",
            "name = 'x'\ntypo = 1\n\
             [config]\nrho_bar = 1.0\nk = 0.5\n\
             [initial]\nkind = 'constant'\nvalue = 1.0\n",
        );
        assert!(matches!(load_scenario(&p), Err(Error::Config(_))));
        let p = write(
            dir.path(),
            "s2.toml",
            "name = 'x'\n\
             [config]\nrho_bar = 1.0\nk = 0.5\nstep_size = 0.1\n\
             [initial]\nkind = 'constant'\nvalue = 1.0\n",
        );
        assert!(matches!(load_scenario(&p), Err(Error::Config(_))));
    }

    #[test]
    fn field_and_kind_mismatches_are_reported() {
        let dir = tempdir().unwrap();
        let p = write(
            dir.path(),
            "s.toml",
            "name = 'x'\n\
             [config]\nrho_bar = 1.0\nk = 0.5\n\
             [initial]\nkind = 'constant'\nvalue = 1.0\ncenter = 0.5\n",
        );
        let err = load_scenario(&p).unwrap_err();
        assert!(err.to_string().contains("does not take"), "{err}");
        let p = write(
            dir.path(),
            "s2.toml",
            "name = 'x'\n\
             [config]\nrho_bar = 1.0\nk = 0.5\n\
             [initial]\nkind = 'bump'\ncenter = 0.5\nwidth = 0.4\n",
        );
        let err = load_scenario(&p).unwrap_err();
        assert!(err.to_string().contains("needs 'height'"), "{err}");
    }

    #[test]
    fn analytic_velocity_and_analyses_parse() {
        let dir = tempdir().unwrap();
        let p = write(
            dir.path(),
            "s.toml",
            "name = 'poly'\nseed = 7\nanalyses = ['decay_fit', 'spectrum']\n\
             [config]\nrho_bar = 1.0\nk = 0.3\nn_cells = 64\nt_final = 2.0\n\
             [config.velocity]\nkind = 'analytic'\ncoeffs = [2.0, -0.5]\nvalid_range = [0.0, 3.0]\n\
             [initial]\nkind = 'perturbation'\nshape = 'sine'\namplitude = 0.05\n",
        );
        let s = load_scenario(&p).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.analyses, vec![Analysis::DecayFit, Analysis::Spectrum]);
        assert!((s.config.velocity.lambda(1.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(matches!(
            s.initial,
            InitialProfile::Perturbation { shape: PerturbationShape::Sine, mode: 1, .. }
        ));
    }

    #[test]
    fn tabulated_velocity_reads_its_csv_next_to_the_config() {
        let dir = tempdir().unwrap();
        write(dir.path(), "law.csv", "s,lambda\n0.0,1.0\n1.0,0.5\n2.0,0.25\n");
        let p = write(
            dir.path(),
            "s.toml",
            "name = 'tab'\n\
             [config]\nrho_bar = 1.0\nk = 0.0\n\
             [config.velocity]\nkind = 'tabulated'\ntable = 'law.csv'\n\
             [initial]\nkind = 'constant'\nvalue = 1.0\n",
        );
        let s = load_scenario(&p).unwrap();
        assert!((s.config.velocity.lambda(0.5).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn spectrum_takes_d_or_equilibrium_but_not_both() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "a.toml", "[spectrum]\nd = -0.5\nk = 0.3\n");
        let job = load_spectrum(&p).unwrap();
        assert_eq!(job.problem.d, -0.5);
        assert_eq!(job.n_modes, 8);
        assert_eq!(job.time_scale, 1.0);
        assert!(job.window.is_none());

        let p = write(dir.path(), "b.toml", "[spectrum]\nequilibrium = 1.0\nk = 0.3\n");
        let job = load_spectrum(&p).unwrap();
        assert!((job.problem.d + 0.5).abs() < 1e-15);
        assert!((job.time_scale - 0.5).abs() < 1e-15);

        let p = write(dir.path(), "c.toml", "[spectrum]\nd = 0.0\nequilibrium = 1.0\nk = 0.3\n");
        assert!(load_spectrum(&p).is_err());
        let p = write(dir.path(), "d.toml", "[spectrum]\nk = 0.3\n");
        assert!(load_spectrum(&p).is_err());
    }

    #[test]
    fn spectrum_window_override_parses() {
        let dir = tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.toml",
            "[spectrum]\nd = 0.0\nk = 0.5\nn_modes = 3\n\
             [spectrum.window]\nre_min = -2.0\nre_max = 1.0\nim_min = -10.0\nim_max = 10.0\n",
        );
        let job = load_spectrum(&p).unwrap();
        let w = job.window.unwrap();
        assert_eq!((w.re_min, w.re_max, w.im_min, w.im_max), (-2.0, 1.0, -10.0, 10.0));
        assert_eq!(job.n_modes, 3);
    }

    #[test]
    fn region_defaults_fill_in() {
        let dir = tempdir().unwrap();
        let p = write(
            dir.path(),
            "r.toml",
            "[region]\nd_min = -1.0\nd_max = 1.0\nd_step = 0.5\n\
             k_min = -0.5\nk_max = 0.5\nk_step = 0.5\n",
        );
        let spec = load_region(&p).unwrap();
        assert_eq!(spec.margin, 0.05);
        assert!(!spec.simulate_and_fit);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            load_scenario(Path::new("/nonexistent/job.toml")),
            Err(Error::Io { .. })
        ));
    }
}

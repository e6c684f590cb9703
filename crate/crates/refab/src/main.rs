//! Command-line front end: run TOML-described jobs and leave their results
//! as CSV, JSON and gnuplot files in an output directory.
//!
//! Exit codes: 0 on success, 2 for configuration or input problems, 3 for
//! numerical failures, 4 when `--check` rejects a job.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use refab::config::{load_region, load_scenario, load_spectrum, SpectrumJob};
use refab::error::{Error, Result};
use refab::export::{
    monitor_plots, region_plots, roots_plots, trajectory_plots, write_monitor_csv,
    write_region_csv, write_roots_csv, write_snapshot_csv, write_summary_json,
    write_trajectory_csv,
};
use refab::model::equilibrium_summary;
use refab::region::region_scan;
use refab::scenario::{run_scenario, Analysis, AnalysisResult, Scenario};
use refab::spectral::{find_roots, spectral_abscissa, RootSet};

#[derive(Parser)]
#[command(
    name = "refab",
    version,
    about = "Numerical laboratory for a feedback-controlled transport loop"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario: trajectory, snapshots and any requested analyses.
    Simulate(JobArgs),
    /// Locate the loop's growth exponents for one parameter point.
    Spectrum(JobArgs),
    /// Sweep the parameter plane and compare prediction with computation.
    Region(JobArgs),
    /// Track an energy certificate along a run.
    Lyapunov(JobArgs),
    /// Detect complete flush-out of a run.
    Extinction(JobArgs),
}

impl Command {
    fn args(&self) -> &JobArgs {
        match self {
            Command::Simulate(a)
            | Command::Spectrum(a)
            | Command::Region(a)
            | Command::Lyapunov(a)
            | Command::Extinction(a) => a,
        }
    }
}

#[derive(Args)]
struct JobArgs {
    /// Job description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `<config stem>_out` next to the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Validate the job description and exit without running anything.
    #[arg(long)]
    check: bool,
}

impl JobArgs {
    fn out_dir(&self) -> PathBuf {
        match &self.out {
            Some(p) => p.clone(),
            None => {
                let stem = self
                    .config
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "job".into());
                let parent = self.config.parent().unwrap_or_else(|| Path::new("."));
                parent.join(format!("{stem}_out"))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    if args.check {
        return match check_job(&cli.command) {
            Ok(what) => {
                println!("ok: {what}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("check failed: {e}");
                ExitCode::from(4)
            }
        };
    }
    match run_job(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Load and validate without running; returns a one-line description.
fn check_job(cmd: &Command) -> Result<String> {
    let args = cmd.args();
    match cmd {
        Command::Simulate(_) | Command::Lyapunov(_) | Command::Extinction(_) => {
            let s = load_scenario(&args.config)?;
            // Building the initial data exercises file references and shape
            // parameters; the result is discarded.
            s.initial.build(&s.config, s.seed)?;
            let eq = equilibrium_summary(s.config.rho_bar, &s.config.velocity)?;
            Ok(format!(
                "scenario '{}' (d = {:.4}, k = {}, {} cells, t_final = {})",
                s.name, eq.d, s.config.k, s.config.n_cells, s.config.t_final
            ))
        }
        Command::Spectrum(_) => {
            let job = load_spectrum(&args.config)?;
            Ok(format!(
                "zero search at d = {:.4}, k = {} over {} mode pairs",
                job.problem.d, job.problem.k, job.n_modes
            ))
        }
        Command::Region(_) => {
            let spec = load_region(&args.config)?;
            let n = spec.grid()?.len();
            Ok(format!("region sweep of {n} points"))
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|source| Error::Io { path: dir.display().to_string(), source })
}

fn run_job(cmd: &Command) -> Result<()> {
    let args = cmd.args();
    let out = args.out_dir();
    match cmd {
        Command::Simulate(_) => {
            let s = load_scenario(&args.config)?;
            run_and_write_scenario(&s, &out)
        }
        Command::Lyapunov(_) => {
            let mut s = load_scenario(&args.config)?;
            if !s.analyses.contains(&Analysis::Lyapunov) {
                s.analyses.insert(0, Analysis::Lyapunov);
            }
            run_and_write_scenario(&s, &out)
        }
        Command::Extinction(_) => {
            let mut s = load_scenario(&args.config)?;
            if !s.analyses.contains(&Analysis::Extinction) {
                s.analyses.insert(0, Analysis::Extinction);
            }
            run_and_write_scenario(&s, &out)
        }
        Command::Spectrum(_) => {
            let job = load_spectrum(&args.config)?;
            run_and_write_spectrum(&job, &out)
        }
        Command::Region(_) => {
            let spec = load_region(&args.config)?;
            let rows = region_scan(&spec)?;
            ensure_dir(&out)?;
            write_region_csv(&out.join("region.csv"), &rows, spec.simulate_and_fit)?;
            let n_mismatch = rows.iter().filter(|r| r.mismatch).count();
            let n_failed = rows.iter().filter(|r| r.error.is_some()).count();
            let summary = serde_json::json!({
                "points": rows.len(),
                "stable": rows.iter().filter(|r| r.stable).count(),
                "mismatches": n_mismatch,
                "failed": n_failed,
                "margin": spec.margin,
                "n_modes": spec.n_modes,
            });
            write_summary_json(&out.join("summary.json"), &summary)?;
            region_plots(&rows).emit(&out)?;
            println!(
                "region: {} points, {} stable, {} mismatches, {} failed -> {}",
                rows.len(),
                rows.iter().filter(|r| r.stable).count(),
                n_mismatch,
                n_failed,
                out.display()
            );
            Ok(())
        }
    }
}

fn run_and_write_scenario(s: &Scenario, out: &Path) -> Result<()> {
    let run = run_scenario(s)?;
    ensure_dir(out)?;
    write_trajectory_csv(&out.join("trajectory.csv"), &run.record)?;
    for (i, snap) in run.record.snapshots.iter().enumerate() {
        write_snapshot_csv(&out.join(format!("snapshot_{i:04}.csv")), snap)?;
    }
    let eq = equilibrium_summary(s.config.rho_bar, &s.config.velocity)?;
    let mut analyses = serde_json::Map::new();
    for r in &run.results {
        analyses.insert(r.label().into(), r.to_json());
        if let AnalysisResult::Lyapunov { series, .. } = r {
            write_monitor_csv(&out.join("monitor.csv"), series)?;
            monitor_plots(&series.times, &series.values).emit(out)?;
        }
    }
    let rec = &run.record;
    let summary = serde_json::json!({
        "name": s.name,
        "seed": s.seed,
        "parameters": {
            "rho_bar": s.config.rho_bar,
            "k": s.config.k,
            "d": eq.d,
            "lambda_bar": eq.lambda_bar,
            "n_cells": s.config.n_cells,
            "cfl": s.config.cfl,
            "t_final": s.config.t_final,
            "freeze_velocity": s.config.freeze_velocity,
        },
        "final": {
            "t": rec.times.last(),
            "W": rec.mass.last(),
            "l1": rec.l1.last(),
            "l2": rec.l2.last(),
            "displacement": rec.displacement.last(),
        },
        "samples": rec.len(),
        "analyses": serde_json::Value::Object(analyses),
    });
    write_summary_json(&out.join("summary.json"), &summary)?;
    trajectory_plots(rec).emit(out)?;
    println!(
        "scenario '{}': {} samples to t = {} -> {}",
        s.name,
        rec.len(),
        rec.times.last().copied().unwrap_or(0.0),
        out.display()
    );
    Ok(())
}

fn run_and_write_spectrum(job: &SpectrumJob, out: &Path) -> Result<()> {
    let p = &job.problem;
    let (roots, s_est, rate, degenerate): (RootSet, f64, f64, bool) = match job.window {
        Some(w) => {
            let set = find_roots(p, &w)?;
            let s = match set.max_re() {
                Some(re) => re.max(p.chain_asymptote()),
                None => p.chain_asymptote(),
            };
            (set, s, s * job.time_scale, p.has_forced_neutral_mode())
        }
        None => {
            let est = spectral_abscissa(p, job.n_modes, job.time_scale)?;
            (est.roots, est.s_est, est.rate, est.degenerate)
        }
    };
    ensure_dir(out)?;
    write_roots_csv(&out.join("roots.csv"), &roots)?;
    let w = roots.window;
    let summary = serde_json::json!({
        "d": p.d,
        "k": p.k,
        "s_est": s_est,
        "rate": rate,
        "asymptote": p.chain_asymptote(),
        "stable_by_theorem": refab::spectral::predicted_stable(p.d, p.k),
        "spectrally_stable": s_est < -1e-6,
        "degenerate": degenerate,
        "converged": roots.converged,
        "n_roots": roots.roots.len(),
        "window": { "re_min": w.re_min, "re_max": w.re_max,
                    "im_min": w.im_min, "im_max": w.im_max },
    });
    write_summary_json(&out.join("summary.json"), &summary)?;
    roots_plots(&roots).emit(out)?;
    println!(
        "spectrum at d = {:.6}, k = {}: {} zeros, rightmost Re = {:.6} -> {}",
        p.d,
        p.k,
        roots.roots.len(),
        s_est,
        out.display()
    );
    Ok(())
}

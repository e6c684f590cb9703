//! File output: plain CSV with full-precision floats, a JSON summary, and
//! gnuplot-ready data files.
//!
//! Every float is written as `{:.16e}` (17 significant digits), which
//! round-trips through `f64` parsing bit-for-bit, and all line endings are
//! `\n`. Reruns of the same job produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::region::RegionRow;
use crate::solver::{DensityField, TrajectoryRecord};
use crate::spectral::RootSet;

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::BadInputFile { path: path.display().to_string(), reason: reason.into() }
}

/// `t,W,u,y,l1,l2` per recorded sample.
pub fn write_trajectory_csv(path: &Path, rec: &TrajectoryRecord) -> Result<()> {
    let mut out = String::from("t,W,u,y,l1,l2\n");
    for i in 0..rec.len() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            rec.times[i], rec.mass[i], rec.influx[i], rec.outflux[i], rec.l1[i], rec.l2[i]
        )
        .expect("string writes cannot fail");
    }
    write_text(path, &out)
}

/// `x,rho` per cell center.
pub fn write_snapshot_csv(path: &Path, field: &DensityField) -> Result<()> {
    let mut out = String::from("x,rho\n");
    let dx = field.dx();
    for (i, rho) in field.cells.iter().enumerate() {
        writeln!(out, "{:.16e},{:.16e}", (i as f64 + 0.5) * dx, rho)
            .expect("string writes cannot fail");
    }
    write_text(path, &out)
}

/// Read a snapshot back. The `x` column must be the cell centers of a uniform
/// unit-interval grid with as many cells as the file has rows.
pub fn read_snapshot_csv(path: &Path) -> Result<DensityField> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("x,rho") => {}
        Some(other) => return Err(bad(path, format!("expected header 'x,rho', got '{other}'"))),
        None => return Err(bad(path, "empty file")),
    }
    let mut cells = Vec::new();
    let mut xs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (x, rho) = match (parts.next(), parts.next(), parts.next()) {
            (Some(x), Some(rho), None) => (x, rho),
            _ => return Err(bad(path, format!("line {}: expected two columns", lineno + 2))),
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad(path, format!("line {}: {e}", lineno + 2)))
        };
        xs.push(parse(x)?);
        cells.push(parse(rho)?);
    }
    let n = cells.len();
    if n == 0 {
        return Err(bad(path, "no data rows"));
    }
    let dx = 1.0 / n as f64;
    for (i, x) in xs.iter().enumerate() {
        let want = (i as f64 + 0.5) * dx;
        if (x - want).abs() > 1e-9 {
            return Err(bad(
                path,
                format!("row {}: x = {x} is not the center {want} of a {n}-cell grid", i + 1),
            ));
        }
    }
    Ok(DensityField::new(0.0, cells))
}

/// `re,im,residual` per root, in the set's sorted order.
pub fn write_roots_csv(path: &Path, roots: &RootSet) -> Result<()> {
    let mut out = String::from("re,im,residual\n");
    for r in &roots.roots {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", r.mu.re, r.mu.im, r.residual)
            .expect("string writes cannot fail");
    }
    write_text(path, &out)
}

/// `d,k,s_est,stable,by_theorem,mismatch[,alpha_sim]`, booleans as 0/1,
/// rows sorted by `(d, k)`.
pub fn write_region_csv(path: &Path, rows: &[RegionRow], with_alpha: bool) -> Result<()> {
    let mut out = String::from("d,k,s_est,stable,by_theorem,mismatch");
    if with_alpha {
        out.push_str(",alpha_sim");
    }
    out.push('\n');
    let flag = |b: bool| if b { '1' } else { '0' };
    for r in rows {
        write!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{},{}",
            r.d,
            r.k,
            r.s_est,
            flag(r.stable),
            flag(r.by_theorem),
            flag(r.mismatch)
        )
        .expect("string writes cannot fail");
        if with_alpha {
            match r.alpha_sim {
                Some(a) => write!(out, ",{a:.16e}").expect("string writes cannot fail"),
                None => out.push_str(",nan"),
            }
        }
        out.push('\n');
    }
    write_text(path, &out)
}

/// `t,V,ratio` per sample of an energy trace; the first ratio is NaN.
pub fn write_monitor_csv(path: &Path, series: &crate::lyapunov::MonitorSeries) -> Result<()> {
    let mut out = String::from("t,V,ratio\n");
    for i in 0..series.times.len() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            series.times[i], series.values[i], series.ratios[i]
        )
        .expect("string writes cannot fail");
    }
    write_text(path, &out)
}

/// Serialize a JSON summary with sorted keys and a trailing newline.
pub fn write_summary_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Whitespace-separated data file for gnuplot, one row per slice entry.
pub fn write_dat(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::from("# ");
    out.push_str(&header.join(" "));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            write!(out, "{v:.16e}").expect("string writes cannot fail");
            first = false;
        }
        out.push('\n');
    }
    write_text(path, &out)
}

/// One `.dat` file: its stem, its column names, and the columns themselves.
pub type DataTable = (&'static str, Vec<&'static str>, Vec<Vec<f64>>);

/// A gnuplot script plus the `.dat` files it draws.
pub struct PlotBundle {
    pub script: String,
    pub data: Vec<DataTable>,
}

impl PlotBundle {
    /// Write the bundle into `dir` as `plot.gp` plus its data files.
    pub fn emit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (name, header, rows) in &self.data {
            let p = dir.join(name);
            write_dat(&p, header, rows)?;
            written.push(p);
        }
        let p = dir.join("plot.gp");
        write_text(&p, &self.script)?;
        written.push(p);
        Ok(written)
    }
}

/// Decay curves and loop signals from a trajectory.
pub fn trajectory_plots(rec: &TrajectoryRecord) -> PlotBundle {
    let norms = (0..rec.len()).map(|i| vec![rec.times[i], rec.l1[i], rec.l2[i]]).collect();
    let signals = (0..rec.len())
        .map(|i| vec![rec.times[i], rec.mass[i], rec.influx[i], rec.outflux[i]])
        .collect();
    let script = "\
set terminal pngcairo size 1100,420\n\
set output 'trajectory.png'\n\
set multiplot layout 1,2\n\
set logscale y\n\
set xlabel 't'\n\
set title 'deviation norms'\n\
plot 'norms.dat' using 1:2 with lines title 'L1', \\\n\
     'norms.dat' using 1:3 with lines title 'L2'\n\
unset logscale y\n\
set title 'loop signals'\n\
plot 'signals.dat' using 1:2 with lines title 'W', \\\n\
     'signals.dat' using 1:3 with lines title 'u', \\\n\
     'signals.dat' using 1:4 with lines title 'y'\n\
unset multiplot\n"
        .to_string();
    PlotBundle {
        script,
        data: vec![
            ("norms.dat", vec!["t", "l1", "l2"], norms),
            ("signals.dat", vec!["t", "W", "u", "y"], signals),
        ],
    }
}

/// Scatter of roots in the complex plane.
pub fn roots_plots(roots: &RootSet) -> PlotBundle {
    let rows = roots
        .roots
        .iter()
        .map(|r| vec![r.mu.re, r.mu.im])
        .collect();
    let script = "\
set terminal pngcairo size 640,560\n\
set output 'roots.png'\n\
set xlabel 'Re'\n\
set ylabel 'Im'\n\
set zeroaxis\n\
plot 'roots.dat' using 1:2 with points pt 7 ps 1.4 title 'roots'\n"
        .to_string();
    PlotBundle { script, data: vec![("roots.dat", vec!["re", "im"], rows)] }
}

/// Stability map over the scanned parameter grid.
pub fn region_plots(rows: &[RegionRow]) -> PlotBundle {
    let data = rows
        .iter()
        .map(|r| vec![r.d, r.k, if r.stable { 1.0 } else { 0.0 }, if r.mismatch { 1.0 } else { 0.0 }])
        .collect();
    let script = "\
set terminal pngcairo size 640,560\n\
set output 'region.png'\n\
set xlabel 'd'\n\
set ylabel 'k'\n\
set cbrange [0:1]\n\
set palette defined (0 'red', 1 'blue')\n\
unset colorbox\n\
plot 'region.dat' using 1:2:3 with points pt 5 ps 1.6 palette title 'stable (blue)'\n"
        .to_string();
    PlotBundle { script, data: vec![("region.dat", vec!["d", "k", "stable", "mismatch"], data)] }
}

/// Energy functional trace with its decay ratios.
pub fn monitor_plots(times: &[f64], values: &[f64]) -> PlotBundle {
    let rows = times.iter().zip(values).map(|(t, v)| vec![*t, *v]).collect();
    let script = "\
set terminal pngcairo size 640,480\n\
set output 'monitor.png'\n\
set logscale y\n\
set xlabel 't'\n\
set ylabel 'V'\n\
plot 'monitor.dat' using 1:2 with lines title 'energy'\n"
        .to_string();
    PlotBundle { script, data: vec![("monitor.dat", vec!["t", "V"], rows)] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use tempfile::tempdir;

    use crate::spectral::{Root, Window};

    fn sample_record() -> TrajectoryRecord {
        TrajectoryRecord {
            times: vec![0.0, 0.5],
            mass: vec![1.0, 0.9],
            influx: vec![0.25, 0.21],
            outflux: vec![0.5, 0.4],
            l1: vec![0.3, 0.2],
            l2: vec![0.4, 0.25],
            displacement: vec![0.0, 0.45],
            ..TrajectoryRecord::default()
        }
    }

    #[test]
    fn trajectory_csv_has_header_and_full_precision() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("trajectory.csv");
        write_trajectory_csv(&p, &sample_record()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,W,u,y,l1,l2"));
        let row: Vec<f64> =
            lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 1.0, 0.25, 0.5, 0.3, 0.4]);
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    #[test]
    fn snapshot_roundtrip_is_exact() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("snapshot_0000.csv");
        let f = DensityField::from_fn(37, |x| (31.0 * x).sin() / 3.0 + 0.1);
        write_snapshot_csv(&p, &f).unwrap();
        let g = read_snapshot_csv(&p).unwrap();
        assert_eq!(f.cells, g.cells);
    }

    #[test]
    fn snapshot_reader_rejects_wrong_centers() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "x,rho\n0.0,1.0\n0.5,1.0\n").unwrap();
        let err = read_snapshot_csv(&p).unwrap_err();
        assert!(matches!(err, Error::BadInputFile { .. }), "{err}");
    }

    #[test]
    fn snapshot_reader_rejects_bad_header_and_columns() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad2.csv");
        std::fs::write(&p, "x;rho\n").unwrap();
        assert!(read_snapshot_csv(&p).is_err());
        std::fs::write(&p, "x,rho\n0.5,1.0,9\n").unwrap();
        assert!(read_snapshot_csv(&p).is_err());
    }

    #[test]
    fn roots_csv_lists_each_root() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("roots.csv");
        let roots = RootSet {
            roots: vec![
                Root { mu: Complex64::new(-0.7, -3.1), residual: 1e-15 },
                Root { mu: Complex64::new(-0.7, 3.1), residual: 2e-15 },
            ],
            winding_total: 2,
            window: Window::new(-1.0, 1.0, -4.0, 4.0).unwrap(),
            converged: true,
        };
        write_roots_csv(&p, &roots).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("re,im,residual\n"));
    }

    #[test]
    fn region_csv_encodes_flags_as_bits() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("region.csv");
        let rows = vec![RegionRow {
            d: -0.5,
            k: 0.25,
            s_est: -1.1,
            stable: true,
            by_theorem: true,
            mismatch: false,
            alpha_sim: None,
            error: None,
        }];
        write_region_csv(&p, &rows, false).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert!(line.ends_with(",1,1,0"), "{line}");
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        let rec = sample_record();
        write_trajectory_csv(&p1, &rec).unwrap();
        write_trajectory_csv(&p2, &rec).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn plot_bundle_writes_script_and_data() {
        let dir = tempdir().unwrap();
        let files = trajectory_plots(&sample_record()).emit(dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let script = std::fs::read_to_string(dir.path().join("plot.gp")).unwrap();
        assert!(script.contains("norms.dat"));
        let dat = std::fs::read_to_string(dir.path().join("norms.dat")).unwrap();
        assert!(dat.starts_with("# t l1 l2\n"));
    }
}

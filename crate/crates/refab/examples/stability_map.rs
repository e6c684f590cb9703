//! Sweep the (d, k) plane, compare the sharp condition with the computed
//! zeros at every point, and draw the map.
//!
//!     cargo run --release --example stability_map

use refab::region::{region_scan, RegionScanSpec};

fn main() -> refab::Result<()> {
    let spec = RegionScanSpec {
        d_min: -2.0,
        d_max: 2.0,
        d_step: 0.25,
        k_min: -1.4,
        k_max: 1.4,
        k_step: 0.2,
        margin: 0.05,
        n_modes: 4,
        simulate_and_fit: false,
    };
    let rows = region_scan(&spec)?;

    // Draw k downward so the k-axis reads top-to-bottom.
    let ks: Vec<f64> = {
        let mut v: Vec<f64> = rows.iter().map(|r| r.k).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v.dedup();
        v
    };
    let ds: Vec<f64> = {
        let mut v: Vec<f64> = rows.iter().map(|r| r.d).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    };

    println!("# = decays, . = grows, ! = prediction mismatch, (gap) = skipped band");
    for &k in &ks {
        let mut line = format!("k = {k:>5.2}  ");
        for &d in &ds {
            let cell = rows
                .iter()
                .find(|r| r.d == d && r.k == k)
                .map(|r| {
                    if r.mismatch {
                        '!'
                    } else if r.stable {
                        '#'
                    } else {
                        '.'
                    }
                })
                .unwrap_or(' ');
            line.push(cell);
        }
        println!("{line}");
    }
    println!("{}d from {} to {}", " ".repeat(11), ds[0], ds[ds.len() - 1]);

    let mismatches = rows.iter().filter(|r| r.mismatch).count();
    println!(
        "\n{} points, {} decaying, {} mismatches",
        rows.len(),
        rows.iter().filter(|r| r.stable).count(),
        mismatches
    );
    Ok(())
}

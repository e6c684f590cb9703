//! Locate the complex growth exponents of the linearized loop and compare
//! them with the closed form available when the speed does not react to the
//! load (d = 0: the exponents are ln k + 2 pi i n).
//!
//!     cargo run --example growth_exponents

use refab::spectral::{spectral_abscissa, SpectralProblem};

fn main() -> refab::Result<()> {
    println!("d = 0, k = 0.5 (closed form available):");
    let p = SpectralProblem::new(0.0, 0.5);
    let est = spectral_abscissa(&p, 3, 1.0)?;
    let ln_k = 0.5f64.ln();
    for r in &est.roots.roots {
        let n = (r.mu.im / (2.0 * std::f64::consts::PI)).round();
        let exact_im = 2.0 * std::f64::consts::PI * n;
        println!(
            "  {:>9.6} {:>+10.6}i   lattice error {:.2e}",
            r.mu.re,
            r.mu.im,
            ((r.mu.re - ln_k).powi(2) + (r.mu.im - exact_im).powi(2)).sqrt()
        );
    }

    println!();
    println!("load-reactive speeds shift the chains:");
    for (d, k) in [(-0.5, 0.3), (0.9, 0.5), (1.5, -0.4), (0.0, 2.0)] {
        let p = SpectralProblem::new(d, k);
        let est = spectral_abscissa(&p, 4, 1.0)?;
        println!(
            "  d = {d:>5}, k = {k:>5}: rightmost Re = {:>9.6}, asymptote {:>9.6}, {} zeros, {}",
            est.s_est,
            est.asymptote,
            est.roots.roots.len(),
            if est.s_est < -1e-6 { "decaying" } else { "growing or neutral" },
        );
    }
    Ok(())
}

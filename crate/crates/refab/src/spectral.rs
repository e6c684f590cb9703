//! Root structure of the linearized closed loop.
//!
//! After rescaling time by the equilibrium speed, growth exponents `mu` of the
//! linearized loop with feedback gain `k` and speed-sensitivity ratio `d` are
//! the zeros of the entire function
//!
//! ```text
//! f(mu) = 1 - k exp(-mu) + d (1 - k) psi(mu),     psi(mu) = (1 - exp(-mu)) / mu
//! ```
//!
//! with `psi(0) = 1` by continuity. At `d = 0` the zeros form the exact
//! lattice `ln k + 2 pi i n` (gain positive) or `ln|k| + (2n+1) pi i` (gain
//! negative); in general they are found numerically here by counting zeros
//! with winding numbers over rectangles, bisecting until boxes isolate single
//! zeros, and polishing with Newton's method. The decay rate of the loop is
//! governed by the rightmost zero, estimated over a finite window together
//! with the vertical asymptote `Re mu -> ln|k|` of the zero chains.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::EquilibriumSummary;

/// Radius below which `psi` and `psi'` switch to series evaluation.
const SERIES_RADIUS: f64 = 1e-3;
/// Contour samples closer to a zero than this trigger window inflation.
const CONTOUR_MIN_ABS: f64 = 1e-10;
/// Split lines must keep at least this much distance from zeros.
const SPLIT_MIN_ABS: f64 = 1e-9;
/// Target for Newton polish.
const NEWTON_TOL: f64 = 1e-12;
/// Residual bound reported roots must satisfy.
const RESIDUAL_TOL: f64 = 1e-9;
/// Boxes at most this large stop subdividing.
const BOX_FLOOR: f64 = 1e-5;
/// Trial positions (as fractions of the split dimension) for bisection lines.
const SPLIT_FRACTIONS: [f64; 5] = [0.5, 0.53, 0.47, 0.56, 0.44];

/// The pair (d, k) that fixes the characteristic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralProblem {
    /// Speed-sensitivity ratio `rho_bar * lambda'(rho_bar) / lambda(rho_bar)`.
    pub d: f64,
    /// Feedback gain.
    pub k: f64,
}

fn psi(mu: Complex64) -> Complex64 {
    if mu.norm() < SERIES_RADIUS {
        // 1 - mu/2 + mu^2/6 - mu^3/24 + mu^4/120
        let c = [1.0, -0.5, 1.0 / 6.0, -1.0 / 24.0, 1.0 / 120.0];
        c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * mu + ci)
    } else {
        (1.0 - (-mu).exp()) / mu
    }
}

fn psi_prime(mu: Complex64) -> Complex64 {
    if mu.norm() < SERIES_RADIUS {
        // -1/2 + mu/3 - mu^2/8 + mu^3/30 - mu^4/144
        let c = [-0.5, 1.0 / 3.0, -1.0 / 8.0, 1.0 / 30.0, -1.0 / 144.0];
        c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * mu + ci)
    } else {
        let em = (-mu).exp();
        (em * mu - (1.0 - em)) / (mu * mu)
    }
}

impl SpectralProblem {
    pub fn new(d: f64, k: f64) -> Self {
        SpectralProblem { d, k }
    }

    /// Problem for a concrete equilibrium and gain.
    pub fn from_equilibrium(eq: &EquilibriumSummary, k: f64) -> Self {
        SpectralProblem { d: eq.d, k }
    }

    /// The characteristic function `f(mu)`.
    pub fn char_fn(&self, mu: Complex64) -> Complex64 {
        1.0 - self.k * (-mu).exp() + self.d * (1.0 - self.k) * psi(mu)
    }

    /// Its derivative `f'(mu)`.
    pub fn char_fn_deriv(&self, mu: Complex64) -> Complex64 {
        self.k * (-mu).exp() + self.d * (1.0 - self.k) * psi_prime(mu)
    }

    /// `Re mu` limit of the zero chains as `|Im mu| -> infinity`.
    pub fn chain_asymptote(&self) -> f64 {
        if self.k == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.k.abs().ln()
        }
    }

    /// True when the zero at the origin is forced (`k = 1` keeps the load
    /// constant, `d = -1` makes the flux insensitive to it).
    pub fn has_forced_neutral_mode(&self) -> bool {
        self.k == 1.0 || self.d == -1.0
    }
}

/// Does (d, k) satisfy the sharp stability condition `d > -1` and `|k| < 1`?
pub fn predicted_stable(d: f64, k: f64) -> bool {
    d > -1.0 && k.abs() < 1.0
}

/// Closed rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let w = Window { re_min, re_max, im_min, im_max };
        if !(re_min < re_max && im_min < im_max)
            || !w.corners().iter().all(|c| c.re.is_finite() && c.im.is_finite())
        {
            return Err(Error::BadParameter(format!("degenerate window {w:?}")));
        }
        Ok(w)
    }

    /// Rectangle `[-re_half, re_half] x [-im_half, im_half]`.
    pub fn centered(re_half: f64, im_half: f64) -> Self {
        Window { re_min: -re_half, re_max: re_half, im_min: -im_half, im_max: im_half }
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    fn max_dim(&self) -> f64 {
        self.width().max(self.height())
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn contains(&self, mu: Complex64) -> bool {
        (self.re_min..=self.re_max).contains(&mu.re) && (self.im_min..=self.im_max).contains(&mu.im)
    }

    fn inflate(&self, eps: f64) -> Window {
        Window {
            re_min: self.re_min - eps,
            re_max: self.re_max + eps,
            im_min: self.im_min - eps,
            im_max: self.im_max + eps,
        }
    }
}

/// Trapezoid estimate of the winding number with `m` intervals per edge.
/// Also reports the smallest `|f|` on the contour and the smallest Newton
/// step `|f| / |f'|`, a cheap estimate of the distance to the nearest zero.
fn winding_estimate(p: &SpectralProblem, w: &Window, m: usize) -> (f64, f64, f64) {
    let corners = w.corners();
    let mut integral = Complex64::new(0.0, 0.0);
    let mut min_abs = f64::INFINITY;
    let mut min_dist = f64::INFINITY;
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        let dz = (b - a) / m as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..=m {
            let z = a + dz * j as f64;
            let f = p.char_fn(z);
            let df = p.char_fn_deriv(z);
            min_abs = min_abs.min(f.norm());
            if df.norm() > 1e-300 {
                min_dist = min_dist.min(f.norm() / df.norm());
            }
            let g = df / f;
            let weight = if j == 0 || j == m { 0.5 } else { 1.0 };
            sum += g * weight;
        }
        integral += sum * dz;
    }
    let v = (integral / Complex64::new(0.0, 2.0 * std::f64::consts::PI)).re;
    (v, min_abs, min_dist)
}

/// Count zeros of `f` inside the window by the argument principle.
///
/// The trapezoid sum is refined (doubling the per-edge sampling) until the
/// estimate is within 1e-3 of an integer twice in a row. A contour sample too
/// close to a zero aborts with `RootOnContour`; `find_roots` reacts by
/// inflating the window slightly.
pub fn count_roots(p: &SpectralProblem, window: &Window) -> Result<usize> {
    const MAX_M: usize = 65536;
    let max_edge = window.width().max(window.height());
    let mut m = 64usize;
    let mut prev: Option<i64> = None;
    loop {
        let (v, min_abs, min_dist) = winding_estimate(p, window, m);
        if min_abs < CONTOUR_MIN_ABS || min_dist < 1e-8 {
            return Err(Error::RootOnContour { min_abs });
        }
        // The quadrature only resolves a zero at distance `min_dist` once the
        // sample spacing is finer; if the cap cannot get there, give up now so
        // the caller can inflate the window instead of burning samples.
        let resolved = min_dist >= 2.0 * max_edge / m as f64;
        if !resolved && 2.0 * max_edge / min_dist > MAX_M as f64 {
            return Err(Error::RootOnContour { min_abs });
        }
        let r = v.round();
        if resolved && (v - r).abs() < 1e-3 && r.is_finite() {
            let ri = r as i64;
            // A second reading at doubled sampling guards against flukes; at
            // the cap a resolved reading is the best there will ever be.
            if prev == Some(ri) || m >= MAX_M {
                if ri < 0 {
                    return Err(Error::WindingNotInteger {
                        re_min: window.re_min,
                        re_max: window.re_max,
                        im_min: window.im_min,
                        im_max: window.im_max,
                        value: v,
                    });
                }
                return Ok(ri as usize);
            }
            prev = Some(ri);
        } else if resolved {
            prev = None;
        }
        if m >= MAX_M {
            return Err(Error::WindingNotInteger {
                re_min: window.re_min,
                re_max: window.re_max,
                im_min: window.im_min,
                im_max: window.im_max,
                value: v,
            });
        }
        m *= 2;
    }
}

/// One polished zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub mu: Complex64,
    /// `|f(mu)|` after polishing.
    pub residual: f64,
}

/// All zeros found in a window, plus the bookkeeping needed to trust them.
#[derive(Debug, Clone)]
pub struct RootSet {
    /// Sorted by imaginary part, then real part. A zero of multiplicity `m`
    /// appears `m` times.
    pub roots: Vec<Root>,
    /// Winding number of the whole window; equals `roots.len()` when
    /// `converged` is true.
    pub winding_total: usize,
    pub window: Window,
    pub converged: bool,
}

impl RootSet {
    fn empty(window: Window) -> Self {
        RootSet { roots: Vec::new(), winding_total: 0, window, converged: true }
    }

    /// Largest real part among the found zeros.
    pub fn max_re(&self) -> Option<f64> {
        self.roots
            .iter()
            .map(|r| r.mu.re)
            .fold(None, |m: Option<f64>, re| Some(m.map_or(re, |v| v.max(re))))
    }

    /// The found zero with the largest real part.
    pub fn rightmost(&self) -> Option<Root> {
        self.roots
            .iter()
            .copied()
            .max_by(|a, b| a.mu.re.total_cmp(&b.mu.re))
    }

    /// Is the set closed under conjugation, to within `tol`? Only meaningful
    /// for windows symmetric about the real axis.
    pub fn conjugate_closed(&self, tol: f64) -> bool {
        self.roots.iter().all(|r| {
            r.mu.im.abs() <= tol
                || self
                    .roots
                    .iter()
                    .any(|s| (s.mu - r.mu.conj()).norm() <= tol)
        })
    }
}

fn newton_polish(p: &SpectralProblem, seed: Complex64, guard: &Window) -> Option<Root> {
    let mut mu = seed;
    for _ in 0..100 {
        let f = p.char_fn(mu);
        let n = f.norm();
        if n < NEWTON_TOL {
            return Some(Root { mu, residual: n });
        }
        let df = p.char_fn_deriv(mu);
        if df.norm() < 1e-300 {
            return None;
        }
        mu -= f / df;
        if !mu.re.is_finite() || !mu.im.is_finite() || !guard.contains(mu) {
            return None;
        }
    }
    let n = p.char_fn(mu).norm();
    (n < RESIDUAL_TOL).then_some(Root { mu, residual: n })
}

fn polish_in_box(
    p: &SpectralProblem,
    w: &Window,
    rng: &mut ChaCha8Rng,
) -> Option<Root> {
    let guard = w.inflate(0.25 * w.max_dim() + 0.01);
    if let Some(r) = newton_polish(p, w.center(), &guard) {
        return Some(r);
    }
    for _ in 0..5 {
        let seed = Complex64::new(
            rng.gen_range(w.re_min..w.re_max),
            rng.gen_range(w.im_min..w.im_max),
        );
        if let Some(r) = newton_polish(p, seed, &guard) {
            return Some(r);
        }
    }
    None
}

/// Scan a vertical or horizontal segment for the smallest `|f|`.
fn segment_min_abs(p: &SpectralProblem, a: Complex64, b: Complex64) -> f64 {
    let m = 128;
    let dz = (b - a) / m as f64;
    (0..=m)
        .map(|j| p.char_fn(a + dz * j as f64).norm())
        .fold(f64::INFINITY, f64::min)
}

fn subdivide(
    p: &SpectralProblem,
    w: &Window,
    m: usize,
    depth: usize,
    rng: &mut ChaCha8Rng,
    roots: &mut Vec<Root>,
    all_ok: &mut bool,
) -> Result<()> {
    if m == 0 {
        return Ok(());
    }
    if m == 1 && w.max_dim() <= 0.5 {
        if let Some(r) = polish_in_box(p, w, rng) {
            roots.push(r);
            return Ok(());
        }
        // fall through to further subdivision
    }
    if w.max_dim() <= BOX_FLOOR || depth >= 60 {
        match polish_in_box(p, w, rng) {
            Some(r) => {
                for _ in 0..m {
                    roots.push(r);
                }
            }
            None => *all_ok = false,
        }
        return Ok(());
    }

    let split_re = w.width() >= w.height();
    for frac in SPLIT_FRACTIONS {
        let (a, b, line_a, line_b) = if split_re {
            let c = w.re_min + frac * w.width();
            (
                Window { re_max: c, ..*w },
                Window { re_min: c, ..*w },
                Complex64::new(c, w.im_min),
                Complex64::new(c, w.im_max),
            )
        } else {
            let c = w.im_min + frac * w.height();
            (
                Window { im_max: c, ..*w },
                Window { im_min: c, ..*w },
                Complex64::new(w.re_min, c),
                Complex64::new(w.re_max, c),
            )
        };
        if segment_min_abs(p, line_a, line_b) <= SPLIT_MIN_ABS {
            continue;
        }
        // A zero hugging an inherited outer edge can defeat the quadrature in
        // one child; the split line is clean, so the sibling's count then
        // determines both.
        let is_retryable = |e: &Error| {
            matches!(e, Error::RootOnContour { .. } | Error::WindingNotInteger { .. })
        };
        let (ca, cb) = match (count_roots(p, &a), count_roots(p, &b)) {
            (Ok(ca), Ok(cb)) => {
                if ca + cb != m {
                    continue;
                }
                (ca, cb)
            }
            (Ok(ca), Err(ref e)) if is_retryable(e) && ca <= m => (ca, m - ca),
            (Err(ref e), Ok(cb)) if is_retryable(e) && cb <= m => (m - cb, cb),
            (Err(e), _) | (_, Err(e)) => {
                if is_retryable(&e) {
                    continue;
                }
                return Err(e);
            }
        };
        subdivide(p, &a, ca, depth + 1, rng, roots, all_ok)?;
        subdivide(p, &b, cb, depth + 1, rng, roots, all_ok)?;
        return Ok(());
    }
    // No admissible split line found; count what we can and move on.
    *all_ok = false;
    Ok(())
}

/// Find every zero of `f` in the window.
///
/// The window is counted as a whole, then bisected into boxes that isolate
/// single zeros, which Newton's method polishes to `|f| < 1e-12`. A zero
/// sitting exactly on the window edge (the `d = 0` lattice hits this) is
/// rescued by inflating the window a hair and retrying.
pub fn find_roots(p: &SpectralProblem, window: &Window) -> Result<RootSet> {
    // Escalating inflation: a hair to clear a zero off the contour, then
    // enough that the cleared zero no longer starves the quadrature.
    const EPS: [f64; 4] = [0.0, 1e-6, 1e-2, 5e-2];
    let mut best: Option<RootSet> = None;
    let mut last_err = None;
    for eps in EPS {
        match find_roots_inner(p, &window.inflate(eps)) {
            Ok(set) if set.converged => return Ok(set),
            Ok(set) => best = Some(set),
            Err(
                e @ (Error::RootOnContour { .. } | Error::WindingNotInteger { .. }),
            ) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(set) => Ok(set),
        None => Err(last_err.expect("either a set or an error")),
    }
}

fn find_roots_inner(p: &SpectralProblem, win: &Window) -> Result<RootSet> {
    let total = count_roots(p, win)?;
    if total == 0 {
        return Ok(RootSet::empty(*win));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut roots = Vec::with_capacity(total);
    let mut all_ok = true;
    subdivide(p, win, total, 0, &mut rng, &mut roots, &mut all_ok)?;
    roots.sort_by(|a, b| a.mu.im.total_cmp(&b.mu.im).then(a.mu.re.total_cmp(&b.mu.re)));
    // Collapse accidental duplicates (a Newton escape that landed on a
    // neighbor) only when they make the list overfull.
    if roots.len() > total {
        let mut cleaned: Vec<Root> = Vec::with_capacity(total);
        for r in roots {
            if cleaned.len() >= total
                || cleaned
                    .last()
                    .is_some_and(|l| (l.mu - r.mu).norm() < 1e-8)
            {
                continue;
            }
            cleaned.push(r);
        }
        roots = cleaned;
    }
    let converged = all_ok
        && roots.len() == total
        && roots.iter().all(|r| r.residual < RESIDUAL_TOL);
    Ok(RootSet { roots, winding_total: total, window: *win, converged })
}

/// Stable/unstable verdict for one (d, k) point.
#[derive(Debug, Clone, Copy)]
pub struct StabilityVerdict {
    pub d: f64,
    pub k: f64,
    /// Sharp condition `d > -1 && |k| < 1`.
    pub by_theorem: bool,
    /// Rightmost-zero estimate says decaying.
    pub spectrally_stable: bool,
    /// Rightmost growth exponent (rescaled time).
    pub s_est: f64,
    pub converged: bool,
}

/// Estimate of the rightmost growth exponent.
#[derive(Debug, Clone)]
pub struct AbscissaEstimate {
    /// Rightmost `Re mu` over the search window and the chain asymptote, in
    /// rescaled time.
    pub s_est: f64,
    /// `s_est` converted to physical time (multiplied by the equilibrium
    /// speed).
    pub rate: f64,
    /// The zero realizing the estimate, when one was found in the window.
    pub dominant: Option<Complex64>,
    pub asymptote: f64,
    /// A neutral mode is structurally forced (`k = 1` or `d = -1`).
    pub degenerate: bool,
    pub roots: RootSet,
}

/// Search window wide enough for the rightmost zero at this (d, k).
pub fn default_window(p: &SpectralProblem, n_modes: usize) -> Window {
    let mut r = 3.0f64;
    if p.k != 0.0 {
        r = r.max(p.k.abs().ln().abs() + 2.0);
    }
    // A real crossing exists when the zero-frequency value (1+d)(1-k) is
    // negative; widen so it cannot sit outside the window.
    if (1.0 + p.d) * (1.0 - p.k) < 0.0 && p.k.abs() < 1.0 {
        r = r.max((p.d * (1.0 - p.k)).abs() / (1.0 - p.k.abs()) + 1.0);
    }
    // High zeros line up near Im = 2 n pi (positive gain) or (2n+1) pi
    // (negative gain); an edge at an odd multiple of pi/2 stays a quarter
    // period clear of both lattices.
    let im = std::f64::consts::PI * (2.0 * (n_modes as f64 + 1.0) - 0.5);
    Window::centered(r, im)
}

/// Rightmost growth exponent of the loop, over a window spanning `n_modes`
/// conjugate pairs of the zero chains. `time_scale` converts to physical time.
pub fn spectral_abscissa(
    p: &SpectralProblem,
    n_modes: usize,
    time_scale: f64,
) -> Result<AbscissaEstimate> {
    let window = default_window(p, n_modes);
    if p.has_forced_neutral_mode() {
        return Ok(AbscissaEstimate {
            s_est: 0.0,
            rate: 0.0,
            dominant: Some(Complex64::new(0.0, 0.0)),
            asymptote: p.chain_asymptote(),
            degenerate: true,
            roots: RootSet::empty(window),
        });
    }
    let roots = find_roots(p, &window)?;
    let asymptote = p.chain_asymptote();
    let (s_est, dominant) = match roots.rightmost() {
        Some(r) if r.mu.re >= asymptote => (r.mu.re, Some(r.mu)),
        Some(_) | None => (asymptote, None),
    };
    Ok(AbscissaEstimate {
        s_est,
        rate: s_est * time_scale,
        dominant,
        asymptote,
        degenerate: false,
        roots,
    })
}

/// Classify one (d, k) point by theorem and by computed zeros.
pub fn classify_stability(p: &SpectralProblem, n_modes: usize) -> Result<StabilityVerdict> {
    let est = spectral_abscissa(p, n_modes, 1.0)?;
    Ok(StabilityVerdict {
        d: p.d,
        k: p.k,
        by_theorem: predicted_stable(p.d, p.k),
        spectrally_stable: est.s_est < -1e-6,
        s_est: est.s_est,
        converged: est.degenerate || est.roots.converged,
    })
}

/// Left side of the crossing condition at gain -1: zeros sit at `mu = i b`
/// exactly when `-(b/2) cot(b/2) = d`. Vanishes at the crossing.
pub fn axis_crossing_function(d: f64, b: f64) -> f64 {
    let half = 0.5 * b;
    -half * (half.cos() / half.sin()) - d
}

/// Frequencies `b_1 < b_2 < ...` of the purely oscillatory modes at gain -1,
/// one from each interval `(2 pi n, 2 pi (n+1))`. Valid for `d > -1`, where
/// each interval holds exactly one crossing.
pub fn imaginary_axis_frequencies(d: f64, count: usize) -> Result<Vec<f64>> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let mut lo = two_pi * n as f64 + 1e-6;
        let mut hi = two_pi * (n + 1) as f64 - 1e-6;
        let mut flo = axis_crossing_function(d, lo);
        let mut fhi = axis_crossing_function(d, hi);
        let mut shrink = 0;
        while flo * fhi > 0.0 && shrink < 4 {
            let eps = 1e-6 * 10f64.powi(-(shrink + 1));
            lo = two_pi * n as f64 + eps;
            hi = two_pi * (n + 1) as f64 - eps;
            flo = axis_crossing_function(d, lo);
            fhi = axis_crossing_function(d, hi);
            shrink += 1;
        }
        if flo * fhi > 0.0 {
            return Err(Error::BracketingFailed { n, lo, hi });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-14 * hi.max(1.0) {
                break;
            }
            let fm = axis_crossing_function(d, mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if flo * fm < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}

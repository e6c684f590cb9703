//! Closed-loop transport model: velocity laws, equilibrium data, boundary feedback.
//!
//! The system under study is a scalar conservation law on the unit interval
//! whose transport speed depends on the instantaneous total load,
//!
//! ```text
//! rho_t + (rho * lambda(W(t)))_x = 0,   W(t) = integral of rho(t, .) over [0, 1],
//! ```
//!
//! with influx `u(t) = rho(t,0) * lambda(W(t))` actuated by output feedback on the
//! measured outflux `y(t) = rho(t,1) * lambda(W(t))`:
//!
//! ```text
//! u(t) - rb * lambda(rb) = k * (y(t) - rb * lambda(rb)),
//! ```
//!
//! where `rb` is the target equilibrium density. The single dimensionless number
//!
//! ```text
//! d = rb * lambda'(rb) / lambda(rb)
//! ```
//!
//! controls how strongly the nonlocal speed couples back into the boundary loop;
//! everything downstream (spectra, Lyapunov certificates) is parameterized by
//! `(d, k)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Speed law kinds a [`VelocityModel`] can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityKind {
    Reciprocal,
    Polynomial,
    Tabulated,
    Analytic,
}

type DynFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum VelocityRepr {
    /// lambda(s) = 1 / (1 + s)
    Reciprocal,
    /// lambda(s) = c0 + c1 s + c2 s^2 + ...
    Poly(Vec<f64>),
    /// Piecewise-linear interpolation of (s, lambda) samples; strictly increasing s.
    Table { s: Vec<f64>, lam: Vec<f64> },
    /// Arbitrary user pair (lambda, lambda').
    Fns { f: DynFn, df: DynFn },
}

/// A C^1 positive speed law together with the interval on which it may be evaluated.
#[derive(Clone)]
pub struct VelocityModel {
    repr: VelocityRepr,
    lo: f64,
    hi: f64,
}

impl fmt::Debug for VelocityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VelocityModel")
            .field("kind", &self.kind())
            .field("valid_range", &(self.lo, self.hi))
            .finish()
    }
}

/// Finite-difference step used wherever a derivative must be sampled numerically.
fn fd_step(s: f64) -> f64 {
    1e-6 * s.abs().max(1.0)
}

impl VelocityModel {
    /// Reciprocal law `1/(1+s)` with the default validity interval for a loop
    /// targeting equilibrium density `rho_bar`. The lower end is clamped to
    /// -0.9 so the pole at s = -1 stays out of reach.
    pub fn reciprocal_for(rho_bar: f64) -> Self {
        let lo = (-0.5 * (1.0 + rho_bar.abs())).max(-0.9);
        let hi = 10.0 * (1.0 + rho_bar.abs());
        VelocityModel { repr: VelocityRepr::Reciprocal, lo, hi }
    }

    /// Reciprocal law with the default range at `rho_bar = 0`.
    pub fn reciprocal() -> Self {
        Self::reciprocal_for(0.0)
    }

    /// Reciprocal law on an explicit interval (must stay right of the pole).
    pub fn reciprocal_on(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || lo <= -1.0 {
            return Err(Error::BadVelocityModel(format!(
                "reciprocal law needs -1 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(VelocityModel { repr: VelocityRepr::Reciprocal, lo, hi })
    }

    /// Polynomial law `coeffs[0] + coeffs[1] s + ...` on `[lo, hi]`.
    pub fn polynomial(coeffs: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::BadVelocityModel("empty coefficient list".into()));
        }
        if !(lo < hi) {
            return Err(Error::BadVelocityModel(format!("empty validity interval [{lo}, {hi}]")));
        }
        Ok(VelocityModel { repr: VelocityRepr::Poly(coeffs), lo, hi })
    }

    /// Tabulated law from (s, lambda) samples, interpolated linearly.
    /// The validity interval defaults to the sample span.
    pub fn tabulated(s: Vec<f64>, lam: Vec<f64>) -> Result<Self> {
        if s.len() != lam.len() || s.len() < 2 {
            return Err(Error::BadVelocityModel(format!(
                "need >= 2 matched samples, got {} abscissae / {} values",
                s.len(),
                lam.len()
            )));
        }
        if s.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::BadVelocityModel("sample abscissae must strictly increase".into()));
        }
        if s.iter().chain(lam.iter()).any(|v| !v.is_finite()) {
            return Err(Error::BadVelocityModel("non-finite sample".into()));
        }
        let (lo, hi) = (s[0], s[s.len() - 1]);
        Ok(VelocityModel { repr: VelocityRepr::Table { s, lam }, lo, hi })
    }

    /// User-supplied pair (lambda, lambda') on `[lo, hi]`.
    pub fn from_fns<F, G>(f: F, df: G, lo: f64, hi: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lo < hi) {
            return Err(Error::BadVelocityModel(format!("empty validity interval [{lo}, {hi}]")));
        }
        Ok(VelocityModel {
            repr: VelocityRepr::Fns { f: Arc::new(f), df: Arc::new(df) },
            lo,
            hi,
        })
    }

    /// Affine law `lambda_bar * (1 + slope * (s - rho_bar))`, the simplest model
    /// realizing a prescribed coupling ratio `d = rho_bar * slope` at `rho_bar`.
    /// The validity interval is chosen to keep the speed within a factor 2 of
    /// `lambda_bar`.
    pub fn affine_with_ratio(d: f64, lambda_bar: f64, rho_bar: f64) -> Result<Self> {
        if !(lambda_bar > 0.0) {
            return Err(Error::DegenerateSpeed { at: rho_bar, lambda: lambda_bar });
        }
        if d != 0.0 && rho_bar == 0.0 {
            return Err(Error::BadParameter(
                "nonzero coupling ratio needs a nonzero equilibrium density".into(),
            ));
        }
        if d == 0.0 {
            // Constant speed; any load is admissible.
            return VelocityModel::polynomial(vec![lambda_bar], rho_bar - 100.0, rho_bar + 100.0);
        }
        let slope = d / rho_bar; // lambda'(rho_bar)/lambda_bar
        let half_width = 0.5 / slope.abs();
        VelocityModel::polynomial(
            vec![lambda_bar * (1.0 - slope * rho_bar), lambda_bar * slope],
            rho_bar - half_width,
            rho_bar + half_width,
        )
    }

    pub fn kind(&self) -> VelocityKind {
        match self.repr {
            VelocityRepr::Reciprocal => VelocityKind::Reciprocal,
            VelocityRepr::Poly(_) => VelocityKind::Polynomial,
            VelocityRepr::Table { .. } => VelocityKind::Tabulated,
            VelocityRepr::Fns { .. } => VelocityKind::Analytic,
        }
    }

    pub fn valid_range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Widen or narrow the validity interval (used by config overrides).
    pub fn with_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::BadVelocityModel(format!("empty validity interval [{lo}, {hi}]")));
        }
        if let VelocityRepr::Reciprocal = self.repr {
            if lo <= -1.0 {
                return Err(Error::BadVelocityModel(
                    "reciprocal law cannot extend to s <= -1".into(),
                ));
            }
        }
        if let VelocityRepr::Table { s, .. } = &self.repr {
            let (slo, shi) = (s[0], s[s.len() - 1]);
            if lo < slo || hi > shi {
                return Err(Error::BadVelocityModel(format!(
                    "requested range [{lo}, {hi}] exceeds sample span [{slo}, {shi}]"
                )));
            }
        }
        self.lo = lo;
        self.hi = hi;
        Ok(self)
    }

    fn check_range(&self, s: f64) -> Result<()> {
        if !s.is_finite() || s < self.lo || s > self.hi {
            return Err(Error::OutOfRange { value: s, lo: self.lo, hi: self.hi });
        }
        Ok(())
    }

    fn eval(&self, s: f64) -> f64 {
        match &self.repr {
            VelocityRepr::Reciprocal => 1.0 / (1.0 + s),
            VelocityRepr::Poly(c) => horner(c, s),
            VelocityRepr::Table { s: xs, lam } => interp_linear(xs, lam, s),
            VelocityRepr::Fns { f, .. } => f(s),
        }
    }

    /// Speed at load `s`.
    pub fn lambda(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        Ok(self.eval(s))
    }

    /// Derivative of the speed at load `s`. Exact for reciprocal, polynomial and
    /// user-analytic laws; a centered finite difference on the interpolant for
    /// tabulated data (one-sided at the interval ends).
    pub fn lambda_prime(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        Ok(match &self.repr {
            VelocityRepr::Reciprocal => {
                let q = 1.0 + s;
                -1.0 / (q * q)
            }
            VelocityRepr::Poly(c) => horner_deriv(c, s),
            VelocityRepr::Fns { df, .. } => df(s),
            VelocityRepr::Table { s: xs, lam } => {
                let h = fd_step(s);
                let (a, b) = (s - h, s + h);
                if a >= self.lo && b <= self.hi {
                    (interp_linear(xs, lam, b) - interp_linear(xs, lam, a)) / (2.0 * h)
                } else if b <= self.hi {
                    (interp_linear(xs, lam, b) - interp_linear(xs, lam, s)) / h
                } else {
                    (interp_linear(xs, lam, s) - interp_linear(xs, lam, a)) / h
                }
            }
        })
    }

    /// Self-check on a sample grid: the speed must be finite and strictly
    /// positive everywhere on the validity interval, and for analytic laws the
    /// declared derivative must agree with a finite difference.
    pub fn validate(&self, samples: usize) -> Result<()> {
        let n = samples.max(3);
        for i in 0..n {
            let s = self.lo + (self.hi - self.lo) * (i as f64) / ((n - 1) as f64);
            let lam = self.eval(s);
            if !lam.is_finite() || lam <= 0.0 {
                return Err(Error::DegenerateSpeed { at: s, lambda: lam });
            }
            if let VelocityRepr::Fns { .. } | VelocityRepr::Poly(_) = self.repr {
                let h = fd_step(s);
                let (a, b) = ((s - h).max(self.lo), (s + h).min(self.hi));
                if b > a {
                    let fd = (self.eval(b) - self.eval(a)) / (b - a);
                    let claimed = self.lambda_prime(s)?;
                    let tol = 1e-5 * claimed.abs().max(1.0);
                    if (fd - claimed).abs() > tol {
                        return Err(Error::BadVelocityModel(format!(
                            "derivative mismatch at s = {s}: declared {claimed}, sampled {fd}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * s + ci)
}

fn horner_deriv(c: &[f64], s: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &ci)| acc * s + (i as f64) * ci)
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    // xs strictly increasing; x within [xs[0], xs[last]] by the range check.
    let j = xs.partition_point(|&v| v < x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = (x - x0) / (x1 - x0);
    ys[j - 1] * (1.0 - t) + ys[j] * t
}

/// Full parameter set of one closed-loop run.
#[derive(Debug, Clone)]
pub struct ClosedLoopConfig {
    /// Target equilibrium density.
    pub rho_bar: f64,
    /// Feedback gain on the outflux deviation.
    pub k: f64,
    pub velocity: VelocityModel,
    pub n_cells: usize,
    /// Courant factor in (0, 1].
    pub cfl: f64,
    pub t_final: f64,
    /// Output stride in solver steps.
    pub record_every: usize,
    /// Replace lambda(W(t)) by the constant lambda(rho_bar) and drive the
    /// boundary with the linearized feedback law; the run then integrates the
    /// linearization of the loop around rho_bar, shifted back by rho_bar.
    pub freeze_velocity: bool,
}

impl ClosedLoopConfig {
    pub fn new(rho_bar: f64, k: f64, velocity: VelocityModel) -> Self {
        ClosedLoopConfig {
            rho_bar,
            k,
            velocity,
            n_cells: 400,
            cfl: 0.5,
            t_final: 10.0,
            record_every: 1,
            freeze_velocity: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rho_bar.is_finite() || !self.k.is_finite() {
            return Err(Error::BadParameter("non-finite rho_bar or k".into()));
        }
        if self.n_cells == 0 {
            return Err(Error::BadParameter("n_cells must be positive".into()));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::BadParameter(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::BadParameter(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.record_every == 0 {
            return Err(Error::BadParameter("record_every must be positive".into()));
        }
        self.velocity.validate(257)?;
        // The loop must have a well-defined equilibrium.
        equilibrium_summary(self.rho_bar, &self.velocity)?;
        Ok(())
    }
}

/// Equilibrium data of the closed loop at density `rho_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSummary {
    pub rho_bar: f64,
    pub lambda_bar: f64,
    /// Coupling ratio `rho_bar * lambda'(rho_bar) / lambda(rho_bar)`.
    pub d: f64,
    /// Equilibrium flux `rho_bar * lambda(rho_bar)`.
    pub flux_bar: f64,
}

/// Evaluate the equilibrium summary of `v` at `rho_bar`.
pub fn equilibrium_summary(rho_bar: f64, v: &VelocityModel) -> Result<EquilibriumSummary> {
    let lambda_bar = v.lambda(rho_bar)?;
    if !(lambda_bar > 0.0) || !lambda_bar.is_finite() {
        return Err(Error::DegenerateSpeed { at: rho_bar, lambda: lambda_bar });
    }
    // + 0.0 turns a negative zero (rho_bar = 0) into a plain one.
    let d = rho_bar * v.lambda_prime(rho_bar)? / lambda_bar + 0.0;
    Ok(EquilibriumSummary { rho_bar, lambda_bar, d, flux_bar: rho_bar * lambda_bar })
}

/// Output-feedback influx for a measured outflux `y`:
/// `u = flux_bar + k (y - flux_bar)`.
pub fn feedback_influx(y: f64, cfg: &ClosedLoopConfig) -> Result<f64> {
    let eq = equilibrium_summary(cfg.rho_bar, &cfg.velocity)?;
    Ok(feedback_influx_with(y, cfg.k, eq.flux_bar))
}

/// Same map with the equilibrium flux precomputed (solver hot path).
#[inline]
pub fn feedback_influx_with(y: f64, k: f64, flux_bar: f64) -> f64 {
    flux_bar + k * (y - flux_bar)
}

/// Endpoint values, endpoint slopes, and total mass of an initial profile,
/// the data entering the C^1 closure conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C1ProfileData {
    pub rho_at_0: f64,
    pub rho_at_1: f64,
    pub drho_at_0: f64,
    pub drho_at_1: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityReport {
    pub order0_residual: f64,
    pub order1_residual: f64,
    pub order0_ok: bool,
    pub order1_ok: bool,
    pub tol: f64,
}

impl CompatibilityReport {
    pub fn ok(&self) -> bool {
        self.order0_ok && self.order1_ok
    }
}

/// Residuals of the two closure conditions a C^1 initial profile must satisfy
/// for the closed loop to admit a classical solution:
///
/// ```text
/// order 0:  lambda(I) (r0(0) - k r0(1)) - (1 - k) rb lambda(rb)            = 0
/// order 1:  lambda(I) (r0'(0) - k r0'(1))
///             - lambda'(I) (r0(0) - r0(1)) (r0(0) - k r0(1))               = 0
/// ```
///
/// with `I` the initial total mass. `tol` defaults to 1e-10.
pub fn check_c1_compatibility(
    data: &C1ProfileData,
    cfg: &ClosedLoopConfig,
    tol: Option<f64>,
) -> Result<CompatibilityReport> {
    let tol = tol.unwrap_or(1e-10);
    let lam_i = cfg.velocity.lambda(data.integral)?;
    let dlam_i = cfg.velocity.lambda_prime(data.integral)?;
    let eq = equilibrium_summary(cfg.rho_bar, &cfg.velocity)?;
    let jump = data.rho_at_0 - cfg.k * data.rho_at_1;
    let order0 = lam_i * jump - (1.0 - cfg.k) * eq.flux_bar;
    let order1 = lam_i * (data.drho_at_0 - cfg.k * data.drho_at_1)
        - dlam_i * (data.rho_at_0 - data.rho_at_1) * jump;
    Ok(CompatibilityReport {
        order0_residual: order0.abs(),
        order1_residual: order1.abs(),
        order0_ok: order0.abs() <= tol,
        order1_ok: order1.abs() <= tol,
        tol,
    })
}

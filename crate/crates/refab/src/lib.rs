//! refab: a numerical laboratory for a feedback-controlled transport loop.
//!
//! The object of study is a density on the unit circle of positions that is
//! carried at a uniform speed set by the current total load, with the inflow
//! at one marked point chosen as a gain `k` times the measured outflow. The
//! crate answers three kinds of question about that loop: does a given
//! equilibrium attract nearby states, how fast, and what certifies the decay.
//!
//! The best entry points are the examples, one per capability:
//!
//! * `equilibrium_balance` — velocity laws, equilibria, and the slope ratio
//!   `d` that controls everything downstream.
//! * `closed_loop_decay` — a full nonlinear run with norm histories and
//!   fitted decay rates.
//! * `growth_exponents` — roots of the characteristic function against the
//!   known lattice at decoupled speed.
//! * `stability_map` — an ASCII chart of the `(d, k)` plane comparing the
//!   spectral verdict with the closed-form region.
//! * `energy_certificates` — weighted energies that decrease step by step
//!   along trajectories, in both parameter regimes.
//! * `total_flushout` — the zero-gain loop emptying completely in finite
//!   time.
//! * `conserved_load` — the unit-gain loop preserving total load to machine
//!   precision.
//! * `solver_agreement` — the upwind scheme against characteristic tracing
//!   under grid refinement.
//! * `weak_form_residual` — integral-form residuals shrinking at first
//!   order.
//!
//! The same capabilities are scriptable through the `refab` binary
//! (`simulate`, `spectrum`, `region`, `lyapunov`, `extinction`), which reads
//! TOML job files and writes CSV/JSON bundles with gnuplot scripts.
//!
//! Module map: [`model`] holds velocity laws and loop configuration;
//! [`solver`] and [`characteristic`] integrate the dynamics two independent
//! ways; [`spectral`] locates growth exponents; [`lyapunov`] evaluates and
//! fits decay certificates; [`weak`] checks solutions in integral form;
//! [`region`] sweeps the parameter plane; [`scenario`], [`config`], and
//! [`export`] wire everything to files.

// Validation comparisons are written in negated form on purpose: a NaN
// parameter must fail the check, and the un-negated form would let it pass.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristic;
pub mod config;
pub mod error;
pub mod export;
pub mod lyapunov;
pub mod model;
pub mod region;
pub mod scenario;
pub mod solver;
pub mod spectral;
pub mod weak;

pub use error::{Error, Result};

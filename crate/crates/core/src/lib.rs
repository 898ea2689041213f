//! Closed-loop control of flat systems through homeostat models.
//!
//! A flat system is inverted along a reference trajectory to obtain nominal
//! controls. The tangent linearization of each implicit flat relation yields a
//! homeostat `d^ν Δy/dt^ν = F + α Δu`, whose lumped term `F` is estimated from
//! a sliding window of data and cancelled by an intelligent iP/iPD controller.
//!
//! Modules, bottom-up:
//!
//! * [`signals`]: time grids, sampled series, windows and piecewise-polynomial references.
//! * [`homeostat`]: implicit flat relations, channel derivation (order and gain), nominal controls.
//! * [`estimators`]: windowed integral estimators of `F` for orders 1 and 2.
//! * [`controllers`]: iP/iPD laws, pole placement, derivative estimation, per-channel stepping.
//! * [`plant`]: explicit ODE plants, RK4 with zero-order hold, the two-input example system.
//! * [`scenarios`]: declarative scenarios, the closed-loop runner, metrics and CSV export.

// `!(a < b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controllers;
pub mod estimators;
pub mod homeostat;
pub mod plant;
pub mod scenarios;
pub mod signals;

#[cfg(feature = "cli")]
pub mod cli;

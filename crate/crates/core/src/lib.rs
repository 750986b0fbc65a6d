//! Nested sampling with an order-statistics cross-check of single runs.
//!
//! The crate has three parts:
//!
//! * an NS engine ([`engine`]) with pluggable constrained-prior samplers
//!   ([`samplers`]) and analytic benchmark likelihoods ([`toys`]),
//! * evidence estimation and cross-run summary statistics ([`evidence`]),
//! * run diagnostics based on the uniformity of live-point insertion
//!   indexes ([`diagnostics`]), including reconstruction of the index
//!   sequence from a dead/birth-contour run file ([`runfile`]).
//!
//! Every iteration of a healthy NS run inserts its replacement point into
//! the sorted survivors at a position that is discrete-uniform on
//! `0..n_live`. Testing that uniformity (one-sample KS plus a rolling,
//! chunked variant) detects broken constrained-prior sampling and
//! likelihood plateaus from a single run, with no reference result needed.

pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod evidence;
pub mod math;
pub mod runfile;
pub mod samplers;
pub mod toys;

pub use error::{Error, Result};

/// A likelihood defined on the unit hypercube via a prior transform.
///
/// The engine works entirely in unit coordinates; `prior_transform` maps
/// them onto the model's parameter box. `log_likelihood` may return
/// `f64::NEG_INFINITY` where the likelihood is exactly zero (plateaus);
/// it must never return NaN.
pub trait Problem: Sync {
    fn dimension(&self) -> usize;

    /// Affine map from `[0,1]^d` onto the prior box.
    fn prior_transform(&self, unit: &[f64]) -> Vec<f64>;

    fn log_likelihood(&self, theta: &[f64]) -> f64;

    /// Likelihood evaluated directly at unit-cube coordinates.
    fn unit_log_likelihood(&self, unit: &[f64]) -> f64 {
        self.log_likelihood(&self.prior_transform(unit))
    }
}

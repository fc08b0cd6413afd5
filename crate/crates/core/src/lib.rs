//! Bearing-only tracking of a maneuvering target by an underwater vehicle.
//!
//! The crate is organised bottom-up:
//!
//! - [`vehicle`]: 3-DOF Fossen dynamics, RK4 and the flatness maps.
//! - [`sensing`]: bearing generation, pseudo-linear equations, the data window.
//! - [`gp`]: GP posterior from bearings, hyperparameter tuning, error bound.
//! - [`planner`]: receding-horizon endpoint optimization over a quadratic flat spline.
//! - [`baselines`]: pseudo-linear Kalman filter, polynomial regression, simple motion policies.
//! - [`harness`]: targets, the closed-loop episode, metrics and sweeps.
//! - [`config`], [`records`], [`plots`]: scenario files, CSV/JSON logs and SVG figures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod checks;
pub mod config;
pub mod error;
pub mod gp;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod planner;
pub mod plots;
pub mod records;
pub mod sensing;
pub mod vehicle;

pub use error::{GbtError, Result};

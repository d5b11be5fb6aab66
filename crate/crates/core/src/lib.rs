//! Gas source localization with a stable-fluids model in the loop.
//!
//! The crate simulates a 2D plume under a spatially constant, time-varying
//! wind ([`fluid`], [`wind`]), localizes the source from sparse readings with a
//! single enlarged simulation ([`ogs`]), runs the same inference online while
//! choosing waypoints ([`active`]), and provides the comparison baselines and
//! the synthetic experiment machinery ([`baselines`], [`harness`]).

pub mod active;
pub mod baselines;
pub mod error;
pub mod fluid;
pub mod grid;
pub mod harness;
pub mod io;
pub mod measurement;
pub mod ogs;
pub mod wind;

pub use error::{Error, Result};
pub use nalgebra::{Point2, Vector2};

//! Comparison localizers: GP regression, kernel DM+V/W and Bayesian
//! optimization with the simulator in the loop.

pub mod bo;
pub mod dmvw;
pub mod gp;

pub use bo::{bo_localize, Acquisition, BoEvaluation, BoResult};
pub use dmvw::{dmvw_map, DmvwMaps, DmvwParams};
pub use gp::{gp_fit, gp_peak, GpHyper, GpModel, Kernel};

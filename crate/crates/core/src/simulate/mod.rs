//! Ground-truth surfaces and point-pattern simulators.

mod beta;
mod grf;
mod ipp;
mod thomas;

pub use beta::{true_beta, ACTIVE_PREDICTORS};
pub use grf::{simulate_grf, GrfSampler, GrfSpec};
pub use ipp::{calibrate_intercept, simulate_ipp, thin};
pub use thomas::{simulate_thomas, ClusterField, ThomasRealization, ThomasSpec};

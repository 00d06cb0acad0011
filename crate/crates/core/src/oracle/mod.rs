//! Checks that do not rely on the closed-form equilibrium: a finite
//! population simulation and a discretised best-response dynamic.

mod best_response;
mod mc;

pub use best_response::{best_response_iterate, BestResponse, HistoryRow};
pub use mc::{
    mc_average_fitness, mc_average_fitness_replication, mc_phi, mc_phi_replication, summarize, McConfig, McEstimate,
    CI_Z99,
};

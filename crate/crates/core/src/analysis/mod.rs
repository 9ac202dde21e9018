//! Closed-form bounds and the Monte Carlo oracles that check them.

pub mod bounds;
pub mod montecarlo;
pub mod suites;

pub use bounds::{
    comm_cost, convergence_bound, error_prob_bound, exponential_race_error, failure_prob_bound,
    intermediate_error_bound, mean_energy, tau, BoundParams, CostScheme,
};
pub use montecarlo::{
    mc_error_prob, mc_mean_energy, mc_sign_flip, run_error_prob, sample_plus_energies, ErrorProbSetup,
    Estimate, VoterModel,
};
pub use suites::{run_suite, CheckRow, Suite};

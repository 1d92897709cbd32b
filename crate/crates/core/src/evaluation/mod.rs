//! Simulation designs, comparator methods and Monte-Carlo error-control metrics.

pub mod compare;
pub mod design;
pub mod experiment;

pub use compare::{adaptive_lasso_select, bh_select, classic_bh_select};
pub use design::{sample_beta, sigma_for_snr, simulate_response, snr_to_r2, toeplitz_design, BetaMode};
pub use experiment::{
    draw_replicate, run_experiment, DesignSource, ExperimentGrid, ExperimentResult, Method, MethodSummary,
    RepRecord, RunMetrics, SimulationConfig,
};

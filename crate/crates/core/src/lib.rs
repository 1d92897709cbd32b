//! Multi-split p-values for high-dimensional linear regression.
//!
//! Each of `B` random splits screens variables with a Lasso-type procedure on
//! one half and tests the survivors by least squares on the other half. The
//! per-split Bonferroni-adjusted p-values are aggregated over splits by
//! quantiles, which gives p-values usable for family-wise error, false
//! discovery rate or expected-false-positive control.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod multisplit;
pub mod regression;
pub mod report;
pub mod rng;
pub mod screening;

pub use data::{make_splits, read_dataset, validate_dataset, Dataset, ResponseColumn, SplitPlan, Table};
pub use error::{Error, Result};
pub use multisplit::{
    aggregate_adaptive, aggregate_fixed_gamma, analyze, Analysis, AnalysisSettings, Rule, ecdf_crossing_check, ev_select, fdr_select, fwer_select,
    run_multisplit, single_split_select, split_pvalues, AggregatedPValues, MultiSplitConfig, PValueMatrix,
    SelectionReport,
};
pub use regression::PValueMode;
pub use rng::RngSpec;
pub use screening::Screener;

//! Multi-split inference: per-split p-values, aggregation and selection.

pub mod aggregate;
pub mod analysis;
pub mod pvalues;
pub mod select;

pub use aggregate::{
    aggregate_adaptive, aggregate_adaptive_uncapped, aggregate_fixed_gamma, ecdf_bound, ecdf_crossing_check,
    empirical_quantile, AggregatedPValues, AggregationMode, EcdfCrossing,
};
pub use analysis::{analyze, Analysis, AnalysisSettings, Rule};
pub use pvalues::{run_multisplit, split_pvalues, MultiSplitConfig, PValueMatrix, SplitFlags, SplitRow};
pub use select::{
    ev_select, fdr_max_rank, fdr_select, fwer_select, single_split_select, step_up, ControlTarget, ErrorMeasure,
    SelectionReport, SelectionRule,
};

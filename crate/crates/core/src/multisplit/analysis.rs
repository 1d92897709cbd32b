//! The full pipeline on one data set: per-split p-values, aggregation and a
//! selection rule.

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_adaptive, aggregate_adaptive_uncapped};
use super::pvalues::{run_multisplit, MultiSplitConfig, PValueMatrix};
use super::select::{check_level, ev_select, fdr_select, fwer_select, single_split_select, SelectionReport};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Fwer,
    Fdr,
    FdrCorrected,
    Ev,
    SingleSplit,
}

impl std::str::FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fwer" => Ok(Rule::Fwer),
            "fdr" => Ok(Rule::Fdr),
            "fdr-corrected" => Ok(Rule::FdrCorrected),
            "ev" => Ok(Rule::Ev),
            "single-split" => Ok(Rule::SingleSplit),
            _ => Err(format!("unknown rule `{s}` (expected fwer, fdr, fdr-corrected, ev or single-split)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub multisplit: MultiSplitConfig,
    pub rule: Rule,
    pub alpha: f64,
    pub q: f64,
    pub gamma_min: f64,
    /// Divisor of the expected-false-positive rule.
    pub k: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            multisplit: MultiSplitConfig::default(),
            rule: Rule::Fwer,
            alpha: 0.05,
            q: 0.05,
            gamma_min: 0.05,
            k: 20.0,
        }
    }
}

impl AnalysisSettings {
    pub fn validate(&self) -> Result<()> {
        if self.multisplit.splits == 0 {
            return Err(Error::Invalid("the number of splits must be at least 1".into()));
        }
        check_level(self.alpha, "alpha")?;
        check_level(self.q, "q")?;
        check_level(self.gamma_min, "gamma_min")?;
        if !(self.k >= 1.0) {
            return Err(Error::Invalid(format!("K must be at least 1, got {}", self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub matrix: PValueMatrix,
    pub selection: SelectionReport,
}

/// For [`Rule::SingleSplit`] the selection uses split 1 only, which is also
/// the first row of `matrix`.
pub fn analyze(dataset: &Dataset, settings: &AnalysisSettings, rng: &RngSpec) -> Result<Analysis> {
    settings.validate()?;
    let matrix = run_multisplit(dataset, &settings.multisplit, rng)?;
    let selection = match settings.rule {
        Rule::Fwer => fwer_select(&aggregate_adaptive(&matrix, settings.gamma_min)?, settings.alpha)?,
        Rule::Fdr | Rule::FdrCorrected => fdr_select(
            &aggregate_adaptive(&matrix, settings.gamma_min)?,
            settings.q,
            settings.rule == Rule::FdrCorrected,
        )?,
        Rule::Ev => ev_select(&aggregate_adaptive_uncapped(&matrix, settings.gamma_min)?, settings.alpha, settings.k)?,
        Rule::SingleSplit => single_split_select(dataset, &settings.multisplit, settings.alpha, rng)?,
    };
    Ok(Analysis { matrix, selection })
}

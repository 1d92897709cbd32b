//! Comparator selectors: full-model Benjamini-Hochberg and the plain adaptive Lasso.

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::multisplit::select::check_level;
use crate::multisplit::{step_up, ControlTarget, ErrorMeasure, SelectionReport, SelectionRule};
use crate::regression::{coefficient_pvalues, ols_fit, PValueMode};
use crate::screening::{adaptive_lasso, LassoSettings};

/// Least squares on all variables and the Benjamini-Hochberg step-up with
/// thresholds `i q / p`. Needs `p < n`.
pub fn classic_bh_select(dataset: &Dataset, q: f64, mode: PValueMode) -> Result<SelectionReport> {
    check_level(q, "q")?;
    let (n, p) = (dataset.n(), dataset.p());
    if p >= n {
        return Err(Error::FullOlsInfeasible { n, p });
    }
    let fit = ols_fit(dataset.x(), dataset.y(), (0..p).collect())?;
    let pv = coefficient_pvalues(&fit, mode);
    Ok(bh_report(pv.values, q))
}

fn bh_report(pvalues: Vec<f64>, q: f64) -> SelectionReport {
    let p = pvalues.len();
    SelectionReport {
        selected: step_up(&pvalues, q / p as f64, p),
        rule: SelectionRule::ClassicBh { q },
        target: Some(ControlTarget { measure: ErrorMeasure::Fdr, level: q }),
        pvalues,
        aggregation: None,
        split_flags: Vec::new(),
    }
}

/// Benjamini-Hochberg on given raw p-values.
pub fn bh_select(pvalues: &[f64], q: f64) -> Result<SelectionReport> {
    check_level(q, "q")?;
    Ok(bh_report(pvalues.to_vec(), q))
}

/// Nonzero support of the adaptive Lasso fitted on all the data.
pub fn adaptive_lasso_select<R: Rng + ?Sized>(
    dataset: &Dataset,
    settings: &LassoSettings,
    rng: &mut R,
) -> Result<SelectionReport> {
    let fit = adaptive_lasso(dataset.x(), dataset.y(), settings, rng)?;
    Ok(SelectionReport {
        selected: (0..dataset.p()).filter(|&j| fit.coefficients[j] != 0.0).collect(),
        rule: SelectionRule::AdaptiveLasso,
        target: None,
        pvalues: Vec::new(),
        aggregation: None,
        split_flags: Vec::new(),
    })
}

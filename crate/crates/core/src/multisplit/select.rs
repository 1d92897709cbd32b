//! Selection rules on aggregated p-values.

use serde::{Deserialize, Serialize};

use super::aggregate::{AggregatedPValues, AggregationMode};
use super::pvalues::{split_pvalues, MultiSplitConfig, SplitFlags};
use crate::data::{Dataset, SplitPlan};
use crate::error::{Error, Result};
use crate::rng::RngSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SelectionRule {
    Fwer { alpha: f64 },
    Fdr { q: f64, corrected: bool },
    Ev { alpha: f64, k: f64 },
    SingleSplit { alpha: f64 },
    /// Benjamini-Hochberg on full-model least squares p-values.
    ClassicBh { q: f64 },
    /// Support of the cross-validated adaptive Lasso; no error control.
    AdaptiveLasso,
}

/// The error measure a rule controls and the level it targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlTarget {
    pub measure: ErrorMeasure,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMeasure {
    Fwer,
    Fdr,
    /// Expected number of false positives, `E[V]`.
    ExpectedFalsePositives,
}

impl std::fmt::Display for ControlTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.measure {
            ErrorMeasure::Fwer => write!(f, "FWER <= {}", self.level),
            ErrorMeasure::Fdr => write!(f, "FDR <= {}", self.level),
            ErrorMeasure::ExpectedFalsePositives => write!(f, "E[V] <= {}", self.level),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Selected variables, ascending.
    pub selected: Vec<usize>,
    pub rule: SelectionRule,
    /// `None` for rules without error control.
    pub target: Option<ControlTarget>,
    /// Per-variable p-values the rule acted on (empty when there are none).
    pub pvalues: Vec<f64>,
    /// `None` for the single-split rule.
    pub aggregation: Option<AggregationMode>,
    /// Per-split audit flags (one entry for single split, empty otherwise).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub split_flags: Vec<SplitFlags>,
}

pub(crate) fn check_level(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must lie in (0, 1), got {v}")))
    }
}

pub fn harmonic(p: usize) -> f64 {
    (1..=p).map(|i| 1.0 / i as f64).sum()
}

/// Step-up rule: with values sorted ascending (ties by index), the `h`
/// smallest where `h = max{i <= max_rank : P_(i) <= i * level}`. Returns
/// ascending indices.
pub fn step_up(pvalues: &[f64], level: f64, max_rank: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pvalues.len()).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let h = (1..=order.len().min(max_rank))
        .rev()
        .find(|&i| pvalues[order[i - 1]] <= i as f64 * level)
        .unwrap_or(0);
    let mut selected = order[..h].to_vec();
    selected.sort_unstable();
    selected
}

/// `{j : P_j <= alpha}`.
pub fn fwer_select(agg: &AggregatedPValues, alpha: f64) -> Result<SelectionReport> {
    check_level(alpha, "alpha")?;
    let selected = (0..agg.values.len()).filter(|&j| agg.values[j] <= alpha).collect();
    Ok(SelectionReport {
        selected,
        rule: SelectionRule::Fwer { alpha },
        target: Some(ControlTarget { measure: ErrorMeasure::Fwer, level: alpha }),
        pvalues: agg.values.clone(),
        aggregation: Some(agg.mode),
        split_flags: Vec::new(),
    })
}

/// Largest `i` with `i * q < 1`.
pub fn fdr_max_rank(q: f64) -> usize {
    let mut i = (1.0 / q).floor() as usize;
    while i > 0 && i as f64 * q >= 1.0 {
        i -= 1;
    }
    i
}

/// Step-up on already multiplicity-adjusted p-values at level `q`, or at
/// `q / sum_{i<=p} 1/i` when `corrected`. The uncorrected rule controls FDR at
/// `q * sum_{i<=p} 1/i`, the corrected one at `q`.
///
/// Only ranks with `i * q < 1` are considered, for both variants. Adjusted
/// p-values are capped at 1, so a threshold `i * q >= 1` would admit every
/// variable, and the error bound only covers thresholds below 1. Sharing the
/// rank range keeps the corrected selection inside the uncorrected one.
pub fn fdr_select(agg: &AggregatedPValues, q: f64, corrected: bool) -> Result<SelectionReport> {
    check_level(q, "q")?;
    let p = agg.values.len();
    let h = harmonic(p);
    let (level, target) = if corrected { (q / h, q) } else { (q, q * h) };
    Ok(SelectionReport {
        selected: step_up(&agg.values, level, fdr_max_rank(q)),
        rule: SelectionRule::Fdr { q, corrected },
        target: Some(ControlTarget { measure: ErrorMeasure::Fdr, level: target }),
        pvalues: agg.values.clone(),
        aggregation: Some(agg.mode),
        split_flags: Vec::new(),
    })
}

/// `{j : P_j / K <= alpha}` on the uncapped aggregate; `E[V] <= alpha * K`.
pub fn ev_select(uncapped_agg: &AggregatedPValues, alpha: f64, k: f64) -> Result<SelectionReport> {
    check_level(alpha, "alpha")?;
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::Invalid(format!("correction factor K must be >= 1, got {k}")));
    }
    if uncapped_agg.capped {
        return Err(Error::Invalid("expected-false-positive control needs the uncapped aggregate".into()));
    }
    let selected = (0..uncapped_agg.values.len())
        .filter(|&j| uncapped_agg.values[j] / k <= alpha)
        .collect();
    Ok(SelectionReport {
        selected,
        rule: SelectionRule::Ev { alpha, k },
        target: Some(ControlTarget { measure: ErrorMeasure::ExpectedFalsePositives, level: alpha * k }),
        pvalues: uncapped_agg.values.clone(),
        aggregation: Some(uncapped_agg.mode),
        split_flags: Vec::new(),
    })
}

/// One split (split number 1 of `rng`), rejecting tested variables whose
/// Bonferroni-adjusted p-value is at most `alpha`.
pub fn single_split_select(
    dataset: &Dataset,
    config: &MultiSplitConfig,
    alpha: f64,
    rng: &RngSpec,
) -> Result<SelectionReport> {
    check_level(alpha, "alpha")?;
    let plan = SplitPlan::draw(dataset.n(), 1, rng);
    let row = split_pvalues(dataset, &plan, config, rng)?;
    let selected = row.tested.iter().copied().filter(|&j| row.adjusted[j] <= alpha).collect();
    Ok(SelectionReport {
        selected,
        rule: SelectionRule::SingleSplit { alpha },
        target: Some(ControlTarget { measure: ErrorMeasure::Fwer, level: alpha }),
        pvalues: row.adjusted,
        aggregation: None,
        split_flags: vec![row.flags],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agg(values: &[f64]) -> AggregatedPValues {
        AggregatedPValues {
            values: values.to_vec(),
            mode: AggregationMode::Adaptive { gamma_min: 0.05 },
            capped: true,
        }
    }

    #[test]
    fn fwer_threshold() {
        assert_eq!(fwer_select(&agg(&[0.01, 0.06, 1.0]), 0.05).unwrap().selected, vec![0]);
        assert!(fwer_select(&agg(&[1.0; 4]), 0.05).unwrap().selected.is_empty());
        assert_eq!(fwer_select(&agg(&[0.05, 0.2]), 0.05).unwrap().selected, vec![0]);
        assert!(fwer_select(&agg(&[0.1]), 1.0).is_err());
    }

    #[test]
    fn fdr_step_up() {
        let r = fdr_select(&agg(&[0.01, 0.03, 0.5]), 0.05, false).unwrap();
        assert_eq!(r.selected, vec![0, 1]);
        assert!((r.target.unwrap().level - 0.05 * (1.0 + 0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert!(fdr_select(&agg(&[0.2, 0.3, 0.9]), 0.05, false).unwrap().selected.is_empty());
        // q' = 0.05 / (11/6) = 0.0272727...; 0.01 <= q', 0.03 > 2q'? 2q' = 0.0545 so both.
        let r = fdr_select(&agg(&[0.01, 0.03, 0.5]), 0.05, true).unwrap();
        assert_eq!(r.selected, vec![0, 1]);
        // 40 * 0.05 >= 1: all-ones p-values must not be selected wholesale.
        assert!(fdr_select(&agg(&[1.0; 40]), 0.05, false).unwrap().selected.is_empty());
        let mut many = vec![1.0; 40];
        many[3] = 0.04;
        many[7] = 0.09;
        many[9] = 0.96;
        assert_eq!(fdr_select(&agg(&many), 0.05, false).unwrap().selected, vec![3, 7]);
        let r = fdr_select(&agg(&[0.03, 0.06, 0.5]), 0.05, true).unwrap();
        assert!(r.selected.is_empty());
        assert_eq!(r.target.unwrap().level, 0.05);
    }

    #[test]
    fn step_up_is_not_step_down() {
        // P_(1) fails its threshold but P_(2) passes, so both are selected.
        assert_eq!(step_up(&[0.08, 0.06], 0.05, 2), vec![0, 1]);
        assert!(step_up(&[0.08, 0.06], 0.05, 1).is_empty());
        assert_eq!(fdr_max_rank(0.05), 19);
        assert_eq!(fdr_max_rank(0.3), 3);
        assert_eq!(fdr_max_rank(0.25), 3);
    }

    #[test]
    fn ev_rule() {
        let u = AggregatedPValues { capped: false, ..agg(&[0.12, 0.6]) };
        let r = ev_select(&u, 0.05, 20.0).unwrap();
        assert_eq!(r.selected, vec![0, 1]);
        assert!((r.target.unwrap().level - 1.0).abs() < 1e-15);
        assert_eq!(r.target.unwrap().to_string(), "E[V] <= 1");
        assert!(ev_select(&agg(&[0.1]), 0.05, 20.0).is_err());
        assert!(ev_select(&u, 0.05, 0.5).is_err());
        // K = 1 agrees with the FWER rule wherever values are <= 1.
        let u = AggregatedPValues { capped: false, ..agg(&[0.01, 0.05, 0.3, 2.5]) };
        let ev = ev_select(&u, 0.05, 1.0).unwrap();
        let capped = agg(&[0.01, 0.05, 0.3, 1.0]);
        assert_eq!(ev.selected, fwer_select(&capped, 0.05).unwrap().selected);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn agg(values: Vec<f64>) -> AggregatedPValues {
        AggregatedPValues { values, mode: AggregationMode::Adaptive { gamma_min: 0.05 }, capped: true }
    }

    /// Distinct values in (0, 1], a fair share of them small.
    fn distinct_pvalues() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::btree_set(1u32..100_000, 1..40).prop_flat_map(|set| {
            let v: Vec<f64> = set.into_iter().map(|k| (k as f64 / 100_000.0).powi(3)).collect();
            Just(v).prop_shuffle()
        })
    }

    proptest! {
        #[test]
        fn corrected_fdr_is_a_subset(values in distinct_pvalues(), q in 0.001..0.5f64) {
            let loose = fdr_select(&agg(values.clone()), q, false).unwrap().selected;
            let strict = fdr_select(&agg(values), q, true).unwrap().selected;
            prop_assert!(strict.iter().all(|j| loose.contains(j)));
        }

        #[test]
        fn rules_follow_variables_under_relabeling(values in distinct_pvalues(), level in 0.001..0.5f64) {
            let p = values.len();
            // Reverse the labels.
            let relabeled: Vec<f64> = values.iter().rev().copied().collect();
            let map = |sel: Vec<usize>| {
                let mut v: Vec<usize> = sel.into_iter().map(|j| p - 1 - j).collect();
                v.sort_unstable();
                v
            };
            let a = fwer_select(&agg(values.clone()), level).unwrap().selected;
            let b = fwer_select(&agg(relabeled.clone()), level).unwrap().selected;
            prop_assert_eq!(map(b), a);
            for corrected in [false, true] {
                let a = fdr_select(&agg(values.clone()), level, corrected).unwrap().selected;
                let b = fdr_select(&agg(relabeled.clone()), level, corrected).unwrap().selected;
                prop_assert_eq!(map(b), a);
            }
        }

        #[test]
        fn step_up_selects_a_prefix_of_the_order(values in distinct_pvalues(), level in 0.001..0.5f64) {
            let sel = step_up(&values, level, values.len());
            let h = sel.len();
            let max_sel = sel.iter().map(|&j| values[j]).fold(0.0, f64::max);
            prop_assert!(values.iter().enumerate().all(|(j, &v)| sel.contains(&j) || v > max_sel));
            if h > 0 {
                prop_assert!(max_sel <= h as f64 * level);
            }
        }
    }
}

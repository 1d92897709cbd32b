//! Quantile aggregation of per-split p-values.
//!
//! The empirical quantile is the order statistic at position `ceil(gamma * B)`
//! (1-based). With that convention `Q_j(gamma) <= alpha` holds exactly when at
//! least a `gamma` fraction of splits have `P_j^(b) <= alpha * gamma`, and the
//! infimum over `gamma` in the adaptive aggregate has a closed form over the
//! order statistics.

use serde::{Deserialize, Serialize};

use super::pvalues::PValueMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AggregationMode {
    FixedGamma { gamma: f64 },
    Adaptive { gamma_min: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedPValues {
    pub values: Vec<f64>,
    pub mode: AggregationMode,
    /// False for the uncapped pipeline behind expected-false-positive control.
    pub capped: bool,
}

/// 1-based order-statistic position `ceil(gamma * b)`, clamped to `1..=b`.
///
/// Products within `1e-9` of an integer count as that integer, so `0.3 * 10`
/// selects position 3 despite rounding.
pub fn quantile_position(b: usize, gamma: f64) -> usize {
    let t = gamma * b as f64;
    let r = t.round();
    let k = if (t - r).abs() < 1e-9 { r } else { t.ceil() };
    (k as usize).clamp(1, b)
}

/// Type-1 empirical quantile of an ascending slice.
pub fn empirical_quantile(sorted_values: &[f64], gamma: f64) -> f64 {
    sorted_values[quantile_position(sorted_values.len(), gamma) - 1]
}

fn sorted(column: &[f64]) -> Vec<f64> {
    let mut v = column.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `q_gamma({P^(b) / gamma})` for one variable, before the cap at 1.
///
/// When `gamma * B` is (within `1e-9` of) an integer `k`, `gamma` is taken to
/// be exactly `k / B`, so `P_(k) * B / k` matches the adaptive infimum term.
pub fn fixed_gamma_value(column: &[f64], gamma: f64) -> f64 {
    let b = column.len();
    let q = empirical_quantile(&sorted(column), gamma);
    let t = gamma * b as f64;
    let k = t.round();
    if (t - k).abs() < 1e-9 && k >= 1.0 {
        q * b as f64 / k
    } else {
        q / gamma
    }
}

/// `1 - log(gamma_min)`.
pub fn adaptive_factor(gamma_min: f64) -> f64 {
    1.0 - gamma_min.ln()
}

/// First admissible order-statistic position, `floor(gamma_min * B) + 1`.
pub fn min_position(b: usize, gamma_min: f64) -> usize {
    let t = gamma_min * b as f64;
    let r = t.round();
    let f = if (t - r).abs() < 1e-9 { r } else { t.floor() };
    f as usize + 1
}

/// `inf_{gamma in (gamma_min, 1)} q_gamma({P^(b) / gamma})`, i.e.
/// `min_{k >= k_min} P_(k) * B / k`.
pub fn adaptive_infimum(column: &[f64], gamma_min: f64) -> f64 {
    let s = sorted(column);
    let b = s.len();
    (min_position(b, gamma_min)..=b)
        .map(|k| s[k - 1] * b as f64 / k as f64)
        .fold(f64::INFINITY, f64::min)
}

fn check_gamma(gamma: f64, what: &str) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{what} must lie in (0, 1), got {gamma}")))
    }
}

pub fn aggregate_fixed_gamma(matrix: &PValueMatrix, gamma: f64) -> Result<AggregatedPValues> {
    check_gamma(gamma, "gamma")?;
    let values = (0..matrix.p())
        .map(|j| fixed_gamma_value(&matrix.column(j), gamma).min(1.0))
        .collect();
    Ok(AggregatedPValues { values, mode: AggregationMode::FixedGamma { gamma }, capped: true })
}

pub fn aggregate_adaptive(matrix: &PValueMatrix, gamma_min: f64) -> Result<AggregatedPValues> {
    check_gamma(gamma_min, "gamma_min")?;
    let c = adaptive_factor(gamma_min);
    let values = (0..matrix.p())
        .map(|j| (c * adaptive_infimum(&matrix.column(j), gamma_min)).min(1.0))
        .collect();
    Ok(AggregatedPValues { values, mode: AggregationMode::Adaptive { gamma_min }, capped: true })
}

/// Adaptive aggregate of the uncapped per-split values, itself left uncapped.
pub fn aggregate_adaptive_uncapped(matrix: &PValueMatrix, gamma_min: f64) -> Result<AggregatedPValues> {
    check_gamma(gamma_min, "gamma_min")?;
    let c = adaptive_factor(gamma_min);
    let values = (0..matrix.p())
        .map(|j| c * adaptive_infimum(&matrix.uncapped_column(j), gamma_min))
        .collect();
    Ok(AggregatedPValues { values, mode: AggregationMode::Adaptive { gamma_min }, capped: false })
}

/// Empirical distribution of one variable's adjusted p-values against the
/// rejection bound `f(p) = max{gamma_min, (1 - log gamma_min) p / alpha}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfCrossing {
    pub crossed: bool,
    /// `(P_(k), k / B)` for `k = 1..=B`.
    pub points: Vec<(f64, f64)>,
    pub alpha: f64,
    pub gamma_min: f64,
}

impl EcdfCrossing {
    pub fn bound(&self, p: f64) -> f64 {
        ecdf_bound(p, self.alpha, self.gamma_min)
    }
}

pub fn ecdf_bound(p: f64, alpha: f64, gamma_min: f64) -> f64 {
    gamma_min.max(adaptive_factor(gamma_min) / alpha * p)
}

/// Whether the ECDF reaches the bound: some `k >= k_min` with
/// `P_(k) <= alpha * (k / B) / (1 - log gamma_min)`.
pub fn ecdf_crossing_check(column: &[f64], alpha: f64, gamma_min: f64) -> Result<EcdfCrossing> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    check_gamma(gamma_min, "gamma_min")?;
    if column.is_empty() {
        return Err(Error::Invalid("empty p-value column".into()));
    }
    let s = sorted(column);
    let b = s.len() as f64;
    let c = adaptive_factor(gamma_min);
    let crossed = (min_position(s.len(), gamma_min)..=s.len())
        .any(|k| s[k - 1] <= alpha * (k as f64 / b) / c);
    let points = s.iter().enumerate().map(|(i, &v)| (v, (i + 1) as f64 / b)).collect();
    Ok(EcdfCrossing { crossed, points, alpha, gamma_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn matrix(col: &[f64]) -> PValueMatrix {
        PValueMatrix::from_values(DMatrix::from_column_slice(col.len(), 1, col)).unwrap()
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(empirical_quantile(&[0.1, 0.2, 0.3, 0.4], 0.5), 0.2);
        assert_eq!(empirical_quantile(&[0.1, 0.2, 0.3, 0.4], 1.0), 0.4);
        assert_eq!(empirical_quantile(&[0.7], 0.01), 0.7);
        assert_eq!(empirical_quantile(&[0.7], 1.0), 0.7);
        assert_eq!(quantile_position(10, 0.3), 3);
        assert_eq!(quantile_position(10, 0.31), 4);
    }

    #[test]
    fn fixed_gamma_examples() {
        let agg = aggregate_fixed_gamma(&matrix(&[0.04, 0.2, 0.4, 1.0]), 0.5).unwrap();
        assert!((agg.values[0] - 0.4).abs() < 1e-15);
        let agg = aggregate_fixed_gamma(&matrix(&[1.0; 7]), 0.5).unwrap();
        assert_eq!(agg.values[0], 1.0);
        let agg = aggregate_fixed_gamma(&matrix(&[0.3]), 0.5).unwrap();
        assert!((agg.values[0] - 0.6).abs() < 1e-15);
        assert!(aggregate_fixed_gamma(&matrix(&[0.3]), 1.0).is_err());
    }

    #[test]
    fn twice_the_median() {
        let col = [0.9, 0.01, 0.3, 0.05, 0.2];
        let agg = aggregate_fixed_gamma(&matrix(&col), 0.5).unwrap();
        assert!((agg.values[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn adaptive_examples() {
        assert!((adaptive_factor(0.05) - 3.996).abs() < 5e-4);
        let agg = aggregate_adaptive(&matrix(&[0.04, 0.2, 0.4, 1.0]), 0.05).unwrap();
        let expected = 0.16 * (1.0 - 0.05f64.ln());
        assert!((agg.values[0] - expected).abs() < 1e-12);
        assert!((agg.values[0] - 0.63936).abs() < 1e-4);
        let agg = aggregate_adaptive(&matrix(&[1.0; 5]), 0.05).unwrap();
        assert_eq!(agg.values[0], 1.0);
    }

    #[test]
    fn min_position_respects_open_interval() {
        assert_eq!(min_position(4, 0.05), 1);
        assert_eq!(min_position(20, 0.05), 2);
        assert_eq!(min_position(50, 0.05), 3);
        // gamma_min * B integral: position gamma_min * B itself is excluded.
        assert_eq!(min_position(40, 0.25), 11);
        assert_eq!(min_position(100, 0.29), 30);
    }

    #[test]
    fn ecdf_examples() {
        let col = [0.04, 0.2, 0.4, 1.0];
        assert!(ecdf_crossing_check(&col, 0.64, 0.05).unwrap().crossed);
        assert!(!ecdf_crossing_check(&col, 0.63, 0.05).unwrap().crossed);
        assert!(!ecdf_crossing_check(&[1.0; 10], 0.05, 0.05).unwrap().crossed);
        let e = ecdf_crossing_check(&col, 0.05, 0.05).unwrap();
        assert_eq!(e.points[1], (0.2, 0.5));
        assert_eq!(e.bound(0.0), 0.05);
        assert!((e.bound(0.01) - 0.01 * adaptive_factor(0.05) / 0.05).abs() < 1e-15);
    }

    #[test]
    fn uncapped_pipeline_keeps_large_values() {
        let mut m = matrix(&[0.5, 0.5]);
        m.uncapped = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let agg = aggregate_adaptive_uncapped(&m, 0.05).unwrap();
        // Candidates 3 * 2 / 1 and 4 * 2 / 2.
        assert!((agg.values[0] - 4.0 * adaptive_factor(0.05)).abs() < 1e-12);
        assert!(!agg.capped);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn pvalue() -> impl Strategy<Value = f64> {
        prop_oneof![3 => 1e-6..1.0f64, 1 => Just(1.0)]
    }

    fn column() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(pvalue(), 1..60)
    }

    proptest! {
        #[test]
        fn row_order_does_not_matter(col in column(), seed in any::<u64>(), gamma in 0.01..0.99f64) {
            let mut shuffled = col.clone();
            let len = shuffled.len();
            // Deterministic Fisher-Yates from the seed.
            let mut state = seed | 1;
            for i in (1..len).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                shuffled.swap(i, (state % (i as u64 + 1)) as usize);
            }
            prop_assert_eq!(adaptive_infimum(&col, gamma), adaptive_infimum(&shuffled, gamma));
            prop_assert_eq!(fixed_gamma_value(&col, gamma), fixed_gamma_value(&shuffled, gamma));
        }

        #[test]
        fn quantile_rejection_matches_split_fraction(col in column(), gamma in 0.01..0.99f64, alpha in 0.001..0.5f64) {
            let b = col.len() as f64;
            let q = fixed_gamma_value(&col, gamma).min(1.0);
            let pi = col.iter().filter(|&&v| v <= alpha * gamma).count() as f64 / b;
            // Rounding can only bite exactly at the boundary.
            let s = sorted(&col);
            let at_edge = (s[quantile_position(col.len(), gamma) - 1] - alpha * gamma).abs() < 1e-12
                || ((gamma * b) - (gamma * b).round()).abs() < 1e-9;
            if !at_edge {
                prop_assert_eq!(q <= alpha, pi >= gamma);
            }
        }

        #[test]
        fn crossing_verdict_matches_aggregate(col in column(), alpha in 0.001..0.5f64, gamma_min in 0.01..0.5f64) {
            let m = PValueMatrix::from_values(DMatrix::from_column_slice(col.len(), 1, &col)).unwrap();
            let p = aggregate_adaptive(&m, gamma_min).unwrap().values[0];
            let crossed = ecdf_crossing_check(&col, alpha, gamma_min).unwrap().crossed;
            let c = adaptive_factor(gamma_min);
            let edge = (p - alpha).abs() <= 1e-12 * c;
            if !edge {
                prop_assert_eq!(crossed, p <= alpha);
            }
        }

        #[test]
        fn appended_ones_row_recomputes_exactly(col in column(), gamma_min in 0.01..0.5f64) {
            let mut longer = col.clone();
            longer.push(1.0);
            let b = longer.len();
            let s = sorted(&longer);
            let k_min = (gamma_min * b as f64).floor() as usize + 1;
            let expect = (k_min.max(1)..=b).map(|k| s[k - 1] * b as f64 / k as f64).fold(f64::INFINITY, f64::min);
            let edge = ((gamma_min * b as f64) - (gamma_min * b as f64).round()).abs() < 1e-9;
            if !edge {
                prop_assert_eq!(adaptive_infimum(&longer, gamma_min), expect);
            }
        }

        #[test]
        fn aggregates_are_valid_pvalues(col in column(), gamma_min in 0.01..0.99f64) {
            let m = PValueMatrix::from_values(DMatrix::from_column_slice(col.len(), 1, &col)).unwrap();
            let p = aggregate_adaptive(&m, gamma_min).unwrap().values[0];
            prop_assert!(p > 0.0 && p <= 1.0);
            // Never below the smallest per-split value times the factor.
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(p >= (min * adaptive_factor(gamma_min)).min(1.0) * (1.0 - 1e-12));
        }
    }
}

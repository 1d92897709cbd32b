//! Per-split adjusted p-values and the `B x p` matrix they form.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_splits, Dataset, SplitPlan};
use crate::error::{Error, Result};
use crate::regression::{coefficient_pvalues, dependent_columns, ols_fit, PValueMode};
use crate::rng::{RngSpec, Stream};
use crate::screening::{screen, LassoSettings, ScreenFlags, Screener};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiSplitConfig {
    /// Number of random splits `B`.
    pub splits: usize,
    pub screener: Screener,
    pub pvalue_mode: PValueMode,
    pub lasso: LassoSettings,
}

impl Default for MultiSplitConfig {
    fn default() -> Self {
        MultiSplitConfig {
            splits: 50,
            screener: Screener::Adap,
            pvalue_mode: PValueMode::Normal,
            lasso: LassoSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitFlags {
    pub screen: ScreenFlags,
    /// Columns dropped to restore full rank on the testing half.
    pub rank_dropped: Vec<usize>,
    /// Fitted coefficients with zero standard error.
    pub degenerate_se: Vec<usize>,
}

/// One split's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRow {
    pub split_id: usize,
    /// Variables tested by least squares, ascending.
    pub tested: Vec<usize>,
    /// Unadjusted p-values, 1 outside `tested`.
    pub raw: Vec<f64>,
    /// `min(raw * |tested|, 1)`; all ones when nothing was tested.
    pub adjusted: Vec<f64>,
    /// `raw * max(|tested|, 1)` without the cap at 1.
    pub uncapped: Vec<f64>,
    pub flags: SplitFlags,
}

/// Screen on the first half of `plan`, test on the second half.
pub fn split_pvalues(
    dataset: &Dataset,
    plan: &SplitPlan,
    config: &MultiSplitConfig,
    rng: &RngSpec,
) -> Result<SplitRow> {
    let p = dataset.p();
    let stream = match config.screener {
        Screener::Random(_) => Stream::RandomScreen,
        _ => Stream::CvFolds,
    };
    let mut sub = rng.substream(stream, plan.split_id as u64);
    let x_in = dataset.rows_x(&plan.in_indices);
    let y_in = dataset.rows_y(&plan.in_indices);
    let screened = screen(
        config.screener,
        &x_in,
        &y_in,
        dataset.n(),
        plan.out_indices.len(),
        &config.lasso,
        &mut sub,
    )?;

    let mut flags = SplitFlags { screen: screened.flags, ..SplitFlags::default() };
    let mut tested = screened.indices.clone();
    let y_out = dataset.rows_y(&plan.out_indices);
    let mut x_out = dataset.submatrix(&plan.out_indices, &tested);
    while !tested.is_empty() {
        let bad = dependent_columns(&x_out);
        if bad.is_empty() {
            break;
        }
        // Weakest involved column goes first; ties drop the higher index.
        let drop = *bad
            .iter()
            .min_by(|&&a, &&b| {
                screened.scores[tested[a]]
                    .abs()
                    .total_cmp(&screened.scores[tested[b]].abs())
                    .then(tested[b].cmp(&tested[a]))
            })
            .unwrap();
        flags.rank_dropped.push(tested[drop]);
        tested.remove(drop);
        x_out = x_out.remove_column(drop);
    }

    let mut raw = vec![1.0; p];
    if !tested.is_empty() {
        let fit = ols_fit(&x_out, &y_out, tested.clone())?;
        let pv = coefficient_pvalues(&fit, config.pvalue_mode);
        for (i, &j) in tested.iter().enumerate() {
            raw[j] = pv.values[i];
            if pv.degenerate[i] {
                flags.degenerate_se.push(j);
            }
        }
    }
    let factor = tested.len().max(1) as f64;
    let adjusted = raw.iter().map(|&v| (v * factor).min(1.0)).collect();
    let uncapped = raw.iter().map(|&v| v * factor).collect();
    Ok(SplitRow { split_id: plan.split_id, tested, raw, adjusted, uncapped, flags })
}

/// Adjusted p-values of all splits.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueMatrix {
    /// `B x p`, entries in `(0, 1]`.
    pub values: DMatrix<f64>,
    /// `B x p`, the same without the cap at 1.
    pub uncapped: DMatrix<f64>,
    pub split_ids: Vec<usize>,
    /// Tested set of every split.
    pub tested: Vec<Vec<usize>>,
    pub flags: Vec<SplitFlags>,
}

impl PValueMatrix {
    pub fn from_rows(rows: Vec<SplitRow>) -> Result<Self> {
        let b = rows.len();
        if b == 0 {
            return Err(Error::Invalid("no splits".into()));
        }
        let p = rows[0].adjusted.len();
        let values = DMatrix::from_fn(b, p, |i, j| rows[i].adjusted[j]);
        let uncapped = DMatrix::from_fn(b, p, |i, j| rows[i].uncapped[j]);
        let mut split_ids = Vec::with_capacity(b);
        let mut tested = Vec::with_capacity(b);
        let mut flags = Vec::with_capacity(b);
        for row in rows {
            split_ids.push(row.split_id);
            tested.push(row.tested);
            flags.push(row.flags);
        }
        Ok(PValueMatrix { values, uncapped, split_ids, tested, flags })
    }

    /// Matrix of adjusted values only (the uncapped copy mirrors it).
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Invalid("empty p-value matrix".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::Invalid(format!("adjusted p-value {v} outside (0, 1]")));
        }
        let b = values.nrows();
        Ok(PValueMatrix {
            uncapped: values.clone(),
            values,
            split_ids: (1..=b).collect(),
            tested: vec![Vec::new(); b],
            flags: vec![SplitFlags::default(); b],
        })
    }

    pub fn splits(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn uncapped_column(&self, j: usize) -> Vec<f64> {
        self.uncapped.column(j).iter().copied().collect()
    }

    /// Per-variable audit counts across splits.
    pub fn variable_flags(&self) -> Vec<VariableFlags> {
        let mut out = vec![VariableFlags::default(); self.p()];
        for (tested, flags) in self.tested.iter().zip(&self.flags) {
            for &j in tested {
                out[j].tested += 1;
            }
            for &j in &flags.rank_dropped {
                out[j].rank_dropped += 1;
            }
            for &j in &flags.degenerate_se {
                out[j].degenerate_se += 1;
            }
        }
        out
    }

    pub fn split_summary(&self) -> SplitSummary {
        SplitSummary {
            splits: self.splits(),
            empty_screens: self.flags.iter().filter(|f| f.screen.empty).count(),
            truncated_screens: self.flags.iter().filter(|f| f.screen.truncated).count(),
            undersized_screens: self.flags.iter().filter(|f| f.screen.undersized).count(),
            rank_repairs: self.flags.iter().filter(|f| !f.rank_dropped.is_empty()).count(),
            tested_sizes: self.tested.iter().map(Vec::len).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableFlags {
    /// Splits in which the variable was tested.
    pub tested: usize,
    pub rank_dropped: usize,
    pub degenerate_se: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub splits: usize,
    pub empty_screens: usize,
    pub truncated_screens: usize,
    pub undersized_screens: usize,
    pub rank_repairs: usize,
    pub tested_sizes: Vec<usize>,
}

/// All `B` splits, evaluated in parallel. Output depends only on the inputs.
pub fn run_multisplit(dataset: &Dataset, config: &MultiSplitConfig, rng: &RngSpec) -> Result<PValueMatrix> {
    let plans = make_splits(dataset.n(), config.splits, rng)?;
    let rows = plans
        .par_iter()
        .map(|plan| split_pvalues(dataset, plan, config, rng))
        .collect::<Result<Vec<_>>>()?;
    PValueMatrix::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn toy(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = x.column(0) * 3.0 + x.column(1) * 2.0 + noise;
        Dataset::new(y, x, None).unwrap()
    }

    #[test]
    fn bonferroni_arithmetic() {
        // Random screening of size 10; the adjusted values must be raw * 10 capped.
        let d = toy(60, 30, 1);
        let cfg = MultiSplitConfig { screener: Screener::Random(10), ..MultiSplitConfig::default() };
        let plan = SplitPlan::draw(60, 1, &RngSpec::new(3));
        let row = split_pvalues(&d, &plan, &cfg, &RngSpec::new(3)).unwrap();
        assert_eq!(row.tested.len(), 10);
        for j in 0..30 {
            if row.tested.contains(&j) {
                assert_eq!(row.adjusted[j], (row.raw[j] * 10.0).min(1.0));
                assert_eq!(row.uncapped[j], row.raw[j] * 10.0);
            } else {
                assert_eq!(row.adjusted[j], 1.0);
                assert_eq!(row.raw[j], 1.0);
            }
        }
        assert!((0.004f64 * 10.0 - 0.04).abs() < 1e-15);
        assert_eq!((0.3f64 * 5.0).min(1.0), 1.0);
    }

    #[test]
    fn rank_repair_drops_duplicate() {
        let mut d = toy(40, 6, 2);
        let mut x = d.x().clone();
        let c = x.column(0).clone_owned();
        x.set_column(5, &c);
        d = Dataset::new(d.y().clone(), x, None).unwrap();
        let cfg = MultiSplitConfig { screener: Screener::Random(6), ..MultiSplitConfig::default() };
        let plan = SplitPlan::draw(40, 1, &RngSpec::new(1));
        let row = split_pvalues(&d, &plan, &cfg, &RngSpec::new(1)).unwrap();
        assert_eq!(row.flags.rank_dropped, vec![5]);
        assert_eq!(row.tested, vec![0, 1, 2, 3, 4]);
        assert_eq!(row.adjusted[5], 1.0);
    }

    #[test]
    fn matrix_is_deterministic_and_valid() {
        let d = toy(50, 20, 3);
        let cfg = MultiSplitConfig { splits: 6, screener: Screener::Cv, ..MultiSplitConfig::default() };
        let a = run_multisplit(&d, &cfg, &RngSpec::new(10)).unwrap();
        let b = run_multisplit(&d, &cfg, &RngSpec::new(10)).unwrap();
        assert_eq!(a, b);
        assert!(a.values.iter().all(|&v| v > 0.0 && v <= 1.0));
        for (i, tested) in a.tested.iter().enumerate() {
            assert!(tested.len() <= 13);
            for j in 0..20 {
                if !tested.contains(&j) {
                    assert_eq!(a.values[(i, j)], 1.0);
                }
            }
        }
        assert!(a.column(0).iter().all(|&v| v < 1e-3));
    }

    #[test]
    fn from_values_validates_range() {
        assert!(PValueMatrix::from_values(DMatrix::from_element(2, 2, 0.0)).is_err());
        assert!(PValueMatrix::from_values(DMatrix::from_element(2, 2, 1.0)).is_ok());
    }
}

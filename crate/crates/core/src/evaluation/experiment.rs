//! Monte-Carlo experiments comparing selection methods on simulated data.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compare::{adaptive_lasso_select, classic_bh_select};
use super::design::{sample_beta, sigma_for_snr, simulate_response, toeplitz_design, BetaMode};
use crate::data::{read_table, Dataset};
use crate::error::{Error, Result};
use crate::multisplit::{
    aggregate_adaptive, aggregate_adaptive_uncapped, aggregate_fixed_gamma, ev_select, fdr_select, fwer_select,
    run_multisplit, MultiSplitConfig, PValueMatrix,
};
use crate::regression::PValueMode;
use crate::rng::{RngSpec, Stream};
use crate::screening::{LassoSettings, Screener};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Adaptive aggregate, `P_j <= alpha`.
    MultiFwer,
    /// Fixed-gamma aggregate `Q_j(gamma)`, `<= alpha`.
    MultiFixedGamma,
    /// Step-up on the adaptive aggregate at level `q`.
    MultiFdr,
    /// Step-up at `q / sum 1/i`.
    MultiFdrCorrected,
    /// Uncapped adaptive aggregate, `P_j / K <= alpha`.
    MultiEv,
    SingleSplit,
    AdaptiveLasso,
    ClassicBh,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MultiFwer => "multi_fwer",
            Method::MultiFixedGamma => "multi_fixed_gamma",
            Method::MultiFdr => "multi_fdr",
            Method::MultiFdrCorrected => "multi_fdr_corrected",
            Method::MultiEv => "multi_ev",
            Method::SingleSplit => "single_split",
            Method::AdaptiveLasso => "adaptive_lasso",
            Method::ClassicBh => "classic_bh",
        }
    }

    fn needs_splits(self) -> bool {
        !matches!(self, Method::AdaptiveLasso | Method::ClassicBh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignSource {
    /// Fresh Toeplitz Gaussian design in every replicate.
    Toeplitz,
    /// Fixed design read from CSV (every column is a predictor), reused across replicates.
    Csv {
        path: PathBuf,
        #[serde(default = "default_true")]
        has_header: bool,
        #[serde(default = "default_delimiter")]
        delimiter: char,
    },
}

fn default_true() -> bool {
    true
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    /// Number of active variables.
    pub s: usize,
    pub beta_mode: BetaMode,
    pub snr: f64,
    pub reps: usize,
    pub splits: usize,
    pub screener: Screener,
    pub alpha: f64,
    pub q: f64,
    pub gamma_min: f64,
    pub fixed_gamma: f64,
    pub ev_k: f64,
    pub pvalue_mode: PValueMode,
    pub design: DesignSource,
    pub lasso: LassoSettings,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 100,
            p: 100,
            rho: 0.5,
            s: 5,
            beta_mode: BetaMode::Uniform,
            snr: 4.0,
            reps: 50,
            splits: 50,
            screener: Screener::Adap,
            alpha: 0.05,
            q: 0.05,
            gamma_min: 0.05,
            fixed_gamma: 0.5,
            ev_k: 20.0,
            pvalue_mode: PValueMode::Normal,
            design: DesignSource::Toeplitz,
            lasso: LassoSettings::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if self.s > self.p {
            return bad(format!("s = {} exceeds p = {}", self.s, self.p));
        }
        if !(self.snr > 0.0) {
            return bad(format!("snr must be positive, got {}", self.snr));
        }
        if self.reps == 0 || self.splits == 0 {
            return bad("reps and splits must be at least 1".into());
        }
        if self.n < 4 {
            return bad(format!("n must be at least 4, got {}", self.n));
        }
        for (name, v) in [("alpha", self.alpha), ("q", self.q), ("gamma_min", self.gamma_min), ("fixed_gamma", self.fixed_gamma)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if !(self.ev_k >= 1.0) {
            return bad(format!("ev_k must be >= 1, got {}", self.ev_k));
        }
        Ok(())
    }

    pub fn multisplit(&self) -> MultiSplitConfig {
        MultiSplitConfig {
            splits: self.splits,
            screener: self.screener,
            pvalue_mode: self.pvalue_mode,
            lasso: self.lasso,
        }
    }
}

/// Outcome of one method on one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub selected: usize,
    /// At least one false positive.
    pub fwer_indicator: bool,
    /// `V / max(1, R)`.
    pub fdp: f64,
}

impl RunMetrics {
    pub fn from_selection(selected: &[usize], beta: &DVector<f64>) -> Self {
        let tp = selected.iter().filter(|&&j| beta[j] != 0.0).count();
        let fp = selected.len() - tp;
        RunMetrics {
            true_positives: tp,
            false_positives: fp,
            selected: selected.len(),
            fwer_indicator: fp > 0,
            fdp: fp as f64 / selected.len().max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub method: Method,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Replicates that produced a selection.
    pub reps: usize,
    pub failures: usize,
    pub mean_tp: f64,
    pub se_tp: f64,
    pub mean_fp: f64,
    pub se_fp: f64,
    pub mean_selected: f64,
    /// Empirical `P(V > 0)`.
    pub fwer: f64,
    pub se_fwer: f64,
    /// Empirical `E[V / max(1, R)]`.
    pub fdr: f64,
    pub se_fdr: f64,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (m, f64::NAN);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

pub fn summarize(records: &[RepRecord], methods: &[Method]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&method| {
            let ok: Vec<RunMetrics> =
                records.iter().filter(|r| r.method == method).filter_map(|r| r.metrics).collect();
            let failures = records.iter().filter(|r| r.method == method && r.metrics.is_none()).count();
            let col = |f: &dyn Fn(&RunMetrics) -> f64| ok.iter().map(f).collect::<Vec<f64>>();
            let (mean_tp, se_tp) = mean_se(&col(&|m| m.true_positives as f64));
            let (mean_fp, se_fp) = mean_se(&col(&|m| m.false_positives as f64));
            let (mean_selected, _) = mean_se(&col(&|m| m.selected as f64));
            let (fwer, se_fwer) = mean_se(&col(&|m| if m.fwer_indicator { 1.0 } else { 0.0 }));
            let (fdr, se_fdr) = mean_se(&col(&|m| m.fdp));
            MethodSummary {
                method,
                reps: ok.len(),
                failures,
                mean_tp,
                se_tp,
                mean_fp,
                se_fp,
                mean_selected,
                fwer,
                se_fwer,
                fdr,
                se_fdr,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: SimulationConfig,
    pub records: Vec<RepRecord>,
    pub summary: Vec<MethodSummary>,
}

impl ExperimentResult {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }
}

/// Reads a fixed design for [`DesignSource::Csv`].
pub fn load_design(source: &DesignSource) -> Result<Option<DMatrix<f64>>> {
    match source {
        DesignSource::Toeplitz => Ok(None),
        DesignSource::Csv { path, has_header, delimiter } => {
            let delimiter = u8::try_from(*delimiter)
                .map_err(|_| Error::Config(format!("delimiter `{delimiter}` is not a single byte")))?;
            let table = read_table(path, *has_header, delimiter)?;
            let n = table.rows.len();
            let p = table.ncols();
            if let Some((i, row)) = table.rows.iter().enumerate().find(|(_, r)| r.len() != p) {
                return Err(Error::Invalid(format!("design row {} has {} fields, expected {p}", i + 1, row.len())));
            }
            for (i, row) in table.rows.iter().enumerate() {
                if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { row: i + 1, col: j + 1 });
                }
            }
            Ok(Some(DMatrix::from_fn(n, p, |i, j| table.rows[i][j])))
        }
    }
}

/// Noise variance for a fixed design: the sample variance of `X beta` over `snr`.
fn sigma_for_fixed_design(x: &DMatrix<f64>, beta: &DVector<f64>, snr: f64) -> Result<f64> {
    let signal = x * beta;
    let m = signal.mean();
    let var = signal.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / signal.len() as f64;
    if !(var > 0.0) {
        return Err(Error::ZeroSignal);
    }
    Ok(var / snr)
}

/// The simulated data of one replicate.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub dataset: Dataset,
    pub beta: DVector<f64>,
    pub sigma_sq: f64,
}

/// Draws replicate data from `rng`. With `s = 0` the noise variance is 1.
pub fn draw_replicate(config: &SimulationConfig, fixed: Option<&DMatrix<f64>>, rng: &RngSpec) -> Result<Replicate> {
    let x = match fixed {
        Some(x) => x.clone(),
        None => toeplitz_design(config.n, config.p, config.rho, &mut rng.substream(Stream::Design, 0))?,
    };
    let p = x.ncols();
    let beta = sample_beta(p, config.s, config.beta_mode, &mut rng.substream(Stream::BetaSampling, 0))?;
    let sigma_sq = if config.s == 0 {
        1.0
    } else if fixed.is_some() {
        sigma_for_fixed_design(&x, &beta, config.snr)?
    } else {
        sigma_for_snr(&beta, config.rho, config.snr)?
    };
    let y = simulate_response(&x, &beta, sigma_sq, &mut rng.substream(Stream::SimulationNoise, 0));
    Ok(Replicate { dataset: Dataset::new(y, x, None)?, beta, sigma_sq })
}

fn multi_selection(method: Method, matrix: &PValueMatrix, config: &SimulationConfig) -> Result<Vec<usize>> {
    Ok(match method {
        Method::MultiFwer => fwer_select(&aggregate_adaptive(matrix, config.gamma_min)?, config.alpha)?.selected,
        Method::MultiFixedGamma => {
            fwer_select(&aggregate_fixed_gamma(matrix, config.fixed_gamma)?, config.alpha)?.selected
        }
        Method::MultiFdr => fdr_select(&aggregate_adaptive(matrix, config.gamma_min)?, config.q, false)?.selected,
        Method::MultiFdrCorrected => {
            fdr_select(&aggregate_adaptive(matrix, config.gamma_min)?, config.q, true)?.selected
        }
        Method::MultiEv => {
            ev_select(&aggregate_adaptive_uncapped(matrix, config.gamma_min)?, config.alpha, config.ev_k)?.selected
        }
        Method::SingleSplit => {
            // Split 1 is what a single-split analysis with the same seed uses.
            (0..matrix.p()).filter(|&j| matrix.tested[0].contains(&j) && matrix.values[(0, j)] <= config.alpha).collect()
        }
        Method::AdaptiveLasso | Method::ClassicBh => unreachable!("not a split-based method"),
    })
}

/// Runs every method on one replicate's data.
pub fn run_replicate(
    config: &SimulationConfig,
    fixed: Option<&DMatrix<f64>>,
    methods: &[Method],
    rep: usize,
    rng: &RngSpec,
) -> Vec<RepRecord> {
    let record = |method: Method, outcome: Result<Vec<usize>>, beta: &DVector<f64>| match outcome {
        Ok(sel) => RepRecord { rep, method, metrics: Some(RunMetrics::from_selection(&sel, beta)), error: None },
        Err(e) => RepRecord { rep, method, metrics: None, error: Some(e.to_string()) },
    };
    let data = match draw_replicate(config, fixed, rng) {
        Ok(d) => d,
        Err(e) => {
            return methods
                .iter()
                .map(|&method| RepRecord { rep, method, metrics: None, error: Some(e.to_string()) })
                .collect()
        }
    };
    let matrix = if methods.iter().any(|m| m.needs_splits()) {
        Some(run_multisplit(&data.dataset, &config.multisplit(), rng))
    } else {
        None
    };
    methods
        .iter()
        .map(|&method| {
            let outcome = match method {
                Method::AdaptiveLasso => adaptive_lasso_select(
                    &data.dataset,
                    &config.lasso,
                    &mut rng.substream(Stream::CvFolds, 0),
                )
                .map(|r| r.selected),
                Method::ClassicBh => classic_bh_select(&data.dataset, config.q, config.pvalue_mode).map(|r| r.selected),
                m => match matrix.as_ref().expect("matrix computed for split methods") {
                    Ok(mx) => multi_selection(m, mx, config),
                    Err(e) => Err(Error::Invalid(format!("multi-split run failed: {e}"))),
                },
            };
            record(method, outcome, &data.beta)
        })
        .collect()
}

/// `config.reps` replicates, each from its own child seed; failures are
/// recorded per replicate and never abort the batch.
pub fn run_experiment(config: &SimulationConfig, methods: &[Method], rng: &RngSpec) -> Result<ExperimentResult> {
    config.validate()?;
    let fixed = load_design(&config.design)?;
    let mut cfg = config.clone();
    if let Some(x) = &fixed {
        cfg.n = x.nrows();
        cfg.p = x.ncols();
        cfg.validate()?;
    }
    let records: Vec<RepRecord> = (0..cfg.reps)
        .into_par_iter()
        .flat_map_iter(|rep| run_replicate(&cfg, fixed.as_ref(), methods, rep, &rng.child(rep as u64)))
        .collect();
    let summary = summarize(&records, methods);
    Ok(ExperimentResult { config: cfg, records, summary })
}

/// Accepts either a single value or a list in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// A grid of simulation settings, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    pub n: OneOrMany<usize>,
    pub p: OneOrMany<usize>,
    #[serde(default = "grid_defaults::rho")]
    pub rho: OneOrMany<f64>,
    pub s: OneOrMany<usize>,
    pub snr: OneOrMany<f64>,
    #[serde(default = "grid_defaults::beta_mode")]
    pub beta_mode: OneOrMany<BetaMode>,
    #[serde(default = "grid_defaults::screener")]
    pub screener: OneOrMany<Screener>,
    #[serde(default = "grid_defaults::reps")]
    pub reps: usize,
    #[serde(default = "grid_defaults::splits")]
    pub splits: usize,
    #[serde(default = "grid_defaults::level")]
    pub alpha: f64,
    #[serde(default = "grid_defaults::level")]
    pub q: f64,
    #[serde(default = "grid_defaults::level")]
    pub gamma_min: f64,
    #[serde(default = "grid_defaults::fixed_gamma")]
    pub fixed_gamma: f64,
    #[serde(default = "grid_defaults::ev_k")]
    pub ev_k: f64,
    #[serde(default)]
    pub pvalue_mode: PValueMode,
    #[serde(default = "grid_defaults::design")]
    pub design: DesignSource,
    #[serde(default = "grid_defaults::methods")]
    pub methods: Vec<Method>,
}

mod grid_defaults {
    use super::*;

    pub fn rho() -> OneOrMany<f64> {
        OneOrMany::One(0.5)
    }
    pub fn beta_mode() -> OneOrMany<BetaMode> {
        OneOrMany::One(BetaMode::Uniform)
    }
    pub fn screener() -> OneOrMany<Screener> {
        OneOrMany::One(Screener::Adap)
    }
    pub fn reps() -> usize {
        50
    }
    pub fn splits() -> usize {
        50
    }
    pub fn level() -> f64 {
        0.05
    }
    pub fn fixed_gamma() -> f64 {
        0.5
    }
    pub fn ev_k() -> f64 {
        20.0
    }
    pub fn design() -> DesignSource {
        DesignSource::Toeplitz
    }
    pub fn methods() -> Vec<Method> {
        vec![Method::MultiFwer, Method::SingleSplit]
    }
}

/// One grid cell: its position, settings and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub index: usize,
    pub config: SimulationConfig,
    pub rng: RngSpec,
}

impl ExperimentGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    /// Cartesian product in the order n, p, rho, s, snr, beta_mode, screener.
    pub fn cells(&self) -> Result<Vec<GridCell>> {
        let mut out = Vec::new();
        let master = RngSpec::new(self.seed);
        for n in self.n.values() {
            for p in self.p.values() {
                for rho in self.rho.values() {
                    for s in self.s.values() {
                        for snr in self.snr.values() {
                            for beta_mode in self.beta_mode.values() {
                                for screener in self.screener.values() {
                                    let config = SimulationConfig {
                                        n,
                                        p,
                                        rho,
                                        s,
                                        beta_mode,
                                        snr,
                                        reps: self.reps,
                                        splits: self.splits,
                                        screener,
                                        alpha: self.alpha,
                                        q: self.q,
                                        gamma_min: self.gamma_min,
                                        fixed_gamma: self.fixed_gamma,
                                        ev_k: self.ev_k,
                                        pvalue_mode: self.pvalue_mode,
                                        design: self.design.clone(),
                                        lasso: LassoSettings::default(),
                                    };
                                    config.validate()?;
                                    let index = out.len();
                                    out.push(GridCell { index, config, rng: master.child(index as u64) });
                                }
                            }
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("experiment grid is empty".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimulationConfig {
        SimulationConfig { n: 40, p: 30, s: 3, snr: 16.0, reps: 3, splits: 4, screener: Screener::Cv, ..SimulationConfig::default() }
    }

    #[test]
    fn metrics_arithmetic() {
        let mut beta = DVector::zeros(6);
        beta[0] = 1.0;
        beta[1] = 1.0;
        let m = RunMetrics::from_selection(&[0, 3, 4], &beta);
        assert_eq!((m.true_positives, m.false_positives, m.selected), (1, 2, 3));
        assert!(m.fwer_indicator);
        assert!((m.fdp - 2.0 / 3.0).abs() < 1e-15);
        let none = RunMetrics::from_selection(&[], &beta);
        assert_eq!(none.fdp, 0.0);
        assert!(!none.fwer_indicator);
    }

    #[test]
    fn experiment_is_reproducible_and_consistent() {
        let methods = [Method::MultiFwer, Method::MultiFdr, Method::SingleSplit, Method::ClassicBh];
        let a = run_experiment(&small(), &methods, &RngSpec::new(4)).unwrap();
        let b = run_experiment(&small(), &methods, &RngSpec::new(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 12);
        for r in &a.records {
            let m = r.metrics.expect("no failures in the small config");
            assert_eq!(m.true_positives + m.false_positives, m.selected);
            assert_eq!(m.fwer_indicator, m.false_positives >= 1);
            assert!(m.true_positives <= 3);
            assert!((0.0..=1.0).contains(&m.fdp));
        }
    }

    #[test]
    fn per_rep_failures_are_recorded() {
        // p >= n: the classic method fails every replicate, the batch still completes.
        let cfg = SimulationConfig { n: 30, p: 35, ..small() };
        let res = run_experiment(&cfg, &[Method::MultiFwer, Method::ClassicBh], &RngSpec::new(1)).unwrap();
        let bh = res.method(Method::ClassicBh).unwrap();
        assert_eq!((bh.reps, bh.failures), (0, 3));
        assert_eq!(res.method(Method::MultiFwer).unwrap().reps, 3);
    }

    #[test]
    fn single_split_matches_direct_selection() {
        let cfg = small();
        let rng = RngSpec::new(77).child(0);
        let recs = run_replicate(&cfg, None, &[Method::SingleSplit], 0, &rng);
        let data = draw_replicate(&cfg, None, &rng).unwrap();
        let direct =
            crate::multisplit::single_split_select(&data.dataset, &cfg.multisplit(), cfg.alpha, &rng).unwrap();
        assert_eq!(recs[0].metrics.unwrap(), RunMetrics::from_selection(&direct.selected, &data.beta));
    }

    #[test]
    fn grid_expansion() {
        let grid = ExperimentGrid::from_json(
            r#"{"seed": 1, "n": 100, "p": 100, "s": [5, 10], "snr": [0.25, 1, 4, 16],
                "beta_mode": ["uniform", "varying_strength"], "screener": ["fixed", {"random": 16}]}"#,
        )
        .unwrap();
        let cells = grid.cells().unwrap();
        assert_eq!(cells.len(), 32);
        assert_eq!(cells[0].config.splits, 50);
        assert_eq!(cells[1].config.screener, Screener::Random(16));
        assert_ne!(cells[0].rng, cells[1].rng);
        assert!(ExperimentGrid::from_json(r#"{"seed": 1, "n": 100, "p": 10, "s": 20, "snr": 1}"#)
            .unwrap()
            .cells()
            .is_err());
        assert!(ExperimentGrid::from_json(r#"{"seed": 1, "n": 100, "p": 10, "s": 2, "snr": 1, "bogus": 3}"#).is_err());
    }
}

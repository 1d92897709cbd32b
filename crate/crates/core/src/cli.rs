use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use multisplit::evaluation::experiment::{run_experiment, ExperimentGrid, ExperimentResult, GridCell};
use multisplit::evaluation::DesignSource;
use multisplit::multisplit::{aggregate_adaptive, ecdf_crossing_check, MultiSplitConfig, SelectionReport};
use multisplit::report::{self, RunManifest, VariableRow};
use multisplit::screening::LassoSettings;
use multisplit::{read_dataset, Analysis, AnalysisSettings, Error, PValueMode, ResponseColumn, RngSpec, Rule, Screener};

#[derive(Parser, Debug)]
#[command(name = "multisplit", version, about = "Multi-split p-values and error-controlled variable selection")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, env = "MULTISPLIT_THREADS", global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Multi-split p-values and a variable selection for a CSV data set.
    Analyze(AnalyzeArgs),
    /// Monte-Carlo error-control experiments over a JSON grid.
    Simulate(SimulateArgs),
    /// ECDF of one variable's per-split p-values against the rejection bound.
    Ecdf(EcdfArgs),
    /// Repeat the run recorded in a manifest.json.
    Rerun(RerunArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    /// CSV file with the response and the predictors.
    pub input: PathBuf,
    /// Response column, by header name or 1-based index.
    #[arg(long, default_value = "1")]
    pub response: String,
    /// The first row holds data, not column names.
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Center the response and every predictor before the analysis.
    #[arg(long)]
    pub center: bool,
    /// fixed, cv, adap or random:<k>.
    #[arg(long, default_value = "adap")]
    pub screener: Screener,
    /// Number of random splits.
    #[arg(short = 'B', long, default_value_t = 50)]
    pub splits: usize,
    /// fwer, fdr, fdr-corrected, ev or single-split.
    #[arg(long, default_value = "fwer")]
    pub rule: Rule,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    #[arg(long, default_value_t = 0.05)]
    pub gamma_min: f64,
    /// Divisor for the expected-false-positive rule.
    #[arg(short = 'K', long = "k", default_value_t = 20.0)]
    pub k: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// normal or t.
    #[arg(long, default_value = "normal")]
    pub pvalue_mode: PValueMode,
    /// Output directory.
    #[arg(long, short)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Experiment grid (JSON).
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the replicate count in the config.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, short)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EcdfArgs {
    /// pvalue_matrix.csv written by `analyze`.
    pub matrix: PathBuf,
    /// Variable name as in the matrix header.
    #[arg(long)]
    pub variable: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub gamma_min: f64,
    /// Points at which the bound is sampled on [0, 1].
    #[arg(long, default_value_t = 1001)]
    pub grid_points: usize,
    #[arg(long, short)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
}

/// An error together with the stage that raised it.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub error: Error,
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match &self.error {
            Error::Io { .. } | Error::Csv(_) => 3,
            e if e.is_numerical() => 4,
            _ => 2,
        }
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for multisplit::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

fn config_error(stage: &'static str, msg: impl Into<String>) -> Failure {
    Failure { stage, error: Error::Config(msg.into()) }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(config_error("setup", "--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| config_error("setup", e.to_string()))?;
    }
    match cli.command {
        Command::Analyze(a) => analyze(&a),
        Command::Simulate(s) => simulate(&s),
        Command::Ecdf(e) => ecdf(&e),
        Command::Rerun(r) => rerun(&r),
    }
}

fn hash_inputs(paths: &[&Path]) -> Result<BTreeMap<String, String>, Failure> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), report::file_sha256(p).stage("reading input")?)))
        .collect()
}

fn manifest_for<T: Serialize>(command: &str, args: &T, inputs: &[&Path]) -> Result<RunManifest, Failure> {
    let config = serde_json::to_value(args).map_err(|e| config_error("manifest", e.to_string()))?;
    Ok(RunManifest::new(command, config, hash_inputs(inputs)?))
}

fn delimiter_byte(c: char) -> Result<u8, Failure> {
    u8::try_from(c).map_err(|_| config_error("reading input", format!("delimiter `{c}` is not a single byte")))
}

#[derive(Serialize)]
struct SelectedVariable {
    index: usize,
    name: String,
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    control_target: Option<String>,
    selected: Vec<SelectedVariable>,
    n: usize,
    p: usize,
    splits: usize,
    split_summary: multisplit::multisplit::pvalues::SplitSummary,
    selection: &'a SelectionReport,
}

pub fn analyze(a: &AnalyzeArgs) -> Result<(), Failure> {
    let manifest = manifest_for("analyze", a, &[&a.input])?;
    let hash = manifest.sha256();

    let response: ResponseColumn = a.response.parse().expect("infallible");
    let dataset = read_dataset(&a.input, !a.no_header, delimiter_byte(a.delimiter)?, &response)
        .stage("reading input")?;
    let dataset = if a.center { dataset.centered() } else { dataset };
    let settings = AnalysisSettings {
        multisplit: MultiSplitConfig {
            splits: a.splits,
            screener: a.screener,
            pvalue_mode: a.pvalue_mode,
            lasso: LassoSettings::default(),
        },
        rule: a.rule,
        alpha: a.alpha,
        q: a.q,
        gamma_min: a.gamma_min,
        k: a.k,
    };
    settings.validate().stage("configuration")?;
    let Analysis { matrix, selection } = multisplit::analyze(&dataset, &settings, &RngSpec::new(a.seed)).stage("analysis")?;

    let flags = matrix.variable_flags();
    let names: Vec<String> = (0..dataset.p()).map(|j| dataset.name(j)).collect();
    let rows: Vec<VariableRow> = (0..dataset.p())
        .map(|j| VariableRow {
            name: names[j].clone(),
            pvalue: selection.pvalues[j],
            selected: selection.selected.contains(&j),
            tested_splits: flags[j].tested,
            rank_dropped: flags[j].rank_dropped,
            degenerate_se: flags[j].degenerate_se,
        })
        .collect();
    let summary = AnalyzeReport {
        control_target: selection.target.map(|t| t.to_string()),
        selected: selection.selected.iter().map(|&j| SelectedVariable { index: j + 1, name: names[j].clone() }).collect(),
        n: dataset.n(),
        p: dataset.p(),
        splits: matrix.splits(),
        split_summary: matrix.split_summary(),
        selection: &selection,
    };
    let files = [
        ("pvalues.csv", report::variables_csv(&rows, &hash)),
        ("pvalue_matrix.csv", report::matrix_csv(&matrix, &names, &hash)),
        ("selection.json", report::stamped_json(&summary, &hash)),
        ("manifest.json", manifest.to_json()),
    ];
    report::write_outputs(&a.out, &files).stage("writing output")?;

    match &summary.control_target {
        Some(t) => println!("{t}: {} of {} variables selected", selection.selected.len(), dataset.p()),
        None => println!("{} of {} variables selected", selection.selected.len(), dataset.p()),
    }
    for v in &summary.selected {
        println!("  {} (P = {})", v.name, report::format_float(selection.pvalues[v.index - 1]));
    }
    Ok(())
}

#[derive(Serialize)]
struct CellSummary<'a> {
    cell: usize,
    config: &'a multisplit::evaluation::SimulationConfig,
    summary: &'a [multisplit::evaluation::MethodSummary],
}

pub fn simulate(s: &SimulateArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&s.config)
        .map_err(|e| Failure { stage: "reading config", error: Error::io(&s.config, e) })?;
    let mut grid = ExperimentGrid::from_json(&text).stage("reading config")?;
    if let Some(seed) = s.seed {
        grid.seed = seed;
    }
    if let Some(reps) = s.reps {
        grid.reps = reps;
    }
    let mut inputs: Vec<&Path> = vec![&s.config];
    if let DesignSource::Csv { path, .. } = &grid.design {
        inputs.push(path);
    }
    let manifest = manifest_for("simulate", s, &inputs)?;
    let hash = manifest.sha256();

    let cells = grid.cells().stage("configuration")?;
    let mut results: Vec<(GridCell, ExperimentResult)> = Vec::with_capacity(cells.len());
    for cell in cells {
        let res = run_experiment(&cell.config, &grid.methods, &cell.rng).stage("simulation")?;
        eprintln!(
            "cell {}: n={} p={} s={} snr={} {:?} {}",
            cell.index, cell.config.n, cell.config.p, cell.config.s, cell.config.snr, cell.config.beta_mode,
            cell.config.screener
        );
        for m in &res.summary {
            eprintln!(
                "  {:<20} E(TP)={:.2} E(FP)={:.2} FWER={:.3} FDR={:.3} failures={}",
                m.method.name(),
                m.mean_tp,
                m.mean_fp,
                m.fwer,
                m.fdr,
                m.failures
            );
        }
        results.push((cell, res));
    }
    let summary: Vec<CellSummary> = results
        .iter()
        .map(|(c, r)| CellSummary { cell: c.index, config: &r.config, summary: &r.summary })
        .collect();
    let mut summary_json = serde_json::json!({ "name": grid.name, "seed": grid.seed, "cells": summary });
    summary_json["manifest_sha256"] = hash.clone().into();
    let files = [
        ("results.csv", report::tidy_results_csv(&results, &hash)),
        ("summary.json", report::pretty(&summary_json)),
        ("manifest.json", manifest.to_json()),
    ];
    report::write_outputs(&s.out, &files).stage("writing output")?;
    println!("{} cells written to {}", results.len(), s.out.display());
    Ok(())
}

pub fn ecdf(e: &EcdfArgs) -> Result<(), Failure> {
    let manifest = manifest_for("ecdf", e, &[&e.matrix])?;
    let hash = manifest.sha256();
    let text = std::fs::read_to_string(&e.matrix)
        .map_err(|err| Failure { stage: "reading input", error: Error::io(&e.matrix, err) })?;
    let (names, matrix) = report::parse_matrix_csv(&text).stage("reading input")?;
    let j = names
        .iter()
        .position(|n| *n == e.variable)
        .ok_or_else(|| Failure { stage: "ecdf", error: Error::UnknownVariable(e.variable.clone()) })?;
    let crossing = ecdf_crossing_check(&matrix.column(j), e.alpha, e.gamma_min).stage("ecdf")?;
    let aggregated = aggregate_adaptive(&matrix, e.gamma_min).stage("aggregation")?.values[j];
    let verdict = serde_json::json!({
        "variable": e.variable,
        "crossed": crossing.crossed,
        "aggregated_p_value": aggregated,
        "alpha": e.alpha,
        "gamma_min": e.gamma_min,
        "bound_slope": multisplit::multisplit::aggregate::adaptive_factor(e.gamma_min) / e.alpha,
    });
    let files = [
        ("ecdf.csv", report::ecdf_csv(&crossing, &hash)),
        ("bound.csv", report::bound_csv(&crossing, e.grid_points, &hash)),
        ("ecdf.json", report::stamped_json(&verdict, &hash)),
        ("manifest.json", manifest.to_json()),
    ];
    report::write_outputs(&e.out, &files).stage("writing output")?;
    println!(
        "{}: ECDF {} the bound (P = {})",
        e.variable,
        if crossing.crossed { "crosses" } else { "stays below" },
        report::format_float(aggregated)
    );
    Ok(())
}

fn from_config<T: for<'de> Deserialize<'de>>(m: &RunManifest) -> Result<T, Failure> {
    serde_json::from_value(m.config.clone()).map_err(|e| config_error("reading manifest", e.to_string()))
}

/// Inputs must still hash to the recorded values.
pub fn rerun(r: &RerunArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&r.manifest)
        .map_err(|e| Failure { stage: "reading manifest", error: Error::io(&r.manifest, e) })?;
    let manifest = RunManifest::from_json(&text).stage("reading manifest")?;
    for (path, recorded) in &manifest.inputs {
        let now = report::file_sha256(Path::new(path)).stage("reading input")?;
        if &now != recorded {
            return Err(config_error("reading input", format!("{path} changed since the recorded run")));
        }
    }
    match manifest.command.as_str() {
        "analyze" => analyze(&AnalyzeArgs { out: r.out.clone(), ..from_config(&manifest)? }),
        "simulate" => simulate(&SimulateArgs { out: r.out.clone(), ..from_config(&manifest)? }),
        "ecdf" => ecdf(&EcdfArgs { out: r.out.clone(), ..from_config(&manifest)? }),
        other => Err(config_error("reading manifest", format!("unknown command `{other}`"))),
    }
}

//! Output files: CSV tables, JSON reports and the run manifest.
//!
//! Floats are written in shortest round-trip form, so reading a value back
//! gives the identical `f64`. Every file carries the SHA-256 of the run
//! manifest: CSVs on a leading `# manifest_sha256=` comment line, JSON as a
//! `manifest_sha256` field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::parse_table;
use crate::error::{Error, Result};
use crate::evaluation::experiment::{ExperimentResult, GridCell};
use crate::multisplit::{EcdfCrossing, PValueMatrix};

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:?}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Everything needed to reproduce a run. Thread count and output location
/// do not affect results and are left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    /// Input path to content hash.
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, inputs: BTreeMap<String, String>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            inputs,
        }
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        v["manifest_sha256"] = self.sha256().into();
        pretty(&v)
    }

    /// Parses a manifest file and checks its recorded hash.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        let recorded = v.as_object_mut().and_then(|m| m.remove("manifest_sha256"));
        let manifest: RunManifest =
            serde_json::from_value(v).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        match recorded.as_ref().and_then(|h| h.as_str()) {
            Some(h) if h == manifest.sha256() => Ok(manifest),
            Some(_) => Err(Error::Config("manifest hash does not match its contents".into())),
            None => Err(Error::Config("manifest has no manifest_sha256 field".into())),
        }
    }
}

pub fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

/// Adds `manifest_sha256` to a JSON object.
pub fn stamped_json(value: impl Serialize, hash: &str) -> String {
    let mut v = serde_json::to_value(value).expect("value serializes");
    if let Some(m) = v.as_object_mut() {
        m.insert("manifest_sha256".into(), hash.into());
    }
    pretty(&v)
}

struct CsvOut {
    w: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    fn new(hash: &str) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(format!("# manifest_sha256={hash}\n").as_bytes());
        CsvOut { w: csv::Writer::from_writer(buf) }
    }

    fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).expect("writing to memory");
    }

    fn finish(self) -> String {
        String::from_utf8(self.w.into_inner().expect("flushing to memory")).expect("CSV output is UTF-8")
    }
}

/// One row per variable for `analyze`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableRow {
    pub name: String,
    pub pvalue: f64,
    pub selected: bool,
    pub tested_splits: usize,
    pub rank_dropped: usize,
    pub degenerate_se: usize,
}

pub fn variables_csv(rows: &[VariableRow], hash: &str) -> String {
    let mut out = CsvOut::new(hash);
    out.row(["index", "variable", "p_value", "selected", "tested_splits", "rank_dropped", "degenerate_se"]);
    for (j, r) in rows.iter().enumerate() {
        out.row([
            (j + 1).to_string(),
            r.name.clone(),
            format_float(r.pvalue),
            r.selected.to_string(),
            r.tested_splits.to_string(),
            r.rank_dropped.to_string(),
            r.degenerate_se.to_string(),
        ]);
    }
    out.finish()
}

/// `B x p` adjusted p-values, one row per split.
pub fn matrix_csv(matrix: &PValueMatrix, names: &[String], hash: &str) -> String {
    let mut out = CsvOut::new(hash);
    out.row(std::iter::once("split".to_string()).chain(names.iter().cloned()));
    for (i, id) in matrix.split_ids.iter().enumerate() {
        out.row(
            std::iter::once(id.to_string()).chain((0..matrix.p()).map(|j| format_float(matrix.values[(i, j)]))),
        );
    }
    out.finish()
}

/// Reads [`matrix_csv`] output back: variable names and the matrix.
pub fn parse_matrix_csv(text: &str) -> Result<(Vec<String>, PValueMatrix)> {
    let table = parse_table(text.as_bytes(), true, b',')?;
    let header = table.header.unwrap_or_default();
    if header.len() < 2 || header[0] != "split" {
        return Err(Error::Invalid("p-value matrix must start with a `split` column".into()));
    }
    let p = header.len() - 1;
    if let Some((i, _)) = table.rows.iter().enumerate().find(|(_, r)| r.len() != p + 1) {
        return Err(Error::Invalid(format!("p-value matrix row {} has the wrong number of fields", i + 1)));
    }
    let b = table.rows.len();
    if b == 0 {
        return Err(Error::Invalid("p-value matrix has no splits".into()));
    }
    let values = DMatrix::from_fn(b, p, |i, j| table.rows[i][j + 1]);
    let mut matrix = PValueMatrix::from_values(values)?;
    matrix.split_ids = table.rows.iter().map(|r| r[0] as usize).collect();
    Ok((header[1..].to_vec(), matrix))
}

/// `(p, ECDF(p))` step points of one variable.
pub fn ecdf_csv(crossing: &EcdfCrossing, hash: &str) -> String {
    let mut out = CsvOut::new(hash);
    out.row(["p", "ecdf"]);
    for &(p, f) in &crossing.points {
        out.row([format_float(p), format_float(f)]);
    }
    out.finish()
}

/// The rejection bound sampled at `points` equispaced values on `[0, 1]`.
pub fn bound_csv(crossing: &EcdfCrossing, points: usize, hash: &str) -> String {
    let mut out = CsvOut::new(hash);
    out.row(["p", "bound"]);
    let last = points.max(2) - 1;
    for i in 0..=last {
        let p = i as f64 / last as f64;
        out.row([format_float(p), format_float(crossing.bound(p))]);
    }
    out.finish()
}

/// One row per grid cell, replicate and method.
pub fn tidy_results_csv(cells: &[(GridCell, ExperimentResult)], hash: &str) -> String {
    let mut out = CsvOut::new(hash);
    out.row([
        "cell", "n", "p", "rho", "s", "snr", "beta_mode", "screener", "rep", "method", "true_positives",
        "false_positives", "selected", "fwer_indicator", "fdp", "error",
    ]);
    for (cell, res) in cells {
        let c = &res.config;
        for r in &res.records {
            let (tp, fp, sel, fwer, fdp) = match &r.metrics {
                Some(m) => (
                    m.true_positives.to_string(),
                    m.false_positives.to_string(),
                    m.selected.to_string(),
                    u8::from(m.fwer_indicator).to_string(),
                    format_float(m.fdp),
                ),
                None => Default::default(),
            };
            out.row([
                cell.index.to_string(),
                c.n.to_string(),
                c.p.to_string(),
                format_float(c.rho),
                c.s.to_string(),
                format_float(c.snr),
                serde_json::to_value(c.beta_mode).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                c.screener.to_string(),
                r.rep.to_string(),
                r.method.name().to_string(),
                tp,
                fp,
                sel,
                fwer,
                fdp,
                r.error.clone().unwrap_or_default(),
            ]);
        }
    }
    out.finish()
}

/// Writes every file or, if the directory cannot be prepared, none.
/// Files are written one at a time from the calling thread.
pub fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

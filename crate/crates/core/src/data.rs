//! Datasets, CSV ingestion and random sample splits.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngSpec, Stream};

/// Response vector plus fixed design. The design is stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    variable_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, variable_names: Option<Vec<String>>) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n {
            return Err(Error::Invalid(format!("y has {} rows but x has {}", n, x.nrows())));
        }
        if n < 4 {
            return Err(Error::TooFewObservations(n));
        }
        if x.ncols() == 0 {
            return Err(Error::Invalid("design needs at least one column".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i + 1, col: 0 });
        }
        for j in 0..x.ncols() {
            if let Some(i) = x.column(j).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i + 1, col: j + 1 });
            }
        }
        if let Some(names) = &variable_names {
            if names.len() != x.ncols() {
                return Err(Error::Invalid(format!(
                    "{} variable names for {} columns",
                    names.len(),
                    x.ncols()
                )));
            }
            let mut seen = HashSet::new();
            for name in names {
                if !seen.insert(name.as_str()) {
                    return Err(Error::DuplicateName(name.clone()));
                }
            }
        }
        Ok(Dataset { y, x, variable_names })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn variable_names(&self) -> Option<&[String]> {
        self.variable_names.as_deref()
    }

    /// Name of column `j` (0-based); unnamed columns are `X1`, `X2`, ...
    pub fn name(&self, j: usize) -> String {
        match &self.variable_names {
            Some(names) => names[j].clone(),
            None => format!("X{}", j + 1),
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        (0..self.p()).find(|&j| self.name(j) == name)
    }

    /// Copy with the response and every column centered to mean zero.
    pub fn centered(&self) -> Dataset {
        let mut x = self.x.clone();
        for mut col in x.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
        let my = self.y.mean();
        Dataset { y: self.y.add_scalar(-my), x, variable_names: self.variable_names.clone() }
    }

    pub fn rows_y(&self, rows: &[usize]) -> DVector<f64> {
        DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]))
    }

    pub fn rows_x(&self, rows: &[usize]) -> DMatrix<f64> {
        self.x.select_rows(rows)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.x[(rows[i], cols[j])])
    }
}

/// Which column of a table holds the response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseColumn {
    Name(String),
    /// 1-based column index.
    Index(usize),
}

impl std::str::FromStr for ResponseColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ResponseColumn::Index(i),
            Err(_) => ResponseColumn::Name(s.to_string()),
        })
    }
}

/// A rectangular numeric table, as read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn ncols(&self) -> usize {
        self.header
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.rows.first().map(Vec::len))
            .unwrap_or(0)
    }
}

pub fn validate_dataset(raw: &Table, response: &ResponseColumn) -> Result<Dataset> {
    let ncols = raw.ncols();
    for (i, row) in raw.rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Invalid(format!(
                "table is not rectangular: row {} has {} fields, expected {}",
                i + 1,
                row.len(),
                ncols
            )));
        }
    }
    let resp = match response {
        ResponseColumn::Index(i) if *i >= 1 && *i <= ncols => i - 1,
        ResponseColumn::Index(i) => {
            return Err(Error::Invalid(format!("response column {i} out of range 1..={ncols}")))
        }
        ResponseColumn::Name(name) => raw
            .header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::Invalid(format!("no response column named `{name}`")))?,
    };
    if ncols < 2 {
        return Err(Error::Invalid("table needs a response and at least one predictor".into()));
    }
    let n = raw.rows.len();
    for (i, row) in raw.rows.iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i + 1, col: j + 1 });
        }
    }
    if n < 4 {
        return Err(Error::TooFewObservations(n));
    }
    let cols: Vec<usize> = (0..ncols).filter(|&j| j != resp).collect();
    let y = DVector::from_iterator(n, raw.rows.iter().map(|r| r[resp]));
    let x = DMatrix::from_fn(n, cols.len(), |i, j| raw.rows[i][cols[j]]);
    let names = raw.header.as_ref().map(|h| cols.iter().map(|&j| h[j].clone()).collect());
    Dataset::new(y, x, names)
}

pub fn read_table(path: impl AsRef<Path>, has_header: bool, delimiter: u8) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_table(file, has_header, delimiter)
}

/// Reads a CSV file and validates it into a [`Dataset`].
pub fn read_dataset(
    path: impl AsRef<Path>,
    has_header: bool,
    delimiter: u8,
    response: &ResponseColumn,
) -> Result<Dataset> {
    validate_dataset(&read_table(path, has_header, delimiter)?, response)
}

pub fn parse_table<R: std::io::Read>(reader: R, has_header: bool, delimiter: u8) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .delimiter(delimiter)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = if has_header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| {
                    Error::Invalid(format!("row {}, column {}: `{}` is not a number", i + 1, j + 1, field))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// One random split: screening half `in_indices`, testing half `out_indices`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub in_indices: Vec<usize>,
    pub out_indices: Vec<usize>,
    /// 1-based split number.
    pub split_id: usize,
}

/// Size of the screening half, `floor((n - 1) / 2)`.
pub fn screening_size(n: usize) -> usize {
    (n - 1) / 2
}

impl SplitPlan {
    /// The plan for split `split_id`, drawn from its own substream.
    pub fn draw(n: usize, split_id: usize, rng: &RngSpec) -> SplitPlan {
        let mut r = rng.substream(Stream::Splitting, split_id as u64);
        let mut in_indices = sample(&mut r, n, screening_size(n)).into_vec();
        in_indices.sort_unstable();
        let mut member = vec![false; n];
        for &i in &in_indices {
            member[i] = true;
        }
        let out_indices = (0..n).filter(|&i| !member[i]).collect();
        SplitPlan { in_indices, out_indices, split_id }
    }
}

/// `b` independent splits; duplicates across splits are allowed.
pub fn make_splits(n: usize, b: usize, rng: &RngSpec) -> Result<Vec<SplitPlan>> {
    if n < 4 {
        return Err(Error::TooFewObservations(n));
    }
    if b == 0 {
        return Err(Error::Invalid("need at least one split".into()));
    }
    Ok((1..=b).map(|id| SplitPlan::draw(n, id, rng)).collect())
}

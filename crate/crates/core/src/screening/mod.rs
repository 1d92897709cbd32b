//! Stage-one screening on the first half of a split.

pub mod lasso;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use lasso::{
    adaptive_lasso, cv_lasso, lasso_coordinate_descent, lasso_path, lasso_path_with,
    weighted_lasso_coordinate_descent, AdaptiveLasso, CvLasso, LassoPath, LassoSettings,
};

/// Which screening procedure produces the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Screener {
    /// The `floor(n/6)` variables active most often along the Lasso path.
    Fixed,
    /// Support of the cross-validated Lasso.
    Cv,
    /// Support of the cross-validated adaptive Lasso.
    Adap,
    /// A uniformly random set of the given size; null calibration only.
    Random(usize),
}

impl std::str::FromStr for Screener {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" => Ok(Screener::Fixed),
            "cv" => Ok(Screener::Cv),
            "adap" | "adaptive" => Ok(Screener::Adap),
            other => other
                .strip_prefix("random:")
                .and_then(|k| k.parse().ok())
                .map(Screener::Random)
                .ok_or_else(|| format!("unknown screener `{s}` (expected fixed, cv, adap or random:<k>)")),
        }
    }
}

impl std::fmt::Display for Screener {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Screener::Fixed => f.write_str("fixed"),
            Screener::Cv => f.write_str("cv"),
            Screener::Adap => f.write_str("adap"),
            Screener::Random(k) => write!(f, "random:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenFlags {
    /// Fewer variables were ever active than the fixed target.
    pub undersized: bool,
    /// The set was cut down to the sparsity cap.
    pub truncated: bool,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenedSet {
    /// Selected variables, ascending.
    pub indices: Vec<usize>,
    pub method: Screener,
    /// Length-p ranking scores: standardized-scale `|coefficient|` for the
    /// Lasso screeners, a rank score for `fixed`. Larger is stronger.
    pub scores: Vec<f64>,
    /// Penalties behind the selection (CV choice, or initial and adaptive choice).
    pub lambdas: Vec<f64>,
    pub cv_error: Option<Vec<f64>>,
    pub flags: ScreenFlags,
}

impl ScreenedSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn from_scores(method: Screener, scores: Vec<f64>, lambdas: Vec<f64>, cv_error: Option<Vec<f64>>) -> Self {
        let indices: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] != 0.0).collect();
        let flags = ScreenFlags { empty: indices.is_empty(), ..ScreenFlags::default() };
        ScreenedSet { indices, method, scores, lambdas, cv_error, flags }
    }
}

/// Largest admissible screened set for a testing half of `n_out` rows.
pub fn sparsity_cap(n_out: usize) -> usize {
    n_out / 2
}

/// Keep at most `floor(n_out/2)` variables, those of largest `|coefficient|`
/// (ties to the lower index).
pub fn cap_screened_set(mut set: ScreenedSet, coefficients: &[f64], n_out: usize) -> ScreenedSet {
    let cap = sparsity_cap(n_out);
    if set.indices.len() <= cap {
        return set;
    }
    let mut ranked = set.indices.clone();
    ranked.sort_by(|&a, &b| coefficients[b].abs().total_cmp(&coefficients[a].abs()).then(a.cmp(&b)));
    ranked.truncate(cap);
    ranked.sort_unstable();
    set.indices = ranked;
    set.flags.truncated = true;
    set.flags.empty = set.indices.is_empty();
    set
}

/// The `target_size` variables with the most nonzero grid points along `path`.
///
/// Ties go to the variable that entered at the larger penalty, then to the
/// lower index. Variables never active are not eligible.
pub fn screen_fixed(path: &LassoPath, target_size: usize) -> ScreenedSet {
    let p = path.p();
    let m = path.grid_size();
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for j in 0..p {
        let row = path.coefficients.row(j);
        let count = row.iter().filter(|&&v| v != 0.0).count();
        if count > 0 {
            let first = (0..m).find(|&k| row[k] != 0.0).unwrap();
            candidates.push((j, count, first));
        }
    }
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)));
    let undersized = candidates.len() < target_size;
    candidates.truncate(target_size);
    let mut scores = vec![0.0; p];
    let len = candidates.len();
    for (rank, &(j, _, _)) in candidates.iter().enumerate() {
        scores[j] = (len - rank) as f64;
    }
    let mut set = ScreenedSet::from_scores(Screener::Fixed, scores, Vec::new(), None);
    set.flags.undersized = undersized;
    set
}

/// Target size of the fixed screener for a full sample of size `n`.
pub fn fixed_target(n: usize) -> usize {
    n / 6
}

pub fn screen_cv<R: Rng + ?Sized>(
    x_in: &DMatrix<f64>,
    y_in: &DVector<f64>,
    settings: &LassoSettings,
    rng: &mut R,
) -> Result<ScreenedSet> {
    let fit = cv_lasso(x_in, y_in, settings, rng)?;
    let scores = fit.standardized.iter().map(|v| v.abs()).collect();
    Ok(ScreenedSet::from_scores(Screener::Cv, scores, vec![fit.lambda_cv], Some(fit.cv_error)))
}

pub fn screen_adap<R: Rng + ?Sized>(
    x_in: &DMatrix<f64>,
    y_in: &DVector<f64>,
    settings: &LassoSettings,
    rng: &mut R,
) -> Result<ScreenedSet> {
    let fit = adaptive_lasso(x_in, y_in, settings, rng)?;
    let scores = fit.standardized.iter().map(|v| v.abs()).collect();
    let mut lambdas = vec![fit.lambda_init];
    lambdas.extend(fit.lambda);
    Ok(ScreenedSet::from_scores(Screener::Adap, scores, lambdas, Some(fit.cv_error)))
}

pub fn screen_random<R: Rng + ?Sized>(p: usize, size: usize, rng: &mut R) -> Result<ScreenedSet> {
    if size > p {
        return Err(Error::Invalid(format!("random screen of size {size} exceeds p = {p}")));
    }
    let mut scores = vec![0.0; p];
    for j in sample(rng, p, size) {
        scores[j] = 1.0;
    }
    Ok(ScreenedSet::from_scores(Screener::Random(size), scores, Vec::new(), None))
}

/// Run `screener` on the screening half and apply the sparsity cap for `n_out`.
///
/// `n_full` sets the fixed screener's `floor(n/6)` target.
pub fn screen<R: Rng + ?Sized>(
    screener: Screener,
    x_in: &DMatrix<f64>,
    y_in: &DVector<f64>,
    n_full: usize,
    n_out: usize,
    settings: &LassoSettings,
    rng: &mut R,
) -> Result<ScreenedSet> {
    let set = match screener {
        Screener::Fixed => {
            let path = lasso_path_with(x_in, y_in, settings)?;
            screen_fixed(&path, fixed_target(n_full))
        }
        Screener::Cv => screen_cv(x_in, y_in, settings, rng)?,
        Screener::Adap => screen_adap(x_in, y_in, settings, rng)?,
        Screener::Random(k) => screen_random(x_in.ncols(), k, rng)?,
    };
    let scores = set.scores.clone();
    Ok(cap_screened_set(set, &scores, n_out))
}

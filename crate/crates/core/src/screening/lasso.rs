//! Coordinate descent for the (weighted) Lasso, regularization paths,
//! K-fold cross-validation and the two-stage adaptive Lasso.
//!
//! All path fits standardize the design internally (zero mean, unit standard
//! deviation with the `1/n` convention) and center the response; coefficients
//! are reported back on the original column scale. Constant columns are never
//! activated.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoSettings {
    pub grid_size: usize,
    /// `None` picks 0.01 when n > p and 0.05 otherwise.
    pub lambda_min_ratio: Option<f64>,
    pub folds: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoSettings {
    fn default() -> Self {
        LassoSettings {
            grid_size: 100,
            lambda_min_ratio: None,
            folds: 10,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl LassoSettings {
    pub fn ratio_for(&self, n: usize, p: usize) -> f64 {
        self.lambda_min_ratio.unwrap_or(if n > p { 0.01 } else { 0.05 })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorize.
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (u, v) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += u[k] * v[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Column-major dense design with cached `x_j'x_j / n`.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub data: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub col_sq: Vec<f64>,
}

impl Design {
    pub fn from_matrix(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let data = x.as_slice().to_vec();
        Self::from_parts(data, n, p)
    }

    fn from_parts(data: Vec<f64>, n: usize, p: usize) -> Self {
        let col_sq = (0..p)
            .map(|j| {
                let c = &data[j * n..(j + 1) * n];
                dot(c, c) / n as f64
            })
            .collect();
        Design { data, n, p, col_sq }
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    fn gradient_max(&self, y: &[f64], weights: Option<&[f64]>) -> f64 {
        (0..self.p)
            .filter(|&j| self.col_sq[j] > 0.0)
            .map(|j| {
                let w = weights.map_or(1.0, |w| w[j]);
                if w.is_finite() {
                    dot(self.col(j), y).abs() / self.n as f64 / w
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Cyclic coordinate descent for
/// `(1/2n)||y - X b||^2 + lambda * sum_j w_j |b_j|`.
///
/// `resid` must hold `y - X beta` on entry and is kept in sync. Infinite
/// weights pin the coordinate at zero. Returns the number of sweeps used.
pub(crate) fn cd_solve(
    x: &Design,
    lambda: f64,
    weights: Option<&[f64]>,
    beta: &mut [f64],
    resid: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = x.n as f64;
    let mut sweeps = 0;
    let mut active: Vec<usize> = Vec::with_capacity(x.p);

    let update = |j: usize, beta: &mut [f64], resid: &mut [f64]| -> f64 {
        let c = x.col_sq[j];
        let w = weights.map_or(1.0, |w| w[j]);
        if c == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let col = x.col(j);
        let old = beta[j];
        let z = dot(col, resid) / n + c * old;
        let new = soft_threshold(z, lambda * w) / c;
        let delta = new - old;
        if delta != 0.0 {
            beta[j] = new;
            for (r, &v) in resid.iter_mut().zip(col) {
                *r -= delta * v;
            }
        }
        delta.abs() * c.sqrt()
    };

    loop {
        let mut max_change = 0.0f64;
        for j in 0..x.p {
            max_change = max_change.max(update(j, beta, resid));
        }
        sweeps += 1;
        if max_change < tol {
            return Ok(sweeps);
        }
        if sweeps >= max_iter {
            return Err(Error::NonConvergence { iterations: sweeps, max_change });
        }
        active.clear();
        active.extend((0..x.p).filter(|&j| beta[j] != 0.0));
        loop {
            let mut max_change = 0.0f64;
            for &j in &active {
                max_change = max_change.max(update(j, beta, resid));
            }
            sweeps += 1;
            if max_change < tol {
                break;
            }
            if sweeps >= max_iter {
                return Err(Error::NonConvergence { iterations: sweeps, max_change });
            }
        }
    }
}

fn response_scale(y: &[f64]) -> f64 {
    let s = (dot(y, y) / y.len() as f64).sqrt();
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Lasso at a single penalty on a design used as given (no standardization,
/// no intercept). Minimizes `(1/2n)||y - X b||^2 + lambda ||b||_1`.
pub fn lasso_coordinate_descent(
    x_std: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    warm_start: Option<&[f64]>,
) -> Result<Vec<f64>> {
    weighted_lasso_coordinate_descent(x_std, y, lambda, None, warm_start)
}

/// As [`lasso_coordinate_descent`] with per-coefficient penalty weights.
pub fn weighted_lasso_coordinate_descent(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    weights: Option<&[f64]>,
    warm_start: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::Invalid(format!("lambda must be positive, got {lambda}")));
    }
    let design = Design::from_matrix(x);
    let mut beta = warm_start.map_or_else(|| vec![0.0; design.p], <[f64]>::to_vec);
    if beta.len() != design.p || y.len() != design.n {
        return Err(Error::Invalid("lasso dimension mismatch".into()));
    }
    let fitted = x * DVector::from_column_slice(&beta);
    let mut resid: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let tol = DEFAULT_TOL * response_scale(y.as_slice());
    cd_solve(&design, lambda, weights, &mut beta, &mut resid, tol, DEFAULT_MAX_ITER)?;
    Ok(beta)
}

/// Column means and scales used to standardize a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// Population standard deviations; zero marks a constant column.
    pub scales: Vec<f64>,
    pub y_mean: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Standardized {
    pub design: Design,
    pub y: Vec<f64>,
    pub info: Standardization,
}

impl Standardized {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        Self::from_rows(x, y, None)
    }

    /// Standardize using only `rows` (all rows when `None`).
    pub fn from_rows(x: &DMatrix<f64>, y: &DVector<f64>, rows: Option<&[usize]>) -> Self {
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..x.nrows()).collect();
                &all
            }
        };
        let n = rows.len();
        let p = x.ncols();
        let nf = n as f64;
        let mut data = Vec::with_capacity(n * p);
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j);
            let start = data.len();
            data.extend(rows.iter().map(|&i| col[i]));
            let c = &mut data[start..];
            let m = c.iter().sum::<f64>() / nf;
            c.iter_mut().for_each(|v| *v -= m);
            let var = c.iter().map(|v| v * v).sum::<f64>() / nf;
            let s = var.sqrt();
            // Columns that are constant up to rounding are treated as exactly constant.
            let s = if s > 1e-12 * (m.abs() + 1.0) { s } else { 0.0 };
            if s > 0.0 {
                c.iter_mut().for_each(|v| *v /= s);
            } else {
                c.iter_mut().for_each(|v| *v = 0.0);
            }
            means.push(m);
            scales.push(s);
        }
        let y_mean = rows.iter().map(|&i| y[i]).sum::<f64>() / nf;
        let yc = rows.iter().map(|&i| y[i] - y_mean).collect();
        Standardized {
            design: Design::from_parts(data, n, p),
            y: yc,
            info: Standardization { means, scales, y_mean },
        }
    }

    pub fn lambda_max(&self, weights: Option<&[f64]>) -> f64 {
        self.design.gradient_max(&self.y, weights)
    }

    /// Warm-started fits along `lambdas`, on the standardized scale.
    pub fn path(
        &self,
        lambdas: &[f64],
        weights: Option<&[f64]>,
        settings: &LassoSettings,
    ) -> Result<Vec<Vec<f64>>> {
        let mut beta = vec![0.0; self.design.p];
        let mut resid = self.y.clone();
        let tol = settings.tol * response_scale(&self.y);
        let mut out = Vec::with_capacity(lambdas.len());
        for &lam in lambdas {
            cd_solve(&self.design, lam, weights, &mut beta, &mut resid, tol, settings.max_iter)?;
            out.push(beta.clone());
        }
        Ok(out)
    }

    /// Original-scale coefficients and intercept for standardized `b`.
    pub fn unstandardize(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let coefs: Vec<f64> = b
            .iter()
            .zip(&self.info.scales)
            .map(|(&v, &s)| if s > 0.0 { v / s } else { 0.0 })
            .collect();
        let intercept =
            self.info.y_mean - coefs.iter().zip(&self.info.means).map(|(c, m)| c * m).sum::<f64>();
        (coefs, intercept)
    }
}

/// Log-spaced decreasing grid from `lambda_max` to `lambda_max * ratio`.
pub fn lambda_grid(lambda_max: f64, grid_size: usize, ratio: f64) -> Vec<f64> {
    // An all-zero gradient leaves every coefficient at zero; any positive top works.
    let top = if lambda_max > 0.0 { lambda_max } else { 1.0 };
    let last = (grid_size - 1) as f64;
    (0..grid_size).map(|k| top * ratio.powf(k as f64 / last)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    /// `p x grid_size`, original column scale.
    pub coefficients: DMatrix<f64>,
    pub intercepts: Vec<f64>,
    /// `p x grid_size`, on the standardized problem.
    pub standardized_coefficients: DMatrix<f64>,
    pub standardization: Standardization,
}

impl LassoPath {
    pub fn grid_size(&self) -> usize {
        self.lambdas.len()
    }

    pub fn p(&self) -> usize {
        self.coefficients.nrows()
    }

    fn assemble(std: &Standardized, lambdas: Vec<f64>, fits: Vec<Vec<f64>>) -> Self {
        let p = std.design.p;
        let m = lambdas.len();
        let mut coefficients = DMatrix::zeros(p, m);
        let mut standardized_coefficients = DMatrix::zeros(p, m);
        let mut intercepts = Vec::with_capacity(m);
        for (k, b) in fits.iter().enumerate() {
            let (c, icpt) = std.unstandardize(b);
            coefficients.set_column(k, &DVector::from_vec(c));
            standardized_coefficients.set_column(k, &DVector::from_column_slice(b));
            intercepts.push(icpt);
        }
        LassoPath {
            lambdas,
            coefficients,
            intercepts,
            standardized_coefficients,
            standardization: std.info.clone(),
        }
    }
}

pub fn lasso_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid_size: usize,
    lambda_min_ratio: f64,
) -> Result<LassoPath> {
    let settings = LassoSettings {
        grid_size,
        lambda_min_ratio: Some(lambda_min_ratio),
        ..LassoSettings::default()
    };
    lasso_path_with(x, y, &settings)
}

pub fn lasso_path_with(x: &DMatrix<f64>, y: &DVector<f64>, settings: &LassoSettings) -> Result<LassoPath> {
    if settings.grid_size < 2 {
        return Err(Error::Invalid("lasso path needs grid_size >= 2".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::Invalid("lasso dimension mismatch".into()));
    }
    let std = Standardized::new(x, y);
    let ratio = settings.ratio_for(x.nrows(), x.ncols());
    let lambdas = lambda_grid(std.lambda_max(None), settings.grid_size, ratio);
    let fits = std.path(&lambdas, None, settings)?;
    Ok(LassoPath::assemble(&std, lambdas, fits))
}

/// Assign rows to `k` folds by shuffling and cutting into nearly equal blocks.
pub fn fold_assignment<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos * k / n;
    }
    folds
}

/// Mean out-of-fold squared error for every lambda of a (weighted) path.
fn cv_curve(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambdas: &[f64],
    weights: Option<&[f64]>,
    folds: &[usize],
    k: usize,
    settings: &LassoSettings,
) -> Result<Vec<f64>> {
    let n = x.nrows();
    let mut sse = vec![0.0; lambdas.len()];
    for fold in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| folds[i] == fold).collect();
        let std = Standardized::from_rows(x, y, Some(&train));
        let fits = std.path(lambdas, weights, settings)?;
        for (l, b) in fits.iter().enumerate() {
            let (coefs, intercept) = std.unstandardize(b);
            let nz: Vec<usize> = (0..coefs.len()).filter(|&j| coefs[j] != 0.0).collect();
            for &i in &test {
                let pred = intercept + nz.iter().map(|&j| x[(i, j)] * coefs[j]).sum::<f64>();
                let e = y[i] - pred;
                sse[l] += e * e;
            }
        }
    }
    Ok(sse.into_iter().map(|s| s / n as f64).collect())
}

fn argmin_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &e) in v.iter().enumerate() {
        if e < v[best] {
            best = i;
        }
    }
    best
}

fn check_folds(n: usize, k: usize) -> Result<()> {
    if k < 2 || n < k {
        return Err(Error::Invalid(format!("cross-validation needs 2 <= K <= n (n = {n}, K = {k})")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CvLasso {
    pub lambda_cv: f64,
    pub index: usize,
    /// Original-scale coefficients of the full-data fit at `lambda_cv`.
    pub coefficients: Vec<f64>,
    pub standardized: Vec<f64>,
    pub cv_error: Vec<f64>,
    pub path: LassoPath,
}

/// K-fold cross-validated Lasso. The full-data path fixes the grid; each fold
/// is refit along the same grid.
pub fn cv_lasso<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    settings: &LassoSettings,
    rng: &mut R,
) -> Result<CvLasso> {
    let (n, p) = x.shape();
    let k = settings.folds;
    check_folds(n, k)?;
    let std = Standardized::new(x, y);
    let lambdas = lambda_grid(std.lambda_max(None), settings.grid_size, settings.ratio_for(n, p));
    let fits = std.path(&lambdas, None, settings)?;
    let folds = fold_assignment(n, k, rng);
    let cv_error = cv_curve(x, y, &lambdas, None, &folds, k, settings)?;
    let index = argmin_first(&cv_error);
    let standardized = fits[index].clone();
    let path = LassoPath::assemble(&std, lambdas, fits);
    Ok(CvLasso {
        lambda_cv: path.lambdas[index],
        index,
        coefficients: path.coefficients.column(index).iter().copied().collect(),
        standardized,
        cv_error,
        path,
    })
}

#[derive(Debug, Clone)]
pub struct AdaptiveLasso {
    /// Original-scale coefficients.
    pub coefficients: Vec<f64>,
    /// Standardized-scale coefficients, the scale the weights act on.
    pub standardized: Vec<f64>,
    /// `1 / |initial standardized coefficient|`, infinite where the initial fit is zero.
    pub weights: Vec<f64>,
    pub lambda_init: f64,
    /// `None` when stage two never ran.
    pub lambda: Option<f64>,
    pub cv_error: Vec<f64>,
    /// Stage one selected nothing, so the result is the zero vector.
    pub initial_all_zero: bool,
}

/// Two-stage adaptive Lasso: CV-Lasso initial fit, weights `1/|b_init|` with
/// zero-initial variables excluded, stage-two penalty chosen by K-fold CV.
pub fn adaptive_lasso<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    settings: &LassoSettings,
    rng: &mut R,
) -> Result<AdaptiveLasso> {
    let init = cv_lasso(x, y, settings, rng)?;
    let p = x.ncols();
    let weights: Vec<f64> = init
        .standardized
        .iter()
        .map(|&b| if b != 0.0 { 1.0 / b.abs() } else { f64::INFINITY })
        .collect();
    if weights.iter().all(|w| w.is_infinite()) {
        return Ok(AdaptiveLasso {
            coefficients: vec![0.0; p],
            standardized: vec![0.0; p],
            weights,
            lambda_init: init.lambda_cv,
            lambda: None,
            cv_error: Vec::new(),
            initial_all_zero: true,
        });
    }
    let (n, _) = x.shape();
    let std = Standardized::new(x, y);
    let ratio = settings.ratio_for(n, p);
    let lambdas = lambda_grid(std.lambda_max(Some(&weights)), settings.grid_size, ratio);
    let fits = std.path(&lambdas, Some(&weights), settings)?;
    let folds = fold_assignment(n, settings.folds, rng);
    let cv_error = cv_curve(x, y, &lambdas, Some(&weights), &folds, settings.folds, settings)?;
    let index = argmin_first(&cv_error);
    let standardized = fits[index].clone();
    let (coefficients, _) = std.unstandardize(&standardized);
    Ok(AdaptiveLasso {
        coefficients,
        standardized,
        weights,
        lambda_init: init.lambda_cv,
        lambda: Some(lambdas[index]),
        cv_error,
        initial_all_zero: false,
    })
}

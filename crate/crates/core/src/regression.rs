//! Least squares on the testing half and per-coefficient p-values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Reciprocal condition numbers below this declare the design rank deficient.
pub const RCOND_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub sigma_hat_sq: f64,
    pub df: usize,
    /// Variable indices of the fitted columns, in column order.
    pub subset: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMode {
    #[default]
    Normal,
    StudentT,
}

impl std::str::FromStr for PValueMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "normal" => Ok(PValueMode::Normal),
            "t" | "student-t" => Ok(PValueMode::StudentT),
            _ => Err(format!("unknown p-value mode `{s}` (expected normal or t)")),
        }
    }
}

/// Columns involved in a (numerical) linear dependence, as positions into `x`.
/// Empty when the column-equilibrated design has reciprocal condition number
/// at least [`RCOND_TOL`].
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let k = x.ncols();
    if k == 0 {
        return Vec::new();
    }
    let mut scaled = x.clone();
    let mut zero = Vec::new();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            zero.push(j);
        } else {
            col /= norm;
        }
    }
    if !zero.is_empty() {
        return zero;
    }
    if x.nrows() < k {
        return (0..k).collect();
    }
    let svd = scaled.svd(false, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    if sv.min() >= RCOND_TOL * smax {
        return Vec::new();
    }
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut involved = vec![false; k];
    for (i, &s) in sv.iter().enumerate() {
        if s < RCOND_TOL * smax {
            for (j, flag) in involved.iter_mut().enumerate() {
                if v_t[(i, j)].abs() > 1e-6 {
                    *flag = true;
                }
            }
        }
    }
    (0..k).filter(|&j| involved[j]).collect()
}

/// Least squares of `y` on the columns of `x` (no intercept).
///
/// `subset` labels the columns of `x` with their variable indices.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, subset: Vec<usize>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if k == 0 {
        return Err(Error::Invalid("least squares needs at least one column".into()));
    }
    if subset.len() != k || y.len() != n {
        return Err(Error::Invalid("least squares dimension mismatch".into()));
    }
    if n < k + 1 {
        return Err(Error::Invalid(format!("least squares needs n > k, got n = {n}, k = {k}")));
    }
    let bad = dependent_columns(x);
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad.iter().map(|&j| subset[j]).collect() });
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, k).into_owned();
    let beta = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::RankDeficient { columns: subset.clone() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient { columns: subset.clone() })?;

    let resid = y - x * &beta;
    let df = n - k;
    let sigma_hat_sq = resid.norm_squared() / df as f64;
    let standard_errors = (0..k)
        .map(|j| (sigma_hat_sq * r_inv.row(j).norm_squared()).sqrt())
        .collect();
    Ok(OlsFit { coefficients: beta.iter().copied().collect(), standard_errors, sigma_hat_sq, df, subset })
}

/// Two-sided p-values with a flag for every coefficient whose standard error is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPValues {
    pub values: Vec<f64>,
    pub degenerate: Vec<bool>,
}

pub fn two_sided_pvalue(t: f64, mode: PValueMode, df: usize) -> f64 {
    let t = t.abs();
    let p = match mode {
        PValueMode::Normal => erfc(t / std::f64::consts::SQRT_2),
        PValueMode::StudentT => {
            let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
            2.0 * dist.cdf(-t)
        }
    };
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

pub fn coefficient_pvalues(fit: &OlsFit, mode: PValueMode) -> CoefficientPValues {
    let mut values = Vec::with_capacity(fit.coefficients.len());
    let mut degenerate = Vec::with_capacity(fit.coefficients.len());
    for (&b, &se) in fit.coefficients.iter().zip(&fit.standard_errors) {
        if se > 0.0 && se.is_finite() {
            values.push(two_sided_pvalue(b / se, mode, fit.df));
            degenerate.push(false);
        } else {
            values.push(if b == 0.0 { 1.0 } else { f64::MIN_POSITIVE });
            degenerate.push(true);
        }
    }
    CoefficientPValues { values, degenerate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_problem(n: usize, k: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        (x, y)
    }

    #[test]
    fn noiseless_identity() {
        let x = DMatrix::from_column_slice(5, 1, &[1.0, -2.0, 0.5, 3.0, 1.5]);
        let y = &x.column(0) * 2.0;
        let fit = ols_fit(&x, &y, vec![0]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(fit.sigma_hat_sq < 1e-24);
        let pv = coefficient_pvalues(&fit, PValueMode::Normal);
        assert!(pv.values[0] > 0.0);
    }

    #[test]
    fn matches_normal_equations() {
        let (x, y) = random_problem(30, 3, 11);
        let fit = ols_fit(&x, &y, vec![4, 8, 9]).unwrap();
        // Oracle: Cholesky solve of X'X b = X'y.
        let xtx = x.transpose() * &x;
        let chol = xtx.clone().cholesky().unwrap();
        let beta = chol.solve(&(x.transpose() * &y));
        let inv = chol.inverse();
        let rss = (&y - &x * &beta).norm_squared();
        for j in 0..3 {
            assert!((fit.coefficients[j] - beta[j]).abs() < 1e-10);
            let se = (rss / 27.0 * inv[(j, j)]).sqrt();
            assert!((fit.standard_errors[j] - se).abs() < 1e-10);
        }
        assert_eq!(fit.df, 27);
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        for seed in 0..20 {
            let (x, y) = random_problem(25, 6, seed);
            let fit = ols_fit(&x, &y, (0..6).collect()).unwrap();
            let beta = DVector::from_vec(fit.coefficients.clone());
            let resid = &y - &x * beta;
            let scale = y.norm() * x.norm();
            for col in x.column_iter() {
                assert!(col.dot(&resid).abs() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let (mut x, y) = random_problem(20, 3, 3);
        let c0 = x.column(0).clone_owned();
        x.set_column(2, &c0);
        match ols_fit(&x, &y, vec![10, 11, 12]) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec![10, 12]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_rows_rejected() {
        let (x, y) = random_problem(3, 3, 1);
        assert!(matches!(ols_fit(&x, &y, vec![0, 1, 2]), Err(Error::Invalid(_))));
    }

    #[test]
    fn pvalue_reference_points() {
        assert_eq!(two_sided_pvalue(0.0, PValueMode::Normal, 5), 1.0);
        assert_eq!(two_sided_pvalue(0.0, PValueMode::StudentT, 5), 1.0);
        assert!((two_sided_pvalue(1.959964, PValueMode::Normal, 1) - 0.05).abs() < 1e-4);
        assert!((two_sided_pvalue(-1.959964, PValueMode::Normal, 1) - 0.05).abs() < 1e-4);
        assert_eq!(two_sided_pvalue(60.0, PValueMode::Normal, 1), f64::MIN_POSITIVE);
    }

    /// Simpson quadrature of the t(10) density over [2, inf) after x = 2 + u/(1-u).
    fn t10_upper_tail_quadrature(t: f64) -> f64 {
        let nu: f64 = 10.0;
        // Gamma(5.5) = 4.5 * 3.5 * 2.5 * 1.5 * 0.5 * sqrt(pi), Gamma(5) = 24.
        let g55 = 4.5 * 3.5 * 2.5 * 1.5 * 0.5 * std::f64::consts::PI.sqrt();
        let c = g55 / ((nu * std::f64::consts::PI).sqrt() * 24.0);
        let f = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let x = t + u / (1.0 - u);
            let jac = 1.0 / ((1.0 - u) * (1.0 - u));
            c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0) * jac
        };
        let m = 200_000;
        let h = 1.0 / m as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..m {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn student_t_matches_quadrature() {
        let oracle = 2.0 * t10_upper_tail_quadrature(2.0);
        let got = two_sided_pvalue(2.0, PValueMode::StudentT, 10);
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
    }

    #[test]
    fn monotone_and_asymptotically_normal() {
        for df in [1usize, 5, 30, 200] {
            let mut prev = 1.0;
            for i in 0..=80 {
                let t = i as f64 * 0.1;
                let p = two_sided_pvalue(t, PValueMode::StudentT, df);
                assert!(p <= prev);
                prev = p;
            }
        }
        for df in [200usize, 500, 1000] {
            for i in 0..=40 {
                let t = i as f64 * 0.1;
                let gap = two_sided_pvalue(t, PValueMode::StudentT, df) - two_sided_pvalue(t, PValueMode::Normal, df);
                // Heavier t tails; the first-order gap is O(1 / df).
                assert!(gap >= 0.0 && gap < 1.0 / df as f64, "df {df} t {t}: {gap}");
            }
        }
    }

    #[test]
    fn zero_standard_error_flags() {
        let fit = OlsFit {
            coefficients: vec![1.5, 0.0, 0.3],
            standard_errors: vec![0.0, 0.0, 0.1],
            sigma_hat_sq: 0.0,
            df: 3,
            subset: vec![0, 1, 2],
        };
        let pv = coefficient_pvalues(&fit, PValueMode::Normal);
        assert_eq!(pv.values[0], f64::MIN_POSITIVE);
        assert_eq!(pv.values[1], 1.0);
        assert_eq!(pv.degenerate, vec![true, true, false]);
    }
}

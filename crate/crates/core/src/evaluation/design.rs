//! Simulated designs, coefficient vectors and noise calibration.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows i.i.d. `N(0, Sigma)` with `Sigma_jk = rho^|j-k|`, via the AR(1)
/// recursion `X_1 = Z_1`, `X_j = rho X_{j-1} + sqrt(1 - rho^2) Z_j`.
pub fn toeplitz_design<R: Rng + ?Sized>(n: usize, p: usize, rho: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Invalid(format!("rho must lie in [0, 1), got {rho}")));
    }
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            let v = if j == 0 { z } else { rho * prev + innov * z };
            x[(i, j)] = v;
            prev = v;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// Active coefficients all equal to 1.
    Uniform,
    /// Active coefficients take the values `1..=s`.
    VaryingStrength,
}

/// Coefficient vector with a uniformly random support of size `s`.
pub fn sample_beta<R: Rng + ?Sized>(p: usize, s: usize, mode: BetaMode, rng: &mut R) -> Result<DVector<f64>> {
    if s > p {
        return Err(Error::Invalid(format!("s = {s} exceeds p = {p}")));
    }
    let mut beta = DVector::zeros(p);
    for (rank, j) in sample(rng, p, s).into_iter().enumerate() {
        beta[j] = match mode {
            BetaMode::Uniform => 1.0,
            BetaMode::VaryingStrength => (rank + 1) as f64,
        };
    }
    Ok(beta)
}

/// `beta' Sigma beta` for the Toeplitz covariance, summed over the support.
pub fn toeplitz_quadratic_form(beta: &DVector<f64>, rho: f64) -> f64 {
    let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    let mut total = 0.0;
    for &j in &support {
        for &k in &support {
            total += beta[j] * beta[k] * rho.powi(j.abs_diff(k) as i32);
        }
    }
    total
}

/// Noise variance giving `beta' Sigma beta / sigma^2 = snr`.
pub fn sigma_for_snr(beta: &DVector<f64>, rho: f64, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::Invalid(format!("snr must be positive, got {snr}")));
    }
    let signal = toeplitz_quadratic_form(beta, rho);
    if !(signal > 0.0) {
        return Err(Error::ZeroSignal);
    }
    Ok(signal / snr)
}

/// Population R^2 implied by a signal-to-noise ratio.
pub fn snr_to_r2(snr: f64) -> f64 {
    snr / (1.0 + snr)
}

pub fn simulate_response<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    sigma_sq: f64,
    rng: &mut R,
) -> DVector<f64> {
    let sigma = sigma_sq.sqrt();
    let signal = x * beta;
    signal.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    fn col(x: &DMatrix<f64>, j: usize) -> Vec<f64> {
        x.column(j).iter().copied().collect()
    }

    #[test]
    fn independent_columns_at_rho_zero() {
        let x = toeplitz_design(100_000, 3, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert!(corr(&col(&x, a), &col(&x, b)).abs() < 0.02);
        }
    }

    #[test]
    fn lag_two_correlation() {
        let x = toeplitz_design(100_000, 3, 0.5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!((corr(&col(&x, 0), &col(&x, 2)) - 0.25).abs() < 0.02);
    }

    #[test]
    fn sample_covariance_within_three_standard_errors() {
        let n = 50_000;
        let p = 6;
        let rho: f64 = 0.5;
        let x = toeplitz_design(n, p, rho, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for j in 0..p {
            for k in j..p {
                let s: f64 = x.column(j).dot(&x.column(k)) / n as f64;
                let sigma = rho.powi((k - j) as i32);
                // Var(X_j X_k) = 1 + sigma^2 for unit-variance Gaussians.
                let se = ((1.0 + sigma * sigma) / n as f64).sqrt();
                assert!((s - sigma).abs() < 3.0 * se, "({j},{k}): {s} vs {sigma}");
            }
        }
    }

    #[test]
    fn rejects_bad_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(toeplitz_design(5, 5, 1.0, &mut rng).is_err());
        assert!(toeplitz_design(5, 5, -0.1, &mut rng).is_err());
    }

    #[test]
    fn beta_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = sample_beta(100, 5, BetaMode::Uniform, &mut rng).unwrap();
        assert_eq!(b.iter().filter(|&&v| v == 1.0).count(), 5);
        assert_eq!(b.iter().filter(|&&v| v == 0.0).count(), 95);
        let b = sample_beta(100, 3, BetaMode::VaryingStrength, &mut rng).unwrap();
        let mut nz: Vec<f64> = b.iter().copied().filter(|&v| v != 0.0).collect();
        nz.sort_by(f64::total_cmp);
        assert_eq!(nz, vec![1.0, 2.0, 3.0]);
        assert!(sample_beta(10, 0, BetaMode::Uniform, &mut rng).unwrap().iter().all(|&v| v == 0.0));
        assert!(sample_beta(3, 4, BetaMode::Uniform, &mut rng).is_err());
    }

    #[test]
    fn snr_calibration() {
        let mut e1 = DVector::zeros(10);
        e1[0] = 1.0;
        assert_eq!(sigma_for_snr(&e1, 0.7, 4.0).unwrap(), 0.25);
        let mut b = DVector::zeros(10);
        b[0] = 1.0;
        b[1] = 1.0;
        assert!((sigma_for_snr(&b, 0.5, 2.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(matches!(sigma_for_snr(&DVector::zeros(4), 0.5, 1.0), Err(Error::ZeroSignal)));
        let r2: Vec<f64> = [0.25, 1.0, 4.0, 16.0].iter().map(|&s| snr_to_r2(s)).collect();
        for (got, want) in r2.iter().zip([0.2, 0.5, 0.8, 0.94]) {
            assert!((got - want).abs() < 0.005);
        }
    }

    #[test]
    fn snr_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = 20;
        let rho = 0.5;
        let beta = sample_beta(p, 5, BetaMode::VaryingStrength, &mut rng).unwrap();
        let sigma_sq = sigma_for_snr(&beta, rho, 4.0).unwrap();
        let x = toeplitz_design(100_000, p, rho, &mut rng).unwrap();
        let signal = &x * &beta;
        let y = simulate_response(&x, &beta, sigma_sq, &mut rng);
        let noise = &y - &signal;
        let var = |v: &DVector<f64>| {
            let m = v.mean();
            v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (v.len() - 1) as f64
        };
        let est = var(&signal) / var(&noise);
        assert!((est / 4.0 - 1.0).abs() < 0.05, "snr estimate {est}");
    }
}

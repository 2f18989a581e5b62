//! Gaussian-process regression with a Matérn-5/2 ARD kernel.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;
const MAX_JITTER: f64 = 1e-4;

/// Kernel and likelihood hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GpHyper {
    pub lengthscales: Vec<f64>,
    /// Signal variance σ_f².
    pub amplitude: f64,
    /// Observation noise variance σ_n².
    pub noise: f64,
    /// Constant prior mean μ0.
    pub mean: f64,
}

impl GpHyper {
    pub fn unit(dim: usize) -> Self {
        GpHyper {
            lengthscales: vec![1.0; dim],
            amplitude: 1.0,
            noise: 1e-6,
            mean: 0.0,
        }
    }
}

/// `σ_f² (1 + √5 r + 5r²/3) exp(−√5 r)` with `r² = Σ ((x_i − y_i)/ℓ_i)²`.
pub fn matern52(x: &[f64], y: &[f64], lengthscales: &[f64], amplitude: f64) -> f64 {
    let r2: f64 = x
        .iter()
        .zip(y)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let d = (a - b) / l;
            d * d
        })
        .sum();
    let r = r2.sqrt();
    amplitude * (1.0 + SQRT5 * r + 5.0 * r2 / 3.0) * (-SQRT5 * r).exp()
}

/// Lower Cholesky factor of a row-major `n × n` matrix, or `None` if it is
/// not numerically positive definite.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Cholesky with escalating diagonal jitter (1e-8 up to 1e-4). Returns the
/// factor and the jitter that was needed.
pub fn cholesky_with_jitter(a: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    if let Some(l) = cholesky(a, n) {
        return Ok((l, 0.0));
    }
    let mut jitter = 1e-8;
    let mut work = a.to_vec();
    while jitter <= MAX_JITTER * (1.0 + 1e-9) {
        work.copy_from_slice(a);
        for i in 0..n {
            work[i * n + i] += jitter;
        }
        if let Some(l) = cholesky(&work, n) {
            return Ok((l, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::IllConditioned)
}

/// Solve `L z = b`.
pub fn forward_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    z
}

/// Solve `Lᵀ x = z`.
pub fn backward_solve(l: &[f64], n: usize, z: &[f64]) -> Vec<f64> {
    let mut x = z.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Posterior of a GP given explicit covariances: `gram` is `K` (without
/// noise), `k_star` the cross-covariances and `k_ss` the prior variance at
/// the query. Returns `(mean, variance)` with the variance clamped at 0.
pub fn posterior_from_covariances(
    gram: &[f64],
    k_star: &[f64],
    k_ss: f64,
    y: &[f64],
    noise: f64,
    mean: f64,
) -> Result<(f64, f64)> {
    let n = y.len();
    let mut a = gram.to_vec();
    for i in 0..n {
        a[i * n + i] += noise;
    }
    let (l, _) = cholesky_with_jitter(&a, n)?;
    let resid: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let alpha = backward_solve(&l, n, &forward_solve(&l, n, &resid));
    let v = forward_solve(&l, n, k_star);
    let mu = mean + k_star.iter().zip(&alpha).map(|(k, a)| k * a).sum::<f64>();
    let var = k_ss - v.iter().map(|x| x * x).sum::<f64>();
    Ok((mu, var.max(0.0)))
}

/// A GP conditioned on observations, ready for repeated queries.
#[derive(Clone, Debug)]
pub struct GpFit {
    xs: Vec<Vec<f64>>,
    hyper: GpHyper,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    log_likelihood: f64,
}

impl GpFit {
    pub fn new(xs: &[Vec<f64>], ys: &[f64], hyper: &GpHyper) -> Result<Self> {
        let n = xs.len();
        if n == 0 || ys.len() != n {
            return Err(Error::Dimension(
                "GP needs matching, non-empty inputs and targets".into(),
            ));
        }
        if hyper.lengthscales.iter().any(|&l| !(l > 0.0)) || !(hyper.amplitude > 0.0) || !(hyper.noise >= 0.0) {
            return Err(Error::Config("GP hyperparameters must be positive".into()));
        }
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = matern52(&xs[i], &xs[j], &hyper.lengthscales, hyper.amplitude);
                a[i * n + j] = k;
                a[j * n + i] = k;
            }
            a[i * n + i] += hyper.noise;
        }
        let (chol, _) = cholesky_with_jitter(&a, n)?;
        let resid: Vec<f64> = ys.iter().map(|v| v - hyper.mean).collect();
        let z = forward_solve(&chol, n, &resid);
        let alpha = backward_solve(&chol, n, &z);
        let log_det_half: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum();
        let quad: f64 = z.iter().map(|v| v * v).sum();
        let log_likelihood = -0.5 * quad - log_det_half - 0.5 * n as f64 * (2.0 * PI).ln();
        Ok(GpFit {
            xs: xs.to_vec(),
            hyper: hyper.clone(),
            chol,
            alpha,
            log_likelihood,
        })
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    /// Posterior mean and latent-function variance (clamped at 0).
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let (mu, var) = self.predict_raw(x);
        (mu, var.max(0.0))
    }

    /// As [`GpFit::predict`] without clamping the variance.
    pub fn predict_raw(&self, x: &[f64]) -> (f64, f64) {
        let n = self.xs.len();
        let h = &self.hyper;
        let k_star: Vec<f64> = self
            .xs
            .iter()
            .map(|xi| matern52(xi, x, &h.lengthscales, h.amplitude))
            .collect();
        let mu = h.mean + k_star.iter().zip(&self.alpha).map(|(k, a)| k * a).sum::<f64>();
        let v = forward_solve(&self.chol, n, &k_star);
        let var = h.amplitude - v.iter().map(|x| x * x).sum::<f64>();
        (mu, var)
    }
}

/// Posterior mean and variance at `query` given observations.
pub fn gp_posterior(xs: &[Vec<f64>], ys: &[f64], hyper: &GpHyper, query: &[f64]) -> Result<(f64, f64)> {
    Ok(GpFit::new(xs, ys, hyper)?.predict(query))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matern_closed_form() {
        // mpmath: (1 + √5 + 5/3)·e^{−√5}
        let k = matern52(&[0.0], &[1.0], &[1.0], 1.0);
        assert!((k - 0.523_994_108_831_820_3).abs() < 1e-15, "{k}");
        assert_eq!(matern52(&[0.2, 0.4], &[0.2, 0.4], &[0.3, 2.0], 1.7), 1.7);
        let a = matern52(&[0.0], &[0.1], &[0.5], 1.0);
        let b = matern52(&[0.0], &[0.2], &[0.5], 1.0);
        assert!(a > b);
    }

    #[test]
    fn one_point_closed_form() {
        let (m, v) = posterior_from_covariances(&[1.0], &[0.5], 1.0, &[2.0], 0.0, 0.0).unwrap();
        assert!((m - 1.0).abs() < 1e-15);
        assert!((v - 0.75).abs() < 1e-15);
    }

    #[test]
    fn interpolation_and_prior_reversion() {
        let xs = vec![vec![0.1, 0.2], vec![0.5, 0.9], vec![0.8, 0.3]];
        let ys = vec![1.0, -0.5, 2.0];
        let hyper = GpHyper {
            lengthscales: vec![0.3, 0.4],
            amplitude: 1.5,
            noise: 0.0,
            mean: 0.25,
        };
        let fit = GpFit::new(&xs, &ys, &hyper).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let (m, v) = fit.predict(x);
            assert!((m - y).abs() < 1e-8);
            assert!(v < 1e-8);
        }
        let (m, v) = fit.predict(&[1e4, -1e4]);
        assert!((m - 0.25).abs() < 1e-12);
        assert!((v - 1.5).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_need_jitter() {
        let xs = vec![vec![0.5], vec![0.5]];
        let hyper = GpHyper {
            noise: 0.0,
            ..GpHyper::unit(1)
        };
        let fit = GpFit::new(&xs, &[1.0, 1.0], &hyper).unwrap();
        assert!(fit.log_marginal_likelihood().is_finite());
        let singular = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(cholesky_with_jitter(&singular, 2), Err(Error::IllConditioned)));
    }

    #[test]
    fn log_likelihood_of_single_point() {
        // N(y; μ0, σ_f² + σ_n²) with y = 1, μ0 = 0, variance 2.
        let hyper = GpHyper {
            lengthscales: vec![1.0],
            amplitude: 1.5,
            noise: 0.5,
            mean: 0.0,
        };
        let fit = GpFit::new(&[vec![0.3]], &[1.0], &hyper).unwrap();
        let expected = -0.25 - 0.5 * (2.0 * PI * 2.0).ln();
        assert!((fit.log_marginal_likelihood() - expected).abs() < 1e-14);
    }
}

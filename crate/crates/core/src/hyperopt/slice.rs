//! Slice sampling of GP hyperparameters under log-normal priors.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gp::{GpFit, GpHyper};
use crate::error::{Error, Result};

pub const DEFAULT_DRAWS: usize = 10;
pub const DEFAULT_BURN_IN: usize = 20;

const STEP_OUT_LIMIT: usize = 32;
const SHRINK_LIMIT: usize = 200;

/// Independent normal priors: log lengthscales, log amplitude, log noise
/// and the constant mean.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperPrior {
    pub log_lengthscale: (f64, f64),
    pub log_amplitude: (f64, f64),
    pub log_noise: (f64, f64),
    /// (mean, variance) of μ0.
    pub mean: (f64, f64),
}

impl HyperPrior {
    /// ln ℓ ~ N(0,1), ln σ_f² ~ N(0,1), ln σ_n² ~ N(−6,1) and
    /// μ0 ~ N(mean(y), var(y)); a zero sample variance falls back to 1.
    pub fn for_targets(ys: &[f64]) -> Self {
        let n = ys.len().max(1) as f64;
        let m = ys.iter().sum::<f64>() / n;
        let v = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / n;
        HyperPrior {
            log_lengthscale: (0.0, 1.0),
            log_amplitude: (0.0, 1.0),
            log_noise: (-6.0, 1.0),
            mean: (m, if v > 0.0 { v } else { 1.0 }),
        }
    }

    fn log_density(&self, theta: &[f64], dim: usize) -> f64 {
        let lp = |x: f64, (mu, var): (f64, f64)| -0.5 * (x - mu) * (x - mu) / var;
        let mut total = 0.0;
        for &t in &theta[..dim] {
            total += lp(t, self.log_lengthscale);
        }
        total + lp(theta[dim], self.log_amplitude) + lp(theta[dim + 1], self.log_noise) + lp(theta[dim + 2], self.mean)
    }
}

fn to_hyper(theta: &[f64], dim: usize) -> GpHyper {
    GpHyper {
        lengthscales: theta[..dim].iter().map(|t| t.exp()).collect(),
        amplitude: theta[dim].exp(),
        noise: theta[dim + 1].exp(),
        mean: theta[dim + 2],
    }
}

fn log_posterior(xs: &[Vec<f64>], ys: &[f64], prior: &HyperPrior, theta: &[f64], dim: usize) -> f64 {
    if theta.iter().any(|t| !t.is_finite()) {
        return f64::NEG_INFINITY;
    }
    match GpFit::new(xs, ys, &to_hyper(theta, dim)) {
        Ok(fit) => {
            let ll = fit.log_marginal_likelihood();
            if ll.is_finite() {
                ll + prior.log_density(theta, dim)
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Draw `draws` hyperparameter settings by coordinate-wise slice sampling
/// (stepping out, then shrinkage) after `burn_in` full sweeps.
pub fn sample_kernel_hyperparams(
    xs: &[Vec<f64>],
    ys: &[f64],
    prior: &HyperPrior,
    seed: u64,
    draws: usize,
    burn_in: usize,
) -> Result<Vec<GpHyper>> {
    if xs.len() < 2 || ys.len() != xs.len() {
        return Err(Error::Config("slice sampling needs at least two observations".into()));
    }
    let dim = xs[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; dim + 3];
    theta[dim + 1] = prior.log_noise.0;
    theta[dim + 2] = prior.mean.0;
    let mut current = log_posterior(xs, ys, prior, &theta, dim);
    if !current.is_finite() {
        // Surface the factorization error for the starting point.
        GpFit::new(xs, ys, &to_hyper(&theta, dim))?;
        return Err(Error::IllConditioned);
    }
    let widths: Vec<f64> = (0..dim + 3)
        .map(|i| if i == dim + 2 { prior.mean.1.sqrt() } else { 1.0 })
        .collect();
    let mut out = Vec::with_capacity(draws);
    for sweep in 0..burn_in + draws {
        for i in 0..theta.len() {
            current = slice_coordinate(&mut theta, i, widths[i], current, &mut rng, |t| {
                log_posterior(xs, ys, prior, t, dim)
            });
        }
        if sweep >= burn_in {
            out.push(to_hyper(&theta, dim));
        }
    }
    Ok(out)
}

fn slice_coordinate<R: Rng, F: Fn(&[f64]) -> f64>(
    theta: &mut [f64],
    i: usize,
    width: f64,
    current: f64,
    rng: &mut R,
    logp: F,
) -> f64 {
    let x0 = theta[i];
    let level = current + rng.gen::<f64>().ln();
    let eval = |x: f64, theta: &mut [f64]| {
        theta[i] = x;
        logp(theta)
    };
    let mut lo = x0 - width * rng.gen::<f64>();
    let mut hi = lo + width;
    for _ in 0..STEP_OUT_LIMIT {
        if eval(lo, theta) <= level {
            break;
        }
        lo -= width;
    }
    for _ in 0..STEP_OUT_LIMIT {
        if eval(hi, theta) <= level {
            break;
        }
        hi += width;
    }
    for _ in 0..SHRINK_LIMIT {
        let x = lo + (hi - lo) * rng.gen::<f64>();
        let lp = eval(x, theta);
        if lp > level {
            return lp;
        }
        if x < x0 {
            lo = x;
        } else {
            hi = x;
        }
    }
    theta[i] = x0;
    current
}

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use super::acquisition::expected_improvement;
use super::gp::GpFit;
use super::slice::{sample_kernel_hyperparams, HyperPrior, DEFAULT_BURN_IN, DEFAULT_DRAWS};
use super::space::SearchSpace;
use crate::error::{Error, Result};

/// Number of space-filling suggestions before the GP takes over.
pub const INITIAL_DESIGN: usize = 3;
pub const RANDOM_CANDIDATES: usize = 1000;
pub const LOCAL_CANDIDATES: usize = 10;
pub const LOCAL_SIGMA: f64 = 0.05;
pub const DEFAULT_BUDGET: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub index: usize,
    /// Point in the unit hypercube.
    pub unit: Vec<f64>,
    /// Decoded values in dimension order.
    pub values: Vec<(String, f64)>,
    /// `None` while pending; `+∞` for a failed evaluation.
    pub objective: Option<f64>,
    pub wall_seconds: f64,
}

impl Trial {
    pub fn pending(index: usize, unit: Vec<f64>, space: &SearchSpace) -> Self {
        let values = space.decode(&unit);
        Trial {
            index,
            unit,
            values,
            objective: None,
            wall_seconds: 0.0,
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` points of a seeded Latin hypercube: each dimension has one point in
/// each of `n` equal strata, jittered within the stratum.
pub fn latin_hypercube(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, 0);
    let mut pts = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (p, &s) in pts.iter_mut().zip(&strata) {
            p[d] = (s as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    pts
}

/// Standardize finite objectives to zero mean and unit variance; failed
/// trials are placed one unit above the worst finite value.
pub fn standardize(objectives: &[f64]) -> Vec<f64> {
    let finite: Vec<f64> = objectives.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return vec![0.0; objectives.len()];
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    let z: Vec<f64> = objectives.iter().map(|v| (v - mean) / sd).collect();
    let worst = z
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    z.into_iter()
        .map(|v| if v.is_finite() { v } else { worst + 1.0 })
        .collect()
}

/// Propose the next configuration given completed trials.
///
/// The first [`INITIAL_DESIGN`] proposals come from a Latin hypercube fixed
/// by `seed`. Later proposals maximize expected improvement averaged over
/// slice-sampled GP hyperparameters, across random candidates and Gaussian
/// perturbations of the incumbent. Ties keep the earliest candidate. If the
/// GP cannot be fitted, the first random candidate is returned.
pub fn suggest_next(history: &[Trial], space: &SearchSpace, seed: u64) -> Trial {
    let dim = space.len();
    let index = history.len();
    let done: Vec<&Trial> = history.iter().filter(|t| t.objective.is_some()).collect();
    if index < INITIAL_DESIGN || done.len() < 2 {
        let unit = if index < INITIAL_DESIGN {
            latin_hypercube(INITIAL_DESIGN, dim, seed).swap_remove(index)
        } else {
            let mut rng = stream_rng(seed, index as u64 + 1);
            (0..dim).map(|_| rng.gen::<f64>()).collect()
        };
        return Trial::pending(index, unit, space);
    }

    let mut rng = stream_rng(seed, index as u64 + 1);
    let xs: Vec<Vec<f64>> = done.iter().map(|t| t.unit.clone()).collect();
    let raw: Vec<f64> = done.iter().map(|t| t.objective.unwrap_or(f64::INFINITY)).collect();
    let ys = standardize(&raw);
    let (best_i, best) = ys
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &y)| if y < acc.1 { (i, y) } else { acc });

    let mut candidates: Vec<Vec<f64>> = (0..RANDOM_CANDIDATES)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let noise = Normal::new(0.0, LOCAL_SIGMA).expect("valid sigma");
    for _ in 0..LOCAL_CANDIDATES {
        candidates.push(
            xs[best_i]
                .iter()
                .map(|&x| (x + noise.sample(&mut rng)).clamp(0.0, 1.0))
                .collect(),
        );
    }

    let prior = HyperPrior::for_targets(&ys);
    let sampler_seed: u64 = rng.gen();
    let fits: Vec<GpFit> =
        match sample_kernel_hyperparams(&xs, &ys, &prior, sampler_seed, DEFAULT_DRAWS, DEFAULT_BURN_IN) {
            Ok(draws) => draws.iter().filter_map(|h| GpFit::new(&xs, &ys, h).ok()).collect(),
            Err(_) => Vec::new(),
        };
    if fits.is_empty() {
        return Trial::pending(index, candidates.swap_remove(0), space);
    }
    let mut best_c = 0;
    let mut best_ei = f64::NEG_INFINITY;
    for (c, x) in candidates.iter().enumerate() {
        let ei = fits
            .iter()
            .map(|f| {
                let (m, v) = f.predict(x);
                expected_improvement(m, v, best)
            })
            .sum::<f64>()
            / fits.len() as f64;
        if ei > best_ei {
            best_ei = ei;
            best_c = c;
        }
    }
    Trial::pending(index, candidates.swap_remove(best_c), space)
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub trials: Vec<Trial>,
    pub best: usize,
    /// Running minimum of the objective after each trial.
    pub best_so_far: Vec<f64>,
}

impl SearchResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    /// One JSON object per trial.
    pub fn trace_records(&self, space: &SearchSpace) -> Vec<Value> {
        self.trials
            .iter()
            .zip(&self.best_so_far)
            .map(|(t, b)| {
                json!({
                    "index": t.index,
                    "config": space.values_to_json(&t.values),
                    "objective": t.objective.filter(|v| v.is_finite()),
                    "best_so_far": Some(*b).filter(|v| v.is_finite()),
                    "wall_seconds": t.wall_seconds,
                })
            })
            .collect()
    }

    /// JSON-lines trace.
    pub fn write_trace<W: Write>(&self, space: &SearchSpace, mut w: W) -> Result<()> {
        for rec in self.trace_records(space) {
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Sequential suggest → evaluate → record loop. Non-finite or failed
/// objective values are recorded as `+∞`.
pub fn run_search<F>(mut objective: F, space: &SearchSpace, budget: usize, seed: u64) -> Result<SearchResult>
where
    F: FnMut(&Trial) -> Result<f64>,
{
    run_search_with(&mut objective, space, budget, seed, |_, _| {})
}

/// As [`run_search`], calling `on_trial` after each evaluation.
pub fn run_search_with<F, G>(
    objective: &mut F,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    mut on_trial: G,
) -> Result<SearchResult>
where
    F: FnMut(&Trial) -> Result<f64>,
    G: FnMut(&Trial, f64),
{
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    let mut trials: Vec<Trial> = Vec::with_capacity(budget);
    let mut best_so_far = Vec::with_capacity(budget);
    let mut best = 0;
    let mut running = f64::INFINITY;
    for _ in 0..budget {
        let mut trial = suggest_next(&trials, space, seed);
        let start = Instant::now();
        let value = match objective(&trial) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        };
        trial.wall_seconds = start.elapsed().as_secs_f64();
        trial.objective = Some(value);
        if value < running || trials.is_empty() {
            if value < running {
                running = value;
            }
            best = trials.len();
        }
        best_so_far.push(running);
        on_trial(&trial, running);
        trials.push(trial);
    }
    Ok(SearchResult {
        trials,
        best,
        best_so_far,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperopt::{Dim, DimKind};

    fn unit_space(d: usize) -> SearchSpace {
        SearchSpace::new(
            (0..d)
                .map(|i| Dim {
                    name: format!("x{i}"),
                    lower: 0.0,
                    upper: 1.0,
                    kind: DimKind::Real,
                })
                .collect(),
        )
        .unwrap()
    }

    fn done(index: usize, unit: Vec<f64>, y: f64, space: &SearchSpace) -> Trial {
        let mut t = Trial::pending(index, unit, space);
        t.objective = Some(y);
        t
    }

    #[test]
    fn latin_hypercube_strata() {
        let pts = latin_hypercube(3, 4, 7);
        for d in 0..4 {
            let mut s: Vec<usize> = pts.iter().map(|p| (p[d] * 3.0) as usize).collect();
            s.sort();
            assert_eq!(s, vec![0, 1, 2]);
        }
        assert_eq!(pts, latin_hypercube(3, 4, 7));
    }

    #[test]
    fn empty_history_gives_valid_config() {
        let space = SearchSpace::classifier();
        let t = suggest_next(&[], &space, 0);
        for (name, v) in &t.values {
            space.check(name, *v).unwrap();
        }
    }

    #[test]
    fn identical_history_moves_away() {
        let space = unit_space(2);
        let hist: Vec<Trial> = (0..4).map(|i| done(i, vec![0.4, 0.6], 1.0, &space)).collect();
        let t = suggest_next(&hist, &space, 3);
        assert_ne!(t.unit, vec![0.4, 0.6]);
    }

    #[test]
    fn quadratic_suggestion_near_minimum() {
        let space = unit_space(1);
        let xs = [0.0, 0.1, 0.2, 0.45, 0.6, 0.9];
        let hist: Vec<Trial> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| done(i, vec![x], (x - 0.3) * (x - 0.3), &space))
            .collect();
        let t = suggest_next(&hist, &space, 1);
        assert!((t.unit[0] - 0.3).abs() <= 0.15, "suggested {}", t.unit[0]);
    }

    #[test]
    fn failures_are_penalized_and_trace_is_monotone() {
        let space = unit_space(2);
        let mut calls = 0;
        let res = run_search(
            |t| {
                calls += 1;
                if calls % 3 == 0 {
                    Err(Error::Diverged)
                } else if calls % 4 == 0 {
                    Ok(f64::NAN)
                } else {
                    Ok((t.unit[0] - 0.2).powi(2) + t.unit[1])
                }
            },
            &space,
            8,
            2,
        )
        .unwrap();
        assert_eq!(res.trials.len(), 8);
        assert_eq!(res.trials[2].objective, Some(f64::INFINITY));
        assert!(res.best_so_far.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(res.best_trial().objective.unwrap(), *res.best_so_far.last().unwrap());
    }

    #[test]
    fn budget_one_returns_the_design_point() {
        let space = unit_space(3);
        let res = run_search(|t| Ok(t.unit[0]), &space, 1, 5).unwrap();
        assert_eq!(res.trials.len(), 1);
        assert_eq!(res.best, 0);
        assert_eq!(res.trials[0].unit, latin_hypercube(3, 3, 5)[0]);
    }

    #[test]
    fn standardize_handles_failures_and_constants() {
        let z = standardize(&[1.0, 3.0, f64::INFINITY]);
        assert_eq!(z, vec![-1.0, 1.0, 2.0]);
        assert_eq!(standardize(&[2.0, 2.0]), vec![0.0, 0.0]);
    }
}

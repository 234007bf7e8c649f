//! Translation-based domain adaptation of source tasks.
//!
//! A source is mapped onto the target by `x' = x + theta`. The translation is
//! chosen to maximize `(1 - |theta|_inf) * spearman(f_s(X - theta), y)` over
//! `theta in [-1, 1]^d`, where `X, y` is the target database and `f_s` the
//! source surrogate. The objective is piecewise constant in `theta`, so the
//! search is a derivative-free differential evolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::{pearson_of_ranks, rank_vector};
use crate::surrogate::Surrogate;
use crate::task::Database;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationMap {
    pub theta: Vec<f64>,
    /// Regularized similarity at `theta`.
    pub s_adapted: f64,
    /// `1 - |theta|_inf`.
    pub alpha: f64,
    /// Objective evaluations spent; each costs one surrogate call per database point.
    pub evaluations: usize,
    /// No evaluated translation produced a non-degenerate rank correlation.
    pub degenerate: bool,
}

impl AdaptationMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            theta: vec![0.0; dim],
            s_adapted: 0.0,
            alpha: 1.0,
            evaluations: 0,
            degenerate: false,
        }
    }
}

/// Inner search settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdaConfig {
    pub population: usize,
    /// Objective evaluations, including the initial population.
    pub eval_budget: usize,
    pub f: f64,
    pub cr: f64,
}

impl Default for SdaConfig {
    fn default() -> Self {
        Self {
            population: 20,
            eval_budget: 1000,
            f: 0.5,
            cr: 0.9,
        }
    }
}

pub fn regularizer(theta: &[f64]) -> f64 {
    1.0 - theta.iter().map(|t| t.abs()).fold(0.0, f64::max)
}

/// Regularized rank similarity of a translation; the flag reports a
/// degenerate (all-tied) correlation.
pub fn adapted_similarity(
    surrogate: &dyn Surrogate,
    db: &Database,
    target_ranks: &[f64],
    theta: &[f64],
) -> (f64, bool) {
    let preds: Vec<f64> = db
        .points()
        .iter()
        .map(|x| {
            let shifted: Vec<f64> = x.iter().zip(theta).map(|(a, t)| a - t).collect();
            surrogate.predict_mean(&shifted)
        })
        .collect();
    let Ok(ranks) = rank_vector(&preds) else {
        return (0.0, true);
    };
    let s = pearson_of_ranks(&ranks, target_ranks);
    (regularizer(theta) * s.rho, s.degenerate)
}

/// Fits the translation map of one source against the target database.
pub fn sda_fit(
    surrogate: &dyn Surrogate,
    db: &Database,
    cfg: &SdaConfig,
    rng: &mut RngStream,
) -> Result<AdaptationMap> {
    if db.len() < 3 {
        return Err(Error::invalid("adaptation needs at least three target evaluations"));
    }
    if cfg.population < 4 || cfg.eval_budget < cfg.population {
        return Err(Error::invalid(format!(
            "adaptation budget {} cannot cover a population of {}",
            cfg.eval_budget, cfg.population
        )));
    }
    let dim = db.dim().unwrap_or(0);
    let target_ranks = rank_vector(db.values())?;
    let mut evaluations = 0usize;
    let mut any_informative = false;
    let mut objective = |theta: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let (v, degenerate) = adapted_similarity(surrogate, db, &target_ranks, theta);
        any_informative |= !degenerate;
        v
    };

    let n = cfg.population;
    let mut pop: Vec<Vec<f64>> = vec![vec![0.0; dim]];
    while pop.len() < n {
        pop.push((0..dim).map(|_| 2.0 * rng.uniform() - 1.0).collect());
    }
    let mut fit: Vec<f64> = pop.iter().map(|t| objective(t, &mut evaluations)).collect();
    let mut best = 0;
    for i in 1..n {
        if fit[i] > fit[best] {
            best = i;
        }
    }
    let (mut best_theta, mut best_val) = (pop[best].clone(), fit[best]);

    'outer: loop {
        for i in 0..n {
            if evaluations >= cfg.eval_budget {
                break 'outer;
            }
            let (r1, r2, r3) = three_distinct(n, i, rng);
            let jrand = rng.index(dim);
            let trial: Vec<f64> = (0..dim)
                .map(|j| {
                    if j == jrand || rng.uniform() < cfg.cr {
                        (pop[r1][j] + cfg.f * (pop[r2][j] - pop[r3][j])).clamp(-1.0, 1.0)
                    } else {
                        pop[i][j]
                    }
                })
                .collect();
            let v = objective(&trial, &mut evaluations);
            if v > best_val {
                best_val = v;
                best_theta = trial.clone();
            }
            // accept ties so the population can drift across plateaus
            if v >= fit[i] {
                pop[i] = trial;
                fit[i] = v;
            }
        }
    }

    if !any_informative {
        return Ok(AdaptationMap {
            evaluations,
            degenerate: true,
            ..AdaptationMap::identity(dim)
        });
    }
    Ok(AdaptationMap {
        alpha: regularizer(&best_theta),
        theta: best_theta,
        s_adapted: best_val,
        evaluations,
        degenerate: false,
    })
}

fn three_distinct(n: usize, exclude: usize, rng: &mut RngStream) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let r = rng.index(n);
        if !taken.contains(&r) {
            return r;
        }
    };
    let r1 = pick(&[exclude]);
    let r2 = pick(&[exclude, r1]);
    let r3 = pick(&[exclude, r1, r2]);
    (r1, r2, r3)
}

/// Moves a source solution by the fitted translation, clamped to `[0, 1]^d`.
pub fn adapt_solution(x: &[f64], map: &AdaptationMap) -> Vec<f64> {
    x.iter()
        .zip(&map.theta)
        .map(|(v, t)| (v + t).clamp(0.0, 1.0))
        .collect()
}

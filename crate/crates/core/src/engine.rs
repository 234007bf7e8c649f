//! The surrogate-assisted search loop: initialize by LHS, then repeatedly fit,
//! acquire, guard, evaluate and archive until the budget is spent.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::acquire::{acquire_candidate, AcquisitionResult, EvoConfig, InfillCriterion};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sampling::lhs_sample;
use crate::surrogate::{FittedSurrogate, GprConfig, RbfModel, SurrogateKind};
use crate::task::{Database, Task};

/// Configuration of a backbone optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    /// Label used in outputs.
    pub name: String,
    pub surrogate: SurrogateKind,
    pub criterion: InfillCriterion,
    #[serde(default)]
    pub evo: EvoConfig,
    pub n_init: usize,
    pub budget: usize,
    #[serde(default = "default_dedup_tol")]
    pub dedup_tol: f64,
    #[serde(default)]
    pub gpr: GprConfig,
}

fn default_dedup_tol() -> f64 {
    1e-6
}

impl BackboneConfig {
    /// GPR + LCB searched by SBX/polynomial-mutation EA.
    pub fn bo_lcb() -> Self {
        Self {
            name: "bo-lcb".into(),
            surrogate: SurrogateKind::Gpr,
            criterion: InfillCriterion::lcb(),
            evo: EvoConfig::default(),
            n_init: 50,
            budget: 500,
            dedup_tol: default_dedup_tol(),
            gpr: GprConfig::default(),
        }
    }

    /// Cubic RBF + predicted objective value searched by DE/best/1.
    pub fn rbf_pov() -> Self {
        Self {
            name: "rbf-pov".into(),
            surrogate: SurrogateKind::Rbf,
            criterion: InfillCriterion::pov(),
            evo: EvoConfig::de(),
            ..Self::bo_lcb()
        }
    }

    pub fn with_budget(mut self, n_init: usize, budget: usize) -> Self {
        self.n_init = n_init;
        self.budget = budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::invalid("n_init must be at least 2"));
        }
        if self.n_init > self.budget {
            return Err(Error::invalid(format!(
                "n_init ({}) exceeds the evaluation budget ({})",
                self.n_init, self.budget
            )));
        }
        if !(self.dedup_tol > 0.0) {
            return Err(Error::invalid("dedup_tol must be positive"));
        }
        self.criterion.validate()?;
        self.evo.validate()
    }
}

/// One real evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    /// 1-based evaluation index.
    pub fe: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_so_far: f64,
    pub transferred: bool,
    pub source_id: Option<usize>,
    pub delta_in: Option<f64>,
    pub delta_ex_max: Option<f64>,
    /// The primary surrogate failed this cycle and a fallback was used.
    pub fallback: bool,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub seed: u64,
    pub records: Vec<EvalRecord>,
    pub wall_time: Duration,
}

impl RunTrace {
    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_so_far)
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_so_far).collect()
    }

    pub fn database(&self) -> Database {
        let mut db = Database::new();
        for r in &self.records {
            db.push(r.x.clone(), r.y);
        }
        db
    }
}

/// What a transfer hook wants evaluated this cycle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HookDecision {
    /// Replacement candidate and the source it came from.
    pub candidate: Option<(Vec<f64>, usize)>,
    pub delta_ex_max: Option<f64>,
}

/// Extension point between acquisition and evaluation.
pub trait CycleHook {
    /// Called once when the initial design has been evaluated.
    fn on_initialized(&mut self, _db: &Database) -> Result<()> {
        Ok(())
    }

    fn decide(&mut self, db: &Database, acquisition: &AcquisitionResult) -> Result<HookDecision>;
}

/// Runs the plain backbone.
pub fn run_sas(task: &mut Task, cfg: &BackboneConfig, rng: &mut RngStream) -> Result<RunTrace> {
    run_with_hook(task, cfg, rng, None)
}

pub(crate) fn run_with_hook(
    task: &mut Task,
    cfg: &BackboneConfig,
    rng: &mut RngStream,
    mut hook: Option<&mut dyn CycleHook>,
) -> Result<RunTrace> {
    cfg.validate()?;
    let start = Instant::now();
    let dim = task.dim();
    let mut db = Database::new();
    let mut trace = RunTrace {
        seed: rng.seed(),
        records: Vec::with_capacity(cfg.budget),
        wall_time: Duration::ZERO,
    };

    let abort = |trace: &mut RunTrace, fe: usize| -> Error {
        trace.wall_time = start.elapsed();
        Error::NonFiniteObjective {
            fe,
            partial: Box::new(trace.clone()),
        }
    };

    for x in lhs_sample(cfg.n_init, dim, rng)? {
        let y = task.evaluate(&x);
        if !y.is_finite() {
            return Err(abort(&mut trace, db.len() + 1));
        }
        db.push(x.clone(), y);
        trace.records.push(EvalRecord {
            fe: db.len(),
            x,
            y,
            best_so_far: db.best_value().unwrap_or(y),
            transferred: false,
            source_id: None,
            delta_in: None,
            delta_ex_max: None,
            fallback: false,
        });
    }
    if let Some(h) = hook.as_deref_mut() {
        h.on_initialized(&db)?;
    }

    while db.len() < cfg.budget {
        let (model, fallback) = fit_with_fallback(cfg, &db);
        let (acq, fallback) = match model {
            Some(m) => (acquire_candidate(&m, &db, &cfg.criterion, &cfg.evo, rng), fallback),
            None => {
                let x: Vec<f64> = (0..dim).map(|_| rng.uniform()).collect();
                (
                    AcquisitionResult {
                        x_p: x,
                        infill_at_xp: f64::NAN,
                        baseline: f64::NAN,
                        delta_in: 0.0,
                    },
                    true,
                )
            }
        };

        let decision = match hook.as_deref_mut() {
            Some(h) => h.decide(&db, &acq)?,
            None => HookDecision::default(),
        };
        let (candidate, source_id) = match decision.candidate {
            Some((x, id)) => (x, Some(id)),
            None => (acq.x_p.clone(), None),
        };
        let (x, _) = dedup_guard(&candidate, &db, cfg.dedup_tol, rng);
        let y = task.evaluate(&x);
        if !y.is_finite() {
            return Err(abort(&mut trace, db.len() + 1));
        }
        db.push(x.clone(), y);
        trace.records.push(EvalRecord {
            fe: db.len(),
            x,
            y,
            best_so_far: db.best_value().unwrap_or(y),
            transferred: source_id.is_some(),
            source_id,
            delta_in: Some(acq.delta_in),
            delta_ex_max: decision.delta_ex_max,
            fallback,
        });
    }
    trace.wall_time = start.elapsed();
    Ok(trace)
}

/// Fits the configured surrogate; on failure falls back to RBF for this cycle.
/// Returns `None` when no model could be fitted at all.
fn fit_with_fallback(cfg: &BackboneConfig, db: &Database) -> (Option<FittedSurrogate>, bool) {
    match FittedSurrogate::fit(cfg.surrogate, db.points(), db.values(), &cfg.gpr) {
        Ok(m) => (Some(m), false),
        Err(e) => {
            log::warn!("{:?} surrogate failed ({e}); falling back to RBF", cfg.surrogate);
            if cfg.surrogate == SurrogateKind::Rbf {
                return (None, true);
            }
            (RbfModel::fit(db.points(), db.values()).ok().map(FittedSurrogate::Rbf), true)
        }
    }
}

fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn nearest_distance(x: &[f64], db: &Database) -> f64 {
    db.points()
        .iter()
        .map(|p| chebyshev(x, p))
        .fold(f64::INFINITY, f64::min)
}

/// Attempts made before giving up on finding an isolated point.
pub const DEDUP_ATTEMPTS: usize = 100;

/// Returns `x` if it is farther than `tol` (Chebyshev) from every database
/// point; otherwise a uniformly resampled point that is, or the farthest of
/// [`DEDUP_ATTEMPTS`] draws. The flag reports whether `x` was replaced.
pub fn dedup_guard(x: &[f64], db: &Database, tol: f64, rng: &mut RngStream) -> (Vec<f64>, bool) {
    if nearest_distance(x, db) > tol {
        return (x.to_vec(), false);
    }
    let mut farthest: Option<(Vec<f64>, f64)> = None;
    for _ in 0..DEDUP_ATTEMPTS {
        let z: Vec<f64> = (0..x.len()).map(|_| rng.uniform()).collect();
        let d = nearest_distance(&z, db);
        if d > tol {
            return (z, true);
        }
        if farthest.as_ref().is_none_or(|(_, best)| d > *best) {
            farthest = Some((z, d));
        }
    }
    (farthest.map(|(z, _)| z).unwrap_or_else(|| x.to_vec()), true)
}

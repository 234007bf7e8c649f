//! Black-box tasks and the evaluation database.
//!
//! All geometry outside [`Task`] lives in the common space `[0, 1]^d`; a task
//! maps common-space points to problem units before calling its objective.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Objective = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A box-bounded minimization task.
#[derive(Clone)]
pub struct Task {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Objective,
    evals: usize,
}

impl fmt::Debug for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Task")
            .field("name", &self.name)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("evals", &self.evals)
            .finish()
    }
}

impl Task {
    pub fn new(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        objective: Objective,
    ) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("task dimension must be positive"));
        }
        if lower.len() != upper.len() {
            return Err(Error::invalid("bound vectors differ in length"));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "degenerate bounds in dimension {j}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            lower,
            upper,
            objective,
            evals: 0,
        })
    }

    /// Convenience constructor for closures.
    pub fn from_fn<F>(name: impl Into<String>, lower: Vec<f64>, upper: Vec<f64>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(name, lower, upper, Arc::new(f))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn eval_count(&self) -> usize {
        self.evals
    }

    /// Fresh copy with the evaluation counter reset.
    pub fn fresh(&self) -> Self {
        let mut t = self.clone();
        t.evals = 0;
        t
    }

    /// Maps a problem-space point into `[0, 1]^d`. Out-of-bounds coordinates
    /// are clamped and reported through the returned flag.
    pub fn normalize(&self, x: &[f64]) -> (Vec<f64>, bool) {
        let mut clamped = false;
        let z = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&xi, (&lo, &hi))| {
                let v = (xi - lo) / (hi - lo);
                if !(0.0..=1.0).contains(&v) {
                    clamped = true;
                }
                v.clamp(0.0, 1.0)
            })
            .collect();
        (z, clamped)
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&zi, (&lo, &hi))| lo + zi * (hi - lo))
            .collect()
    }

    /// Evaluates the objective at a common-space point. Counts one evaluation.
    pub fn evaluate(&mut self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.dim());
        self.evals += 1;
        let x = self.denormalize(z);
        (self.objective)(&x)
    }

    /// Objective in problem units, without touching the counter.
    pub fn peek(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }
}

/// Evaluated points (common space) and their objective values, in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Database {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        Ok(Self { points, values })
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) {
        self.points.push(x);
        self.values.push(y);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    /// Index of the first minimal value.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, v) in self.values.iter().enumerate() {
            match best {
                Some(b) if self.values[b] <= *v => {}
                _ => best = Some(i),
            }
        }
        best
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best_index().map(|i| self.values[i])
    }

    /// Running minimum of the values; entry `t` is the best after `t + 1` evaluations.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.values
            .iter()
            .map(|&v| {
                best = best.min(v);
                best
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn sphere_task() -> Task {
        Task::from_fn("sphere", vec![-5.0, -5.0], vec![5.0, 5.0], |x| {
            x.iter().map(|v| v * v).sum()
        })
        .unwrap()
    }

    #[test]
    fn midpoint_and_boundary() {
        let t = Task::from_fn("t", vec![-5.0], vec![5.0], |_| 0.0).unwrap();
        assert_eq!(t.normalize(&[0.0]).0, vec![0.5]);
        assert_eq!(t.normalize(&[-5.0]).0, vec![0.0]);
        let (z, clamped) = t.normalize(&[7.0]);
        assert!(clamped);
        assert_eq!(z, vec![1.0]);
    }

    #[test]
    fn roundtrip_is_identity() {
        let t = sphere_task();
        let mut rng = RngStream::new(5);
        for _ in 0..100 {
            let x = vec![-5.0 + 10.0 * rng.uniform(), -5.0 + 10.0 * rng.uniform()];
            let (z, clamped) = t.normalize(&x);
            assert!(!clamped);
            let back = t.denormalize(&z);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_bounds_rejected() {
        assert!(Task::from_fn("t", vec![1.0], vec![1.0], |_| 0.0).is_err());
        assert!(Task::from_fn("t", vec![], vec![], |_| 0.0).is_err());
    }

    #[test]
    fn counter_increments_per_call() {
        let mut t = sphere_task();
        t.evaluate(&[0.5, 0.5]);
        t.evaluate(&[0.1, 0.5]);
        assert_eq!(t.eval_count(), 2);
        assert_eq!(t.fresh().eval_count(), 0);
    }

    #[test]
    fn best_so_far_is_non_increasing() {
        let db = Database::from_parts(
            vec![vec![0.0]; 5],
            vec![3.0, 4.0, 1.0, 2.0, 1.0],
        )
        .unwrap();
        assert_eq!(db.best_so_far(), vec![3.0, 3.0, 1.0, 1.0, 1.0]);
        assert_eq!(db.best_index(), Some(2));
    }
}

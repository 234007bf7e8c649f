use std::fmt;
use std::sync::Arc;

use crate::adapt::AdaptationMap;
use crate::error::{Error, Result};
use crate::surrogate::{FittedSurrogate, GprConfig, Surrogate, SurrogateKind};

use super::decay::{fit_decay, DecayModel};

/// Archive of one previously optimized source task.
#[derive(Clone)]
pub struct SourceRecord {
    pub task_id: String,
    /// Problem-unit bounds of the source, kept for reference.
    pub bounds: (Vec<f64>, Vec<f64>),
    /// Evaluated points in common space, in evaluation order.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub decay: DecayModel,
    pub best_index: usize,
    pub surrogate: Arc<dyn Surrogate>,
    pub adaptation: Option<AdaptationMap>,
}

impl fmt::Debug for SourceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceRecord")
            .field("task_id", &self.task_id)
            .field("evaluations", &self.y.len())
            .field("decay", &self.decay)
            .field("best_index", &self.best_index)
            .finish_non_exhaustive()
    }
}

impl SourceRecord {
    /// Builds a record from a raw archive: fits the surrogate and the decay
    /// model of the archive's best-so-far trace.
    pub fn from_archive(
        task_id: impl Into<String>,
        bounds: (Vec<f64>, Vec<f64>),
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        kind: SurrogateKind,
        gpr: &GprConfig,
    ) -> Result<Self> {
        let surrogate = FittedSurrogate::fit(kind, &x, &y, gpr)?;
        Self::with_surrogate(task_id, bounds, x, y, Arc::new(surrogate))
    }

    /// Builds a record around an already available surrogate.
    pub fn with_surrogate(
        task_id: impl Into<String>,
        bounds: (Vec<f64>, Vec<f64>),
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        surrogate: Arc<dyn Surrogate>,
    ) -> Result<Self> {
        if x.len() != y.len() || y.is_empty() {
            return Err(Error::invalid(format!(
                "source archive has {} points and {} values",
                x.len(),
                y.len()
            )));
        }
        let mut best_so_far = Vec::with_capacity(y.len());
        let mut best_index = 0;
        for (i, &v) in y.iter().enumerate() {
            if v < y[best_index] {
                best_index = i;
            }
            best_so_far.push(y[best_index]);
        }
        let decay = fit_decay(&best_so_far, None)?;
        Ok(Self {
            task_id: task_id.into(),
            bounds,
            x,
            y,
            decay,
            best_index,
            surrogate,
            adaptation: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    /// Total number of source evaluations.
    pub fn tau_max(&self) -> usize {
        self.y.len()
    }

    pub fn best_solution(&self) -> &[f64] {
        &self.x[self.best_index]
    }

    pub fn best_value(&self) -> f64 {
        self.y[self.best_index]
    }
}

/// The collection of source records available to a run.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    pub dim: usize,
    pub records: Vec<SourceRecord>,
}

impl KnowledgeBase {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
        }
    }

    pub fn new(dim: usize, records: Vec<SourceRecord>) -> Result<Self> {
        if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| r.dim() != dim) {
            return Err(Error::invalid(format!(
                "source {i} has dimension {} but the knowledge base has {dim}",
                r.dim()
            )));
        }
        Ok(Self { dim, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

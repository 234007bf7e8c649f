use serde::Serialize;

use crate::error::Result;
use crate::stats::{spearman, Spearman};
use crate::surrogate::Surrogate;
use crate::task::Database;

use super::decay::DecayModel;
use super::kb::SourceRecord;

/// Rank correlation between a source surrogate's predictions on the target
/// database and the target's true values.
pub fn ssrc(surrogate: &dyn Surrogate, db: &Database) -> Result<Spearman> {
    let preds: Vec<f64> = db.points().iter().map(|x| surrogate.predict_mean(x)).collect();
    spearman(&preds, db.values())
}

/// Where the target's evaluated points sit on a source's convergence curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SourceImprovement {
    /// Best prediction on the target database minus the source optimum.
    pub delta_y: f64,
    /// Source time at which its decay model reaches the best prediction.
    pub tau_v: f64,
    /// Source evaluations remaining from `tau_v` to the end of its run.
    pub delta_tau: f64,
}

/// Returns `None` when the source decay is degenerate.
pub fn source_improvement(record: &SourceRecord, db: &Database) -> Option<SourceImprovement> {
    if record.decay.degenerate {
        return None;
    }
    let min_pred = db
        .points()
        .iter()
        .map(|x| record.surrogate.predict_mean(x))
        .fold(f64::INFINITY, f64::min);
    let tau_max = record.tau_max() as f64;
    let tau_v = if min_pred <= record.decay.gamma_o {
        tau_max
    } else {
        record
            .decay
            .time_to_reach(min_pred)
            .unwrap_or(tau_max)
            .clamp(0.0, tau_max)
    };
    Some(SourceImprovement {
        delta_y: min_pred - record.best_value(),
        tau_v,
        delta_tau: tau_max - tau_v,
    })
}

/// Target-side improvement expected from transferring a source with
/// similarity `s`, `delta_tau` source evaluations ahead of the target.
pub fn external_improvement(
    s: f64,
    target: &DecayModel,
    tau: f64,
    delta_tau: f64,
    best_y: f64,
) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    s * (best_y - target.value(s * (tau + delta_tau)))
}

/// Diagnostics of one source at a competition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourceEntry {
    pub source: usize,
    /// Similarity before rectification; the adapted one when adaptation is on.
    pub s: f64,
    pub s_plus: f64,
    pub delta_y: f64,
    pub tau_v: f64,
    pub delta_tau: f64,
    pub delta_ex: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferDecision {
    pub delta_in: f64,
    pub entries: Vec<SourceEntry>,
    pub winning_source: Option<usize>,
    pub delta_ex_max: Option<f64>,
    pub x_e: Vec<f64>,
    /// Candidate of the best external source, whether or not it won.
    pub x_tilde_max: Option<Vec<f64>>,
}

/// Picks the candidate to evaluate. A source wins only with strictly larger
/// external improvement; equal external improvements go to the lowest index.
/// The returned `winning_source` indexes `externals`.
pub fn compete(delta_in: f64, x_p: &[f64], externals: &[(f64, Vec<f64>)]) -> TransferDecision {
    let mut best: Option<usize> = None;
    for (i, (d, _)) in externals.iter().enumerate() {
        if best.is_none_or(|b| *d > externals[b].0) {
            best = Some(i);
        }
    }
    let delta_ex_max = best.map(|b| externals[b].0);
    let winner = best.filter(|&b| delta_in < externals[b].0);
    TransferDecision {
        delta_in,
        entries: Vec::new(),
        winning_source: winner,
        delta_ex_max,
        x_e: match winner {
            Some(b) => externals[b].1.clone(),
            None => x_p.to_vec(),
        },
        x_tilde_max: best.map(|b| externals[b].1.clone()),
    }
}

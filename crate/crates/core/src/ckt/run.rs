use serde::{Deserialize, Serialize};

use crate::acquire::AcquisitionResult;
use crate::adapt::{adapt_solution, sda_fit, AdaptationMap, SdaConfig};
use crate::engine::{run_with_hook, BackboneConfig, CycleHook, HookDecision, RunTrace};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::task::{Database, Task};

use super::decay::{count_improvements, fit_decay};
use super::kb::KnowledgeBase;
use super::transfer::{
    compete, external_improvement, source_improvement, ssrc, SourceEntry, TransferDecision,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AdaptationMode {
    #[default]
    Off,
    /// Fit each source's translation once, on the initial design.
    Offline,
    /// Refit the translations at every competition.
    Online,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CktConfig {
    /// Competitions happen when the database size is a multiple of this.
    pub delta: usize,
    pub adaptation: AdaptationMode,
    /// Strict best-so-far improvements needed before the target decay is used.
    pub min_improvements_for_fit: usize,
    pub sda: SdaConfig,
}

impl Default for CktConfig {
    fn default() -> Self {
        Self {
            delta: 20,
            adaptation: AdaptationMode::Off,
            min_improvements_for_fit: 3,
            sda: SdaConfig::default(),
        }
    }
}

impl CktConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 {
            return Err(Error::invalid("transfer interval must be at least 1"));
        }
        Ok(())
    }
}

/// Evaluation indices (1-based) at which a competition is held.
pub fn transfer_checkpoints(backbone: &BackboneConfig, ckt: &CktConfig) -> Vec<usize> {
    (backbone.n_init..backbone.budget)
        .filter(|size| size % ckt.delta.max(1) == 0)
        .map(|size| size + 1)
        .collect()
}

struct CktHook<'a> {
    kb: &'a KnowledgeBase,
    cfg: &'a CktConfig,
    rng: RngStream,
    transferred: Vec<bool>,
    maps: Vec<Option<AdaptationMap>>,
    decisions: Vec<(usize, TransferDecision)>,
}

impl CktHook<'_> {
    fn fit_maps(&mut self, db: &Database) -> Result<()> {
        for (i, rec) in self.kb.records.iter().enumerate() {
            if self.transferred[i] {
                continue;
            }
            let map = sda_fit(rec.surrogate.as_ref(), db, &self.cfg.sda, &mut self.rng)?;
            self.maps[i] = Some(map);
        }
        Ok(())
    }

    fn compete_at(&mut self, db: &Database, acq: &AcquisitionResult) -> Result<Option<TransferDecision>> {
        let trace = db.best_so_far();
        if count_improvements(&trace) < self.cfg.min_improvements_for_fit {
            return Ok(None);
        }
        let target = fit_decay(&trace, None)?;
        if target.degenerate {
            return Ok(None);
        }
        if self.cfg.adaptation == AdaptationMode::Online {
            self.fit_maps(db)?;
        }
        let tau = db.len() as f64;
        let best_y = db.best_value().unwrap_or(f64::INFINITY);

        let mut entries = Vec::new();
        let mut externals = Vec::new();
        for (i, rec) in self.kb.records.iter().enumerate() {
            if self.transferred[i] {
                continue;
            }
            let Some(imp) = source_improvement(rec, db) else {
                continue;
            };
            let (s, candidate) = match &self.maps[i] {
                Some(map) => (map.s_adapted, adapt_solution(rec.best_solution(), map)),
                None => match ssrc(rec.surrogate.as_ref(), db) {
                    Ok(sp) => (sp.rho, rec.best_solution().to_vec()),
                    Err(e) => {
                        log::warn!("similarity of source {i} unavailable: {e}");
                        (0.0, rec.best_solution().to_vec())
                    }
                },
            };
            let mut delta_ex = external_improvement(s, &target, tau, imp.delta_tau, best_y);
            if !delta_ex.is_finite() {
                delta_ex = 0.0;
            }
            entries.push(SourceEntry {
                source: i,
                s,
                s_plus: s.max(0.0),
                delta_y: imp.delta_y,
                tau_v: imp.tau_v,
                delta_tau: imp.delta_tau,
                delta_ex,
            });
            externals.push((delta_ex, candidate));
        }

        let mut decision = compete(acq.delta_in, &acq.x_p, &externals);
        decision.winning_source = decision.winning_source.map(|j| entries[j].source);
        decision.entries = entries;
        Ok(Some(decision))
    }
}

impl CycleHook for CktHook<'_> {
    fn on_initialized(&mut self, db: &Database) -> Result<()> {
        if self.cfg.adaptation == AdaptationMode::Offline && !self.kb.is_empty() {
            self.fit_maps(db)?;
        }
        Ok(())
    }

    fn decide(&mut self, db: &Database, acq: &AcquisitionResult) -> Result<HookDecision> {
        if self.kb.is_empty() || !db.len().is_multiple_of(self.cfg.delta) {
            return Ok(HookDecision::default());
        }
        let Some(decision) = self.compete_at(db, acq)? else {
            return Ok(HookDecision::default());
        };
        let out = HookDecision {
            candidate: decision.winning_source.map(|i| (decision.x_e.clone(), i)),
            delta_ex_max: decision.delta_ex_max,
        };
        if let Some(i) = decision.winning_source {
            self.transferred[i] = true;
        }
        self.decisions.push((db.len() + 1, decision));
        Ok(out)
    }
}

/// Runs the backbone with knowledge competition against `kb`.
pub fn run_sas_ckt(
    task: &mut Task,
    kb: &KnowledgeBase,
    backbone: &BackboneConfig,
    ckt: &CktConfig,
    rng: &mut RngStream,
) -> Result<RunTrace> {
    run_sas_ckt_detailed(task, kb, backbone, ckt, rng).map(|(trace, _)| trace)
}

/// Like [`run_sas_ckt`], also returning each competition's decision keyed by
/// the evaluation index it decided.
pub fn run_sas_ckt_detailed(
    task: &mut Task,
    kb: &KnowledgeBase,
    backbone: &BackboneConfig,
    ckt: &CktConfig,
    rng: &mut RngStream,
) -> Result<(RunTrace, Vec<(usize, TransferDecision)>)> {
    ckt.validate()?;
    if !kb.is_empty() && kb.dim != task.dim() {
        return Err(Error::invalid(format!(
            "knowledge base dimension {} does not match task dimension {}",
            kb.dim,
            task.dim()
        )));
    }
    let mut hook = CktHook {
        kb,
        cfg: ckt,
        rng: rng.fork(0xADA9),
        transferred: vec![false; kb.len()],
        maps: vec![None; kb.len()],
        decisions: Vec::new(),
    };
    let trace = run_with_hook(task, backbone, rng, Some(&mut hook))?;
    Ok((trace, hook.decisions))
}

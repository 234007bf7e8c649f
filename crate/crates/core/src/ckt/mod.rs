//! Competitive knowledge transfer: similarity, convergence analogy, and the
//! competition between surrogate-acquired and archived candidates.

mod decay;
mod kb;
mod run;
mod transfer;

pub use decay::{count_improvements, fit_decay, DecayModel};
pub use kb::{KnowledgeBase, SourceRecord};
pub use run::{run_sas_ckt, run_sas_ckt_detailed, transfer_checkpoints, AdaptationMode, CktConfig};
pub use transfer::{
    compete, external_improvement, source_improvement, ssrc, SourceEntry, SourceImprovement,
    TransferDecision,
};

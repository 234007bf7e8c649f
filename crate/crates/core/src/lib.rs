//! Surrogate-assisted optimization of expensive black-box functions with
//! competitive knowledge transfer from previously solved source tasks.
//!
//! A run alternates between fitting a surrogate to the evaluated points and
//! evaluating the candidate that minimizes an infill criterion on it. With a
//! knowledge base attached ([`ckt::run_sas_ckt`]), every `delta` evaluations
//! the best archived solutions of the source tasks compete with that
//! candidate: each source's expected improvement on the target is estimated
//! from its rank similarity and from where the target sits on the source's
//! convergence curve, and the larger of the internal and external estimates
//! decides what is evaluated.
//!
//! ```no_run
//! use sas_ckt::prelude::*;
//!
//! let mut task = Task::from_fn("sphere", vec![-5.0; 2], vec![5.0; 2], |x| {
//!     x.iter().map(|v| v * v).sum()
//! })?;
//! let cfg = BackboneConfig::bo_lcb().with_budget(20, 60);
//! let trace = run_sas(&mut task, &cfg, &mut RngStream::new(7))?;
//! println!("best value: {:?}", trace.final_best());
//! # Ok::<(), sas_ckt::Error>(())
//! ```

pub mod acquire;
pub mod adapt;
pub mod ckt;
pub mod engine;
mod error;
pub mod harness;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod surrogate;
pub mod task;
pub mod theory;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::acquire::{EvoConfig, InfillCriterion, Operators};
    pub use crate::ckt::{run_sas_ckt, CktConfig, KnowledgeBase, SourceRecord};
    pub use crate::engine::{run_sas, BackboneConfig, RunTrace};
    pub use crate::rng::RngStream;
    pub use crate::surrogate::{GprConfig, Surrogate, SurrogateKind};
    pub use crate::task::{Database, Task};
    pub use crate::Error;
}

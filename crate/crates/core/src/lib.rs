//! Simulation core for loss-tolerant quantum coin flipping.
//!
//! Alice sends one of four real qubit states `|ψ_{x,a}⟩`, Bob measures in a
//! random basis and answers with a bit `b`, Alice reveals `(x, a)` and the
//! coin is `a ⊕ b`. Lost photons simply restart the round. The crate covers
//! the states and measurements ([`quantum`]), sources and loss ([`source`]),
//! honest and cheating players ([`strategies`]), the round engine
//! ([`protocol`]), closed-form analysis and stopping rules ([`analysis`]),
//! and sessions with running statistics ([`session`], [`stats`]).

pub mod analysis;
pub mod config;
pub mod error;
pub mod protocol;
pub mod quantum;
pub mod report;
pub mod rng;
pub mod session;
pub mod source;
pub mod stats;
pub mod strategies;

pub use config::{ConfigDocument, SessionConfig, StopPolicy};
pub use error::{Error, Result};
pub use protocol::{Engine, FlipRecord, Reveal, Verdict};
pub use quantum::{CircleDensity, ProtocolStateSet, StateAngle};
pub use session::{run_session, run_session_with, FinalReport, Session, StopTracker};
pub use stats::SessionStats;

//! Coarsest simulation preorders over finite transition systems.
//!
//! The central entry point is [`engine::run`], which takes a transition
//! system plus an initial preorder given as a partition-relation pair and
//! refines it down to the coarsest simulation preorder it contains. A
//! deliberately naive reference implementation lives in [`oracle`] so
//! results can be cross-checked, and [`format`] reads and writes the text
//! formats used by the command-line front end.

pub mod batch;
pub mod cli;
pub mod engine;
pub mod error;
pub mod format;
pub mod gen;
pub mod model;
pub mod oracle;
pub mod partition;

pub use engine::{run, run_with_stats, Checks, Engine, EngineStats};
pub use error::{Error, Result};
pub use model::{quotient, PartitionRelationPair, State, StateRelation, TransitionSystem};

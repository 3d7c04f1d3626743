//! Preference hint discovery over an interaction-integrated knowledge graph.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every pure piece of the
//! pipeline: the graph and interaction indices, the trainable hint model with
//! its dual credibility attention and BPR objective, inference-time hint
//! discovery, head-centric prompt rendering, response parsing and the
//! instance/metric bookkeeping used for evaluation. File formats, checkpoints,
//! network backends and the command line live in the `hintkg` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod choice;
pub mod config;
pub mod discovery;
mod error;
pub mod graph;
pub mod instances;
pub mod interactions;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod pass;
pub mod prompt;
pub mod select;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use graph::{AttributeTuple, EntityId, GraphBuilder, ItemId, KnowledgeGraph, RelationId, TupleId};
pub use interactions::{InteractionLog, Split, UserId};

//! Temporal knowledge-graph link prediction with a reinforcement-learning
//! walker.
//!
//! An agent starts at a query's subject entity and walks a fixed number of
//! hops over historical edges. Two sub-policy networks score each candidate
//! edge — one over static (relation, entity) features, one over time-encoded
//! relation features — and a per-candidate sigmoid gate fuses their scores
//! before the softmax. Training is REINFORCE over terminal 0/1 rewards;
//! inference expands the policy with beam search and ranks answer entities by
//! accumulated path probability, evaluated with time-aware filtered MRR and
//! Hits@k.
//!
//! Modules follow the pipeline: [`kg`] (indexed store) → [`env`] (walk
//! mechanics) → [`diffnet`] (autodiff core) → [`policy`] (the network) →
//! [`trainer`] / [`ranker`] → [`evaluator`], with [`config`], [`checkpoint`],
//! and [`report`] as the operational surface used by the CLI.

pub mod checkpoint;
pub mod config;
pub mod diffnet;
pub mod env;
mod error;
pub mod evaluator;
pub mod kg;
pub mod policy;
pub mod ranker;
pub mod report;
pub mod trainer;
pub mod types;

pub use error::{Error, Result};
pub use types::{Action, EntityId, Quadruple, Query, RelationId, TimeStep};

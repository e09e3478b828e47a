//! Embedding of heterogeneous information networks with personalized spacey
//! random walks.
//!
//! The pipeline is: load or generate a [`TypedGraph`], parse a meta-path,
//! meta-graph or use the meta-schema as walk [`Guidance`], generate a walk
//! corpus, then train node vectors with the heterogeneous skipgram model.
//! [`oracle`] holds dense reference computations for small graphs and
//! [`eval`] the classification and link prediction harness.

pub mod error;
pub mod eval;
pub mod graph;
pub mod metalang;
pub mod oracle;
pub mod pipeline;
pub mod skipgram;
pub mod synth;
pub mod walk;

pub use error::{Error, Result};
pub use graph::{derive_schema, load_graph, GraphBuilder, MetaSchema, NodeId, TypeId, TypedGraph};
pub use metalang::{parse_metagraph, parse_metapath, MetaGraph, MetaPath, SpaceyGraph};
pub use walk::{generate_corpus, Corpus, Guidance, WalkConfig, WalkMode, Walker, WalkerState};

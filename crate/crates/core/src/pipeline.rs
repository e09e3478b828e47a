//! Walk corpus generation followed by skipgram training.

use std::time::Instant;

use crate::error::Result;
use crate::graph::TypedGraph;
use crate::skipgram::{train_with_stats, EmbeddingMatrix, TrainConfig, TrainStats};
use crate::walk::{generate_corpus, Corpus, Guidance, WalkConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub walk_secs: f64,
    pub train_secs: f64,
}

#[derive(Clone, Debug)]
pub struct Embedded {
    pub corpus: Corpus,
    pub embedding: EmbeddingMatrix,
    pub train_stats: TrainStats,
    pub timings: PhaseTimings,
}

pub fn embed(g: &TypedGraph, guidance: &Guidance, walk: &WalkConfig, train: &TrainConfig) -> Result<Embedded> {
    let t0 = Instant::now();
    let corpus = generate_corpus(g, guidance, walk)?;
    let walk_secs = t0.elapsed().as_secs_f64();
    log::info!(
        "phase=walk secs={walk_secs:.6} nodes={} walks={} steps={}",
        g.node_count(),
        corpus.stats.walks_emitted,
        corpus.stats.total_steps
    );
    let t1 = Instant::now();
    let (embedding, train_stats) = train_with_stats(&corpus.walks, g, train)?;
    let train_secs = t1.elapsed().as_secs_f64();
    log::info!(
        "phase=train secs={train_secs:.6} nodes={} pairs={}",
        g.node_count(),
        train_stats.pairs
    );
    Ok(Embedded {
        corpus,
        embedding,
        train_stats,
        timings: PhaseTimings { walk_secs, train_secs },
    })
}

//! Heterogeneous skipgram with type-aware negative sampling.

mod io;

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{NodeId, TypeId, TypedGraph};

pub use io::{read_binary, read_text, write_binary, write_text, NodeVectors};

/// Exponent applied to node counts in the negative-sampling distribution.
pub const NEGATIVE_POWER: f64 = 0.75;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NegativeScope {
    /// Negatives share the context node's type.
    #[default]
    PerType,
    /// Negatives drawn from the whole vocabulary.
    Global,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WindowMode {
    /// `win` nodes on each side.
    #[default]
    Radius,
    /// `win` nodes in total, split evenly between both sides.
    Span,
}

#[derive(Clone, Debug)]
struct Table {
    nodes: Vec<NodeId>,
    probs: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl Table {
    fn new(nodes: Vec<NodeId>, counts: &[u64]) -> Option<Self> {
        let weights: Vec<f64> = nodes
            .iter()
            .map(|u| (counts[u.index()] as f64).powf(NEGATIVE_POWER))
            .collect();
        let total: f64 = weights.iter().sum();
        if nodes.is_empty() || total <= 0.0 {
            return None;
        }
        let index = WeightedIndex::new(&weights).ok()?;
        Some(Table {
            probs: weights.iter().map(|w| w / total).collect(),
            nodes,
            index,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NodeId {
        self.nodes[self.index.sample(rng)]
    }
}

/// Corpus node counts and negative-sampling tables.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    counts: Vec<u64>,
    node_types: Vec<TypeId>,
    per_type: Vec<Option<Table>>,
    global: Table,
}

impl Vocabulary {
    pub fn count(&self, u: NodeId) -> u64 {
        self.counts.get(u.index()).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.global.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.nodes.is_empty()
    }

    /// Nodes present in the corpus, in id order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.global.nodes
    }

    pub fn nodes_of_type(&self, t: TypeId) -> &[NodeId] {
        self.per_type[t.index()].as_ref().map_or(&[], |tb| &tb.nodes)
    }

    /// Probability that a negative drawn for a context of `u`'s type (or
    /// globally) is `u`.
    pub fn negative_probability(&self, u: NodeId, scope: NegativeScope) -> f64 {
        let table = match scope {
            NegativeScope::Global => Some(&self.global),
            NegativeScope::PerType => self.per_type[self.node_types[u.index()].index()].as_ref(),
        };
        table
            .and_then(|tb| tb.nodes.binary_search(&u).ok().map(|i| tb.probs[i]))
            .unwrap_or(0.0)
    }

    /// Draws one negative for a context node `ctx`.
    pub fn sample_negative<R: Rng + ?Sized>(&self, ctx: NodeId, scope: NegativeScope, rng: &mut R) -> NodeId {
        match scope {
            NegativeScope::Global => self.global.sample(rng),
            NegativeScope::PerType => self.per_type[self.node_types[ctx.index()].index()]
                .as_ref()
                .expect("context node is in the vocabulary")
                .sample(rng),
        }
    }
}

pub fn build_vocab(corpus: &[Vec<NodeId>], g: &TypedGraph) -> Result<Vocabulary> {
    let mut counts = vec![0u64; g.node_count()];
    for walk in corpus {
        for &u in walk {
            *counts
                .get_mut(u.index())
                .ok_or_else(|| Error::UnknownNode(format!("#{}", u.0)))? += 1;
        }
    }
    let present: Vec<NodeId> = g.nodes().filter(|u| counts[u.index()] > 0).collect();
    let global = Table::new(present.clone(), &counts).ok_or(Error::Empty("corpus"))?;
    let per_type = (0..g.type_count())
        .map(|t| {
            let nodes = present.iter().copied().filter(|&u| g.node_type(u).index() == t).collect();
            Table::new(nodes, &counts)
        })
        .collect();
    Ok(Vocabulary {
        counts,
        node_types: g.nodes().map(|u| g.node_type(u)).collect(),
        per_type,
        global,
    })
}

/// Per-side context radius for a window setting.
pub fn window_radius(win: usize, mode: WindowMode) -> usize {
    match mode {
        WindowMode::Radius => win,
        WindowMode::Span => win / 2,
    }
}

/// All `(center, context)` pairs within `radius` positions of each other.
pub fn window_pairs(seq: &[NodeId], radius: usize) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
    (0..seq.len()).flat_map(move |p| {
        let lo = p.saturating_sub(radius);
        let hi = (p + radius).min(seq.len().saturating_sub(1));
        (lo..=hi).filter(move |&q| q != p).map(move |q| (seq[p], seq[q]))
    })
}

/// Number of pairs [`window_pairs`] yields for a sequence of length `n`.
pub fn pair_count(n: usize, radius: usize) -> usize {
    (1..=radius.min(n.saturating_sub(1))).map(|k| 2 * (n - k)).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub window_mode: WindowMode,
    pub negatives: usize,
    pub lr0: f64,
    pub epochs: usize,
    pub seed: u64,
    pub deterministic: bool,
    pub negative_scope: NegativeScope,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            window: 10,
            window_mode: WindowMode::Radius,
            negatives: 5,
            lr0: 0.025,
            epochs: 1,
            seed: 0,
            deterministic: true,
            negative_scope: NegativeScope::PerType,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if window_radius(self.window, self.window_mode) == 0 {
            return bad("window must cover at least one neighbor per side");
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("lr0 must be positive");
        }
        Ok(())
    }
}

/// Center (`v`) and context (`u`) vectors, row-major by node id.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    center: Vec<f64>,
    context: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(nodes: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            dim,
            center: vec![0.0; nodes * dim],
            context: vec![0.0; nodes * dim],
        }
    }

    /// Centers uniform in `[-0.5/d, 0.5/d]`, contexts zero.
    pub fn init(nodes: usize, dim: usize, seed: u64) -> Self {
        let mut m = Self::zeros(nodes, dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f64;
        for x in &mut m.center {
            *x = rng.random_range(-half..=half);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.center.len() / self.dim.max(1)
    }

    pub fn center(&self, u: NodeId) -> &[f64] {
        &self.center[u.index() * self.dim..(u.index() + 1) * self.dim]
    }

    pub fn context(&self, u: NodeId) -> &[f64] {
        &self.context[u.index() * self.dim..(u.index() + 1) * self.dim]
    }

    pub fn center_mut(&mut self, u: NodeId) -> &mut [f64] {
        &mut self.center[u.index() * self.dim..(u.index() + 1) * self.dim]
    }

    pub fn context_mut(&mut self, u: NodeId) -> &mut [f64] {
        &mut self.context[u.index() * self.dim..(u.index() + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.center.iter().chain(&self.context).all(|x| x.is_finite())
    }

    /// Center vectors keyed by external node name.
    pub fn to_node_vectors(&self, g: &TypedGraph) -> NodeVectors {
        NodeVectors::new(
            g.nodes().map(|u| g.node_name(u).to_string()).collect(),
            self.dim,
            self.center.clone(),
        )
        .expect("row count matches graph")
    }

    /// Center vectors of the nodes that occur in `corpus`, in node order.
    pub fn corpus_vectors(&self, g: &TypedGraph, corpus: &[Vec<NodeId>]) -> NodeVectors {
        let mut seen = vec![false; g.node_count()];
        corpus.iter().flatten().for_each(|u| seen[u.index()] = true);
        let keep: Vec<NodeId> = g.nodes().filter(|u| seen[u.index()]).collect();
        let mut data = Vec::with_capacity(keep.len() * self.dim);
        for &u in &keep {
            data.extend_from_slice(self.center(u));
        }
        NodeVectors::new(keep.iter().map(|&u| g.node_name(u).to_string()).collect(), self.dim, data)
            .expect("row count matches selection")
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four independent lanes let the compiler use packed multiplies
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `log s(u_ctx . v) + sum log s(-u_neg . v)` for one pair.
pub fn pair_objective(emb: &EmbeddingMatrix, center: NodeId, context: NodeId, negatives: &[NodeId]) -> f64 {
    let v = emb.center(center);
    log_sigmoid(dot(emb.context(context), v))
        + negatives
            .iter()
            .map(|&n| log_sigmoid(-dot(emb.context(n), v)))
            .sum::<f64>()
}

/// Gradient of [`pair_objective`] (ascent direction).
#[derive(Clone, Debug, PartialEq)]
pub struct PairGradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradient, assuming `context` and the negatives are distinct.
pub fn pair_gradient(emb: &EmbeddingMatrix, center: NodeId, context: NodeId, negatives: &[NodeId]) -> PairGradient {
    let v = emb.center(center);
    let u = emb.context(context);
    let g_pos = 1.0 - sigmoid(dot(u, v));
    let mut dv: Vec<f64> = u.iter().map(|x| g_pos * x).collect();
    let mut dneg = Vec::with_capacity(negatives.len());
    for &n in negatives {
        let un = emb.context(n);
        let g_neg = sigmoid(dot(un, v));
        dv.iter_mut().zip(un).for_each(|(d, x)| *d -= g_neg * x);
        dneg.push(v.iter().map(|x| -g_neg * x).collect());
    }
    PairGradient {
        center: dv,
        context: v.iter().map(|x| g_pos * x).collect(),
        negatives: dneg,
    }
}

/// Row access shared by the exclusive and the lock-free matrices.
trait Rows {
    fn dim(&self) -> usize;
    fn v(&self, i: usize) -> f64;
    fn add_v(&mut self, i: usize, x: f64);
    fn u(&self, i: usize) -> f64;
    fn add_u(&mut self, i: usize, x: f64);

    fn dot_rows(&self, vo: usize, uo: usize) -> f64 {
        (0..self.dim()).map(|k| self.v(vo + k) * self.u(uo + k)).sum()
    }

    /// Accumulates `g * u` into `neu`, then moves `u` by `g * v`. Returns
    /// whether the updated row is finite.
    fn push_target(&mut self, vo: usize, uo: usize, g: f64, neu: &mut [f64]) -> bool {
        let mut finite = true;
        for (k, acc) in neu.iter_mut().enumerate() {
            *acc += g * self.u(uo + k);
            self.add_u(uo + k, g * self.v(vo + k));
            finite &= self.u(uo + k).is_finite();
        }
        finite
    }

    fn add_center(&mut self, vo: usize, neu: &[f64]) -> bool {
        let mut finite = true;
        for (k, &x) in neu.iter().enumerate() {
            self.add_v(vo + k, x);
            finite &= self.v(vo + k).is_finite();
        }
        finite
    }
}

impl Rows for EmbeddingMatrix {
    fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    fn v(&self, i: usize) -> f64 {
        self.center[i]
    }
    #[inline]
    fn add_v(&mut self, i: usize, x: f64) {
        self.center[i] += x;
    }
    #[inline]
    fn u(&self, i: usize) -> f64 {
        self.context[i]
    }
    #[inline]
    fn add_u(&mut self, i: usize, x: f64) {
        self.context[i] += x;
    }

    // slice versions so the loops vectorize
    fn dot_rows(&self, vo: usize, uo: usize) -> f64 {
        let d = self.dim;
        dot(&self.center[vo..vo + d], &self.context[uo..uo + d])
    }

    fn push_target(&mut self, vo: usize, uo: usize, g: f64, neu: &mut [f64]) -> bool {
        let d = self.dim;
        let v = &self.center[vo..vo + d];
        let u = &mut self.context[uo..uo + d];
        let mut finite = true;
        for ((acc, uk), vk) in neu.iter_mut().zip(u.iter_mut()).zip(v) {
            *acc += g * *uk;
            *uk += g * vk;
            finite &= uk.is_finite();
        }
        finite
    }

    fn add_center(&mut self, vo: usize, neu: &[f64]) -> bool {
        let d = self.dim;
        let mut finite = true;
        for (vk, x) in self.center[vo..vo + d].iter_mut().zip(neu) {
            *vk += x;
            finite &= vk.is_finite();
        }
        finite
    }
}

/// Shared matrix updated without coordination by parallel workers.
struct AtomicMatrix {
    dim: usize,
    center: Vec<AtomicU64>,
    context: Vec<AtomicU64>,
}

#[derive(Clone, Copy)]
struct AtomicView<'a>(&'a AtomicMatrix);

#[inline]
fn atomic_add(cell: &AtomicU64, x: f64) {
    let cur = f64::from_bits(cell.load(Ordering::Relaxed));
    cell.store((cur + x).to_bits(), Ordering::Relaxed);
}

impl Rows for AtomicView<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }
    #[inline]
    fn v(&self, i: usize) -> f64 {
        f64::from_bits(self.0.center[i].load(Ordering::Relaxed))
    }
    #[inline]
    fn add_v(&mut self, i: usize, x: f64) {
        atomic_add(&self.0.center[i], x)
    }
    #[inline]
    fn u(&self, i: usize) -> f64 {
        f64::from_bits(self.0.context[i].load(Ordering::Relaxed))
    }
    #[inline]
    fn add_u(&mut self, i: usize, x: f64) {
        atomic_add(&self.0.context[i], x)
    }
}

fn step_rows<R: Rows>(
    rows: &mut R,
    center: NodeId,
    context: NodeId,
    negatives: &[NodeId],
    lr: f64,
    neu: &mut [f64],
) -> Result<()> {
    let d = rows.dim();
    let vo = center.index() * d;
    neu.iter_mut().for_each(|x| *x = 0.0);
    let targets = std::iter::once((context, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (t, label) in targets {
        let uo = t.index() * d;
        let s = rows.dot_rows(vo, uo);
        let g = (label - sigmoid(s)) * lr;
        if !rows.push_target(vo, uo, g, neu) {
            return Err(Error::NonFinite(format!("context row #{} (dot {s}, lr {lr})", t.0)));
        }
    }
    if !rows.add_center(vo, neu) {
        return Err(Error::NonFinite(format!("center row #{} (lr {lr})", center.0)));
    }
    Ok(())
}

/// One negative-sampling update for a `(center, context)` pair. The center
/// gradient is taken at the context vectors before they move.
pub fn sgd_step(emb: &mut EmbeddingMatrix, center: NodeId, context: NodeId, negatives: &[NodeId], lr: f64) -> Result<()> {
    let n = emb.node_count();
    for &u in std::iter::once(&center).chain(std::iter::once(&context)).chain(negatives) {
        if u.index() >= n {
            return Err(Error::UnknownNode(format!("#{}", u.0)));
        }
    }
    let mut neu = vec![0.0; emb.dim];
    step_rows(emb, center, context, negatives, lr, &mut neu)
}

/// Candidate-set softmax `exp(u_ctx . v) / sum exp(u_j . v)`.
pub fn softmax_prob(emb: &EmbeddingMatrix, center: NodeId, context: NodeId, candidates: &[NodeId]) -> f64 {
    let v = emb.center(center);
    let logits: Vec<f64> = candidates.iter().map(|&c| dot(emb.context(c), v)).collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    (dot(emb.context(context), v) - m).exp() / z
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrainStats {
    pub pairs: usize,
    pub steps: usize,
    pub negatives_drawn: usize,
    /// Negatives equal to the context node, dropped from their step.
    pub negatives_skipped: usize,
}

fn learning_rate(lr0: f64, done: usize, total: usize) -> f64 {
    let frac = if total == 0 { 0.0 } else { done as f64 / total as f64 };
    lr0 * (1.0 - (1.0 - 1e-4) * frac.min(1.0))
}

pub fn train(corpus: &[Vec<NodeId>], g: &TypedGraph, cfg: &TrainConfig) -> Result<EmbeddingMatrix> {
    train_with_stats(corpus, g, cfg).map(|(e, _)| e)
}

pub fn train_with_stats(corpus: &[Vec<NodeId>], g: &TypedGraph, cfg: &TrainConfig) -> Result<(EmbeddingMatrix, TrainStats)> {
    cfg.validate()?;
    if corpus.iter().all(|w| w.is_empty()) {
        return Err(Error::Empty("corpus"));
    }
    let vocab = build_vocab(corpus, g)?;
    let radius = window_radius(cfg.window, cfg.window_mode);
    let per_epoch: usize = corpus.iter().map(|w| pair_count(w.len(), radius)).sum();
    let total = per_epoch * cfg.epochs;
    let mut emb = EmbeddingMatrix::init(g.node_count(), cfg.dim, cfg.seed);

    if cfg.deterministic {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6e65_6761_7469_7665);
        let mut stats = TrainStats::default();
        let mut neu = vec![0.0; cfg.dim];
        let mut negs = Vec::with_capacity(cfg.negatives);
        for _ in 0..cfg.epochs {
            for walk in corpus {
                for (c, x) in window_pairs(walk, radius) {
                    let lr = learning_rate(cfg.lr0, stats.pairs, total);
                    draw_negatives(&vocab, x, cfg, &mut rng, &mut negs, &mut stats);
                    step_rows(&mut emb, c, x, &negs, lr, &mut neu)?;
                    stats.pairs += 1;
                    stats.steps += 1;
                }
            }
        }
        return Ok((emb, stats));
    }

    let shared = AtomicMatrix {
        dim: cfg.dim,
        center: emb.center.iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
        context: emb.context.iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
    };
    let done = AtomicUsize::new(0);
    let chunk = 64usize;
    let stats = (0..cfg.epochs)
        .flat_map(|e| (0..corpus.len().div_ceil(chunk)).map(move |c| (e, c)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(epoch, c)| -> Result<TrainStats> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((epoch as u64) << 40) ^ c as u64);
            let mut view = AtomicView(&shared);
            let mut stats = TrainStats::default();
            let mut neu = vec![0.0; cfg.dim];
            let mut negs = Vec::with_capacity(cfg.negatives);
            for walk in &corpus[c * chunk..((c + 1) * chunk).min(corpus.len())] {
                for (cn, x) in window_pairs(walk, radius) {
                    let lr = learning_rate(cfg.lr0, done.fetch_add(1, Ordering::Relaxed), total);
                    draw_negatives(&vocab, x, cfg, &mut rng, &mut negs, &mut stats);
                    step_rows(&mut view, cn, x, &negs, lr, &mut neu)?;
                    stats.pairs += 1;
                    stats.steps += 1;
                }
            }
            Ok(stats)
        })
        .try_reduce(TrainStats::default, |a, b| {
            Ok(TrainStats {
                pairs: a.pairs + b.pairs,
                steps: a.steps + b.steps,
                negatives_drawn: a.negatives_drawn + b.negatives_drawn,
                negatives_skipped: a.negatives_skipped + b.negatives_skipped,
            })
        })?;
    for (dst, src) in emb.center.iter_mut().zip(&shared.center) {
        *dst = f64::from_bits(src.load(Ordering::Relaxed));
    }
    for (dst, src) in emb.context.iter_mut().zip(&shared.context) {
        *dst = f64::from_bits(src.load(Ordering::Relaxed));
    }
    Ok((emb, stats))
}

fn draw_negatives<R: Rng>(
    vocab: &Vocabulary,
    ctx: NodeId,
    cfg: &TrainConfig,
    rng: &mut R,
    out: &mut Vec<NodeId>,
    stats: &mut TrainStats,
) {
    out.clear();
    for _ in 0..cfg.negatives {
        let n = vocab.sample_negative(ctx, cfg.negative_scope, rng);
        stats.negatives_drawn += 1;
        if n == ctx {
            stats.negatives_skipped += 1;
        } else {
            out.push(n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::toy_graph;
    use crate::graph::GraphBuilder;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&x| NodeId(x)).collect()
    }

    fn random_matrix(nodes: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = EmbeddingMatrix::zeros(nodes, dim);
        m.center.iter_mut().chain(m.context.iter_mut()).for_each(|x| *x = rng.random_range(-1.0..1.0));
        m
    }

    #[test]
    fn vocab_counts() {
        let g = toy_graph();
        let v = build_vocab(&[ids(&[0, 2, 0])], &g).unwrap();
        assert_eq!(v.count(NodeId(0)), 2);
        assert_eq!(v.count(NodeId(2)), 1);
        assert_eq!(v.count(NodeId(1)), 0);
        assert_eq!(v.len(), 2);
        assert!(build_vocab(&[ids(&[9])], &g).is_err());
    }

    #[test]
    fn equal_counts_uniform_table() {
        let g = toy_graph();
        let v = build_vocab(&[ids(&[0, 1, 0, 1, 4])], &g).unwrap();
        assert_eq!(v.negative_probability(NodeId(0), NegativeScope::PerType), 0.5);
        assert_eq!(v.negative_probability(NodeId(4), NegativeScope::PerType), 1.0);
    }

    #[test]
    fn table_mass_matches_direct_normalization() {
        let g = toy_graph();
        let corpus = [ids(&[0, 0, 0, 1, 2, 2, 3, 4, 4, 4, 4])];
        let v = build_vocab(&corpus, &g).unwrap();
        let counts = [3.0f64, 1.0, 2.0, 1.0, 4.0];
        let types = [0, 0, 1, 1, 2];
        for u in 0..5 {
            let same: f64 = (0..5).filter(|&j| types[j] == types[u]).map(|j| counts[j].powf(0.75)).sum();
            let all: f64 = counts.iter().map(|c| c.powf(0.75)).sum();
            let p = counts[u].powf(0.75);
            assert!((v.negative_probability(NodeId(u as u32), NegativeScope::PerType) - p / same).abs() < 1e-15);
            assert!((v.negative_probability(NodeId(u as u32), NegativeScope::Global) - p / all).abs() < 1e-15);
        }
    }

    #[test]
    fn negative_draw_frequencies() {
        let mut b = GraphBuilder::new();
        let mut corpus = Vec::new();
        for i in 0..5 {
            let u = b.add_node(&format!("a{i}"), "A").unwrap();
            let w = b.add_node(&format!("b{i}"), "B").unwrap();
            corpus.extend(std::iter::repeat_n(u, i + 1));
            corpus.extend(std::iter::repeat_n(w, 2 * i + 3));
        }
        let g = b.build();
        let v = build_vocab(&[corpus], &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ty in 0..2u16 {
            let ctx = v.nodes_of_type(TypeId(ty))[0];
            let mut hits = vec![0usize; g.node_count()];
            let draws = 1_000_000;
            for _ in 0..draws {
                let n = v.sample_negative(ctx, NegativeScope::PerType, &mut rng);
                assert_eq!(g.node_type(n), TypeId(ty));
                hits[n.index()] += 1;
            }
            for &u in v.nodes_of_type(TypeId(ty)) {
                let p = v.negative_probability(u, NegativeScope::PerType);
                let f = hits[u.index()] as f64 / draws as f64;
                assert!((f - p).abs() <= 0.01 * p, "{u:?} {f} {p}");
            }
        }
    }

    #[test]
    fn window_pairs_small() {
        let s = ids(&[0, 1, 2]);
        let got: Vec<_> = window_pairs(&s, 1).collect();
        assert_eq!(
            got,
            vec![
                (NodeId(0), NodeId(1)),
                (NodeId(1), NodeId(0)),
                (NodeId(1), NodeId(2)),
                (NodeId(2), NodeId(1))
            ]
        );
        assert_eq!(window_pairs(&ids(&[5]), 3).count(), 0);
        assert_eq!(window_radius(10, WindowMode::Span), 5);
    }

    proptest! {
        #[test]
        fn pair_count_two_ways(n in 0usize..60, r in 1usize..15) {
            let seq: Vec<NodeId> = (0..n as u32).map(NodeId).collect();
            let by_position: usize = (0..n).map(|p| p.min(r) + (n - 1 - p).min(r)).sum();
            prop_assert_eq!(window_pairs(&seq, r).count(), by_position);
            prop_assert_eq!(pair_count(n, r), by_position);
        }

        #[test]
        fn small_step_never_lowers_objective(seed in 0u64..1000, m in 0usize..4) {
            let mut e = random_matrix(8, 6, seed);
            let negs: Vec<NodeId> = (2..2 + m as u32).map(NodeId).collect();
            let before = pair_objective(&e, NodeId(0), NodeId(1), &negs);
            sgd_step(&mut e, NodeId(0), NodeId(1), &negs, 1e-3).unwrap();
            prop_assert!(pair_objective(&e, NodeId(0), NodeId(1), &negs) >= before - 1e-15);
        }
    }

    #[test]
    fn zero_vectors_stay_zero() {
        let mut e = EmbeddingMatrix::zeros(3, 4);
        sgd_step(&mut e, NodeId(0), NodeId(1), &[NodeId(2)], 0.1).unwrap();
        assert!(e.center.iter().chain(&e.context).all(|&x| x == 0.0));
    }

    #[test]
    fn single_step_increases_objective() {
        let mut e = EmbeddingMatrix::zeros(2, 2);
        e.center_mut(NodeId(0)).copy_from_slice(&[1.0, 0.0]);
        e.context_mut(NodeId(1)).copy_from_slice(&[0.0, 1.0]);
        let before = pair_objective(&e, NodeId(0), NodeId(1), &[]);
        sgd_step(&mut e, NodeId(0), NodeId(1), &[], 0.1).unwrap();
        assert!(pair_objective(&e, NodeId(0), NodeId(1), &[]) > before);
    }

    #[test]
    fn step_moves_along_gradient() {
        let e0 = random_matrix(6, 5, 11);
        let negs = ids(&[3, 4]);
        let grad = pair_gradient(&e0, NodeId(0), NodeId(2), &negs);
        let mut e = e0.clone();
        sgd_step(&mut e, NodeId(0), NodeId(2), &negs, 0.01).unwrap();
        for k in 0..5 {
            assert!((e.center(NodeId(0))[k] - e0.center(NodeId(0))[k] - 0.01 * grad.center[k]).abs() < 1e-15);
            assert!((e.context(NodeId(2))[k] - e0.context(NodeId(2))[k] - 0.01 * grad.context[k]).abs() < 1e-15);
            assert!((e.context(NodeId(4))[k] - e0.context(NodeId(4))[k] - 0.01 * grad.negatives[1][k]).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-5;
        for seed in 0..20 {
            let e = random_matrix(7, 8, seed);
            let negs = ids(&[2, 3, 4, 5, 6]);
            let grad = pair_gradient(&e, NodeId(0), NodeId(1), &negs);
            let f = |m: &EmbeddingMatrix| pair_objective(m, NodeId(0), NodeId(1), &negs);
            for k in 0..8 {
                let mut p = e.clone();
                let mut q = e.clone();
                p.center_mut(NodeId(0))[k] += h;
                q.center_mut(NodeId(0))[k] -= h;
                let fd = (f(&p) - f(&q)) / (2.0 * h);
                assert!((fd - grad.center[k]).abs() <= 1e-4 * fd.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn softmax_cases() {
        let e = EmbeddingMatrix::zeros(5, 3);
        let c = ids(&[1, 2, 3, 4]);
        assert_eq!(softmax_prob(&e, NodeId(0), NodeId(2), &c), 0.25);
        assert_eq!(softmax_prob(&e, NodeId(0), NodeId(2), &ids(&[2])), 1.0);
        let r = random_matrix(5, 3, 4);
        let s: f64 = c.iter().map(|&x| softmax_prob(&r, NodeId(0), x, &c)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epochs_zero_returns_init() {
        let g = toy_graph();
        let cfg = TrainConfig {
            dim: 16,
            epochs: 0,
            ..Default::default()
        };
        let (e, stats) = train_with_stats(&[ids(&[0, 2, 4])], &g, &cfg).unwrap();
        assert_eq!(e, EmbeddingMatrix::init(5, 16, 0));
        assert_eq!(stats.steps, 0);
        for u in g.nodes() {
            let norm = dot(e.center(u), e.center(u)).sqrt();
            assert!(norm <= 0.5 * (16f64).sqrt() / 16.0 + 1e-15);
        }
        assert!(e.context.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_step_per_pair_per_epoch() {
        let g = toy_graph();
        let corpus = vec![ids(&[0, 2, 4, 3, 1]), ids(&[1, 3])];
        let cfg = TrainConfig {
            dim: 4,
            window: 2,
            epochs: 3,
            ..Default::default()
        };
        let (_, stats) = train_with_stats(&corpus, &g, &cfg).unwrap();
        let pairs = pair_count(5, 2) + pair_count(2, 2);
        assert_eq!(stats.steps, 3 * pairs);
        assert_eq!(stats.negatives_drawn, 3 * pairs * 5);
    }

    #[test]
    fn deterministic_bit_identical() {
        let g = toy_graph();
        let corpus = vec![ids(&[0, 2, 4, 3, 1, 3, 4, 2, 0]); 10];
        let cfg = TrainConfig {
            dim: 8,
            seed: 9,
            ..Default::default()
        };
        let a = train(&corpus, &g, &cfg).unwrap();
        let b = train(&corpus, &g, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train(&corpus, &g, &TrainConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn parallel_mode_finite() {
        let g = toy_graph();
        let corpus = vec![ids(&[0, 2, 4, 3, 1, 3, 4, 2, 0]); 300];
        let cfg = TrainConfig {
            dim: 8,
            deterministic: false,
            ..Default::default()
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let (e, stats) = pool.install(|| train_with_stats(&corpus, &g, &cfg)).unwrap();
        assert!(e.is_finite());
        assert_eq!(stats.steps, 300 * pair_count(9, 10));
    }

    #[test]
    fn rejects_bad_config_and_empty_corpus() {
        let g = toy_graph();
        let c = vec![ids(&[0, 2])];
        for cfg in [
            TrainConfig { dim: 0, ..Default::default() },
            TrainConfig { negatives: 0, ..Default::default() },
            TrainConfig { lr0: 0.0, ..Default::default() },
            TrainConfig { window: 1, window_mode: WindowMode::Span, ..Default::default() },
        ] {
            assert!(train(&c, &g, &cfg).is_err());
        }
        assert!(matches!(train(&[], &g, &TrainConfig::default()), Err(Error::Empty(_))));
    }

    #[test]
    fn lr_schedule_endpoints() {
        assert_eq!(learning_rate(0.025, 0, 100), 0.025);
        assert!((learning_rate(0.025, 100, 100) - 0.025e-4).abs() < 1e-18);
    }

    #[test]
    fn corpus_vectors_keep_visited_rows() {
        let g = toy_graph();
        let e = EmbeddingMatrix::init(g.node_count(), 3, 1);
        let walk = vec![g.node_id("p2").unwrap(), g.node_id("a2").unwrap(), g.node_id("p2").unwrap()];
        let v = e.corpus_vectors(&g, &[walk]);
        assert_eq!(v.names(), ["a2", "p2"]);
        assert_eq!(v.get("p2").unwrap(), e.center(g.node_id("p2").unwrap()));
    }

}

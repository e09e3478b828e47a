use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::classify::{LogRegConfig, LogisticModel};
use super::auc;
use crate::error::{Error, Result};
use crate::graph::{NodeId, TypeId, TypedGraph};
use crate::skipgram::NodeVectors;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeOp {
    Average,
    Hadamard,
    WeightedL1,
    WeightedL2,
}

impl EdgeOp {
    pub const ALL: [EdgeOp; 4] = [EdgeOp::Average, EdgeOp::Hadamard, EdgeOp::WeightedL1, EdgeOp::WeightedL2];

    pub fn name(self) -> &'static str {
        match self {
            EdgeOp::Average => "average",
            EdgeOp::Hadamard => "hadamard",
            EdgeOp::WeightedL1 => "weighted-l1",
            EdgeOp::WeightedL2 => "weighted-l2",
        }
    }
}

impl fmt::Display for EdgeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn edge_features(u: &[f64], v: &[f64], op: EdgeOp) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    let f = |(a, b): (&f64, &f64)| match op {
        EdgeOp::Average => (a + b) / 2.0,
        EdgeOp::Hadamard => a * b,
        EdgeOp::WeightedL1 => (a - b).abs(),
        EdgeOp::WeightedL2 => (a - b) * (a - b),
    };
    Ok(u.iter().zip(v).map(f).collect())
}

/// Residual graph and labeled node pairs for link prediction.
#[derive(Clone, Debug)]
pub struct LpSplit {
    pub train_graph: TypedGraph,
    pub hidden: Vec<(NodeId, NodeId)>,
    pub train_pos: Vec<(NodeId, NodeId)>,
    pub train_neg: Vec<(NodeId, NodeId)>,
    pub test_pos: Vec<(NodeId, NodeId)>,
    pub test_neg: Vec<(NodeId, NodeId)>,
    /// Fewer hidden edges than requested samples; all hidden edges used.
    pub fallback: bool,
    /// Hidden sets rejected for orphaning a node.
    pub resamples: usize,
    /// The last attempt still orphaned a node.
    pub orphaned: bool,
    pub seed: u64,
}

const MAX_RESAMPLES: usize = 100;

fn ordered(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    (u.min(v), u.max(v))
}

/// Hides `hide_fraction` of the edges between types `a` and `b`, samples
/// up to `sample` hidden edges as positives and as many unobserved pairs of
/// the same types as negatives, and halves both into train and test.
pub fn lp_split(
    g: &TypedGraph,
    (a, b): (TypeId, TypeId),
    hide_fraction: f64,
    sample: usize,
    seed: u64,
) -> Result<LpSplit> {
    if !(hide_fraction > 0.0 && hide_fraction < 1.0) {
        return Err(Error::InvalidConfig("hide fraction must lie in (0, 1)".into()));
    }
    let rel = (a.min(b), a.max(b));
    let mut candidates: Vec<(NodeId, NodeId)> = g.edges().filter(|&(u, v)| g.relation_type(u, v) == rel).collect();
    if candidates.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{} edges of type {}-{}; need at least 2",
            candidates.len(),
            g.type_name(a),
            g.type_name(b)
        )));
    }
    let n_hide = ((candidates.len() as f64 * hide_fraction).round() as usize).clamp(1, candidates.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut resamples = 0;
    let mut orphaned = true;
    let mut loss = vec![0usize; g.node_count()];
    for attempt in 0..MAX_RESAMPLES {
        candidates.partial_shuffle(&mut rng, n_hide);
        loss.iter_mut().for_each(|x| *x = 0);
        for &(u, v) in &candidates[..n_hide] {
            loss[u.index()] += 1;
            loss[v.index()] += 1;
        }
        orphaned = candidates[..n_hide]
            .iter()
            .any(|&(u, v)| loss[u.index()] >= g.degree(u) || loss[v.index()] >= g.degree(v));
        if !orphaned {
            break;
        }
        resamples = attempt + 1;
    }
    if orphaned {
        log::warn!("every hidden edge set tried orphans at least one node; proceeding");
    }
    let hidden: Vec<(NodeId, NodeId)> = candidates[..n_hide].to_vec();
    let hidden_set: HashSet<(NodeId, NodeId)> = hidden.iter().copied().collect();
    let train_graph = g.without_edges(&hidden_set);

    let fallback = n_hide < sample;
    if fallback {
        log::info!("only {n_hide} hidden edges; using all of them as positives");
    }
    let mut pos = hidden.clone();
    pos.shuffle(&mut rng);
    pos.truncate(sample);

    let (xs, ys) = (g.nodes_of_type(a), g.nodes_of_type(b));
    let mut chosen: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut neg = Vec::with_capacity(pos.len());
    let mut tries = 0usize;
    while neg.len() < pos.len() {
        tries += 1;
        if tries > 1000 * pos.len() + 10_000 {
            return Err(Error::Degenerate("too few unobserved pairs to sample negatives".into()));
        }
        let u = xs[rng.random_range(0..xs.len())];
        let v = ys[rng.random_range(0..ys.len())];
        if u == v || g.has_edge(u, v) {
            continue;
        }
        if chosen.insert(ordered(u, v)) {
            neg.push(ordered(u, v));
        }
    }

    if let Some(&(u, v)) = pos.iter().find(|&&(u, v)| train_graph.has_edge(u, v)) {
        return Err(Error::Degenerate(format!(
            "held-out edge {}-{} present in the training graph",
            g.node_name(u),
            g.node_name(v)
        )));
    }

    let ph = pos.len() / 2;
    let nh = neg.len() / 2;
    Ok(LpSplit {
        train_graph,
        hidden,
        train_pos: pos[..ph].to_vec(),
        test_pos: pos[ph..].to_vec(),
        train_neg: neg[..nh].to_vec(),
        test_neg: neg[nh..].to_vec(),
        fallback,
        resamples,
        orphaned,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkPredictionReport {
    /// AUC per operator, in [`EdgeOp::ALL`] order.
    pub auc: [f64; 4],
    pub mean_auc: f64,
    pub seed: u64,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub fallback: bool,
}

impl LinkPredictionReport {
    pub fn tsv(&self) -> String {
        let mut s = String::from("operator\tauc\n");
        for (op, a) in EdgeOp::ALL.iter().zip(&self.auc) {
            s.push_str(&format!("{op}\t{a:.6}\n"));
        }
        s
    }

    pub fn key_values(&self) -> String {
        let mut s = String::new();
        for (op, a) in EdgeOp::ALL.iter().zip(&self.auc) {
            s.push_str(&format!("auc_{}={a:.6}\n", op.name().replace('-', "_")));
        }
        s + &format!(
            "auc_mean={:.6}\nseed={}\ntrain_pairs={}\ntest_pairs={}\nfallback={}\n",
            self.mean_auc, self.seed, self.train_pairs, self.test_pairs, self.fallback
        )
    }
}

/// Trains one logistic model per edge operator on the train pairs and scores
/// the test pairs.
pub fn link_prediction(
    split: &LpSplit,
    g: &TypedGraph,
    vectors: &NodeVectors,
    cfg: &LogRegConfig,
) -> Result<LinkPredictionReport> {
    let vec_of = |u: NodeId| {
        vectors
            .get(g.node_name(u))
            .ok_or_else(|| Error::UnknownNode(format!("{} (no embedding)", g.node_name(u))))
    };
    let featurize = |pairs: &[(NodeId, NodeId)], op: EdgeOp| -> Result<Vec<Vec<f64>>> {
        pairs.iter().map(|&(u, v)| edge_features(vec_of(u)?, vec_of(v)?, op)).collect()
    };
    let train_y: Vec<bool> = std::iter::repeat_n(true, split.train_pos.len())
        .chain(std::iter::repeat_n(false, split.train_neg.len()))
        .collect();
    let test_y: Vec<bool> = std::iter::repeat_n(true, split.test_pos.len())
        .chain(std::iter::repeat_n(false, split.test_neg.len()))
        .collect();
    let mut aucs = [0.0; 4];
    for (slot, op) in aucs.iter_mut().zip(EdgeOp::ALL) {
        let mut xtr = featurize(&split.train_pos, op)?;
        xtr.extend(featurize(&split.train_neg, op)?);
        let mut xte = featurize(&split.test_pos, op)?;
        xte.extend(featurize(&split.test_neg, op)?);
        let model = LogisticModel::fit(&xtr, &train_y, cfg)?;
        let scores: Vec<f64> = xte.iter().map(|x| model.probability(x)).collect();
        *slot = auc(&scores, &test_y)?;
    }
    Ok(LinkPredictionReport {
        mean_auc: aucs.iter().sum::<f64>() / 4.0,
        auc: aucs,
        seed: split.seed,
        train_pairs: train_y.len(),
        test_pairs: test_y.len(),
        fallback: split.fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MetaSchema;
    use crate::synth::{generate, generate_synthetic, PlantedCommunities, SynthConfig};

    #[test]
    fn table_examples() {
        let (u, v) = ([1.0, 2.0], [3.0, 4.0]);
        assert_eq!(edge_features(&u, &v, EdgeOp::Average).unwrap(), vec![2.0, 3.0]);
        assert_eq!(edge_features(&u, &v, EdgeOp::Hadamard).unwrap(), vec![3.0, 8.0]);
        assert_eq!(edge_features(&u, &v, EdgeOp::WeightedL1).unwrap(), vec![2.0, 2.0]);
        assert_eq!(edge_features(&u, &v, EdgeOp::WeightedL2).unwrap(), vec![4.0, 4.0]);
        for op in [EdgeOp::WeightedL1, EdgeOp::WeightedL2] {
            assert_eq!(edge_features(&u, &u, op).unwrap(), vec![0.0, 0.0]);
        }
        for op in EdgeOp::ALL {
            assert_eq!(edge_features(&u, &v, op).unwrap(), edge_features(&v, &u, op).unwrap());
        }
        assert!(edge_features(&u, &[1.0], EdgeOp::Average).is_err());
    }

    fn graph() -> TypedGraph {
        let schema = MetaSchema::from_pairs(&["A", "P", "V"], "A-P,P-V").unwrap();
        generate_synthetic(&schema, &[0.4, 0.45, 0.15], 300, 8.0, 2).unwrap()
    }

    #[test]
    fn split_contract() {
        let g = graph();
        let (a, p) = (g.type_id("A").unwrap(), g.type_id("P").unwrap());
        let s = lp_split(&g, (a, p), 0.2, 2048, 4).unwrap();
        let total = g.edges().filter(|&(u, v)| g.relation_type(u, v) == (a.min(p), a.max(p))).count();
        assert_eq!(s.hidden.len(), (total as f64 * 0.2).round() as usize);
        assert!(s.fallback);
        assert_eq!(s.train_pos.len() + s.test_pos.len(), s.hidden.len());
        assert_eq!(s.train_neg.len() + s.test_neg.len(), s.hidden.len());
        assert_eq!(s.train_graph.edge_count(), g.edge_count() - s.hidden.len());
        for &(u, v) in s.train_neg.iter().chain(&s.test_neg) {
            assert!(!g.has_edge(u, v));
            assert_eq!(g.relation_type(u, v), (a.min(p), a.max(p)));
        }
        for &(u, v) in s.test_pos.iter().chain(&s.train_pos) {
            assert!(g.has_edge(u, v) && !s.train_graph.has_edge(u, v));
        }
        let again = lp_split(&g, (a, p), 0.2, 2048, 4).unwrap();
        assert_eq!((again.hidden, again.test_neg), (s.hidden.clone(), s.test_neg.clone()));
    }

    #[test]
    fn small_sample_no_fallback() {
        let g = graph();
        let (a, p) = (g.type_id("A").unwrap(), g.type_id("P").unwrap());
        let s = lp_split(&g, (p, a), 0.2, 20, 1).unwrap();
        assert!(!s.fallback);
        assert_eq!(s.train_pos.len() + s.test_pos.len(), 20);
        assert_eq!(s.train_pos.len(), s.test_pos.len());
    }

    #[test]
    fn community_vectors_score_well() {
        // one-hot block vectors: Hadamard features flag same-block pairs,
        // which dominate the planted edges
        let schema = MetaSchema::from_pairs(&["A", "P", "V"], "A-P,P-V").unwrap();
        let cfg = SynthConfig {
            n_nodes: 400,
            avg_degree: 8.0,
            seed: 3,
            communities: Some(PlantedCommunities { count: 4, p_in: 0.9 }),
        };
        let sg = generate(&schema, &[0.4, 0.45, 0.15], &cfg).unwrap();
        let (g, blocks) = (sg.graph, sg.communities.unwrap());
        let (a, p) = (g.type_id("A").unwrap(), g.type_id("P").unwrap());
        let s = lp_split(&g, (a, p), 0.2, 2048, 9).unwrap();
        let names: Vec<String> = g.nodes().map(|u| g.node_name(u).to_string()).collect();
        let data: Vec<f64> = blocks.iter().flat_map(|&b| (0..4).map(move |k| (k == b) as u8 as f64)).collect();
        let vecs = NodeVectors::new(names, 4, data).unwrap();
        let r = link_prediction(&s, &g, &vecs, &LogRegConfig::default()).unwrap();
        assert!(r.auc[1] > 0.8, "{r:?}");
        assert!(r.auc.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!((r.mean_auc - r.auc.iter().sum::<f64>() / 4.0).abs() < 1e-15);
        assert!(r.key_values().contains("auc_weighted_l1="));
    }
}

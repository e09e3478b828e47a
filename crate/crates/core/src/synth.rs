//! Schema-driven random graph generator.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, MetaSchema, NodeId, TypeId, TypedGraph};

/// Latent block structure planted into a synthetic graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedCommunities {
    pub count: usize,
    /// Probability that an edge endpoint is drawn from the other endpoint's block.
    pub p_in: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub avg_degree: f64,
    pub seed: u64,
    pub communities: Option<PlantedCommunities>,
}

#[derive(Clone, Debug)]
pub struct SyntheticGraph {
    pub graph: TypedGraph,
    /// Block label per node, present in planted mode.
    pub communities: Option<Vec<usize>>,
}

/// Generates a random graph over `schema` with `n_nodes` split according to
/// `type_proportions` and roughly `avg_degree` edges per node.
pub fn generate_synthetic(
    schema: &MetaSchema,
    type_proportions: &[f64],
    n_nodes: usize,
    avg_degree: f64,
    seed: u64,
) -> Result<TypedGraph> {
    let cfg = SynthConfig {
        n_nodes,
        avg_degree,
        seed,
        communities: None,
    };
    Ok(generate(schema, type_proportions, &cfg)?.graph)
}

fn type_sizes(props: &[f64], n: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = props.iter().map(|p| (p * n as f64).floor() as usize).collect();
    let mut rest = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..props.len()).collect();
    // largest remainder first, ties by index
    order.sort_by(|&a, &b| {
        let fa = props[a] * n as f64 - sizes[a] as f64;
        let fb = props[b] * n as f64 - sizes[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if props[i] > 0.0 {
            sizes[i] += 1;
            rest -= 1;
        }
    }
    sizes
}

struct PairSampler<'a> {
    left: &'a [NodeId],
    right: &'a [NodeId],
    // right-side nodes grouped by block, planted mode only
    right_blocks: Option<Vec<Vec<NodeId>>>,
    blocks: Option<&'a [usize]>,
    p_in: f64,
}

impl PairSampler<'_> {
    fn partner<R: Rng>(&self, u: NodeId, rng: &mut R) -> NodeId {
        if let (Some(groups), Some(blocks)) = (&self.right_blocks, self.blocks) {
            let own = &groups[blocks[u.index()]];
            if !own.is_empty() && rng.random::<f64>() < self.p_in {
                return own[rng.random_range(0..own.len())];
            }
        }
        self.right[rng.random_range(0..self.right.len())]
    }
}

fn sampler<'a>(
    left: &'a [NodeId],
    right: &'a [NodeId],
    blocks: Option<&'a [usize]>,
    planted: Option<PlantedCommunities>,
) -> PairSampler<'a> {
    let right_blocks = blocks.zip(planted).map(|(bl, c)| {
        let mut groups = vec![Vec::new(); c.count];
        for &v in right {
            groups[bl[v.index()]].push(v);
        }
        groups
    });
    PairSampler {
        left,
        right,
        right_blocks,
        blocks,
        p_in: planted.map_or(0.0, |c| c.p_in),
    }
}

fn key(u: NodeId, v: NodeId) -> u64 {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    ((a.0 as u64) << 32) | b.0 as u64
}

/// Full generator, including the optional planted-community mode.
///
/// Every node of a type that takes part in a schema pair first receives one
/// edge in each incident pair, so meta-paths over the schema never hit dead
/// ends. The remaining edge budget is spread over pairs in proportion to the
/// summed sizes of their two types.
pub fn generate(schema: &MetaSchema, type_proportions: &[f64], cfg: &SynthConfig) -> Result<SyntheticGraph> {
    if schema.type_edges().is_empty() {
        return Err(Error::InvalidConfig("schema has no type edges".into()));
    }
    if type_proportions.len() != schema.type_count() {
        return Err(Error::InvalidConfig(format!(
            "{} proportions for {} types",
            type_proportions.len(),
            schema.type_count()
        )));
    }
    let total: f64 = type_proportions.iter().sum();
    if (total - 1.0).abs() > 1e-9 || type_proportions.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidConfig(format!("type proportions sum to {total}, expected 1")));
    }
    if cfg.avg_degree.is_nan() || cfg.avg_degree < 1.0 {
        return Err(Error::InvalidConfig("average degree must be at least 1".into()));
    }
    if let Some(c) = cfg.communities {
        if c.count == 0 || !(0.0..=1.0).contains(&c.p_in) {
            return Err(Error::InvalidConfig("bad planted community settings".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sizes = type_sizes(type_proportions, cfg.n_nodes);

    let mut b = GraphBuilder::new();
    for name in schema.type_names() {
        b.add_type(name);
    }
    let mut by_type: Vec<Vec<NodeId>> = vec![Vec::new(); schema.type_count()];
    for (t, &size) in sizes.iter().enumerate() {
        let name = &schema.type_names()[t];
        for i in 0..size {
            by_type[t].push(b.add_node(&format!("{name}{i}"), name)?);
        }
    }

    let blocks: Option<Vec<usize>> = cfg
        .communities
        .map(|c| (0..cfg.n_nodes).map(|_| rng.random_range(0..c.count)).collect());

    let target = (cfg.n_nodes as f64 * cfg.avg_degree / 2.0).round() as usize;
    let pairs: Vec<(TypeId, TypeId)> = schema
        .type_edges()
        .iter()
        .copied()
        .filter(|(a, b)| !by_type[a.index()].is_empty() && !by_type[b.index()].is_empty())
        .collect();

    let mut seen: HashSet<u64> = HashSet::with_capacity(target * 2);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity(target);
    let mut caps = Vec::with_capacity(pairs.len());
    let mut used = vec![0usize; pairs.len()];

    // coverage pass
    for (pi, &(ta, tb)) in pairs.iter().enumerate() {
        let (left, right) = (&by_type[ta.index()], &by_type[tb.index()]);
        let cap = if ta == tb {
            left.len() * left.len().saturating_sub(1) / 2
        } else {
            left.len() * right.len()
        };
        caps.push(cap);
        if cap == 0 {
            continue;
        }
        let forward = sampler(left, right, blocks.as_deref(), cfg.communities);
        let backward = sampler(right, left, blocks.as_deref(), cfg.communities);
        let mut covered: HashSet<NodeId> = HashSet::new();
        for &u in forward.left {
            for _ in 0..64 {
                let v = forward.partner(u, &mut rng);
                if u != v && seen.insert(key(u, v)) {
                    edges.push((u, v));
                    used[pi] += 1;
                    covered.insert(v);
                    break;
                }
            }
        }
        if ta != tb {
            for &v in backward.left {
                if covered.contains(&v) {
                    continue;
                }
                for _ in 0..64 {
                    let u = backward.partner(v, &mut rng);
                    if seen.insert(key(u, v)) {
                        edges.push((u, v));
                        used[pi] += 1;
                        break;
                    }
                }
            }
        }
    }

    // fill pass
    let remaining = target.saturating_sub(edges.len());
    let weights: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| (by_type[a.index()].len() + by_type[b.index()].len()) as f64)
        .collect();
    let wsum: f64 = weights.iter().sum();
    for (pi, &(ta, tb)) in pairs.iter().enumerate() {
        let (left, right) = (&by_type[ta.index()], &by_type[tb.index()]);
        let free = caps[pi].saturating_sub(used[pi]);
        let want = ((remaining as f64) * weights[pi] / wsum).round() as usize;
        let want = want.min(free);
        if want == 0 {
            continue;
        }
        if want * 2 > free {
            // dense regime: enumerate the unused pairs and pick a random subset
            let mut pool = Vec::new();
            for (i, &u) in left.iter().enumerate() {
                let start = if ta == tb { i + 1 } else { 0 };
                for &v in &right[start..] {
                    if u != v && !seen.contains(&key(u, v)) {
                        pool.push((u, v));
                    }
                }
            }
            let (chosen, _) = pool.partial_shuffle(&mut rng, want);
            for &(u, v) in chosen.iter() {
                seen.insert(key(u, v));
                edges.push((u, v));
            }
            continue;
        }
        let s = sampler(left, right, blocks.as_deref(), cfg.communities);
        let mut added = 0;
        let mut attempts = 0usize;
        while added < want && attempts < want * 100 {
            attempts += 1;
            let u = left[rng.random_range(0..left.len())];
            let v = s.partner(u, &mut rng);
            if u != v && seen.insert(key(u, v)) {
                edges.push((u, v));
                added += 1;
            }
        }
    }

    for (u, v) in edges {
        b.add_edge(u, v)?;
    }
    Ok(SyntheticGraph {
        graph: b.build(),
        communities: blocks,
    })
}

/// DBLP-like four-type schema (author, paper, conference, term) with the
/// default type mix used by the CLI.
pub fn dblp_schema() -> (MetaSchema, Vec<f64>) {
    let schema = MetaSchema::from_pairs(&["A", "P", "C", "T"], "A-P,P-C,P-T").expect("static schema");
    (schema, vec![0.35, 0.4, 0.05, 0.2])
}

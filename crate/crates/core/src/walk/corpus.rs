use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{Guidance, WalkMode, Walker, WalkerState};
use crate::error::{Error, Result};
use crate::graph::{NodeId, TypeId, TypedGraph};

/// Whether each trajectory gets its own occupation vector or all walks of a
/// corpus share one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OccupationScope {
    #[default]
    Walk,
    Global,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkConfig {
    /// Walks per start node.
    pub walk_times: usize,
    /// Maximum steps per walk.
    pub walk_length: usize,
    pub alpha: f64,
    pub mode: WalkMode,
    pub seed: u64,
    /// Restricts start nodes to these types (intersected with the guidance's
    /// own start type).
    pub start_filter: Option<Vec<TypeId>>,
    /// Walks with fewer nodes are dropped.
    pub min_walk_nodes: usize,
    pub occupation_scope: OccupationScope,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walk_times: 20,
            walk_length: 320,
            alpha: 0.8,
            mode: WalkMode::Spacey,
            seed: 0,
            start_filter: None,
            min_walk_nodes: 1,
            occupation_scope: OccupationScope::Walk,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WalkStats {
    pub walks_emitted: usize,
    pub walks_dropped: usize,
    pub truncations: usize,
    pub total_steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub walks: Vec<Vec<NodeId>>,
    pub stats: WalkStats,
}

impl Corpus {
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of one trajectory, independent of scheduling.
pub(crate) fn walk_seed(base: u64, start: NodeId, rep: usize) -> u64 {
    splitmix64(base ^ splitmix64(((start.0 as u64) << 32) | rep as u64))
}

fn start_nodes(g: &TypedGraph, guidance: &Guidance, filter: Option<&[TypeId]>) -> Vec<NodeId> {
    g.nodes()
        .filter(|&u| {
            let t = g.node_type(u);
            guidance.start_type().is_none_or(|s| s == t) && filter.is_none_or(|f| f.contains(&t))
        })
        .collect()
}

/// Runs `walk_times` walks of up to `walk_length` steps from every start node
/// compatible with the guidance. Output is ordered by start node, then
/// repetition, and is identical for any number of worker threads.
pub fn generate_corpus(g: &TypedGraph, guidance: &Guidance, cfg: &WalkConfig) -> Result<Corpus> {
    if cfg.walk_times == 0 {
        return Err(Error::InvalidConfig("walk_times must be at least 1".into()));
    }
    if cfg.walk_length < guidance.order() + 1 {
        return Err(Error::InvalidConfig(format!(
            "walk_length {} shorter than chain order + 1 ({})",
            cfg.walk_length,
            guidance.order() + 1
        )));
    }
    let walker = Walker::new(g, guidance, cfg.mode, cfg.alpha)?;
    let starts = start_nodes(g, guidance, cfg.start_filter.as_deref());

    let raw: Vec<(Vec<NodeId>, bool)> = match cfg.occupation_scope {
        OccupationScope::Walk => starts
            .par_iter()
            .flat_map_iter(|&s| (0..cfg.walk_times).map(move |r| (s, r)))
            .map(|(s, r)| {
                let mut state = WalkerState::new(g, s, walk_seed(cfg.seed, s, r));
                walker.walk(&mut state, cfg.walk_length)
            })
            .collect(),
        OccupationScope::Global => {
            let mut out = Vec::with_capacity(starts.len() * cfg.walk_times);
            let Some(&first) = starts.first() else {
                return Ok(Corpus::default());
            };
            let mut state = WalkerState::fresh(g, first, splitmix64(cfg.seed));
            for &s in &starts {
                for _ in 0..cfg.walk_times {
                    state.restart(g, s);
                    out.push(walker.walk(&mut state, cfg.walk_length));
                }
            }
            out
        }
    };

    let mut stats = WalkStats::default();
    let mut walks = Vec::with_capacity(raw.len());
    for (walk, truncated) in raw {
        stats.total_steps += walk.len() - 1;
        stats.truncations += truncated as usize;
        if walk.len() < cfg.min_walk_nodes {
            stats.walks_dropped += 1;
        } else {
            walks.push(walk);
        }
    }
    stats.walks_emitted = walks.len();
    Ok(Corpus { walks, stats })
}

/// One walk per line, space-separated external node ids.
pub fn write_corpus(path: &Path, g: &TypedGraph, walks: &[Vec<NodeId>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for walk in walks {
        let line: Vec<&str> = walk.iter().map(|&u| g.node_name(u)).collect();
        writeln!(w, "{}", line.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path, g: &TypedGraph) -> Result<Vec<Vec<NodeId>>> {
    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut walks = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let walk = line
            .split_whitespace()
            .map(|tok| {
                g.node_id(tok).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("unknown node '{tok}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        walks.push(walk);
    }
    Ok(walks)
}

/// Key/value sidecar with the corpus statistics.
pub fn write_stats(path: &Path, stats: &WalkStats) -> Result<()> {
    let text = format!(
        "walks_emitted={}\nwalks_dropped={}\ntruncations={}\ntotal_steps={}\n",
        stats.walks_emitted, stats.walks_dropped, stats.truncations, stats.total_steps
    );
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::toy_graph;
    use crate::graph::{derive_schema, GraphBuilder};
    use crate::metalang::parse_metapath;

    fn apvpa(g: &TypedGraph) -> Guidance {
        Guidance::metapath(parse_metapath("A-P-V-P-A", &derive_schema(g)).unwrap(), g.type_count()).unwrap()
    }

    #[test]
    fn single_markovian_walk_pattern() {
        let g = toy_graph();
        let guide = apvpa(&g);
        let cfg = WalkConfig {
            walk_times: 1,
            walk_length: 8,
            mode: WalkMode::Markovian,
            alpha: 0.0,
            start_filter: None,
            ..Default::default()
        };
        let corpus = generate_corpus(&g, &guide, &cfg).unwrap();
        // both authors start one walk each
        assert_eq!(corpus.walks.len(), 2);
        let from_a1 = &corpus.walks[0];
        assert_eq!(from_a1[0], g.node_id("a1").unwrap());
        let types: String = from_a1.iter().map(|&u| g.type_name(g.node_type(u))).collect();
        assert_eq!(types, "APVPAPVPA");
    }

    #[test]
    fn counts_and_lengths_bounded() {
        let g = toy_graph();
        let guide = apvpa(&g);
        let cfg = WalkConfig::default();
        let corpus = generate_corpus(&g, &guide, &cfg).unwrap();
        let n_start = g.nodes_of_type(TypeId(0)).len();
        assert!(corpus.walks.len() <= 20 * n_start);
        assert!(corpus.walks.iter().all(|w| w.len() <= 321));
        assert!(corpus.stats.total_steps <= 20 * 320 * n_start);
    }

    #[test]
    fn empty_graph_empty_corpus() {
        let mut b = GraphBuilder::new();
        b.add_type("A");
        let g = b.build();
        let guide = Guidance::MetaSchema(derive_schema(&g));
        let corpus = generate_corpus(&g, &guide, &WalkConfig::default()).unwrap();
        assert!(corpus.walks.is_empty());
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let g = toy_graph();
        let guide = Guidance::MetaSchema(derive_schema(&g));
        let cfg = WalkConfig {
            walk_length: 40,
            seed: 17,
            ..Default::default()
        };
        let a = generate_corpus(&g, &guide, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| generate_corpus(&g, &guide, &cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.walks.len(), 5 * 20);
    }

    #[test]
    fn global_scope_runs() {
        let g = toy_graph();
        let guide = apvpa(&g);
        let cfg = WalkConfig {
            occupation_scope: OccupationScope::Global,
            walk_length: 30,
            ..Default::default()
        };
        let a = generate_corpus(&g, &guide, &cfg).unwrap();
        assert_eq!(a, generate_corpus(&g, &guide, &cfg).unwrap());
        assert_eq!(a.walks.len(), 40);
    }

    #[test]
    fn short_walks_dropped() {
        let mut b = GraphBuilder::new();
        b.add_node("x", "A").unwrap();
        b.add_node("y", "A").unwrap();
        b.add_node("p", "P").unwrap();
        b.add_edge_by_name("x", "p").unwrap();
        let g = b.build();
        let guide = Guidance::MetaSchema(derive_schema(&g));
        let cfg = WalkConfig {
            walk_times: 1,
            walk_length: 5,
            min_walk_nodes: 2,
            ..Default::default()
        };
        let corpus = generate_corpus(&g, &guide, &cfg).unwrap();
        // y is isolated: its one-node walk is dropped
        assert_eq!(corpus.stats.walks_dropped, 1);
        assert_eq!(corpus.stats.truncations, 1);
        assert_eq!(corpus.walks.len(), 2);
    }

    #[test]
    fn rejects_bad_config() {
        let g = toy_graph();
        let guide = apvpa(&g);
        let mut cfg = WalkConfig {
            walk_times: 0,
            ..Default::default()
        };
        assert!(generate_corpus(&g, &guide, &cfg).is_err());
        cfg.walk_times = 1;
        cfg.walk_length = 2;
        assert!(generate_corpus(&g, &guide, &cfg).is_err());
    }

    #[test]
    fn corpus_file_roundtrip() {
        let g = toy_graph();
        let guide = apvpa(&g);
        let corpus = generate_corpus(&g, &guide, &WalkConfig { walk_length: 10, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("walks.txt");
        write_corpus(&p, &g, &corpus.walks).unwrap();
        assert_eq!(read_corpus(&p, &g).unwrap(), corpus.walks);
    }
}

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::classify::{classification_protocol, ClassifyConfig, Labels};
use super::js_divergence;
use crate::error::{Error, Result};
use crate::graph::{NodeId, TypedGraph};
use crate::pipeline::embed;
use crate::skipgram::TrainConfig;
use crate::walk::{Guidance, WalkConfig, WalkMode, Walker, WalkerState};

/// What is compared between consecutive steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceKind {
    /// Node distribution across walks at step `s - 1` versus step `s`.
    #[default]
    Step,
    /// Each walk's own visit histogram up to `s - 1` versus up to `s`,
    /// averaged over walks.
    Occupation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceConfig {
    pub n_walks: usize,
    pub max_step: usize,
    pub mode: WalkMode,
    pub alpha: f64,
    pub seed: u64,
    pub kind: TraceKind,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            n_walks: 1000,
            max_step: 80,
            mode: WalkMode::Spacey,
            alpha: 0.8,
            seed: 0,
            kind: TraceKind::Step,
        }
    }
}

/// JS divergence per step: entry `s - 1` compares step `s - 1` with step
/// `s`, for `s` in `1..=max_step`. Walks cut short by a dead end drop out
/// of later steps.
pub fn stationarity_trace(g: &TypedGraph, guidance: &Guidance, cfg: &TraceConfig) -> Result<Vec<f64>> {
    if cfg.max_step < 2 {
        return Err(Error::InvalidConfig("trace needs walks of at least 2 steps".into()));
    }
    if cfg.n_walks == 0 {
        return Err(Error::InvalidConfig("trace needs at least one walk".into()));
    }
    let walker = Walker::new(g, guidance, cfg.mode, cfg.alpha)?;
    let starts: Vec<NodeId> = match guidance.start_type() {
        Some(t) => g.nodes_of_type(t).to_vec(),
        None => g.nodes().collect(),
    };
    if starts.is_empty() {
        return Err(Error::Empty("start nodes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jobs: Vec<(NodeId, u64)> = (0..cfg.n_walks)
        .map(|_| (starts[rng.random_range(0..starts.len())], rng.random()))
        .collect();
    let walks: Vec<Vec<NodeId>> = jobs
        .par_iter()
        .map(|&(s, seed)| walker.walk(&mut WalkerState::new(g, s, seed), cfg.max_step).0)
        .collect();

    let n = g.node_count();
    let mut out = Vec::with_capacity(cfg.max_step);
    match cfg.kind {
        TraceKind::Step => {
            let dist = |s: usize| {
                let mut h = vec![0.0; n];
                let alive: Vec<NodeId> = walks.iter().filter_map(|w| w.get(s).copied()).collect();
                for u in &alive {
                    h[u.index()] += 1.0 / alive.len() as f64;
                }
                h
            };
            let mut prev = dist(0);
            for s in 1..=cfg.max_step {
                let cur = dist(s);
                if cur.iter().all(|&x| x == 0.0) {
                    break;
                }
                out.push(js_divergence(&prev, &cur));
                prev = cur;
            }
        }
        TraceKind::Occupation => {
            let mut sums = vec![(0.0, 0usize); cfg.max_step];
            for w in &walks {
                let mut counts: HashMap<NodeId, f64> = HashMap::from([(w[0], 1.0)]);
                for (s, &u) in w.iter().enumerate().skip(1) {
                    // only the entry of u changes between the two histograms
                    let before = s as f64;
                    let after = before + 1.0;
                    let mut js = 0.0;
                    for (&v, &c) in &counts {
                        let p = c / before;
                        let q = if v == u { (c + 1.0) / after } else { c / after };
                        js += js_term(p, q);
                    }
                    if !counts.contains_key(&u) {
                        js += js_term(0.0, 1.0 / after);
                    }
                    *counts.entry(u).or_insert(0.0) += 1.0;
                    sums[s - 1].0 += js;
                    sums[s - 1].1 += 1;
                }
            }
            out.extend(sums.iter().take_while(|x| x.1 > 0).map(|&(t, c)| t / c as f64));
        }
    }
    Ok(out)
}

fn js_term(p: f64, q: f64) -> f64 {
    let m = 0.5 * (p + q);
    let h = |a: f64| if a > 0.0 { a * (a / m).log2() } else { 0.0 };
    0.5 * (h(p) + h(q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    WalkTimes,
    WalkLength,
    Alpha,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "walk_times" | "t" => Ok(SweepAxis::WalkTimes),
            "walk_length" | "l" => Ok(SweepAxis::WalkLength),
            "alpha" => Ok(SweepAxis::Alpha),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub micro_mean: f64,
    pub micro_var: f64,
    pub macro_mean: f64,
    pub macro_var: f64,
}

impl SweepRow {
    pub fn tsv_header() -> &'static str {
        "value\tmicro_f1_mean\tmicro_f1_var\tmacro_f1_mean\tmacro_f1_var"
    }

    pub fn tsv(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6e}\t{:.6}\t{:.6e}",
            self.value, self.micro_mean, self.micro_var, self.macro_mean, self.macro_var
        )
    }
}

/// Runs walk, train and classification once per value of `axis`.
#[allow(clippy::too_many_arguments)]
pub fn parameter_sweep(
    g: &TypedGraph,
    guidance: &Guidance,
    labels: &Labels,
    axis: SweepAxis,
    values: &[f64],
    walk: &WalkConfig,
    train: &TrainConfig,
    classify: &ClassifyConfig,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Empty("sweep values"));
    }
    values
        .iter()
        .map(|&value| {
            let mut wc = walk.clone();
            match axis {
                SweepAxis::WalkTimes => wc.walk_times = value as usize,
                SweepAxis::WalkLength => wc.walk_length = value as usize,
                SweepAxis::Alpha => wc.alpha = value,
            }
            let e = embed(g, guidance, &wc, train)?;
            let report = classification_protocol(&e.embedding.to_node_vectors(g), labels, classify)?;
            Ok(SweepRow {
                value,
                micro_mean: report.micro_mean,
                micro_var: report.micro_var,
                macro_mean: report.macro_mean,
                macro_var: report.macro_var,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{derive_schema, GraphBuilder};
    use crate::graph::tests::toy_graph;
    use crate::metalang::parse_metapath;

    fn cycle() -> (TypedGraph, Guidance) {
        // a - p - v - q - a: every typed move is forced
        let mut b = GraphBuilder::new();
        for (x, t) in [("a", "A"), ("p", "P"), ("v", "V"), ("q", "P")] {
            b.add_node(x, t).unwrap();
        }
        for (u, v) in [("a", "p"), ("p", "v"), ("v", "q"), ("q", "a")] {
            b.add_edge_by_name(u, v).unwrap();
        }
        let g = b.build();
        let mp = parse_metapath("A-P-V-P-A", &derive_schema(&g)).unwrap();
        let guide = Guidance::metapath(mp, g.type_count()).unwrap();
        (g, guide)
    }

    #[test]
    fn forced_walk_point_masses() {
        let (g, guide) = cycle();
        let cfg = TraceConfig {
            n_walks: 20,
            max_step: 8,
            mode: WalkMode::Markovian,
            alpha: 0.0,
            ..Default::default()
        };
        let t = stationarity_trace(&g, &guide, &cfg).unwrap();
        // consecutive point masses on distinct nodes
        assert_eq!(t, vec![1.0; 8]);
    }

    #[test]
    fn occupation_trace_finite_and_decreasing_tail() {
        let g = toy_graph();
        let mp = parse_metapath("A-P-V-P-A", &derive_schema(&g)).unwrap();
        let guide = Guidance::metapath(mp, g.type_count()).unwrap();
        for mode in [WalkMode::Spacey, WalkMode::Markovian] {
            let cfg = TraceConfig {
                n_walks: 200,
                max_step: 60,
                mode,
                alpha: if mode == WalkMode::Spacey { 0.8 } else { 0.0 },
                kind: TraceKind::Occupation,
                ..Default::default()
            };
            let t = stationarity_trace(&g, &guide, &cfg).unwrap();
            assert_eq!(t.len(), 60);
            assert!(t.iter().all(|x| x.is_finite() && *x >= 0.0));
            assert!(t[59] < t[0]);
            let step = stationarity_trace(&g, &guide, &TraceConfig { kind: TraceKind::Step, ..cfg }).unwrap();
            assert!(step.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn occupation_js_matches_dense() {
        // the incremental update agrees with a dense recomputation
        let g = toy_graph();
        let guide = Guidance::MetaSchema(derive_schema(&g));
        let cfg = TraceConfig {
            n_walks: 1,
            max_step: 12,
            kind: TraceKind::Occupation,
            seed: 5,
            ..Default::default()
        };
        let t = stationarity_trace(&g, &guide, &cfg).unwrap();
        let walker = Walker::new(&g, &guide, cfg.mode, cfg.alpha).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let starts: Vec<NodeId> = g.nodes().collect();
        let s0 = starts[rng.random_range(0..starts.len())];
        let w = walker.walk(&mut WalkerState::new(&g, s0, rng.random()), 12).0;
        let hist = |k: usize| {
            let mut h = vec![0.0; g.node_count()];
            w[..=k].iter().for_each(|u| h[u.index()] += 1.0 / (k + 1) as f64);
            h
        };
        for s in 1..=12 {
            assert!((t[s - 1] - js_divergence(&hist(s - 1), &hist(s))).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_short_trace() {
        let (g, guide) = cycle();
        let cfg = TraceConfig { max_step: 1, ..Default::default() };
        assert!(stationarity_trace(&g, &guide, &cfg).is_err());
    }

    #[test]
    fn axis_names() {
        assert_eq!("alpha".parse::<SweepAxis>().unwrap(), SweepAxis::Alpha);
        assert!("beta".parse::<SweepAxis>().is_err());
    }
}

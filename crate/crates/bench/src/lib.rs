//! Fixtures shared by the benchmarks.

use spacewalk::synth::{dblp_schema, generate_synthetic};
use spacewalk::{derive_schema, parse_metapath, Guidance, TypedGraph};

/// DBLP-shaped synthetic graph with average degree 10.
pub fn dblp_graph(n: usize, seed: u64) -> TypedGraph {
    let (schema, props) = dblp_schema();
    generate_synthetic(&schema, &props, n, 10.0, seed).expect("valid dblp schema")
}

pub fn metapath_guidance(g: &TypedGraph, spec: &str) -> Guidance {
    let mp = parse_metapath(spec, &derive_schema(g)).expect("meta-path fits graph");
    Guidance::metapath(mp, g.type_count()).expect("spacey graph")
}

//! Typed heterogeneous graph, its meta-schema and the first-order typed
//! transition law.
//!
//! Adjacency is stored CSR-style with one slot per `(node, neighbor type)`,
//! so a typed neighborhood is a contiguous, id-sorted slice.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Dense node index assigned in file order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Dense node-type index assigned in order of first appearance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId(pub u16);

impl TypeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Immutable, unweighted, undirected multi-typed graph.
#[derive(Clone, Debug, PartialEq)]
pub struct TypedGraph {
    type_names: Vec<String>,
    node_names: Vec<String>,
    node_types: Vec<TypeId>,
    name_index: HashMap<String, NodeId>,
    // neighbors of u with type t live in neighbors[offsets[u*T + t]..offsets[u*T + t + 1]]
    // u32 keeps the index small enough to stay cache resident on large graphs
    offsets: Vec<u32>,
    neighbors: Vec<NodeId>,
    nodes_by_type: Vec<Vec<NodeId>>,
}

impl TypedGraph {
    pub fn node_count(&self) -> usize {
        self.node_types.len()
    }

    pub fn type_count(&self) -> usize {
        self.type_names.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn type_names(&self) -> &[String] {
        &self.type_names
    }

    pub fn type_name(&self, t: TypeId) -> &str {
        &self.type_names[t.index()]
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.type_names
            .iter()
            .position(|n| n == name)
            .map(|i| TypeId(i as u16))
    }

    #[inline]
    pub fn node_type(&self, u: NodeId) -> TypeId {
        self.node_types[u.index()]
    }

    pub fn node_name(&self, u: NodeId) -> &str {
        &self.node_names[u.index()]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(name).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count() as u32).map(NodeId)
    }

    pub fn nodes_of_type(&self, t: TypeId) -> &[NodeId] {
        &self.nodes_by_type[t.index()]
    }

    /// Sorted neighbors of `u` that have type `t`.
    #[inline]
    pub fn neighbors(&self, u: NodeId, t: TypeId) -> &[NodeId] {
        let slot = u.index() * self.type_count() + t.index();
        &self.neighbors[self.offsets[slot] as usize..self.offsets[slot + 1] as usize]
    }

    /// All neighbors of `u`, grouped by type then sorted by id.
    pub fn all_neighbors(&self, u: NodeId) -> &[NodeId] {
        let t = self.type_count();
        &self.neighbors[self.offsets[u.index() * t] as usize..self.offsets[(u.index() + 1) * t] as usize]
    }

    #[inline]
    pub fn typed_degree(&self, u: NodeId, t: TypeId) -> usize {
        let slot = u.index() * self.type_count() + t.index();
        (self.offsets[slot + 1] - self.offsets[slot]) as usize
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.all_neighbors(u).len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u, self.node_type(v)).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in id order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |u| {
            let mut out: Vec<(NodeId, NodeId)> = self
                .all_neighbors(u)
                .iter()
                .filter(|&&v| v > u)
                .map(|&v| (u, v))
                .collect();
            out.sort_unstable();
            out
        })
    }

    /// Copy of the graph with the given undirected edges removed. Node and
    /// type ids are preserved.
    pub fn without_edges(&self, removed: &HashSet<(NodeId, NodeId)>) -> TypedGraph {
        let mut b = GraphBuilder {
            type_names: self.type_names.clone(),
            node_names: self.node_names.clone(),
            node_types: self.node_types.clone(),
            name_index: self.name_index.clone(),
            edges: Vec::with_capacity(self.edge_count()),
        };
        for (u, v) in self.edges() {
            if !removed.contains(&(u, v)) && !removed.contains(&(v, u)) {
                b.edges.push((u.0, v.0));
            }
        }
        b.build()
    }

    /// Schema-level relation of an edge: the unordered pair of endpoint types.
    pub fn relation_type(&self, u: NodeId, v: NodeId) -> (TypeId, TypeId) {
        let (a, b) = (self.node_type(u), self.node_type(v));
        (a.min(b), a.max(b))
    }

    pub(crate) fn no_neighbor_error(&self, u: NodeId, t: TypeId) -> Error {
        Error::NoTypedNeighbor {
            node: self.node_name(u).to_string(),
            ty: self.type_name(t).to_string(),
        }
    }

    /// Samples a neighbor of type `t` uniformly; `None` when there is none.
    #[inline]
    pub fn try_sample_neighbor<R: Rng + ?Sized>(
        &self,
        u: NodeId,
        t: TypeId,
        rng: &mut R,
    ) -> Option<NodeId> {
        let nbrs = self.neighbors(u, t);
        match nbrs.len() {
            0 => None,
            1 => Some(nbrs[0]),
            n => Some(nbrs[rng.random_range(0..n)]),
        }
    }

    /// Writes the graph in the tab-separated nodes/edges format read by
    /// [`load_graph`].
    pub fn write(&self, nodes_path: &Path, edges_path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(nodes_path).map_err(|e| Error::io(nodes_path, e))?);
        for u in self.nodes() {
            writeln!(w, "{}\t{}", self.node_name(u), self.type_name(self.node_type(u)))
                .map_err(|e| Error::io(nodes_path, e))?;
        }
        w.flush().map_err(|e| Error::io(nodes_path, e))?;

        let mut w = BufWriter::new(File::create(edges_path).map_err(|e| Error::io(edges_path, e))?);
        for (u, v) in self.edges() {
            writeln!(w, "{}\t{}", self.node_name(u), self.node_name(v))
                .map_err(|e| Error::io(edges_path, e))?;
        }
        w.flush().map_err(|e| Error::io(edges_path, e))
    }
}

/// Incremental constructor for [`TypedGraph`].
#[derive(Debug, Default)]
pub struct GraphBuilder {
    type_names: Vec<String>,
    node_names: Vec<String>,
    node_types: Vec<TypeId>,
    name_index: HashMap<String, NodeId>,
    edges: Vec<(u32, u32)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a type name, returning its id (existing or new).
    pub fn add_type(&mut self, name: &str) -> TypeId {
        match self.type_names.iter().position(|n| n == name) {
            Some(i) => TypeId(i as u16),
            None => {
                self.type_names.push(name.to_string());
                TypeId(self.type_names.len() as u16 - 1)
            }
        }
    }

    /// Adds a node; re-declaring a node with the same type is a no-op.
    pub fn add_node(&mut self, name: &str, type_name: &str) -> Result<NodeId> {
        let t = self.add_type(type_name);
        if let Some(&id) = self.name_index.get(name) {
            let prev = self.node_types[id.index()];
            if prev != t {
                return Err(Error::ConflictingType {
                    id: name.to_string(),
                    first: self.type_names[prev.index()].clone(),
                    second: type_name.to_string(),
                });
            }
            return Ok(id);
        }
        let id = NodeId(self.node_names.len() as u32);
        self.node_names.push(name.to_string());
        self.node_types.push(t);
        self.name_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(name).copied()
    }

    /// Adds an undirected edge. Duplicates are removed at build time.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<()> {
        if u == v {
            return Err(Error::Degenerate(format!(
                "self-loop on node '{}'",
                self.node_names[u.index()]
            )));
        }
        self.edges.push((u.0, v.0));
        Ok(())
    }

    pub fn add_edge_by_name(&mut self, u: &str, v: &str) -> Result<()> {
        let a = self.node_id(u).ok_or_else(|| Error::UnknownNode(u.to_string()))?;
        let b = self.node_id(v).ok_or_else(|| Error::UnknownNode(v.to_string()))?;
        self.add_edge(a, b)
    }

    pub fn build(self) -> TypedGraph {
        let n = self.node_names.len();
        let tc = self.type_names.len().max(1);
        let types = &self.node_types;

        let mut directed: Vec<(u32, u16, u32)> = Vec::with_capacity(self.edges.len() * 2);
        for &(u, v) in &self.edges {
            directed.push((u, types[v as usize].0, v));
            directed.push((v, types[u as usize].0, u));
        }
        directed.sort_unstable();
        directed.dedup();

        assert!(
            directed.len() <= u32::MAX as usize,
            "{} adjacency entries exceed the u32 index range",
            directed.len()
        );
        let mut offsets = vec![0u32; n * tc + 1];
        for &(u, t, _) in &directed {
            offsets[u as usize * tc + t as usize + 1] += 1;
        }
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }
        let neighbors = directed.into_iter().map(|(_, _, v)| NodeId(v)).collect();

        let mut nodes_by_type = vec![Vec::new(); self.type_names.len()];
        for (i, t) in types.iter().enumerate() {
            nodes_by_type[t.index()].push(NodeId(i as u32));
        }

        TypedGraph {
            type_names: self.type_names,
            node_names: self.node_names,
            node_types: self.node_types,
            name_index: self.name_index,
            offsets,
            neighbors,
            nodes_by_type,
        }
    }
}

fn content(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
    .trim()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Loads a graph from a nodes file (`id<TAB>type`) and an edges file
/// (`src<TAB>dst[<TAB>relation]`). Edge direction is ignored and duplicate
/// edges collapse.
pub fn load_graph(nodes_path: &Path, edges_path: &Path) -> Result<TypedGraph> {
    let mut b = GraphBuilder::new();

    for (i, line) in open(nodes_path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(nodes_path, e))?;
        let body = content(&line);
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: nodes_path.to_path_buf(),
                line: i + 1,
                message: format!("expected '<node-id>\\t<type>', got {:?}", body),
            });
        }
        b.add_node(fields[0], fields[1])?;
    }

    for (i, line) in open(edges_path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(edges_path, e))?;
        let body = content(&line);
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::Parse {
                path: edges_path.to_path_buf(),
                line: i + 1,
                message: format!("expected '<src>\\t<dst>[\\t<relation>]', got {:?}", body),
            });
        }
        b.add_edge_by_name(fields[0], fields[1]).map_err(|e| match e {
            Error::Degenerate(message) => Error::Parse {
                path: edges_path.to_path_buf(),
                line: i + 1,
                message,
            },
            other => other,
        })?;
    }

    Ok(b.build())
}

/// Type-level view of a graph: which node types connect.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetaSchema {
    type_names: Vec<String>,
    type_edges: BTreeSet<(TypeId, TypeId)>,
    adjacent: Vec<Vec<TypeId>>,
}

impl MetaSchema {
    /// Builds a schema; pairs are stored unordered.
    pub fn new(type_names: Vec<String>, pairs: impl IntoIterator<Item = (TypeId, TypeId)>) -> Self {
        let type_edges: BTreeSet<_> = pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        let mut adjacent = vec![Vec::new(); type_names.len()];
        for &(a, b) in &type_edges {
            adjacent[a.index()].push(b);
            if a != b {
                adjacent[b.index()].push(a);
            }
        }
        for list in &mut adjacent {
            list.sort_unstable();
        }
        MetaSchema {
            type_names,
            type_edges,
            adjacent,
        }
    }

    /// Parses `A-P,P-C,P-T` style pair lists over the given type names.
    pub fn from_pairs(type_names: &[&str], pairs: &str) -> Result<Self> {
        let names: Vec<String> = type_names.iter().map(|s| s.to_string()).collect();
        let lookup = |s: &str| {
            names
                .iter()
                .position(|n| n == s)
                .map(|i| TypeId(i as u16))
                .ok_or_else(|| Error::UnknownType(s.to_string()))
        };
        let mut out = Vec::new();
        for pair in pairs.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (a, b) = pair
                .split_once('-')
                .ok_or_else(|| Error::InvalidConfig(format!("bad schema pair '{pair}'")))?;
            out.push((lookup(a.trim())?, lookup(b.trim())?));
        }
        Ok(Self::new(names, out))
    }

    pub fn type_count(&self) -> usize {
        self.type_names.len()
    }

    pub fn type_names(&self) -> &[String] {
        &self.type_names
    }

    pub fn type_name(&self, t: TypeId) -> &str {
        &self.type_names[t.index()]
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.type_names
            .iter()
            .position(|n| n == name)
            .map(|i| TypeId(i as u16))
    }

    pub fn type_edges(&self) -> &BTreeSet<(TypeId, TypeId)> {
        &self.type_edges
    }

    pub fn has_edge(&self, a: TypeId, b: TypeId) -> bool {
        self.type_edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn adjacent_types(&self, t: TypeId) -> &[TypeId] {
        &self.adjacent[t.index()]
    }
}

/// The meta-schema realized by a graph's edges.
pub fn derive_schema(g: &TypedGraph) -> MetaSchema {
    let mut pairs = HashSet::new();
    for u in g.nodes() {
        let tu = g.node_type(u);
        for t in 0..g.type_count() {
            let t = TypeId(t as u16);
            if g.typed_degree(u, t) > 0 {
                pairs.insert((tu.min(t), tu.max(t)));
            }
        }
    }
    MetaSchema::new(g.type_names().to_vec(), pairs)
}

/// Row-normalized adjacency probability of stepping from `src` to `dst`
/// among `src`'s neighbors of type `dst_type`.
pub fn transition_prob(g: &TypedGraph, src: NodeId, dst_type: TypeId, dst: NodeId) -> Result<f64> {
    let nbrs = g.neighbors(src, dst_type);
    if nbrs.is_empty() {
        return Err(g.no_neighbor_error(src, dst_type));
    }
    Ok(if nbrs.binary_search(&dst).is_ok() {
        1.0 / nbrs.len() as f64
    } else {
        0.0
    })
}

/// Draws a neighbor of type `dst_type` according to [`transition_prob`].
pub fn sample_typed_neighbor<R: Rng + ?Sized>(
    g: &TypedGraph,
    src: NodeId,
    dst_type: TypeId,
    rng: &mut R,
) -> Result<NodeId> {
    g.try_sample_neighbor(src, dst_type, rng)
        .ok_or_else(|| g.no_neighbor_error(src, dst_type))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Authors a1,a2; papers p1,p2; venue v1.
    pub(crate) fn toy_graph() -> TypedGraph {
        let mut b = GraphBuilder::new();
        for (n, t) in [("a1", "A"), ("a2", "A"), ("p1", "P"), ("p2", "P"), ("v1", "V")] {
            b.add_node(n, t).unwrap();
        }
        for (u, v) in [("a1", "p1"), ("a2", "p1"), ("a2", "p2"), ("p1", "v1"), ("p2", "v1")] {
            b.add_edge_by_name(u, v).unwrap();
        }
        b.build()
    }

    fn id(g: &TypedGraph, s: &str) -> NodeId {
        g.node_id(s).unwrap()
    }

    #[test]
    fn toy_counts() {
        let g = toy_graph();
        let a = g.type_id("A").unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edge_count(), 5);
        assert_eq!(g.typed_degree(id(&g, "p1"), a), 2);
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let mut b = GraphBuilder::new();
        b.add_node("x", "A").unwrap();
        b.add_node("y", "B").unwrap();
        b.add_edge_by_name("x", "y").unwrap();
        b.add_edge_by_name("y", "x").unwrap();
        b.add_edge_by_name("x", "y").unwrap();
        let g = b.build();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degree(NodeId(0)), 1);
    }

    #[test]
    fn conflicting_type_rejected() {
        let mut b = GraphBuilder::new();
        b.add_node("x", "A").unwrap();
        assert!(b.add_node("x", "A").is_ok());
        assert!(matches!(b.add_node("x", "B"), Err(Error::ConflictingType { .. })));
    }

    #[test]
    fn schema_of_toy() {
        let g = toy_graph();
        let s = derive_schema(&g);
        let (a, p, v) = (TypeId(0), TypeId(1), TypeId(2));
        let expect: BTreeSet<_> = [(a, p), (p, v)].into_iter().collect();
        assert_eq!(s.type_edges(), &expect);
        assert_eq!(s.adjacent_types(p), &[a, v]);
    }

    #[test]
    fn schema_of_singleton() {
        let mut b = GraphBuilder::new();
        b.add_node("only", "A").unwrap();
        assert!(derive_schema(&b.build()).type_edges().is_empty());
    }

    #[test]
    fn dblp_shaped_schema_has_three_pairs() {
        let mut b = GraphBuilder::new();
        for (n, t) in [("a", "A"), ("p", "P"), ("c", "C"), ("t", "T")] {
            b.add_node(n, t).unwrap();
        }
        for (u, v) in [("a", "p"), ("p", "c"), ("p", "t")] {
            b.add_edge_by_name(u, v).unwrap();
        }
        assert_eq!(derive_schema(&b.build()).type_edges().len(), 3);
    }

    #[test]
    fn toy_transition_probs() {
        let g = toy_graph();
        let (a, p, v) = (TypeId(0), TypeId(1), TypeId(2));
        assert_eq!(transition_prob(&g, id(&g, "a2"), p, id(&g, "p1")).unwrap(), 0.5);
        assert_eq!(transition_prob(&g, id(&g, "p1"), v, id(&g, "v1")).unwrap(), 1.0);
        assert!(matches!(
            transition_prob(&g, id(&g, "v1"), a, id(&g, "a1")),
            Err(Error::NoTypedNeighbor { .. })
        ));
    }

    #[test]
    fn rows_are_stochastic() {
        let g = toy_graph();
        for u in g.nodes() {
            for t in 0..g.type_count() {
                let t = TypeId(t as u16);
                if g.typed_degree(u, t) == 0 {
                    continue;
                }
                let s: f64 = g
                    .nodes_of_type(t)
                    .iter()
                    .map(|&v| transition_prob(&g, u, t, v).unwrap())
                    .sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_frequency_matches_row() {
        let g = toy_graph();
        let p = TypeId(1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_typed_neighbor(&g, id(&g, "a2"), p, &mut rng).unwrap() == id(&g, "p1"))
            .count();
        let f = hits as f64 / n as f64;
        assert!((0.49..=0.51).contains(&f), "{f}");
    }

    #[test]
    fn single_neighbor_and_determinism() {
        let g = toy_graph();
        let v = TypeId(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_typed_neighbor(&g, id(&g, "p1"), v, &mut rng).unwrap(), id(&g, "v1"));
        }
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_typed_neighbor(&g, id(&g, "a2"), TypeId(1), &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }

    #[test]
    fn has_edge_symmetric() {
        let g = toy_graph();
        for u in g.nodes() {
            for v in g.nodes() {
                assert_eq!(g.has_edge(u, v), g.has_edge(v, u));
            }
        }
    }
}

//! Meta-path and meta-graph parsing, Markov order detection, window
//! factorization and the folded spacey graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{MetaSchema, TypeId};

/// A validated cyclic meta-path `A_1 -> ... -> A_{L+1}` with `A_1 == A_{L+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetaPath {
    types: Vec<TypeId>,
    names: Vec<String>,
    order: usize,
    windows: BTreeMap<Vec<TypeId>, TypeId>,
}

impl MetaPath {
    /// Full type sequence `A_1..A_{L+1}`.
    pub fn types(&self) -> &[TypeId] {
        &self.types
    }

    /// Path length `L` (number of steps).
    pub fn len(&self) -> usize {
        self.types.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Markov order `k`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn windows(&self) -> &BTreeMap<Vec<TypeId>, TypeId> {
        &self.windows
    }

    pub fn source(&self) -> TypeId {
        self.types[0]
    }

    /// The type the walk takes first from a start node of type `A_1`.
    pub fn first_step(&self) -> TypeId {
        self.types[1]
    }

    /// Second-order transitions `(A_l, A_{l+1}) -> A_{l+2}` over the cyclic
    /// sequence. For order-1 paths this lifts the windows to pairs.
    pub fn pair_successors(&self) -> Result<BTreeMap<(TypeId, TypeId), TypeId>> {
        if self.order > 2 {
            return Err(Error::UnsupportedOrder(self.order));
        }
        let cyc = &self.types[..self.len()];
        let l = cyc.len();
        Ok((0..l)
            .map(|p| ((cyc[p], cyc[(p + 1) % l]), cyc[(p + 2) % l]))
            .collect())
    }

    /// Replays the windows from `A_1..A_k` to regenerate `A_1..A_{L+1}`.
    pub fn replay(&self) -> Vec<TypeId> {
        let mut seq: Vec<TypeId> = self.types[..self.order].to_vec();
        while seq.len() < self.types.len() {
            let key = seq[seq.len() - self.order..].to_vec();
            seq.push(self.windows[&key]);
        }
        seq
    }

    /// True when a concrete type sequence follows the path from position 0,
    /// wrapping around cyclically.
    pub fn is_instance(&self, seq: &[TypeId]) -> bool {
        let l = self.len();
        seq.iter().enumerate().all(|(i, t)| *t == self.types[i % l])
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names.join("-"))
    }
}

fn split_spec<'a>(spec: &'a str, schema: &MetaSchema) -> Vec<&'a str> {
    let spec = spec.trim();
    if spec.contains('-') {
        return spec.split('-').map(str::trim).collect();
    }
    // juxtaposition form ("APVPA") when every character is a type name
    let chars: Vec<&str> = spec
        .char_indices()
        .map(|(i, c)| &spec[i..i + c.len_utf8()])
        .collect();
    if chars.iter().all(|c| schema.type_id(c).is_some()) {
        chars
    } else {
        vec![spec]
    }
}

/// Parses `A-P-V-P-A` (or `APVPA` when every type name is one character)
/// and validates it against `schema`.
pub fn parse_metapath(spec: &str, schema: &MetaSchema) -> Result<MetaPath> {
    let parts = split_spec(spec, schema);
    if parts.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "meta-path '{spec}' needs at least two types"
        )));
    }
    let types = parts
        .iter()
        .map(|p| schema.type_id(p).ok_or_else(|| Error::UnknownType(p.to_string())))
        .collect::<Result<Vec<_>>>()?;
    for w in types.windows(2) {
        if !schema.has_edge(w[0], w[1]) {
            return Err(Error::SchemaViolation {
                from: schema.type_name(w[0]).to_string(),
                to: schema.type_name(w[1]).to_string(),
            });
        }
    }
    if types[0] != types[types.len() - 1] {
        let mut hint: Vec<&str> = parts.clone();
        hint.extend(parts.iter().rev().skip(1));
        return Err(Error::NotCyclic {
            first: parts[0].to_string(),
            last: parts[parts.len() - 1].to_string(),
            hint: hint.join("-"),
        });
    }
    let order = chain_order(&types)?;
    let windows = factorize(&types, order);
    Ok(MetaPath {
        names: parts.iter().map(|s| s.to_string()).collect(),
        types,
        order,
        windows,
    })
}

fn cyclic_windows(cyc: &[TypeId], k: usize) -> impl Iterator<Item = (Vec<TypeId>, TypeId)> + '_ {
    let l = cyc.len();
    (0..l).map(move |p| {
        let key = (0..k).map(|i| cyc[(p + i) % l]).collect();
        (key, cyc[(p + k) % l])
    })
}

/// Smallest `k` such that every length-`k` cyclic window of the sequence
/// determines a unique successor type.
///
/// `seq` is the full cyclic sequence `A_1..A_{L+1}`.
pub fn chain_order(seq: &[TypeId]) -> Result<usize> {
    if seq.len() < 2 || seq[0] != seq[seq.len() - 1] {
        return Err(Error::NoFiniteOrder);
    }
    let cyc = &seq[..seq.len() - 1];
    for k in 1..=cyc.len() {
        let mut seen: BTreeMap<Vec<TypeId>, TypeId> = BTreeMap::new();
        let unique = cyclic_windows(cyc, k).all(|(key, next)| *seen.entry(key).or_insert(next) == next);
        if unique {
            return Ok(k);
        }
    }
    Err(Error::NoFiniteOrder)
}

/// Cyclic length-`k` windows of `seq` mapped to their successor type.
pub fn factorize(seq: &[TypeId], k: usize) -> BTreeMap<Vec<TypeId>, TypeId> {
    cyclic_windows(&seq[..seq.len() - 1], k).collect()
}

/// Type-level folding of a second-order meta-path: every valid
/// `(predecessor, current) -> next` rule, indexed for constant-time lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceyGraph {
    type_count: usize,
    context_successors: BTreeMap<(TypeId, TypeId), TypeId>,
    // dense [pred * T + cur] -> next
    table: Vec<Option<TypeId>>,
    predecessors: Vec<Vec<TypeId>>,
}

impl SpaceyGraph {
    fn from_pairs(type_count: usize, pairs: BTreeMap<(TypeId, TypeId), TypeId>) -> Self {
        let mut table = vec![None; type_count * type_count];
        let mut predecessors = vec![Vec::new(); type_count];
        for (&(p, c), &n) in &pairs {
            table[p.index() * type_count + c.index()] = Some(n);
            predecessors[c.index()].push(p);
        }
        SpaceyGraph {
            type_count,
            context_successors: pairs,
            table,
            predecessors,
        }
    }

    pub fn context_successors(&self) -> &BTreeMap<(TypeId, TypeId), TypeId> {
        &self.context_successors
    }

    #[inline]
    pub fn successor(&self, pred: TypeId, cur: TypeId) -> Option<TypeId> {
        self.table[pred.index() * self.type_count + cur.index()]
    }

    /// Valid predecessor types of `cur`, sorted.
    #[inline]
    pub fn predecessor_types(&self, cur: TypeId) -> &[TypeId] {
        &self.predecessors[cur.index()]
    }

    /// Types reachable in one step from `cur` under some valid predecessor.
    pub fn successors_of(&self, cur: TypeId) -> BTreeSet<TypeId> {
        self.predecessor_types(cur)
            .iter()
            .filter_map(|&p| self.successor(p, cur))
            .collect()
    }

    /// True when every consecutive step of `types` is a transition of the
    /// spacey graph, i.e. the sequence is a walk on it.
    pub fn admits_walk(&self, types: &[TypeId]) -> bool {
        types.windows(2).all(|w| self.successors_of(w[0]).contains(&w[1]))
    }
}

/// Folds a meta-path of order 1 or 2 into its spacey graph.
pub fn build_spacey_graph(mp: &MetaPath, type_count: usize) -> Result<SpaceyGraph> {
    Ok(SpaceyGraph::from_pairs(type_count, mp.pair_successors()?))
}

/// Union of meta-paths sharing one source/target type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetaGraph {
    members: Vec<MetaPath>,
    type_count: usize,
    successor_types: BTreeMap<(TypeId, TypeId), Vec<TypeId>>,
    // dense [pred * T + cur] -> successor set
    table: Vec<Vec<TypeId>>,
    predecessors: Vec<Vec<TypeId>>,
    first_steps: Vec<TypeId>,
}

impl MetaGraph {
    pub fn members(&self) -> &[MetaPath] {
        &self.members
    }

    pub fn source(&self) -> TypeId {
        self.members[0].source()
    }

    pub fn successor_types(&self) -> &BTreeMap<(TypeId, TypeId), Vec<TypeId>> {
        &self.successor_types
    }

    /// Candidate next types for context `(pred, cur)`, sorted.
    #[inline]
    pub fn successors(&self, pred: TypeId, cur: TypeId) -> &[TypeId] {
        &self.table[pred.index() * self.type_count + cur.index()]
    }

    #[inline]
    pub fn predecessor_types(&self, cur: TypeId) -> &[TypeId] {
        &self.predecessors[cur.index()]
    }

    /// Candidate types for the first step out of a source node.
    pub fn first_steps(&self) -> &[TypeId] {
        &self.first_steps
    }
}

/// Parses a meta-graph given as a list of member meta-paths.
pub fn parse_metagraph<S: AsRef<str>>(specs: &[S], schema: &MetaSchema) -> Result<MetaGraph> {
    if specs.is_empty() {
        return Err(Error::InvalidMetaGraph("no member meta-paths".into()));
    }
    let members = specs
        .iter()
        .map(|s| parse_metapath(s.as_ref(), schema))
        .collect::<Result<Vec<_>>>()?;
    let source = members[0].source();
    if let Some(bad) = members.iter().find(|m| m.source() != source) {
        return Err(Error::InvalidMetaGraph(format!(
            "member '{}' starts at '{}' but '{}' starts at '{}'",
            bad,
            schema.type_name(bad.source()),
            members[0],
            schema.type_name(source)
        )));
    }

    let tc = schema.type_count();
    let mut union: BTreeMap<(TypeId, TypeId), BTreeSet<TypeId>> = BTreeMap::new();
    let mut first: BTreeSet<TypeId> = BTreeSet::new();
    for m in &members {
        for (key, next) in m.pair_successors()? {
            union.entry(key).or_default().insert(next);
        }
        first.insert(m.first_step());
    }
    let successor_types: BTreeMap<_, Vec<_>> =
        union.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect();
    let mut table = vec![Vec::new(); tc * tc];
    let mut predecessors = vec![Vec::new(); tc];
    for (&(p, c), next) in &successor_types {
        table[p.index() * tc + c.index()] = next.clone();
        predecessors[c.index()].push(p);
    }
    Ok(MetaGraph {
        members,
        type_count: tc,
        successor_types,
        table,
        predecessors,
        first_steps: first.into_iter().collect(),
    })
}

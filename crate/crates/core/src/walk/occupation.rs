use std::collections::HashMap;

use rand::Rng;

use crate::graph::{NodeId, TypeId, TypedGraph};

/// Laplace-smoothed visit distribution of one trajectory:
/// `w_i(n) = (1 + count_i) / (n + N)`.
///
/// Visits are also kept per type in arrival order, which makes both the
/// per-type mass and a draw proportional to `w` restricted to a set of types
/// constant-time in the number of nodes.
#[derive(Clone, Debug)]
pub struct OccupationVector {
    n: u64,
    total_nodes: usize,
    counts: HashMap<NodeId, u32>,
    history: Vec<Vec<NodeId>>,
    type_sizes: Vec<usize>,
}

impl OccupationVector {
    /// Fresh vector (`n = 0`, uniform `1/N`).
    pub fn new(g: &TypedGraph) -> Self {
        OccupationVector {
            n: 0,
            total_nodes: g.node_count(),
            counts: HashMap::new(),
            history: vec![Vec::new(); g.type_count()],
            type_sizes: (0..g.type_count())
                .map(|t| g.nodes_of_type(TypeId(t as u16)).len())
                .collect(),
        }
    }

    pub fn record(&mut self, node: NodeId, ty: TypeId) {
        self.n += 1;
        *self.counts.entry(node).or_insert(0) += 1;
        self.history[ty.index()].push(node);
    }

    pub fn clear(&mut self) {
        self.n = 0;
        self.counts.clear();
        for h in &mut self.history {
            h.clear();
        }
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn total_nodes(&self) -> usize {
        self.total_nodes
    }

    pub fn count(&self, node: NodeId) -> u32 {
        self.counts.get(&node).copied().unwrap_or(0)
    }

    fn denom(&self) -> f64 {
        (self.n + self.total_nodes as u64) as f64
    }

    #[inline]
    pub fn weight(&self, node: NodeId) -> f64 {
        (1.0 + self.count(node) as f64) / self.denom()
    }

    /// Unnormalized mass of a type: its node count plus its visits.
    #[inline]
    fn type_units(&self, t: TypeId) -> u64 {
        (self.type_sizes[t.index()] + self.history[t.index()].len()) as u64
    }

    #[inline]
    pub fn type_mass(&self, t: TypeId) -> f64 {
        self.type_units(t) as f64 / self.denom()
    }

    /// Total occupation mass of the nodes whose type is in `types`.
    pub fn restricted_mass(&self, types: &[TypeId]) -> f64 {
        types.iter().map(|&t| self.type_units(t)).sum::<u64>() as f64 / self.denom()
    }

    /// Dense `w(n)` over all nodes.
    pub fn to_dense(&self) -> Vec<f64> {
        let d = self.denom();
        let mut w = vec![1.0 / d; self.total_nodes];
        for (&node, &c) in &self.counts {
            w[node.index()] = (1.0 + c as f64) / d;
        }
        w
    }

    /// Locates a uniform draw over the restricted mass: the type it falls in
    /// and the offset within that type's units.
    fn draw_unit<R: Rng + ?Sized>(&self, types: &[TypeId], rng: &mut R) -> Option<(TypeId, u64)> {
        let total: u64 = types.iter().map(|&t| self.type_units(t)).sum();
        if total == 0 {
            return None;
        }
        let mut r = rng.random_range(0..total);
        for &t in types {
            let units = self.type_units(t);
            if r < units {
                return Some((t, r));
            }
            r -= units;
        }
        unreachable!("draw exceeded restricted mass")
    }

    /// Draws a node with probability proportional to `w_i(n)` among nodes
    /// whose type is in `types`. `None` when those types hold no nodes.
    pub fn sample_restricted<R: Rng + ?Sized>(
        &self,
        g: &TypedGraph,
        types: &[TypeId],
        rng: &mut R,
    ) -> Option<NodeId> {
        let (t, r) = self.draw_unit(types, rng)?;
        let size = self.type_sizes[t.index()] as u64;
        // the first |T| units are the +1 smoothing of each node,
        // the rest are individual recorded visits
        Some(if r < size {
            g.nodes_of_type(t)[r as usize]
        } else {
            self.history[t.index()][(r - size) as usize]
        })
    }

    /// Type of the node [`sample_restricted`](Self::sample_restricted) would
    /// return for the same rng state, without touching node arrays.
    pub fn sample_restricted_type<R: Rng + ?Sized>(&self, types: &[TypeId], rng: &mut R) -> Option<TypeId> {
        self.draw_unit(types, rng).map(|(t, _)| t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::toy_graph;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_is_uniform() {
        let g = toy_graph();
        let occ = OccupationVector::new(&g);
        for u in g.nodes() {
            assert!((occ.weight(u) - 0.2).abs() < 1e-15);
        }
        assert!((occ.type_mass(TypeId(0)) - 0.4).abs() < 1e-15);
        assert!((occ.type_mass(TypeId(2)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn weights_follow_smoothed_counts() {
        let g = toy_graph();
        let mut occ = OccupationVector::new(&g);
        let seq = [0u32, 2, 4, 2, 1];
        for &i in &seq {
            occ.record(NodeId(i), g.node_type(NodeId(i)));
        }
        let w = occ.to_dense();
        // n = 5, N = 5
        assert!((w[2] - 3.0 / 10.0).abs() < 1e-15);
        assert!((w[3] - 1.0 / 10.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let by_type: f64 = (0..3).map(|t| occ.type_mass(TypeId(t))).sum();
        assert!((by_type - 1.0).abs() < 1e-12);
        let a_mass = w[0] + w[1];
        assert!((occ.type_mass(TypeId(0)) - a_mass).abs() < 1e-15);
    }

    #[test]
    fn restricted_draw_matches_weights() {
        let g = toy_graph();
        let mut occ = OccupationVector::new(&g);
        for &i in &[0u32, 2, 0, 2, 0] {
            occ.record(NodeId(i), g.node_type(NodeId(i)));
        }
        let types = [TypeId(0), TypeId(2)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 200_000;
        let mut hits = [0usize; 5];
        for _ in 0..draws {
            hits[occ.sample_restricted(&g, &types, &mut rng).unwrap().index()] += 1;
        }
        let mass = occ.restricted_mass(&types);
        for u in [0u32, 1, 4] {
            let expect = occ.weight(NodeId(u)) / mass;
            let got = hits[u as usize] as f64 / draws as f64;
            assert!((got - expect).abs() < 0.01, "{u}: {got} vs {expect}");
        }
        assert_eq!(hits[2] + hits[3], 0);
    }

    #[test]
    fn type_draw_matches_node_draw() {
        let g = toy_graph();
        let mut occ = OccupationVector::new(&g);
        for u in [0u32, 2, 4, 2, 3, 4] {
            occ.record(NodeId(u), g.node_type(NodeId(u)));
        }
        let types = [TypeId(0), TypeId(2)];
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = a.clone();
        for _ in 0..500 {
            let node = occ.sample_restricted(&g, &types, &mut a).unwrap();
            assert_eq!(occ.sample_restricted_type(&types, &mut b), Some(g.node_type(node)));
        }
    }

}

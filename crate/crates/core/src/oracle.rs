//! Dense reference computations for small graphs: the second-order transition
//! hypermatrix, its meta-graph integration, the tensor fixed point, the
//! spacey first-order matrix and the lifted pair-chain stationary
//! distribution.
//!
//! Everything here is O(n^3) in memory and is capped at [`DENSE_CAP`] nodes.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{transition_prob, NodeId, TypeId, TypedGraph};
use crate::metalang::MetaPath;
use crate::walk::{Guidance, OccupationVector, WalkMode, Walker, WalkerState};

pub const DENSE_CAP: usize = 200;

/// `H[i][j][k]`: probability of moving to `k` given current node `j` and
/// previous node `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypermatrix {
    n: usize,
    data: Vec<f64>,
}

impl Hypermatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n > DENSE_CAP {
            return Err(Error::GraphTooLarge { nodes: n, cap: DENSE_CAP });
        }
        Ok(Hypermatrix {
            n,
            data: vec![0.0; n * n * n],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.at(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.at(i, j, k);
        self.data[idx] = v;
    }

    pub fn slice(&self, i: usize, j: usize) -> &[f64] {
        let s = self.at(i, j, 0);
        &self.data[s..s + self.n]
    }

    pub fn slice_sum(&self, i: usize, j: usize) -> f64 {
        self.slice(i, j).iter().sum()
    }

    fn nonzeros(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                for (k, &v) in self.slice(i, j).iter().enumerate() {
                    if v > 0.0 {
                        out.push((i, j, k, v));
                    }
                }
            }
        }
        out
    }
}

/// Dense second-order hypermatrix of a meta-path of order 1 or 2.
pub fn build_hypermatrix(g: &TypedGraph, mp: &MetaPath) -> Result<Hypermatrix> {
    let mut h = Hypermatrix::zeros(g.node_count())?;
    let rules = mp.pair_successors()?;
    for i in g.nodes() {
        for j in g.nodes() {
            let Some(&next) = rules.get(&(g.node_type(i), g.node_type(j))) else {
                continue;
            };
            for &k in g.neighbors(j, next) {
                h.set(i.index(), j.index(), k.index(), transition_prob(g, j, next, k)?);
            }
        }
    }
    Ok(h)
}

/// Integrates member hypermatrices by averaging each entry over the members
/// in which it is nonzero.
pub fn integrate_hypermatrices(members: &[Hypermatrix]) -> Result<Hypermatrix> {
    let first = members.first().ok_or(Error::Empty("hypermatrix list"))?;
    let n = first.n;
    if let Some(bad) = members.iter().find(|m| m.n != n) {
        return Err(Error::DimensionMismatch(n, bad.n));
    }
    let mut out = Hypermatrix::zeros(n)?;
    for idx in 0..out.data.len() {
        let (mut sum, mut count) = (0.0, 0usize);
        for m in members {
            let v = m.data[idx];
            if v > 0.0 {
                sum += v;
                count += 1;
            }
        }
        if count > 0 {
            out.data[idx] = sum / count as f64;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint {
    pub distribution: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn contract(nz: &[(usize, usize, usize, f64)], x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for &(i, j, k, h) in nz {
        out[k] += h * x[i] * x[j];
    }
}

/// `normalize(H . (x (x) x))`: the right-hand side of the stationarity
/// equation, rescaled to a distribution because type-mismatched contexts
/// carry no transition mass.
pub fn stationary_map(h: &Hypermatrix, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; h.n];
    contract(&h.nonzeros(), x, &mut y);
    normalize(&mut y);
    y
}

fn normalize(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    s
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Damping of the fixed-point iteration.
pub const FIXED_POINT_DAMPING: f64 = 0.5;

/// Solves `pi = normalize(H . (pi (x) pi))` by the damped iteration
/// `x <- (1 - gamma) F(x) + gamma x` from the uniform start.
pub fn fixed_point_stationary(h: &Hypermatrix, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    let start = vec![1.0 / h.n as f64; h.n];
    fixed_point_from(h, &start, tol, max_iter)
}

/// As [`fixed_point_stationary`] from an arbitrary starting distribution.
pub fn fixed_point_from(h: &Hypermatrix, start: &[f64], tol: f64, max_iter: usize) -> Result<FixedPoint> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    if h.n == 0 {
        return Err(Error::Empty("hypermatrix"));
    }
    let nz = h.nonzeros();
    let mut x = start.to_vec();
    normalize(&mut x);
    let mut fx = vec![0.0; h.n];
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        contract(&nz, &x, &mut fx);
        if normalize(&mut fx) == 0.0 {
            return Err(Error::Degenerate("all mass on invalid contexts".into()));
        }
        residual = max_abs_diff(&fx, &x);
        if residual <= tol {
            return Ok(FixedPoint {
                distribution: x,
                iterations: it,
                residual,
            });
        }
        for (xi, fi) in x.iter_mut().zip(&fx) {
            *xi = (1.0 - FIXED_POINT_DAMPING) * fi + FIXED_POINT_DAMPING * *xi;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
        last: x,
    })
}

/// Fixed points reached from several random starting distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplicityProbe {
    pub fixed_points: Vec<FixedPoint>,
    /// Starts that hit the iteration cap.
    pub failures: usize,
    /// Largest L1 distance between any two converged fixed points.
    pub max_pairwise_l1: f64,
}

/// Solves the fixed-point problem from `starts` random Dirichlet(1) points.
/// A large `max_pairwise_l1` means the solution is not unique.
pub fn fixed_point_multiplicity(h: &Hypermatrix, starts: usize, seed: u64, tol: f64, max_iter: usize) -> Result<MultiplicityProbe> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut fixed_points = Vec::with_capacity(starts);
    let mut failures = 0;
    for _ in 0..starts {
        // exponential draws normalize to a uniform point on the simplex
        let start: Vec<f64> = (0..h.n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        match fixed_point_from(h, &start, tol, max_iter) {
            Ok(fp) => fixed_points.push(fp),
            Err(Error::NonConvergence { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    let mut max_pairwise_l1: f64 = 0.0;
    for (a, fa) in fixed_points.iter().enumerate() {
        for fb in &fixed_points[a + 1..] {
            max_pairwise_l1 = max_pairwise_l1.max(l1_distance(&fa.distribution, &fb.distribution));
        }
    }
    Ok(MultiplicityProbe {
        fixed_points,
        failures,
        max_pairwise_l1,
    })
}

/// First-order matrix of the spacey walk, literal and row-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceyMatrix {
    pub n: usize,
    /// `R[j][k] = sum_i H[i][j][k] ((1 - alpha) x_i + alpha w_i)`.
    pub literal: Vec<f64>,
    /// Rows of `literal` rescaled to sum to one (all-zero rows kept).
    pub normalized: Vec<f64>,
}

impl SpaceyMatrix {
    pub fn row(&self, j: usize) -> &[f64] {
        &self.literal[j * self.n..(j + 1) * self.n]
    }

    pub fn normalized_row(&self, j: usize) -> &[f64] {
        &self.normalized[j * self.n..(j + 1) * self.n]
    }
}

pub fn spacey_transition_matrix(h: &Hypermatrix, x: &[f64], w: &[f64], alpha: f64) -> Result<SpaceyMatrix> {
    let n = h.n;
    if x.len() != n || w.len() != n {
        return Err(Error::DimensionMismatch(n, x.len().max(w.len())));
    }
    let mut literal = vec![0.0; n * n];
    for i in 0..n {
        let mix = (1.0 - alpha) * x[i] + alpha * w[i];
        for j in 0..n {
            for (k, &v) in h.slice(i, j).iter().enumerate() {
                literal[j * n + k] += v * mix;
            }
        }
    }
    let mut normalized = literal.clone();
    for row in normalized.chunks_mut(n.max(1)) {
        normalize(row);
    }
    Ok(SpaceyMatrix { n, literal, normalized })
}

/// Stationary node marginal of the strict second-order walk, computed on the
/// equivalent first-order chain over ordered `(previous, current)` pairs.
pub fn pair_chain_stationary(h: &Hypermatrix) -> Result<Vec<f64>> {
    let n = h.n;
    // states: pairs (j, k) reachable by some transition i -> (j, k)
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut states = Vec::new();
    for (_, j, k, _) in h.nonzeros() {
        index.entry((j, k)).or_insert_with(|| {
            states.push((j, k));
            states.len() - 1
        });
    }
    if states.is_empty() {
        return Err(Error::Empty("pair chain"));
    }
    let mut out_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); states.len()];
    let mut in_edges: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
    for (s, &(i, j)) in states.iter().enumerate() {
        for (k, &p) in h.slice(i, j).iter().enumerate() {
            if p > 0.0 {
                let t = index[&(j, k)];
                out_edges[s].push((t, p));
                in_edges[t].push(s);
            }
        }
    }
    let unreachable = |adj: &dyn Fn(usize) -> Vec<usize>| -> Option<usize> {
        let mut seen = vec![false; states.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(s) = queue.pop_front() {
            for t in adj(s) {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen.iter().position(|&b| !b)
    };
    let fwd = |s: usize| out_edges[s].iter().map(|&(t, _)| t).collect();
    let bwd = |s: usize| in_edges[s].clone();
    if let Some(bad) = unreachable(&fwd).or_else(|| unreachable(&bwd)) {
        let (i, j) = states[bad];
        return Err(Error::Reducible(format!("#{i}"), format!("#{j}")));
    }

    // lazy chain: same stationary law, aperiodic
    let mut pi = vec![1.0 / states.len() as f64; states.len()];
    let mut next = vec![0.0; states.len()];
    for _ in 0..10_000_000 {
        next.iter_mut().zip(&pi).for_each(|(v, p)| *v = 0.5 * p);
        for (s, edges) in out_edges.iter().enumerate() {
            for &(t, p) in edges {
                next[t] += 0.5 * pi[s] * p;
            }
        }
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if delta <= 1e-12 {
            break;
        }
    }
    let mut marginal = vec![0.0; n];
    for (s, &(_, k)) in states.iter().enumerate() {
        marginal[k] += pi[s];
    }
    normalize(&mut marginal);
    Ok(marginal)
}

/// Visit-frequency histogram over `n` nodes.
pub fn empirical_distribution(paths: &[Vec<NodeId>], n: usize) -> Result<Vec<f64>> {
    let mut hist = vec![0.0; n];
    let mut total = 0usize;
    for p in paths {
        for &u in p {
            hist[u.index()] += 1.0;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Empty("trajectory"));
    }
    hist.iter_mut().for_each(|v| *v /= total as f64);
    Ok(hist)
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Next-node distribution of the meta-graph spacey walk at context
/// `(y, j)` computed literally from the integrated hypermatrix: next type
/// drawn by the personalized type law over the types with nonzero `H`
/// mass, then node `k` with probability `H[y][j][k]`.
pub fn integrated_next_distribution(
    h: &Hypermatrix,
    g: &TypedGraph,
    y: NodeId,
    j: NodeId,
    occupation: &OccupationVector,
    alpha: f64,
) -> Vec<f64> {
    let slice = h.slice(y.index(), j.index());
    let mut type_has_mass = vec![false; g.type_count()];
    for (k, &v) in slice.iter().enumerate() {
        if v > 0.0 {
            type_has_mass[g.node_type(NodeId(k as u32)).index()] = true;
        }
    }
    let candidates: Vec<TypeId> = (0..g.type_count())
        .filter(|&t| type_has_mass[t])
        .map(|t| TypeId(t as u16))
        .collect();
    if candidates.is_empty() {
        return vec![0.0; h.n];
    }
    let w = occupation.to_dense();
    let mut mass = vec![0.0; g.type_count()];
    for (i, wi) in w.iter().enumerate() {
        mass[g.node_type(NodeId(i as u32)).index()] += wi;
    }
    let zsum: f64 = candidates.iter().map(|t| mass[t.index()]).sum();
    let mut type_prob = vec![0.0; g.type_count()];
    for t in &candidates {
        type_prob[t.index()] = (1.0 - alpha) / candidates.len() as f64 + alpha * mass[t.index()] / zsum;
    }
    slice
        .iter()
        .enumerate()
        .map(|(k, &v)| type_prob[g.node_type(NodeId(k as u32)).index()] * v)
        .collect()
}

/// Everything the stationarity check reports.
#[derive(Clone, Debug)]
pub struct StationarityReport {
    pub fixed_point: FixedPoint,
    pub pair_marginal: Vec<f64>,
    pub spacey_empirical: Vec<f64>,
    pub markov_empirical: Vec<f64>,
    pub l1_spacey_fixed_point: f64,
    pub l1_markov_pair_chain: f64,
    pub l1_fixed_point_pair_chain: f64,
    pub l1_spacey_markov: f64,
}

impl StationarityReport {
    /// Largest of the two distances the convergence claim is about.
    pub fn max_gated_distance(&self) -> f64 {
        self.l1_spacey_fixed_point.max(self.l1_markov_pair_chain)
    }
}

/// Runs one long spacey and one long strict trajectory of `steps` steps and
/// compares their occupations with the fixed point and the pair-chain
/// marginal.
pub fn verify_stationary(
    g: &TypedGraph,
    mp: &MetaPath,
    steps: usize,
    alpha: f64,
    seed: u64,
) -> Result<StationarityReport> {
    let h = build_hypermatrix(g, mp)?;
    let fixed_point = fixed_point_stationary(&h, 1e-10, 100_000)?;
    let pair_marginal = pair_chain_stationary(&h)?;
    let guidance = Guidance::metapath(mp.clone(), g.type_count())?;
    let start = *g
        .nodes_of_type(mp.source())
        .first()
        .ok_or(Error::Empty("start type has no nodes"))?;

    let run = |mode: WalkMode, a: f64, s: u64| -> Result<Vec<f64>> {
        let walker = Walker::new(g, &guidance, mode, a)?;
        let mut state = WalkerState::new(g, start, s);
        let (path, truncated) = walker.walk(&mut state, steps);
        if truncated {
            return Err(Error::Degenerate(format!("trajectory hit a dead end after {} steps", path.len() - 1)));
        }
        empirical_distribution(&[path], g.node_count())
    };
    let spacey_empirical = run(WalkMode::Spacey, alpha, seed)?;
    let markov_empirical = run(WalkMode::Markovian, 0.0, seed ^ 0x5eed)?;

    Ok(StationarityReport {
        l1_spacey_fixed_point: l1_distance(&spacey_empirical, &fixed_point.distribution),
        l1_markov_pair_chain: l1_distance(&markov_empirical, &pair_marginal),
        l1_fixed_point_pair_chain: l1_distance(&fixed_point.distribution, &pair_marginal),
        l1_spacey_markov: l1_distance(&spacey_empirical, &markov_empirical),
        fixed_point,
        pair_marginal,
        spacey_empirical,
        markov_empirical,
    })
}

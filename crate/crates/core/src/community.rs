// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Weighted Louvain modularity maximisation over a [`HardwareGraph`].
//!
//! The implementation keeps the classic two-phase structure: local vertex
//! moves until no move pays off, then contraction of every community into a
//! super-vertex. Every contraction level is kept so that the candidate pool
//! can draw on fine and coarse communities alike.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::calibration::{HardwareGraph, Qubit};

/// A pass stops once its accumulated modularity gain falls below this.
pub const PASS_TOLERANCE: f64 = 1e-7;
/// Minimum gain for a single vertex move to be applied.
const MOVE_EPSILON: f64 = 1e-12;
const MAX_PASSES: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum CommunityError {
    #[error("modularity is undefined on a graph without edges")]
    NoEdges,
    #[error("partition does not cover the graph vertex set exactly")]
    PartitionMismatch,
    #[error("community {0} does not exist")]
    UnknownCommunity(usize),
    #[error("vertex {0} is not in the graph")]
    UnknownVertex(Qubit),
}

/// Disjoint cover of a vertex set. Community ids are contiguous from 0 and
/// ordered by each community's smallest member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    community_of: BTreeMap<Qubit, usize>,
    communities: Vec<Vec<Qubit>>,
}

impl Partition {
    /// Canonicalises arbitrary groups. Empty groups are dropped.
    ///
    /// Panics if a vertex appears in more than one group.
    pub fn from_groups(groups: impl IntoIterator<Item = Vec<Qubit>>) -> Self {
        let mut communities: Vec<Vec<Qubit>> = groups
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|mut g| {
                g.sort_unstable();
                g
            })
            .collect();
        communities.sort_unstable_by_key(|g| g[0]);
        let mut community_of = BTreeMap::new();
        for (c, members) in communities.iter().enumerate() {
            for &v in members {
                assert!(
                    community_of.insert(v, c).is_none(),
                    "vertex {v} assigned twice"
                );
            }
        }
        Partition {
            community_of,
            communities,
        }
    }

    pub fn singletons(graph: &HardwareGraph) -> Self {
        Self::from_groups(graph.vertices().map(|v| vec![v]))
    }

    pub fn whole(graph: &HardwareGraph) -> Self {
        Self::from_groups([graph.vertices().collect()])
    }

    pub fn community_of(&self, v: Qubit) -> Option<usize> {
        self.community_of.get(&v).copied()
    }

    pub fn communities(&self) -> &[Vec<Qubit>] {
        &self.communities
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    /// Returns a copy with `v` moved into community `target`.
    pub fn with_move(&self, v: Qubit, target: usize) -> Result<Partition, CommunityError> {
        let from = self
            .community_of(v)
            .ok_or(CommunityError::UnknownVertex(v))?;
        if target >= self.communities.len() {
            return Err(CommunityError::UnknownCommunity(target));
        }
        let mut groups = self.communities.clone();
        groups[from].retain(|&x| x != v);
        groups[target].push(v);
        Ok(Partition::from_groups(groups))
    }

    fn covers_exactly(&self, graph: &HardwareGraph) -> bool {
        self.community_of.len() == graph.vertex_count()
            && graph.vertices().all(|v| self.community_of.contains_key(&v))
    }
}

/// Total weight and weighted degrees used by the modularity null model.
#[derive(Clone, Debug)]
pub struct ModularityContext {
    pub total_weight: f64,
    pub weighted_degree: BTreeMap<Qubit, f64>,
}

impl ModularityContext {
    pub fn new(graph: &HardwareGraph) -> Self {
        let weighted_degree: BTreeMap<Qubit, f64> = graph
            .vertices()
            .map(|v| (v, graph.weighted_degree(v)))
            .collect();
        let total_weight = graph.edges().map(|(_, i)| i.weight).sum();
        ModularityContext {
            total_weight,
            weighted_degree,
        }
    }
}

/// Weighted Newman modularity of `p` on `graph`.
pub fn modularity(graph: &HardwareGraph, p: &Partition) -> Result<f64, CommunityError> {
    if !p.covers_exactly(graph) {
        return Err(CommunityError::PartitionMismatch);
    }
    let level = LevelGraph::from_hardware(graph);
    if level.two_w <= 0.0 {
        return Err(CommunityError::NoEdges);
    }
    let comm: Vec<usize> = level
        .labels
        .iter()
        .map(|&v| p.community_of(v).unwrap())
        .collect();
    Ok(level.modularity(&comm, p.len()))
}

/// Modularity change from moving `v` into community `target`, computed with
/// the same incremental bookkeeping the local-move phase uses.
pub fn move_delta(
    graph: &HardwareGraph,
    p: &Partition,
    v: Qubit,
    target: usize,
) -> Result<f64, CommunityError> {
    if !p.covers_exactly(graph) {
        return Err(CommunityError::PartitionMismatch);
    }
    if target >= p.len() {
        return Err(CommunityError::UnknownCommunity(target));
    }
    let level = LevelGraph::from_hardware(graph);
    if level.two_w <= 0.0 {
        return Err(CommunityError::NoEdges);
    }
    let i = level
        .labels
        .binary_search(&v)
        .map_err(|_| CommunityError::UnknownVertex(v))?;
    let comm: Vec<usize> = level
        .labels
        .iter()
        .map(|&q| p.community_of(q).unwrap())
        .collect();
    let mut tot = vec![0.0; p.len()];
    for (j, &c) in comm.iter().enumerate() {
        tot[c] += level.degree[j];
    }
    let from = comm[i];
    if from == target {
        return Ok(0.0);
    }
    let links = level.community_links(i, &comm);
    tot[from] -= level.degree[i];
    let ki = level.degree[i];
    let stay = insertion_gain(
        links.get(&from).copied().unwrap_or(0.0),
        ki,
        tot[from],
        level.two_w,
    );
    let go = insertion_gain(
        links.get(&target).copied().unwrap_or(0.0),
        ki,
        tot[target],
        level.two_w,
    );
    Ok(gain_to_delta_q(go - stay, level.two_w))
}

/// Gain (in weight units) of inserting an isolated vertex of degree `ki`
/// into a community it links to with weight `k_in` and whose total degree
/// is `tot`.
#[inline]
fn insertion_gain(k_in: f64, ki: f64, tot: f64, two_w: f64) -> f64 {
    k_in - ki * tot / two_w
}

#[inline]
fn gain_to_delta_q(gain: f64, two_w: f64) -> f64 {
    2.0 * gain / two_w
}

/// Graph at one contraction level. Node `i` stands for the original
/// vertices `members[i]`; `self_loop[i]` holds the ordered-pair internal
/// weight of that group.
#[derive(Clone, Debug)]
struct LevelGraph {
    labels: Vec<Qubit>,
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    two_w: f64,
}

impl LevelGraph {
    fn from_hardware(graph: &HardwareGraph) -> Self {
        let labels: Vec<Qubit> = graph.vertices().collect();
        let index: BTreeMap<Qubit, usize> =
            labels.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut adj = vec![Vec::new(); labels.len()];
        for (e, info) in graph.edges() {
            let (a, b) = (index[&e.a], index[&e.b]);
            adj[a].push((b, info.weight));
            adj[b].push((a, info.weight));
        }
        let degree: Vec<f64> = adj
            .iter()
            .map(|n| n.iter().map(|&(_, w)| w).sum())
            .collect();
        let two_w = degree.iter().sum();
        LevelGraph {
            self_loop: vec![0.0; labels.len()],
            labels,
            adj,
            degree,
            two_w,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn community_links(&self, i: usize, comm: &[usize]) -> BTreeMap<usize, f64> {
        let mut links = BTreeMap::new();
        for &(j, w) in &self.adj[i] {
            *links.entry(comm[j]).or_insert(0.0) += w;
        }
        links
    }

    fn modularity(&self, comm: &[usize], k: usize) -> f64 {
        let mut inner = vec![0.0; k];
        let mut tot = vec![0.0; k];
        for i in 0..self.len() {
            let c = comm[i];
            tot[c] += self.degree[i];
            inner[c] += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                if comm[j] == c {
                    inner[c] += w;
                }
            }
        }
        (0..k)
            .map(|c| inner[c] / self.two_w - (tot[c] / self.two_w).powi(2))
            .sum()
    }

    /// Runs local moves starting from `comm`. Returns true if any vertex moved.
    fn local_moves(
        &self,
        comm: &mut [usize],
        members: &[Vec<Qubit>],
        visit: &mut dyn FnMut(&[Vec<Qubit>]) -> Vec<usize>,
    ) -> bool {
        let n = self.len();
        if self.two_w <= 0.0 {
            return false;
        }
        let slots = comm.iter().copied().max().map_or(0, |m| m + 1).max(n);
        let mut tot = vec![0.0; slots];
        for i in 0..n {
            tot[comm[i]] += self.degree[i];
        }
        let mut moved_any = false;
        for _ in 0..MAX_PASSES {
            let order = visit(members);
            debug_assert_eq!(order.len(), n);
            let mut pass_gain = 0.0;
            let mut moved = false;
            for i in order {
                let ki = self.degree[i];
                let from = comm[i];
                let links = self.community_links(i, comm);
                tot[from] -= ki;
                let stay = insertion_gain(
                    links.get(&from).copied().unwrap_or(0.0),
                    ki,
                    tot[from],
                    self.two_w,
                );
                // ascending community id, strict comparison: lowest id wins ties
                let mut best = from;
                let mut best_gain = f64::NEG_INFINITY;
                for (&c, &k_in) in &links {
                    if c == from {
                        continue;
                    }
                    let g = insertion_gain(k_in, ki, tot[c], self.two_w);
                    if g > best_gain {
                        best_gain = g;
                        best = c;
                    }
                }
                let dq = gain_to_delta_q(best_gain - stay, self.two_w);
                if best != from && dq > MOVE_EPSILON {
                    comm[i] = best;
                    tot[best] += ki;
                    pass_gain += dq;
                    moved = true;
                } else {
                    tot[from] += ki;
                }
            }
            moved_any |= moved;
            if !moved || pass_gain < PASS_TOLERANCE {
                break;
            }
        }
        moved_any
    }

    /// Contracts communities into super-vertices. `comm` must be contiguous.
    fn aggregate(&self, comm: &[usize], k: usize) -> LevelGraph {
        let mut self_loop = vec![0.0; k];
        let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
        for i in 0..self.len() {
            let ci = comm[i];
            self_loop[ci] += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                let cj = comm[j];
                if ci == cj {
                    self_loop[ci] += w;
                } else {
                    *links[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        let adj: Vec<Vec<(usize, f64)>> =
            links.into_iter().map(|m| m.into_iter().collect()).collect();
        let degree: Vec<f64> = (0..k)
            .map(|c| self_loop[c] + adj[c].iter().map(|&(_, w)| w).sum::<f64>())
            .collect();
        LevelGraph {
            labels: (0..k as Qubit).collect(),
            adj,
            self_loop,
            degree,
            two_w: self.two_w,
        }
    }
}

/// Renumbers community ids contiguously in order of first appearance.
fn renumber(comm: &mut [usize]) -> usize {
    let mut map = BTreeMap::new();
    let mut next = 0;
    for c in comm.iter_mut() {
        let id = *map.entry(*c).or_insert_with(|| {
            next += 1;
            next - 1
        });
        *c = id;
    }
    next
}

/// Result of a Louvain run: one partition per contraction level (finest
/// first) and the final partition.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub levels: Vec<Partition>,
    pub partition: Partition,
}

/// Louvain with a seeded shuffle of the visit order at every pass.
pub fn louvain(graph: &HardwareGraph, seed: u64) -> Partition {
    louvain_hierarchy(graph, seed).partition
}

pub fn louvain_hierarchy(graph: &HardwareGraph, seed: u64) -> Hierarchy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visit = move |members: &[Vec<Qubit>]| {
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.shuffle(&mut rng);
        order
    };
    louvain_with_visit_order(graph, &mut visit)
}

/// Louvain with a caller-supplied visit order. The callback receives the
/// original vertices behind every node of the current level and returns a
/// permutation of node indices.
///
/// After the contraction phase ends, the final partition is refined by
/// single-vertex moves on the original graph, so no single move of an
/// original vertex improves it by more than [`PASS_TOLERANCE`].
pub fn louvain_with_visit_order(
    graph: &HardwareGraph,
    visit: &mut dyn FnMut(&[Vec<Qubit>]) -> Vec<usize>,
) -> Hierarchy {
    let base = LevelGraph::from_hardware(graph);
    let mut members: Vec<Vec<Qubit>> = base.labels.iter().map(|&v| vec![v]).collect();
    let mut levels = Vec::new();
    let mut level = base.clone();

    loop {
        let mut comm: Vec<usize> = (0..level.len()).collect();
        if !level.local_moves(&mut comm, &members, visit) {
            break;
        }
        let k = renumber(&mut comm);
        let mut grouped: Vec<Vec<Qubit>> = vec![Vec::new(); k];
        for (i, &c) in comm.iter().enumerate() {
            grouped[c].extend_from_slice(&members[i]);
        }
        for g in &mut grouped {
            g.sort_unstable();
        }
        levels.push(Partition::from_groups(grouped.clone()));
        if k == level.len() {
            break;
        }
        level = level.aggregate(&comm, k);
        members = grouped;
    }

    let coarse = levels
        .last()
        .cloned()
        .unwrap_or_else(|| Partition::singletons(graph));
    let mut comm: Vec<usize> = base
        .labels
        .iter()
        .map(|&v| coarse.community_of(v).unwrap())
        .collect();
    let singles: Vec<Vec<Qubit>> = base.labels.iter().map(|&v| vec![v]).collect();
    base.local_moves(&mut comm, &singles, visit);
    let k = renumber(&mut comm);
    let mut groups = vec![Vec::new(); k];
    for (i, &c) in comm.iter().enumerate() {
        groups[c].push(base.labels[i]);
    }
    let partition = Partition::from_groups(groups);
    if levels.is_empty() {
        levels.push(partition.clone());
    }
    Hierarchy { levels, partition }
}

/// Candidate vertex sets from every hierarchy level plus the final
/// partition: each community is split into connected components, components
/// smaller than `min_size` are dropped and duplicates removed. Order is by
/// first appearance, finest level first.
pub fn candidate_communities(graph: &HardwareGraph, seed: u64, min_size: usize) -> Vec<Vec<Qubit>> {
    let h = louvain_hierarchy(graph, seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in h.levels.iter().chain(std::iter::once(&h.partition)) {
        for community in p.communities() {
            let set: BTreeSet<Qubit> = community.iter().copied().collect();
            for comp in graph.components_of(&set) {
                if comp.len() >= min_size && seen.insert(comp.clone()) {
                    out.push(comp);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::edge_weight;

    /// Direct double sum over all ordered vertex pairs.
    fn brute_modularity(graph: &HardwareGraph, p: &Partition) -> f64 {
        let vs: Vec<Qubit> = graph.vertices().collect();
        let s: Vec<f64> = vs.iter().map(|&v| graph.weighted_degree(v)).collect();
        let two_w: f64 = s.iter().sum();
        let mut q = 0.0;
        for (i, &a) in vs.iter().enumerate() {
            for (j, &b) in vs.iter().enumerate() {
                if p.community_of(a) != p.community_of(b) {
                    continue;
                }
                let w = graph.edge(a, b).map_or(0.0, |e| e.weight);
                q += w - s[i] * s[j] / two_w;
            }
        }
        q / two_w
    }

    /// Error level whose edge weight is `w`.
    fn err_for_weight(w: f64) -> f64 {
        1.0 / w - crate::calibration::WEIGHT_EPSILON
    }

    fn two_triangles() -> HardwareGraph {
        let e = err_for_weight(1.0);
        HardwareGraph::from_parts(
            (0..6).map(|q| (q, 0.01)),
            [
                (0, 1, e),
                (1, 2, e),
                (0, 2, e),
                (3, 4, e),
                (4, 5, e),
                (3, 5, e),
            ],
        )
    }

    fn two_cliques_with_bridge() -> HardwareGraph {
        let strong = 0.01;
        let mut couplers = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    couplers.push((base + i, base + j, strong));
                }
            }
        }
        // bridge weight is 1% of a clique weight
        couplers.push((3, 4, err_for_weight(0.01 * edge_weight(strong))));
        HardwareGraph::from_parts((0..8).map(|q| (q, 0.01)), couplers)
    }

    #[test]
    fn single_community_has_zero_modularity() {
        let g = two_cliques_with_bridge();
        let q = modularity(&g, &Partition::whole(&g)).unwrap();
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn two_triangles_against_double_sum() {
        let g = two_triangles();
        let natural = Partition::from_groups([vec![0, 1, 2], vec![3, 4, 5]]);
        let q = modularity(&g, &natural).unwrap();
        assert!((q - brute_modularity(&g, &natural)).abs() < 1e-12);
        assert!((q - 0.5).abs() < 1e-6);

        // every balanced 2-partition; the natural one is the unique argmax
        let mut best = f64::NEG_INFINITY;
        let mut best_groups = None;
        for mask in 0u32..64 {
            if mask.count_ones() != 3 || mask & 1 == 0 {
                continue;
            }
            let a: Vec<Qubit> = (0..6).filter(|i| mask >> i & 1 == 1).collect();
            let b: Vec<Qubit> = (0..6).filter(|i| mask >> i & 1 == 0).collect();
            let p = Partition::from_groups([a, b]);
            let qp = brute_modularity(&g, &p);
            assert!((qp - modularity(&g, &p).unwrap()).abs() < 1e-12);
            if p != natural {
                assert!(qp < q);
            }
            if qp > best {
                best = qp;
                best_groups = Some(p);
            }
        }
        assert_eq!(best_groups.unwrap(), natural);
    }

    #[test]
    fn no_edges_is_an_error() {
        let g = HardwareGraph::from_parts([(0, 0.01), (1, 0.01)], []);
        assert_eq!(
            modularity(&g, &Partition::singletons(&g)),
            Err(CommunityError::NoEdges)
        );
        // Louvain still returns singletons
        assert_eq!(louvain(&g, 1).len(), 2);
    }

    #[test]
    fn single_edge_merges() {
        let g = HardwareGraph::from_parts([(0, 0.01), (1, 0.01)], [(0, 1, 0.01)]);
        let p = louvain(&g, 7);
        assert_eq!(p.communities(), &[vec![0, 1]]);
        let split = modularity(&g, &Partition::singletons(&g)).unwrap();
        let joined = modularity(&g, &p).unwrap();
        assert!(joined > split);
        assert!(candidate_communities(&g, 7, 3).is_empty());
    }

    #[test]
    fn cliques_separate_at_weak_bridge() {
        let g = two_cliques_with_bridge();
        for seed in 0..5 {
            let p = louvain(&g, seed);
            assert_eq!(p.communities(), &[vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
            let q = modularity(&g, &p).unwrap();
            assert!(q > modularity(&g, &Partition::whole(&g)).unwrap());
            for v in g.vertices() {
                for t in 0..p.len() {
                    assert!(move_delta(&g, &p, v, t).unwrap() <= PASS_TOLERANCE);
                }
            }
        }
        let cands = candidate_communities(&g, 0, 3);
        assert!(cands.contains(&vec![0, 1, 2, 3]));
        assert!(cands.contains(&vec![4, 5, 6, 7]));
        for c in &cands {
            let set: BTreeSet<Qubit> = c.iter().copied().collect();
            assert!(g.is_connected_subset(&set));
            // any coarser candidate contains the cliques whole
            if c.len() > 4 {
                assert!(set.is_superset(&BTreeSet::from([0, 1, 2, 3])));
            }
        }
    }

    #[test]
    fn isolated_vertices_stay_single() {
        let g = HardwareGraph::from_parts((0..4).map(|q| (q, 0.01)), [(0, 1, 0.01), (1, 2, 0.01)]);
        let p = louvain(&g, 3);
        let c3 = p.community_of(3).unwrap();
        assert_eq!(p.communities()[c3], vec![3]);
    }

    #[test]
    fn move_delta_matches_recomputation() {
        let g = two_cliques_with_bridge();
        let p = Partition::from_groups([vec![0, 1, 2], vec![3, 4, 5], vec![6, 7]]);
        for v in g.vertices() {
            for t in 0..p.len() {
                let inc = move_delta(&g, &p, v, t).unwrap();
                let after = p.with_move(v, t).unwrap();
                let direct = brute_modularity(&g, &after) - brute_modularity(&g, &p);
                assert!(
                    (inc - direct).abs() <= 1e-9 * direct.abs().max(1e-6),
                    "{v}->{t}: {inc} vs {direct}"
                );
            }
        }
    }
}

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

//! Layout and SWAP routing confined to a footprint graph.
//!
//! Layout: the logical qubit with the most two-qubit interactions goes to
//! the physical qubit of highest weighted degree; every further logical
//! qubit (most connected to the placed ones first) goes to the free
//! physical qubit minimising interaction-weighted hop distance to its
//! placed partners, then preferring room for its unplaced partners.
//!
//! Routing: a two-qubit gate on non-adjacent qubits walks its operands
//! towards each other along the cheapest path under `-ln(1 - error)`. The
//! split of SWAPs between the two ends is chosen by looking at the next
//! two-qubit gate that involves either operand.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ir::{CircuitIR, Gate, GateKind};
use crate::calibration::{Edge, HardwareGraph, Qubit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouteError {
    #[error("footprint is empty")]
    EmptyFootprint,
    #[error("footprint is not connected")]
    Disconnected,
    #[error("circuit needs {needed} qubits, footprint has {available}")]
    WidthOverflow { needed: usize, available: usize },
    #[error("invalid layout: {0}")]
    BadLayout(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutedCircuit {
    /// Gates over physical qubit indices; measures keep their clbits.
    pub base: CircuitIR,
    pub footprint: Vec<Qubit>,
    pub initial_layout: Vec<Qubit>,
    /// Final position of every logical qubit after all SWAPs.
    pub pi: Vec<Qubit>,
    pub swap_count: usize,
    pub depth: usize,
    /// `(logical qubit, clbit)` pairs of the source circuit.
    pub measures: Vec<(usize, usize)>,
}

impl RoutedCircuit {
    pub fn num_clbits(&self) -> usize {
        self.base.num_clbits
    }

    /// Physical qubits read out at the end, ascending.
    pub fn measured_physical(&self) -> Vec<Qubit> {
        let set: BTreeSet<Qubit> = self.measures.iter().map(|&(l, _)| self.pi[l]).collect();
        set.into_iter().collect()
    }

    /// Physical pairs of all two-qubit gates.
    pub fn two_qubit_edges(&self) -> Vec<Edge> {
        self.base
            .gates
            .iter()
            .filter(|g| g.kind.is_two_qubit())
            .map(|g| Edge::new(g.qubits[0] as Qubit, g.qubits[1] as Qubit))
            .collect()
    }

    /// Every two-qubit gate sits on an edge of `graph`.
    pub fn respects(&self, graph: &HardwareGraph) -> bool {
        self.two_qubit_edges()
            .iter()
            .all(|e| graph.has_edge(e.a, e.b))
    }
}

/// Hop distances between all footprint vertices.
struct Distances {
    index: HashMap<Qubit, usize>,
    d: Vec<Vec<u32>>,
}

impl Distances {
    fn new(g: &HardwareGraph, verts: &[Qubit]) -> Self {
        let index: HashMap<Qubit, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let n = verts.len();
        let mut d = vec![vec![u32::MAX; n]; n];
        for (s, row) in d.iter_mut().enumerate() {
            row[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for w in g.neighbors(verts[u]) {
                    let wi = index[w];
                    if row[wi] == u32::MAX {
                        row[wi] = row[u] + 1;
                        queue.push_back(wi);
                    }
                }
            }
        }
        Distances { index, d }
    }

    fn get(&self, a: Qubit, b: Qubit) -> u32 {
        self.d[self.index[&a]][self.index[&b]]
    }
}

fn tie_key(seed: u64, p: Qubit) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write_u32(p);
    h.finish()
}

fn check_footprint(circ: &CircuitIR, g: &HardwareGraph) -> Result<Vec<Qubit>, RouteError> {
    circ.validate().map_err(RouteError::InvalidCircuit)?;
    if g.is_empty() {
        return Err(RouteError::EmptyFootprint);
    }
    if !g.is_connected() {
        return Err(RouteError::Disconnected);
    }
    if circ.num_qubits > g.vertex_count() {
        return Err(RouteError::WidthOverflow {
            needed: circ.num_qubits,
            available: g.vertex_count(),
        });
    }
    Ok(g.vertices().collect())
}

/// Weighted-degree initial layout; `layout[l]` is the physical qubit of
/// logical `l`. Exact ties fall to a seed-dependent order.
pub fn initial_layout(
    circ: &CircuitIR,
    footprint: &HardwareGraph,
    seed: u64,
) -> Result<Vec<Qubit>, RouteError> {
    let verts = check_footprint(circ, footprint)?;
    let dist = Distances::new(footprint, &verts);
    Ok(place(circ, footprint, &verts, &dist, seed))
}

fn place(
    circ: &CircuitIR,
    g: &HardwareGraph,
    verts: &[Qubit],
    dist: &Distances,
    seed: u64,
) -> Vec<Qubit> {
    let n = circ.num_qubits;
    let mut inter = vec![vec![0usize; n]; n];
    for ((a, b), k) in circ.interactions() {
        inter[a][b] = k;
        inter[b][a] = k;
    }
    let ldeg: Vec<usize> = inter.iter().map(|row| row.iter().sum()).collect();
    let pdeg: HashMap<Qubit, f64> = verts.iter().map(|&p| (p, g.weighted_degree(p))).collect();

    let mut pos: Vec<Option<Qubit>> = vec![None; n];
    let mut used: BTreeSet<Qubit> = BTreeSet::new();
    for _ in 0..n {
        // next logical: strongest tie to placed qubits, then busiest, then lowest index
        let l = (0..n)
            .filter(|&l| pos[l].is_none())
            .max_by(|&a, &b| {
                let ta: usize = (0..n)
                    .filter(|&m| pos[m].is_some())
                    .map(|m| inter[a][m])
                    .sum();
                let tb: usize = (0..n)
                    .filter(|&m| pos[m].is_some())
                    .map(|m| inter[b][m])
                    .sum();
                ta.cmp(&tb).then(ldeg[a].cmp(&ldeg[b])).then(b.cmp(&a))
            })
            .unwrap();
        let waiting = (0..n)
            .filter(|&m| m != l && pos[m].is_none() && inter[l][m] > 0)
            .count();
        let cost = |p: Qubit| -> (u64, usize, u32) {
            let weighted: u64 = (0..n)
                .filter_map(|m| pos[m].map(|q| inter[l][m] as u64 * dist.get(p, q) as u64))
                .sum();
            // unplaced partners that could not sit next to p
            let free = g.neighbors(p).iter().filter(|q| !used.contains(q)).count();
            let deficit = waiting.saturating_sub(free);
            let nearest = used.iter().map(|&q| dist.get(p, q)).min().unwrap_or(0);
            (weighted, deficit, nearest)
        };
        let p = verts
            .iter()
            .copied()
            .filter(|p| !used.contains(p))
            .min_by(|&a, &b| {
                cost(a)
                    .cmp(&cost(b))
                    .then(pdeg[&b].total_cmp(&pdeg[&a]))
                    .then(tie_key(seed, a).cmp(&tie_key(seed, b)))
            })
            .unwrap();
        pos[l] = Some(p);
        used.insert(p);
    }
    pos.into_iter().map(Option::unwrap).collect()
}

/// Places and routes `circ` inside `footprint`.
pub fn route(
    circ: &CircuitIR,
    footprint: &HardwareGraph,
    seed: u64,
) -> Result<RoutedCircuit, RouteError> {
    let verts = check_footprint(circ, footprint)?;
    let dist = Distances::new(footprint, &verts);
    let layout = place(circ, footprint, &verts, &dist, seed);
    route_inner(circ, footprint, verts, &dist, layout)
}

/// Routes `circ` from a caller-supplied initial layout.
pub fn route_with_layout(
    circ: &CircuitIR,
    footprint: &HardwareGraph,
    layout: &[Qubit],
) -> Result<RoutedCircuit, RouteError> {
    let verts = check_footprint(circ, footprint)?;
    if layout.len() != circ.num_qubits {
        return Err(RouteError::BadLayout(format!(
            "{} positions for {} qubits",
            layout.len(),
            circ.num_qubits
        )));
    }
    let distinct: BTreeSet<_> = layout.iter().collect();
    if distinct.len() != layout.len() || layout.iter().any(|p| !footprint.contains(*p)) {
        return Err(RouteError::BadLayout(
            "positions must be distinct footprint qubits".into(),
        ));
    }
    let dist = Distances::new(footprint, &verts);
    route_inner(circ, footprint, verts, &dist, layout.to_vec())
}

#[derive(PartialEq)]
struct Frontier(f64, Qubit);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn swap_cost(error: f64) -> f64 {
    -(1.0 - error).max(1e-9).ln()
}

/// Cheapest path from `s` to `t` under [`swap_cost`], both ends included.
fn cheapest_path(g: &HardwareGraph, s: Qubit, t: Qubit) -> Vec<Qubit> {
    let mut best: HashMap<Qubit, f64> = HashMap::from([(s, 0.0)]);
    let mut prev: HashMap<Qubit, Qubit> = HashMap::new();
    let mut heap = BinaryHeap::from([Frontier(0.0, s)]);
    while let Some(Frontier(d, u)) = heap.pop() {
        if u == t {
            break;
        }
        if d > best[&u] {
            continue;
        }
        for &w in g.neighbors(u) {
            let nd = d + swap_cost(g.edge(u, w).unwrap().error);
            if best.get(&w).is_none_or(|&b| nd < b) {
                best.insert(w, nd);
                prev.insert(w, u);
                heap.push(Frontier(nd, w));
            }
        }
    }
    let mut path = vec![t];
    while *path.last().unwrap() != s {
        path.push(prev[path.last().unwrap()]);
    }
    path.reverse();
    path
}

/// SWAPs that bring the ends of `path` together: the first operand walks
/// `i` hops forward, the second walks the remaining hops back.
fn split_swaps(path: &[usize], i: usize) -> Vec<(usize, usize)> {
    let k = path.len() - 1;
    let forward = (0..i).map(|j| (path[j], path[j + 1]));
    let backward = (i + 1..k).rev().map(|j| (path[j + 1], path[j]));
    forward.chain(backward).collect()
}

fn exchange(a: usize, b: usize, pos: &mut [usize], at: &mut HashMap<usize, usize>) {
    let la = at.remove(&a);
    let lb = at.remove(&b);
    if let Some(l) = la {
        pos[l] = b;
        at.insert(b, l);
    }
    if let Some(l) = lb {
        pos[l] = a;
        at.insert(a, l);
    }
}

fn route_inner(
    circ: &CircuitIR,
    g: &HardwareGraph,
    verts: Vec<Qubit>,
    dist: &Distances,
    layout: Vec<Qubit>,
) -> Result<RoutedCircuit, RouteError> {
    let mut pos: Vec<usize> = layout.iter().map(|&p| p as usize).collect();
    let mut at: HashMap<usize, usize> = pos.iter().enumerate().map(|(l, &p)| (p, l)).collect();
    let width = *verts.iter().max().unwrap() as usize + 1;
    let mut out = CircuitIR::new(circ.name.clone(), width, circ.num_clbits);
    let mut swaps = 0;

    for (gi, gate) in circ.gates.iter().enumerate() {
        if gate.kind.is_two_qubit() {
            let (l1, l2) = (gate.qubits[0], gate.qubits[1]);
            let (p1, p2) = (pos[l1] as Qubit, pos[l2] as Qubit);
            if !g.has_edge(p1, p2) {
                let path: Vec<usize> = cheapest_path(g, p1, p2)
                    .into_iter()
                    .map(|v| v as usize)
                    .collect();
                let k = path.len() - 1;
                let next = circ.gates[gi + 1..].iter().find(|n| {
                    n.kind.is_two_qubit() && (n.qubits.contains(&l1) || n.qubits.contains(&l2))
                });
                let score = |i: usize| -> u32 {
                    let Some(next) = next else { return 0 };
                    let (mut p, mut a) = (pos.clone(), at.clone());
                    for (x, y) in split_swaps(&path, i) {
                        exchange(x, y, &mut p, &mut a);
                    }
                    dist.get(p[next.qubits[0]] as Qubit, p[next.qubits[1]] as Qubit)
                };
                // prefer advancing the first operand on ties
                let i = (0..k).rev().min_by_key(|&i| score(i)).unwrap();
                for (x, y) in split_swaps(&path, i) {
                    out.push(Gate::new(GateKind::Swap, vec![x, y]));
                    exchange(x, y, &mut pos, &mut at);
                    swaps += 1;
                }
            }
        }
        let qubits = gate.qubits.iter().map(|&l| pos[l]).collect();
        out.push(Gate {
            qubits,
            ..gate.clone()
        });
    }
    let pi: Vec<Qubit> = pos.iter().map(|&p| p as Qubit).collect();
    let depth = out.depth();
    Ok(RoutedCircuit {
        base: out,
        footprint: verts,
        initial_layout: layout,
        pi,
        swap_count: swaps,
        depth,
        measures: circ.measure_map(),
    })
}

/// Canonical key of a footprint: its vertices and edge errors.
pub fn footprint_key(g: &HardwareGraph) -> u64 {
    let mut h = FnvHasher::default();
    for v in g.vertices() {
        h.write_u32(v);
    }
    h.write_u8(0xff);
    for (e, info) in g.edges() {
        h.write_u32(e.a);
        h.write_u32(e.b);
        h.write_u64(info.error.to_bits());
    }
    h.finish()
}

/// Memoises routing by (circuit structure, footprint, seed).
#[derive(Debug, Default)]
pub struct RouteCache {
    entries: BTreeMap<(u64, u64, u64), RoutedCircuit>,
    pub hits: usize,
    pub misses: usize,
}

impl RouteCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get_or_route(
        &mut self,
        circ: &CircuitIR,
        footprint: &HardwareGraph,
        seed: u64,
    ) -> Result<RoutedCircuit, RouteError> {
        let key = (circ.structural_hash(), footprint_key(footprint), seed);
        if let Some(r) = self.entries.get(&key) {
            self.hits += 1;
            let mut r = r.clone();
            r.base.name = circ.name.clone();
            return Ok(r);
        }
        self.misses += 1;
        let r = route(circ, footprint, seed)?;
        self.entries.insert(key, r.clone());
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::statevector::ideal_distribution;

    fn path_graph(n: u32) -> HardwareGraph {
        HardwareGraph::from_parts((0..n).map(|q| (q, 0.01)), (1..n).map(|q| (q - 1, q, 0.01)))
    }

    fn l1(
        a: &std::collections::BTreeMap<String, f64>,
        b: &std::collections::BTreeMap<String, f64>,
    ) -> f64 {
        let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
        keys.iter()
            .map(|k| (a.get(*k).unwrap_or(&0.0) - b.get(*k).unwrap_or(&0.0)).abs())
            .sum()
    }

    #[test]
    fn endpoints_of_three_path_need_one_swap() {
        let mut c = CircuitIR::new("far", 2, 2);
        c.push(Gate::new(GateKind::X, vec![0]))
            .push(Gate::new(GateKind::Cx, vec![0, 1]))
            .push(Gate::measure(0, 0))
            .push(Gate::measure(1, 1));
        let g = path_graph(3);
        let r = route_with_layout(&c, &g, &[0, 2]).unwrap();
        assert_eq!(r.swap_count, 1);
        assert!(r.respects(&g));
        assert_eq!(
            ideal_distribution(&r.base).unwrap(),
            ideal_distribution(&c).unwrap()
        );
    }

    #[test]
    fn line_interaction_needs_no_swaps() {
        let mut c = CircuitIR::new("chain", 4, 4);
        c.push(Gate::new(GateKind::H, vec![0]));
        for q in 0..3 {
            c.push(Gate::new(GateKind::Cx, vec![q, q + 1]));
        }
        for q in 0..4 {
            c.push(Gate::measure(q, q));
        }
        let r = route(&c, &path_graph(6), 3).unwrap();
        assert_eq!(r.swap_count, 0);
    }

    #[test]
    fn high_quality_vertex_gets_busiest_qubit() {
        // star centre 0 with a weak arm to 3
        let g = HardwareGraph::from_parts(
            (0..4).map(|q| (q, 0.01)),
            [(0, 1, 0.001), (0, 2, 0.001), (0, 3, 0.2)],
        );
        let mut c = CircuitIR::new("fan", 3, 0);
        c.push(Gate::new(GateKind::Cx, vec![2, 0]))
            .push(Gate::new(GateKind::Cx, vec![2, 1]));
        let layout = initial_layout(&c, &g, 0).unwrap();
        assert_eq!(layout[2], 0);
        let r = route(&c, &g, 0).unwrap();
        assert_eq!(r.swap_count, 0);
        assert!(!r.pi.contains(&3));
    }

    #[test]
    fn swaps_avoid_bad_coupler() {
        // square 0-1-2-3-0; 0-1 is nearly dead
        let g = HardwareGraph::from_parts(
            (0..4).map(|q| (q, 0.01)),
            [(0, 1, 0.9), (1, 2, 0.01), (2, 3, 0.01), (0, 3, 0.01)],
        );
        let mut c = CircuitIR::new("c", 2, 0);
        c.push(Gate::new(GateKind::Cx, vec![0, 1]));
        // start at diagonal corners 0 and 2
        let r = route_with_layout(&c, &g, &[0, 2]).unwrap();
        assert_eq!(r.swap_count, 1);
        assert!(!r.two_qubit_edges().contains(&Edge::new(0, 1)));
    }

    #[test]
    fn footprint_checks() {
        let c = CircuitIR::new("c", 3, 0);
        assert!(matches!(
            route(&c, &path_graph(2), 0),
            Err(RouteError::WidthOverflow {
                needed: 3,
                available: 2
            })
        ));
        let split =
            HardwareGraph::from_parts((0..4).map(|q| (q, 0.01)), [(0, 1, 0.01), (2, 3, 0.01)]);
        assert_eq!(route(&c, &split, 0), Err(RouteError::Disconnected));
    }

    #[test]
    fn routing_long_range_preserves_distribution() {
        let mut c = CircuitIR::new("ghz", 5, 5);
        c.push(Gate::new(GateKind::H, vec![0]));
        for t in 1..5 {
            c.push(Gate::new(GateKind::Cx, vec![0, t]));
        }
        c.push(Gate::with_params(GateKind::Ry, vec![3], vec![0.7]));
        c.push(Gate::new(GateKind::Cz, vec![4, 1]));
        for q in 0..5 {
            c.push(Gate::measure(q, q));
        }
        let g = path_graph(7);
        let r = route(&c, &g, 1).unwrap();
        assert!(r.swap_count > 0);
        assert!(r.respects(&g));
        let d = l1(
            &ideal_distribution(&r.base).unwrap(),
            &ideal_distribution(&c).unwrap(),
        );
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn cache_hits_on_repeat() {
        let mut c = CircuitIR::new("a", 2, 0);
        c.push(Gate::new(GateKind::Cx, vec![0, 1]));
        let g = path_graph(3);
        let mut cache = RouteCache::new();
        let a = cache.get_or_route(&c, &g, 0).unwrap();
        let b = cache.get_or_route(&c, &g, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!((cache.hits, cache.misses), (1, 1));
    }
}

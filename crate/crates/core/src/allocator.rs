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

//! Online allocation of circuit requests onto the region pool.
//!
//! A request is served by the best-fit free region when one is large
//! enough. Otherwise several adjacent free regions are merged into one
//! connected footprint. [`schedule_batches`] drives a whole workload
//! through batches with a retry queue and a final full-pool sweep.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{Edge, HardwareGraph, Qubit};
use crate::config::{ComposeWeights, Config, FitnessWeights, ScoreWeights};
use crate::regions::{connectivity_score, gate_score, score_region, Region, RegionPool};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationRequest {
    pub circuit_id: String,
    pub width: usize,
}

impl AllocationRequest {
    pub fn new(circuit_id: impl Into<String>, width: usize) -> Self {
        AllocationRequest {
            circuit_id: circuit_id.into(),
            width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub circuit_id: String,
    pub region_ids: Vec<usize>,
    pub physical_vertices: Vec<Qubit>,
    /// `pi[l]` is the physical qubit hosting logical qubit `l`.
    pub pi: Vec<Qubit>,
    pub composed: bool,
    pub bridge_edges: Vec<Edge>,
    pub fitness: f64,
}

impl Allocation {
    pub fn vertex_set(&self) -> BTreeSet<Qubit> {
        self.physical_vertices.iter().copied().collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("no free region or composition can host {width} qubits for {circuit_id}")]
    NoFeasibleRegion { circuit_id: String, width: usize },
    #[error("{width} qubits requested but the device has only {available} operational qubits")]
    WidthExceedsHardware { width: usize, available: usize },
    #[error("could not compose a connected footprint of {0} qubits")]
    CompositionFailed(usize),
    #[error("circuit {0} has no active allocation")]
    UnknownCircuit(String),
    #[error("circuit {0} is already allocated")]
    AlreadyActive(String),
    #[error("request width must be at least 1")]
    ZeroWidth,
}

/// Best-fit size term: 0 when undersized, 1 on exact fit, exponential decay
/// in relative waste otherwise.
pub fn size_score(region_size: usize, n: usize) -> f64 {
    if region_size < n {
        0.0
    } else if region_size == n {
        1.0
    } else {
        (-0.5 * (region_size - n) as f64 / n as f64).exp()
    }
}

/// Allocation fitness. Undersized regions score exactly 0 and are never
/// selected; every feasible region scores strictly above 0.
pub fn fitness(region: &Region, n: usize, w: &FitnessWeights) -> f64 {
    fitness_of(region.size(), region.scores.s_conn, region.scores.q, n, w)
}

fn fitness_of(size: usize, s_conn: f64, q: f64, n: usize, w: &FitnessWeights) -> f64 {
    if size < n {
        return 0.0;
    }
    w.size * size_score(size, n) + w.conn * s_conn + w.quality * q
}

/// Region pool occupancy plus the active allocations.
#[derive(Clone, Debug)]
pub struct AllocationState {
    graph: HardwareGraph,
    pool: RegionPool,
    busy: BTreeSet<usize>,
    active: BTreeMap<String, Allocation>,
    score_weights: ScoreWeights,
    fitness_weights: FitnessWeights,
    compose_weights: ComposeWeights,
}

impl AllocationState {
    pub fn new(graph: HardwareGraph, pool: RegionPool, config: &Config) -> Self {
        AllocationState {
            graph,
            pool,
            busy: BTreeSet::new(),
            active: BTreeMap::new(),
            score_weights: config.score_weights,
            fitness_weights: config.fitness_weights,
            compose_weights: config.compose_weights,
        }
    }

    pub fn graph(&self) -> &HardwareGraph {
        &self.graph
    }

    pub fn pool(&self) -> &RegionPool {
        &self.pool
    }

    pub fn busy(&self) -> &BTreeSet<usize> {
        &self.busy
    }

    pub fn active(&self) -> &BTreeMap<String, Allocation> {
        &self.active
    }

    pub fn free_regions(&self) -> impl Iterator<Item = &Region> + '_ {
        self.pool
            .regions
            .iter()
            .filter(|r| !self.busy.contains(&r.id))
    }

    /// Busy set equals the union of active region ids, no region is shared,
    /// and active footprints are pairwise disjoint.
    pub fn is_consistent(&self) -> bool {
        let mut regions = BTreeSet::new();
        let mut qubits = BTreeSet::new();
        for a in self.active.values() {
            for &r in &a.region_ids {
                if !regions.insert(r) {
                    return false;
                }
            }
            for &q in &a.physical_vertices {
                if !qubits.insert(q) {
                    return false;
                }
            }
        }
        regions == self.busy
    }

    /// Picks the free region with the highest fitness, falling back to
    /// multi-region composition when no single region is large enough.
    pub fn allocate(&mut self, req: &AllocationRequest) -> Result<Allocation, AllocError> {
        let n = req.width;
        if n == 0 {
            return Err(AllocError::ZeroWidth);
        }
        if self.active.contains_key(&req.circuit_id) {
            return Err(AllocError::AlreadyActive(req.circuit_id.clone()));
        }
        if n > self.graph.vertex_count() {
            return Err(AllocError::WidthExceedsHardware {
                width: n,
                available: self.graph.vertex_count(),
            });
        }
        let mut best: Option<(&Region, f64)> = None;
        for r in self.free_regions().filter(|r| r.size() >= n) {
            let f = fitness(r, n, &self.fitness_weights);
            let better = match best {
                None => true,
                Some((b, bf)) => f > bf || (f == bf && (r.size(), r.id) < (b.size(), b.id)),
            };
            if better {
                best = Some((r, f));
            }
        }
        if let Some((region, f)) = best {
            let alloc = Allocation {
                circuit_id: req.circuit_id.clone(),
                region_ids: vec![region.id],
                physical_vertices: region.vertices.clone(),
                pi: region.vertices[..n].to_vec(),
                composed: false,
                bridge_edges: Vec::new(),
                fitness: f,
            };
            self.commit(alloc.clone());
            return Ok(alloc);
        }
        self.compose(req).map_err(|_| AllocError::NoFeasibleRegion {
            circuit_id: req.circuit_id.clone(),
            width: n,
        })
    }

    /// Greedy bridge-aware composition: seed with the largest free region,
    /// then repeatedly attach the adjacent free region with the best
    /// marginal score until the footprint holds `req.width` qubits. All
    /// constituent regions are marked busy together on success.
    pub fn compose(&mut self, req: &AllocationRequest) -> Result<Allocation, AllocError> {
        let (ids, footprint) = self.plan_composition(req.width)?;
        let vertices: Vec<Qubit> = footprint.iter().copied().collect();
        let owner: BTreeMap<Qubit, usize> = ids
            .iter()
            .flat_map(|&id| {
                self.pool
                    .get(id)
                    .unwrap()
                    .vertices
                    .iter()
                    .map(move |&v| (v, id))
            })
            .collect();
        let bridge_edges: Vec<Edge> = self
            .graph
            .edges_within(&footprint)
            .into_iter()
            .filter(|e| owner[&e.a] != owner[&e.b])
            .collect();
        let scores = score_region(&self.graph, &footprint, &self.score_weights)
            .map_err(|_| AllocError::CompositionFailed(req.width))?;
        let alloc = Allocation {
            circuit_id: req.circuit_id.clone(),
            region_ids: ids,
            pi: vertices[..req.width].to_vec(),
            physical_vertices: vertices,
            composed: true,
            bridge_edges,
            fitness: fitness_of(
                footprint.len(),
                scores.s_conn,
                scores.q,
                req.width,
                &self.fitness_weights,
            ),
        };
        self.commit(alloc.clone());
        Ok(alloc)
    }

    fn plan_composition(&self, n: usize) -> Result<(Vec<usize>, BTreeSet<Qubit>), AllocError> {
        let free: Vec<&Region> = self.free_regions().collect();
        let seed = free
            .iter()
            .copied()
            .max_by(|a, b| a.size().cmp(&b.size()).then(b.id.cmp(&a.id)))
            .ok_or(AllocError::CompositionFailed(n))?;
        let w = &self.compose_weights;
        let mut chosen = vec![seed.id];
        let mut footprint = seed.vertex_set();
        while footprint.len() < n {
            let mut best: Option<(&Region, f64)> = None;
            for r in &free {
                if chosen.contains(&r.id) || r.vertices.iter().any(|v| footprint.contains(v)) {
                    continue;
                }
                let bridge: Vec<f64> = r
                    .vertices
                    .iter()
                    .flat_map(|&v| {
                        self.graph
                            .neighbors(v)
                            .iter()
                            .filter(|u| footprint.contains(u))
                            .map(move |&u| self.graph.edge(u, v).unwrap().error)
                    })
                    .collect();
                if bridge.is_empty() {
                    continue;
                }
                let mut combined = footprint.clone();
                combined.extend(r.vertices.iter().copied());
                let s_conn =
                    connectivity_score(combined.len(), self.graph.edges_within(&combined).len());
                let s = w.quality * r.scores.q + w.conn * s_conn + w.bridge * gate_score(&bridge);
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((r, s));
                }
            }
            let (r, _) = best.ok_or(AllocError::CompositionFailed(n))?;
            chosen.push(r.id);
            footprint.extend(r.vertices.iter().copied());
        }
        if !self.graph.is_connected_subset(&footprint) {
            return Err(AllocError::CompositionFailed(n));
        }
        Ok((chosen, footprint))
    }

    fn commit(&mut self, alloc: Allocation) {
        self.busy.extend(alloc.region_ids.iter().copied());
        self.active.insert(alloc.circuit_id.clone(), alloc);
    }

    /// Returns every region of the allocation to the free pool.
    pub fn release(&mut self, circuit_id: &str) -> Result<Allocation, AllocError> {
        let alloc = self
            .active
            .remove(circuit_id)
            .ok_or_else(|| AllocError::UnknownCircuit(circuit_id.to_string()))?;
        for id in &alloc.region_ids {
            self.busy.remove(id);
        }
        Ok(alloc)
    }

    pub fn release_all(&mut self) {
        self.active.clear();
        self.busy.clear();
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub index: usize,
    /// Circuits allocated in this batch, retries first.
    pub admitted: Vec<String>,
    /// Circuits that failed allocation and went to the retry queue.
    pub deferred: Vec<String>,
    /// How many of `admitted` came from the retry queue.
    pub retried: usize,
    pub allocations: Vec<Allocation>,
    /// True for single-circuit executions of the final sweep.
    pub sweep: bool,
    pub regions_used: usize,
    pub queue_after: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub batch_cap: usize,
    pub total_circuits: usize,
    pub batches: Vec<BatchRecord>,
    pub infeasible: Vec<String>,
    /// Executed jobs: batches with at least one admission plus sweep runs.
    pub jobs_used: usize,
}

impl BatchReport {
    /// `1 - jobs / N`, the saving against one job per circuit.
    pub fn cost_reduction(&self) -> f64 {
        if self.total_circuits == 0 {
            return 0.0;
        }
        1.0 - self.jobs_used as f64 / self.total_circuits as f64
    }

    /// Executed batches only.
    pub fn executed(&self) -> impl Iterator<Item = &BatchRecord> + '_ {
        self.batches.iter().filter(|b| !b.admitted.is_empty())
    }
}

/// Deferred-retry batch scheduling over a static workload.
///
/// Each batch first drains up to `batch_cap` circuits from the retry queue,
/// then tops up with new arrivals in order. Circuits that fail to allocate
/// are queued for the next batch; all allocations are released at batch
/// end. Once arrivals are exhausted and a retry-only batch admits nothing,
/// the remaining queue is swept one circuit at a time against the fully
/// free pool; circuits failing there are infeasible.
///
/// `state` must have no active allocations; it is left empty on return.
pub fn schedule_batches(
    state: &mut AllocationState,
    workload: &[AllocationRequest],
    batch_cap: usize,
) -> BatchReport {
    assert!(batch_cap >= 1, "batch_cap must be positive");
    state.release_all();
    let mut report = BatchReport {
        batch_cap,
        total_circuits: workload.len(),
        ..Default::default()
    };
    let mut queue: VecDeque<&AllocationRequest> = VecDeque::new();
    let mut next = 0;
    while next < workload.len() || !queue.is_empty() {
        let take_retry = queue.len().min(batch_cap);
        let mut batch: Vec<&AllocationRequest> = queue.drain(..take_retry).collect();
        let take_new = (batch_cap - batch.len()).min(workload.len() - next);
        batch.extend(&workload[next..next + take_new]);
        next += take_new;

        let mut record = BatchRecord {
            index: report.batches.len(),
            ..Default::default()
        };
        let mut failed = Vec::new();
        for (k, req) in batch.iter().enumerate() {
            match state.allocate(req) {
                Ok(a) => {
                    if k < take_retry {
                        record.retried += 1;
                    }
                    record.admitted.push(req.circuit_id.clone());
                    record.allocations.push(a);
                }
                Err(_) => failed.push(*req),
            }
        }
        state.release_all();

        if record.admitted.is_empty() && take_new == 0 {
            // retry-only batch on a free pool made no progress
            for req in failed.into_iter().rev() {
                queue.push_front(req);
            }
            break;
        }
        record.deferred = failed.iter().map(|r| r.circuit_id.clone()).collect();
        queue.extend(failed);
        record.queue_after = queue.len();
        record.regions_used = record.allocations.iter().map(|a| a.region_ids.len()).sum();
        if !record.admitted.is_empty() {
            report.jobs_used += 1;
        }
        report.batches.push(record);
    }

    for req in queue {
        match state.allocate(req) {
            Ok(a) => {
                report.jobs_used += 1;
                report.batches.push(BatchRecord {
                    index: report.batches.len(),
                    admitted: vec![req.circuit_id.clone()],
                    regions_used: a.region_ids.len(),
                    allocations: vec![a],
                    sweep: true,
                    ..Default::default()
                });
            }
            Err(_) => report.infeasible.push(req.circuit_id.clone()),
        }
        state.release_all();
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::RegionScores;

    fn region(id: usize, vertices: Vec<Qubit>, s_conn: f64, q: f64) -> Region {
        Region {
            id,
            vertices,
            edges: Vec::new(),
            scores: RegionScores {
                s_conn,
                s_gate: 0.0,
                s_ro: 0.0,
                s_unif: 0.0,
                q,
            },
        }
    }

    fn pool_of(regions: Vec<Region>) -> RegionPool {
        RegionPool {
            covered: regions.iter().flat_map(|r| r.vertices.clone()).collect(),
            regions,
            uncovered: Vec::new(),
        }
    }

    /// Path graph over `0..n` with uniform error.
    fn path(n: u32) -> HardwareGraph {
        HardwareGraph::from_parts((0..n).map(|q| (q, 0.01)), (1..n).map(|q| (q - 1, q, 0.005)))
    }

    #[test]
    fn size_score_values() {
        assert_eq!(size_score(4, 4), 1.0);
        assert_eq!(size_score(3, 4), 0.0);
        assert!((size_score(6, 4) - (-0.25f64).exp()).abs() < 1e-15);
        assert!((size_score(8, 4) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn fitness_values() {
        let w = FitnessWeights::default();
        assert_eq!(fitness(&region(0, (0..3).collect(), 1.0, 1.0), 4, &w), 0.0);
        assert!((fitness(&region(0, (0..4).collect(), 1.0, 1.0), 4, &w) - 1.0).abs() < 1e-15);
        assert!((fitness(&region(0, (0..4).collect(), 0.4, 0.6), 4, &w) - 0.60).abs() < 1e-15);
    }

    #[test]
    fn exact_fit_preferred() {
        let pool = pool_of(vec![
            region(0, (0..9).collect(), 0.5, 0.5),
            region(1, (10..15).collect(), 0.5, 0.5),
        ]);
        let mut st = AllocationState::new(path(20), pool, &Config::default());
        let a = st.allocate(&AllocationRequest::new("c", 5)).unwrap();
        assert_eq!(a.region_ids, vec![1]);
        assert_eq!(a.pi, vec![10, 11, 12, 13, 14]);
        assert!(!a.composed);
        assert!(st.busy().contains(&1));
    }

    #[test]
    fn busy_pool_and_oversize_requests() {
        let pool = pool_of(vec![region(0, (0..4).collect(), 0.5, 0.5)]);
        let mut st = AllocationState::new(path(4), pool, &Config::default());
        st.allocate(&AllocationRequest::new("a", 3)).unwrap();
        assert!(matches!(
            st.allocate(&AllocationRequest::new("b", 2)),
            Err(AllocError::NoFeasibleRegion { .. })
        ));
        assert!(matches!(
            st.allocate(&AllocationRequest::new("c", 5)),
            Err(AllocError::WidthExceedsHardware {
                width: 5,
                available: 4
            })
        ));
        assert_eq!(
            st.allocate(&AllocationRequest::new("a", 1)),
            Err(AllocError::AlreadyActive("a".into()))
        );
    }

    #[test]
    fn release_frees_regions() {
        let pool = pool_of(vec![region(0, (0..4).collect(), 0.5, 0.5)]);
        let mut st = AllocationState::new(path(4), pool, &Config::default());
        st.allocate(&AllocationRequest::new("a", 3)).unwrap();
        st.release("a").unwrap();
        assert!(st.busy().is_empty());
        st.allocate(&AllocationRequest::new("b", 3)).unwrap();
        st.release("b").unwrap();
        assert_eq!(st.release("b"), Err(AllocError::UnknownCircuit("b".into())));
    }

    #[test]
    fn composition_engaged_and_released_together() {
        // three chained regions 0..8, 8..12, 12..16 on a 16-qubit path
        let pool = pool_of(vec![
            region(0, (0..8).collect(), 0.3, 0.7),
            region(1, (8..12).collect(), 0.5, 0.7),
            region(2, (12..16).collect(), 0.5, 0.7),
        ]);
        let mut st = AllocationState::new(path(16), pool, &Config::default());
        let a = st.allocate(&AllocationRequest::new("big", 14)).unwrap();
        assert!(a.composed);
        assert_eq!(a.region_ids, vec![0, 1, 2]);
        assert_eq!(a.physical_vertices.len(), 16);
        assert_eq!(a.bridge_edges, vec![Edge::new(7, 8), Edge::new(11, 12)]);
        assert_eq!(st.busy().len(), 3);
        assert!(st.is_consistent());
        st.release("big").unwrap();
        assert!(st.busy().is_empty());
    }

    #[test]
    fn composition_fails_without_bridges() {
        let g = HardwareGraph::from_parts(
            (0..8).map(|q| (q, 0.01)),
            [
                (0, 1, 0.01),
                (1, 2, 0.01),
                (2, 3, 0.01),
                (4, 5, 0.01),
                (5, 6, 0.01),
                (6, 7, 0.01),
            ],
        );
        let pool = pool_of(vec![
            region(0, (0..4).collect(), 0.5, 0.5),
            region(1, (4..8).collect(), 0.5, 0.5),
        ]);
        let mut st = AllocationState::new(g, pool, &Config::default());
        assert_eq!(
            st.compose(&AllocationRequest::new("x", 6)),
            Err(AllocError::CompositionFailed(6))
        );
        assert!(st.busy().is_empty());
    }

    fn uniform_pool(count: usize, size: u32) -> (HardwareGraph, RegionPool) {
        let n = count as u32 * size;
        let regions = (0..count)
            .map(|i| {
                let lo = i as u32 * size;
                region(i, (lo..lo + size).collect(), 0.5, 0.5)
            })
            .collect();
        // no couplers between regions: composition never applies
        let couplers = (0..n).filter(|q| q % size != 0).map(|q| (q - 1, q, 0.01));
        (
            HardwareGraph::from_parts((0..n).map(|q| (q, 0.01)), couplers),
            pool_of(regions),
        )
    }

    #[test]
    fn retry_gets_priority_in_next_batch() {
        let (g, pool) = uniform_pool(1, 6);
        let mut st = AllocationState::new(g, pool, &Config::default());
        let work = vec![
            AllocationRequest::new("a", 6),
            AllocationRequest::new("b", 6),
        ];
        let rep = schedule_batches(&mut st, &work, 2);
        assert_eq!(rep.batches[0].admitted, vec!["a"]);
        assert_eq!(rep.batches[0].deferred, vec!["b"]);
        assert_eq!(rep.batches[1].admitted, vec!["b"]);
        assert_eq!(rep.batches[1].retried, 1);
        assert_eq!(rep.jobs_used, 2);
        assert!(rep.infeasible.is_empty());
    }

    #[test]
    fn ceil_jobs_when_everything_fits() {
        let (g, pool) = uniform_pool(20, 4);
        let mut st = AllocationState::new(g, pool, &Config::default());
        let work: Vec<_> = (0..29)
            .map(|i| AllocationRequest::new(format!("c{i:02}"), 2 + i % 3))
            .collect();
        for (cap, jobs) in [(2, 15), (4, 8), (6, 5), (10, 3), (15, 2)] {
            let rep = schedule_batches(&mut st, &work, cap);
            assert_eq!(rep.jobs_used, jobs, "cap {cap}");
        }
    }

    #[test]
    fn oversized_circuit_ends_infeasible() {
        let (g, pool) = uniform_pool(3, 4);
        let mut st = AllocationState::new(g, pool, &Config::default());
        let work = vec![
            AllocationRequest::new("ok1", 3),
            AllocationRequest::new("huge", 9),
            AllocationRequest::new("ok2", 4),
        ];
        let rep = schedule_batches(&mut st, &work, 2);
        assert_eq!(rep.infeasible, vec!["huge"]);
        let admitted: usize = rep.batches.iter().map(|b| b.admitted.len()).sum();
        assert_eq!(admitted, 2);
        assert!(st.active().is_empty());
    }
}

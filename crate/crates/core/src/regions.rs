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

//! Region scoring and disjoint pool selection.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{Edge, HardwareGraph, Qubit};
use crate::community::candidate_communities;
use crate::config::{Config, ScoreWeights};

#[derive(Debug, Error, PartialEq)]
pub enum RegionError {
    #[error("a region needs at least two vertices, got {0}")]
    TooSmall(usize),
    #[error("vertex {0} is not in the hardware graph")]
    UnknownVertex(Qubit),
    #[error("vertex set does not induce a connected subgraph")]
    Disconnected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionScores {
    pub s_conn: f64,
    pub s_gate: f64,
    pub s_ro: f64,
    pub s_unif: f64,
    pub q: f64,
}

impl RegionScores {
    pub fn from_parts(s_conn: f64, s_gate: f64, s_ro: f64, s_unif: f64, w: &ScoreWeights) -> Self {
        let s_conn = s_conn.clamp(0.0, 1.0);
        let s_gate = s_gate.clamp(0.0, 1.0);
        let s_ro = s_ro.clamp(0.0, 1.0);
        let s_unif = s_unif.clamp(0.0, 1.0);
        let q = w.conn * s_conn + w.gate * s_gate + w.readout * s_ro + w.uniformity * s_unif;
        RegionScores {
            s_conn,
            s_gate,
            s_ro,
            s_unif,
            q,
        }
    }
}

/// Edge density: `2|E| / (|V|(|V|-1))`.
pub fn connectivity_score(vertices: usize, edges: usize) -> f64 {
    if vertices < 2 {
        return 0.0;
    }
    (2.0 * edges as f64 / (vertices as f64 * (vertices as f64 - 1.0))).min(1.0)
}

/// `max(0, 1 - 100 * mean gate error)`; also used for bridge sets.
pub fn gate_score(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    (1.0 - 100.0 * mean(errors)).clamp(0.0, 1.0)
}

/// `max(0, 1 - 10 * mean readout error)`.
pub fn readout_score(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    (1.0 - 10.0 * mean(errors)).clamp(0.0, 1.0)
}

/// `max(0, 1 - CV)` with population standard deviation. A set of identical
/// errors (including all-zero) scores 1.
pub fn uniformity_score(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    let mu = mean(errors);
    let var = errors.iter().map(|e| (e - mu).powi(2)).sum::<f64>() / errors.len() as f64;
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return 1.0;
    }
    (1.0 - sigma / mu).clamp(0.0, 1.0)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Scores the subgraph induced by `vertices`. Input order is irrelevant.
pub fn score_region(
    graph: &HardwareGraph,
    vertices: &BTreeSet<Qubit>,
    weights: &ScoreWeights,
) -> Result<RegionScores, RegionError> {
    if vertices.len() < 2 {
        return Err(RegionError::TooSmall(vertices.len()));
    }
    if let Some(&v) = vertices.iter().find(|v| !graph.contains(**v)) {
        return Err(RegionError::UnknownVertex(v));
    }
    if !graph.is_connected_subset(vertices) {
        return Err(RegionError::Disconnected);
    }
    let edges = graph.edges_within(vertices);
    let gate: Vec<f64> = edges
        .iter()
        .map(|e| graph.edge(e.a, e.b).unwrap().error)
        .collect();
    let ro: Vec<f64> = vertices
        .iter()
        .map(|&v| graph.readout_error(v).unwrap())
        .collect();
    Ok(RegionScores::from_parts(
        connectivity_score(vertices.len(), edges.len()),
        gate_score(&gate),
        readout_score(&ro),
        uniformity_score(&gate),
        weights,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    pub vertices: Vec<Qubit>,
    pub edges: Vec<Edge>,
    pub scores: RegionScores,
}

impl Region {
    /// Builds and scores the region induced by `vertices`.
    pub fn induced(
        id: usize,
        graph: &HardwareGraph,
        vertices: impl IntoIterator<Item = Qubit>,
        weights: &ScoreWeights,
    ) -> Result<Self, RegionError> {
        let set: BTreeSet<Qubit> = vertices.into_iter().collect();
        let scores = score_region(graph, &set, weights)?;
        Ok(Region {
            id,
            edges: graph.edges_within(&set),
            vertices: set.into_iter().collect(),
            scores,
        })
    }

    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_set(&self) -> BTreeSet<Qubit> {
        self.vertices.iter().copied().collect()
    }

    /// Quality per qubit, the greedy selection key.
    pub fn density(&self) -> f64 {
        self.scores.q / self.vertices.len() as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionPool {
    pub regions: Vec<Region>,
    pub covered: BTreeSet<Qubit>,
    /// Graph vertices outside every region. Only filled by [`discover`].
    #[serde(default)]
    pub uncovered: Vec<Qubit>,
}

impl RegionPool {
    pub fn get(&self, id: usize) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn total_quality(&self) -> f64 {
        self.regions.iter().map(|r| r.scores.q).sum()
    }

    pub fn max_region_size(&self) -> usize {
        self.regions.iter().map(Region::size).max().unwrap_or(0)
    }

    /// True if the regions are pairwise disjoint and `covered` is their union.
    pub fn is_consistent(&self) -> bool {
        let mut seen = BTreeSet::new();
        for r in &self.regions {
            for &v in &r.vertices {
                if !seen.insert(v) {
                    return false;
                }
            }
        }
        seen == self.covered
    }
}

/// Greedy weighted set packing: scan candidates by descending quality
/// density (ties: larger first, then lower id) and keep each one that is
/// disjoint from everything kept so far.
pub fn select_pool(candidates: Vec<Region>) -> RegionPool {
    let mut order: Vec<Region> = candidates;
    order.sort_by(|a, b| {
        b.density()
            .total_cmp(&a.density())
            .then(b.size().cmp(&a.size()))
            .then(a.id.cmp(&b.id))
    });
    let mut pool = RegionPool::default();
    for r in order {
        if r.vertices.iter().any(|v| pool.covered.contains(v)) {
            continue;
        }
        pool.covered.extend(r.vertices.iter().copied());
        pool.regions.push(r);
    }
    pool
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryTimings {
    pub community_ms: f64,
    pub scoring_ms: f64,
    pub selection_ms: f64,
    pub total_ms: f64,
}

/// Summary statistics of a discovered pool.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryStats {
    pub regions: usize,
    pub candidates: usize,
    pub covered_qubits: usize,
    pub total_qubits: usize,
    pub coverage: f64,
    pub min_region_size: usize,
    pub max_region_size: usize,
    pub mean_region_size: f64,
    pub min_quality: f64,
    pub max_quality: f64,
    /// max / min quality; infinite if some region scores zero.
    pub quality_spread: f64,
}

impl DiscoveryStats {
    pub fn of(pool: &RegionPool, total_qubits: usize, candidates: usize) -> Self {
        let sizes: Vec<usize> = pool.regions.iter().map(Region::size).collect();
        let qs: Vec<f64> = pool.regions.iter().map(|r| r.scores.q).collect();
        let min_q = qs.iter().copied().fold(f64::INFINITY, f64::min);
        let max_q = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n = pool.regions.len();
        DiscoveryStats {
            regions: n,
            candidates,
            covered_qubits: pool.covered.len(),
            total_qubits,
            coverage: if total_qubits == 0 {
                0.0
            } else {
                pool.covered.len() as f64 / total_qubits as f64
            },
            min_region_size: sizes.iter().copied().min().unwrap_or(0),
            max_region_size: sizes.iter().copied().max().unwrap_or(0),
            mean_region_size: if n == 0 {
                0.0
            } else {
                sizes.iter().sum::<usize>() as f64 / n as f64
            },
            min_quality: if n == 0 { 0.0 } else { min_q },
            max_quality: if n == 0 { 0.0 } else { max_q },
            quality_spread: if n == 0 { 0.0 } else { max_q / min_q },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub pool: RegionPool,
    pub stats: DiscoveryStats,
    pub timings: DiscoveryTimings,
}

/// Candidate generation, scoring and greedy selection in one call. Pool
/// regions are renumbered `0..k` in selection order.
pub fn discover(
    graph: &HardwareGraph,
    seed: u64,
    config: &Config,
) -> Result<Discovery, RegionError> {
    let start = Instant::now();
    let candidates = candidate_communities(graph, seed, config.min_region_size.max(2));
    let t_comm = start.elapsed();

    let scored: Result<Vec<Region>, RegionError> = candidates
        .par_iter()
        .enumerate()
        .map(|(id, vs)| Region::induced(id, graph, vs.iter().copied(), &config.score_weights))
        .collect();
    let scored = scored?;
    let t_score = start.elapsed();

    let candidate_count = scored.len();
    let mut pool = select_pool(scored);
    for (i, r) in pool.regions.iter_mut().enumerate() {
        r.id = i;
    }
    pool.uncovered = graph
        .vertices()
        .filter(|v| !pool.covered.contains(v))
        .collect();
    let t_total = start.elapsed();

    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    Ok(Discovery {
        stats: DiscoveryStats::of(&pool, graph.vertex_count(), candidate_count),
        pool,
        timings: DiscoveryTimings {
            community_ms: ms(t_comm),
            scoring_ms: ms(t_score - t_comm),
            selection_ms: ms(t_total - t_score),
            total_ms: ms(t_total),
        },
    })
}

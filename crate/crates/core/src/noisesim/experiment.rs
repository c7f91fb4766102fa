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

//! End-to-end runs: schedule, route, combine, simulate, demultiplex, score.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{simulate, NoiseModel, RunResult, SimError};
use crate::allocator::{schedule_batches, Allocation, AllocationState};
use crate::calibration::{
    build_graph_with, CalibrationSnapshot, GraphOptions, HardwareGraph, Qubit,
};
use crate::circuit::benchmarks::requests;
use crate::circuit::composite::{combine, demultiplex, multiplex, CompositeError};
use crate::circuit::ir::{stable_hash, CircuitIR};
use crate::circuit::route::{route, RouteCache, RouteError};
use crate::circuit::statevector::{ideal_distribution, Distribution, WidthError};
use crate::circuit::Counts;
use crate::config::Config;
use crate::regions::{discover, RegionError, RegionPool};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Composite(#[from] CompositeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Width(#[from] WidthError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("duplicate circuit name {0}")]
    DuplicateCircuit(String),
}

/// Everything a run needs about the device.
#[derive(Clone, Debug)]
pub struct Testbed {
    pub device: String,
    /// Operational graph used for discovery and allocation.
    pub graph: HardwareGraph,
    /// Full chip with failed couplers kept at error 1.0; the baseline routes
    /// on it without looking at errors.
    pub full_chip: HardwareGraph,
    pub pool: RegionPool,
    pub config: Config,
    pub noise: NoiseModel,
}

impl Testbed {
    /// Builds graphs, discovers the region pool and derives the noise model.
    pub fn from_snapshot(
        snap: &CalibrationSnapshot,
        config: &Config,
    ) -> Result<Self, ExperimentError> {
        let opts = GraphOptions {
            dead_threshold: config.dead_threshold,
            keep_failed: false,
        };
        let graph = build_graph_with(snap, &opts);
        let full_chip = build_graph_with(
            snap,
            &GraphOptions {
                keep_failed: true,
                ..opts
            },
        );
        let pool = discover(&graph, config.seed, config)?.pool;
        Ok(Testbed {
            device: snap.device_name.clone(),
            noise: NoiseModel::from_graph(&full_chip, config.one_qubit_depol),
            graph,
            full_chip,
            pool,
            config: config.clone(),
        })
    }

    pub fn device_size(&self) -> usize {
        self.full_chip
            .vertices()
            .max()
            .map_or(0, |q| q as usize + 1)
    }
}

/// Per-circuit seed: the root seed mixed with the circuit id, so a tenant
/// sees the same randomness alone or inside any composite.
pub fn segment_seed(seed: u64, circuit_id: &str) -> u64 {
    seed ^ stable_hash(circuit_id)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitResult {
    pub width: usize,
    pub batch_index: usize,
    /// Circuits executed together in the same job.
    pub batch_size: usize,
    pub sweep: bool,
    pub region_ids: Vec<usize>,
    pub composed: bool,
    pub footprint_size: usize,
    pub swap_count: usize,
    pub depth: usize,
    pub pi: Vec<Qubit>,
    #[serde(flatten)]
    pub result: RunResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub index: usize,
    pub admitted: Vec<String>,
    pub deferred: Vec<String>,
    pub retried: usize,
    pub regions_used: usize,
    pub sweep: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSizeStat {
    pub batch_size: usize,
    pub circuits: usize,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub batch_cap: usize,
    pub total_circuits: usize,
    pub jobs_used: usize,
    pub cost_reduction: f64,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub circuits: Vec<CircuitResult>,
    pub infeasible: Vec<String>,
    pub batches: Vec<BatchSummary>,
    pub batch_size_stats: Vec<BatchSizeStat>,
    /// Pearson r between executed batch size and per-circuit fidelity.
    pub fidelity_batch_size_r: Option<f64>,
    pub route_cache_hits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub device: String,
    pub qubits: usize,
    pub regions: usize,
    pub shots: usize,
    pub seed: u64,
    pub runs: Vec<RunReport>,
    #[serde(default)]
    pub baseline: Vec<CircuitResult>,
    /// Pearson r between batch cap and run mean fidelity.
    pub cap_fidelity_r: Option<f64>,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Sample correlation; `None` when either side has no variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let (mx, _) = mean_std(xs);
    let (my, _) = mean_std(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn ideal_table(circuits: &[CircuitIR]) -> Result<HashMap<String, Distribution>, ExperimentError> {
    circuits
        .par_iter()
        .map(|c| Ok((c.name.clone(), ideal_distribution(c)?)))
        .collect()
}

fn index_circuits(circuits: &[CircuitIR]) -> Result<HashMap<&str, &CircuitIR>, ExperimentError> {
    let mut by_id = HashMap::new();
    for c in circuits {
        if by_id.insert(c.name.as_str(), c).is_some() {
            return Err(ExperimentError::DuplicateCircuit(c.name.clone()));
        }
    }
    Ok(by_id)
}

/// Runs one batch cap over `circuits` (named uniquely) on the region pool.
pub fn run_experiment(
    bed: &Testbed,
    circuits: &[CircuitIR],
    batch_cap: usize,
    shots: usize,
    seed: u64,
) -> Result<RunReport, ExperimentError> {
    let ideal = ideal_table(circuits)?;
    run_with_ideal(bed, circuits, &ideal, batch_cap, shots, seed)
}

fn run_with_ideal(
    bed: &Testbed,
    circuits: &[CircuitIR],
    ideal: &HashMap<String, Distribution>,
    batch_cap: usize,
    shots: usize,
    seed: u64,
) -> Result<RunReport, ExperimentError> {
    let by_id = index_circuits(circuits)?;
    let mut state = AllocationState::new(bed.graph.clone(), bed.pool.clone(), &bed.config);
    let schedule = schedule_batches(&mut state, &requests(circuits), batch_cap);
    let mut cache = RouteCache::new();
    let mut results = Vec::new();

    for batch in schedule.executed() {
        let mut parts: Vec<(Allocation, _)> = Vec::new();
        for alloc in &batch.allocations {
            let footprint = bed.graph.induced(&alloc.vertex_set());
            let routed = cache.get_or_route(by_id[alloc.circuit_id.as_str()], &footprint, seed)?;
            parts.push((alloc.clone(), routed));
        }
        let meta: BTreeMap<String, Allocation> = parts
            .iter()
            .map(|(a, _)| (a.circuit_id.clone(), a.clone()))
            .collect();
        let composite = combine(parts, bed.device_size())?;
        let solo: BTreeMap<String, Counts> = composite
            .segments
            .par_iter()
            .map(|s| {
                let counts = simulate(
                    &s.routed,
                    &bed.noise,
                    shots,
                    segment_seed(seed, &s.circuit_id),
                )?;
                Ok((s.circuit_id.clone(), counts))
            })
            .collect::<Result<_, SimError>>()?;
        let raw = multiplex(&solo, &composite)?;
        let mut tenants = demultiplex(&raw, &composite)?;
        for seg in &composite.segments {
            let id = &seg.circuit_id;
            let alloc = &meta[id];
            results.push(CircuitResult {
                width: by_id[id.as_str()].num_qubits,
                batch_index: batch.index,
                batch_size: batch.admitted.len(),
                sweep: batch.sweep,
                region_ids: alloc.region_ids.clone(),
                composed: alloc.composed,
                footprint_size: alloc.physical_vertices.len(),
                swap_count: seg.routed.swap_count,
                depth: seg.routed.depth,
                pi: seg.routed.pi.clone(),
                result: RunResult::new(id.clone(), &ideal[id], tenants.remove(id).unwrap()),
            });
        }
    }
    // report circuits in workload order
    let order: HashMap<&str, usize> = circuits
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    results.sort_by_key(|r| order[r.result.circuit_id.as_str()]);

    let fids: Vec<f64> = results.iter().map(|r| r.result.fidelity).collect();
    let sizes: Vec<f64> = results.iter().map(|r| r.batch_size as f64).collect();
    let (mean_fidelity, std_fidelity) = mean_std(&fids);
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &results {
        groups
            .entry(r.batch_size)
            .or_default()
            .push(r.result.fidelity);
    }
    Ok(RunReport {
        batch_cap,
        total_circuits: circuits.len(),
        jobs_used: schedule.jobs_used,
        cost_reduction: schedule.cost_reduction(),
        mean_fidelity,
        std_fidelity,
        infeasible: schedule.infeasible.clone(),
        batches: schedule
            .batches
            .iter()
            .map(|b| BatchSummary {
                index: b.index,
                admitted: b.admitted.clone(),
                deferred: b.deferred.clone(),
                retried: b.retried,
                regions_used: b.regions_used,
                sweep: b.sweep,
            })
            .collect(),
        batch_size_stats: groups
            .into_iter()
            .map(|(batch_size, f)| {
                let (m, s) = mean_std(&f);
                BatchSizeStat {
                    batch_size,
                    circuits: f.len(),
                    mean_fidelity: m,
                    std_fidelity: s,
                }
            })
            .collect(),
        fidelity_batch_size_r: pearson(&sizes, &fids),
        route_cache_hits: cache.hits,
        circuits: results,
    })
}

/// The chip with every coupler and qubit set to one error value: a router
/// working on it sees topology only.
pub fn calibration_blind(graph: &HardwareGraph) -> HardwareGraph {
    HardwareGraph::from_parts(
        graph.vertices().map(|q| (q, 0.01)),
        graph.edges().map(|(e, _)| (e.a, e.b, 0.01)),
    )
}

/// Solo runs routed on the whole chip without calibration data, then
/// simulated under the real noise.
pub fn run_baseline(
    bed: &Testbed,
    circuits: &[CircuitIR],
    shots: usize,
    seed: u64,
) -> Result<Vec<CircuitResult>, ExperimentError> {
    let ideal = ideal_table(circuits)?;
    baseline_with_ideal(bed, circuits, &ideal, shots, seed)
}

fn baseline_with_ideal(
    bed: &Testbed,
    circuits: &[CircuitIR],
    ideal: &HashMap<String, Distribution>,
    shots: usize,
    seed: u64,
) -> Result<Vec<CircuitResult>, ExperimentError> {
    let blind = calibration_blind(&bed.full_chip);
    circuits
        .iter()
        .map(|c| {
            let s = segment_seed(seed, &c.name);
            let routed = route(c, &blind, s)?;
            let counts = simulate(&routed, &bed.noise, shots, s)?;
            Ok(CircuitResult {
                width: c.num_qubits,
                batch_index: 0,
                batch_size: 1,
                sweep: false,
                region_ids: Vec::new(),
                composed: false,
                footprint_size: bed.full_chip.vertex_count(),
                swap_count: routed.swap_count,
                depth: routed.depth,
                pi: routed.pi.clone(),
                result: RunResult::new(c.name.clone(), &ideal[&c.name], counts),
            })
        })
        .collect()
}

/// One run per batch cap, plus the baseline when requested.
pub fn run_suite(
    bed: &Testbed,
    circuits: &[CircuitIR],
    caps: &[usize],
    shots: usize,
    seed: u64,
    with_baseline: bool,
) -> Result<ExperimentReport, ExperimentError> {
    let ideal = ideal_table(circuits)?;
    let runs = caps
        .iter()
        .map(|&cap| run_with_ideal(bed, circuits, &ideal, cap, shots, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline = if with_baseline {
        baseline_with_ideal(bed, circuits, &ideal, shots, seed)?
    } else {
        Vec::new()
    };
    let cap_x: Vec<f64> = runs.iter().map(|r| r.batch_cap as f64).collect();
    let cap_y: Vec<f64> = runs.iter().map(|r| r.mean_fidelity).collect();
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        device: bed.device.clone(),
        qubits: bed.full_chip.vertex_count(),
        regions: bed.pool.regions.len(),
        shots,
        seed,
        cap_fidelity_r: pearson(&cap_x, &cap_y),
        runs,
        baseline,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinLoss {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

/// Per-circuit comparison; differences within `tolerance` are ties.
pub fn win_loss(ours: &[CircuitResult], baseline: &[CircuitResult], tolerance: f64) -> WinLoss {
    let base: HashMap<&str, f64> = baseline
        .iter()
        .map(|r| (r.result.circuit_id.as_str(), r.result.fidelity))
        .collect();
    let mut tally = WinLoss::default();
    for r in ours {
        let Some(&b) = base.get(r.result.circuit_id.as_str()) else {
            continue;
        };
        let d = r.result.fidelity - b;
        if d > tolerance {
            tally.wins += 1;
        } else if d < -tolerance {
            tally.losses += 1;
        } else {
            tally.ties += 1;
        }
    }
    tally
}

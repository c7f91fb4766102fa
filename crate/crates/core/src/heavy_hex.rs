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

//! Synthetic heavy-hex calibration snapshots.
//!
//! Layout for `rows` x `cols` hexagonal cells:
//!
//! * `rows + 1` horizontal chains, each `4 * cols + 4` qubits long.
//! * Between chain `r` and chain `r + 1` sits gap `r` holding `cols + 1`
//!   bridge qubits. Even gaps attach at chain positions `3, 7, 11, ...`,
//!   odd gaps at `1, 5, 9, ...`, so a chain qubit never touches two bridges
//!   and the maximum degree is 3.
//! * Indices are assigned chain-major: chain 0 gets `0..L`, then the bridges
//!   of gap 0 left to right, then chain 1, and so on.
//!
//! `rows = 7, cols = 3` reproduces the 156-qubit Heron-class layout
//! (8 chains of 16 plus 7 x 4 bridges).

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationSnapshot, CouplerProps, Qubit, QubitProps};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub gate_mean: f64,
    pub gate_std: f64,
    pub readout_mean: f64,
    pub readout_std: f64,
    /// Number of spatial quality zones; 0 disables clustering.
    pub zones: usize,
    pub seed: u64,
}

impl ErrorProfile {
    /// Strongly heterogeneous device: 1.4% mean two-qubit error with 0.7%
    /// spread, organised into contiguous good and bad zones.
    pub fn kingston_like(seed: u64) -> Self {
        ErrorProfile {
            gate_mean: 0.014,
            gate_std: 0.007,
            readout_mean: 0.02,
            readout_std: 0.008,
            zones: 10,
            seed,
        }
    }

    /// Two contiguous clusters centred near `low` and `high` gate error.
    pub fn two_cluster(low: f64, high: f64, zones: usize, seed: u64) -> Self {
        ErrorProfile {
            gate_mean: 0.5 * (low + high),
            gate_std: 0.5 * (high - low),
            readout_mean: 0.02,
            readout_std: 0.008,
            zones: zones.max(2),
            seed,
        }
    }

    /// Homogeneous device: every coupler within ~10% of `gate_mean`.
    pub fn uniform(gate_mean: f64, seed: u64) -> Self {
        ErrorProfile {
            gate_mean,
            gate_std: 0.1 * gate_mean,
            readout_mean: 0.02,
            readout_std: 0.002,
            zones: 0,
            seed,
        }
    }
}

/// Topology only: qubit count and coupler list.
pub fn heavy_hex_topology(rows: usize, cols: usize) -> (usize, Vec<(Qubit, Qubit)>) {
    assert!(rows >= 1 && cols >= 1, "heavy-hex needs at least one cell");
    let chain_len = 4 * cols + 4;
    let mut couplers = Vec::new();
    let mut next: Qubit = 0;
    let mut prev_chain: Option<Qubit> = None;
    for chain in 0..=rows {
        let start = next;
        for p in 1..chain_len as Qubit {
            couplers.push((start + p - 1, start + p));
        }
        next += chain_len as Qubit;
        if let Some(prev) = prev_chain {
            // bridges of gap `chain - 1` were allocated just before this chain
            let gap = chain - 1;
            let offset = if gap % 2 == 0 { 3 } else { 1 };
            let bridge_start = start - (cols as Qubit + 1);
            for k in 0..=cols as Qubit {
                let pos = offset + 4 * k;
                couplers.push((prev + pos, bridge_start + k));
                couplers.push((bridge_start + k, start + pos));
            }
        }
        if chain < rows {
            prev_chain = Some(start);
            next += cols as Qubit + 1;
        }
    }
    couplers.sort_unstable();
    (next as usize, couplers)
}

/// Generates a seeded heavy-hex snapshot. Identical arguments give
/// byte-identical output.
pub fn generate_heavy_hex(rows: usize, cols: usize, profile: &ErrorProfile) -> CalibrationSnapshot {
    let (n, couplers) = heavy_hex_topology(rows, cols);
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let unit = Normal::new(0.0, 1.0).unwrap();

    let mut adjacency = vec![Vec::new(); n];
    for &(u, v) in &couplers {
        adjacency[u as usize].push(v as usize);
        adjacency[v as usize].push(u as usize);
    }

    let level = zone_levels(&adjacency, profile.zones, &mut rng);

    let gate_latent: Vec<f64> = couplers
        .iter()
        .map(|&(u, v)| match &level {
            Some(l) => 0.5 * (l[u as usize] + l[v as usize]) + 0.25 * unit.sample(&mut rng),
            None => unit.sample(&mut rng),
        })
        .collect();
    let readout_latent: Vec<f64> = (0..n)
        .map(|q| match &level {
            Some(l) => l[q] + 0.5 * unit.sample(&mut rng),
            None => unit.sample(&mut rng),
        })
        .collect();
    let (gate_z, readout_z) = if level.is_some() {
        (standardize(&gate_latent), standardize(&readout_latent))
    } else {
        (gate_latent, readout_latent)
    };

    let qubits = (0..n)
        .map(|q| {
            let t1 = (250.0 + 50.0 * unit.sample(&mut rng)).max(20.0);
            let t2 = (150.0 + 40.0 * unit.sample(&mut rng)).clamp(10.0, 2.0 * t1);
            QubitProps {
                index: q as Qubit,
                t1_us: t1,
                t2_us: t2,
                readout_error: (profile.readout_mean + profile.readout_std * readout_z[q])
                    .clamp(1e-4, 0.5),
                operational: true,
            }
        })
        .collect();
    let couplers = couplers
        .iter()
        .zip(&gate_z)
        .map(|(&(q0, q1), z)| CouplerProps {
            q0,
            q1,
            gate_error: (profile.gate_mean + profile.gate_std * z).clamp(1e-4, 0.999),
            operational: true,
        })
        .collect();

    CalibrationSnapshot {
        device_name: format!("heavy-hex-{rows}x{cols}"),
        timestamp: "2025-01-01T00:00:00Z".to_string(),
        qubits,
        couplers,
    }
}

/// Assigns each vertex the level (+1 bad, -1 good) of its nearest zone
/// centre; ties go to the lower-numbered centre.
fn zone_levels(adjacency: &[Vec<usize>], zones: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    if zones == 0 {
        return None;
    }
    let n = adjacency.len();
    let zones = zones.min(n);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let centres = &ids[..zones];
    let mut levels: Vec<f64> = (0..zones)
        .map(|z| if z % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    levels.shuffle(rng);

    let mut zone_of = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for (z, &c) in centres.iter().enumerate() {
        zone_of[c] = z;
        queue.push_back(c);
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adjacency[v] {
            if zone_of[w] == usize::MAX {
                zone_of[w] = zone_of[v];
                queue.push_back(w);
            }
        }
    }
    Some(
        zone_of
            .into_iter()
            .map(|z| {
                if z == usize::MAX {
                    // unreachable from any centre
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    levels[z]
                }
            })
            .collect(),
    )
}

fn standardize(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return vec![0.0; xs.len()];
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - mean) / sd).collect()
}

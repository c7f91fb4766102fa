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

//! Calibration-derived stochastic noise and the fidelity metrics.
//!
//! Each unitary gate is followed, with its depolarizing probability, by a
//! uniformly random non-identity Pauli on its operands. A routed SWAP
//! counts as three two-qubit gates on its coupler. Readout flips each
//! measured bit independently. Shots whose trajectory draws no fault are
//! sampled from the shared noiseless state.

pub mod experiment;

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{Edge, HardwareGraph, Qubit};
use crate::circuit::ir::{bitstring, CircuitIR, GateKind};
use crate::circuit::route::RoutedCircuit;
use crate::circuit::statevector::{
    classical_value, Distribution, StateVector, WidthError, MAX_SIM_QUBITS,
};
use crate::circuit::Counts;

pub use experiment::{
    pearson, run_experiment, run_suite, BatchSizeStat, CircuitResult, ExperimentReport, RunReport,
    Testbed,
};

pub const DEFAULT_ONE_QUBIT_DEPOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub two_qubit_depol: BTreeMap<Edge, f64>,
    pub one_qubit_depol: f64,
    pub readout_flip: BTreeMap<Qubit, f64>,
}

impl NoiseModel {
    /// Coupler gate errors become two-qubit depolarizing probabilities and
    /// readout errors become flip probabilities.
    pub fn from_graph(graph: &HardwareGraph, one_qubit_depol: f64) -> Self {
        NoiseModel {
            two_qubit_depol: graph
                .edges()
                .map(|(e, info)| (e, info.error.clamp(0.0, 1.0)))
                .collect(),
            one_qubit_depol,
            readout_flip: graph
                .vertices()
                .map(|q| (q, graph.readout_error(q).unwrap().clamp(0.0, 1.0)))
                .collect(),
        }
    }

    /// Same couplers with every probability set to zero.
    pub fn noiseless(&self) -> Self {
        NoiseModel {
            two_qubit_depol: self.two_qubit_depol.keys().map(|&e| (e, 0.0)).collect(),
            one_qubit_depol: 0.0,
            readout_flip: self.readout_flip.keys().map(|&q| (q, 0.0)).collect(),
        }
    }

    /// Multiplies depolarizing probabilities by `factor`, capped at 1.
    /// Readout flips are unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        NoiseModel {
            two_qubit_depol: self
                .two_qubit_depol
                .iter()
                .map(|(&e, &p)| (e, (p * factor).min(1.0)))
                .collect(),
            one_qubit_depol: (self.one_qubit_depol * factor).min(1.0),
            readout_flip: self.readout_flip.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.one_qubit_depol)
            || !self.two_qubit_depol.values().all(|&p| ok(p))
            || !self.readout_flip.values().all(|&p| ok(p))
        {
            return Err(SimError::Probability);
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Width(#[from] WidthError),
    #[error("no noise entry for coupler {0}")]
    MissingCoupler(Edge),
    #[error("shots must be positive")]
    ZeroShots,
    #[error("noise probabilities must lie in [0, 1]")]
    Probability,
    #[error("{0} classical bits exceed 64")]
    TooManyClbits(usize),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub circuit_id: String,
    pub counts: Counts,
    pub shots: usize,
    pub d_l1: f64,
    pub fidelity: f64,
}

impl RunResult {
    pub fn new(circuit_id: impl Into<String>, ideal: &Distribution, counts: Counts) -> Self {
        let shots = counts.values().sum::<u64>() as usize;
        let d_l1 = l1_distance(ideal, &counts);
        RunResult {
            circuit_id: circuit_id.into(),
            counts,
            shots,
            d_l1,
            fidelity: fidelity(d_l1),
        }
    }
}

/// `sum_x |p_ideal(x) - counts(x) / shots|` over the union of supports.
pub fn l1_distance(ideal: &Distribution, counts: &Counts) -> f64 {
    let shots: u64 = counts.values().sum();
    let shots = shots.max(1) as f64;
    let mut d: f64 = ideal
        .iter()
        .map(|(k, p)| (p - counts.get(k).copied().unwrap_or(0) as f64 / shots).abs())
        .sum();
    d += counts
        .iter()
        .filter(|(k, _)| !ideal.contains_key(*k))
        .map(|(_, &n)| n as f64 / shots)
        .sum::<f64>();
    d.clamp(0.0, 2.0)
}

/// `1 - d / 2`, clamped to `[0, 1]`.
pub fn fidelity(d_l1: f64) -> f64 {
    (1.0 - d_l1 / 2.0).clamp(0.0, 1.0)
}

struct NoisyOp {
    gate: usize,
    p: f64,
    draws: u8,
}

/// Simulates a routed circuit; see [`simulate_circuit`].
pub fn simulate(
    routed: &RoutedCircuit,
    noise: &NoiseModel,
    shots: usize,
    seed: u64,
) -> Result<Counts, SimError> {
    simulate_circuit(&routed.base, noise, shots, seed)
}

/// Monte-Carlo trajectories of `circ`, whose qubit indices are physical
/// qubits of `noise`. Shot `k` draws from its own ChaCha stream, so the
/// result depends only on `seed` and not on thread scheduling.
pub fn simulate_circuit(
    circ: &CircuitIR,
    noise: &NoiseModel,
    shots: usize,
    seed: u64,
) -> Result<Counts, SimError> {
    if shots == 0 {
        return Err(SimError::ZeroShots);
    }
    noise.validate()?;
    circ.validate().map_err(SimError::InvalidCircuit)?;
    if circ.num_clbits > 64 {
        return Err(SimError::TooManyClbits(circ.num_clbits));
    }
    let (compact, active) = circ.compacted();
    if compact.num_qubits > MAX_SIM_QUBITS {
        return Err(WidthError {
            qubits: compact.num_qubits,
            max: MAX_SIM_QUBITS,
        }
        .into());
    }

    let mut ops = Vec::new();
    for (i, g) in compact.gates.iter().enumerate() {
        if !g.kind.is_unitary() {
            continue;
        }
        let (p, draws) = if g.kind.is_two_qubit() {
            let e = Edge::new(active[g.qubits[0]] as Qubit, active[g.qubits[1]] as Qubit);
            let p = *noise
                .two_qubit_depol
                .get(&e)
                .ok_or(SimError::MissingCoupler(e))?;
            (p, if g.kind == GateKind::Swap { 3 } else { 1 })
        } else {
            (noise.one_qubit_depol, 1)
        };
        ops.push(NoisyOp { gate: i, p, draws });
    }
    let measures = compact.measure_map();
    let flips: Vec<f64> = measures
        .iter()
        .map(|&(q, _)| {
            noise
                .readout_flip
                .get(&(active[q] as Qubit))
                .copied()
                .unwrap_or(0.0)
        })
        .collect();

    // noiseless evolution with periodic checkpoints for faulty shots
    let stride = (ops.len() / 32).max(1);
    let mut checkpoints: Vec<StateVector> = Vec::new();
    let mut sv = StateVector::new(compact.num_qubits);
    for (k, op) in ops.iter().enumerate() {
        if k % stride == 0 {
            checkpoints.push(sv.clone());
        }
        sv.apply_gate(&compact.gates[op.gate]);
    }
    let cumulative: Vec<f64> = sv
        .probabilities()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();

    let outcomes: HashMap<u64, u64> = (0..shots as u64)
        .into_par_iter()
        .map(|shot| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shot);
            let mut faults: Vec<(usize, u8)> = Vec::new();
            for (k, op) in ops.iter().enumerate() {
                for _ in 0..op.draws {
                    if op.p > 0.0 && rng.random::<f64>() < op.p {
                        let two = compact.gates[op.gate].qubits.len() == 2;
                        let pauli = if two {
                            rng.random_range(1..16u8)
                        } else {
                            rng.random_range(1..4u8)
                        };
                        faults.push((k, pauli));
                    }
                }
            }
            let r: f64 = rng.random();
            let index = if faults.is_empty() {
                cumulative
                    .partition_point(|&c| c <= r)
                    .min(cumulative.len() - 1)
            } else {
                let first = faults[0].0;
                let start = first / stride * stride;
                let mut state = checkpoints[start / stride].clone();
                let mut f = 0;
                for (k, op) in ops.iter().enumerate().skip(start) {
                    let g = &compact.gates[op.gate];
                    state.apply_gate(g);
                    while f < faults.len() && faults[f].0 == k {
                        let pauli = faults[f].1;
                        state.apply_pauli(g.qubits[0], pauli & 3);
                        if g.qubits.len() == 2 {
                            state.apply_pauli(g.qubits[1], pauli >> 2);
                        }
                        f += 1;
                    }
                }
                sample(state.amplitudes(), r)
            };
            let mut value = classical_value(index, &measures);
            for (&(_, c), &p) in measures.iter().zip(&flips) {
                if p > 0.0 && rng.random::<f64>() < p {
                    value ^= 1 << c;
                }
            }
            value
        })
        .fold(HashMap::new, |mut m, v| {
            *m.entry(v).or_insert(0) += 1;
            m
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, n) in b {
                *a.entry(k).or_insert(0) += n;
            }
            a
        });
    Ok(outcomes
        .into_iter()
        .map(|(v, n)| (bitstring(v, circ.num_clbits), n))
        .collect())
}

fn sample(amps: &[Complex64], r: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, a) in amps.iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            acc += p;
            last = i;
            if r < acc {
                return i;
            }
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::ir::Gate;
    use crate::circuit::statevector::ideal_distribution;

    fn dist(pairs: &[(&str, f64)]) -> Distribution {
        pairs.iter().map(|&(k, p)| (k.to_string(), p)).collect()
    }

    fn counts(pairs: &[(&str, u64)]) -> Counts {
        pairs.iter().map(|&(k, n)| (k.to_string(), n)).collect()
    }

    fn two_qubit_model(p2: f64, flip: f64) -> NoiseModel {
        NoiseModel {
            two_qubit_depol: [(Edge::new(0, 1), p2)].into(),
            one_qubit_depol: 0.0,
            readout_flip: [(0, flip), (1, flip)].into(),
        }
    }

    #[test]
    fn l1_examples() {
        let ideal = dist(&[("00", 0.5), ("11", 0.5)]);
        assert_eq!(
            l1_distance(&ideal, &counts(&[("00", 512), ("11", 512)])),
            0.0
        );
        let d = l1_distance(&ideal, &counts(&[("00", 750), ("11", 250)]));
        assert!((d - 0.5).abs() < 1e-12);
        assert!((fidelity(d) - 0.75).abs() < 1e-12);
        let d = l1_distance(&ideal, &counts(&[("01", 3)]));
        assert_eq!(d, 2.0);
        assert_eq!(fidelity(d), 0.0);
    }

    #[test]
    fn noiseless_matches_ideal_and_is_reproducible() {
        let mut c = CircuitIR::new("bell", 2, 2);
        c.push(Gate::new(GateKind::H, vec![0]))
            .push(Gate::new(GateKind::Cx, vec![0, 1]))
            .push(Gate::measure(0, 0))
            .push(Gate::measure(1, 1));
        let m = two_qubit_model(0.0, 0.0);
        let a = simulate_circuit(&c, &m, 4000, 9).unwrap();
        assert_eq!(a, simulate_circuit(&c, &m, 4000, 9).unwrap());
        assert_eq!(a.values().sum::<u64>(), 4000);
        assert_eq!(a.keys().cloned().collect::<Vec<_>>(), vec!["00", "11"]);
        let f = fidelity(l1_distance(&ideal_distribution(&c).unwrap(), &a));
        assert!(f > 0.95);
    }

    #[test]
    fn readout_flip_is_binomial() {
        let mut c = CircuitIR::new("idle", 1, 1);
        c.push(Gate::measure(0, 0));
        let m = NoiseModel {
            two_qubit_depol: BTreeMap::new(),
            one_qubit_depol: 0.0,
            readout_flip: [(0, 0.1)].into(),
        };
        let n = 10_000;
        let counts = simulate_circuit(&c, &m, n, 5).unwrap();
        let frac = counts.get("1").copied().unwrap_or(0) as f64 / n as f64;
        let sigma = (0.1f64 * 0.9 / n as f64).sqrt();
        assert!((frac - 0.1).abs() <= 3.0 * sigma, "{frac}");
    }

    /// Exact 4x4 density matrix after a CX on |00> followed by the
    /// two-qubit depolarizing channel with Pauli Kraus operators.
    fn density_oracle(p: f64) -> [f64; 4] {
        type M = [[Complex64; 4]; 4];
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let paulis: [[[Complex64; 2]; 2]; 4] = [
            [[one, z], [z, one]],
            [[z, one], [one, z]],
            [[z, -i], [i, z]],
            [[one, z], [z, -one]],
        ];
        // CX|00> = |00>
        let mut rho: M = [[z; 4]; 4];
        rho[0][0] = one;
        let kron = |a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]| -> M {
            let mut m = [[z; 4]; 4];
            for r in 0..4 {
                for c in 0..4 {
                    // basis index = q1 * 2 + q0; `a` acts on q0
                    m[r][c] = a[r & 1][c & 1] * b[r >> 1][c >> 1];
                }
            }
            m
        };
        let mut out: M = [[z; 4]; 4];
        for k in 0..16 {
            let w = if k == 0 { 1.0 - p } else { p / 15.0 };
            let e = kron(&paulis[k & 3], &paulis[k >> 2]);
            for r in 0..4 {
                for c in 0..4 {
                    let mut s = z;
                    for a in 0..4 {
                        for b in 0..4 {
                            s += e[r][a] * rho[a][b] * e[c][b].conj();
                        }
                    }
                    out[r][c] += s * w;
                }
            }
        }
        [out[0][0].re, out[1][1].re, out[2][2].re, out[3][3].re]
    }

    #[test]
    fn trajectories_match_density_matrix() {
        let mut c = CircuitIR::new("cx", 2, 2);
        c.push(Gate::new(GateKind::Cx, vec![0, 1]))
            .push(Gate::measure(0, 0))
            .push(Gate::measure(1, 1));
        for p in [0.75, 15.0 / 16.0] {
            let exact = density_oracle(p);
            let n = 100_000;
            let got = simulate_circuit(&c, &two_qubit_model(p, 0.0), n, 21).unwrap();
            for (idx, want) in exact.iter().enumerate() {
                let key = bitstring(idx as u64, 2);
                let frac = got.get(&key).copied().unwrap_or(0) as f64 / n as f64;
                let sigma = (want * (1.0 - want) / n as f64).sqrt();
                assert!(
                    (frac - want).abs() <= 3.0 * sigma,
                    "p={p} {key}: {frac} vs {want}"
                );
            }
        }
        // p = 0.75 leaves 0.4 on |00> and 0.2 elsewhere
        let e = density_oracle(0.75);
        assert!((e[0] - 0.4).abs() < 1e-12 && (e[3] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn swap_draws_three_faults() {
        // a SWAP on |00> is invisible unless a fault flips a bit
        let mut c = CircuitIR::new("sw", 2, 2);
        c.push(Gate::new(GateKind::Swap, vec![0, 1]))
            .push(Gate::measure(0, 0))
            .push(Gate::measure(1, 1));
        let p = 0.1;
        let n = 50_000;
        let got = simulate_circuit(&c, &two_qubit_model(p, 0.0), n, 2).unwrap();
        // per draw, 12 of 15 Paulis flip some bit; three independent draws
        // compose, so |00> survives with probability computed by the chain
        let stay = {
            let mut d = [1.0, 0.0, 0.0, 0.0];
            for _ in 0..3 {
                let mut nd = [0.0; 4];
                for (s, &ps) in d.iter().enumerate() {
                    nd[s] += ps * (1.0 - p + p * 3.0 / 15.0);
                    for t in (0..4).filter(|&t| t != s) {
                        nd[t] += ps * p * 4.0 / 15.0;
                    }
                }
                d = nd;
            }
            d[0]
        };
        let frac = got["00"] as f64 / n as f64;
        let sigma = (stay * (1.0 - stay) / n as f64).sqrt();
        assert!((frac - stay).abs() <= 3.0 * sigma, "{frac} vs {stay}");
    }

    #[test]
    fn missing_coupler_is_an_error() {
        let mut c = CircuitIR::new("cz", 3, 0);
        c.push(Gate::new(GateKind::Cz, vec![0, 2]));
        assert_eq!(
            simulate_circuit(&c, &two_qubit_model(0.0, 0.0), 10, 0),
            Err(SimError::MissingCoupler(Edge::new(0, 2)))
        );
        assert_eq!(
            simulate_circuit(&c, &two_qubit_model(0.0, 0.0), 0, 0),
            Err(SimError::ZeroShots)
        );
    }
}

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

//! Dense statevector simulation. Qubit `q` is bit `q` of the basis index.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use thiserror::Error;

use super::ir::{bitstring, CircuitIR, Gate, GateKind};

/// Largest number of active qubits simulated densely.
pub const MAX_SIM_QUBITS: usize = 14;

/// Outcome probabilities keyed by classical bitstring (bit 0 rightmost).
pub type Distribution = BTreeMap<String, f64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{qubits} active qubits exceed the simulation bound of {max}")]
pub struct WidthError {
    pub qubits: usize,
    pub max: usize,
}

pub type Mat2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 2x2 matrix of a single-qubit gate.
pub fn gate_matrix(kind: GateKind, params: &[f64]) -> Mat2 {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let h = FRAC_1_SQRT_2;
    let phase = |t: f64| Complex64::from_polar(1.0, t);
    use std::f64::consts::FRAC_PI_4;
    match kind {
        GateKind::H => [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]],
        GateKind::X => [[z, one], [one, z]],
        GateKind::Y => [[z, c(0.0, -1.0)], [c(0.0, 1.0), z]],
        GateKind::Z => [[one, z], [z, -one]],
        GateKind::S => [[one, z], [z, c(0.0, 1.0)]],
        GateKind::Sdg => [[one, z], [z, c(0.0, -1.0)]],
        GateKind::T => [[one, z], [z, phase(FRAC_PI_4)]],
        GateKind::Tdg => [[one, z], [z, phase(-FRAC_PI_4)]],
        GateKind::Rx => {
            let (s, co) = (params[0] / 2.0).sin_cos();
            [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
        }
        GateKind::Ry => {
            let (s, co) = (params[0] / 2.0).sin_cos();
            [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
        }
        GateKind::Rz => [[phase(-params[0] / 2.0), z], [z, phase(params[0] / 2.0)]],
        GateKind::U => {
            let (theta, phi, lam) = (params[0], params[1], params[2]);
            let (s, co) = (theta / 2.0).sin_cos();
            [
                [c(co, 0.0), -phase(lam) * s],
                [phase(phi) * s, phase(phi + lam) * co],
            ]
        }
        other => panic!("{other} has no single-qubit matrix"),
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n` qubits.
    pub fn new(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { n, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn apply_matrix(&mut self, q: usize, m: &Mat2) {
        let bit = 1 << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    pub fn apply_cx(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1 << control, 1 << target);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = (1 << a) | (1 << b);
        for i in 0..self.amps.len() {
            if i & mask == mask {
                self.amps[i] = -self.amps[i];
            }
        }
    }

    pub fn apply_swap(&mut self, a: usize, b: usize) {
        let (ab, bb) = (1 << a, 1 << b);
        for i in 0..self.amps.len() {
            if i & ab != 0 && i & bb == 0 {
                self.amps.swap(i, i ^ ab ^ bb);
            }
        }
    }

    /// Pauli `p` on qubit `q`: 0 = I, 1 = X, 2 = Y, 3 = Z.
    pub fn apply_pauli(&mut self, q: usize, p: u8) {
        let bit = 1 << q;
        match p {
            0 => {}
            1 => {
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        self.amps.swap(i, i | bit);
                    }
                }
            }
            2 => {
                let im = Complex64::new(0.0, 1.0);
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        let (a, b) = (self.amps[i], self.amps[i | bit]);
                        self.amps[i] = -im * b;
                        self.amps[i | bit] = im * a;
                    }
                }
            }
            3 => {
                for i in 0..self.amps.len() {
                    if i & bit != 0 {
                        self.amps[i] = -self.amps[i];
                    }
                }
            }
            _ => panic!("pauli index {p} out of range"),
        }
    }

    /// Applies a unitary gate; measure and barrier are no-ops.
    pub fn apply_gate(&mut self, g: &Gate) {
        match g.kind {
            GateKind::Measure | GateKind::Barrier => {}
            GateKind::Cx => self.apply_cx(g.qubits[0], g.qubits[1]),
            GateKind::Cz => self.apply_cz(g.qubits[0], g.qubits[1]),
            GateKind::Swap => self.apply_swap(g.qubits[0], g.qubits[1]),
            k => self.apply_matrix(g.qubits[0], &gate_matrix(k, &g.params)),
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Maps a basis index to the classical register value under `measures`
/// (pairs of simulated qubit and clbit).
pub fn classical_value(index: usize, measures: &[(usize, usize)]) -> u64 {
    measures
        .iter()
        .fold(0u64, |acc, &(q, c)| acc | (((index >> q) & 1) as u64) << c)
}

/// Exact noiseless outcome distribution over the classical register.
///
/// Only qubits touched by a gate are simulated, so circuits expressed over
/// sparse physical indices are accepted as long as the active set fits.
pub fn ideal_distribution(circ: &CircuitIR) -> Result<Distribution, WidthError> {
    let (compact, _) = circ.compacted();
    if compact.num_qubits > MAX_SIM_QUBITS {
        return Err(WidthError {
            qubits: compact.num_qubits,
            max: MAX_SIM_QUBITS,
        });
    }
    let mut sv = StateVector::new(compact.num_qubits);
    for g in &compact.gates {
        sv.apply_gate(g);
    }
    let measures = compact.measure_map();
    let mut acc: HashMap<u64, f64> = HashMap::new();
    for (i, p) in sv.probabilities().into_iter().enumerate() {
        if p > 0.0 {
            *acc.entry(classical_value(i, &measures)).or_insert(0.0) += p;
        }
    }
    Ok(acc
        .into_iter()
        .filter(|&(_, p)| p > 1e-15)
        .map(|(v, p)| (bitstring(v, circ.num_clbits), p))
        .collect())
}

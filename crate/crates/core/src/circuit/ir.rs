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

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Rx,
    Ry,
    Rz,
    U,
    Cx,
    Cz,
    Swap,
    Measure,
    Barrier,
}

impl GateKind {
    pub fn from_name(name: &str) -> Option<Self> {
        use GateKind::*;
        Some(match name {
            "h" => H,
            "x" => X,
            "y" => Y,
            "z" => Z,
            "s" => S,
            "sdg" => Sdg,
            "t" => T,
            "tdg" => Tdg,
            "rx" => Rx,
            "ry" => Ry,
            "rz" => Rz,
            "u" | "U" | "u3" => U,
            "cx" | "CX" => Cx,
            "cz" => Cz,
            "swap" => Swap,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        use GateKind::*;
        match self {
            H => "h",
            X => "x",
            Y => "y",
            Z => "z",
            S => "s",
            Sdg => "sdg",
            T => "t",
            Tdg => "tdg",
            Rx => "rx",
            Ry => "ry",
            Rz => "rz",
            U => "u",
            Cx => "cx",
            Cz => "cz",
            Swap => "swap",
            Measure => "measure",
            Barrier => "barrier",
        }
    }

    /// Operand count for unitary gates; `None` for measure and barrier.
    pub fn arity(self) -> Option<usize> {
        use GateKind::*;
        match self {
            Cx | Cz | Swap => Some(2),
            Measure | Barrier => None,
            _ => Some(1),
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => 1,
            GateKind::U => 3,
            _ => 0,
        }
    }

    pub fn is_two_qubit(self) -> bool {
        self.arity() == Some(2)
    }

    pub fn is_unitary(self) -> bool {
        self.arity().is_some()
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clbit: Option<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, qubits: Vec<usize>) -> Self {
        Gate {
            kind,
            qubits,
            params: Vec::new(),
            clbit: None,
        }
    }

    pub fn with_params(kind: GateKind, qubits: Vec<usize>, params: Vec<f64>) -> Self {
        Gate {
            kind,
            qubits,
            params,
            clbit: None,
        }
    }

    pub fn measure(qubit: usize, clbit: usize) -> Self {
        Gate {
            kind: GateKind::Measure,
            qubits: vec![qubit],
            params: Vec::new(),
            clbit: Some(clbit),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitIR {
    pub name: String,
    pub num_qubits: usize,
    pub num_clbits: usize,
    pub gates: Vec<Gate>,
}

impl CircuitIR {
    pub fn new(name: impl Into<String>, num_qubits: usize, num_clbits: usize) -> Self {
        CircuitIR {
            name: name.into(),
            num_qubits,
            num_clbits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    /// Checks operand bounds, arities, parameter counts and finiteness.
    pub fn validate(&self) -> Result<(), String> {
        for (i, g) in self.gates.iter().enumerate() {
            if let Some(&q) = g.qubits.iter().find(|&&q| q >= self.num_qubits) {
                return Err(format!("gate {i} ({}) uses qubit {q}", g.kind));
            }
            if let Some(a) = g.kind.arity() {
                if g.qubits.len() != a {
                    return Err(format!(
                        "gate {i} ({}) has {} operands",
                        g.kind,
                        g.qubits.len()
                    ));
                }
            }
            let distinct: BTreeSet<_> = g.qubits.iter().collect();
            if distinct.len() != g.qubits.len() {
                return Err(format!("gate {i} ({}) repeats an operand", g.kind));
            }
            if g.params.len() != g.kind.param_count() || g.params.iter().any(|p| !p.is_finite()) {
                return Err(format!("gate {i} ({}) has bad parameters", g.kind));
            }
            match (g.kind, g.clbit) {
                (GateKind::Measure, Some(c)) if c < self.num_clbits && g.qubits.len() == 1 => {}
                (GateKind::Measure, _) => return Err(format!("gate {i} is a malformed measure")),
                (_, Some(_)) => return Err(format!("gate {i} ({}) has a clbit", g.kind)),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.is_two_qubit()).count()
    }

    /// Logical qubit to classical bit, in measure order.
    pub fn measure_map(&self) -> Vec<(usize, usize)> {
        self.gates
            .iter()
            .filter(|g| g.kind == GateKind::Measure)
            .map(|g| (g.qubits[0], g.clbit.unwrap()))
            .collect()
    }

    /// Qubits touched by at least one gate, ascending.
    pub fn active_qubits(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .gates
            .iter()
            .filter(|g| g.kind != GateKind::Barrier)
            .flat_map(|g| g.qubits.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// Number of two-qubit gates between each unordered logical pair.
    pub fn interactions(&self) -> BTreeMap<(usize, usize), usize> {
        let mut m = BTreeMap::new();
        for g in self.gates.iter().filter(|g| g.kind.is_two_qubit()) {
            let (a, b) = (g.qubits[0].min(g.qubits[1]), g.qubits[0].max(g.qubits[1]));
            *m.entry((a, b)).or_insert(0) += 1;
        }
        m
    }

    /// ASAP layer count over unitary gates and measures; at least 1.
    pub fn depth(&self) -> usize {
        let mut level: BTreeMap<usize, usize> = BTreeMap::new();
        let mut depth = 0;
        for g in self.gates.iter().filter(|g| g.kind != GateKind::Barrier) {
            let d = g
                .qubits
                .iter()
                .map(|q| level.get(q).copied().unwrap_or(0))
                .max()
                .unwrap_or(0)
                + 1;
            for &q in &g.qubits {
                level.insert(q, d);
            }
            depth = depth.max(d);
        }
        depth.max(1)
    }

    /// Relabels qubits through `map`, keeping classical bits.
    pub fn relabel(&self, map: &BTreeMap<usize, usize>, num_qubits: usize) -> CircuitIR {
        CircuitIR {
            name: self.name.clone(),
            num_qubits,
            num_clbits: self.num_clbits,
            gates: self
                .gates
                .iter()
                .map(|g| Gate {
                    qubits: g.qubits.iter().map(|q| map[q]).collect(),
                    ..g.clone()
                })
                .collect(),
        }
    }

    /// Copy restricted to the active qubits, renumbered densely in
    /// ascending order. Returns the copy and the original indices.
    pub fn compacted(&self) -> (CircuitIR, Vec<usize>) {
        let active = self.active_qubits();
        let map: BTreeMap<usize, usize> = active.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let mut out = CircuitIR {
            gates: Vec::with_capacity(self.gates.len()),
            ..CircuitIR::new(self.name.clone(), active.len(), self.num_clbits)
        };
        for g in &self.gates {
            let qubits: Vec<usize> = g
                .qubits
                .iter()
                .filter_map(|q| map.get(q).copied())
                .collect();
            if g.kind == GateKind::Barrier && qubits.is_empty() {
                continue;
            }
            out.gates.push(Gate {
                qubits,
                ..g.clone()
            });
        }
        (out, active)
    }

    /// Stable structural hash over widths and the gate list (name excluded).
    pub fn structural_hash(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write_u64(self.num_qubits as u64);
        h.write_u64(self.num_clbits as u64);
        for g in &self.gates {
            h.write_u8(g.kind as u8);
            h.write_u64(g.qubits.len() as u64);
            for &q in &g.qubits {
                h.write_u64(q as u64);
            }
            for p in &g.params {
                h.write_u64(p.to_bits());
            }
            h.write_u64(g.clbit.map_or(u64::MAX, |c| c as u64));
        }
        h.finish()
    }
}

/// FNV-1a of a string; used to derive per-circuit seeds.
pub fn stable_hash(s: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(s.as_bytes());
    h.finish()
}

/// Formats the low `width` bits of `value` with bit 0 rightmost.
pub fn bitstring(value: u64, width: usize) -> String {
    (0..width)
        .rev()
        .map(|i| if value >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Inverse of [`bitstring`]; `None` on characters other than 0/1.
pub fn parse_bitstring(s: &str) -> Option<u64> {
    let mut v = 0u64;
    for c in s.chars() {
        v = v << 1
            | match c {
                '0' => 0,
                '1' => 1,
                _ => return None,
            };
    }
    Some(v)
}

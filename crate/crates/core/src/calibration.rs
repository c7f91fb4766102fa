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

//! Calibration snapshots and the quality-weighted hardware graph.
//!
//! A [`CalibrationSnapshot`] is the raw per-qubit / per-coupler record for a
//! device at one point in time. [`build_graph`] turns it into a
//! [`HardwareGraph`] that only contains functional hardware, with every
//! coupler weighted by the inverse of its two-qubit error rate.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Physical qubit label as it appears in the calibration data.
pub type Qubit = u32;

/// Regularisation added to every gate error before inversion.
pub const WEIGHT_EPSILON: f64 = 1e-6;

/// Default error level at or above which an operational coupler is flagged
/// as degraded (it stays in the graph with a tiny weight).
pub const DEFAULT_DEAD_THRESHOLD: f64 = 0.5;

/// Inverse-error edge weight.
#[inline]
pub fn edge_weight(gate_error: f64) -> f64 {
    1.0 / (gate_error + WEIGHT_EPSILON)
}

/// Unordered qubit pair, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub a: Qubit,
    pub b: Qubit,
}

impl Edge {
    pub fn new(u: Qubit, v: Qubit) -> Self {
        if u <= v {
            Edge { a: u, b: v }
        } else {
            Edge { a: v, b: u }
        }
    }

    pub fn contains(&self, q: Qubit) -> bool {
        self.a == q || self.b == q
    }

    pub fn other(&self, q: Qubit) -> Qubit {
        if self.a == q {
            self.b
        } else {
            self.a
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitProps {
    pub index: Qubit,
    pub t1_us: f64,
    pub t2_us: f64,
    pub readout_error: f64,
    #[serde(default = "default_true")]
    pub operational: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplerProps {
    pub q0: Qubit,
    pub q1: Qubit,
    pub gate_error: f64,
    #[serde(default = "default_true")]
    pub operational: bool,
}

impl CouplerProps {
    pub fn edge(&self) -> Edge {
        Edge::new(self.q0, self.q1)
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSnapshot {
    #[serde(rename = "device")]
    pub device_name: String,
    pub timestamp: String,
    pub qubits: Vec<QubitProps>,
    pub couplers: Vec<CouplerProps>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("malformed calibration JSON at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate qubit index {0}")]
    DuplicateQubit(Qubit),
    #[error("duplicate coupler {0}")]
    DuplicateCoupler(Edge),
    #[error("coupler ({q0},{q1}) references missing qubit {missing}")]
    UnknownQubit {
        q0: Qubit,
        q1: Qubit,
        missing: Qubit,
    },
    #[error("coupler ({0},{0}) joins a qubit to itself")]
    SelfLoop(Qubit),
    #[error("{field} = {value} is out of range for {owner}")]
    OutOfRange {
        owner: String,
        field: &'static str,
        value: f64,
    },
}

impl CalibrationSnapshot {
    /// Checks every snapshot invariant, returning the first offender.
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let mut seen = BTreeSet::new();
        for q in &self.qubits {
            if !seen.insert(q.index) {
                return Err(CalibrationError::DuplicateQubit(q.index));
            }
            let owner = || format!("qubit {}", q.index);
            if !(q.t1_us > 0.0 && q.t1_us.is_finite()) {
                return Err(CalibrationError::OutOfRange {
                    owner: owner(),
                    field: "t1_us",
                    value: q.t1_us,
                });
            }
            if !(q.t2_us > 0.0 && q.t2_us.is_finite()) {
                return Err(CalibrationError::OutOfRange {
                    owner: owner(),
                    field: "t2_us",
                    value: q.t2_us,
                });
            }
            if !(0.0..=1.0).contains(&q.readout_error) {
                return Err(CalibrationError::OutOfRange {
                    owner: owner(),
                    field: "readout_error",
                    value: q.readout_error,
                });
            }
        }
        let mut pairs = BTreeSet::new();
        for c in &self.couplers {
            if c.q0 == c.q1 {
                return Err(CalibrationError::SelfLoop(c.q0));
            }
            for q in [c.q0, c.q1] {
                if !seen.contains(&q) {
                    return Err(CalibrationError::UnknownQubit {
                        q0: c.q0,
                        q1: c.q1,
                        missing: q,
                    });
                }
            }
            if !pairs.insert(c.edge()) {
                return Err(CalibrationError::DuplicateCoupler(c.edge()));
            }
            if !(0.0..=1.0).contains(&c.gate_error) {
                return Err(CalibrationError::OutOfRange {
                    owner: format!("coupler {}", c.edge()),
                    field: "gate_error",
                    value: c.gate_error,
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serialization is infallible")
    }

    /// Marks the given couplers as failed. Unknown pairs are returned as an error.
    pub fn kill_couplers(&mut self, dead: &[Edge]) -> Result<(), Edge> {
        for e in dead {
            let c = self
                .couplers
                .iter_mut()
                .find(|c| c.edge() == *e)
                .ok_or(*e)?;
            c.operational = false;
        }
        Ok(())
    }

    /// Marks the given qubits as disabled. Unknown indices are returned as an error.
    pub fn kill_qubits(&mut self, dead: &[Qubit]) -> Result<(), Qubit> {
        for &i in dead {
            let q = self.qubits.iter_mut().find(|q| q.index == i).ok_or(i)?;
            q.operational = false;
        }
        Ok(())
    }
}

/// Parses and validates a snapshot. Unknown JSON fields are ignored.
pub fn parse_snapshot(text: &str) -> Result<CalibrationSnapshot, CalibrationError> {
    let snap: CalibrationSnapshot =
        serde_json::from_str(text).map_err(|e| CalibrationError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    snap.validate()?;
    Ok(snap)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeInfo {
    pub error: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct GraphOptions {
    /// Operational couplers with error at or above this are kept but flagged.
    pub dead_threshold: f64,
    /// Keep failed couplers (and gate_error = 1.0 couplers) with error forced
    /// to 1.0 instead of dropping them. Only used to model calibration-unaware
    /// baselines that do not know about failures.
    pub keep_failed: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            dead_threshold: DEFAULT_DEAD_THRESHOLD,
            keep_failed: false,
        }
    }
}

/// Weighted undirected graph over functional qubits and couplers.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HardwareGraph {
    readout: BTreeMap<Qubit, f64>,
    edges: BTreeMap<Edge, EdgeInfo>,
    adjacency: BTreeMap<Qubit, Vec<Qubit>>,
    degraded: Vec<Edge>,
}

/// Builds the hardware graph with default options.
pub fn build_graph(snap: &CalibrationSnapshot) -> HardwareGraph {
    build_graph_with(snap, &GraphOptions::default())
}

pub fn build_graph_with(snap: &CalibrationSnapshot, opts: &GraphOptions) -> HardwareGraph {
    let readout: BTreeMap<Qubit, f64> = snap
        .qubits
        .iter()
        .filter(|q| q.operational)
        .map(|q| (q.index, q.readout_error))
        .collect();
    let mut g = HardwareGraph {
        adjacency: readout.keys().map(|&q| (q, Vec::new())).collect(),
        readout,
        ..Default::default()
    };
    for c in &snap.couplers {
        if !(g.readout.contains_key(&c.q0) && g.readout.contains_key(&c.q1)) {
            continue;
        }
        let failed = !c.operational || c.gate_error >= 1.0;
        let error = match (failed, opts.keep_failed) {
            (true, false) => continue,
            (true, true) => 1.0,
            (false, _) => c.gate_error,
        };
        if error >= opts.dead_threshold {
            g.degraded.push(c.edge());
        }
        g.insert_edge(c.edge(), error);
    }
    g.finish();
    g
}

impl HardwareGraph {
    /// Builds a graph directly from readout errors and coupler errors.
    /// Couplers touching unknown vertices are ignored.
    pub fn from_parts(
        readout: impl IntoIterator<Item = (Qubit, f64)>,
        couplers: impl IntoIterator<Item = (Qubit, Qubit, f64)>,
    ) -> Self {
        let readout: BTreeMap<Qubit, f64> = readout.into_iter().collect();
        let mut g = HardwareGraph {
            adjacency: readout.keys().map(|&q| (q, Vec::new())).collect(),
            readout,
            ..Default::default()
        };
        for (u, v, err) in couplers {
            if u != v && g.readout.contains_key(&u) && g.readout.contains_key(&v) {
                g.insert_edge(Edge::new(u, v), err);
            }
        }
        g.finish();
        g
    }

    fn insert_edge(&mut self, e: Edge, error: f64) {
        let info = EdgeInfo {
            error,
            weight: edge_weight(error),
        };
        if self.edges.insert(e, info).is_none() {
            self.adjacency.get_mut(&e.a).unwrap().push(e.b);
            self.adjacency.get_mut(&e.b).unwrap().push(e.a);
        }
    }

    fn finish(&mut self) {
        for nbrs in self.adjacency.values_mut() {
            nbrs.sort_unstable();
        }
        self.degraded.sort_unstable();
    }

    pub fn vertex_count(&self) -> usize {
        self.readout.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readout.is_empty()
    }

    /// Vertices in ascending order.
    pub fn vertices(&self) -> impl Iterator<Item = Qubit> + '_ {
        self.readout.keys().copied()
    }

    pub fn contains(&self, q: Qubit) -> bool {
        self.readout.contains_key(&q)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Edge, EdgeInfo)> + '_ {
        self.edges.iter().map(|(e, i)| (*e, *i))
    }

    pub fn edge(&self, u: Qubit, v: Qubit) -> Option<EdgeInfo> {
        self.edges.get(&Edge::new(u, v)).copied()
    }

    pub fn has_edge(&self, u: Qubit, v: Qubit) -> bool {
        self.edges.contains_key(&Edge::new(u, v))
    }

    pub fn neighbors(&self, q: Qubit) -> &[Qubit] {
        self.adjacency.get(&q).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn readout_error(&self, q: Qubit) -> Option<f64> {
        self.readout.get(&q).copied()
    }

    pub fn weighted_degree(&self, q: Qubit) -> f64 {
        self.neighbors(q)
            .iter()
            .map(|&n| self.edges[&Edge::new(q, n)].weight)
            .sum()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.values().map(Vec::len).max().unwrap_or(0)
    }

    /// Operational couplers whose error is at or above the dead threshold.
    pub fn degraded(&self) -> &[Edge] {
        &self.degraded
    }

    /// Edges with both endpoints in `vertices`, ascending.
    pub fn edges_within(&self, vertices: &BTreeSet<Qubit>) -> Vec<Edge> {
        let mut out = Vec::new();
        for &v in vertices {
            for &n in self.neighbors(v) {
                if v < n && vertices.contains(&n) {
                    out.push(Edge::new(v, n));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Induced subgraph. Vertices absent from the graph are skipped.
    pub fn induced(&self, vertices: &BTreeSet<Qubit>) -> HardwareGraph {
        let readout = vertices
            .iter()
            .filter_map(|&v| self.readout.get(&v).map(|&r| (v, r)));
        let couplers = self
            .edges_within(vertices)
            .into_iter()
            .map(|e| (e.a, e.b, self.edges[&e].error));
        let mut g = HardwareGraph::from_parts(readout, couplers);
        g.degraded = self
            .degraded
            .iter()
            .filter(|e| vertices.contains(&e.a) && vertices.contains(&e.b))
            .copied()
            .collect();
        g
    }

    /// True if `vertices` is nonempty, fully contained in the graph, and
    /// induces a connected subgraph.
    pub fn is_connected_subset(&self, vertices: &BTreeSet<Qubit>) -> bool {
        let Some(&start) = vertices.iter().next() else {
            return false;
        };
        if !vertices.iter().all(|v| self.contains(*v)) {
            return false;
        }
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &n in self.neighbors(v) {
                if vertices.contains(&n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen.len() == vertices.len()
    }

    pub fn is_connected(&self) -> bool {
        let all: BTreeSet<Qubit> = self.vertices().collect();
        self.is_connected_subset(&all)
    }

    /// Connected components of the subgraph induced by `vertices`, each
    /// sorted, ordered by smallest member.
    pub fn components_of(&self, vertices: &BTreeSet<Qubit>) -> Vec<Vec<Qubit>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &s in vertices {
            if !self.contains(s) || !seen.insert(s) {
                continue;
            }
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &n in self.neighbors(v) {
                    if vertices.contains(&n) && seen.insert(n) {
                        comp.push(n);
                        queue.push_back(n);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

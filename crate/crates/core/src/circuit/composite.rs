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

//! One composite program from several routed tenant circuits.
//!
//! Segment `s` owns composite bits `offset_s .. offset_s + clbits_s`. Within
//! a segment, slot `r` holds the readout of the `r`-th measured physical
//! qubit in ascending order, which is what a device-level job returns.
//! Demultiplexing maps each slot back through the inverse of the final
//! permutation to the logical qubit and its classical bit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::route::RoutedCircuit;
use crate::allocator::Allocation;
use crate::calibration::Qubit;

pub type Counts = BTreeMap<String, u64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompositeError {
    #[error("segments {a} and {b} both use qubit {qubit}")]
    Overlap { a: String, b: String, qubit: Qubit },
    #[error("circuit id {0} appears twice")]
    DuplicateId(String),
    #[error("qubit {qubit} outside a device of {device_size}")]
    OutsideDevice { qubit: Qubit, device_size: usize },
    #[error("key `{key}` has length {len}, expected {expected}")]
    KeyLength {
        key: String,
        len: usize,
        expected: usize,
    },
    #[error("key `{0}` is not a bitstring")]
    BadKey(String),
    #[error("no counts for segment {0}")]
    MissingTenant(String),
    #[error("tenant shot totals differ ({0} vs {1})")]
    ShotMismatch(u64, u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub circuit_id: String,
    pub routed: RoutedCircuit,
    pub clbit_offset: usize,
}

impl Segment {
    /// `slots[r]` is the clbit read by composite slot `r`, if any.
    pub fn slots(&self) -> Vec<Option<usize>> {
        let r = &self.routed;
        let clbit_of: BTreeMap<usize, usize> = r.measures.iter().copied().collect();
        let logical_at: BTreeMap<Qubit, usize> =
            r.pi.iter().enumerate().map(|(l, &p)| (p, l)).collect();
        let mut slots = vec![None; r.num_clbits()];
        for (slot, p) in r.measured_physical().into_iter().enumerate() {
            slots[slot] = Some(clbit_of[&logical_at[&p]]);
        }
        slots
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeCircuit {
    pub segments: Vec<Segment>,
    pub total_qubits: usize,
    pub total_clbits: usize,
}

/// Concatenates tenant circuits, ordered by circuit id, with cumulative
/// classical offsets.
pub fn combine(
    parts: Vec<(Allocation, RoutedCircuit)>,
    device_size: usize,
) -> Result<CompositeCircuit, CompositeError> {
    let mut parts: Vec<(String, RoutedCircuit)> =
        parts.into_iter().map(|(a, r)| (a.circuit_id, r)).collect();
    parts.sort_by(|a, b| a.0.cmp(&b.0));
    let mut owner: BTreeMap<Qubit, String> = BTreeMap::new();
    let mut segments = Vec::with_capacity(parts.len());
    let mut offset = 0;
    for (id, routed) in parts {
        if segments.iter().any(|s: &Segment| s.circuit_id == id) {
            return Err(CompositeError::DuplicateId(id));
        }
        for &q in &routed.footprint {
            if q as usize >= device_size {
                return Err(CompositeError::OutsideDevice {
                    qubit: q,
                    device_size,
                });
            }
            if let Some(prev) = owner.insert(q, id.clone()) {
                return Err(CompositeError::Overlap {
                    a: prev,
                    b: id,
                    qubit: q,
                });
            }
        }
        let width = routed.num_clbits();
        segments.push(Segment {
            circuit_id: id,
            routed,
            clbit_offset: offset,
        });
        offset += width;
    }
    Ok(CompositeCircuit {
        segments,
        total_qubits: device_size,
        total_clbits: offset,
    })
}

fn bits(key: &str) -> Result<Vec<bool>, CompositeError> {
    key.chars()
        .rev()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(CompositeError::BadKey(key.to_string())),
        })
        .collect()
}

fn key_of(bits: &[bool]) -> String {
    bits.iter()
        .rev()
        .map(|&b| if b { '1' } else { '0' })
        .collect()
}

/// Splits composite counts into per-tenant counts in logical clbit order.
pub fn demultiplex(
    counts: &Counts,
    composite: &CompositeCircuit,
) -> Result<BTreeMap<String, Counts>, CompositeError> {
    let slots: Vec<Vec<Option<usize>>> = composite.segments.iter().map(Segment::slots).collect();
    let mut out: BTreeMap<String, Counts> = composite
        .segments
        .iter()
        .map(|s| (s.circuit_id.clone(), Counts::new()))
        .collect();
    for (key, &n) in counts {
        if key.len() != composite.total_clbits {
            return Err(CompositeError::KeyLength {
                key: key.clone(),
                len: key.len(),
                expected: composite.total_clbits,
            });
        }
        let raw = bits(key)?;
        for (seg, map) in composite.segments.iter().zip(&slots) {
            let mut local = vec![false; seg.routed.num_clbits()];
            for (r, c) in map.iter().enumerate() {
                if let Some(c) = c {
                    local[*c] = raw[seg.clbit_offset + r];
                }
            }
            *out.get_mut(&seg.circuit_id)
                .unwrap()
                .entry(key_of(&local))
                .or_insert(0) += n;
        }
    }
    Ok(out)
}

/// Inverse of [`demultiplex`]: pairs the tenants' outcomes shot by shot (in
/// key order) and writes each into its physical slots. All tenants must
/// report the same number of shots.
pub fn multiplex(
    tenants: &BTreeMap<String, Counts>,
    composite: &CompositeCircuit,
) -> Result<Counts, CompositeError> {
    let mut total: Option<u64> = None;
    let mut streams = Vec::with_capacity(composite.segments.len());
    for seg in &composite.segments {
        let counts = tenants
            .get(&seg.circuit_id)
            .ok_or_else(|| CompositeError::MissingTenant(seg.circuit_id.clone()))?;
        let shots: u64 = counts.values().sum();
        match total {
            Some(t) if t != shots => return Err(CompositeError::ShotMismatch(t, shots)),
            _ => total = Some(shots),
        }
        for key in counts.keys() {
            if key.len() != seg.routed.num_clbits() {
                return Err(CompositeError::KeyLength {
                    key: key.clone(),
                    len: key.len(),
                    expected: seg.routed.num_clbits(),
                });
            }
        }
        streams.push(counts.iter().peekable());
    }
    let slots: Vec<Vec<Option<usize>>> = composite.segments.iter().map(Segment::slots).collect();
    let mut remaining: Vec<u64> = streams
        .iter_mut()
        .map(|s| s.peek().map_or(0, |(_, &n)| n))
        .collect();
    let mut out = Counts::new();
    let mut left = total.unwrap_or(0);
    while left > 0 {
        // emit the largest run on which every tenant's current key is stable
        let run = *remaining.iter().min().unwrap();
        let mut raw = vec![false; composite.total_clbits];
        for (i, seg) in composite.segments.iter().enumerate() {
            let (key, _) = streams[i].peek().unwrap();
            let local = bits(key)?;
            for (r, c) in slots[i].iter().enumerate() {
                if let Some(c) = c {
                    raw[seg.clbit_offset + r] = local[*c];
                }
            }
        }
        *out.entry(key_of(&raw)).or_insert(0) += run;
        left -= run;
        for (i, rem) in remaining.iter_mut().enumerate() {
            *rem -= run;
            if *rem == 0 {
                streams[i].next();
                *rem = streams[i].peek().map_or(0, |(_, &n)| n);
            }
        }
    }
    Ok(out)
}

/// Qubits of all segments; segments never share one.
pub fn occupied(composite: &CompositeCircuit) -> BTreeSet<Qubit> {
    composite
        .segments
        .iter()
        .flat_map(|s| s.routed.footprint.iter().copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::ir::CircuitIR;

    fn routed(footprint: Vec<Qubit>, pi: Vec<Qubit>) -> RoutedCircuit {
        let n = pi.len();
        RoutedCircuit {
            base: CircuitIR::new("t", 16, n),
            footprint,
            initial_layout: pi.clone(),
            pi,
            swap_count: 0,
            depth: 1,
            measures: (0..n).map(|l| (l, l)).collect(),
        }
    }

    fn alloc(id: &str) -> Allocation {
        Allocation {
            circuit_id: id.into(),
            region_ids: vec![0],
            physical_vertices: Vec::new(),
            pi: Vec::new(),
            composed: false,
            bridge_edges: Vec::new(),
            fitness: 1.0,
        }
    }

    fn counts(pairs: &[(&str, u64)]) -> Counts {
        pairs.iter().map(|&(k, n)| (k.to_string(), n)).collect()
    }

    #[test]
    fn offsets_are_cumulative() {
        let c = combine(
            vec![
                (alloc("c"), routed(vec![5, 6, 7, 8], vec![5, 6, 7, 8])),
                (alloc("a"), routed(vec![0, 1], vec![0, 1])),
                (alloc("b"), routed(vec![2, 3, 4], vec![2, 3, 4])),
            ],
            16,
        )
        .unwrap();
        let offs: Vec<_> = c
            .segments
            .iter()
            .map(|s| (s.circuit_id.as_str(), s.clbit_offset))
            .collect();
        assert_eq!(offs, vec![("a", 0), ("b", 2), ("c", 5)]);
        assert_eq!(c.total_clbits, 9);
    }

    #[test]
    fn overlapping_footprints_rejected() {
        let e = combine(
            vec![
                (alloc("a"), routed(vec![0, 1], vec![0, 1])),
                (alloc("b"), routed(vec![1, 2], vec![1, 2])),
            ],
            4,
        )
        .unwrap_err();
        assert!(matches!(e, CompositeError::Overlap { qubit: 1, .. }));
    }

    #[test]
    fn slicing_with_identity_pi() {
        let c = combine(
            vec![
                (alloc("A"), routed(vec![0, 1], vec![0, 1])),
                (alloc("B"), routed(vec![2, 3], vec![2, 3])),
            ],
            4,
        )
        .unwrap();
        let d = demultiplex(&counts(&[("1001", 7)]), &c).unwrap();
        assert_eq!(d["A"], counts(&[("01", 7)]));
        assert_eq!(d["B"], counts(&[("10", 7)]));
    }

    #[test]
    fn swapped_pi_exchanges_positions() {
        // logical 0 ends on physical 1, logical 1 on physical 0
        let c = combine(vec![(alloc("A"), routed(vec![0, 1], vec![1, 0]))], 2).unwrap();
        let d = demultiplex(&counts(&[("01", 3), ("11", 1)]), &c).unwrap();
        assert_eq!(d["A"], counts(&[("10", 3), ("11", 1)]));
    }

    #[test]
    fn single_segment_is_identity() {
        let c = combine(vec![(alloc("A"), routed(vec![3, 4, 5], vec![3, 4, 5]))], 8).unwrap();
        assert_eq!(c.segments[0].clbit_offset, 0);
        let raw = counts(&[("011", 5), ("100", 2)]);
        assert_eq!(demultiplex(&raw, &c).unwrap()["A"], raw);
    }

    #[test]
    fn round_trip() {
        let c = combine(
            vec![
                (alloc("x"), routed(vec![0, 1, 2], vec![2, 0, 1])),
                (alloc("y"), routed(vec![3, 4], vec![4, 3])),
            ],
            5,
        )
        .unwrap();
        let tenants: BTreeMap<String, Counts> = [
            (
                "x".to_string(),
                counts(&[("000", 3), ("101", 4), ("110", 1)]),
            ),
            ("y".to_string(), counts(&[("01", 6), ("10", 2)])),
        ]
        .into();
        let raw = multiplex(&tenants, &c).unwrap();
        assert_eq!(raw.values().sum::<u64>(), 8);
        assert_eq!(demultiplex(&raw, &c).unwrap(), tenants);
    }

    #[test]
    fn malformed_keys() {
        let c = combine(vec![(alloc("A"), routed(vec![0, 1], vec![0, 1]))], 2).unwrap();
        assert!(matches!(
            demultiplex(&counts(&[("011", 1)]), &c),
            Err(CompositeError::KeyLength { expected: 2, .. })
        ));
        assert!(matches!(
            demultiplex(&counts(&[("0x", 1)]), &c),
            Err(CompositeError::BadKey(_))
        ));
    }
}

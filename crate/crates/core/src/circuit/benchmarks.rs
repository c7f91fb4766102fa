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

//! The bundled 29-circuit benchmark workload (2 to 10 qubits).

use super::ir::CircuitIR;
use super::qasm::parse_qasm_named;
use crate::allocator::AllocationRequest;

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        [$(($name, include_str!(concat!("../../fixtures/qasm/", $name, ".qasm")))),*]
    };
}

/// `(name, QASM source)` in workload arrival order.
pub const BENCHMARKS: [(&str, &str); 29] = bundled![
    "deutsch_n2",
    "grover_n2",
    "iswap_n2",
    "quantumwalks_n2",
    "dnn_n2",
    "linearsolver_n3",
    "teleportation_n3",
    "wstate_n3",
    "qaoa_n3",
    "basis_change_n3",
    "fredkin_n3",
    "toffoli_n3",
    "bell_n4",
    "cat_state_n4",
    "hs4_n4",
    "variational_n4",
    "vqe_n4",
    "basis_trotter_n4",
    "adder_n4",
    "ghz_n4",
    "qrng_n4",
    "qft_n4",
    "lpn_n5",
    "qec_en_n5",
    "error_correctiond3_n5",
    "simon_n6",
    "bv_n7",
    "bb84_n8",
    "ising_n10",
];

/// Parses every bundled circuit.
pub fn benchmark_suite() -> Vec<CircuitIR> {
    BENCHMARKS
        .iter()
        .map(|(name, text)| {
            parse_qasm_named(name, text).unwrap_or_else(|e| panic!("bundled {name}: {e}"))
        })
        .collect()
}

/// One request per circuit, named after the circuit.
pub fn requests(circuits: &[CircuitIR]) -> Vec<crate::allocator::AllocationRequest> {
    circuits
        .iter()
        .map(|c| AllocationRequest::new(c.name.clone(), c.num_qubits))
        .collect()
}

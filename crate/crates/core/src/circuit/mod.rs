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

//! Circuit IR, QASM reader, exact simulation, routing and composition.

pub mod benchmarks;
pub mod composite;
pub mod ir;
pub mod qasm;
pub mod route;
pub mod statevector;

pub use composite::{combine, demultiplex, multiplex, CompositeCircuit, Counts, Segment};
pub use ir::{CircuitIR, Gate, GateKind};
pub use qasm::{parse_qasm, parse_qasm_named, QasmError};
pub use route::{initial_layout, route, route_with_layout, RouteCache, RouteError, RoutedCircuit};
pub use statevector::{ideal_distribution, Distribution, StateVector, MAX_SIM_QUBITS};

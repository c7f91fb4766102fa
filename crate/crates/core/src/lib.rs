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

//! Calibration-aware virtualization of a quantum processor.
//!
//! The pipeline runs offline discovery ([`calibration`] → [`community`] →
//! [`regions`]) once per calibration snapshot, then serves tenants online
//! ([`allocator`]), compiles their circuits onto the allocated footprint
//! ([`circuit`]) and executes them under a calibration-derived noise model
//! ([`noisesim`]).

pub mod allocator;
pub mod calibration;
pub mod circuit;
pub mod community;
pub mod config;
pub mod heavy_hex;
pub mod noisesim;
pub mod regions;

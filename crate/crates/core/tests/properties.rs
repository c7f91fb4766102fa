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

use std::collections::BTreeSet;

use proptest::prelude::*;

use qvirt::allocator::{schedule_batches, AllocError, AllocationRequest, AllocationState};
use qvirt::calibration::build_graph;
use qvirt::config::Config;
use qvirt::heavy_hex::{generate_heavy_hex, ErrorProfile};
use qvirt::regions::{discover, select_pool, Region, RegionScores};

fn state(seed: u64) -> AllocationState {
    let g = build_graph(&generate_heavy_hex(
        3,
        2,
        &ErrorProfile::kingston_like(seed),
    ));
    let pool = discover(&g, seed, &Config::default()).unwrap().pool;
    AllocationState::new(g, pool, &Config::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Busy regions never overlap and every allocation stays connected.
    #[test]
    fn allocate_release_keeps_state_consistent(
        seed in 0u64..4,
        ops in prop::collection::vec((1usize..9, any::<bool>()), 1..40),
    ) {
        let mut st = state(seed);
        let mut live: Vec<String> = Vec::new();
        for (i, (width, release)) in ops.into_iter().enumerate() {
            if release && !live.is_empty() {
                let id = live.remove(i % live.len());
                st.release(&id).unwrap();
            } else {
                let id = format!("c{i}");
                match st.allocate(&AllocationRequest::new(id.clone(), width)) {
                    Ok(a) => {
                        prop_assert!(a.physical_vertices.len() >= width);
                        prop_assert!(st.graph().is_connected_subset(&a.vertex_set()));
                        live.push(id);
                    }
                    Err(AllocError::NoFeasibleRegion { .. }
                        | AllocError::CompositionFailed(_)
                        | AllocError::WidthExceedsHardware { .. }) => {}
                    Err(e) => prop_assert!(false, "unexpected {e}"),
                }
            }
            prop_assert!(st.is_consistent());
        }
    }

    /// Every request is either admitted exactly once or reported infeasible.
    #[test]
    fn schedule_accounts_for_every_circuit(
        seed in 0u64..4,
        widths in prop::collection::vec(1usize..12, 1..30),
        cap in 1usize..8,
    ) {
        let mut st = state(seed);
        let work: Vec<_> = widths.iter().enumerate().map(|(i, &w)| AllocationRequest::new(format!("c{i}"), w)).collect();
        let rep = schedule_batches(&mut st, &work, cap);
        let mut seen: BTreeSet<&str> = rep.infeasible.iter().map(String::as_str).collect();
        for b in &rep.batches {
            prop_assert!(b.admitted.len() <= cap);
            for id in &b.admitted {
                prop_assert!(seen.insert(id.as_str()), "{id} admitted twice");
            }
        }
        prop_assert_eq!(seen.len(), work.len());
        prop_assert!(rep.jobs_used >= (work.len() - rep.infeasible.len()).div_ceil(cap));
    }

    /// Greedy selection returns pairwise disjoint candidates.
    #[test]
    fn selected_pool_is_disjoint(
        cands in prop::collection::vec((prop::collection::btree_set(0u32..30, 2..8), 0.0f64..1.0), 1..15),
    ) {
        let regions: Vec<Region> = cands
            .into_iter()
            .enumerate()
            .map(|(id, (vs, q))| Region {
                id,
                vertices: vs.into_iter().collect(),
                edges: Vec::new(),
                scores: RegionScores { s_conn: 0.0, s_gate: 0.0, s_ro: 0.0, s_unif: 0.0, q },
            })
            .collect();
        let pool = select_pool(regions);
        prop_assert!(pool.is_consistent());
        prop_assert!(!pool.regions.is_empty());
    }
}

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

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qvirt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qvirt"))
        .args(args)
        .output()
        .expect("spawn qvirt")
}

fn ok(args: &[&str]) -> Output {
    let out = qvirt(args);
    assert!(
        out.status.success(),
        "qvirt {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn json(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Temp dir with a 156-qubit snapshot in it. Seed 1 puts coupler (4,5)
/// inside a region.
fn fixture() -> (TempDir, String) {
    let dir = TempDir::new().unwrap();
    let snap = p(dir.path(), "snap.json");
    ok(&["gen-fixture", "--out", &snap, "--seed", "1"]);
    (dir, snap)
}

fn region_has_edge(pool: &Value, a: u64, b: u64) -> bool {
    pool["regions"].as_array().unwrap().iter().any(|r| {
        r["edges"].as_array().unwrap().iter().any(|e| {
            let (x, y) = (e["a"].as_u64().unwrap(), e["b"].as_u64().unwrap());
            (x, y) == (a, b) || (x, y) == (b, a)
        })
    })
}

#[test]
fn run_writes_one_entry_per_circuit() {
    let (dir, snap) = fixture();
    let report = p(dir.path(), "out/run.json");
    ok(&[
        "run",
        "--calibration",
        &snap,
        "--batch-cap",
        "4",
        "--shots",
        "64",
        "--report",
        &report,
    ]);
    let rep = json(&report);
    assert_eq!(rep["schema_version"], 1);
    assert_eq!(rep["runs"][0]["circuits"].as_array().unwrap().len(), 29);
    assert_eq!(rep["runs"][0]["jobs_used"], 8);
    assert_eq!(rep["baseline"].as_array().unwrap().len(), 29);

    let md = String::from_utf8(ok(&["report", "--in", &report, "--format", "md"]).stdout).unwrap();
    assert!(
        md.contains("| Batch | Jobs | CostReduction | MeanFidelity |"),
        "{md}"
    );
    assert!(md.contains("| 4 | 8 | 72% |"), "{md}");
    assert!(md.contains("Wins"));
    let csv =
        String::from_utf8(ok(&["report", "--in", &report, "--format", "csv"]).stdout).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("4,8,72%,")), "{csv}");
}

#[test]
fn dead_coupler_never_enters_a_region() {
    let (dir, snap) = fixture();
    let pool = p(dir.path(), "pool.json");
    ok(&["discover", "--calibration", &snap, "--out", &pool]);
    assert!(
        region_has_edge(&json(&pool), 4, 5),
        "fixture should use (4,5)"
    );
    let killed = p(dir.path(), "killed.json");
    ok(&[
        "inject-defects",
        "--calibration",
        &snap,
        "--kill-coupler",
        "4,5",
        "--out",
        &killed,
    ]);
    ok(&["discover", "--calibration", &killed, "--out", &pool]);
    assert!(!region_has_edge(&json(&pool), 4, 5));
}

#[test]
fn injection_commutes_with_editing_the_file() {
    let (dir, snap) = fixture();
    let injected = p(dir.path(), "injected.json");
    ok(&[
        "inject-defects",
        "--calibration",
        &snap,
        "--kill-coupler",
        "10,11",
        "--kill-qubit",
        "40",
        "--out",
        &injected,
    ]);
    let mut edited = json(&snap);
    for c in edited["couplers"].as_array_mut().unwrap() {
        let pair = (c["q0"].as_u64().unwrap(), c["q1"].as_u64().unwrap());
        if pair == (10, 11) || pair == (11, 10) {
            c["operational"] = Value::Bool(false);
        }
    }
    for q in edited["qubits"].as_array_mut().unwrap() {
        if q["index"] == 40 {
            q["operational"] = Value::Bool(false);
        }
    }
    let by_hand = p(dir.path(), "by_hand.json");
    std::fs::write(&by_hand, serde_json::to_string(&edited).unwrap()).unwrap();
    let (a, b) = (p(dir.path(), "a.json"), p(dir.path(), "b.json"));
    ok(&["discover", "--calibration", &injected, "--out", &a]);
    ok(&["discover", "--calibration", &by_hand, "--out", &b]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn commands_are_idempotent() {
    let (dir, snap) = fixture();
    let run = |tag: &str| -> Vec<Vec<u8>> {
        let pool = p(dir.path(), &format!("pool{tag}.json"));
        let sched = p(dir.path(), &format!("sched{tag}.json"));
        let rep = p(dir.path(), &format!("run{tag}.json"));
        let gen = p(dir.path(), &format!("gen{tag}.json"));
        ok(&[
            "gen-fixture",
            "--profile",
            "two-cluster",
            "--seed",
            "5",
            "--out",
            &gen,
        ]);
        ok(&[
            "discover",
            "--calibration",
            &snap,
            "--seed",
            "9",
            "--out",
            &pool,
        ]);
        ok(&[
            "schedule",
            "--pool",
            &pool,
            "--batch-cap",
            "3,7",
            "--report",
            &sched,
        ]);
        ok(&[
            "run",
            "--pool",
            &pool,
            "--batch-cap",
            "6",
            "--shots",
            "32",
            "--report",
            &rep,
        ]);
        [gen, pool, sched, rep]
            .iter()
            .map(|f| std::fs::read(f).unwrap())
            .collect()
    };
    assert_eq!(run("1"), run("2"));
}

#[test]
fn workload_directory_and_manifest() {
    let (dir, snap) = fixture();
    let wl = dir.path().join("wl");
    ok(&[
        "gen-fixture",
        "--out",
        &p(dir.path(), "unused.json"),
        "--workload-dir",
        &wl.to_string_lossy(),
    ]);
    let pool = p(dir.path(), "pool.json");
    ok(&["discover", "--calibration", &snap, "--out", &pool]);
    let sched = p(dir.path(), "sched.json");
    ok(&[
        "schedule",
        "--pool",
        &pool,
        "--workload",
        &wl.to_string_lossy(),
        "--batch-cap",
        "10",
        "--report",
        &sched,
    ]);
    assert_eq!(json(&sched)["entries"][0]["total_circuits"], 29);

    let manifest: PathBuf = dir.path().join("m.json");
    std::fs::write(
        &manifest,
        r#"{"circuits": [{"path": "wl/ghz_n4.qasm"}, {"path": "wl/bell_n4.qasm", "name": "b"}]}"#,
    )
    .unwrap();
    ok(&[
        "schedule",
        "--pool",
        &pool,
        "--workload",
        &manifest.to_string_lossy(),
        "--batch-cap",
        "2",
        "--report",
        &sched,
    ]);
    let rep = json(&sched);
    assert_eq!(
        rep["entries"][0]["batches"][0]["admitted"],
        serde_json::json!(["ghz_n4", "b"])
    );
}

#[test]
fn exit_codes() {
    let (dir, snap) = fixture();
    assert_eq!(
        qvirt(&["discover", "--calibration", &snap, "--bogus"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(qvirt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qvirt(&["--help"]).status.code(), Some(0));

    let bad = p(dir.path(), "bad.toml");
    std::fs::write(
        &bad,
        "[score_weights]\nconn = 0.5\ngate = 0.5\nreadout = 0.5\nuniformity = 0.5\n",
    )
    .unwrap();
    let out = qvirt(&[
        "discover",
        "--calibration",
        &snap,
        "--config",
        &bad,
        "--out",
        &p(dir.path(), "x.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sum"));

    let broken = p(dir.path(), "broken.json");
    std::fs::write(&broken, "{\"device\": 3").unwrap();
    assert_eq!(
        qvirt(&[
            "discover",
            "--calibration",
            &broken,
            "--out",
            &p(dir.path(), "y.json")
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        qvirt(&[
            "inject-defects",
            "--calibration",
            &snap,
            "--kill-coupler",
            "0,100",
            "--out",
            &p(dir.path(), "z.json")
        ])
        .status
        .code(),
        Some(1)
    );

    // a 20-qubit circuit cannot fit a 16-qubit chip: outputs written, exit 2
    let small = p(dir.path(), "small.json");
    ok(&["gen-fixture", "--rows", "1", "--cols", "1", "--out", &small]);
    let pool = p(dir.path(), "pool.json");
    ok(&["discover", "--calibration", &small, "--out", &pool]);
    let wide = p(dir.path(), "wide.qasm");
    std::fs::write(
        &wide,
        "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[20];\ncreg c[20];\nh q;\nmeasure q -> c;\n",
    )
    .unwrap();
    let sched = p(dir.path(), "sched.json");
    assert_eq!(
        qvirt(&[
            "schedule",
            "--pool",
            &pool,
            "--workload",
            &wide,
            "--batch-cap",
            "1",
            "--report",
            &sched
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        json(&sched)["entries"][0]["infeasible"],
        serde_json::json!(["wide"])
    );
}

#[test]
fn toml_config_overrides_defaults() {
    let (dir, snap) = fixture();
    let cfg = p(dir.path(), "cfg.toml");
    std::fs::write(&cfg, "seed = 11\nmin_region_size = 4\n").unwrap();
    let pool = p(dir.path(), "pool.json");
    ok(&[
        "discover",
        "--calibration",
        &snap,
        "--config",
        &cfg,
        "--out",
        &pool,
    ]);
    let v = json(&pool);
    assert_eq!(v["seed"], 11);
    assert!(v["regions"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["vertices"].as_array().unwrap().len() >= 4));
}

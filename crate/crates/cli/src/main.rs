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

//! `qvirt` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 when every
//! output was written but some circuits could not be placed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qvirt::allocator::{schedule_batches, AllocationState, BatchReport};
use qvirt::calibration::{
    build_graph_with, parse_snapshot, CalibrationSnapshot, Edge, GraphOptions, Qubit,
};
use qvirt::circuit::benchmarks::{benchmark_suite, requests, BENCHMARKS};
use qvirt::circuit::{parse_qasm_named, CircuitIR};
use qvirt::config::Config;
use qvirt::heavy_hex::{generate_heavy_hex, ErrorProfile};
use qvirt::noisesim::experiment::{
    mean_std, run_suite, win_loss, ExperimentReport, Testbed, SCHEMA_VERSION,
};
use qvirt::regions::{discover, DiscoveryStats, Region};

#[derive(Parser)]
#[command(
    name = "qvirt",
    version,
    about = "Calibration-aware region virtualization for quantum processors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic heavy-hex calibration snapshot.
    GenFixture(GenFixtureArgs),
    /// Discover the region pool of a calibration snapshot.
    Discover(DiscoverArgs),
    /// Batch a workload onto a region pool without simulating it.
    Schedule(ScheduleArgs),
    /// Schedule, route and simulate a workload; writes an experiment report.
    Run(RunArgs),
    /// Render an experiment report as tables.
    Report(ReportArgs),
    /// Mark couplers or qubits of a snapshot as failed.
    InjectDefects(InjectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Kingston,
    TwoCluster,
    Uniform,
}

#[derive(clap::Args)]
struct GenFixtureArgs {
    #[arg(long, value_enum, default_value = "kingston")]
    profile: Profile,
    /// Hexagon rows; 7 x 3 gives 156 qubits.
    #[arg(long, default_value_t = 7)]
    rows: usize,
    #[arg(long, default_value_t = 3)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Low and high gate error of the two-cluster profile.
    #[arg(long, default_value_t = 0.003)]
    low: f64,
    #[arg(long, default_value_t = 0.03)]
    high: f64,
    /// Spatial zones of the two-cluster profile.
    #[arg(long, default_value_t = 2)]
    zones: usize,
    /// Mean gate error of the uniform profile.
    #[arg(long, default_value_t = 0.014)]
    mean: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the bundled benchmark circuits here as .qasm files.
    #[arg(long)]
    workload_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Config file (.toml or .json) overriding the default weights.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct DiscoverArgs {
    #[arg(long)]
    calibration: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ScheduleArgs {
    #[arg(long)]
    pool: PathBuf,
    /// Directory of .qasm files, a .qasm file, a manifest .json, or
    /// `bundled` for the built-in 29-circuit suite.
    #[arg(long, default_value = "bundled")]
    workload: String,
    /// Comma-separated batch caps.
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,10,15")]
    batch_cap: Vec<usize>,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    report: PathBuf,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Pool written by `discover`; used as is.
    #[arg(
        long,
        conflicts_with = "calibration",
        required_unless_present = "calibration"
    )]
    pool: Option<PathBuf>,
    /// Snapshot to discover a fresh pool from.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value = "bundled")]
    workload: String,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,10,15")]
    batch_cap: Vec<usize>,
    /// Shots per circuit; overrides the config file.
    #[arg(long)]
    shots: Option<usize>,
    /// Skip the full-chip baseline.
    #[arg(long)]
    no_baseline: bool,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(clap::Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    /// Fidelity difference counted as a tie in the win/loss tally.
    #[arg(long, default_value_t = 0.01)]
    tolerance: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct InjectArgs {
    #[arg(long)]
    calibration: PathBuf,
    /// Coupler to fail, as `a,b`. Repeatable.
    #[arg(long, value_parser = parse_pair)]
    kill_coupler: Vec<Edge>,
    /// Qubit to disable. Repeatable.
    #[arg(long)]
    kill_qubit: Vec<Qubit>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> Result<Edge, String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let a: Qubit = a.trim().parse().map_err(|_| format!("bad qubit `{a}`"))?;
    let b: Qubit = b.trim().parse().map_err(|_| format!("bad qubit `{b}`"))?;
    if a == b {
        return Err(format!("coupler ({a},{b}) joins a qubit to itself"));
    }
    Ok(Edge::new(a, b))
}

/// Region pool as written by `discover`. The snapshot travels with it so
/// later stages rebuild the exact graph the pool was found on.
#[derive(Serialize, Deserialize)]
struct PoolFile {
    schema_version: u32,
    device: String,
    seed: u64,
    config: Config,
    stats: DiscoveryStats,
    regions: Vec<Region>,
    uncovered: Vec<Qubit>,
    calibration: CalibrationSnapshot,
}

#[derive(Serialize)]
struct ScheduleEntry {
    #[serde(flatten)]
    report: BatchReport,
    cost_reduction: f64,
}

#[derive(Serialize)]
struct ScheduleFile {
    schema_version: u32,
    device: String,
    entries: Vec<ScheduleEntry>,
}

#[derive(Deserialize)]
struct Manifest {
    circuits: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct ManifestEntry {
    path: PathBuf,
    name: Option<String>,
}

/// Outcome of a command that completed.
enum Outcome {
    Done,
    Infeasible(usize),
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn load_snapshot(path: &Path) -> Result<CalibrationSnapshot> {
    parse_snapshot(&read(path)?).with_context(|| format!("invalid calibration {}", path.display()))
}

fn load_config(common: &CommonArgs) -> Result<Config> {
    let mut cfg = match &common.config {
        None => Config::default(),
        Some(p) => {
            let text = read(p)?;
            if p.extension().is_some_and(|e| e == "toml") {
                toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?
            } else {
                serde_json::from_str(&text)
                    .with_context(|| format!("invalid config {}", p.display()))?
            }
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate().context("invalid config")?;
    Ok(cfg)
}

/// The pool's own config unless a config file is given; `--seed` wins.
fn pool_config(pool: &PoolFile, common: &CommonArgs) -> Result<Config> {
    let mut cfg = if common.config.is_some() {
        load_config(common)?
    } else {
        pool.config.clone()
    };
    cfg.seed = common.seed.unwrap_or(pool.seed);
    cfg.validate().context("invalid config")?;
    Ok(cfg)
}

fn load_pool(path: &Path) -> Result<PoolFile> {
    let pool: PoolFile = serde_json::from_str(&read(path)?)
        .with_context(|| format!("invalid pool {}", path.display()))?;
    if pool.schema_version != SCHEMA_VERSION {
        bail!(
            "pool schema {} is not supported (expected {SCHEMA_VERSION})",
            pool.schema_version
        );
    }
    pool.calibration.validate().context("pool calibration")?;
    Ok(pool)
}

fn parse_file(path: &Path, name: Option<String>) -> Result<CircuitIR> {
    let name = name.unwrap_or_else(|| {
        path.file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned()
    });
    parse_qasm_named(&name, &read(path)?).with_context(|| format!("in {}", path.display()))
}

/// Loads a workload in arrival order.
fn load_workload(spec: &str) -> Result<Vec<CircuitIR>> {
    if spec == "bundled" {
        return Ok(benchmark_suite());
    }
    let path = Path::new(spec);
    let circuits = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("listing {spec}"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "qasm"))
            .collect();
        files.sort();
        files
            .iter()
            .map(|f| parse_file(f, None))
            .collect::<Result<Vec<_>>>()?
    } else if path.extension().is_some_and(|e| e == "json") {
        let m: Manifest = serde_json::from_str(&read(path)?)
            .with_context(|| format!("invalid manifest {spec}"))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.circuits
            .into_iter()
            .map(|e| parse_file(&base.join(&e.path), e.name))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![parse_file(path, None)?]
    };
    if circuits.is_empty() {
        bail!("workload {spec} has no circuits");
    }
    let mut names: Vec<&str> = circuits.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        bail!("workload has two circuits named {}", w[0]);
    }
    Ok(circuits)
}

fn check_caps(caps: &[usize]) -> Result<()> {
    if caps.is_empty() || caps.contains(&0) {
        bail!("batch caps must be positive");
    }
    Ok(())
}

fn gen_fixture(a: GenFixtureArgs) -> Result<Outcome> {
    if a.rows == 0 || a.cols == 0 {
        bail!("--rows and --cols must be positive");
    }
    let profile = match a.profile {
        Profile::Kingston => ErrorProfile::kingston_like(a.seed),
        Profile::TwoCluster => ErrorProfile::two_cluster(a.low, a.high, a.zones, a.seed),
        Profile::Uniform => ErrorProfile::uniform(a.mean, a.seed),
    };
    let snap = generate_heavy_hex(a.rows, a.cols, &profile);
    write(&a.out, &(snap.to_json() + "\n"))?;
    if let Some(dir) = a.workload_dir {
        for (name, text) in BENCHMARKS {
            write(&dir.join(format!("{name}.qasm")), text)?;
        }
    }
    Ok(Outcome::Done)
}

fn run_discover(a: DiscoverArgs) -> Result<Outcome> {
    let cfg = load_config(&a.common)?;
    let snap = load_snapshot(&a.calibration)?;
    let graph = build_graph_with(
        &snap,
        &GraphOptions {
            dead_threshold: cfg.dead_threshold,
            keep_failed: false,
        },
    );
    let found = discover(&graph, cfg.seed, &cfg)?;
    let s = &found.stats;
    eprintln!(
        "{}: {} regions, {}/{} qubits covered, sizes {}-{}, quality {:.2}-{:.2}, {:.1} ms",
        snap.device_name,
        s.regions,
        s.covered_qubits,
        s.total_qubits,
        s.min_region_size,
        s.max_region_size,
        s.min_quality,
        s.max_quality,
        found.timings.total_ms
    );
    let file = PoolFile {
        schema_version: SCHEMA_VERSION,
        device: snap.device_name.clone(),
        seed: cfg.seed,
        config: cfg,
        stats: found.stats,
        regions: found.pool.regions,
        uncovered: found.pool.uncovered,
        calibration: snap,
    };
    write(&a.out, &to_json(&file))?;
    Ok(Outcome::Done)
}

/// Testbed over the pool file's snapshot, with the stored pool swapped in.
fn testbed_from_pool(pool: PoolFile, cfg: &Config) -> Result<Testbed> {
    let mut bed = Testbed::from_snapshot(&pool.calibration, cfg)?;
    bed.pool.covered = pool
        .regions
        .iter()
        .flat_map(|r| r.vertices.iter().copied())
        .collect();
    bed.pool.regions = pool.regions;
    bed.pool.uncovered = pool.uncovered;
    if !bed.pool.is_consistent() {
        bail!("pool regions overlap");
    }
    if let Some(v) = bed.pool.covered.iter().find(|v| !bed.graph.contains(**v)) {
        bail!("pool region uses qubit {v}, which is not operational");
    }
    Ok(bed)
}

fn run_schedule(a: ScheduleArgs) -> Result<Outcome> {
    check_caps(&a.batch_cap)?;
    let pool = load_pool(&a.pool)?;
    let cfg = pool_config(&pool, &a.common)?;
    let circuits = load_workload(&a.workload)?;
    let device = pool.device.clone();
    let bed = testbed_from_pool(pool, &cfg)?;
    let work = requests(&circuits);
    let mut infeasible = 0;
    let entries = a
        .batch_cap
        .iter()
        .map(|&cap| {
            let mut state = AllocationState::new(bed.graph.clone(), bed.pool.clone(), &cfg);
            let report = schedule_batches(&mut state, &work, cap);
            eprintln!(
                "cap {cap}: {} jobs for {} circuits ({:.0}% saved), {} infeasible",
                report.jobs_used,
                report.total_circuits,
                100.0 * report.cost_reduction(),
                report.infeasible.len()
            );
            infeasible = infeasible.max(report.infeasible.len());
            ScheduleEntry {
                cost_reduction: report.cost_reduction(),
                report,
            }
        })
        .collect();
    let file = ScheduleFile {
        schema_version: SCHEMA_VERSION,
        device,
        entries,
    };
    write(&a.report, &to_json(&file))?;
    Ok(if infeasible > 0 {
        Outcome::Infeasible(infeasible)
    } else {
        Outcome::Done
    })
}

fn run_run(a: RunArgs) -> Result<Outcome> {
    check_caps(&a.batch_cap)?;
    let (bed, cfg) = match (&a.pool, &a.calibration) {
        (Some(p), _) => {
            let pool = load_pool(p)?;
            let cfg = pool_config(&pool, &a.common)?;
            (testbed_from_pool(pool, &cfg)?, cfg)
        }
        (None, Some(c)) => {
            let cfg = load_config(&a.common)?;
            (Testbed::from_snapshot(&load_snapshot(c)?, &cfg)?, cfg)
        }
        (None, None) => bail!("one of --pool or --calibration is required"),
    };
    let shots = a.shots.unwrap_or(cfg.shots);
    if shots == 0 {
        bail!("--shots must be positive");
    }
    let circuits = load_workload(&a.workload)?;
    let report = run_suite(
        &bed,
        &circuits,
        &a.batch_cap,
        shots,
        cfg.seed,
        !a.no_baseline,
    )?;
    for run in &report.runs {
        eprintln!(
            "cap {}: {} jobs, mean fidelity {:.3}, {} infeasible",
            run.batch_cap,
            run.jobs_used,
            run.mean_fidelity,
            run.infeasible.len()
        );
    }
    write(&a.report, &to_json(&report))?;
    let infeasible = report
        .runs
        .iter()
        .map(|r| r.infeasible.len())
        .max()
        .unwrap_or(0);
    Ok(if infeasible > 0 {
        Outcome::Infeasible(infeasible)
    } else {
        Outcome::Done
    })
}

/// A table as a header and string cells.
struct Table {
    title: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn tables(rep: &ExperimentReport, tolerance: f64) -> Vec<Table> {
    let base_f: Vec<f64> = rep.baseline.iter().map(|r| r.result.fidelity).collect();
    let base_d: Vec<f64> = rep.baseline.iter().map(|r| r.result.d_l1).collect();
    let has_base = !base_f.is_empty();
    let (bf, _) = mean_std(&base_f);
    let (bd, _) = mean_std(&base_d);
    let n = rep.runs.first().map_or(0, |r| r.total_circuits);

    let mut cost = Table {
        title: "Cost reduction through batching",
        header: vec![
            "Batch",
            "Jobs",
            "CostReduction",
            "MeanFidelity",
            "ThroughputGain",
        ],
        rows: vec![vec![
            "1 (baseline)".into(),
            n.to_string(),
            "-".into(),
            if has_base { pct(bf) } else { "-".into() },
            "1.0x".into(),
        ]],
    };
    let mut scale = Table {
        title: "Batch scalability",
        header: vec!["Batch", "RegionsUsed", "MeanFidelity", "StdDev"],
        rows: Vec::new(),
    };
    let mut compare = Table {
        title: "Fidelity against the full-chip baseline",
        header: vec![
            "Device", "Method", "Fidelity", "L1Err", "RelImpr", "L1Red", "Wins", "Losses", "Ties",
        ],
        rows: Vec::new(),
    };
    if has_base {
        compare.rows.push(vec![
            rep.device.clone(),
            "Baseline".into(),
            format!("{bf:.3}"),
            format!("{bd:.3}"),
            "-".into(),
            "-".into(),
            "-".into(),
            "-".into(),
            "-".into(),
        ]);
    }
    for run in &rep.runs {
        let executed = run.jobs_used.max(1) as f64;
        cost.rows.push(vec![
            run.batch_cap.to_string(),
            run.jobs_used.to_string(),
            format!("{:.0}%", 100.0 * run.cost_reduction),
            pct(run.mean_fidelity),
            format!("{:.1}x", run.total_circuits as f64 / executed),
        ]);
        let regions = run
            .batches
            .iter()
            .map(|b| b.regions_used)
            .max()
            .unwrap_or(0);
        scale.rows.push(vec![
            run.batch_cap.to_string(),
            regions.to_string(),
            pct(run.mean_fidelity),
            format!("{:.3}", run.std_fidelity),
        ]);
        if has_base {
            let (d, _) = mean_std(
                &run.circuits
                    .iter()
                    .map(|c| c.result.d_l1)
                    .collect::<Vec<_>>(),
            );
            let wl = win_loss(&run.circuits, &rep.baseline, tolerance);
            let rel = if bf > 0.0 {
                format!("{:+.1}%", 100.0 * (run.mean_fidelity - bf) / bf)
            } else {
                "-".into()
            };
            let red = if bd > 0.0 {
                format!("{:.1}%", 100.0 * (bd - d) / bd)
            } else {
                "-".into()
            };
            compare.rows.push(vec![
                rep.device.clone(),
                format!("Regions (cap {})", run.batch_cap),
                format!("{:.3}", run.mean_fidelity),
                format!("{d:.3}"),
                rel,
                red,
                wl.wins.to_string(),
                wl.losses.to_string(),
                wl.ties.to_string(),
            ]);
        }
    }
    let mut out = vec![cost, scale];
    if has_base {
        out.push(compare);
    }
    out
}

fn render(tables: &[Table], format: Format) -> String {
    let mut s = String::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        match format {
            Format::Md => {
                let _ = writeln!(s, "### {}\n", t.title);
                let _ = writeln!(s, "| {} |", t.header.join(" | "));
                let _ = writeln!(s, "|{}", "---|".repeat(t.header.len()));
                for r in &t.rows {
                    let _ = writeln!(s, "| {} |", r.join(" | "));
                }
            }
            Format::Csv => {
                let _ = writeln!(s, "# {}", t.title);
                let _ = writeln!(s, "{}", t.header.join(","));
                for r in &t.rows {
                    let cells: Vec<String> = r
                        .iter()
                        .map(|c| {
                            if c.contains(',') {
                                format!("\"{c}\"")
                            } else {
                                c.clone()
                            }
                        })
                        .collect();
                    let _ = writeln!(s, "{}", cells.join(","));
                }
            }
        }
    }
    s
}

fn run_report(a: ReportArgs) -> Result<Outcome> {
    let rep: ExperimentReport = serde_json::from_str(&read(&a.input)?)
        .with_context(|| format!("invalid report {}", a.input.display()))?;
    if rep.schema_version != SCHEMA_VERSION {
        bail!(
            "report schema {} is not supported (expected {SCHEMA_VERSION})",
            rep.schema_version
        );
    }
    if !a.tolerance.is_finite() || a.tolerance < 0.0 {
        bail!("--tolerance must be non-negative");
    }
    let text = render(&tables(&rep, a.tolerance), a.format);
    match &a.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(Outcome::Done)
}

fn inject(a: InjectArgs) -> Result<Outcome> {
    if a.kill_coupler.is_empty() && a.kill_qubit.is_empty() {
        bail!("nothing to inject: pass --kill-coupler or --kill-qubit");
    }
    let mut snap = load_snapshot(&a.calibration)?;
    if let Err(e) = snap.kill_couplers(&a.kill_coupler) {
        bail!("snapshot has no coupler {e}");
    }
    if let Err(q) = snap.kill_qubits(&a.kill_qubit) {
        bail!("snapshot has no qubit {q}");
    }
    write(&a.out, &(snap.to_json() + "\n"))?;
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::GenFixture(a) => gen_fixture(a),
        Command::Discover(a) => run_discover(a),
        Command::Schedule(a) => run_schedule(a),
        Command::Run(a) => run_run(a),
        Command::Report(a) => run_report(a),
        Command::InjectDefects(a) => inject(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible(n)) => {
            eprintln!("warning: {n} circuit(s) could not be placed on any region");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

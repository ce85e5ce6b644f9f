//! Files written by the harness.
//!
//! A run directory holds `trace.jsonl` (or `trace.csv`), one object or row per
//! experiment, `run.json` with the seed, scenario id and full value-table
//! snapshots, and `snapshots/<index>_<label>.csv` tables for plotting.
//! Floats are written in shortest round-trip form, so reading a run back gives
//! the same in-memory trace.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use recal_core::{DisplacementGrid, ExperimentRecord, Phase, QTable, RunTrace, Snapshot};
use serde::{Deserialize, Serialize};

use crate::batch::BatchSummary;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Jsonl,
    Csv,
}

impl TraceFormat {
    fn file_name(self) -> &'static str {
        match self {
            TraceFormat::Jsonl => "trace.jsonl",
            TraceFormat::Csv => "trace.csv",
        }
    }
}

/// Serialized form of an [`ExperimentRecord`]; field order is the file's column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordRow {
    index: usize,
    phase: String,
    theta: f64,
    n: u8,
    k: u8,
    khat: u8,
    reward: u8,
    witness: Option<f64>,
    epsilon: f64,
    greedy_theta: f64,
    env_id: usize,
}

const RECORD_HEADER: [&str; 11] = [
    "index",
    "phase",
    "theta",
    "n",
    "k",
    "khat",
    "reward",
    "witness",
    "epsilon",
    "greedy_theta",
    "env_id",
];

impl From<&ExperimentRecord> for RecordRow {
    fn from(r: &ExperimentRecord) -> Self {
        Self {
            index: r.index,
            phase: r.phase.as_str().into(),
            theta: r.theta,
            n: r.n,
            k: r.k,
            khat: r.khat,
            reward: r.reward,
            witness: r.witness,
            epsilon: r.epsilon,
            greedy_theta: r.greedy_theta,
            env_id: r.env_id,
        }
    }
}

impl RecordRow {
    fn into_record(self, path: &Path) -> Result<ExperimentRecord> {
        let phase = Phase::parse(&self.phase).ok_or_else(|| {
            HarnessError::Invalid(format!(
                "{}: record {}: unknown phase {:?}",
                path.display(),
                self.index,
                self.phase
            ))
        })?;
        Ok(ExperimentRecord {
            index: self.index,
            phase,
            theta: self.theta,
            n: self.n,
            k: self.k,
            khat: self.khat,
            reward: self.reward,
            witness: self.witness,
            epsilon: self.epsilon,
            greedy_theta: self.greedy_theta,
            env_id: self.env_id,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TableDump {
    grid: Vec<f64>,
    q0: Vec<f64>,
    q1: Vec<[[f64; 2]; 2]>,
    visits0: Vec<u64>,
    visits1: Vec<[[u64; 2]; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotDump {
    index: usize,
    label: String,
    table: TableDump,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunMeta {
    seed: u64,
    scenario_id: String,
    snapshots: Vec<SnapshotDump>,
}

fn dump_table(t: &QTable) -> TableDump {
    let m = t.len();
    let cell = |f: &dyn Fn(u8, u8) -> f64| [[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]];
    let count = |f: &dyn Fn(u8, u8) -> u64| [[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]];
    TableDump {
        grid: t.grid().values().to_vec(),
        q0: (0..m).map(|i| t.q0(i)).collect(),
        q1: (0..m).map(|i| cell(&|n, k| t.q1(i, n, k))).collect(),
        visits0: (0..m).map(|i| t.visits0(i)).collect(),
        visits1: (0..m).map(|i| count(&|n, k| t.visits1(i, n, k))).collect(),
    }
}

fn restore_table(d: TableDump, path: &Path) -> Result<QTable> {
    let m = d.grid.len();
    if [d.q0.len(), d.q1.len(), d.visits0.len(), d.visits1.len()] != [m; 4] {
        return Err(HarnessError::Invalid(format!(
            "{}: snapshot table columns differ in length",
            path.display()
        )));
    }
    let grid = DisplacementGrid::new(d.grid).map_err(|source| HarnessError::Validation {
        context: path.display().to_string(),
        source,
    })?;
    let mut t = QTable::uniform(grid, 0.0);
    for i in 0..m {
        t.set_q0(i, d.q0[i]);
        t.set_visits0(i, d.visits0[i]);
        for n in 0..2u8 {
            for k in 0..2u8 {
                let (a, b) = (usize::from(n), usize::from(k));
                t.set_q1(i, n, k, d.q1[i][a][b]);
                t.set_visits1(i, n, k, d.visits1[i][a][b]);
            }
        }
    }
    Ok(t)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl Fn(serde_json::Error) -> HarnessError + '_ {
    move |source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    }
}

/// One JSON object per experiment.
pub fn write_records_jsonl(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for r in records {
        serde_json::to_writer(&mut out, &RecordRow::from(r)).map_err(json_err(path))?;
        out.write_all(b"\n")
            .map_err(|e| HarnessError::io(path, e))?;
    }
    out.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_records_jsonl(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: RecordRow = serde_json::from_str(&line).map_err(json_err(path))?;
        records.push(row.into_record(path)?);
    }
    Ok(records)
}

/// The same records as a comma-separated table with a header row.
pub fn write_records_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RECORD_HEADER).map_err(csv_err(path))?;
    for r in records {
        w.serialize(RecordRow::from(r)).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_records_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    rdr.deserialize::<RecordRow>()
        .map(|row| row.map_err(csv_err(path))?.into_record(path))
        .collect()
}

/// `(theta, q0, q1_00, q1_01, q1_10, q1_11)`, where `q1_nk` is `Q₁(θ, n, k̂)`.
pub fn write_snapshot_csv(table: &QTable, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["theta", "q0", "q1_00", "q1_01", "q1_10", "q1_11"])
        .map_err(csv_err(path))?;
    for i in 0..table.len() {
        w.serialize((
            table.grid().get(i),
            table.q0(i),
            table.q1(i, 0, 0),
            table.q1(i, 0, 1),
            table.q1(i, 1, 0),
            table.q1(i, 1, 1),
        ))
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `(index, mean_reward)` rows.
pub fn write_curve_csv(curve: &[(usize, f64)], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "mean_reward"])
        .map_err(csv_err(path))?;
    for row in curve {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `(index, mean_reward, witness)` rows; the witness column is empty outside deployment.
pub fn write_aligned_csv(series: &[(usize, f64, Option<f64>)], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "mean_reward", "witness"])
        .map_err(csv_err(path))?;
    for row in series {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    scenario_id: &'a str,
    mode: &'a str,
    seed: u64,
    detection_latency: Option<usize>,
    convergence: Option<usize>,
    first_optimal: Option<usize>,
    final_theta: f64,
    guess_n0: u8,
    guess_n1: u8,
    final_score: f64,
    optimal_score: f64,
    final_grid_distance: usize,
    plateau: Option<f64>,
    recalibrations: usize,
}

const SUMMARY_HEADER: [&str; 14] = [
    "scenario_id",
    "mode",
    "seed",
    "detection_latency",
    "convergence",
    "first_optimal",
    "final_theta",
    "guess_n0",
    "guess_n1",
    "final_score",
    "optimal_score",
    "final_grid_distance",
    "plateau",
    "recalibrations",
];

/// One row per seed.
pub fn write_summary_csv(summary: &BatchSummary, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_HEADER).map_err(csv_err(path))?;
    for r in &summary.runs {
        w.serialize(SummaryRow {
            scenario_id: &summary.scenario_id,
            mode: summary.mode,
            seed: r.seed,
            detection_latency: r.detection_latency,
            convergence: r.convergence,
            first_optimal: r.first_optimal,
            final_theta: r.final_theta,
            guess_n0: r.final_guess[0],
            guess_n1: r.final_guess[1],
            final_score: r.final_score,
            optimal_score: r.optimal_score,
            final_grid_distance: r.final_grid_distance,
            plateau: r.plateau,
            recalibrations: r.recalibrations,
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_summary_json(summary: &BatchSummary, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, summary).map_err(json_err(path))?;
    out.write_all(b"\n")
        .map_err(|e| HarnessError::io(path, e))?;
    out.flush().map_err(|e| HarnessError::io(path, e))
}

fn snapshot_file(dir: &Path, s: &Snapshot) -> PathBuf {
    dir.join("snapshots")
        .join(format!("{:08}_{}.csv", s.index, s.label))
}

/// Writes a run directory; returns the path of the trace file.
pub fn emit_trace(trace: &RunTrace, dir: &Path, format: TraceFormat) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let trace_path = dir.join(format.file_name());
    match format {
        TraceFormat::Jsonl => write_records_jsonl(&trace.records, &trace_path)?,
        TraceFormat::Csv => write_records_csv(&trace.records, &trace_path)?,
    }
    let meta = RunMeta {
        seed: trace.seed,
        scenario_id: trace.scenario_id.clone(),
        snapshots: trace
            .snapshots
            .iter()
            .map(|s| SnapshotDump {
                index: s.index,
                label: s.label.clone(),
                table: dump_table(&s.qtable),
            })
            .collect(),
    };
    let meta_path = dir.join("run.json");
    let mut out = create(&meta_path)?;
    serde_json::to_writer(&mut out, &meta).map_err(json_err(&meta_path))?;
    out.flush().map_err(|e| HarnessError::io(&meta_path, e))?;
    for s in &trace.snapshots {
        write_snapshot_csv(&s.qtable, &snapshot_file(dir, s))?;
    }
    Ok(trace_path)
}

/// Reads back a directory written by [`emit_trace`].
pub fn read_trace(dir: &Path) -> Result<RunTrace> {
    let jsonl = dir.join(TraceFormat::Jsonl.file_name());
    let records = if jsonl.exists() {
        read_records_jsonl(&jsonl)?
    } else {
        read_records_csv(&dir.join(TraceFormat::Csv.file_name()))?
    };
    let meta_path = dir.join("run.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| HarnessError::io(&meta_path, e))?;
    let meta: RunMeta = serde_json::from_str(&text).map_err(json_err(&meta_path))?;
    let snapshots = meta
        .snapshots
        .into_iter()
        .map(|s| {
            Ok(Snapshot {
                index: s.index,
                label: s.label,
                qtable: restore_table(s.table, &meta_path)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunTrace {
        records,
        snapshots,
        seed: meta.seed,
        scenario_id: meta.scenario_id,
    })
}

//! File formats shared by the pipeline stages.
//!
//! | artifact | format |
//! |---|---|
//! | dataset | CSV, header = feature names then `target` |
//! | task manifest | JSON, generator parameters per task |
//! | curve bundle | JSON, every common-grid curve with importance and loss |
//! | importance | CSV `task_id,feature,weight` |
//! | matrix | CSV, first column `task`, then one column per compared task |
//! | matrix metadata | JSON, options and per-task losses and flags |
//! | breakdown | CSV, one row per (reference, compared, feature) |
//! | labels, merges, segments, leaves | CSV |
//! | dendrogram | Newick text |
//!
//! Floats are written in shortest round-trip form, so every artifact reads
//! back bit-identical.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::clustering::{Dendrogram, Merge, Segment};
use crate::error::{Error, Result};
use crate::similarity::FeatureTerm;
use crate::synth::TaskSpec;
use crate::types::{AleCurve, GridKind, Matching, SimilarityMatrix, TaskDataset, TaskProfile};

pub const TARGET_COLUMN: &str = "target";
pub const BUNDLE_FORMAT: &str = "mtsim-curve-bundle";
pub const MANIFEST_FORMAT: &str = "mtsim-task-manifest";
pub const MATRIX_META_FORMAT: &str = "mtsim-matrix-meta";
pub const FORMAT_VERSION: u32 = 1;
pub const ROW_CONVENTION: &str = "row = reference task, column = compared task";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?))
}

fn write_records<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    csv_reader(path)?
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- datasets

pub fn write_dataset(path: &Path, data: &TaskDataset) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(TARGET_COLUMN);
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let mut record = Vec::with_capacity(header.len());
    for (row, y) in data.rows().zip(data.targets()) {
        record.clear();
        record.extend(row.iter().map(f64::to_string));
        record.push(y.to_string());
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a dataset; the task id is the file stem.
pub fn read_dataset(path: &Path) -> Result<TaskDataset> {
    let task_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::format(path, "file name is not valid UTF-8"))?
        .to_string();
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols = header.len();
    if cols < 2 || &header[cols - 1] != TARGET_COLUMN {
        return Err(Error::format(
            path,
            format!("last column must be `{TARGET_COLUMN}` after at least one feature"),
        ));
    }
    let names: Vec<String> = header.iter().take(cols - 1).map(str::to_string).collect();
    let mut samples = Vec::new();
    let mut targets = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::format(path, format!("row {}, column {}: `{field}` is not a number", i + 1, j + 1))
            })?;
            if j + 1 == cols {
                targets.push(v);
            } else {
                samples.push(v);
            }
        }
    }
    TaskDataset::from_row_major(task_id, names, samples, targets)
}

/// Every `*.csv` file in `dir`, in natural order of the file names.
pub fn dataset_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            paths.push(path);
        }
    }
    paths.sort_by_key(|p| natural_key(&p.file_name().unwrap_or_default().to_string_lossy()));
    Ok(paths)
}

/// Sort key comparing digit runs numerically, so `task_2` precedes `task_10`.
pub fn natural_key(s: &str) -> Vec<(String, u128)> {
    let mut key = Vec::new();
    let mut text = String::new();
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_ascii_digit() {
            let mut digits = c.to_string();
            while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                digits.push(*d);
                chars.next();
            }
            key.push((std::mem::take(&mut text), digits.parse().unwrap_or(u128::MAX)));
        } else {
            text.push(c);
        }
    }
    key.push((text, 0));
    key
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub base_seed: u64,
    pub n: usize,
    pub tasks: Vec<TaskSpec>,
}

impl Manifest {
    pub fn new(base_seed: u64, n: usize, tasks: Vec<TaskSpec>) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: FORMAT_VERSION,
            base_seed,
            n,
            tasks,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: Self = read_json(path)?;
        check_header(path, &m.format, m.version, MANIFEST_FORMAT)?;
        for t in &m.tasks {
            t.validate()?;
        }
        Ok(m)
    }

    pub fn spec(&self, task_id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }
}

fn check_header(path: &Path, format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected {
        return Err(Error::format(path, format!("expected format `{expected}`, found `{format}`")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    Ok(())
}

// ---------------------------------------------------------------- curve bundle

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleCurve {
    pub feature: String,
    pub grid_kind: GridKind,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub proportions: Vec<f64>,
    pub counts: Vec<usize>,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleTask {
    pub task_id: String,
    pub loss: Option<f64>,
    pub curves: Vec<BundleCurve>,
}

/// Settings the bundle was produced with, kept for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSettings {
    pub model: String,
    pub bins: usize,
    pub grid_knots: usize,
    pub smooth_lambda: Option<f64>,
    pub importance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBundle {
    pub format: String,
    pub version: u32,
    pub settings: BundleSettings,
    pub tasks: Vec<BundleTask>,
}

impl CurveBundle {
    pub fn from_profiles(settings: BundleSettings, profiles: &[TaskProfile]) -> Self {
        let tasks = profiles
            .iter()
            .map(|p| BundleTask {
                task_id: p.task_id().to_string(),
                loss: p.loss(),
                curves: p
                    .curves()
                    .iter()
                    .zip(p.importance())
                    .map(|(c, &w)| BundleCurve {
                        feature: c.feature().to_string(),
                        grid_kind: c.grid_kind(),
                        knots: c.knots().to_vec(),
                        values: c.values().to_vec(),
                        proportions: c.proportions().to_vec(),
                        counts: c.counts().to_vec(),
                        importance: w,
                    })
                    .collect(),
            })
            .collect();
        Self {
            format: BUNDLE_FORMAT.into(),
            version: FORMAT_VERSION,
            settings,
            tasks,
        }
    }

    /// Validated profiles, with the stored importances.
    pub fn to_profiles(&self) -> Result<Vec<TaskProfile>> {
        self.tasks
            .iter()
            .map(|t| {
                let curves = t
                    .curves
                    .iter()
                    .map(|c| {
                        AleCurve::new(
                            t.task_id.clone(),
                            c.feature.clone(),
                            c.knots.clone(),
                            c.values.clone(),
                            c.proportions.clone(),
                            c.counts.clone(),
                            c.grid_kind,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let importance = t.curves.iter().map(|c| c.importance).collect();
                TaskProfile::new(t.task_id.clone(), curves, importance, t.loss)
            })
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let b: Self = read_json(path)?;
        check_header(path, &b.format, b.version, BUNDLE_FORMAT)?;
        b.to_profiles()
            .map_err(|e| Error::format(path, format!("invalid bundle contents: {e}")))?;
        Ok(b)
    }
}

// ---------------------------------------------------------------- importance

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub task_id: String,
    pub feature: String,
    pub weight: f64,
}

pub fn write_importance(path: &Path, profiles: &[TaskProfile]) -> Result<()> {
    let rows: Vec<ImportanceRow> = profiles
        .iter()
        .flat_map(|p| {
            p.features().zip(p.importance()).map(|(f, &w)| ImportanceRow {
                task_id: p.task_id().to_string(),
                feature: f.to_string(),
                weight: w,
            })
        })
        .collect();
    write_records(path, &rows)
}

/// Raw (unnormalized) weights per task, keyed by feature name.
pub fn read_importance(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for row in read_records::<ImportanceRow>(path)? {
        if !(row.weight.is_finite() && row.weight >= 0.0) {
            return Err(Error::format(
                path,
                format!("task `{}`, feature `{}`: weight {} is not a finite non-negative number", row.task_id, row.feature, row.weight),
            ));
        }
        if out
            .entry(row.task_id.clone())
            .or_default()
            .insert(row.feature.clone(), row.weight)
            .is_some()
        {
            return Err(Error::format(
                path,
                format!("duplicate weight for task `{}`, feature `{}`", row.task_id, row.feature),
            ));
        }
    }
    Ok(out)
}

/// Replaces each profile's importances with the file's weights, normalized.
/// Every task and feature of the profiles must be present in `weights`.
pub fn apply_importance(
    profiles: &[TaskProfile],
    weights: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<Vec<TaskProfile>> {
    profiles
        .iter()
        .map(|p| {
            let w = weights.get(p.task_id()).ok_or_else(|| {
                Error::invalid(format!("importance file has no weights for task `{}`", p.task_id()))
            })?;
            let v = p
                .features()
                .map(|f| {
                    w.get(f).copied().ok_or_else(|| {
                        Error::invalid(format!(
                            "importance file has no weight for task `{}`, feature `{f}`",
                            p.task_id()
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(extra) = w.keys().find(|f| p.feature_index(f).is_none()) {
                return Err(Error::invalid(format!(
                    "importance file names feature `{extra}`, which task `{}` does not have",
                    p.task_id()
                )));
            }
            p.with_importance(&v)
        })
        .collect()
}

// ---------------------------------------------------------------- matrix

pub fn write_matrix(path: &Path, m: &SimilarityMatrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["task".to_string()];
    header.extend(m.task_ids().iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, id) in m.task_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(m.row(i).iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a matrix CSV. Row and column ids must agree in order.
pub fn read_matrix(path: &Path, scaled: bool, matching: Matching) -> Result<SimilarityMatrix> {
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut values = Vec::with_capacity(ids.len() * ids.len());
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rows >= ids.len() || rec.len() != ids.len() + 1 {
            return Err(Error::format(path, "matrix is not square"));
        }
        if rec[0] != ids[rows] {
            return Err(Error::format(
                path,
                format!("row {} is `{}` but column {} is `{}`", rows + 1, &rec[0], rows + 1, ids[rows]),
            ));
        }
        for field in rec.iter().skip(1) {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| Error::format(path, format!("`{field}` is not a number")))?,
            );
        }
        rows += 1;
    }
    if rows != ids.len() {
        return Err(Error::format(path, "matrix is not square"));
    }
    SimilarityMatrix::new(ids, values, scaled, matching)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMeta {
    pub task_id: String,
    pub loss: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub format: String,
    pub version: u32,
    pub convention: String,
    pub matching: Matching,
    pub scaled: bool,
    pub epsilon: f64,
    pub importance: String,
    /// Threshold as given (`median` or a number) and its resolved value.
    pub tau: Option<String>,
    pub tau_value: Option<f64>,
    pub tasks: Vec<TaskMeta>,
}

impl MatrixMeta {
    pub fn read(path: &Path) -> Result<Self> {
        let m: Self = read_json(path)?;
        check_header(path, &m.format, m.version, MATRIX_META_FORMAT)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub reference: String,
    pub compared: String,
    pub feature: String,
    pub matched: String,
    pub distance: f64,
    pub importance: f64,
    pub contribution: f64,
}

/// Flattens `terms[i][j]` (reference `i`, compared `j`) into rows.
pub fn breakdown_rows(ids: &[String], terms: &[Vec<Vec<FeatureTerm>>]) -> Vec<BreakdownRow> {
    let mut rows = Vec::new();
    for (i, row) in terms.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            for t in cell {
                rows.push(BreakdownRow {
                    reference: ids[i].clone(),
                    compared: ids[j].clone(),
                    feature: t.feature.clone(),
                    matched: t.matched.clone(),
                    distance: t.distance,
                    importance: t.importance,
                    contribution: t.contribution(),
                });
            }
        }
    }
    rows
}

pub fn write_breakdown(path: &Path, rows: &[BreakdownRow]) -> Result<()> {
    write_records(path, rows)
}

pub fn read_breakdown(path: &Path) -> Result<Vec<BreakdownRow>> {
    read_records(path)
}

// ---------------------------------------------------------------- clustering

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub task_id: String,
    pub label: usize,
}

pub fn write_labels(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    let rows: Vec<LabelRow> = ids
        .iter()
        .zip(labels)
        .map(|(id, &label)| LabelRow {
            task_id: id.clone(),
            label,
        })
        .collect();
    write_records(path, &rows)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    read_records(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct MergeRow {
    step: usize,
    a: usize,
    b: usize,
    height: f64,
    size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LeafRow {
    id: usize,
    task_id: String,
    position: usize,
}

/// Writes `merges.csv`, `leaves.csv`, `segments.csv` and `dendrogram.nwk` into `dir`.
pub fn write_dendrogram(dir: &Path, d: &Dendrogram) -> Result<()> {
    let merges: Vec<MergeRow> = d
        .merges()
        .iter()
        .enumerate()
        .map(|(step, m)| MergeRow {
            step,
            a: m.a,
            b: m.b,
            height: m.height,
            size: m.size,
        })
        .collect();
    write_records(&dir.join("merges.csv"), &merges)?;
    let order = d.leaf_order();
    let mut position = vec![0; order.len()];
    for (pos, &leaf) in order.iter().enumerate() {
        position[leaf] = pos;
    }
    let leaves: Vec<LeafRow> = d
        .leaves()
        .iter()
        .enumerate()
        .map(|(id, name)| LeafRow {
            id,
            task_id: name.clone(),
            position: position[id],
        })
        .collect();
    write_records(&dir.join("leaves.csv"), &leaves)?;
    write_records(&dir.join("segments.csv"), &d.segments())?;
    write_text(&dir.join("dendrogram.nwk"), &format!("{}\n", d.to_newick()))
}

/// Rebuilds a dendrogram from `merges.csv` and `leaves.csv` in `dir`.
pub fn read_dendrogram(dir: &Path) -> Result<Dendrogram> {
    let merges_path = dir.join("merges.csv");
    let rows: Vec<MergeRow> = read_records(&merges_path)?;
    let mut merges = Vec::with_capacity(rows.len());
    for (s, r) in rows.iter().enumerate() {
        if r.step != s {
            return Err(Error::format(&merges_path, format!("expected step {s}, found {}", r.step)));
        }
        merges.push(Merge {
            a: r.a,
            b: r.b,
            height: r.height,
            size: r.size,
        });
    }
    let leaves_path = dir.join("leaves.csv");
    let mut leaves: Vec<LeafRow> = read_records(&leaves_path)?;
    leaves.sort_by_key(|l| l.id);
    if leaves.iter().enumerate().any(|(i, l)| l.id != i) {
        return Err(Error::format(&leaves_path, "leaf ids must be 0..T"));
    }
    Dendrogram::new(leaves.into_iter().map(|l| l.task_id).collect(), merges)
}

pub fn read_segments(path: &Path) -> Result<Vec<Segment>> {
    read_records(path)
}

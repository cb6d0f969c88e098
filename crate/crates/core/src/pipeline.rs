//! End-to-end profile construction: raw curves per (task, feature),
//! pooled common grids per feature, resampling, optional smoothing,
//! importance and loss.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::ale::{
    compute_ale, pooled_quantile_grid, resample_to_grid, smooth_curve, CommonGrid, DEFAULT_BINS,
    DEFAULT_GRID_KNOTS,
};
use crate::error::{Error, Result};
use crate::importance::{permutation_importance, DEFAULT_REPEATS};
use crate::models::LossKind;
use crate::predict::Predictor;
use crate::types::{AleCurve, TaskDataset, TaskProfile};

/// A task's dataset together with its fitted model.
#[derive(Clone)]
pub struct TaskInput {
    pub data: TaskDataset,
    pub model: Arc<dyn Predictor>,
}

impl TaskInput {
    pub fn new(data: TaskDataset, model: Arc<dyn Predictor>) -> Self {
        Self { data, model }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImportanceSource {
    Permutation { repeats: usize, seed: u64 },
    Uniform,
}

impl Default for ImportanceSource {
    fn default() -> Self {
        ImportanceSource::Permutation {
            repeats: DEFAULT_REPEATS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Raw partition bins per feature.
    pub bins: usize,
    /// Knots of each feature's common grid.
    pub grid_knots: usize,
    /// Roughness penalty applied to common-grid curves, if any.
    pub smooth_lambda: Option<f64>,
    pub importance: ImportanceSource,
    /// `None` picks the loss from the targets (log-loss for 0/1 targets).
    pub loss: Option<LossKind>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            grid_knots: DEFAULT_GRID_KNOTS,
            smooth_lambda: None,
            importance: ImportanceSource::default(),
            loss: None,
        }
    }
}

/// Raw curve for every feature of every task, computed in parallel.
/// Degenerate features are collected and reported together.
pub fn raw_curves(tasks: &[TaskInput], bins: usize) -> Result<Vec<Vec<AleCurve>>> {
    let jobs: Vec<(usize, usize)> = tasks
        .iter()
        .enumerate()
        .flat_map(|(t, task)| (0..task.data.n_features()).map(move |j| (t, j)))
        .collect();
    let results: Vec<Result<AleCurve>> = jobs
        .par_iter()
        .map(|&(t, j)| compute_ale(tasks[t].model.as_ref(), &tasks[t].data, j, bins))
        .collect();
    let mut out: Vec<Vec<AleCurve>> = tasks.iter().map(|_| Vec::new()).collect();
    let mut degenerate = Vec::new();
    for (&(t, _), r) in jobs.iter().zip(results) {
        match r {
            Ok(c) => out[t].push(c),
            Err(Error::DegenerateFeature(f)) => {
                degenerate.push(format!("{}/{f}", tasks[t].data.task_id()))
            }
            Err(e) => return Err(e),
        }
    }
    if !degenerate.is_empty() {
        return Err(Error::DegenerateFeature(degenerate.join(", ")));
    }
    Ok(out)
}

/// One common grid per feature name, pooled over every task having it.
pub fn common_grids(tasks: &[TaskInput], knots: usize) -> Result<BTreeMap<String, CommonGrid>> {
    let mut columns: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for task in tasks {
        for (j, name) in task.data.feature_names().iter().enumerate() {
            columns.entry(name.clone()).or_default().push(task.data.column(j));
        }
    }
    columns
        .into_iter()
        .map(|(name, cols)| {
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            pooled_quantile_grid(&name, &refs, knots).map(|g| (name, g))
        })
        .collect()
}

/// Moves raw curves onto the common grids, smoothing afterwards if requested.
pub fn resample_all(
    tasks: &[TaskInput],
    raw: &[Vec<AleCurve>],
    grids: &BTreeMap<String, CommonGrid>,
    smooth_lambda: Option<f64>,
) -> Result<Vec<Vec<AleCurve>>> {
    tasks
        .par_iter()
        .zip(raw)
        .map(|(task, curves)| {
            curves
                .iter()
                .map(|c| {
                    let j = task.data.feature_index(c.feature()).expect("curve of this task");
                    let grid = &grids[c.feature()];
                    let r = resample_to_grid(c, grid, &task.data.column(j))?;
                    match smooth_lambda {
                        Some(l) if r.len() >= 3 => smooth_curve(&r, l),
                        _ => Ok(r),
                    }
                })
                .collect()
        })
        .collect()
}

/// Importance vector and loss of one task.
pub fn importance_and_loss(task: &TaskInput, config: &PipelineConfig) -> Result<(Vec<f64>, f64)> {
    let loss_kind = config
        .loss
        .unwrap_or_else(|| LossKind::detect(task.data.targets()));
    let pred = task.model.predict_batch(task.data.samples())?;
    if pred.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite prediction on task `{}`",
            task.data.task_id()
        )));
    }
    let loss = loss_kind.evaluate(&pred, task.data.targets());
    let importance = match config.importance {
        ImportanceSource::Uniform => {
            let d = task.data.n_features();
            vec![1.0 / d as f64; d]
        }
        ImportanceSource::Permutation { repeats, seed } => {
            permutation_importance(task.model.as_ref(), &task.data, repeats, seed, loss_kind)?
        }
    };
    Ok((importance, loss))
}

/// Everything the pipeline produces, kept for inspection and serialization.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub raw: Vec<Vec<AleCurve>>,
    pub grids: BTreeMap<String, CommonGrid>,
    pub profiles: Vec<TaskProfile>,
}

pub fn run(tasks: &[TaskInput], config: &PipelineConfig) -> Result<PipelineOutput> {
    if tasks.is_empty() {
        return Err(Error::invalid("no tasks"));
    }
    for t in tasks {
        if t.model.n_features() != t.data.n_features() {
            return Err(Error::DimensionMismatch(format!(
                "task `{}`: model expects {} features, data has {}",
                t.data.task_id(),
                t.model.n_features(),
                t.data.n_features()
            )));
        }
    }
    let raw = raw_curves(tasks, config.bins)?;
    let grids = common_grids(tasks, config.grid_knots)?;
    let curves = resample_all(tasks, &raw, &grids, config.smooth_lambda)?;
    let scored: Vec<(Vec<f64>, f64)> = tasks
        .par_iter()
        .map(|t| importance_and_loss(t, config))
        .collect::<Result<_>>()?;
    let profiles = tasks
        .iter()
        .zip(curves)
        .zip(scored)
        .map(|((t, c), (imp, loss))| TaskProfile::new(t.data.task_id(), c, imp, Some(loss)))
        .collect::<Result<_>>()?;
    Ok(PipelineOutput {
        raw,
        grids,
        profiles,
    })
}

/// Convenience wrapper returning only the profiles.
pub fn build_profiles(tasks: &[TaskInput], config: &PipelineConfig) -> Result<Vec<TaskProfile>> {
    run(tasks, config).map(|o| o.profiles)
}

//! Permutation importance of a fitted model, manual importance, and the
//! cosine prefilter that groups tasks with similar importance profiles.
//!
//! cargo run --release --example permutation_importance

use std::sync::Arc;

use mtsim::importance::{manual_importance, permutation_importance_raw, DEFAULT_REPEATS};
use mtsim::models::{fit_knn, LossKind};
use mtsim::pipeline::{build_profiles, PipelineConfig, TaskInput};
use mtsim::similarity::cosine_prefilter;
use mtsim::synth::{benchmark_specs, generate_task, oracle_model};
use mtsim::Predictor;

fn main() -> mtsim::Result<()> {
    let specs = benchmark_specs(2000, 3);
    let data = generate_task(&specs[0])?;
    let knn = fit_knn(&data, 20)?;
    let raw = permutation_importance_raw(&knn, &data, DEFAULT_REPEATS, 0, LossKind::Rmse)?;
    println!("loss increase per permuted feature (kNN, task_1)");
    for (name, v) in data.feature_names().iter().zip(&raw) {
        println!("  {name}: {v:.4}");
    }
    println!("manual weights 3:1:0:1:1 -> {:.3?}", manual_importance(&[3.0, 1.0, 0.0, 1.0, 1.0])?);

    let tasks: Vec<TaskInput> = specs
        .iter()
        .map(|s| {
            let d = generate_task(s)?;
            Ok(TaskInput::new(d, Arc::new(oracle_model(s)?) as Arc<dyn Predictor>))
        })
        .collect::<mtsim::Result<_>>()?;
    let profiles = build_profiles(&tasks, &PipelineConfig { bins: 20, grid_knots: 20, ..Default::default() })?;
    println!("\nnormalized importance per task");
    for p in &profiles {
        println!("  {}: {:.3?}", p.task_id(), p.importance());
    }
    for threshold in [0.99, 0.999, 0.9999] {
        let groups = cosine_prefilter(&profiles, threshold)?;
        let named: Vec<Vec<&str>> = groups
            .iter()
            .map(|g| g.iter().map(|&i| profiles[i].task_id()).collect())
            .collect();
        println!("prefilter at {threshold}: {named:?}");
    }
    Ok(())
}

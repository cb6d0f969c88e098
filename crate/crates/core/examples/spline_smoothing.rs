//! Roughness-penalized smoothing of common-grid curves, and how much it
//! moves the similarity ranking of the benchmark tasks.
//!
//! cargo run --release --example spline_smoothing -- [n]

use std::sync::Arc;

use mtsim::ale::whittaker_smooth;
use mtsim::pipeline::{run, PipelineConfig, TaskInput};
use mtsim::similarity::SimilarityOptions;
use mtsim::synth::{benchmark_specs, generate_task, oracle_model, DEFAULT_SEED};
use mtsim::{similarity_matrix, Predictor};

fn main() -> mtsim::Result<()> {
    let noisy: Vec<f64> = (0..12)
        .map(|i| i as f64 * 0.5 + if i % 2 == 0 { 0.4 } else { -0.4 })
        .collect();
    println!("input           {:.2?}", noisy);
    for lambda in [0.1, 10.0, 1e6] {
        println!("lambda {lambda:<8} {:.2?}", whittaker_smooth(&noisy, lambda)?);
    }

    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5000);
    let tasks: Vec<TaskInput> = benchmark_specs(n, DEFAULT_SEED)
        .iter()
        .map(|s| {
            let data = generate_task(s)?;
            Ok(TaskInput::new(data, Arc::new(oracle_model(s)?) as Arc<dyn Predictor>))
        })
        .collect::<mtsim::Result<_>>()?;
    let opts = SimilarityOptions::default();
    println!("\nnearest task per row");
    for lambda in [None, Some(1.0), Some(10.0), Some(100.0)] {
        let cfg = PipelineConfig { smooth_lambda: lambda, ..Default::default() };
        let m = similarity_matrix(&run(&tasks, &cfg)?.profiles, &opts)?;
        let nearest: Vec<&str> = (0..m.len())
            .map(|i| m.task_ids()[m.row_argmin(i).unwrap()].as_str())
            .collect();
        println!("  lambda {:>6}: {nearest:?}", lambda.map_or("none".into(), |l| l.to_string()));
    }
    Ok(())
}

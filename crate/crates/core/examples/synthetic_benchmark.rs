//! The five-task synthetic benchmark with generating-function models:
//! similarity matrix and the per-feature breakdown of one entry.
//!
//! cargo run --release --example synthetic_benchmark -- [n] [seed]

use std::sync::Arc;

use mtsim::pipeline::{run, PipelineConfig, TaskInput};
use mtsim::similarity::{similarity_terms, SimilarityOptions};
use mtsim::synth::{benchmark_specs, generate_task, oracle_model, DEFAULT_SAMPLES, DEFAULT_SEED};
use mtsim::{similarity_matrix, Predictor};

fn main() -> mtsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|a| a.parse().ok()).unwrap_or(DEFAULT_SAMPLES);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(DEFAULT_SEED);

    let tasks: Vec<TaskInput> = benchmark_specs(n, seed)
        .iter()
        .map(|s| {
            let data = generate_task(s)?;
            Ok(TaskInput::new(data, Arc::new(oracle_model(s)?) as Arc<dyn Predictor>))
        })
        .collect::<mtsim::Result<_>>()?;
    let out = run(&tasks, &PipelineConfig::default())?;
    let m = similarity_matrix(&out.profiles, &SimilarityOptions::default())?;

    println!("dissimilarity (row = reference task), n = {n}, seed = {seed}\n");
    print!("{:8}", "");
    for id in m.task_ids() {
        print!("{id:>10}");
    }
    println!();
    for (i, id) in m.task_ids().iter().enumerate() {
        print!("{id:8}");
        for v in m.row(i) {
            print!("{v:>10.2}");
        }
        println!("   nearest: {}", m.task_ids()[m.row_argmin(i).unwrap()]);
    }

    let terms = similarity_terms(&out.profiles[0], &out.profiles[1], &SimilarityOptions::default())?;
    println!("\ntask_1 vs task_2 by feature");
    println!("{:8}{:>10}{:>12}{:>14}", "feature", "distance", "importance", "contribution");
    for t in &terms {
        println!("{:8}{:>10.2}{:>12.3}{:>14.3}", t.feature, t.distance, t.importance, t.contribution());
    }
    println!("{:8}{:>36.3}", "total", terms.iter().map(|t| t.contribution()).sum::<f64>());
    Ok(())
}

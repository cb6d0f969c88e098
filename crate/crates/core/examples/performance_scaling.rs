//! A sixth task drawn like Task 1 but fitted with a coarse model. Compares
//! raw and loss-scaled dissimilarities and flags high-loss tasks.
//!
//! cargo run --release --example performance_scaling -- [n] [seed]

use std::sync::Arc;

use mtsim::models::{default_k, fit_knn};
use mtsim::pipeline::{run, PipelineConfig, TaskInput};
use mtsim::similarity::{flag_profiles, performance_gamma, SimilarityOptions, DEFAULT_EPSILON};
use mtsim::synth::{benchmark_specs, degraded_model, degraded_spec, generate_task, DEFAULT_SEED};
use mtsim::{similarity_matrix, Predictor, Tau};

fn main() -> mtsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(3000);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(DEFAULT_SEED);

    let mut tasks = Vec::new();
    for spec in benchmark_specs(n, seed) {
        let data = generate_task(&spec)?;
        let knn = fit_knn(&data, default_k(n))?;
        tasks.push(TaskInput::new(data, Arc::new(knn) as Arc<dyn Predictor>));
    }
    let spec = degraded_spec(n, seed);
    let data = generate_task(&spec)?;
    let coarse = degraded_model(&spec, &data)?;
    tasks.push(TaskInput::new(data, Arc::new(coarse)));

    let profiles = run(&tasks, &PipelineConfig::default())?.profiles;
    let profiles = flag_profiles(&profiles, Tau::Median)?;
    let raw = similarity_matrix(&profiles, &SimilarityOptions::default())?;
    let scaled = similarity_matrix(&profiles, &SimilarityOptions::default().with_gamma(true))?;

    let six = raw.index_of("task_6").unwrap();
    let loss6 = profiles[six].loss().unwrap();
    println!("{:8}{:>9}{:>8}{:>12}{:>12}", "task", "loss", "gamma", "raw", "scaled");
    for (j, p) in profiles.iter().enumerate() {
        let loss = p.loss().unwrap();
        let flag = if p.flagged() { "  flagged" } else { "" };
        if j == six {
            println!("{:8}{loss:>9.4}{:>8}{:>12}{:>12}{flag}", p.task_id(), "-", "-", "-");
            continue;
        }
        println!(
            "{:8}{loss:>9.4}{:>8.3}{:>12.2}{:>12.2}{flag}",
            p.task_id(),
            performance_gamma(loss6, loss, DEFAULT_EPSILON)?,
            raw.get(six, j),
            scaled.get(six, j)
        );
    }
    let name = |j: Option<usize>| j.map_or("-".to_string(), |j| raw.task_ids()[j].clone());
    println!(
        "\nnearest to task_6: raw {}, scaled {}",
        name(raw.row_argmin(six)),
        name(scaled.row_argmin(six))
    );
    Ok(())
}

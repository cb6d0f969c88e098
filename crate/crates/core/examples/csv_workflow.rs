//! File-based workflow: datasets to CSV, kNN models, curve bundle, matrix,
//! breakdown and report, all in a temporary directory.
//!
//! cargo run --release --example csv_workflow

use std::sync::Arc;

use mtsim::io::{self, BundleSettings, CurveBundle, MatrixMeta, TaskMeta};
use mtsim::models::{default_k, fit_knn};
use mtsim::pipeline::{build_profiles, PipelineConfig, TaskInput};
use mtsim::similarity::{matrix_from_terms, pairwise_terms, SimilarityOptions};
use mtsim::synth::{benchmark_specs, generate_task};
use mtsim::{Matching, Predictor};

fn main() -> mtsim::Result<()> {
    let dir = std::env::temp_dir().join("mtsim_csv_workflow");
    for spec in benchmark_specs(1500, 7) {
        io::write_dataset(&dir.join(format!("{}.csv", spec.task_id)), &generate_task(&spec)?)?;
    }

    let tasks = io::dataset_paths(&dir)?
        .iter()
        .map(|p| {
            let data = io::read_dataset(p)?;
            let knn = fit_knn(&data, default_k(data.n_samples()))?;
            Ok(TaskInput::new(data, Arc::new(knn) as Arc<dyn Predictor>))
        })
        .collect::<mtsim::Result<Vec<_>>>()?;
    let cfg = PipelineConfig { bins: 30, grid_knots: 30, ..Default::default() };
    let profiles = build_profiles(&tasks, &cfg)?;

    let settings = BundleSettings {
        model: "knn".into(),
        bins: cfg.bins,
        grid_knots: cfg.grid_knots,
        smooth_lambda: None,
        importance: "permutation".into(),
    };
    let bundle_path = dir.join("curves.json");
    CurveBundle::from_profiles(settings, &profiles).write(&bundle_path)?;
    let profiles = CurveBundle::read(&bundle_path)?.to_profiles()?;

    let opts = SimilarityOptions::default();
    let terms = pairwise_terms(&profiles, &opts)?;
    let m = matrix_from_terms(&profiles, &terms, &opts)?;
    io::write_matrix(&dir.join("matrix.csv"), &m)?;
    let rows = io::breakdown_rows(m.task_ids(), &terms);
    io::write_breakdown(&dir.join("breakdown.csv"), &rows)?;
    let meta = MatrixMeta {
        format: io::MATRIX_META_FORMAT.into(),
        version: io::FORMAT_VERSION,
        convention: io::ROW_CONVENTION.into(),
        matching: Matching::ByName,
        scaled: false,
        epsilon: opts.epsilon,
        importance: "permutation".into(),
        tau: None,
        tau_value: None,
        tasks: profiles
            .iter()
            .map(|p| TaskMeta { task_id: p.task_id().into(), loss: p.loss(), flagged: false })
            .collect(),
    };
    io::write_json(&dir.join("meta.json"), &meta)?;

    let back = io::read_matrix(&dir.join("matrix.csv"), false, Matching::ByName)?;
    assert_eq!(back, m);
    println!("{}", mtsim::report::render(&back, &meta, &rows, 2, 3));
    println!("artifacts in {}", dir.display());
    Ok(())
}

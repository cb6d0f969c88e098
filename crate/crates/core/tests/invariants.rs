use std::sync::Arc;

use mtsim::clustering::{cut_tree, ward_cluster};
use mtsim::importance::manual_importance;
use mtsim::models::{fit_knn, rmse};
use mtsim::pipeline::{build_profiles, ImportanceSource, PipelineConfig, TaskInput};
use mtsim::similarity::{flag_unreliable, performance_gamma, SimilarityOptions, Tau};
use mtsim::synth::{benchmark_specs, generate_task, oracle_model};
use mtsim::{similarity_matrix, task_similarity, Matching, Predictor, SimilarityMatrix, TaskDataset, TaskProfile};
use proptest::prelude::*;

fn small_profiles() -> Vec<TaskProfile> {
    let tasks: Vec<TaskInput> = benchmark_specs(400, 11)
        .iter()
        .map(|s| {
            let data = generate_task(s).unwrap();
            TaskInput::new(data, Arc::new(oracle_model(s).unwrap()) as Arc<dyn Predictor>)
        })
        .collect();
    let cfg = PipelineConfig {
        bins: 20,
        grid_knots: 20,
        importance: ImportanceSource::Uniform,
        ..PipelineConfig::default()
    };
    build_profiles(&tasks, &cfg).unwrap()
}

#[test]
fn importance_scale_invariance() {
    let profiles = small_profiles();
    let w = [0.5, 1.0, 0.25, 3.0, 2.0];
    let a = profiles[0].with_importance(&manual_importance(&w).unwrap()).unwrap();
    let scaled: Vec<f64> = w.iter().map(|x| x * 17.0).collect();
    let b = profiles[0].with_importance(&scaled).unwrap();
    for other in &profiles[1..] {
        let da = task_similarity(&a, other, Matching::ByName).unwrap();
        let db = task_similarity(&b, other, Matching::ByName).unwrap();
        assert!((da - db).abs() <= 1e-12 * da.max(1.0));
    }
}

#[test]
fn duplicated_task_has_zero_entries() {
    let mut profiles = small_profiles();
    let copy = profiles[0].clone();
    let renamed = TaskProfile::new(
        "copy",
        copy.curves().iter().map(|c| c.with_task_id("copy")).collect(),
        copy.importance().to_vec(),
        copy.loss(),
    )
    .unwrap();
    profiles.push(renamed);
    let m = similarity_matrix(&profiles, &SimilarityOptions::default()).unwrap();
    let last = profiles.len() - 1;
    assert_eq!(m.get(0, last), 0.0);
    assert_eq!(m.get(last, 0), 0.0);
    assert!(m.get(1, last) > 0.0);
}

#[test]
fn best_match_never_exceeds_by_name() {
    let profiles = small_profiles();
    let by_name = similarity_matrix(&profiles, &SimilarityOptions::default()).unwrap();
    let best = similarity_matrix(
        &profiles,
        &SimilarityOptions::default().with_matching(Matching::BestMatch),
    )
    .unwrap();
    for (a, b) in best.values().iter().zip(by_name.values()) {
        assert!(a <= b);
    }
}

fn permuted(m: &SimilarityMatrix, order: &[usize]) -> SimilarityMatrix {
    let ids = order.iter().map(|&i| m.task_ids()[i].clone()).collect();
    let values = order
        .iter()
        .flat_map(|&i| order.iter().map(move |&j| (i, j)))
        .map(|(i, j)| m.get(i, j))
        .collect();
    SimilarityMatrix::new(ids, values, m.scaled(), m.matching()).unwrap()
}

#[test]
fn clustering_ignores_task_order() {
    let profiles = small_profiles();
    let m = similarity_matrix(&profiles, &SimilarityOptions::default()).unwrap();
    let sym = mtsim::clustering::symmetrize(&m);
    let base = cut_tree(&ward_cluster(&sym).unwrap(), 2).unwrap();
    let order = [3, 0, 4, 2, 1];
    let p = permuted(&sym, &order);
    let labels = cut_tree(&ward_cluster(&p).unwrap(), 2).unwrap();
    for a in 0..order.len() {
        for b in 0..order.len() {
            assert_eq!(labels[a] == labels[b], base[order[a]] == base[order[b]]);
        }
    }
    let heights = |m: &SimilarityMatrix| {
        let mut h: Vec<f64> = ward_cluster(m).unwrap().merges().iter().map(|x| x.height).collect();
        h.sort_by(f64::total_cmp);
        h
    };
    for (a, b) in heights(&sym).iter().zip(heights(&p)) {
        assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }
}

#[test]
fn cut_at_leaf_count_is_identity() {
    let profiles = small_profiles();
    let m = mtsim::clustering::symmetrize(&similarity_matrix(&profiles, &SimilarityOptions::default()).unwrap());
    assert_eq!(cut_tree(&ward_cluster(&m).unwrap(), 5).unwrap(), vec![1, 2, 3, 4, 5]);
}

fn shuffled(data: &TaskDataset, order: &[usize]) -> TaskDataset {
    let rows = order.iter().flat_map(|&i| data.row(i).to_vec()).collect();
    let targets = order.iter().map(|&i| data.targets()[i]).collect();
    TaskDataset::from_row_major(data.task_id(), data.feature_names().to_vec(), rows, targets).unwrap()
}

#[test]
fn rmse_ignores_row_order() {
    let spec = &benchmark_specs(300, 5)[2];
    let data = generate_task(spec).unwrap();
    let model = oracle_model(spec).unwrap();
    let knn = fit_knn(&data, 7).unwrap();
    let order: Vec<usize> = (0..data.n_samples()).rev().collect();
    let other = shuffled(&data, &order);
    for m in [&model as &dyn Predictor, &knn] {
        let a = rmse(m, &data).unwrap();
        let b = rmse(m, &other).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_stays_within_target_range(x in prop::collection::vec(-5.0..5.0f64, 5), k in 1usize..30) {
        let spec = &benchmark_specs(200, 3)[0];
        let data = generate_task(spec).unwrap();
        let knn = fit_knn(&data, k).unwrap();
        let lo = data.targets().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data.targets().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p = knn.predict(&x).unwrap();
        prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
    }

    #[test]
    fn gamma_in_unit_interval(a in 0.0..100.0f64, b in 0.0..100.0f64) {
        let g = performance_gamma(a, b, 1e-8).unwrap();
        prop_assert!((0.0..1.0).contains(&g));
        prop_assert_eq!(g, performance_gamma(b, a, 1e-8).unwrap());
    }

    #[test]
    fn median_flags_at_most_half(losses in prop::collection::vec(0.0..10.0f64, 1..20)) {
        let flags = flag_unreliable(&losses, Tau::Median).unwrap();
        prop_assert!(flags.iter().filter(|&&f| f).count() * 2 <= losses.len());
    }
}

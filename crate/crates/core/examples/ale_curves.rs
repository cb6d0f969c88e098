//! Raw ALE curves of a hand-written model, then resampled onto a grid
//! pooled over two tasks.
//!
//! cargo run --example ale_curves

use mtsim::ale::{compute_ale, pooled_quantile_grid, resample_to_grid};
use mtsim::{from_fn, TaskDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(id: &str, n: usize, shift: f64, seed: u64) -> TaskDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n * 2);
    for _ in 0..n {
        rows.push(rng.gen_range(0.0..2.0) + shift);
        rows.push(rng.gen_range(-1.0..1.0));
    }
    let targets = vec![0.0; n];
    TaskDataset::from_row_major(id, vec!["a".into(), "b".into()], rows, targets).unwrap()
}

fn main() -> mtsim::Result<()> {
    // a has a quadratic effect, b a linear one; the interaction term
    // averages out of both first-order curves
    let model = from_fn(2, |x| x[0] * x[0] + 3.0 * x[1] + x[0] * x[1]);
    let left = dataset("left", 400, 0.0, 1);
    let right = dataset("right", 400, 1.0, 2);

    let raw_left = compute_ale(&model, &left, 0, 8)?;
    println!("raw curve of `a` on task left ({} bins)", raw_left.len());
    for ((x, v), p) in raw_left.knots().iter().zip(raw_left.values()).zip(raw_left.proportions()) {
        println!("  x <= {x:6.3}  ale = {v:8.4}  share = {p:.3}");
    }

    let raw_right = compute_ale(&model, &right, 0, 8)?;
    let grid = pooled_quantile_grid("a", &[&left.column(0), &right.column(0)], 6)?;
    println!("\npooled grid for `a`: {:.3?}", grid.knots());
    for (task, raw) in [(&left, &raw_left), (&right, &raw_right)] {
        let c = resample_to_grid(raw, &grid, &task.column(0))?;
        println!(
            "  {:5}  values = {:.3?}\n         shares = {:.3?}",
            task.task_id(),
            c.values(),
            c.proportions()
        );
    }

    let b = compute_ale(&model, &left, 1, 4)?;
    println!("\ncurve of `b` on task left: slope between knots");
    for w in b.knots().windows(2).zip(b.values().windows(2)) {
        let ((x0, x1), (v0, v1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
        println!("  [{x0:6.3}, {x1:6.3}]  {:.4}", (v1 - v0) / (x1 - x0));
    }
    Ok(())
}

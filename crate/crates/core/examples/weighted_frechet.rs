//! Sum versus max aggregation of the coupling cost, and the effect of the
//! data-support weights.
//!
//! cargo run --example weighted_frechet

use mtsim::frechet::weight_ratio;
use mtsim::{frechet_min_variant, weighted_frechet, AleCurve, GridKind};

fn curve(id: &str, values: Vec<f64>, proportions: Vec<f64>) -> AleCurve {
    let k = values.len();
    let knots = (0..k).map(|i| i as f64).collect();
    AleCurve::new(id, "x", knots, values, proportions, vec![1; k], GridKind::Common).unwrap()
}

fn main() -> mtsim::Result<()> {
    let k = 20;
    let even = vec![1.0 / k as f64; k];
    let base: Vec<f64> = (0..k).map(|i| (i as f64 * 0.4).sin() * 5.0).collect();
    let mut ends = base.clone();
    ends[0] += 45.0;
    ends[k - 1] += 45.0;
    let shifted: Vec<f64> = base.iter().map(|v| v + 45.0).collect();

    let c1 = curve("c1", base.clone(), even.clone());
    let c2 = curve("c2", shifted, even.clone());
    let c3 = curve("c3", ends, even.clone());

    println!("{:<22}{:>12}{:>12}", "", "max cost", "sum cost");
    for (name, other) in [("c1 vs offset c2", &c2), ("c1 vs endpoints c3", &c3)] {
        println!(
            "{name:<22}{:>12.2}{:>12.2}",
            frechet_min_variant(&c1, other)?,
            weighted_frechet(&c1, other)?
        );
    }
    println!("the max cost cannot tell a global offset from two outlying endpoints\n");

    // same shapes, but one task has almost no data in the upper half
    let mut skewed: Vec<f64> = (0..k).map(|i| if i < k / 2 { 1.0 } else { 0.02 }).collect();
    let total: f64 = skewed.iter().sum();
    skewed.iter_mut().for_each(|p| *p /= total);
    let bumped: Vec<f64> = base.iter().map(|v| v + 1.0).collect();
    let a = curve("a", base, even.clone());
    let b_even = curve("b", bumped.clone(), even);
    let b_skew = curve("b", bumped, skewed.clone());
    println!("weight ratio at the last knot: {:.2}", weight_ratio(1.0 / k as f64, skewed[k - 1])?);
    println!("distance with matching support:    {:.2}", weighted_frechet(&a, &b_even)?);
    println!("distance with mismatched support:  {:.2}", weighted_frechet(&a, &b_skew)?);
    Ok(())
}

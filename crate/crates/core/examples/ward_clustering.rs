//! Ward clustering of a small dissimilarity matrix: merge table, flat cuts,
//! Newick string and plot segments.
//!
//! cargo run --example ward_clustering

use mtsim::clustering::{cut_tree, symmetrize, ward_cluster};
use mtsim::{Matching, SimilarityMatrix};

fn main() -> mtsim::Result<()> {
    let ids: Vec<String> = ["north", "south", "east", "west", "centre"].map(String::from).to_vec();
    #[rustfmt::skip]
    let values = vec![
        0.0, 1.2, 6.0, 6.5, 3.0,
        1.0, 0.0, 5.5, 6.1, 3.2,
        6.2, 5.9, 0.0, 0.8, 3.9,
        6.4, 6.0, 0.9, 0.0, 4.1,
        2.9, 3.1, 4.0, 4.2, 0.0,
    ];
    // directed entries are averaged before clustering
    let m = symmetrize(&SimilarityMatrix::new(ids, values, false, Matching::ByName)?);
    let d = ward_cluster(&m)?;

    println!("step  a  b  height  size");
    for (s, merge) in d.merges().iter().enumerate() {
        println!("{s:>4} {:>2} {:>2} {:>7.3} {:>5}", merge.a, merge.b, merge.height, merge.size);
    }
    for k in 1..=m.len() {
        println!("k = {k}: {:?}", cut_tree(&d, k)?);
    }
    println!("\n{}", d.to_newick());
    println!("\nleaf order: {:?}", d.leaf_order());
    for s in d.segments() {
        println!(
            "step {}: ({:.1}, {:.3}) - ({:.1}, {:.3}) at height {:.3}",
            s.step, s.x_a, s.y_a, s.x_b, s.y_b, s.height
        );
    }
    Ok(())
}

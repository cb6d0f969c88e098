//! Markdown summary of a similarity run: most and least similar pairs and
//! the features driving each.

use std::fmt::Write;

use crate::io::{BreakdownRow, MatrixMeta};
use crate::types::SimilarityMatrix;

/// A directed off-diagonal entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub reference: String,
    pub compared: String,
    pub value: f64,
}

/// Off-diagonal entries, ascending by value; ties keep row-major order.
pub fn ranked_pairs(m: &SimilarityMatrix) -> Vec<Pair> {
    let ids = m.task_ids();
    let mut pairs: Vec<Pair> = (0..m.len())
        .flat_map(|i| (0..m.len()).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| Pair {
            reference: ids[i].clone(),
            compared: ids[j].clone(),
            value: m.get(i, j),
        })
        .collect();
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    pairs
}

/// The `top` largest contributions to one entry.
pub fn top_features<'a>(
    breakdown: &'a [BreakdownRow],
    pair: &Pair,
    top: usize,
) -> Vec<&'a BreakdownRow> {
    let mut rows: Vec<&BreakdownRow> = breakdown
        .iter()
        .filter(|r| r.reference == pair.reference && r.compared == pair.compared)
        .collect();
    rows.sort_by(|a, b| b.contribution.total_cmp(&a.contribution));
    rows.truncate(top);
    rows
}

fn pair_section(out: &mut String, title: &str, pairs: &[&Pair], breakdown: &[BreakdownRow], top: usize) {
    let _ = writeln!(out, "## {title}\n");
    for p in pairs {
        let _ = writeln!(out, "### {} vs {}: {:.4}\n", p.reference, p.compared, p.value);
        let rows = top_features(breakdown, p, top);
        if rows.is_empty() {
            let _ = writeln!(out, "(no breakdown rows)\n");
            continue;
        }
        let _ = writeln!(out, "| feature | matched | distance | importance | contribution |");
        let _ = writeln!(out, "|---|---|---:|---:|---:|");
        for r in rows {
            let _ = writeln!(
                out,
                "| {} | {} | {:.4} | {:.4} | {:.4} |",
                r.feature, r.matched, r.distance, r.importance, r.contribution
            );
        }
        let _ = writeln!(out);
    }
}

/// Renders the report. `pairs` entries are listed at each end of the ranking,
/// each with its `top` contributing features.
pub fn render(
    m: &SimilarityMatrix,
    meta: &MatrixMeta,
    breakdown: &[BreakdownRow],
    pairs: usize,
    top: usize,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Task similarity report\n");
    let _ = writeln!(out, "- tasks: {}", m.len());
    let _ = writeln!(out, "- matching: {}", meta.matching);
    let _ = writeln!(
        out,
        "- performance scaling: {}",
        if meta.scaled { "on (feature terms below are unscaled)" } else { "off" }
    );
    let _ = writeln!(out, "- importance: {}", meta.importance);
    let _ = writeln!(out, "- {}", meta.convention);
    if let (Some(tau), Some(v)) = (&meta.tau, meta.tau_value) {
        let flagged: Vec<&str> = meta
            .tasks
            .iter()
            .filter(|t| t.flagged)
            .map(|t| t.task_id.as_str())
            .collect();
        let list = if flagged.is_empty() { "none".to_string() } else { flagged.join(", ") };
        let _ = writeln!(out, "- loss threshold: {tau} ({v:.6}); flagged: {list}");
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Nearest and farthest task per row\n");
    let _ = writeln!(out, "| task | loss | nearest | value | farthest | value |");
    let _ = writeln!(out, "|---|---:|---|---:|---|---:|");
    let ids = m.task_ids();
    for i in 0..m.len() {
        let others = (0..m.len()).filter(|&j| j != i);
        let near = others.clone().min_by(|&a, &b| m.get(i, a).total_cmp(&m.get(i, b)));
        let far = others.max_by(|&a, &b| m.get(i, a).total_cmp(&m.get(i, b)).then(b.cmp(&a)));
        let loss = meta
            .tasks
            .iter()
            .find(|t| &t.task_id == &ids[i])
            .and_then(|t| t.loss)
            .map_or("-".to_string(), |l| format!("{l:.4}"));
        match (near, far) {
            (Some(a), Some(b)) => {
                let _ = writeln!(
                    out,
                    "| {} | {loss} | {} | {:.4} | {} | {:.4} |",
                    ids[i], ids[a], m.get(i, a), ids[b], m.get(i, b)
                );
            }
            _ => {
                let _ = writeln!(out, "| {} | {loss} | - | - | - | - |", ids[i]);
            }
        }
    }
    let _ = writeln!(out);

    let ranked = ranked_pairs(m);
    let n = pairs.min(ranked.len());
    let most: Vec<&Pair> = ranked.iter().take(n).collect();
    let least: Vec<&Pair> = ranked.iter().rev().take(n).collect();
    pair_section(&mut out, "Most similar pairs", &most, breakdown, top);
    pair_section(&mut out, "Least similar pairs", &least, breakdown, top);
    out
}

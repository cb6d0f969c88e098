//! Weighted discrete Fréchet distance between polygonal curves.
//!
//! A coupling walks both vertex sequences from their first to their last
//! vertex, advancing one or both indices at every step. Each visited pair
//! costs the Euclidean distance between the `(knot, value)` vertices times
//! the ratio of the larger to the smaller data proportion of the two
//! vertices. The sum variant takes the cheapest total cost over all
//! couplings; the classic (min) variant the cheapest maximum.

use crate::error::{Error, Result};
use crate::types::AleCurve;

/// Size cap for [`brute_force_frechet`].
pub const BRUTE_FORCE_MAX_POINTS: usize = 7;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrechetOptions {
    /// Rescale the knot axis of both curves to `[0, 1]` using their joint range.
    pub normalize_knots: bool,
}

/// `max(p, q) / min(p, q)`; both arguments must lie in `(0, 1]`.
pub fn weight_ratio(p: f64, q: f64) -> Result<f64> {
    for x in [p, q] {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::invalid(format!("weight argument {x} outside (0, 1]")));
        }
    }
    Ok(ratio(p, q))
}

#[inline]
fn ratio(p: f64, q: f64) -> f64 {
    p.max(q) / p.min(q)
}

struct Polyline<'a> {
    x: Vec<f64>,
    y: &'a [f64],
    w: &'a [f64],
}

impl Polyline<'_> {
    fn len(&self) -> usize {
        self.y.len()
    }
}

fn prepare<'a>(
    a: &'a AleCurve,
    b: &'a AleCurve,
    opts: &FrechetOptions,
) -> Result<(Polyline<'a>, Polyline<'a>)> {
    for c in [a, b] {
        if c.is_empty() {
            return Err(Error::invalid(format!(
                "curve `{}`/`{}` is empty",
                c.task_id(),
                c.feature()
            )));
        }
    }
    let (mut xa, mut xb) = (a.knots().to_vec(), b.knots().to_vec());
    if opts.normalize_knots {
        let lo = xa[0].min(xb[0]);
        let hi = xa[xa.len() - 1].max(xb[xb.len() - 1]);
        if hi > lo {
            let span = hi - lo;
            xa.iter_mut().chain(xb.iter_mut()).for_each(|x| *x = (*x - lo) / span);
        }
    }
    Ok((
        Polyline {
            x: xa,
            y: a.values(),
            w: a.proportions(),
        },
        Polyline {
            x: xb,
            y: b.values(),
            w: b.proportions(),
        },
    ))
}

#[inline]
fn pair_cost(a: &Polyline, i: usize, b: &Polyline, j: usize) -> f64 {
    let dx = a.x[i] - b.x[j];
    let dy = a.y[i] - b.y[j];
    ratio(a.w[i], b.w[j]) * (dx * dx + dy * dy).sqrt()
}

/// Sum-variant weighted discrete Fréchet distance with default options.
pub fn weighted_frechet(a: &AleCurve, b: &AleCurve) -> Result<f64> {
    weighted_frechet_with(a, b, &FrechetOptions::default())
}

/// Sum-variant weighted discrete Fréchet distance, `O(pq)` time, `O(q)` memory.
pub fn weighted_frechet_with(a: &AleCurve, b: &AleCurve, opts: &FrechetOptions) -> Result<f64> {
    let (pa, pb) = prepare(a, b, opts)?;
    Ok(dp(&pa, &pb, |best, cost| best + cost))
}

/// Classic (bottleneck) variant: the cost of a coupling is its largest
/// weighted pair distance.
pub fn frechet_min_variant(a: &AleCurve, b: &AleCurve) -> Result<f64> {
    frechet_min_variant_with(a, b, &FrechetOptions::default())
}

pub fn frechet_min_variant_with(a: &AleCurve, b: &AleCurve, opts: &FrechetOptions) -> Result<f64> {
    let (pa, pb) = prepare(a, b, opts)?;
    Ok(dp(&pa, &pb, f64::max))
}

fn dp(a: &Polyline, b: &Polyline, combine: impl Fn(f64, f64) -> f64) -> f64 {
    let q = b.len();
    let mut prev = vec![f64::INFINITY; q];
    let mut cur = vec![f64::INFINITY; q];
    for i in 0..a.len() {
        for j in 0..q {
            let cost = pair_cost(a, i, b, j);
            cur[j] = if i == 0 && j == 0 {
                cost
            } else {
                let mut best = f64::INFINITY;
                if i > 0 {
                    best = best.min(prev[j]);
                }
                if j > 0 {
                    best = best.min(cur[j - 1]);
                }
                if i > 0 && j > 0 {
                    best = best.min(prev[j - 1]);
                }
                combine(best, cost)
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[q - 1]
}

/// Exhaustive minimum over every coupling of two curves with at most
/// [`BRUTE_FORCE_MAX_POINTS`] vertices each. Test oracle for the dynamic program.
pub fn brute_force_frechet(a: &AleCurve, b: &AleCurve) -> Result<f64> {
    if a.len() > BRUTE_FORCE_MAX_POINTS || b.len() > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::invalid(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_POINTS} points per curve, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (pa, pb) = prepare(a, b, &FrechetOptions::default())?;
    let mut best = f64::INFINITY;
    walk(&pa, &pb, 0, 0, 0.0, &mut best);
    Ok(best)
}

fn walk(a: &Polyline, b: &Polyline, i: usize, j: usize, acc: f64, best: &mut f64) {
    let acc = acc + pair_cost(a, i, b, j);
    if i + 1 == a.len() && j + 1 == b.len() {
        if acc < *best {
            *best = acc;
        }
        return;
    }
    if i + 1 < a.len() {
        walk(a, b, i + 1, j, acc, best);
    }
    if j + 1 < b.len() {
        walk(a, b, i, j + 1, acc, best);
    }
    if i + 1 < a.len() && j + 1 < b.len() {
        walk(a, b, i + 1, j + 1, acc, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::GridKind;

    fn curve(points: &[(f64, f64)], props: &[f64]) -> AleCurve {
        AleCurve::new(
            "t",
            "x",
            points.iter().map(|p| p.0).collect(),
            points.iter().map(|p| p.1).collect(),
            props.to_vec(),
            vec![1; points.len()],
            GridKind::Common,
        )
        .unwrap()
    }

    #[test]
    fn weight_ratio_examples() {
        assert_eq!(weight_ratio(0.2, 0.2).unwrap(), 1.0);
        assert_eq!(weight_ratio(0.1, 0.4).unwrap(), 4.0);
        assert_eq!(weight_ratio(0.5, 0.05).unwrap(), 10.0);
        assert!(weight_ratio(0.0, 0.5).is_err());
        assert!(weight_ratio(0.5, 1.5).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = curve(&[(0.0, 0.0), (1.0, 0.5), (2.0, -0.5)], &[0.2, 0.5, 0.3]);
        assert_eq!(weighted_frechet(&a, &a).unwrap(), 0.0);

        let u = curve(&[(0.0, 0.0)], &[1.0]);
        let v = curve(&[(3.0, 4.0)], &[1.0]);
        assert_eq!(weighted_frechet(&u, &v).unwrap(), 5.0);
        assert_eq!(frechet_min_variant(&u, &v).unwrap(), 5.0);

        let a = curve(&[(0.0, 0.0), (1.0, 0.0)], &[0.5, 0.5]);
        let b = curve(&[(0.0, 1.0), (1.0, 1.0)], &[0.5, 0.5]);
        assert_eq!(brute_force_frechet(&a, &b).unwrap(), 2.0);
        assert_eq!(weighted_frechet(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn weights_scale_pair_costs() {
        let u = curve(&[(0.0, 0.0)], &[1.0]);
        let v = curve(&[(0.0, 1.0), (1.0, 1.0)], &[0.25, 0.75]);
        // only coupling: (u1,v1), (u1,v2); ratios 4 and 4/3
        let want = 4.0 * 1.0 + (4.0 / 3.0) * 2f64.sqrt();
        assert!((weighted_frechet(&u, &v).unwrap() - want).abs() <= 1e-15);
    }

    #[test]
    fn min_variant_identical_is_zero() {
        let a = curve(&[(0.0, 1.0), (1.0, 2.0)], &[0.5, 0.5]);
        assert_eq!(frechet_min_variant(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn brute_force_size_cap() {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, 0.0)).collect();
        let a = curve(&pts, &[0.125; 8]);
        assert!(brute_force_frechet(&a, &a).is_err());
    }

    #[test]
    fn knot_normalization_rescales_axis() {
        let a = curve(&[(0.0, 0.0), (100.0, 0.0)], &[0.5, 0.5]);
        let b = curve(&[(0.0, 0.0), (50.0, 0.0), (100.0, 0.0)], &[0.25, 0.5, 0.25]);
        let raw = weighted_frechet(&a, &b).unwrap();
        let opts = FrechetOptions {
            normalize_knots: true,
        };
        let norm = weighted_frechet_with(&a, &b, &opts).unwrap();
        assert!(norm < raw);
        assert!((norm * 100.0 - raw).abs() <= 1e-9);
    }
}

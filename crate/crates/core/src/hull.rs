//! Sup-norm geometry of finite point sets and their convex hulls.
//!
//! Distances to a hull are linear programs: minimise `s` subject to
//! `|Σ λ_j p_j − x|_∞ ≤ s`, `Σ λ_j = 1`, `λ ≥ 0`.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};
use rayon::prelude::*;

use crate::error::{Error, Result};

const LP_BATCH: usize = 64;

pub fn sup_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Distance from `x` to the nearest point of `points`.
pub fn distance_to_points(x: &[f64], points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|p| sup_distance(x, p))
        .fold(f64::INFINITY, f64::min)
}

/// Sup-norm distance from `x` to the convex hull of `points`.
pub fn distance_to_hull(x: &[f64], points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::input("distance to the hull of an empty set"));
    }
    let dim = x.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let lambdas: Vec<_> = points.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let s = lp.add_var(1.0, (0.0, f64::INFINITY));
    for c in 0..dim {
        let mut terms: Vec<_> = lambdas
            .iter()
            .zip(points)
            .filter(|(_, p)| p[c] != 0.0)
            .map(|(&v, p)| (v, p[c]))
            .collect();
        terms.push((s, -1.0));
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, x[c]);
        let last = terms.len() - 1;
        terms[last].1 = 1.0;
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, x[c]);
    }
    let ones: Vec<_> = lambdas.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
    match lp.solve() {
        Ok(SolveOutcome::Solution(sol)) => Ok(sol.objective().max(0.0)),
        Ok(other) => Err(Error::Solver(format!("hull distance LP stopped early: {other:?}"))),
        Err(e) => Err(Error::Solver(format!("hull distance LP failed: {e}"))),
    }
}

/// `sup_{a ∈ A} min_{b ∈ B} |a − b|_∞` and the index in `A` attaining it.
pub fn directed_points(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(f64, usize)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("Hausdorff distance of an empty set"));
    }
    let d: Vec<f64> = a.par_iter().map(|x| distance_to_points(x, b)).collect();
    Ok(argmax(&d))
}

/// `sup_{a ∈ A} dist(a, conv B)` and the index in `A` attaining it.
///
/// Points are visited in decreasing order of their distance to the points of
/// `B`, an upper bound for the hull distance, and the scan stops once that
/// bound drops to the running maximum.
pub fn directed_hull(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(f64, usize)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("Hausdorff distance of an empty set"));
    }
    let bounds: Vec<f64> = a.par_iter().map(|x| distance_to_points(x, b)).collect();
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| bounds[j].total_cmp(&bounds[i]).then(i.cmp(&j)));
    let mut best = (0.0, order[0]);
    for batch in order.chunks(LP_BATCH) {
        let live: Vec<usize> = batch.iter().copied().filter(|&i| bounds[i] > best.0).collect();
        if live.is_empty() {
            break;
        }
        let d = live
            .par_iter()
            .map(|&i| distance_to_hull(&a[i], b))
            .collect::<Result<Vec<f64>>>()?;
        for (&i, &v) in live.iter().zip(&d) {
            if v > best.0 {
                best = (v, i);
            }
        }
    }
    Ok(best)
}

/// Indices of the points that are vertices of the hull. Duplicates keep
/// their first occurrence.
pub fn extreme_points(points: &[Vec<f64>], tolerance: f64) -> Result<Vec<usize>> {
    let mut distinct: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !distinct.iter().any(|&j| points[j] == *p) {
            distinct.push(i);
        }
    }
    if distinct.len() <= 2 {
        return Ok(distinct);
    }
    let keep = distinct
        .par_iter()
        .map(|&i| {
            let others: Vec<Vec<f64>> = distinct
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| points[j].clone())
                .collect();
            distance_to_hull(&points[i], &others).map(|d| d > tolerance)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(distinct
        .into_iter()
        .zip(keep)
        .filter_map(|(i, k)| k.then_some(i))
        .collect())
}

/// Coordinates on which the points of `a` and `b` do not all agree.
pub fn varying_coordinates(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<usize> {
    let Some(first) = a.first().or(b.first()) else {
        return Vec::new();
    };
    (0..first.len())
        .filter(|&c| a.iter().chain(b).any(|p| p[c] != first[c]))
        .collect()
}

pub fn project(points: &[Vec<f64>], coords: &[usize]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| coords.iter().map(|&c| p[c]).collect())
        .collect()
}

fn argmax(values: &[f64]) -> (f64, usize) {
    let mut best = (values[0], 0);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.0 {
            best = (v, i);
        }
    }
    best
}

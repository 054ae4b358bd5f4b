//! Random two-colorings of an atomic action and their deviation from the
//! independent law on a finite window.
//!
//! For a window `G = (γ_0, …, γ_{g−1})`, a coloring `c` of the atoms and a
//! base partition `R`, atom `x` has color pattern `τ_x(j) = c(γ_j⁻¹ x)` and
//! class pattern `σ_x(j) = R(γ_j⁻¹ x)`. Then `Z_τ ∩ R_σ` is the set of atoms
//! with both patterns, and an ideal coloring gives every `τ` the share
//! `2^{−g}` of each `R_σ`.

use std::collections::BTreeMap;

use num::{BigRational, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::action::FiniteAction;
use crate::error::{Error, Result};
use crate::group_window::{evaluate_word, Word};
use crate::moment::Partition;

pub const DEFAULT_WINDOW_LIMIT: usize = 12;

fn preimages(a: &FiniteAction, words: &[Word]) -> Result<Vec<Vec<usize>>> {
    words
        .iter()
        .map(|w| evaluate_word(a, &w.inverse()).map(|p| p.images().to_vec()))
        .collect()
}

/// Atoms on which `γ ↦ γx` is injective over the window.
pub fn injectivity_set(a: &FiniteAction, words: &[Word]) -> Result<Vec<bool>> {
    let images = words
        .iter()
        .map(|w| evaluate_word(a, w).map(|p| p.images().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..a.atom_count())
        .map(|x| {
            let mut seen: Vec<usize> = images.iter().map(|im| im[x]).collect();
            seen.sort_unstable();
            seen.windows(2).all(|w| w[0] != w[1])
        })
        .collect())
}

/// Mass of the atoms where two distinct window words agree.
pub fn freeness_defect(a: &FiniteAction, words: &[Word]) -> Result<BigRational> {
    let free = injectivity_set(a, words)?;
    let mut mass = BigRational::zero();
    for (w, ok) in a.weights().iter().zip(free) {
        if !ok {
            mass += w;
        }
    }
    Ok(mass)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionStats {
    pub delta: f64,
    pub window_size: usize,
    pub target: f64,
    pub trials: u64,
    pub seed: u64,
    pub freeness_defect: f64,
    pub max_deviation_per_trial: Vec<f64>,
    pub empirical_failure_rate: f64,
    pub chebyshev_bound: f64,
    /// `δ² / (8 (2r)^{g²})` with `r` the number of base classes.
    pub analytic_variance_bound: f64,
    /// The coloring of the first trial whose deviation stayed below `δ`.
    pub witness_coloring: Option<Vec<usize>>,
}

type CellMasses = BTreeMap<(Vec<usize>, usize), u128>;

struct Cells {
    denominator: f64,
    /// Integer mass of `R_σ` per class pattern, in pattern order.
    class_mass: Vec<(Vec<usize>, u128)>,
}

/// Masses of `Z_τ ∩ R_σ` for one coloring, keyed by `(σ, τ)` with `τ`
/// packed into bits (bit `j` is the color at `γ_j`).
fn cell_masses(pre: &[Vec<usize>], weights: &[u128], base: &[usize], coloring: &[u8]) -> BTreeMap<(Vec<usize>, usize), u128> {
    let mut out = BTreeMap::new();
    for (x, &w) in weights.iter().enumerate() {
        let sigma: Vec<usize> = pre.iter().map(|p| base[p[x]]).collect();
        let tau = pre
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, p)| acc | ((coloring[p[x]] as usize) << j));
        *out.entry((sigma, tau)).or_insert(0) += w;
    }
    out
}

fn max_deviation(cells: &Cells, masses: &BTreeMap<(Vec<usize>, usize), u128>, g: usize) -> f64 {
    let share = 0.5f64.powi(g as i32);
    let mut worst: f64 = 0.0;
    for (sigma, total) in &cells.class_mass {
        let expected = share * (*total as f64) / cells.denominator;
        let present = masses.range((sigma.clone(), 0)..(sigma.clone(), usize::MAX));
        let mut count = 0usize;
        for (_, &m) in present {
            count += 1;
            worst = worst.max((m as f64 / cells.denominator - expected).abs());
        }
        if count < 1 << g {
            worst = worst.max(expected);
        }
    }
    worst
}

fn coloring_for(seed: u64, trial: u64, m: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    (0..m).map(|_| rng.gen_range(0..2u8)).collect()
}

/// Colors the atoms uniformly at random `trials` times and records, per
/// trial, the largest deviation of `μ(Z_τ ∩ R_σ)` from `2^{−g} μ(R_σ)`.
///
/// Trial `i` draws one color per atom, in atom order, from ChaCha8 seeded
/// with `seed` on stream `i`.
pub fn claim1_experiment(
    a: &FiniteAction,
    words: &[Word],
    base: &Partition,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<PartitionStats> {
    let g = words.len();
    if g == 0 {
        return Err(Error::input("the window must contain at least one word"));
    }
    if g > DEFAULT_WINDOW_LIMIT {
        return Err(Error::budget("colour patterns 2^|G| over the window", format!("|G| = {g}"), DEFAULT_WINDOW_LIMIT as u64));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::input(format!("delta must be positive, got {delta}")));
    }
    if trials == 0 {
        return Err(Error::input("at least one trial is required"));
    }
    if base.atom_count() != a.atom_count() {
        return Err(Error::input(format!(
            "base partition labels {} atoms but the action has {}",
            base.atom_count(),
            a.atom_count()
        )));
    }
    let m = a.atom_count();
    let pre = preimages(a, words)?;
    let (denominator, weights) = a.integer_weights()?;
    let labels = base.labels();
    let mut class_mass: BTreeMap<Vec<usize>, u128> = BTreeMap::new();
    for (x, &w) in weights.iter().enumerate() {
        let sigma: Vec<usize> = pre.iter().map(|p| labels[p[x]]).collect();
        *class_mass.entry(sigma).or_insert(0) += w;
    }
    let cells = Cells {
        denominator: denominator as f64,
        class_mass: class_mass.into_iter().collect(),
    };

    let per_trial: Vec<(f64, CellMasses)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let coloring = coloring_for(seed, t, m);
            let masses = cell_masses(&pre, &weights, labels, &coloring);
            (max_deviation(&cells, &masses, g), masses)
        })
        .collect();

    let deviations: Vec<f64> = per_trial.iter().map(|(d, _)| *d).collect();
    let failures = deviations.iter().filter(|&&d| d >= delta).count();
    let witness_coloring = deviations
        .iter()
        .position(|&d| d < delta)
        .map(|t| coloring_for(seed, t as u64, m).into_iter().map(usize::from).collect());

    let n = trials as f64;
    let mut variance_sum = 0.0;
    for (sigma, _) in &cells.class_mass {
        for tau in 0..1usize << g {
            let key = (sigma.clone(), tau);
            let xs: Vec<f64> = per_trial
                .iter()
                .map(|(_, masses)| masses.get(&key).map_or(0.0, |&v| v as f64 / cells.denominator))
                .collect();
            let mean = xs.iter().sum::<f64>() / n;
            variance_sum += xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        }
    }
    let half = delta / 2.0;
    let r = base.class_count() as f64;
    let defect = freeness_defect(a, words)?;
    Ok(PartitionStats {
        delta,
        window_size: g,
        target: 0.5f64.powi(g as i32),
        trials,
        seed,
        freeness_defect: ratio_to_f64(&defect),
        max_deviation_per_trial: deviations,
        empirical_failure_rate: failures as f64 / n,
        chebyshev_bound: (variance_sum / (half * half)).min(1.0),
        analytic_variance_bound: delta * delta / (8.0 * (2.0 * r).powi((g * g) as i32)),
        witness_coloring,
    })
}

pub(crate) fn ratio_to_f64(x: &BigRational) -> f64 {
    use num::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

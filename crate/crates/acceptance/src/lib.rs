//! Seeded random instances and brute-force oracles shared by the acceptance
//! suite.

use num::{BigInt, BigRational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wequiv::action::{random_action, FiniteAction, Permutation};
use wequiv::group_window::{evaluate_word, Word};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// A random action with between 1 and `max_atoms` atoms and dyadic orbit
/// masses with denominator 8.
pub fn action(rng: &mut ChaCha8Rng, max_atoms: usize, generators: usize) -> FiniteAction {
    let atoms = rng.gen_range(1..=max_atoms);
    random_action(rng, atoms, generators, 3).expect("valid random action")
}

pub fn shuffle(rng: &mut ChaCha8Rng, m: usize) -> Permutation {
    let mut images: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        images.swap(i, rng.gen_range(0..=i));
    }
    Permutation::new(images).expect("a shuffle is a permutation")
}

pub fn relabeled(rng: &mut ChaCha8Rng, a: &FiniteAction) -> FiniteAction {
    a.relabel(&shuffle(rng, a.atom_count())).expect("relabeling preserves validity")
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, m - 1);
            out.push(q);
        }
    }
    out
}

/// Every weight-preserving bijection `T` with `T(γ^a x) = γ^b T(x)` for all
/// words, found by trying all `m!` bijections.
pub fn brute_force_conjugators(a: &FiniteAction, b: &FiniteAction, words: &[Word]) -> Vec<Vec<usize>> {
    let m = a.atom_count();
    if b.atom_count() != m {
        return Vec::new();
    }
    let pa: Vec<Permutation> = words.iter().map(|w| evaluate_word(a, w).unwrap()).collect();
    let pb: Vec<Permutation> = words.iter().map(|w| evaluate_word(b, w).unwrap()).collect();
    permutations(m)
        .into_iter()
        .filter(|t| {
            (0..m).all(|x| a.weights()[x] == b.weights()[t[x]])
                && pa
                    .iter()
                    .zip(&pb)
                    .all(|(ga, gb)| (0..m).all(|x| t[ga.apply(x)] == gb.apply(t[x])))
        })
        .collect()
}

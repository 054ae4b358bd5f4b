//! Small named actions of the free group on one generator.

use num::{BigInt, BigRational};

use crate::action::{FiniteAction, Permutation};

fn uniform(m: usize) -> Vec<BigRational> {
    vec![BigRational::new(BigInt::from(1), BigInt::from(m)); m]
}

/// Two atoms swapped by the generator.
pub fn swap() -> FiniteAction {
    FiniteAction::new(uniform(2), vec![Permutation::new(vec![1, 0]).unwrap()], "swap").unwrap()
}

/// Two atoms, generator acting trivially.
pub fn fix() -> FiniteAction {
    FiniteAction::new(uniform(2), vec![Permutation::identity(2)], "fix").unwrap()
}

/// Four atoms rotated by the generator.
pub fn cycle4() -> FiniteAction {
    cycle(4).with_label("cycle4")
}

/// `m` atoms rotated by the generator, `x ↦ x + 1 mod m`.
pub fn cycle(m: usize) -> FiniteAction {
    let images = (0..m).map(|x| (x + 1) % m).collect();
    FiniteAction::new(uniform(m), vec![Permutation::new(images).unwrap()], format!("cycle({m})"))
        .unwrap()
}

/// `q` uniform atoms, generator acting trivially.
pub fn trivial(q: usize) -> FiniteAction {
    FiniteAction::trivial(q, 1).unwrap()
}

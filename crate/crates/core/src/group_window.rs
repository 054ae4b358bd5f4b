//! Free groups at a finite window.
//!
//! Elements of the free group `F_k` are reduced words over signed generator
//! indices. A [`GroupWindow`] is the ball of radius `r` listed in a fixed
//! order: by length, then lexicographically on letters with
//! `g1 < g1⁻¹ < g2 < g2⁻¹ < …`. The numeric value of the partition metric
//! depends on this order (it decides which words are `γ_1, …, γ_n`), so the
//! order is part of the public contract.
//!
//! Named groups `F_k / ⟨R⟩` are not modelled directly: an action of the
//! quotient is an action of `F_k` with [`relator_defect`] equal to zero.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num::{BigRational, Zero};

use crate::action::{FiniteAction, Permutation};
use crate::error::{Error, Result};

/// A reduced word. Letters are 1-based signed generator indices; a negative
/// letter is the inverse generator. The empty word is the identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word(Vec<i32>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn generator(index: usize) -> Self {
        Word(vec![index as i32])
    }

    /// Builds a word from arbitrary letters, freely reducing as it goes.
    pub fn from_letters(letters: impl IntoIterator<Item = i32>) -> Result<Self> {
        let mut out: Vec<i32> = Vec::new();
        for l in letters {
            if l == 0 {
                return Err(Error::input("generator index 0 is not a letter"));
            }
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Ok(Word(out))
    }

    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Word(self.0.iter().rev().map(|l| -l).collect())
    }

    /// The reduced product `self · other`.
    pub fn concat(&self, other: &Word) -> Self {
        Word::from_letters(self.0.iter().chain(other.0.iter()).copied())
            .expect("letters of reduced words are nonzero")
    }

    /// Largest generator index used, 0 for the identity.
    pub fn max_generator(&self) -> usize {
        self.0.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0)
    }
}

fn letter_key(l: i32) -> (u32, bool) {
    (l.unsigned_abs(), l < 0)
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| {
            self.0
                .iter()
                .map(|&l| letter_key(l))
                .cmp(other.0.iter().map(|&l| letter_key(l)))
        })
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lowercase letters are generators `g1 = a, g2 = b, …`; uppercase letters
/// are their inverses. The identity prints as `1`.
impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for &l in &self.0 {
            let i = l.unsigned_abs();
            if i <= 26 {
                let base = if l > 0 { b'a' } else { b'A' };
                write!(f, "{}", (base + (i - 1) as u8) as char)?;
            } else if l > 0 {
                write!(f, "<g{i}>")?;
            } else {
                write!(f, "<G{i}>")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Accepts `""` or `"1"` for the identity. Input is reduced.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "1" {
            return Ok(Word::identity());
        }
        let letters = s
            .chars()
            .map(|c| match c {
                'a'..='z' => Ok(c as i32 - 'a' as i32 + 1),
                'A'..='Z' => Ok(-(c as i32 - 'A' as i32 + 1)),
                _ => Err(Error::input(format!("invalid letter {c:?} in word {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Word::from_letters(letters)
    }
}

/// The ordered ball of radius `radius` in the free group on
/// `num_generators` letters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupWindow {
    num_generators: usize,
    radius: usize,
    words: Vec<Word>,
}

impl GroupWindow {
    pub fn num_generators(&self) -> usize {
        self.num_generators
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// The first `n` words `γ_1, …, γ_n`.
    pub fn prefix(&self, n: usize) -> Result<&[Word]> {
        self.words.get(..n).ok_or_else(|| {
            Error::input(format!(
                "window of radius {} has {} words, {} requested",
                self.radius,
                self.words.len(),
                n
            ))
        })
    }

    pub fn position(&self, word: &Word) -> Option<usize> {
        self.words.binary_search(word).ok()
    }

    /// Smallest window over `num_generators` letters with at least `n` words.
    pub fn covering(num_generators: usize, n: usize) -> Result<Self> {
        let mut radius = 0;
        loop {
            let size = window_size(num_generators, radius);
            if size >= n as u128 {
                return build_window(num_generators, radius);
            }
            radius += 1;
        }
    }
}

/// `1 + Σ_{l=1..r} 2k(2k−1)^{l−1}`, the number of reduced words of length
/// at most `r`.
pub fn window_size(num_generators: usize, radius: usize) -> u128 {
    let k = num_generators as u128;
    let mut total: u128 = 1;
    let mut layer: u128 = 2 * k;
    for _ in 0..radius {
        total = total.saturating_add(layer);
        layer = layer.saturating_mul((2 * k).saturating_sub(1));
    }
    total
}

/// All reduced words of length `≤ radius` in window order.
pub fn build_window(num_generators: usize, radius: usize) -> Result<GroupWindow> {
    if num_generators == 0 {
        return Err(Error::input("a window needs at least one generator"));
    }
    let letters: Vec<i32> = (1..=num_generators as i32).flat_map(|i| [i, -i]).collect();
    let mut words = vec![Word::identity()];
    let mut layer = vec![Word::identity()];
    for _ in 0..radius {
        let mut next = Vec::with_capacity(layer.len() * letters.len());
        for w in &layer {
            for &l in &letters {
                if w.0.last() == Some(&-l) {
                    continue;
                }
                let mut v = w.0.clone();
                v.push(l);
                next.push(Word(v));
            }
        }
        words.extend(next.iter().cloned());
        layer = next;
    }
    Ok(GroupWindow {
        num_generators,
        radius,
        words,
    })
}

/// The permutation `w^a`, with `(uv)^a = u^a ∘ v^a`: the rightmost letter
/// acts first.
pub fn evaluate_word(action: &FiniteAction, word: &Word) -> Result<Permutation> {
    let gens = action.generators();
    if word.max_generator() > gens.len() {
        return Err(Error::input(format!(
            "word {word} uses generator {} but the action has {}",
            word.max_generator(),
            gens.len()
        )));
    }
    let m = action.atom_count();
    let inverses: Vec<Permutation> = gens.iter().map(Permutation::inverse).collect();
    let mut images: Vec<usize> = (0..m).collect();
    for (x, image) in images.iter_mut().enumerate() {
        let mut y = x;
        for &l in word.letters().iter().rev() {
            let i = l.unsigned_abs() as usize - 1;
            y = if l > 0 { gens[i].apply(y) } else { inverses[i].apply(y) };
        }
        *image = y;
    }
    Ok(Permutation::from_images_unchecked(images))
}

/// Total mass of atoms moved by at least one relator. Zero means the action
/// factors through `F_k / ⟨relators⟩`.
pub fn relator_defect(action: &FiniteAction, relators: &[Word]) -> Result<BigRational> {
    let perms = relators
        .iter()
        .map(|r| evaluate_word(action, r))
        .collect::<Result<Vec<_>>>()?;
    let mut mass = BigRational::zero();
    for (x, w) in action.weights().iter().enumerate() {
        if perms.iter().any(|p| p.apply(x) != x) {
            mass += w;
        }
    }
    Ok(mass)
}

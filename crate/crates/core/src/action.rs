//! Finite measure-preserving actions and the convex-combination algebra on
//! them.
//!
//! A [`FiniteAction`] is a probability measure on finitely many atoms with
//! one permutation per free generator. Weights are exact rationals, and every
//! generator must preserve them. Zero-mass atoms are dropped at construction,
//! so `convex_combine(0, a, b)` is literally `b` rather than `b` up to a null
//! set.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num::integer::Integer;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_window::{relator_defect, Word};

/// A bijection of `{0, …, m−1}` stored by its images.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let m = images.len();
        let mut seen = vec![false; m];
        for &y in &images {
            if y >= m || seen[y] {
                return Err(Error::input(format!("{images:?} is not a permutation of 0..{m}")));
            }
            seen[y] = true;
        }
        Ok(Permutation { images })
    }

    pub(crate) fn from_images_unchecked(images: Vec<usize>) -> Self {
        debug_assert!(Permutation::new(images.clone()).is_ok());
        Permutation { images }
    }

    pub fn identity(m: usize) -> Self {
        Permutation {
            images: (0..m).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &y)| i == y)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.images.len()];
        for (x, &y) in self.images.iter().enumerate() {
            inv[y] = x;
        }
        Permutation { images: inv }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Self {
        Permutation {
            images: other.images.iter().map(|&y| self.images[y]).collect(),
        }
    }
}

/// A weighted finite set with one weight-preserving permutation per
/// generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteAction {
    weights: Vec<BigRational>,
    generators: Vec<Permutation>,
    label: String,
}

impl FiniteAction {
    /// Validates the measure and the generators, then drops zero-mass atoms.
    pub fn new(
        weights: Vec<BigRational>,
        generators: Vec<Permutation>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return Err(Error::input("an action needs at least one atom"));
        }
        if generators.is_empty() {
            return Err(Error::input("an action needs at least one generator"));
        }
        if let Some(w) = weights.iter().find(|w| w.is_negative()) {
            return Err(Error::input(format!("negative weight {w}")));
        }
        let total: BigRational = weights.iter().sum();
        if !total.is_one() {
            return Err(Error::input(format!("weights sum to {total}, not 1")));
        }
        for (i, g) in generators.iter().enumerate() {
            if g.len() != m {
                return Err(Error::input(format!(
                    "generator {} acts on {} atoms, expected {m}",
                    i + 1,
                    g.len()
                )));
            }
            if let Some(x) = (0..m).find(|&x| weights[g.apply(x)] != weights[x]) {
                return Err(Error::input(format!(
                    "generator {} maps atom {x} (weight {}) to atom {} (weight {}): not measure preserving",
                    i + 1,
                    weights[x],
                    g.apply(x),
                    weights[g.apply(x)]
                )));
            }
        }
        let mut action = FiniteAction {
            weights,
            generators,
            label: label.into(),
        };
        action.drop_null_atoms();
        Ok(action)
    }

    fn drop_null_atoms(&mut self) {
        if self.weights.iter().all(|w| !w.is_zero()) {
            return;
        }
        let keep: Vec<usize> = (0..self.weights.len())
            .filter(|&x| !self.weights[x].is_zero())
            .collect();
        let mut index = vec![usize::MAX; self.weights.len()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        self.weights = keep.iter().map(|&x| self.weights[x].clone()).collect();
        self.generators = self
            .generators
            .iter()
            .map(|g| Permutation {
                images: keep.iter().map(|&x| index[g.apply(x)]).collect(),
            })
            .collect();
    }

    pub fn atom_count(&self) -> usize {
        self.weights.len()
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// The trivial action on `q` uniform atoms.
    pub fn trivial(q: usize, generator_count: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::input("trivial action needs q >= 1"));
        }
        let w = BigRational::new(BigInt::one(), BigInt::from(q));
        FiniteAction::new(
            vec![w; q],
            vec![Permutation::identity(q); generator_count],
            format!("trivial({q})"),
        )
    }

    /// Moves atom `x` to position `perm[x]`. The result is isomorphic to
    /// `self` via `perm`.
    pub fn relabel(&self, perm: &Permutation) -> Result<Self> {
        let m = self.atom_count();
        if perm.len() != m {
            return Err(Error::input("relabeling has the wrong size"));
        }
        let inv = perm.inverse();
        let mut weights = vec![BigRational::zero(); m];
        for x in 0..m {
            weights[perm.apply(x)] = self.weights[x].clone();
        }
        let generators = self
            .generators
            .iter()
            .map(|g| perm.compose(g).compose(&inv))
            .collect();
        Ok(FiniteAction {
            weights,
            generators,
            label: self.label.clone(),
        })
    }

    /// Common denominator `D` and integer numerators `D·μ(x)`, for exact
    /// accumulation without big-integer arithmetic in hot loops.
    pub fn integer_weights(&self) -> Result<(u128, Vec<u128>)> {
        let denom = self
            .weights
            .iter()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let d = denom
            .to_u128()
            .ok_or_else(|| Error::input(format!("weight denominator {denom} exceeds 128 bits")))?;
        let numers = self
            .weights
            .iter()
            .map(|w| {
                (w.numer() * (&denom / w.denom()))
                    .to_u128()
                    .expect("numerator is bounded by the denominator")
            })
            .collect();
        Ok((d, numers))
    }

    /// Checks that every relator acts trivially.
    pub fn check_relators(&self, relators: &[Word]) -> Result<()> {
        let defect = relator_defect(self, relators)?;
        if defect.is_zero() {
            Ok(())
        } else {
            Err(Error::input(format!(
                "relators move atoms of total mass {defect}; the action does not factor through the quotient"
            )))
        }
    }
}

fn check_same_generators(a: &FiniteAction, b: &FiniteAction) -> Result<()> {
    if a.generator_count() != b.generator_count() {
        return Err(Error::input(format!(
            "generator counts differ: {} vs {}",
            a.generator_count(),
            b.generator_count()
        )));
    }
    Ok(())
}

fn fmt_ratio(t: &BigRational) -> String {
    t.to_string()
}

/// `t·a + (1−t)·b`: the disjoint union with `a`'s atoms first, weights
/// scaled by `t` and `1−t`. A block of zero mass disappears.
pub fn convex_combine(t: &BigRational, a: &FiniteAction, b: &FiniteAction) -> Result<FiniteAction> {
    let one = BigRational::one();
    let s = &one - t;
    finite_mixture(&[(t.clone(), a.clone()), (s, b.clone())]).map(|c| {
        c.with_label(format!("cc({}; {}, {})", fmt_ratio(t), a.label, b.label))
    })
}

/// `Σ λ_i a_i` on `⊔ λ_i X_i`, blocks in the given order.
pub fn finite_mixture(terms: &[(BigRational, FiniteAction)]) -> Result<FiniteAction> {
    if terms.is_empty() {
        return Err(Error::input("a mixture needs at least one term"));
    }
    let total: BigRational = terms.iter().map(|(l, _)| l.clone()).sum();
    if !total.is_one() {
        return Err(Error::input(format!("mixture coefficients sum to {total}, not 1")));
    }
    if let Some((l, _)) = terms.iter().find(|(l, _)| l.is_negative()) {
        return Err(Error::input(format!("negative mixture coefficient {l}")));
    }
    let gens = terms[0].1.generator_count();
    for (_, a) in terms {
        check_same_generators(&terms[0].1, a)?;
    }
    let mut weights = Vec::new();
    let mut images: Vec<Vec<usize>> = vec![Vec::new(); gens];
    for (lambda, a) in terms.iter().filter(|(l, _)| !l.is_zero()) {
        let offset = weights.len();
        weights.extend(a.weights.iter().map(|w| w * lambda));
        for (i, g) in a.generators.iter().enumerate() {
            images[i].extend(g.images.iter().map(|&y| y + offset));
        }
    }
    let label = terms
        .iter()
        .map(|(l, a)| format!("{}·{}", fmt_ratio(l), a.label))
        .collect::<Vec<_>>()
        .join(" + ");
    Ok(FiniteAction {
        weights,
        generators: images.into_iter().map(|images| Permutation { images }).collect(),
        label,
    })
}

/// Diagonal action on the product space; atom `(x, y)` has index
/// `x · |Y| + y`.
pub fn product(a: &FiniteAction, b: &FiniteAction) -> Result<FiniteAction> {
    check_same_generators(a, b)?;
    let mb = b.atom_count();
    let mut weights = Vec::with_capacity(a.atom_count() * mb);
    for wa in &a.weights {
        for wb in &b.weights {
            weights.push(wa * wb);
        }
    }
    let generators = a
        .generators
        .iter()
        .zip(&b.generators)
        .map(|(ga, gb)| {
            let mut images = Vec::with_capacity(weights.len());
            for x in 0..a.atom_count() {
                for y in 0..mb {
                    images.push(ga.apply(x) * mb + gb.apply(y));
                }
            }
            Permutation { images }
        })
        .collect();
    Ok(FiniteAction {
        weights,
        generators,
        label: format!("{} x {}", a.label, b.label),
    })
}

/// `a × ι_q`: each atom split into `q` equal pieces, generators acting on
/// the first coordinate only.
pub fn refine(a: &FiniteAction, q: usize) -> Result<FiniteAction> {
    if q == 0 {
        return Err(Error::input("refinement factor must be at least 1"));
    }
    if q == 1 {
        return Ok(a.clone());
    }
    let t = FiniteAction::trivial(q, a.generator_count())?;
    Ok(product(a, &t)?.with_label(format!("refine({}, {q})", a.label)))
}

/// True iff the generators act transitively on the atoms.
pub fn is_ergodic(a: &FiniteAction) -> bool {
    orbits_of(a.atom_count(), &a.generators).len() == 1
}

/// A random action on `atoms` atoms with uniformly random generators. Orbit
/// masses are random dyadic numbers `j / 2^depth` summing to one, spread
/// evenly over each orbit.
pub fn random_action<R: Rng + ?Sized>(
    rng: &mut R,
    atoms: usize,
    generator_count: usize,
    depth: u32,
) -> Result<FiniteAction> {
    if atoms == 0 {
        return Err(Error::input("random action needs at least one atom"));
    }
    let generators: Vec<Permutation> = (0..generator_count)
        .map(|_| {
            let mut images: Vec<usize> = (0..atoms).collect();
            for i in (1..atoms).rev() {
                images.swap(i, rng.gen_range(0..=i));
            }
            Permutation { images }
        })
        .collect();
    let orbits = orbits_of(atoms, &generators);
    // Positive integer masses summing to 2^depth, one per orbit.
    let units: u64 = 1 << depth;
    let k = orbits.len() as u64;
    let units = units.max(k);
    let mut cuts: BTreeSet<u64> = BTreeSet::new();
    while cuts.len() < (k - 1) as usize {
        cuts.insert(rng.gen_range(1..units));
    }
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(units);
    let mut weights = vec![BigRational::zero(); atoms];
    for (orbit, pair) in orbits.iter().zip(bounds.windows(2)) {
        let mass = BigRational::new(BigInt::from(pair[1] - pair[0]), BigInt::from(units));
        let each = mass / BigInt::from(orbit.len());
        for &x in orbit {
            weights[x] = each.clone();
        }
    }
    FiniteAction::new(weights, generators, "random")
}

/// Orbits of the group generated by `generators`, each sorted, listed by
/// least element.
pub(crate) fn orbits_of(m: usize, generators: &[Permutation]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    for g in generators {
        for x in 0..m {
            let (a, b) = (find(&mut parent, x), find(&mut parent, g.apply(x)));
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi] = lo;
            }
        }
    }
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; m];
    for x in 0..m {
        let r = find(&mut parent, x);
        if slot[r] == usize::MAX {
            slot[r] = orbits.len();
            orbits.push(Vec::new());
        }
        orbits[slot[r]].push(x);
    }
    orbits
}

/// On-disk form of an action: JSON with exact `"p/q"` weights and 0-based
/// generator images.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionFile {
    pub atoms: usize,
    pub weights: Vec<String>,
    pub generators: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relators: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ActionFile {
    /// Parses and validates, reporting the first violated invariant.
    pub fn into_action(self) -> Result<FiniteAction> {
        if self.weights.len() != self.atoms {
            return Err(Error::input(format!(
                "atoms = {} but {} weights given",
                self.atoms,
                self.weights.len()
            )));
        }
        let weights = self
            .weights
            .iter()
            .map(|s| {
                BigRational::from_str(s.trim())
                    .map_err(|_| Error::input(format!("weight {s:?} is not a rational p/q")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(w) = weights.iter().find(|w| !w.is_positive()) {
            return Err(Error::input(format!("weight {w} is not positive")));
        }
        let generators = self
            .generators
            .into_iter()
            .enumerate()
            .map(|(i, images)| {
                if images.len() != self.atoms {
                    return Err(Error::input(format!(
                        "generator {} has {} images, expected {}",
                        i + 1,
                        images.len(),
                        self.atoms
                    )));
                }
                Permutation::new(images)
            })
            .collect::<Result<Vec<_>>>()?;
        if generators.len() > 26 {
            return Err(Error::input("at most 26 generators can be named by letters"));
        }
        let action = FiniteAction::new(weights, generators, self.label.unwrap_or_default())?;
        if let Some(relators) = &self.relators {
            let words = relators
                .iter()
                .map(|r| r.parse::<Word>())
                .collect::<Result<Vec<_>>>()?;
            action.check_relators(&words)?;
        }
        Ok(action)
    }

    pub fn from_action(a: &FiniteAction) -> Self {
        ActionFile {
            atoms: a.atom_count(),
            weights: a.weights.iter().map(|w| w.to_string()).collect(),
            generators: a.generators.iter().map(|g| g.images.clone()).collect(),
            relators: None,
            label: Some(a.label.clone()),
        }
    }
}

impl FromStr for FiniteAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let file: ActionFile =
            serde_json::from_str(s).map_err(|e| Error::input(format!("action file: {e}")))?;
        file.into_action()
    }
}

impl fmt::Display for FiniteAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let json = serde_json::to_string(&ActionFile::from_action(self)).map_err(|_| fmt::Error)?;
        f.write_str(&json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{cycle4, fix, swap, trivial};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn construction_rejects_bad_measures() {
        let half = r(1, 2);
        let bad_sum = FiniteAction::new(vec![half.clone(), r(1, 3)], vec![Permutation::identity(2)], "");
        assert!(matches!(bad_sum, Err(Error::Input(_))));
        let not_preserving = FiniteAction::new(
            vec![r(1, 4), r(3, 4)],
            vec![Permutation::new(vec![1, 0]).unwrap()],
            "",
        );
        assert!(not_preserving.unwrap_err().to_string().contains("not measure preserving"));
        assert!(Permutation::new(vec![0, 0]).is_err());
    }

    #[test]
    fn null_atoms_are_dropped() {
        let a = FiniteAction::new(
            vec![r(1, 2), BigRational::zero(), r(1, 2)],
            vec![Permutation::new(vec![2, 1, 0]).unwrap()],
            "",
        )
        .unwrap();
        assert_eq!(a.atom_count(), 2);
        assert_eq!(a.generators()[0].images(), &[1, 0]);
    }

    #[test]
    fn convex_combination_edges() {
        let zero = BigRational::zero();
        let one = BigRational::one();
        let c = convex_combine(&zero, &swap(), &fix()).unwrap();
        assert_eq!(c.weights(), fix().weights());
        assert_eq!(c.generators(), fix().generators());
        let c = convex_combine(&one, &swap(), &fix()).unwrap();
        assert_eq!(c.generators(), swap().generators());
    }

    #[test]
    fn convex_combination_blocks() {
        let c = convex_combine(&r(1, 2), &swap(), &swap()).unwrap();
        assert_eq!(c.weights(), &vec![r(1, 4); 4][..]);
        assert_eq!(c.generators()[0].images(), &[1, 0, 3, 2]);
        let c = convex_combine(&r(1, 2), &swap(), &fix()).unwrap();
        assert_eq!(c.generators()[0].images(), &[1, 0, 2, 3]);
        assert!(convex_combine(&r(1, 2), &swap(), &FiniteAction::trivial(1, 2).unwrap()).is_err());
    }

    #[test]
    fn mixtures() {
        let m = finite_mixture(&[(BigRational::one(), cycle4())]).unwrap();
        assert_eq!(m.generators(), cycle4().generators());
        let m = finite_mixture(&[(r(1, 4), swap()), (r(1, 4), swap()), (r(1, 2), fix())]).unwrap();
        assert_eq!(m.atom_count(), 6);
        assert!(finite_mixture(&[(r(1, 4), swap()), (r(1, 4), fix())]).is_err());
    }

    #[test]
    fn products_and_refinement() {
        let p = product(&swap(), &trivial(1)).unwrap();
        assert_eq!(p.generators(), swap().generators());
        let p = product(&swap(), &trivial(2)).unwrap();
        assert_eq!(p.weights(), &vec![r(1, 4); 4][..]);
        assert_eq!(p.generators()[0].images(), &[2, 3, 0, 1]);
        let p = product(&swap(), &swap()).unwrap();
        assert_eq!(p.generators()[0].images(), &[3, 2, 1, 0]);
        assert_eq!(orbits_of(4, p.generators()), vec![vec![0, 3], vec![1, 2]]);
        assert_eq!(refine(&swap(), 2).unwrap().generators(), product(&swap(), &trivial(2)).unwrap().generators());
        let f = refine(&fix(), 3).unwrap();
        assert_eq!(f.atom_count(), 6);
        assert!(f.generators()[0].is_identity());
        assert_eq!(f.weights()[0], r(1, 6));
        assert_eq!(refine(&cycle4(), 1).unwrap(), cycle4());
    }

    #[test]
    fn ergodicity() {
        assert!(is_ergodic(&swap()));
        assert!(!is_ergodic(&fix()));
        assert!(is_ergodic(&cycle4()));
        assert!(!is_ergodic(&convex_combine(&r(1, 2), &swap(), &swap()).unwrap()));
    }

    #[test]
    fn relabel_round_trip() {
        let p = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        let a = cycle4().relabel(&p).unwrap();
        assert_eq!(a.relabel(&p.inverse()).unwrap(), cycle4());
    }

    #[test]
    fn file_format() {
        let text = r#"{"atoms": 2, "weights": ["1/2", "1/2"], "generators": [[1, 0]], "relators": ["aa"], "label": "swap"}"#;
        let a: FiniteAction = text.parse().unwrap();
        assert_eq!(a.generators(), swap().generators());
        let bad = r#"{"atoms": 4, "weights": ["1/4","1/4","1/4","1/4"], "generators": [[1,2,3,0]], "relators": ["aa"]}"#;
        assert!(bad.parse::<FiniteAction>().unwrap_err().to_string().contains("relators"));
        let round: FiniteAction = cycle4().to_string().parse().unwrap();
        assert_eq!(round, cycle4());
    }

    #[test]
    fn random_actions_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 1..6 {
            let a = random_action(&mut rng, m, 2, 3).unwrap();
            assert_eq!(a.atom_count(), m);
            assert_eq!(a.generator_count(), 2);
        }
    }

    #[test]
    fn integer_weights_share_a_denominator() {
        let c = convex_combine(&r(1, 3), &swap(), &cycle4()).unwrap();
        let (d, ns) = c.integer_weights().unwrap();
        assert_eq!(d, 6);
        assert_eq!(ns, vec![1; 6]);
    }
}

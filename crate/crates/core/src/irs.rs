//! Stabilizer invariants of finite actions.
//!
//! Every orbit of a finite action is a transitive permutation representation
//! of the free group, and its isomorphism class is the same data as the
//! conjugacy class of its point stabilizers. We name that class by a
//! canonical [`SchreierForm`]: the orbit relabeled by `{0, …, n−1}` so that
//! the concatenated one-line notations of the generators are
//! lexicographically least. The type of an action (the law of the stabilizer
//! of a random point) is then a finite distribution over Schreier forms.
//!
//! The canonical labeling is found by exhaustive search over all `n!`
//! orderings of the orbit with early rejection, so it is guarded by a budget
//! on the orbit size.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, BigRational, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::action::{orbits_of, FiniteAction};
use crate::error::{Error, Result};
use crate::group_window::{evaluate_word, Word};

/// Default largest orbit the canonicalizer will brute-force.
pub const DEFAULT_CANON_BUDGET: usize = 9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Orbit {
    /// Sorted atom indices.
    pub atoms: Vec<usize>,
    pub total_weight: BigRational,
}

/// A transitive action on `{0, …, n−1}` in canonical labeling.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SchreierForm {
    size: usize,
    perms: Vec<Vec<usize>>,
}

impl SchreierForm {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Generator images in one-line notation, 0-based.
    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }
}

impl fmt::Display for SchreierForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.perms)
    }
}

/// Orbits in order of their least atom.
pub fn orbit_decomposition(a: &FiniteAction) -> Vec<Orbit> {
    orbits_of(a.atom_count(), a.generators())
        .into_iter()
        .map(|atoms| {
            let total_weight = atoms.iter().map(|&x| a.weights()[x].clone()).sum();
            Orbit {
                atoms,
                total_weight,
            }
        })
        .collect()
}

/// Canonical form together with one ordering that realizes it:
/// `ordering[j]` is the atom placed at position `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalLabeling {
    pub form: SchreierForm,
    pub ordering: Vec<usize>,
}

pub fn canonical_schreier_form(a: &FiniteAction, orbit: &Orbit, budget: usize) -> Result<SchreierForm> {
    canonical_labeling(a, orbit, budget).map(|c| c.form)
}

/// Exhaustive lexicographic minimization over orderings of the orbit.
pub fn canonical_labeling(a: &FiniteAction, orbit: &Orbit, budget: usize) -> Result<CanonicalLabeling> {
    let n = orbit.atoms.len();
    if n > budget {
        return Err(Error::budget(
            "canonical Schreier form",
            format!("an orbit of {n} atoms ({n}! orderings)"),
            budget as u64,
        ));
    }
    let mut local = vec![usize::MAX; a.atom_count()];
    for (i, &x) in orbit.atoms.iter().enumerate() {
        local[x] = i;
    }
    let gens: Vec<Vec<usize>> = a
        .generators()
        .iter()
        .map(|g| orbit.atoms.iter().map(|&x| local[g.apply(x)]).collect())
        .collect();
    if gens.iter().flatten().any(|&y| y == usize::MAX) {
        return Err(Error::input("orbit is not closed under the generators"));
    }

    // ordering: position -> local atom; position: local atom -> position.
    let mut ordering: Vec<usize> = (0..n).collect();
    let mut position: Vec<usize> = (0..n).collect();
    let mut best_key: Vec<usize> = key_of(&gens, &ordering, &position);
    let mut best_ordering = ordering.clone();

    // Heap's algorithm, iterative.
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            ordering.swap(j, i);
            position[ordering[j]] = j;
            position[ordering[i]] = i;
            if beats(&gens, &ordering, &position, &best_key) {
                best_key = key_of(&gens, &ordering, &position);
                best_ordering.clone_from(&ordering);
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }

    let perms = best_key.chunks(n.max(1)).map(<[usize]>::to_vec).collect();
    Ok(CanonicalLabeling {
        form: SchreierForm { size: n, perms },
        ordering: best_ordering.into_iter().map(|l| orbit.atoms[l]).collect(),
    })
}

fn key_of(gens: &[Vec<usize>], ordering: &[usize], position: &[usize]) -> Vec<usize> {
    gens.iter()
        .flat_map(|g| ordering.iter().map(move |&x| position[g[x]]))
        .collect()
}

/// Strictly smaller than `best`, decided as early as possible.
fn beats(gens: &[Vec<usize>], ordering: &[usize], position: &[usize], best: &[usize]) -> bool {
    let mut k = 0;
    for g in gens {
        for &x in ordering {
            let v = position[g[x]];
            match v.cmp(&best[k]) {
                std::cmp::Ordering::Less => return true,
                std::cmp::Ordering::Greater => return false,
                std::cmp::Ordering::Equal => {}
            }
            k += 1;
        }
    }
    false
}

/// The law of the stabilizer of a random point, as masses on canonical
/// Schreier forms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeDistribution {
    masses: BTreeMap<SchreierForm, BigRational>,
}

impl TypeDistribution {
    pub fn masses(&self) -> &BTreeMap<SchreierForm, BigRational> {
        &self.masses
    }

    pub fn mass_of(&self, form: &SchreierForm) -> BigRational {
        self.masses.get(form).cloned().unwrap_or_else(BigRational::zero)
    }

    /// `t·self + (1−t)·other`.
    pub fn mix(&self, t: &BigRational, other: &TypeDistribution) -> TypeDistribution {
        let s = BigRational::from_integer(BigInt::from(1)) - t;
        let mut masses = BTreeMap::new();
        for (f, w) in &self.masses {
            *masses.entry(f.clone()).or_insert_with(BigRational::zero) += w * t;
        }
        for (f, w) in &other.masses {
            *masses.entry(f.clone()).or_insert_with(BigRational::zero) += w * &s;
        }
        masses.retain(|_, w: &mut BigRational| !w.is_zero());
        TypeDistribution { masses }
    }

    pub fn to_record(&self) -> Vec<TypeEntry> {
        self.masses
            .iter()
            .map(|(f, w)| TypeEntry {
                form: f.perms.clone(),
                weight: w.to_string(),
            })
            .collect()
    }
}

/// Serialized type entry: generator image arrays and an exact weight.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeEntry {
    pub form: Vec<Vec<usize>>,
    pub weight: String,
}

pub fn type_of(a: &FiniteAction, budget: usize) -> Result<TypeDistribution> {
    let orbits = orbit_decomposition(a);
    let forms = orbits
        .par_iter()
        .map(|o| canonical_schreier_form(a, o, budget))
        .collect::<Result<Vec<_>>>()?;
    let mut masses = BTreeMap::new();
    for (o, f) in orbits.into_iter().zip(forms) {
        *masses.entry(f).or_insert_with(BigRational::zero) += o.total_weight;
    }
    Ok(TypeDistribution { masses })
}

/// Total variation distance `½ Σ |p(f) − q(f)|`, exact.
pub fn type_distance(ta: &TypeDistribution, tb: &TypeDistribution) -> BigRational {
    let mut total = BigRational::zero();
    for (f, w) in &ta.masses {
        total += (w - tb.mass_of(f)).abs();
    }
    for (f, w) in &tb.masses {
        if !ta.masses.contains_key(f) {
            total += w.clone();
        }
    }
    total / BigRational::from_integer(BigInt::from(2))
}

pub fn type_distance_f64(ta: &TypeDistribution, tb: &TypeDistribution) -> f64 {
    type_distance(ta, tb).to_f64().unwrap_or(f64::NAN)
}

/// Result of trying to build an intertwining bijection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Conjugacy {
    /// `map[x]` is the image of atom `x` of the first action.
    Found(Vec<usize>),
    /// Orbits with this form and per-atom weight occur a different number of
    /// times in the two actions.
    Mismatch {
        form: SchreierForm,
        atom_weight: BigRational,
        count_a: usize,
        count_b: usize,
    },
}

impl Conjugacy {
    pub fn map(&self) -> Option<&[usize]> {
        match self {
            Conjugacy::Found(m) => Some(m),
            Conjugacy::Mismatch { .. } => None,
        }
    }
}

impl fmt::Display for Conjugacy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conjugacy::Found(m) => write!(f, "conjugator {m:?}"),
            Conjugacy::Mismatch {
                form,
                atom_weight,
                count_a,
                count_b,
            } => write!(
                f,
                "orbits of form {form} with atom weight {atom_weight}: {count_a} in the first action, {count_b} in the second"
            ),
        }
    }
}

type OrbitBuckets = BTreeMap<(SchreierForm, BigRational), Vec<Vec<usize>>>;

fn buckets(a: &FiniteAction, budget: usize) -> Result<OrbitBuckets> {
    let orbits = orbit_decomposition(a);
    let labelings = orbits
        .par_iter()
        .map(|o| canonical_labeling(a, o, budget))
        .collect::<Result<Vec<_>>>()?;
    let mut out: OrbitBuckets = BTreeMap::new();
    for (o, lab) in orbits.iter().zip(labelings) {
        let w = a.weights()[o.atoms[0]].clone();
        out.entry((lab.form, w)).or_default().push(lab.ordering);
    }
    Ok(out)
}

/// A weight-preserving bijection `T` with `T(γ^a x) = γ^b T(x)` for every
/// `γ ∈ window` and atom `x`.
///
/// Orbits of equal canonical form and equal atom weight are paired in order
/// of their least atom, and positions in the canonical orderings are matched.
/// Since both orderings realize the same form, `T` intertwines the
/// generators and hence every word.
pub fn conjugator(a: &FiniteAction, b: &FiniteAction, window: &[Word], budget: usize) -> Result<Conjugacy> {
    if a.generator_count() != b.generator_count() {
        return Err(Error::input("actions have different generator counts"));
    }
    let ba = buckets(a, budget)?;
    let bb = buckets(b, budget)?;
    let keys: std::collections::BTreeSet<_> = ba.keys().chain(bb.keys()).cloned().collect();
    for key in &keys {
        let ca = ba.get(key).map_or(0, Vec::len);
        let cb = bb.get(key).map_or(0, Vec::len);
        if ca != cb {
            return Ok(Conjugacy::Mismatch {
                form: key.0.clone(),
                atom_weight: key.1.clone(),
                count_a: ca,
                count_b: cb,
            });
        }
    }
    let mut map = vec![usize::MAX; a.atom_count()];
    for (key, orderings_a) in &ba {
        for (oa, ob) in orderings_a.iter().zip(&bb[key]) {
            for (&x, &y) in oa.iter().zip(ob) {
                map[x] = y;
            }
        }
    }
    if !intertwines(a, b, &map, window)? {
        return Err(Error::Solver(
            "matched canonical orderings failed to intertwine; canonical labeling is inconsistent".into(),
        ));
    }
    Ok(Conjugacy::Found(map))
}

/// Isomorphism of weighted actions: a conjugator for the generators.
pub fn isomorphism(a: &FiniteAction, b: &FiniteAction, budget: usize) -> Result<Option<Vec<usize>>> {
    if a.atom_count() != b.atom_count() || a.generator_count() != b.generator_count() {
        return Ok(None);
    }
    let gens: Vec<Word> = (1..=a.generator_count()).map(Word::generator).collect();
    Ok(conjugator(a, b, &gens, budget)?.map().map(<[usize]>::to_vec))
}

/// Checks that `map` is a weight-preserving bijection with
/// `map(γ^a x) = γ^b map(x)` for all `γ` in `window`.
pub fn intertwines(a: &FiniteAction, b: &FiniteAction, map: &[usize], window: &[Word]) -> Result<bool> {
    let m = a.atom_count();
    if map.len() != m || b.atom_count() != m {
        return Ok(false);
    }
    let mut hit = vec![false; m];
    for (x, &y) in map.iter().enumerate() {
        if y >= m || hit[y] || a.weights()[x] != b.weights()[y] {
            return Ok(false);
        }
        hit[y] = true;
    }
    for w in window {
        let pa = evaluate_word(a, w)?;
        let pb = evaluate_word(b, w)?;
        if (0..m).any(|x| map[pa.apply(x)] != pb.apply(map[x])) {
            return Ok(false);
        }
    }
    Ok(true)
}

//! Partition statistics: moment matrices, clouds, Hausdorff distances and
//! the truncated pseudometrics.
//!
//! For a partition `A = (A_0, …, A_{k−1})` of the atoms and window words
//! `γ_0, …, γ_{n−1}`, the moment matrix has entries
//! `M[p, q, r] = μ(γ_p A_q ∩ A_r)`, flattened in `p`-`q`-`r` order. Entries
//! are stored as integer numerators over the action's common weight
//! denominator so that clouds are deduplicated exactly.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigInt, BigRational, BigUint, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::action::{orbits_of, FiniteAction};
use crate::error::{Error, Result};
use crate::group_window::{evaluate_word, GroupWindow, Word};
use crate::hull;

pub const DEFAULT_PARTITION_BUDGET: u64 = 1_000_000;

const CHUNK: u128 = 4096;

/// A labeling of the atoms by classes `0..class_count`. Empty classes are
/// allowed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Partition {
    labels: Vec<usize>,
    class_count: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::input("a partition needs at least one class"));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::input(format!("label {l} is not below the class count {class_count}")));
        }
        Ok(Partition { labels, class_count })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn atom_count(&self) -> usize {
        self.labels.len()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// The array `μ(γ_p A_q ∩ A_r)` for `p < n`, `q, r < k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MomentMatrix {
    n: usize,
    k: usize,
    denominator: u128,
    numerators: Vec<u128>,
}

impl MomentMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn denominator(&self) -> u128 {
        self.denominator
    }

    pub fn numerators(&self) -> &[u128] {
        &self.numerators
    }

    pub fn index(&self, p: usize, q: usize, r: usize) -> usize {
        (p * self.k + q) * self.k + r
    }

    pub fn entry(&self, p: usize, q: usize, r: usize) -> BigRational {
        BigRational::new(
            BigInt::from(self.numerators[self.index(p, q, r)]),
            BigInt::from(self.denominator),
        )
    }

    pub fn value(&self, p: usize, q: usize, r: usize) -> f64 {
        self.numerators[self.index(p, q, r)] as f64 / self.denominator as f64
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let d = self.denominator as f64;
        self.numerators.iter().map(|&x| x as f64 / d).collect()
    }

    /// Checks the row sums, the diagonal identity slice and the
    /// inverse-transpose symmetry against the words the matrix was built on.
    pub fn check_invariants(&self, words: &[Word]) -> Result<()> {
        let (n, k) = (self.n, self.k);
        if words.len() < n {
            return Err(Error::input("fewer words than matrix slices"));
        }
        for p in 0..n {
            let row: u128 = self.numerators[p * k * k..(p + 1) * k * k].iter().sum();
            if row != self.denominator {
                return Err(Error::input(format!("slice {p} has total mass {row}/{}", self.denominator)));
            }
            if words[p].is_identity() {
                for q in 0..k {
                    for r in 0..k {
                        if q != r && self.numerators[self.index(p, q, r)] != 0 {
                            return Err(Error::input(format!("identity slice {p} is not diagonal")));
                        }
                    }
                }
            }
            let inv = words[p].inverse();
            if let Some(pi) = words[..n].iter().position(|w| *w == inv) {
                for q in 0..k {
                    for r in 0..k {
                        if self.numerators[self.index(p, q, r)] != self.numerators[self.index(pi, r, q)] {
                            return Err(Error::input(format!(
                                "slices {p} and {pi} are not transposes of each other"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// How a cloud is populated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Every labeling, refused beyond the partition budget.
    Exhaustive,
    /// Uniform random labelings, one ChaCha stream per sample.
    Random { samples: u64, seed: u64 },
    /// Hill climbing by single-atom relabelings towards points far from the
    /// cloud found so far.
    LocalSearch { starts: u64, seed: u64 },
    /// Exact: per-orbit clouds combined by Minkowski sums. Agrees with
    /// [`Strategy::Exhaustive`] point for point, witnesses included.
    OrbitSum,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::Random { .. } => "random",
            Strategy::LocalSearch { .. } => "local_search",
            Strategy::OrbitSum => "orbit_sum",
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Strategy::Exhaustive | Strategy::OrbitSum)
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Strategy::Random { seed, .. } | Strategy::LocalSearch { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Random { samples, seed } => write!(f, "random({samples} samples, seed {seed})"),
            Strategy::LocalSearch { starts, seed } => {
                write!(f, "local_search({starts} starts, seed {seed})")
            }
            s => f.write_str(s.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CloudOptions {
    pub strategy: Strategy,
    /// Maximum number of labelings (or labeling combinations) examined.
    pub budget: u64,
}

impl Default for CloudOptions {
    fn default() -> Self {
        CloudOptions {
            strategy: Strategy::Exhaustive,
            budget: DEFAULT_PARTITION_BUDGET,
        }
    }
}

impl CloudOptions {
    pub fn exhaustive() -> Self {
        Self::default()
    }

    pub fn with_strategy(strategy: Strategy) -> Self {
        CloudOptions {
            strategy,
            ..Self::default()
        }
    }
}

/// A finite set of moment matrices of one action at fixed `(n, k)`, each
/// paired with the lexicographically least labeling producing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MomentCloud {
    n: usize,
    k: usize,
    points: Vec<MomentMatrix>,
    witnesses: Vec<Partition>,
    exhaustive: bool,
    strategy_note: String,
    action_label: String,
}

impl MomentCloud {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Points in increasing order of their numerator arrays.
    pub fn points(&self) -> &[MomentMatrix] {
        &self.points
    }

    pub fn witnesses(&self) -> &[Partition] {
        &self.witnesses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn exhaustive(&self) -> bool {
        self.exhaustive
    }

    pub fn strategy_note(&self) -> &str {
        &self.strategy_note
    }

    pub fn action_label(&self) -> &str {
        &self.action_label
    }

    pub fn float_points(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(MomentMatrix::to_f64).collect()
    }

    pub fn contains(&self, m: &MomentMatrix) -> bool {
        self.points.iter().any(|p| p.numerators == m.numerators && p.denominator == m.denominator)
    }

    /// The cloud for the first `n` words, obtained by dropping slices.
    pub fn project(&self, n: usize) -> Result<MomentCloud> {
        if n == 0 || n > self.n {
            return Err(Error::input(format!("cannot project a cloud with n = {} to n = {n}", self.n)));
        }
        let denom = self.points.first().map_or(1, |p| p.denominator);
        let len = n * self.k * self.k;
        let mut map = PointMap::new();
        for (p, w) in self.points.iter().zip(&self.witnesses) {
            offer(&mut map, p.numerators[..len].to_vec(), w.labels.clone());
        }
        Ok(self.rebuild(map, n, denom))
    }

    fn rebuild(&self, map: PointMap, n: usize, denom: u128) -> MomentCloud {
        let (points, witnesses) = unpack(map, n, self.k, denom);
        MomentCloud {
            n,
            k: self.k,
            points,
            witnesses,
            exhaustive: self.exhaustive,
            strategy_note: self.strategy_note.clone(),
            action_label: self.action_label.clone(),
        }
    }
}

type PointMap = BTreeMap<Vec<u128>, Vec<usize>>;

fn offer(map: &mut PointMap, numerators: Vec<u128>, labels: Vec<usize>) {
    match map.entry(numerators) {
        Entry::Vacant(e) => {
            e.insert(labels);
        }
        Entry::Occupied(mut e) => {
            if labels < *e.get() {
                e.insert(labels);
            }
        }
    }
}

fn unpack(map: PointMap, n: usize, k: usize, denominator: u128) -> (Vec<MomentMatrix>, Vec<Partition>) {
    map.into_iter()
        .map(|(numerators, labels)| {
            (
                MomentMatrix {
                    n,
                    k,
                    denominator,
                    numerators,
                },
                Partition {
                    labels,
                    class_count: k,
                },
            )
        })
        .unzip()
}

struct Evaluator {
    k: usize,
    denominator: u128,
    weights: Vec<u128>,
    preimages: Vec<Vec<usize>>,
}

impl Evaluator {
    fn new(a: &FiniteAction, words: &[Word], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::input("class count must be positive"));
        }
        if words.is_empty() {
            return Err(Error::input("at least one window word is needed"));
        }
        let (denominator, weights) = a.integer_weights()?;
        let preimages = words
            .iter()
            .map(|w| evaluate_word(a, &w.inverse()).map(|p| p.images().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Evaluator {
            k,
            denominator,
            weights,
            preimages,
        })
    }

    fn len(&self) -> usize {
        self.preimages.len() * self.k * self.k
    }

    fn accumulate(&self, atoms: &[usize], labels: &[usize], out: &mut [u128]) {
        let k = self.k;
        for (p, pre) in self.preimages.iter().enumerate() {
            for &x in atoms {
                out[(p * k + labels[pre[x]]) * k + labels[x]] += self.weights[x];
            }
        }
    }

    fn numerators(&self, atoms: &[usize], labels: &[usize]) -> Vec<u128> {
        let mut out = vec![0; self.len()];
        self.accumulate(atoms, labels, &mut out);
        out
    }

    /// All labelings of `atoms` (other atoms labeled 0), with the first
    /// listed atom most significant so that enumeration order is
    /// lexicographic on the full label vector.
    fn enumerate(&self, atoms: &[usize], m: usize, total: u128) -> PointMap {
        let k = self.k;
        let chunks = total.div_ceil(CHUNK);
        let maps: Vec<PointMap> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(total);
                let mut labels = vec![0usize; m];
                let mut rest = start;
                for &x in atoms.iter().rev() {
                    labels[x] = (rest % k as u128) as usize;
                    rest /= k as u128;
                }
                let mut map = PointMap::new();
                for _ in start..end {
                    map.entry(self.numerators(atoms, &labels))
                        .or_insert_with(|| labels.clone());
                    for &x in atoms.iter().rev() {
                        labels[x] += 1;
                        if labels[x] < k {
                            break;
                        }
                        labels[x] = 0;
                    }
                }
                map
            })
            .collect();
        let mut merged = PointMap::new();
        for map in maps {
            for (p, l) in map {
                offer(&mut merged, p, l);
            }
        }
        merged
    }
}

fn labeling_count(k: usize, atoms: usize, budget: u64, what: &str) -> Result<u128> {
    (k as u128)
        .checked_pow(atoms as u32)
        .filter(|&t| t <= budget as u128)
        .ok_or_else(|| {
            Error::budget(
                format!("{what}: {k}^{atoms} labelings"),
                BigUint::from(k).pow(atoms as u32),
                budget,
            )
        })
}

fn sample_labeling(seed: u64, stream: u64, m: usize, k: usize) -> (ChaCha8Rng, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let labels = (0..m).map(|_| rng.gen_range(0..k)).collect();
    (rng, labels)
}

fn nearest(map: &PointMap, x: &[u128]) -> u128 {
    map.keys()
        .map(|p| p.iter().zip(x).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0))
        .min()
        .unwrap_or(u128::MAX)
}

fn local_search(ev: &Evaluator, m: usize, starts: u64, seed: u64) -> PointMap {
    let k = ev.k;
    let all: Vec<usize> = (0..m).collect();
    let mut map = PointMap::new();
    let moves: Vec<(usize, usize)> = (0..m).flat_map(|x| (0..k).map(move |c| (x, c))).collect();
    for s in 0..starts {
        let (_, mut labels) = sample_labeling(seed, s, m, k);
        offer(&mut map, ev.numerators(&all, &labels), labels.clone());
        for _ in 0..4 * m * k {
            let scored: Vec<(u128, Vec<u128>)> = moves
                .par_iter()
                .map(|&(x, c)| {
                    if labels[x] == c {
                        return (0, Vec::new());
                    }
                    let mut l = labels.clone();
                    l[x] = c;
                    let p = ev.numerators(&all, &l);
                    (nearest(&map, &p), p)
                })
                .collect();
            let best = (0..moves.len()).fold(0, |b, i| if scored[i].0 > scored[b].0 { i } else { b });
            if scored[best].0 == 0 {
                break;
            }
            let (x, c) = moves[best];
            labels[x] = c;
            offer(&mut map, scored[best].1.clone(), labels.clone());
        }
    }
    map
}

fn orbit_sum(a: &FiniteAction, ev: &Evaluator, budget: u64) -> Result<PointMap> {
    let m = a.atom_count();
    let mut acc = PointMap::new();
    acc.insert(vec![0; ev.len()], vec![0; m]);
    for orbit in orbits_of(m, a.generators()) {
        let total = labeling_count(ev.k, orbit.len(), budget, "orbit enumeration")?;
        let cloud = ev.enumerate(&orbit, m, total);
        let pairs = acc.len() as u128 * cloud.len() as u128;
        if pairs > budget as u128 {
            return Err(Error::budget("orbit-sum combinations", pairs, budget));
        }
        let parts: Vec<PointMap> = acc
            .par_iter()
            .map(|(s, sl)| {
                let mut out = PointMap::new();
                for (c, cl) in &cloud {
                    let sum: Vec<u128> = s.iter().zip(c).map(|(x, y)| x + y).collect();
                    let mut labels = sl.clone();
                    for &x in &orbit {
                        labels[x] = cl[x];
                    }
                    offer(&mut out, sum, labels);
                }
                out
            })
            .collect();
        acc = PointMap::new();
        for part in parts {
            for (p, l) in part {
                offer(&mut acc, p, l);
            }
        }
    }
    Ok(acc)
}

/// The moment matrix of one partition.
pub fn moment_matrix(
    a: &FiniteAction,
    window: &GroupWindow,
    partition: &Partition,
    n: usize,
    k: usize,
) -> Result<MomentMatrix> {
    if partition.class_count != k {
        return Err(Error::input(format!(
            "partition has {} classes, {k} requested",
            partition.class_count
        )));
    }
    if partition.atom_count() != a.atom_count() {
        return Err(Error::input(format!(
            "partition labels {} atoms but the action has {}",
            partition.atom_count(),
            a.atom_count()
        )));
    }
    let ev = Evaluator::new(a, window.prefix(n)?, k)?;
    let all: Vec<usize> = (0..a.atom_count()).collect();
    Ok(MomentMatrix {
        n,
        k,
        denominator: ev.denominator,
        numerators: ev.numerators(&all, &partition.labels),
    })
}

/// The cloud of moment matrices at `(n, k)` over the first `n` window words.
pub fn moment_cloud(
    a: &FiniteAction,
    window: &GroupWindow,
    n: usize,
    k: usize,
    opts: &CloudOptions,
) -> Result<MomentCloud> {
    cloud_over_words(a, window.prefix(n)?, k, opts)
}

pub fn cloud_over_words(a: &FiniteAction, words: &[Word], k: usize, opts: &CloudOptions) -> Result<MomentCloud> {
    let ev = Evaluator::new(a, words, k)?;
    let m = a.atom_count();
    let budget = opts.budget;
    let all: Vec<usize> = (0..m).collect();
    let (map, note) = match opts.strategy {
        Strategy::Exhaustive => {
            let total = labeling_count(k, m, budget, "exhaustive enumeration")?;
            (ev.enumerate(&all, m, total), format!("exhaustive over {total} labelings"))
        }
        Strategy::Random { samples, seed } => {
            if samples == 0 {
                return Err(Error::input("random strategy needs at least one sample"));
            }
            if samples > budget {
                return Err(Error::budget("random labelings", samples, budget));
            }
            let drawn: Vec<(Vec<u128>, Vec<usize>)> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let (_, labels) = sample_labeling(seed, i, m, k);
                    (ev.numerators(&all, &labels), labels)
                })
                .collect();
            let mut map = PointMap::new();
            for (p, l) in drawn {
                offer(&mut map, p, l);
            }
            (map, format!("random, {samples} samples, seed {seed}"))
        }
        Strategy::LocalSearch { starts, seed } => {
            if starts == 0 {
                return Err(Error::input("local search needs at least one start"));
            }
            let work = starts as u128 * 4 * (m * k) as u128 * (m * k) as u128;
            if work > budget as u128 {
                return Err(Error::budget("local-search relabelings", work, budget));
            }
            (
                local_search(&ev, m, starts, seed),
                format!("local_search, {starts} starts, seed {seed}"),
            )
        }
        Strategy::OrbitSum => {
            let orbits = orbits_of(m, a.generators()).len();
            (orbit_sum(a, &ev, budget)?, format!("orbit_sum over {orbits} orbits"))
        }
    };
    let (points, witnesses) = unpack(map, words.len(), k, ev.denominator);
    Ok(MomentCloud {
        n: words.len(),
        k,
        points,
        witnesses,
        exhaustive: opts.strategy.is_exact(),
        strategy_note: note,
        action_label: a.label().to_string(),
    })
}

/// Base geometry for Hausdorff distances between clouds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// The clouds as finite point sets.
    Points,
    /// The convex hulls of the clouds.
    Hulls,
}

impl DistanceMode {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceMode::Points => "points",
            DistanceMode::Hulls => "hulls",
        }
    }
}

fn check_dims(a: &MomentCloud, b: &MomentCloud) -> Result<()> {
    if (a.n, a.k) != (b.n, b.k) {
        return Err(Error::input(format!(
            "cloud dimensions differ: (n, k) = ({}, {}) vs ({}, {})",
            a.n, a.k, b.n, b.k
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("empty cloud"));
    }
    Ok(())
}

fn reduced(a: &MomentCloud, b: &MomentCloud) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (pa, pb) = (a.float_points(), b.float_points());
    let coords = hull::varying_coordinates(&pa, &pb);
    (hull::project(&pa, &coords), hull::project(&pb, &coords))
}

fn directed(pa: &[Vec<f64>], pb: &[Vec<f64>], mode: DistanceMode) -> Result<(f64, usize)> {
    match mode {
        DistanceMode::Points => hull::directed_points(pa, pb),
        DistanceMode::Hulls => hull::directed_hull(pa, pb),
    }
}

/// `sup_{x ∈ A} dist(x, B)` (or `dist(x, conv B)` in hulls mode) with the
/// index of a maximising point of `A`.
pub fn one_sided_hausdorff(a: &MomentCloud, b: &MomentCloud, mode: DistanceMode) -> Result<(f64, usize)> {
    check_dims(a, b)?;
    let (pa, pb) = reduced(a, b);
    directed(&pa, &pb, mode)
}

/// Sup-norm Hausdorff distance between two clouds or their hulls.
pub fn cloud_hausdorff(a: &MomentCloud, b: &MomentCloud, mode: DistanceMode) -> Result<f64> {
    check_dims(a, b)?;
    let (pa, pb) = reduced(a, b);
    let (ab, _) = directed(&pa, &pb, mode)?;
    let (ba, _) = directed(&pb, &pa, mode)?;
    Ok(ab.max(ba))
}

/// All clouds of one action needed for the series truncated at `cut`:
/// every `(n, k)` with `n, k ≥ 1` and `n + k ≤ cut`.
#[derive(Clone, Debug)]
pub struct CloudSet {
    cut: usize,
    generator_count: usize,
    clouds: BTreeMap<(usize, usize), MomentCloud>,
}

impl CloudSet {
    pub fn cut(&self) -> usize {
        self.cut
    }

    pub fn get(&self, n: usize, k: usize) -> Option<&MomentCloud> {
        self.clouds.get(&(n, k))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &MomentCloud)> {
        self.clouds.iter()
    }
}

fn check_cut(cut: usize) -> Result<()> {
    if cut < 2 {
        return Err(Error::input(format!("cut must be at least 2, got {cut}")));
    }
    Ok(())
}

pub fn cloud_set(a: &FiniteAction, cut: usize, opts: &CloudOptions) -> Result<CloudSet> {
    check_cut(cut)?;
    let window = GroupWindow::covering(a.generator_count().max(1), cut - 1)?;
    let mut clouds = BTreeMap::new();
    for k in 1..cut {
        let n_max = cut - k;
        let top = moment_cloud(a, &window, n_max, k, opts)?;
        for n in 1..n_max {
            clouds.insert((n, k), top.project(n)?);
        }
        clouds.insert((n_max, k), top);
    }
    Ok(CloudSet {
        cut,
        generator_count: a.generator_count(),
        clouds,
    })
}

/// `Σ_{n+k ≤ cut} 2^{−(n+k)} d_H(C_{n,k}(a), C_{n,k}(b))`.
pub fn series_distance(a: &CloudSet, b: &CloudSet, mode: DistanceMode) -> Result<f64> {
    if a.cut != b.cut {
        return Err(Error::input(format!("cloud sets truncated at {} and {}", a.cut, b.cut)));
    }
    if a.generator_count != b.generator_count {
        return Err(Error::input(format!(
            "generator counts differ: {} vs {}",
            a.generator_count, b.generator_count
        )));
    }
    let mut total = 0.0;
    for (&(n, k), ca) in &a.clouds {
        let d = cloud_hausdorff(ca, &b.clouds[&(n, k)], mode)?;
        total += d * 0.5f64.powi((n + k) as i32);
    }
    Ok(total)
}

/// `Σ_{n+k > cut} 2^{−(n+k)} = (cut + 1) / 2^cut`.
pub fn truncation_bound(cut: usize) -> f64 {
    (cut as f64 + 1.0) * 0.5f64.powi(cut as i32)
}

pub fn truncation_bound_exact(cut: usize) -> BigRational {
    BigRational::new(BigInt::from(cut + 1), BigInt::from(2).pow(cut as u32))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Distance {
    pub value: f64,
    pub truncation_bound: f64,
}

fn series(a: &FiniteAction, b: &FiniteAction, cut: usize, opts: &CloudOptions, mode: DistanceMode) -> Result<Distance> {
    let ca = cloud_set(a, cut, opts)?;
    let cb = cloud_set(b, cut, opts)?;
    Ok(Distance {
        value: series_distance(&ca, &cb, mode)?,
        truncation_bound: truncation_bound(cut),
    })
}

/// The truncated partition pseudometric on atomic clouds.
pub fn metric_d(a: &FiniteAction, b: &FiniteAction, cut: usize, opts: &CloudOptions) -> Result<Distance> {
    series(a, b, cut, opts, DistanceMode::Points)
}

/// The truncated stable pseudometric, comparing hulls of clouds.
pub fn metric_d_stable(a: &FiniteAction, b: &FiniteAction, cut: usize, opts: &CloudOptions) -> Result<Distance> {
    series(a, b, cut, opts, DistanceMode::Hulls)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Containment {
    pub defect: f64,
    pub witness: Partition,
}

/// How far the statistics of `a` are from those of `b`: the one-sided
/// Hausdorff distance from `C(a)` to `C(b)` (or its hull), with a partition
/// of `a` attaining it.
pub fn containment_defect(
    a: &FiniteAction,
    b: &FiniteAction,
    window: &GroupWindow,
    n: usize,
    k: usize,
    mode: DistanceMode,
    opts: &CloudOptions,
) -> Result<Containment> {
    let ca = moment_cloud(a, window, n, k, opts)?;
    let cb = moment_cloud(b, window, n, k, opts)?;
    let (defect, i) = one_sided_hausdorff(&ca, &cb, mode)?;
    Ok(Containment {
        defect,
        witness: ca.witnesses[i].clone(),
    })
}

/// Worst sup-norm distance from a point of `conv(source)` to the points of
/// `target`, estimated on the barycentric lattice of step `1/resolution`
/// over the vertices of the source hull. Lattice points are genuine hull
/// points, so the estimate never exceeds the true value.
pub fn hull_coverage_gap(source: &MomentCloud, target: &MomentCloud, resolution: usize, budget: u64) -> Result<f64> {
    check_dims(source, target)?;
    if resolution == 0 {
        return Err(Error::input("lattice resolution must be positive"));
    }
    let (ps, pt) = reduced(source, target);
    if ps.first().is_none_or(|p| p.is_empty()) {
        return Ok(0.0);
    }
    let verts: Vec<Vec<f64>> = hull::extreme_points(&ps, 1e-9)?
        .into_iter()
        .map(|i| ps[i].clone())
        .collect();
    let count = binomial(resolution + verts.len() - 1, verts.len() - 1);
    let work = count.saturating_mul(pt.len() as u128);
    if work > budget as u128 {
        return Err(Error::budget("hull lattice distance evaluations", work, budget));
    }
    let lattice = compositions(resolution, verts.len());
    let r = resolution as f64;
    let worst = lattice
        .par_iter()
        .map(|c| {
            let mut x = vec![0.0; verts[0].len()];
            for (w, v) in c.iter().zip(&verts) {
                if *w > 0 {
                    let t = *w as f64 / r;
                    for (xi, vi) in x.iter_mut().zip(v) {
                        *xi += t * vi;
                    }
                }
            }
            hull::distance_to_points(&x, &pt)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

fn binomial(n: usize, r: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; parts];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
    }
    rec(0, total, &mut cur, &mut out);
    out
}

/// The law of the pattern `γ ↦ φ((γ⁻¹) x)` over a finite list of words.
/// Patterns are indexed by word position.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ColoringDistribution {
    words: Vec<Word>,
    alphabet_size: usize,
    masses: BTreeMap<Vec<usize>, BigRational>,
}

impl ColoringDistribution {
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn masses(&self) -> &BTreeMap<Vec<usize>, BigRational> {
        &self.masses
    }

    pub fn mass_of(&self, pattern: &[usize]) -> BigRational {
        self.masses.get(pattern).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Joint law of the colors at word positions `i` and `j`.
    pub fn marginal(&self, i: usize, j: usize) -> BTreeMap<(usize, usize), BigRational> {
        let mut out: BTreeMap<(usize, usize), BigRational> = BTreeMap::new();
        for (pattern, w) in &self.masses {
            *out.entry((pattern[i], pattern[j])).or_insert_with(BigRational::zero) += w;
        }
        out
    }
}

struct PatternMap {
    preimages: Vec<Vec<usize>>,
    denominator: u128,
    weights: Vec<u128>,
}

impl PatternMap {
    fn new(a: &FiniteAction, words: &[Word]) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::input("at least one word is needed"));
        }
        let (denominator, weights) = a.integer_weights()?;
        let preimages = words
            .iter()
            .map(|w| evaluate_word(a, &w.inverse()).map(|p| p.images().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PatternMap {
            preimages,
            denominator,
            weights,
        })
    }

    fn masses(&self, coloring: &[usize]) -> BTreeMap<Vec<usize>, u128> {
        let mut out = BTreeMap::new();
        for (x, &w) in self.weights.iter().enumerate() {
            let pattern: Vec<usize> = self.preimages.iter().map(|pre| coloring[pre[x]]).collect();
            *out.entry(pattern).or_insert(0) += w;
        }
        out
    }

    fn distribution(&self, words: &[Word], alphabet_size: usize, masses: BTreeMap<Vec<usize>, u128>) -> ColoringDistribution {
        let d = BigInt::from(self.denominator);
        ColoringDistribution {
            words: words.to_vec(),
            alphabet_size,
            masses: masses
                .into_iter()
                .map(|(p, w)| (p, BigRational::new(BigInt::from(w), d.clone())))
                .collect(),
        }
    }
}

pub fn coloring_distribution(
    a: &FiniteAction,
    coloring: &[usize],
    alphabet_size: usize,
    words: &[Word],
) -> Result<ColoringDistribution> {
    if coloring.len() != a.atom_count() {
        return Err(Error::input(format!(
            "coloring has {} entries but the action has {} atoms",
            coloring.len(),
            a.atom_count()
        )));
    }
    if let Some(&c) = coloring.iter().find(|&&c| c >= alphabet_size) {
        return Err(Error::input(format!("color {c} is outside an alphabet of size {alphabet_size}")));
    }
    let pm = PatternMap::new(a, words)?;
    Ok(pm.distribution(words, alphabet_size, pm.masses(coloring)))
}

/// Distinct pattern laws over all (or sampled) colorings, in increasing
/// order.
pub fn coloring_cloud(
    a: &FiniteAction,
    alphabet_size: usize,
    words: &[Word],
    opts: &CloudOptions,
) -> Result<Vec<ColoringDistribution>> {
    if alphabet_size == 0 {
        return Err(Error::input("alphabet must be nonempty"));
    }
    let pm = PatternMap::new(a, words)?;
    let m = a.atom_count();
    let l = alphabet_size;
    let found: Vec<BTreeMap<Vec<usize>, u128>> = match opts.strategy {
        Strategy::Exhaustive => {
            let total = labeling_count(l, m, opts.budget, "exhaustive colorings")?;
            (0..total)
                .into_par_iter()
                .map(|mut idx| {
                    let mut coloring = vec![0; m];
                    for c in coloring.iter_mut().rev() {
                        *c = (idx % l as u128) as usize;
                        idx /= l as u128;
                    }
                    pm.masses(&coloring)
                })
                .collect()
        }
        Strategy::Random { samples, seed } => {
            if samples > opts.budget {
                return Err(Error::budget("random colorings", samples, opts.budget));
            }
            (0..samples)
                .into_par_iter()
                .map(|i| pm.masses(&sample_labeling(seed, i, m, l).1))
                .collect()
        }
        ref s => {
            return Err(Error::input(format!("coloring clouds support exhaustive and random strategies, not {s}")));
        }
    };
    let distinct: BTreeSet<_> = found.into_iter().collect();
    Ok(distinct
        .into_iter()
        .map(|masses| pm.distribution(words, l, masses))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{convex_combine, refine};
    use crate::fixtures;
    use num::One;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn win() -> GroupWindow {
        crate::group_window::build_window(1, 1).unwrap()
    }

    fn cloud(a: &FiniteAction, n: usize, k: usize) -> MomentCloud {
        moment_cloud(a, &win(), n, k, &CloudOptions::exhaustive()).unwrap()
    }

    #[test]
    fn swap_moment_matrices() {
        let a = fixtures::swap();
        let m = moment_matrix(&a, &win(), &Partition::new(vec![0, 1], 2).unwrap(), 2, 2).unwrap();
        assert_eq!(m.entry(0, 0, 0), r(1, 2));
        assert_eq!(m.entry(0, 0, 1), r(0, 1));
        assert_eq!(m.entry(1, 0, 1), r(1, 2));
        assert_eq!(m.entry(1, 1, 1), r(0, 1));
        m.check_invariants(win().words()).unwrap();
        let m = moment_matrix(&a, &win(), &Partition::new(vec![0, 0], 2).unwrap(), 2, 2).unwrap();
        assert_eq!(m.entry(1, 0, 0), BigRational::one());
    }

    #[test]
    fn swap_cloud_has_three_points() {
        let c = cloud(&fixtures::swap(), 2, 2);
        assert_eq!(c.len(), 3);
        assert!(c.exhaustive());
        let witnesses: Vec<Vec<usize>> = c.witnesses().iter().map(|w| w.labels().to_vec()).collect();
        assert!(witnesses.contains(&vec![0, 1]));
        assert!(!witnesses.contains(&vec![1, 0]));
    }

    #[test]
    fn trivial_and_single_class_clouds() {
        let c = cloud(&fixtures::trivial(1), 3, 3);
        assert_eq!(c.len(), 3);
        let c = cloud(&fixtures::cycle4(), 3, 1);
        assert_eq!(c.len(), 1);
        assert!(c.points()[0].to_f64().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn swap_versus_fix() {
        let a = cloud(&fixtures::swap(), 2, 2);
        let b = cloud(&fixtures::fix(), 2, 2);
        assert_eq!(cloud_hausdorff(&a, &b, DistanceMode::Points).unwrap(), 0.5);
        assert_eq!(cloud_hausdorff(&a, &a, DistanceMode::Points).unwrap(), 0.0);
        let d = metric_d(&fixtures::swap(), &fixtures::fix(), 4, &CloudOptions::exhaustive()).unwrap();
        assert_eq!(d.value, 1.0 / 32.0);
        assert_eq!(d.truncation_bound, 5.0 / 16.0);
        assert_eq!(truncation_bound_exact(4), r(5, 16));
    }

    #[test]
    fn containment_witnesses() {
        let opts = CloudOptions::exhaustive();
        let c = containment_defect(&fixtures::fix(), &fixtures::swap(), &win(), 2, 2, DistanceMode::Points, &opts)
            .unwrap();
        assert_eq!(c.defect, 0.5);
        assert_eq!(c.witness.labels(), &[0, 1]);
        let mix = convex_combine(&r(1, 2), &fixtures::swap(), &fixtures::fix()).unwrap();
        let c = containment_defect(&fixtures::swap(), &mix, &win(), 2, 2, DistanceMode::Points, &opts).unwrap();
        assert_eq!(c.defect, 0.25);
        assert_eq!(c.witness.labels(), &[0, 1]);
    }

    #[test]
    fn orbit_sum_matches_exhaustive() {
        let mix = convex_combine(&r(1, 3), &fixtures::cycle4(), &fixtures::swap()).unwrap();
        let window = crate::group_window::build_window(1, 1).unwrap();
        let exact = moment_cloud(&mix, &window, 3, 2, &CloudOptions::exhaustive()).unwrap();
        let sum = moment_cloud(&mix, &window, 3, 2, &CloudOptions::with_strategy(Strategy::OrbitSum)).unwrap();
        assert_eq!(exact.points(), sum.points());
        assert_eq!(exact.witnesses(), sum.witnesses());
    }

    #[test]
    fn sampled_clouds_are_subsets() {
        let a = crate::action::product(&fixtures::cycle4(), &fixtures::swap()).unwrap();
        let window = win();
        let exact = moment_cloud(&a, &window, 2, 2, &CloudOptions::exhaustive()).unwrap();
        for s in [
            Strategy::Random { samples: 40, seed: 3 },
            Strategy::LocalSearch { starts: 3, seed: 3 },
        ] {
            let c = moment_cloud(&a, &window, 2, 2, &CloudOptions::with_strategy(s)).unwrap();
            assert!(!c.exhaustive());
            assert!(c.points().iter().all(|p| exact.contains(p)));
        }
    }

    #[test]
    fn projection_matches_direct_cloud() {
        let a = fixtures::cycle4();
        let window = crate::group_window::build_window(1, 2).unwrap();
        let top = moment_cloud(&a, &window, 5, 2, &CloudOptions::exhaustive()).unwrap();
        let direct = moment_cloud(&a, &window, 3, 2, &CloudOptions::exhaustive()).unwrap();
        assert_eq!(top.project(3).unwrap(), direct);
    }

    #[test]
    fn budget_refusal() {
        let a = fixtures::cycle(30);
        let opts = CloudOptions {
            strategy: Strategy::Exhaustive,
            budget: 1000,
        };
        assert!(matches!(moment_cloud(&a, &win(), 2, 2, &opts), Err(Error::Budget { .. })));
    }

    #[test]
    fn coloring_examples() {
        let words = win().prefix(2).unwrap().to_vec();
        let d = coloring_distribution(&fixtures::swap(), &[0, 1], 2, &words[..1]).unwrap();
        assert_eq!(d.mass_of(&[0]), r(1, 2));
        let d = coloring_distribution(&fixtures::swap(), &[0, 1], 2, &words).unwrap();
        assert_eq!(d.mass_of(&[0, 1]), r(1, 2));
        assert_eq!(d.mass_of(&[1, 0]), r(1, 2));
        let d = coloring_distribution(&fixtures::fix(), &[0, 1], 2, &words).unwrap();
        assert_eq!(d.mass_of(&[1, 1]), r(1, 2));
        let opts = CloudOptions::exhaustive();
        assert_eq!(coloring_cloud(&fixtures::swap(), 2, &words, &opts).unwrap().len(), 3);
        assert_eq!(coloring_cloud(&fixtures::trivial(1), 2, &words, &opts).unwrap().len(), 2);
        assert_eq!(coloring_cloud(&fixtures::cycle4(), 1, &words, &opts).unwrap().len(), 1);
    }

    #[test]
    fn refinement_gap_shrinks() {
        let a = fixtures::swap();
        let base = cloud(&a, 2, 2);
        let mut last = f64::INFINITY;
        for q in [1, 2, 4] {
            let fine = moment_cloud(&refine(&a, q).unwrap(), &win(), 2, 2, &CloudOptions::with_strategy(Strategy::OrbitSum))
                .unwrap();
            let gap = hull_coverage_gap(&base, &fine, 48, DEFAULT_PARTITION_BUDGET).unwrap();
            assert!(gap <= last + 1e-12);
            last = gap;
        }
    }
}

//! Property suites tying the partition metrics to convex combinations.
//!
//! Each probe returns a [`ProbeReport`]; a report passes exactly when its
//! largest violation is within tolerance.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::action::{convex_combine, finite_mixture, FiniteAction};
use crate::error::{Error, Result};
use crate::group_window::GroupWindow;
use crate::hull;
use crate::irs::{isomorphism, DEFAULT_CANON_BUDGET};
use crate::moment::{cloud_set, moment_cloud, series_distance, CloudOptions, CloudSet, DistanceMode};

pub const METRIC_TOLERANCE: f64 = 1e-9;
pub const HULL_TOLERANCE: f64 = 1e-7;
pub const DEFAULT_GRID_DENOMINATOR: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeOptions {
    pub cloud: CloudOptions,
    pub canon_budget: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            cloud: CloudOptions::default(),
            canon_budget: DEFAULT_CANON_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    pub violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isomorphic: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub name: String,
    pub instances: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub details: Vec<ProbeRecord>,
}

impl ProbeReport {
    pub fn new(name: impl Into<String>, tolerance: f64, details: Vec<ProbeRecord>) -> Self {
        let max_violation = details.iter().map(|d| d.violation).fold(0.0, f64::max);
        ProbeReport {
            name: name.into(),
            instances: details.len(),
            max_violation,
            tolerance,
            pass: max_violation <= tolerance,
            details,
        }
    }

    /// Concatenates reports under one name.
    pub fn merge(name: impl Into<String>, reports: Vec<ProbeReport>) -> Self {
        let tolerance = reports.iter().map(|r| r.tolerance).fold(f64::INFINITY, f64::min);
        let mut report = ProbeReport::new(name, tolerance, reports.into_iter().flat_map(|r| r.details).collect());
        report.pass = report.max_violation <= report.tolerance;
        report
    }
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn check_unit(t: &BigRational) -> Result<()> {
    if t.is_negative() || *t > BigRational::one() {
        return Err(Error::input(format!("coefficient {t} is outside [0, 1]")));
    }
    Ok(())
}

fn distance(a: &FiniteAction, b: &FiniteAction, cut: usize, opts: &CloudOptions, mode: DistanceMode) -> Result<f64> {
    series_distance(&cloud_set(a, cut, opts)?, &cloud_set(b, cut, opts)?, mode)
}

/// One axiom instance: exact isomorphism of the two sides plus their metric
/// distance. A non-isomorphic instance counts as a violation of 1.
fn axiom_record(
    instance: String,
    lhs: &FiniteAction,
    rhs: &FiniteAction,
    cut: usize,
    opts: &ProbeOptions,
) -> Result<ProbeRecord> {
    let iso = isomorphism(lhs, rhs, opts.canon_budget)?.is_some();
    let d = distance(lhs, rhs, cut, &opts.cloud, DistanceMode::Points)?;
    Ok(ProbeRecord {
        instance,
        lhs: d,
        rhs: 0.0,
        violation: if iso { d } else { d.max(1.0) },
        isomorphic: Some(iso),
    })
}

/// Axioms of a weak convex space on finite actions:
///
/// * (1) `cc_1(x, y) ≅ x` and `cc_0(x, y) ≅ y`,
/// * (3) `cc_t(x, y) ≅ cc_{1−t}(y, x)`,
/// * (4) `cc_t(cc_s(x, y), z) ≅ cc_{st}(x, cc_{t(1−s)/(1−st)}(y, z))` for `st ≠ 1`.
///
/// Sample `i` is paired with samples `i+1` and `i+2` (cyclically); `t` runs
/// over `t_values` and `s` over the same list shifted by one.
pub fn axiom_suite(samples: &[FiniteAction], t_values: &[BigRational], cut: usize, opts: &ProbeOptions) -> Result<ProbeReport> {
    if samples.is_empty() || t_values.is_empty() {
        return Err(Error::input("the axiom suite needs samples and coefficients"));
    }
    for t in t_values {
        check_unit(t)?;
    }
    let len = samples.len();
    let mut cases: Vec<(String, FiniteAction, FiniteAction)> = Vec::new();
    for i in 0..len {
        let (x, y, z) = (&samples[i], &samples[(i + 1) % len], &samples[(i + 2) % len]);
        let one = BigRational::one();
        cases.push((format!("(1) cc_1 sample {i}"), convex_combine(&one, x, y)?, x.clone()));
        cases.push((format!("(1) cc_0 sample {i}"), convex_combine(&BigRational::zero(), x, y)?, y.clone()));
        for (j, t) in t_values.iter().enumerate() {
            cases.push((
                format!("(3) sample {i}, t = {t}"),
                convex_combine(t, x, y)?,
                convex_combine(&(&one - t), y, x)?,
            ));
            let s = &t_values[(j + 1) % t_values.len()];
            let st = s * t;
            if st.is_one() {
                continue;
            }
            let inner = t * (&one - s) / (&one - &st);
            cases.push((
                format!("(4) sample {i}, s = {s}, t = {t}"),
                convex_combine(t, &convex_combine(s, x, y)?, z)?,
                convex_combine(&st, x, &convex_combine(&inner, y, z)?)?,
            ));
        }
    }
    let details = cases
        .par_iter()
        .map(|(name, l, r)| axiom_record(name.clone(), l, r, cut, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbeReport::new("axioms", METRIC_TOLERANCE, details))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SelfCombination {
    pub atomic_defect: f64,
    pub stable_defect: f64,
}

/// Distances from `a` to `cc_t(a, a)` in the atomic and the stable metric.
pub fn self_combination_defect(a: &FiniteAction, t: &BigRational, cut: usize, opts: &CloudOptions) -> Result<SelfCombination> {
    if !t.is_positive() || *t >= BigRational::one() {
        return Err(Error::input(format!("self-combination needs 0 < t < 1, got {t}")));
    }
    let cc = convex_combine(t, a, a)?;
    let ca = cloud_set(a, cut, opts)?;
    let cc = cloud_set(&cc, cut, opts)?;
    Ok(SelfCombination {
        atomic_defect: series_distance(&ca, &cc, DistanceMode::Points)?,
        stable_defect: series_distance(&ca, &cc, DistanceMode::Hulls)?,
    })
}

/// `d(cc_t(a, c), cc_t(b, c)) ≤ t · d(a, b)` for both metrics.
pub fn contraction_check(
    a: &FiniteAction,
    b: &FiniteAction,
    c: &FiniteAction,
    t: &BigRational,
    cut: usize,
    opts: &CloudOptions,
) -> Result<ProbeReport> {
    check_unit(t)?;
    let sa = cloud_set(a, cut, opts)?;
    let sb = cloud_set(b, cut, opts)?;
    let sac = cloud_set(&convex_combine(t, a, c)?, cut, opts)?;
    let sbc = cloud_set(&convex_combine(t, b, c)?, cut, opts)?;
    let tf = crate::random_partition::ratio_to_f64(t);
    let mut details = Vec::new();
    for mode in [DistanceMode::Points, DistanceMode::Hulls] {
        let lhs = series_distance(&sac, &sbc, mode)?;
        let rhs = tf * series_distance(&sa, &sb, mode)?;
        details.push(ProbeRecord {
            instance: format!("{} metric, t = {t}", mode.name()),
            lhs,
            rhs,
            violation: (lhs - rhs).max(0.0),
            isomorphic: None,
        });
    }
    Ok(ProbeReport::new("contraction", METRIC_TOLERANCE, details))
}

/// Coefficient vectors with common denominator at most `max_den`, reduced
/// and deduplicated, in increasing order.
fn coefficient_grid(parts: usize, max_den: usize) -> Vec<Vec<BigRational>> {
    let mut out: std::collections::BTreeSet<Vec<BigRational>> = Default::default();
    for den in 1..=max_den {
        let mut cur = vec![0usize; parts];
        fn rec(i: usize, left: usize, den: usize, cur: &mut Vec<usize>, out: &mut std::collections::BTreeSet<Vec<BigRational>>) {
            if i + 1 == cur.len() {
                cur[i] = left;
                out.insert(cur.iter().map(|&c| ratio(c as i64, den as i64)).collect());
                return;
            }
            for v in 0..=left {
                cur[i] = v;
                rec(i + 1, left - v, den, cur, out);
            }
        }
        rec(0, den, den, &mut cur, &mut out);
    }
    out.into_iter().collect()
}

fn nearest(from: &CloudSet, grid: &[CloudSet], mode: DistanceMode) -> Result<(f64, usize)> {
    let d = grid
        .par_iter()
        .map(|g| series_distance(from, g, mode))
        .collect::<Result<Vec<f64>>>()?;
    Ok(d.iter().enumerate().fold((f64::INFINITY, 0), |b, (i, &v)| if v < b.0 { (v, i) } else { b }))
}

/// Convexity of `d(·, K)` with `K` the mixtures of `k_reps` whose
/// coefficients have denominators at most `max_den`:
/// `d(cc_t(x, y), K') ≤ t · d(x, K) + (1−t) · d(y, K)`, where `K'` adds the
/// combinations `cc_t(b, b')` of grid points.
#[allow(clippy::too_many_arguments)]
pub fn distance_convexity_check(
    x: &FiniteAction,
    y: &FiniteAction,
    k_reps: &[FiniteAction],
    t: &BigRational,
    cut: usize,
    max_den: usize,
    mode: DistanceMode,
    opts: &CloudOptions,
) -> Result<ProbeReport> {
    check_unit(t)?;
    if k_reps.is_empty() || max_den == 0 {
        return Err(Error::input("the convex set needs representatives and a positive grid denominator"));
    }
    let grid: Vec<FiniteAction> = coefficient_grid(k_reps.len(), max_den)
        .into_iter()
        .map(|coeffs| {
            let terms: Vec<_> = coeffs.into_iter().zip(k_reps.iter().cloned()).collect();
            finite_mixture(&terms)
        })
        .collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    for b in &grid {
        for c in &grid {
            pairs.push(convex_combine(t, b, c)?);
        }
    }
    let sets = grid
        .par_iter()
        .chain(pairs.par_iter())
        .map(|g| cloud_set(g, cut, opts))
        .collect::<Result<Vec<_>>>()?;
    let base = &sets[..grid.len()];
    let (dx, _) = nearest(&cloud_set(x, cut, opts)?, base, mode)?;
    let (dy, _) = nearest(&cloud_set(y, cut, opts)?, base, mode)?;
    let (dl, _) = nearest(&cloud_set(&convex_combine(t, x, y)?, cut, opts)?, &sets, mode)?;
    let tf = crate::random_partition::ratio_to_f64(t);
    let rhs = tf * dx + (1.0 - tf) * dy;
    let record = ProbeRecord {
        instance: format!("{} metric, t = {t}, {} grid points", mode.name(), grid.len()),
        lhs: dl,
        rhs,
        violation: (dl - rhs).max(0.0),
        isomorphic: None,
    };
    Ok(ProbeReport::new("distance_convexity", METRIC_TOLERANCE, vec![record]))
}

/// Every point of the mixture's cloud lies in the convex hull of the union
/// of the components' clouds.
pub fn mixture_hull_check(
    terms: &[(BigRational, FiniteAction)],
    window: &GroupWindow,
    n: usize,
    k: usize,
    opts: &CloudOptions,
) -> Result<ProbeReport> {
    let mix = finite_mixture(terms)?;
    let cloud = moment_cloud(&mix, window, n, k, opts)?;
    let mut union: BTreeMap<Vec<u64>, Vec<f64>> = BTreeMap::new();
    for (_, a) in terms {
        for p in moment_cloud(a, window, n, k, opts)?.float_points() {
            union.insert(p.iter().map(|x| x.to_bits()).collect(), p);
        }
    }
    let union: Vec<Vec<f64>> = union.into_values().collect();
    let points = cloud.float_points();
    let coords = hull::varying_coordinates(&points, &union);
    let (pm, pu) = (hull::project(&points, &coords), hull::project(&union, &coords));
    let distances = pm
        .par_iter()
        .map(|x| {
            if x.is_empty() {
                Ok(0.0)
            } else {
                hull::distance_to_hull(x, &pu)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let details = distances
        .into_iter()
        .zip(cloud.witnesses())
        .map(|(d, w)| ProbeRecord {
            instance: format!("partition {w}"),
            lhs: d,
            rhs: 0.0,
            violation: d,
            isomorphic: None,
        })
        .collect();
    Ok(ProbeReport::new("mixture_hull", HULL_TOLERANCE, details))
}

use num::{BigInt, BigRational, One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wequiv::action::{convex_combine, random_action, FiniteAction};
use wequiv::fixtures::{cycle, cycle4, swap, trivial};
use wequiv::group_window::{build_window, evaluate_word, Word};
use wequiv::moment::Partition;
use wequiv::random_partition::{claim1_experiment, freeness_defect, injectivity_set, PartitionStats};
use wequiv::Error;

fn w(s: &str) -> Word {
    s.parse().unwrap()
}

fn ball1() -> Vec<Word> {
    build_window(1, 1).unwrap().words().to_vec()
}

fn one_class(m: usize) -> Partition {
    Partition::new(vec![0; m], 1).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

#[test]
fn freeness_examples() {
    assert!(freeness_defect(&trivial(4), &ball1()).unwrap().is_one());
    assert!(freeness_defect(&cycle4(), &ball1()).unwrap().is_zero());
    assert!(freeness_defect(&swap(), &ball1()).unwrap().is_one());
    assert!(freeness_defect(&swap(), &[w(""), w("a")]).unwrap().is_zero());
    let mix = convex_combine(&BigRational::new(BigInt::from(1), BigInt::from(4)), &trivial(1), &cycle4()).unwrap();
    assert_eq!(freeness_defect(&mix, &ball1()).unwrap(), BigRational::new(BigInt::from(1), BigInt::from(4)));
}

#[test]
fn identity_window_counts_colour_balance() {
    let m = 32;
    let stats = claim1_experiment(&cycle(m), &[w("")], &one_class(m), 0.1, 16, 41).unwrap();
    for (t, d) in stats.max_deviation_per_trial.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        rng.set_stream(t as u64);
        let zeros = (0..m).filter(|_| rng.gen_range(0..2u8) == 0).count();
        assert_eq!(*d, (zeros as f64 / m as f64 - 0.5).abs());
    }
}

#[test]
fn report_fields() {
    let s = claim1_experiment(&cycle(64), &ball1(), &one_class(64), 0.2, 50, 3).unwrap();
    assert_eq!(s.window_size, 3);
    assert_eq!(s.target, 0.125);
    assert_eq!(s.trials, 50);
    assert_eq!(s.max_deviation_per_trial.len(), 50);
    assert_eq!(s.freeness_defect, 0.0);
    assert!((0.0..=1.0).contains(&s.chebyshev_bound));
    assert!((s.analytic_variance_bound / (0.04 / (8.0 * 2f64.powi(9))) - 1.0).abs() < 1e-12);
    let failures = s.max_deviation_per_trial.iter().filter(|&&d| d >= 0.2).count();
    assert_eq!(s.empirical_failure_rate, failures as f64 / 50.0);
    match &s.witness_coloring {
        Some(c) => {
            let first = s.max_deviation_per_trial.iter().position(|&d| d < 0.2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            rng.set_stream(first as u64);
            let expected: Vec<usize> = (0..64).map(|_| rng.gen_range(0..2u8) as usize).collect();
            assert_eq!(c, &expected);
        }
        None => assert_eq!(s.empirical_failure_rate, 1.0),
    }
}

#[test]
fn refusals() {
    let a = cycle4();
    assert!(matches!(claim1_experiment(&a, &ball1(), &one_class(4), 0.1, 0, 1), Err(Error::Input(_))));
    assert!(matches!(claim1_experiment(&a, &ball1(), &one_class(4), 0.0, 5, 1), Err(Error::Input(_))));
    assert!(matches!(claim1_experiment(&a, &[], &one_class(4), 0.1, 5, 1), Err(Error::Input(_))));
    assert!(matches!(claim1_experiment(&a, &ball1(), &one_class(3), 0.1, 5, 1), Err(Error::Input(_))));
    let thirteen: Vec<Word> = build_window(1, 6).unwrap().words().to_vec();
    assert_eq!(thirteen.len(), 13);
    assert!(matches!(claim1_experiment(&a, &thirteen, &one_class(4), 0.1, 5, 1), Err(Error::Budget { .. })));
    assert!(claim1_experiment(&a, &thirteen[..12], &one_class(4), 0.1, 5, 1).is_ok());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let a = cycle(128);
    let base = Partition::new((0..128).map(|x| x % 3).collect(), 3).unwrap();
    let run = |threads: usize| -> PartitionStats {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| claim1_experiment(&a, &ball1(), &base, 0.05, 64, 12).unwrap())
    };
    let one = run(1);
    assert_eq!(run(2), one);
    assert_eq!(run(8), one);
}

#[test]
fn deviations_shrink_with_the_action() {
    let medians: Vec<f64> = [64, 256, 1024]
        .iter()
        .map(|&m| {
            let per_seed: Vec<f64> = (1..=20)
                .map(|seed| {
                    let s = claim1_experiment(&cycle(m), &ball1(), &one_class(m), 0.05, 5, seed).unwrap();
                    median(s.max_deviation_per_trial)
                })
                .collect();
            median(per_seed)
        })
        .collect();
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

fn arb_action() -> impl Strategy<Value = FiniteAction> {
    (any::<u64>(), 1usize..10, 1usize..3).prop_map(|(seed, atoms, gens)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_action(&mut rng, atoms, gens, 3).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn injectivity_matches_direct_check(a in arb_action()) {
        let words = build_window(a.generator_count(), 1).unwrap().words().to_vec();
        let perms: Vec<_> = words.iter().map(|g| evaluate_word(&a, g).unwrap()).collect();
        let free = injectivity_set(&a, &words).unwrap();
        let mut defect = BigRational::zero();
        for (x, &is_free) in free.iter().enumerate() {
            let distinct = (0..perms.len())
                .all(|i| (0..i).all(|j| perms[i].apply(x) != perms[j].apply(x)));
            prop_assert_eq!(is_free, distinct);
            if !distinct {
                defect += &a.weights()[x];
            }
        }
        prop_assert_eq!(freeness_defect(&a, &words).unwrap(), defect);
    }

    #[test]
    fn deviations_are_bounded(a in arb_action(), seed in any::<u64>()) {
        let words = build_window(a.generator_count(), 1).unwrap().words().to_vec();
        let s = claim1_experiment(&a, &words, &one_class(a.atom_count()), 0.1, 8, seed).unwrap();
        prop_assert!(s.max_deviation_per_trial.iter().all(|&d| (0.0..=1.0).contains(&d)));
        prop_assert!(s.chebyshev_bound <= 1.0);
        prop_assert_eq!(s.witness_coloring.is_some(), s.empirical_failure_rate < 1.0);
    }
}

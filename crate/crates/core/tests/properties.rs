use naesat_core::bp::count_solutions;
use naesat_core::decimation::{run, Ordering, Seeds, UnitClauseRule};
use naesat_core::experiment::wilson_interval;
use naesat_core::instance::{generate, parse_formula, Var};
use naesat_core::overlap::OverlapParams;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_format_round_trips(n in 3usize..40, k in 2usize..5, d in 0.0f64..3.0, seed: u64) {
        let f = generate(n, k.min(n), d, seed).unwrap();
        prop_assert_eq!(parse_formula(&f.to_dimacs()).unwrap(), f);
    }

    #[test]
    fn complement_is_an_involution_and_keeps_counts(
        n in 3usize..14, d in 0.0f64..3.0, seed: u64, fix in proptest::collection::vec(any::<Option<bool>>(), 14)
    ) {
        let mut f = generate(n, 3, d, seed).unwrap();
        for (v, value) in fix.iter().take(n).enumerate() {
            if let Some(b) = value {
                f = f.reduce(Var(v as u32), *b).unwrap();
            }
        }
        let c = f.complement();
        prop_assert_eq!(c.complement(), f.clone());
        prop_assert_eq!(count_solutions(&c).unwrap(), count_solutions(&f).unwrap());
    }

    #[test]
    fn reduce_commutes_with_complement(n in 3usize..30, d in 0.0f64..3.0, seed: u64, v in 0usize..30, b: bool) {
        let f = generate(n, 3, d, seed).unwrap();
        let v = Var((v % n) as u32);
        prop_assert_eq!(f.reduce(v, b).unwrap().complement(), f.complement().reduce(v, !b).unwrap());
    }

    #[test]
    fn decimation_is_deterministic_and_total(n in 3usize..60, d in 0.0f64..3.0, seed: u64) {
        let f = generate(n, 3, d, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Ordering::draw(n, &mut rng).unwrap();
        let u = Seeds::draw(n, &mut rng);
        let a = run(&f, &UnitClauseRule, &z, &u).unwrap();
        let b = run(&f, &UnitClauseRule, &z, &u).unwrap();
        prop_assert_eq!(&a.assignment, &b.assignment);
        prop_assert_eq!(a.assignment.len(), n);
        prop_assert_eq!(a.violations, f.evaluate_bits(&a.assignment).violated.len());
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(trials in 1usize..5000, frac in 0.0f64..=1.0) {
        let successes = ((trials as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(successes, trials);
        let p = successes as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn window_is_inside_the_stated_range(beta in 0.01f64..0.5, frac in 0.01f64..1.0, n in 1usize..500) {
        let eta = beta * frac;
        let p = OverlapParams::new(beta, eta, 2).unwrap();
        let (lo, hi) = p.window(n);
        prop_assert!(lo as f64 >= (beta - eta) * n as f64 - 1e-6);
        prop_assert!(hi as f64 <= beta * n as f64 + 1e-6);
    }
}

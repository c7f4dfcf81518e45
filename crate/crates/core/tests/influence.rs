use naesat_core::bp::BpRule;
use naesat_core::decimation::{Ordering, Seed, Seeds, UnitClauseRule};
use naesat_core::influence::{ball_growth, diff_set, influence_range, max_influence_stats};
use naesat_core::instance::{generate, Formula, Var};
use naesat_core::sp::{SpMode, SpRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hop distances by Floyd-Warshall, then chain closure by Warshall.
fn closure_oracle(f: &Formula, z: &Ordering, r: usize) -> Vec<Vec<bool>> {
    let n = f.num_vars();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
    }
    for c in f.clauses() {
        for a in &c.literals {
            for b in &c.literals {
                if a.var != b.var {
                    d[a.var.index()][b.var.index()] = 1;
                }
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let w = z.weights();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
        for j in 0..n {
            if i != j && d[i][j] <= r && (w[j], j) < (w[i], i) {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

#[test]
fn search_matches_closure_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..40 {
        let n = rng.gen_range(5..=40);
        let d = rng.gen_range(0.2..2.5);
        let f = generate(n, 3, d, trial).unwrap();
        let z = Ordering::draw(n, &mut rng).unwrap();
        for r in 1..=3 {
            let oracle = closure_oracle(&f, &z, r);
            for x in 0..n {
                let ir = influence_range(&f, &z, r, Var(x as u32)).unwrap();
                let expect: Vec<Var> = (0..n).filter(|&j| oracle[x][j]).map(|j| Var(j as u32)).collect();
                assert_eq!(ir.members, expect, "trial {trial} r {r} x {x}");
                for &y in &ir.members {
                    assert!(y == ir.source || z.precedes(ir.source, y));
                }
            }
        }
    }
}

fn perturb(u: &Seeds, i: usize, rng: &mut ChaCha8Rng) -> Seeds {
    let mut v = u.clone();
    v.0[i] = Seed {
        threshold: rng.gen(),
        aux: rng.gen(),
        mirrored: false,
    };
    v
}

#[test]
fn decision_changes_stay_inside_influence_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bp = BpRule::new(2).unwrap();
    let sp = SpRule::new(1, SpMode::Sample).unwrap();
    let rules: [(&dyn naesat_core::decimation::LocalRule, usize); 3] =
        [(&UnitClauseRule, 200), (&bp, 1000), (&sp, 200)];
    for (rule, trials) in rules {
        let mut nonempty = 0;
        for trial in 0..trials {
            let n = 60;
            let f = generate(n, 3, 2.0, trial as u64).unwrap();
            let z = Ordering::draw(n, &mut rng).unwrap();
            let u = Seeds::draw(n, &mut rng);
            let i0 = rng.gen_range(0..n);
            let u2 = perturb(&u, i0, &mut rng);
            let changed = diff_set(&f, &z, &u, &u2, rule).unwrap();
            // decisions read balls of radius r, i.e. r/2 variable hops
            let ir = influence_range(&f, &z, rule.radius() / 2, Var(i0 as u32)).unwrap();
            for v in &changed {
                assert!(ir.contains(*v), "{} trial {trial}: {v} outside IR", rule.name());
            }
            nonempty += usize::from(!changed.is_empty());
        }
        assert!(nonempty > trials / 10, "{}: perturbations rarely mattered", rule.name());
    }
}

#[test]
fn diff_set_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = generate(30, 3, 1.0, 3).unwrap();
    let z = Ordering::draw(30, &mut rng).unwrap();
    let u = Seeds::draw(30, &mut rng);
    assert!(diff_set(&f, &z, &u, &u, &UnitClauseRule).unwrap().is_empty());
    let mut two = perturb(&u, 1, &mut rng);
    two.0[2].threshold = 0.123;
    assert!(diff_set(&f, &z, &u, &two, &UnitClauseRule).is_err());

    let empty = Formula::new(10, 3, vec![]).unwrap();
    let z = Ordering::draw(10, &mut rng).unwrap();
    let thresholds = [0.3; 10];
    let u = Seeds::from_thresholds(&thresholds, 7);
    let mut u2 = u.clone();
    u2.0[4].threshold = 0.7;
    assert_eq!(diff_set(&empty, &z, &u, &u2, &UnitClauseRule).unwrap(), vec![Var(4)]);
}

#[test]
fn one_hop_ball_matches_expected_degree() {
    let (n, k, d) = (10_000, 3, 2.0);
    let f = generate(n, k, d, 5).unwrap();
    let roots: Vec<Var> = (0..1000).map(|i| Var(i * 10)).collect();
    let rows = ball_growth(&f, 3, &roots).unwrap();
    assert_eq!(rows[0].mean, 1.0);
    assert_eq!(rows[0].max, 1);
    let neighbors = rows[1].mean - 1.0;
    let expected = d * (k * (k - 1)) as f64;
    assert!((neighbors - expected).abs() < 0.1 * expected, "{neighbors} vs {expected}");
    assert!(rows.windows(2).all(|w| w[1].mean >= w[0].mean));
}

#[test]
fn stats_on_moderate_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = generate(3000, 3, 2.0, 9).unwrap();
    let z = Ordering::draw(3000, &mut rng).unwrap();
    let stats = max_influence_stats(&f, &z, 1).unwrap();
    assert_eq!(stats.histogram.values().sum::<usize>(), 3000);
    assert!(stats.max >= 1 && stats.max <= 3000);
}

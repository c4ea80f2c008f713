use kinrep::kinetic::{Atom, DiscreteMeasure};
use kinrep::transport::*;
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lp_cost(a: &DiscreteMeasure, b: &DiscreteMeasure, m: &AnisotropicMetric) -> f64 {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = a
        .atoms
        .iter()
        .map(|pa| {
            b.atoms
                .iter()
                .map(|pb| p.add_var(m.dist(pa, pb), (0.0, f64::INFINITY)))
                .collect()
        })
        .collect();
    for (i, pa) in a.atoms.iter().enumerate() {
        let row: Vec<_> = vars[i].iter().map(|&v| (v, 1.0)).collect();
        p.add_constraint(&row, ComparisonOp::Eq, pa.w);
    }
    for (j, pb) in b.atoms.iter().enumerate() {
        let col: Vec<_> = vars.iter().map(|r| (r[j], 1.0)).collect();
        p.add_constraint(&col, ComparisonOp::Eq, pb.w);
    }
    p.solve().unwrap().objective()
}

fn random_measure(rng: &mut ChaCha8Rng, d: usize, n: usize, mass: f64) -> DiscreteMeasure {
    let mut atoms: Vec<Atom> = (0..n)
        .map(|_| Atom {
            x: [
                rng.gen_range(0.0..1.0),
                if d == 2 { rng.gen_range(0.0..1.0) } else { 0.0 },
            ],
            v: rng.gen_range(0.0..1.0),
            w: rng.gen_range(0.01..1.0),
        })
        .collect();
    let s: f64 = atoms.iter().map(|a| a.w).sum();
    atoms.iter_mut().for_each(|a| a.w *= mass / s);
    DiscreteMeasure::new(d, atoms).unwrap()
}

fn check_plan(
    plan: &TransportPlan,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    m: &AnisotropicMetric,
) {
    let r = verify_duality(plan, a, b, m);
    let mass = a.total_mass();
    assert!(r.marginal_error_src <= 1e-10 * mass, "{r:?}");
    assert!(r.marginal_error_dst <= 1e-10 * mass, "{r:?}");
    assert!(r.gap.abs() <= 1e-8 * plan.cost.max(1.0), "{r:?}");
    assert!(r.max_violation <= 1e-8, "{r:?}");
    assert!(r.max_slackness <= 1e-8, "{r:?}");
}

#[test]
fn matches_lp_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..60 {
        let d = 1 + trial % 2;
        let l = [0.5, 1.0, 4.0][trial % 3];
        let metric = AnisotropicMetric::new(l).unwrap();
        let (na, nb) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let a = random_measure(&mut rng, d, na, 1.0);
        let mut b = random_measure(&mut rng, d, nb, 1.0);
        // shared atoms exercise the in-place cancellation
        if trial % 4 == 0 {
            for k in 0..a.atoms.len().min(b.atoms.len()) / 2 {
                b.atoms[k].x = a.atoms[k].x;
                b.atoms[k].v = a.atoms[k].v;
            }
        }
        let plan = w1_distance(&a, &b, &metric).unwrap();
        let lp = lp_cost(&a, &b, &metric);
        assert!(
            (plan.cost - lp).abs() <= 1e-9 * lp.max(1e-300),
            "trial {trial}: {} vs {lp}",
            plan.cost
        );
        check_plan(&plan, &a, &b, &metric);
    }
}

#[test]
fn translation_cost() {
    // 16 equal atoms on [0, 1) shifted by a quarter
    let metric = AnisotropicMetric::new(1.0).unwrap();
    let atoms = |s: f64| {
        (0..16)
            .map(|i| Atom {
                x: [(i as f64 + 0.5) / 16.0 + s, 0.0],
                v: 0.5,
                w: 1.0 / 16.0,
            })
            .collect()
    };
    let a = DiscreteMeasure::new(1, atoms(0.0)).unwrap();
    let b = DiscreteMeasure::new(1, atoms(0.25)).unwrap();
    let plan = w1_distance(&a, &b, &metric).unwrap();
    assert!((plan.cost - 0.25).abs() < 1e-12);
    assert!((lp_cost(&a, &b, &metric) - 0.25).abs() < 1e-12);
    check_plan(&plan, &a, &b, &metric);
}

#[test]
fn sparse_solve_is_certified_on_all_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let metric = AnisotropicMetric::new(2.0).unwrap();
    let a = random_measure(&mut rng, 1, 600, 1.0);
    let b = random_measure(&mut rng, 1, 600, 1.0);
    let plan = w1_distance(&a, &b, &metric).unwrap();
    assert!(plan.radius.is_finite());
    assert!(plan.n_arcs < 600 * 600);
    let mut worst: f64 = 0.0;
    for (i, p) in a.atoms.iter().enumerate() {
        for (j, q) in b.atoms.iter().enumerate() {
            worst = worst.max(plan.phi_src[i] - plan.phi_dst[j] - metric.dist(p, q));
        }
    }
    assert!(worst <= 1e-9, "{worst}");
    check_plan(&plan, &a, &b, &metric);
}

#[test]
fn periodic_metric_wraps() {
    let m = AnisotropicMetric::periodic(1.0, [1.0, f64::INFINITY]).unwrap();
    let p = Atom {
        x: [0.05, 0.0],
        v: 0.0,
        w: 1.0,
    };
    let q = Atom {
        x: [0.95, 0.0],
        v: 0.0,
        w: 1.0,
    };
    assert!((m.dist(&p, &q) - 0.1).abs() < 1e-12);
}

#[test]
fn rebalance_rescales_lighter() {
    let mut a = DiscreteMeasure::new(
        1,
        vec![Atom {
            x: [0.0; 2],
            v: 0.0,
            w: 1.0,
        }],
    )
    .unwrap();
    let mut b = DiscreteMeasure::new(
        1,
        vec![
            Atom {
                x: [0.0; 2],
                v: 0.0,
                w: 0.5,
            },
            Atom {
                x: [1.0, 0.0],
                v: 0.0,
                w: 0.25,
            },
        ],
    )
    .unwrap();
    let def = rebalance(&mut a, &mut b);
    assert!((def - 0.25).abs() < 1e-15);
    assert!((b.total_mass() - 1.0).abs() < 1e-15);
}

fn triple() -> impl Strategy<Value = [(f64, f64, f64); 3]> {
    let pt = (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64);
    [pt.clone(), pt.clone(), pt]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn metric_axioms(t in triple()) {
        let [p, q, r] = t.map(|(x, y, v)| Atom { x: [x, y], v, w: 1.0 });
        for l in [0.5, 1.0, 4.0, 16.0] {
        let m = AnisotropicMetric::new(l).unwrap();
        let tol = 1e-12 * (1.0 + m.dist(&p, &q) + m.dist(&q, &r));
        prop_assert_eq!(m.dist(&p, &p), 0.0);
        prop_assert!(m.dist(&p, &q) > 0.0 || (p.x == q.x && p.v == q.v));
        prop_assert!((m.dist(&p, &q) - m.dist(&q, &p)).abs() <= tol);
        prop_assert!(m.dist(&p, &r) <= m.dist(&p, &q) + m.dist(&q, &r) + tol);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_covariance(seed in any::<u64>(), lambda in 0.1..10.0f64, l in 0.5..4.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_measure(&mut rng, 1, 12, 1.0);
        let b = random_measure(&mut rng, 1, 9, 1.0);
        let scale = |m: &DiscreteMeasure| {
            DiscreteMeasure::new(1, m.atoms.iter().map(|p| Atom { v: p.v * lambda, ..*p }).collect()).unwrap()
        };
        let c1 = w1_distance(&a, &b, &AnisotropicMetric::new(l).unwrap()).unwrap().cost;
        let c2 = w1_distance(&scale(&a), &scale(&b), &AnisotropicMetric::new(l * lambda).unwrap()).unwrap().cost;
        prop_assert!((c2 - lambda * c1).abs() <= 1e-9 * lambda * c1.max(1e-12));
    }

    #[test]
    fn plans_have_exact_marginals(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_measure(&mut rng, 2, 20, 3.0);
        let b = random_measure(&mut rng, 2, 25, 3.0);
        let m = AnisotropicMetric::new(1.0).unwrap();
        let plan = w1_distance(&a, &b, &m).unwrap();
        let r = verify_duality(&plan, &a, &b, &m);
        prop_assert!(r.marginal_error_src <= 3e-10 && r.marginal_error_dst <= 3e-10);
    }
}

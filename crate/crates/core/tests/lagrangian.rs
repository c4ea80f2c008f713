use kinrep::error::Error;
use kinrep::kinetic::{extract_kinetic_measure, ExtractOptions, KineticMeasure};
use kinrep::lagrangian::*;
use kinrep::poly::Poly;
use kinrep::solver::{fixtures, Solution};

fn setup(sol: Solution) -> (Solution, KineticMeasure) {
    let kin = extract_kinetic_measure(
        &sol,
        ExtractOptions {
            nv: 64,
            keep_mu: false,
        },
    )
    .unwrap();
    (sol, kin)
}

fn ensemble(sol: &Solution, kin: &KineticMeasure, n: usize) -> Ensemble {
    build_ensemble(sol, kin, n, &EnsembleOptions::default()).unwrap()
}

#[test]
fn constant_state_gives_straight_lines() {
    let (sol, kin) = setup(fixtures::constant_periodic(64).unwrap());
    let ens = ensemble(&sol, &kin, 3);
    for c in ens.curves() {
        assert!(c.v_values.windows(2).all(|w| w[0] == w[1]));
        assert!(c.x_jumps.iter().all(|j| *j == [0.0, 0.0]));
    }
    let tv = total_variation_budget(&ens);
    assert_eq!((tv.value, tv.bound, tv.holds), (0.0, 0.0, true));
    assert_eq!(check_characteristic_residual(&ens).residual, 0.0);
    let agg = aggregate_dissipation(&ens, &|_| 1.0).unwrap();
    assert!(agg.entries.is_empty());
    assert!(ens.steps.iter().all(|r| r.cost == 0.0));
}

#[test]
fn level_one_has_one_matching_time() {
    let (sol, kin) = setup(fixtures::shock(64).unwrap());
    let ens = ensemble(&sol, &kin, 1);
    assert_eq!(ens.interior_times(), &[0.5]);
    assert_eq!(ens.steps.len(), 1);
    let c = ens.curve(0);
    assert_eq!(c.v_values.len(), 2);
    assert_eq!(c.x_jumps.len(), 1);
}

#[test]
fn shock_ensemble() {
    let (sol, kin) = setup(fixtures::shock(256).unwrap());
    let ens = ensemble(&sol, &kin, 4);
    assert!((ens.total_mass - 1.0).abs() < 1e-9);
    for k in 0..ens.layers.len() {
        assert!((ens.layer_mass(k) - ens.total_mass).abs() < 1e-12);
    }
    let leaves: f64 = ens.curves().map(|c| c.weight).sum();
    assert!((leaves - 1.0).abs() < 1e-9);

    // vertical jumps sit at the shock x = t/2
    let dx = sol.spec.dx(0);
    let (mut near, mut all) = (0.0, 0.0);
    for k in 1..ens.layers.len() {
        let prev = &ens.layers[k - 1];
        for s in &ens.layers[k] {
            let j = s.w * (s.v - prev[s.parent as usize].v).abs();
            all += j;
            if (s.x[0] - ens.times[k] / 2.0).abs() <= 3.0 * dx {
                near += j;
            }
        }
    }
    assert!(near / all > 0.5, "{near} / {all}");

    let tv = total_variation_budget(&ens);
    assert!(tv.holds);
    assert!(tv.ratio >= 0.5 && tv.ratio <= 1.02, "{tv:?}");

    let agg = aggregate_dissipation(&ens, &|_| 1.0).unwrap();
    assert!((agg.atom_total - tv.value).abs() < 1e-9 * tv.value);
    assert!(agg.abs_total <= tv.value * (1.0 + 1e-12));
    assert!((agg.signed_total.abs() - kin.mu_abs_total).abs() <= 0.1 * kin.mu_abs_total);
    assert!((agg.signed_total.abs() - 1.0 / 12.0).abs() <= 0.1 / 12.0);
    assert!(agg.signed_total < 0.0);

    let audit = audit_atomicity(&ens);
    assert!(audit.holds, "{audit:?}");
    assert!(ens.steps.iter().all(|r| r.holds));
    assert!(check_characteristic_residual(&ens).holds);
}

#[test]
fn pushforward_checks() {
    let (sol, kin) = setup(fixtures::shock(128).unwrap());
    let ens = ensemble(&sol, &kin, 3);
    let p0 = check_pushforward(&ens, &sol, &kin, 0.0).unwrap();
    assert!(p0.error < 1e-12);
    let pg = check_pushforward(&ens, &sol, &kin, 0.5).unwrap();
    assert!(pg.grid_time && pg.holds, "{pg:?}");
    let pm = check_pushforward(&ens, &sol, &kin, 0.5 + 1.0 / 16.0).unwrap();
    assert!(!pm.grid_time && pm.holds, "{pm:?}");
    assert!(check_pushforward(&ens, &sol, &kin, 1.0).is_err());
    // the binned estimate bounds the exact distance
    let exact = pushforward_distance_exact(&ens, &sol, 0.5).unwrap();
    assert!(exact <= pg.error + 1e-12, "{exact} vs {}", pg.error);
}

#[test]
fn pushforward_refines() {
    let (sol, kin) = setup(fixtures::shock(256).unwrap());
    let errs: Vec<f64> = (2..=4)
        .map(|n| {
            check_pushforward(&ensemble(&sol, &kin, n), &sol, &kin, 0.5)
                .unwrap()
                .error
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{errs:?}");
    }
}

#[test]
fn equicontinuity_in_time() {
    let (sol, kin) = setup(fixtures::shock(128).unwrap());
    let ens = ensemble(&sol, &kin, 3);
    for (s, t) in [(0.0, 0.0625), (0.25, 0.375), (0.125, 0.875)] {
        let r = time_equicontinuity(&ens, &kin, s, t).unwrap();
        assert!(r.holds, "{r:?}");
    }
    let same = time_equicontinuity(&ens, &kin, 0.25, 0.25).unwrap();
    assert_eq!(same.coupling_cost, 0.0);
}

#[test]
fn rarefaction_has_little_variation() {
    let (sol, kin) = setup(fixtures::rarefaction(512).unwrap());
    let ens = ensemble(&sol, &kin, 4);
    assert!(total_variation_budget(&ens).value <= 0.05);
    let eta = Poly::new(vec![0.0, 0.0, 0.5]);
    let e = eulerian_dissipation(&sol, &eta, &[sol.flux.entropy_flux(0, &eta)]).unwrap();
    assert!(e.signed_total.abs() <= 0.01);
}

#[test]
fn eulerian_balance_on_shock() {
    let sol = fixtures::shock(512).unwrap();
    let eta = Poly::new(vec![0.0, 0.0, 0.5]);
    let e = eulerian_dissipation(&sol, &eta, &[sol.flux.entropy_flux(0, &eta)]).unwrap();
    assert!(
        (e.signed_total + 1.0 / 12.0).abs() <= 0.05 / 12.0,
        "{}",
        e.signed_total
    );
    let lin = Poly::new(vec![0.3, 2.0]);
    let e = eulerian_dissipation(&sol, &lin, &[sol.flux.entropy_flux(0, &lin)]).unwrap();
    assert!(e.abs_total < 1e-12, "{}", e.abs_total);
}

#[test]
fn curve_cap_and_step_condition() {
    let (sol, kin) = setup(fixtures::shock(64).unwrap());
    let opts = EnsembleOptions {
        curve_cap: 10,
        ..Default::default()
    };
    assert!(matches!(
        build_ensemble(&sol, &kin, 2, &opts),
        Err(Error::Resource(_))
    ));
    // s̄ = 1/4 needs L ≤ 2
    let opts = EnsembleOptions {
        l: Some(2.0 * 2f64.sqrt()),
        ..Default::default()
    };
    let e = build_ensemble(&sol, &kin, 2, &opts).unwrap_err();
    assert!(matches!(e, Error::Precondition(_)));
}

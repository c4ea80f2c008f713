use kinrep::flux::{estimate_nonlinearity, Flux};
use kinrep::geometry::GridFunction;
use kinrep::kinetic::*;
use kinrep::solver::{fixtures, Solution};
use kinrep::structure::oscillation_hbar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shock() -> (Solution, KineticMeasure) {
    let sol = fixtures::shock(256).unwrap();
    let kin = extract_kinetic_measure(&sol, ExtractOptions::default()).unwrap();
    (sol, kin)
}

#[test]
fn shock_defect_mass() {
    // Entropy dissipation of u²/2 across the shock x = t/2 over t ∈ [0, 1]:
    // s[η] − [q] = (1/2)(1/2) − 1/3 = −1/12 per unit time.
    let sol = fixtures::shock(512).unwrap();
    let kin = extract_kinetic_measure(&sol, ExtractOptions::default()).unwrap();
    let oracle = 1.0 / 12.0;
    assert!(
        (kin.mu_abs_total - oracle).abs() <= 0.05 * oracle,
        "{}",
        kin.mu_abs_total
    );
    assert!((kin.mu_signed_total + kin.mu_abs_total).abs() <= 1e-3 * oracle);
    assert!((kin.nu_total() - kin.mu_abs_total).abs() <= 1e-12);
    let per_t = kin.nu_per_time();
    assert!((per_t.iter().sum::<f64>() - kin.nu_total()).abs() <= 1e-12);
    assert!((kin.nu_window(0.0, 1.0) - kin.nu_total()).abs() <= 1e-12);
    assert!(kin.nu_window(0.25, 0.5) <= kin.nu_window(0.0, 0.5) + 1e-15);
}

#[test]
fn rarefaction_has_no_defect() {
    let sol = fixtures::rarefaction(256).unwrap();
    let kin = extract_kinetic_measure(&sol, ExtractOptions::default()).unwrap();
    assert!(kin.mu_abs_total < 0.01, "{}", kin.mu_abs_total);
}

#[test]
fn free_transport_preserves_mass() {
    for sol in [
        fixtures::shock(128).unwrap(),
        fixtures::rarefaction(128).unwrap(),
        fixtures::constant_periodic(64).unwrap(),
        fixtures::box_2d(32).unwrap(),
    ] {
        let k = sol.n_slices() / 2;
        let slice = KineticSlice::from_solution(&sol, k, 32);
        assert!((slice.mass() - sol.mass[k]).abs() <= 1e-12 * sol.mass[k].max(1.0));
        assert!(slice.is_monotone());
        let moved = slice.free_transport(&sol.flux, 0.125).unwrap();
        assert!((moved.mass() - slice.mass()).abs() <= 1e-12 * slice.mass().max(1.0));
        let atoms = DiscreteMeasure::from_slice(&slice);
        let ft = atoms.free_transport(&sol.flux, 0.125).unwrap();
        assert!(
            (ft.total_mass() - atoms.total_mass()).abs() <= 1e-12 * atoms.total_mass().max(1.0)
        );
    }
}

fn random_bump(rng: &mut ChaCha8Rng) -> BumpTestFunction {
    BumpTestFunction {
        center_x: [rng.gen_range(-0.3..0.8), 0.0],
        center_v: rng.gen_range(0.1..0.6),
        r: rng.gen_range(0.02..0.2),
        r_prime: rng.gen_range(0.02..0.1),
        dv: rng.gen_range(0.05..0.2),
        v_prime: rng.gen_range(0.05..0.15),
        amplitude: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
    }
}

#[test]
fn weak_estimate_random_bumps() {
    let (sol, kin) = shock();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s_bar in [1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0] {
        for _ in 0..20 {
            let phi = random_bump(&mut rng);
            let t = rng.gen_range(0..((1.0 - s_bar) * 32.0) as usize) as f64 / 32.0;
            let w = weak_estimate_check(&sol, &kin, t, s_bar, &phi, 64).unwrap();
            assert!(w.slack >= -0.02 * w.rhs, "{phi:?} {w:?}");
        }
    }
}

#[test]
fn cylinder_gap_on_shock_slices() {
    let sol = fixtures::shock(256).unwrap();
    let f = Flux::burgers();
    let cert = estimate_nonlinearity(&f, 1.0, 1.0, 1, &[0.05, 0.1, 0.3, 0.6]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = &sol.spec;
    let mut trials = 0;
    while trials < 20 {
        let k = rng.gen_range(0..sol.n_slices());
        let u = GridFunction::new(
            1,
            spec.lo,
            [spec.dx(0), 1.0],
            [spec.n, 1],
            sol.slice(k).to_vec(),
        )
        .unwrap();
        let r = rng.gen_range(0.02..0.2);
        let x = rng.gen_range(-1.0 + 3.2 * r..2.0 - 3.2 * r);
        if oscillation_hbar(&u, [x, 0.0], r, 16).unwrap().hbar < 0.1 {
            continue;
        }
        let c = find_dissipation_cylinder(&u, [x, 0.0], r, &f, &cert).unwrap();
        assert!(c.measured_gap >= c.lower_bound, "{c:?}");
        trials += 1;
    }
}

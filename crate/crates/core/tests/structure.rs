use kinrep::flux::{estimate_nonlinearity, fitted_constant, Flux, Vec2};
use kinrep::geometry::GridFunction;
use kinrep::kinetic::{extract_kinetic_measure, ExtractOptions};
use kinrep::solver::fixtures;
use kinrep::structure::*;

fn shock_fields() -> (GridFunction, GridFunction) {
    shock_fields_at(256)
}

fn shock_fields_at(n: usize) -> (GridFunction, GridFunction) {
    let sol = fixtures::shock(n).unwrap();
    let kin = extract_kinetic_measure(&sol, ExtractOptions::default()).unwrap();
    (spacetime_field(&sol).unwrap(), kin.nu_spacetime().unwrap())
}

fn geometric(hi: f64, q: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| hi * q.powi(k as i32)).collect()
}

#[test]
fn spacetime_field_layout() {
    let sol = fixtures::shock(64).unwrap();
    let u = spacetime_field(&sol).unwrap();
    assert_eq!(u.n, [sol.n_slices() - 1, 64]);
    // u ≡ 1 near (t, x) = (0.1, −0.5), u ≡ 0 near (0.1, 1.5)
    assert!((u.ball_average([0.1, -0.5], 0.05).unwrap() - 1.0).abs() < 1e-12);
    assert!(u.ball_average([0.1, 1.5], 0.05).unwrap().abs() < 1e-12);
}

#[test]
fn point_on_shock_oscillates() {
    let (u, _) = shock_fields();
    let radii = geometric(0.2, 0.75, 10);
    let r = lebesgue_diagnostic(&u, [0.5, 0.25], &radii, LebesgueThresholds::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Oscillating);
    assert!(r.tail_eps > 0.2, "{r:?}");
    let off = lebesgue_diagnostic(&u, [0.5, -0.5], &radii, LebesgueThresholds::default()).unwrap();
    assert_eq!(off.verdict, Verdict::Lebesgue);
}

#[test]
fn hbar_resolution_is_stable() {
    let (u, _) = shock_fields();
    for (x, r) in [([0.5, 0.25], 0.05), ([0.3, 0.1], 0.1), ([0.7, 0.4], 0.02)] {
        let a = oscillation_hbar(&u, x, r, 16).unwrap().hbar;
        let b = oscillation_hbar(&u, x, r, 32).unwrap().hbar;
        assert!((a - b).abs() <= 0.1 * b, "{a} {b}");
    }
}

#[test]
fn nu_ball_masses_monotone_and_additive() {
    let (_, nu) = shock_fields();
    let x = [0.5, 0.25];
    let radii = geometric(0.2, 0.8, 12);
    let m: Vec<f64> = radii
        .iter()
        .map(|&r| nu.ball_integral(x, r).unwrap())
        .collect();
    assert!(m.windows(2).all(|w| w[0] >= w[1]));
    // disjoint balls along the shock carry mass proportional to the length they cut
    let r = 0.05;
    let centres: Vec<Vec2> = (0..4)
        .map(|k| {
            let t = 0.2 + 0.2 * k as f64;
            [t, t / 2.0]
        })
        .collect();
    let parts: f64 = centres
        .iter()
        .map(|&c| nu.ball_integral(c, r).unwrap())
        .sum();
    let whole = 4.0 * nu.ball_integral([0.5, 0.25], r).unwrap();
    assert!((parts - whole).abs() <= 0.05 * whole, "{parts} {whole}");
}

#[test]
fn shock_is_codimension_one_for_nu() {
    let (u, nu) = shock_fields_at(1024);
    let radii = geometric(0.16, 0.65, 12);
    let f = |x: Vec2, r: f64| nu.ball_integral(x, r).unwrap();
    let scan = ball_scan(&u, [0.5, 0.25], &radii, Some(&f)).unwrap();
    let e = decay_exponents(&scan, 2).unwrap();
    // ν(B_r) ∝ r on a shock curve: β ≈ 0 in ambient dimension 2
    assert!(e.beta.abs() < 0.15, "{e:?}");
    let r = lebesgue_diagnostic(&u, [0.5, 0.25], &radii, LebesgueThresholds::default()).unwrap();
    // points with ν slope ≤ n − 1 are never classified as Lebesgue points
    assert_ne!(r.verdict, Verdict::Lebesgue);
}

#[test]
fn structure_bound_on_shock() {
    let (u, nu) = shock_fields();
    let f = Flux::spacetime_burgers();
    let deltas = [0.01, 0.03, 0.1, 0.3, 1.0];
    let cert = estimate_nonlinearity(
        &f,
        1.0,
        2.0 * fitted_constant(&f, 1.0, 128, &deltas),
        128,
        &deltas,
    )
    .unwrap();
    let dx = 3.0 / 256.0;
    let ball = |x: Vec2, r: f64| nu.ball_integral_clipped(x, r);
    let b = structure_bound_check(&u, &ball, [0.5, 0.25], 8.0 * dx, &f, &cert).unwrap();
    assert!(b.holds, "{b:?}");
    let r2 = b.r2.unwrap();
    assert!(r2 >= 8.0 * dx && r2 <= b.r_max);
}

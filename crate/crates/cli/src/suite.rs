//! The acceptance battery behind `kinrep verify`.

use std::sync::OnceLock;
use std::time::Instant;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use kinrep::error::{Error, Result};
use kinrep::flux::{estimate_nonlinearity, fitted_constant, select_basis, Flux};
use kinrep::geometry::GridFunction;
use kinrep::kinetic::*;
use kinrep::lagrangian::*;
use kinrep::poly::Poly;
use kinrep::solver::*;
use kinrep::structure::*;
use kinrep::transport::{verify_duality, w1_distance, AnisotropicMetric};

pub const CRITERIA: [(usize, &str); 10] = [
    (1, "transport exactness"),
    (2, "shock dissipation oracle"),
    (3, "scheme inequalities"),
    (4, "pushforward convergence"),
    (5, "weak estimate"),
    (6, "basis selection"),
    (7, "glued example"),
    (8, "dissipation cylinder"),
    (9, "atomicity"),
    (10, "conservation"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<26} {} ({:.1}s) {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

pub fn run_suite(ids: &[usize], seed: u64) -> Vec<CriterionResult> {
    ids.iter().map(|&id| run_criterion(id, seed)).collect()
}

pub fn run_criterion(id: usize, seed: u64) -> CriterionResult {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map_or("unknown", |c| c.1);
    let start = Instant::now();
    let out = match id {
        1 => transport_exactness(seed),
        2 => shock_dissipation(),
        3 => scheme_inequalities(),
        4 => pushforward_convergence(),
        5 => weak_estimate(seed),
        6 => basis_selection(seed),
        7 => glued_example(),
        8 => dissipation_cylinder(seed),
        9 => atomicity(),
        10 => conservation(),
        _ => Err(Error::Configuration(format!("unknown criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (pass, detail) = match out {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        name: name.into(),
        pass,
        detail,
        seconds,
    }
}

type Outcome = Result<(bool, String)>;

fn rng_for(seed: u64, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ id)
}

/// Shock fixture at N = 256 with its ensembles for n = 2..=5.
struct ShockCase {
    sol: Solution,
    kin: KineticMeasure,
    ens: Vec<Ensemble>,
}

fn shock_case() -> std::result::Result<&'static ShockCase, Error> {
    static CASE: OnceLock<std::result::Result<ShockCase, Error>> = OnceLock::new();
    CASE.get_or_init(|| {
        let sol = fixtures::shock(256)?;
        let kin = extract_kinetic_measure(
            &sol,
            ExtractOptions {
                nv: 64,
                keep_mu: false,
            },
        )?;
        let ens = (2..=5)
            .map(|n| build_ensemble(&sol, &kin, n, &EnsembleOptions::default()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ShockCase { sol, kin, ens })
    })
    .as_ref()
    .map_err(Clone::clone)
}

fn random_measure(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Result<DiscreteMeasure> {
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
    atoms.iter_mut().for_each(|a| a.w /= s);
    DiscreteMeasure::new(d, atoms)
}

/// Brute-force transport LP over all pairs.
fn lp_cost(a: &DiscreteMeasure, b: &DiscreteMeasure, m: &AnisotropicMetric) -> Result<f64> {
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
    p.solve()
        .map(|s| s.objective())
        .map_err(|e| Error::Solver(format!("reference LP: {e}")))
}

fn transport_exactness(seed: u64) -> Outcome {
    let start = Instant::now();
    let mut rng = rng_for(seed, 1);
    let (mut worst_cost, mut worst_marg, mut worst_gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    for trial in 0..200 {
        let d = 1 + trial % 2;
        let metric = AnisotropicMetric::new([0.5, 1.0, 4.0][trial % 3])?;
        let (na, nb) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let a = random_measure(&mut rng, d, na)?;
        let mut b = random_measure(&mut rng, d, nb)?;
        if trial % 4 == 0 {
            for k in 0..a.atoms.len().min(b.atoms.len()) / 2 {
                b.atoms[k].x = a.atoms[k].x;
                b.atoms[k].v = a.atoms[k].v;
            }
        }
        let plan = w1_distance(&a, &b, &metric)?;
        let lp = lp_cost(&a, &b, &metric)?;
        let rep = verify_duality(&plan, &a, &b, &metric);
        let cost_err = (plan.cost - lp).abs() / lp.max(1e-300);
        let marg = rep.marginal_error_src.max(rep.marginal_error_dst);
        let gap = rep.gap.abs() / plan.cost.max(1e-300);
        worst_cost = worst_cost.max(if lp == 0.0 && plan.cost == 0.0 {
            0.0
        } else {
            cost_err
        });
        worst_marg = worst_marg.max(marg);
        worst_gap = worst_gap.max(if rep.gap == 0.0 { 0.0 } else { gap });
        if !((plan.cost - lp).abs() <= 1e-9 * lp || plan.cost == lp)
            || marg > 1e-10
            || rep.gap.abs() > 1e-8 * plan.cost
        {
            failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        failures == 0 && secs < 60.0,
        format!(
            "200 instances, {failures} failing; worst cost rel {worst_cost:.1e}, marginal {worst_marg:.1e}, gap/cost {worst_gap:.1e}; {secs:.1}s"
        ),
    ))
}

fn shock_dissipation() -> Outcome {
    let oracle = 1.0 / 12.0;
    let sol = fixtures::shock(512)?;
    let eta = Poly::new(vec![0.0, 0.0, 0.5]);
    let e = eulerian_dissipation(&sol, &eta, &[sol.flux.entropy_flux(0, &eta)])?;
    let kin = extract_kinetic_measure(
        &sol,
        ExtractOptions {
            nv: 64,
            keep_mu: false,
        },
    )?;
    let ens = build_ensemble(&sol, &kin, 4, &EnsembleOptions::default())?;
    let agg = aggregate_dissipation(&ens, &|_| 1.0)?;
    let rel = |x: f64| (x - oracle).abs() / oracle;
    let (re, rm, ra) = (
        rel(-e.signed_total),
        rel(kin.mu_abs_total),
        rel(agg.signed_total.abs()),
    );
    Ok((
        re <= 0.05 && rm <= 0.05 && ra <= 0.10,
        format!(
            "eulerian {:.5} ({:.1}%), |mu| {:.5} ({:.1}%), lagrangian n=4 {:.5} ({:.1}%) vs 1/12",
            e.signed_total,
            100.0 * re,
            kin.mu_abs_total,
            100.0 * rm,
            agg.signed_total,
            100.0 * ra
        ),
    ))
}

fn scheme_inequalities() -> Outcome {
    let case = shock_case()?;
    let mut ok = true;
    let mut parts = Vec::new();
    for ens in &case.ens {
        let tv = total_variation_budget(ens);
        let h = check_characteristic_residual(ens);
        let tv_ok = tv.value <= 1.02 * tv.bound;
        let h_ok = h.sup_deviation <= 1.02 * h.bound;
        let worst_step = ens
            .steps
            .iter()
            .map(|r| r.cost / (1.02 * r.bound + r.eps_grid).max(1e-300))
            .fold(0.0, f64::max);
        let steps_ok = ens
            .steps
            .iter()
            .all(|r| r.cost <= 1.02 * r.bound + r.eps_grid);
        ok &= tv_ok && h_ok && steps_ok;
        parts.push(format!(
            "n={}: tv {:.3}, hor {:.3}, steps {:.3}",
            ens.level,
            tv.value / tv.bound.max(1e-300),
            h.sup_deviation / h.bound.max(1e-300),
            worst_step
        ));
    }
    Ok((ok, format!("lhs/bound ratios {}", parts.join("; "))))
}

fn pushforward_convergence() -> Outcome {
    let case = shock_case()?;
    let errs = case
        .ens
        .iter()
        .map(|e| check_pushforward(e, &case.sol, &case.kin, 0.5).map(|p| p.error))
        .collect::<Result<Vec<_>>>()?;
    let monotone = errs.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let last = *errs.last().unwrap();
    let shown: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
    Ok((
        monotone && last <= 0.05,
        format!("errors at t=T/2 for n=2..5: {}", shown.join(", ")),
    ))
}

fn weak_estimate(seed: u64) -> Outcome {
    let case = shock_case()?;
    let mut rng = rng_for(seed, 5);
    let mut worst = f64::INFINITY;
    let (mut trials, mut active, mut failures) = (0, 0, 0);
    for s_bar in [1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0] {
        for _ in 0..20 {
            let phi = BumpTestFunction {
                center_x: [rng.gen_range(-0.3..0.8), 0.0],
                center_v: rng.gen_range(0.1..0.6),
                r: rng.gen_range(0.02..0.2),
                r_prime: rng.gen_range(0.02..0.1),
                dv: rng.gen_range(0.05..0.2),
                v_prime: rng.gen_range(0.05..0.15),
                amplitude: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            };
            let t = rng.gen_range(0..((1.0 - s_bar) * 32.0) as usize) as f64 / 32.0;
            let w = weak_estimate_check(&case.sol, &case.kin, t, s_bar, &phi, 64)?;
            if w.rhs > 0.0 {
                worst = worst.min(w.slack / w.rhs);
                active += 1;
            }
            if w.slack < -0.02 * w.rhs {
                failures += 1;
            }
            trials += 1;
        }
    }
    Ok((
        failures == 0,
        format!(
            "{trials} trials ({active} with nu > 0), {failures} failing, min slack/rhs {worst:.3}"
        ),
    ))
}

const DELTAS: [f64; 8] = [1e-3, 3e-3, 0.01, 0.03, 0.1, 0.3, 0.6, 1.0];

fn basis_selection(seed: u64) -> Outcome {
    let start = Instant::now();
    let mut rng = rng_for(seed, 6);
    let mut failures = Vec::new();
    for trial in 0..1000 {
        let f = if trial % 2 == 0 {
            Flux::new(
                "p1",
                1,
                vec![vec![
                    0.0,
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.1..2.0),
                    rng.gen_range(0.0..1.0),
                ]],
                1.0,
            )?
        } else {
            Flux::new(
                "p2",
                2,
                vec![
                    vec![0.0, rng.gen_range(-1.0..1.0), rng.gen_range(0.1..2.0)],
                    vec![
                        0.0,
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(0.1..2.0),
                        rng.gen_range(0.0..1.0),
                    ],
                ],
                1.0,
            )?
        };
        let alpha = if f.d == 1 { 1.0 } else { 0.5 };
        let cert = estimate_nonlinearity(
            &f,
            alpha,
            1.5 * fitted_constant(&f, alpha, 256, &DELTAS),
            256,
            &DELTAS,
        )?;
        if !cert.pass {
            failures.push(format!("trial {trial}: certificate failed"));
            continue;
        }
        let vbar = rng.gen_range(0.0..0.8);
        let hbar = rng.gen_range(0.05..1.0) * (1.0 - vbar);
        let a = [
            rng.gen_range(-5.0..5.0),
            if f.d == 2 {
                rng.gen_range(-5.0..5.0)
            } else {
                0.0
            },
        ];
        let sel = select_basis(&f, &cert, vbar, hbar, a)?;
        if !sel.check(&f, alpha, a).all_ok() {
            failures.push(format!("trial {trial}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        failures.is_empty() && secs < 30.0,
        format!(
            "1000 fluxes, {} failing {:?}; {secs:.1}s",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    ))
}

fn glued_example() -> Outcome {
    let start = Instant::now();
    let spec = GridSpec::new_1d(-0.75, 0.75, 4096, 0.25, Boundary::Outflow);
    let sol = build_glued_example(&spec)?;
    let kin = extract_kinetic_measure(
        &sol,
        ExtractOptions {
            nv: 64,
            keep_mu: false,
        },
    )?;
    let w = spacetime_field(&sol)?;
    // back to the original variable u = 2.04 w − 1.02
    let vals = w
        .values
        .iter()
        .map(|v| GLUED_SCALE * v - GLUED_SHIFT)
        .collect();
    let u = GridFunction::new(2, w.lo, w.h, w.n, vals)?;
    let nu = kin.nu_spacetime()?;
    let radii: Vec<f64> = (0..=12).map(|k| 2f64.powf(-3.0 - 0.5 * k as f64)).collect();
    let rep = lebesgue_diagnostic(&u, [0.0, 0.0], &radii, LebesgueThresholds::default())?;
    let masses = radii
        .iter()
        .map(|&r| nu.ball_integral([0.0, 0.0], r))
        .collect::<Result<Vec<_>>>()?;
    let fit = loglog_fit(&radii, &masses)?;
    let secs = start.elapsed().as_secs_f64();
    let pass = rep.verdict == Verdict::VmoNotLebesgue
        && fit.slope >= 1.1
        && rep.spread >= 0.2
        && secs < 180.0;
    Ok((
        pass,
        format!(
            "verdict {:?}, nu slope {:.3} (need >= 1.1), average spread {:.3} (need >= 0.2); {secs:.1}s",
            rep.verdict, fit.slope, rep.spread
        ),
    ))
}

fn dissipation_cylinder(seed: u64) -> Outcome {
    let case = shock_case()?;
    let sol = &case.sol;
    let f = Flux::burgers();
    let cert = estimate_nonlinearity(&f, 1.0, 1.0, 1, &[0.05, 0.1, 0.3, 0.6])?;
    let mut rng = rng_for(seed, 8);
    let spec = &sol.spec;
    let (mut trials, mut failures, mut attempts) = (0, 0, 0);
    let mut worst = f64::INFINITY;
    while trials < 50 {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::Runtime(
                "too few shock balls with hbar >= 0.1".into(),
            ));
        }
        let k = rng.gen_range(0..sol.n_slices());
        let u = GridFunction::new(
            1,
            spec.lo,
            [spec.dx(0), 1.0],
            [spec.n, 1],
            sol.slice(k).to_vec(),
        )?;
        let r = rng.gen_range(0.02..0.2);
        let x = rng.gen_range(spec.lo[0] + 3.2 * r..spec.hi[0] - 3.2 * r);
        if oscillation_hbar(&u, [x, 0.0], r, 16)?.hbar < 0.1 {
            continue;
        }
        let c = find_dissipation_cylinder(&u, [x, 0.0], r, &f, &cert)?;
        worst = worst.min(c.measured_gap / c.lower_bound);
        if c.measured_gap < c.lower_bound {
            failures += 1;
        }
        trials += 1;
    }
    Ok((
        failures == 0,
        format!("50 trials, {failures} failing, min gap/bound {worst:.2}"),
    ))
}

fn atomicity() -> Outcome {
    let case = shock_case()?;
    let mut extra = Vec::new();
    for (sol, n) in [
        (fixtures::rarefaction(256)?, 3),
        (fixtures::constant_periodic(64)?, 3),
        (fixtures::box_2d(32)?, 2),
    ] {
        let kin = extract_kinetic_measure(
            &sol,
            ExtractOptions {
                nv: 64,
                keep_mu: false,
            },
        )?;
        extra.push((
            sol.flux_id.clone(),
            build_ensemble(&sol, &kin, n, &EnsembleOptions::default())?,
        ));
    }
    let all = case
        .ens
        .iter()
        .map(|e| ("shock".to_string(), e))
        .chain(extra.iter().map(|(id, e)| (id.clone(), e)));
    let mut ok = true;
    let (mut curves, mut worst_speed) = (0, 0.0f64);
    let mut bad = Vec::new();
    for (id, ens) in all {
        let a = audit_atomicity(ens);
        curves += a.curves;
        worst_speed = worst_speed.max(a.max_speed_error);
        if !(a.holds && a.diffuse_mass == 0.0) {
            ok = false;
            bad.push(format!("{id} n={}", ens.level));
        }
    }
    Ok((ok, format!("{curves} curves, max speed error {worst_speed:.1e}, diffuse part empty; failing {bad:?}")))
}

fn conservation() -> Outcome {
    let sols = [
        fixtures::shock(256)?,
        fixtures::rarefaction(256)?,
        fixtures::constant_periodic(64)?,
        fixtures::box_2d(32)?,
    ];
    let mut worst_solver = 0.0f64;
    let mut worst_ft = 0.0f64;
    let mut worst_ens = 0.0f64;
    for sol in &sols {
        let scale = sol.mass[0].max(1.0);
        worst_solver = worst_solver.max(sol.max_mass_drift() / scale);
        for k in [0, sol.n_slices() / 2, sol.n_slices() - 1] {
            let slice = KineticSlice::from_solution(sol, k, 64);
            let moved = slice.free_transport(&sol.flux, 0.125)?;
            let atoms = DiscreteMeasure::from_slice(&slice);
            let ft = atoms.free_transport(&sol.flux, 0.125)?;
            worst_ft = worst_ft
                .max((slice.mass() - sol.mass[k]).abs() / scale)
                .max((moved.mass() - slice.mass()).abs() / scale)
                .max((ft.total_mass() - atoms.total_mass()).abs() / scale);
        }
    }
    let case = shock_case()?;
    for ens in &case.ens {
        let leaves: f64 = ens.curves().map(|c| c.weight).sum();
        worst_ens = worst_ens.max((leaves - ens.total_mass).abs());
        for k in 0..ens.layers.len() {
            worst_ens = worst_ens.max((ens.layer_mass(k) - ens.total_mass).abs());
        }
        worst_ens = worst_ens.max((ens.total_mass - case.sol.mass[0]).abs());
    }
    let pass = worst_solver <= 1e-12 && worst_ft <= 1e-12 && worst_ens <= 1e-9;
    Ok((
        pass,
        format!("relative drift: solver {worst_solver:.1e}, free transport {worst_ft:.1e}; ensemble weights {worst_ens:.1e}"),
    ))
}

//! Stage chain solve → kinetic → represent → dissipate → structure and the
//! JSON/CSV report bundle it produces.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use kinrep::flux::{estimate_nonlinearity, fitted_constant, Flux, Vec2};
use kinrep::geometry::GridFunction;
use kinrep::kinetic::{
    extract_kinetic_measure, weak_estimate_check, BumpTestFunction, ExtractOptions, KineticMeasure,
};
use kinrep::lagrangian::*;
use kinrep::solver::{
    build_glued_example, fixtures, solve_godunov, Boundary, GridSpec, Solution, SolutionKind,
};
use kinrep::structure::*;

use crate::config::PipelineConfig;
use crate::error::{stage, CliError, CliResult};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Solve,
    Kinetic,
    Represent,
    Dissipate,
    Structure,
    Export,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Solve => "solve",
            Stage::Kinetic => "kinetic",
            Stage::Represent => "represent",
            Stage::Dissipate => "dissipate",
            Stage::Structure => "structure",
            Stage::Export => "export",
        }
    }

    fn runs(self, s: Stage) -> bool {
        match self {
            Stage::Export => true,
            Stage::Structure => matches!(s, Stage::Solve | Stage::Kinetic | Stage::Structure),
            _ => s <= self,
        }
    }
}

/// One inequality: `lhs ≤ rhs` with `rhs` already including tolerances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub stage: String,
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    /// Hard checks decide the exit code; the others are diagnostics.
    pub hard: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSummary {
    pub flux_id: String,
    pub kind: SolutionKind,
    pub d: usize,
    pub n: usize,
    pub t0: f64,
    pub t_final: f64,
    pub dt: f64,
    pub t_steps: usize,
    pub mass: f64,
    pub max_mass_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KineticSummary {
    pub nv: usize,
    pub mu_signed_total: f64,
    pub mu_abs_total: f64,
    pub nu_total: f64,
    pub residual_l1: f64,
    pub max_bottom_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub level: usize,
    pub s_bar: f64,
    pub l: f64,
    pub curves: usize,
    pub merged_mass: f64,
    pub total_variation: f64,
    pub horizontal_sup_deviation: f64,
    pub horizontal_residual: f64,
    pub max_speed_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangianDissipation {
    pub level: usize,
    pub signed_total: f64,
    pub abs_total: f64,
    pub atom_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationSummary {
    pub eta_second: Vec<f64>,
    pub eulerian_signed: f64,
    pub eulerian_abs: f64,
    pub lagrangian: Vec<LagrangianDissipation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub center: Vec2,
    pub verdict: Verdict,
    pub spread: f64,
    pub tail_spread: f64,
    pub tail_eps: f64,
    pub beta: Option<f64>,
    pub gamma_prime: Option<f64>,
    pub fit_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub stage: String,
    pub seed: u64,
    pub solution: SolutionSummary,
    pub kinetic: Option<KineticSummary>,
    pub ensembles: Vec<EnsembleSummary>,
    pub dissipation: Vec<DissipationSummary>,
    pub structure: Vec<PointSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

pub struct Bundle {
    pub summary: Summary,
    pub artifacts: Vec<Artifact>,
    /// Written as `solution.json` + `solution.csv` by `solve` and `export`.
    pub solution: Option<Solution>,
}

impl Bundle {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        io::write_json(&dir.join("summary.json"), &self.summary)?;
        for a in &self.artifacts {
            let p = dir.join(&a.name);
            std::fs::write(&p, &a.contents)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        }
        if let Some(sol) = &self.solution {
            io::write_solution(dir, "solution", sol)?;
        }
        Ok(())
    }
}

fn csv_artifact(name: String, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Artifact {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))
            .expect("in-memory csv");
    }
    Artifact {
        name,
        contents: w.into_inner().expect("in-memory csv"),
    }
}

fn check(stage: &str, name: String, lhs: f64, rhs: f64, holds: bool, hard: bool) -> Check {
    Check {
        stage: stage.into(),
        name,
        lhs,
        rhs,
        slack: rhs - lhs,
        holds,
        hard,
    }
}

pub fn fixture_solution(name: &str, n: Option<usize>) -> CliResult<Solution> {
    let s = match name {
        "shock" => fixtures::shock(n.unwrap_or(256)),
        "rarefaction" => fixtures::rarefaction(n.unwrap_or(256)),
        "constant-periodic" => fixtures::constant_periodic(n.unwrap_or(64)),
        "box-2d" => fixtures::box_2d(n.unwrap_or(64)),
        "glued" => build_glued_example(&GridSpec::new_1d(
            -0.75,
            0.75,
            n.unwrap_or(4096),
            0.25,
            Boundary::Outflow,
        )),
        _ => return Err(CliError::Config(format!("unknown fixture '{name}'"))),
    };
    stage("solve", s)
}

fn custom_spec(cfg: &PipelineConfig) -> GridSpec {
    let g = &cfg.grid;
    let (lo, hi) = (g.lo.unwrap(), g.hi.unwrap());
    let boundary = g.boundary.unwrap_or(Boundary::Zero);
    let mut spec = if g.d == Some(2) {
        GridSpec::new_2d(lo, hi, g.n.unwrap(), g.t_final.unwrap(), boundary)
    } else {
        GridSpec::new_1d(lo[0], hi[0], g.n.unwrap(), g.t_final.unwrap(), boundary)
    };
    if let Some(c) = g.cfl {
        spec.cfl = c;
    }
    spec
}

pub fn load_solution(cfg: &PipelineConfig) -> CliResult<Solution> {
    let i = &cfg.initial;
    if let Some(name) = &i.fixture {
        return fixture_solution(name, cfg.grid.n);
    }
    if let Some(p) = &i.solution {
        return io::read_solution(p);
    }
    let flux = stage("solve", cfg.flux.as_ref().unwrap().build())?;
    let spec = custom_spec(cfg);
    let u0 = match (&i.csv, &i.data) {
        (Some(p), _) => io::read_cells(p)?,
        (_, Some(d)) => stage("solve", d.cell_averages(&spec))?,
        _ => unreachable!("validated config"),
    };
    if u0.len() != spec.ncells() {
        return Err(CliError::Config(format!(
            "{} initial values for {} cells",
            u0.len(),
            spec.ncells()
        )));
    }
    stage("solve", solve_godunov(&flux, &u0, &spec))
}

/// `η₁″` sampled on its polynomial.
fn eta_fn(cfg: &PipelineConfig, k: usize) -> impl Fn(f64) -> f64 {
    let p = cfg.eta_second(k);
    move |v| p.eval(v)
}

/// The flux `(v, f(v))` of the space-time formulation in one space dimension.
fn spacetime_flux(f: &Flux) -> CliResult<Flux> {
    let mut coeffs = vec![vec![0.0, 1.0]];
    coeffs.push(f.components[0].c.clone());
    stage(
        "structure",
        Flux::new(&format!("spacetime-{}", f.id), 2, coeffs, f.u_max),
    )
}

pub fn run_pipeline(cfg: &PipelineConfig, upto: Stage) -> CliResult<Bundle> {
    cfg.validate()?;
    let sol = load_solution(cfg)?;
    cfg.check_entropies(sol.flux.u_max)?;
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let conservative = sol.spec.boundary != Boundary::Outflow;
    let drift = sol.max_mass_drift();
    checks.push(check(
        "solve",
        "mass conservation".into(),
        drift,
        1e-12,
        drift <= 1e-12,
        conservative,
    ));
    let t_final = sol.time(sol.n_slices() - 1);
    let solution = SolutionSummary {
        flux_id: sol.flux_id.clone(),
        kind: sol.kind,
        d: sol.spec.d,
        n: sol.spec.n,
        t0: sol.t0,
        t_final,
        dt: sol.dt,
        t_steps: sol.t_steps,
        mass: sol.mass[sol.origin_index()],
        max_mass_drift: drift,
    };

    let mut kin_summary = None;
    let mut kin = None;
    if upto.runs(Stage::Kinetic) {
        let k = stage(
            "kinetic",
            extract_kinetic_measure(
                &sol,
                ExtractOptions {
                    nv: cfg.nv,
                    keep_mu: false,
                },
            ),
        )?;
        kin_summary = Some(KineticSummary {
            nv: cfg.nv,
            mu_signed_total: k.mu_signed_total,
            mu_abs_total: k.mu_abs_total,
            nu_total: k.nu_total(),
            residual_l1: k.residual_l1,
            max_bottom_residual: k.max_bottom_residual,
        });
        artifacts.push(nu_artifact(&k));
        if cfg.diagnostics.weak_estimate {
            checks.extend(weak_estimates(cfg, &sol, &k)?);
        }
        kin = Some(k);
    }

    let mut ensembles = Vec::new();
    let mut ens_list = Vec::new();
    if upto.runs(Stage::Represent) {
        let k = kin.as_ref().unwrap();
        for &n in &cfg.levels {
            let opts = EnsembleOptions {
                nv: cfg.nv,
                l: cfg.l,
                curve_cap: cfg.diagnostics.curve_cap,
                ..Default::default()
            };
            let ens = stage("represent", build_ensemble(&sol, k, n, &opts))?;
            checks.extend(ensemble_checks(cfg, &sol, k, &ens)?);
            let tv = total_variation_budget(&ens);
            let hor = check_characteristic_residual(&ens);
            let audit = audit_atomicity(&ens);
            ensembles.push(EnsembleSummary {
                level: n,
                s_bar: ens.s_bar,
                l: ens.l,
                curves: ens.n_curves(),
                merged_mass: ens.merged_mass,
                total_variation: tv.value,
                horizontal_sup_deviation: hor.sup_deviation,
                horizontal_residual: hor.residual,
                max_speed_error: audit.max_speed_error,
            });
            artifacts.push(curves_artifact(&ens));
            artifacts.push(steps_artifact(&ens));
            ens_list.push(ens);
        }
    }

    let mut dissipation = Vec::new();
    if upto.runs(Stage::Dissipate) {
        for k in 0..cfg.entropies.len() {
            let eta = cfg.eta(k);
            let q: Vec<_> = (0..sol.spec.d)
                .map(|a| sol.flux.entropy_flux(a, &eta))
                .collect();
            let e = stage("dissipate", eulerian_dissipation(&sol, &eta, &q))?;
            artifacts.push(eulerian_artifact(k, &e));
            let f = eta_fn(cfg, k);
            let mut lag = Vec::new();
            for ens in &ens_list {
                let a = stage("dissipate", aggregate_dissipation(ens, &f))?;
                artifacts.push(aggregate_artifact(k, ens, &a));
                lag.push(LagrangianDissipation {
                    level: ens.level,
                    signed_total: a.signed_total,
                    abs_total: a.abs_total,
                    atom_total: a.atom_total,
                });
            }
            dissipation.push(DissipationSummary {
                eta_second: cfg.entropies[k].clone(),
                eulerian_signed: e.signed_total,
                eulerian_abs: e.abs_total,
                lagrangian: lag,
            });
        }
    }

    let mut structure = Vec::new();
    if upto.runs(Stage::Structure) {
        let (points, scans, more) = structure_stage(cfg, &sol, kin.as_ref().unwrap())?;
        structure = points;
        for (i, s) in scans.iter().enumerate() {
            artifacts.push(csv_artifact(
                format!("scan_{i}.csv"),
                &["r", "average", "hbar", "nu_mass", "eps"],
                (0..s.radii.len())
                    .map(|k| vec![s.radii[k], s.averages[k], s.hbar[k], s.nu_mass[k], s.eps[k]]),
            ));
        }
        checks.extend(more);
    }

    let passed = checks.iter().all(|c| c.holds || !c.hard);
    let want_solution = matches!(upto, Stage::Solve | Stage::Export);
    Ok(Bundle {
        summary: Summary {
            stage: upto.name().into(),
            seed: cfg.seed,
            solution,
            kinetic: kin_summary,
            ensembles,
            dissipation,
            structure,
            checks,
            passed,
        },
        artifacts,
        solution: want_solution.then_some(sol),
    })
}

fn position_columns(d: usize) -> Vec<&'static str> {
    if d == 1 {
        vec!["x"]
    } else {
        vec!["x", "y"]
    }
}

fn nu_artifact(k: &KineticMeasure) -> Artifact {
    let d = k.spec.d;
    let mut head = vec!["t"];
    head.extend(position_columns(d));
    head.push("nu");
    let nc = k.spec.ncells();
    let rows = (0..k.nt).flat_map(move |s| {
        (0..nc).filter_map(move |c| {
            let m = k.nu[s * nc + c];
            (m != 0.0).then(|| {
                let x = k.spec.cell_center(c);
                let mut r = vec![k.t0 + (s as f64 + 0.5) * k.dt];
                r.extend(&x[..d]);
                r.push(m);
                r
            })
        })
    });
    csv_artifact("nu.csv".into(), &head, rows)
}

fn weak_estimates(
    cfg: &PipelineConfig,
    sol: &Solution,
    kin: &KineticMeasure,
) -> CliResult<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spec = &sol.spec;
    let mut out = Vec::new();
    for m in [5u32, 4, 3] {
        let stride = sol.t_steps >> m;
        if stride == 0 || stride << m != sol.t_steps {
            continue;
        }
        let s_bar = stride as f64 * sol.dt;
        for trial in 0..cfg.diagnostics.weak_trials {
            let (r, rp) = (rng.gen_range(0.02..0.2), rng.gen_range(0.02..0.1));
            let mut big = r + rp;
            if spec.boundary != Boundary::Periodic {
                // free transport over s̄ must stay inside the domain
                big += s_bar * sol.flux.sup_fp();
            }
            let mut c = [0.0; 2];
            for a in 0..spec.d {
                let (lo, hi) = (spec.lo[a] + big, spec.hi[a] - big);
                if !(hi > lo) {
                    return Err(CliError::Config(
                        "domain too small for weak-estimate test functions".into(),
                    ));
                }
                c[a] = rng.gen_range(lo..hi);
            }
            let u_max = sol.flux.u_max;
            let phi = BumpTestFunction {
                center_x: c,
                center_v: rng.gen_range(0.1..0.6) * u_max,
                r,
                r_prime: rp,
                dv: rng.gen_range(0.05..0.2) * u_max,
                v_prime: rng.gen_range(0.05..0.15) * u_max,
                amplitude: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            };
            let last = sol.n_slices() - 1 - stride;
            let i0 = rng.gen_range(0..=last / stride) * stride;
            let t = sol.time(i0);
            let w = stage(
                "kinetic",
                weak_estimate_check(sol, kin, t, s_bar, &phi, cfg.nv),
            )?;
            out.push(check(
                "kinetic",
                format!("weak estimate s_bar={s_bar} trial {trial} (t={t})"),
                w.lhs,
                w.rhs + w.eps_grid,
                w.holds,
                true,
            ));
        }
    }
    Ok(out)
}

fn ensemble_checks(
    cfg: &PipelineConfig,
    sol: &Solution,
    kin: &KineticMeasure,
    ens: &Ensemble,
) -> CliResult<Vec<Check>> {
    let n = ens.level;
    let mut out = Vec::new();
    for r in &ens.steps {
        out.push(check(
            "represent",
            format!("n={n} matching cost at t={}", r.t),
            r.cost,
            1.02 * r.bound + r.eps_grid,
            r.holds,
            true,
        ));
    }
    let tv = total_variation_budget(ens);
    out.push(check(
        "represent",
        format!("n={n} total variation budget"),
        tv.value,
        1.02 * tv.bound + tv.eps_grid,
        tv.holds,
        true,
    ));
    let h = check_characteristic_residual(ens);
    out.push(check(
        "represent",
        format!("n={n} horizontal deviation"),
        h.sup_deviation,
        1.02 * h.bound + h.eps_grid,
        h.holds,
        true,
    ));
    let a = audit_atomicity(ens);
    out.push(check(
        "represent",
        format!("n={n} speed along curves"),
        a.max_speed_error,
        1e-12,
        a.holds,
        true,
    ));
    let t_final = *ens.times.last().unwrap();
    if cfg.diagnostics.pushforward {
        for t in [0.5 * t_final, 0.5 * t_final + 0.5 * ens.s_bar] {
            if t >= t_final {
                continue;
            }
            let p = stage("represent", check_pushforward(ens, sol, kin, t))?;
            out.push(check(
                "represent",
                format!("n={n} pushforward at t={t}"),
                p.error,
                p.bound,
                p.holds,
                true,
            ));
        }
    }
    if cfg.diagnostics.equicontinuity {
        for (s, t) in [
            (0.0, ens.s_bar),
            (0.25 * t_final, 0.5 * t_final),
            (0.0, t_final - ens.s_bar),
        ] {
            let e = stage("represent", time_equicontinuity(ens, kin, s, t))?;
            out.push(check(
                "represent",
                format!("n={n} equicontinuity on [{s}, {t}]"),
                e.coupling_cost,
                1.02 * e.bound + e.eps_grid,
                e.holds,
                true,
            ));
        }
    }
    Ok(out)
}

fn curves_artifact(ens: &Ensemble) -> Artifact {
    let d = ens.spec.d;
    let mut head = vec!["curve", "weight", "t"];
    head.extend(position_columns(d));
    head.push("v");
    let flux = &ens.flux;
    let rows = ens.curves().enumerate().flat_map(move |(i, c)| {
        (0..c.v_values.len())
            .map(|k| {
                let t = c.times[k];
                let x = c.x_at(flux, t);
                let mut r = vec![i as f64, c.weight, t];
                r.extend(&x[..d]);
                r.push(c.v_values[k]);
                r
            })
            .collect::<Vec<_>>()
    });
    csv_artifact(format!("curves_n{}.csv", ens.level), &head, rows)
}

fn steps_artifact(ens: &Ensemble) -> Artifact {
    let head = [
        "t",
        "cost",
        "nu",
        "bound",
        "eps_grid",
        "deficit",
        "sources",
        "targets",
        "cancelled",
        "gap",
    ];
    let rows = ens.steps.iter().map(|r| {
        vec![
            r.t,
            r.cost,
            r.nu,
            r.bound,
            r.eps_grid,
            r.deficit,
            r.sources as f64,
            r.targets as f64,
            r.cancelled,
            r.gap,
        ]
    });
    csv_artifact(format!("steps_n{}.csv", ens.level), &head, rows)
}

fn eulerian_artifact(k: usize, e: &EntropyDissipation) -> Artifact {
    let d = e.spec.d;
    let mut head = vec!["t"];
    head.extend(position_columns(d));
    head.push("value");
    let nc = e.spec.ncells();
    let rows = (0..e.nt).flat_map(move |s| {
        (0..nc).filter_map(move |c| {
            let m = e.values[s * nc + c];
            (m != 0.0).then(|| {
                let x = e.spec.cell_center(c);
                let mut r = vec![e.t0 + (s as f64 + 0.5) * e.dt];
                r.extend(&x[..d]);
                r.push(m);
                r
            })
        })
    });
    csv_artifact(format!("eulerian_e{k}.csv"), &head, rows)
}

fn aggregate_artifact(k: usize, ens: &Ensemble, a: &AggregateDissipation) -> Artifact {
    let d = ens.spec.d;
    let mut head = vec!["t"];
    head.extend(position_columns(d));
    head.extend(["v", "value"]);
    let rows = a.entries.iter().map(|&((b, c, j), w)| {
        let x = ens.spec.cell_center(c);
        let mut r = vec![a.times[b]];
        r.extend(&x[..d]);
        r.push((j as f64 + 0.5) * a.dv);
        r.push(w);
        r
    });
    csv_artifact(format!("aggregate_e{k}_n{}.csv", ens.level), &head, rows)
}

type StructureOut = (Vec<PointSummary>, Vec<BallScan>, Vec<Check>);

fn structure_stage(
    cfg: &PipelineConfig,
    sol: &Solution,
    kin: &KineticMeasure,
) -> CliResult<StructureOut> {
    let spec = &sol.spec;
    let t_final = sol.time(sol.n_slices() - 1);
    let sc = &cfg.structure;
    // In one space dimension the analysis runs on (t, x); in two it runs on
    // a time slice, with ν taken over the cylinder (t − r, t + r) × B_r.
    let (u, nu_ball, flux, n_ambient): (
        GridFunction,
        Box<dyn Fn(Vec2, f64) -> f64 + '_>,
        Flux,
        usize,
    ) = if spec.d == 1 {
        let u = stage("structure", spacetime_field(sol))?;
        let nu = stage("structure", kin.nu_spacetime())?;
        (
            u,
            Box::new(move |x, r| nu.ball_integral_clipped(x, r)),
            spacetime_flux(&sol.flux)?,
            2,
        )
    } else {
        let t = sc.t.unwrap_or(0.5 * (sol.t0 + t_final));
        let k = stage("structure", sol.slice_index(t))?;
        let u = stage(
            "structure",
            GridFunction::new(
                2,
                spec.lo,
                [spec.dx(0), spec.dx(1)],
                [spec.n, spec.n],
                sol.slice(k).to_vec(),
            ),
        )?;
        (
            u,
            Box::new(move |x, r| kin.nu_ball(t - r, t + r, x, r)),
            sol.flux.clone(),
            3,
        )
    };
    let points = if sc.points.is_empty() {
        let mid = [0.5 * (u.lo[0] + u.hi(0)), 0.5 * (u.lo[1] + u.hi(1))];
        vec![mid]
    } else {
        sc.points.clone()
    };
    let radii = cfg.radii();
    let deltas = [0.01, 0.03, 0.1, 0.3, 1.0];
    let c = fitted_constant(&flux, 1.0, 128, &deltas);
    let cert = stage(
        "structure",
        estimate_nonlinearity(&flux, 1.0, (2.0 * c).max(1e-12), 128, &deltas),
    )?;
    let mut out = Vec::new();
    let mut scans = Vec::new();
    let mut checks = Vec::new();
    for (i, &x) in points.iter().enumerate() {
        let rep = stage(
            "structure",
            lebesgue_diagnostic(&u, x, &radii, sc.thresholds),
        )?;
        let scan = stage("structure", ball_scan(&u, x, &radii, Some(&*nu_ball)))?;
        let (beta, gamma_prime, fit_note) = match decay_exponents(&scan, n_ambient) {
            Ok(e) => (Some(e.beta), Some(e.gamma_prime), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        if let Some(b) = beta {
            // a point where ν has positive codimension-one density is no Lebesgue point
            let bad = rep.verdict == Verdict::Lebesgue && b <= 0.0;
            checks.push(check(
                "structure",
                format!("point {i} classification consistency"),
                b,
                0.0,
                !bad,
                false,
            ));
        }
        let r = radii[radii.len() / 2];
        if u.ball_inside(x, 3.0 * r) && cert.pass {
            match structure_bound_check(&u, &*nu_ball, x, r, &flux, &cert) {
                Ok(b) => checks.push(check(
                    "structure",
                    format!("point {i} nu lower bound at r={r}"),
                    b.bound,
                    b.nu,
                    b.holds,
                    false,
                )),
                Err(kinrep::error::Error::Degenerate(_)) => {}
                Err(e) => {
                    return Err(CliError::Stage {
                        stage: "structure",
                        source: e,
                    })
                }
            }
        }
        out.push(PointSummary {
            center: x,
            verdict: rep.verdict,
            spread: rep.spread,
            tail_spread: rep.tail_spread,
            tail_eps: rep.tail_eps,
            beta,
            gamma_prime,
            fit_note,
        });
        scans.push(scan);
    }
    Ok((out, scans, checks))
}

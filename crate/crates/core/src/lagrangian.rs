//! Curve ensembles built by alternating free transport with optimal
//! reassignment at dyadic times, and the diagnostics run on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{Flux, Vec2};
use crate::kinetic::{DiscreteMeasure, KineticMeasure, KineticSlice};
use crate::poly::Poly;
use crate::solver::{gauss8, stages, sweep, Boundary, GridSpec, Solution, SolutionKind};
use crate::transport::{
    bin_measure, check_step_condition, domain_diameter, grid_error, match_grid_measures,
    w1_distance, AnisotropicMetric, GridMeasure,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub nv: usize,
    /// Horizontal weight; defaults to `(s̄ ‖f″‖)^{-1/2}`.
    pub l: Option<f64>,
    pub curve_cap: usize,
    /// Split children lighter than this fraction of the total are merged
    /// into their largest sibling.
    pub merge_fraction: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            nv: 64,
            l: None,
            curve_cap: 4_000_000,
            merge_fraction: 1e-9,
        }
    }
}

/// A curve piece on one dyadic interval, linked to its predecessor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub parent: u32,
    pub v: f64,
    /// Position at the start of the interval, after the jump.
    pub x: Vec2,
    pub x_jump: Vec2,
    /// Total weight of the curves through this piece.
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub cost: f64,
    pub nu: f64,
    pub bound: f64,
    pub eps_grid: f64,
    pub deficit: f64,
    pub holds: bool,
    pub sources: usize,
    pub targets: usize,
    pub cancelled: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Ensemble {
    pub level: usize,
    pub s_bar: f64,
    pub l: f64,
    pub times: Vec<f64>,
    pub spec: GridSpec,
    pub flux: Flux,
    pub flux_id: String,
    pub nv: usize,
    pub dv: f64,
    pub total_mass: f64,
    /// `layers[k]` holds the pieces living on `[t_k, t_{k+1})`.
    pub layers: Vec<Vec<Segment>>,
    pub steps: Vec<StepRecord>,
    pub merged_mass: f64,
    /// `ν((0, T) × ℝ^d)` from the kinetic measure.
    pub nu_total: f64,
}

/// One curve with its full history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub weight: f64,
    pub times: Vec<f64>,
    /// `γ²` on each interval `[t_k, t_{k+1})`.
    pub v_values: Vec<f64>,
    pub x_start: Vec2,
    /// Displacement of `γ¹` at each interior breakpoint `t_1 … t_{2ⁿ−1}`.
    pub x_jumps: Vec<Vec2>,
}

fn wrap(spec: &GridSpec, mut x: Vec2) -> Vec2 {
    if spec.boundary == Boundary::Periodic {
        for k in 0..spec.d {
            let p = spec.hi[k] - spec.lo[k];
            x[k] = spec.lo[k] + (x[k] - spec.lo[k]).rem_euclid(p);
        }
    }
    x
}

fn min_image(spec: &GridSpec, mut d: Vec2) -> Vec2 {
    if spec.boundary == Boundary::Periodic {
        for k in 0..spec.d {
            let p = spec.hi[k] - spec.lo[k];
            d[k] -= p * (d[k] / p).round();
        }
    }
    d
}

fn norm(x: Vec2) -> f64 {
    x[0].hypot(x[1])
}

fn advance(flux: &Flux, x: Vec2, v: f64, s: f64) -> Vec2 {
    let fp = flux.fp(v);
    [x[0] + fp[0] * s, x[1] + fp[1] * s]
}

impl Curve {
    /// `γ¹(t)`, right-continuous, without periodic wrapping.
    pub fn x_at(&self, flux: &Flux, t: f64) -> Vec2 {
        let mut x = self.x_start;
        for k in 0..self.v_values.len() {
            let (a, b) = (self.times[k], self.times[k + 1]);
            if t < a {
                break;
            }
            if k > 0 {
                let j = self.x_jumps[k - 1];
                x = [x[0] + j[0], x[1] + j[1]];
            }
            x = advance(flux, x, self.v_values[k], t.min(b) - a);
        }
        x
    }

    /// Left limit of `γ¹` at `t`.
    pub fn x_left(&self, flux: &Flux, t: f64) -> Vec2 {
        let mut x = self.x_start;
        for k in 0..self.v_values.len() {
            let (a, b) = (self.times[k], self.times[k + 1]);
            if t <= a {
                break;
            }
            if k > 0 {
                let j = self.x_jumps[k - 1];
                x = [x[0] + j[0], x[1] + j[1]];
            }
            x = advance(flux, x, self.v_values[k], t.min(b) - a);
        }
        x
    }

    pub fn total_variation(&self) -> f64 {
        self.v_values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn jump_length(&self) -> f64 {
        self.x_jumps.iter().map(|&j| norm(j)).sum()
    }
}

pub fn default_l(s_bar: f64, flux: &Flux) -> Result<f64> {
    let fpp = flux.sup_fpp();
    if !(fpp > 0.0) {
        return Err(Error::Parameter(
            "linear flux: the horizontal weight L must be given".into(),
        ));
    }
    Ok((s_bar * fpp).powf(-0.5))
}

pub fn build_ensemble(
    sol: &Solution,
    kin: &KineticMeasure,
    n: usize,
    opts: &EnsembleOptions,
) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::Parameter("level n must be at least 1".into()));
    }
    if sol.kind == SolutionKind::Quasi || sol.t0 != 0.0 {
        return Err(Error::Parameter(
            "ensembles need a forward solution starting at t = 0".into(),
        ));
    }
    if opts.nv == 0 {
        return Err(Error::Parameter("nv must be positive".into()));
    }
    let flux = &sol.flux;
    let spec = &sol.spec;
    let t_final = sol.time(sol.slices.len() - 1);
    let nsteps = 1usize << n;
    let s_bar = t_final / nsteps as f64;
    let l = match opts.l {
        Some(l) => l,
        None => default_l(s_bar, flux)?,
    };
    if flux.sup_fpp() > 0.0 {
        check_step_condition(s_bar, flux.sup_fpp(), l)?;
    }
    let times: Vec<f64> = (0..=nsteps).map(|k| k as f64 * s_bar).collect();
    for &t in &times {
        sol.slice_index(t)?;
    }
    let metric = AnisotropicMetric::for_grid(l, spec)?;
    let diam = domain_diameter(spec, l, flux.u_max);
    let seed = KineticSlice::from_solution(sol, 0, opts.nv);
    let dv = seed.dv;
    let g0 = GridMeasure::from_slice(&seed);
    let layer0: Vec<Segment> = (0..g0.mass.len())
        .filter(|&k| g0.mass[k] > 0.0)
        .map(|k| {
            let a = g0.atom(k);
            Segment {
                parent: u32::MAX,
                v: a.v,
                x: a.x,
                x_jump: [0.0; 2],
                w: a.w,
            }
        })
        .collect();
    let total_mass: f64 = layer0.iter().map(|s| s.w).sum();
    let merge_below = opts.merge_fraction * total_mass;
    let mut layers = vec![layer0];
    let mut steps = Vec::with_capacity(nsteps - 1);
    let mut merged_mass = 0.0;
    for k in 1..nsteps {
        let prev = &layers[k - 1];
        let pre: Vec<Vec2> = prev
            .iter()
            .map(|s| advance(flux, s.x, s.v, s_bar))
            .collect();
        let moved = DiscreteMeasure {
            d: spec.d,
            atoms: prev
                .iter()
                .zip(&pre)
                .map(|(s, &x)| crate::kinetic::Atom { x, v: s.v, w: s.w })
                .collect(),
        };
        let src = bin_measure(&moved, spec, opts.nv, dv)?;
        let target = KineticSlice::from_solution(sol, sol.slice_index(times[k])?, opts.nv);
        let dst = GridMeasure::from_slice(&target);
        let (plan, i1, i2, m1, _, deficit) = match_grid_measures(&src, &dst, &metric)?;
        // couplings per source bin in real (unrescaled) mass units
        let mut out_of: Vec<Vec<(usize, f64)>> = vec![Vec::new(); i1.len()];
        for c in &plan.couplings {
            let real = c.mass * src.mass[i1[c.src]] / m1.atoms[c.src].w;
            out_of[c.src].push((i2[c.dst], real));
        }
        out_of.iter_mut().for_each(|v| v.sort_by_key(|&(g, _)| g));
        let mut bin_pos = vec![usize::MAX; src.mass.len()];
        i1.iter().enumerate().for_each(|(p, &g)| bin_pos[g] = p);
        // pieces ordered by bin, then position
        let mut order: Vec<(usize, usize)> = Vec::with_capacity(prev.len());
        for (i, s) in prev.iter().enumerate() {
            let j = ((s.v / dv).floor().max(0.0) as usize).min(opts.nv - 1);
            order.push((src.cell_of(pre[i])? * opts.nv + j, i));
        }
        order.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(pre[a.1][0].total_cmp(&pre[b.1][0]))
                .then(pre[a.1][1].total_cmp(&pre[b.1][1]))
                .then(a.1.cmp(&b.1))
        });
        let mut next: Vec<Segment> = Vec::with_capacity(prev.len() + plan.couplings.len());
        let mut children: Vec<Segment> = Vec::new();
        let mut start = 0;
        while start < order.len() {
            let bin = order[start].0;
            let mut end = start;
            while end < order.len() && order[end].0 == bin {
                end += 1;
            }
            let mut queue = out_of[bin_pos[bin]].clone();
            let tiny = 1e-15 * src.mass[bin];
            let src_center = spec.cell_center(bin / opts.nv);
            let mut qi = 0;
            for &(_, i) in &order[start..end] {
                let s = &prev[i];
                let mut rem = s.w;
                children.clear();
                while rem > tiny && qi < queue.len() {
                    let take = rem.min(queue[qi].1);
                    let g = queue[qi].0;
                    let c = spec.cell_center(g / opts.nv);
                    let jump = min_image(spec, [c[0] - src_center[0], c[1] - src_center[1]]);
                    children.push(Segment {
                        parent: i as u32,
                        v: (g % opts.nv) as f64 * dv + 0.5 * dv,
                        x: wrap(spec, [pre[i][0] + jump[0], pre[i][1] + jump[1]]),
                        x_jump: jump,
                        w: take,
                    });
                    rem -= take;
                    queue[qi].1 -= take;
                    if queue[qi].1 <= tiny {
                        qi += 1;
                    }
                }
                if children.is_empty() {
                    // round-off tail of the bin: follow the last coupling
                    let g = queue
                        .last()
                        .map(|q| q.0)
                        .ok_or_else(|| Error::Solver("source bin without couplings".into()))?;
                    let c = spec.cell_center(g / opts.nv);
                    let jump = min_image(spec, [c[0] - src_center[0], c[1] - src_center[1]]);
                    children.push(Segment {
                        parent: i as u32,
                        v: (g % opts.nv) as f64 * dv + 0.5 * dv,
                        x: wrap(spec, [pre[i][0] + jump[0], pre[i][1] + jump[1]]),
                        x_jump: jump,
                        w: rem,
                    });
                    rem = 0.0;
                }
                if rem > 0.0 {
                    children.last_mut().unwrap().w += rem;
                }
                if children.len() > 1 {
                    let big = (0..children.len())
                        .max_by(|&a, &b| children[a].w.total_cmp(&children[b].w))
                        .unwrap();
                    let mut extra = 0.0;
                    for (c, ch) in children.iter_mut().enumerate() {
                        if c != big && ch.w < merge_below {
                            extra += ch.w;
                            ch.w = 0.0;
                        }
                    }
                    merged_mass += extra;
                    children[big].w += extra;
                }
                next.extend(children.iter().filter(|c| c.w > 0.0));
            }
            start = end;
        }
        if next.len() > opts.curve_cap {
            return Err(Error::Resource(format!(
                "{} curves at t = {} exceed the cap of {}; coarsen the grid, lower the level or raise the cap",
                next.len(),
                times[k],
                opts.curve_cap
            )));
        }
        let nu = kin.nu_window(times[k - 1], times[k]);
        let bound = (1.0 + 1.0 / l) * nu;
        let eps_grid = grid_error(spec, dv, l, src.total()) + diam * deficit;
        steps.push(StepRecord {
            t: times[k],
            cost: plan.cost,
            nu,
            bound,
            eps_grid,
            deficit,
            holds: plan.cost <= 1.02 * bound + eps_grid,
            sources: i1.len(),
            targets: i2.len(),
            cancelled: plan.cancelled,
            gap: plan.gap,
        });
        layers.push(next);
    }
    Ok(Ensemble {
        level: n,
        s_bar,
        l,
        times,
        spec: spec.clone(),
        flux: flux.clone(),
        flux_id: sol.flux_id.clone(),
        nv: opts.nv,
        dv,
        total_mass,
        layers,
        steps,
        merged_mass,
        nu_total: kin.nu_window(0.0, t_final),
    })
}

impl Ensemble {
    pub fn n_curves(&self) -> usize {
        self.layers.last().map_or(0, |l| l.len())
    }

    pub fn interior_times(&self) -> &[f64] {
        &self.times[1..self.times.len() - 1]
    }

    pub fn curve(&self, leaf: usize) -> Curve {
        let nl = self.layers.len();
        let mut v_values = vec![0.0; nl];
        let mut x_jumps = vec![[0.0; 2]; nl - 1];
        let mut i = leaf;
        let weight = self.layers[nl - 1][leaf].w;
        for k in (0..nl).rev() {
            let s = &self.layers[k][i];
            v_values[k] = s.v;
            if k > 0 {
                x_jumps[k - 1] = s.x_jump;
                i = s.parent as usize;
            }
        }
        Curve {
            weight,
            times: self.times.clone(),
            v_values,
            x_start: self.layers[0][i].x,
            x_jumps,
        }
    }

    pub fn curves(&self) -> impl Iterator<Item = Curve> + '_ {
        (0..self.n_curves()).map(|i| self.curve(i))
    }

    /// Interval containing `t` (right-continuous).
    pub fn layer_at(&self, t: f64) -> Result<usize> {
        let t_final = *self.times.last().unwrap();
        if !(t >= 0.0 && t < t_final) {
            return Err(Error::Parameter(format!("t = {t} outside [0, {t_final})")));
        }
        let k = (t / self.s_bar * (1.0 + 1e-12)).floor() as usize;
        Ok(k.min(self.layers.len() - 1))
    }

    /// `(e_t)_♯ ω_n`.
    pub fn positions_at(&self, t: f64) -> Result<DiscreteMeasure> {
        let k = self.layer_at(t)?;
        let dt = t - self.times[k];
        let atoms = self.layers[k]
            .iter()
            .map(|s| crate::kinetic::Atom {
                x: wrap(&self.spec, advance(&self.flux, s.x, s.v, dt)),
                v: s.v,
                w: s.w,
            })
            .collect();
        Ok(DiscreteMeasure {
            d: self.spec.d,
            atoms,
        })
    }

    pub fn layer_mass(&self, k: usize) -> f64 {
        self.layers[k].iter().map(|s| s.w).sum()
    }

    pub fn eps_vertical(&self) -> f64 {
        self.steps.iter().map(|s| s.eps_grid).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub t: f64,
    /// Binned distance plus the cost of moving curve points to cell centres:
    /// an upper bound on the distance to the grid measure.
    pub error: f64,
    pub binned: f64,
    pub splat: f64,
    pub deficit: f64,
    /// `deficit·diam + Δx·M` for grid times,
    /// `‖f′‖s̄·M + 2ν((t−s̄, t)) + (Δx + Δv)·M + deficit·diam` otherwise.
    pub bound: f64,
    pub grid_time: bool,
    pub holds: bool,
}

pub fn check_pushforward(
    ens: &Ensemble,
    sol: &Solution,
    kin: &KineticMeasure,
    t: f64,
) -> Result<PushforwardReport> {
    let k = ens.layer_at(t)?;
    let spec = &ens.spec;
    let pos = ens.positions_at(t)?;
    let probe = GridMeasure {
        spec: spec.clone(),
        nv: ens.nv,
        dv: ens.dv,
        mass: Vec::new(),
    };
    let mut splat = 0.0;
    for a in &pos.atoms {
        let c = spec.cell_center(probe.cell_of(a.x)?);
        splat += a.w * norm(min_image(spec, [a.x[0] - c[0], a.x[1] - c[1]]));
    }
    let src = bin_measure(&pos, spec, ens.nv, ens.dv)?;
    let dst = GridMeasure::from_slice(&KineticSlice::from_solution(
        sol,
        sol.slice_index(t)?,
        ens.nv,
    ));
    let metric = AnisotropicMetric::for_grid(1.0, spec)?;
    let (plan, _, _, _, _, deficit) = match_grid_measures(&src, &dst, &metric)?;
    let m = ens.total_mass;
    let diam = domain_diameter(spec, 1.0, ens.flux.u_max);
    let dx = (0..spec.d).map(|a| spec.dx(a).powi(2)).sum::<f64>().sqrt();
    let grid_time = (t - ens.times[k]).abs() <= 1e-12 * ens.s_bar;
    let bound = if grid_time {
        deficit * diam + dx * m
    } else {
        ens.flux.sup_fp() * ens.s_bar * m
            + 2.0 * kin.nu_window((t - ens.s_bar).max(0.0), t)
            + grid_error(spec, ens.dv, 1.0, m)
            + deficit * diam
    };
    let error = plan.cost + splat;
    Ok(PushforwardReport {
        t,
        error,
        binned: plan.cost,
        splat,
        deficit,
        bound,
        grid_time,
        holds: error <= bound,
    })
}

/// Exact distance from the curve points to the grid measure, for small
/// ensembles.
pub fn pushforward_distance_exact(ens: &Ensemble, sol: &Solution, t: f64) -> Result<f64> {
    let pos = ens.positions_at(t)?;
    let dst = GridMeasure::from_slice(&KineticSlice::from_solution(
        sol,
        sol.slice_index(t)?,
        ens.nv,
    ));
    let (mut m2, _) = dst.to_measure();
    let mut m1 = pos;
    crate::transport::rebalance(&mut m1, &mut m2);
    Ok(w1_distance(&m1, &m2, &AnisotropicMetric::for_grid(1.0, &ens.spec)?)?.cost)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityReport {
    pub s: f64,
    pub t: f64,
    /// Cost of coupling each curve with itself: an upper bound on the
    /// distance between the two time marginals (`L = 1`).
    pub coupling_cost: f64,
    /// `(‖f′‖|t − s| + 2ν((s − s̄, t)))·M`.
    pub bound: f64,
    /// Grid allowance of the matching steps inside `(s, t]`.
    pub eps_grid: f64,
    pub holds: bool,
}

pub fn time_equicontinuity(
    ens: &Ensemble,
    kin: &KineticMeasure,
    s: f64,
    t: f64,
) -> Result<EquicontinuityReport> {
    if s > t {
        return Err(Error::Parameter(format!(
            "need s <= t, got s = {s}, t = {t}"
        )));
    }
    ens.layer_at(s)?;
    ens.layer_at(t)?;
    let metric = AnisotropicMetric::for_grid(1.0, &ens.spec)?;
    let mut cost = 0.0;
    for c in ens.curves() {
        let a = crate::kinetic::Atom {
            x: c.x_at(&ens.flux, s),
            v: c.v_values[ens.layer_at(s)?],
            w: c.weight,
        };
        let b = crate::kinetic::Atom {
            x: c.x_at(&ens.flux, t),
            v: c.v_values[ens.layer_at(t)?],
            w: c.weight,
        };
        cost += c.weight * metric.dist(&a, &b);
    }
    let m = ens.total_mass;
    let bound = ens.flux.sup_fp() * (t - s) * m + 2.0 * kin.nu_window((s - ens.s_bar).max(0.0), t);
    let eps: f64 = ens
        .steps
        .iter()
        .filter(|r| r.t > s && r.t <= t)
        .map(|r| r.eps_grid)
        .sum();
    Ok(EquicontinuityReport {
        s,
        t,
        coupling_cost: cost,
        bound,
        eps_grid: eps,
        holds: cost <= 1.02 * bound + eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub value: f64,
    pub bound: f64,
    pub eps_grid: f64,
    /// `value / bound`.
    pub ratio: f64,
    pub holds: bool,
}

/// `∫ Tot.Var. γ² dω_n` against `(1 + 1/L)·ν((0,T) × ℝ^d)`.
pub fn total_variation_budget(ens: &Ensemble) -> BudgetReport {
    let mut tv = 0.0;
    for k in 1..ens.layers.len() {
        let prev = &ens.layers[k - 1];
        tv += ens.layers[k]
            .iter()
            .map(|s| s.w * (s.v - prev[s.parent as usize].v).abs())
            .sum::<f64>();
    }
    let bound = (1.0 + 1.0 / ens.l) * ens.nu_total;
    let eps = ens.eps_vertical();
    BudgetReport {
        value: tv,
        bound,
        eps_grid: eps,
        ratio: ratio(tv, bound),
        holds: tv <= 1.02 * bound + eps,
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalReport {
    /// `Σ weight · Σ_k |x_jump_k|`.
    pub residual: f64,
    /// `∫ sup_t |γ¹(t) − γ¹(0) − ∫₀ᵗ f′(γ²)| dω_n`, at most `residual`;
    /// this is the quantity held against `bound`.
    pub sup_deviation: f64,
    pub bound: f64,
    pub eps_grid: f64,
    pub ratio: f64,
    pub holds: bool,
}

pub fn check_characteristic_residual(ens: &Ensemble) -> HorizontalReport {
    let mut residual = 0.0;
    let mut cum: Vec<(Vec2, f64)> = vec![([0.0; 2], 0.0); ens.layers[0].len()];
    for k in 1..ens.layers.len() {
        let layer = &ens.layers[k];
        residual += layer.iter().map(|s| s.w * norm(s.x_jump)).sum::<f64>();
        cum = layer
            .iter()
            .map(|s| {
                let (c, m) = cum[s.parent as usize];
                let c = [c[0] + s.x_jump[0], c[1] + s.x_jump[1]];
                (c, m.max(norm(c)))
            })
            .collect();
    }
    let last = ens.layers.last().unwrap();
    let sup_deviation = last.iter().zip(&cum).map(|(s, &(_, m))| s.w * m).sum();
    let l = ens.l;
    let bound = (1.0 / l) * (1.0 + 1.0 / l) * ens.nu_total;
    let eps = ens.eps_vertical() / l;
    HorizontalReport {
        residual,
        sup_deviation,
        bound,
        eps_grid: eps,
        ratio: ratio(sup_deviation, bound),
        holds: sup_deviation <= 1.02 * bound + eps,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationAtom {
    pub t: f64,
    pub x: Vec2,
    pub v_lo: f64,
    pub v_hi: f64,
    /// `+1` for upward jumps of `γ²`, `−1` for downward ones.
    pub sign: i8,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDissipation {
    pub atoms: Vec<DissipationAtom>,
    /// Mass of the diffuse part; `γ²` is piecewise constant so this is 0.
    pub diffuse_mass: f64,
}

fn eta_integral(eta_second: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    gauss8(a, b, eta_second)
}

pub fn curve_dissipation(
    c: &Curve,
    flux: &Flux,
    eta_second: &dyn Fn(f64) -> f64,
) -> CurveDissipation {
    let mut atoms = Vec::new();
    for k in 1..c.v_values.len() {
        let (a, b) = (c.v_values[k - 1], c.v_values[k]);
        if a != b {
            let (lo, hi) = (a.min(b), a.max(b));
            atoms.push(DissipationAtom {
                t: c.times[k],
                x: c.x_at(flux, c.times[k]),
                v_lo: lo,
                v_hi: hi,
                sign: if b > a { 1 } else { -1 },
                weight: c.weight * eta_integral(eta_second, lo, hi),
            });
        }
    }
    CurveDissipation {
        atoms,
        diffuse_mass: 0.0,
    }
}

/// Signed measure on the `(t, x, v)` grid; keys are
/// `(breakpoint index, cell, v-row)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateDissipation {
    pub times: Vec<f64>,
    pub nv: usize,
    pub dv: f64,
    pub entries: Vec<((usize, usize, usize), f64)>,
    pub signed_total: f64,
    pub abs_total: f64,
    /// Sum of `|atom weight|` before binning.
    pub atom_total: f64,
}

impl AggregateDissipation {
    /// `(t, x)` marginal keyed by `(breakpoint index, cell)`.
    pub fn projection(&self) -> Vec<((usize, usize), f64)> {
        let mut m: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &((k, c, _), w) in &self.entries {
            *m.entry((k, c)).or_default() += w;
        }
        m.into_iter().collect()
    }
}

pub fn aggregate_dissipation(
    ens: &Ensemble,
    eta_second: &dyn Fn(f64) -> f64,
) -> Result<AggregateDissipation> {
    let mut m: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let probe = GridMeasure {
        spec: ens.spec.clone(),
        nv: ens.nv,
        dv: ens.dv,
        mass: Vec::new(),
    };
    let mut atom_total = 0.0;
    for k in 1..ens.layers.len() {
        let prev = &ens.layers[k - 1];
        for s in &ens.layers[k] {
            let a = prev[s.parent as usize].v;
            if a == s.v {
                continue;
            }
            let sign = if s.v > a { 1.0 } else { -1.0 };
            let (lo, hi) = (a.min(s.v), a.max(s.v));
            let cell = probe.cell_of(s.x)?;
            let j0 = (lo / ens.dv).floor() as usize;
            let j1 = ((hi / ens.dv).ceil() as usize).min(ens.nv);
            for j in j0..j1 {
                let (a, b) = (
                    (j as f64 * ens.dv).max(lo),
                    ((j + 1) as f64 * ens.dv).min(hi),
                );
                if b > a {
                    let w = s.w * eta_integral(eta_second, a, b);
                    atom_total += w;
                    *m.entry((k, cell, j)).or_default() += sign * w;
                }
            }
        }
    }
    let signed_total = m.values().sum();
    let abs_total = m.values().map(|w| w.abs()).sum();
    Ok(AggregateDissipation {
        times: ens.times.clone(),
        nv: ens.nv,
        dv: ens.dv,
        entries: m.into_iter().collect(),
        signed_total,
        abs_total,
        atom_total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomicityReport {
    pub curves: usize,
    pub max_speed_error: f64,
    pub diffuse_mass: f64,
    pub v_in_range: bool,
    /// Largest `|Σ atom lengths − Tot.Var. γ²|` over curves.
    pub max_tv_mismatch: f64,
    /// Largest relative deviation of a layer's mass from the seeded mass.
    pub max_mass_error: f64,
    pub holds: bool,
}

/// Checks on every curve that `γ²` only jumps and that `γ¹` moves with
/// speed `f′(γ²)` between breakpoints.
pub fn audit_atomicity(ens: &Ensemble) -> AtomicityReport {
    let flux = &ens.flux;
    let one = |_: f64| 1.0;
    let mut max_speed_error: f64 = 0.0;
    let mut max_tv_mismatch: f64 = 0.0;
    let mut v_in_range = true;
    let mut diffuse_mass = 0.0;
    for c in ens.curves() {
        for k in 0..c.v_values.len() {
            let v = c.v_values[k];
            v_in_range &= v.is_finite() && (0.0..=flux.u_max).contains(&v);
            let (a, b) = (c.times[k], c.times[k + 1]);
            let xa = c.x_at(flux, a);
            let xb = c.x_left(flux, b);
            let fp = flux.fp(v);
            for ax in 0..ens.spec.d {
                let speed = (xb[ax] - xa[ax]) / (b - a);
                max_speed_error =
                    max_speed_error.max((speed - fp[ax]).abs() / (1.0 + fp[ax].abs()));
            }
        }
        let diss = curve_dissipation(&c, flux, &one);
        diffuse_mass += diss.diffuse_mass;
        let len: f64 = diss.atoms.iter().map(|a| a.v_hi - a.v_lo).sum();
        max_tv_mismatch = max_tv_mismatch.max((len - c.total_variation()).abs());
    }
    let max_mass_error = (0..ens.layers.len())
        .map(|k| (ens.layer_mass(k) - ens.total_mass).abs() / ens.total_mass)
        .fold(0.0, f64::max);
    let holds = v_in_range
        && diffuse_mass == 0.0
        && max_speed_error <= 1e-9
        && max_tv_mismatch <= 1e-12
        && max_mass_error <= 1e-12;
    AtomicityReport {
        curves: ens.n_curves(),
        max_speed_error,
        diffuse_mass,
        v_in_range,
        max_tv_mismatch,
        max_mass_error,
        holds,
    }
}

/// Discrete entropy balance `η(u)_t + div Q(u)` per time step and cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyDissipation {
    pub spec: GridSpec,
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    /// `values[k * ncells + cell]`.
    pub values: Vec<f64>,
    pub signed_total: f64,
    pub abs_total: f64,
}

/// Checks `Q_k′ = η′ f_k′` on sample points.
pub fn check_entropy_pair(flux: &Flux, eta: &Poly, q: &[Poly]) -> Result<()> {
    if q.len() != flux.d {
        return Err(Error::Configuration(format!(
            "{} entropy flux components for d = {}",
            q.len(),
            flux.d
        )));
    }
    let deta = eta.derivative();
    for (k, qk) in q.iter().enumerate() {
        let dq = qk.derivative();
        for i in 0..=64 {
            let v = flux.u_max * i as f64 / 64.0;
            let lhs = dq.eval(v);
            let rhs = deta.eval(v) * flux.fp_k(k, v);
            if (lhs - rhs).abs() > 1e-12 * (1.0 + lhs.abs().max(rhs.abs())) {
                return Err(Error::Configuration(format!(
                    "entropy flux component {k} is incompatible: Q' = {lhs} but eta' f' = {rhs} at v = {v}"
                )));
            }
        }
    }
    Ok(())
}

pub fn eulerian_dissipation(sol: &Solution, eta: &Poly, q: &[Poly]) -> Result<EntropyDissipation> {
    let flux = &sol.flux;
    check_entropy_pair(flux, eta, q)?;
    let spec = &sol.spec;
    let nc = spec.ncells();
    let nt = sol.slices.len() - 1;
    let backward = flux.negated("backward");
    let q_back: Vec<Poly> = q.iter().map(|p| p.scale(-1.0)).collect();
    let mut jobs: Vec<(usize, usize, usize, &Flux, &[Poly], f64)> = Vec::with_capacity(nt);
    if sol.kind == SolutionKind::Quasi {
        let o = sol.origin_index();
        for m in 0..o {
            jobs.push((o - m - 1, o - m, o - m - 1, &backward, &q_back, -1.0));
        }
        for k in o..nt {
            jobs.push((k, k, k + 1, flux, q, 1.0));
        }
    } else {
        for k in 0..nt {
            jobs.push((k, k, k + 1, flux, q, 1.0));
        }
    }
    let vol = spec.cell_volume();
    let n = spec.n;
    let lines = if spec.d == 1 { 1 } else { n };
    let mut values = vec![0.0; nt * nc];
    for (tc, from, to, fl, qs, sign) in jobs {
        let out = &mut values[tc * nc..(tc + 1) * nc];
        let plan = stages(spec.d, sol.dt);
        let mut u_a = sol.slices[from].clone();
        for (s, &(axis, h)) in plan.iter().enumerate() {
            let (computed, states) = sweep(fl, spec, axis, h, &u_a)?;
            let u_b = if s + 1 == plan.len() {
                sol.slices[to].clone()
            } else {
                computed
            };
            let lambda = h / spec.dx(axis);
            let (stride, line_step) = if axis == 0 { (1, n) } else { (n, 1) };
            for line in 0..lines {
                let st = &states[line * (n + 1)..(line + 1) * (n + 1)];
                for i in 0..n {
                    let cell = line * line_step + i * stride;
                    let r = eta.eval(u_b[cell]) - eta.eval(u_a[cell])
                        + lambda * (qs[axis].eval(st[i + 1]) - qs[axis].eval(st[i]));
                    out[cell] += sign * r * vol;
                }
            }
            u_a = u_b;
        }
    }
    let signed_total = values.iter().sum();
    let abs_total = values.iter().map(|v| v.abs()).sum();
    Ok(EntropyDissipation {
        spec: spec.clone(),
        t0: sol.t0,
        dt: sol.dt,
        nt,
        values,
        signed_total,
        abs_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(v: Vec<f64>) -> Curve {
        let n = v.len();
        Curve {
            weight: 0.5,
            times: (0..=n).map(|k| k as f64 / n as f64).collect(),
            v_values: v,
            x_start: [0.0; 2],
            x_jumps: vec![[0.0; 2]; n - 1],
        }
    }

    #[test]
    fn dissipation_of_single_jumps() {
        let f = Flux::burgers();
        let d = curve_dissipation(&curve(vec![1.0, 0.0]), &f, &|_| 1.0);
        assert_eq!(d.atoms.len(), 1);
        let a = d.atoms[0];
        assert_eq!((a.t, a.v_lo, a.v_hi, a.sign), (0.5, 0.0, 1.0, -1));
        assert!((a.weight - 0.5).abs() < 1e-15);
        let d = curve_dissipation(&curve(vec![0.0, 1.0]), &f, &|v| 2.0 * v);
        assert_eq!(d.atoms[0].sign, 1);
        assert!((d.atoms[0].weight - 0.5).abs() < 1e-15);
        assert!(curve_dissipation(&curve(vec![0.3; 4]), &f, &|_| 1.0)
            .atoms
            .is_empty());
    }

    #[test]
    fn curve_positions() {
        let f = Flux::burgers();
        let mut c = curve(vec![1.0, 0.5]);
        c.x_jumps[0] = [0.25, 0.0];
        assert!((c.x_left(&f, 0.5)[0] - 0.5).abs() < 1e-15);
        assert!((c.x_at(&f, 0.5)[0] - 0.75).abs() < 1e-15);
        assert!((c.x_at(&f, 1.0)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn incompatible_entropy_flux() {
        let f = Flux::burgers();
        let eta = Poly::new(vec![0.0, 0.0, 0.5]);
        assert!(check_entropy_pair(&f, &eta, &[f.entropy_flux(0, &eta)]).is_ok());
        let bad = Poly::new(vec![0.0, 0.0, 0.0, 0.5]);
        assert!(matches!(
            check_entropy_pair(&f, &eta, &[bad]),
            Err(Error::Configuration(_))
        ));
    }
}

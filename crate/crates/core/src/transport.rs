//! Exact discrete Wasserstein-1 distance for the anisotropic cost
//! `d_L((x₁,v₁),(x₂,v₂)) = L|x₁ − x₂| + |v₁ − v₂|`, Kantorovich potentials
//! and the per-step matching between free-transported and evolved subgraphs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::Vec2;
use crate::kinetic::{Atom, DiscreteMeasure, KineticSlice};
use crate::mcf;
use crate::solver::{Boundary, GridSpec, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisotropicMetric {
    pub l: f64,
    /// Periods of the spatial axes when positions live on a torus.
    pub period: Option<Vec2>,
}

impl AnisotropicMetric {
    pub fn new(l: f64) -> Result<AnisotropicMetric> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Parameter(format!(
                "horizontal weight L = {l} must be positive"
            )));
        }
        Ok(AnisotropicMetric { l, period: None })
    }

    pub fn periodic(l: f64, period: Vec2) -> Result<AnisotropicMetric> {
        Ok(AnisotropicMetric {
            period: Some(period),
            ..AnisotropicMetric::new(l)?
        })
    }

    /// The metric matching a grid's boundary condition.
    pub fn for_grid(l: f64, spec: &GridSpec) -> Result<AnisotropicMetric> {
        if spec.boundary == Boundary::Periodic {
            let p = [
                spec.hi[0] - spec.lo[0],
                if spec.d == 2 {
                    spec.hi[1] - spec.lo[1]
                } else {
                    f64::INFINITY
                },
            ];
            AnisotropicMetric::periodic(l, p)
        } else {
            AnisotropicMetric::new(l)
        }
    }

    pub fn x_dist(&self, a: Vec2, b: Vec2) -> f64 {
        let mut d = [a[0] - b[0], a[1] - b[1]];
        if let Some(p) = self.period {
            for k in 0..2 {
                if p[k].is_finite() {
                    let r = d[k].rem_euclid(p[k]);
                    d[k] = r.min(p[k] - r);
                }
            }
        }
        d[0].hypot(d[1])
    }

    pub fn dist(&self, p: &Atom, q: &Atom) -> f64 {
        self.l * self.x_dist(p.x, q.x) + (p.v - q.v).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub src: usize,
    pub dst: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub couplings: Vec<Coupling>,
    pub cost: f64,
    /// Kantorovich potential at the source and target atoms:
    /// `φ(p) − φ(q) ≤ d_L(p, q)`, with equality on coupled pairs.
    pub phi_src: Vec<f64>,
    pub phi_dst: Vec<f64>,
    pub dual: f64,
    pub gap: f64,
    /// Cost radius of the final arc set (`∞` for dense solves).
    pub radius: f64,
    pub n_arcs: usize,
    /// Mass matched in place between coincident atoms.
    pub cancelled: f64,
    /// Source and target masses before rebalancing.
    pub mass_src: f64,
    pub mass_dst: f64,
}

const DENSE_LIMIT: usize = 250_000;

fn key(a: &Atom) -> (u64, u64, u64) {
    (a.x[0].to_bits(), a.x[1].to_bits(), a.v.to_bits())
}

/// Exact optimal plan between two discrete measures of equal mass.
pub fn w1_distance(
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    metric: &AnisotropicMetric,
) -> Result<TransportPlan> {
    let (m1, m2) = (mu1.total_mass(), mu2.total_mass());
    let scale = m1.max(m2);
    if (m1 - m2).abs() > 1e-9 * scale {
        return Err(Error::Balance { m1, m2 });
    }
    let tol = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let ns = mu1.atoms.len();
    let nt = mu2.atoms.len();
    let mut sup: Vec<f64> = mu1.atoms.iter().map(|a| a.w).collect();
    let mut dem: Vec<f64> = mu2.atoms.iter().map(|a| a.w).collect();
    let mut couplings = Vec::new();
    // Common mass stays in place: for a metric cost this is always optimal.
    let mut index: HashMap<(u64, u64, u64), usize> = HashMap::with_capacity(nt);
    for (j, a) in mu2.atoms.iter().enumerate() {
        index.entry(key(a)).or_insert(j);
    }
    let mut cancelled = 0.0;
    for (i, a) in mu1.atoms.iter().enumerate() {
        if let Some(&j) = index.get(&key(a)) {
            let m = sup[i].min(dem[j]);
            if m > 0.0 {
                couplings.push(Coupling {
                    src: i,
                    dst: j,
                    mass: m,
                });
                sup[i] -= m;
                dem[j] -= m;
                cancelled += m;
                if sup[i] <= tol {
                    sup[i] = 0.0;
                }
                if dem[j] <= tol {
                    dem[j] = 0.0;
                }
            }
        }
    }
    let rs: Vec<usize> = (0..ns).filter(|&i| sup[i] > 0.0).collect();
    let rt: Vec<usize> = (0..nt).filter(|&j| dem[j] > 0.0).collect();
    let mut phi_src = vec![0.0; ns];
    let mut phi_dst = vec![0.0; nt];
    let mut radius = f64::INFINITY;
    let mut n_arcs = 0;
    if !rs.is_empty() && !rt.is_empty() {
        let src: Vec<&Atom> = rs.iter().map(|&i| &mu1.atoms[i]).collect();
        let dst: Vec<&Atom> = rt.iter().map(|&j| &mu2.atoms[j]).collect();
        let a: Vec<f64> = rs.iter().map(|&i| sup[i]).collect();
        let b: Vec<f64> = rt.iter().map(|&j| dem[j]).collect();
        let dense = src.len() * dst.len() <= DENSE_LIMIT || metric.period.is_some();
        let mut r = if dense {
            f64::INFINITY
        } else {
            initial_radius(&src, &dst, metric)
        };
        let sol = loop {
            let adj = arcs_within(&src, &dst, metric, r);
            let net = mcf::Network::new(dst.len(), &adj);
            match mcf::solve(&net, &a, &b, tol) {
                Some(s) => {
                    if r.is_infinite() || certified(&src, &dst, metric, &s, r) {
                        n_arcs = net.n_arcs();
                        radius = r;
                        break s;
                    }
                }
                None if r.is_infinite() => {
                    return Err(Error::Solver(
                        "no feasible flow on the complete graph".into(),
                    ));
                }
                None => {}
            }
            r *= 2.0;
            if r > max_cost(&src, &dst, metric) {
                r = f64::INFINITY;
            }
        };
        for &(i, j, m, _) in &sol.flows {
            couplings.push(Coupling {
                src: rs[i],
                dst: rt[j],
                mass: m,
            });
        }
        for (k, &i) in rs.iter().enumerate() {
            phi_src[i] = -sol.pi_src[k];
        }
        for (k, &j) in rt.iter().enumerate() {
            phi_dst[j] = -sol.pi_dst[k];
        }
        // Atoms matched entirely in place take the c-transform of the
        // residual target potentials, which is 1-Lipschitz for d_L.
        let phi_at = |p: &Atom| {
            dst.iter()
                .zip(&rt)
                .map(|(q, &j)| phi_dst[j] + metric.dist(p, q))
                .fold(f64::INFINITY, f64::min)
        };
        let in_rs: Vec<bool> = {
            let mut v = vec![false; ns];
            rs.iter().for_each(|&i| v[i] = true);
            v
        };
        let in_rt: Vec<bool> = {
            let mut v = vec![false; nt];
            rt.iter().for_each(|&j| v[j] = true);
            v
        };
        let c_src: Vec<(usize, f64)> = (0..ns)
            .filter(|&i| !in_rs[i])
            .map(|i| (i, phi_at(&mu1.atoms[i])))
            .collect();
        let c_dst: Vec<(usize, f64)> = (0..nt)
            .filter(|&j| !in_rt[j])
            .map(|j| (j, phi_at(&mu2.atoms[j])))
            .collect();
        c_src.into_iter().for_each(|(i, p)| phi_src[i] = p);
        c_dst.into_iter().for_each(|(j, p)| phi_dst[j] = p);
    }
    let cost: f64 = couplings
        .iter()
        .map(|c| c.mass * metric.dist(&mu1.atoms[c.src], &mu2.atoms[c.dst]))
        .sum();
    let dual: f64 = mu1
        .atoms
        .iter()
        .zip(&phi_src)
        .map(|(a, p)| a.w * p)
        .sum::<f64>()
        - mu2
            .atoms
            .iter()
            .zip(&phi_dst)
            .map(|(a, p)| a.w * p)
            .sum::<f64>();
    Ok(TransportPlan {
        couplings,
        cost,
        phi_src,
        phi_dst,
        dual,
        gap: cost - dual,
        radius,
        n_arcs,
        cancelled,
        mass_src: m1,
        mass_dst: m2,
    })
}

fn max_cost(src: &[&Atom], dst: &[&Atom], metric: &AnisotropicMetric) -> f64 {
    let bbox = |pts: &[&Atom]| {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in pts {
            for (k, c) in [p.x[0], p.x[1], p.v].into_iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
        }
        (lo, hi)
    };
    let (l1, h1) = bbox(src);
    let (l2, h2) = bbox(dst);
    let span = |k: usize| h1[k].max(h2[k]) - l1[k].min(l2[k]);
    metric.l * span(0).hypot(span(1)) + span(2)
}

/// Three times the largest nearest-target distance.
fn initial_radius(src: &[&Atom], dst: &[&Atom], metric: &AnisotropicMetric) -> f64 {
    let mut order: Vec<usize> = (0..dst.len()).collect();
    order.sort_by(|&a, &b| dst[a].x[0].total_cmp(&dst[b].x[0]));
    let xs: Vec<f64> = order.iter().map(|&j| dst[j].x[0]).collect();
    let mut worst: f64 = 0.0;
    for p in src {
        let k = xs.partition_point(|&x| x < p.x[0]);
        let mut best = f64::INFINITY;
        let mut lo = k;
        let mut hi = k;
        loop {
            let mut moved = false;
            if hi < xs.len() && metric.l * (xs[hi] - p.x[0]) < best {
                best = best.min(metric.dist(p, dst[order[hi]]));
                hi += 1;
                moved = true;
            }
            if lo > 0 && metric.l * (p.x[0] - xs[lo - 1]) < best {
                lo -= 1;
                best = best.min(metric.dist(p, dst[order[lo]]));
                moved = true;
            }
            if !moved {
                break;
            }
        }
        worst = worst.max(best);
    }
    (3.0 * worst).max(f64::MIN_POSITIVE)
}

fn arcs_within(
    src: &[&Atom],
    dst: &[&Atom],
    metric: &AnisotropicMetric,
    r: f64,
) -> Vec<Vec<(usize, f64)>> {
    if r.is_infinite() {
        return src
            .iter()
            .map(|p| {
                dst.iter()
                    .enumerate()
                    .map(|(j, q)| (j, metric.dist(p, q)))
                    .collect()
            })
            .collect();
    }
    let mut order: Vec<usize> = (0..dst.len()).collect();
    order.sort_by(|&a, &b| dst[a].x[0].total_cmp(&dst[b].x[0]));
    let xs: Vec<f64> = order.iter().map(|&j| dst[j].x[0]).collect();
    let w = r / metric.l;
    src.iter()
        .map(|p| {
            let a = xs.partition_point(|&x| x < p.x[0] - w);
            let b = xs.partition_point(|&x| x <= p.x[0] + w);
            order[a..b]
                .iter()
                .filter_map(|&j| {
                    let c = metric.dist(p, dst[j]);
                    (c <= r).then_some((j, c))
                })
                .collect()
        })
        .collect()
}

/// Every pair outside the radius satisfies the dual constraint.
fn certified(
    src: &[&Atom],
    dst: &[&Atom],
    metric: &AnisotropicMetric,
    s: &mcf::FlowSolution,
    r: f64,
) -> bool {
    let scale = s
        .pi_src
        .iter()
        .chain(&s.pi_dst)
        .fold(0.0f64, |m, p| m.max(p.abs()))
        .max(r);
    let tol = 1e-12 * scale;
    for (i, p) in src.iter().enumerate() {
        for (j, q) in dst.iter().enumerate() {
            let c = metric.dist(p, q);
            if c > r && c + s.pi_src[i] - s.pi_dst[j] < -tol {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    /// Largest `φ(p) − φ(q) − d_L(p, q)` over candidate pairs.
    pub max_violation: f64,
    /// Largest `|φ(p) − φ(q) − d_L(p, q)|` over coupled pairs.
    pub max_slackness: f64,
    pub marginal_error_src: f64,
    pub marginal_error_dst: f64,
}

/// Independent recomputation of primal and dual objectives, dual
/// feasibility over all pairs within the plan's cost radius, complementary
/// slackness and marginals.
pub fn verify_duality(
    plan: &TransportPlan,
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    metric: &AnisotropicMetric,
) -> DualityReport {
    let primal: f64 = plan
        .couplings
        .iter()
        .map(|c| c.mass * metric.dist(&mu1.atoms[c.src], &mu2.atoms[c.dst]))
        .sum();
    let dual: f64 = mu1
        .atoms
        .iter()
        .zip(&plan.phi_src)
        .map(|(a, p)| a.w * p)
        .sum::<f64>()
        - mu2
            .atoms
            .iter()
            .zip(&plan.phi_dst)
            .map(|(a, p)| a.w * p)
            .sum::<f64>();
    let mut max_violation: f64 = 0.0;
    for (i, p) in mu1.atoms.iter().enumerate() {
        for (j, q) in mu2.atoms.iter().enumerate() {
            let c = metric.dist(p, q);
            if c <= plan.radius {
                max_violation = max_violation.max(plan.phi_src[i] - plan.phi_dst[j] - c);
            }
        }
    }
    let mut max_slackness: f64 = 0.0;
    let mut row = vec![0.0; mu1.atoms.len()];
    let mut col = vec![0.0; mu2.atoms.len()];
    for c in &plan.couplings {
        let d = metric.dist(&mu1.atoms[c.src], &mu2.atoms[c.dst]);
        max_slackness = max_slackness.max((plan.phi_src[c.src] - plan.phi_dst[c.dst] - d).abs());
        row[c.src] += c.mass;
        col[c.dst] += c.mass;
    }
    let marginal_error_src = mu1
        .atoms
        .iter()
        .zip(&row)
        .map(|(a, r)| (a.w - r).abs())
        .fold(0.0, f64::max);
    let marginal_error_dst = mu2
        .atoms
        .iter()
        .zip(&col)
        .map(|(a, r)| (a.w - r).abs())
        .fold(0.0, f64::max);
    DualityReport {
        primal,
        dual,
        gap: primal - dual,
        max_violation,
        max_slackness,
        marginal_error_src,
        marginal_error_dst,
    }
}

/// Uniformly rescales the lighter measure to the heavier one's mass;
/// returns the deficit.
pub fn rebalance(mu1: &mut DiscreteMeasure, mu2: &mut DiscreteMeasure) -> f64 {
    let (m1, m2) = (mu1.total_mass(), mu2.total_mass());
    let deficit = (m1 - m2).abs();
    if deficit == 0.0 {
        return 0.0;
    }
    let (light, k) = if m1 < m2 {
        (mu1, m2 / m1)
    } else {
        (mu2, m1 / m2)
    };
    light.atoms.iter_mut().for_each(|a| a.w *= k);
    deficit
}

/// Masses on the `(cell, v-row)` grid of a solution: `m[cell * nv + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub spec: GridSpec,
    pub nv: usize,
    pub dv: f64,
    pub mass: Vec<f64>,
}

impl GridMeasure {
    pub fn from_slice(s: &KineticSlice) -> GridMeasure {
        let vol = s.spec.cell_volume() * s.dv;
        GridMeasure {
            spec: s.spec.clone(),
            nv: s.nv,
            dv: s.dv,
            mass: s.fractions.iter().map(|f| f * vol).collect(),
        }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn atom(&self, k: usize) -> Atom {
        Atom {
            x: self.spec.cell_center(k / self.nv),
            v: (k % self.nv) as f64 * self.dv + 0.5 * self.dv,
            w: self.mass[k],
        }
    }

    /// Nonzero entries as atoms, with their grid indices.
    pub fn to_measure(&self) -> (DiscreteMeasure, Vec<usize>) {
        let idx: Vec<usize> = (0..self.mass.len())
            .filter(|&k| self.mass[k] > 0.0)
            .collect();
        let atoms = idx.iter().map(|&k| self.atom(k)).collect();
        (
            DiscreteMeasure {
                d: self.spec.d,
                atoms,
            },
            idx,
        )
    }

    /// Grid cell containing `x` (wrapped on periodic grids).
    pub fn cell_of(&self, x: Vec2) -> Result<usize> {
        let spec = &self.spec;
        let mut ij = [0usize; 2];
        for k in 0..spec.d {
            let h = spec.dx(k);
            let mut m = ((x[k] - spec.lo[k]) / h).floor() as i64;
            if spec.boundary == Boundary::Periodic {
                m = m.rem_euclid(spec.n as i64);
            } else if m < 0 || m >= spec.n as i64 {
                return Err(Error::Runtime(format!("position {x:?} left the domain")));
            }
            ij[k] = m as usize;
        }
        Ok(ij[0] + spec.n * ij[1])
    }
}

/// Histogram of a discrete measure on the `(cell, v-row)` grid.
pub fn bin_measure(
    m: &DiscreteMeasure,
    spec: &GridSpec,
    nv: usize,
    dv: f64,
) -> Result<GridMeasure> {
    let mut g = GridMeasure {
        spec: spec.clone(),
        nv,
        dv,
        mass: vec![0.0; spec.ncells() * nv],
    };
    for a in &m.atoms {
        let j = ((a.v / dv).floor().max(0.0) as usize).min(nv - 1);
        let c = g.cell_of(a.x)?;
        g.mass[c * nv + j] += a.w;
    }
    Ok(g)
}

/// `(LΔx + Δv)·M`: two cell discretizations plus binning of free-transported
/// atoms, each bounded by half a cell per unit mass.
pub fn grid_error(spec: &GridSpec, dv: f64, l: f64, mass: f64) -> f64 {
    let dx = (0..spec.d).map(|k| spec.dx(k).powi(2)).sum::<f64>().sqrt();
    (l * dx + dv) * mass
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub t: f64,
    pub s_bar: f64,
    pub l: f64,
    pub plan: TransportPlan,
    pub nu: f64,
    pub bound: f64,
    pub eps_grid: f64,
    pub deficit: f64,
    pub holds: bool,
}

/// Checks `s̄ ≤ 1/(‖f″‖ L²)`.
pub fn check_step_condition(s_bar: f64, fpp: f64, l: f64) -> Result<()> {
    let limit = 1.0 / (fpp * l * l);
    if s_bar > limit * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "s_bar <= 1/(|f''|_inf * L^2) violated: s_bar = {s_bar}, limit = {limit}"
        )));
    }
    Ok(())
}

/// Optimal matching of two grid measures, with the cost bound
/// `cost ≤ (1 + 1/L)·ν((t, t+s̄) × ℝ^d) + ε_grid`.
pub fn match_grid_measures(
    src: &GridMeasure,
    dst: &GridMeasure,
    metric: &AnisotropicMetric,
) -> Result<(
    TransportPlan,
    Vec<usize>,
    Vec<usize>,
    DiscreteMeasure,
    DiscreteMeasure,
    f64,
)> {
    let (mut m1, i1) = src.to_measure();
    let (mut m2, i2) = dst.to_measure();
    let deficit = rebalance(&mut m1, &mut m2);
    let plan = w1_distance(&m1, &m2, metric)?;
    Ok((plan, i1, i2, m1, m2, deficit))
}

pub fn match_timestep(
    sol: &Solution,
    kin: &crate::kinetic::KineticMeasure,
    t: f64,
    s_bar: f64,
    l: f64,
    nv: usize,
) -> Result<MatchReport> {
    let flux = &sol.flux;
    check_step_condition(s_bar, flux.sup_fpp(), l)?;
    let i0 = sol.slice_index(t)?;
    let i1 = sol.slice_index(t + s_bar)?;
    let a = KineticSlice::from_solution(sol, i0, nv);
    let b = KineticSlice::from_solution(sol, i1, nv);
    let moved = DiscreteMeasure::from_slice(&a).free_transport(flux, s_bar)?;
    let src = bin_measure(&moved, &sol.spec, nv, a.dv)?;
    let dst = GridMeasure::from_slice(&b);
    let metric = AnisotropicMetric::for_grid(l, &sol.spec)?;
    let (plan, _, _, _, _, deficit) = match_grid_measures(&src, &dst, &metric)?;
    let nu = kin.nu_window(t, t + s_bar);
    let bound = (1.0 + 1.0 / l) * nu;
    let diam = domain_diameter(&sol.spec, l, flux.u_max);
    let eps_grid = grid_error(&sol.spec, a.dv, l, src.total()) + diam * deficit;
    let holds = plan.cost <= bound * 1.02 + eps_grid;
    Ok(MatchReport {
        t,
        s_bar,
        l,
        plan,
        nu,
        bound,
        eps_grid,
        deficit,
        holds,
    })
}

pub fn domain_diameter(spec: &GridSpec, l: f64, u_max: f64) -> f64 {
    let dx = (0..spec.d)
        .map(|k| (spec.hi[k] - spec.lo[k]).powi(2))
        .sum::<f64>()
        .sqrt();
    l * dx + u_max
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(x: f64, v: f64, w: f64) -> Atom {
        Atom { x: [x, 0.0], v, w }
    }

    #[test]
    fn single_pair() {
        let m = AnisotropicMetric::new(2.0).unwrap();
        let a = DiscreteMeasure::new(1, vec![atom(0.0, 0.0, 1.0)]).unwrap();
        let b = DiscreteMeasure::new(1, vec![atom(1.0, 0.5, 1.0)]).unwrap();
        let p = w1_distance(&a, &b, &m).unwrap();
        assert!((p.cost - 2.5).abs() < 1e-15);
        assert!(p.gap.abs() < 1e-12);
    }

    #[test]
    fn identity() {
        let m = AnisotropicMetric::new(1.0).unwrap();
        let a = DiscreteMeasure::new(
            1,
            (0..10)
                .map(|i| atom(i as f64, 0.1 * i as f64, 0.1))
                .collect(),
        )
        .unwrap();
        let p = w1_distance(&a, &a, &m).unwrap();
        assert_eq!(p.cost, 0.0);
        assert!(p.couplings.iter().all(|c| c.src == c.dst));
        let r = verify_duality(&p, &a, &a, &m);
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn balance_error() {
        let m = AnisotropicMetric::new(1.0).unwrap();
        let a = DiscreteMeasure::new(1, vec![atom(0.0, 0.0, 1.0)]).unwrap();
        let b = DiscreteMeasure::new(1, vec![atom(0.0, 0.0, 1.1)]).unwrap();
        assert!(matches!(
            w1_distance(&a, &b, &m),
            Err(Error::Balance { .. })
        ));
    }

    #[test]
    fn perturbed_potential_is_flagged() {
        let m = AnisotropicMetric::new(1.0).unwrap();
        let a = DiscreteMeasure::new(1, vec![atom(0.0, 0.0, 0.5), atom(1.0, 0.0, 0.5)]).unwrap();
        let b = DiscreteMeasure::new(1, vec![atom(0.5, 0.2, 0.5), atom(2.0, 0.0, 0.5)]).unwrap();
        let mut p = w1_distance(&a, &b, &m).unwrap();
        p.phi_src[0] += 0.1;
        let r = verify_duality(&p, &a, &b, &m);
        assert!(r.max_violation >= 0.1 - 1e-8);
    }

    #[test]
    fn step_condition() {
        assert!(check_step_condition(0.25, 1.0, 2.0).is_ok());
        let e = check_step_condition(0.5, 1.0, 2.0).unwrap_err();
        assert!(e.to_string().contains("s_bar <= 1/(|f''|_inf * L^2)"));
    }
}

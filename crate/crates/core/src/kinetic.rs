//! Kinetic formulation: occupancy slices, free transport, the kinetic defect
//! measure `μ` with its projection `ν`, the weak estimate and the
//! dissipation-cylinder search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{select_basis, BasisSelection, Flux, NonlinearityCertificate, Vec2};
use crate::geometry::{ball_volume, disk_rect_area, interval_overlap, omega, GridFunction};
use crate::solver::{stages, sweep, Boundary, GridSpec, Solution, SolutionKind};
use crate::structure::oscillation_hbar;

pub fn chi_fraction(u: f64, v_lo: f64, v_hi: f64) -> Result<f64> {
    if !(v_hi > v_lo) {
        return Err(Error::Parameter(format!(
            "degenerate v-interval [{v_lo}, {v_hi}]"
        )));
    }
    Ok(((u - v_lo) / (v_hi - v_lo)).clamp(0.0, 1.0))
}

#[inline]
fn chi(u: f64, v_lo: f64, dv: f64) -> f64 {
    ((u - v_lo) / dv).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec2,
    pub v: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub d: usize,
    pub atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn new(d: usize, atoms: Vec<Atom>) -> Result<DiscreteMeasure> {
        if let Some(a) = atoms.iter().find(|a| !(a.w > 0.0) || !a.w.is_finite()) {
            return Err(Error::Parameter(format!(
                "atom weight {} must be positive",
                a.w
            )));
        }
        Ok(DiscreteMeasure { d, atoms })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    /// Atoms at the cell centres of an occupancy slice.
    pub fn from_slice(s: &KineticSlice) -> DiscreteMeasure {
        let vol = s.spec.cell_volume() * s.dv;
        let mut atoms = Vec::new();
        for cell in 0..s.spec.ncells() {
            let x = s.spec.cell_center(cell);
            for j in 0..s.nv {
                let f = s.fractions[cell * s.nv + j];
                if f > 0.0 {
                    atoms.push(Atom {
                        x,
                        v: (j as f64 + 0.5) * s.dv,
                        w: f * vol,
                    });
                }
            }
        }
        DiscreteMeasure { d: s.spec.d, atoms }
    }

    /// `(x, v) ↦ (x + f′(v) s, v)` applied to every atom.
    pub fn free_transport(&self, flux: &Flux, s: f64) -> Result<DiscreteMeasure> {
        if !(s >= 0.0) {
            return Err(Error::Parameter(format!("negative transport time {s}")));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let fp = flux.fp(a.v);
                Atom {
                    x: [a.x[0] + fp[0] * s, a.x[1] + fp[1] * s],
                    ..*a
                }
            })
            .collect();
        Ok(DiscreteMeasure { d: self.d, atoms })
    }
}

/// Cellwise occupancy of the subgraph `{(x, v) : 0 < v ≤ u(x)}` on the
/// product of the spatial grid with `nv` uniform cells over `[0, u_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KineticSlice {
    pub t: f64,
    pub spec: GridSpec,
    pub nv: usize,
    pub dv: f64,
    /// `fractions[cell * nv + j]`.
    pub fractions: Vec<f64>,
}

impl KineticSlice {
    pub fn from_values(t: f64, spec: &GridSpec, u: &[f64], nv: usize, u_max: f64) -> KineticSlice {
        let dv = u_max / nv as f64;
        let mut fractions = vec![0.0; u.len() * nv];
        for (cell, &uc) in u.iter().enumerate() {
            for j in 0..nv {
                let f = chi(uc, j as f64 * dv, dv);
                if f == 0.0 {
                    break;
                }
                fractions[cell * nv + j] = f;
            }
        }
        KineticSlice {
            t,
            spec: spec.clone(),
            nv,
            dv,
            fractions,
        }
    }

    pub fn from_solution(sol: &Solution, n: usize, nv: usize) -> KineticSlice {
        KineticSlice::from_values(sol.time(n), &sol.spec, &sol.slices[n], nv, sol.flux.u_max)
    }

    pub fn mass(&self) -> f64 {
        self.fractions.iter().sum::<f64>() * self.spec.cell_volume() * self.dv
    }

    pub fn is_monotone(&self) -> bool {
        self.fractions
            .chunks(self.nv)
            .all(|c| c.windows(2).all(|w| w[1] <= w[0]))
    }

    /// Free transport by `s` with conservative re-binning: exact sheared
    /// overlaps in d = 1 (sub-divided when `f′` is not affine), rigid
    /// per-row translation with bilinear splatting in d = 2.
    pub fn free_transport(&self, flux: &Flux, s: f64) -> Result<KineticSlice> {
        self.transport(flux, s, false)
    }

    /// As [`free_transport`](Self::free_transport), but mass leaving a
    /// non-periodic domain is dropped instead of rejected.
    pub fn free_transport_clipped(&self, flux: &Flux, s: f64) -> Result<KineticSlice> {
        self.transport(flux, s, true)
    }

    fn transport(&self, flux: &Flux, s: f64, clip: bool) -> Result<KineticSlice> {
        if !(s >= 0.0) {
            return Err(Error::Parameter(format!("negative transport time {s}")));
        }
        let mut out = KineticSlice {
            t: self.t + s,
            fractions: vec![0.0; self.fractions.len()],
            ..self.clone()
        };
        if s == 0.0 {
            out.fractions.copy_from_slice(&self.fractions);
            return Ok(out);
        }
        let n = self.spec.n as i64;
        let periodic = self.spec.boundary == Boundary::Periodic;
        let wrap = |m: i64| -> Option<usize> {
            if periodic {
                Some(m.rem_euclid(n) as usize)
            } else if m >= 0 && m < n {
                Some(m as usize)
            } else {
                None
            }
        };
        let escape = || Error::Runtime("transported support exits the domain".into());
        let nv = self.nv;
        let dv = self.dv;
        if self.spec.d == 1 {
            let dx = self.spec.dx(0);
            let pieces = if flux.derivative_poly(0).degree() <= 1 {
                1
            } else {
                16
            };
            for cell in 0..self.spec.n {
                for j in 0..nv {
                    let theta = self.fractions[cell * nv + j];
                    if theta == 0.0 {
                        continue;
                    }
                    let v0 = j as f64 * dv;
                    let top = theta * dv;
                    for p in 0..pieces {
                        let va = v0 + top * p as f64 / pieces as f64;
                        let vb = v0 + top * (p + 1) as f64 / pieces as f64;
                        let (sa, sb) = (flux.fp_k(0, va) * s, flux.fp_k(0, vb) * s);
                        let len = vb - va;
                        let m_lo = cell as i64 + (sa.min(sb) / dx).floor() as i64;
                        let m_hi = cell as i64 + (sa.max(sb) / dx).floor() as i64 + 1;
                        for m in m_lo..=m_hi {
                            // offset of the source cell's left edge from target m
                            let base = (cell as i64 - m) as f64 * dx;
                            let w = hat_integral(base + sa, base + sb, len, dx);
                            if w <= 0.0 {
                                continue;
                            }
                            match wrap(m) {
                                Some(k) => out.fractions[k * nv + j] += w / (dx * dv),
                                None if clip => {}
                                None => return Err(escape()),
                            }
                        }
                    }
                }
            }
        } else {
            let (h0, h1) = (self.spec.dx(0), self.spec.dx(1));
            for j in 0..nv {
                let fp = flux.fp((j as f64 + 0.5) * dv);
                let (q0, q1) = (fp[0] * s / h0, fp[1] * s / h1);
                let (c0, c1) = (q0.floor(), q1.floor());
                let (o0, o1) = (q0 - c0, q1 - c1);
                let weights = [
                    (0i64, 0i64, (1.0 - o0) * (1.0 - o1)),
                    (1, 0, o0 * (1.0 - o1)),
                    (0, 1, (1.0 - o0) * o1),
                    (1, 1, o0 * o1),
                ];
                for cell in 0..self.spec.ncells() {
                    let theta = self.fractions[cell * nv + j];
                    if theta == 0.0 {
                        continue;
                    }
                    let (i0, i1) = self.spec.cell_ij(cell);
                    for &(a, b, w) in &weights {
                        if w == 0.0 {
                            continue;
                        }
                        match (
                            wrap(i0 as i64 + c0 as i64 + a),
                            wrap(i1 as i64 + c1 as i64 + b),
                        ) {
                            (Some(m0), Some(m1)) => {
                                out.fractions[(m0 + self.spec.n * m1) * nv + j] += theta * w
                            }
                            _ if clip => {}
                            _ => return Err(escape()),
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `∫_0^len hat(y(τ)) dτ` with `y` affine from `y0` to `y1` and
/// `hat(y) = max(0, h - |y|)`.
fn hat_integral(y0: f64, y1: f64, len: f64, h: f64) -> f64 {
    let prim = |y: f64| -> f64 {
        if y <= -h {
            0.0
        } else if y <= 0.0 {
            0.5 * (y + h) * (y + h)
        } else if y <= h {
            h * h - 0.5 * (h - y) * (h - y)
        } else {
            h * h
        }
    };
    let dy = y1 - y0;
    if dy.abs() <= 1e-12 * h {
        let y = 0.5 * (y0 + y1);
        return (h - y.abs()).max(0.0) * len;
    }
    (prim(y1) - prim(y0)) / dy * len
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub nv: usize,
    pub keep_mu: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            nv: 64,
            keep_mu: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuCell {
    pub t: u32,
    pub cell: u32,
    pub v: u32,
    pub w: f64,
}

/// Signed cell measure `μ` on the `(t, x, v)` grid and `ν`, the cellwise
/// projection of `|μ|` onto `(t, x)`. Time cell `k` is
/// `[t0 + k dt, t0 + (k+1) dt]`.
#[derive(Debug, Clone, Serialize)]
pub struct KineticMeasure {
    pub spec: GridSpec,
    pub nv: usize,
    pub dv: f64,
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    /// `nu[k * ncells + cell]`.
    pub nu: Vec<f64>,
    pub mu: Vec<MuCell>,
    pub mu_signed_total: f64,
    pub mu_abs_total: f64,
    /// Largest `|Σ_v R|` over columns, and the corresponding `‖R‖₁`.
    pub max_bottom_residual: f64,
    pub residual_l1: f64,
}

struct ColumnResult {
    bottom: f64,
    l1: f64,
}

/// Residual column for one cell and one sweep: accumulates the top-down
/// integrated `μ` weights (times `scale`) into `acc`.
#[allow(clippy::too_many_arguments)]
fn column(
    flux: &Flux,
    axis: usize,
    lambda: f64,
    ua: f64,
    ub: f64,
    wl: f64,
    wr: f64,
    dv: f64,
    nv: usize,
    scale: f64,
    acc: &mut [f64],
) -> ColumnResult {
    let top = ua.max(ub).max(wl).max(wr);
    let bot = ua.min(ub).min(wl).min(wr);
    let j_hi = ((top / dv).ceil().max(0.0) as usize).min(nv);
    let j_lo = ((bot / dv).floor().max(0.0) as usize).min(j_hi);
    let phi = |w: f64, v_lo: f64, v_hi: f64| {
        if w <= v_lo {
            0.0
        } else {
            flux.f_k(axis, w.min(v_hi)) - flux.f_k(axis, v_lo)
        }
    };
    let mut running = 0.0;
    let mut l1 = 0.0;
    for j in (j_lo..j_hi).rev() {
        let v_lo = j as f64 * dv;
        let v_hi = v_lo + dv;
        let r = (chi(ub, v_lo, dv) - chi(ua, v_lo, dv)) * dv
            + lambda * (phi(wr, v_lo, v_hi) - phi(wl, v_lo, v_hi));
        acc[j] += (running + 0.5 * r) * scale;
        running += r;
        l1 += r.abs();
    }
    ColumnResult {
        bottom: running,
        l1,
    }
}

struct StepAccumulator {
    acc: Vec<f64>,
    max_bottom: f64,
    bottom_violation: Option<String>,
    l1: f64,
}

#[allow(clippy::too_many_arguments)]
fn step_residuals(
    flux: &Flux,
    spec: &GridSpec,
    dt: f64,
    u_from: &[f64],
    u_to: &[f64],
    nv: usize,
    dv: f64,
    sign: f64,
    st: &mut StepAccumulator,
) -> Result<()> {
    let plan = stages(spec.d, dt);
    let n = spec.n;
    let lines = if spec.d == 1 { 1 } else { n };
    let vol = spec.cell_volume();
    let mut u_a = u_from.to_vec();
    for (s, &(axis, h)) in plan.iter().enumerate() {
        let (computed, states) = sweep(flux, spec, axis, h, &u_a)?;
        let u_b: Vec<f64> = if s + 1 == plan.len() {
            u_to.to_vec()
        } else {
            computed
        };
        let lambda = h / spec.dx(axis);
        let (stride, line_step) = if axis == 0 { (1, n) } else { (n, 1) };
        for line in 0..lines {
            let stl = &states[line * (n + 1)..(line + 1) * (n + 1)];
            for i in 0..n {
                let cell = line * line_step + i * stride;
                let res = column(
                    flux,
                    axis,
                    lambda,
                    u_a[cell],
                    u_b[cell],
                    stl[i],
                    stl[i + 1],
                    dv,
                    nv,
                    sign * vol * dv,
                    &mut st.acc[cell * nv..(cell + 1) * nv],
                );
                st.l1 += res.l1;
                let tol = 1e-8 * res.l1 + 256.0 * f64::EPSILON * dv * (1.0 + flux.u_max);
                st.max_bottom = st.max_bottom.max(res.bottom.abs());
                if res.bottom.abs() > tol && st.bottom_violation.is_none() {
                    st.bottom_violation = Some(format!(
                        "column sum of the kinetic residual is {:.3e} at cell {cell} (l1 {:.3e})",
                        res.bottom, res.l1
                    ));
                }
            }
        }
        u_a = u_b;
    }
    Ok(())
}

pub fn extract_kinetic_measure(sol: &Solution, opts: ExtractOptions) -> Result<KineticMeasure> {
    if sol.slices.len() < 2 {
        return Err(Error::Parameter("need at least two time slices".into()));
    }
    if opts.nv == 0 {
        return Err(Error::Parameter("nv must be positive".into()));
    }
    let spec = &sol.spec;
    let nc = spec.ncells();
    let nv = opts.nv;
    let dv = sol.flux.u_max / nv as f64;
    let nt = sol.slices.len() - 1;
    let mut km = KineticMeasure {
        spec: spec.clone(),
        nv,
        dv,
        t0: sol.t0,
        dt: sol.dt,
        nt,
        nu: vec![0.0; nt * nc],
        mu: Vec::new(),
        mu_signed_total: 0.0,
        mu_abs_total: 0.0,
        max_bottom_residual: 0.0,
        residual_l1: 0.0,
    };
    // (time cell, slice from, slice to, flux, sign)
    let backward = sol.flux.negated("backward");
    let mut jobs: Vec<(usize, usize, usize, &Flux, f64)> = Vec::with_capacity(nt);
    match sol.kind {
        SolutionKind::Quasi => {
            let o = sol.origin_index();
            for m in 0..o {
                // τ-step from t = -m dt to -(m+1) dt under the backward flux;
                // the signed measure flips under t ↦ -t.
                jobs.push((o - m - 1, o - m, o - m - 1, &backward, -1.0));
            }
            for k in o..nt {
                jobs.push((k, k, k + 1, &sol.flux, 1.0));
            }
        }
        _ => {
            for k in 0..nt {
                jobs.push((k, k, k + 1, &sol.flux, 1.0));
            }
        }
    }
    let mut st = StepAccumulator {
        acc: vec![0.0; nc * nv],
        max_bottom: 0.0,
        bottom_violation: None,
        l1: 0.0,
    };
    for (tc, from, to, flux, sign) in jobs {
        st.acc.iter_mut().for_each(|a| *a = 0.0);
        step_residuals(
            flux,
            spec,
            sol.dt,
            &sol.slices[from],
            &sol.slices[to],
            nv,
            dv,
            sign,
            &mut st,
        )?;
        for cell in 0..nc {
            let col = &st.acc[cell * nv..(cell + 1) * nv];
            let mut nu = 0.0;
            for (j, &w) in col.iter().enumerate() {
                if w != 0.0 {
                    nu += w.abs();
                    km.mu_signed_total += w;
                    if opts.keep_mu {
                        km.mu.push(MuCell {
                            t: tc as u32,
                            cell: cell as u32,
                            v: j as u32,
                            w,
                        });
                    }
                }
            }
            km.nu[tc * nc + cell] = nu;
            km.mu_abs_total += nu;
        }
    }
    km.max_bottom_residual = st.max_bottom;
    km.residual_l1 = st.l1;
    if let Some(msg) = st.bottom_violation {
        return Err(Error::Consistency(msg));
    }
    Ok(km)
}

impl KineticMeasure {
    pub fn ncells(&self) -> usize {
        self.spec.ncells()
    }

    pub fn nu_total(&self) -> f64 {
        self.nu.iter().sum()
    }

    pub fn nu_per_time(&self) -> Vec<f64> {
        self.nu
            .chunks(self.ncells())
            .map(|c| c.iter().sum())
            .collect()
    }

    fn time_weights(&self, ta: f64, tb: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if tb <= ta {
            return out;
        }
        let k0 = (((ta - self.t0) / self.dt).floor().max(0.0) as usize).min(self.nt);
        let k1 = (((tb - self.t0) / self.dt).ceil().max(0.0) as usize).min(self.nt);
        for k in k0..k1 {
            let a = self.t0 + k as f64 * self.dt;
            let mut frac = interval_overlap(a, a + self.dt, ta, tb) / self.dt;
            // Snap round-off at aligned window ends.
            if frac > 1.0 - 1e-9 {
                frac = 1.0;
            } else if frac < 1e-9 {
                continue;
            }
            out.push((k, frac));
        }
        out
    }

    /// `ν((ta, tb) × ℝ^d)`.
    pub fn nu_window(&self, ta: f64, tb: f64) -> f64 {
        let nc = self.ncells();
        self.time_weights(ta, tb)
            .into_iter()
            .map(|(k, f)| f * self.nu[k * nc..(k + 1) * nc].iter().sum::<f64>())
            .sum()
    }

    /// `ν((ta, tb) × B_r(x))`, with exact spatial cell overlaps.
    pub fn nu_ball(&self, ta: f64, tb: f64, x: Vec2, r: f64) -> f64 {
        let nc = self.ncells();
        let spatial = spatial_ball_weights(&self.spec, x, r);
        self.time_weights(ta, tb)
            .into_iter()
            .map(|(k, f)| {
                f * spatial
                    .iter()
                    .map(|&(c, w)| w * self.nu[k * nc + c])
                    .sum::<f64>()
            })
            .sum()
    }

    /// `ν` as a density on `(t, x)` (d = 1): axis 0 is time.
    pub fn nu_spacetime(&self) -> Result<GridFunction> {
        if self.spec.d != 1 {
            return Err(Error::Parameter("space-time ν needs d = 1".into()));
        }
        let n = self.spec.n;
        let dx = self.spec.dx(0);
        let mut vals = vec![0.0; self.nt * n];
        for k in 0..self.nt {
            for i in 0..n {
                vals[k + self.nt * i] = self.nu[k * n + i] / (self.dt * dx);
            }
        }
        GridFunction::new(
            2,
            [self.t0, self.spec.lo[0]],
            [self.dt, dx],
            [self.nt, n],
            vals,
        )
    }
}

/// `(cell, |B_r(x) ∩ cell| / |cell|)` for cells meeting the ball.
pub fn spatial_ball_weights(spec: &GridSpec, x: Vec2, r: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let h0 = spec.dx(0);
    let range = |axis: usize| {
        let h = spec.dx(axis);
        let a = (((x[axis] - r - spec.lo[axis]) / h).floor().max(0.0) as usize).min(spec.n);
        let b = (((x[axis] + r - spec.lo[axis]) / h).ceil().max(0.0) as usize).min(spec.n);
        (a, b)
    };
    let (a0, b0) = range(0);
    if spec.d == 1 {
        for i in a0..b0 {
            let lo = spec.lo[0] + i as f64 * h0;
            let w = interval_overlap(lo, lo + h0, x[0] - r, x[0] + r) / h0;
            if w > 0.0 {
                out.push((i, w));
            }
        }
    } else {
        let h1 = spec.dx(1);
        let (a1, b1) = range(1);
        for j in a1..b1 {
            let y0 = spec.lo[1] + j as f64 * h1;
            for i in a0..b0 {
                let x0 = spec.lo[0] + i as f64 * h0;
                let w = disk_rect_area(x, r, x0, x0 + h0, y0, y0 + h1) / (h0 * h1);
                if w > 0.0 {
                    out.push((i + spec.n * j, w));
                }
            }
        }
    }
    out
}

/// `ψ_{a,b}`: 1 on `[0, a]`, 0 beyond `a + b`, cubic smoothstep between;
/// `|ψ′| ≤ 3/(2b)`.
pub fn ramp(a: f64, b: f64, t: f64) -> f64 {
    if t <= a {
        1.0
    } else if t >= a + b {
        0.0
    } else {
        let s = (t - a) / b;
        1.0 - s * s * (3.0 - 2.0 * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpTestFunction {
    pub center_x: Vec2,
    pub center_v: f64,
    pub r: f64,
    pub r_prime: f64,
    pub dv: f64,
    pub v_prime: f64,
    pub amplitude: f64,
}

impl BumpTestFunction {
    pub fn eval(&self, x: Vec2, v: f64) -> f64 {
        let dx = ((x[0] - self.center_x[0]).powi(2) + (x[1] - self.center_x[1]).powi(2)).sqrt();
        self.amplitude
            * ramp(self.r, self.r_prime, dx)
            * ramp(
                0.5 * self.dv,
                self.v_prime,
                (v - self.center_v - 0.5 * self.dv).abs(),
            )
    }

    pub fn sup_dv(&self) -> f64 {
        self.amplitude.abs() * 1.5 / self.v_prime
    }

    pub fn sup_dx(&self) -> f64 {
        self.amplitude.abs() * 1.5 / self.r_prime
    }

    pub fn lipschitz(&self) -> f64 {
        self.sup_dv().hypot(self.sup_dx())
    }

    pub fn support_radius(&self) -> f64 {
        self.r + self.r_prime
    }

    pub fn v_support(&self) -> (f64, f64) {
        (
            self.center_v - self.v_prime,
            self.center_v + self.dv + self.v_prime,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakEstimate {
    pub t: f64,
    pub s_bar: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub nu_ball: f64,
    pub eps_grid: f64,
    pub holds: bool,
}

/// Time-dependent weak estimate: pairs `φ` with
/// `χ_{E_{u(t+s̄)}} − χ_{FT(E_{u(t)}, s̄)}` and compares against
/// `(‖∂_vφ‖ + s̄‖f″‖‖∇_xφ‖)·ν((t, t+s̄) × B_{R+‖f′‖s̄}(x̃))`.
pub fn weak_estimate_check(
    sol: &Solution,
    kin: &KineticMeasure,
    t: f64,
    s_bar: f64,
    phi: &BumpTestFunction,
    nv: usize,
) -> Result<WeakEstimate> {
    let flux = &sol.flux;
    let spec = &sol.spec;
    let big_r = phi.support_radius();
    for k in 0..spec.d {
        if phi.center_x[k] - big_r < spec.lo[k] || phi.center_x[k] + big_r > spec.hi[k] {
            return Err(Error::Runtime(
                "test-function support escapes the domain".into(),
            ));
        }
    }
    if !(s_bar >= 0.0) {
        return Err(Error::Parameter(format!("negative s_bar {s_bar}")));
    }
    let i0 = sol.slice_index(t)?;
    let i1 = sol.slice_index(t + s_bar)?;
    let mass = sol.mass[i0];
    let eps_grid = 10.0 * spec.dx(0) * phi.lipschitz() * mass;
    if phi.amplitude == 0.0 || s_bar == 0.0 {
        let rhs = if s_bar == 0.0 {
            0.0
        } else {
            kin.nu_ball(t, t + s_bar, phi.center_x, big_r + flux.sup_fp() * s_bar) * phi.sup_dv()
        };
        let rhs = if phi.amplitude == 0.0 { 0.0 } else { rhs };
        return Ok(WeakEstimate {
            t,
            s_bar,
            lhs: 0.0,
            rhs,
            slack: rhs,
            nu_ball: 0.0,
            eps_grid,
            holds: true,
        });
    }
    // mass leaving an open domain cannot reach the ball, whose transport
    // margin lies inside the domain
    let before = KineticSlice::from_solution(sol, i0, nv).free_transport_clipped(flux, s_bar)?;
    let after = KineticSlice::from_solution(sol, i1, nv);
    let dv = after.dv;
    let vol = spec.cell_volume() * dv;
    let (va, vb) = phi.v_support();
    let j0 = ((va / dv).floor().max(0.0) as usize).min(nv);
    let j1 = ((vb / dv).ceil().max(0.0) as usize).min(nv);
    let mut lhs = 0.0;
    for (cell, _) in spatial_ball_weights(spec, phi.center_x, big_r) {
        let x = spec.cell_center(cell);
        for j in j0..j1 {
            let diff = after.fractions[cell * nv + j] - before.fractions[cell * nv + j];
            if diff != 0.0 {
                lhs += phi.eval(x, (j as f64 + 0.5) * dv) * diff * vol;
            }
        }
    }
    let nu_ball = kin.nu_ball(t, t + s_bar, phi.center_x, big_r + flux.sup_fp() * s_bar);
    let rhs = (phi.sup_dv() + s_bar * flux.sup_fpp() * phi.sup_dx()) * nu_ball;
    let slack = rhs - lhs;
    Ok(WeakEstimate {
        t,
        s_bar,
        lhs,
        rhs,
        slack,
        nu_ball,
        eps_grid,
        holds: slack >= -eps_grid,
    })
}

/// Output of the dissipation-cylinder construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cylinder {
    pub x_tilde: Vec2,
    pub v_tilde: f64,
    pub a_tilde: f64,
    pub dv: f64,
    pub lower_bound: f64,
    pub measured_gap: f64,
    pub hbar: f64,
    pub y1: Vec2,
    pub y2: Vec2,
    pub vbar: f64,
    pub l: usize,
    pub c1: f64,
    pub chain: Vec<Vec2>,
    pub selection: BasisSelection,
}

/// `v ↦ m_r(x, v)` for a fixed centre, as cell values sorted increasingly
/// with suffix sums of the overlap measures.
struct SublevelProfile {
    values: Vec<f64>,
    suffix: Vec<f64>,
}

impl SublevelProfile {
    fn new(u: &GridFunction, x: Vec2, r: f64) -> SublevelProfile {
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        u.for_each_overlap(x, r, |c, a| pairs.push((u.values[c], a)));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut suffix = vec![0.0; pairs.len() + 1];
        for k in (0..pairs.len()).rev() {
            suffix[k] = suffix[k + 1] + pairs[k].1;
        }
        SublevelProfile {
            values: pairs.into_iter().map(|p| p.0).collect(),
            suffix,
        }
    }

    /// `𝓛^d({y ∈ B_r(x) : u(y) > v})`.
    fn m(&self, v: f64) -> f64 {
        let k = self.values.partition_point(|&u| u <= v);
        self.suffix[k]
    }

    /// `∫_a^b m(v) dv`.
    fn integral(&self, a: f64, b: f64) -> f64 {
        let mut s = 0.0;
        for (k, &u) in self.values.iter().enumerate() {
            let w = self.suffix[k] - self.suffix[k + 1];
            s += w * (u - a).clamp(0.0, b - a);
        }
        s
    }
}

fn cell_ball_overlap(u: &GridFunction, c: usize, x: Vec2, r: f64) -> f64 {
    if u.d == 1 {
        let lo = u.lo[0] + c as f64 * u.h[0];
        interval_overlap(lo, lo + u.h[0], x[0] - r, x[0] + r)
    } else {
        let (i, j) = (c % u.n[0], c / u.n[0]);
        let x0 = u.lo[0] + i as f64 * u.h[0];
        let y0 = u.lo[1] + j as f64 * u.h[1];
        disk_rect_area(x, r, x0, x0 + u.h[0], y0, y0 + u.h[1])
    }
}

pub fn find_dissipation_cylinder(
    u: &GridFunction,
    x_bar: Vec2,
    r: f64,
    flux: &Flux,
    cert: &NonlinearityCertificate,
) -> Result<Cylinder> {
    if u.d != flux.d {
        return Err(Error::Parameter("grid and flux dimensions differ".into()));
    }
    let hb = oscillation_hbar(u, x_bar, r, 16)?;
    let hbar = hb.hbar;
    if !(hbar > 0.0) {
        return Err(Error::Degenerate("no oscillation: h_r = 0".into()));
    }
    let d = flux.d;
    let df = d as f64;
    let ball = ball_volume(d, r);
    let (y1, y2) = (hb.y1, hb.y2);
    let p1 = SublevelProfile::new(u, y1, r);
    let p2 = SublevelProfile::new(u, y2, r);
    // m(y1, v + h) - m(y2, v) is right-continuous and piecewise constant.
    let v_top = flux.u_max - hbar;
    let mut cands: Vec<f64> = vec![0.0];
    cands.extend(
        p1.values
            .iter()
            .map(|&x| x - hbar)
            .filter(|&x| x > 0.0 && x <= v_top),
    );
    cands.extend(p2.values.iter().cloned().filter(|&x| x > 0.0 && x <= v_top));
    let mut vbar = 0.0;
    let mut best = f64::NEG_INFINITY;
    for &v in &cands {
        let g = p1.m(v + hbar) - p2.m(v);
        if g > best || (g == best && v < vbar) {
            best = g;
            vbar = v;
        }
    }
    if best < hbar * ball * (1.0 - 1e-9) {
        return Err(Error::Resolution(format!(
            "no vbar with m(y1, vbar + h) - m(y2, vbar) >= h|B_r| (best {best:.3e}, need {:.3e})",
            hbar * ball
        )));
    }
    let a = [y1[0] - y2[0], y1[1] - y2[1]];
    let sel = select_basis(flux, cert, vbar, hbar.min(flux.u_max - vbar), a)?;
    let mut chain = vec![y2];
    for i in 0..d {
        let fp = flux.fp(sel.v_points[i]);
        let prev = chain[i];
        chain.push([
            prev[0] + sel.coefficients[i] * fp[0],
            prev[1] + sel.coefficients[i] * fp[1],
        ]);
    }
    let mut vs = vec![vbar];
    vs.extend(sel.v_points.iter().cloned());
    vs.push(vbar + hbar);
    let mut l = 1;
    let mut best_l = f64::NEG_INFINITY;
    for i in 1..=d {
        let gi = SublevelProfile::new(u, chain[i], r).m(vs[i + 1])
            - SublevelProfile::new(u, chain[i - 1], r).m(vs[i]);
        if gi > best_l {
            best_l = gi;
            l = i;
        }
    }
    if best_l < hbar * ball / df * (1.0 - 1e-9) {
        return Err(Error::Resolution(format!(
            "no chain link with gain >= h|B_r|/d (best {best_l:.3e})"
        )));
    }
    let c_d = 2.0 * omega(d - 1);
    let c1 = omega(d) / (8.0 * df * c_d * sel.bound_ctilde * flux.sup_fpp());
    let dv = c1 * hbar.powf(df / cert.alpha + 1.0);
    let x_tilde = chain[l];
    let v_tilde = vs[l];
    let a_tilde = sel.coefficients[l - 1];
    let lower_bound = hbar * ball * dv / (2.0 * df);
    let measured_gap = measure_gap(u, x_tilde, v_tilde, a_tilde, dv, r, flux);
    Ok(Cylinder {
        x_tilde,
        v_tilde,
        a_tilde,
        dv,
        lower_bound,
        measured_gap,
        hbar,
        y1,
        y2,
        vbar,
        l,
        c1,
        chain,
        selection: sel,
    })
}

/// `𝓛^{d+1}(𝒞 ∩ E_u) − 𝓛^{d+1}(FT(E_u, a) ∩ 𝒞)` for
/// `𝒞 = B_r(x) × [v0, v0 + dv]`.
fn measure_gap(u: &GridFunction, x: Vec2, v0: f64, a: f64, dv: f64, r: f64, flux: &Flux) -> f64 {
    let inside = SublevelProfile::new(u, x, r).integral(v0, v0 + dv);
    let centre = |v: f64| {
        let fp = flux.fp(v);
        [x[0] - fp[0] * a, x[1] - fp[1] * a]
    };
    let (ca, cb) = (centre(v0), centre(v0 + dv));
    let mid = [0.5 * (ca[0] + cb[0]), 0.5 * (ca[1] + cb[1])];
    let sweep_r = r + 0.5 * ((ca[0] - cb[0]).hypot(ca[1] - cb[1])) + flux.sup_fpp() * a.abs() * dv;
    let mut cells: Vec<(usize, f64)> = Vec::new();
    u.for_each_overlap(mid, sweep_r, |c, _| cells.push((c, u.values[c])));
    // Split [v0, v0 + dv] where the indicator set changes.
    let mut knots = vec![v0, v0 + dv];
    knots.extend(cells.iter().map(|c| c.1).filter(|&w| w > v0 && w < v0 + dv));
    knots.sort_by(|p, q| p.partial_cmp(q).unwrap());
    knots.dedup();
    let mut moved = 0.0;
    for k in knots.windows(2) {
        let (lo, hi) = (k[0], k[1]);
        let panels = 32;
        for p in 0..panels {
            let a0 = lo + (hi - lo) * p as f64 / panels as f64;
            let b0 = lo + (hi - lo) * (p + 1) as f64 / panels as f64;
            moved += crate::solver::gauss8(a0, b0, |v| {
                let c = centre(v);
                cells
                    .iter()
                    .filter(|(_, w)| *w > v)
                    .map(|&(cell, _)| cell_ball_overlap(u, cell, c, r))
                    .sum()
            });
        }
    }
    inside - moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::fixtures;

    #[test]
    fn chi_examples() {
        assert_eq!(chi_fraction(0.5, 0.25, 0.75).unwrap(), 0.5);
        assert_eq!(chi_fraction(0.0, 0.1, 0.2).unwrap(), 0.0);
        assert_eq!(chi_fraction(1.0, 0.0, 0.5).unwrap(), 1.0);
        assert!(chi_fraction(1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn atom_transport() {
        let m = DiscreteMeasure::new(
            1,
            vec![Atom {
                x: [0.0, 0.0],
                v: 0.5,
                w: 1.0,
            }],
        )
        .unwrap();
        let t = m.free_transport(&Flux::burgers(), 2.0).unwrap();
        assert_eq!(t.atoms[0].x[0], 1.0);
        assert_eq!(t.total_mass(), 1.0);
    }

    #[test]
    fn hat_integral_sums_to_length() {
        let h = 0.1;
        let mut s = 0.0;
        for m in -3..4 {
            let base = m as f64 * h;
            s += hat_integral(base + 0.013, base + 0.171, 0.37, h);
        }
        assert!((s - h * 0.37).abs() < 1e-15);
    }

    #[test]
    fn sheared_square() {
        // Uniform unit square, Burgers, s = 1: image is {x - v ∈ [0, 1]}.
        let n = 64;
        let spec = GridSpec::new_1d(-1.0, 3.0, n * 4, 1.0, Boundary::Zero);
        let u: Vec<f64> = (0..4 * n)
            .map(|i| if (n..2 * n).contains(&i) { 1.0 } else { 0.0 })
            .collect();
        let s = KineticSlice::from_values(0.0, &spec, &u, n, 1.0);
        let t = s.free_transport(&Flux::burgers(), 1.0).unwrap();
        assert!((t.mass() - s.mass()).abs() < 1e-12);
        // row j has centre v = (j+1/2)/n; its image occupies [v, 1 + v].
        let dx = spec.dx(0);
        for j in [0usize, 17, 40, 63] {
            let v = (j as f64 + 0.5) / n as f64;
            let x = 0.5 + v;
            let cell = ((x - spec.lo[0]) / dx) as usize;
            assert!(t.fractions[cell * n + j] > 0.99);
            let outside = ((1.1 + v - spec.lo[0]) / dx) as usize + 1;
            assert_eq!(t.fractions[outside * n + j], 0.0);
        }
    }

    #[test]
    fn constant_state_has_no_defect() {
        let sol = fixtures::constant_periodic(32).unwrap();
        let k = extract_kinetic_measure(&sol, ExtractOptions::default()).unwrap();
        assert_eq!(k.mu_abs_total, 0.0);
        assert!(k.mu.is_empty());
    }

    #[test]
    fn non_scheme_data_is_rejected() {
        let spec = GridSpec::new_1d(-1.0, 2.0, 64, 1.0, Boundary::Zero);
        let sol = crate::solver::exact_riemann_solution(1.0, 0.0, -0.5, &spec).unwrap();
        let err = extract_kinetic_measure(&sol, ExtractOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
    }

    #[test]
    fn zero_test_function() {
        let sol = fixtures::shock(64).unwrap();
        let k = extract_kinetic_measure(&sol, ExtractOptions::default()).unwrap();
        let phi = BumpTestFunction {
            center_x: [0.25, 0.0],
            center_v: 0.3,
            r: 0.1,
            r_prime: 0.05,
            dv: 0.1,
            v_prime: 0.1,
            amplitude: 0.0,
        };
        let w = weak_estimate_check(&sol, &k, 0.5, 0.125, &phi, 64).unwrap();
        assert_eq!((w.lhs, w.rhs, w.slack), (0.0, 0.0, 0.0));
        let phi = BumpTestFunction {
            amplitude: 1.0,
            ..phi
        };
        let w = weak_estimate_check(&sol, &k, 0.5, 0.0, &phi, 64).unwrap();
        assert_eq!((w.lhs, w.rhs), (0.0, 0.0));
    }

    #[test]
    fn constant_cylinder_is_degenerate() {
        let g = GridFunction::new(1, [0.0, 0.0], [0.01, 1.0], [200, 1], vec![0.4; 200]).unwrap();
        let f = Flux::burgers();
        let cert = crate::flux::estimate_nonlinearity(&f, 1.0, 1.0, 1, &[0.1]).unwrap();
        let err = find_dissipation_cylinder(&g, [1.0, 0.0], 0.1, &f, &cert).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }
}

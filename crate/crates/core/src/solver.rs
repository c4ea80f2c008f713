//! Godunov finite-volume solutions, exact Burgers Riemann solutions and the
//! glued forward/backward quasi-solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{Flux, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero ghost state; mass crossing the boundary is an error.
    Zero,
    /// Zero-gradient ghost state.
    Outflow,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub lo: Vec2,
    pub hi: Vec2,
    pub n: usize,
    pub t_final: f64,
    pub cfl: f64,
    pub boundary: Boundary,
    /// Step counts are rounded up to a multiple of this, so that dyadic
    /// times `k·2^{-m}·T` with `2^m | align` fall on slices.
    pub align: usize,
    /// Explicit step count; must satisfy the CFL condition.
    pub t_steps: Option<usize>,
}

impl GridSpec {
    pub fn new_1d(lo: f64, hi: f64, n: usize, t_final: f64, boundary: Boundary) -> GridSpec {
        GridSpec {
            d: 1,
            lo: [lo, 0.0],
            hi: [hi, 1.0],
            n,
            t_final,
            cfl: 0.9,
            boundary,
            align: 64,
            t_steps: None,
        }
    }

    pub fn new_2d(lo: Vec2, hi: Vec2, n: usize, t_final: f64, boundary: Boundary) -> GridSpec {
        GridSpec {
            d: 2,
            lo,
            hi,
            n,
            t_final,
            cfl: 0.9,
            boundary,
            align: 64,
            t_steps: None,
        }
    }

    pub fn dx(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.n as f64
    }

    pub fn ncells(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.d).map(|k| self.dx(k)).product()
    }

    /// Multi-index `(i0, i1)` of a flat cell index.
    pub fn cell_ij(&self, idx: usize) -> (usize, usize) {
        if self.d == 1 {
            (idx, 0)
        } else {
            (idx % self.n, idx / self.n)
        }
    }

    pub fn cell_center(&self, idx: usize) -> Vec2 {
        let (i, j) = self.cell_ij(idx);
        let mut c = [self.lo[0] + (i as f64 + 0.5) * self.dx(0), 0.0];
        if self.d == 2 {
            c[1] = self.lo[1] + (j as f64 + 0.5) * self.dx(1);
        }
        c
    }

    pub fn validate(&self, flux: &Flux) -> Result<()> {
        if self.d != flux.d {
            return Err(Error::Configuration(format!(
                "grid dimension {} does not match flux dimension {}",
                self.d, flux.d
            )));
        }
        if self.n < 8 {
            return Err(Error::Configuration(format!("N = {} < 8", self.n)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Configuration(format!(
                "cfl = {} outside (0, 1]",
                self.cfl
            )));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::Configuration(format!(
                "T = {} must be positive",
                self.t_final
            )));
        }
        for k in 0..self.d {
            if !(self.hi[k] > self.lo[k]) {
                return Err(Error::Configuration(format!("empty domain along axis {k}")));
            }
        }
        if self.align == 0 {
            return Err(Error::Configuration("align must be positive".into()));
        }
        Ok(())
    }

    /// Number of time steps for `flux`, honoring CFL and alignment.
    pub fn steps_for(&self, flux: &Flux) -> Result<usize> {
        let mut rate: f64 = 0.0;
        for k in 0..self.d {
            rate = rate.max(flux.sup_fp_component(k) / self.dx(k));
        }
        if let Some(s) = self.t_steps {
            if s == 0 || self.t_final / s as f64 * rate > self.cfl * (1.0 + 1e-12) {
                return Err(Error::Configuration(format!(
                    "{s} steps violate the CFL condition dt·|f'| <= {}·dx",
                    self.cfl
                )));
            }
            return Ok(s);
        }
        let min_steps = (self.t_final * rate / self.cfl).ceil().max(1.0) as usize;
        Ok(min_steps.div_ceil(self.align) * self.align)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionKind {
    Entropy,
    /// Two-sided time `[-T, T]`: backward equation for `t < 0`.
    Quasi,
    ExactRiemann,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub spec: GridSpec,
    pub flux_id: String,
    pub flux: Flux,
    pub kind: SolutionKind,
    pub t0: f64,
    pub dt: f64,
    pub t_steps: usize,
    pub slices: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
}

impl Solution {
    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    /// Index of the slice at time `t`, which must be a slice time.
    pub fn slice_index(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if (x - k).abs() > 1e-7 || k < 0.0 || k as usize >= self.slices.len() {
            return Err(Error::Parameter(format!("t = {t} is not a slice time")));
        }
        Ok(k as usize)
    }

    /// Index of the `t = 0` slice (nonzero only for quasi-solutions).
    pub fn origin_index(&self) -> usize {
        if self.kind == SolutionKind::Quasi {
            self.t_steps
        } else {
            0
        }
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        &self.slices[n]
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
            / m0.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn mass_of(spec: &GridSpec, u: &[f64]) -> f64 {
    u.iter().sum::<f64>() * spec.cell_volume()
}

/// Exact entropy solution of Burgers' equation for a Riemann datum at the
/// origin.
pub fn riemann_burgers(ul: f64, ur: f64, t: f64, x: f64) -> f64 {
    if ul > ur {
        if x < 0.5 * (ul + ur) * t {
            ul
        } else {
            ur
        }
    } else if x <= ul * t {
        ul
    } else if x >= ur * t {
        ur
    } else {
        x / t
    }
}

/// `∫_{-∞}^{x}` of the Riemann solution minus the left state, relative to
/// the origin; used for exact cell averages.
fn riemann_primitive(ul: f64, ur: f64, t: f64, x: f64) -> f64 {
    // P(x) = ∫_0^x u(t, y) dy
    if t <= 0.0 || ul > ur {
        let s = 0.5 * (ul + ur) * t;
        return if x < s { ul * x } else { ul * s + ur * (x - s) };
    }
    let (a, b) = (ul * t, ur * t);
    let prim_at = |y: f64| -> f64 {
        // piecewise: ul on (-inf, a], y/t on (a, b), ur on [b, inf)
        let c1 = ul * y.min(a);
        let mid = if y > a {
            (y.min(b).powi(2) - a * a) / (2.0 * t)
        } else {
            0.0
        };
        let c3 = if y > b { ur * (y - b) } else { 0.0 };
        c1 + mid + c3
    };
    prim_at(x) - prim_at(0.0)
}

pub fn riemann_cell_average(ul: f64, ur: f64, x0: f64, t: f64, a: f64, b: f64) -> f64 {
    (riemann_primitive(ul, ur, t, b - x0) - riemann_primitive(ul, ur, t, a - x0)) / (b - a)
}

/// Sweep along one axis over `dt`. Returns updated values and the interface
/// states (`n + 1` per line, lines in order of the transverse index).
pub(crate) fn sweep(
    flux: &Flux,
    spec: &GridSpec,
    axis: usize,
    dt: f64,
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = spec.n;
    let lines = if spec.d == 1 { 1 } else { n };
    let (stride, line_step) = if axis == 0 { (1, n) } else { (n, 1) };
    let lambda = dt / spec.dx(axis);
    let mut out = vec![0.0; u.len()];
    let mut states = vec![0.0; lines * (n + 1)];
    for line in 0..lines {
        let base = line * line_step;
        let at = |i: usize| u[base + i * stride];
        let (gl, gr) = match spec.boundary {
            Boundary::Zero => (0.0, 0.0),
            Boundary::Outflow => (at(0), at(n - 1)),
            Boundary::Periodic => (at(n - 1), at(0)),
        };
        let st = &mut states[line * (n + 1)..(line + 1) * (n + 1)];
        st[0] = flux.godunov_state(axis, gl, at(0));
        for i in 1..n {
            st[i] = flux.godunov_state(axis, at(i - 1), at(i));
        }
        st[n] = flux.godunov_state(axis, at(n - 1), gr);
        // Values far below round-off creep one cell per step under the
        // upwind stencil; only report support that carries real mass.
        let wall = 1e-12 * flux.u_max;
        if spec.boundary == Boundary::Zero && (st[0].abs() > wall || st[n].abs() > wall) {
            return Err(Error::Runtime(format!(
                "solution support reaches the boundary along axis {axis}"
            )));
        }
        let mut f_prev = flux.f_k(axis, st[0]);
        for i in 0..n {
            let f_next = flux.f_k(axis, st[i + 1]);
            out[base + i * stride] = at(i) - lambda * (f_next - f_prev);
            f_prev = f_next;
        }
    }
    Ok((out, states))
}

/// Sub-steps `(axis, dt)` of one time step: a single sweep in d = 1,
/// Strang splitting in d = 2.
pub(crate) fn stages(d: usize, dt: f64) -> Vec<(usize, f64)> {
    if d == 1 {
        vec![(0, dt)]
    } else {
        vec![(0, 0.5 * dt), (1, dt), (0, 0.5 * dt)]
    }
}

fn check_initial(flux: &Flux, spec: &GridSpec, u0: &[f64]) -> Result<()> {
    if u0.len() != spec.ncells() {
        return Err(Error::Configuration(format!(
            "initial data has {} cells, grid has {}",
            u0.len(),
            spec.ncells()
        )));
    }
    if let Some(v) = u0.iter().find(|&&v| !(v >= 0.0 && v <= flux.u_max)) {
        return Err(Error::Domain(format!(
            "initial value {v} outside [0, {}]",
            flux.u_max
        )));
    }
    Ok(())
}

fn march(flux: &Flux, spec: &GridSpec, u0: &[f64], steps: usize, dt: f64) -> Result<Vec<Vec<f64>>> {
    let mut slices = Vec::with_capacity(steps + 1);
    slices.push(u0.to_vec());
    let plan = stages(spec.d, dt);
    for _ in 0..steps {
        let mut u = slices.last().unwrap().clone();
        for &(axis, h) in &plan {
            u = sweep(flux, spec, axis, h, &u)?.0;
        }
        slices.push(u);
    }
    Ok(slices)
}

pub fn solve_godunov(flux: &Flux, u0: &[f64], spec: &GridSpec) -> Result<Solution> {
    spec.validate(flux)?;
    check_initial(flux, spec, u0)?;
    let steps = spec.steps_for(flux)?;
    let dt = spec.t_final / steps as f64;
    let slices = march(flux, spec, u0, steps, dt)?;
    let mass = slices.iter().map(|u| mass_of(spec, u)).collect();
    Ok(Solution {
        spec: spec.clone(),
        flux_id: flux.id.clone(),
        flux: flux.clone(),
        kind: SolutionKind::Entropy,
        t0: 0.0,
        dt,
        t_steps: steps,
        slices,
        mass,
    })
}

/// Exact Burgers Riemann solution with the jump at `x0`, sampled as exact
/// cell averages on the time grid `spec` would use for Godunov.
pub fn exact_riemann_solution(ul: f64, ur: f64, x0: f64, spec: &GridSpec) -> Result<Solution> {
    let flux = Flux::burgers();
    spec.validate(&flux)?;
    let steps = spec.steps_for(&flux)?;
    let dt = spec.t_final / steps as f64;
    let dx = spec.dx(0);
    let slices: Vec<Vec<f64>> = (0..=steps)
        .map(|s| {
            let t = s as f64 * dt;
            (0..spec.n)
                .map(|i| {
                    let a = spec.lo[0] + i as f64 * dx;
                    riemann_cell_average(ul, ur, x0, t, a, a + dx)
                })
                .collect()
        })
        .collect();
    let mass = slices.iter().map(|u| mass_of(spec, u)).collect();
    Ok(Solution {
        spec: spec.clone(),
        flux_id: flux.id.clone(),
        flux,
        kind: SolutionKind::ExactRiemann,
        t0: 0.0,
        dt,
        t_steps: steps,
        slices,
        mass,
    })
}

/// Initial data with exact cell averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InitialData {
    /// `value` on the box `[lo, hi)`, zero elsewhere.
    Box {
        lo: Vec2,
        hi: Vec2,
        value: f64,
    },
    /// Linear interpolation between `(x, u)` knots, zero outside (d = 1).
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    Constant {
        value: f64,
    },
    /// Cell values given directly.
    Cells {
        values: Vec<f64>,
    },
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

impl InitialData {
    pub fn cell_averages(&self, spec: &GridSpec) -> Result<Vec<f64>> {
        let nc = spec.ncells();
        match self {
            InitialData::Constant { value } => Ok(vec![*value; nc]),
            InitialData::Cells { values } => {
                if values.len() != nc {
                    return Err(Error::Configuration(format!(
                        "{} cell values for {} cells",
                        values.len(),
                        nc
                    )));
                }
                Ok(values.clone())
            }
            InitialData::Box { lo, hi, value } => Ok((0..nc)
                .map(|idx| {
                    let c = spec.cell_center(idx);
                    let mut frac = 1.0;
                    for k in 0..spec.d {
                        let h = spec.dx(k);
                        frac *= overlap(c[k] - 0.5 * h, c[k] + 0.5 * h, lo[k], hi[k]) / h;
                    }
                    value * frac
                })
                .collect()),
            InitialData::PiecewiseLinear { knots } => {
                if spec.d != 1 {
                    return Err(Error::Configuration(
                        "piecewise-linear data is one-dimensional".into(),
                    ));
                }
                if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::Configuration(
                        "knots must be strictly increasing".into(),
                    ));
                }
                let dx = spec.dx(0);
                Ok((0..spec.n)
                    .map(|i| {
                        let a = spec.lo[0] + i as f64 * dx;
                        let b = a + dx;
                        let mut s = 0.0;
                        for w in knots.windows(2) {
                            let (x0, u0) = w[0];
                            let (x1, u1) = w[1];
                            let (l, r) = (a.max(x0), b.min(x1));
                            if r > l {
                                let slope = (u1 - u0) / (x1 - x0);
                                let ul = u0 + slope * (l - x0);
                                let ur = u0 + slope * (r - x0);
                                s += 0.5 * (ul + ur) * (r - l);
                            }
                        }
                        s / dx
                    })
                    .collect())
            }
        }
    }
}

pub mod fixtures {
    //! Named initial-value problems used across the toolkit.

    use super::*;

    /// Riemann datum `(1, 0)` for Burgers with unit mass: `u0 = 1` on
    /// `[-1, 0)`, domain `[-1, 2]`, `T = 1`.
    pub fn shock(n: usize) -> Result<Solution> {
        let spec = GridSpec::new_1d(-1.0, 2.0, n, 1.0, Boundary::Zero);
        let u0 = InitialData::Box {
            lo: [-1.0, 0.0],
            hi: [0.0, 1.0],
            value: 1.0,
        }
        .cell_averages(&spec)?;
        solve_godunov(&Flux::burgers(), &u0, &spec)
    }

    /// Burgers rarefaction datum with unit mass: `u0 = 1` on `[0, 0.2)`,
    /// then a linear ramp to zero on `[0.2, 1.8]`. The ramp steepens but does
    /// not break before `T = 1`.
    pub fn rarefaction(n: usize) -> Result<Solution> {
        let spec = GridSpec::new_1d(-0.5, 2.5, n, 1.0, Boundary::Zero);
        let u0 = InitialData::PiecewiseLinear {
            knots: vec![(0.0, 1.0), (0.2, 1.0), (1.8, 0.0)],
        }
        .cell_averages(&spec)?;
        solve_godunov(&Flux::burgers(), &u0, &spec)
    }

    /// `u ≡ 1/2` on the periodic interval `[0, 2]`.
    pub fn constant_periodic(n: usize) -> Result<Solution> {
        let spec = GridSpec::new_1d(0.0, 2.0, n, 1.0, Boundary::Periodic);
        solve_godunov(&Flux::burgers(), &vec![0.5; n], &spec)
    }

    /// Space-time Burgers box datum on the periodic square `[-1, 3]²`.
    pub fn box_2d(n: usize) -> Result<Solution> {
        let spec = GridSpec::new_2d([-1.0, -1.0], [3.0, 3.0], n, 0.5, Boundary::Periodic);
        let u0 = InitialData::Box {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
            value: 1.0,
        }
        .cell_averages(&spec)?;
        solve_godunov(&Flux::spacetime_burgers(), &u0, &spec)
    }
}

/// Affine rescaling of the glued example into `(0, 1)`.
pub const GLUED_SHIFT: f64 = 1.02;
pub const GLUED_SCALE: f64 = 2.04;

pub fn glued_u0(x: f64) -> f64 {
    (x.abs().ln().abs().ln()).sin()
}

/// Rescaled flux `g(w) = 1.02 (w - 1/2)²`, so that `g′(w)` equals the
/// original Burgers speed.
pub fn glued_flux() -> Flux {
    let a = GLUED_SCALE / 2.0;
    Flux::new("glued-burgers", 1, vec![vec![a * 0.25, -a, a]], 1.0).unwrap()
}

const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

pub(crate) fn gauss8(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    GAUSS8.iter().map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Two-sided glued solution on `[-T, T]`: forward entropy Burgers for
/// `t ≥ 0`, the backward equation for `t < 0`, values rescaled by
/// `w = (v + 1.02)/2.04`.
pub fn build_glued_example(spec: &GridSpec) -> Result<Solution> {
    if spec.d != 1 {
        return Err(Error::Configuration(
            "the glued example is one-dimensional".into(),
        ));
    }
    if spec.lo[0] > -0.5 || spec.hi[0] < 0.5 {
        return Err(Error::Configuration(format!(
            "domain [{}, {}] must contain [-1/2, 1/2]",
            spec.lo[0], spec.hi[0]
        )));
    }
    let flux = glued_flux();
    spec.validate(&flux)?;
    let dx = spec.dx(0);
    let w = |x: f64| {
        let v = glued_u0(x);
        if v.is_finite() {
            (v + GLUED_SHIFT) / GLUED_SCALE
        } else {
            f64::NAN
        }
    };
    let mut u0: Vec<f64> = (0..spec.n)
        .map(|i| {
            let a = spec.lo[0] + i as f64 * dx;
            // Eight sub-panels per cell resolve the oscillation down to the
            // cell scale; nodes never hit the singular points exactly.
            let h = dx / 8.0;
            (0..8)
                .map(|p| gauss8(a + p as f64 * h, a + (p + 1) as f64 * h, w))
                .sum::<f64>()
                / dx
        })
        .collect();
    // Clamp cells adjacent to the singular set to a defined neighbour.
    for i in 0..u0.len() {
        if !u0[i].is_finite() {
            let j = (0..u0.len())
                .filter(|&j| u0[j].is_finite())
                .min_by_key(|&j| (j as i64 - i as i64).abs())
                .ok_or_else(|| Error::Configuration("no defined cell in glued data".into()))?;
            u0[i] = u0[j];
        }
    }
    let steps = spec.steps_for(&flux)?;
    let dt = spec.t_final / steps as f64;
    let forward = march(&flux, spec, &u0, steps, dt)?;
    let backward = march(
        &flux.negated("glued-burgers-backward"),
        spec,
        &u0,
        steps,
        dt,
    )?;
    let mut slices: Vec<Vec<f64>> = backward.into_iter().skip(1).rev().collect();
    slices.extend(forward);
    let mass = slices.iter().map(|u| mass_of(spec, u)).collect();
    Ok(Solution {
        spec: spec.clone(),
        flux_id: flux.id.clone(),
        flux,
        kind: SolutionKind::Quasi,
        t0: -spec.t_final,
        dt,
        t_steps: steps,
        slices,
        mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riemann_examples() {
        assert_eq!(riemann_burgers(1.0, 0.0, 1.0, 0.49), 1.0);
        assert_eq!(riemann_burgers(1.0, 0.0, 1.0, 0.51), 0.0);
        assert_eq!(riemann_burgers(0.0, 1.0, 1.0, 0.5), 0.5);
        assert_eq!(riemann_burgers(0.3, 0.3, 2.0, -7.0), 0.3);
    }

    #[test]
    fn riemann_cell_average_matches_pointwise() {
        let avg = riemann_cell_average(0.0, 1.0, 0.0, 1.0, 0.2, 0.4);
        assert!((avg - 0.3).abs() < 1e-15);
        let avg = riemann_cell_average(1.0, 0.0, 0.0, 1.0, 0.4, 0.6);
        assert!((avg - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_data_stays_zero() {
        let spec = GridSpec::new_1d(0.0, 1.0, 16, 1.0, Boundary::Zero);
        let s = solve_godunov(&Flux::burgers(), &vec![0.0; 16], &spec).unwrap();
        assert!(s.slices.iter().flatten().all(|&u| u == 0.0));
    }

    #[test]
    fn cfl_override_checked() {
        let mut spec = GridSpec::new_1d(0.0, 1.0, 16, 1.0, Boundary::Zero);
        spec.t_steps = Some(2);
        let err = solve_godunov(&Flux::burgers(), &vec![0.0; 16], &spec).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn boundary_contact_is_reported() {
        let spec = GridSpec::new_1d(0.0, 1.0, 16, 1.0, Boundary::Zero);
        let err = solve_godunov(&Flux::burgers(), &vec![0.5; 16], &spec).unwrap_err();
        assert!(matches!(err, Error::Runtime(_)));
    }

    #[test]
    fn dyadic_times_are_slices() {
        let s = fixtures::shock(64).unwrap();
        assert_eq!(s.t_steps % 64, 0);
        assert!(s.slice_index(0.5).is_ok());
        assert!(s.slice_index(0.3 * s.dt).is_err());
    }

    #[test]
    fn glued_needs_big_domain() {
        let spec = GridSpec::new_1d(-0.3, 0.3, 64, 0.1, Boundary::Outflow);
        assert!(matches!(
            build_glued_example(&spec),
            Err(Error::Configuration(_))
        ));
    }
}

//! Polynomial fluxes `f: [0, u_max] → ℝ^d`, nonlinearity certificates and the
//! constructive basis selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

pub type Vec2 = [f64; 2];

/// Plain-text flux description: `flux = { id, d, coeffs = [[...],[...]], u_max }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSpec {
    pub id: String,
    pub d: usize,
    pub coeffs: Vec<Vec<f64>>,
    pub u_max: f64,
}

impl FluxSpec {
    pub fn build(&self) -> Result<Flux> {
        Flux::new(&self.id, self.d, self.coeffs.clone(), self.u_max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Flux {
    pub id: String,
    pub d: usize,
    pub components: Vec<Poly>,
    pub u_max: f64,
    #[serde(skip)]
    d1: Vec<Poly>,
    #[serde(skip)]
    d2: Vec<Poly>,
    /// Critical points of each component inside `(0, u_max)`.
    #[serde(skip)]
    crit: Vec<Vec<f64>>,
    #[serde(skip)]
    sup_d1: f64,
    #[serde(skip)]
    sup_d2: f64,
    #[serde(skip)]
    sup_d3: f64,
    #[serde(skip)]
    sup_d1_comp: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub f: Vec2,
    pub fp: Vec2,
    pub fpp: Vec2,
}

fn euclidean_sup(ps: &[Poly], u_max: f64) -> f64 {
    let sq = ps.iter().fold(Poly::zero(), |acc, p| acc.add(&p.mul(p)));
    sq.sup_abs(0.0, u_max).sqrt()
}

impl Flux {
    pub fn new(id: &str, d: usize, coeffs: Vec<Vec<f64>>, u_max: f64) -> Result<Flux> {
        if d != 1 && d != 2 {
            return Err(Error::Configuration(format!(
                "flux {id}: d = {d}, only 1 and 2 are supported"
            )));
        }
        if coeffs.len() != d {
            return Err(Error::Configuration(format!(
                "flux {id}: {} coefficient lists for d = {d}",
                coeffs.len()
            )));
        }
        if !(u_max > 0.0 && u_max.is_finite()) {
            return Err(Error::Configuration(format!(
                "flux {id}: u_max must be positive, got {u_max}"
            )));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Configuration(format!(
                "flux {id}: non-finite coefficient"
            )));
        }
        let components: Vec<Poly> = coeffs.into_iter().map(Poly::new).collect();
        let d1: Vec<Poly> = components.iter().map(Poly::derivative).collect();
        let d2: Vec<Poly> = d1.iter().map(Poly::derivative).collect();
        let d3: Vec<Poly> = d2.iter().map(Poly::derivative).collect();
        let crit = d1.iter().map(|p| p.roots_in(0.0, u_max)).collect();
        let sup_d1_comp = d1.iter().map(|p| p.sup_abs(0.0, u_max)).collect();
        Ok(Flux {
            id: id.to_string(),
            d,
            sup_d1: euclidean_sup(&d1, u_max),
            sup_d2: euclidean_sup(&d2, u_max),
            sup_d3: euclidean_sup(&d3, u_max),
            components,
            u_max,
            d1,
            d2,
            crit,
            sup_d1_comp,
        })
    }

    pub fn burgers() -> Flux {
        Flux::new("burgers", 1, vec![vec![0.0, 0.0, 0.5]], 1.0).unwrap()
    }

    /// `f(v) = (v, v²/2)`: Burgers in space-time coordinates.
    pub fn spacetime_burgers() -> Flux {
        Flux::new(
            "spacetime-burgers",
            2,
            vec![vec![0.0, 1.0], vec![0.0, 0.0, 0.5]],
            1.0,
        )
        .unwrap()
    }

    pub fn spec(&self) -> FluxSpec {
        FluxSpec {
            id: self.id.clone(),
            d: self.d,
            coeffs: self.components.iter().map(|p| p.c.clone()).collect(),
            u_max: self.u_max,
        }
    }

    /// The flux `-f`, which generates the time-reversed equation.
    pub fn negated(&self, id: &str) -> Flux {
        let coeffs = self.components.iter().map(|p| p.scale(-1.0).c).collect();
        Flux::new(id, self.d, coeffs, self.u_max).unwrap()
    }

    pub fn eval_derivatives(&self, v: f64) -> Result<Derivatives> {
        if !(v >= 0.0 && v <= self.u_max) {
            return Err(Error::Domain(format!(
                "v = {v} outside [0, {}]",
                self.u_max
            )));
        }
        let mut out = Derivatives {
            f: [0.0; 2],
            fp: [0.0; 2],
            fpp: [0.0; 2],
        };
        for k in 0..self.d {
            out.f[k] = self.components[k].eval(v);
            out.fp[k] = self.d1[k].eval(v);
            out.fpp[k] = self.d2[k].eval(v);
        }
        Ok(out)
    }

    #[inline]
    pub fn f_k(&self, k: usize, v: f64) -> f64 {
        self.components[k].eval(v)
    }

    #[inline]
    pub fn fp_k(&self, k: usize, v: f64) -> f64 {
        self.d1[k].eval(v)
    }

    #[inline]
    pub fn fp(&self, v: f64) -> Vec2 {
        let mut out = [0.0; 2];
        for k in 0..self.d {
            out[k] = self.d1[k].eval(v);
        }
        out
    }

    pub fn fpp(&self, v: f64) -> Vec2 {
        let mut out = [0.0; 2];
        for k in 0..self.d {
            out[k] = self.d2[k].eval(v);
        }
        out
    }

    pub fn derivative_poly(&self, k: usize) -> &Poly {
        &self.d1[k]
    }

    pub fn second_derivative_poly(&self, k: usize) -> &Poly {
        &self.d2[k]
    }

    /// `‖f′‖_∞` with the Euclidean norm on ℝ^d.
    pub fn sup_fp(&self) -> f64 {
        self.sup_d1
    }

    pub fn sup_fpp(&self) -> f64 {
        self.sup_d2
    }

    pub fn sup_fppp(&self) -> f64 {
        self.sup_d3
    }

    pub fn sup_fp_component(&self, k: usize) -> f64 {
        self.sup_d1_comp[k]
    }

    pub fn is_convex(&self) -> bool {
        self.d2
            .iter()
            .all(|p| p.min_max(0.0, self.u_max).0 .1 >= -1e-12)
    }

    /// Godunov interface state of component `k` for the Riemann datum
    /// `(ul, ur)`: the minimizer of `f_k` on `[ul, ur]` when `ul ≤ ur`, the
    /// maximizer on `[ur, ul]` otherwise.
    pub fn godunov_state(&self, k: usize, ul: f64, ur: f64) -> f64 {
        if ul == ur {
            return ul;
        }
        let p = &self.components[k];
        let (lo, hi) = if ul < ur { (ul, ur) } else { (ur, ul) };
        let want_min = ul < ur;
        let mut best_x = ul;
        let mut best = p.eval(ul);
        let better = |y: f64, b: f64| if want_min { y < b } else { y > b };
        let fr = p.eval(ur);
        if better(fr, best) {
            best = fr;
            best_x = ur;
        }
        for &c in &self.crit[k] {
            if c > lo && c < hi {
                let y = p.eval(c);
                if better(y, best) {
                    best = y;
                    best_x = c;
                }
            }
        }
        best_x
    }

    /// Entropy flux `q_k(v) = ∫_0^v η′(s) f_k′(s) ds` for a polynomial entropy.
    pub fn entropy_flux(&self, k: usize, eta: &Poly) -> Poly {
        eta.derivative().mul(&self.d1[k]).integral()
    }

    fn directional_derivative(&self, xi: Vec2) -> Poly {
        let mut p = Poly::zero();
        for k in 0..self.d {
            p = p.add(&self.d1[k].scale(xi[k]));
        }
        p
    }
}

/// One row of certificate evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub xi: Vec2,
    pub delta: f64,
    pub measure: f64,
    pub bound: f64,
}

/// Sublevel-set bound `𝓛¹{w ∈ [0,1] : |f′(u_max w)·ξ| < δ} ≤ C δ^α`, measured
/// in the rescaled variable `w = v/u_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityCertificate {
    pub flux_id: String,
    pub alpha: f64,
    pub c: f64,
    pub evidence: Vec<EvidenceRow>,
    pub pass: bool,
    pub u_max: f64,
}

impl NonlinearityCertificate {
    /// The constant in unscaled `v` units, `u_max · C`.
    pub fn c_v(&self) -> f64 {
        self.u_max * self.c
    }
}

pub fn directions(d: usize, n_directions: usize) -> Vec<Vec2> {
    if d == 1 {
        return vec![[1.0, 0.0]];
    }
    let n = n_directions.max(1);
    (0..n)
        .map(|k| {
            let th = std::f64::consts::PI * k as f64 / n as f64;
            [th.cos(), th.sin()]
        })
        .collect()
}

fn rescaled_directional(flux: &Flux, xi: Vec2) -> Poly {
    flux.directional_derivative(xi).rescale_arg(flux.u_max)
}

pub fn estimate_nonlinearity(
    flux: &Flux,
    alpha: f64,
    c: f64,
    n_directions: usize,
    deltas: &[f64],
) -> Result<NonlinearityCertificate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} outside (0, 1]")));
    }
    if !(c > 0.0) {
        return Err(Error::Parameter(format!("C = {c} must be positive")));
    }
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Parameter(
            "deltas must be nonempty and positive".into(),
        ));
    }
    let mut evidence = Vec::new();
    for xi in directions(flux.d, n_directions) {
        let p = rescaled_directional(flux, xi);
        for &delta in deltas {
            let measure = p.sublevel_measure(0.0, 1.0, delta);
            evidence.push(EvidenceRow {
                xi,
                delta,
                measure,
                bound: c * delta.powf(alpha),
            });
        }
    }
    let pass = evidence
        .iter()
        .all(|r| r.measure <= r.bound * (1.0 + 1e-12));
    Ok(NonlinearityCertificate {
        flux_id: flux.id.clone(),
        alpha,
        c,
        evidence,
        pass,
        u_max: flux.u_max,
    })
}

/// Smallest `C` consistent with the measured sublevel sets, over the given
/// directions and thresholds.
pub fn fitted_constant(flux: &Flux, alpha: f64, n_directions: usize, deltas: &[f64]) -> f64 {
    let mut c: f64 = 0.0;
    for xi in directions(flux.d, n_directions) {
        let p = rescaled_directional(flux, xi);
        for &delta in deltas {
            c = c.max(p.sublevel_measure(0.0, 1.0, delta) / delta.powf(alpha));
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSelection {
    pub v_points: Vec<f64>,
    pub xi_vectors: Vec<Vec2>,
    pub coefficients: Vec<f64>,
    pub delta: f64,
    /// `max_i c_i` from the recursion `c_i = 1 + ‖f′‖ Σ_{j<i} c_j`.
    pub c_bar: f64,
    pub bound_ctilde: f64,
    pub vbar: f64,
    pub hbar: f64,
}

/// Measured status of the three claimed properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimReport {
    pub residual: f64,
    pub min_spacing: f64,
    pub required_spacing: f64,
    pub max_coefficient: f64,
    pub coefficient_bound: f64,
    pub reconstruction_ok: bool,
    pub spacing_ok: bool,
    pub bound_ok: bool,
}

impl ClaimReport {
    pub fn all_ok(&self) -> bool {
        self.reconstruction_ok && self.spacing_ok && self.bound_ok
    }
}

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonal_unit(d: usize, span: &[Vec2]) -> Vec2 {
    let mut q: Vec<Vec2> = Vec::new();
    for &w in span {
        let mut r = w;
        for &b in &q {
            let s = dot(r, b);
            r = [r[0] - s * b[0], r[1] - s * b[1]];
        }
        let n = norm(r);
        if n > 0.0 {
            q.push([r[0] / n, r[1] / n]);
        }
    }
    let mut best = [0.0; 2];
    let mut best_n = -1.0;
    for k in 0..d {
        let mut r = [0.0; 2];
        r[k] = 1.0;
        for &b in &q {
            let s = dot(r, b);
            r = [r[0] - s * b[0], r[1] - s * b[1]];
        }
        let n = norm(r);
        if n > best_n + 1e-12 {
            best_n = n;
            best = [r[0] / n, r[1] / n];
        }
    }
    best
}

/// `(c̄, c̃)`: the recursion maximum `max_i c_i` with `c_i = 1 + ‖f′‖ Σ_{j<i} c_j`
/// and the coefficient constant in `|a_i| ≤ c̃ |a| / h̄^{d/α}`.
pub fn coefficient_constants(flux: &Flux, cert: &NonlinearityCertificate, hbar: f64) -> (f64, f64) {
    let d = flux.d;
    let df = d as f64;
    let c1 = cert.c_v().max(1.0);
    let delta = (hbar / (4.0 * df * c1)).powf(1.0 / cert.alpha);
    let mut cs: Vec<f64> = Vec::with_capacity(d);
    for _ in 0..d {
        let s: f64 = cs.iter().sum();
        cs.push(1.0 + flux.sup_fp() * s);
    }
    let c_bar = cs.iter().cloned().fold(0.0, f64::max);
    let mut ctilde = c_bar * (4.0 * df * c1).powf(df / cert.alpha);
    if delta > 1.0 {
        // |a_i| ≤ c_i|a|δ^{-i} is then dominated by δ^{-1}, not δ^{-d}.
        ctilde *= delta.powi(d as i32 - 1);
    }
    (c_bar, ctilde)
}

pub fn select_basis(
    flux: &Flux,
    cert: &NonlinearityCertificate,
    vbar: f64,
    hbar: f64,
    a: Vec2,
) -> Result<BasisSelection> {
    if !cert.pass {
        return Err(Error::Parameter(format!(
            "certificate for {} did not pass",
            cert.flux_id
        )));
    }
    if cert.flux_id != flux.id {
        return Err(Error::Parameter(format!(
            "certificate is for {}, flux is {}",
            cert.flux_id, flux.id
        )));
    }
    if !(hbar > 0.0) || !(vbar >= 0.0) || vbar + hbar > flux.u_max * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!(
            "need vbar >= 0, hbar > 0, vbar + hbar <= u_max; got vbar = {vbar}, hbar = {hbar}"
        )));
    }
    let d = flux.d;
    let df = d as f64;
    let width = hbar / (2.0 * df);
    let c1 = cert.c_v().max(1.0);
    let delta = (hbar / (4.0 * df * c1)).powf(1.0 / cert.alpha);
    let step = hbar / (64.0 * df);

    let mut v_points = Vec::with_capacity(d);
    let mut xi_vectors = Vec::with_capacity(d);
    let mut grads: Vec<Vec2> = Vec::with_capacity(d);
    for i in 0..d {
        let xi = if i == 0 {
            [1.0, 0.0]
        } else {
            orthogonal_unit(d, &grads)
        };
        // For i = 0 the test is |f′(v)| ≥ δ; otherwise |f′(v)·ξ_i| ≥ δ.
        let g = |v: f64| {
            let fp = flux.fp(v);
            let m = if i == 0 { norm(fp) } else { dot(fp, xi).abs() };
            m - delta
        };
        let lo = vbar + (2 * i) as f64 * width;
        let hi = lo + width;
        let n_scan = 32;
        let mut found = None;
        let mut prev = lo;
        for k in 0..=n_scan {
            let v = if k == n_scan {
                hi
            } else {
                lo + k as f64 * step
            };
            if g(v) >= 0.0 {
                if k == 0 {
                    found = Some(v);
                } else {
                    let (mut l, mut r) = (prev, v);
                    for _ in 0..80 {
                        let m = 0.5 * (l + r);
                        if m <= l || m >= r {
                            break;
                        }
                        if g(m) >= 0.0 {
                            r = m;
                        } else {
                            l = m;
                        }
                    }
                    found = Some(r);
                }
                break;
            }
            prev = v;
        }
        let v = found.ok_or_else(|| Error::Selection {
            interval: 2 * i + 1,
            detail: format!("no v in [{lo}, {hi}] with |f'(v)·xi| >= delta = {delta}"),
        })?;
        let fp = flux.fp(v);
        let xi = if i == 0 {
            let n = norm(fp);
            [fp[0] / n, fp[1] / n]
        } else {
            xi
        };
        v_points.push(v);
        xi_vectors.push(xi);
        grads.push(fp);
    }

    let solve = |rhs: Vec2| -> Vec<f64> {
        let mut coef = vec![0.0; d];
        for k in (0..d).rev() {
            let mut s = dot(rhs, xi_vectors[k]);
            for j in k + 1..d {
                s -= coef[j] * dot(grads[j], xi_vectors[k]);
            }
            coef[k] = s / dot(grads[k], xi_vectors[k]);
        }
        coef
    };
    let mut coefficients = solve(a);
    // One step of iterative refinement.
    let mut res = a;
    for (j, c) in coefficients.iter().enumerate() {
        res[0] -= c * grads[j][0];
        res[1] -= c * grads[j][1];
    }
    for (c, dc) in coefficients.iter_mut().zip(solve(res)) {
        *c += dc;
    }

    let (c_bar, bound_ctilde) = coefficient_constants(flux, cert, hbar);
    Ok(BasisSelection {
        v_points,
        xi_vectors,
        coefficients,
        delta,
        c_bar,
        bound_ctilde,
        vbar,
        hbar,
    })
}

impl BasisSelection {
    pub fn check(&self, flux: &Flux, alpha: f64, a: Vec2) -> ClaimReport {
        let d = flux.d;
        let mut recon = [0.0; 2];
        for (v, c) in self.v_points.iter().zip(&self.coefficients) {
            let fp = flux.fp(*v);
            recon[0] += c * fp[0];
            recon[1] += c * fp[1];
        }
        let residual = norm([recon[0] - a[0], recon[1] - a[1]]);
        let an = norm(a);
        let required_spacing = self.hbar / (2.0 * d as f64);
        let min_spacing = self
            .v_points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let max_coefficient = self
            .coefficients
            .iter()
            .map(|c| c.abs())
            .fold(0.0, f64::max);
        let coefficient_bound = self.bound_ctilde * an / self.hbar.powf(d as f64 / alpha);
        ClaimReport {
            residual,
            min_spacing,
            required_spacing,
            max_coefficient,
            coefficient_bound,
            reconstruction_ok: residual <= 1e-10 * an.max(f64::MIN_POSITIVE) || residual == 0.0,
            spacing_ok: d == 1 || min_spacing >= required_spacing * (1.0 - 1e-12),
            bound_ok: max_coefficient <= coefficient_bound * (1.0 + 1e-12),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burgers_derivatives() {
        let d = Flux::burgers().eval_derivatives(0.5).unwrap();
        assert_eq!((d.f[0], d.fp[0], d.fpp[0]), (0.125, 0.5, 1.0));
        assert!(Flux::burgers().eval_derivatives(1.5).is_err());
    }

    #[test]
    fn spacetime_burgers_derivatives() {
        let d = Flux::spacetime_burgers().eval_derivatives(1.0).unwrap();
        assert_eq!(d.f, [1.0, 0.5]);
        assert_eq!(d.fp, [1.0, 1.0]);
        assert_eq!(d.fpp, [0.0, 1.0]);
        assert!((Flux::spacetime_burgers().sup_fp() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn burgers_certificate() {
        let c = estimate_nonlinearity(&Flux::burgers(), 1.0, 1.0, 1, &[0.3]).unwrap();
        assert!((c.evidence[0].measure - 0.3).abs() < 1e-15);
        assert!(c.pass);
        assert!(estimate_nonlinearity(&Flux::burgers(), 1.5, 1.0, 1, &[0.3]).is_err());
    }

    #[test]
    fn saturated_sublevel() {
        let f = Flux::burgers();
        let c = estimate_nonlinearity(&f, 1.0, 1.0, 1, &[f.sup_fp() + 1.0]).unwrap();
        assert_eq!(c.evidence[0].measure, 1.0);
    }

    #[test]
    fn linear_flux_fails() {
        let f = Flux::new("lin", 2, vec![vec![0.0, 1.0], vec![0.0, 1.0]], 1.0).unwrap();
        let c = estimate_nonlinearity(&f, 1.0, 10.0, 4, &[0.01, 0.05]).unwrap();
        assert!(!c.pass);
    }

    #[test]
    fn burgers_selection_by_hand() {
        let f = Flux::burgers();
        let cert = estimate_nonlinearity(&f, 1.0, 1.0, 1, &[0.1, 0.3]).unwrap();
        let b = select_basis(&f, &cert, 0.0, 1.0, [1.0, 0.0]).unwrap();
        assert_eq!(b.delta, 0.25);
        assert!((b.v_points[0] - 0.25).abs() < 1e-15);
        assert!((b.coefficients[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs() {
        let f = Flux::spacetime_burgers();
        let c = fitted_constant(&f, 1.0, 64, &[0.01, 0.1, 0.5]);
        let cert = estimate_nonlinearity(&f, 1.0, 2.0 * c, 64, &[0.01, 0.1, 0.5]).unwrap();
        let b = select_basis(&f, &cert, 0.0, 1.0, [0.0, 0.0]).unwrap();
        assert_eq!(b.coefficients, vec![0.0, 0.0]);
        assert_eq!(b.v_points.len(), 2);
    }
}

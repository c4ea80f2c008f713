//! Fine-structure diagnostics: the oscillation functional `h̄_r`, decay
//! exponents of ball masses, Lebesgue-point classification and the lower
//! bound on `ν` in terms of `h̄`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{coefficient_constants, Flux, NonlinearityCertificate, Vec2};
use crate::geometry::{omega, GridFunction};
use crate::solver::Solution;

pub fn local_average(u: &GridFunction, x: Vec2, r: f64) -> Result<f64> {
    u.ball_average(x, r)
}

/// `u` on `(t, x)` (d = 1), axis 0 being time; each time cell carries the
/// mean of its two bounding slices.
pub fn spacetime_field(sol: &Solution) -> Result<GridFunction> {
    if sol.spec.d != 1 {
        return Err(Error::Parameter("space-time field needs d = 1".into()));
    }
    let n = sol.spec.n;
    let nt = sol.n_slices() - 1;
    let mut vals = vec![0.0; nt * n];
    for k in 0..nt {
        let (a, b) = (sol.slice(k), sol.slice(k + 1));
        for i in 0..n {
            vals[k + nt * i] = 0.5 * (a[i] + b[i]);
        }
    }
    GridFunction::new(
        2,
        [sol.t0, sol.spec.lo[0]],
        [sol.dt, sol.spec.dx(0)],
        [nt, n],
        vals,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hbar {
    pub hbar: f64,
    pub y1: Vec2,
    pub y2: Vec2,
    pub avg_max: f64,
    pub avg_min: f64,
}

/// `h̄_r(x̄) = ½ max_{y₁,y₂ ∈ B̄_{2r}(x̄)} ((u)_{B_r(y₁)} − (u)_{B_r(y₂)})`,
/// with centres on a lattice of spacing `r / resolution`.
pub fn oscillation_hbar(u: &GridFunction, x: Vec2, r: f64, resolution: usize) -> Result<Hbar> {
    if !(r > 0.0) || resolution == 0 {
        return Err(Error::Parameter(format!(
            "need r > 0 and a positive resolution, got r = {r}"
        )));
    }
    if !u.ball_inside(x, 3.0 * r) {
        return Err(Error::Domain(format!(
            "ball B_{}({x:?}) leaves the grid",
            3.0 * r
        )));
    }
    let step = r / resolution as f64;
    let m = 2 * resolution as i64;
    let mut best = Hbar {
        hbar: 0.0,
        y1: x,
        y2: x,
        avg_max: f64::NEG_INFINITY,
        avg_min: f64::INFINITY,
    };
    let js = if u.d == 1 { 0..=0 } else { -m..=m };
    for j in js {
        for i in -m..=m {
            if i * i + j * j > m * m {
                continue;
            }
            let y = [x[0] + i as f64 * step, x[1] + j as f64 * step];
            let a = u.ball_integral_clipped(y, r) / crate::geometry::ball_volume(u.d, r);
            if a > best.avg_max {
                best.avg_max = a;
                best.y1 = y;
            }
            if a < best.avg_min {
                best.avg_min = a;
                best.y2 = y;
            }
        }
    }
    let spread = best.avg_max - best.avg_min;
    // Spreads at the level of prefix-sum round-off are treated as none.
    let scale = best.avg_max.abs().max(best.avg_min.abs()).max(1.0);
    best.hbar = if spread > 1e-11 * scale {
        0.5 * spread
    } else {
        0.0
    };
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallScan {
    pub center: Vec2,
    pub radii: Vec<f64>,
    pub averages: Vec<f64>,
    pub hbar: Vec<f64>,
    pub nu_mass: Vec<f64>,
    pub eps: Vec<f64>,
}

/// Per-radius averages, mean oscillations, `h̄_r` (when `B_{3r}` fits) and
/// `ν(B_r)` (when a ball-mass function is given; `NaN` otherwise).
pub fn ball_scan(
    u: &GridFunction,
    x: Vec2,
    radii: &[f64],
    nu: Option<&dyn Fn(Vec2, f64) -> f64>,
) -> Result<BallScan> {
    let mut scan = BallScan {
        center: x,
        radii: radii.to_vec(),
        averages: Vec::new(),
        hbar: Vec::new(),
        nu_mass: Vec::new(),
        eps: Vec::new(),
    };
    for &r in radii {
        let a = u.ball_average(x, r)?;
        scan.averages.push(a);
        scan.eps.push(u.ball_mean_deviation(x, r, a)?);
        scan.hbar.push(if u.ball_inside(x, 3.0 * r) {
            oscillation_hbar(u, x, r, 16)?.hbar
        } else {
            f64::NAN
        });
        scan.nu_mass.push(nu.map_or(f64::NAN, |f| f(x, r)));
    }
    Ok(scan)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub slope_stderr: f64,
}

/// Least-squares fit of `log y = slope · log x + intercept`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Fit("need at least two paired samples".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit("log-log fit needs positive finite data".into()));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = if xs.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LogLogFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        slope_stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayExponents {
    /// `slope(ν) − (n_ambient − 1)`.
    pub beta: f64,
    pub gamma_prime: f64,
    pub nu_fit: LogLogFit,
    pub hbar_fit: LogLogFit,
}

fn check_span(radii: &[f64], min_len: usize) -> Result<()> {
    if radii.len() < min_len {
        return Err(Error::Fit(format!(
            "need at least {min_len} radii, got {}",
            radii.len()
        )));
    }
    let lo = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Fit(format!(
            "radii span [{lo}, {hi}] is under two decades"
        )));
    }
    Ok(())
}

pub fn decay_exponents(scan: &BallScan, n_ambient: usize) -> Result<DecayExponents> {
    check_span(&scan.radii, 6)?;
    let nu_fit = loglog_fit(&scan.radii, &scan.nu_mass)?;
    let hbar_fit = loglog_fit(&scan.radii, &scan.hbar)?;
    Ok(DecayExponents {
        beta: nu_fit.slope - (n_ambient as f64 - 1.0),
        gamma_prime: hbar_fit.slope,
        nu_fit,
        hbar_fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Lebesgue,
    VmoNotLebesgue,
    Oscillating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LebesgueThresholds {
    /// Largest spread of averages over the small-radius half for a Cauchy verdict.
    pub tol_leb: f64,
    /// Mean oscillation below which `ε(r)` counts as vanishing.
    pub eps_floor: f64,
    /// Smallest spread of averages that counts as non-convergence.
    pub osc_floor: f64,
}

impl Default for LebesgueThresholds {
    fn default() -> Self {
        LebesgueThresholds {
            tol_leb: 0.02,
            eps_floor: 0.05,
            osc_floor: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LebesgueReport {
    pub verdict: Verdict,
    /// Radii in decreasing order, with the matching averages and `ε(r)`.
    pub radii: Vec<f64>,
    pub averages: Vec<f64>,
    pub eps: Vec<f64>,
    /// Spread of the averages over the smaller half of the radii.
    pub tail_spread: f64,
    /// Spread of the averages over all radii.
    pub spread: f64,
    pub tail_eps: f64,
    pub thresholds: LebesgueThresholds,
}

pub fn lebesgue_diagnostic(
    u: &GridFunction,
    x: Vec2,
    radii: &[f64],
    th: LebesgueThresholds,
) -> Result<LebesgueReport> {
    if radii.len() < 8 {
        return Err(Error::Parameter(format!(
            "need at least 8 radii, got {}",
            radii.len()
        )));
    }
    let mut rs = radii.to_vec();
    rs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let q = rs[1] / rs[0];
    if !(q > 0.0 && q < 1.0) || rs.windows(2).any(|w| ((w[1] / w[0]) - q).abs() > 1e-6 * q) {
        return Err(Error::Parameter(
            "radii must form a geometric sequence".into(),
        ));
    }
    let mut averages = Vec::with_capacity(rs.len());
    let mut eps = Vec::with_capacity(rs.len());
    for &r in &rs {
        let a = u.ball_average(x, r)?;
        eps.push(u.ball_mean_deviation(x, r, a)?);
        averages.push(a);
    }
    let spread_of = |s: &[f64]| {
        s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - s.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let half = rs.len() / 2;
    let tail_spread = spread_of(&averages[half..]);
    let spread = spread_of(&averages);
    let tail_eps = eps[half..].iter().cloned().fold(0.0, f64::max);
    let eps_vanishes = tail_eps <= th.eps_floor;
    let verdict = if eps_vanishes && tail_spread <= th.tol_leb {
        Verdict::Lebesgue
    } else if eps_vanishes && spread >= th.osc_floor {
        Verdict::VmoNotLebesgue
    } else {
        Verdict::Oscillating
    };
    Ok(LebesgueReport {
        verdict,
        radii: rs,
        averages,
        eps,
        tail_spread,
        spread,
        tail_eps,
        thresholds: th,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureBound {
    pub hbar: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub r_max: f64,
    pub r2: Option<f64>,
    /// `ν(B_{r₂})` and `C₂ h̄^γ r₂^{d−1}` at the returned radius (or the last tried).
    pub nu: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Searches `r₂ ∈ [r, C₁ r / h̄^{d/α}]` for `ν(B_{r₂}(x̄)) ≥ C₂ h̄^γ r₂^{d−1}`.
pub fn structure_bound_check(
    u: &GridFunction,
    nu: &dyn Fn(Vec2, f64) -> f64,
    x: Vec2,
    r: f64,
    flux: &Flux,
    cert: &NonlinearityCertificate,
) -> Result<StructureBound> {
    if !cert.pass {
        return Err(Error::Precondition(
            "nonlinearity certificate did not pass".into(),
        ));
    }
    if u.d != flux.d {
        return Err(Error::Parameter("grid and flux dimensions differ".into()));
    }
    let hbar = oscillation_hbar(u, x, r, 16)?.hbar;
    if !(hbar > 0.0) {
        return Err(Error::Degenerate("no oscillation: h_r = 0".into()));
    }
    let d = flux.d;
    let df = d as f64;
    let alpha = cert.alpha;
    let (_, ct) = coefficient_constants(flux, cert, hbar);
    let fpp = flux.sup_fpp();
    let w = omega(d);
    let c1_cyl = w / (8.0 * df * 2.0 * omega(d - 1) * ct * fpp);
    let c_d = w * (2f64.powi(d as i32) - 1.0);
    let ct1 = (w * c1_cyl * c1_cyl / (256.0 * df * df * ct))
        .min(w * c1_cyl / (64.0 * df * ct * ct * fpp))
        .min(w * w * c1_cyl * c1_cyl / (512.0 * df * df * c_d * ct * ct * fpp));
    let big_c1 = 2.0 + 4.0 * ct * flux.sup_fp();
    let c2 = ct1 / big_c1.powi(d as i32 - 1);
    let gamma = df * (df + 3.0) / alpha + 4.0;
    let r_max = big_c1 * r / hbar.powf(df / alpha);
    let steps = ((r_max / r).log2() * 8.0).ceil().max(1.0) as usize;
    let mut out = StructureBound {
        hbar,
        gamma,
        c1: big_c1,
        c2,
        r_max,
        r2: None,
        nu: 0.0,
        bound: 0.0,
        holds: false,
    };
    for k in 0..=steps {
        let r2 = (r * (r_max / r).powf(k as f64 / steps as f64)).min(r_max);
        let m = nu(x, r2);
        let b = c2 * hbar.powf(gamma) * r2.powi(d as i32 - 1);
        out.nu = m;
        out.bound = b;
        if m >= b && m > 0.0 {
            out.r2 = Some(r2);
            out.holds = true;
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1d(f: impl Fn(f64) -> f64) -> GridFunction {
        let n = 2000;
        let h = 0.001;
        let vals = (0..n).map(|i| f(-1.0 + (i as f64 + 0.5) * h)).collect();
        GridFunction::new(1, [-1.0, 0.0], [h, 1.0], [n, 1], vals).unwrap()
    }

    #[test]
    fn averages() {
        let c = grid_1d(|_| 0.3);
        assert!((local_average(&c, [0.0, 0.0], 0.2).unwrap() - 0.3).abs() < 1e-12);
        let lin = grid_1d(|x| x);
        assert!(local_average(&lin, [0.0, 0.0], 0.2).unwrap().abs() < 1e-12);
        let step = grid_1d(|x| if x < 0.0 { 1.0 } else { 0.0 });
        assert!((local_average(&step, [0.0, 0.0], 0.2).unwrap() - 0.5).abs() < 1e-12);
        assert!(local_average(&step, [0.9, 0.0], 0.2).is_err());
    }

    #[test]
    fn hbar_of_step_and_line() {
        let step = grid_1d(|x| if x < 0.0 { 1.0 } else { 0.0 });
        let h = oscillation_hbar(&step, [0.0, 0.0], 0.1, 16).unwrap();
        assert!((h.hbar - 0.5).abs() < 1e-12);
        assert!(h.y1[0] <= -0.1 + 1e-12 && h.y2[0] >= 0.1 - 1e-12);
        assert!((h.avg_max - 1.0).abs() < 1e-12 && h.avg_min.abs() < 1e-12);
        let k = 0.7;
        let lin = grid_1d(|x| k * x);
        let h = oscillation_hbar(&lin, [0.0, 0.0], 0.1, 16).unwrap();
        // Centres range over B̄_{2r}, so the averages Ky span 4Kr.
        assert!((h.hbar - 2.0 * k * 0.1).abs() < 1e-12);
        assert_eq!(
            oscillation_hbar(&grid_1d(|_| 0.4), [0.0, 0.0], 0.1, 16)
                .unwrap()
                .hbar,
            0.0
        );
    }

    #[test]
    fn synthetic_exponents() {
        let radii: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k)).collect();
        let scan = BallScan {
            center: [0.0, 0.0],
            nu_mass: radii.iter().map(|r| r * r).collect(),
            hbar: radii.iter().map(|r| r.sqrt()).collect(),
            averages: vec![0.0; 8],
            eps: vec![0.0; 8],
            radii,
        };
        let e = decay_exponents(&scan, 2).unwrap();
        assert!((e.beta - 1.0).abs() < 1e-12);
        assert!((e.gamma_prime - 0.5).abs() < 1e-12);
        let short = BallScan {
            radii: scan.radii[..5].to_vec(),
            ..scan.clone()
        };
        assert!(decay_exponents(&short, 2).is_err());
        let neg = BallScan {
            nu_mass: vec![0.0; 8],
            ..scan
        };
        assert!(matches!(decay_exponents(&neg, 2), Err(Error::Fit(_))));
    }

    #[test]
    fn verdicts() {
        let radii: Vec<f64> = (0..10).map(|k| 0.2 * 0.7f64.powi(k)).collect();
        let c = grid_1d(|_| 0.5);
        let r = lebesgue_diagnostic(&c, [0.0, 0.0], &radii, LebesgueThresholds::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Lebesgue);
        let step = grid_1d(|x| if x < 0.0 { 1.0 } else { 0.0 });
        let r =
            lebesgue_diagnostic(&step, [0.0, 0.0], &radii, LebesgueThresholds::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Oscillating);
        assert!(
            lebesgue_diagnostic(&c, [0.0, 0.0], &radii[..7], LebesgueThresholds::default())
                .is_err()
        );
    }

    #[test]
    fn bound_discriminates() {
        let f = Flux::burgers();
        let cert = crate::flux::estimate_nonlinearity(&f, 1.0, 1.0, 1, &[0.1, 0.5]).unwrap();
        let step = grid_1d(|x| if x < 0.0 { 1.0 } else { 0.0 });
        let zero = |_: Vec2, _: f64| 0.0;
        let b = structure_bound_check(&step, &zero, [0.0, 0.0], 0.05, &f, &cert).unwrap();
        assert!(!b.holds && b.r2.is_none());
        let one = |_: Vec2, _: f64| 1.0;
        let b = structure_bound_check(&step, &one, [0.0, 0.0], 0.05, &f, &cert).unwrap();
        assert!(b.holds);
        let c = grid_1d(|_| 0.5);
        assert!(matches!(
            structure_bound_check(&c, &one, [0.0, 0.0], 0.05, &f, &cert),
            Err(Error::Degenerate(_))
        ));
    }
}

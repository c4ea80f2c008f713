//! Dense real polynomials in the monomial basis, with root isolation on
//! closed intervals.

use serde::{Deserialize, Serialize};

/// Coefficients in ascending order: `c[k]` multiplies `x^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub c: Vec<f64>,
}

impl Poly {
    pub fn new(mut c: Vec<f64>) -> Self {
        while c.len() > 1 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Poly { c }
    }

    pub fn zero() -> Self {
        Poly { c: vec![0.0] }
    }

    pub fn constant(a: f64) -> Self {
        Poly::new(vec![a])
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&a| a == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    pub fn derivative(&self) -> Poly {
        if self.c.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &a)| k as f64 * a)
                .collect(),
        )
    }

    /// Antiderivative vanishing at 0.
    pub fn integral(&self) -> Poly {
        let mut c = Vec::with_capacity(self.c.len() + 1);
        c.push(0.0);
        for (k, &a) in self.c.iter().enumerate() {
            c.push(a / (k + 1) as f64);
        }
        Poly::new(c)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.c.len().max(other.c.len());
        let c = (0..n)
            .map(|k| self.c.get(k).copied().unwrap_or(0.0) + other.c.get(k).copied().unwrap_or(0.0))
            .collect();
        Poly::new(c)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.c.iter().map(|a| a * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut c = vec![0.0; self.c.len() + other.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in other.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }

    /// `p(s·x)`.
    pub fn rescale_arg(&self, s: f64) -> Poly {
        let mut f = 1.0;
        let mut c = Vec::with_capacity(self.c.len());
        for &a in &self.c {
            c.push(a * f);
            f *= s;
        }
        Poly::new(c)
    }

    pub fn sup_abs(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.min_max(a, b);
        lo.1.abs().max(hi.1.abs())
    }

    /// `((argmin, min), (argmax, max))` over `[a, b]`.
    pub fn min_max(&self, a: f64, b: f64) -> ((f64, f64), (f64, f64)) {
        let mut best_lo = (a, self.eval(a));
        let mut best_hi = best_lo;
        let mut consider = |x: f64| {
            let y = self.eval(x);
            if y < best_lo.1 {
                best_lo = (x, y);
            }
            if y > best_hi.1 {
                best_hi = (x, y);
            }
        };
        for x in self.derivative().roots_in(a, b) {
            consider(x);
        }
        consider(b);
        (best_lo, best_hi)
    }

    /// Real roots in `[a, b]`, sorted. Roots are isolated between consecutive
    /// critical points (found recursively) and refined by bisection. Roots of
    /// even multiplicity are reported only when the polynomial evaluates to
    /// exactly zero there. The zero polynomial has no isolated roots.
    pub fn roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        if a > b || self.is_zero() {
            return Vec::new();
        }
        match self.degree() {
            0 => Vec::new(),
            1 => {
                let r = -self.c[0] / self.c[1];
                if r >= a && r <= b {
                    vec![r]
                } else {
                    Vec::new()
                }
            }
            _ => {
                let mut knots = vec![a];
                knots.extend(self.derivative().roots_in(a, b));
                knots.push(b);
                let mut out: Vec<f64> = Vec::new();
                let push = |x: f64, out: &mut Vec<f64>| {
                    if out.last().map_or(true, |&l| x > l) {
                        out.push(x);
                    }
                };
                for w in knots.windows(2) {
                    let (l, r) = (w[0], w[1]);
                    let (fl, fr) = (self.eval(l), self.eval(r));
                    if fl == 0.0 {
                        push(l, &mut out);
                    }
                    if fl != 0.0 && fr != 0.0 && (fl < 0.0) != (fr < 0.0) {
                        push(self.bisect(l, r, fl), &mut out);
                    }
                }
                if self.eval(b) == 0.0 {
                    push(b, &mut out);
                }
                out
            }
        }
    }

    fn bisect(&self, mut l: f64, mut r: f64, fl: f64) -> f64 {
        let neg = fl < 0.0;
        for _ in 0..200 {
            let m = 0.5 * (l + r);
            if m <= l || m >= r {
                break;
            }
            let fm = self.eval(m);
            if fm == 0.0 {
                return m;
            }
            if (fm < 0.0) == neg {
                l = m;
            } else {
                r = m;
            }
        }
        0.5 * (l + r)
    }

    /// Lebesgue measure of `{x ∈ [a, b] : |p(x)| < delta}`.
    pub fn sublevel_measure(&self, a: f64, b: f64, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        let mut knots = vec![a, b];
        knots.extend(self.add(&Poly::constant(-delta)).roots_in(a, b));
        knots.extend(self.add(&Poly::constant(delta)).roots_in(a, b));
        knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
        knots
            .windows(2)
            .filter(|w| w[1] > w[0] && self.eval(0.5 * (w[0] + w[1])).abs() < delta)
            .map(|w| w[1] - w[0])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_cubic() {
        // (x - 0.1)(x - 0.5)(x - 0.9)
        let p = Poly::new(vec![-0.1, 1.0, 0.0])
            .mul(&Poly::new(vec![-0.5, 1.0]))
            .mul(&Poly::new(vec![-0.9, 1.0]));
        let r = p.roots_in(0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (x, e) in r.iter().zip([0.1, 0.5, 0.9]) {
            assert!((x - e).abs() < 1e-14);
        }
    }

    #[test]
    fn sublevel_of_identity() {
        let p = Poly::new(vec![0.0, 1.0]);
        assert!((p.sublevel_measure(0.0, 1.0, 0.3) - 0.3).abs() < 1e-15);
        assert_eq!(p.sublevel_measure(0.0, 1.0, 2.0), 1.0);
    }

    #[test]
    fn sublevel_of_parabola() {
        // |x^2 - 1/4| < 0.1 on [0,1]: x in (sqrt(0.15), sqrt(0.35))
        let p = Poly::new(vec![-0.25, 0.0, 1.0]);
        let m = p.sublevel_measure(0.0, 1.0, 0.1);
        assert!((m - (0.35f64.sqrt() - 0.15f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn min_max_interior() {
        let p = Poly::new(vec![0.0, -1.0, 1.0]);
        let ((xl, yl), (_, yh)) = p.min_max(0.0, 1.0);
        assert!((xl - 0.5).abs() < 1e-15 && (yl + 0.25).abs() < 1e-15);
        assert_eq!(yh, 0.0);
    }
}

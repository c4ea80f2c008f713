//! Cell geometry: exact ball/cell overlaps and ball integrals of grid
//! functions in one and two dimensions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::Vec2;

pub fn interval_overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Volume of the unit ball in ℝ^d.
pub fn omega(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => 4.0 / 3.0 * std::f64::consts::PI,
    }
}

pub fn ball_volume(d: usize, r: f64) -> f64 {
    omega(d) * r.powi(d as i32)
}

/// `∫_{-r}^{x} sqrt(r² - s²) ds` for `x ∈ [-r, r]`.
fn half_disk_primitive(r: f64, x: f64) -> f64 {
    let x = x.clamp(-r, r);
    let s = (r * r - x * x).max(0.0).sqrt();
    0.5 * (x * s + r * r * (x / r).clamp(-1.0, 1.0).asin()) + 0.25 * std::f64::consts::PI * r * r
}

/// Area of the origin-centred disk of radius `r` intersected with the
/// quadrant `(-∞, x] × (-∞, y]`.
fn disk_quadrant(r: f64, x: f64, y: f64) -> f64 {
    if x <= -r || y <= -r {
        return 0.0;
    }
    let xc = x.min(r);
    let g = |a: f64, b: f64| half_disk_primitive(r, b) - half_disk_primitive(r, a);
    if y >= r {
        return 2.0 * g(-r, xc);
    }
    let xs = (r * r - y * y).max(0.0).sqrt();
    let mut area = 0.0;
    // Pieces: [-r, -xs], [-xs, xs], [xs, r], each clipped at xc.
    let pieces = [(-r, -xs, 0u8), (-xs, xs, 1u8), (xs, r, 2u8)];
    for (a, b, kind) in pieces {
        let b = b.min(xc);
        if b <= a {
            continue;
        }
        area += match (kind, y >= 0.0) {
            (1, _) => y * (b - a) + g(a, b),
            (_, true) => 2.0 * g(a, b),
            (_, false) => 0.0,
        };
    }
    area
}

/// Exact area of a disk intersected with an axis-aligned rectangle.
pub fn disk_rect_area(c: Vec2, r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if r <= 0.0 || x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let dx = (x0 - c[0]).max(0.0).max(c[0] - x1);
    let dy = (y0 - c[1]).max(0.0).max(c[1] - y1);
    if dx * dx + dy * dy >= r * r {
        return 0.0;
    }
    let fx = (x0 - c[0]).abs().max((x1 - c[0]).abs());
    let fy = (y0 - c[1]).abs().max((y1 - c[1]).abs());
    if fx * fx + fy * fy <= r * r {
        return (x1 - x0) * (y1 - y0);
    }
    let (a0, a1, b0, b1) = (x0 - c[0], x1 - c[0], y0 - c[1], y1 - c[1]);
    let v = disk_quadrant(r, a1, b1) - disk_quadrant(r, a0, b1) - disk_quadrant(r, a1, b0)
        + disk_quadrant(r, a0, b0);
    v.clamp(0.0, (x1 - x0) * (y1 - y0))
}

/// Piecewise-constant function on a uniform grid in ℝ^d (d ≤ 2); cell
/// `(i0, i1)` is `[lo + i h, lo + (i+1) h)` and is stored at `i0 + n0·i1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub d: usize,
    pub lo: Vec2,
    pub h: Vec2,
    pub n: [usize; 2],
    pub values: Vec<f64>,
    #[serde(skip)]
    prefix: Vec<f64>,
}

impl GridFunction {
    pub fn new(
        d: usize,
        lo: Vec2,
        h: Vec2,
        n: [usize; 2],
        values: Vec<f64>,
    ) -> Result<GridFunction> {
        let n = if d == 1 { [n[0], 1] } else { n };
        if values.len() != n[0] * n[1] {
            return Err(Error::Configuration(format!(
                "grid function has {} values for {}x{} cells",
                values.len(),
                n[0],
                n[1]
            )));
        }
        let mut prefix = Vec::with_capacity(n[1] * (n[0] + 1));
        for row in values.chunks(n[0]) {
            let mut s = 0.0;
            prefix.push(0.0);
            for v in row {
                s += v;
                prefix.push(s);
            }
        }
        Ok(GridFunction {
            d,
            lo,
            h,
            n,
            values,
            prefix,
        })
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.lo[axis] + self.n[axis] as f64 * self.h[axis]
    }

    pub fn cell_volume(&self) -> f64 {
        if self.d == 1 {
            self.h[0]
        } else {
            self.h[0] * self.h[1]
        }
    }

    pub fn ball_inside(&self, c: Vec2, r: f64) -> bool {
        let tol = 1e-12 * (1.0 + r);
        (0..self.d).all(|k| c[k] - r >= self.lo[k] - tol && c[k] + r <= self.hi(k) + tol)
    }

    fn row_sum(&self, row: usize, i_a: usize, i_b: usize) -> f64 {
        // cells [i_a, i_b)
        let base = row * (self.n[0] + 1);
        self.prefix[base + i_b] - self.prefix[base + i_a]
    }

    fn index_range(&self, axis: usize, a: f64, b: f64) -> (usize, usize) {
        let lo = ((a - self.lo[axis]) / self.h[axis]).floor().max(0.0) as usize;
        let hi = (((b - self.lo[axis]) / self.h[axis]).ceil().max(0.0) as usize).min(self.n[axis]);
        (lo.min(self.n[axis]), hi)
    }

    /// `∫_{B_r(c)} u`, with the ball clipped to the grid.
    pub fn ball_integral_clipped(&self, c: Vec2, r: f64) -> f64 {
        self.ball_sum(c, r)
    }

    /// `∫_{B_r(c)} u`; the ball must lie inside the grid.
    pub fn ball_integral(&self, c: Vec2, r: f64) -> Result<f64> {
        if !self.ball_inside(c, r) {
            return Err(Error::Domain(format!("ball B_{r}({c:?}) leaves the grid")));
        }
        Ok(self.ball_integral_clipped(c, r))
    }

    pub fn ball_average(&self, c: Vec2, r: f64) -> Result<f64> {
        Ok(self.ball_integral(c, r)? / ball_volume(self.d, r))
    }

    /// `⨍_{B_r(c)} |u - m|`.
    pub fn ball_mean_deviation(&self, c: Vec2, r: f64, m: f64) -> Result<f64> {
        if !self.ball_inside(c, r) {
            return Err(Error::Domain(format!("ball B_{r}({c:?}) leaves the grid")));
        }
        let mut s = 0.0;
        self.for_each_overlap(c, r, |idx, area| s += (self.values[idx] - m).abs() * area);
        Ok(s / ball_volume(self.d, r))
    }

    /// Visits every cell meeting the ball with its overlap measure.
    pub fn for_each_overlap(&self, c: Vec2, r: f64, mut f: impl FnMut(usize, f64)) {
        let (a0, b0) = self.index_range(0, c[0] - r, c[0] + r);
        if self.d == 1 {
            for i in a0..b0 {
                let x0 = self.lo[0] + i as f64 * self.h[0];
                let ov = interval_overlap(x0, x0 + self.h[0], c[0] - r, c[0] + r);
                if ov > 0.0 {
                    f(i, ov);
                }
            }
            return;
        }
        let (a1, b1) = self.index_range(1, c[1] - r, c[1] + r);
        for j in a1..b1 {
            let y0 = self.lo[1] + j as f64 * self.h[1];
            for i in a0..b0 {
                let x0 = self.lo[0] + i as f64 * self.h[0];
                let ov = disk_rect_area(c, r, x0, x0 + self.h[0], y0, y0 + self.h[1]);
                if ov > 0.0 {
                    f(i + self.n[0] * j, ov);
                }
            }
        }
    }

    /// Integral over the clipped ball, using row prefix sums for cells fully
    /// inside.
    fn ball_sum(&self, c: Vec2, r: f64) -> f64 {
        let h0 = self.h[0];
        if self.d == 1 {
            let (a, b) = (c[0] - r, c[0] + r);
            let (i_a, i_b) = self.index_range(0, a, b);
            if i_b <= i_a {
                return 0.0;
            }
            let part = |i: usize| {
                let x0 = self.lo[0] + i as f64 * h0;
                self.values[i] * interval_overlap(x0, x0 + h0, a, b)
            };
            if i_b - i_a == 1 {
                return part(i_a);
            }
            part(i_a) + part(i_b - 1) + self.row_sum(0, i_a + 1, i_b - 1) * h0
        } else {
            let h1 = self.h[1];
            let (j_a, j_b) = self.index_range(1, c[1] - r, c[1] + r);
            let mut s = 0.0;
            for j in j_a..j_b {
                let y0 = self.lo[1] + j as f64 * h1;
                let y1 = y0 + h1;
                let far = (y0 - c[1]).abs().max((y1 - c[1]).abs());
                let near = if c[1] >= y0 && c[1] <= y1 {
                    0.0
                } else {
                    (y0 - c[1]).abs().min((y1 - c[1]).abs())
                };
                if near >= r {
                    continue;
                }
                let w_out = (r * r - near * near).sqrt();
                let w_in = (r * r - far * far).max(0.0).sqrt();
                let (o_a, o_b) = self.index_range(0, c[0] - w_out, c[0] + w_out);
                // Fully inside: [x0, x0 + h0] ⊂ [c - w_in, c + w_in].
                let f_a =
                    (((c[0] - w_in - self.lo[0]) / h0).ceil().max(o_a as f64) as usize).min(o_b);
                let f_b =
                    (((c[0] + w_in - self.lo[0]) / h0).floor().max(0.0) as usize).clamp(f_a, o_b);
                let row = j * self.n[0];
                for i in (o_a..f_a).chain(f_b..o_b) {
                    let x0 = self.lo[0] + i as f64 * h0;
                    let ov = disk_rect_area(c, r, x0, x0 + h0, y0, y1);
                    if ov > 0.0 {
                        s += self.values[row + i] * ov;
                    }
                }
                if f_b > f_a {
                    s += self.row_sum(j, f_a, f_b) * h0 * h1;
                }
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_rect_full_and_partial() {
        let pi = std::f64::consts::PI;
        let a = disk_rect_area([0.0, 0.0], 1.0, -2.0, 2.0, -2.0, 2.0);
        assert!((a - pi).abs() < 1e-14);
        let q = disk_rect_area([0.0, 0.0], 1.0, 0.0, 2.0, 0.0, 2.0);
        assert!((q - pi / 4.0).abs() < 1e-14);
        let h = disk_rect_area([0.0, 0.0], 1.0, -2.0, 2.0, -0.5, 2.0);
        // segment below y = -0.5 has area acos(0.5) - 0.5 sqrt(0.75)
        let seg = 0.5f64.acos() - 0.5 * 0.75f64.sqrt();
        assert!((h - (pi - seg)).abs() < 1e-14);
    }

    #[test]
    fn disk_tiling_sums_to_pi() {
        let h = 0.037;
        let mut s = 0.0;
        for i in -40..40 {
            for j in -40..40 {
                let (x0, y0) = (i as f64 * h + 0.01, j as f64 * h - 0.003);
                s += disk_rect_area([0.1, 0.2], 0.9, x0, x0 + h, y0, y0 + h);
            }
        }
        assert!((s - std::f64::consts::PI * 0.81).abs() < 1e-12);
    }

    #[test]
    fn ball_integral_matches_overlap_sum() {
        let n = [40, 30];
        let vals: Vec<f64> = (0..1200)
            .map(|k| ((k * 7919) % 101) as f64 / 100.0)
            .collect();
        let g = GridFunction::new(2, [0.0, 0.0], [0.05, 0.07], n, vals.clone()).unwrap();
        for (c, r) in [([1.0, 1.0], 0.3), ([0.73, 1.11], 0.51), ([1.0, 1.05], 0.02)] {
            let fast = g.ball_integral(c, r).unwrap();
            let mut slow = 0.0;
            g.for_each_overlap(c, r, |i, a| slow += vals[i] * a);
            assert!((fast - slow).abs() < 1e-12, "{fast} {slow}");
        }
    }

    #[test]
    fn ball_integral_1d() {
        let g = GridFunction::new(
            1,
            [0.0, 0.0],
            [0.1, 1.0],
            [10, 1],
            (0..10).map(|i| i as f64).collect(),
        )
        .unwrap();
        let direct = |a: f64, b: f64| {
            let mut s = 0.0;
            for i in 0..10 {
                s += i as f64 * interval_overlap(i as f64 * 0.1, (i + 1) as f64 * 0.1, a, b);
            }
            s
        };
        for (c, r) in [(0.5, 0.2), (0.33, 0.01), (0.31, 0.25), (0.05, 0.05)] {
            let v = g.ball_integral([c, 0.0], r).unwrap();
            assert!((v - direct(c - r, c + r)).abs() < 1e-13, "{c} {r}");
        }
    }
}

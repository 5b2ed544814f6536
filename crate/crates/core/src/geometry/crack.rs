//! Open crack arcs parametrized over `s ∈ [-1, 1]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{metrics::point_segment_distance, AprioriData, Domain, Vec2};
use crate::error::{invalid, Error, Result};
use crate::quad::gauss_legendre_on;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum CrackShape {
    Segment { a: [f64; 2], b: [f64; 2] },
    /// Circular arc swept from `theta0` to `theta1` (either direction).
    Arc { center: [f64; 2], radius: f64, theta0: f64, theta1: f64 },
    /// Natural cubic spline through the points, chord-length parametrized.
    Spline { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy)]
pub struct CrackPoint {
    pub x: Vec2,
    pub d1: Vec2,
    pub d2: Vec2,
}

#[derive(Debug, Clone)]
struct Spline1 {
    knots: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>, // second derivatives at knots
}

impl Spline1 {
    fn natural(knots: &[f64], y: &[f64]) -> Self {
        let n = knots.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut lower = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = knots[i] - knots[i - 1];
                let h1 = knots[i + 1] - knots[i];
                lower[i - 1] = h0;
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..k {
                let w = lower[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; k];
            sol[k - 1] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
            }
            m[1..n - 1].copy_from_slice(&sol);
        }
        Self { knots: knots.to_vec(), y: y.to_vec(), m }
    }

    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.knots.len();
        let i = match self.knots.partition_point(|k| *k <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Segment { a: Vec2, b: Vec2 },
    Arc { c: Vec2, r: f64, th0: f64, th1: f64 },
    Spline { sx: Spline1, sy: Spline1, total: f64 },
}

/// An open arc with a chosen normal; the `+` side is the side the normal points to.
#[derive(Debug, Clone)]
pub struct CrackCurve {
    shape: CrackShape,
    repr: Repr,
    orientation: f64,
    length: f64,
}

/// Sampled C^{1,α} check of the tangent field.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegularityReport {
    pub holder_quotient: f64,
    pub bound: f64,
    pub satisfied: bool,
}

impl CrackCurve {
    pub fn new(shape: CrackShape) -> Result<Self> {
        let repr = match &shape {
            CrackShape::Segment { a, b } => {
                let (a, b) = (Vec2::new(a[0], a[1]), Vec2::new(b[0], b[1]));
                if (b - a).norm() <= 0.0 {
                    return invalid("degenerate crack segment");
                }
                Repr::Segment { a, b }
            }
            CrackShape::Arc { center, radius, theta0, theta1 } => {
                let sweep = (theta1 - theta0).abs();
                if !(*radius > 0.0) || !(sweep > 0.0 && sweep < 2.0 * PI) {
                    return invalid("arc crack needs positive radius and sweep in (0, 2π)");
                }
                Repr::Arc { c: Vec2::new(center[0], center[1]), r: *radius, th0: *theta0, th1: *theta1 }
            }
            CrackShape::Spline { points } => {
                if points.len() < 2 {
                    return invalid("spline crack needs at least two points");
                }
                let mut knots = vec![0.0];
                for w in points.windows(2) {
                    let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
                    if d <= 0.0 {
                        return invalid("repeated spline control point");
                    }
                    knots.push(knots.last().unwrap() + d);
                }
                let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
                let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
                let total = *knots.last().unwrap();
                Repr::Spline { sx: Spline1::natural(&knots, &xs), sy: Spline1::natural(&knots, &ys), total }
            }
        };
        let mut c = Self { shape, repr, orientation: 1.0, length: 0.0 };
        c.length = c.compute_length();
        Ok(c)
    }

    pub fn segment(a: [f64; 2], b: [f64; 2]) -> Result<Self> {
        Self::new(CrackShape::Segment { a, b })
    }

    /// Circular arc from `a` to `b` whose midpoint is displaced by `sagitta`
    /// along the left normal of the chord. A zero sagitta gives the segment.
    pub fn arc_through(a: [f64; 2], b: [f64; 2], sagitta: f64) -> Result<Self> {
        if sagitta == 0.0 {
            return Self::segment(a, b);
        }
        let (pa, pb) = (Vec2::new(a[0], a[1]), Vec2::new(b[0], b[1]));
        let chord = pb - pa;
        let half = 0.5 * chord.norm();
        let left = Vec2::new(-chord.y, chord.x) / chord.norm();
        let h = sagitta;
        let r = (half * half + h * h) / (2.0 * h.abs());
        // center lies on the opposite side of the bulge
        let mid = 0.5 * (pa + pb);
        let c = mid + left * (h - h.signum() * r);
        let th0 = (pa.y - c.y).atan2(pa.x - c.x);
        let mut th1 = (pb.y - c.y).atan2(pb.x - c.x);
        // sweep direction: counter-clockwise when bulging to the right of a→b
        if h < 0.0 {
            while th1 <= th0 {
                th1 += 2.0 * PI;
            }
        } else {
            while th1 >= th0 {
                th1 -= 2.0 * PI;
            }
        }
        Self::new(CrackShape::Arc { center: [c.x, c.y], radius: r, theta0: th0, theta1: th1 })
    }

    pub fn shape(&self) -> &CrackShape {
        &self.shape
    }

    /// Same curve with the opposite normal.
    pub fn flipped(&self) -> Self {
        let mut c = self.clone();
        c.orientation = -c.orientation;
        c
    }

    pub fn with_orientation(mut self, sign: f64) -> Self {
        self.orientation = if sign < 0.0 { -1.0 } else { 1.0 };
        self
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn eval(&self, s: f64) -> CrackPoint {
        match &self.repr {
            Repr::Segment { a, b } => CrackPoint {
                x: 0.5 * (a + b) + 0.5 * s * (b - a),
                d1: 0.5 * (b - a),
                d2: Vec2::zeros(),
            },
            Repr::Arc { c, r, th0, th1 } => {
                let k = 0.5 * (th1 - th0);
                let th = 0.5 * (th0 + th1) + k * s;
                let (sn, cs) = th.sin_cos();
                CrackPoint {
                    x: c + *r * Vec2::new(cs, sn),
                    d1: *r * k * Vec2::new(-sn, cs),
                    d2: -*r * k * k * Vec2::new(cs, sn),
                }
            }
            Repr::Spline { sx, sy, total } => {
                let u = 0.5 * (s + 1.0) * total;
                let k = 0.5 * total;
                let (x, dx, ddx) = sx.eval(u);
                let (y, dy, ddy) = sy.eval(u);
                CrackPoint {
                    x: Vec2::new(x, y),
                    d1: Vec2::new(dx, dy) * k,
                    d2: Vec2::new(ddx, ddy) * k * k,
                }
            }
        }
    }

    pub fn point(&self, s: f64) -> Vec2 {
        self.eval(s).x
    }

    pub fn tangent(&self, s: f64) -> Vec2 {
        self.eval(s).d1.normalize()
    }

    /// Unit normal ν pointing to the `+` side.
    pub fn normal(&self, s: f64) -> Vec2 {
        let t = self.tangent(s);
        Vec2::new(-t.y, t.x) * self.orientation
    }

    pub fn tips(&self) -> [Vec2; 2] {
        [self.point(-1.0), self.point(1.0)]
    }

    fn compute_length(&self) -> f64 {
        let (x, w) = gauss_legendre_on(64, -1.0, 1.0);
        let mut total = 0.0;
        // piecewise to respect spline knots
        let pieces = match &self.repr {
            Repr::Spline { sx, .. } => 8 * sx.knots.len(),
            _ => 1,
        };
        for p in 0..pieces {
            let a = -1.0 + 2.0 * p as f64 / pieces as f64;
            let b = -1.0 + 2.0 * (p + 1) as f64 / pieces as f64;
            for (t, wt) in x.iter().zip(&w) {
                let s = 0.5 * (a + b) + 0.5 * (b - a) * t;
                total += 0.5 * (b - a) * wt * self.eval(s).d1.norm();
            }
        }
        total
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Points at parameter spacing fine enough for an arc-length gap below `spacing`.
    pub fn sample(&self, spacing: f64) -> Vec<Vec2> {
        let vmax = (0..=64)
            .map(|j| self.eval(-1.0 + j as f64 / 32.0).d1.norm())
            .fold(0.0, f64::max)
            * 1.05;
        let n = ((2.0 * vmax / spacing).ceil() as usize).max(2);
        (0..=n).map(|j| self.point(-1.0 + 2.0 * j as f64 / n as f64)).collect()
    }

    pub fn polyline(&self, pieces: usize) -> Vec<Vec2> {
        (0..=pieces).map(|j| self.point(-1.0 + 2.0 * j as f64 / pieces as f64)).collect()
    }

    /// Euclidean distance from `p` to the arc.
    pub fn distance(&self, p: Vec2) -> f64 {
        match &self.repr {
            Repr::Segment { a, b } => point_segment_distance(p, *a, *b),
            Repr::Arc { c, r, th0, th1 } => {
                let d = p - c;
                let ang = d.y.atan2(d.x);
                let (lo, hi) = if th0 < th1 { (*th0, *th1) } else { (*th1, *th0) };
                let mut a = ang;
                while a < lo {
                    a += 2.0 * PI;
                }
                while a > lo + 2.0 * PI {
                    a -= 2.0 * PI;
                }
                let to_tips = (p - self.point(-1.0)).norm().min((p - self.point(1.0)).norm());
                if a <= hi {
                    (d.norm() - r).abs().min(to_tips)
                } else {
                    to_tips
                }
            }
            Repr::Spline { .. } => {
                let pts = self.polyline(4096);
                pts.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Parameter and distance of the point of the arc closest to `p`.
    pub fn closest(&self, p: Vec2) -> (f64, f64) {
        let n = 512;
        let d2 = |s: f64| (self.point(s) - p).norm_squared();
        let best = (0..=n)
            .map(|j| -1.0 + 2.0 * j as f64 / n as f64)
            .min_by(|a, b| d2(*a).total_cmp(&d2(*b)))
            .unwrap_or(0.0);
        // Golden section on the bracketing cells.
        let (mut lo, mut hi) = ((best - 2.0 / n as f64).max(-1.0), (best + 2.0 / n as f64).min(1.0));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut fa, mut fb) = (d2(a), d2(b));
        for _ in 0..80 {
            if fa < fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - g * (hi - lo);
                fa = d2(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + g * (hi - lo);
                fb = d2(b);
            }
        }
        let s = [lo, hi, 0.5 * (lo + hi), -1.0, 1.0].into_iter().min_by(|x, y| d2(*x).total_cmp(&d2(*y))).unwrap();
        (s, d2(s).sqrt())
    }

    /// Checks that the arc is simple and stays strictly inside the domain.
    pub fn check_in(&self, dom: &Domain) -> Result<()> {
        let pts = self.polyline(512);
        let mut min_d = f64::INFINITY;
        for p in &pts {
            if !dom.contains(*p) {
                return Err(Error::OutOfRange {
                    field: "crack",
                    reason: format!("crack point ({:.4}, {:.4}) lies outside the domain", p.x, p.y),
                });
            }
            min_d = min_d.min(dom.boundary.distance(*p));
        }
        if min_d <= 0.0 {
            return invalid("crack touches the outer boundary");
        }
        if let Repr::Spline { .. } = self.repr {
            let n = pts.len() - 1;
            for i in 0..n {
                for j in i + 2..n {
                    if segments_cross(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                        return invalid("spline crack self-intersects");
                    }
                }
            }
        }
        Ok(())
    }

    /// Distance from the arc to the outer boundary.
    pub fn distance_to_boundary(&self, dom: &Domain) -> f64 {
        self.polyline(512).iter().map(|p| dom.boundary.distance(*p)).fold(f64::INFINITY, f64::min)
    }

    /// Largest sampled `|τ(s1) - τ(s2)| / |x(s1) - x(s2)|^α` over pairs closer than `r0`.
    pub fn regularity(&self, apriori: &AprioriData) -> RegularityReport {
        let n = 256;
        let pts: Vec<(Vec2, Vec2)> = (0..=n)
            .map(|j| {
                let s = -1.0 + 2.0 * j as f64 / n as f64;
                (self.point(s), self.tangent(s))
            })
            .collect();
        let mut q: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d = (pts[i].0 - pts[j].0).norm();
                if d < apriori.r0 && d > 0.0 {
                    q = q.max((pts[i].1 - pts[j].1).norm() / d.powf(apriori.alpha));
                }
            }
        }
        let bound = apriori.m / apriori.r0.powf(apriori.alpha);
        RegularityReport { holder_quotient: q, bound, satisfied: q <= bound }
    }
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

pub(crate) fn segments_cross(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = cross(q2 - q1, p1 - q1);
    let d2 = cross(q2 - q1, p2 - q1);
    let d3 = cross(p2 - p1, q1 - p1);
    let d4 = cross(p2 - p1, q2 - p1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_through_hits_endpoints_and_sagitta() {
        for &h in &[0.1, -0.2, 0.45] {
            let c = CrackCurve::arc_through([-0.5, 0.0], [0.5, 0.0], h).unwrap();
            assert!((c.point(-1.0) - Vec2::new(-0.5, 0.0)).norm() < 1e-12);
            assert!((c.point(1.0) - Vec2::new(0.5, 0.0)).norm() < 1e-12);
            assert!((c.point(0.0) - Vec2::new(0.0, h)).norm() < 1e-12, "h={h}: {:?}", c.point(0.0));
        }
    }

    #[test]
    fn spline_through_collinear_points_is_the_segment() {
        let c = CrackCurve::new(CrackShape::Spline { points: vec![[-0.5, 0.0], [0.0, 0.0], [0.5, 0.0]] }).unwrap();
        assert!((c.length() - 1.0).abs() < 1e-12);
        assert!((c.point(0.3) - Vec2::new(0.15, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let shapes = [
            CrackCurve::arc_through([-0.4, 0.1], [0.3, -0.2], 0.15).unwrap(),
            CrackCurve::new(CrackShape::Spline { points: vec![[-0.5, 0.0], [0.0, 0.2], [0.4, 0.1], [0.5, -0.2]] })
                .unwrap(),
        ];
        let h = 1e-6;
        for c in &shapes {
            for j in 0..9 {
                let s = -0.9 + 0.2 * j as f64 + 0.013;
                let fd1 = (c.point(s + h) - c.point(s - h)) / (2.0 * h);
                let fd2 = (c.eval(s + h).d1 - c.eval(s - h).d1) / (2.0 * h);
                assert!((fd1 - c.eval(s).d1).norm() < 1e-6);
                assert!((fd2 - c.eval(s).d2).norm() < 1e-4);
            }
        }
    }

    #[test]
    fn arc_distance_matches_polyline() {
        let c = CrackCurve::arc_through([-0.5, 0.0], [0.5, 0.0], 0.3).unwrap();
        let pts = c.polyline(20000);
        for p in [Vec2::new(0.0, 0.0), Vec2::new(0.9, 0.4), Vec2::new(-0.2, -0.5), Vec2::new(0.1, 0.35)] {
            let poly = pts.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min);
            assert!((poly - c.distance(p)).abs() < 1e-8);
        }
    }
}

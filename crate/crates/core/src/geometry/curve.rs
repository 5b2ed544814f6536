//! Closed outer boundaries, parametrized by (scaled) arc length.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Vec2;
use crate::error::{invalid, Result};
use crate::quad::gauss_legendre_on;

/// Shape of a closed, counter-clockwise outer boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BoundaryShape {
    Circle { center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], semi_x: f64, semi_y: f64 },
}

/// Point, first and second derivatives of a periodic parametrization.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub x: Vec2,
    pub d1: Vec2,
    pub d2: Vec2,
}

impl CurvePoint {
    pub fn speed(&self) -> f64 {
        self.d1.norm()
    }

    /// Outward unit normal for a counter-clockwise curve.
    pub fn normal(&self) -> Vec2 {
        Vec2::new(self.d1.y, -self.d1.x) / self.speed()
    }

    pub fn curvature(&self) -> f64 {
        let s = self.speed();
        (self.d1.x * self.d2.y - self.d1.y * self.d2.x) / (s * s * s)
    }
}

/// A closed curve with an arc-length parametrization over `[0, 2π)`: the
/// parameter `τ` corresponds to arc length `τ · L / 2π`.
#[derive(Debug, Clone)]
pub struct ClosedCurve {
    shape: BoundaryShape,
    length: f64,
    // Ellipse only: cumulative arc length table on a uniform angle grid.
    table: Option<ArcTable>,
    // Ellipse only: fine polygon used for distance queries.
    poly: Vec<Vec2>,
}

#[derive(Debug, Clone)]
struct ArcTable {
    angles: Vec<f64>,
    lengths: Vec<f64>,
}

impl ClosedCurve {
    pub fn new(shape: BoundaryShape) -> Result<Self> {
        match &shape {
            BoundaryShape::Circle { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return invalid("circle radius must be positive");
                }
                Ok(Self { length: 2.0 * PI * radius, shape, table: None, poly: Vec::new() })
            }
            BoundaryShape::Ellipse { semi_x, semi_y, .. } => {
                if !(*semi_x > 0.0 && *semi_y > 0.0) {
                    return invalid("ellipse semi-axes must be positive");
                }
                let (a, b) = (*semi_x, *semi_y);
                let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
                let cells = 512;
                let mut angles = Vec::with_capacity(cells + 1);
                let mut lengths = Vec::with_capacity(cells + 1);
                let mut acc = 0.0;
                angles.push(0.0);
                lengths.push(0.0);
                for k in 0..cells {
                    let t0 = 2.0 * PI * k as f64 / cells as f64;
                    let t1 = 2.0 * PI * (k + 1) as f64 / cells as f64;
                    let (x, w) = gauss_legendre_on(16, t0, t1);
                    acc += x.iter().zip(&w).map(|(t, w)| w * speed(*t)).sum::<f64>();
                    angles.push(t1);
                    lengths.push(acc);
                }
                let c = Vec2::new(shape_center(&shape)[0], shape_center(&shape)[1]);
                let poly = (0..2048)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / 2048.0;
                        c + Vec2::new(a * t.cos(), b * t.sin())
                    })
                    .collect();
                Ok(Self { length: acc, shape, table: Some(ArcTable { angles, lengths }), poly })
            }
        }
    }

    pub fn circle(center: [f64; 2], radius: f64) -> Result<Self> {
        Self::new(BoundaryShape::Circle { center, radius })
    }

    pub fn shape(&self) -> &BoundaryShape {
        &self.shape
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn center(&self) -> Vec2 {
        match self.shape {
            BoundaryShape::Circle { center, .. } | BoundaryShape::Ellipse { center, .. } => {
                Vec2::new(center[0], center[1])
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.shape {
            BoundaryShape::Circle { radius, .. } => 2.0 * radius,
            BoundaryShape::Ellipse { semi_x, semi_y, .. } => 2.0 * semi_x.max(semi_y),
        }
    }

    /// Copy of this curve scaled by `factor` about its center.
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        let shape = match self.shape {
            BoundaryShape::Circle { center, radius } => BoundaryShape::Circle { center, radius: radius * factor },
            BoundaryShape::Ellipse { center, semi_x, semi_y } => BoundaryShape::Ellipse {
                center,
                semi_x: semi_x * factor,
                semi_y: semi_y * factor,
            },
        };
        Self::new(shape)
    }

    /// Raw angle for the arc-length parameter `tau`.
    fn raw_angle(&self, tau: f64) -> f64 {
        let Some(table) = &self.table else { return tau };
        let BoundaryShape::Ellipse { semi_x: a, semi_y: b, .. } = self.shape else { return tau };
        let turns = (tau / (2.0 * PI)).floor();
        let t = tau - turns * 2.0 * PI;
        let target = t / (2.0 * PI) * self.length;
        let idx = match table.lengths.binary_search_by(|v| v.partial_cmp(&target).unwrap()) {
            Ok(i) => i.min(table.angles.len() - 2),
            Err(i) => i.saturating_sub(1).min(table.angles.len() - 2),
        };
        let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
        let mut th = table.angles[idx]
            + (target - table.lengths[idx]) / (table.lengths[idx + 1] - table.lengths[idx])
                * (table.angles[idx + 1] - table.angles[idx]);
        for _ in 0..30 {
            let (x, w) = gauss_legendre_on(16, table.angles[idx], th);
            let s: f64 = table.lengths[idx] + x.iter().zip(&w).map(|(t, w)| w * speed(*t)).sum::<f64>();
            let step = (s - target) / speed(th);
            th -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        th + turns * 2.0 * PI
    }

    /// Point and derivatives with respect to the arc-length parameter `tau`.
    pub fn eval(&self, tau: f64) -> CurvePoint {
        match self.shape {
            BoundaryShape::Circle { center, radius } => {
                let (s, c) = tau.sin_cos();
                CurvePoint {
                    x: Vec2::new(center[0] + radius * c, center[1] + radius * s),
                    d1: Vec2::new(-radius * s, radius * c),
                    d2: Vec2::new(-radius * c, -radius * s),
                }
            }
            BoundaryShape::Ellipse { center, semi_x: a, semi_y: b } => {
                let th = self.raw_angle(tau);
                let (s, c) = th.sin_cos();
                let x = Vec2::new(center[0] + a * c, center[1] + b * s);
                let xt = Vec2::new(-a * s, b * c);
                let xtt = Vec2::new(-a * c, -b * s);
                let v = xt.norm();
                let k = self.length / (2.0 * PI);
                // dθ/dτ = k / |x_θ|, d²θ/dτ² = -k (x_θ·x_θθ)/|x_θ|^3 · dθ/dτ
                let dth = k / v;
                let ddth = -k * xt.dot(&xtt) / (v * v * v) * dth;
                CurvePoint { x, d1: xt * dth, d2: xtt * dth * dth + xt * ddth }
            }
        }
    }

    /// Signed level function: negative inside, positive outside.
    pub fn level(&self, p: Vec2) -> f64 {
        match self.shape {
            BoundaryShape::Circle { center, radius } => (p - Vec2::new(center[0], center[1])).norm() - radius,
            BoundaryShape::Ellipse { center, semi_x, semi_y } => {
                let q = p - Vec2::new(center[0], center[1]);
                ((q.x / semi_x).powi(2) + (q.y / semi_y).powi(2)).sqrt() - 1.0
            }
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.level(p) < 0.0
    }

    /// Uniform samples at spacing at most `spacing`.
    pub fn sample(&self, spacing: f64) -> Vec<Vec2> {
        let n = ((self.length / spacing).ceil() as usize).max(16);
        (0..n).map(|j| self.eval(2.0 * PI * j as f64 / n as f64).x).collect()
    }

    /// Unsigned distance from `p` to the curve (exact for circles, polyline otherwise).
    pub fn distance(&self, p: Vec2) -> f64 {
        match self.shape {
            BoundaryShape::Circle { center, radius } => ((p - Vec2::new(center[0], center[1])).norm() - radius).abs(),
            BoundaryShape::Ellipse { .. } => {
                let pts = &self.poly;
                let n = pts.len();
                (0..n)
                    .map(|i| super::metrics::point_segment_distance(p, pts[i], pts[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Distance from `p` to the closed region bounded by the curve (zero inside).
    pub fn distance_to_region(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            0.0
        } else {
            self.distance(p)
        }
    }
}

fn shape_center(shape: &BoundaryShape) -> [f64; 2] {
    match shape {
        BoundaryShape::Circle { center, .. } | BoundaryShape::Ellipse { center, .. } => *center,
    }
}

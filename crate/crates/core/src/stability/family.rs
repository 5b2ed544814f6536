//! One-parameter crack families with Hausdorff offset `δ` from the base.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ImpedancePair;
use crate::geometry::{AprioriData, CrackCurve, CrackShape, Domain, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Perturbation {
    /// Shift by `δ` along `direction`.
    Translate { direction: [f64; 2] },
    /// Rotation about the midpoint moving the tips by `δ` along the arc.
    Rotate,
    /// Both tips pushed out by `δ` along the curve.
    Lengthen,
    /// Sagitta increased by `δ` with the tips fixed.
    Bend,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySpec {
    pub base: CrackShape,
    pub perturbation: Perturbation,
    pub magnitudes: Vec<f64>,
    pub impedance: ImpedancePair,
}

impl FamilySpec {
    /// `{0.2, 0.1, …, 0.0015625}·r0`.
    pub fn default_magnitudes(r0: f64) -> Vec<f64> {
        (0..8).map(|k| 0.2 * r0 * 0.5f64.powi(k)).collect()
    }

    pub fn base_crack(&self) -> Result<CrackCurve> {
        CrackCurve::new(self.base.clone())
    }

    /// Family member at offset `delta`.
    pub fn member(&self, delta: f64) -> Result<CrackCurve> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::OutOfRange { field: "delta", reason: format!("{delta} must be finite and nonnegative") });
        }
        let base = self.base_crack()?;
        if delta == 0.0 {
            return Ok(base);
        }
        let shape = perturb(&self.base, &base, self.perturbation, delta)?;
        CrackCurve::new(shape).map(|c| c.with_orientation(base.orientation()))
    }

    /// Members for every magnitude, checked against the a-priori class:
    /// inside `dom` with clearance `r0 / 4` and within the regularity bound.
    pub fn members(&self, dom: &Domain, apriori: &AprioriData) -> Result<Vec<(f64, CrackCurve)>> {
        let mut out = Vec::with_capacity(self.magnitudes.len());
        for &d in &self.magnitudes {
            let wrap = |e: Error| Error::InvalidInput(format!("family member at delta = {d}: {e}"));
            let c = self.member(d).map_err(wrap)?;
            c.check_in(dom).map_err(wrap)?;
            if c.distance_to_boundary(dom) < 0.25 * apriori.r0 {
                return Err(wrap(Error::InvalidInput("closer than r0/4 to the boundary".into())));
            }
            let reg = c.regularity(apriori);
            if !reg.satisfied {
                return Err(wrap(Error::InvalidInput(format!(
                    "Hölder quotient {:.3e} exceeds {:.3e}",
                    reg.holder_quotient, reg.bound
                ))));
            }
            out.push((d, c));
        }
        Ok(out)
    }
}

fn rotate(p: [f64; 2], c: Vec2, ang: f64) -> [f64; 2] {
    let (s, co) = ang.sin_cos();
    let d = Vec2::new(p[0], p[1]) - c;
    [c.x + co * d.x - s * d.y, c.y + s * d.x + co * d.y]
}

/// Arc through `a`, `b` with signed sagitta `h`, as a shape.
fn arc_shape(a: Vec2, b: Vec2, h: f64) -> Result<CrackShape> {
    if h == 0.0 {
        return Ok(CrackShape::Segment { a: [a.x, a.y], b: [b.x, b.y] });
    }
    Ok(CrackCurve::arc_through([a.x, a.y], [b.x, b.y], h)?.shape().clone())
}

/// Signed sagitta of an arc: positive when the arc bulges to the left of `a → b`.
fn sagitta(center: Vec2, r: f64, th0: f64, th1: f64) -> (Vec2, Vec2, f64) {
    let at = |t: f64| center + r * Vec2::new(t.cos(), t.sin());
    let (a, b) = (at(th0), at(th1));
    let mid = at(0.5 * (th0 + th1));
    let chord = b - a;
    let left = Vec2::new(-chord.y, chord.x).normalize();
    (a, b, (mid - 0.5 * (a + b)).dot(&left))
}

fn perturb(shape: &CrackShape, base: &CrackCurve, p: Perturbation, delta: f64) -> Result<CrackShape> {
    let mid = base.point(0.0);
    Ok(match (p, shape) {
        (Perturbation::Translate { direction }, _) => {
            let d = Vec2::new(direction[0], direction[1]);
            let n = d.norm();
            if !(n > 0.0) {
                return Err(Error::InvalidInput("translation direction must be nonzero".into()));
            }
            let t = d / n * delta;
            let sh = |q: [f64; 2]| [q[0] + t.x, q[1] + t.y];
            match shape {
                CrackShape::Segment { a, b } => CrackShape::Segment { a: sh(*a), b: sh(*b) },
                CrackShape::Arc { center, radius, theta0, theta1 } => {
                    CrackShape::Arc { center: sh(*center), radius: *radius, theta0: *theta0, theta1: *theta1 }
                }
                CrackShape::Spline { points } => CrackShape::Spline { points: points.iter().map(|q| sh(*q)).collect() },
            }
        }
        (Perturbation::Rotate, _) => {
            let half = 0.5 * base.length();
            let ang = delta / half;
            let rt = |q: [f64; 2]| rotate(q, mid, ang);
            match shape {
                CrackShape::Segment { a, b } => CrackShape::Segment { a: rt(*a), b: rt(*b) },
                CrackShape::Arc { center, radius, theta0, theta1 } => CrackShape::Arc {
                    center: rt(*center),
                    radius: *radius,
                    theta0: theta0 + ang,
                    theta1: theta1 + ang,
                },
                CrackShape::Spline { points } => CrackShape::Spline { points: points.iter().map(|q| rt(*q)).collect() },
            }
        }
        (Perturbation::Lengthen, CrackShape::Segment { a, b }) => {
            let (a, b) = (Vec2::new(a[0], a[1]), Vec2::new(b[0], b[1]));
            let t = (b - a).normalize() * delta;
            let (a, b) = (a - t, b + t);
            CrackShape::Segment { a: [a.x, a.y], b: [b.x, b.y] }
        }
        (Perturbation::Lengthen, CrackShape::Arc { center, radius, theta0, theta1 }) => {
            let dth = (delta / radius).copysign(theta1 - theta0);
            CrackShape::Arc { center: *center, radius: *radius, theta0: theta0 - dth, theta1: theta1 + dth }
        }
        (Perturbation::Bend, CrackShape::Segment { a, b }) => {
            arc_shape(Vec2::new(a[0], a[1]), Vec2::new(b[0], b[1]), delta)?
        }
        (Perturbation::Bend, CrackShape::Arc { center, radius, theta0, theta1 }) => {
            let (a, b, h) = sagitta(Vec2::new(center[0], center[1]), *radius, *theta0, *theta1);
            arc_shape(a, b, h + delta.copysign(h))?
        }
        (Perturbation::Lengthen | Perturbation::Bend, CrackShape::Spline { .. }) => {
            return Err(Error::InvalidInput("lengthen and bend families need a segment or arc base".into()));
        }
    })
}

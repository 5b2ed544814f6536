//! Hausdorff-type distances between sampled sets.

use rayon::prelude::*;
use serde::Serialize;

use super::{CrackCurve, Vec2};
use crate::error::{invalid, Result};

pub(crate) fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// A metric value with the sampling resolution that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricValue {
    pub value: f64,
    pub resolution: f64,
}

fn directed(from: &[Vec2], to: &[Vec2]) -> f64 {
    from.par_iter()
        .map(|p| to.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff_distance(s1: &[Vec2], s2: &[Vec2]) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return invalid("hausdorff_distance needs non-empty point sets");
    }
    Ok(directed(s1, s2).max(directed(s2, s1)))
}

/// Hausdorff distance between two cracks, sampled at spacing `delta`. The
/// inner distance is taken to the exact curve so the error is at most `delta`.
pub fn crack_hausdorff(c1: &CrackCurve, c2: &CrackCurve, delta: f64) -> Result<MetricValue> {
    if !(delta > 0.0) {
        return invalid("sampling resolution must be positive");
    }
    let value = directed_to_curve(&c1.sample(delta), c2).max(directed_to_curve(&c2.sample(delta), c1));
    Ok(MetricValue { value, resolution: delta })
}

pub(crate) fn directed_to_curve(from: &[Vec2], to: &CrackCurve) -> f64 {
    if let super::CrackShape::Spline { .. } = to.shape() {
        let poly = to.polyline(4096);
        return from
            .par_iter()
            .map(|p| poly.windows(2).map(|w| point_segment_distance(*p, w[0], w[1])).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max);
    }
    from.par_iter().map(|p| to.distance(*p)).reduce(|| 0.0, f64::max)
}

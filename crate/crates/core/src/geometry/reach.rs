//! Grid realization of the set of cone vertices reachable from outside.
//!
//! Ball centers are flood-filled from the exterior shell `dist(x, Ω) = r`
//! through pixels whose distance to the cracks exceeds `l` plus one pixel.
//! A point is a vertex if, for one of 64 axis directions, the cone with that
//! vertex has a reachable base center and an interior free of cracks.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{directed_to_curve, point_segment_distance};
use super::{CrackCurve, Domain, MetricValue, Vec2};
use crate::error::{invalid, Error, Result};

pub const CONE_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    /// Height-to-base-radius ratio.
    #[serde(rename = "A")]
    pub a: f64,
    pub l: f64,
}

impl ConeParams {
    /// Cone with the default aperture `A = 1/(2M)`.
    pub fn from_regularity(m: f64, l: f64) -> Self {
        Self { a: 1.0 / (2.0 * m), l }
    }

    pub fn validate(&self, r0: f64) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::OutOfRange { field: "A", reason: "must be positive".into() });
        }
        if !(self.l > 0.0 && self.l < r0) {
            return Err(Error::OutOfRange { field: "l", reason: format!("must lie in (0, r0 = {r0})") });
        }
        Ok(())
    }

    /// Radius of the smallest ball about the base center containing the cone.
    fn reach(&self) -> f64 {
        self.l * self.a.max(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct ReachableSet {
    pub origin: Vec2,
    pub spacing: f64,
    pub n: usize,
    pub cone: ConeParams,
    pub r: f64,
    centers: Vec<bool>,
    vertices: Vec<bool>,
    crack_dist: Vec<f64>,
    segments: Vec<(Vec2, Vec2)>,
    bucket_size: f64,
    bucket_n: usize,
    buckets: Vec<Vec<usize>>,
    dirs: Vec<Vec2>,
}

/// Builds the grid realization of `V_l` on an `n × n` grid.
pub fn reachable_set(dom: &Domain, cracks: &[CrackCurve], cone: ConeParams, r: f64, n: usize) -> Result<ReachableSet> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange { field: "r", reason: "must be positive".into() });
    }
    if !(cone.a > 0.0 && cone.l > 0.0) {
        return invalid("cone parameters must be positive");
    }
    if n < 16 {
        return invalid("grid too coarse");
    }
    for c in cracks {
        let d = c.distance_to_boundary(dom);
        if r >= d {
            return Err(Error::OutOfRange {
                field: "r",
                reason: format!("shell radius {r} reaches the crack (distance to boundary {d:.4})"),
            });
        }
    }

    let samples = dom.boundary.sample(dom.boundary.length() / 512.0);
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for p in &samples {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let side = (hi - lo).max() + 2.0 * r;
    let spacing = side * 1.02 / (n - 1) as f64;
    let origin = 0.5 * (lo + hi) - Vec2::repeat(0.5 * spacing * (n - 1) as f64);

    let mut segments = Vec::new();
    for c in cracks {
        let pieces = ((c.length() / (0.5 * spacing)).ceil() as usize).clamp(64, 8192);
        let pts = c.polyline(pieces);
        segments.extend(pts.windows(2).map(|w| (w[0], w[1])));
    }

    let bucket_size = cone.reach() + 2.0 * spacing;
    let bucket_n = ((side * 1.1 / bucket_size).ceil() as usize).max(1);
    let mut buckets = vec![Vec::new(); bucket_n * bucket_n];
    for (k, (a, b)) in segments.iter().enumerate() {
        let (i0, j0) = bucket_index(origin, bucket_size, bucket_n, a.inf(b));
        let (i1, j1) = bucket_index(origin, bucket_size, bucket_n, a.sup(b));
        for i in i0..=i1 {
            for j in j0..=j1 {
                buckets[j * bucket_n + i].push(k);
            }
        }
    }

    let dirs = (0..CONE_DIRECTIONS)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / CONE_DIRECTIONS as f64;
            Vec2::new(t.cos(), t.sin())
        })
        .collect();

    let mut set = ReachableSet {
        origin,
        spacing,
        n,
        cone,
        r,
        centers: vec![false; n * n],
        vertices: vec![false; n * n],
        crack_dist: vec![f64::INFINITY; n * n],
        segments,
        bucket_size,
        bucket_n,
        buckets,
        dirs,
    };

    // distance to the cracks (capped at the bucket size) and distance to Ω
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut dc = vec![f64::INFINITY; n];
            let mut dom_d = vec![0.0; n];
            for i in 0..n {
                let p = set.pixel(i, j);
                dc[i] = set.crack_distance(p);
                dom_d[i] = dom.boundary.distance_to_region(p);
            }
            (dc, dom_d)
        })
        .collect();
    let mut dom_dist = vec![0.0; n * n];
    for (j, (dc, dd)) in rows.into_iter().enumerate() {
        set.crack_dist[j * n..(j + 1) * n].copy_from_slice(&dc);
        dom_dist[j * n..(j + 1) * n].copy_from_slice(&dd);
    }

    let clearance = cone.l + spacing;
    let free = |k: usize| dom_dist[k] <= r && set.crack_dist[k] >= clearance;
    let mut queue = VecDeque::new();
    for k in 0..n * n {
        if free(k) && dom_dist[k] >= r - spacing {
            set.centers[k] = true;
            queue.push_back(k);
        }
    }
    while let Some(k) = queue.pop_front() {
        let (i, j) = (k % n, k / n);
        let mut nb = [usize::MAX; 4];
        if i > 0 {
            nb[0] = k - 1;
        }
        if i + 1 < n {
            nb[1] = k + 1;
        }
        if j > 0 {
            nb[2] = k - n;
        }
        if j + 1 < n {
            nb[3] = k + n;
        }
        for m in nb {
            if m != usize::MAX && !set.centers[m] && free(m) {
                set.centers[m] = true;
                queue.push_back(m);
            }
        }
    }

    let vertices: Vec<bool> = (0..n * n).into_par_iter().map(|k| set.contains_vertex(set.pixel(k % n, k / n))).collect();
    set.vertices = vertices;
    Ok(set)
}

fn bucket_index(origin: Vec2, size: f64, n: usize, p: Vec2) -> (usize, usize) {
    let f = |v: f64| ((v / size).floor().max(0.0) as usize).min(n - 1);
    (f(p.x - origin.x), f(p.y - origin.y))
}

impl ReachableSet {
    pub fn pixel(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64, j as f64) * self.spacing
    }

    fn nearest(&self, p: Vec2) -> Option<usize> {
        let q = (p - self.origin) / self.spacing;
        let (i, j) = (q.x.round(), q.y.round());
        if i < 0.0 || j < 0.0 || i >= self.n as f64 || j >= self.n as f64 {
            return None;
        }
        Some(j as usize * self.n + i as usize)
    }

    fn nearby_segments(&self, p: Vec2) -> impl Iterator<Item = &(Vec2, Vec2)> + '_ {
        let (bi, bj) = bucket_index(self.origin, self.bucket_size, self.bucket_n, p);
        let n = self.bucket_n;
        let mut ids: Vec<usize> = Vec::new();
        for j in bj.saturating_sub(1)..=(bj + 1).min(n - 1) {
            for i in bi.saturating_sub(1)..=(bi + 1).min(n - 1) {
                ids.extend(&self.buckets[j * n + i]);
            }
        }
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().map(move |k| &self.segments[k])
    }

    /// Distance to the cracks, or infinity beyond the bucket size.
    fn crack_distance(&self, p: Vec2) -> f64 {
        let d = self.nearby_segments(p).map(|(a, b)| point_segment_distance(p, *a, *b)).fold(f64::INFINITY, f64::min);
        if d > self.bucket_size {
            f64::INFINITY
        } else {
            d
        }
    }

    /// Whether `p` is the vertex of an admissible cone.
    pub fn contains_vertex(&self, p: Vec2) -> bool {
        let (a, l) = (self.cone.a, self.cone.l);
        let clear = l + self.spacing;
        let reach = self.cone.reach();
        for e in &self.dirs {
            let z = p - *e * (a * l);
            let Some(k) = self.nearest(z) else { continue };
            if !self.centers[k] || self.crack_dist[k] < clear {
                continue;
            }
            if self.crack_dist[k] >= reach + self.spacing {
                return true;
            }
            let perp = Vec2::new(-e.y, e.x) * l;
            let tri = [p, z + perp, z - perp];
            if !self.nearby_segments(z).any(|(s0, s1)| open_triangle_hits(&tri, *s0, *s1, 1e-2 * self.spacing)) {
                return true;
            }
        }
        false
    }

    pub fn is_center(&self, i: usize, j: usize) -> bool {
        self.centers[j * self.n + i]
    }

    pub fn is_vertex(&self, i: usize, j: usize) -> bool {
        self.vertices[j * self.n + i]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.iter().filter(|v| **v).count()
    }

    pub fn center_count(&self) -> usize {
        self.centers.iter().filter(|v| **v).count()
    }

    /// Every grid point with its vertex flag, for CSV export.
    pub fn flagged_points(&self) -> Vec<(Vec2, bool)> {
        (0..self.n * self.n).map(|k| (self.pixel(k % self.n, k / self.n), self.vertices[k])).collect()
    }

    /// Crack samples (spacing `delta`) lying on the boundary of the vertex set.
    pub fn visible_points(&self, crack: &CrackCurve, delta: f64) -> Vec<Vec2> {
        crack.sample(delta).into_par_iter().filter(|p| self.contains_vertex(*p)).collect()
    }
}

/// Whether segment `s0 s1` meets the triangle shrunk by `eta` from each edge.
fn open_triangle_hits(tri: &[Vec2; 3], s0: Vec2, s1: Vec2, eta: f64) -> bool {
    let orient = {
        let (u, v) = (tri[1] - tri[0], tri[2] - tri[0]);
        (u.x * v.y - u.y * v.x).signum()
    };
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let d = s1 - s0;
    for k in 0..3 {
        let (a, b) = (tri[k], tri[(k + 1) % 3]);
        let e = b - a;
        let nrm = Vec2::new(-e.y, e.x) * orient / e.norm();
        // f(t) = nrm · (s0 + t d - a) - eta > 0
        let f0 = nrm.dot(&(s0 - a)) - eta;
        let fd = nrm.dot(&d);
        if fd.abs() < 1e-300 {
            if f0 <= 0.0 {
                return false;
            }
            continue;
        }
        let t = -f0 / fd;
        if fd > 0.0 {
            t0 = t0.max(t);
        } else {
            t1 = t1.min(t);
        }
        if t0 >= t1 {
            return false;
        }
    }
    true
}

/// l-distance: the Hausdorff terms restricted to crack points on the
/// boundary of `V_l`. An empty restriction contributes zero.
pub fn l_distance(s1: &CrackCurve, s2: &CrackCurve, vl: &ReachableSet, delta: f64) -> Result<MetricValue> {
    if !(delta > 0.0) {
        return invalid("sampling resolution must be positive");
    }
    let v1 = vl.visible_points(s1, delta);
    let v2 = vl.visible_points(s2, delta);
    let d1 = if v1.is_empty() { 0.0 } else { directed_to_curve(&v1, s2) };
    let d2 = if v2.is_empty() { 0.0 } else { directed_to_curve(&v2, s1) };
    Ok(MetricValue { value: d1.max(d2), resolution: delta.max(vl.spacing) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_test_respects_vertex_contact() {
        let tri = [Vec2::new(0.0, 0.0), Vec2::new(-0.5, 1.0), Vec2::new(0.5, 1.0)];
        // segment through the vertex, transversal to the axis
        assert!(!open_triangle_hits(&tri, Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), 1e-6));
        // segment crossing the interior
        assert!(open_triangle_hits(&tri, Vec2::new(-1.0, 0.5), Vec2::new(1.0, 0.5), 1e-6));
        // segment fully outside
        assert!(!open_triangle_hits(&tri, Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.5), 1e-6));
        // segment fully inside
        assert!(open_triangle_hits(&tri, Vec2::new(0.0, 0.5), Vec2::new(0.0, 0.6), 1e-6));
    }
}

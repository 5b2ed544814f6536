//! Crack integrals of the reciprocity gap between two crack problems.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::forward::{Discretization, JumpSample, Solution};
use crate::geometry::{CrackCurve, Vec2};
use crate::quad::{gauss_legendre_on, AdaptiveRule};
use crate::singular::RobinField;

/// A potential defined off at most one crack, with two-sided traces on it.
pub trait CrackField: Sync {
    fn crack_curve(&self) -> Option<&CrackCurve>;
    /// Value and gradient at a point off the crack.
    fn value_grad(&self, x: Vec2) -> (f64, Vec2);
    /// Traces and fluxes at crack parameter `s`.
    fn faces(&self, s: f64) -> JumpSample;
}

impl CrackField for Solution {
    fn crack_curve(&self) -> Option<&CrackCurve> {
        self.problem().crack().map(|c| &c.curve)
    }

    fn value_grad(&self, x: Vec2) -> (f64, Vec2) {
        self.eval_with_grad(x)
    }

    fn faces(&self, s: f64) -> JumpSample {
        self.jump(s)
    }
}

impl CrackField for RobinField {
    fn crack_curve(&self) -> Option<&CrackCurve> {
        self.corrector().problem().crack().map(|c| &c.curve)
    }

    fn value_grad(&self, x: Vec2) -> (f64, Vec2) {
        self.eval_with_grad(x)
    }

    fn faces(&self, s: f64) -> JumpSample {
        self.jump(s)
    }
}

/// Quadrature settings for the crack integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackQuadrature {
    /// Gauss nodes per piece.
    pub nodes: usize,
    /// Points of one crack within this distance of the other count as shared.
    pub split_tol: f64,
    /// Absolute tolerance of adaptive refinement; `None` keeps the fixed rule.
    /// Needed when a pole sits close to a crack.
    pub adaptive_tol: Option<f64>,
}

impl CrackQuadrature {
    pub fn new(nodes: usize, split_tol: f64) -> Result<Self> {
        if nodes < 4 {
            return Err(Error::OutOfRange { field: "nodes", reason: format!("{nodes} is below 4") });
        }
        if !(split_tol >= 0.0 && split_tol.is_finite()) {
            return Err(Error::OutOfRange { field: "split_tol", reason: "must be finite and nonnegative".into() });
        }
        Ok(Self { nodes, split_tol, adaptive_tol: None })
    }

    pub fn adaptive(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::OutOfRange { field: "adaptive_tol", reason: "must be positive".into() });
        }
        self.adaptive_tol = Some(tol);
        Ok(self)
    }

    /// Enough nodes to integrate products of two crack densities of `disc`.
    pub fn for_disc(disc: &Discretization, split_tol: f64) -> Result<Self> {
        Self::new(disc.quad_nodes(), split_tol)
    }
}

/// Values and `∂_ν` on the `+` and `-` sides, `ν` the normal of the crack
/// being integrated over.
#[derive(Debug, Clone, Copy)]
struct TwoSided {
    up: f64,
    um: f64,
    dp: f64,
    dm: f64,
}

impl TwoSided {
    fn smooth(f: &dyn CrackField, x: Vec2, nu: Vec2) -> Self {
        let (u, g) = f.value_grad(x);
        let d = g.dot(&nu);
        Self { up: u, um: u, dp: d, dm: d }
    }

    /// Faces of `f`'s own crack at `s`, seen from a crack whose normal has
    /// orientation `sign` relative to it.
    fn own(f: &dyn CrackField, s: f64, sign: f64) -> Self {
        let j = f.faces(s);
        if sign >= 0.0 {
            Self { up: j.u_plus, um: j.u_minus, dp: j.flux_plus, dm: -j.flux_minus }
        } else {
            Self { up: j.u_minus, um: j.u_plus, dp: j.flux_minus, dm: -j.flux_plus }
        }
    }
}

/// `[B ∂_ν A] - [A ∂_ν B]`.
fn integrand(a: TwoSided, b: TwoSided) -> f64 {
    (b.up * a.dp - b.um * a.dm) - (a.up * b.dp - a.um * b.dm)
}

/// Maximal parameter intervals of `c` on which `pred` is constant.
fn pieces(c: &CrackCurve, pred: &dyn Fn(Vec2) -> bool) -> Vec<(f64, f64, bool)> {
    const SAMPLES: usize = 257;
    let ss: Vec<f64> = (0..SAMPLES).map(|k| -1.0 + 2.0 * k as f64 / (SAMPLES - 1) as f64).collect();
    let flags: Vec<bool> = ss.iter().map(|s| pred(c.point(*s))).collect();
    let mut out = Vec::new();
    let mut start = -1.0;
    for k in 1..SAMPLES {
        if flags[k] != flags[k - 1] {
            let (mut lo, mut hi) = (ss[k - 1], ss[k]);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if pred(c.point(mid)) == flags[k - 1] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let cut = 0.5 * (lo + hi);
            out.push((start, cut, flags[k - 1]));
            start = cut;
        }
    }
    out.push((start, 1.0, flags[SAMPLES - 1]));
    out
}

/// `∫ g dσ` over the parameter piece `[a, b]` in `s = m - h cos φ`, which
/// clusters nodes at both ends.
fn piece_integral(c: &CrackCurve, a: f64, b: f64, q: &CrackQuadrature, g: &mut dyn FnMut(f64) -> f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut f = |phi: f64| {
        let s = m - h * phi.cos();
        h * phi.sin() * c.eval(s).d1.norm() * g(s)
    };
    match q.adaptive_tol {
        Some(tol) => AdaptiveRule::new(q.nodes.min(24)).integrate(0.0, PI, tol, &mut f),
        None => {
            let (x, w) = gauss_legendre_on(q.nodes, 0.0, PI);
            x.iter().zip(&w).map(|(p, wt)| wt * f(*p)).sum()
        }
    }
}

/// `∫_{∂Ω} (Λ₁ - Λ₂) u₁ u₂` expressed on the cracks:
/// `∫_{Σ₁∖Σ₂} (u₂[∂u₁] - [u₁]∂u₂) + ∫_{Σ₂∖Σ₁} ([u₂]∂u₁ - u₁[∂u₂])
///  + ∫_{Σ₁∩Σ₂} ([u₂∂u₁] - [u₁∂u₂])`.
pub fn reciprocity_integral(u1: &dyn CrackField, u2: &dyn CrackField, q: &CrackQuadrature) -> f64 {
    let (c1, c2) = (u1.crack_curve(), u2.crack_curve());
    let mut total = 0.0;
    if let Some(c1) = c1 {
        let shared = |x: Vec2| c2.is_some_and(|c| c.distance(x) <= q.split_tol);
        for (a, b, paired) in pieces(c1, &shared) {
            total += piece_integral(c1, a, b, q, &mut |s| {
                let p = c1.eval(s);
                let nu = c1.normal(s);
                let a1 = TwoSided::own(u1, s, 1.0);
                let b2 = match (paired, c2) {
                    (true, Some(c)) => {
                        let (s2, _) = c.closest(p.x);
                        TwoSided::own(u2, s2, nu.dot(&c.normal(s2)).signum())
                    }
                    _ => TwoSided::smooth(u2, p.x, nu),
                };
                integrand(a1, b2)
            });
        }
    }
    if let Some(c2) = c2 {
        let shared = |x: Vec2| c1.is_some_and(|c| c.distance(x) <= q.split_tol);
        for (a, b, paired) in pieces(c2, &shared) {
            if paired {
                continue;
            }
            total += piece_integral(c2, a, b, q, &mut |s| {
                let p = c2.eval(s);
                let nu = c2.normal(s);
                integrand(TwoSided::smooth(u1, p.x, nu), TwoSided::own(u2, s, 1.0))
            });
        }
    }
    total
}

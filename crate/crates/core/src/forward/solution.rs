//! Discrete solutions: traces, jumps and interior evaluation.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use super::kernel::{dlp, dlp_grad, green, green_grad};
use super::problem::crack_geometry;
use super::{BoundaryDatum, CrackData, DatumKind, ForwardProblem};
use crate::geometry::Vec2;
use crate::quad::AdaptiveRule;

/// Two-sided traces at one crack point. Fluxes are `∂_{ν^±} u^±` with
/// `ν⁺ = ν` and `ν⁻ = -ν`, so the Robin conditions read `flux = γ u (+ g)`.
#[derive(Debug, Clone, Copy)]
pub struct JumpSample {
    pub s: f64,
    pub x: Vec2,
    pub u_plus: f64,
    pub u_minus: f64,
    pub flux_plus: f64,
    pub flux_minus: f64,
    /// `[u] = u⁺ - u⁻`.
    pub jump_u: f64,
    /// `[∂_ν u] = ∂_ν u⁺ - ∂_ν u⁻`.
    pub jump_flux: f64,
}

#[derive(Debug)]
struct FineBoundary {
    x: Vec<Vec2>,
    normal: Vec<Vec2>,
    w: Vec<f64>,
    u: Vec<f64>,
    q: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    problem: ForwardProblem,
    kind: DatumKind,
    u_b: Vec<f64>,
    q: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    data: CrackData,
    fine: Arc<OnceLock<FineBoundary>>,
}

const UPSAMPLE: usize = 16;

impl Solution {
    pub(crate) fn from_unknowns(problem: ForwardProblem, datum: &BoundaryDatum, data: CrackData, z: &[f64]) -> Self {
        let n = problem.boundary().n();
        let nc = problem.crack().map_or(0, |c| c.nc);
        let v = z[..n].to_vec();
        let (u_b, q) = match datum.kind {
            DatumKind::Dirichlet => (datum.values.clone(), v),
            DatumKind::Neumann => (v, datum.values.clone()),
        };
        Self {
            kind: datum.kind,
            u_b,
            q,
            a: z[n..n + nc].to_vec(),
            b: z[n + nc..n + 2 * nc].to_vec(),
            data,
            problem,
            fine: Arc::new(OnceLock::new()),
        }
    }

    pub fn problem(&self) -> &ForwardProblem {
        &self.problem
    }

    pub fn kind(&self) -> DatumKind {
        self.kind
    }

    pub fn crack_data(&self) -> CrackData {
        self.data
    }

    /// Trace on the outer boundary at the Nyström nodes.
    pub fn boundary_trace(&self) -> &[f64] {
        &self.u_b
    }

    /// Outward flux on the outer boundary at the Nyström nodes.
    pub fn boundary_flux(&self) -> &[f64] {
        &self.q
    }

    /// Galerkin coefficients of `[u]` (in `sin((n+1)θ)`) and of the average
    /// trace (in `cos(nθ)`).
    pub fn crack_coefficients(&self) -> (&[f64], &[f64]) {
        (&self.a, &self.b)
    }

    /// Adds a constant to the solution (shifts boundary and crack averages).
    pub fn shifted(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.u_b.iter_mut().for_each(|v| *v += c);
        if !s.b.is_empty() {
            s.b[0] += c;
        }
        s.fine = Arc::new(OnceLock::new());
        s
    }

    fn densities_at_theta(&self, th: f64) -> (f64, f64) {
        let mut mu = 0.0;
        let mut ubar = 0.0;
        for (k, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            mu += a * ((k + 1) as f64 * th).sin();
            ubar += b * (k as f64 * th).cos();
        }
        (mu, ubar)
    }

    /// Crack point, normal, arc-length speed factor and the two densities
    /// `(μ, σ)` at angle `θ`.
    fn crack_state(&self, th: f64) -> (Vec2, Vec2, f64, f64, f64) {
        let c = self.problem.crack().expect("crack");
        let (s, x, xt, _) = crack_geometry(&c.curve, &c.map, th.cos());
        let sp = xt.norm();
        let nu = Vec2::new(-xt.y, xt.x) / sp * c.curve.orientation();
        let (gp, gm) = self.problem.impedance().eval(s);
        let (mu, ubar) = self.densities_at_theta(th);
        let (dp, dm) = c.data_at(&self.data, x, nu, gp, gm);
        let sigma = (gp + gm) * ubar + 0.5 * (gp - gm) * mu + dp + dm;
        (x, nu, sp * th.sin(), mu, sigma)
    }

    /// Traces, fluxes and jumps at curve parameter `s`.
    pub fn jump(&self, s: f64) -> JumpSample {
        let c = self.problem.crack().expect("jump needs a crack");
        let t = c.map.inverse(s.clamp(-1.0, 1.0)).clamp(-1.0, 1.0);
        let th = t.acos();
        let (x, xt) = {
            let (_, x, xt, _) = crack_geometry(&c.curve, &c.map, t);
            (x, xt)
        };
        let nu = Vec2::new(-xt.y, xt.x) / xt.norm() * c.curve.orientation();
        let (gp, gm) = self.problem.impedance().eval(s);
        let (mu, ubar) = self.densities_at_theta(th);
        let (dp, dm) = c.data_at(&self.data, x, nu, gp, gm);
        let up = ubar + 0.5 * mu;
        let um = ubar - 0.5 * mu;
        let fp = gp * up + dp;
        let fm = gm * um + dm;
        JumpSample { s, x, u_plus: up, u_minus: um, flux_plus: fp, flux_minus: fm, jump_u: mu, jump_flux: fp + fm }
    }

    /// Intensity `lim [u] / √d` at the tips `s = -1` and `s = 1`, with `d`
    /// the distance to the tip.
    pub fn tip_intensity(&self) -> Option<[f64; 2]> {
        let c = self.problem.crack()?;
        let mut k = [0.0; 2];
        for (n, a) in self.a.iter().enumerate() {
            let w = (n + 1) as f64 * a;
            k[1] += w;
            k[0] += if n % 2 == 0 { w } else { -w };
        }
        let sp = |t: f64| crack_geometry(&c.curve, &c.map, t).2.norm();
        Some([k[0] * (2.0 / sp(-1.0)).sqrt(), k[1] * (2.0 / sp(1.0)).sqrt()])
    }

    /// `(∫_{∂Ω} ∂_n u, ∫_Σ [∂_ν u])`; equal for exact solutions.
    pub fn flux_balance(&self) -> (f64, f64) {
        let bnd = self.problem.boundary();
        let outer: f64 = self.q.iter().zip(&bnd.w).map(|(q, w)| q * w).sum();
        let inner = match self.problem.crack() {
            None => 0.0,
            Some(c) => (0..c.nq()).map(|q| self.crack_state(c.theta[q]).4 * c.ds[q]).sum(),
        };
        (outer, inner)
    }

    /// Minimum over the boundary nodes and `samples` points on each crack face.
    pub fn sampled_minimum(&self, samples: usize) -> f64 {
        let mut m = self.u_b.iter().cloned().fold(f64::INFINITY, f64::min);
        if self.problem.crack().is_some() {
            for k in 0..samples {
                let s = -1.0 + 2.0 * k as f64 / (samples - 1) as f64;
                let j = self.jump(s);
                m = m.min(j.u_plus).min(j.u_minus);
            }
        }
        m
    }

    fn fine(&self) -> &FineBoundary {
        self.fine.get_or_init(|| {
            let bnd = self.problem.boundary();
            let n = bnd.n();
            let m = n * UPSAMPLE;
            let interp_u = trig_interpolate(&self.u_b, UPSAMPLE);
            let interp_q = trig_interpolate(&self.q, UPSAMPLE);
            let mut x = Vec::with_capacity(m);
            let mut normal = Vec::with_capacity(m);
            let mut w = Vec::with_capacity(m);
            for j in 0..m {
                let p = bnd.curve.eval(2.0 * PI * j as f64 / m as f64);
                x.push(p.x);
                normal.push(p.normal());
                w.push(p.speed() * 2.0 * PI / m as f64);
            }
            FineBoundary { x, normal, w, u: interp_u, q: interp_q }
        })
    }

    /// Value and gradient at an interior point off the crack.
    pub fn eval_with_grad(&self, x: Vec2) -> (f64, Vec2) {
        let ls = self.problem.inner().log_scale;
        let bnd = self.problem.boundary();
        let h = bnd.length() / bnd.n() as f64;
        let near = bnd.curve.distance(x) < 6.0 * h;
        let (mut u, mut g) = (0.0, Vec2::zeros());
        let mut add = |xs: &[Vec2], ns: &[Vec2], ws: &[f64], us: &[f64], qs: &[f64]| {
            for j in 0..xs.len() {
                u += ws[j] * (green(x, xs[j], ls) * qs[j] - dlp(x, xs[j], ns[j]) * us[j]);
                g += ws[j] * (green_grad(x, xs[j]) * qs[j] - dlp_grad(x, xs[j], ns[j]) * us[j]);
            }
        };
        if near {
            let f = self.fine();
            add(&f.x, &f.normal, &f.w, &f.u, &f.q);
        } else {
            add(&bnd.x, &bnd.normal, &bnd.w, &self.u_b, &self.q);
        }
        if let Some(c) = self.problem.crack() {
            let dmin = c.x.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
            let len = c.curve.length();
            let term = |th: f64| -> (f64, Vec2) {
                let (y, nu, jac, mu, sigma) = self.crack_state(th);
                (
                    jac * (-green(x, y, ls) * sigma + dlp(x, y, nu) * mu),
                    jac * (-green_grad(x, y) * sigma + dlp_grad(x, y, nu) * mu),
                )
            };
            if dmin > 0.5 * len {
                for q in 0..c.nq() {
                    let (v, gv) = term(c.theta[q]);
                    u += c.wq[q] * v;
                    g += c.wq[q] * gv;
                }
            } else {
                let rule = AdaptiveRule::default();
                let tol = 1e-12;
                // The gradient scales like 1/d near the crack.
                let d = c.curve.distance(x).max(1e-9);
                u += rule.integrate(0.0, PI, tol, &mut |th| term(th).0);
                let gtol = 1e-10 * (1.0 + 1.0 / d);
                let gx = rule.integrate(0.0, PI, gtol, &mut |th| term(th).1.x);
                let gy = rule.integrate(0.0, PI, gtol, &mut |th| term(th).1.y);
                g += Vec2::new(gx, gy);
            }
        }
        (u, g)
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        self.eval_with_grad(x).0
    }
}

/// Trigonometric interpolation of periodic nodal values onto `factor`× as many nodes.
fn trig_interpolate(v: &[f64], factor: usize) -> Vec<f64> {
    let n = v.len();
    let half = n / 2;
    let mut ca = vec![0.0; half + 1];
    let mut sa = vec![0.0; half + 1];
    for k in 0..=half {
        for (j, val) in v.iter().enumerate() {
            let ang = 2.0 * PI * (k * j) as f64 / n as f64;
            ca[k] += val * ang.cos();
            sa[k] += val * ang.sin();
        }
        let scale = if k == 0 || k == half { 1.0 } else { 2.0 } / n as f64;
        ca[k] *= scale;
        sa[k] *= scale;
    }
    sa[half] = 0.0;
    let m = n * factor;
    (0..m)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / m as f64;
            (0..=half).map(|k| ca[k] * (k as f64 * t).cos() + sa[k] * (k as f64 * t).sin()).sum()
        })
        .collect()
}

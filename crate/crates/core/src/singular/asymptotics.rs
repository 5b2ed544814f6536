//! Regression checks of the Robin function near a crack point.

use serde::{Deserialize, Serialize};

use super::{robin_function, EnlargedDomain, HalfSpaceRobin};
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LinearFit};
use crate::forward::{Discretization, ImpedancePair};
use crate::geometry::{CrackCurve, Vec2};

/// Pole offsets `h` along the crack normal, strictly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleLadder {
    pub h: Vec<f64>,
}

impl PoleLadder {
    /// `h_k = h0 · ratio^k`, `k = 0..rungs`.
    pub fn geometric(h0: f64, ratio: f64, rungs: usize) -> Result<Self> {
        if !(h0 > 0.0 && ratio > 0.0 && ratio < 1.0) || rungs == 0 {
            return Err(Error::InvalidInput("ladder needs h0 > 0, 0 < ratio < 1 and at least one rung".into()));
        }
        Ok(Self { h: (0..rungs).map(|k| h0 * ratio.powi(k as i32)).collect() })
    }

    /// `r0 · 2^{-3} … r0 · 2^{-8}`.
    pub fn default_for(r0: f64) -> Self {
        Self { h: (3..=8).map(|k| r0 * 0.5f64.powi(k)).collect() }
    }
}

/// Fitted exponents near a crack point `x0` for poles `y = x0 + h ν(x0)`.
/// Values are compared at `z_h`, the crack point at arc distance `h` from
/// `x0`, so that `|z_h - y| ≈ √2 h`.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub x0: [f64; 2],
    pub s0: f64,
    pub gamma0: f64,
    pub h: Vec<f64>,
    /// `|Δ(z_h) - Δ(x0)|` with `Δ = R⁺ - R₀`; the difference removes the
    /// additive constant that both logarithmic functions leave free.
    pub value_error: Vec<f64>,
    /// `|∇R⁺(z_h) - ∇R₀(z_h)|`.
    pub grad_error: Vec<f64>,
    /// `|∇R⁺(z_h)|`.
    pub grad_norm: Vec<f64>,
    pub value_fit: LinearFit,
    pub grad_error_fit: LinearFit,
    pub grad_fit: LinearFit,
    /// Distances ahead of the nearer tip and `|∇R|` there, for a fixed pole.
    pub tip_distance: Vec<f64>,
    pub tip_grad_norm: Vec<f64>,
    pub tip_fit: LinearFit,
    pub targets: Targets,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Targets {
    /// `2 - n + α`.
    pub value: f64,
    /// `1 - n + α²`.
    pub grad_error: f64,
    /// `1 - n`.
    pub grad: f64,
    /// Square-root tip behavior.
    pub tip: f64,
    pub value_slack: f64,
    pub grad_tolerance: f64,
}

impl AsymptoticReport {
    pub fn value_ok(&self) -> bool {
        self.value_fit.slope >= self.targets.value - self.targets.value_slack
    }

    pub fn grad_ok(&self) -> bool {
        (self.grad_fit.slope - self.targets.grad).abs() <= self.targets.grad_tolerance
    }

    /// `|∇R|` grows no faster than the square-root rate at the tip.
    pub fn tip_ok(&self) -> bool {
        self.tip_fit.slope >= self.targets.tip - self.targets.grad_tolerance
    }
}

/// Builds the Robin functions along `ladder` and fits the exponents.
#[allow(clippy::too_many_arguments)]
pub fn asymptotic_report(
    env: &EnlargedDomain,
    crack: &CrackCurve,
    imp: &ImpedancePair,
    s0: f64,
    ladder: &PoleLadder,
    disc: &Discretization,
    alpha: f64,
) -> Result<AsymptoticReport> {
    if ladder.h.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("pole ladder must be strictly decreasing".into()));
    }
    let p0 = crack.eval(s0);
    let speed = p0.d1.norm();
    let x0 = p0.x;
    let nu = crack.normal(s0);
    let gamma0 = imp.eval(s0).0;
    let r0_plane = HalfSpaceRobin::new(gamma0, x0, nu)?;
    let tip_gap = |s: f64| (1.0 - s.abs()) * speed;

    let (mut hs, mut ve, mut ge, mut gn) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &h in &ladder.h {
        let sh = s0 + h / speed;
        if tip_gap(sh) < h || tip_gap(s0) < h {
            continue;
        }
        let y = x0 + h * nu;
        let field = robin_function(env, Some(crack), imp, y, disc)?;
        let (j0, jh) = (field.jump(s0), field.jump(sh));
        let (r0_at_x0, _) = r0_plane.eval_on_side(y, x0)?;
        let (r0_at_z, r0_grad_z) = r0_plane.eval_on_side(y, jh.x)?;
        let delta = (jh.u_plus - r0_at_z) - (j0.u_plus - r0_at_x0);
        let grad = field.face_gradient(sh, 1.0);
        hs.push(h);
        ve.push(delta.abs());
        ge.push((grad - r0_grad_z).norm());
        gn.push(grad.norm());
    }
    if hs.len() < 6 {
        return Err(Error::InvalidInput(format!("only {} usable pole offsets, need 6", hs.len())));
    }
    let value_fit = loglog_fit(&hs, &ve)?;
    let grad_error_fit = loglog_fit(&hs, &ge)?;
    let grad_fit = loglog_fit(&hs, &gn)?;

    // Tip: pole at a fixed offset, gradient sampled ahead of the nearer tip.
    let (s_tip, outward) = if s0 >= 0.0 { (1.0, 1.0) } else { (-1.0, -1.0) };
    let tp = crack.eval(s_tip);
    let dir = tp.d1 / tp.d1.norm() * outward;
    let y = x0 + ladder.h[0] * nu;
    let field = robin_function(env, Some(crack), imp, y, disc)?;
    let scale = ladder.h[0];
    let td: Vec<f64> = (2..8).map(|k| scale * 0.5f64.powi(k)).collect();
    let tg: Vec<f64> = td.iter().map(|d| field.eval_with_grad(tp.x + *d * dir).1.norm()).collect();
    let tip_fit = loglog_fit(&td, &tg)?;

    Ok(AsymptoticReport {
        x0: [x0.x, x0.y],
        s0,
        gamma0,
        h: hs,
        value_error: ve,
        grad_error: ge,
        grad_norm: gn,
        value_fit,
        grad_error_fit,
        grad_fit,
        tip_distance: td,
        tip_grad_norm: tg,
        tip_fit,
        targets: Targets {
            value: alpha,
            grad_error: alpha * alpha - 1.0,
            grad: -1.0,
            tip: -0.5,
            value_slack: 0.15,
            grad_tolerance: 0.1,
        },
    })
}

impl HalfSpaceRobin {
    /// Like `eval`, with `x` moved onto the closed half-plane of the pole when
    /// it lies slightly on the far side (curved cracks).
    pub fn eval_on_side(&self, y: Vec2, x: Vec2) -> Result<(f64, Vec2)> {
        let side = (y - self.origin).dot(&self.normal).signum();
        let off = (x - self.origin).dot(&self.normal) * side;
        let x = if off < 0.0 { x - off * side * self.normal } else { x };
        self.eval(y, x)
    }
}

//! Robin function of a half-plane.
//!
//! For the upper half-plane `{x₂ > 0}`, the condition `∂_{x₂} R₀ = γ₀ R₀` on
//! `{x₂ = 0}` and a pole at `y`,
//! `R₀ = Γ(x - y) + Γ(x - y*) - 2γ₀ ∫₀^∞ e^{-γ₀ t} Γ(x - y* + t e₂) dt`
//! with `y*` the mirror image of `y`. The line source below the mirror
//! point turns the Neumann image into a Robin image.

use crate::error::{Error, Result};
use crate::forward::kernel::{green, green_grad};
use crate::geometry::Vec2;
use crate::quad::AdaptiveRule;

const TOL: f64 = 1e-10;
/// Decay lengths `1/γ₀` covered by the quadrature; the tail is below `e^{-45}`.
const DECAY_LENGTHS: f64 = 45.0;

/// `(R₀, ∇R₀)` at `x` for the plane `{x₂ = 0}` and pole `y` (`y₂ ≠ 0`).
/// Points on the far side of the plane give zero: the two half-planes are
/// decoupled by the Robin conditions.
pub fn halfspace_robin(gamma0: f64, y: Vec2, x: Vec2) -> Result<(f64, Vec2)> {
    if !(gamma0 >= 0.0 && gamma0.is_finite()) {
        return Err(Error::OutOfRange { field: "gamma0", reason: format!("{gamma0} must be finite and nonnegative") });
    }
    if y.y == 0.0 || !y.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("half-plane pole must lie off the plane".into()));
    }
    if x == y {
        return Err(Error::InvalidInput("evaluation point coincides with the pole".into()));
    }
    // Work in the upper half-plane.
    let flip = y.y < 0.0;
    let (y, x) = if flip { (Vec2::new(y.x, -y.y), Vec2::new(x.x, -x.y)) } else { (y, x) };
    if x.y < 0.0 {
        return Ok((0.0, Vec2::zeros()));
    }
    let ys = Vec2::new(y.x, -y.y);
    let mut val = green(x, y, 1.0) + green(x, ys, 1.0);
    let mut grad = green_grad(x, y) + green_grad(x, ys);
    if gamma0 > 0.0 {
        let rule = AdaptiveRule::default();
        let t_max = DECAY_LENGTHS / gamma0;
        let e2 = Vec2::new(0.0, 1.0);
        let src = |t: f64| ys - t * e2;
        let iv = rule.integrate(0.0, t_max, TOL / (2.0 * gamma0), &mut |t| (-gamma0 * t).exp() * green(x, src(t), 1.0));
        let gx = rule.integrate(0.0, t_max, TOL / (2.0 * gamma0), &mut |t| {
            (-gamma0 * t).exp() * green_grad(x, src(t)).x
        });
        let gy = rule.integrate(0.0, t_max, TOL / (2.0 * gamma0), &mut |t| {
            (-gamma0 * t).exp() * green_grad(x, src(t)).y
        });
        val -= 2.0 * gamma0 * iv;
        grad -= 2.0 * gamma0 * Vec2::new(gx, gy);
    }
    if flip {
        grad.y = -grad.y;
    }
    Ok((val, grad))
}

/// Half-plane Robin function in a general frame: the plane passes through
/// `origin` with unit normal `normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpaceRobin {
    pub gamma0: f64,
    pub origin: Vec2,
    pub normal: Vec2,
}

impl HalfSpaceRobin {
    pub fn new(gamma0: f64, origin: Vec2, normal: Vec2) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidInput("half-plane normal must be nonzero".into()));
        }
        Ok(Self { gamma0, origin, normal: normal / n })
    }

    fn to_local(&self, p: Vec2) -> Vec2 {
        let t = Vec2::new(self.normal.y, -self.normal.x);
        let d = p - self.origin;
        Vec2::new(d.dot(&t), d.dot(&self.normal))
    }

    /// `(R₀(x, y), ∇_x R₀(x, y))`.
    pub fn eval(&self, y: Vec2, x: Vec2) -> Result<(f64, Vec2)> {
        let (v, g) = halfspace_robin(self.gamma0, self.to_local(y), self.to_local(x))?;
        let t = Vec2::new(self.normal.y, -self.normal.x);
        Ok((v, g.x * t + g.y * self.normal))
    }
}

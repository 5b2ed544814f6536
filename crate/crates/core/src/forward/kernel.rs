//! Laplace kernels in the plane.

use std::f64::consts::PI;

use crate::geometry::Vec2;

pub const INV_2PI: f64 = 0.5 / PI;

/// Fundamental solution `-(1/2π) log(|x - y| / scale)`.
#[inline]
pub fn green(x: Vec2, y: Vec2, scale: f64) -> f64 {
    -INV_2PI * ((x - y).norm() / scale).ln()
}

/// Gradient of the fundamental solution with respect to `x`.
#[inline]
pub fn green_grad(x: Vec2, y: Vec2) -> Vec2 {
    let d = x - y;
    -INV_2PI * d / d.norm_squared()
}

/// `∂_{n_y} Γ(x, y)`, the double-layer kernel.
#[inline]
pub fn dlp(x: Vec2, y: Vec2, ny: Vec2) -> f64 {
    let d = x - y;
    INV_2PI * d.dot(&ny) / d.norm_squared()
}

/// `∇_x ∂_{n_y} Γ(x, y)`.
#[inline]
pub fn dlp_grad(x: Vec2, y: Vec2, ny: Vec2) -> Vec2 {
    let d = x - y;
    let r2 = d.norm_squared();
    INV_2PI * (ny / r2 - 2.0 * d.dot(&ny) * d / (r2 * r2))
}

/// `∂_{n_x} Γ(x, y)`, the adjoint double-layer kernel.
#[inline]
pub fn adlp(x: Vec2, nx: Vec2, y: Vec2) -> f64 {
    let d = x - y;
    -INV_2PI * d.dot(&nx) / d.norm_squared()
}

/// `∂_{n_x} ∂_{n_y} Γ(x, y)`.
#[inline]
pub fn hyper(x: Vec2, nx: Vec2, y: Vec2, ny: Vec2) -> f64 {
    dlp_grad(x, y, ny).dot(&nx)
}

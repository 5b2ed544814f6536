//! Mixed Dirichlet/Neumann–Robin crack problems by a boundary integral method.
//!
//! The potential is represented as
//! `u = S q - D u_b - S_Σ [∂_ν u] + D_Σ [u]` with single/double layers on the
//! outer boundary and on the crack. The outer boundary is discretized by a
//! Nyström rule with logarithmic product quadrature, the crack by a Galerkin
//! method in the cosine variable `t = cos θ`: jumps in `sin((n+1)θ)` (square
//! root behavior at both tips built in) and averages in `cos(nθ)`.

pub(crate) mod kernel;
mod param;
mod problem;
mod solution;

pub use param::ParamMap;
pub use problem::{BoundaryDisc, CrackDisc, ForwardProblem};
pub use solution::{JumpSample, Solution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CrackCurve, Domain, Vec2};

/// Impedances on the two crack faces, as knot values uniformly spaced over the
/// crack parameter `[-1, 1]` and linearly interpolated. One knot means a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedancePair {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl ImpedancePair {
    pub fn constant(plus: f64, minus: f64) -> Self {
        Self { plus: vec![plus], minus: vec![minus] }
    }

    pub fn insulating() -> Self {
        Self::constant(0.0, 0.0)
    }

    fn interp(knots: &[f64], s: f64) -> f64 {
        match knots.len() {
            0 => 0.0,
            1 => knots[0],
            n => {
                let x = (s.clamp(-1.0, 1.0) + 1.0) * 0.5 * (n - 1) as f64;
                let i = (x.floor() as usize).min(n - 2);
                let f = x - i as f64;
                knots[i] * (1.0 - f) + knots[i + 1] * f
            }
        }
    }

    /// `(γ⁺, γ⁻)` at crack parameter `s`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        (Self::interp(&self.plus, s), Self::interp(&self.minus, s))
    }

    pub fn is_insulating(&self) -> bool {
        self.plus.iter().chain(&self.minus).all(|g| *g == 0.0)
    }

    pub fn validate(&self, gamma_bar: f64) -> Result<()> {
        if self.plus.is_empty() || self.minus.is_empty() {
            return Err(Error::InvalidInput("impedance needs at least one knot per side".into()));
        }
        for g in self.plus.iter().chain(&self.minus) {
            if !(g.is_finite() && *g >= 0.0 && *g <= gamma_bar) {
                return Err(Error::OutOfRange {
                    field: "gamma",
                    reason: format!("impedance value {g} outside [0, gamma_bar = {gamma_bar}]"),
                });
            }
        }
        Ok(())
    }

    pub fn swapped(&self) -> Self {
        Self { plus: self.minus.clone(), minus: self.plus.clone() }
    }
}

/// Node counts of the discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// Nyström nodes on the outer boundary (even).
    pub n_boundary: usize,
    /// Galerkin modes per crack density.
    pub n_crack: usize,
    /// Gauss–Legendre nodes on the crack; `None` picks `2 n_crack + 40`.
    #[serde(default)]
    pub n_quad: Option<usize>,
}

impl Default for Discretization {
    fn default() -> Self {
        Self { n_boundary: 256, n_crack: 48, n_quad: None }
    }
}

impl Discretization {
    pub fn doubled(&self) -> Self {
        Self { n_boundary: 2 * self.n_boundary, n_crack: 2 * self.n_crack, n_quad: self.n_quad.map(|q| 2 * q) }
    }

    pub fn quad_nodes(&self) -> usize {
        self.n_quad.unwrap_or(2 * self.n_crack + 40)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_boundary < 16 || self.n_boundary % 2 == 1 {
            return Err(Error::OutOfRange { field: "n_boundary", reason: "must be even and at least 16".into() });
        }
        if self.n_crack < 2 {
            return Err(Error::OutOfRange { field: "n_crack", reason: "must be at least 2".into() });
        }
        if self.quad_nodes() < self.n_crack + 2 {
            return Err(Error::OutOfRange { field: "n_quad", reason: "must exceed n_crack + 1".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    Dirichlet,
    Neumann,
}

/// Boundary values (Dirichlet) or fluxes (Neumann) at the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDatum {
    pub kind: DatumKind,
    pub values: Vec<f64>,
}

impl BoundaryDatum {
    pub fn dirichlet(values: Vec<f64>) -> Self {
        Self { kind: DatumKind::Dirichlet, values }
    }

    pub fn neumann(values: Vec<f64>) -> Self {
        Self { kind: DatumKind::Neumann, values }
    }
}

/// Extra inhomogeneity on the crack faces: `∂_ν u⁺ = γ⁺u⁺ + g⁺`,
/// `∂_ν u⁻ = -γ⁻u⁻ - g⁻`. A pole `y` produces the data that make
/// `Γ(·, y) + u` satisfy the homogeneous Robin conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrackData {
    None,
    Pole(Vec2),
}

/// Solves with a fresh discretization of `(dom, crack)`.
pub fn solve(
    dom: &Domain,
    crack: Option<&CrackCurve>,
    imp: &ImpedancePair,
    datum: &BoundaryDatum,
    disc: &Discretization,
) -> Result<Solution> {
    ForwardProblem::new(dom, crack, imp, disc)?.solve(datum)
}

/// Jumps `([u], [∂_ν u])` sampled at the given crack parameters.
pub fn trace_and_jump(sol: &Solution, params: &[f64]) -> Result<Vec<JumpSample>> {
    if sol.problem().crack().is_none() {
        return Err(Error::InvalidInput("trace_and_jump needs a solution with a crack".into()));
    }
    Ok(params.iter().map(|s| sol.jump(*s)).collect())
}

/// Solution of the problem with unit outward flux on the outer boundary.
/// Its minimum over boundary and crack samples must be positive.
pub fn solve_positive(problem: &ForwardProblem) -> Result<(Solution, f64)> {
    if problem.crack().is_none() || problem.impedance().is_insulating() {
        return Err(Error::InvalidInput(
            "unit boundary flux is only compatible with a crack carrying positive impedance".into(),
        ));
    }
    let n = problem.boundary().n();
    let sol = problem.solve(&BoundaryDatum::neumann(vec![1.0; n]))?;
    let min = sol.sampled_minimum(256);
    if !(min > 0.0) {
        return Err(Error::CheckFailed(format!("positive solution has minimum {min:.3e}")));
    }
    Ok((sol, min))
}

/// Writes `s,u_plus,u_minus,flux_plus,flux_minus` rows at `samples` parameters.
pub fn write_crack_csv<W: std::io::Write>(mut w: W, sol: &Solution, samples: usize) -> std::io::Result<()> {
    writeln!(w, "s,u_plus,u_minus,flux_plus,flux_minus")?;
    for k in 0..samples {
        let s = -1.0 + 2.0 * (k as f64 + 0.5) / samples as f64;
        let j = sol.jump(s);
        writeln!(w, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", s, j.u_plus, j.u_minus, j.flux_plus, j.flux_minus)?;
    }
    Ok(())
}

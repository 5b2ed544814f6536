//! Robin functions: singular solutions with a point pole on an enlarged
//! domain containing the crack.

mod asymptotics;
mod halfspace;

pub use asymptotics::{asymptotic_report, AsymptoticReport, PoleLadder};
pub use halfspace::{halfspace_robin, HalfSpaceRobin};

use crate::error::{Error, Result};
use crate::forward::kernel::{adlp, green, green_grad};
use crate::forward::{
    BoundaryDatum, BoundaryDisc, CrackData, Discretization, ForwardProblem, ImpedancePair, JumpSample, ParamMap,
    Solution,
};
use crate::geometry::{CrackCurve, Domain, Vec2};

/// `Ω̃ ⊃⊃ Ω`: the domain dilated about its center.
#[derive(Debug, Clone)]
pub struct EnlargedDomain {
    pub omega: Domain,
    pub tilde: Domain,
    pub factor: f64,
}

impl EnlargedDomain {
    pub const DEFAULT_FACTOR: f64 = 1.3;

    pub fn new(omega: &Domain, factor: f64) -> Result<Self> {
        if !(factor > 1.0 && factor.is_finite()) {
            return Err(Error::OutOfRange { field: "factor", reason: format!("dilation {factor} must exceed 1") });
        }
        Ok(Self { omega: omega.clone(), tilde: omega.dilated(factor)?, factor })
    }

    pub fn around(omega: &Domain) -> Result<Self> {
        Self::new(omega, Self::DEFAULT_FACTOR)
    }

    /// Smallest distance between `∂Ω` and `∂Ω̃`.
    pub fn clearance(&self) -> f64 {
        let h = self.omega.boundary.length() / 2048.0;
        self.omega.boundary.sample(h).iter().map(|p| self.tilde.boundary.distance(*p)).fold(f64::INFINITY, f64::min)
    }

    /// Whether `p` lies in the shell `Ω̃ ∖ Ω̄`.
    pub fn in_shell(&self, p: Vec2) -> bool {
        self.tilde.contains(p) && !self.omega.contains(p) && self.omega.boundary.distance(p) > 0.0
    }

    /// Distance from `p` to `Ω̄` (zero inside).
    pub fn distance_to_omega(&self, p: Vec2) -> f64 {
        self.omega.boundary.distance_to_region(p)
    }
}

/// `R(·, y) = Γ(·, y) + corrector` with `∂_ν R = -1/|∂Ω̃|` on `∂Ω̃` and the
/// homogeneous Robin conditions on both crack faces.
#[derive(Debug, Clone)]
pub struct RobinField {
    pole: Vec2,
    corrector: Solution,
    gauge: f64,
}

/// Pole clustering width relative to the crack parameter interval.
const CLUSTER_WIDTH: f64 = 0.5;

/// Builds `R(·, y)` on `env.tilde` with the given crack.
pub fn robin_function(
    env: &EnlargedDomain,
    crack: Option<&CrackCurve>,
    imp: &ImpedancePair,
    y: Vec2,
    disc: &Discretization,
) -> Result<RobinField> {
    if !env.tilde.contains(y) {
        return Err(Error::InvalidInput(format!("pole ({:.4}, {:.4}) is outside the enlarged domain", y.x, y.y)));
    }
    let bnd_len = env.tilde.boundary.length();
    let h = bnd_len / disc.n_boundary as f64;
    if env.tilde.boundary.distance(y) < 4.0 * h {
        return Err(Error::InvalidInput("pole too close to the enlarged boundary".into()));
    }
    let crack = crack.filter(|c| c.length() > 0.0);
    let map = match crack {
        Some(c) => {
            let (s0, d) = c.closest(y);
            if d <= 1e-12 * c.length() {
                return Err(Error::InvalidInput("pole lies on the crack".into()));
            }
            ParamMap::cluster(s0, CLUSTER_WIDTH * 2.0 * d / c.length())
        }
        None => ParamMap::Identity,
    };
    let problem = ForwardProblem::with_map(&env.tilde, crack, imp, disc, map)?;
    robin_on(&problem, y)
}

/// `robin_function` for each pole, in parallel.
pub fn robin_batch(
    env: &EnlargedDomain,
    crack: Option<&CrackCurve>,
    imp: &ImpedancePair,
    poles: &[Vec2],
    disc: &Discretization,
) -> Result<Vec<RobinField>> {
    use rayon::prelude::*;
    poles.par_iter().map(|y| robin_function(env, crack, imp, *y, disc)).collect()
}

/// Builds `R(·, y)` on an already discretized enlarged problem.
pub fn robin_on(problem: &ForwardProblem, y: Vec2) -> Result<RobinField> {
    let bnd = problem.boundary();
    let len = bnd.length();
    let mut flux: Vec<f64> = bnd.x.iter().zip(&bnd.normal).map(|(x, n)| -1.0 / len - adlp(*x, *n, y)).collect();
    // Constants are free: remove the quadrature error in the zero total
    // flux and fix ∫_{∂Ω̃} R = 0.
    let mean = if problem.neumann_is_singular() {
        let total: f64 = flux.iter().zip(&bnd.w).map(|(f, w)| f * w).sum();
        flux.iter_mut().for_each(|f| *f -= total / len);
        -bnd.x.iter().zip(&bnd.w).map(|(x, w)| w * green(*x, y, 1.0)).sum::<f64>()
    } else {
        0.0
    };
    let data = if problem.crack().is_some() { CrackData::Pole(y) } else { CrackData::None };
    let corrector = problem.solve_with(&BoundaryDatum::neumann(flux), data, mean)?;
    Ok(RobinField { pole: y, corrector, gauge: 0.0 })
}

impl RobinField {
    pub fn pole(&self) -> Vec2 {
        self.pole
    }

    pub fn corrector(&self) -> &Solution {
        &self.corrector
    }

    /// Copy with `c` added to the corrector.
    pub fn with_gauge(&self, c: f64) -> Self {
        Self { gauge: self.gauge + c, ..self.clone() }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        green(x, self.pole, 1.0) + self.corrector.eval(x) + self.gauge
    }

    pub fn eval_with_grad(&self, x: Vec2) -> (f64, Vec2) {
        let (u, g) = self.corrector.eval_with_grad(x);
        (green(x, self.pole, 1.0) + u + self.gauge, green_grad(x, self.pole) + g)
    }

    /// Values at the nodes of another boundary (typically `∂Ω`).
    pub fn boundary_values(&self, bnd: &BoundaryDisc) -> Vec<f64> {
        bnd.x.iter().map(|x| self.eval(*x)).collect()
    }

    /// Two-sided traces and fluxes of the full field at crack parameter `s`.
    pub fn jump(&self, s: f64) -> JumpSample {
        let j = self.corrector.jump(s);
        let c = self.corrector.problem().crack().expect("jump needs a crack");
        let nu = c.curve.normal(s);
        let g = green(j.x, self.pole, 1.0) + self.gauge;
        let dn = green_grad(j.x, self.pole).dot(&nu);
        let (up, um) = (j.u_plus + g, j.u_minus + g);
        let (fp, fm) = (j.flux_plus + dn, j.flux_minus - dn);
        JumpSample { s, x: j.x, u_plus: up, u_minus: um, flux_plus: fp, flux_minus: fm, jump_u: up - um, jump_flux: fp + fm }
    }

    /// Gradient of the trace on one face at `s` (`side = 1` for `+`, `-1`
    /// for `-`): tangential part from the trace, normal part from the Robin flux.
    pub fn face_gradient(&self, s: f64, side: f64) -> Vec2 {
        let c = self.corrector.problem().crack().expect("face gradient needs a crack");
        let p = c.curve.eval(s);
        let speed = p.d1.norm();
        let tau = p.d1 / speed;
        let nu = c.curve.normal(s);
        let ds = 1e-6;
        let (a, b) = ((s - ds).max(-1.0), (s + ds).min(1.0));
        let trace = |q: f64| {
            let j = self.jump(q);
            if side > 0.0 {
                j.u_plus
            } else {
                j.u_minus
            }
        };
        let dt = (trace(b) - trace(a)) / ((b - a) * speed);
        let j = self.jump(s);
        // ∂_ν R⁺ = flux⁺, ∂_ν R⁻ = -flux⁻.
        let dn = if side > 0.0 { j.flux_plus } else { -j.flux_minus };
        dt * tau + dn * nu
    }
}

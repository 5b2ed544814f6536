//! Least-squares fit of a straight crack to a measured D-N map.

use std::sync::atomic::{AtomicU64, Ordering};

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::dnmap::{assemble_map, BoundaryBasis, DiscreteBoundaryMap, MapKind};
use crate::error::{Error, Result};
use crate::forward::{ForwardProblem, ImpedancePair};
use crate::geometry::{CrackCurve, Domain, Vec2};

/// Cost of a trial crack that cannot be built.
const INFEASIBLE: f64 = 1e3;
/// Trial cracks closer than this to `∂Ω` are infeasible.
const MIN_CLEARANCE: f64 = 0.02;

/// Starting point of a fit: center, direction angle, half-length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentGuess {
    pub center: [f64; 2],
    pub angle: f64,
    pub half_length: f64,
}

impl SegmentGuess {
    fn params(&self) -> Vec<f64> {
        vec![self.center[0], self.center[1], self.angle, self.half_length]
    }

    fn from_params(p: &[f64]) -> Self {
        Self { center: [p[0], p[1]], angle: p[2], half_length: p[3] }
    }

    pub fn endpoints(&self) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.angle.sin_cos();
        let (x, y, l) = (self.center[0], self.center[1], self.half_length);
        ([x - l * c, y - l * s], [x + l * c, y + l * s])
    }

    pub fn crack(&self) -> Result<CrackCurve> {
        let (a, b) = self.endpoints();
        CrackCurve::segment(a, b)
    }

    /// Center and principal direction of a point cloud.
    pub fn from_points(points: &[[f64; 2]]) -> Option<Self> {
        if points.is_empty() {
            return None;
        }
        let n = points.len() as f64;
        let m = points.iter().fold(Vec2::zeros(), |acc, p| acc + Vec2::new(p[0], p[1])) / n;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for p in points {
            let d = Vec2::new(p[0], p[1]) - m;
            sxx += d.x * d.x;
            sxy += d.x * d.y;
            syy += d.y * d.y;
        }
        let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let dir = Vec2::new(angle.cos(), angle.sin());
        let half = points.iter().map(|p| (Vec2::new(p[0], p[1]) - m).dot(&dir).abs()).fold(0.0, f64::max);
        Some(Self { center: [m.x, m.y], angle, half_length: half.max(0.05) })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentFit {
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// `‖M(fit) - M_measured‖_F / ‖M_measured - M_reference‖_F`.
    pub misfit: f64,
    pub evaluations: u64,
}

impl SegmentFit {
    pub fn crack(&self) -> Result<CrackCurve> {
        CrackCurve::segment(self.a, self.b)
    }
}

struct Misfit<'a> {
    dom: Domain,
    problem: &'a ForwardProblem,
    basis: &'a BoundaryBasis,
    impedance: &'a ImpedancePair,
    target: DMatrix<f64>,
    scale: f64,
    calls: AtomicU64,
}

impl Misfit<'_> {
    fn eval(&self, g: &SegmentGuess) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if !(g.half_length > 1e-3) {
            return INFEASIBLE;
        }
        let Ok(crack) = g.crack() else { return INFEASIBLE };
        if crack.check_in(&self.dom).is_err() || crack.distance_to_boundary(&self.dom) < MIN_CLEARANCE {
            return INFEASIBLE;
        }
        let disc = self.problem.discretization();
        let map = ForwardProblem::new(&self.dom, Some(&crack), self.impedance, disc)
            .and_then(|p| assemble_map(&p, self.basis, MapKind::Dn, None));
        match map {
            Ok(m) => (m.global_matrix() - &self.target).norm() / self.scale,
            Err(_) => INFEASIBLE,
        }
    }
}

impl CostFunction for &Misfit<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(&SegmentGuess::from_params(p)))
    }
}

fn simplex(g: &SegmentGuess, step: f64) -> Vec<Vec<f64>> {
    let p = g.params();
    let mut out = vec![p.clone()];
    for (i, s) in [step, step, 2.0 * step, step].iter().enumerate() {
        let mut q = p.clone();
        q[i] += s;
        out.push(q);
    }
    out
}

fn nelder_mead(cost: &Misfit<'_>, g: &SegmentGuess, step: f64, iters: u64) -> Result<(SegmentGuess, f64)> {
    let solver = NelderMead::new(simplex(g, step))
        .with_sd_tolerance(1e-13)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let res = Executor::new(cost, solver)
        .configure(|s| s.max_iters(iters))
        .run()
        .map_err(|e| Error::SolveFailed { context: format!("segment fit: {e}"), residual: f64::NAN })?;
    let st = res.state();
    let best = st.get_best_param().cloned().unwrap_or_else(|| g.params());
    Ok((SegmentGuess::from_params(&best), st.get_best_cost()))
}

/// Fits a straight crack with impedance `impedance` to `measured`, starting
/// from each guess and polishing the best. `p0` supplies the domain and
/// discretization.
pub fn fit_segment(
    measured: &DiscreteBoundaryMap,
    reference: &DiscreteBoundaryMap,
    basis: &BoundaryBasis,
    p0: &ForwardProblem,
    impedance: &ImpedancePair,
    guesses: &[SegmentGuess],
    iters: u64,
) -> Result<SegmentFit> {
    if guesses.is_empty() {
        return Err(Error::InvalidInput("segment fit needs a starting guess".into()));
    }
    let target = measured.global_matrix();
    let scale = (&target - reference.global_matrix()).norm();
    if !(scale > 0.0) {
        return Err(Error::InvalidInput("measured map equals the reference map".into()));
    }
    let cost = Misfit {
        dom: Domain { boundary: p0.boundary().curve.clone() },
        problem: p0,
        basis,
        impedance,
        target,
        scale,
        calls: AtomicU64::new(0),
    };
    let mut best: Option<(SegmentGuess, f64)> = None;
    for g in guesses {
        let (fit, c) = nelder_mead(&cost, g, 0.05, iters)?;
        if best.is_none_or(|b| c < b.1) {
            best = Some((fit, c));
        }
    }
    let (mut g, mut c) = best.expect("at least one guess");
    for step in [1e-2, 1e-3, 1e-4] {
        let (fit, cf) = nelder_mead(&cost, &g, step, iters)?;
        if cf <= c {
            (g, c) = (fit, cf);
        }
    }
    let (a, b) = g.endpoints();
    Ok(SegmentFit { a, b, misfit: c, evaluations: cost.calls.into_inner() })
}

//! Indicator profiles `h ↦ f(y(h), y(h))` along probe paths.

use rayon::prelude::*;
use serde::Serialize;

use super::{f_from_cracks, f_from_dn, CrackQuadrature};
use crate::dnmap::{BoundaryBasis, DiscreteBoundaryMap};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::forward::{Discretization, ImpedancePair};
use crate::geometry::{CrackCurve, Vec2};
use crate::singular::{robin_function, EnlargedDomain, RobinField};

/// `y(h) = Q + h ν̃` for a decreasing ladder of offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePath {
    pub anchor: Vec2,
    pub axis: Vec2,
    pub ladder: Vec<f64>,
}

impl ProbePath {
    pub fn new(anchor: Vec2, axis: Vec2, ladder: Vec<f64>) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidInput("probe axis must be a nonzero vector".into()));
        }
        if ladder.is_empty() || ladder.iter().any(|h| !(*h > 0.0)) || ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidInput("probe ladder must be positive and strictly decreasing".into()));
        }
        Ok(Self { anchor, axis: axis / n, ladder })
    }

    pub fn point(&self, h: f64) -> Vec2 {
        self.anchor + h * self.axis
    }

    pub fn points(&self) -> Vec<Vec2> {
        self.ladder.iter().map(|h| self.point(*h)).collect()
    }

    /// Smallest distance from the path points to `cracks`.
    pub fn clearance(&self, cracks: &[&CrackCurve]) -> f64 {
        self.points()
            .iter()
            .flat_map(|p| cracks.iter().map(move |c| c.distance(*p)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// How `f` is evaluated along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    /// Boundary maps paired with the Robin fields' traces on `∂Ω`.
    DataDriven,
    /// Crack integrals of the Robin fields.
    CrackIntegral,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicatorProfile {
    pub anchor: [f64; 2],
    pub axis: [f64; 2],
    pub mode: ProfileMode,
    /// `(h, f(y(h), y(h)))` in ladder order.
    pub samples: Vec<(f64, f64)>,
    /// Data-driven values at poles inside `Ω̄`, where the boundary formula
    /// is only a surrogate.
    pub heuristic: bool,
    /// First rung whose Robin field could not be built, with the reason.
    pub failure: Option<(f64, String)>,
}

impl IndicatorProfile {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max)
    }

    /// Median of `|f|` over the first `k` rungs.
    pub fn coarse_median(&self, k: usize) -> f64 {
        let mut v: Vec<f64> = self.samples.iter().take(k.max(1)).map(|s| s.1.abs()).collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    }

    /// `|f| ≈ a + b |log h|`, the planar blow-up law.
    pub fn log_fit(&self) -> Result<LinearFit> {
        let x: Vec<f64> = self.samples.iter().map(|s| s.0.ln().abs()).collect();
        let y: Vec<f64> = self.samples.iter().map(|s| s.1.abs()).collect();
        linear_fit(&x, &y)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "h,f")?;
        for (h, f) in &self.samples {
            writeln!(w, "{h:.17e},{f:.17e}")?;
        }
        Ok(())
    }
}

/// One crack configuration: crack (or none) and its impedances.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub crack: Option<CrackCurve>,
    pub impedance: ImpedancePair,
}

/// Two configurations on a common enlarged domain, with what is needed to
/// build their Robin fields.
#[derive(Debug, Clone)]
pub struct ProbePair {
    pub env: EnlargedDomain,
    pub disc: Discretization,
    pub first: Configuration,
    pub second: Configuration,
    pub quadrature: CrackQuadrature,
}

/// Boundary maps of the two configurations in a shared basis.
#[derive(Debug, Clone, Copy)]
pub struct MapPair<'a> {
    pub m1: &'a DiscreteBoundaryMap,
    pub m2: &'a DiscreteBoundaryMap,
    pub basis: &'a BoundaryBasis,
}

impl ProbePair {
    pub fn fields(&self, y: Vec2, w: Vec2) -> Result<(RobinField, RobinField)> {
        let r1 = robin_function(&self.env, self.first.crack.as_ref(), &self.first.impedance, y, &self.disc)?;
        let r2 = robin_function(&self.env, self.second.crack.as_ref(), &self.second.impedance, w, &self.disc)?;
        Ok((r1, r2))
    }

    /// `f(y, w)` by crack integrals, or from the maps when given.
    pub fn f(&self, y: Vec2, w: Vec2, maps: Option<MapPair<'_>>) -> Result<f64> {
        let (r1, r2) = self.fields(y, w)?;
        match maps {
            Some(m) => f_from_dn(m.m1, m.m2, m.basis, &r1, &r2),
            None => Ok(f_from_cracks(&r1, &r2, &self.quadrature)),
        }
    }
}

/// Samples `f(y(h), y(h))` along `path`. With `maps` the boundary formula is
/// used, otherwise the crack integrals. A rung whose fields cannot be built
/// ends the profile with a failure marker.
pub fn indicator_scan(probe: &ProbePair, path: &ProbePath, maps: Option<MapPair<'_>>) -> IndicatorProfile {
    let mode = if maps.is_some() { ProfileMode::DataDriven } else { ProfileMode::CrackIntegral };
    let mut profile = IndicatorProfile {
        anchor: [path.anchor.x, path.anchor.y],
        axis: [path.axis.x, path.axis.y],
        mode,
        samples: Vec::with_capacity(path.ladder.len()),
        heuristic: false,
        failure: None,
    };
    for &h in &path.ladder {
        let y = path.point(h);
        match probe.f(y, y, maps) {
            Ok(v) => {
                if maps.is_some() && !probe.env.in_shell(y) {
                    profile.heuristic = true;
                }
                profile.samples.push((h, v));
            }
            Err(e) => {
                profile.failure = Some((h, e.to_string()));
                break;
            }
        }
    }
    profile
}

/// `indicator_scan` over many paths, in parallel.
pub fn scan_paths(probe: &ProbePair, paths: &[ProbePath], maps: Option<MapPair<'_>>) -> Vec<IndicatorProfile> {
    paths.par_iter().map(|p| indicator_scan(probe, p, maps)).collect()
}

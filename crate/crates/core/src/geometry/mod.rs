//! Domains, cracks and the distances used to compare cracks.

mod crack;
mod curve;
pub mod metrics;
mod reach;

pub use crack::{CrackCurve, CrackPoint, CrackShape, RegularityReport};
pub use curve::{BoundaryShape, ClosedCurve, CurvePoint};
pub use metrics::{crack_hausdorff, hausdorff_distance, MetricValue};
pub use reach::{l_distance, reachable_set, ConeParams, ReachableSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;

/// A-priori constants of the admissible class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriData {
    pub r0: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub gamma_bar: f64,
    pub alpha: f64,
    #[serde(default = "two")]
    pub n: usize,
}

fn two() -> usize {
    2
}

impl Default for AprioriData {
    fn default() -> Self {
        Self { r0: 0.25, m: 0.25, d: 2.0, gamma_bar: 10.0, alpha: 1.0, n: 2 }
    }
}

impl AprioriData {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| Err(Error::OutOfRange { field, reason: reason.into() });
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return bad("r0", "must be positive");
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return bad("M", "must be positive");
        }
        if !(self.d >= self.r0 && self.d.is_finite()) {
            return bad("D", "must be at least r0");
        }
        if !(self.gamma_bar >= 0.0 && self.gamma_bar.is_finite()) {
            return bad("gamma_bar", "must be finite and nonnegative");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha", "must lie in (0, 1]");
        }
        if self.n != 2 {
            return bad("n", "only n = 2 is supported");
        }
        Ok(())
    }

    /// Default geometric resolution.
    pub fn delta_geo(&self) -> f64 {
        1e-3 * self.r0
    }
}

/// Bounded planar domain.
#[derive(Debug, Clone)]
pub struct Domain {
    pub boundary: ClosedCurve,
}

impl Domain {
    pub fn new(shape: BoundaryShape) -> Result<Self> {
        Ok(Self { boundary: ClosedCurve::new(shape)? })
    }

    pub fn unit_disk() -> Self {
        Self { boundary: ClosedCurve::circle([0.0, 0.0], 1.0).expect("unit circle") }
    }

    /// Checks the diameter bound against the a-priori data.
    pub fn check(&self, apriori: &AprioriData) -> Result<()> {
        if self.diameter() > apriori.d * (1.0 + 1e-12) {
            return Err(Error::OutOfRange {
                field: "D",
                reason: format!("domain diameter {} exceeds D = {}", self.diameter(), apriori.d),
            });
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        self.boundary.diameter()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.boundary.contains(p)
    }

    pub fn dilated(&self, factor: f64) -> Result<Self> {
        Ok(Self { boundary: self.boundary.dilated(factor)? })
    }
}

/// Writes `x,y,flag` rows.
pub fn write_points_csv<W: std::io::Write>(mut w: W, points: &[(Vec2, bool)]) -> std::io::Result<()> {
    writeln!(w, "x,y,flag")?;
    for (p, f) in points {
        writeln!(w, "{:.12e},{:.12e},{}", p.x, p.y, u8::from(*f))?;
    }
    Ok(())
}

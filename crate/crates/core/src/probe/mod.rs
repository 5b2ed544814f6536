//! The probe function `f(y, w)` from boundary maps and from crack integrals,
//! the integration-by-parts identity behind it, blow-up scans, crack
//! reconstruction and impedance recovery.

mod impedance;
mod integrals;
mod reconstruct;
mod refine;
mod scan;

pub use impedance::{estimate_impedance, ImpedanceEstimate, ImpedanceOptions, ImpedanceSample};
pub use integrals::{reciprocity_integral, CrackField, CrackQuadrature};
pub use reconstruct::{
    anchor_grid, factorization_indicator, reconstruct_crack, Reconstruction, ReconstructionInput, ReconstructionOptions,
};
pub use refine::{fit_segment, SegmentFit, SegmentGuess};
pub use scan::{
    indicator_scan, scan_paths, Configuration, IndicatorProfile, MapPair, ProbePair, ProbePath, ProfileMode,
};

use serde::Serialize;

use crate::dnmap::{BoundaryBasis, DiscreteBoundaryMap, MapKind};
use crate::error::{Error, Result};
use crate::forward::Solution;
use crate::singular::RobinField;

/// Both sides of the integration-by-parts identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// `⟨(Λ₁ - Λ₂) u₁, u₂⟩` from the boundary Cauchy data.
    pub boundary: f64,
    /// The crack integrals.
    pub cracks: f64,
    pub residual: f64,
}

/// Compares `∫_{∂Ω} (∂_ν u₁ u₂ - u₁ ∂_ν u₂)` with the crack integrals.
/// Both solutions must live on the same boundary discretization.
pub fn identity_residual(sol1: &Solution, sol2: &Solution, q: &CrackQuadrature) -> Result<IdentityCheck> {
    let (b1, b2) = (sol1.problem().boundary(), sol2.problem().boundary());
    if b1.n() != b2.n() || b1.x.iter().zip(&b2.x).any(|(a, b)| (a - b).norm() > 1e-12) {
        return Err(Error::Mismatch("solutions use different boundary discretizations".into()));
    }
    let (u1, q1) = (sol1.boundary_trace(), sol1.boundary_flux());
    let (u2, q2) = (sol2.boundary_trace(), sol2.boundary_flux());
    let boundary: f64 = (0..b1.n()).map(|j| b1.w[j] * (q1[j] * u2[j] - u1[j] * q2[j])).sum();
    let cracks = reciprocity_integral(sol1, sol2, q);
    Ok(IdentityCheck { boundary, cracks, residual: relative_gap(boundary, cracks) })
}

/// `|a - b| / (|a| + |b| + ε)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs() + f64::EPSILON)
}

/// `f(y, w) = ⟨(Λ₁ - Λ₂) R₁(·, y), R₂(·, w)⟩` with both fields projected on
/// the basis. Exact for poles in `Ω̃ ∖ Ω̄`.
pub fn f_from_dn(
    m1: &DiscreteBoundaryMap,
    m2: &DiscreteBoundaryMap,
    basis: &BoundaryBasis,
    r1: &RobinField,
    r2: &RobinField,
) -> Result<f64> {
    let (c1, c2) = probe_coefficients(m1, m2, basis, r1, r2)?;
    Ok(m1.bilinear(&c1, &c2) - m2.bilinear(&c1, &c2))
}

/// Basis coefficients of `R₁|∂Ω` and `R₂|∂Ω` after checking the maps.
pub fn probe_coefficients(
    m1: &DiscreteBoundaryMap,
    m2: &DiscreteBoundaryMap,
    basis: &BoundaryBasis,
    r1: &RobinField,
    r2: &RobinField,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(m1, m2, basis)?;
    let v1: Vec<f64> = basis.nodes().iter().map(|x| r1.eval(*x)).collect();
    let v2: Vec<f64> = basis.nodes().iter().map(|x| r2.eval(*x)).collect();
    Ok((basis.project(&v1), basis.project(&v2)))
}

fn check_pair(m1: &DiscreteBoundaryMap, m2: &DiscreteBoundaryMap, basis: &BoundaryBasis) -> Result<()> {
    if m1.kind != MapKind::Dn || m2.kind != MapKind::Dn {
        return Err(Error::Mismatch("the probe pairs two global D-N maps".into()));
    }
    if m1.basis_size() != basis.len() || m2.basis_size() != basis.len() {
        return Err(Error::Mismatch(format!(
            "basis of size {} against maps of size {} and {}",
            basis.len(),
            m1.basis_size(),
            m2.basis_size()
        )));
    }
    Ok(())
}

/// `f(y, w) = S_{Σ₁}(y, w) - S_{Σ₂}(y, w)` from the Robin fields' crack traces.
pub fn f_from_cracks(r1: &RobinField, r2: &RobinField, q: &CrackQuadrature) -> f64 {
    reciprocity_integral(r1, r2, q)
}

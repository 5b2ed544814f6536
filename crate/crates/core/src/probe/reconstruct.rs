//! Crack reconstruction from a measured map against the crack-free one.
//!
//! Each anchor `z` is tested with dipole currents `∂_ν G_z·d`, `G_z` the
//! Dirichlet Green function of the crack-free domain. The indicator is large
//! where these lie in the range of the map difference, i.e. on the crack.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::dnmap::{BoundaryBasis, DiscreteBoundaryMap, MapKind};
use crate::error::{Error, Result};
use super::refine::{fit_segment, SegmentFit, SegmentGuess};
use crate::forward::{DatumKind, ForwardProblem, ImpedancePair};
use crate::geometry::{hausdorff_distance, CrackCurve, Domain, Vec2};

const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconstructionOptions {
    /// Dipole directions per anchor, spread over a half turn.
    pub directions: usize,
    /// Spectral cutoff relative to the largest eigenvalue of the difference.
    pub cutoff: f64,
    /// Anchors with indicator at least this multiple of the median are hits.
    pub threshold_factor: f64,
    /// Nelder-Mead iterations per start of the model fit.
    pub fit_iters: u64,
    /// Sampling of fitted cracks and of the truth for distances.
    pub spacing: f64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self { directions: 8, cutoff: 1e-8, threshold_factor: 10.0, fit_iters: 400, spacing: 2.5e-4 }
    }
}

impl ReconstructionOptions {
    pub fn validate(&self) -> Result<()> {
        if self.directions == 0 {
            return Err(Error::OutOfRange { field: "directions", reason: "need at least one".into() });
        }
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(Error::OutOfRange { field: "cutoff", reason: "must lie in (0, 1)".into() });
        }
        if !(self.threshold_factor > 0.0 && self.threshold_factor.is_finite()) {
            return Err(Error::OutOfRange { field: "threshold_factor", reason: "must be positive".into() });
        }
        if !(self.spacing > 0.0) {
            return Err(Error::OutOfRange { field: "spacing", reason: "must be positive".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Reconstruction {
    pub anchors: Vec<[f64; 2]>,
    /// Indicator per anchor, zero when the maps do not differ.
    pub indicator: Vec<f64>,
    pub threshold: f64,
    /// Estimated crack points: the fitted crack when a model was given,
    /// otherwise the anchors at or above the threshold.
    pub estimate: Vec<[f64; 2]>,
    /// Anchors at or above the threshold.
    pub hits: usize,
    #[serde(rename = "coarse_d_H")]
    pub coarse_d_h: Option<f64>,
    pub fit: Option<SegmentFit>,
    #[serde(rename = "d_H")]
    pub d_h: Option<f64>,
    pub runtime_ms: f64,
}

impl Reconstruction {
    /// Anchors whose indicator reaches `t`.
    pub fn estimate_at(&self, t: f64) -> Vec<[f64; 2]> {
        self.anchors.iter().zip(&self.indicator).filter(|(_, w)| **w >= t && **w > 0.0).map(|(a, _)| *a).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,indicator,hit")?;
        for (a, v) in self.anchors.iter().zip(&self.indicator) {
            let hit = *v >= self.threshold && *v > 0.0;
            writeln!(w, "{:.17e},{:.17e},{v:.17e},{}", a[0], a[1], u8::from(hit))?;
        }
        Ok(())
    }
}

/// Grid points of spacing `h` inside `dom` at distance at least `margin`
/// from its boundary.
pub fn anchor_grid(dom: &Domain, h: f64, margin: f64) -> Result<Vec<Vec2>> {
    if !(h > 0.0) {
        return Err(Error::OutOfRange { field: "spacing", reason: "must be positive".into() });
    }
    let c = dom.boundary.center();
    let r = 0.5 * dom.boundary.diameter();
    let m = (r / h).ceil() as i64;
    let mut out = Vec::new();
    for j in -m..=m {
        for i in -m..=m {
            let p = c + Vec2::new(i as f64 * h, j as f64 * h);
            if dom.boundary.contains(p) && dom.boundary.distance(p) >= margin {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Indicator value at every anchor. `reference` must be the crack-free map
/// of `p0`'s domain and both maps global D-N maps on `basis`.
pub fn factorization_indicator(
    measured: &DiscreteBoundaryMap,
    reference: &DiscreteBoundaryMap,
    basis: &BoundaryBasis,
    p0: &ForwardProblem,
    anchors: &[Vec2],
    opts: &ReconstructionOptions,
) -> Result<Vec<f64>> {
    opts.validate()?;
    if anchors.is_empty() {
        return Err(Error::InvalidInput("no probe anchors".into()));
    }
    if p0.crack().is_some() {
        return Err(Error::InvalidInput("reference problem must be crack-free".into()));
    }
    for m in [measured, reference] {
        if m.kind != MapKind::Dn || m.basis_size() != basis.len() {
            return Err(Error::Mismatch("reconstruction pairs two global D-N maps on the basis".into()));
        }
    }
    if p0.boundary().n() != basis.nodes().len() {
        return Err(Error::Mismatch("basis sampled on a different boundary discretization".into()));
    }
    let a = reference.global_matrix() - measured.global_matrix();
    let a = 0.5 * (&a + a.transpose());
    let scale = reference.global_matrix().amax().max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(a);
    let lmax = eig.eigenvalues.amax();
    if lmax <= 1e-12 * scale {
        return Ok(vec![0.0; anchors.len()]);
    }
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|i| eig.eigenvalues[*i].abs() > opts.cutoff * lmax).collect();

    let dirs: Vec<Vec2> =
        (0..opts.directions).map(|k| PI * k as f64 / opts.directions as f64).map(|t| Vec2::new(t.cos(), t.sin())).collect();
    let bnd = p0.boundary();
    let cols: Vec<(usize, Vec2)> = (0..anchors.len()).flat_map(|i| dirs.iter().map(move |d| (i, *d))).collect();
    let chunks: Vec<Result<Vec<f64>>> = cols
        .par_chunks(CHUNK)
        .map(|chunk| {
            // Dipole d·∇_z Γ(x - z) = d·(x - z) / (2π r²) and its normal derivative.
            let mut data = DMatrix::zeros(bnd.n(), chunk.len());
            let mut direct = DMatrix::zeros(bnd.n(), chunk.len());
            for (k, (i, d)) in chunk.iter().enumerate() {
                let z = anchors[*i];
                for j in 0..bnd.n() {
                    let r = bnd.x[j] - z;
                    let r2 = r.norm_squared();
                    let n = bnd.normal[j];
                    data[(j, k)] = -d.dot(&r) / (2.0 * PI * r2);
                    direct[(j, k)] = (d.dot(&n) * r2 - 2.0 * d.dot(&r) * r.dot(&n)) / (2.0 * PI * r2 * r2);
                }
            }
            let flux = p0.boundary_response(DatumKind::Dirichlet, &data)? + direct;
            Ok((0..chunk.len())
                .map(|k| {
                    let c = basis.project(flux.column(k).as_slice());
                    let c2: f64 = c.iter().map(|v| v * v).sum();
                    let picard: f64 = keep
                        .iter()
                        .map(|&m| {
                            let p: f64 = eig.eigenvectors.column(m).iter().zip(&c).map(|(v, ci)| v * ci).sum();
                            p * p / eig.eigenvalues[m].abs()
                        })
                        .sum();
                    c2 / picard.max(f64::MIN_POSITIVE)
                })
                .collect())
        })
        .collect();
    let mut per_col = Vec::with_capacity(cols.len());
    for c in chunks {
        per_col.extend(c?);
    }
    Ok(per_col.chunks(opts.directions).map(|w| w.iter().copied().fold(0.0, f64::max)).collect())
}

/// Inputs of a reconstruction.
#[derive(Debug, Clone, Copy)]
pub struct ReconstructionInput<'a> {
    pub measured: &'a DiscreteBoundaryMap,
    /// Map of the crack-free configuration `p0`.
    pub reference: &'a DiscreteBoundaryMap,
    pub basis: &'a BoundaryBasis,
    pub p0: &'a ForwardProblem,
    pub anchors: &'a [Vec2],
    /// Impedance of the straight-crack model fitted after thresholding;
    /// `None` keeps the thresholded anchors as the estimate.
    pub model: Option<&'a ImpedancePair>,
    /// True crack, for the Hausdorff distance.
    pub truth: Option<&'a CrackCurve>,
}

/// Threshold at `threshold_factor` times the median indicator; anchors at or
/// above it form the coarse estimate. With a model, a straight crack fitted
/// to the measured map from that estimate replaces it, sampled at
/// `spacing`.
pub fn reconstruct_crack(input: &ReconstructionInput<'_>, opts: &ReconstructionOptions) -> Result<Reconstruction> {
    let start = Instant::now();
    let indicator =
        factorization_indicator(input.measured, input.reference, input.basis, input.p0, input.anchors, opts)?;
    let mut sorted = indicator.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = opts.threshold_factor * sorted[sorted.len() / 2];
    let mut rec = Reconstruction {
        anchors: input.anchors.iter().map(|p| [p.x, p.y]).collect(),
        indicator,
        threshold,
        estimate: Vec::new(),
        hits: 0,
        coarse_d_h: None,
        fit: None,
        d_h: None,
        runtime_ms: 0.0,
    };
    let coarse = rec.estimate_at(threshold);
    rec.hits = coarse.len();
    let to_points = |v: &[[f64; 2]]| v.iter().map(|p| Vec2::new(p[0], p[1])).collect::<Vec<_>>();
    if let (Some(crack), false) = (input.truth, coarse.is_empty()) {
        rec.coarse_d_h = Some(hausdorff_distance(&to_points(&coarse), &crack.sample(opts.spacing))?);
    }
    rec.estimate = coarse;
    if let (Some(imp), Some(seed)) = (input.model, SegmentGuess::from_points(&rec.estimate)) {
        let mut guesses = vec![seed];
        guesses.extend((0..4).map(|k| SegmentGuess { angle: k as f64 * PI / 4.0, half_length: 0.2, ..seed }));
        let fit = fit_segment(input.measured, input.reference, input.basis, input.p0, imp, &guesses, opts.fit_iters)?;
        rec.estimate = fit.crack()?.sample(opts.spacing).iter().map(|p| [p.x, p.y]).collect();
        rec.fit = Some(fit);
    }
    if let (Some(crack), false) = (input.truth, rec.estimate.is_empty()) {
        rec.d_h = Some(hausdorff_distance(&to_points(&rec.estimate), &crack.sample(opts.spacing))?);
    }
    rec.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(rec)
}

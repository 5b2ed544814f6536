//! Crack-family sweeps measuring `(d_H, d_l, ε)` and the single-log
//! stability fit `d_H ≈ C |log ε|^{-η}` against a power law.

mod family;

pub use family::{FamilySpec, Perturbation};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dnmap::{assemble_map, op_norm_diff, BoundaryBasis, DiscreteBoundaryMap, MapKind, Patch};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::forward::{Discretization, ForwardProblem};
use crate::geometry::{crack_hausdorff, l_distance, reachable_set, AprioriData, ConeParams, CrackCurve, Domain};

/// Settings shared by every member of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub apriori: AprioriData,
    pub disc: Discretization,
    /// Basis modes of the maps.
    pub modes: usize,
    /// Patch of the local maps.
    pub patch: Patch,
    pub cone: ConeParams,
    /// Width of the exterior shell `V_l` is grown from.
    pub shell: f64,
    /// Grid size of `V_l`.
    pub grid: usize,
}

impl SweepConfig {
    pub fn for_apriori(apriori: AprioriData) -> Self {
        Self {
            apriori,
            disc: Discretization::default(),
            modes: 65,
            patch: Patch { center: [0.0, 1.0], radius: 0.8 },
            cone: ConeParams::from_regularity(apriori.m, 0.5 * apriori.r0),
            shell: 0.05,
            grid: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub delta: f64,
    #[serde(rename = "d_H")]
    pub d_h: f64,
    pub d_l: f64,
    pub eps_dn: Option<f64>,
    pub eps_nd: Option<f64>,
    pub eps_local_dn: Option<f64>,
    pub eps_local_nd: Option<f64>,
    pub wall_ms: f64,
}

impl StabilityRecord {
    pub fn eps(&self, kind: MapKind) -> Option<f64> {
        match kind {
            MapKind::Dn => self.eps_dn,
            MapKind::Nd => self.eps_nd,
            MapKind::LocalDn => self.eps_local_dn,
            MapKind::LocalNd => self.eps_local_nd,
        }
    }

    fn set_eps(&mut self, kind: MapKind, v: f64) {
        match kind {
            MapKind::Dn => self.eps_dn = Some(v),
            MapKind::Nd => self.eps_nd = Some(v),
            MapKind::LocalDn => self.eps_local_dn = Some(v),
            MapKind::LocalNd => self.eps_local_nd = Some(v),
        }
    }
}

fn maps_of(
    dom: &Domain,
    crack: &CrackCurve,
    spec: &FamilySpec,
    cfg: &SweepConfig,
    basis: &BoundaryBasis,
    kinds: &[MapKind],
) -> Result<Vec<DiscreteBoundaryMap>> {
    let p = ForwardProblem::new(dom, Some(crack), &spec.impedance, &cfg.disc)?;
    kinds.iter().map(|k| assemble_map(&p, basis, *k, k.is_local().then_some(&cfg.patch))).collect()
}

/// Runs the family against its base crack. Records are ordered by `δ`.
pub fn run_sweep(dom: &Domain, spec: &FamilySpec, cfg: &SweepConfig, kinds: &[MapKind]) -> Result<Vec<StabilityRecord>> {
    cfg.apriori.validate()?;
    cfg.cone.validate(cfg.apriori.r0)?;
    let pos: Vec<f64> = spec.magnitudes.iter().copied().filter(|d| *d > 0.0).collect();
    let (lo, hi) = pos.iter().fold((f64::INFINITY, 0.0f64), |(l, h), d| (l.min(*d), h.max(*d)));
    if pos.is_empty() || hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidInput("family magnitudes must span at least two decades".into()));
    }
    let mut kinds = kinds.to_vec();
    kinds.sort_by_key(|k| k.as_str());
    kinds.dedup();
    let base = spec.base_crack()?;
    let members = spec.members(dom, &cfg.apriori)?;
    let p0 = ForwardProblem::new(dom, None, &spec.impedance, &cfg.disc)?;
    let basis = BoundaryBasis::new(p0.boundary(), cfg.modes)?;
    let base_maps = maps_of(dom, &base, spec, cfg, &basis, &kinds)?;
    let delta_geo = cfg.apriori.delta_geo();

    let mut records = members
        .par_iter()
        .map(|(delta, crack)| {
            let start = Instant::now();
            let (d_h, d_l) = if crack.shape() == base.shape() {
                (0.0, 0.0)
            } else {
                let vl = reachable_set(dom, &[base.clone(), crack.clone()], cfg.cone, cfg.shell, cfg.grid)?;
                (crack_hausdorff(&base, crack, delta_geo)?.value, l_distance(&base, crack, &vl, delta_geo)?.value)
            };
            let maps = maps_of(dom, crack, spec, cfg, &basis, &kinds)?;
            let mut rec = StabilityRecord {
                delta: *delta,
                d_h,
                d_l,
                eps_dn: None,
                eps_nd: None,
                eps_local_dn: None,
                eps_local_nd: None,
                wall_ms: 0.0,
            };
            for ((k, m), b) in kinds.iter().zip(&maps).zip(&base_maps) {
                rec.set_eps(*k, op_norm_diff(m, b)?);
            }
            rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    Ok(records)
}

/// Writes the sweep table. Without `timing` the `wall_ms` column is left
/// empty so that repeated runs compare byte for byte.
pub fn write_csv<W: std::io::Write>(records: &[StabilityRecord], mut w: W, timing: bool) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    writeln!(w, "delta,d_H,d_l,eps_dn,eps_nd,eps_local_dn,eps_local_nd,wall_ms")?;
    for r in records {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{},{},{},{},{}",
            r.delta,
            r.d_h,
            r.d_l,
            opt(r.eps_dn),
            opt(r.eps_nd),
            opt(r.eps_local_dn),
            opt(r.eps_local_nd),
            if timing { format!("{:.3}", r.wall_ms) } else { String::new() }
        )?;
    }
    Ok(())
}

/// `(log|log ε|, log d_H)` pairs for plotting, for records with `0 < ε < 1`
/// and `d_H > 0`.
pub fn plot_pairs(records: &[StabilityRecord], kind: MapKind) -> Vec<(f64, f64)> {
    usable(records, kind).map(|(e, d)| (e.ln().abs().ln(), d.ln())).collect()
}

fn usable(records: &[StabilityRecord], kind: MapKind) -> impl Iterator<Item = (f64, f64)> + '_ {
    records
        .iter()
        .filter_map(move |r| r.eps(kind).map(|e| (e, r.d_h)))
        .filter(|(e, d)| *e > 0.0 && *e < 1.0 && *d > 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelFit {
    /// `d_H ≈ C |log ε|^{-η}`.
    #[serde(rename = "C")]
    pub c: f64,
    pub eta: f64,
    /// RMS residual in `log d_H`.
    pub log_residual: f64,
    /// `d_H ≈ e^{c_p} ε^θ`.
    pub theta: f64,
    pub power_intercept: f64,
    pub power_residual: f64,
    pub records: usize,
}

impl ModelFit {
    /// Whether the single-log model fits at least as well as the power law.
    pub fn prefers_log(&self) -> bool {
        self.log_residual <= self.power_residual
    }
}

/// Fits both models to `(ε, d_H)` pairs.
pub fn fit_models(points: &[(f64, f64)]) -> Result<ModelFit> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|(e, d)| *e > 0.0 && *e < 1.0 && *d > 0.0).collect();
    if pts.len() < 8 {
        return Err(Error::InvalidInput(format!("{} usable records, need 8", pts.len())));
    }
    let (lo, hi) = pts.iter().fold((f64::INFINITY, 0.0f64), |(l, h), (e, _)| (l.min(*e), h.max(*e)));
    if hi / lo < 10.0 {
        return Err(Error::InvalidInput(format!("ε spans {:.2} decades, need at least one", (hi / lo).log10())));
    }
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let xl: Vec<f64> = pts.iter().map(|p| p.0.ln().abs().ln()).collect();
    let xp: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let single: LinearFit = linear_fit(&xl, &y)?;
    let power: LinearFit = linear_fit(&xp, &y)?;
    Ok(ModelFit {
        c: single.intercept.exp(),
        eta: -single.slope,
        log_residual: single.rms,
        theta: power.slope,
        power_intercept: power.intercept,
        power_residual: power.rms,
        records: pts.len(),
    })
}

/// `fit_models` on the records' `ε` of `kind`.
pub fn fit_log_model(records: &[StabilityRecord], kind: MapKind) -> Result<ModelFit> {
    fit_models(&usable(records, kind).collect::<Vec<_>>())
}

/// `max d_H / d_l` over records with `d_H > 0`; infinite when some such
/// record has `d_l = 0`.
pub fn equivalence_constant(records: &[StabilityRecord]) -> f64 {
    records
        .iter()
        .filter(|r| r.d_h > 0.0)
        .map(|r| if r.d_l > 0.0 { r.d_h / r.d_l } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

//! TOML scenario files.

use std::path::PathBuf;

use crackprobe::dnmap::{MapKind, Patch};
use crackprobe::forward::{DatumKind, Discretization, ImpedancePair};
use crackprobe::geometry::{AprioriData, BoundaryShape, ConeParams, CrackCurve, CrackShape, Domain};
use crackprobe::probe::ReconstructionOptions;
use crackprobe::singular::PoleLadder;
use crackprobe::stability::{FamilySpec, Perturbation};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence. Not part of the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub apriori: AprioriData,
    #[serde(default = "unit_circle")]
    pub domain: BoundaryShape,
    #[serde(default)]
    pub cracks: Vec<CrackSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub maps: MapConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub reconstruct: ReconstructConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfigSpec>,
}

fn unit_circle() -> BoundaryShape {
    BoundaryShape::Circle { center: [0.0, 0.0], radius: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackSpec {
    #[serde(flatten)]
    pub shape: CrackShape,
    #[serde(default = "ImpedancePair::insulating")]
    pub impedance: ImpedancePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub n_boundary: usize,
    pub n_crack: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_quad: Option<usize>,
    /// Shared-part tolerance of the crack integrals; `2 δ_geo` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_tol: Option<f64>,
    pub quadrature_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = Discretization::default();
        Self { n_boundary: d.n_boundary, n_crack: d.n_crack, n_quad: d.n_quad, split_tol: None, quadrature_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    /// Basis size `K`.
    pub modes: usize,
    pub kinds: Vec<MapKind>,
    pub patch: Patch,
    /// Standard deviation of the symmetric Gaussian noise added to measured
    /// maps in weighted coordinates, seeded by `seed`.
    pub noise: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            modes: 65,
            kinds: vec![MapKind::Dn, MapKind::Nd],
            patch: Patch { center: [0.0, 1.0], radius: 0.8 },
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Data are the traces of `Re z^order`.
    pub datum: DatumKind,
    pub order: u32,
    /// Crack samples written per configuration.
    pub samples: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { datum: DatumKind::Dirichlet, order: 1, samples: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub anchor: [f64; 2],
    pub axis: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Defaults to `A = 1/(2M)`, `l = r0/2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cone: Option<ConeParams>,
    /// Pole offsets, strictly decreasing. Defaults to `r0·2^{-3} … r0·2^{-8}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    pub paths: Vec<PathSpec>,
    /// Use the boundary maps instead of the crack integrals.
    pub data_driven: bool,
    /// Shell pole pairs compared by `validate`.
    pub pole_pairs: usize,
    /// Crack parameter of the asymptotic check.
    pub asymptotic_s0: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { cone: None, ladder: None, paths: Vec::new(), data_driven: false, pole_pairs: 8, asymptotic_s0: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Index of the crack whose map is the measurement.
    pub crack: usize,
    /// Anchor grid spacing and clearance from `∂Ω`.
    pub grid: f64,
    pub margin: f64,
    /// Fit a segment with the crack's impedance after the indicator stage.
    pub refine: bool,
    pub directions: usize,
    pub cutoff: f64,
    pub threshold_factor: f64,
    pub fit_iters: u64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        let o = ReconstructionOptions::default();
        Self {
            crack: 0,
            grid: 0.05,
            margin: 0.05,
            refine: true,
            directions: o.directions,
            cutoff: o.cutoff,
            threshold_factor: o.threshold_factor,
            fit_iters: o.fit_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfigSpec {
    pub base: CrackShape,
    pub perturbation: Perturbation,
    /// Defaults to `0.2·r0·2^{-k}`, `k = 0..8`, plus `δ = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitudes: Option<Vec<f64>>,
    #[serde(default = "unit_robin")]
    pub impedance: ImpedancePair,
    #[serde(default = "all_kinds")]
    pub kinds: Vec<MapKind>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_shell")]
    pub shell: f64,
}

fn unit_robin() -> ImpedancePair {
    ImpedancePair::constant(1.0, 1.0)
}

fn all_kinds() -> Vec<MapKind> {
    vec![MapKind::Dn, MapKind::Nd, MapKind::LocalDn, MapKind::LocalNd]
}

fn default_grid() -> usize {
    256
}

fn default_shell() -> f64 {
    0.05
}

fn out_of_range(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{field}` out of range: {reason}"))
}

fn core(e: crackprobe::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl ScenarioConfig {
    /// Parses and validates. Parse errors carry line and column.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(parse_message(text, &e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn default_scenario() -> Self {
        Self::parse(DEFAULT_SCENARIO).expect("bundled scenario is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        hex(&Sha256::digest(serde_json::to_vec(&c).expect("scenario serializes")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.apriori.validate().map_err(core)?;
        if self.seed > i64::MAX as u64 {
            return Err(out_of_range("seed", "must be below 2^63"));
        }
        let dom = self.domain()?;
        dom.check(&self.apriori).map_err(core)?;
        if self.cracks.len() > 2 {
            return Err(out_of_range("cracks", format!("{} given, at most two", self.cracks.len())));
        }
        for c in &self.cracks {
            let curve = CrackCurve::new(c.shape.clone()).map_err(core)?;
            curve.check_in(&dom).map_err(core)?;
            c.impedance.validate(self.apriori.gamma_bar).map_err(core)?;
        }
        self.discretization().validate().map_err(core)?;
        if let Some(t) = self.solver.split_tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(out_of_range("split_tol", "must be finite and nonnegative"));
            }
        }
        if !(self.solver.quadrature_tol > 0.0) {
            return Err(out_of_range("quadrature_tol", "must be positive"));
        }
        if self.maps.modes < 3 || self.maps.modes % 2 == 0 || self.maps.modes >= self.solver.n_boundary {
            return Err(out_of_range("modes", "must be odd, at least 3 and below n_boundary"));
        }
        if self.maps.kinds.is_empty() {
            return Err(out_of_range("kinds", "need at least one map kind"));
        }
        self.maps.patch.validate().map_err(core)?;
        if !(self.maps.noise >= 0.0 && self.maps.noise.is_finite()) {
            return Err(out_of_range("noise", "must be finite and nonnegative"));
        }
        if self.solve.samples == 0 {
            return Err(out_of_range("samples", "need at least one"));
        }
        self.cone().validate(self.apriori.r0).map_err(core)?;
        let ladder = self.ladder();
        if ladder.is_empty() || ladder.iter().any(|h| !(*h > 0.0)) || ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(out_of_range("ladder", "must be positive and strictly decreasing"));
        }
        for p in &self.probe.paths {
            if !(p.axis[0].hypot(p.axis[1]) > 0.0) {
                return Err(out_of_range("axis", "probe axes must be nonzero"));
            }
        }
        if !(self.probe.asymptotic_s0.abs() < 1.0) {
            return Err(out_of_range("asymptotic_s0", "must lie in (-1, 1)"));
        }
        let r = &self.reconstruct;
        if !self.cracks.is_empty() && r.crack >= self.cracks.len() {
            return Err(out_of_range("crack", format!("index {} but {} cracks", r.crack, self.cracks.len())));
        }
        if !(r.grid > 0.0 && r.margin >= 0.0) {
            return Err(out_of_range("grid", "spacing must be positive and margin nonnegative"));
        }
        self.reconstruction_options().validate().map_err(core)?;
        if let Some(s) = &self.sweep {
            if s.kinds.is_empty() {
                return Err(out_of_range("kinds", "sweeps need at least one map kind"));
            }
            if s.grid < 16 || !(s.shell > 0.0) {
                return Err(out_of_range("grid", "sweep grid must be at least 16 with a positive shell"));
            }
            if self.family().magnitudes.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
                return Err(out_of_range("magnitudes", "must be finite and nonnegative"));
            }
            s.impedance.validate(self.apriori.gamma_bar).map_err(core)?;
            CrackCurve::new(s.base.clone()).map_err(core)?;
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        Domain::new(self.domain.clone()).map_err(core)
    }

    pub fn discretization(&self) -> Discretization {
        Discretization { n_boundary: self.solver.n_boundary, n_crack: self.solver.n_crack, n_quad: self.solver.n_quad }
    }

    pub fn split_tol(&self) -> f64 {
        self.solver.split_tol.unwrap_or(2.0 * self.apriori.delta_geo())
    }

    pub fn cone(&self) -> ConeParams {
        self.probe.cone.unwrap_or_else(|| ConeParams::from_regularity(self.apriori.m, 0.5 * self.apriori.r0))
    }

    pub fn ladder(&self) -> Vec<f64> {
        self.probe.ladder.clone().unwrap_or_else(|| PoleLadder::default_for(self.apriori.r0).h)
    }

    pub fn reconstruction_options(&self) -> ReconstructionOptions {
        let r = &self.reconstruct;
        ReconstructionOptions {
            directions: r.directions,
            cutoff: r.cutoff,
            threshold_factor: r.threshold_factor,
            fit_iters: r.fit_iters,
            spacing: self.apriori.delta_geo(),
        }
    }

    /// The sweep family; call only when `sweep` is set.
    pub fn family(&self) -> FamilySpec {
        let s = self.sweep.as_ref().expect("sweep section");
        let magnitudes = s.magnitudes.clone().unwrap_or_else(|| {
            let mut m = FamilySpec::default_magnitudes(self.apriori.r0);
            m.push(0.0);
            m
        });
        FamilySpec { base: s.base.clone(), perturbation: s.perturbation, magnitudes, impedance: s.impedance.clone() }
    }
}

fn parse_message(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            format!("parse error at line {line}, column {col}: {}", e.message())
        }
        None => format!("parse error: {}", e.message()),
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

//! The six commands.

use std::path::PathBuf;
use std::time::Instant;

use crackprobe::dnmap::{
    assemble_map, selfadjoint_defect, sidecar_json, write_archive, BoundaryBasis, DiscreteBoundaryMap, MapKind,
};
use crackprobe::forward::{
    solve_positive, write_crack_csv, BoundaryDatum, DatumKind, Discretization, ForwardProblem, ImpedancePair,
};
use crackprobe::geometry::{CrackCurve, Domain, Vec2};
use serde_json::{json, Value};

use crate::config::ScenarioConfig;
use crate::store::{map_key, Artifacts, Cache, CacheStatus};
use crate::{CliError, Command};

mod analysis;

/// A parsed scenario with its geometry built.
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub hash: String,
    pub dom: Domain,
    pub disc: Discretization,
    pub cracks: Vec<(CrackCurve, ImpedancePair)>,
    pub cache: Cache,
}

/// Where a configuration sits: crack-free or crack `i` of the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Config {
    Free,
    Crack(usize),
}

impl Config {
    pub fn label(self) -> String {
        match self {
            Config::Free => "free".into(),
            Config::Crack(i) => format!("crack{i}"),
        }
    }
}

pub(crate) fn num(module: &'static str) -> impl Fn(crackprobe::Error) -> CliError {
    move |e| CliError::numerical(module, e)
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig, cache: Cache) -> Result<Self, CliError> {
        let dom = cfg.domain()?;
        let cracks = cfg
            .cracks
            .iter()
            .map(|c| Ok((CrackCurve::new(c.shape.clone()).map_err(num("geometry"))?, c.impedance.clone())))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(Self { hash: cfg.hash(), disc: cfg.discretization(), dom, cracks, cache, cfg })
    }

    pub fn configs(&self) -> Vec<Config> {
        std::iter::once(Config::Free).chain((0..self.cracks.len()).map(Config::Crack)).collect()
    }

    fn parts(&self, c: Config) -> (Option<&CrackCurve>, ImpedancePair) {
        match c {
            Config::Free => (None, ImpedancePair::insulating()),
            Config::Crack(i) => (Some(&self.cracks[i].0), self.cracks[i].1.clone()),
        }
    }

    pub fn problem(&self, c: Config) -> Result<ForwardProblem, CliError> {
        let (crack, imp) = self.parts(c);
        ForwardProblem::new(&self.dom, crack, &imp, &self.disc).map_err(num("forward"))
    }

    pub fn basis(&self) -> Result<BoundaryBasis, CliError> {
        let p0 = self.problem(Config::Free)?;
        BoundaryBasis::new(p0.boundary(), self.cfg.maps.modes).map_err(num("dnmap"))
    }

    /// Map of `kind` for configuration `c`, from the cache when possible.
    pub fn map(
        &self,
        basis: &BoundaryBasis,
        c: Config,
        kind: MapKind,
    ) -> Result<(DiscreteBoundaryMap, CacheStatus, f64), CliError> {
        let patch = kind.is_local().then_some(self.cfg.maps.patch);
        let crack = match c {
            Config::Free => Value::Null,
            Config::Crack(i) => json!(self.cfg.cracks[i]),
        };
        let key = map_key(&json!({
            "domain": self.cfg.domain,
            "crack": crack,
            "disc": self.disc,
            "modes": self.cfg.maps.modes,
            "kind": kind,
            "patch": patch,
        }));
        let start = Instant::now();
        let (map, status) = self.cache.load_or_build(&key, kind, || {
            let (crack, imp) = self.parts(c);
            let p = ForwardProblem::new(&self.dom, crack, &imp, &self.disc)?;
            Ok(assemble_map(&p, basis, kind, patch.as_ref())?.with_provenance(key.clone()))
        })?;
        Ok((map, status, start.elapsed().as_secs_f64() * 1e3))
    }

    pub fn need_cracks(&self, n: usize, what: &str) -> Result<(), CliError> {
        if self.cracks.len() < n {
            return Err(CliError::Config(format!("{what} needs {n} crack(s), the scenario has {}", self.cracks.len())));
        }
        Ok(())
    }
}

pub fn run_command(cmd: Command, cfg: ScenarioConfig, out: PathBuf, cache: Cache) -> Result<PathBuf, CliError> {
    let sc = Scenario::new(cfg, cache)?;
    let mut art = Artifacts::new(out, sc.hash.clone());
    art.write("scenario.toml", sc.cfg.to_toml().as_bytes())?;
    let outcome = match cmd {
        Command::Solve => solve(&sc, &mut art),
        Command::Dnmap => dnmap(&sc, &mut art),
        Command::Probe => analysis::probe(&sc, &mut art),
        Command::Reconstruct => analysis::reconstruct(&sc, &mut art),
        Command::Sweep => analysis::sweep(&sc, &mut art),
        Command::Validate => analysis::validate(&sc, &mut art),
    };
    // Failed checks still leave their report and a manifest behind.
    match outcome {
        Ok(()) => art.finish(cmd.name()),
        Err(e @ CliError::Check(_)) => {
            art.finish(cmd.name())?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

/// `Re z^k` and its gradient.
pub fn harmonic(k: u32, p: Vec2) -> (f64, Vec2) {
    let pow = |n: u32| (0..n).fold((1.0, 0.0), |(re, im), _| (re * p.x - im * p.y, re * p.y + im * p.x));
    let (re, _) = pow(k);
    let (a, b) = if k == 0 { (0.0, 0.0) } else { pow(k - 1) };
    (re, k as f64 * Vec2::new(a, -b))
}

/// Dirichlet or Neumann data of `Re z^k` on the boundary of `p`.
pub fn harmonic_datum(p: &ForwardProblem, kind: DatumKind, k: u32) -> BoundaryDatum {
    let b = p.boundary();
    match kind {
        DatumKind::Dirichlet => BoundaryDatum::dirichlet(b.x.iter().map(|x| harmonic(k, *x).0).collect()),
        DatumKind::Neumann => {
            BoundaryDatum::neumann(b.x.iter().zip(&b.normal).map(|(x, n)| harmonic(k, *x).1.dot(n)).collect())
        }
    }
}

/// Relative weighted L² error of the crack-free flux (Dirichlet) or trace
/// up to constants (Neumann) against `Re z^k`.
pub fn harmonic_error(p: &ForwardProblem, kind: DatumKind, k: u32) -> Result<f64, CliError> {
    let sol = p.solve(&harmonic_datum(p, kind, k)).map_err(num("forward"))?;
    let b = p.boundary();
    let (got, want): (Vec<f64>, Vec<f64>) = match kind {
        DatumKind::Dirichlet => {
            (sol.boundary_flux().to_vec(), b.x.iter().zip(&b.normal).map(|(x, n)| harmonic(k, *x).1.dot(n)).collect())
        }
        DatumKind::Neumann => (sol.boundary_trace().to_vec(), b.x.iter().map(|x| harmonic(k, *x).0).collect()),
    };
    let mean = |v: &[f64]| v.iter().zip(&b.w).map(|(f, w)| f * w).sum::<f64>() / b.length();
    let shift = if kind == DatumKind::Neumann { mean(&got) - mean(&want) } else { 0.0 };
    let (mut err, mut norm) = (0.0, 0.0);
    for j in 0..b.n() {
        err += b.w[j] * (got[j] - shift - want[j]).powi(2);
        norm += b.w[j] * want[j].powi(2);
    }
    Ok((err / norm.max(f64::MIN_POSITIVE)).sqrt())
}

fn solve(sc: &Scenario, art: &mut Artifacts) -> Result<(), CliError> {
    let s = &sc.cfg.solve;
    let mut rows = Vec::new();
    for c in sc.configs() {
        let p = sc.problem(c)?;
        let sol = p.solve(&harmonic_datum(&p, s.datum, s.order)).map_err(num("forward"))?;
        let mut row = json!({
            "config": c.label(),
            "flux_balance": sol.flux_balance(),
            "tip_intensity": sol.tip_intensity(),
        });
        match c {
            Config::Free => {
                row["harmonic_error"] = json!(harmonic_error(&p, s.datum, s.order)?);
            }
            Config::Crack(i) => {
                let mut csv = Vec::new();
                write_crack_csv(&mut csv, &sol, s.samples)?;
                art.write_csv(&format!("solve/{}.csv", c.label()), &csv)?;
                if !sc.cracks[i].1.is_insulating() {
                    let (_, min) = solve_positive(&p).map_err(num("forward"))?;
                    row["positive_minimum"] = json!(min);
                }
            }
        }
        rows.push(row);
    }
    art.write_json("solve.json", json!({ "datum": s.datum, "order": s.order, "configs": rows }))
}

fn dnmap(sc: &Scenario, art: &mut Artifacts) -> Result<(), CliError> {
    let basis = sc.basis()?;
    let mut rows = Vec::new();
    for c in sc.configs() {
        for &kind in &sc.cfg.maps.kinds {
            let (map, status, ms) = sc.map(&basis, c, kind)?;
            let name = format!("maps/{}-{}", c.label(), kind.as_str());
            eprintln!("dnmap {name}: {} in {ms:.3} ms", status_word(status));
            let mut bytes = Vec::new();
            write_archive(&map, &mut bytes).map_err(num("dnmap"))?;
            art.write(&format!("{name}.cpmap"), &bytes)?;
            art.write_json(&format!("{name}.json"), sidecar_json(&map))?;
            rows.push(json!({
                "config": c.label(),
                "kind": kind,
                "archive": format!("{name}.cpmap"),
                "selfadjoint_defect": selfadjoint_defect(&map),
            }));
        }
    }
    art.write_json("dnmap.json", json!({ "modes": basis.len(), "maps": rows }))
}

pub fn status_word(s: CacheStatus) -> &'static str {
    match s {
        CacheStatus::Hit => "cache hit",
        CacheStatus::Miss => "cache miss",
        CacheStatus::Disabled => "assembled",
    }
}

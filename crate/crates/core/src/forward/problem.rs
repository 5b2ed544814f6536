//! Discretization and assembly.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, LU};

use super::kernel::{adlp, dlp, green, hyper, INV_2PI};
use super::param::ParamMap;
use super::{BoundaryDatum, CrackData, DatumKind, Discretization, ImpedancePair, Solution};
use crate::error::{Error, Result};
use crate::geometry::{ClosedCurve, CrackCurve, Domain, Vec2};
use crate::quad::{gauss_legendre_on, kress_log_weights};

/// Nyström nodes on the outer boundary.
#[derive(Debug, Clone)]
pub struct BoundaryDisc {
    pub curve: ClosedCurve,
    pub t: Vec<f64>,
    pub x: Vec<Vec2>,
    pub normal: Vec<Vec2>,
    pub speed: Vec<f64>,
    /// Trapezoid weights including the speed.
    pub w: Vec<f64>,
    pub d2: Vec<Vec2>,
}

impl BoundaryDisc {
    fn new(curve: &ClosedCurve, n: usize) -> Self {
        let t: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let pts: Vec<_> = t.iter().map(|t| curve.eval(*t)).collect();
        let speed: Vec<f64> = pts.iter().map(|p| p.speed()).collect();
        Self {
            curve: curve.clone(),
            x: pts.iter().map(|p| p.x).collect(),
            normal: pts.iter().map(|p| p.normal()).collect(),
            w: speed.iter().map(|s| s * 2.0 * PI / n as f64).collect(),
            d2: pts.iter().map(|p| p.d2).collect(),
            speed,
            t,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn length(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Boundary nodal values of `f`.
    pub fn sample<F: Fn(Vec2) -> f64>(&self, f: F) -> Vec<f64> {
        self.x.iter().map(|p| f(*p)).collect()
    }
}

/// Gauss–Legendre nodes on the crack in the variable `θ`, with `t = cos θ`
/// and the curve parameter `s = ψ(t)`.
#[derive(Debug, Clone)]
pub struct CrackDisc {
    pub curve: CrackCurve,
    pub map: ParamMap,
    pub nc: usize,
    pub theta: Vec<f64>,
    pub wq: Vec<f64>,
    /// Curve parameter at the nodes.
    pub s: Vec<f64>,
    pub x: Vec<Vec2>,
    /// Derivatives with respect to `t`.
    pub xt: Vec<Vec2>,
    pub xtt: Vec<Vec2>,
    pub speed: Vec<f64>,
    pub nu: Vec<Vec2>,
    /// Arc-length weight `w sin θ |x_t|` at each node.
    pub ds: Vec<f64>,
    pub gp: Vec<f64>,
    pub gm: Vec<f64>,
    /// `cos(nθ_q)` and `sin((n+1)θ_q)`, rows indexed by node.
    pub cos_n: DMatrix<f64>,
    pub sin_n1: DMatrix<f64>,
}

/// Geometry of the crack at `t` under `map`: `(s, x, x_t, x_tt)`.
pub(crate) fn crack_geometry(curve: &CrackCurve, map: &ParamMap, t: f64) -> (f64, Vec2, Vec2, Vec2) {
    let (s, ds, dds) = map.eval(t);
    let p = curve.eval(s.clamp(-1.0, 1.0));
    (s, p.x, p.d1 * ds, p.d2 * ds * ds + p.d1 * dds)
}

impl CrackDisc {
    fn new(curve: &CrackCurve, map: ParamMap, imp: &ImpedancePair, nc: usize, nq: usize) -> Self {
        let (theta, wq) = gauss_legendre_on(nq, 0.0, PI);
        let mut c = Self {
            curve: curve.clone(),
            map,
            nc,
            s: Vec::with_capacity(nq),
            x: Vec::with_capacity(nq),
            xt: Vec::with_capacity(nq),
            xtt: Vec::with_capacity(nq),
            speed: Vec::with_capacity(nq),
            nu: Vec::with_capacity(nq),
            ds: Vec::with_capacity(nq),
            gp: Vec::with_capacity(nq),
            gm: Vec::with_capacity(nq),
            cos_n: DMatrix::from_fn(nq, nc, |q, n| (n as f64 * theta[q]).cos()),
            sin_n1: DMatrix::from_fn(nq, nc, |q, n| ((n + 1) as f64 * theta[q]).sin()),
            theta,
            wq,
        };
        for q in 0..nq {
            let (s, x, xt, xtt) = crack_geometry(curve, &map, c.theta[q].cos());
            let sp = xt.norm();
            let (gp, gm) = imp.eval(s);
            c.s.push(s);
            c.x.push(x);
            c.xt.push(xt);
            c.xtt.push(xtt);
            c.speed.push(sp);
            c.nu.push(Vec2::new(-xt.y, xt.x) / sp * curve.orientation());
            c.ds.push(c.wq[q] * c.theta[q].sin() * sp);
            c.gp.push(gp);
            c.gm.push(gm);
        }
        c
    }

    pub fn nq(&self) -> usize {
        self.theta.len()
    }

    /// Smooth self-kernel limit `x_tt·ν / (4π |x_t|²)` shared by `D` and `K'`.
    fn diag_limit(&self, q: usize) -> f64 {
        self.xtt[q].dot(&self.nu[q]) / (4.0 * PI * self.speed[q] * self.speed[q])
    }

    /// `log(|x(t) - x(t')| / |t - t'|)` between nodes.
    fn smooth_log(&self, q: usize, p: usize) -> f64 {
        if q == p {
            self.speed[q].ln()
        } else {
            let dt = (self.theta[q].cos() - self.theta[p].cos()).abs();
            ((self.x[q] - self.x[p]).norm() / dt).ln()
        }
    }

    /// Crack data `(g⁺, g⁻)` at node `q`.
    pub(crate) fn data_at(&self, data: &CrackData, x: Vec2, nu: Vec2, gp: f64, gm: f64) -> (f64, f64) {
        match data {
            CrackData::None => (0.0, 0.0),
            CrackData::Pole(y) => {
                let g = green(x, *y, 1.0);
                let dn = adlp(x, nu, *y);
                (gp * g - dn, dn + gm * g)
            }
        }
    }
}

/// Crack blocks of the system. Rows `A` test the averaged flux equation
/// against `sin((m+1)θ)` in arc length, rows `B` test the averaged trace
/// equation against `cos(mθ) dθ`.
#[derive(Debug)]
struct CrackBlocks {
    s_b_sig: DMatrix<f64>,
    d_b_a: DMatrix<f64>,
    s_bb_b: DMatrix<f64>,
    d_bb_b: DMatrix<f64>,
    s_bsig: DMatrix<f64>,
    d_ba: DMatrix<f64>,
    ds_ab: DMatrix<f64>,
    dd_ab: DMatrix<f64>,
    kp_asig: DMatrix<f64>,
    n_aa: DMatrix<f64>,
    t_a: DMatrix<f64>,
    /// σ = amu·a + au·b + g⁺ + g⁻ at the nodes.
    amu: DMatrix<f64>,
    au: DMatrix<f64>,
    /// q̄ = qa·a + qb·b + (g⁺ - g⁻)/2 at the nodes.
    qa: DMatrix<f64>,
    qb: DMatrix<f64>,
}

type Factored = (DMatrix<f64>, LU<f64, nalgebra::Dyn, nalgebra::Dyn>);

/// A discretized forward problem; factorizations are built on first use and
/// shared by every subsequent solve.
#[derive(Debug, Clone)]
pub struct ForwardProblem {
    inner: Arc<Inner>,
}

#[derive(Debug)]
pub(crate) struct Inner {
    pub(crate) bnd: BoundaryDisc,
    pub(crate) crack: Option<CrackDisc>,
    pub(crate) imp: ImpedancePair,
    pub(crate) disc: Discretization,
    pub(crate) log_scale: f64,
    s_bb: DMatrix<f64>,
    k_bb: DMatrix<f64>,
    blocks: Option<CrackBlocks>,
    lu_dir: OnceLock<Factored>,
    lu_neu: OnceLock<Factored>,
}

impl ForwardProblem {
    pub fn new(dom: &Domain, crack: Option<&CrackCurve>, imp: &ImpedancePair, disc: &Discretization) -> Result<Self> {
        Self::with_map(dom, crack, imp, disc, ParamMap::Identity)
    }

    /// Problem whose crack nodes are clustered by `map`.
    pub fn with_map(
        dom: &Domain,
        crack: Option<&CrackCurve>,
        imp: &ImpedancePair,
        disc: &Discretization,
        map: ParamMap,
    ) -> Result<Self> {
        disc.validate()?;
        let crack = crack.filter(|c| c.length() > 0.0);
        if let Some(c) = crack {
            c.check_in(dom)?;
            for g in imp.plus.iter().chain(&imp.minus) {
                if !(g.is_finite() && *g >= 0.0) {
                    return Err(Error::OutOfRange { field: "gamma", reason: format!("negative impedance {g}") });
                }
            }
        }
        let log_scale = 2.0 * dom.diameter();
        let bnd = BoundaryDisc::new(&dom.boundary, disc.n_boundary);
        let (s_bb, k_bb) = boundary_blocks(&bnd, log_scale);
        let crack = crack.map(|c| CrackDisc::new(c, map, imp, disc.n_crack, disc.quad_nodes()));
        let blocks = crack.as_ref().map(|c| crack_blocks(&bnd, c, log_scale));
        Ok(Self {
            inner: Arc::new(Inner {
                bnd,
                crack,
                imp: imp.clone(),
                disc: *disc,
                log_scale,
                s_bb,
                k_bb,
                blocks,
                lu_dir: OnceLock::new(),
                lu_neu: OnceLock::new(),
            }),
        })
    }

    pub(crate) fn inner(&self) -> &Inner {
        &self.inner
    }

    pub fn boundary(&self) -> &BoundaryDisc {
        &self.inner.bnd
    }

    pub fn crack(&self) -> Option<&CrackDisc> {
        self.inner.crack.as_ref()
    }

    pub fn impedance(&self) -> &ImpedancePair {
        &self.inner.imp
    }

    pub fn discretization(&self) -> &Discretization {
        &self.inner.disc
    }

    /// Whether the Neumann problem has constants in its kernel.
    pub fn neumann_is_singular(&self) -> bool {
        self.inner.crack.is_none() || self.inner.imp.is_insulating()
    }

    fn size(&self) -> usize {
        self.inner.bnd.n() + 2 * self.inner.crack.as_ref().map_or(0, |c| c.nc)
    }

    fn matrix(&self, kind: DatumKind) -> DMatrix<f64> {
        let inn = &*self.inner;
        let n = inn.bnd.n();
        let size = self.size();
        let mut m = DMatrix::zeros(size, size);
        let half_k = {
            let mut h = inn.k_bb.clone();
            for i in 0..n {
                h[(i, i)] += 0.5;
            }
            h
        };
        match kind {
            DatumKind::Dirichlet => m.view_mut((0, 0), (n, n)).copy_from(&inn.s_bb),
            DatumKind::Neumann => {
                m.view_mut((0, 0), (n, n)).copy_from(&half_k);
                if self.neumann_is_singular() {
                    for i in 0..n {
                        for j in 0..n {
                            m[(i, j)] += inn.bnd.w[j];
                        }
                    }
                }
            }
        }
        if let (Some(c), Some(b)) = (&inn.crack, &inn.blocks) {
            let nc = c.nc;
            let sgn = if kind == DatumKind::Dirichlet { 1.0 } else { -1.0 };
            // boundary rows
            let ba = (&b.s_b_sig * &b.amu) * (-sgn) + &b.d_b_a * sgn;
            let bb = (&b.s_b_sig * &b.au) * (-sgn);
            m.view_mut((0, n), (n, nc)).copy_from(&ba);
            m.view_mut((0, n + nc), (n, nc)).copy_from(&bb);
            // flux rows
            let av = match kind {
                DatumKind::Dirichlet => b.ds_ab.clone(),
                DatumKind::Neumann => -&b.dd_ab,
            };
            m.view_mut((n, 0), (nc, n)).copy_from(&av);
            let aa = -(&b.kp_asig * &b.amu) + &b.n_aa - &b.t_a * &b.qa;
            let ab = -(&b.kp_asig * &b.au) - &b.t_a * &b.qb;
            m.view_mut((n, n), (nc, nc)).copy_from(&aa);
            m.view_mut((n, n + nc), (nc, nc)).copy_from(&ab);
            // trace rows
            let bv = match kind {
                DatumKind::Dirichlet => b.s_bb_b.clone(),
                DatumKind::Neumann => -&b.d_bb_b,
            };
            m.view_mut((n + nc, 0), (nc, n)).copy_from(&bv);
            let ba2 = -(&b.s_bsig * &b.amu) + &b.d_ba;
            let mut bb2 = -(&b.s_bsig * &b.au);
            for k in 0..nc {
                bb2[(k, k)] -= if k == 0 { PI } else { 0.5 * PI };
            }
            m.view_mut((n + nc, n), (nc, nc)).copy_from(&ba2);
            m.view_mut((n + nc, n + nc), (nc, nc)).copy_from(&bb2);
        }
        m
    }

    /// Full system matrix (exposed for diagnostics).
    pub fn system_matrix(&self, kind: DatumKind) -> DMatrix<f64> {
        self.matrix(kind)
    }

    fn factored(&self, kind: DatumKind) -> &Factored {
        let cell = match kind {
            DatumKind::Dirichlet => &self.inner.lu_dir,
            DatumKind::Neumann => &self.inner.lu_neu,
        };
        cell.get_or_init(|| {
            let m = self.matrix(kind);
            let lu = m.clone().lu();
            (m, lu)
        })
    }

    /// Right-hand sides for the boundary data in the columns of `data`.
    fn rhs(&self, kind: DatumKind, data: &DMatrix<f64>, crack_data: &[CrackData], mean: f64) -> DMatrix<f64> {
        let inn = &*self.inner;
        let n = inn.bnd.n();
        let size = self.size();
        let cols = data.ncols();
        let mut r = DMatrix::zeros(size, cols);
        match kind {
            DatumKind::Dirichlet => {
                let mut top = &inn.k_bb * data;
                top += data * 0.5;
                r.view_mut((0, 0), (n, cols)).copy_from(&top);
            }
            DatumKind::Neumann => {
                r.view_mut((0, 0), (n, cols)).copy_from(&(&inn.s_bb * data));
                if self.neumann_is_singular() {
                    for i in 0..n {
                        for j in 0..cols {
                            r[(i, j)] += mean;
                        }
                    }
                }
            }
        }
        if let (Some(c), Some(b)) = (&inn.crack, &inn.blocks) {
            let nc = c.nc;
            let (av, bv) = match kind {
                DatumKind::Dirichlet => (&b.dd_ab * data, &b.d_bb_b * data),
                DatumKind::Neumann => (-(&b.ds_ab * data), -(&b.s_bb_b * data)),
            };
            r.view_mut((n, 0), (nc, cols)).copy_from(&av);
            r.view_mut((n + nc, 0), (nc, cols)).copy_from(&bv);
            for (j, cd) in crack_data.iter().enumerate().take(cols) {
                if let CrackData::None = cd {
                    continue;
                }
                let nq = c.nq();
                let mut gsum = DVector::zeros(nq);
                let mut ghalf = DVector::zeros(nq);
                for q in 0..nq {
                    let (gp, gm) = c.data_at(cd, c.x[q], c.nu[q], c.gp[q], c.gm[q]);
                    gsum[q] = gp + gm;
                    ghalf[q] = 0.5 * (gp - gm);
                }
                let sgn = if kind == DatumKind::Dirichlet { 1.0 } else { -1.0 };
                let top = &b.s_b_sig * &gsum * sgn;
                let amid = &b.kp_asig * &gsum + &b.t_a * &ghalf;
                let bot = &b.s_bsig * &gsum;
                for i in 0..n {
                    r[(i, j)] += top[i];
                }
                for k in 0..nc {
                    r[(n + k, j)] += amid[k];
                    r[(n + nc + k, j)] += bot[k];
                }
            }
        }
        r
    }

    /// Solves for every column of `data` (nodal boundary values of `kind`).
    /// Returns the unknown vectors as columns.
    pub(crate) fn solve_columns(
        &self,
        kind: DatumKind,
        data: &DMatrix<f64>,
        crack_data: &[CrackData],
        mean: f64,
    ) -> Result<DMatrix<f64>> {
        let rhs = self.rhs(kind, data, crack_data, mean);
        let (a, lu) = self.factored(kind);
        let sol = lu.solve(&rhs).ok_or_else(|| Error::SolveFailed {
            context: format!("{kind:?} system is singular"),
            residual: f64::INFINITY,
        })?;
        let resid = (a * &sol - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
        let tol = 1e-8;
        if !resid.is_finite() || !sol.iter().all(|v| v.is_finite()) || resid > tol {
            return Err(Error::SolveFailed { context: format!("{kind:?} system"), residual: resid });
        }
        Ok(sol)
    }

    /// Boundary response to every column of `data`: fluxes for Dirichlet data,
    /// traces for Neumann data. Singular Neumann problems are normalized by
    /// `∫_{∂Ω} u = 0` and need zero-mean columns.
    pub fn boundary_response(&self, kind: DatumKind, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.inner.bnd.n();
        if data.nrows() != n {
            return Err(Error::InvalidInput(format!("data has {} rows, expected {n}", data.nrows())));
        }
        let z = self.solve_columns(kind, data, &vec![CrackData::None; data.ncols()], 0.0)?;
        Ok(z.rows(0, n).into_owned())
    }

    /// Solves one boundary value problem.
    pub fn solve(&self, datum: &BoundaryDatum) -> Result<Solution> {
        self.solve_with(datum, CrackData::None, 0.0)
    }

    /// Solves with crack data; for singular Neumann problems the boundary
    /// integral of the trace is fixed to `mean`.
    pub fn solve_with(&self, datum: &BoundaryDatum, crack_data: CrackData, mean: f64) -> Result<Solution> {
        let n = self.inner.bnd.n();
        if datum.values.len() != n {
            return Err(Error::InvalidInput(format!("datum has {} values, expected {n}", datum.values.len())));
        }
        if datum.kind == DatumKind::Neumann && self.neumann_is_singular() && crack_data == CrackData::None {
            let total: f64 = datum.values.iter().zip(&self.inner.bnd.w).map(|(v, w)| v * w).sum();
            let scale: f64 = datum.values.iter().zip(&self.inner.bnd.w).map(|(v, w)| v.abs() * w).sum();
            if total.abs() > 1e-8 * scale.max(1e-300) {
                return Err(Error::InvalidInput(format!("Neumann datum has nonzero mean flux {total:.3e}")));
            }
        }
        let data = DMatrix::from_column_slice(n, 1, &datum.values);
        let z = self.solve_columns(datum.kind, &data, &[crack_data], mean)?;
        Ok(Solution::from_unknowns(self.clone(), datum, crack_data, z.column(0).as_slice()))
    }
}

fn boundary_blocks(b: &BoundaryDisc, log_scale: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = b.n();
    let kress = kress_log_weights(n);
    let h = 2.0 * PI / n as f64;
    let mut s = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let off = (j + n - i) % n;
            let smooth = if i == j {
                -INV_2PI * 0.5 * (b.speed[i] * b.speed[i]).ln() + INV_2PI * log_scale.ln()
            } else {
                let d2 = (b.x[i] - b.x[j]).norm_squared();
                let sn = (0.5 * (b.t[i] - b.t[j])).sin();
                -INV_2PI * 0.5 * (d2 / (4.0 * sn * sn)).ln() + INV_2PI * log_scale.ln()
            };
            s[(i, j)] = b.speed[j] * (-0.5 * INV_2PI * kress[off] + h * smooth);
            k[(i, j)] = if i == j {
                b.w[j] * INV_2PI * b.d2[j].dot(&b.normal[j]) / (2.0 * b.speed[j] * b.speed[j])
            } else {
                b.w[j] * dlp(b.x[i], b.x[j], b.normal[j])
            };
        }
    }
    (s, k)
}

/// `∫_0^π log|cos θ - cos φ| cos(mθ) dθ` as a function of `φ`.
fn log_cos_moment(m: usize, phi: f64) -> f64 {
    if m == 0 {
        -PI * 2f64.ln()
    } else {
        -PI / m as f64 * (m as f64 * phi).cos()
    }
}

fn crack_blocks(b: &BoundaryDisc, c: &CrackDisc, log_scale: f64) -> CrackBlocks {
    let n = b.n();
    let nc = c.nc;
    let nq = c.nq();
    // kernels between crack nodes
    let lmat = DMatrix::from_fn(nq, nq, |q, p| c.smooth_log(q, p));
    let kd = DMatrix::from_fn(nq, nq, |q, p| if q == p { c.diag_limit(q) } else { dlp(c.x[q], c.x[p], c.nu[p]) });
    let kp = DMatrix::from_fn(nq, nq, |q, p| if q == p { c.diag_limit(q) } else { adlp(c.x[q], c.nu[q], c.x[p]) });
    let ds = DMatrix::from_diagonal(&DVector::from_column_slice(&c.ds));
    // test weights
    let cos_test = DMatrix::from_fn(nc, nq, |m, q| c.wq[q] * (m as f64 * c.theta[q]).cos());
    let t_a = DMatrix::from_fn(nc, nq, |m, q| c.ds[q] * ((m + 1) as f64 * c.theta[q]).sin());

    let s_b_sig = DMatrix::from_fn(n, nq, |i, p| green(b.x[i], c.x[p], log_scale) * c.ds[p]);
    let d_b_a = DMatrix::from_fn(n, nq, |i, p| dlp(b.x[i], c.x[p], c.nu[p]) * c.ds[p]) * &c.sin_n1;
    let s_bb_b = &cos_test * DMatrix::from_fn(nq, n, |q, j| green(c.x[q], b.x[j], log_scale) * b.w[j]);
    let d_bb_b = &cos_test * DMatrix::from_fn(nq, n, |q, j| dlp(c.x[q], b.x[j], b.normal[j]) * b.w[j]);
    let s_bsig = {
        let smooth = &cos_test * &lmat;
        DMatrix::from_fn(nc, nq, |m, p| {
            let phi = c.theta[p];
            let mut v = -INV_2PI * log_cos_moment(m, phi) - INV_2PI * smooth[(m, p)];
            if m == 0 {
                v += 0.5 * log_scale.ln();
            }
            v * c.ds[p]
        })
    };
    let d_ba = &cos_test * &kd * &ds * &c.sin_n1;
    let ds_ab = &t_a * DMatrix::from_fn(nq, n, |q, j| adlp(c.x[q], c.nu[q], b.x[j]) * b.w[j]);
    let dd_ab = &t_a * DMatrix::from_fn(nq, n, |q, j| hyper(c.x[q], c.nu[q], b.x[j], b.normal[j]) * b.w[j]);
    let kp_asig = &t_a * &kp * &ds;
    let n_aa = {
        let cm = DMatrix::from_fn(nq, nc, |q, m| c.wq[q] * ((m + 1) as f64 * c.theta[q]).cos());
        let core = cm.transpose() * &lmat * &cm;
        DMatrix::from_fn(nc, nc, |m, k| {
            let v = (m + 1) as f64 * (k + 1) as f64 * INV_2PI * core[(m, k)];
            if m == k {
                v - (k + 1) as f64 * PI / 4.0
            } else {
                v
            }
        })
    };
    let gsum = DVector::from_fn(nq, |q, _| c.gp[q] + c.gm[q]);
    let gdiff = DVector::from_fn(nq, |q, _| c.gp[q] - c.gm[q]);
    let amu = DMatrix::from_fn(nq, nc, |q, k| 0.5 * gdiff[q] * c.sin_n1[(q, k)]);
    let au = DMatrix::from_fn(nq, nc, |q, k| gsum[q] * c.cos_n[(q, k)]);
    let qa = DMatrix::from_fn(nq, nc, |q, k| 0.25 * gsum[q] * c.sin_n1[(q, k)]);
    let qb = DMatrix::from_fn(nq, nc, |q, k| 0.5 * gdiff[q] * c.cos_n[(q, k)]);
    CrackBlocks { s_b_sig, d_b_a, s_bb_b, d_bb_b, s_bsig, d_ba, ds_ab, dd_ab, kp_asig, n_aa, t_a, amu, au, qa, qb }
}

//! Discrete Dirichlet-to-Neumann and Neumann-to-Dirichlet maps in a
//! trigonometric boundary basis, and their distances in `H^{±1/2}` norms.

mod archive;

pub use archive::{read_archive, sidecar_json, write_archive, ARCHIVE_VERSION};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{BoundaryDisc, DatumKind, ForwardProblem};
use crate::geometry::Vec2;

/// Eigenvalue floor for patch modes: the fraction of the mode's squared
/// norm carried by the squared cutoff.
const PATCH_CONCENTRATION: f64 = 0.5;

/// Orthonormal trigonometric modes in the arc-length parameter of `∂Ω`:
/// `1, cos τ, sin τ, cos 2τ, …`, evaluated at the Nyström nodes.
#[derive(Debug, Clone)]
pub struct BoundaryBasis {
    freq: Vec<usize>,
    nodal: DMatrix<f64>,
    weights: Vec<f64>,
    nodes: Vec<Vec2>,
}

impl BoundaryBasis {
    pub fn new(bnd: &BoundaryDisc, k: usize) -> Result<Self> {
        let n = bnd.n();
        if k == 0 || k >= n {
            return Err(Error::OutOfRange { field: "k", reason: format!("basis size {k} must be in 1..{n}") });
        }
        let len = bnd.length();
        let freq: Vec<usize> = (0..k).map(|i| (i + 1) / 2).collect();
        let nodal = DMatrix::from_fn(n, k, |j, i| {
            let t = bnd.t[j];
            let f = freq[i] as f64;
            match i {
                0 => 1.0 / len.sqrt(),
                _ if i % 2 == 1 => (2.0 / len).sqrt() * (f * t).cos(),
                _ => (2.0 / len).sqrt() * (f * t).sin(),
            }
        });
        Ok(Self { freq, nodal, weights: bnd.w.clone(), nodes: bnd.x.clone() })
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    /// Frequency of mode `i`.
    pub fn frequency(&self, i: usize) -> usize {
        self.freq[i]
    }

    /// `(1 + k²)^{1/4}` per mode.
    pub fn half_weights(&self) -> Vec<f64> {
        self.freq.iter().map(|k| (1.0 + (*k as f64).powi(2)).powf(0.25)).collect()
    }

    /// Boundary nodes the modes are sampled at.
    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    /// Nodal values, one mode per column.
    pub fn nodal(&self) -> &DMatrix<f64> {
        &self.nodal
    }

    /// L² coefficients of nodal values.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let wv = DVector::from_iterator(values.len(), values.iter().zip(&self.weights).map(|(v, w)| v * w));
        (self.nodal.transpose() * wv).as_slice().to_vec()
    }

    /// Nodal values of a coefficient vector.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        (&self.nodal * DVector::from_column_slice(coeffs)).as_slice().to_vec()
    }

    /// `max |⟨φ_i, φ_j⟩ - δ_ij|` in the discrete pairing.
    pub fn gram_defect(&self) -> f64 {
        let g = self.pairing(&self.nodal);
        let k = self.len();
        (g - DMatrix::identity(k, k)).amax()
    }

    /// `Φᵀ W X`.
    fn pairing(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut wx = x.clone();
        for (j, w) in self.weights.iter().enumerate() {
            wx.row_mut(j).scale_mut(*w);
        }
        self.nodal.transpose() * wx
    }

    /// Orthonormal coefficient vectors (columns) of modes concentrated on the
    /// patch: eigenvectors of `Φᵀ W χ² Φ` with eigenvalue at least one half,
    /// for a smooth bump `χ` supported in the patch.
    pub fn patch_subspace(&self, patch: &Patch, zero_mean: bool) -> Result<DMatrix<f64>> {
        patch.validate()?;
        let c = Vec2::new(patch.center[0], patch.center[1]);
        let chi2: Vec<f64> = self
            .nodes
            .iter()
            .map(|x| {
                let r = (x - c).norm() / patch.radius;
                if r < 1.0 {
                    (2.0 * (1.0 - 1.0 / (1.0 - r * r))).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let first = usize::from(zero_mean);
        let k = self.len();
        let sub = self.nodal.columns(first, k - first).into_owned();
        let mut weighted = sub.clone();
        for (j, (w, x)) in self.weights.iter().zip(&chi2).enumerate() {
            weighted.row_mut(j).scale_mut(w * x);
        }
        let conc = sub.transpose() * weighted;
        let conc = (&conc + conc.transpose()) * 0.5;
        let eig = conc.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).filter(|i| eig.eigenvalues[*i] >= PATCH_CONCENTRATION).collect();
        order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
        if order.is_empty() {
            return Err(Error::InvalidInput("patch too small for the basis: no concentrated modes".into()));
        }
        let mut u = DMatrix::zeros(k, order.len());
        for (col, i) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(*i);
            let pivot = v.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for r in 0..v.len() {
                u[(first + r, col)] = sign * v[r];
            }
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Dn,
    Nd,
    LocalDn,
    LocalNd,
}

impl MapKind {
    pub fn is_local(self) -> bool {
        matches!(self, MapKind::LocalDn | MapKind::LocalNd)
    }

    /// Whether inputs are Neumann data (zero-mean currents).
    pub fn is_nd(self) -> bool {
        matches!(self, MapKind::Nd | MapKind::LocalNd)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::Dn => "dn",
            MapKind::Nd => "nd",
            MapKind::LocalDn => "local_dn",
            MapKind::LocalNd => "local_nd",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            MapKind::Dn => 0,
            MapKind::Nd => 1,
            MapKind::LocalDn => 2,
            MapKind::LocalNd => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        [MapKind::Dn, MapKind::Nd, MapKind::LocalDn, MapKind::LocalNd].get(c as usize).copied()
    }
}

/// Boundary portion `∂Ω ∩ B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Patch {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::OutOfRange { field: "radius", reason: "patch radius must be positive".into() });
        }
        Ok(())
    }
}

/// Fault injection for assembly tests.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssemblyFault {
    None,
    /// Pairs each response with the test modes sampled one node ahead.
    ShiftedPairing,
}

/// Matrix of a boundary map in the bilinear form `M_ij = ⟨φ_i, Λ φ_j⟩`.
/// Local maps live on the patch subspace, whose coefficient vectors are the
/// columns of `subspace`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBoundaryMap {
    pub kind: MapKind,
    pub patch: Option<Patch>,
    pub matrix: DMatrix<f64>,
    /// `(1 + k²)^{1/4}` per basis mode.
    pub half_weights: Vec<f64>,
    pub subspace: Option<DMatrix<f64>>,
    /// Scenario hash or other provenance tag.
    pub provenance: String,
}

/// Assembles the map of `kind` by one forward solve per basis mode.
pub fn assemble_map(
    problem: &ForwardProblem,
    basis: &BoundaryBasis,
    kind: MapKind,
    patch: Option<&Patch>,
) -> Result<DiscreteBoundaryMap> {
    assemble_map_with(problem, basis, kind, patch, AssemblyFault::None)
}

#[doc(hidden)]
pub fn assemble_map_with(
    problem: &ForwardProblem,
    basis: &BoundaryBasis,
    kind: MapKind,
    patch: Option<&Patch>,
    fault: AssemblyFault,
) -> Result<DiscreteBoundaryMap> {
    if problem.boundary().n() != basis.nodal.nrows() {
        return Err(Error::Mismatch("basis sampled on a different boundary discretization".into()));
    }
    let k = basis.len();
    let subspace = match (kind.is_local(), patch) {
        (true, Some(p)) => Some(basis.patch_subspace(p, kind.is_nd())?),
        (true, None) => return Err(Error::InvalidInput(format!("{} map needs a patch", kind.as_str()))),
        (false, Some(_)) => return Err(Error::InvalidInput("patch given for a global map".into())),
        (false, None) => None,
    };
    // Input coefficient vectors as columns.
    let inputs = match &subspace {
        Some(u) => u.clone(),
        None if kind.is_nd() => {
            let mut e = DMatrix::zeros(k, k - 1);
            for j in 1..k {
                e[(j, j - 1)] = 1.0;
            }
            e
        }
        None => DMatrix::identity(k, k),
    };
    let data = &basis.nodal * &inputs;
    let datum = if kind.is_nd() { DatumKind::Neumann } else { DatumKind::Dirichlet };
    let resp = match problem.boundary_response(datum, &data) {
        Ok(r) => r,
        Err(_) => return Err(locate_failure(problem, datum, &data)),
    };
    let tested = match fault {
        AssemblyFault::None => basis.pairing(&resp),
        AssemblyFault::ShiftedPairing => {
            let n = resp.nrows();
            let shifted = DMatrix::from_fn(n, k, |j, i| basis.nodal[((j + 1) % n, i)]);
            let mut wr = resp.clone();
            for (j, w) in basis.weights.iter().enumerate() {
                wr.row_mut(j).scale_mut(*w);
            }
            shifted.transpose() * wr
        }
    };
    let matrix = match (&subspace, kind.is_nd()) {
        (Some(u), _) => u.transpose() * tested,
        (None, true) => {
            let mut m = DMatrix::zeros(k, k);
            m.view_mut((0, 1), (k, k - 1)).copy_from(&tested);
            m
        }
        (None, false) => tested,
    };
    Ok(DiscreteBoundaryMap {
        kind,
        patch: patch.copied(),
        matrix,
        half_weights: basis.half_weights(),
        subspace,
        provenance: String::new(),
    })
}

fn locate_failure(problem: &ForwardProblem, kind: DatumKind, data: &DMatrix<f64>) -> Error {
    for j in 0..data.ncols() {
        let col = data.column(j).into_owned();
        if let Err(e) = problem.boundary_response(kind, &DMatrix::from_column_slice(col.len(), 1, col.as_slice())) {
            return Error::AssemblyFailed { mode: j, source: Box::new(e) };
        }
    }
    Error::AssemblyFailed {
        mode: 0,
        source: Box::new(Error::CheckFailed("batch solve failed but every column succeeded".into())),
    }
}

impl DiscreteBoundaryMap {
    pub fn with_provenance(mut self, tag: impl Into<String>) -> Self {
        self.provenance = tag.into();
        self
    }

    pub fn basis_size(&self) -> usize {
        self.half_weights.len()
    }

    /// Matrix in global basis coordinates (`U M Uᵀ` for local maps).
    pub fn global_matrix(&self) -> DMatrix<f64> {
        match &self.subspace {
            Some(u) => u * &self.matrix * u.transpose(),
            None => self.matrix.clone(),
        }
    }

    /// `⟨M c₁, c₂⟩` for global coefficient vectors.
    pub fn bilinear(&self, c1: &[f64], c2: &[f64]) -> f64 {
        let g = self.global_matrix();
        let a = DVector::from_column_slice(c1);
        let b = DVector::from_column_slice(c2);
        b.dot(&(g * a))
    }

    /// Copy with the matrix multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.matrix *= s;
        m
    }

    /// Cholesky factor `L` of the Gram matrix of the input norm on the patch
    /// subspace.
    fn patch_factor(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut au = u.clone();
        for (i, w) in self.half_weights.iter().enumerate() {
            au.row_mut(i).scale_mut(if self.kind.is_nd() { 1.0 / w } else { *w });
        }
        let g = au.transpose() * &au;
        let l = g.cholesky().ok_or_else(|| Error::CheckFailed("patch Gram matrix is not positive definite".into()))?;
        Ok(l.l())
    }

    /// Operator norm of a matrix of this map's shape: `H^{1/2} → H^{-1/2}`
    /// for D-N maps, `₀H^{-1/2} → H^{1/2}` for N-D maps and the restricted
    /// bilinear form `sup ⟨D x, y⟩ / (|x| |y|)` for local maps.
    pub(crate) fn weighted_norm_of(&self, d: &DMatrix<f64>) -> Result<f64> {
        let w = &self.half_weights;
        let k = w.len();
        let scaled = match (&self.subspace, self.kind.is_nd()) {
            (Some(u), _) => {
                let l = self.patch_factor(u)?;
                let linv = l.try_inverse().ok_or_else(|| Error::CheckFailed("singular patch Gram factor".into()))?;
                &linv * d * linv.transpose()
            }
            (None, false) => DMatrix::from_fn(k, k, |i, j| d[(i, j)] / (w[i] * w[j])),
            (None, true) => DMatrix::from_fn(k, k - 1, |i, j| d[(i, j + 1)] * w[i] * w[j + 1]),
        };
        Ok(scaled.singular_values().max())
    }

    /// Copy with an additive symmetric Gaussian perturbation whose entries in
    /// weighted coordinates have standard deviation `level`.
    pub fn perturbed(&self, level: f64, seed: u64) -> Self {
        let m = self.matrix.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v: f64 = StandardNormal.sample(&mut rng);
                g[(i, j)] = level * v;
                g[(j, i)] = level * v;
            }
        }
        // Map weighted-coordinate noise back to raw coordinates.
        let mut out = self.clone();
        if let Some(u) = &self.subspace {
            if let Ok(l) = self.patch_factor(u) {
                out.matrix += &l * g * l.transpose();
            }
            return out;
        }
        let scale: Vec<f64> =
            self.half_weights.iter().map(|w| if self.kind.is_nd() { 1.0 / w } else { *w }).collect();
        let first = usize::from(self.kind.is_nd());
        for i in first..m {
            for j in first..m {
                out.matrix[(i, j)] += scale[i] * g[(i, j)] * scale[j];
            }
        }
        out
    }
}

/// Operator-norm distance `‖M₁ - M₂‖` between maps of the same kind, basis and
/// patch: `H^{1/2} → H^{-1/2}` for D-N maps and `H^{-1/2} → H^{1/2}` for N-D maps.
pub fn op_norm_diff(m1: &DiscreteBoundaryMap, m2: &DiscreteBoundaryMap) -> Result<f64> {
    if m1.kind != m2.kind {
        return Err(Error::Mismatch(format!("kinds {} and {}", m1.kind.as_str(), m2.kind.as_str())));
    }
    if m1.half_weights != m2.half_weights {
        return Err(Error::Mismatch("different bases".into()));
    }
    if m1.patch != m2.patch || m1.subspace != m2.subspace {
        return Err(Error::Mismatch("different patches".into()));
    }
    m1.weighted_norm_of(&(&m1.matrix - &m2.matrix))
}

/// `‖M - Mᵀ‖` in the weighted norm of the map's kind; global N-D maps are
/// compared on the zero-mean block only.
pub fn selfadjoint_defect(m: &DiscreteBoundaryMap) -> f64 {
    let mut d = &m.matrix - m.matrix.transpose();
    if m.kind.is_nd() && m.subspace.is_none() {
        d.row_mut(0).fill(0.0);
        d.column_mut(0).fill(0.0);
    }
    m.weighted_norm_of(&d).unwrap_or(f64::INFINITY)
}

/// `H^{1/2}` norm of a coefficient vector.
pub fn h_half_norm(weights: &[f64], coeffs: &[f64]) -> f64 {
    weights.iter().zip(coeffs).map(|(w, c)| (w * c).powi(2)).sum::<f64>().sqrt()
}

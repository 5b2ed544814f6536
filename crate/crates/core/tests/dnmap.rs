use crackprobe::dnmap::{
    assemble_map, assemble_map_with, op_norm_diff, read_archive, selfadjoint_defect, write_archive, AssemblyFault,
    BoundaryBasis, DiscreteBoundaryMap, MapKind, Patch,
};
use crackprobe::forward::{Discretization, ForwardProblem, ImpedancePair};
use crackprobe::geometry::{BoundaryShape, CrackCurve, Domain, Vec2};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: usize = 64;

fn problem(crack: Option<&CrackCurve>, imp: &ImpedancePair) -> ForwardProblem {
    ForwardProblem::new(&Domain::unit_disk(), crack, imp, &Discretization::default()).unwrap()
}

fn map(p: &ForwardProblem, kind: MapKind, patch: Option<&Patch>) -> DiscreteBoundaryMap {
    let basis = BoundaryBasis::new(p.boundary(), K).unwrap();
    assemble_map(p, &basis, kind, patch).unwrap()
}

fn arc() -> CrackCurve {
    CrackCurve::arc_through([-0.4, -0.1], [0.45, 0.15], 0.12).unwrap()
}

#[test]
fn basis_is_orthonormal() {
    let p = problem(None, &ImpedancePair::insulating());
    assert!(BoundaryBasis::new(p.boundary(), K).unwrap().gram_defect() < 1e-13);
    let dom = Domain::new(BoundaryShape::Ellipse { center: [0.0, 0.0], semi_x: 1.3, semi_y: 0.7 }).unwrap();
    let pe = ForwardProblem::new(&dom, None, &ImpedancePair::insulating(), &Discretization::default()).unwrap();
    let b = BoundaryBasis::new(pe.boundary(), K).unwrap();
    assert!(b.gram_defect() < 1e-10);
    let c: Vec<f64> = (0..K).map(|i| (i as f64 * 0.37).sin()).collect();
    let back = b.project(&b.synthesize(&c));
    assert!(c.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-10));
    assert!(BoundaryBasis::new(pe.boundary(), 256).is_err());
}

#[test]
fn disk_dn_map_is_diagonal_in_frequency() {
    let p = problem(None, &ImpedancePair::insulating());
    let m = map(&p, MapKind::Dn, None);
    let basis = BoundaryBasis::new(p.boundary(), K).unwrap();
    for i in 0..K {
        let k = basis.frequency(i) as f64;
        for j in 0..K {
            let expect = if i == j { k } else { 0.0 };
            assert!((m.matrix[(i, j)] - expect).abs() < 1e-8 * (1.0 + k), "({i},{j}) = {}", m.matrix[(i, j)]);
        }
    }
    assert!(selfadjoint_defect(&m) <= 1e-10);
    let nd = map(&p, MapKind::Nd, None);
    for i in 1..K {
        let k = basis.frequency(i) as f64;
        assert!((nd.matrix[(i, i)] - 1.0 / k).abs() < 1e-9);
    }
    assert!(nd.matrix.row(0).amax() < 1e-10 && nd.matrix.column(0).amax() == 0.0);
}

fn composition_defect(dn: &DiscreteBoundaryMap, nd: &DiscreteBoundaryMap) -> f64 {
    let prod = &dn.matrix * nd.matrix.columns(1, K - 1);
    let mut e = DMatrix::zeros(K, K - 1);
    for j in 1..K {
        e[(j, j - 1)] = 1.0;
    }
    (prod - e).amax()
}

#[test]
fn dn_and_nd_are_inverse_on_zero_mean_data() {
    for imp in [ImpedancePair::insulating(), ImpedancePair { plus: vec![1.0, 4.0, 2.0], minus: vec![0.5] }] {
        let p = problem(Some(&arc()), &imp);
        let dn = map(&p, MapKind::Dn, None);
        let nd = map(&p, MapKind::Nd, None);
        let d = composition_defect(&dn, &nd);
        assert!(d <= 1e-7, "composition defect {d:e}");
        assert!(selfadjoint_defect(&dn) <= 1e-6, "dn defect {:e}", selfadjoint_defect(&dn));
        assert!(selfadjoint_defect(&nd) <= 1e-6, "nd defect {:e}", selfadjoint_defect(&nd));
    }
}

#[test]
fn unsymmetric_assembly_is_detected() {
    let p = problem(Some(&arc()), &ImpedancePair::constant(2.0, 1.0));
    let basis = BoundaryBasis::new(p.boundary(), K).unwrap();
    let bad = assemble_map_with(&p, &basis, MapKind::Dn, None, AssemblyFault::ShiftedPairing).unwrap();
    assert!(selfadjoint_defect(&bad) > 1e-3);
}

#[test]
fn vanishing_insulating_crack_leaves_the_map_unchanged() {
    let tiny = CrackCurve::segment([0.1, 0.1], [0.1 + 1e-4, 0.1]).unwrap();
    let free = map(&problem(None, &ImpedancePair::insulating()), MapKind::Dn, None);
    let with = map(&problem(Some(&tiny), &ImpedancePair::insulating()), MapKind::Dn, None);
    let eps = op_norm_diff(&free, &with).unwrap();
    assert!(eps < 1e-8, "{eps:e}");
}

#[test]
fn distance_is_zero_for_identical_maps_and_checks_kinds() {
    let p = problem(Some(&arc()), &ImpedancePair::constant(1.0, 1.0));
    let dn = map(&p, MapKind::Dn, None);
    let nd = map(&p, MapKind::Nd, None);
    assert_eq!(op_norm_diff(&dn, &dn.clone()).unwrap(), 0.0);
    assert!(op_norm_diff(&dn, &nd).is_err());
}

#[test]
fn impedance_ramp_is_monotone() {
    let c = arc();
    let base = map(&problem(Some(&c), &ImpedancePair::constant(2.0, 1.0)), MapKind::Dn, None);
    let eps: Vec<f64> = [0.8, 0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|d| op_norm_diff(&base, &map(&problem(Some(&c), &ImpedancePair::constant(2.0 + d, 1.0)), MapKind::Dn, None)).unwrap())
        .collect();
    assert!(eps.iter().all(|e| *e > 0.0));
    assert!(eps.windows(2).all(|w| w[1] < w[0]), "{eps:?}");
}

/// Largest `|W⁻¹ D x|` over random inputs with `|W x| = 1`, drawn with
/// coefficients decaying like `(1 + k²)^{-1}`, then refined by a few power
/// steps of `(W⁻¹ D W⁻¹)ᵀ (W⁻¹ D W⁻¹)`.
fn randomized_norm(d: &DMatrix<f64>, w: &[f64], samples: usize, power_steps: usize) -> (f64, f64) {
    let k = w.len();
    let a = DMatrix::from_fn(k, k, |i, j| d[(i, j)] / (w[i] * w[j]));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut best = 0.0f64;
    let mut best_v = DVector::zeros(k);
    for _ in 0..samples {
        let v = DVector::from_fn(k, |i, _| rng.gen_range(-1.0..1.0) / w[i].powi(4));
        let v = v.normalize();
        let val = (&a * &v).norm();
        if val > best {
            best = val;
            best_v = v;
        }
    }
    let mut v = best_v;
    for _ in 0..power_steps {
        v = (a.transpose() * (&a * &v)).normalize();
    }
    (best, (&a * &v).norm())
}

#[test]
fn operator_norm_matches_randomized_oracle() {
    let imp = ImpedancePair::constant(1.0, 0.5);
    let c = CrackCurve::segment([-0.3, 0.1], [0.3, 0.2]).unwrap();
    let shift = 0.05 * 0.25;
    let c2 = CrackCurve::segment([-0.3 + shift, 0.1], [0.3 + shift, 0.2]).unwrap();
    let m1 = map(&problem(Some(&c), &imp), MapKind::Dn, None);
    let m2 = map(&problem(Some(&c2), &imp), MapKind::Dn, None);
    let eps = op_norm_diff(&m1, &m2).unwrap();
    let (brute, refined) = randomized_norm(&(&m1.matrix - &m2.matrix), &m1.half_weights, 200, 5);
    assert!(brute <= eps * (1.0 + 1e-12));
    assert!(brute >= 0.95 * eps, "random max {brute:e} vs {eps:e}");
    assert!((refined - eps).abs() <= 0.05 * eps, "refined {refined:e} vs {eps:e}");
}

#[test]
fn local_map_is_the_compression_of_the_global_map() {
    let p = problem(Some(&arc()), &ImpedancePair::constant(2.0, 1.0));
    let patch = Patch { center: [0.0, 1.0], radius: 0.9 };
    let basis = BoundaryBasis::new(p.boundary(), K).unwrap();
    let u = basis.patch_subspace(&patch, false).unwrap();
    assert!(u.ncols() > 4 && u.ncols() < K);
    // Columns are orthonormal and concentrated on the patch.
    assert!((u.transpose() * &u - DMatrix::identity(u.ncols(), u.ncols())).amax() < 1e-12);
    let bnd = p.boundary();
    for col in 0..u.ncols() {
        let vals = basis.synthesize(u.column(col).as_slice());
        let (mut inside, mut total) = (0.0, 0.0);
        for (j, v) in vals.iter().enumerate() {
            let e = bnd.w[j] * v * v;
            total += e;
            if (bnd.x[j] - Vec2::new(0.0, 1.0)).norm() < patch.radius {
                inside += e;
            }
        }
        assert!(inside / total > 0.5);
    }
    let global = map(&p, MapKind::Dn, None);
    let local = map(&p, MapKind::LocalDn, Some(&patch));
    let compressed = u.transpose() * &global.matrix * &u;
    assert!((&local.matrix - compressed).amax() < 1e-9);
    assert!(selfadjoint_defect(&local) < 1e-6);

    // Restriction of the test space can only lower the distance.
    let p2 = problem(Some(&arc()), &ImpedancePair::constant(3.0, 1.0));
    let eg = op_norm_diff(&global, &map(&p2, MapKind::Dn, None)).unwrap();
    let el = op_norm_diff(&local, &map(&p2, MapKind::LocalDn, Some(&patch))).unwrap();
    assert!(el <= eg * (1.0 + 1e-12), "{el} > {eg}");
    let ndg = map(&p, MapKind::Nd, None);
    let ndl = map(&p, MapKind::LocalNd, Some(&patch));
    let egn = op_norm_diff(&ndg, &map(&p2, MapKind::Nd, None)).unwrap();
    let eln = op_norm_diff(&ndl, &map(&p2, MapKind::LocalNd, Some(&patch))).unwrap();
    assert!(eln <= egn * (1.0 + 1e-12), "{eln} > {egn}");

    assert!(assemble_map(&p, &basis, MapKind::LocalDn, None).is_err());
    assert!(assemble_map(&p, &basis, MapKind::Dn, Some(&patch)).is_err());
}

#[test]
fn archive_round_trip_is_bit_exact() {
    let p = problem(Some(&arc()), &ImpedancePair::constant(2.0, 1.0));
    let patch = Patch { center: [1.0, 0.0], radius: 0.7 };
    for m in [map(&p, MapKind::Nd, None), map(&p, MapKind::LocalDn, Some(&patch))] {
        let m = m.with_provenance("abc123");
        let mut bytes = Vec::new();
        write_archive(&m, &mut bytes).unwrap();
        let back = read_archive(bytes.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        write_archive(&back, &mut again).unwrap();
        assert_eq!(bytes, again);

        assert!(read_archive(&bytes[..bytes.len() - 3]).is_err());
        let mut wrong = bytes.clone();
        wrong[8] = 99;
        assert!(read_archive(wrong.as_slice()).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_archive(extra.as_slice()).is_err());
    }
}

#[test]
fn perturbation_hook_is_seeded_and_scales() {
    let m = map(&problem(None, &ImpedancePair::insulating()), MapKind::Dn, None);
    let a = m.perturbed(1e-3, 5);
    assert_eq!(a, m.perturbed(1e-3, 5));
    let e1 = op_norm_diff(&m, &a).unwrap();
    let e2 = op_norm_diff(&m, &m.perturbed(2e-3, 5)).unwrap();
    assert!((e2 / e1 - 2.0).abs() < 1e-9);
    assert!(selfadjoint_defect(&a) < 1e-12);
}

fn random_map(seed: u64, kind: MapKind) -> DiscreteBoundaryMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 9;
    let mut matrix = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
    if kind.is_nd() {
        matrix.column_mut(0).fill(0.0);
    }
    let half_weights = (0..k).map(|i| (1.0 + (((i + 1) / 2) as f64).powi(2)).powf(0.25)).collect();
    DiscreteBoundaryMap { kind, patch: None, matrix, half_weights, subspace: None, provenance: format!("seed{seed}") }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_metric(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000, nd in any::<bool>()) {
        let kind = if nd { MapKind::Nd } else { MapKind::Dn };
        let (a, b, c) = (random_map(s1, kind), random_map(s2, kind), random_map(s3, kind));
        let ab = op_norm_diff(&a, &b).unwrap();
        let ba = op_norm_diff(&b, &a).unwrap();
        let ac = op_norm_diff(&a, &c).unwrap();
        let cb = op_norm_diff(&c, &b).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        prop_assert!(ab <= ac + cb + 1e-12);
        prop_assert!(op_norm_diff(&a, &a).unwrap() == 0.0);
    }

    #[test]
    fn archive_round_trip(seed in 0u64..10_000, kind in 0u8..2) {
        let m = random_map(seed, if kind == 0 { MapKind::Dn } else { MapKind::Nd });
        let mut bytes = Vec::new();
        write_archive(&m, &mut bytes).unwrap();
        prop_assert_eq!(read_archive(bytes.as_slice()).unwrap(), m);
    }

    #[test]
    fn scaling_the_difference_scales_the_distance(seed in 0u64..1000, s in 0.01f64..100.0) {
        let a = random_map(seed, MapKind::Dn);
        let zero = a.scaled(0.0);
        let e = op_norm_diff(&a, &zero).unwrap();
        let es = op_norm_diff(&a.scaled(s), &zero).unwrap();
        prop_assert!((es - s * e).abs() <= 1e-10 * s * e);
    }
}

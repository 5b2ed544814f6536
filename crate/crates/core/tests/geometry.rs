use crackprobe::geometry::{
    crack_hausdorff, hausdorff_distance, l_distance, reachable_set, ConeParams, CrackCurve, CrackShape, Domain, Vec2,
};

fn disk() -> Domain {
    Domain::unit_disk()
}

#[test]
fn rotated_segment_hausdorff_matches_brute_force() {
    // unit segment and its rotation by 90 degrees about the shared endpoint
    let a = CrackCurve::segment([0.0, 0.0], [1.0, 0.0]).unwrap();
    let b = CrackCurve::segment([0.0, 0.0], [0.0, 1.0]).unwrap();
    let delta = 1e-4;
    let n = (1.0 / delta) as usize;
    let pa: Vec<Vec2> = (0..=n).map(|i| Vec2::new(i as f64 * delta, 0.0)).collect();
    let pb: Vec<Vec2> = (0..=n).map(|i| Vec2::new(0.0, i as f64 * delta)).collect();
    let oracle = hausdorff_distance(&pa, &pb).unwrap();
    let got = crack_hausdorff(&a, &b, 1e-3).unwrap();
    assert!((oracle - 1.0).abs() < 1e-12);
    assert!((got.value - oracle).abs() <= delta + got.resolution, "{} vs {}", got.value, oracle);
}

#[test]
fn crack_free_domain_is_filled() {
    let dom = disk();
    let cone = ConeParams { a: 2.0, l: 0.05 };
    let vl = reachable_set(&dom, &[], cone, 0.05, 128).unwrap();
    for j in 0..vl.n {
        for i in 0..vl.n {
            let p = vl.pixel(i, j);
            if p.norm() < 1.0 - cone.l {
                assert!(vl.is_vertex(i, j), "{p:?}");
            }
        }
    }
}

#[test]
fn straight_crack_lies_on_the_boundary_of_v_l() {
    let dom = disk();
    let c = CrackCurve::segment([-0.5, 0.0], [0.5, 0.0]).unwrap();
    let cone = ConeParams { a: 2.0, l: 0.03 };
    let vl = reachable_set(&dom, std::slice::from_ref(&c), cone, 0.05, 256).unwrap();
    let samples = c.sample(1e-2);
    let visible = vl.visible_points(&c, 1e-2);
    assert_eq!(samples.len(), visible.len());
}

fn c_shape(radius: f64, gap: f64) -> CrackCurve {
    // circle arc with an opening of angular width `gap` centered on +x
    CrackCurve::new(CrackShape::Arc {
        center: [0.0, 0.0],
        radius,
        theta0: 0.5 * gap,
        theta1: 2.0 * std::f64::consts::PI - 0.5 * gap,
    })
    .unwrap()
}

#[test]
fn cavity_is_excluded_for_large_l() {
    let dom = disk();
    let outer = c_shape(0.6, 0.2);
    let inner = CrackCurve::segment([-0.1, -0.1], [0.1, 0.1]).unwrap();
    let cracks = [outer.clone(), inner.clone()];
    // opening width about 0.12; balls of radius 0.1 cannot pass
    let big = reachable_set(&dom, &cracks, ConeParams { a: 2.0, l: 0.1 }, 0.05, 256).unwrap();
    let small = reachable_set(&dom, &cracks, ConeParams { a: 2.0, l: 0.02 }, 0.05, 256).unwrap();
    let probe = Vec2::new(-0.3, 0.0);
    assert!(!big.contains_vertex(probe));
    assert!(small.contains_vertex(probe));
    assert!(big.visible_points(&inner, 1e-2).is_empty());
    assert!(!small.visible_points(&inner, 1e-2).is_empty());
    // hidden parts make the l-distance smaller than the Hausdorff distance
    let dl = l_distance(&outer, &inner, &big, 1e-2).unwrap();
    let dh = crack_hausdorff(&outer, &inner, 1e-2).unwrap();
    assert!(dl.value <= dh.value + 1e-12);
    // monotonicity of the center sets
    for j in 0..big.n {
        for i in 0..big.n {
            if big.is_center(i, j) {
                assert!(small.is_center(i, j));
            }
        }
    }
}

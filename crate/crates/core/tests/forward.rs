use crackprobe::forward::{
    solve, solve_positive, trace_and_jump, BoundaryDatum, Discretization, ForwardProblem, ImpedancePair,
};
use crackprobe::geometry::{BoundaryShape, CrackCurve, Domain, Vec2};

fn disk() -> Domain {
    Domain::unit_disk()
}

fn seg() -> CrackCurve {
    CrackCurve::segment([-0.5, 0.0], [0.5, 0.0]).unwrap()
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn harmonic_polynomial_without_crack() {
    // u = x² - y² on the unit disk: ∂_n u = 2 cos 2τ.
    let p = ForwardProblem::new(&disk(), None, &ImpedancePair::insulating(), &Discretization::default()).unwrap();
    let phi = p.boundary().sample(|x| x.x * x.x - x.y * x.y);
    let sol = p.solve(&BoundaryDatum::dirichlet(phi.clone())).unwrap();
    let exact = p.boundary().sample(|x| 2.0 * (x.x * x.x - x.y * x.y));
    assert!(max_abs(sol.boundary_flux().iter().zip(&exact).map(|(a, b)| a - b)) < 1e-10);
    for (x, tol) in [(Vec2::new(0.3, 0.2), 1e-10), (Vec2::new(-0.1, 0.7), 1e-10), (Vec2::new(0.995, 0.0), 1e-8)] {
        assert!((sol.eval(x) - (x.x * x.x - x.y * x.y)).abs() < tol, "at {x:?}: {}", sol.eval(x));
    }
    // Neumann data of the same function; the solution is fixed up to a constant.
    let sol = p.solve(&BoundaryDatum::neumann(exact)).unwrap();
    let c = sol.eval(Vec2::zeros());
    let x = Vec2::new(0.4, -0.3);
    assert!((sol.eval(x) - c - (x.x * x.x - x.y * x.y)).abs() < 1e-9);
}

#[test]
fn harmonic_polynomial_on_ellipse() {
    let dom = Domain::new(BoundaryShape::Ellipse { center: [0.1, -0.2], semi_x: 1.2, semi_y: 0.8 }).unwrap();
    let f = |x: Vec2| x.x * x.y + 0.5 * x.x;
    let sol = solve(&dom, None, &ImpedancePair::insulating(), &BoundaryDatum::dirichlet(vec![]), &Default::default());
    assert!(sol.is_err(), "length mismatch must be rejected");
    let p = ForwardProblem::new(&dom, None, &ImpedancePair::insulating(), &Discretization::default()).unwrap();
    let sol = p.solve(&BoundaryDatum::dirichlet(p.boundary().sample(f))).unwrap();
    let x = Vec2::new(0.5, 0.1);
    assert!((sol.eval(x) - f(x)).abs() < 1e-9);
}

#[test]
fn insulating_crack_parallel_to_field_is_invisible() {
    // u = x has ∂_y u = 0 on the crack, so it solves the crack problem.
    let p = ForwardProblem::new(&disk(), Some(&seg()), &ImpedancePair::insulating(), &Discretization::default())
        .unwrap();
    let phi = p.boundary().sample(|x| x.x);
    let sol = p.solve(&BoundaryDatum::dirichlet(phi.clone())).unwrap();
    assert!(max_abs(sol.boundary_flux().iter().zip(&phi).map(|(a, b)| a - b)) < 1e-9);
    let js = trace_and_jump(&sol, &[-0.9, -0.2, 0.4, 0.95]).unwrap();
    for j in js {
        assert!(j.jump_u.abs() < 1e-9);
        assert!((j.u_plus - j.x.x).abs() < 1e-9);
    }
    assert!((sol.eval(Vec2::new(0.1, 0.05)) - 0.1).abs() < 1e-9);
}

#[test]
fn constants_are_reproduced() {
    for imp in [ImpedancePair::insulating(), ImpedancePair::constant(0.0, 0.0)] {
        let p = ForwardProblem::new(&disk(), Some(&seg()), &imp, &Discretization::default()).unwrap();
        let sol = p.solve(&BoundaryDatum::dirichlet(vec![1.0; p.boundary().n()])).unwrap();
        assert!(max_abs(sol.boundary_flux().iter().copied()) < 1e-10);
        let j = sol.jump(0.1);
        assert!((j.u_plus - 1.0).abs() < 1e-10 && (j.u_minus - 1.0).abs() < 1e-10);
    }
}

#[test]
fn odd_symmetry_for_symmetric_setup() {
    // Segment on the symmetry axis, equal impedances and odd data: u⁺ = -u⁻.
    let p = ForwardProblem::new(&disk(), Some(&seg()), &ImpedancePair::constant(3.0, 3.0), &Discretization::default())
        .unwrap();
    let sol = p.solve(&BoundaryDatum::dirichlet(p.boundary().sample(|x| x.y))).unwrap();
    for s in [-0.7, 0.0, 0.5] {
        let j = sol.jump(s);
        assert!((j.u_plus + j.u_minus).abs() < 1e-10);
        assert!((j.flux_plus + j.flux_minus).abs() < 1e-9);
    }
    let tips = sol.tip_intensity().unwrap();
    assert!((tips[0] - tips[1]).abs() < 1e-9 * tips[0].abs());
}

#[test]
fn robin_flux_balance_and_reciprocity() {
    let c = CrackCurve::arc_through([-0.4, -0.1], [0.45, 0.15], 0.12).unwrap();
    let imp = ImpedancePair { plus: vec![1.0, 4.0, 2.0], minus: vec![0.5, 0.5] };
    let p = ForwardProblem::new(&disk(), Some(&c), &imp, &Discretization::default()).unwrap();
    let f1 = p.boundary().sample(|x| x.x + 0.3 * x.y * x.y);
    let f2 = p.boundary().sample(|x| (3.0 * x.y).sin());
    let s1 = p.solve(&BoundaryDatum::dirichlet(f1.clone())).unwrap();
    let s2 = p.solve(&BoundaryDatum::dirichlet(f2.clone())).unwrap();
    let (outer, inner) = s1.flux_balance();
    assert!((outer - inner).abs() < 1e-8, "{outer} vs {inner}");
    // ∫ (u₁ ∂_n u₂ - u₂ ∂_n u₁) vanishes for homogeneous Robin conditions.
    let w = &p.boundary().w;
    let gap: f64 = (0..w.len())
        .map(|k| w[k] * (f1[k] * s2.boundary_flux()[k] - f2[k] * s1.boundary_flux()[k]))
        .sum();
    assert!(gap.abs() < 1e-8, "reciprocity gap {gap}");
}

#[test]
fn robin_condition_holds_in_the_interior_limit() {
    let imp = ImpedancePair::constant(2.0, 0.5);
    let p = ForwardProblem::new(&disk(), Some(&seg()), &imp, &Discretization::default()).unwrap();
    let sol = p.solve(&BoundaryDatum::dirichlet(p.boundary().sample(|x| x.y + 0.2))).unwrap();
    let j = sol.jump(0.3);
    assert!((j.flux_plus - 2.0 * j.u_plus).abs() < 1e-12);
    // One-sided difference quotients from the interior field.
    let h = 1e-3;
    let up = |d: f64| sol.eval(j.x + Vec2::new(0.0, d));
    let fd_plus = (-up(2.0 * h) + 4.0 * up(h) - 3.0 * j.u_plus) / (2.0 * h);
    let fd_minus = (-up(-2.0 * h) + 4.0 * up(-h) - 3.0 * j.u_minus) / (2.0 * h);
    assert!((fd_plus - j.flux_plus).abs() < 1e-2 * (1.0 + j.flux_plus.abs()), "{fd_plus} vs {}", j.flux_plus);
    assert!((fd_minus - j.flux_minus).abs() < 1e-2 * (1.0 + j.flux_minus.abs()), "{fd_minus} vs {}", j.flux_minus);
    assert!((up(1e-5) - j.u_plus).abs() < 1e-4);
}

#[test]
fn square_root_behavior_at_tips() {
    let imp = ImpedancePair::constant(1.0, 2.0);
    let p = ForwardProblem::new(&disk(), Some(&seg()), &imp, &Discretization::default()).unwrap();
    let sol = p.solve(&BoundaryDatum::dirichlet(p.boundary().sample(|x| x.y))).unwrap();
    let k = sol.tip_intensity().unwrap();
    // Segment length 1: distance to the tip s = 1 is (1 - s)/2.
    for d in [1e-3, 1e-4, 1e-5] {
        let s = 1.0 - 2.0 * d;
        let ratio = sol.jump(s).jump_u / d.sqrt();
        assert!((ratio - k[1]).abs() < 0.05 * k[1].abs() + 1e-3, "d={d}: {ratio} vs {}", k[1]);
    }
}

#[test]
fn refinement_changes_tip_intensity_little() {
    let imp = ImpedancePair::constant(2.0, 0.5);
    let c = seg();
    let disc = Discretization::default();
    let coarse = ForwardProblem::new(&disk(), Some(&c), &imp, &disc).unwrap();
    let fine = ForwardProblem::new(&disk(), Some(&c), &imp, &disc.doubled()).unwrap();
    let k0 = coarse.solve(&BoundaryDatum::dirichlet(coarse.boundary().sample(|x| x.y))).unwrap().tip_intensity();
    let k1 = fine.solve(&BoundaryDatum::dirichlet(fine.boundary().sample(|x| x.y))).unwrap().tip_intensity();
    let (k0, k1) = (k0.unwrap(), k1.unwrap());
    assert!((k0[0] - k1[0]).abs() < 1e-3 * k1[0].abs());
}

#[test]
fn positive_solution() {
    let imp = ImpedancePair::constant(1.0, 1.0);
    let p = ForwardProblem::new(&disk(), Some(&seg()), &imp, &Discretization::default()).unwrap();
    let (sol, min) = solve_positive(&p).unwrap();
    assert!(min > 0.0);
    let (outer, inner) = sol.flux_balance();
    assert!((outer - 2.0 * std::f64::consts::PI).abs() < 1e-10);
    assert!((outer - inner).abs() < 1e-8);

    let ins = ForwardProblem::new(&disk(), Some(&seg()), &ImpedancePair::insulating(), &Discretization::default())
        .unwrap();
    assert!(solve_positive(&ins).is_err());
}

#[test]
fn invalid_inputs_are_rejected() {
    let bad = Discretization { n_boundary: 15, ..Default::default() };
    assert!(ForwardProblem::new(&disk(), None, &ImpedancePair::insulating(), &bad).is_err());
    assert!(ImpedancePair::constant(-1.0, 0.0).validate(10.0).is_err());
    assert!(ImpedancePair::constant(11.0, 0.0).validate(10.0).is_err());
    let p = ForwardProblem::new(&disk(), None, &ImpedancePair::insulating(), &Discretization::default()).unwrap();
    // Neumann data with nonzero mean on a crack-free domain is incompatible.
    assert!(p.solve(&BoundaryDatum::neumann(vec![1.0; p.boundary().n()])).is_err());
}

//! Quadrature rules shared by the solvers.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// Cached pair of Gauss–Legendre rules used by the adaptive integrator.
#[derive(Debug, Clone)]
pub struct AdaptiveRule {
    coarse: (Vec<f64>, Vec<f64>),
    fine: (Vec<f64>, Vec<f64>),
}

impl Default for AdaptiveRule {
    fn default() -> Self {
        Self::new(12)
    }
}

impl AdaptiveRule {
    pub fn new(order: usize) -> Self {
        Self {
            coarse: gauss_legendre(order),
            fine: gauss_legendre(2 * order),
        }
    }

    fn apply<F: FnMut(f64) -> f64>(rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64, f: &mut F) -> (f64, f64) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let (mut sum, mut abs) = (0.0, 0.0);
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let v = w * f(mid + half * x);
            sum += v;
            abs += v.abs();
        }
        (sum * half, abs * half.abs())
    }

    /// Adaptive integration of `f` over [a, b] with absolute tolerance `tol`.
    /// Subintervals also stop once the error estimate reaches roundoff level.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, tol: f64, f: &mut F) -> f64 {
        let (c, _) = Self::apply(&self.coarse, a, b, f);
        let (fi, abs) = Self::apply(&self.fine, a, b, f);
        self.recurse(a, b, tol, 1e-15 * abs, f, (c, fi, abs), 0)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        tol: f64,
        floor: f64,
        f: &mut F,
        (c, fi, abs): (f64, f64, f64),
        depth: usize,
    ) -> f64 {
        let err = (c - fi).abs();
        // Local roundoff: cancellation in the sum bounds the attainable error.
        if err <= tol.max(floor).max(1e-14 * abs) || !err.is_finite() || depth >= 50 {
            return fi;
        }
        let m = 0.5 * (a + b);
        let split = |lo: f64, hi: f64, f: &mut F| {
            let (fi, abs) = Self::apply(&self.fine, lo, hi, f);
            (Self::apply(&self.coarse, lo, hi, f).0, fi, abs)
        };
        let left = split(a, m, f);
        let right = split(m, b, f);
        self.recurse(a, m, 0.5 * tol, floor, f, left, depth + 1) + self.recurse(m, b, 0.5 * tol, floor, f, right, depth + 1)
    }
}

/// Kress weights `R_j(t_i)` for the periodic logarithmic kernel
/// `log(4 sin^2((t - s)/2))` on `2n` equispaced nodes. Entry `k` holds the
/// weight for node offset `k = j - i mod 2n`.
pub fn kress_log_weights(n_nodes: usize) -> Vec<f64> {
    assert!(n_nodes % 2 == 0, "Kress weights need an even node count");
    let n = n_nodes / 2;
    let nf = n as f64;
    (0..n_nodes)
        .map(|k| {
            let d = PI * k as f64 / nf;
            let mut s = 0.0;
            for m in 1..n {
                s += (m as f64 * d).cos() / m as f64;
            }
            -2.0 * PI / nf * s - PI / (nf * nf) * (nf * d).cos()
        })
        .collect()
}

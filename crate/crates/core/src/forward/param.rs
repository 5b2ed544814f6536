//! Reparametrizations of the crack parameter interval `[-1, 1]`.

/// Identity or a sinh map `s = s0 + ε sinh(A (t - t0))` that clusters
/// parameter points near `s0` while fixing both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamMap {
    Identity,
    Sinh { s0: f64, eps: f64, a: f64, t0: f64 },
}

impl ParamMap {
    /// Cluster map around `s0` with width `eps`; identity when `eps` is not small.
    pub fn cluster(s0: f64, eps: f64) -> Self {
        if !(eps > 0.0) || eps >= 0.25 {
            return Self::Identity;
        }
        let s0 = s0.clamp(-1.0, 1.0);
        let up = ((1.0 - s0) / eps).asinh();
        let down = ((1.0 + s0) / eps).asinh();
        let a = 0.5 * (up + down);
        let t0 = 1.0 - up / a;
        Self::Sinh { s0, eps, a, t0 }
    }

    /// `(s, ds/dt, d²s/dt²)` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            Self::Identity => (t, 1.0, 0.0),
            Self::Sinh { s0, eps, a, t0 } => {
                let z = a * (t - t0);
                (s0 + eps * z.sinh(), eps * a * z.cosh(), eps * a * a * z.sinh())
            }
        }
    }

    pub fn inverse(&self, s: f64) -> f64 {
        match *self {
            Self::Identity => s,
            Self::Sinh { s0, eps, a, t0 } => t0 + ((s - s0) / eps).asinh() / a,
        }
    }
}

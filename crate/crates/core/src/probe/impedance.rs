//! Impedance recovery `γ̂⁺ = ∂_ν u⁺ / u⁺`, `γ̂⁻ = -∂_ν u⁻ / u⁻` from the
//! field just off the crack.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpedanceOptions {
    /// Points within this distance of a tip are left out.
    pub window: f64,
    /// Crack parameters sampled, uniformly in `(-1, 1)`.
    pub samples: usize,
    /// Largest normal offset of the extrapolation stencil.
    pub offset: f64,
    /// Samples with `|u| < u_floor` on a face are invalid there.
    pub u_floor: f64,
}

impl ImpedanceOptions {
    /// Window `r0 / 8`.
    pub fn for_r0(r0: f64) -> Self {
        Self { window: r0 / 8.0, samples: 64, offset: 1e-2, u_floor: 1e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window >= 0.0 && self.window.is_finite()) {
            return Err(Error::OutOfRange { field: "window", reason: "must be finite and nonnegative".into() });
        }
        if self.samples == 0 {
            return Err(Error::OutOfRange { field: "samples", reason: "need at least one".into() });
        }
        if !(self.offset > 0.0) {
            return Err(Error::OutOfRange { field: "offset", reason: "must be positive".into() });
        }
        if !(self.u_floor >= 0.0) {
            return Err(Error::OutOfRange { field: "u_floor", reason: "must be nonnegative".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpedanceSample {
    pub s: f64,
    pub x: [f64; 2],
    /// `None` where `|u⁺|` is below the floor.
    pub gamma_plus: Option<f64>,
    pub gamma_minus: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImpedanceEstimate {
    pub window: f64,
    pub samples: Vec<ImpedanceSample>,
}

impl ImpedanceEstimate {
    pub fn median_plus(&self) -> Option<f64> {
        median(self.samples.iter().filter_map(|s| s.gamma_plus).collect())
    }

    pub fn median_minus(&self) -> Option<f64> {
        median(self.samples.iter().filter_map(|s| s.gamma_minus).collect())
    }

    pub fn invalid(&self) -> usize {
        self.samples.iter().map(|s| usize::from(s.gamma_plus.is_none()) + usize::from(s.gamma_minus.is_none())).sum()
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Quadratic extrapolation to `t = 0` from `t, t/2, t/4`.
fn extrapolate(f: [f64; 3]) -> f64 {
    (f[0] - 6.0 * f[1] + 8.0 * f[2]) / 3.0
}

/// Samples `γ̂^±` on the crack of `sol` away from its tips. Values and normal
/// derivatives on each face are extrapolated from interior points at normal
/// offsets `offset, offset/2, offset/4`.
pub fn estimate_impedance(sol: &Solution, opts: &ImpedanceOptions) -> Result<ImpedanceEstimate> {
    opts.validate()?;
    let crack = &sol
        .problem()
        .crack()
        .ok_or_else(|| Error::InvalidInput("impedance recovery needs a crack".into()))?
        .curve;
    let tips = crack.tips();
    let mut samples = Vec::new();
    for k in 0..opts.samples {
        let s = -1.0 + (2 * k + 1) as f64 / opts.samples as f64;
        let x = crack.point(s);
        if tips.iter().any(|t| (x - t).norm() < opts.window) {
            continue;
        }
        let nu = crack.normal(s);
        let face = |side: f64| {
            let mut u = [0.0; 3];
            let mut d = [0.0; 3];
            for (j, t) in [opts.offset, 0.5 * opts.offset, 0.25 * opts.offset].iter().enumerate() {
                let (v, g) = sol.eval_with_grad(x + side * t * nu);
                u[j] = v;
                d[j] = g.dot(&nu);
            }
            (extrapolate(u), extrapolate(d))
        };
        let (up, dp) = face(1.0);
        let (um, dm) = face(-1.0);
        let ratio = |d: f64, u: f64| (u.abs() >= opts.u_floor && u.abs() > 0.0).then(|| d / u);
        samples.push(ImpedanceSample {
            s,
            x: [x.x, x.y],
            gamma_plus: ratio(dp, up),
            gamma_minus: ratio(-dm, um),
        });
    }
    Ok(ImpedanceEstimate { window: opts.window, samples })
}

//! Coordinate systems and the exact changes of variables between the
//! physical equation, the compactified system and the inner bounce variables.
//!
//! The physical equation is `(H''' + ξ² + a) H³ = 1`. The compactified state
//! uses `Φ = (ξ²+1)^{1/3} H`, a stretched independent variable
//! `τ = ∫₀^ξ (η²+1)^{4/9} dη` and the angle `θ = arctan ξ`, so that the far
//! field `ξ → ±∞` becomes the pair of invariant slices `θ = ±π/2`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Tolerance used to decide that an angle lies on one of the slices `θ = ±π/2`.
pub const SLICE_TOL: f64 = 1e-14;

/// Absolute tolerance of the quadrature behind [`tau_of_xi`].
pub const TAU_QUAD_TOL: f64 = 1e-12;

/// Parameter of the physical equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// The constant `a` in `(H''' + ξ² + a) H³ = 1`.
    pub a: f64,
}

impl ModelParams {
    pub fn new(a: f64) -> Self {
        Self { a }
    }
}

/// State of the physical equation at position `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysState {
    pub xi: f64,
    /// Film height `H > 0`.
    pub h: f64,
    /// `dH/dξ`.
    pub dh: f64,
    /// `d²H/dξ²`.
    pub d2h: f64,
}

/// State of the four-dimensional compactified system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactState {
    /// Rescaled height `Φ > 0`.
    pub phi: f64,
    /// `W = dΦ/dτ`.
    pub w: f64,
    /// `Ψ = d²Φ/dτ²`.
    pub psi: f64,
    /// Angle `θ ∈ [−π/2, π/2]`.
    pub theta: f64,
}

impl CompactState {
    pub fn to_array(&self) -> [f64; 4] {
        [self.phi, self.w, self.psi, self.theta]
    }

    pub fn from_array(y: &[f64; 4]) -> Self {
        Self {
            phi: y[0],
            w: y[1],
            psi: y[2],
            theta: y[3],
        }
    }

    /// Whether the state lies on one of the invariant slices `θ = ±π/2`.
    pub fn on_slice(&self) -> bool {
        on_slice(self.theta)
    }
}

/// State of the inner (bounce) variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BounceState {
    /// Height `H > 0`.
    pub hval: f64,
    /// `u = H^{1/3} dH/dξ`.
    pub u: f64,
    /// `v = H^{5/3} d²H/dξ²`.
    pub v: f64,
    /// Inner independent variable, `dz = H^{-4/3} dξ`.
    pub z: f64,
    /// Current physical position `ξ`.
    pub omega: f64,
}

impl BounceState {
    /// Dependent variables in integration order `(H, u, v, ξ)`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.hval, self.u, self.v, self.omega]
    }

    pub fn from_array(z: f64, y: &[f64; 4]) -> Self {
        Self {
            hval: y[0],
            u: y[1],
            v: y[2],
            z,
            omega: y[3],
        }
    }
}

/// Whether `theta` lies on `θ = π/2` or `θ = −π/2` within [`SLICE_TOL`].
pub fn on_slice(theta: f64) -> bool {
    (theta - FRAC_PI_2).abs() < SLICE_TOL || (theta + FRAC_PI_2).abs() < SLICE_TOL
}

/// `τ(ξ) = ∫₀^ξ (η²+1)^{4/9} dη`, odd and strictly increasing.
pub fn tau_of_xi(xi: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    let x = xi.abs();
    let integrand = |eta: f64| (eta * eta + 1.0).powf(4.0 / 9.0);
    let mut total = 0.0;
    let mut lo = 0.0;
    // Geometric panels keep the adaptive refinement local on long ranges.
    let mut hi = x.min(1.0);
    loop {
        total += quad::integrate(integrand, lo, hi, TAU_QUAD_TOL);
        if hi >= x {
            break;
        }
        lo = hi;
        hi = (2.0 * hi).min(x);
    }
    total.copysign(xi)
}

/// Derivative `dτ/dξ = (ξ²+1)^{4/9}`.
pub fn dtau_dxi(xi: f64) -> f64 {
    (xi * xi + 1.0).powf(4.0 / 9.0)
}

/// Inverse of [`tau_of_xi`] by bracketed Newton iteration.
pub fn xi_of_tau(tau: f64) -> Result<f64> {
    if tau == 0.0 {
        return Ok(0.0);
    }
    if !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be finite, got {tau}")));
    }
    let target = tau.abs();
    let tol = 1e-11 * (1.0 + target);
    let mut lo = 0.0;
    let mut hi = target.max(1.0);
    while tau_of_xi(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = if target < 1.0 {
        target
    } else {
        (17.0 * target / 9.0).powf(9.0 / 17.0)
    };
    if x <= lo || x >= hi {
        x = 0.5 * (lo + hi);
    }
    const MAX_ITER: usize = 100;
    for _ in 0..MAX_ITER {
        let f = tau_of_xi(x) - target;
        if f.abs() <= tol {
            return Ok(x.copysign(tau));
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - f / dtau_dxi(x);
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(x.copysign(tau));
        }
    }
    Err(Error::IterationLimit {
        what: "xi_of_tau",
        iterations: MAX_ITER,
    })
}

/// `θ = arctan ξ`.
pub fn theta_of_xi(xi: f64) -> f64 {
    xi.atan()
}

/// `ξ = tan θ` on the open interval `|θ| < π/2`.
pub fn xi_of_theta(theta: f64) -> Result<f64> {
    if !theta.is_finite() || theta.abs() >= FRAC_PI_2 || on_slice(theta) {
        return Err(Error::Domain(format!(
            "xi_of_theta requires |theta| < pi/2, got {theta}"
        )));
    }
    Ok(theta.tan())
}

/// Maps a physical state to compact variables.
pub fn compact_of_phys(s: &PhysState) -> Result<CompactState> {
    if !(s.h > 0.0) {
        return Err(Error::Domain(format!("H must be positive, got {}", s.h)));
    }
    let xi = s.xi;
    let q = xi * xi + 1.0;
    let phi = q.powf(1.0 / 3.0) * s.h;
    let w = (s.dh + (2.0 / 3.0) * xi * q.powf(-4.0 / 3.0) * phi) / q.powf(1.0 / 9.0);
    let psi = (s.d2h
        + (2.0 / 3.0) * (1.0 - 5.0 * xi * xi / 3.0) * q.powf(-7.0 / 3.0) * phi
        + (4.0 / 9.0) * xi * q.powf(-8.0 / 9.0) * w)
        / q.powf(5.0 / 9.0);
    Ok(CompactState {
        phi,
        w,
        psi,
        theta: theta_of_xi(xi),
    })
}

/// Maps a compact state off the slices back to physical variables.
pub fn phys_of_compact(s: &CompactState) -> Result<PhysState> {
    let xi = xi_of_theta(s.theta)?;
    Ok(phys_at_xi(xi, s))
}

/// Physical state from `(Φ, W, Ψ)` at a given `ξ`, bypassing `θ`.
pub(crate) fn phys_at_xi(xi: f64, s: &CompactState) -> PhysState {
    let q = xi * xi + 1.0;
    let h = q.powf(-1.0 / 3.0) * s.phi;
    let dh = -(2.0 / 3.0) * xi * q.powf(-4.0 / 3.0) * s.phi + q.powf(1.0 / 9.0) * s.w;
    let d2h = -(2.0 / 3.0) * (1.0 - 5.0 * xi * xi / 3.0) * q.powf(-7.0 / 3.0) * s.phi
        - (4.0 / 9.0) * xi * q.powf(-8.0 / 9.0) * s.w
        + q.powf(5.0 / 9.0) * s.psi;
    PhysState { xi, h, dh, d2h }
}

/// Maps a physical state to inner variables, taking the state itself as the
/// anchor `z = 0`.
pub fn bounce_of_phys(s: &PhysState) -> Result<BounceState> {
    if !(s.h > 0.0) {
        return Err(Error::Domain(format!("H must be positive, got {}", s.h)));
    }
    Ok(BounceState {
        hval: s.h,
        u: s.h.cbrt() * s.dh,
        v: s.h.powf(5.0 / 3.0) * s.d2h,
        z: 0.0,
        omega: s.xi,
    })
}

/// Maps an ordered sequence of physical states to inner variables with
/// `z = 0` at the first sample; `z` accumulates `∫ H^{-4/3} dξ` by the
/// trapezoid rule between consecutive samples.
pub fn bounce_path_of_phys(samples: &[PhysState]) -> Result<Vec<BounceState>> {
    let mut out = Vec::with_capacity(samples.len());
    let mut z = 0.0;
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            let p = &samples[i - 1];
            z += 0.5 * (s.xi - p.xi) * (p.h.powf(-4.0 / 3.0) + s.h.powf(-4.0 / 3.0));
        }
        let mut b = bounce_of_phys(s)?;
        b.z = z;
        out.push(b);
    }
    Ok(out)
}

/// Inverse of [`bounce_of_phys`].
pub fn phys_of_bounce(b: &BounceState) -> Result<PhysState> {
    if !(b.hval > 0.0) {
        return Err(Error::Domain(format!("H must be positive, got {}", b.hval)));
    }
    Ok(PhysState {
        xi: b.omega,
        h: b.hval,
        dh: b.u / b.hval.cbrt(),
        d2h: b.v / b.hval.powf(5.0 / 3.0),
    })
}

//! Right-hand sides of every ODE system used by the toolkit, as pure
//! vector-field evaluations.

use serde::{Deserialize, Serialize};

use crate::transforms::{on_slice, BounceState, CompactState, ModelParams, PhysState};

/// An autonomous or non-autonomous vector field on `ℝᴺ`.
pub trait VectorField<const N: usize>: Sync {
    /// Derivative of `y` at independent variable `t`.
    fn eval(&self, t: f64, y: &[f64; N]) -> [f64; N];

    /// Dimension of the state space.
    fn dimension(&self) -> usize {
        N
    }
}

/// Adapter turning a closure into a [`VectorField`].
pub struct FnField<F>(pub F);

impl<const N: usize, F> VectorField<N> for FnField<F>
where
    F: Fn(f64, &[f64; N]) -> [f64; N] + Sync,
{
    fn eval(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        (self.0)(t, y)
    }
}

/// State of the limit system on the invariant slices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitState {
    pub phi: f64,
    pub w: f64,
    pub psi: f64,
}

impl LimitState {
    /// The unique critical point `P_s = (1, 0, 0)`.
    pub const CRITICAL: LimitState = LimitState {
        phi: 1.0,
        w: 0.0,
        psi: 0.0,
    };

    pub fn to_array(&self) -> [f64; 3] {
        [self.phi, self.w, self.psi]
    }

    pub fn from_array(y: &[f64; 3]) -> Self {
        Self {
            phi: y[0],
            w: y[1],
            psi: y[2],
        }
    }
}

/// Variant of the inner bounce system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BounceMode {
    /// Keeps the outer forcing `(Ω² + a) H³` and the evolution of `Ω = ξ`.
    Full,
    /// Drops the outer forcing; `(u, v)` decouple into a planar system.
    Frozen,
}

/// `(H', H'', 1/H³ − (ξ² + a))`.
pub fn rhs_original(s: &PhysState, params: &ModelParams) -> [f64; 3] {
    [
        s.dh,
        s.d2h,
        1.0 / (s.h * s.h * s.h) - (s.xi * s.xi + params.a),
    ]
}

/// The compactified four-dimensional system.
///
/// Returns `(dΦ, dW, dΨ, dθ)/dτ`. On the slices `θ = ±π/2` the cosine is
/// taken as exactly zero, so the first three components coincide with
/// [`rhs_limit`].
pub fn rhs_compact(s: &CompactState, params: &ModelParams) -> [f64; 4] {
    let (sn, cs) = if on_slice(s.theta) {
        (s.theta.signum(), 0.0)
    } else {
        let (sn, cs) = s.theta.sin_cos();
        (sn, cs.max(0.0))
    };
    let base = 1.0 / (s.phi * s.phi * s.phi) - 1.0;
    if cs == 0.0 {
        return [s.w, s.psi, base, 0.0];
    }
    let c2 = cs * cs;
    let s2 = sn * sn;
    let forcing = ((16.0 / 3.0) * sn - (224.0 / 27.0) * s2 * sn) * cs.powf(17.0 / 3.0) * s.phi
        + ((208.0 / 81.0) * s2 - 10.0 / 9.0) * cs.powf(34.0 / 9.0) * s.w
        + (2.0 / 3.0) * sn * cs.powf(17.0 / 9.0) * s.psi;
    let dpsi = base - (params.a - 1.0) * c2 - forcing;
    [s.w, s.psi, dpsi, cs.powf(26.0 / 9.0)]
}

/// `(W, Ψ, 1/Φ³ − 1)`.
pub fn rhs_limit(s: &LimitState) -> [f64; 3] {
    [s.w, s.psi, 1.0 / (s.phi * s.phi * s.phi) - 1.0]
}

/// Jacobian of [`rhs_limit`].
pub fn jacobian_limit(s: &LimitState) -> [[f64; 3]; 3] {
    let p4 = s.phi * s.phi * s.phi * s.phi;
    [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-3.0 / p4, 0.0, 0.0]]
}

/// Inner bounce system in `z`: derivatives of `(H, u, v, Ω)`.
pub fn rhs_bounce(s: &BounceState, params: &ModelParams, mode: BounceMode) -> [f64; 4] {
    let h = s.hval;
    let du = s.v + s.u * s.u / 3.0;
    let base = 1.0 + (5.0 / 3.0) * s.u * s.v;
    match mode {
        BounceMode::Full => {
            let h3 = h * h * h;
            [
                s.u * h,
                du,
                base - (s.omega * s.omega + params.a) * h3,
                h.powf(4.0 / 3.0),
            ]
        }
        BounceMode::Frozen => [s.u * h, du, base, 0.0],
    }
}

/// Planar frozen system `(du, dv)/dz = (v + u²/3, 1 + 5uv/3)`.
pub fn rhs_frozen_plane(u: f64, v: f64) -> [f64; 2] {
    [v + u * u / 3.0, 1.0 + (5.0 / 3.0) * u * v]
}

/// Jacobian of [`rhs_frozen_plane`].
pub fn jacobian_frozen(u: f64, v: f64) -> [[f64; 2]; 2] {
    [[2.0 * u / 3.0, 1.0], [5.0 * v / 3.0, 5.0 * u / 3.0]]
}

/// Inner matching equation `h''' = 1/h³ − perturbation` for `(h, h', h'')`.
pub fn rhs_inner_h(y: &[f64; 3], perturbation: f64) -> [f64; 3] {
    [y[1], y[2], 1.0 / (y[0] * y[0] * y[0]) - perturbation]
}

/// Physical equation with `ξ` as independent variable, state `(H, H', H'')`.
#[derive(Debug, Clone, Copy)]
pub struct OriginalField {
    pub params: ModelParams,
}

impl VectorField<3> for OriginalField {
    fn eval(&self, xi: f64, y: &[f64; 3]) -> [f64; 3] {
        rhs_original(
            &PhysState {
                xi,
                h: y[0],
                dh: y[1],
                d2h: y[2],
            },
            &self.params,
        )
    }
}

/// Compactified system with state `(Φ, W, Ψ, θ)`.
#[derive(Debug, Clone, Copy)]
pub struct CompactField {
    pub params: ModelParams,
}

impl VectorField<4> for CompactField {
    fn eval(&self, _tau: f64, y: &[f64; 4]) -> [f64; 4] {
        rhs_compact(&CompactState::from_array(y), &self.params)
    }
}

/// Limit system with state `(Φ, W, Ψ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LimitField;

impl VectorField<3> for LimitField {
    fn eval(&self, _tau: f64, y: &[f64; 3]) -> [f64; 3] {
        rhs_limit(&LimitState::from_array(y))
    }
}

/// Bounce system with state `(H, u, v, Ω)` and independent variable `z`.
#[derive(Debug, Clone, Copy)]
pub struct BounceField {
    pub params: ModelParams,
    pub mode: BounceMode,
}

impl VectorField<4> for BounceField {
    fn eval(&self, z: f64, y: &[f64; 4]) -> [f64; 4] {
        rhs_bounce(&BounceState::from_array(z, y), &self.params, self.mode)
    }
}

/// Planar frozen system with state `(u, v)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenPlaneField;

impl VectorField<2> for FrozenPlaneField {
    fn eval(&self, _z: f64, y: &[f64; 2]) -> [f64; 2] {
        rhs_frozen_plane(y[0], y[1])
    }
}

/// Inner matching equation with state `(h, h', h'')`.
#[derive(Debug, Clone, Copy, Default)]
pub struct InnerField {
    pub perturbation: f64,
}

impl VectorField<3> for InnerField {
    fn eval(&self, _s: f64, y: &[f64; 3]) -> [f64; 3] {
        rhs_inner_h(y, self.perturbation)
    }
}

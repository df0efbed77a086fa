//! Inner bounce analysis: the frozen `(u, v)` phase plane with its critical
//! point `p_e`, the five regions cut out by the isoclines, the separatrices
//! `v̄` and `v̂`, and the universal matching solution of `h''' = 1/h³`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{integrate, Direction, Event, EventKind, IntegratorConfig, Trajectory};
use crate::linalg;
use crate::systems::{jacobian_frozen, rhs_frozen_plane, FnField, FrozenPlaneField, InnerField};

/// A point of the frozen phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub u: f64,
    pub v: f64,
}

/// Regions of the frozen phase plane.
///
/// With `G₁ = v + u²/3` (sign of `du/dz`) and `G₂ = 1 + 5uv/3` (sign of
/// `dv/dz`): `R1 = {G₁<0, G₂>0}`, `R2 = {G₁<0, G₂<0}`,
/// `R3 = {G₁>0, G₂<0, u>0}`, `R4 = {G₁>0, G₂>0}`, `R5 = {G₁>0, G₂<0, u<0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    R1,
    R2,
    R3,
    R4,
    R5,
    OnIsocline,
}

/// The isocline functions `(G₁, G₂) = (v + u²/3, 1 + 5uv/3)`.
pub fn isoclines(p: &PhasePoint) -> (f64, f64) {
    (p.v + p.u * p.u / 3.0, 1.0 + (5.0 / 3.0) * p.u * p.v)
}

/// Region label of a phase point; points within rounding of an isocline are
/// reported as `OnIsocline`.
pub fn classify_region(p: &PhasePoint) -> Region {
    let (g1, g2) = isoclines(p);
    let tol1 = 1e-12 * (p.v.abs() + p.u * p.u / 3.0).max(1e-300);
    let tol2 = 1e-12 * (1.0 + (5.0 / 3.0) * (p.u * p.v).abs());
    if g1.abs() <= tol1 || g2.abs() <= tol2 {
        return Region::OnIsocline;
    }
    match (g1 > 0.0, g2 > 0.0) {
        (true, true) => Region::R4,
        (false, true) => Region::R1,
        (false, false) => Region::R2,
        (true, false) => {
            if p.u > 0.0 {
                Region::R3
            } else {
                Region::R5
            }
        }
    }
}

/// The unique critical point `p_e = ((9/5)^{1/3}, −(9/5)^{2/3}/3)`.
pub fn critical_point() -> PhasePoint {
    let u = (9.0f64 / 5.0).cbrt();
    PhasePoint { u, v: -u * u / 3.0 }
}

/// Linearisation at `p_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeEigen {
    pub point: PhasePoint,
    /// Eigenvalue with positive imaginary part.
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub real_part: f64,
    /// Trace of the Jacobian.
    pub trace: f64,
}

/// Numerical eigenvalues of the frozen Jacobian at `p_e`.
pub fn eig_pe() -> PeEigen {
    let p = critical_point();
    let j = jacobian_frozen(p.u, p.v);
    let ev = linalg::eigenvalues2(&j);
    let (plus, minus) = if ev[0].im >= ev[1].im {
        (ev[0], ev[1])
    } else {
        (ev[1], ev[0])
    };
    PeEigen {
        point: p,
        lambda_plus: plus,
        lambda_minus: minus,
        real_part: plus.re,
        trace: j[0][0] + j[1][1],
    }
}

/// Which separatrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeparatrixKind {
    /// The orbit staying in `R4` for all `u`, with `v̄ ~ −1/(2u)` as
    /// `u → −∞` and `v̄ ~ u²/2` as `u → +∞`.
    Vbar,
    /// The orbit with `v̂ ~ −1/(2u)` as `u → +∞`, emanating from `p_e`.
    Vhat,
}

/// A separatrix tabulated on a uniform `u` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixTable {
    pub kind: SeparatrixKind,
    /// `(u, v)` pairs, strictly increasing in `u`.
    pub samples: Vec<(f64, f64)>,
    pub u_range: (f64, f64),
}

impl SeparatrixTable {
    /// Linear interpolation inside the tabulated range.
    pub fn eval(&self, u: f64) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() || u < s[0].0 || u > s[s.len() - 1].0 {
            return None;
        }
        let k = s.partition_point(|p| p.0 < u).clamp(1, s.len() - 1);
        let (u0, v0) = s[k - 1];
        let (u1, v1) = s[k];
        Some(v0 + (v1 - v0) * (u - u0) / (u1 - u0))
    }
}

/// Magnitude of the asymptotic seeding abscissa for both separatrices.
pub const SEPARATRIX_SEED_U: f64 = 1e3;

fn tight() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        max_step: 10.0,
        ..IntegratorConfig::default()
    }
}

/// Slope field `dv/du` of the frozen system.
fn graph_field() -> FnField<impl Fn(f64, &[f64; 1]) -> [f64; 1] + Sync> {
    FnField(|u: f64, y: &[f64; 1]| {
        let [du, dv] = rhs_frozen_plane(u, y[0]);
        [dv / du]
    })
}

/// Tabulates a separatrix at `n ≥ 2` uniform nodes of `u_range`.
///
/// `v̄` is seeded on `v = −1/(2u)` at `u = −SEPARATRIX_SEED_U` and integrated
/// forward in `u`, the direction in which neighbouring orbits contract onto
/// it. `v̂` is seeded on the same asymptote at `u = +SEPARATRIX_SEED_U` and
/// integrated backward in `z`; its table stops where `u` ceases to be
/// monotone (the first crossing of `G₁ = 0`), and the returned `u_range`
/// reports the covered part.
pub fn compute_separatrix(
    kind: SeparatrixKind,
    u_range: (f64, f64),
    n: usize,
) -> Result<SeparatrixTable> {
    let (u_lo, u_hi) = u_range;
    if !(u_lo < u_hi) || n < 2 {
        return Err(Error::Domain(format!(
            "need u_lo < u_hi and n >= 2, got {u_range:?}, n = {n}"
        )));
    }
    match kind {
        SeparatrixKind::Vbar => {
            let us = -SEPARATRIX_SEED_U;
            if u_lo < 0.5 * us {
                return Err(Error::SeedOutOfAsymptoticRange {
                    u: u_lo,
                    min_abs: 2.0 * u_lo.abs(),
                });
            }
            let v0 = -1.0 / (2.0 * us);
            let tr = integrate(&graph_field(), [v0], (us, u_hi), &[], &tight())?;
            if tr.t_end() < u_hi {
                return Err(Error::Integration("v-bar integration stopped early".into()));
            }
            let samples = uniform(u_lo, u_hi, n)
                .into_iter()
                .map(|u| Ok((u, tr.dense_eval(u)?[0])))
                .collect::<Result<_>>()?;
            Ok(SeparatrixTable {
                kind,
                samples,
                u_range,
            })
        }
        SeparatrixKind::Vhat => {
            let us = SEPARATRIX_SEED_U.max(10.0 * u_hi);
            let tr = vhat_branch(us)?;
            let u_turn = tr.last_state()[0];
            let lo = u_lo.max(u_turn);
            if lo >= u_hi {
                return Err(Error::Domain(format!(
                    "v-hat is not a graph over [{u_lo}, {u_hi}]; it turns at u = {u_turn}"
                )));
            }
            // Along the branch u decreases monotonically in backward z, so each
            // node is located by bisection on the dense output.
            let samples = uniform(lo, u_hi, n)
                .into_iter()
                .map(|u| {
                    let (mut za, mut zb) = (tr.t_start(), tr.t_end());
                    for _ in 0..200 {
                        let zm = 0.5 * (za + zb);
                        if tr.dense_eval(zm)?[0] > u {
                            za = zm;
                        } else {
                            zb = zm;
                        }
                        if (za - zb).abs() <= 1e-16 * (1.0 + za.abs()) {
                            break;
                        }
                    }
                    Ok((u, tr.dense_eval(0.5 * (za + zb))?[1]))
                })
                .collect::<Result<_>>()?;
            Ok(SeparatrixTable {
                kind,
                samples,
                u_range: (lo, u_hi),
            })
        }
    }
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// `v̂` in the `z` parametrisation, backward from `u = u_seed` to the first
/// turning point of `u`.
fn vhat_branch(u_seed: f64) -> Result<Trajectory<2>> {
    let turn = Event::new(
        EventKind::Custom,
        Direction::Any,
        true,
        |_, y: &[f64; 2]| y[1] + y[0] * y[0] / 3.0,
    );
    integrate(
        &FrozenPlaneField,
        [u_seed, -1.0 / (2.0 * u_seed)],
        (0.0, -100.0),
        &[turn],
        &tight(),
    )
}

/// Convergence of `v̂` to `p_e` backward in `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VhatConvergence {
    /// Fitted rate `r` in `dist ~ C e^{r z}` as `z → −∞`.
    pub rate: f64,
    /// Fitted prefactor `C`.
    pub prefactor: f64,
    /// Closed-form real part of `λ±`, for comparison.
    pub expected_rate: f64,
}

/// Least-squares slope of `ln|v − u²/2|` against `ln u` over the table nodes
/// inside `window` (which must lie in `u > 0`).
pub fn vbar_correction_exponent(table: &SeparatrixTable, window: (f64, f64)) -> Result<f64> {
    if !(window.0 > 0.0 && window.0 < window.1) {
        return Err(Error::Domain(format!(
            "window must satisfy 0 < lo < hi, got {window:?}"
        )));
    }
    let pts: Vec<(f64, f64)> = table
        .samples
        .iter()
        .filter(|(u, _)| *u >= window.0 && *u <= window.1)
        .map(|&(u, v)| (u.ln(), (v - 0.5 * u * u).abs().ln()))
        .filter(|p| p.1.is_finite())
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            found: pts.len(),
        });
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, 1.0]).collect();
    let b: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Ok(linalg::least_squares(&rows, &b)?[0])
}

/// Fits the exponential approach of `v̂` to `p_e` backward in `z`, with
/// distance measured in the real Jordan coordinates of the linearisation.
pub fn vhat_convergence() -> Result<VhatConvergence> {
    let pe = eig_pe();
    let p = pe.point;
    let j = jacobian_frozen(p.u, p.v);
    // Complex eigenvector (1, (λ − j00)/j01) = a + i b; P = [a b].
    let l = pe.lambda_plus;
    let e1 = (l - j[0][0]) / j[0][1];
    let pm = [[1.0, 0.0], [e1.re, e1.im]];
    let det = pm[0][0] * pm[1][1] - pm[0][1] * pm[1][0];
    let inv = [
        [pm[1][1] / det, -pm[0][1] / det],
        [-pm[1][0] / det, pm[0][0] / det],
    ];
    let adapted = |y: &[f64; 2]| {
        let d = [y[0] - p.u, y[1] - p.v];
        let x0 = inv[0][0] * d[0] + inv[0][1] * d[1];
        let x1 = inv[1][0] * d[0] + inv[1][1] * d[1];
        (x0 * x0 + x1 * x1).sqrt()
    };
    let stop = Event::new(
        EventKind::Custom,
        Direction::Falling,
        true,
        move |_, y: &[f64; 2]| {
            let d = ((y[0] - p.u).powi(2) + (y[1] - p.v).powi(2)).sqrt();
            d - 1e-11
        },
    );
    let us = SEPARATRIX_SEED_U;
    let tr = integrate(
        &FrozenPlaneField,
        [us, -1.0 / (2.0 * us)],
        (0.0, -200.0),
        &[stop],
        &tight(),
    )?;
    let pts: Vec<(f64, f64)> = tr
        .resample(4000)
        .into_iter()
        .map(|(z, y)| (z, adapted(&y)))
        .filter(|(_, d)| *d < 1e-4 && *d > 1e-10)
        .collect();
    if pts.len() < 20 {
        return Err(Error::FitFailure(
            "v-hat never entered the linear regime".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|(z, _)| vec![*z, 1.0]).collect();
    let b: Vec<f64> = pts.iter().map(|(_, d)| d.ln()).collect();
    let c = linalg::least_squares(&rows, &b)?;
    Ok(VhatConvergence {
        rate: c[0],
        prefactor: c[1].exp(),
        expected_rate: pe.real_part,
    })
}

/// Constants of the universal bounce solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingConstants {
    /// `A = lim h''/2` as `s → +∞` (outgoing `h ~ A s²`).
    pub amplitude_a: f64,
    pub incoming_slope_k: f64,
    /// Leading coefficient of a `{s², s, 1}` least-squares fit of `h` over
    /// the outgoing window; the same limit as `A`, measured independently.
    pub gamma_out: f64,
    /// Relative drift of `h''/2` across the outgoing window.
    pub fit_residual: f64,
}

/// Smallest admissible `|s₀| K⁴` for the incoming seed.
pub const MATCHING_MIN_DEPTH: f64 = 100.0;

/// Incoming far-field data `(h, h', h'')` at `s₀ < 0`: `h = −Ks − ln|s|/(2K³)`.
pub fn matching_seed(k: f64, s0: f64) -> [f64; 3] {
    let k3 = k * k * k;
    [
        -k * s0 - s0.abs().ln() / (2.0 * k3),
        -k - 1.0 / (2.0 * k3 * s0),
        1.0 / (2.0 * k3 * s0 * s0),
    ]
}

/// Integrates the inner matching problem from `s_range.0 < 0` to
/// `s_range.1 > 0` and measures the outgoing amplitude.
pub fn matching_solution(
    k: f64,
    s_range: (f64, f64),
) -> Result<(Trajectory<3>, MatchingConstants)> {
    matching_solution_with(k, s_range, &matching_integrator())
}

/// Integrator settings used by [`matching_solution`].
pub fn matching_integrator() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        max_step: f64::INFINITY,
        ..IntegratorConfig::default()
    }
}

/// [`matching_solution`] with explicit integrator settings.
pub fn matching_solution_with(
    k: f64,
    s_range: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<(Trajectory<3>, MatchingConstants)> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("K must be positive, got {k}")));
    }
    let (s0, s1) = s_range;
    let k4 = k.powi(4);
    if !(s0 < 0.0 && s1 > 0.0) {
        return Err(Error::Domain(format!("need s0 < 0 < s1, got {s_range:?}")));
    }
    if s0.abs() * k4 < MATCHING_MIN_DEPTH {
        return Err(Error::SeedOutOfAsymptoticRange {
            u: s0,
            min_abs: MATCHING_MIN_DEPTH / k4,
        });
    }
    let tr = integrate(
        &InnerField::default(),
        matching_seed(k, s0),
        (s0, s1),
        &[],
        cfg,
    )?;
    if tr.t_end() != s1 {
        return Err(Error::Integration(
            "matching integration stopped early".into(),
        ));
    }
    let h_min = tr
        .samples
        .iter()
        .map(|(_, y)| y[0])
        .fold(f64::INFINITY, f64::min);
    // Outgoing window: second half of the positive range with h ≥ 100 h_min.
    let pts: Vec<(f64, [f64; 3])> = uniform(0.5 * s1, s1, 200)
        .into_iter()
        .map(|s| Ok((s, tr.dense_eval(s)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, y)| y[0] >= 100.0 * h_min)
        .collect();
    if pts.len() < 20 {
        return Err(Error::FitFailure(
            "no quadratic outgoing regime in the window".into(),
        ));
    }
    let a_end = pts[pts.len() - 1].1[2] / 2.0;
    let a_start = pts[0].1[2] / 2.0;
    let drift = ((a_end - a_start) / a_end).abs();
    if drift > 0.01 {
        return Err(Error::FitFailure(format!(
            "h''/2 drifts by {drift:.3e} over the outgoing window"
        )));
    }
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .map(|(s, _)| vec![s * s / (s1 * s1), s / s1, 1.0])
        .collect();
    let b: Vec<f64> = pts.iter().map(|(_, y)| y[0]).collect();
    let c = linalg::least_squares(&rows, &b)?;
    Ok((
        tr,
        MatchingConstants {
            amplitude_a: a_end,
            incoming_slope_k: k,
            gamma_out: c[0] / (s1 * s1),
            fit_residual: drift,
        },
    ))
}

/// Default `s` range for slope `K`: seed depth `|s₀| K⁴ = 10⁴`, outgoing end
/// `s₁ K⁴ = 400`.
pub fn default_matching_range(k: f64) -> (f64, f64) {
    let k4 = k.powi(4);
    (-1e4 / k4, 400.0 / k4)
}

/// Sensitivity probe: integrates backward from the seed at `s₀` with `h''`
/// perturbed by `dh2` down to `2 s₀`, and returns the relative deviation of
/// `h(2 s₀)` from the incoming line `−K s`.
pub fn matching_sensitivity(k: f64, s0: f64, dh2: f64) -> Result<f64> {
    let mut y0 = matching_seed(k, s0);
    y0[2] += dh2;
    let tr = integrate(
        &InnerField::default(),
        y0,
        (s0, 2.0 * s0),
        &[],
        &matching_integrator(),
    )?;
    let h = tr.last_state()[0];
    let line = -k * 2.0 * s0;
    Ok(((h - line) / line).abs())
}

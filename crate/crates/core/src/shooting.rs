//! Shooting on the centre-stable manifold of `p₊ = (1, 0, 0, π/2)`: seeds
//! on the tangent plane, backward classification into blow-up or touchdown
//! by sufficient-condition certificates, and the bisection that isolates the
//! borderline (heteroclinic) trajectory.
//!
//! A single bisection in the seed coordinate `ν` only shadows the connection
//! until the bracket width is amplified to order one by the backward
//! instability. The connection is therefore tracked in stages: once the
//! bracketing trajectories separate by `track_split`, both are cut, the
//! segment between the two cut states becomes the new bracket, and bisection
//! resumes from there.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{
    integrate, integrate_observed, IntegratorConfig, Status, StepControl, Trajectory,
};
use crate::limit_analysis::{eigen_ps, phi_events};
use crate::oscillation::{extract_extrema, DEEP_THRESHOLD, DEFAULT_PROMINENCE};
use crate::systems::CompactField;
use crate::transforms::{on_slice, phys_at_xi, tau_of_xi, CompactState, ModelParams, PhysState};

/// Stable eigenvector `(3^{-2/3}, −3^{-1/3}, 1, 0)` of `p₊`.
pub fn stable_direction() -> [f64; 4] {
    [3f64.powf(-2.0 / 3.0), -(3f64.powf(-1.0 / 3.0)), 1.0, 0.0]
}

/// Angular direction `(0, 0, 0, 1)`.
pub const ANGLE_DIRECTION: [f64; 4] = [0.0, 0.0, 0.0, 1.0];

/// The far-field critical point `p₊`.
pub const P_PLUS: [f64; 4] = [1.0, 0.0, 0.0, FRAC_PI_2];

/// Coordinates of a seed on the tangent plane of the centre-stable manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSeed {
    /// Coordinate along the stable eigenvector.
    pub nu: f64,
    /// Coordinate along the angle; `σ = −ε` places the seed at `θ = π/2 − ε`.
    pub sigma: f64,
}

/// Tunable constants of the shooting machinery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootConfig {
    /// Half-width `δ₀` of the seed box.
    pub delta0: f64,
    /// Touchdown threshold on `Φ`.
    pub eps_touch: f64,
    /// Blow-up threshold on `Φ`.
    pub phi_max: f64,
    /// Safety factor applied to the certificate thresholds.
    pub margin: f64,
    /// Backward `τ`-horizon of a single probe.
    pub horizon: f64,
    /// Largest multiple of `horizon` tried on undetermined probes.
    pub horizon_cap: f64,
    /// Width of the reported `ν` bracket.
    pub tol: f64,
    /// Sup-norm gap between bracketing states at which bisection stops
    /// while tracking.
    pub track_gap: f64,
    /// Sup-norm separation of the bracketing trajectories at which a
    /// tracking stage is cut.
    pub track_split: f64,
    /// Tracking stops once `θ ≤ −π/2 + theta_stop`.
    pub theta_stop: f64,
    /// Upper bound on the number of tracking stages.
    pub max_stages: usize,
    pub integrator: IntegratorConfig,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            delta0: 1e-2,
            eps_touch: 1e-4,
            phi_max: 1e6,
            margin: 2.0,
            horizon: 60.0,
            horizon_cap: 8.0,
            tol: 1e-10,
            track_gap: 1e-13,
            track_split: 1e-6,
            theta_stop: 0.05,
            max_stages: 100_000,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl ShootConfig {
    /// Checks that every field is finite and in range.
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {x}"
                )))
            }
        };
        pos("delta0", self.delta0)?;
        pos("eps_touch", self.eps_touch)?;
        pos("phi_max", self.phi_max)?;
        pos("horizon", self.horizon)?;
        pos("tol", self.tol)?;
        pos("track_gap", self.track_gap)?;
        pos("track_split", self.track_split)?;
        pos("theta_stop", self.theta_stop)?;
        if !(self.eps_touch < 1.0 && self.phi_max > 1.0) {
            return Err(Error::Domain("need eps_touch < 1 < phi_max".into()));
        }
        if !(self.margin.is_finite() && self.margin >= 1.0) {
            return Err(Error::Domain(format!(
                "margin must be >= 1, got {}",
                self.margin
            )));
        }
        if !(self.horizon_cap.is_finite() && self.horizon_cap >= 1.0) {
            return Err(Error::Domain(format!(
                "horizon_cap must be >= 1, got {}",
                self.horizon_cap
            )));
        }
        if !(self.track_gap < self.track_split) {
            return Err(Error::Domain("need track_gap < track_split".into()));
        }
        if self.max_stages == 0 {
            return Err(Error::Domain("max_stages must be positive".into()));
        }
        self.integrator.validate()
    }
}

fn check_box(seed: &ManifoldSeed, delta0: f64) -> Result<()> {
    let ok = |x: f64| x.is_finite() && x.abs() <= delta0;
    if ok(seed.nu) && ok(seed.sigma) {
        Ok(())
    } else {
        Err(Error::BoxViolation {
            nu: seed.nu,
            sigma: seed.sigma,
            delta0,
        })
    }
}

/// Linear tangent-plane seed `p₊ + ν ṽ₁ + σ ṽ₄`, with `θ` clamped to
/// `≤ π/2`.
pub fn seed_state(seed: &ManifoldSeed, delta0: f64) -> Result<CompactState> {
    check_box(seed, delta0)?;
    let v1 = stable_direction();
    let y: [f64; 4] =
        std::array::from_fn(|i| P_PLUS[i] + seed.nu * v1[i] + seed.sigma * ANGLE_DIRECTION[i]);
    let mut s = CompactState::from_array(&y);
    s.theta = s.theta.min(FRAC_PI_2);
    Ok(s)
}

/// The `τ` label of a compact state, consistent with `τ(ξ)` for `ξ = tan θ`;
/// states on a slice are labelled `0`.
pub fn seed_tau(state: &CompactState) -> f64 {
    if on_slice(state.theta) {
        0.0
    } else {
        tau_of_xi(state.theta.tan())
    }
}

/// Time horizon used by [`projected_seed_state`].
pub const PROJECTION_TIME: f64 = 20.0;

/// Sup-norm distance of `(Φ, W, Ψ)` from `(1, 0, 0)` after integrating the
/// compact system forward from `state` for `time`.
pub fn forward_distance(
    state: &CompactState,
    params: &ModelParams,
    time: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let t0 = seed_tau(state);
    let tr = integrate(
        &CompactField { params: *params },
        state.to_array(),
        (t0, t0 + time),
        &[],
        cfg,
    )?;
    if tr.status != Status::Completed {
        return Ok(f64::INFINITY);
    }
    let y = tr.last_state();
    Ok((y[0] - 1.0).abs().max(y[1].abs()).max(y[2].abs()))
}

/// Seed corrected along the two forward-unstable eigendirections of the
/// limit system so that the forward solution carries no unstable component
/// at `τ₀ + PROJECTION_TIME`. Newton iteration on the two coefficients.
pub fn projected_seed_state(
    seed: &ManifoldSeed,
    params: &ModelParams,
    delta0: f64,
    cfg: &IntegratorConfig,
) -> Result<CompactState> {
    let base = seed_state(seed, delta0)?;
    let e = eigen_ps();
    let l = e.lambda2;
    let left = [l * l, l, num_complex::Complex64::new(1.0, 0.0)];
    let t0 = seed_tau(&base);
    let field = CompactField { params: *params };
    let build = |c: [f64; 2]| -> [f64; 4] {
        let mut y = base.to_array();
        for i in 0..3 {
            y[i] += c[0] * e.v2[i] + c[1] * e.v3[i];
        }
        y
    };
    let residual = |c: [f64; 2]| -> Result<[f64; 2]> {
        let tr = integrate(&field, build(c), (t0, t0 + PROJECTION_TIME), &[], cfg)?;
        if tr.status != Status::Completed {
            return Err(Error::Integration(format!(
                "projection run ended with {:?}",
                tr.status
            )));
        }
        let y = tr.last_state();
        let d = [y[0] - 1.0, y[1], y[2]];
        let z = left[0] * d[0] + left[1] * d[1] + left[2] * d[2];
        Ok([z.re, z.im])
    };
    let mut c = [0.0, 0.0];
    let mut r = residual(c)?;
    let h = 1e-9;
    for _ in 0..20 {
        if r[0].abs().max(r[1].abs()) < 1e-13 {
            break;
        }
        let ra = residual([c[0] + h, c[1]])?;
        let rb = residual([c[0], c[1] + h])?;
        let j = [
            [(ra[0] - r[0]) / h, (rb[0] - r[0]) / h],
            [(ra[1] - r[1]) / h, (rb[1] - r[1]) / h],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Domain("singular projection Jacobian".into()));
        }
        let dc = [
            (r[0] * j[1][1] - r[1] * j[0][1]) / det,
            (r[1] * j[0][0] - r[0] * j[1][0]) / det,
        ];
        c = [c[0] - dc[0], c[1] - dc[1]];
        r = residual(c)?;
    }
    Ok(CompactState::from_array(&build(c)))
}

/// Classification of a backward run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    BlowUp,
    Touchdown,
    Undetermined,
}

/// Which of the two far-field-growth thresholds applies at `ξ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthBranch {
    /// `ξ₀² < −2a`: threshold `(24/5)³|a|⁵(1+3|a|)`.
    Inner,
    /// `ξ₀² > −2a`: threshold `16(2+|a|)`.
    Outer,
    /// `ξ₀² = −2a`: the larger of the two.
    Boundary,
}

/// What decided a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trigger {
    /// Large height with `H' < 0`, `H'' > 0` at `xi0`:
    /// `(ξ₀²+1+|a|)H³ = value ≥ margin · threshold`.
    GrowthCertificate {
        xi0: f64,
        value: f64,
        threshold: f64,
        branch: GrowthBranch,
        dh: f64,
        d2h: f64,
    },
    /// Small height with `H' > 0`, `H'' < 0` at `xi0`:
    /// `X^{1/3}(ξ₀²+1+|a|)^{4/3} / ((|ξ₀|+1+|a|)^{5/3} H') = ratio < 1/(10 · margin)`.
    TouchdownCertificate {
        xi0: f64,
        value: f64,
        slope_term: f64,
        ratio: f64,
        d2h: f64,
    },
    /// `Φ` fell to the touchdown threshold.
    TouchdownEvent { phi: f64 },
    /// `Φ` reached the blow-up threshold.
    PhiMax { phi: f64 },
    /// The integrator could not continue (singular growth).
    StepFailure,
    /// Neither certificate nor event before the horizon.
    Horizon,
}

/// Result of [`classify_backward`].
#[derive(Debug, Clone)]
pub struct ShootOutcome {
    pub verdict: Verdict,
    pub trigger: Trigger,
    pub tau_end: f64,
    pub trajectory: Trajectory<4>,
}

/// The threshold of the growth certificate at `xi0`, unscaled.
pub fn growth_threshold(xi0: f64, a: f64) -> (f64, GrowthBranch) {
    let aa = a.abs();
    let inner = (24.0f64 / 5.0).powi(3) * aa.powi(5) * (1.0 + 3.0 * aa);
    let outer = 16.0 * (2.0 + aa);
    let x2 = xi0 * xi0;
    if x2 < -2.0 * a {
        (inner, GrowthBranch::Inner)
    } else if x2 > -2.0 * a {
        (outer, GrowthBranch::Outer)
    } else {
        (inner.max(outer), GrowthBranch::Boundary)
    }
}

/// Checks the sufficient condition for far-field growth at a physical state.
pub fn growth_certificate(p: &PhysState, params: &ModelParams, margin: f64) -> Option<Trigger> {
    let aa = params.a.abs();
    let value = (p.xi * p.xi + 1.0 + aa) * p.h.powi(3);
    let (threshold, branch) = growth_threshold(p.xi, params.a);
    (p.dh < 0.0 && p.d2h > 0.0 && value >= margin * threshold).then_some(
        Trigger::GrowthCertificate {
            xi0: p.xi,
            value,
            threshold,
            branch,
            dh: p.dh,
            d2h: p.d2h,
        },
    )
}

/// Checks the sufficient condition for touchdown at a physical state.
pub fn touchdown_certificate(p: &PhysState, params: &ModelParams, margin: f64) -> Option<Trigger> {
    if !(p.dh > 0.0 && p.d2h < 0.0) {
        return None;
    }
    let aa = params.a.abs();
    let s = p.xi * p.xi + 1.0 + aa;
    let value = s * p.h.powi(3);
    let slope_term = (p.xi.abs() + 1.0 + aa).powf(5.0 / 3.0) * p.dh;
    let ratio = value.cbrt() * s.powf(4.0 / 3.0) / slope_term;
    (ratio < 1.0 / (10.0 * margin)).then_some(Trigger::TouchdownCertificate {
        xi0: p.xi,
        value,
        slope_term,
        ratio,
        d2h: p.d2h,
    })
}

fn verdict_of(trigger: &Trigger) -> Verdict {
    match trigger {
        Trigger::GrowthCertificate { .. } | Trigger::PhiMax { .. } | Trigger::StepFailure => {
            Verdict::BlowUp
        }
        Trigger::TouchdownCertificate { .. } | Trigger::TouchdownEvent { .. } => Verdict::Touchdown,
        Trigger::Horizon => Verdict::Undetermined,
    }
}

/// Integrates the compact system backward from `state` (labelled `tau0`)
/// for at most `horizon`, testing both certificates after every accepted
/// step.
pub fn classify_state(
    state: &CompactState,
    tau0: f64,
    params: &ModelParams,
    horizon: f64,
    cfg: &ShootConfig,
) -> Result<ShootOutcome> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let events = phi_events::<4>(cfg.eps_touch, cfg.phi_max);
    let mut certified: Option<Trigger> = None;
    let traj = integrate_observed(
        &CompactField { params: *params },
        state.to_array(),
        (tau0, tau0 - horizon),
        &events,
        &cfg.integrator,
        |_, y| {
            let s = CompactState::from_array(y);
            if on_slice(s.theta) || !(s.phi > 0.0) {
                return StepControl::Continue;
            }
            let p = phys_at_xi(s.theta.tan(), &s);
            certified = growth_certificate(&p, params, cfg.margin)
                .or_else(|| touchdown_certificate(&p, params, cfg.margin));
            if certified.is_some() {
                StepControl::Stop
            } else {
                StepControl::Continue
            }
        },
    )?;
    let trigger = if let Some(t) = certified {
        t
    } else if traj.status == Status::StepFailure {
        Trigger::StepFailure
    } else if let Some(rec) = traj.terminal_event {
        if rec.index == 0 {
            Trigger::TouchdownEvent { phi: rec.state[0] }
        } else {
            Trigger::PhiMax { phi: rec.state[0] }
        }
    } else {
        Trigger::Horizon
    };
    Ok(ShootOutcome {
        verdict: verdict_of(&trigger),
        trigger,
        tau_end: traj.t_end(),
        trajectory: traj,
    })
}

/// Classifies the linear seed `(ν, σ)` by a backward run of length `horizon`.
pub fn classify_backward(
    seed: &ManifoldSeed,
    params: &ModelParams,
    horizon: f64,
    cfg: &ShootConfig,
) -> Result<ShootOutcome> {
    let s = seed_state(seed, cfg.delta0)?;
    classify_state(&s, seed_tau(&s), params, horizon, cfg)
}

/// One classified seed, without its trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    /// Tracking stage; stage 0 bisects on `ν`.
    pub stage: usize,
    /// `ν` at stage 0, the segment parameter in `[0, 1]` afterwards.
    pub coordinate: f64,
    pub verdict: Verdict,
    pub tau_end: f64,
    pub horizon: f64,
    pub trigger: Trigger,
}

/// Classifies every `ν` of `nus` at fixed `σ` in parallel; the result keeps
/// the input order.
pub fn classify_grid(
    nus: &[f64],
    sigma: f64,
    params: &ModelParams,
    cfg: &ShootConfig,
) -> Result<Vec<ProbeRecord>> {
    nus.par_iter()
        .map(|&nu| {
            let o = classify_backward(&ManifoldSeed { nu, sigma }, params, cfg.horizon, cfg)?;
            Ok(ProbeRecord {
                stage: 0,
                coordinate: nu,
                verdict: o.verdict,
                tau_end: o.tau_end,
                horizon: cfg.horizon,
                trigger: o.trigger,
            })
        })
        .collect()
}

/// Whether determined verdicts along a grid form two contiguous bands with
/// at most one undetermined entry between them.
pub fn is_banded(verdicts: &[Verdict]) -> bool {
    let mut runs: Vec<(Verdict, usize)> = Vec::new();
    for &v in verdicts {
        match runs.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => runs.push((v, 1)),
        }
    }
    match runs.as_slice() {
        [(a, _)] => *a != Verdict::Undetermined,
        [(a, _), (b, _)] => *a != Verdict::Undetermined && *b != Verdict::Undetermined,
        [(a, _), (Verdict::Undetermined, 1), (b, _)] => {
            *a != Verdict::Undetermined && *b != Verdict::Undetermined && a != b
        }
        _ => false,
    }
}

/// Summary of the extrema of `Φ` along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationSummary {
    pub maxima: usize,
    pub minima: usize,
    pub deep_maxima: usize,
    pub phi_min: f64,
    pub phi_max: f64,
}

/// Counts extrema and records the range of `Φ`.
pub fn oscillation_summary(traj: &Trajectory<4>) -> OscillationSummary {
    let seq = extract_extrema(traj, DEFAULT_PROMINENCE);
    let (lo, hi) = traj
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, y)| {
            (lo.min(y[0]), hi.max(y[0]))
        });
    OscillationSummary {
        maxima: seq.maxima.len(),
        minima: seq.minima.len(),
        deep_maxima: seq.deep_maxima(DEEP_THRESHOLD).len(),
        phi_min: lo,
        phi_max: hi,
    }
}

/// Borderline trajectory between blow-up and touchdown.
#[derive(Debug, Clone)]
pub struct HeteroclinicResult {
    pub params: ModelParams,
    pub sigma: f64,
    /// Midpoint of the reported bracket.
    pub nu_bar: f64,
    /// Final `ν` bracket `(ν_lo, ν_hi)`, width at most `tol`.
    pub bracket: (f64, f64),
    /// Verdicts at the lower and upper bracket ends.
    pub orientation: (Verdict, Verdict),
    /// Concatenated tracked trajectory in compact variables, running
    /// backward in `τ` from the seed.
    pub trajectory: Trajectory<4>,
    /// `τ` values where consecutive tracking stages meet.
    pub junctions: Vec<f64>,
    pub stages: usize,
    pub probes: Vec<ProbeRecord>,
    pub diagnostics: OscillationSummary,
}

enum Segment {
    Nu,
    States {
        tau: f64,
        lo: [f64; 4],
        hi: [f64; 4],
    },
}

impl Segment {
    fn state(&self, s: f64) -> (CompactState, f64) {
        match self {
            Segment::Nu => unreachable!("nu segments are seeded by classify_backward"),
            Segment::States { tau, lo, hi } => {
                let y: [f64; 4] = std::array::from_fn(|i| lo[i] + s * (hi[i] - lo[i]));
                (CompactState::from_array(&y), *tau)
            }
        }
    }
}

struct Tracker<'a> {
    params: &'a ModelParams,
    cfg: &'a ShootConfig,
    sigma: f64,
    probes: Vec<ProbeRecord>,
}

impl Tracker<'_> {
    fn probe(&mut self, stage: usize, seg: &Segment, s: f64) -> Result<ShootOutcome> {
        let mut horizon = self.cfg.horizon;
        loop {
            let o = match seg {
                Segment::Nu => classify_backward(
                    &ManifoldSeed {
                        nu: s,
                        sigma: self.sigma,
                    },
                    self.params,
                    horizon,
                    self.cfg,
                )?,
                Segment::States { .. } => {
                    let (st, tau) = seg.state(s);
                    classify_state(&st, tau, self.params, horizon, self.cfg)?
                }
            };
            self.probes.push(ProbeRecord {
                stage,
                coordinate: s,
                verdict: o.verdict,
                tau_end: o.tau_end,
                horizon,
                trigger: o.trigger,
            });
            if o.verdict != Verdict::Undetermined {
                return Ok(o);
            }
            if horizon * 2.0 > self.cfg.horizon * self.cfg.horizon_cap {
                return Err(Error::HorizonExhausted(format!(
                    "stage {stage}: coordinate {s} undetermined at horizon {horizon}"
                )));
            }
            horizon *= 2.0;
        }
    }

    /// Bisects between `lo` and `hi` (opposite verdicts) until `done`.
    fn bisect(
        &mut self,
        stage: usize,
        seg: &Segment,
        mut lo: (f64, ShootOutcome),
        mut hi: (f64, ShootOutcome),
        done: impl Fn(f64, f64) -> bool,
    ) -> Result<((f64, ShootOutcome), (f64, ShootOutcome))> {
        while !done(lo.0, hi.0) {
            let m = 0.5 * (lo.0 + hi.0);
            if !(m > lo.0.min(hi.0) && m < lo.0.max(hi.0)) {
                break;
            }
            let o = self.probe(stage, seg, m)?;
            if o.verdict == lo.1.verdict {
                lo = (m, o);
            } else {
                hi = (m, o);
            }
        }
        Ok((lo, hi))
    }
}

fn sup_dist(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Last `τ` (backward from the common start) at which the two trajectories
/// are still within `split` of each other.
fn cut_time(lo: &Trajectory<4>, hi: &Trajectory<4>, split: f64) -> Result<f64> {
    let start = lo.t_start();
    let common_end = lo.t_end().max(hi.t_end());
    let sep = |t: f64| -> Result<f64> { Ok(sup_dist(&lo.dense_eval(t)?, &hi.dense_eval(t)?)) };
    let mut prev = start;
    for &(t, _) in lo.samples.iter().skip(1) {
        let t = t.max(common_end);
        if sep(t)? > split {
            let (mut a, mut b) = (prev, t);
            if a == start {
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if sep(m)? > split {
                        b = m;
                    } else {
                        a = m;
                    }
                }
            }
            return Ok(a);
        }
        prev = t;
        if t == common_end {
            break;
        }
    }
    Ok(prev)
}

/// Locates the borderline seed `ν̄` at fixed `σ` by bisection on
/// `nu_bracket`, then tracks the borderline trajectory backward in stages
/// until `θ ≤ −π/2 + theta_stop`.
pub fn find_heteroclinic(
    params: &ModelParams,
    sigma: f64,
    nu_bracket: (f64, f64),
    cfg: &ShootConfig,
) -> Result<HeteroclinicResult> {
    cfg.validate()?;
    let (a, b) = nu_bracket;
    if !(a < b) {
        return Err(Error::BracketInvalid(format!(
            "need nu_lo < nu_hi, got ({a}, {b})"
        )));
    }
    let mut tr = Tracker {
        params,
        cfg,
        sigma,
        probes: Vec::new(),
    };
    let seg = Segment::Nu;
    let oa = tr.probe(0, &seg, a)?;
    let ob = tr.probe(0, &seg, b)?;
    if oa.verdict == ob.verdict {
        return Err(Error::BracketInvalid(format!(
            "both ends of ({a}, {b}) classify as {:?}",
            oa.verdict
        )));
    }
    let orientation = (oa.verdict, ob.verdict);
    let tol = cfg.tol;
    let ((la, oa), (hb, ob)) = tr.bisect(0, &seg, (a, oa), (b, ob), |x, y| (y - x).abs() <= tol)?;
    let bracket = (la.min(hb), la.max(hb));
    let v1max = stable_direction()
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let gap = cfg.track_gap;
    let ((_, mut lo), (_, mut hi)) = tr.bisect(0, &seg, (la, oa), (hb, ob), |x, y| {
        (y - x).abs() * v1max <= gap
    })?;

    let mut trajectory: Option<Trajectory<4>> = None;
    let mut junctions = Vec::new();
    let mut stage = 0;
    loop {
        let cut = cut_time(&lo.trajectory, &hi.trajectory, cfg.track_split)?;
        let start = lo.trajectory.t_start();
        if !(cut < start) {
            return Err(Error::HorizonExhausted(format!(
                "stage {stage}: bracketing trajectories separate immediately at tau = {start}"
            )));
        }
        let piece = lo.trajectory.truncated(cut)?;
        let y_lo = piece.last_state();
        let y_hi = hi.trajectory.dense_eval(cut)?;
        match trajectory.as_mut() {
            None => trajectory = Some(piece),
            Some(t) => {
                junctions.push(start);
                t.append(piece)?;
            }
        }
        if y_lo[3] <= -FRAC_PI_2 + cfg.theta_stop {
            break;
        }
        stage += 1;
        if stage >= cfg.max_stages {
            return Err(Error::IterationLimit {
                what: "heteroclinic tracking stages",
                iterations: stage,
            });
        }
        let seg = Segment::States {
            tau: cut,
            lo: y_lo,
            hi: y_hi,
        };
        let width = sup_dist(&y_lo, &y_hi);
        let o_lo = tr.probe(stage, &seg, 0.0)?;
        let o_hi = tr.probe(stage, &seg, 1.0)?;
        if o_lo.verdict == o_hi.verdict {
            return Err(Error::BracketInvalid(format!(
                "stage {stage}: both cut states classify as {:?}",
                o_lo.verdict
            )));
        }
        let ((_, l), (_, h)) = tr.bisect(stage, &seg, (0.0, o_lo), (1.0, o_hi), |x, y| {
            (y - x).abs() * width <= gap
        })?;
        lo = l;
        hi = h;
    }
    let trajectory = trajectory.expect("at least one stage");
    let diagnostics = oscillation_summary(&trajectory);
    Ok(HeteroclinicResult {
        params: *params,
        sigma,
        nu_bar: 0.5 * (bracket.0 + bracket.1),
        bracket,
        orientation,
        trajectory,
        junctions,
        stages: stage + 1,
        probes: tr.probes,
        diagnostics,
    })
}

/// One point of the physical profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub tau: f64,
    pub compact: CompactState,
    pub phys: PhysState,
}

/// Physical profile of a heteroclinic candidate with its far-field checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicProfile {
    /// Points ordered by increasing `ξ`.
    pub points: Vec<ProfilePoint>,
    /// `|ξ|^{2/3} H` at the smallest and largest `ξ`.
    pub tail_ratios: (f64, f64),
    /// Whether both tail ratios lie in `[0.5, 2]`.
    pub tails_ok: bool,
}

/// Converts the compact trajectory of a result to physical variables.
pub fn heteroclinic_profile(result: &HeteroclinicResult) -> HeteroclinicProfile {
    let mut points: Vec<ProfilePoint> = result
        .trajectory
        .samples
        .iter()
        .filter_map(|(t, y)| {
            let c = CompactState::from_array(y);
            (!on_slice(c.theta)).then(|| ProfilePoint {
                tau: *t,
                compact: c,
                phys: phys_at_xi(c.theta.tan(), &c),
            })
        })
        .collect();
    points.sort_by(|a, b| a.phys.xi.partial_cmp(&b.phys.xi).unwrap());
    points.dedup_by(|a, b| a.phys.xi == b.phys.xi);
    let ratio = |p: &ProfilePoint| p.phys.xi.abs().powf(2.0 / 3.0) * p.phys.h;
    let tail_ratios = match (points.first(), points.last()) {
        (Some(f), Some(l)) => (ratio(f), ratio(l)),
        _ => (f64::NAN, f64::NAN),
    };
    let ok = |r: f64| (0.5..=2.0).contains(&r);
    HeteroclinicProfile {
        tails_ok: ok(tail_ratios.0) && ok(tail_ratios.1),
        points,
        tail_ratios,
    }
}

/// Step of the finite-difference stencil used by [`profile_residual`].
pub const RESIDUAL_STENCIL: f64 = 1e-2;

/// Largest normalised residual `|H''' + ξ² + a − 1/H³| / (1/H³ + ξ² + |a|)`
/// along the tracked trajectory, with `H'''` from a fourth-order central
/// difference of `H''` on the dense output. Stencils that straddle a stage
/// junction or leave the span are skipped; at most `max_points` evenly
/// spaced sample points are examined.
pub fn profile_residual(result: &HeteroclinicResult, max_points: usize) -> Result<f64> {
    let traj = &result.trajectory;
    let (lo, hi) = traj.span_bounds();
    let h = RESIDUAL_STENCIL;
    let a = result.params.a;
    let d2h_at = |t: f64| -> Result<Option<(f64, PhysState)>> {
        let c = CompactState::from_array(&traj.dense_eval(t)?);
        if on_slice(c.theta) {
            return Ok(None);
        }
        let xi = c.theta.tan();
        Ok(Some((xi, phys_at_xi(xi, &c))))
    };
    let stride = (traj.samples.len() / max_points.max(1)).max(1);
    let mut worst: f64 = 0.0;
    for (t, _) in traj.samples.iter().step_by(stride) {
        let t = *t;
        if t - 2.0 * h < lo || t + 2.0 * h > hi {
            continue;
        }
        if result.junctions.iter().any(|j| (t - j).abs() <= 2.0 * h) {
            continue;
        }
        let vals: Option<Vec<(f64, PhysState)>> = [t - 2.0 * h, t - h, t, t + h, t + 2.0 * h]
            .iter()
            .map(|&s| d2h_at(s))
            .collect::<Result<_>>()?;
        let Some(v) = vals else { continue };
        let d = (v[0].1.d2h - 8.0 * v[1].1.d2h + 8.0 * v[3].1.d2h - v[4].1.d2h) / (12.0 * h);
        let (xi, p) = v[2];
        let h3 = (xi * xi + 1.0).powf(4.0 / 9.0) * d;
        let inv = 1.0 / p.h.powi(3);
        let r = (h3 + xi * xi + a - inv).abs() / (inv + xi * xi + a.abs());
        worst = worst.max(r);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_seed_is_critical_point() {
        let s = seed_state(
            &ManifoldSeed {
                nu: 0.0,
                sigma: 0.0,
            },
            1e-2,
        )
        .unwrap();
        assert_eq!(s.to_array(), P_PLUS);
    }

    #[test]
    fn box_is_enforced() {
        let r = seed_state(
            &ManifoldSeed {
                nu: 0.02,
                sigma: 0.0,
            },
            1e-2,
        );
        assert!(matches!(r, Err(Error::BoxViolation { .. })));
    }

    #[test]
    fn banding() {
        use Verdict::*;
        assert!(is_banded(&[Touchdown, Touchdown, BlowUp]));
        assert!(is_banded(&[Touchdown, Undetermined, BlowUp]));
        assert!(!is_banded(&[Touchdown, BlowUp, Touchdown]));
        assert!(!is_banded(&[Touchdown, Undetermined, Undetermined, BlowUp]));
        assert!(!is_banded(&[Undetermined, BlowUp]));
    }

    #[test]
    fn thresholds_switch_branch() {
        assert_eq!(growth_threshold(0.0, 0.0).1, GrowthBranch::Boundary);
        assert_eq!(growth_threshold(1.0, -2.0).1, GrowthBranch::Inner);
        assert_eq!(growth_threshold(3.0, -2.0).1, GrowthBranch::Outer);
        assert_eq!(growth_threshold(3.0, -2.0).0, 64.0);
    }
}

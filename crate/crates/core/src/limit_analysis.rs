//! The limit system on the invariant slices: eigen-structure of the critical
//! point `P_s = (1, 0, 0)`, the Lyapunov functional, the one-dimensional
//! stable manifold and its blow-up / touchdown dichotomy with the two
//! asymptotic laws `Φ ~ −τ³/6` and `Φ ~ (64/15)^{1/4} (τ − τ*)^{3/4}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{
    integrate, Direction, Event, EventKind, IntegratorConfig, Status, Trajectory,
};
use crate::linalg;
use crate::systems::{jacobian_limit, LimitField, LimitState};

/// Leading constant of the touchdown law, `(64/15)^{1/4}`.
pub fn touchdown_constant() -> f64 {
    (64.0f64 / 15.0).powf(0.25)
}

/// Eigen-structure of the limit system at `P_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    /// The real (stable) eigenvalue.
    pub lambda1: f64,
    /// Its eigenvector, normalised to third component 1.
    pub v1: [f64; 3],
    /// The complex eigenvalue with positive imaginary part.
    pub lambda2: Complex64,
    /// Real part of the complex eigenvector normalised to third component 1.
    pub v2: [f64; 3],
    /// Minus the imaginary part of the same eigenvector; `v2 − i v3` is an
    /// eigenvector for `lambda2`.
    pub v3: [f64; 3],
}

impl EigenData {
    /// Complex eigenvector for `lambda2`.
    pub fn complex_vector(&self) -> [Complex64; 3] {
        std::array::from_fn(|i| Complex64::new(self.v2[i], -self.v3[i]))
    }
}

/// Eigen-data at `P_s` computed from the Jacobian of the limit system.
pub fn eigen_ps() -> EigenData {
    let j = jacobian_limit(&LimitState::CRITICAL);
    let mut ev = linalg::eigenvalues3(&j);
    ev.sort_by(|a, b| a.im.abs().partial_cmp(&b.im.abs()).unwrap());
    let lambda1 = ev[0].re;
    let lambda2 = if ev[1].im > 0.0 { ev[1] } else { ev[2] };

    let e1 = linalg::eigenvector3(&j, Complex64::new(lambda1, 0.0));
    let v1 = std::array::from_fn(|i| (e1[i] / e1[2]).re);
    let e2 = linalg::eigenvector3(&j, lambda2);
    let e2: [Complex64; 3] = std::array::from_fn(|i| e2[i] / e2[2]);
    EigenData {
        lambda1,
        v1,
        lambda2,
        v2: std::array::from_fn(|i| e2[i].re),
        v3: std::array::from_fn(|i| -e2[i].im),
    }
}

/// `‖J v − λ v‖` for the three eigenpairs (real, complex, conjugate).
pub fn eigen_residuals(e: &EigenData) -> [f64; 3] {
    let j = jacobian_limit(&LimitState::CRITICAL);
    let v1: [Complex64; 3] = std::array::from_fn(|i| Complex64::new(e.v1[i], 0.0));
    let v2 = e.complex_vector();
    let v3: [Complex64; 3] = std::array::from_fn(|i| v2[i].conj());
    [
        linalg::eigen_residual3(&j, Complex64::new(e.lambda1, 0.0), &v1),
        linalg::eigen_residual3(&j, e.lambda2, &v2),
        linalg::eigen_residual3(&j, e.lambda2.conj(), &v3),
    ]
}

/// Lyapunov functional `E = ΨW + 1/(2Φ²) + Φ`, with `dE/dτ = Ψ²`.
pub fn lyapunov(s: &LimitState) -> f64 {
    s.psi * s.w + 0.5 / (s.phi * s.phi) + s.phi
}

/// Largest decrease rate of `E` between consecutive samples of a limit
/// trajectory, in units of `E` per unit `τ`, after discounting
/// floating-point rounding of `E` itself. Zero means `E` is monotone.
pub fn lyapunov_violation(traj: &Trajectory<3>) -> f64 {
    let mut pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|(t, y)| (*t, lyapunov(&LimitState::from_array(y))))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut worst: f64 = 0.0;
    for w in pts.windows(2) {
        let (t0, e0) = w[0];
        let (t1, e1) = w[1];
        let dt = t1 - t0;
        if dt <= 0.0 {
            continue;
        }
        let drop = e0 - e1 - 8.0 * f64::EPSILON * e0.abs().max(e1.abs());
        if drop > 0.0 {
            worst = worst.max(drop / dt.max(1.0));
        }
    }
    worst
}

/// Which branch of the stable manifold: `Plus` has `Φ > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StableSide {
    Plus,
    Minus,
}

impl StableSide {
    fn sign(self) -> f64 {
        match self {
            StableSide::Plus => 1.0,
            StableSide::Minus => -1.0,
        }
    }
}

/// Thresholds and tolerances for limit-system runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitRunConfig {
    /// Touchdown threshold `ε_touch`.
    pub eps_touch: f64,
    /// Blow-up threshold `Φ_max`.
    pub phi_max: f64,
    pub integrator: IntegratorConfig,
}

impl Default for LimitRunConfig {
    fn default() -> Self {
        Self {
            eps_touch: 1e-4,
            phi_max: 1e6,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Outcome of a backward run along the stable manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitVerdict {
    BlowUp,
    Touchdown,
}

/// Verdict plus the fitted asymptotic constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyResult {
    pub side: StableSide,
    pub verdict: LimitVerdict,
    pub tau_star: Option<f64>,
    pub fit_constant: f64,
    pub fit_residual: f64,
}

/// Terminal touchdown and blow-up events on `Φ` (state index 0).
pub fn phi_events<'a, const N: usize>(eps_touch: f64, phi_max: f64) -> Vec<Event<'a, N>> {
    vec![
        Event::new(
            EventKind::Touchdown,
            Direction::Falling,
            true,
            move |_, y: &[f64; N]| y[0] - eps_touch,
        ),
        Event::new(
            EventKind::BlowUp,
            Direction::Rising,
            true,
            move |_, y: &[f64; N]| y[0] - phi_max,
        ),
    ]
}

/// Seed `P_s ± offset · v₁`.
pub fn stable_seed(side: StableSide, offset: f64) -> [f64; 3] {
    let e = eigen_ps();
    std::array::from_fn(|i| LimitState::CRITICAL.to_array()[i] + side.sign() * offset * e.v1[i])
}

/// Integrates backward in `τ` from the linear stable-manifold seed.
pub fn stable_manifold_trajectory(
    side: StableSide,
    offset: f64,
    horizon: f64,
    cfg: &LimitRunConfig,
) -> Result<Trajectory<3>> {
    if !(offset > 0.0 && offset <= 1e-4) {
        return Err(Error::Domain(format!(
            "offset must lie in (0, 1e-4], got {offset}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let events = phi_events::<3>(cfg.eps_touch, cfg.phi_max);
    integrate(
        &LimitField,
        stable_seed(side, offset),
        (0.0, -horizon),
        &events,
        &cfg.integrator,
    )
}

/// Distance to `P_s` after integrating the seed forward for `time`.
pub fn forward_reconvergence_distance(
    side: StableSide,
    offset: f64,
    time: f64,
    cfg: &LimitRunConfig,
) -> Result<f64> {
    let tr = integrate(
        &LimitField,
        stable_seed(side, offset),
        (0.0, time),
        &[],
        &cfg.integrator,
    )?;
    let y = tr.last_state();
    Ok(((y[0] - 1.0).powi(2) + y[1].powi(2) + y[2].powi(2)).sqrt())
}

/// Verdict of a backward limit run from its terminal event.
pub fn limit_verdict(traj: &Trajectory<3>) -> Option<LimitVerdict> {
    match traj.terminal_event.map(|e| e.kind) {
        Some(EventKind::Touchdown) => Some(LimitVerdict::Touchdown),
        Some(EventKind::BlowUp) => Some(LimitVerdict::BlowUp),
        _ if traj.status == Status::StepFailure => Some(LimitVerdict::BlowUp),
        _ => {
            let y = traj.last_state();
            if y[0] > 1.0 && y[1] < 0.0 && y[2] > 0.0 && traj.t_end() < traj.t_start() {
                Some(LimitVerdict::BlowUp)
            } else {
                None
            }
        }
    }
}

/// Runs the stable manifold backward and fits the matching asymptotic law.
pub fn dichotomy(
    side: StableSide,
    offset: f64,
    horizon: f64,
    cfg: &LimitRunConfig,
) -> Result<DichotomyResult> {
    let tr = stable_manifold_trajectory(side, offset, horizon, cfg)?;
    match limit_verdict(&tr) {
        Some(LimitVerdict::Touchdown) => {
            let (c, ts, res) = fit_touchdown_constant(&tr)?;
            Ok(DichotomyResult {
                side,
                verdict: LimitVerdict::Touchdown,
                tau_star: Some(ts),
                fit_constant: c,
                fit_residual: res,
            })
        }
        Some(LimitVerdict::BlowUp) => {
            let (c, res) = fit_blowup_constant(&tr)?;
            Ok(DichotomyResult {
                side,
                verdict: LimitVerdict::BlowUp,
                tau_star: None,
                fit_constant: c,
                fit_residual: res,
            })
        }
        None => Err(Error::FitFailure(
            "trajectory ended without a verdict".into(),
        )),
    }
}

/// Fits `Φ ≈ c·(−τ³/6) + b₂τ² + b₁τ + b₀` over `|τ| ∈ [|τ_end|/2, |τ_end|]`
/// of a backward trajectory; returns `(c, relative rms residual)`.
pub fn fit_blowup_constant(traj: &Trajectory<3>) -> Result<(f64, f64)> {
    let t_end = traj.t_end();
    if t_end > traj.t_start() || t_end.abs() < 30.0 {
        return Err(Error::InsufficientSpan(format!(
            "blow-up fit needs a backward run reaching |tau| >= 30, got tau_end = {t_end}"
        )));
    }
    let lo = 0.5 * t_end;
    let n = 400;
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = lo + (t_end - lo) * i as f64 / (n - 1) as f64;
            Ok((t, traj.dense_eval(t)?[0]))
        })
        .collect::<Result<_>>()?;
    fit_blowup_samples(&samples)
}

/// Blow-up fit on raw `(τ, Φ)` samples; the polynomial lower-order terms
/// make the constant independent of the origin of `τ`.
pub fn fit_blowup_samples(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            found: samples.len(),
        });
    }
    let scale = samples
        .iter()
        .map(|s| s.0.abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|(t, _)| {
            let x = t / scale;
            vec![-x * x * x / 6.0, x * x, x, 1.0]
        })
        .collect();
    let b: Vec<f64> = samples.iter().map(|s| s.1 / scale.powi(3)).collect();
    let coef = linalg::least_squares(&rows, &b)?;
    let mut ss = 0.0;
    let mut norm = 0.0;
    for (row, bi) in rows.iter().zip(&b) {
        let pred: f64 = row.iter().zip(&coef).map(|(r, c)| r * c).sum();
        ss += (pred - bi).powi(2);
        norm += bi * bi;
    }
    Ok((coef[0], (ss / norm.max(f64::MIN_POSITIVE)).sqrt()))
}

/// Fits `Φ ≈ c (τ − τ*)^{3/4}` over the window `Φ ∈ [ε, 10ε]` at the end of a
/// touchdown trajectory, `ε` being the terminal value of `Φ`; returns
/// `(c, τ*, relative rms residual)`.
pub fn fit_touchdown_constant(traj: &Trajectory<3>) -> Result<(f64, f64, f64)> {
    let ev = traj
        .terminal_event
        .filter(|e| e.kind == EventKind::Touchdown)
        .ok_or_else(|| Error::InsufficientSpan("trajectory has no touchdown event".into()))?;
    let eps = ev.state[0];
    let top = 10.0 * eps;
    // Last sample (in integration order) above the window top.
    let idx = traj
        .samples
        .iter()
        .rposition(|(_, y)| y[0] >= top)
        .ok_or_else(|| Error::InsufficientSpan("touchdown window not covered".into()))?;
    let (mut a, mut b) = (traj.samples[idx].0, ev.t);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if traj.dense_eval(m)?[0] >= top {
            a = m;
        } else {
            b = m;
        }
        if (a - b).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    let n = 200;
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = a + (ev.t - a) * i as f64 / (n - 1) as f64;
            Ok((t, traj.dense_eval(t)?[0]))
        })
        .collect::<Result<_>>()?;
    fit_touchdown_samples(&samples)
}

/// Touchdown fit on raw `(τ, Φ)` samples by Gauss–Newton on `(c, τ*)`,
/// started from the linear fit of `Φ^{4/3}` against `τ`.
pub fn fit_touchdown_samples(samples: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if samples.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            found: samples.len(),
        });
    }
    let rows: Vec<Vec<f64>> = samples.iter().map(|(t, _)| vec![*t, 1.0]).collect();
    let b: Vec<f64> = samples.iter().map(|(_, p)| p.powf(4.0 / 3.0)).collect();
    let lin = linalg::least_squares(&rows, &b)?;
    let slope = lin[0];
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::FitFailure("degenerate touchdown window".into()));
    }
    let orient = slope.signum();
    let mut c = slope.abs().powf(0.75);
    let mut ts = -lin[1] / slope;
    let model = |c: f64, ts: f64, t: f64| c * (orient * (t - ts)).max(0.0).powf(0.75);
    for _ in 0..50 {
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for (t, p) in samples {
            let s = (orient * (t - ts)).max(1e-300);
            let f = c * s.powf(0.75);
            let r = (f - p) / p;
            let dc = s.powf(0.75) / p;
            let dts = -orient * 0.75 * c * s.powf(-0.25) / p;
            let g = [dc, dts];
            for i in 0..2 {
                jtr[i] += g[i] * r;
                for j in 0..2 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        let Some(delta) = linalg::solve2(jtj, jtr) else {
            break;
        };
        c -= delta[0];
        ts -= delta[1];
        if delta[0].abs() < 1e-15 * c.abs() && delta[1].abs() < 1e-15 * (1.0 + ts.abs()) {
            break;
        }
    }
    let ss: f64 = samples
        .iter()
        .map(|(t, p)| ((model(c, ts, *t) - p) / p).powi(2))
        .sum();
    Ok((c, ts, (ss / samples.len() as f64).sqrt()))
}

//! Diagnostics of near-critical trajectories: sequences of local maxima and
//! minima of `Φ`, their rescaling `(ξₙ*, Mₙ, βₙ, δₙ)`, comparison of the
//! rescaled profile with the polynomial family, and the iteration law
//! `Φ(τₙ₋₁*) ≃ C Φ(τₙ*)^{10}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::linalg;
use crate::polyfamily::{double_zero, eval_pbar, zeta0_root, PolyParams};
use crate::transforms::{on_slice, phys_at_xi, CompactState};

/// Local extrema of `Φ`, each list ordered by decreasing `τ`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtremaSequence {
    /// `(τ*, Φ(τ*))` of the maxima.
    pub maxima: Vec<(f64, f64)>,
    /// `(τ_min, Φ(τ_min))` of the minima.
    pub minima: Vec<(f64, f64)>,
}

impl ExtremaSequence {
    /// Maxima with `Φ ≥ threshold`.
    pub fn deep_maxima(&self, threshold: f64) -> Vec<(f64, f64)> {
        self.maxima
            .iter()
            .copied()
            .filter(|m| m.1 >= threshold)
            .collect()
    }

    /// Minima with `Φ ≤ 1/threshold`.
    pub fn deep_minima(&self, threshold: f64) -> Vec<(f64, f64)> {
        self.minima
            .iter()
            .copied()
            .filter(|m| m.1 <= 1.0 / threshold)
            .collect()
    }

    /// Whether exactly one minimum lies between consecutive maxima.
    pub fn interleaved(&self) -> bool {
        self.maxima.windows(2).all(|w| {
            self.minima
                .iter()
                .filter(|m| m.0 < w[0].0 && m.0 > w[1].0)
                .count()
                == 1
        })
    }
}

/// Default relative prominence below which extrema pairs are discarded.
pub const DEFAULT_PROMINENCE: f64 = 1e-3;

/// Default threshold on `Φ` for a maximum to count as deep.
pub const DEEP_THRESHOLD: f64 = 1e2;

#[derive(Clone, Copy)]
struct Extremum {
    tau: f64,
    phi: f64,
    is_max: bool,
}

/// Locates the local extrema of `Φ` (state index 0) through sign changes of
/// `W = dΦ/dτ` (state index 1), refined by bisection on the dense output.
///
/// Adjacent max/min pairs whose relative difference is below
/// `min_prominence` are removed, smallest first.
pub fn extract_extrema<const N: usize>(
    traj: &Trajectory<N>,
    min_prominence: f64,
) -> ExtremaSequence {
    assert!(N >= 2, "extrema extraction needs (phi, w) in the state");
    let mut pts: Vec<(f64, [f64; N])> = traj.samples.clone();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pts.dedup_by(|a, b| a.0 == b.0);
    let mut ext = Vec::new();
    for w in pts.windows(2) {
        let (ta, ya) = w[0];
        let (tb, yb) = w[1];
        let (wa, wb) = (ya[1], yb[1]);
        let is_max = wa > 0.0 && wb <= 0.0;
        let is_min = wa < 0.0 && wb >= 0.0;
        if !(is_max || is_min) {
            continue;
        }
        let (mut a, mut b) = (ta, tb);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            let wm = traj.dense_eval(m).map(|y| y[1]).unwrap_or(0.0);
            if (wm > 0.0) == (wa > 0.0) && wm != 0.0 {
                a = m;
            } else {
                b = m;
            }
            if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
                break;
            }
        }
        let tau = 0.5 * (a + b);
        let phi = traj.dense_eval(tau).map(|y| y[0]).unwrap_or(ya[0]);
        ext.push(Extremum { tau, phi, is_max });
    }
    // Prominence filter on the alternating sequence.
    loop {
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..ext.len().saturating_sub(1) {
            let (p, q) = (ext[i].phi, ext[i + 1].phi);
            let rel = (p - q).abs() / p.abs().max(q.abs()).max(f64::MIN_POSITIVE);
            if rel < min_prominence && worst.map_or(true, |w| rel < w.1) {
                worst = Some((i, rel));
            }
        }
        match worst {
            Some((i, _)) => {
                ext.drain(i..i + 2);
            }
            None => break,
        }
    }
    let mut seq = ExtremaSequence::default();
    for e in ext.iter().rev() {
        if e.is_max {
            seq.maxima.push((e.tau, e.phi));
        } else {
            seq.minima.push((e.tau, e.phi));
        }
    }
    seq
}

/// Rescaled data of a maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaledMax {
    pub tau_star: f64,
    pub phi_star: f64,
    pub xi_star: f64,
    /// `Mₙ = Φ*/|ξ*|^{17/3}`.
    pub m_n: f64,
    /// `βₙ = (ξ*²+1)^{8/9} Ψ(τ*)/|ξ*|^{11/3}`.
    pub beta_n: f64,
    /// `δₙ = 1/(|ξ*|^{17} Mₙ³)`.
    pub delta_n: f64,
}

/// Rescales the maximum `seq.maxima[max_index]` of a compact trajectory.
pub fn rescale_max(
    traj: &Trajectory<4>,
    seq: &ExtremaSequence,
    max_index: usize,
) -> Result<RescaledMax> {
    let &(tau_star, _) = seq.maxima.get(max_index).ok_or_else(|| {
        Error::Domain(format!(
            "maximum {max_index} does not exist ({} found)",
            seq.maxima.len()
        ))
    })?;
    let y = traj.dense_eval(tau_star)?;
    let s = CompactState::from_array(&y);
    if on_slice(s.theta) {
        return Err(Error::Domain("maximum lies on an invariant slice".into()));
    }
    let xi = s.theta.tan();
    let ax = xi.abs();
    let m_n = s.phi / ax.powf(17.0 / 3.0);
    let beta_n = (xi * xi + 1.0).powf(8.0 / 9.0) / ax.powf(11.0 / 3.0) * s.psi;
    let delta_n = 1.0 / (ax.powi(17) * m_n * m_n * m_n);
    Ok(RescaledMax {
        tau_star,
        phi_star: s.phi,
        xi_star: xi,
        m_n,
        beta_n,
        delta_n,
    })
}

/// Deviation of a rescaled profile from the polynomial family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyComparison {
    /// Positive root `ζ₀(Mₙ, βₙ)` of `P̄`.
    pub zeta0: f64,
    /// Right end of the window, `0.9 ζ₀`.
    pub zeta_end: f64,
    /// `sup |𝓗 − P̄| / |P̄|` over the window.
    pub max_rel_dev: f64,
    /// `sup |𝓗' − P̄'| / sup |P̄'|`.
    pub d1_dev: f64,
    /// `sup |𝓗'' − P̄''| / sup |P̄''|`.
    pub d2_dev: f64,
    /// `β*(Mₙ)`.
    pub beta_star: f64,
    /// `|βₙ − β*(Mₙ)| / |β*(Mₙ)|`.
    pub beta_rel_gap: f64,
    pub samples: usize,
}

/// Relative margin short of `ζ₀` at which the comparison window stops.
pub const WINDOW_MARGIN: f64 = 0.1;

/// Compares `𝓗ₙ(ζ) = H(ξ)/(|ξ*|⁵ Mₙ)`, `ζ = −(ξ/ξ* − 1)/Mₙ^{1/3}`, with
/// `P̄(ζ; Mₙ, βₙ)` on `ζ ∈ [0, 0.9 ζ₀]`.
pub fn compare_to_polynomial(traj: &Trajectory<4>, r: &RescaledMax) -> Result<PolyComparison> {
    let p = PolyParams::new(r.m_n, r.beta_n);
    let zeta0 = zeta0_root(&p)?;
    let zeta_end = (1.0 - WINDOW_MARGIN) * zeta0;
    let c = r.m_n.cbrt();
    let scale = r.xi_star.abs().powi(5) * r.m_n;

    // θ is strictly increasing in τ, so every ξ maps to a unique τ.
    let mut pts: Vec<(f64, f64)> = traj.samples.iter().map(|(t, y)| (*t, y[3])).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (th_lo, th_hi) = (pts[0].1, pts[pts.len() - 1].1);
    let tau_of_theta = |th: f64| -> Result<f64> {
        if th < th_lo || th > th_hi {
            return Err(Error::WindowEmpty(format!(
                "theta = {th} outside the covered range [{th_lo}, {th_hi}]"
            )));
        }
        let k = pts.partition_point(|q| q.1 < th).clamp(1, pts.len() - 1);
        let (mut a, mut b) = (pts[k - 1].0, pts[k].0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if traj.dense_eval(m)?[3] < th {
                a = m;
            } else {
                b = m;
            }
            if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
                break;
            }
        }
        Ok(0.5 * (a + b))
    };

    let n = 200;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let zeta = zeta_end * i as f64 / (n - 1) as f64;
        let xi = r.xi_star * (1.0 - c * zeta);
        let tau = tau_of_theta(xi.atan())?;
        let s = CompactState::from_array(&traj.dense_eval(tau)?);
        let ph = phys_at_xi(xi, &s);
        let hh = ph.h / scale;
        let hh1 = ph.dh * (-r.xi_star * c) / scale;
        let hh2 = ph.d2h * (r.xi_star * r.xi_star * c * c) / scale;
        rows.push((hh, hh1, hh2, eval_pbar(zeta, &p)));
    }
    let sup1 = rows
        .iter()
        .map(|r| r.3.d1.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let sup2 = rows
        .iter()
        .map(|r| r.3.d2.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let max_rel_dev = rows
        .iter()
        .map(|r| ((r.0 - r.3.value) / r.3.value).abs())
        .fold(0.0, f64::max);
    let d1_dev = rows
        .iter()
        .map(|r| (r.1 - r.3.d1).abs())
        .fold(0.0, f64::max)
        / sup1;
    let d2_dev = rows
        .iter()
        .map(|r| (r.2 - r.3.d2).abs())
        .fold(0.0, f64::max)
        / sup2;
    let beta_star = double_zero(r.m_n)?.beta_star;
    Ok(PolyComparison {
        zeta0,
        zeta_end,
        max_rel_dev,
        d1_dev,
        d2_dev,
        beta_star,
        beta_rel_gap: ((r.beta_n - beta_star) / beta_star).abs(),
        samples: n,
    })
}

/// Log-log fit of consecutive deep extrema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationFit {
    /// Slope of `ln Φ(τₙ₋₁*)` against `ln Φ(τₙ*)` over deep maxima.
    pub exponent_max: f64,
    /// Same slope for deep minima, when at least two pairs exist.
    pub exponent_min: Option<f64>,
    /// Number of maxima pairs used.
    pub pairs_used: usize,
}

fn loglog_slope(seq: &[(f64, f64)]) -> Option<(f64, usize)> {
    // Entries are ordered by decreasing τ: entry k is the later extremum
    // (index n−1) and entry k+1 the earlier one (index n).
    let pairs: Vec<(f64, f64)> = seq.windows(2).map(|w| (w[1].1.ln(), w[0].1.ln())).collect();
    if pairs.len() < 2 {
        return None;
    }
    let rows: Vec<Vec<f64>> = pairs.iter().map(|p| vec![p.0, 1.0]).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    linalg::least_squares(&rows, &b)
        .ok()
        .map(|c| (c[0], pairs.len()))
}

/// Fits the exponent of `Φ(τₙ₋₁*) ≃ C Φ(τₙ*)^{p}` over maxima with
/// `Φ ≥ deep_threshold`, and the analogous minima relation over minima with
/// `Φ ≤ 1/deep_threshold`.
pub fn iteration_exponent(seq: &ExtremaSequence, deep_threshold: f64) -> Result<IterationFit> {
    let maxima = seq.deep_maxima(deep_threshold);
    let (exponent_max, pairs_used) = loglog_slope(&maxima).ok_or(Error::InsufficientData {
        needed: 2,
        found: maxima.len().saturating_sub(1),
    })?;
    let exponent_min = loglog_slope(&seq.deep_minima(deep_threshold)).map(|s| s.0);
    Ok(IterationFit {
        exponent_max,
        exponent_min,
        pairs_used,
    })
}

/// Ordering of consecutive deep extrema read toward decreasing `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    /// Each deep maximum is smaller than the next later one.
    pub maxima_decrease_backward: bool,
    /// Each deep minimum is larger than the next later one.
    pub minima_increase_backward: bool,
}

/// Checks `Φ(τₙ₋₁*) > Φ(τₙ*)` and `Φ(τₙ₋₁^min) < Φ(τₙ^min)` on deep extrema.
pub fn check_monotonicity(seq: &ExtremaSequence, deep_threshold: f64) -> MonotonicityCheck {
    let mx = seq.deep_maxima(deep_threshold);
    let mn = seq.deep_minima(deep_threshold);
    MonotonicityCheck {
        maxima_decrease_backward: mx.windows(2).all(|w| w[0].1 > w[1].1),
        minima_increase_backward: mn.windows(2).all(|w| w[0].1 < w[1].1),
    }
}

/// Everything the diagnostics compute for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub sequence: ExtremaSequence,
    pub interleaved: bool,
    /// Rescaled data of every maximum, in the order of `sequence.maxima`.
    pub rescaled: Vec<RescaledMax>,
    /// Polynomial comparison per maximum; `None` when it could not be made.
    pub comparisons: Vec<Option<PolyComparison>>,
    pub deep_maxima: usize,
    pub iteration: Option<IterationFit>,
    pub monotonicity: MonotonicityCheck,
    pub warnings: Vec<String>,
}

/// Runs extraction, rescaling, comparison, the iteration fit and the
/// monotonicity check on a compact trajectory.
pub fn analyse(
    traj: &Trajectory<4>,
    min_prominence: f64,
    deep_threshold: f64,
) -> OscillationReport {
    let sequence = extract_extrema(traj, min_prominence);
    let mut warnings = Vec::new();
    let mut rescaled = Vec::new();
    let mut comparisons = Vec::new();
    for i in 0..sequence.maxima.len() {
        match rescale_max(traj, &sequence, i) {
            Ok(r) => {
                let c = compare_to_polynomial(traj, &r);
                if let Err(e) = &c {
                    warnings.push(format!("maximum {i}: comparison skipped: {e}"));
                }
                comparisons.push(c.ok());
                rescaled.push(r);
            }
            Err(e) => warnings.push(format!("maximum {i}: rescaling skipped: {e}")),
        }
    }
    let deep_maxima = sequence.deep_maxima(deep_threshold).len();
    let iteration = match iteration_exponent(&sequence, deep_threshold) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("iteration exponent not fitted: {e}"));
            None
        }
    };
    OscillationReport {
        interleaved: sequence.interleaved(),
        monotonicity: check_monotonicity(&sequence, deep_threshold),
        sequence,
        rescaled,
        comparisons,
        deep_maxima,
        iteration,
        warnings,
    }
}

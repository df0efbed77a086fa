//! The quintic family
//! `P(Z; M, β) = (Z−1)³(Z²+3Z+6)/60 + (M/9)(5Z²−16Z+20) + (β/2)(Z−1)²`,
//! its double-zero locus `(Z*(M), β*(M))`, the root `Z₀(M, β) < 1`, and the
//! rescaled family `P̄(ζ) = P(Z)/M` with `ζ = −(Z−1)/M^{1/3}`.
//!
//! Internally everything is evaluated in the shifted variable `x = Z − 1`,
//! which keeps the small-`M` regime free of cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates `(M, β)` of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyParams {
    /// `M = P(1; M, β) > 0`.
    pub m: f64,
    pub beta: f64,
}

impl PolyParams {
    pub fn new(m: f64, beta: f64) -> Self {
        Self { m, beta }
    }
}

/// Value and first three derivatives of a polynomial at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Double zero of `P` on `Z > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleZeroData {
    pub z_star: f64,
    pub beta_star: f64,
    /// `d²P/dZ²` at the double zero.
    pub second_deriv_at_star: f64,
    /// `|P(Z*)|` relative to the magnitude of its terms.
    pub residual_value: f64,
    /// `|P'(Z*)|` relative to the magnitude of its terms.
    pub residual_slope: f64,
}

/// Number of zeros of `P` on `Z ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RootCount {
    ZeroRoots,
    /// Two simple roots, in increasing order.
    TwoRoots(f64, f64),
    DoubleRoot(f64),
}

/// Markers of the rescaled polynomial at `β = β*(M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaMarkers {
    /// Double zero `ζ* < 0`.
    pub zeta_star: f64,
    /// Unique positive root `ζ₀`.
    pub zeta0: f64,
    /// `d²P̄/dζ²` at `ζ*`.
    pub second_deriv_at_zeta_star: f64,
    /// `dP̄/dζ` at `ζ₀`.
    pub slope_at_zeta0: f64,
}

fn check_m(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "M must be positive and finite, got {m}"
        )))
    }
}

/// `P` and derivatives at `x = Z − 1`.
fn eval_x(x: f64, p: &PolyParams) -> PolyValue {
    let (m, b) = (p.m, p.beta);
    PolyValue {
        value: x * x * x * (x * x + 5.0 * x + 10.0) / 60.0
            + (m / 9.0) * (5.0 * x * x - 6.0 * x + 9.0)
            + 0.5 * b * x * x,
        d1: x * x * (x * x + 4.0 * x + 6.0) / 12.0 + (m / 9.0) * (10.0 * x - 6.0) + b * x,
        d2: x * (x * x + 3.0 * x + 3.0) / 3.0 + 10.0 * m / 9.0 + b,
        d3: (1.0 + x) * (1.0 + x),
    }
}

/// Sum of term magnitudes of `P(x)`, the scale for relative residuals.
fn value_scale(x: f64, p: &PolyParams) -> f64 {
    (x * x * x * (x * x + 5.0 * x + 10.0) / 60.0).abs()
        + (p.m / 9.0 * (5.0 * x * x - 6.0 * x + 9.0)).abs()
        + (0.5 * p.beta * x * x).abs()
}

fn slope_scale(x: f64, p: &PolyParams) -> f64 {
    (x * x * (x * x + 4.0 * x + 6.0) / 12.0).abs()
        + (p.m / 9.0 * (10.0 * x - 6.0)).abs()
        + (p.beta * x).abs()
}

/// `P(Z; M, β)` and its first three derivatives in `Z`.
pub fn eval_p(z: f64, p: &PolyParams) -> PolyValue {
    eval_x(z - 1.0, p)
}

/// Bisection on a bracket with a sign change, then two Newton polishing steps.
fn bisect_polish(f: impl Fn(f64) -> (f64, f64), mut a: f64, mut b: f64) -> f64 {
    let fa = f(a).0;
    for _ in 0..300 {
        let m = 0.5 * (a + b);
        let fm = f(m).0;
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
        if (b - a).abs() <= 1e-12 * (1e-3 + a.abs().max(b.abs())) * 1e-3 {
            break;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..2 {
        let (v, d) = f(x);
        if d != 0.0 {
            let xn = x - v / d;
            if xn.is_finite() && (xn - x).abs() <= (b - a).abs().max(1e-300) * 4.0 {
                x = xn;
            }
        }
    }
    x
}

/// Double zero `Z*(M) ∈ (1, 4)` and `β*(M) < 0`.
///
/// `Z*` solves `(Z−1)³(3Z²+4Z+3) = 40(4−Z)M`; `β*` then cancels `P'(Z*)`.
pub fn double_zero(m: f64) -> Result<DoubleZeroData> {
    check_m(m)?;
    let f = |x: f64| {
        (
            x * x * x * (3.0 * x * x + 10.0 * x + 10.0) - 40.0 * (3.0 - x) * m,
            x * x * (15.0 * x * x + 40.0 * x + 30.0) + 40.0 * m,
        )
    };
    let x = bisect_polish(f, 0.0, 3.0);
    let beta = -x * (x * x + 4.0 * x + 6.0) / 12.0 - (m / 9.0) * (10.0 * x - 6.0) / x;
    let p = PolyParams::new(m, beta);
    let v = eval_x(x, &p);
    Ok(DoubleZeroData {
        z_star: 1.0 + x,
        beta_star: beta,
        second_deriv_at_star: v.d2,
        residual_value: v.value.abs() / value_scale(x, &p),
        residual_slope: v.d1.abs() / slope_scale(x, &p),
    })
}

/// Residual `(Z−1)³(3Z²+4Z+3) − 40(4−Z)M` whose zero defines `Z*`.
pub fn double_zero_residual(z: f64, m: f64) -> f64 {
    let x = z - 1.0;
    x * x * x * (3.0 * x * x + 10.0 * x + 10.0) - 40.0 * (3.0 - x) * m
}

/// Largest root `Z₀ < 1` of `P` and the slope `dP/dZ` there.
pub fn z0_root(p: &PolyParams) -> Result<(f64, f64)> {
    check_m(p.m)?;
    let (x, slope) = x0_root(p)?;
    Ok((1.0 + x, slope))
}

fn x0_root(p: &PolyParams) -> Result<(f64, f64)> {
    let f = |x: f64| {
        let v = eval_x(x, p);
        (v.value, v.d1)
    };
    let mut hi = 0.0;
    let mut d = 1e-6 * p.m.cbrt().min(1.0);
    let mut found = false;
    for _ in 0..400 {
        if f(-d).0 < 0.0 {
            found = true;
            break;
        }
        hi = -d;
        d *= 2.0;
    }
    if !found {
        return Err(Error::IterationLimit {
            what: "z0_root bracket",
            iterations: 400,
        });
    }
    let x = bisect_polish(f, -d, hi);
    Ok((x, eval_x(x, p).d1))
}

/// Scan bound `Z_upper − 1 = 3 + (40M)^{1/3} + 10` for the right-hand roots.
fn x_upper(m: f64) -> f64 {
    3.0 + (40.0 * m).cbrt() + 10.0
}

/// Classifies the zeros of `P` on `Z ≥ 1`.
pub fn count_roots_right(p: &PolyParams) -> Result<RootCount> {
    check_m(p.m)?;
    let xu = x_upper(p.m);
    let n = 4000;
    let d1 = |x: f64| eval_x(x, p).d1;
    // Interior minimum of P: sign changes of P' from − to + (plus the
    // endpoints).
    let mut best_x = 0.0;
    let mut best_v = eval_x(0.0, p).value;
    let mut prev_x = 0.0;
    let mut prev_d = d1(0.0);
    for i in 1..=n {
        let x = xu * i as f64 / n as f64;
        let d = d1(x);
        if prev_d < 0.0 && d >= 0.0 {
            let xc = bisect_polish(|t| (d1(t), eval_x(t, p).d2), prev_x, x);
            let v = eval_x(xc, p).value;
            if v < best_v {
                best_v = v;
                best_x = xc;
            }
        }
        prev_x = x;
        prev_d = d;
    }
    let tol = 1e-9 * value_scale(best_x, p);
    if best_v.abs() <= tol {
        return Ok(RootCount::DoubleRoot(1.0 + best_x));
    }
    if best_v > 0.0 {
        return Ok(RootCount::ZeroRoots);
    }
    let f = |x: f64| {
        let v = eval_x(x, p);
        (v.value, v.d1)
    };
    let left = bisect_polish(f, 0.0, best_x);
    let right = bisect_polish(f, best_x, xu);
    Ok(RootCount::TwoRoots(1.0 + left, 1.0 + right))
}

/// `P̄(ζ; M, β)` and its first three derivatives, evaluated directly in `ζ`.
pub fn eval_pbar(zeta: f64, p: &PolyParams) -> PolyValue {
    let c = p.m.cbrt();
    let b = p.beta;
    let z = zeta;
    let z2 = z * z;
    PolyValue {
        value: -z2 * z * (c * c * z2 - 5.0 * c * z + 10.0) / 60.0
            + (5.0 / 9.0 * c * c * z2 + 2.0 / 3.0 * c * z + 1.0)
            + b * z2 / (2.0 * c),
        d1: -(c * c * z2 * z2 - 4.0 * c * z2 * z + 6.0 * z2) / 12.0
            + 10.0 / 9.0 * c * c * z
            + 2.0 / 3.0 * c
            + b * z / c,
        d2: -(c * c * z2 * z - 3.0 * c * z2 + 3.0 * z) / 3.0 + 10.0 / 9.0 * c * c + b / c,
        d3: -(1.0 - c * z) * (1.0 - c * z),
    }
}

/// Unique positive root `ζ₀(M, β)` of `P̄`.
pub fn zeta0_root(p: &PolyParams) -> Result<f64> {
    check_m(p.m)?;
    let (x0, _) = x0_root(p)?;
    Ok(-x0 / p.m.cbrt())
}

/// `ζ*`, `ζ₀` and the derivative values there at `β = β*(M)`.
pub fn zeta_markers(m: f64) -> Result<ZetaMarkers> {
    check_m(m)?;
    let dz = double_zero(m)?;
    let c = m.cbrt();
    let p = PolyParams::new(m, dz.beta_star);
    let xs = dz.z_star - 1.0;
    let (x0, _) = x0_root(&p)?;
    let zeta_star = -xs / c;
    let zeta0 = -x0 / c;
    Ok(ZetaMarkers {
        zeta_star,
        zeta0,
        second_deriv_at_zeta_star: eval_pbar(zeta_star, &p).d2,
        slope_at_zeta0: eval_pbar(zeta0, &p).d1,
    })
}

/// Smallest ratio `−P̄'(ζ₀) / max(1, M^{1/3})` over a set of `M` values at
/// `β = β*(M)`: the constant `c₀` of the slope bound.
pub fn fitted_slope_constant(ms: &[f64]) -> Result<f64> {
    let mut c0 = f64::INFINITY;
    for &m in ms {
        let z = zeta_markers(m)?;
        c0 = c0.min(-z.slope_at_zeta0 / m.cbrt().max(1.0));
    }
    Ok(c0)
}

//! Adaptive Dormand–Prince 5(4) integration with dense output and event
//! location.
//!
//! Integration may run backward (`t1 < t0`). Event directions are measured
//! along the order in which the integrator visits the independent variable,
//! so a guard that increases while integrating backward is `Rising`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::systems::VectorField;

/// Tolerances and step limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Absolute step-size floor; the effective floor is
    /// `max(min_step, 1e-13 · |t1 − t0|)`.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0,
            min_step: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<()> {
        let ok_tol = |x: f64| x > 0.0 && x < 1.0;
        if !ok_tol(self.rel_tol) || !ok_tol(self.abs_tol) {
            return Err(Error::Domain("tolerances must lie in (0, 1)".into()));
        }
        if !(self.min_step > 0.0 && self.min_step <= self.max_step) {
            return Err(Error::Domain("need 0 < min_step <= max_step".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Domain("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Same configuration with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// What an event stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Touchdown,
    BlowUp,
    ThetaReached,
    Custom,
}

/// Which sign changes of the guard trigger the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

/// A scalar guard whose zero crossings are located on the dense output.
pub struct Event<'a, const N: usize> {
    pub kind: EventKind,
    pub guard: Box<dyn Fn(f64, &[f64; N]) -> f64 + Sync + 'a>,
    pub direction: Direction,
    pub terminal: bool,
}

impl<'a, const N: usize> Event<'a, N> {
    pub fn new(
        kind: EventKind,
        direction: Direction,
        terminal: bool,
        guard: impl Fn(f64, &[f64; N]) -> f64 + Sync + 'a,
    ) -> Self {
        Self {
            kind,
            guard: Box::new(guard),
            direction,
            terminal,
        }
    }

    fn triggers(&self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self.direction {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Any => rising || falling,
        }
    }
}

/// A located event crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord<const N: usize> {
    pub kind: EventKind,
    /// Index of the event in the list passed to [`integrate`]; `usize::MAX`
    /// for stops requested by an observer.
    pub index: usize,
    pub t: f64,
    pub state: [f64; N],
}

/// How an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Completed,
    EventStopped,
    StepFailure,
}

/// Reply of a step observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

/// Work counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct DenseStep<const N: usize> {
    t0: f64,
    h: f64,
    /// End of the validity interval; `t0 + h` unless the step was cut.
    t1: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut y = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            y[i] = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
        }
        y
    }
}

/// Samples of an integrated solution together with its dense output.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    /// Accepted step endpoints in integration order, starting with the
    /// initial condition.
    pub samples: Vec<(f64, [f64; N])>,
    steps: Vec<DenseStep<N>>,
    /// The event (or observer stop) that ended the integration, if any.
    pub terminal_event: Option<EventRecord<N>>,
    /// Non-terminal event crossings in integration order.
    pub events: Vec<EventRecord<N>>,
    pub status: Status,
    pub stats: StepStats,
}

impl<const N: usize> Trajectory<N> {
    pub fn t_start(&self) -> f64 {
        self.samples[0].0
    }

    pub fn t_end(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    pub fn last_state(&self) -> [f64; N] {
        self.samples[self.samples.len() - 1].1
    }

    /// `+1` for forward integration, `−1` for backward.
    pub fn orientation(&self) -> f64 {
        if self.t_end() >= self.t_start() {
            1.0
        } else {
            -1.0
        }
    }

    /// Whether `t` lies within the covered span.
    pub fn covers(&self, t: f64) -> bool {
        let (lo, hi) = self.span_bounds();
        t >= lo && t <= hi
    }

    /// `(min t, max t)` of the covered span.
    pub fn span_bounds(&self) -> (f64, f64) {
        let (a, b) = (self.t_start(), self.t_end());
        (a.min(b), a.max(b))
    }

    /// Evaluates the dense output at `t`.
    pub fn dense_eval(&self, t: f64) -> Result<[f64; N]> {
        let (lo, hi) = self.span_bounds();
        if !(t >= lo && t <= hi) {
            return Err(Error::Range { t, lo, hi });
        }
        if self.steps.is_empty() {
            return Ok(self.samples[0].1);
        }
        if t == self.t_start() {
            return Ok(self.samples[0].1);
        }
        if t == self.t_end() {
            return Ok(self.last_state());
        }
        let dir = self.orientation();
        let k = self.steps.partition_point(|s| dir * s.t1 < dir * t);
        let k = k.min(self.steps.len() - 1);
        Ok(self.steps[k].eval(t))
    }

    /// Copy of the trajectory cut at `t_cut`, which must lie in the span.
    pub fn truncated(&self, t_cut: f64) -> Result<Self> {
        let state = self.dense_eval(t_cut)?;
        let dir = self.orientation();
        let mut samples: Vec<_> = self
            .samples
            .iter()
            .copied()
            .filter(|(t, _)| dir * *t < dir * t_cut)
            .collect();
        samples.push((t_cut, state));
        let mut steps: Vec<_> = self
            .steps
            .iter()
            .copied()
            .filter(|s| dir * s.t0 < dir * t_cut)
            .collect();
        if let Some(last) = steps.last_mut() {
            if dir * last.t1 > dir * t_cut {
                last.t1 = t_cut;
            }
        }
        let events = self
            .events
            .iter()
            .copied()
            .filter(|e| dir * e.t <= dir * t_cut)
            .collect();
        let terminal_event = self.terminal_event.filter(|e| e.t == t_cut);
        let status = if terminal_event.is_some() {
            self.status
        } else {
            Status::Completed
        };
        Ok(Self {
            samples,
            steps,
            terminal_event,
            events,
            status,
            stats: self.stats,
        })
    }

    /// Appends a continuation that starts where this trajectory ends (same
    /// orientation). The continuation's initial sample is dropped, so a small
    /// state jump at the junction is allowed; its terminal record and status
    /// replace this trajectory's.
    pub fn append(&mut self, other: Trajectory<N>) -> Result<()> {
        if other.t_start() != self.t_end() {
            return Err(Error::Domain(format!(
                "continuation starts at {} but trajectory ends at {}",
                other.t_start(),
                self.t_end()
            )));
        }
        if self.samples.len() > 1
            && other.samples.len() > 1
            && other.orientation() != self.orientation()
        {
            return Err(Error::Domain(
                "continuation has the opposite orientation".into(),
            ));
        }
        self.samples.extend(other.samples.into_iter().skip(1));
        self.steps.extend(other.steps);
        self.events.extend(other.events);
        self.terminal_event = other.terminal_event;
        self.status = other.status;
        self.stats.accepted += other.stats.accepted;
        self.stats.rejected += other.stats.rejected;
        self.stats.evaluations += other.stats.evaluations;
        Ok(())
    }

    /// Dense samples on a uniform grid of `n ≥ 2` points across the span.
    pub fn resample(&self, n: usize) -> Vec<(f64, [f64; N])> {
        let (a, b) = (self.t_start(), self.t_end());
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                };
                (t, self.dense_eval(t).expect("grid point inside span"))
            })
            .collect()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Integrates `field` from `initial` over `span = (t0, t1)`.
pub fn integrate<const N: usize, F: VectorField<N> + ?Sized>(
    field: &F,
    initial: [f64; N],
    span: (f64, f64),
    events: &[Event<'_, N>],
    cfg: &IntegratorConfig,
) -> Result<Trajectory<N>> {
    integrate_observed(field, initial, span, events, cfg, |_, _| {
        StepControl::Continue
    })
}

/// Like [`integrate`], calling `observer` after every accepted step; a
/// `Stop` reply ends the integration with a `Custom` terminal record.
pub fn integrate_observed<const N: usize, F: VectorField<N> + ?Sized>(
    field: &F,
    initial: [f64; N],
    span: (f64, f64),
    events: &[Event<'_, N>],
    cfg: &IntegratorConfig,
    mut observer: impl FnMut(f64, &[f64; N]) -> StepControl,
) -> Result<Trajectory<N>> {
    let (t0, t1) = span;
    if !(t0.is_finite() && t1.is_finite()) || t0 == t1 {
        return Err(Error::Domain(format!("invalid span ({t0}, {t1})")));
    }
    if !finite(&initial) {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    cfg.validate()?;
    let dir = if t1 > t0 { 1.0 } else { -1.0 };
    let length = (t1 - t0).abs();
    let h_min = cfg.min_step.max(1e-13 * length);
    let h_max = cfg.max_step.min(length);

    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = initial;
    let mut k1 = field.eval(t, &y);
    stats.evaluations += 1;
    let mut samples = vec![(t, y)];
    let mut steps: Vec<DenseStep<N>> = Vec::new();
    let mut found = Vec::new();
    let mut guards: Vec<f64> = events.iter().map(|e| (e.guard)(t, &y)).collect();

    let scale = |a: f64, b: f64| cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());

    // Initial step size following Hairer, Nørsett and Wanner.
    let mut h = {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sk = scale(y[i], y[i]);
            d0 += (y[i] / sk).powi(2);
            d1 += (k1[i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 || !d1.is_finite() {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(h_max);
        let y1 = combo(&y, dir * h0, &[(1.0, &k1)]);
        let f1 = field.eval(t + dir * h0, &y1);
        stats.evaluations += 1;
        let mut d2 = 0.0;
        for i in 0..N {
            d2 += ((f1[i] - k1[i]) / scale(y[i], y[i])).powi(2);
        }
        let d2 = (d2 / N as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 || !d2.is_finite() {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(h_max).max(h_min)
    };

    let mut status = Status::Completed;
    let mut terminal = None;
    let mut last_fac_old: f64 = 1e-4;

    while dir * (t1 - t) > 0.0 {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            status = Status::StepFailure;
            break;
        }
        let mut last = false;
        if h >= (t1 - t).abs() {
            h = (t1 - t).abs();
            last = true;
        }
        let hs = dir * h;
        let k2 = field.eval(t + C2 * hs, &combo(&y, hs, &[(A21, &k1)]));
        let k3 = field.eval(t + C3 * hs, &combo(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = field.eval(
            t + C4 * hs,
            &combo(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = field.eval(
            t + C5 * hs,
            &combo(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let ys = combo(
            &y,
            hs,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        let k6 = field.eval(t + hs, &ys);
        let y_new = combo(
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = field.eval(t + hs, &y_new);
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..N {
            let e =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err += (e / scale(y[i], y_new[i])).powi(2);
        }
        let err = (err / N as f64).sqrt();
        let ok = err.is_finite() && finite(&y_new) && finite(&k7);

        if !ok || err > 1.0 {
            stats.rejected += 1;
            let fac = if ok {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.1
            };
            h *= fac;
            if h < h_min {
                status = Status::StepFailure;
                break;
            }
            continue;
        }

        // Accepted step.
        stats.accepted += 1;
        let t_new = if last { t1 } else { t + hs };
        let mut r = [[0.0; N]; 5];
        for i in 0..N {
            let ydiff = y_new[i] - y[i];
            let bspl = hs * k1[i] - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - hs * k7[i] - bspl;
            r[4][i] =
                hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let step = DenseStep {
            t0: t,
            h: hs,
            t1: t_new,
            r,
        };
        steps.push(step);

        // Event scan on this step.
        let mut first_terminal: Option<EventRecord<N>> = None;
        for (idx, ev) in events.iter().enumerate() {
            let g_new = (ev.guard)(t_new, &y_new);
            if ev.triggers(guards[idx], g_new) {
                let (te, ye) = locate(&step, t, t_new, guards[idx], ev);
                let rec = EventRecord {
                    kind: ev.kind,
                    index: idx,
                    t: te,
                    state: ye,
                };
                if ev.terminal {
                    if first_terminal.map_or(true, |f| dir * te < dir * f.t) {
                        first_terminal = Some(rec);
                    }
                } else {
                    found.push(rec);
                }
            }
            guards[idx] = g_new;
        }
        if let Some(rec) = first_terminal {
            found.retain(|e: &EventRecord<N>| dir * e.t <= dir * rec.t);
            if let Some(last) = steps.last_mut() {
                last.t1 = rec.t;
            }
            samples.push((rec.t, rec.state));
            terminal = Some(rec);
            status = Status::EventStopped;
            break;
        }

        t = t_new;
        y = y_new;
        k1 = k7;
        samples.push((t, y));

        if observer(t, &y) == StepControl::Stop {
            terminal = Some(EventRecord {
                kind: EventKind::Custom,
                index: usize::MAX,
                t,
                state: y,
            });
            status = Status::EventStopped;
            break;
        }

        // Step-size update with a mild PI controller.
        let err_c = err.max(1e-10);
        let fac = (0.9 * err_c.powf(-0.17) * last_fac_old.powf(0.04)).clamp(0.2, 10.0);
        last_fac_old = err_c.max(1e-4);
        h = (h * fac).min(h_max);
    }

    Ok(Trajectory {
        samples,
        steps,
        terminal_event: terminal,
        events: found,
        status,
        stats,
    })
}

fn locate<const N: usize>(
    step: &DenseStep<N>,
    ta: f64,
    tb: f64,
    g_a: f64,
    ev: &Event<'_, N>,
) -> (f64, [f64; N]) {
    let (mut a, mut b) = (ta, tb);
    let mut ga = g_a;
    for _ in 0..50 {
        let m = 0.5 * (a + b);
        let ym = step.eval(m);
        let gm = (ev.guard)(m, &ym);
        let same_side = (ga < 0.0 && gm < 0.0) || (ga > 0.0 && gm > 0.0);
        if same_side {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
        if (b - a).abs() <= 1e-15 * (1.0 + b.abs()) {
            break;
        }
    }
    (b, step.eval(b))
}

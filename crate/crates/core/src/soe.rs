//! Second-order regime `psi'' + ((k-1)/r) psi' + g(psi) = 0`.
//!
//! Integration uses the adaptive Dormand-Prince stepper with dense output,
//! a series start at the origin, and dense-output event location. Also home
//! to the energy audit, the `k = 1` phase-plane classifier and period, and
//! the decay-envelope fit for `k >= 2`.

use serde::{Deserialize, Serialize};

use crate::builder::SolveConfig;
use crate::error::{RadialError, Result};
use crate::nonlinearity::Nonlinearity;
use crate::ode::{self, DenseStep, DenseTrajectory, StepControl, StepperOptions};
use crate::quad::{integrate, QuadOptions};
use crate::roots::brent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoeState {
    pub r: f64,
    pub u: f64,
    pub uprime: f64,
    /// `psi'' - psi'/r = -(k/r) psi' - g(psi)`; 0 at the origin.
    pub au: f64,
    /// `psi'^2 / 2 + G(psi)`.
    pub energy: f64,
}

impl SoeState {
    pub fn new(nl: &Nonlinearity, k: u32, r: f64, u: f64, uprime: f64) -> Self {
        let au = if r > 0.0 { -(k as f64 / r) * uprime - nl.g(u) } else { 0.0 };
        SoeState { r, u, uprime, au, energy: 0.5 * uprime * uprime + nl.potential(u) }
    }

    /// `psi''` recovered from the equation.
    pub fn second_derivative(&self, nl: &Nonlinearity, k: u32) -> f64 {
        if self.r > 0.0 {
            -((k as f64 - 1.0) / self.r) * self.uprime - nl.g(self.u)
        } else {
            -nl.g(self.u) / k as f64
        }
    }
}

/// Series coefficients `(c2, a4)` of `psi = xi + c2 r^2 + a4 r^4` at the origin.
fn series_coefficients(nl: &Nonlinearity, k: u32, xi: f64) -> (f64, f64) {
    let kf = k as f64;
    let g = nl.g(xi);
    (-g / (2.0 * kf), nl.dg(xi) * g / (2.0 * kf * (4.0 * kf + 8.0)))
}

/// State at a small radius `h0` from the regular expansion at the origin
/// (`psi(0) = xi`, `psi'(0) = 0`). Truncation error is `O(h0^6)`.
pub fn soe_origin_start(nl: &Nonlinearity, k: u32, xi: f64, h0: f64) -> Result<SoeState> {
    if k == 0 {
        return Err(RadialError::invalid("k", "must be at least 1"));
    }
    if !(h0 > 0.0 && h0 <= 1e-3 * nl.alpha().max(1.0)) {
        return Err(RadialError::invalid("h0", format!("must lie in (0, 1e-3 max(1, alpha)], got {h0}")));
    }
    let (c2, a4) = series_coefficients(nl, k, xi);
    let h2 = h0 * h0;
    let u = xi + c2 * h2 + a4 * h2 * h2;
    let up = 2.0 * c2 * h0 + 4.0 * a4 * h2 * h0;
    Ok(SoeState::new(nl, k, h0, u, up))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoeStart {
    pub r0: f64,
    pub xi: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    /// Root of `psi' + (r/k) g(psi)`, where `A psi` changes sign.
    Switch,
    /// Root of `psi'`.
    Extremum,
    /// Root of `psi - c`.
    Level(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crossing {
    Rising,
    Falling,
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub crossing: Crossing,
    pub terminal: bool,
}

impl EventSpec {
    /// Terminal switch detector (`A psi` turning negative at a valid value).
    pub fn switch() -> Self {
        EventSpec { kind: EventKind::Switch, crossing: Crossing::Rising, terminal: true }
    }

    pub fn extrema() -> Self {
        EventSpec { kind: EventKind::Extremum, crossing: Crossing::Either, terminal: false }
    }

    pub fn level(c: f64, crossing: Crossing, terminal: bool) -> Self {
        EventSpec { kind: EventKind::Level(c), crossing, terminal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventHit {
    /// Index into the event list passed to [`soe_integrate`].
    pub event: usize,
    pub r: f64,
    pub state: SoeState,
    pub rising: bool,
    /// For switch events: whether the value lies in an admissible region.
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Truncation,
    BlowUp,
    Event(usize),
}

/// Integration limits for the second-order regime.
#[derive(Debug, Clone, Copy)]
pub struct SoeLimits {
    pub stepper: StepperOptions,
    pub cap_u: f64,
    pub cap_du: f64,
    pub truncation: f64,
    pub h0_factor: f64,
    pub event_tol: f64,
}

impl Default for SoeLimits {
    fn default() -> Self {
        SolveConfig::default().soe_limits()
    }
}

/// Result of [`soe_integrate`].
#[derive(Debug, Clone)]
pub struct SoeRun {
    nl: Nonlinearity,
    k: u32,
    pub start: SoeStart,
    /// Radius where the series expansion hands over to the stepper.
    pub series_until: Option<f64>,
    pub trajectory: DenseTrajectory<2>,
    pub hits: Vec<EventHit>,
    pub termination: Termination,
}

impl SoeRun {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn r_start(&self) -> f64 {
        self.start.r0
    }

    pub fn r_end(&self) -> f64 {
        self.trajectory.r_end
    }

    pub fn end_state(&self) -> SoeState {
        let y = self.trajectory.y_end;
        SoeState::new(&self.nl, self.k, self.trajectory.r_end, y[0], y[1])
    }

    pub fn blew_up(&self) -> bool {
        self.termination == Termination::BlowUp
    }

    pub fn state_at(&self, r: f64) -> Option<SoeState> {
        if let Some(h0) = self.series_until {
            if r >= 0.0 && r < h0 {
                let (c2, a4) = series_coefficients(&self.nl, self.k, self.start.xi);
                let r2 = r * r;
                let u = self.start.xi + c2 * r2 + a4 * r2 * r2;
                let up = 2.0 * c2 * r + 4.0 * a4 * r2 * r;
                return Some(SoeState::new(&self.nl, self.k, r, u, up));
            }
        }
        self.trajectory.eval(r).map(|y| SoeState::new(&self.nl, self.k, r, y[0], y[1]))
    }

    /// States on a uniform grid of spacing at most `dr`, including the
    /// origin for series starts and both ends.
    pub fn sample(&self, dr: f64) -> Vec<SoeState> {
        let mut out = Vec::new();
        if self.series_until.is_some() {
            out.push(SoeState::new(&self.nl, self.k, 0.0, self.start.xi, 0.0));
        }
        out.extend(self.trajectory.resample(dr).into_iter().map(|(r, y)| SoeState::new(&self.nl, self.k, r, y[0], y[1])));
        out
    }

    /// Radii of the hits recorded for event `index`.
    pub fn hits_for(&self, index: usize) -> impl Iterator<Item = &EventHit> {
        self.hits.iter().filter(move |h| h.event == index)
    }
}

/// `psi' + (r/k) g(psi)`, which equals `-(r/k) A psi`.
pub fn switch_function(nl: &Nonlinearity, k: u32, r: f64, u: f64, uprime: f64) -> f64 {
    uprime + (r / k as f64) * nl.g(u)
}

/// Whether `u` lies in `(-inf,-alpha) U (-beta,0) U (beta,alpha)`, the values
/// at which the second-order regime may hand over to the first-order one.
pub fn switch_region_valid(nl: &Nonlinearity, u: f64) -> bool {
    let (alpha, beta) = (nl.alpha(), nl.beta());
    let margin = 8.0 * f64::EPSILON * alpha;
    if nl.is_zero_of_g(u) || (u.abs() - beta).abs() <= margin {
        return false;
    }
    u < -alpha || (u > -beta && u < 0.0) || (u > beta && u < alpha)
}

/// Whether `state` is a valid switch point out of the second-order regime:
/// the switch function vanishes there and the value lies in an admissible
/// region.
pub fn soe_switch_event(nl: &Nonlinearity, k: u32, state: &SoeState) -> bool {
    if state.r <= 0.0 {
        return false;
    }
    let f = switch_function(nl, k, state.r, state.u, state.uprime);
    let scale = 1.0 + state.uprime.abs() + (state.r / k as f64) * nl.g(state.u).abs();
    f.abs() <= 1e-8 * scale && switch_region_valid(nl, state.u)
}

fn event_value(nl: &Nonlinearity, k: u32, kind: EventKind, r: f64, y: &[f64; 2]) -> f64 {
    match kind {
        EventKind::Switch => switch_function(nl, k, r, y[0], y[1]),
        EventKind::Extremum => y[1],
        EventKind::Level(c) => y[0] - c,
    }
}

struct EventTracker {
    spec: EventSpec,
    /// For switch events, armed once the function has been seen negative.
    armed: bool,
}

/// Number of interior probes per step when scanning for sign changes.
const PROBES: usize = 4;

/// Integrates the second-order regime from `start` until the truncation
/// radius, a blow-up cap, or the first terminal event.
///
/// `start.r0 = 0` requests the regular origin start; it requires
/// `theta = 0` unless `k = 1`, where the equation has no singular term.
pub fn soe_integrate(
    nl: &Nonlinearity,
    k: u32,
    start: SoeStart,
    events: &[EventSpec],
    limits: &SoeLimits,
) -> Result<SoeRun> {
    if k == 0 {
        return Err(RadialError::invalid("k", "must be at least 1"));
    }
    if !(start.r0 >= 0.0 && start.r0.is_finite() && start.xi.is_finite() && start.theta.is_finite()) {
        return Err(RadialError::invalid("start", "radius, value and slope must be finite with r0 >= 0"));
    }
    if start.r0 == 0.0 && start.theta != 0.0 && k > 1 {
        return Err(RadialError::invalid("theta", "a start at r = 0 requires zero slope when k >= 2"));
    }
    if !(limits.truncation.is_finite() && limits.cap_u > 0.0 && limits.cap_du > 0.0) {
        return Err(RadialError::invalid("limits", "truncation and caps must be finite and positive"));
    }

    let kf = k as f64;
    let (r_init, y_init, series_until) = if start.r0 == 0.0 && k > 1 {
        let h0 = limits.h0_factor * nl.alpha().max(1.0);
        let s = soe_origin_start(nl, k, start.xi, h0)?;
        (h0, [s.u, s.uprime], Some(h0))
    } else {
        (start.r0, [start.xi, start.theta], None)
    };

    let rhs = |r: f64, y: &[f64; 2]| -> [f64; 2] {
        let damping = if k > 1 { (kf - 1.0) / r * y[1] } else { 0.0 };
        [y[1], -damping - nl.g(y[0])]
    };

    let mut trackers: Vec<EventTracker> =
        events.iter().map(|&spec| EventTracker { spec, armed: spec.kind != EventKind::Switch }).collect();
    for t in trackers.iter_mut().filter(|t| t.spec.kind == EventKind::Switch) {
        if switch_function(nl, k, r_init, y_init[0], y_init[1]) < 0.0 {
            t.armed = true;
        }
    }

    let mut hits: Vec<EventHit> = Vec::new();
    let mut termination = Termination::Truncation;
    let mut failure: Option<RadialError> = None;
    let event_tol = limits.event_tol;
    let (cap_u, cap_du) = (limits.cap_u, limits.cap_du);

    let observer = |step: &DenseStep<2>| -> StepControl<2> {
        let r_a = step.r0;
        let r_b = step.r1();
        // earliest terminal event in this step
        let mut stop: Option<(f64, usize)> = None;
        let mut step_hits: Vec<EventHit> = Vec::new();
        for (idx, tracker) in trackers.iter_mut().enumerate() {
            let kind = tracker.spec.kind;
            let f = |r: f64| event_value(nl, k, kind, r, &step.eval(r));
            let mut r_prev = r_a;
            let mut f_prev = event_value(nl, k, kind, r_a, &step.y0);
            for j in 1..=PROBES + 1 {
                let r_cur = if j == PROBES + 1 { r_b } else { r_a + step.h * (j as f64) / ((PROBES + 1) as f64) };
                let f_cur = if j == PROBES + 1 { event_value(nl, k, kind, r_b, &step.y1) } else { f(r_cur) };
                if kind == EventKind::Switch && !tracker.armed {
                    if f_cur < 0.0 {
                        tracker.armed = true;
                    }
                    r_prev = r_cur;
                    f_prev = f_cur;
                    continue;
                }
                let rising = f_prev < 0.0 && f_cur >= 0.0;
                let falling = f_prev > 0.0 && f_cur <= 0.0;
                let wanted = match tracker.spec.crossing {
                    Crossing::Rising => rising,
                    Crossing::Falling => falling,
                    Crossing::Either => rising || falling,
                };
                if wanted {
                    let root = if f_cur == 0.0 {
                        r_cur
                    } else {
                        match brent(f, r_prev, r_cur, event_tol.min(1e-13), 200) {
                            Ok(x) => x,
                            Err(e) => {
                                failure.get_or_insert(e);
                                r_cur
                            }
                        }
                    };
                    let y = step.eval(root);
                    let state = SoeState::new(nl, k, root, y[0], y[1]);
                    let valid = kind != EventKind::Switch || switch_region_valid(nl, y[0]);
                    step_hits.push(EventHit { event: idx, r: root, state, rising, valid });
                    if kind == EventKind::Switch && rising {
                        // needs to be seen negative again before it can fire
                        tracker.armed = false;
                    }
                    if tracker.spec.terminal && valid {
                        if stop.is_none_or(|(r, _)| root < r) {
                            stop = Some((root, idx));
                        }
                        break;
                    }
                }
                r_prev = r_cur;
                f_prev = f_cur;
            }
        }
        if let Some((r_stop, idx)) = stop {
            step_hits.retain(|h| h.r <= r_stop);
            step_hits.sort_by(|a, b| a.r.total_cmp(&b.r));
            hits.extend(step_hits);
            termination = Termination::Event(idx);
            return StepControl::StopAt(r_stop, step.eval(r_stop));
        }
        step_hits.sort_by(|a, b| a.r.total_cmp(&b.r));
        hits.extend(step_hits);
        if step.y1[0].abs() > cap_u || step.y1[1].abs() > cap_du {
            termination = Termination::BlowUp;
            return StepControl::StopAt(r_b, step.y1);
        }
        StepControl::Continue
    };

    let (trajectory, _) = ode::integrate(rhs, r_init, y_init, limits.truncation, limits.stepper, observer)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(SoeRun { nl: nl.clone(), k, start, series_until, trajectory, hits, termination })
}

/// Maximal violation of the energy identity
/// `E(r) - E(t) + (k-1) int_t^r psi'^2/s ds = 0` over all pairs of points on
/// a uniform resampling of the run (spacing 0.01). The damping integral uses
/// the trapezoidal rule with endpoint derivative correction.
pub fn soe_energy_audit(run: &SoeRun) -> f64 {
    energy_residual(run, 0.01)
}

fn energy_residual(run: &SoeRun, dr: f64) -> f64 {
    let nl = &run.nl;
    let k = run.k;
    let samples = run.trajectory.resample(dr);
    if samples.len() < 2 {
        return 0.0;
    }
    let damping = k as f64 - 1.0;
    let energy = |y: &[f64; 2]| 0.5 * y[1] * y[1] + nl.potential(y[0]);
    let integrand = |r: f64, y: &[f64; 2]| -> (f64, f64) {
        if damping == 0.0 || r <= 0.0 {
            return (0.0, 0.0);
        }
        let second = -(damping / r) * y[1] - nl.g(y[0]);
        let f = y[1] * y[1] / r;
        let df = 2.0 * y[1] * second / r - y[1] * y[1] / (r * r);
        (f, df)
    };
    let e0 = energy(&samples[0].1);
    let (mut f_a, mut df_a) = integrand(samples[0].0, &samples[0].1);
    let mut acc = 0.0;
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for w in samples.windows(2) {
        let (r_a, _) = w[0];
        let (r_b, y_b) = w[1];
        let h = r_b - r_a;
        let (f_b, df_b) = integrand(r_b, &y_b);
        acc += 0.5 * h * (f_a + f_b) + h * h / 12.0 * (df_a - df_b);
        let res = energy(&y_b) - e0 + damping * acc;
        lo = lo.min(res);
        hi = hi.max(res);
        f_a = f_b;
        df_a = df_b;
    }
    hi - lo
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum K1Kind {
    Constant,
    Heteroclinic,
    Periodic,
    Unbounded,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct K1Outcome {
    pub kind: K1Kind,
    /// Initial energy `theta^2/2 + G(|xi|)`.
    pub energy: f64,
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
    /// Limit value for constant and heteroclinic orbits.
    pub limit: Option<f64>,
    /// Classifications on either side when the energy sits in the
    /// `|E - G(alpha)| <= 1e-12` band.
    pub neighbors: Vec<K1Kind>,
}

const ENERGY_BAND: f64 = 1e-12;

/// Phase-plane classification of `psi'' + g(psi) = 0`, `psi(0) = xi`,
/// `psi'(0) = theta`.
pub fn k1_classify(nl: &Nonlinearity, xi: f64, theta: f64) -> K1Outcome {
    let alpha = nl.alpha();
    let g_alpha = nl.potential(alpha);
    let energy = 0.5 * theta * theta + nl.potential(xi.abs());
    let outcome = |kind, limit, neighbors| K1Outcome { kind, energy, amplitude: None, period: None, limit, neighbors };

    if xi.abs() > alpha && !nl.is_zero_of_g(xi) {
        return outcome(K1Kind::Unbounded, None, vec![]);
    }
    if (energy - g_alpha).abs() <= ENERGY_BAND {
        let neighbors = vec![K1Kind::Periodic, K1Kind::Unbounded];
        if theta == 0.0 {
            return outcome(K1Kind::Constant, Some(alpha.copysign(xi)), neighbors);
        }
        return outcome(K1Kind::Heteroclinic, Some(alpha.copysign(theta)), neighbors);
    }
    if energy > g_alpha {
        return outcome(K1Kind::Unbounded, None, vec![]);
    }
    if energy == 0.0 {
        return outcome(K1Kind::Zero, Some(0.0), vec![]);
    }
    match k1_amplitude_and_period(nl, xi, theta) {
        Ok((m, t)) => K1Outcome { amplitude: Some(m), period: Some(t), ..outcome(K1Kind::Periodic, None, vec![]) },
        Err(_) => outcome(K1Kind::Periodic, None, vec![]),
    }
}

/// Amplitude `M` (with `G(M) = E`) and period of a periodic `k = 1` orbit.
///
/// The period is `4 int_0^{pi/2} M cos(phi) / sqrt(2 (G(M) - G(M sin phi))) dphi`,
/// in which the turning-point singularity cancels analytically.
pub fn k1_amplitude_and_period(nl: &Nonlinearity, xi: f64, theta: f64) -> Result<(f64, f64)> {
    let alpha = nl.alpha();
    let g_alpha = nl.potential(alpha);
    let a = xi.abs();
    let energy = 0.5 * theta * theta + nl.potential(a);
    if !(a < alpha && energy > 0.0 && energy < g_alpha - ENERGY_BAND) {
        return Err(RadialError::OutOfRegion { xi, reason: "orbit is not periodic".into() });
    }
    let m = if theta == 0.0 { a } else { brent(|t| nl.potential(t) - energy, a, alpha, 1e-15, 200)? };

    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_panels: 2000 };
    let quarter = if let Some((p, scale)) = nl.cubic_params() {
        // G(M) - G(M sin) = p M^2 cos^2 [1/2 - M^2 (1 + sin^2) / (4 scale)]
        let m2 = m * m;
        integrate(
            |phi: f64| {
                let s = phi.sin();
                1.0 / (2.0 * p * (0.5 - m2 * (1.0 + s * s) / (4.0 * scale))).sqrt()
            },
            0.0,
            std::f64::consts::FRAC_PI_2,
            opts,
        )?
        .value
    } else {
        // G(M) - G(M sin) = M (1 - sin) * mean of g over [M sin, M]
        let mean_g = |s: f64| {
            integrate(|t: f64| nl.g(m * (s + t * (1.0 - s))), 0.0, 1.0, QuadOptions { max_panels: 50, ..opts })
                .map(|q| q.value)
                .unwrap_or(f64::NAN)
        };
        integrate(
            |phi: f64| {
                let s = phi.sin();
                m * (1.0 + s).sqrt() / (2.0 * m * mean_g(s)).sqrt()
            },
            0.0,
            std::f64::consts::FRAC_PI_2,
            opts,
        )?
        .value
    };
    Ok((m, 4.0 * quarter))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    /// Least-squares slope of `log(|psi| + |psi'| + |psi''|)` at the extrema
    /// against `log r`.
    pub slope: f64,
    /// `min` and `max` of `(|psi| + |psi'| + |psi''|) r^((k-1)/2)` at the extrema.
    pub c_est: f64,
    pub big_c_est: f64,
    pub extrema: usize,
}

/// Fits the decay of an oscillating run over the extrema whose radius lies
/// in `window`.
pub fn k2_decay_envelope(run: &SoeRun, window: (f64, f64)) -> Result<DecayEnvelope> {
    let k = run.k;
    if k < 2 {
        return Err(RadialError::invalid("k", "decay envelope needs k >= 2"));
    }
    let nl = &run.nl;
    let mut points: Vec<(f64, f64)> = Vec::new();
    let samples = run.trajectory.resample(0.01);
    for w in samples.windows(2) {
        let (ra, ya) = w[0];
        let (rb, yb) = w[1];
        if ya[1] == 0.0 || ya[1].signum() == yb[1].signum() {
            continue;
        }
        let r = brent(|r| run.trajectory.eval(r).map_or(f64::NAN, |y| y[1]), ra, rb, 1e-13, 100)?;
        if r < window.0 || r > window.1 {
            continue;
        }
        let s = run.state_at(r).expect("root inside trajectory");
        let q = s.u.abs() + s.uprime.abs() + s.second_derivative(nl, k).abs();
        points.push((r, q));
    }
    if points.len() < 10 {
        return Err(RadialError::invalid("run", format!("only {} extrema in the fit window", points.len())));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(r, q) in &points {
        let (x, y) = (r.ln(), q.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let expo = (k as f64 - 1.0) / 2.0;
    let scaled = points.iter().map(|&(r, q)| q * r.powf(expo));
    let c_est = scaled.clone().fold(f64::INFINITY, f64::min);
    let big_c_est = scaled.fold(0.0, f64::max);
    Ok(DecayEnvelope { slope, c_est, big_c_est, extrema: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn limits(truncation: f64) -> SoeLimits {
        SoeLimits { truncation, ..SoeLimits::default() }
    }

    #[test]
    fn origin_start_zero_is_at_rest() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let s = soe_origin_start(&nl, 2, 0.0, 1e-4).unwrap();
        assert_eq!((s.u, s.uprime), (0.0, 0.0));
    }

    #[test]
    fn origin_start_slope_and_coefficient() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let s = soe_origin_start(&nl, 1, 0.5, 1e-3).unwrap();
        assert!((s.uprime / 1e-3 + 0.375).abs() < 1e-6);
        let (_, a4) = series_coefficients(&nl, 1, 0.5);
        assert!((a4 - 0.25 * 0.375 / 24.0).abs() < 1e-15);
        assert!(soe_origin_start(&nl, 1, 0.5, 0.1).is_err());
    }

    #[test]
    fn series_matches_integration_from_zero_for_k1() {
        // for k = 1 the equation is regular at 0, so both starts must agree
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let h = 1e-3;
        let s = soe_origin_start(&nl, 1, 0.5, h).unwrap();
        let run = soe_integrate(&nl, 1, SoeStart { r0: 0.0, xi: 0.5, theta: 0.0 }, &[], &limits(2.0 * h)).unwrap();
        let y = run.state_at(h).unwrap();
        assert!((y.u - s.u).abs() < 1e-14 && (y.uprime - s.uprime).abs() < 1e-13);
    }

    #[test]
    fn trapped_k1_orbit_keeps_amplitude() {
        let nl = Nonlinearity::scaled_cubic(0.25, 1.0).unwrap();
        let run = soe_integrate(&nl, 1, SoeStart { r0: 0.0, xi: 0.6, theta: 0.0 }, &[], &limits(60.0)).unwrap();
        let max = run.sample(0.01).iter().map(|s| s.u.abs()).fold(0.0, f64::max);
        assert!((max - 0.6).abs() < 1e-8);
        assert!(soe_energy_audit(&run) < 1e-9);
    }

    #[test]
    fn escaping_orbit_hits_cap() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let run = soe_integrate(&nl, 1, SoeStart { r0: 0.0, xi: 2.0, theta: 0.0 }, &[], &limits(50.0)).unwrap();
        assert!(run.blew_up());
        let states = run.sample(0.01);
        assert!(states.windows(2).all(|w| w[1].u >= w[0].u));
        assert!(run.r_end() < 50.0);
    }

    #[test]
    fn switch_start_falls_below_minus_alpha() {
        let nl = Nonlinearity::cubic(3.0).unwrap();
        let r0 = 5.0;
        let theta = -nl.g(1.0) * r0 / 2.0;
        let run = soe_integrate(&nl, 2, SoeStart { r0, xi: 1.0, theta }, &[], &limits(200.0)).unwrap();
        assert!(run.blew_up());
        assert!(run.end_state().u < -nl.alpha());
        assert!(run.sample(0.01).windows(2).all(|w| w[1].u < w[0].u));
    }

    #[test]
    fn switch_validity() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let at = |u: f64| {
            let r = 2.0;
            SoeState::new(&nl, 1, r, u, -(r / 1.0) * nl.g(u))
        };
        assert!(soe_switch_event(&nl, 1, &at(-0.3)));
        assert!(!soe_switch_event(&nl, 1, &at(nl.beta())));
        assert!(soe_switch_event(&nl, 1, &at(0.5 * (nl.alpha() + nl.beta()))));
        assert!(soe_switch_event(&nl, 1, &at(-1.5)));
        assert!(!soe_switch_event(&nl, 1, &at(0.3)));
        assert!(!soe_switch_event(&nl, 1, &at(-1.0)));
        let mut off = at(-0.3);
        off.uprime += 1e-3;
        assert!(!soe_switch_event(&nl, 1, &off));
    }

    #[test]
    fn switch_event_is_located_and_sign_change_confirmed() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let run = soe_integrate(&nl, 1, SoeStart { r0: 0.0, xi: 0.5, theta: 0.0 }, &[EventSpec::switch()], &limits(50.0))
            .unwrap();
        assert_eq!(run.termination, Termination::Event(0));
        let hit = run.hits.last().unwrap();
        assert!(hit.valid && soe_switch_event(&nl, 1, &hit.state));
        assert!(hit.state.u > -nl.beta() && hit.state.u < 0.0);
        let before = run.state_at(hit.r - 1e-4).unwrap();
        assert!(before.au > 0.0);
    }

    #[test]
    fn constant_orbit_has_zero_energy_residual() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let run = soe_integrate(&nl, 2, SoeStart { r0: 1.0, xi: 1.0, theta: 0.0 }, &[], &limits(20.0)).unwrap();
        assert_eq!(soe_energy_audit(&run), 0.0);
    }

    #[test]
    fn k1_classification_cases() {
        let nl = Nonlinearity::scaled_cubic(0.25, 1.0).unwrap();
        let o = k1_classify(&nl, 0.6, -0.2);
        assert_eq!(o.kind, K1Kind::Periodic);
        assert!((o.energy - (0.02 + 0.6f64.powi(2) / 8.0 - 0.6f64.powi(4) / 16.0)).abs() < 1e-15);
        assert_eq!(k1_classify(&nl, 1.0, 0.0).kind, K1Kind::Constant);
        let theta = (2.0 * nl.potential(1.0)).sqrt();
        let h = k1_classify(&nl, 0.0, theta);
        assert_eq!(h.kind, K1Kind::Heteroclinic);
        assert_eq!(h.limit, Some(1.0));
        assert_eq!(h.neighbors, vec![K1Kind::Periodic, K1Kind::Unbounded]);
        assert_eq!(k1_classify(&nl, 0.0, -theta).limit, Some(-1.0));
        assert_eq!(k1_classify(&nl, 0.0, 0.0).kind, K1Kind::Zero);
        assert_eq!(k1_classify(&nl, 1.2, 0.0).kind, K1Kind::Unbounded);
        assert_eq!(k1_classify(&nl, 0.2, 1.0).kind, K1Kind::Unbounded);
    }

    #[test]
    fn amplitude_at_rest_is_start_value() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let (m, t) = k1_amplitude_and_period(&nl, 0.4, 0.0).unwrap();
        assert_eq!(m, 0.4);
        assert!(t > 2.0 * std::f64::consts::PI);
        assert!(k1_amplitude_and_period(&nl, 0.4, 5.0).is_err());
    }

    #[test]
    fn small_amplitude_period_is_harmonic() {
        let nl = Nonlinearity::scaled_cubic(0.25, 1.0).unwrap();
        let (_, t) = k1_amplitude_and_period(&nl, 1e-4, 0.0).unwrap();
        assert!((t - 4.0 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn generic_period_matches_cubic_formula() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let generic = Nonlinearity::custom(
            "cubic-callback",
            1.0,
            1.0 / 3f64.sqrt(),
            |u| u - u * u * u,
            |u| 1.0 - 3.0 * u * u,
            |u| -6.0 * u,
            |t| 0.5 * t * t - 0.25 * t.powi(4),
        )
        .unwrap();
        let a = k1_amplitude_and_period(&nl, 0.7, 0.1).unwrap();
        let b = k1_amplitude_and_period(&generic, 0.7, 0.1).unwrap();
        assert!((a.0 - b.0).abs() < 1e-14);
        assert!((a.1 - b.1).abs() < 1e-10 * a.1);
    }

    #[test]
    fn decay_envelope_rejects_k1() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let run = soe_integrate(&nl, 1, SoeStart { r0: 0.0, xi: 0.5, theta: 0.0 }, &[], &limits(10.0)).unwrap();
        assert!(k2_decay_envelope(&run, (1.0, 10.0)).is_err());
    }
}

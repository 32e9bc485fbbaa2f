//! Dormand-Prince 5(4) integrator with continuous (dense) output.
//!
//! The integrator knows nothing about events or blow-up: after every
//! accepted step it hands the step (with its interpolant) to an observer,
//! which may stop the integration at any radius inside that step.

use serde::{Deserialize, Serialize};

use crate::error::{RadialError, Result};

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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { abs: 1e-10, rel: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepperOptions {
    pub tol: Tolerances,
    pub max_steps: usize,
    /// Upper bound on a single step; `None` means the whole span.
    pub h_max: Option<f64>,
}

impl Default for StepperOptions {
    fn default() -> Self {
        StepperOptions { tol: Tolerances::default(), max_steps: 2_000_000, h_max: None }
    }
}

/// One accepted step with its fourth-order interpolant.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub r0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn r1(&self) -> f64 {
        self.r0 + self.h
    }

    pub fn eval(&self, r: f64) -> [f64; N] {
        if r == self.r0 {
            return self.y0;
        }
        if r == self.r1() {
            return self.y1;
        }
        let s = (r - self.r0) / self.h;
        let s1 = 1.0 - s;
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            let c = &self.rcont;
            *o = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        out
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.r0.min(self.r1()) && r <= self.r0.max(self.r1())
    }
}

/// Piecewise dense output over `[r_start, r_end]`.
#[derive(Debug, Clone)]
pub struct DenseTrajectory<const N: usize> {
    pub r_start: f64,
    pub y_start: [f64; N],
    pub r_end: f64,
    pub y_end: [f64; N],
    steps: Vec<DenseStep<N>>,
}

impl<const N: usize> DenseTrajectory<N> {
    pub fn new(r_start: f64, y_start: [f64; N]) -> Self {
        DenseTrajectory { r_start, y_start, r_end: r_start, y_end: y_start, steps: Vec::new() }
    }

    pub fn steps(&self) -> &[DenseStep<N>] {
        &self.steps
    }

    /// Step-end nodes including the start point, clipped to `r_end`.
    pub fn nodes(&self) -> Vec<(f64, [f64; N])> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push((self.r_start, self.y_start));
        for s in &self.steps {
            if s.r1() < self.r_end {
                out.push((s.r1(), s.y1));
            }
        }
        if self.r_end > self.r_start {
            out.push((self.r_end, self.y_end));
        }
        out
    }

    pub fn eval(&self, r: f64) -> Option<[f64; N]> {
        if r < self.r_start || r > self.r_end {
            return None;
        }
        if r == self.r_end {
            return Some(self.y_end);
        }
        if self.steps.is_empty() {
            return Some(self.y_start);
        }
        let idx = self.steps.partition_point(|s| s.r1() < r);
        let step = &self.steps[idx.min(self.steps.len() - 1)];
        Some(step.eval(r))
    }

    /// Uniformly spaced samples (spacing at most `dr`) plus both endpoints.
    pub fn resample(&self, dr: f64) -> Vec<(f64, [f64; N])> {
        let span = self.r_end - self.r_start;
        if span <= 0.0 {
            return vec![(self.r_start, self.y_start)];
        }
        let n = (span / dr).ceil().max(1.0) as usize;
        let mut out = Vec::with_capacity(n + 1);
        let mut idx = 0usize;
        for i in 0..=n {
            let r = if i == n { self.r_end } else { self.r_start + span * (i as f64) / (n as f64) };
            if i == 0 {
                out.push((r, self.y_start));
                continue;
            }
            if i == n {
                out.push((r, self.y_end));
                continue;
            }
            while idx + 1 < self.steps.len() && self.steps[idx].r1() < r {
                idx += 1;
            }
            out.push((r, self.steps[idx].eval(r)));
        }
        out
    }

    fn push(&mut self, step: DenseStep<N>) {
        self.r_end = step.r1();
        self.y_end = step.y1;
        self.steps.push(step);
    }

    fn stop_at(&mut self, r: f64, y: [f64; N]) {
        self.r_end = r;
        self.y_end = y;
    }
}

/// Observer verdict after an accepted step.
#[derive(Debug, Clone, Copy)]
pub enum StepControl<const N: usize> {
    Continue,
    /// Stop integration at the given point, which must lie in the step.
    StopAt(f64, [f64; N]),
}

fn scaled_norm<const N: usize>(v: &[f64; N], y0: &[f64; N], y1: &[f64; N], tol: Tolerances) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = tol.abs + tol.rel * y0[i].abs().max(y1[i].abs());
        acc += (v[i] / sc).powi(2);
    }
    (acc / N as f64).sqrt()
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

fn initial_step<const N: usize, F>(rhs: &F, r0: f64, y0: &[f64; N], f0: &[f64; N], span: f64, tol: Tolerances) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let d0 = scaled_norm(y0, y0, y0, tol);
    let d1 = scaled_norm(f0, y0, y0, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = axpy(y0, &[(h0, f0)]);
    let f1 = rhs(r0 + h0, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = scaled_norm(&diff, y0, y0, tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `y' = rhs(r, y)` forward from `r0` to `r_end`.
///
/// Returns the dense trajectory up to where it stopped and whether the
/// observer requested the stop.
pub fn integrate<const N: usize, F, O>(
    rhs: F,
    r0: f64,
    y0: [f64; N],
    r_end: f64,
    opts: StepperOptions,
    mut observer: O,
) -> Result<(DenseTrajectory<N>, bool)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    O: FnMut(&DenseStep<N>) -> StepControl<N>,
{
    let mut traj = DenseTrajectory::new(r0, y0);
    if r_end <= r0 {
        return Ok((traj, false));
    }
    let tol = opts.tol;
    let h_max = opts.h_max.unwrap_or(r_end - r0);
    let mut r = r0;
    let mut y = y0;
    let mut k1 = rhs(r, &y);
    let mut h = initial_step(&rhs, r, &y, &k1, r_end - r0, tol).min(h_max);
    let mut rejected_last = false;
    let mut steps = 0usize;

    while r < r_end {
        if steps >= opts.max_steps {
            return Err(RadialError::TooManySteps { max_steps: opts.max_steps, r });
        }
        steps += 1;
        if r + h > r_end || r_end - (r + h) < 1e-12 * h {
            h = r_end - r;
        }
        if h < 1e-14 * r.abs().max(1.0) {
            return Err(RadialError::StepUnderflow { r, u: y[0], uprime: if N > 1 { y[1] } else { f64::NAN } });
        }

        let y2 = axpy(&y, &[(h * A21, &k1)]);
        let k2 = rhs(r + C2 * h, &y2);
        let y3 = axpy(&y, &[(h * A31, &k1), (h * A32, &k2)]);
        let k3 = rhs(r + C3 * h, &y3);
        let y4 = axpy(&y, &[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]);
        let k4 = rhs(r + C4 * h, &y4);
        let y5 = axpy(&y, &[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]);
        let k5 = rhs(r + C5 * h, &y5);
        let y6 = axpy(&y, &[(h * A61, &k1), (h * A62, &k2), (h * A63, &k3), (h * A64, &k4), (h * A65, &k5)]);
        let k6 = rhs(r + h, &y6);
        let ynew = axpy(&y, &[(h * A71, &k1), (h * A73, &k3), (h * A74, &k4), (h * A75, &k5), (h * A76, &k6)]);
        let k7 = rhs(r + h, &ynew);

        let mut errv = [0.0; N];
        for i in 0..N {
            errv[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = scaled_norm(&errv, &y, &ynew, tol);

        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            h *= 0.2;
            rejected_last = true;
            continue;
        }

        if err <= 1.0 {
            let mut rcont = [[0.0; N]; 5];
            for i in 0..N {
                let dy = ynew[i] - y[i];
                let bspl = h * k1[i] - dy;
                rcont[0][i] = y[i];
                rcont[1][i] = dy;
                rcont[2][i] = bspl;
                rcont[3][i] = dy - h * k7[i] - bspl;
                rcont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = DenseStep { r0: r, h, y0: y, y1: ynew, rcont };
            let verdict = observer(&step);
            traj.push(step);
            if let StepControl::StopAt(rs, ys) = verdict {
                traj.stop_at(rs, ys);
                return Ok((traj, true));
            }
            r += h;
            y = ynew;
            k1 = k7;
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, if rejected_last { 1.0 } else { 10.0 });
            h = (h * fac).min(h_max);
            rejected_last = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            rejected_last = true;
        }
    }
    Ok((traj, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_stays_on_circle() {
        let (traj, stopped) = integrate(
            |_r, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            20.0,
            StepperOptions::default(),
            |_| StepControl::Continue,
        )
        .unwrap();
        assert!(!stopped);
        let y = traj.y_end;
        assert!((y[0] - 20f64.cos()).abs() < 1e-8);
        assert!((y[1] + 20f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn dense_output_interpolates_between_nodes() {
        let (traj, _) = integrate(
            |_r, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            3.0,
            StepperOptions::default(),
            |_| StepControl::Continue,
        )
        .unwrap();
        for &r in &[0.123, 1.0, 1.777, 2.5, 2.999] {
            let y = traj.eval(r).unwrap()[0];
            assert!((y - f64::exp(r)).abs() < 1e-8 * f64::exp(r), "r = {r}");
        }
        assert!(traj.eval(3.5).is_none());
    }

    #[test]
    fn observer_can_stop_inside_step() {
        let (traj, stopped) = integrate(
            |_r, _y: &[f64; 1]| [1.0],
            0.0,
            [0.0],
            10.0,
            StepperOptions::default(),
            |s| if s.r1() > 2.0 { StepControl::StopAt(2.0, s.eval(2.0)) } else { StepControl::Continue },
        )
        .unwrap();
        assert!(stopped);
        assert_eq!(traj.r_end, 2.0);
        assert!((traj.y_end[0] - 2.0).abs() < 1e-12);
    }
}

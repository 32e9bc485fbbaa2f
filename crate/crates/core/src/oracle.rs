//! Independent reference computations for cross-checking: fixed-step RK4,
//! Bernoulli closed forms for the cubic family, and brute-force event scans.
//! Deliberately simple and slow.

use serde::{Deserialize, Serialize};

use crate::error::{RadialError, Result};
use crate::nonlinearity::Nonlinearity;
use crate::ode::DenseTrajectory;

pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct Rk4Trajectory<const N: usize> {
    pub points: Vec<(f64, [f64; N])>,
    pub blew_up: bool,
}

impl<const N: usize> Rk4Trajectory<N> {
    /// Linear interpolation between the fixed steps.
    pub fn eval(&self, r: f64) -> Option<[f64; N]> {
        let first = self.points.first()?.0;
        let last = self.points.last()?.0;
        if r < first || r > last {
            return None;
        }
        let idx = self.points.partition_point(|p| p.0 < r);
        if idx == 0 {
            return Some(self.points[0].1);
        }
        let (r1, y1) = self.points[idx];
        let (r0, y0) = self.points[idx - 1];
        let t = (r - r0) / (r1 - r0);
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = y0[i] + t * (y1[i] - y0[i]);
        }
        Some(out)
    }
}

/// Classical fourth-order Runge-Kutta with fixed `step`, stopping at `until`
/// or when any component exceeds `cap` in magnitude.
pub fn rk4<const N: usize, F>(rhs: F, r0: f64, y0: [f64; N], step: f64, until: f64, cap: f64) -> Result<Rk4Trajectory<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    if !(step > 0.0) {
        return Err(RadialError::invalid("step", "must be positive"));
    }
    let n = ((until - r0) / step).ceil().max(0.0) as usize;
    let mut points = Vec::with_capacity(n + 1);
    points.push((r0, y0));
    let mut y = y0;
    let add = |y: &[f64; N], k: &[f64; N], c: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += c * k[i];
        }
        out
    };
    for i in 0..n {
        let r = r0 + i as f64 * step;
        let h = (until - r).min(step);
        let k1 = rhs(r, &y);
        let k2 = rhs(r + 0.5 * h, &add(&y, &k1, 0.5 * h));
        let k3 = rhs(r + 0.5 * h, &add(&y, &k2, 0.5 * h));
        let k4 = rhs(r + h, &add(&y, &k3, h));
        for j in 0..N {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        points.push((r + h, y));
        if y.iter().any(|v| !(v.abs() <= cap)) {
            return Ok(Rk4Trajectory { points, blew_up: true });
        }
    }
    Ok(Rk4Trajectory { points, blew_up: false })
}

/// RK4 on `u' = -(r/k) g(u)`.
pub fn rk4_foe(nl: &Nonlinearity, k: u32, r0: f64, xi: f64, step: f64, until: f64) -> Result<Rk4Trajectory<1>> {
    let kf = k as f64;
    rk4(|r, y: &[f64; 1]| [-(r / kf) * nl.g(y[0])], r0, [xi], step, until, 1e6)
}

/// RK4 on `psi'' + ((k-1)/r) psi' + g(psi) = 0`. A start at `r0 = 0` with
/// `k >= 2` is moved to `r = step` by the regular series.
pub fn rk4_soe(
    nl: &Nonlinearity,
    k: u32,
    r0: f64,
    xi: f64,
    theta: f64,
    step: f64,
    until: f64,
) -> Result<Rk4Trajectory<2>> {
    let kf = k as f64;
    let rhs = |r: f64, y: &[f64; 2]| {
        let damping = if k > 1 { (kf - 1.0) / r * y[1] } else { 0.0 };
        [y[1], -damping - nl.g(y[0])]
    };
    if r0 == 0.0 && k > 1 {
        let g = nl.g(xi);
        let c2 = -g / (2.0 * kf);
        let a4 = nl.dg(xi) * g / (2.0 * kf * (4.0 * kf + 8.0));
        let h = step;
        let y1 = [xi + c2 * h * h + a4 * h.powi(4), 2.0 * c2 * h + 4.0 * a4 * h.powi(3)];
        let mut tail = rk4(rhs, h, y1, step, until, 1e6)?;
        tail.points.insert(0, (0.0, [xi, 0.0]));
        return Ok(tail);
    }
    rk4(rhs, r0, [xi, theta], step, until, 1e6)
}

/// `u(r)` for `u' = -(r/k) p (u - u^3/scale)`, `u(r0) = xi`, from the
/// substitution `w = u^-2`.
pub fn bernoulli_scaled_foe(prefactor: f64, scale: f64, k: u32, r0: f64, xi: f64, r: f64) -> Result<f64> {
    if xi == 0.0 {
        return Ok(0.0);
    }
    let bracket = 1.0 / scale + (xi.powi(-2) - 1.0 / scale) * (prefactor * (r * r - r0 * r0) / k as f64).exp();
    if !(bracket > 0.0) {
        return Err(RadialError::BeyondBlowup { r, blowup: bernoulli_blowup_radius(prefactor, scale, k, r0, xi) });
    }
    Ok(xi.signum() * bracket.powf(-0.5))
}

/// [`bernoulli_scaled_foe`] with unit prefactor.
pub fn bernoulli_foe(scale: f64, k: u32, r0: f64, xi: f64, r: f64) -> Result<f64> {
    bernoulli_scaled_foe(1.0, scale, k, r0, xi, r)
}

/// Radius where the Bernoulli bracket vanishes (`|xi| > sqrt(scale)`),
/// infinite otherwise.
pub fn bernoulli_blowup_radius(prefactor: f64, scale: f64, k: u32, r0: f64, xi: f64) -> f64 {
    let x2 = xi * xi;
    if x2 <= scale {
        return f64::INFINITY;
    }
    (r0 * r0 + k as f64 / prefactor * (x2 / (x2 - scale)).ln()).sqrt()
}

/// Roots of `event(r, y)` along a dense trajectory: sign changes on a grid
/// of spacing `grid_step`, refined by bisection to `1e-13`.
pub fn event_scan<F>(traj: &DenseTrajectory<2>, event: F, grid_step: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64; 2]) -> f64,
{
    let f = |r: f64| traj.eval(r).map_or(f64::NAN, |y| event(r, &y));
    let mut roots = Vec::new();
    let n = ((traj.r_end - traj.r_start) / grid_step).ceil() as usize;
    let at = |i: usize| if i == n { traj.r_end } else { traj.r_start + i as f64 * grid_step };
    let mut a = at(0);
    let mut fa = f(a);
    for i in 1..=n {
        let b = at(i);
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm * flo > 0.0 {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    roots
}

/// One main-versus-oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub quantity: String,
    pub main: f64,
    pub oracle: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub tol: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Passes when the absolute deviation is within `tol`.
    pub fn absolute(quantity: &str, main: f64, oracle: f64, tol: f64) -> Self {
        let abs_dev = (main - oracle).abs();
        let rel_dev = abs_dev / oracle.abs().max(f64::MIN_POSITIVE);
        OracleReport { quantity: quantity.to_string(), main, oracle, abs_dev, rel_dev, tol, pass: abs_dev <= tol }
    }

    /// Passes when the relative deviation is within `tol`.
    pub fn relative(quantity: &str, main: f64, oracle: f64, tol: f64) -> Self {
        let r = Self::absolute(quantity, main, oracle, tol);
        OracleReport { pass: r.rel_dev <= tol, ..r }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate, StepControl, StepperOptions};

    #[test]
    fn bernoulli_reference_values() {
        let u = bernoulli_foe(1.0, 1, 0.0, 0.5, 1.0).unwrap();
        assert!((u - (1.0 + 3.0 * 1f64.exp()).powf(-0.5)).abs() < 1e-15);
        assert_eq!(bernoulli_foe(1.0, 2, 0.7, -0.3, 0.7).unwrap(), -0.3);
        let rb = bernoulli_blowup_radius(1.0, 3.0, 2, 0.0, 2.0);
        assert!((rb - (2.0 * 4f64.ln()).sqrt()).abs() < 1e-14);
        assert!(bernoulli_foe(3.0, 2, 0.0, 2.0, rb * 1.001).is_err());
    }

    #[test]
    fn bernoulli_satisfies_the_equation() {
        let (p, s, k) = (0.25, 1.0, 2);
        let h = 1e-5;
        for &r in &[0.3, 1.0, 2.5] {
            let u = bernoulli_scaled_foe(p, s, k, 0.1, 0.7, r).unwrap();
            let du = (bernoulli_scaled_foe(p, s, k, 0.1, 0.7, r + h).unwrap()
                - bernoulli_scaled_foe(p, s, k, 0.1, 0.7, r - h).unwrap())
                / (2.0 * h);
            let rhs = -(r / k as f64) * p * (u - u * u * u / s);
            assert!((du - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let exact = bernoulli_foe(1.0, 1, 0.0, 0.5, 2.0).unwrap();
        let err = |h: f64| (rk4_foe(&nl, 1, 0.0, 0.5, h, 2.0).unwrap().points.last().unwrap().1[0] - exact).abs();
        let ratio = err(0.02) / err(0.01);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn constant_solution_is_exact() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        let t = rk4_soe(&nl, 2, 0.0, 1.0, 0.0, 1e-3, 5.0).unwrap();
        assert!(t.points.iter().all(|p| p.1 == [1.0, 0.0]));
    }

    #[test]
    fn event_scan_finds_sine_zeros() {
        let (traj, _) = integrate(
            |_r, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            10.0,
            StepperOptions::default(),
            |_| StepControl::Continue,
        )
        .unwrap();
        let roots = event_scan(&traj, |_r, y| y[0], 0.01);
        assert_eq!(roots.len(), 4);
        for (i, r) in roots.iter().enumerate() {
            let expected = if i == 0 { 0.0 } else { i as f64 * std::f64::consts::PI };
            assert!((r - expected).abs() < 1e-8, "{r}");
        }
        assert!(event_scan(&traj, |_r, y| y[0] + 5.0, 0.01).is_empty());
    }
}

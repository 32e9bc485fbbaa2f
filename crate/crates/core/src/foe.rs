//! First-order regime `u' = -(r/k) g(u)`.
//!
//! Trajectories are evaluated through the separated-variables identity
//! `H(u(r)) = (r^2 - r0^2) / (2k)` with `H(t) = int_t^xi ds / g(s)`, inverted
//! by bracketed root finding. No time stepping is involved.

use serde::{Deserialize, Serialize};

use crate::error::{RadialError, Result};
use crate::nonlinearity::Nonlinearity;
use crate::quad::{integrate, QuadOptions};
use crate::roots::brent;

const QUAD: QuadOptions = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_panels: 4000 };
/// Improper tails larger than this are treated as divergent.
const DIVERGENCE_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoeState {
    pub r: f64,
    pub u: f64,
    pub uprime: f64,
    /// `u'' - u'/r`, which on this regime equals `(r/k)^2 g(u) g'(u)`.
    pub au: f64,
}

impl FoeState {
    pub fn on_trajectory(nl: &Nonlinearity, k: u32, r: f64, u: f64) -> Self {
        let kf = k as f64;
        let g = nl.g(u);
        FoeState { r, u, uprime: -(r / kf) * g, au: (r * r) / (kf * kf) * g * nl.dg(u) }
    }
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        return Err(RadialError::invalid("k", "must be at least 1"));
    }
    Ok(())
}

/// `t / g(t)` for `0 < t`, continuous at the origin.
fn t_over_g(nl: &Nonlinearity, t: f64) -> f64 {
    if t < 1e-150 {
        1.0 / nl.dg(0.0)
    } else {
        t / nl.g(t)
    }
}

/// `int_a^b ds / g(s)` for `0 < a <= b < alpha`.
/// `g(alpha + d)` without the cancellation of forming `alpha + d` first.
fn g_beside_alpha(nl: &Nonlinearity, d: f64) -> f64 {
    let alpha = nl.alpha();
    if let Some((p, scale)) = nl.cubic_params() {
        return p * d * (-2.0 - 3.0 * d / alpha - d * d / scale);
    }
    if d.abs() < 1e-6 * alpha {
        d * (nl.dg(alpha) + 0.5 * d * nl.d2g(alpha))
    } else {
        nl.g(alpha + d)
    }
}

fn inv_g_trapped(nl: &Nonlinearity, a: f64, b: f64) -> Result<f64> {
    let alpha = nl.alpha();
    let split = 0.5 * alpha;
    let mut total = 0.0;
    // lower part in y = ln s, where the 1/s behaviour at 0 becomes a constant
    let lower_hi = b.min(split);
    if a < lower_hi {
        total += integrate(|y: f64| t_over_g(nl, y.exp()), a.ln(), lower_hi.ln(), QUAD)?.value;
    }
    // upper part in z = ln(alpha - s), flattening the pole at alpha
    let upper_lo = a.max(split);
    if upper_lo < b {
        let f = |z: f64| {
            let d = z.exp();
            d / g_beside_alpha(nl, -d)
        };
        total += integrate(f, (alpha - b).ln(), (alpha - upper_lo).ln(), QUAD)?.value;
    }
    Ok(total)
}

/// `int_a^b ds / g(s)` for `alpha < a <= b`, `b` possibly infinite.
/// Returns `-inf` when the tail diverges.
fn inv_g_escaping(nl: &Nonlinearity, a: f64, b: f64) -> Result<f64> {
    let alpha = nl.alpha();
    let mid = a.max(2.0 * alpha);
    let mut total = 0.0;
    let near_hi = b.min(mid);
    if a < near_hi {
        let f = |z: f64| {
            let d = z.exp();
            d / g_beside_alpha(nl, d)
        };
        total += integrate(f, (a - alpha).ln(), (near_hi - alpha).ln(), QUAD)?.value;
    }
    if b > mid {
        if b.is_finite() {
            total += integrate(|s| 1.0 / nl.g(s), mid, b, QUAD)?.value;
        } else {
            // s = mid / w maps [mid, inf) onto (0, 1]
            let f = |w: f64| {
                let s = mid / w;
                mid / (w * w * nl.g(s))
            };
            let tail = if nl.cubic_params().is_some() {
                integrate(f, 0.0, 1.0, QUAD)?.value
            } else {
                match integrate(f, 0.0, 1.0, QUAD) {
                    Ok(q) if q.value.abs() < DIVERGENCE_THRESHOLD && f(1e-8).abs() < DIVERGENCE_THRESHOLD => q.value,
                    _ => f64::NEG_INFINITY,
                }
            };
            total += tail;
        }
    }
    Ok(total)
}

/// `int_lo^hi ds / g(s)` for `0 < lo <= hi` in a single sign region of `g`.
fn inv_g_positive(nl: &Nonlinearity, lo: f64, hi: f64) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    if hi <= nl.alpha() {
        inv_g_trapped(nl, lo, hi)
    } else {
        inv_g_escaping(nl, lo, hi)
    }
}

/// `H(t) = int_t^xi ds / g(s)`, computed by adaptive quadrature.
///
/// `t` and `xi` must lie in the same sign region of `g`. An endpoint sitting
/// on a zero of `g` gives an infinite value.
pub fn h_integral(nl: &Nonlinearity, xi: f64, t: f64) -> Result<f64> {
    if xi == t {
        return Ok(0.0);
    }
    let alpha = nl.alpha();
    let snap = |x: f64| if nl.is_zero_of_g(x) { alpha * (x / alpha).round() } else { x };
    let (xi, t) = (snap(xi), snap(t));
    if xi == t {
        return Ok(0.0);
    }
    let (lo, hi) = if t < xi { (t, xi) } else { (xi, t) };
    for z in [-alpha, 0.0, alpha] {
        if lo < z && z < hi {
            return Err(RadialError::CrossesZeroOfG { from: t, to: xi, zero: z });
        }
    }
    // g is odd, so the integral is unchanged by reflecting both limits
    let (xi, t) = if hi <= 0.0 { (-xi, -t) } else { (xi, t) };
    let (lo, hi) = if t < xi { (t, xi) } else { (xi, t) };
    let orientation = if t < xi { 1.0 } else { -1.0 };

    if lo == 0.0 || lo == alpha || hi == alpha {
        let region_sign = if hi <= alpha { 1.0 } else { -1.0 };
        return Ok(orientation * region_sign * f64::INFINITY);
    }
    Ok(orientation * inv_g_positive(nl, lo, hi)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CurveKind {
    Constant,
    /// `0 < |xi| < alpha`: monotone decay to 0.
    Trapped,
    /// `|xi| > alpha`: monotone escape to infinity.
    Escaping,
}

/// A first-order trajectory through `(r0, xi)`, evaluated in closed form.
#[derive(Debug, Clone)]
pub struct FoeCurve {
    nl: Nonlinearity,
    k: u32,
    r0: f64,
    xi: f64,
    sign: f64,
    kind: CurveKind,
    blowup: f64,
}

impl FoeCurve {
    pub fn new(nl: &Nonlinearity, k: u32, r0: f64, xi: f64) -> Result<Self> {
        check_k(k)?;
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(RadialError::invalid("r0", format!("must be finite and non-negative, got {r0}")));
        }
        if !xi.is_finite() {
            return Err(RadialError::invalid("xi", "must be finite"));
        }
        let kind = if nl.is_zero_of_g(xi) {
            CurveKind::Constant
        } else if xi.abs() < nl.alpha() {
            CurveKind::Trapped
        } else {
            CurveKind::Escaping
        };
        let mut curve = FoeCurve { nl: nl.clone(), k, r0, xi, sign: xi.signum(), kind, blowup: f64::INFINITY };
        if kind == CurveKind::Escaping {
            let tail = -inv_g_escaping(nl, xi.abs(), f64::INFINITY)?;
            if tail.is_finite() {
                curve.blowup = (r0 * r0 + 2.0 * k as f64 * tail).sqrt();
            }
        }
        Ok(curve)
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn is_constant(&self) -> bool {
        self.kind == CurveKind::Constant
    }

    /// Supremum of the validity interval (infinite unless the curve escapes
    /// in finite radius).
    pub fn blowup_radius(&self) -> f64 {
        self.blowup
    }

    fn target(&self, r: f64) -> Result<f64> {
        if r < self.r0 {
            return Err(RadialError::invalid("r", format!("{r} precedes the start radius {}", self.r0)));
        }
        if r >= self.blowup {
            return Err(RadialError::BeyondBlowup { r, blowup: self.blowup });
        }
        Ok((r * r - self.r0 * self.r0) / (2.0 * self.k as f64))
    }

    /// Radius at which the curve takes the value `u`.
    pub fn radius_at(&self, u: f64) -> Result<f64> {
        if self.kind == CurveKind::Constant {
            return Err(RadialError::invalid("u", "constant curve has no radius parametrisation"));
        }
        let h = h_integral(&self.nl, self.xi, u)?;
        if h < 0.0 {
            return Err(RadialError::OutOfRegion { xi: u, reason: "value is not reached for r >= r0".into() });
        }
        Ok((self.r0 * self.r0 + 2.0 * self.k as f64 * h).sqrt())
    }

    pub fn value_at(&self, r: f64) -> Result<f64> {
        let target = self.target(r)?;
        if self.kind == CurveKind::Constant || target == 0.0 {
            return Ok(self.xi);
        }
        let a = self.xi.abs();
        let mag = match self.kind {
            CurveKind::Trapped => {
                let hi = a.ln();
                let f = |y: f64| inv_g_trapped(&self.nl, y.exp(), a).map(|h| h - target);
                invert_trapped(f, hi)?
            }
            CurveKind::Escaping => {
                let f = |y: f64| {
                    let top = a * y.exp();
                    inv_g_escaping(&self.nl, a, top).map(|h| -h - target)
                };
                invert_escaping(f, a)?
            }
            CurveKind::Constant => unreachable!(),
        };
        Ok(self.sign * mag)
    }

    pub fn state_at(&self, r: f64) -> Result<FoeState> {
        let u = self.value_at(r)?;
        Ok(FoeState::on_trajectory(&self.nl, self.k, r, u))
    }

    /// States on an increasing list of radii. Each inversion reuses the
    /// previous one and only integrates `1/g` across the new increment.
    pub fn sample(&self, radii: &[f64]) -> Result<Vec<FoeState>> {
        if self.kind == CurveKind::Constant {
            return Ok(radii.iter().map(|&r| FoeState::on_trajectory(&self.nl, self.k, r, self.xi)).collect());
        }
        let a = self.xi.abs();
        let mut out = Vec::with_capacity(radii.len());
        // (log-coordinate of |u|, accumulated H at that point)
        let mut prev: (f64, f64) = (a.ln(), 0.0);
        let mut prev_r = self.r0;
        for &r in radii {
            if r < prev_r {
                return Err(RadialError::invalid("radii", "must be non-decreasing"));
            }
            prev_r = r;
            let target = self.target(r)?;
            let (y, h) = if target == prev.1 {
                prev
            } else {
                match self.kind {
                    CurveKind::Trapped => {
                        let (y0, h0) = prev;
                        if y0 < (1e-7 * self.nl.alpha()).ln() {
                            // 1/g(s) = 1/(g'(0) s) + O(s) below here
                            (y0 - self.nl.dg(0.0) * (target - h0), target)
                        } else {
                            let f = |y: f64| inv_g_trapped(&self.nl, y.exp(), y0.exp()).map(|d| h0 + d - target);
                            let y = invert_trapped(f, y0).map(|m| if m > 0.0 { m.ln() } else { -800.0 })?;
                            let h = if y < -745.0 { target } else { h0 + inv_g_trapped(&self.nl, y.exp(), y0.exp())? };
                            (y, h)
                        }
                    }
                    CurveKind::Escaping => {
                        let (y0, h0) = prev;
                        let base = y0.exp();
                        let f = |y: f64| inv_g_escaping(&self.nl, base, base * y.exp()).map(|d| h0 - d - target);
                        let dy = invert_escaping(f, base).map(|m| (m / base).ln())?;
                        let h = h0 - inv_g_escaping(&self.nl, base, base * dy.exp())?;
                        (y0 + dy, h)
                    }
                    CurveKind::Constant => unreachable!(),
                }
            };
            prev = (y, h);
            let u = if y < -745.0 { 0.0 } else { self.sign * y.exp() };
            out.push(FoeState::on_trajectory(&self.nl, self.k, r, u));
        }
        Ok(out)
    }
}

/// Solves `f(y) = 0` for `y <= hi`, where `f` decreases in `y` and
/// `f(hi) <= 0`; returns `exp(y)`, or 0 when the root underflows.
fn invert_trapped<F: Fn(f64) -> Result<f64>>(f: F, hi: f64) -> Result<f64> {
    let f_hi = f(hi)?;
    if f_hi >= 0.0 {
        return Ok(hi.exp());
    }
    let mut step = 0.5;
    let mut lo = hi - step;
    let mut f_lo = f(lo)?;
    while f_lo < 0.0 {
        if lo <= -740.0 {
            return Ok(0.0);
        }
        step *= 2.0;
        lo = (hi - step).max(-740.0);
        f_lo = f(lo)?;
    }
    let mut err = None;
    let y = brent(
        |y| match f(y) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-14,
        200,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(y.exp())
}

/// Solves `f(y) = 0` for `y >= 0`, `f` increasing with `f(0) <= 0`;
/// returns `base * exp(y)`.
fn invert_escaping<F: Fn(f64) -> Result<f64>>(f: F, base: f64) -> Result<f64> {
    let f0 = f(0.0)?;
    if f0 >= 0.0 {
        return Ok(base);
    }
    let mut hi = 0.5;
    let mut f_hi = f(hi)?;
    while f_hi < 0.0 {
        hi *= 2.0;
        if base * hi.exp() > f64::MAX / 4.0 {
            return Err(RadialError::BeyondBlowup { r: f64::NAN, blowup: f64::NAN });
        }
        f_hi = f(hi)?;
    }
    let mut err = None;
    let y = brent(
        |y| match f(y) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        hi,
        1e-15,
        200,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(base * y.exp())
}

/// Closed-form state of the first-order trajectory through `(r0, xi)` at `r`.
pub fn foe_closed(nl: &Nonlinearity, k: u32, r0: f64, xi: f64, r: f64) -> Result<FoeState> {
    FoeCurve::new(nl, k, r0, xi)?.state_at(r)
}

/// Supremum of the validity interval for `|xi| > alpha`; infinite for the
/// constant curves `xi = ±alpha` or when `int^inf ds/|g|` diverges.
pub fn foe_blowup_radius(nl: &Nonlinearity, k: u32, r0: f64, xi: f64) -> Result<f64> {
    check_k(k)?;
    if nl.is_zero_of_g(xi) && xi != 0.0 {
        return Ok(f64::INFINITY);
    }
    if xi.abs() <= nl.alpha() {
        return Err(RadialError::OutOfRegion { xi, reason: "blow-up requires |xi| > alpha".into() });
    }
    Ok(FoeCurve::new(nl, k, r0, xi)?.blowup_radius())
}

/// Radius where a first-order trajectory started at `(r0, xi)` reaches
/// `beta` and hands over to the second-order regime. `None` when the
/// trajectory never leaves the first-order regime.
pub fn foe_switch_radius(nl: &Nonlinearity, k: u32, r0: f64, xi: f64) -> Result<Option<f64>> {
    check_k(k)?;
    let (alpha, beta) = (nl.alpha(), nl.beta());
    if xi > beta && xi < alpha && !nl.is_zero_of_g(xi) {
        let h = h_integral(nl, xi, beta)?;
        return Ok(Some((r0 * r0 + 2.0 * k as f64 * h).sqrt()));
    }
    if (xi >= -beta && xi < 0.0) || (xi < -alpha && !nl.is_zero_of_g(xi)) {
        return Ok(None);
    }
    Err(RadialError::OutOfRegion {
        xi,
        reason: "first-order regime only starts in (-inf,-alpha) U [-beta,0) U (beta,alpha)".into(),
    })
}

/// `(Au, (Au)')` along a first-order trajectory.
pub fn foe_diagnostics(nl: &Nonlinearity, k: u32, state: &FoeState) -> Result<(f64, f64)> {
    check_k(k)?;
    let r = state.r;
    if r == 0.0 {
        return Err(RadialError::invalid("r", "the derivative of Au is not defined at r = 0"));
    }
    let kf = k as f64;
    let (g, dg, d2g) = (nl.g(state.u), nl.dg(state.u), nl.d2g(state.u));
    let au = r * r / (kf * kf) * g * dg;
    let up = state.uprime;
    let au_prime = (2.0 / r - r / kf * dg) * au - r / kf * up * up * d2g;
    Ok((au, au_prime))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic1() -> Nonlinearity {
        Nonlinearity::cubic(1.0).unwrap()
    }

    // u(r) for g = u - u^3 via w = u^-2: w - 1 = (xi^-2 - 1) exp((r^2 - r0^2)/k)
    fn bernoulli(k: f64, r0: f64, xi: f64, r: f64) -> f64 {
        xi.signum() * (1.0 + (xi.powi(-2) - 1.0) * ((r * r - r0 * r0) / k).exp()).powf(-0.5)
    }

    #[test]
    fn h_integral_reference_value() {
        // ln(s / sqrt(1 - s^2)) between beta and 0.8
        let nl = cubic1();
        let h = h_integral(&nl, 0.8, nl.beta()).unwrap();
        let exact = (0.8f64 / 0.6).ln() + 0.5 * 2f64.ln();
        assert!((h - exact).abs() < 1e-12, "{h} vs {exact}");
        assert!((h - 0.6343).abs() < 1e-4);
    }

    #[test]
    fn h_integral_empty_and_orientation() {
        let nl = cubic1();
        assert_eq!(h_integral(&nl, 0.3, 0.3).unwrap(), 0.0);
        let a = h_integral(&nl, 0.7, 0.2).unwrap();
        let b = h_integral(&nl, 0.2, 0.7).unwrap();
        assert!((a + b).abs() < 1e-13);
        let neg = h_integral(&nl, -0.7, -0.2).unwrap();
        assert!((a - neg).abs() < 1e-13);
    }

    #[test]
    fn h_integral_diverges_at_origin() {
        let nl = cubic1();
        let mut last = 0.0;
        for e in [2, 8, 32, 128, 300] {
            let h = h_integral(&nl, 0.5, 10f64.powi(-e)).unwrap();
            assert!(h > last);
            last = h;
        }
        assert!(last > 600.0);
        assert_eq!(h_integral(&nl, 0.5, 0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn h_integral_rejects_zero_crossing() {
        let nl = cubic1();
        assert!(matches!(h_integral(&nl, 0.5, -0.5), Err(RadialError::CrossesZeroOfG { .. })));
        assert!(matches!(h_integral(&nl, 0.5, 1.5), Err(RadialError::CrossesZeroOfG { .. })));
        assert!(matches!(h_integral(&nl, -2.0, -0.5), Err(RadialError::CrossesZeroOfG { .. })));
    }

    #[test]
    fn closed_form_reference_value() {
        let nl = cubic1();
        let s = foe_closed(&nl, 1, 0.0, 0.5, 1.0).unwrap();
        let exact = (1.0 + 3.0 * 1f64.exp()).powf(-0.5);
        assert!((s.u - exact).abs() < 1e-12);
        assert!((s.u - 0.33051).abs() < 1e-5);
        assert_eq!(s.uprime, -nl.g(s.u));
    }

    #[test]
    fn constant_curves() {
        let nl = cubic1();
        for xi in [-1.0, 0.0, 1.0] {
            let s = foe_closed(&nl, 2, 0.0, xi, 7.0).unwrap();
            assert_eq!(s.u, xi);
            assert_eq!(s.uprime, 0.0);
        }
    }

    #[test]
    fn trapped_curve_decreases_to_zero() {
        let nl = cubic1();
        let curve = FoeCurve::new(&nl, 1, 0.0, 0.5).unwrap();
        let radii: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
        let states = curve.sample(&radii).unwrap();
        for w in states.windows(2) {
            assert!(w[1].u < w[0].u || w[1].u == 0.0);
            assert!(w[1].u >= 0.0 && w[1].u <= 0.5);
        }
        assert!(states.last().unwrap().u < 1e-80);
    }

    #[test]
    fn sampled_matches_bernoulli_and_pointwise() {
        let nl = cubic1();
        for &(k, r0, xi) in &[(1u32, 0.0, 0.5), (2, 0.3, -0.9), (3, 1.0, 0.999), (1, 0.0, 0.01)] {
            let curve = FoeCurve::new(&nl, k, r0, xi).unwrap();
            let radii: Vec<f64> = (0..=300).map(|i| r0 + i as f64 * 0.02).collect();
            let states = curve.sample(&radii).unwrap();
            for s in &states {
                let exact = bernoulli(k as f64, r0, xi, s.r);
                assert!((s.u - exact).abs() < 1e-10, "k={k} xi={xi} r={} u={} exact={exact}", s.r, s.u);
            }
            let mid = radii[150];
            let pointwise = curve.value_at(mid).unwrap();
            assert!((pointwise - bernoulli(k as f64, r0, xi, mid)).abs() < 1e-10);
        }
    }

    #[test]
    fn blowup_reference_values() {
        let nl = cubic1();
        let r1 = foe_blowup_radius(&nl, 1, 0.0, 2.0).unwrap();
        let exact = (4f64 / 3.0).ln().sqrt();
        assert!((r1 - exact).abs() < 1e-10, "{r1} vs {exact}");
        let r2 = foe_blowup_radius(&nl, 2, 0.0, 2.0).unwrap();
        assert!((r2 - exact * 2f64.sqrt()).abs() < 1e-10);
        assert!((r2 - 0.7586).abs() < 1e-3);
        assert_eq!(foe_blowup_radius(&nl, 1, 0.0, 1.0).unwrap(), f64::INFINITY);
        assert!(foe_blowup_radius(&nl, 1, 0.0, 0.5).is_err());
        // mirrored
        assert!((foe_blowup_radius(&nl, 1, 0.0, -2.0).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn escaping_curve_matches_bernoulli_until_blowup() {
        let nl = cubic1();
        let curve = FoeCurve::new(&nl, 1, 0.0, -2.0).unwrap();
        let rb = curve.blowup_radius();
        let radii: Vec<f64> = (0..100).map(|i| rb * (i as f64) / 100.0).collect();
        for s in curve.sample(&radii).unwrap() {
            let exact = bernoulli(1.0, 0.0, -2.0, s.r);
            assert!((s.u - exact).abs() <= 1e-10 * exact.abs().max(1.0), "r={} {} {exact}", s.r, s.u);
        }
        assert!(matches!(curve.value_at(rb * 1.01), Err(RadialError::BeyondBlowup { .. })));
        let r_cap = curve.radius_at(-1e6).unwrap();
        assert!(r_cap < rb && rb - r_cap < 1e-6);
    }

    #[test]
    fn switch_radius_cases() {
        let nl = cubic1();
        let r = foe_switch_radius(&nl, 1, 0.0, 0.8).unwrap().unwrap();
        let exact = (2.0 * ((0.8f64 / 0.6).ln() + 0.5 * 2f64.ln())).sqrt();
        assert!((r - exact).abs() < 1e-12);
        assert!((r - 1.1264).abs() < 1e-3);
        assert_eq!(foe_switch_radius(&nl, 1, 0.0, -0.5).unwrap(), None);
        assert_eq!(foe_switch_radius(&nl, 1, 0.0, -nl.beta()).unwrap(), None);
        assert_eq!(foe_switch_radius(&nl, 1, 0.0, -2.0).unwrap(), None);
        assert!(foe_switch_radius(&nl, 1, 0.0, nl.beta()).is_err());
        assert!(foe_switch_radius(&nl, 1, 0.0, 0.3).is_err());
        assert!(foe_switch_radius(&nl, 1, 0.0, 1.5).is_err());
        // reaching beta at the switch radius
        let u = foe_closed(&nl, 1, 0.0, 0.8, r).unwrap().u;
        assert!((u - nl.beta()).abs() < 1e-10);
    }

    #[test]
    fn diagnostics_at_beta() {
        let nl = cubic1();
        for k in 1..=3u32 {
            let r = 1.3;
            let s = FoeState::on_trajectory(&nl, k, r, nl.beta());
            let (au, aup) = foe_diagnostics(&nl, k, &s).unwrap();
            assert!(au.abs() < 1e-15);
            let kf = k as f64;
            let expected = -(r.powi(3) / kf.powi(3)) * nl.g(nl.beta()).powi(2) * nl.d2g(nl.beta());
            assert!((aup - expected).abs() < 1e-13);
            assert!(aup > 0.0);
            let s = FoeState::on_trajectory(&nl, k, r, -nl.beta());
            let (au, aup) = foe_diagnostics(&nl, k, &s).unwrap();
            assert!(au.abs() < 1e-15 && aup < 0.0);
        }
        let s = FoeState::on_trajectory(&nl, 1, 0.7, 0.8);
        assert!(foe_diagnostics(&nl, 1, &s).unwrap().0 < 0.0);
        let s0 = FoeState::on_trajectory(&nl, 1, 0.0, 0.8);
        assert!(foe_diagnostics(&nl, 1, &s0).is_err());
    }

    #[test]
    fn au_stays_negative_before_switch() {
        let nl = cubic1();
        let xi = 0.9;
        let rs = foe_switch_radius(&nl, 2, 0.0, xi).unwrap().unwrap();
        let curve = FoeCurve::new(&nl, 2, 0.0, xi).unwrap();
        let radii: Vec<f64> = (1..200).map(|i| rs * i as f64 / 200.0).collect();
        for s in curve.sample(&radii).unwrap() {
            assert!(s.au < 0.0);
        }
        assert!((curve.value_at(rs).unwrap() - nl.beta()).abs() < 1e-10);
    }
}

//! Threshold constants: the critical start value `xi*`, the map between a
//! switch radius `r0` and the start value that reaches `beta` there, the
//! bounds on the transition radius for `k >= 2`, and the A/C bisection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builder::{build_radial, ClassKind, SolveConfig};
use crate::error::{RadialError, Result};
use crate::foe::h_integral;
use crate::nonlinearity::{Nonlinearity, NonlinearitySummary};
use crate::roots::brent;
use crate::soe::{soe_integrate, Crossing, EventSpec, SoeStart, Termination};

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        return Err(RadialError::invalid("k", "must be at least 1"));
    }
    Ok(())
}

/// Unique root in `(beta, alpha)` of
/// `k g(beta)^2 int_beta^x ds/g(s) = G(alpha) - G(beta)`.
pub fn xi_star(nl: &Nonlinearity, k: u32) -> Result<f64> {
    check_k(k)?;
    let (alpha, beta) = (nl.alpha(), nl.beta());
    let gb = nl.g(beta);
    let rhs = nl.potential(alpha) - nl.potential(beta);
    let f = |x: f64| k as f64 * gb * gb * h_integral(nl, x, beta).unwrap_or(f64::NAN) - rhs;
    // approach alpha geometrically until the sign flips
    let mut hi = 0.5 * (alpha + beta);
    let mut tries = 0;
    while !(f(hi) > 0.0) {
        hi = alpha - 0.5 * (alpha - hi);
        tries += 1;
        if tries > 60 || hi >= alpha {
            return Err(RadialError::Nonlinearity {
                label: nl.label().to_string(),
                detail: "defining identity of xi* has no root in (beta, alpha)".into(),
            });
        }
    }
    brent(f, beta, hi, 1e-14, 200)
}

/// `sqrt(2k int_beta^xi ds/g(s))`: the radius at which the first-order
/// trajectory from `xi` reaches `beta`.
pub fn r0_of_xi(nl: &Nonlinearity, k: u32, xi: f64) -> Result<f64> {
    check_k(k)?;
    if !(xi > nl.beta() && xi < nl.alpha()) || nl.is_zero_of_g(xi) {
        return Err(RadialError::OutOfRegion { xi, reason: "requires beta < xi < alpha".into() });
    }
    Ok((2.0 * k as f64 * h_integral(nl, xi, nl.beta())?).sqrt())
}

/// Inverse of [`r0_of_xi`], solved in the variable `ln(alpha - xi)`.
pub fn xi_of_r0(nl: &Nonlinearity, k: u32, r0: f64) -> Result<f64> {
    check_k(k)?;
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(RadialError::invalid("r0", format!("must be positive and finite, got {r0}")));
    }
    let (alpha, beta) = (nl.alpha(), nl.beta());
    let target = r0 * r0 / (2.0 * k as f64);
    let f = |z: f64| h_integral(nl, alpha - z.exp(), beta).map_or(f64::NAN, |h| h - target);
    let z_hi = (alpha - beta).ln();
    let mut z_lo = z_hi - 1.0;
    loop {
        let v = f(z_lo);
        if v > 0.0 {
            break;
        }
        if v.is_nan() || alpha - z_lo.exp() >= alpha {
            return Err(RadialError::OutOfRegion {
                xi: alpha,
                reason: format!("r0 = {r0} maps to a start value not representable below alpha"),
            });
        }
        z_lo -= 2.0 * (z_hi - z_lo);
    }
    let z = brent(f, z_lo, z_hi, 1e-15, 200)?;
    let d = z.exp();
    if d < 8.0 * f64::EPSILON * alpha {
        return Err(RadialError::OutOfRegion {
            xi: alpha - d,
            reason: format!("r0 = {r0} maps to a start value within a few ulps of alpha"),
        });
    }
    Ok(alpha - d)
}

/// Closed-form bounds enclosing the A/C transition radius (`k >= 2`).
pub fn r0_bounds(nl: &Nonlinearity, k: u32) -> Result<(f64, f64)> {
    if k < 2 {
        return Err(RadialError::invalid("k", "radius bounds need k >= 2"));
    }
    let kf = k as f64;
    let (alpha, beta) = (nl.alpha(), nl.beta());
    let gb = nl.g(beta);
    let (ga, gbeta) = (nl.potential(alpha), nl.potential(beta));
    let pre = kf * 2f64.sqrt() / gb;
    let lower = pre * (ga - gbeta / kf).sqrt();
    let upper = pre * (ga - gbeta + (kf - 1.0) / kf * gb * (alpha + beta)).sqrt();
    Ok((lower, upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum R0Class {
    /// Turns at a value in `(-alpha, 0)` and decays to 0.
    A,
    /// Falls through `-alpha` and escapes downward.
    C,
    /// Neither decided within the (extended) truncation radius.
    NearBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct R0Outcome {
    pub r0: f64,
    pub class: R0Class,
    /// Radius of the deciding event, or the last truncation radius tried.
    pub decided_at: f64,
    pub truncation: f64,
}

/// Classifies the second-order trajectory started at `(r0, beta, -g(beta) r0 / k)`.
/// The truncation radius doubles up to twice before giving up.
pub fn classify_r0(nl: &Nonlinearity, k: u32, r0: f64, config: &SolveConfig) -> Result<R0Outcome> {
    if k < 2 {
        return Err(RadialError::invalid("k", "the switch-start family is studied for k >= 2"));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(RadialError::invalid("r0", format!("must be positive and finite, got {r0}")));
    }
    let (alpha, beta) = (nl.alpha(), nl.beta());
    let start = SoeStart { r0, xi: beta, theta: -nl.g(beta) * r0 / k as f64 };
    let events = [
        EventSpec { terminal: true, ..EventSpec::extrema() },
        EventSpec::level(-alpha, Crossing::Falling, true),
    ];
    let mut truncation = config.truncation.max(r0 + 1.0);
    for _ in 0..3 {
        let mut limits = config.soe_limits();
        limits.truncation = truncation;
        let run = soe_integrate(nl, k, start, &events, &limits)?;
        if let Termination::Event(idx) = run.termination {
            let hit = run.hits.last().expect("terminal event recorded");
            let class = if idx == 1 {
                R0Class::C
            } else if hit.state.u > -alpha && hit.state.u < 0.0 {
                R0Class::A
            } else {
                R0Class::NearBoundary
            };
            return Ok(R0Outcome { r0, class, decided_at: hit.r, truncation });
        }
        if run.termination == Termination::BlowUp {
            let class = if run.end_state().u < -alpha { R0Class::C } else { R0Class::NearBoundary };
            return Ok(R0Outcome { r0, class, decided_at: run.r_end(), truncation });
        }
        truncation *= 2.0;
    }
    Ok(R0Outcome { r0, class: R0Class::NearBoundary, decided_at: truncation / 2.0, truncation: truncation / 2.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    /// Largest radius verified as A.
    pub r_lo: f64,
    /// Smallest radius verified as C.
    pub r_hi: f64,
    pub evaluations: usize,
    /// Midpoints that could not be decided.
    pub undecided: Vec<f64>,
}

/// Bisection of the A/C boundary starting from the closed-form bounds,
/// whose classes are checked first.
pub fn bisect_boundary(nl: &Nonlinearity, k: u32, tol: f64, config: &SolveConfig) -> Result<Bracket> {
    if !(tol > 0.0) {
        return Err(RadialError::invalid("tol", "must be positive"));
    }
    let (lower, upper) = r0_bounds(nl, k)?;
    let mut evaluations = 0;
    let mut classify = |r: f64| {
        evaluations += 1;
        classify_r0(nl, k, r, config).map(|o| o.class)
    };
    let c_lo = classify(lower)?;
    if c_lo != R0Class::A {
        return Err(RadialError::BracketMisclassified { r0: lower, expected: "A", got: format!("{c_lo:?}") });
    }
    let c_hi = classify(upper)?;
    if c_hi != R0Class::C {
        return Err(RadialError::BracketMisclassified { r0: upper, expected: "C", got: format!("{c_hi:?}") });
    }
    let (mut lo, mut hi) = (lower, upper);
    let mut undecided = Vec::new();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match classify(mid)? {
            R0Class::A => lo = mid,
            R0Class::C => hi = mid,
            R0Class::NearBoundary => {
                undecided.push(mid);
                let left = 0.5 * (lo + mid);
                let right = 0.5 * (mid + hi);
                let mut moved = false;
                if classify(left)? == R0Class::A {
                    lo = left;
                    moved = true;
                }
                if classify(right)? == R0Class::C {
                    hi = right;
                    moved = true;
                }
                if !moved {
                    break;
                }
            }
        }
    }
    Ok(Bracket { r_lo: lo, r_hi: hi, evaluations, undecided })
}

/// Threshold constants for one `(g, k)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub nonlinearity: NonlinearitySummary,
    pub k: u32,
    pub xi_star: f64,
    pub r0_lower_bound: Option<f64>,
    pub r0_upper_bound: Option<f64>,
    pub r0_bracket: Option<(f64, f64)>,
    pub xi_bracket: Option<(f64, f64)>,
    pub tol: f64,
    pub evaluations: usize,
}

/// `xi*`, and for `k >= 2` the radius bounds, the bisection bracket and its
/// image in start values.
pub fn thresholds(nl: &Nonlinearity, k: u32, tol: f64, config: &SolveConfig) -> Result<ThresholdSet> {
    let xs = xi_star(nl, k)?;
    let mut set = ThresholdSet {
        nonlinearity: nl.summary(),
        k,
        xi_star: xs,
        r0_lower_bound: None,
        r0_upper_bound: None,
        r0_bracket: None,
        xi_bracket: None,
        tol,
        evaluations: 0,
    };
    if k >= 2 {
        let (lower, upper) = r0_bounds(nl, k)?;
        let b = bisect_boundary(nl, k, tol, config)?;
        set.r0_lower_bound = Some(lower);
        set.r0_upper_bound = Some(upper);
        set.r0_bracket = Some((b.r_lo, b.r_hi));
        set.xi_bracket = Some((xi_of_r0(nl, k, b.r_lo)?, xi_of_r0(nl, k, b.r_hi)?));
        set.evaluations = b.evaluations;
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct K1ThresholdReport {
    pub xi_star: f64,
    /// `g(beta)^2 int_beta^xi* ds/g + G(beta) - G(alpha)`.
    pub energy_gap: f64,
    pub delta: f64,
    pub below: Option<ClassKind>,
    pub above: Option<ClassKind>,
    pub passed: bool,
}

/// Checks the `k = 1` threshold: the energy reached at the first switch
/// equals `G(alpha)`, and the solutions just below and above `xi*` fall in
/// the localized and sign-changing unbounded families.
pub fn k1_threshold_check(nl: &Nonlinearity, config: &SolveConfig) -> Result<K1ThresholdReport> {
    let xs = xi_star(nl, 1)?;
    let beta = nl.beta();
    let gb = nl.g(beta);
    let energy_gap = gb * gb * h_integral(nl, xs, beta)? + nl.potential(beta) - nl.potential(nl.alpha());
    let delta = 1e-3;
    let kind = |xi: f64| build_radial(nl, 1, xi, config).ok().and_then(|s| s.classification).map(|c| c.kind);
    let below = kind(xs - delta);
    let above = kind(xs + delta);
    let passed = energy_gap.abs() <= 1e-10
        && below == Some(ClassKind::LocalizedDip)
        && above == Some(ClassKind::SignChangingUnbounded);
    Ok(K1ThresholdReport { xi_star: xs, energy_gap, delta, below, above, passed })
}

/// Classifies every radius of `r0s` in parallel.
pub fn scan_r0(nl: &Nonlinearity, k: u32, r0s: &[f64], config: &SolveConfig) -> Vec<Result<R0Outcome>> {
    r0s.par_iter().map(|&r0| classify_r0(nl, k, r0, config)).collect()
}

/// Radii classified A that lie above some radius classified C. Empty when
/// the scan is consistent with a single A/C transition.
pub fn interleaving(outcomes: &[R0Outcome]) -> Vec<f64> {
    let mut sorted: Vec<&R0Outcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| a.r0.total_cmp(&b.r0));
    let first_c = sorted.iter().find(|o| o.class == R0Class::C).map(|o| o.r0);
    match first_c {
        Some(c) => sorted.iter().filter(|o| o.class == R0Class::A && o.r0 > c).map(|o| o.r0).collect(),
        None => Vec::new(),
    }
}

//! Odd bistable nonlinearities `g` with zeros `0, ±alpha` and `g'(±beta) = 0`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{RadialError, Result};

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Kind {
    /// `prefactor * (u - u^3 / scale)`
    Cubic { prefactor: f64, scale: f64 },
    Custom { eval: Arc<ScalarFn>, deriv: Arc<ScalarFn>, deriv2: Arc<ScalarFn>, potential: Arc<ScalarFn> },
}

/// A bistable nonlinearity together with its derivatives, its potential
/// `G(t) = int_0^t g`, and the structural constants `alpha` and `beta`.
///
/// Values are immutable once built and cheap to clone.
#[derive(Clone)]
pub struct Nonlinearity {
    label: String,
    alpha: f64,
    beta: f64,
    kind: Kind,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("label", &self.label)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .finish()
    }
}

/// `{label, alpha, beta}` as written into run summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySummary {
    pub label: String,
    pub alpha: f64,
    pub beta: f64,
}

impl Nonlinearity {
    /// `g(u) = u - u^3 / scale`.
    pub fn cubic(scale: f64) -> Result<Self> {
        Self::scaled_cubic(1.0, scale).map(|mut nl| {
            nl.label = format!("cubic:{scale}");
            nl
        })
    }

    /// `g(u) = prefactor * (u - u^3 / scale)`.
    pub fn scaled_cubic(prefactor: f64, scale: f64) -> Result<Self> {
        if !(prefactor > 0.0 && prefactor.is_finite()) {
            return Err(RadialError::invalid("prefactor", format!("must be positive, got {prefactor}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(RadialError::invalid("scale", format!("must be positive, got {scale}")));
        }
        Ok(Nonlinearity {
            label: format!("scaled-cubic:{prefactor}:{scale}"),
            alpha: scale.sqrt(),
            beta: (scale / 3.0).sqrt(),
            kind: Kind::Cubic { prefactor, scale },
        })
    }

    /// Builds a nonlinearity from user callbacks and validates it on the
    /// default grid. Fails with the first recorded violation.
    pub fn custom<G, D, D2, P>(label: &str, alpha: f64, beta: f64, g: G, dg: D, d2g: D2, potential: P) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
        P: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let nl = Self::custom_unchecked(label, alpha, beta, g, dg, d2g, potential)?;
        let report = validate_bistable(&nl, &SampleGrid::default());
        if let Some(v) = report.violations.first() {
            return Err(RadialError::Nonlinearity {
                label: label.to_string(),
                detail: format!("{} at u = {} (observed {})", v.property, v.u, v.observed),
            });
        }
        Ok(nl)
    }

    /// Like [`Nonlinearity::custom`] but skips validation. Only the ordering
    /// `0 < beta < alpha` is enforced.
    pub fn custom_unchecked<G, D, D2, P>(
        label: &str,
        alpha: f64,
        beta: f64,
        g: G,
        dg: D,
        d2g: D2,
        potential: P,
    ) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
        P: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(beta > 0.0 && beta < alpha && alpha.is_finite()) {
            return Err(RadialError::invalid("alpha/beta", format!("need 0 < beta < alpha, got beta={beta}, alpha={alpha}")));
        }
        Ok(Nonlinearity {
            label: label.to_string(),
            alpha,
            beta,
            kind: Kind::Custom {
                eval: Arc::new(g),
                deriv: Arc::new(dg),
                deriv2: Arc::new(d2g),
                potential: Arc::new(potential),
            },
        })
    }

    #[inline]
    pub fn g(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Cubic { prefactor, scale } => prefactor * (u - u * u * u / scale),
            Kind::Custom { eval, .. } => eval(u),
        }
    }

    #[inline]
    pub fn dg(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Cubic { prefactor, scale } => prefactor * (1.0 - 3.0 * u * u / scale),
            Kind::Custom { deriv, .. } => deriv(u),
        }
    }

    #[inline]
    pub fn d2g(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Cubic { prefactor, scale } => -6.0 * prefactor * u / scale,
            Kind::Custom { deriv2, .. } => deriv2(u),
        }
    }

    /// `G(t) = int_0^t g(s) ds`.
    #[inline]
    pub fn potential(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Cubic { prefactor, scale } => {
                let t2 = t * t;
                prefactor * (0.5 * t2 - 0.25 * t2 * t2 / scale)
            }
            Kind::Custom { potential, .. } => potential(t),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `(prefactor, scale)` when `g` belongs to the cubic family.
    pub fn cubic_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::Cubic { prefactor, scale } => Some((prefactor, scale)),
            Kind::Custom { .. } => None,
        }
    }

    pub fn summary(&self) -> NonlinearitySummary {
        NonlinearitySummary { label: self.label.clone(), alpha: self.alpha, beta: self.beta }
    }

    /// True when `u` is one of `-alpha, 0, alpha` up to a few ulps.
    pub fn is_zero_of_g(&self, u: f64) -> bool {
        let eps = 8.0 * f64::EPSILON * self.alpha;
        u == 0.0 || (u.abs() - self.alpha).abs() <= eps
    }
}

/// Accepts `cubic:<scale>` and `scaled-cubic:<prefactor>:<scale>`.
impl FromStr for Nonlinearity {
    type Err = RadialError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<f64> {
            p.trim().parse::<f64>().map_err(|_| RadialError::invalid("g", format!("cannot parse number `{p}` in `{s}`")))
        };
        match parts.as_slice() {
            ["cubic", scale] => Nonlinearity::cubic(num(scale)?),
            ["scaled-cubic", pre, scale] => Nonlinearity::scaled_cubic(num(pre)?, num(scale)?),
            _ => Err(RadialError::invalid("g", format!("unknown nonlinearity `{s}` (expected cubic:S or scaled-cubic:P:S)"))),
        }
    }
}

/// Sampling grid for [`validate_bistable`]: `points` equispaced values
/// covering `[-half_width * alpha, half_width * alpha]`.
#[derive(Debug, Clone, Copy)]
pub struct SampleGrid {
    pub half_width: f64,
    pub points: usize,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid { half_width: 2.0, points: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub property: String,
    pub u: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BistableReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

/// Samples every structural property of the bistable assumption on `grid`
/// and records the first violation of each.
pub fn validate_bistable(nl: &Nonlinearity, grid: &SampleGrid) -> BistableReport {
    let alpha = nl.alpha();
    let beta = nl.beta();
    let n = grid.points.max(1000);
    let lo = -grid.half_width.max(2.0) * alpha;
    let hi = -lo;
    let mut violations: Vec<Violation> = Vec::new();
    let mut record = |property: &str, u: f64, observed: f64| {
        if !violations.iter().any(|v| v.property == property) {
            violations.push(Violation { property: property.to_string(), u, observed });
        }
    };

    let fd_step = 1e-5 * alpha.max(1.0);
    for i in 0..n {
        let u = lo + (hi - lo) * (i as f64) / ((n - 1) as f64);
        let g = nl.g(u);
        let odd = g + nl.g(-u);
        if odd.abs() > 1e-12 * (1.0 + g.abs()) {
            record("odd", u, odd);
        }
        let a = u.abs();
        let sg = g * u.signum();
        if a > 0.0 && a < alpha && sg <= 0.0 {
            record("g_positive_below_alpha", u, g);
        }
        if a > alpha && sg >= 0.0 {
            record("g_negative_beyond_alpha", u, g);
        }
        let dg = nl.dg(u);
        if a < beta && dg <= 0.0 {
            record("dg_positive_below_beta", u, dg);
        }
        if a > beta && dg >= 0.0 {
            record("dg_negative_beyond_beta", u, dg);
        }
        let fd = (nl.potential(u + fd_step) - nl.potential(u - fd_step)) / (2.0 * fd_step);
        if (fd - g).abs() > 1e-6 * (1.0 + g.abs()) {
            record("potential_derivative", u, fd - g);
        }
    }

    let g0 = nl.potential(0.0);
    if g0 != 0.0 {
        record("potential_at_zero", 0.0, g0);
    }
    let ga = nl.g(alpha);
    if ga.abs() > 1e-12 * (1.0 + nl.g(beta).abs()) {
        record("g_vanishes_at_alpha", alpha, ga);
    }
    let db = nl.dg(beta);
    if db.abs() > 1e-12 * (1.0 + nl.dg(0.0).abs()) {
        record("dg_vanishes_at_beta", beta, db);
    }
    let d2b = nl.d2g(beta);
    if !(d2b < 0.0) {
        record("d2g_negative_at_beta", beta, d2b);
    }

    BistableReport { passed: violations.is_empty(), violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};

    #[test]
    fn cubic_constants() {
        let nl = Nonlinearity::cubic(1.0).unwrap();
        assert_eq!(nl.alpha(), 1.0);
        assert!((nl.beta() - 0.577_350_269_189_625_8).abs() < 1e-15);
        let nl3 = Nonlinearity::cubic(3.0).unwrap();
        assert!((nl3.alpha() - 3f64.sqrt()).abs() < 1e-15);
        assert!((nl3.beta() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_cubic_values() {
        let nl = Nonlinearity::scaled_cubic(0.25, 1.0).unwrap();
        assert!((nl.g(0.6) - 0.096).abs() < 1e-15);
        assert!((nl.potential(1.0) - 0.0625).abs() < 1e-15);
        assert_eq!(nl.alpha(), 1.0);
        assert!((nl.beta() - Nonlinearity::cubic(1.0).unwrap().beta()).abs() < 1e-15);
        let nl3 = Nonlinearity::scaled_cubic(1.0, 3.0).unwrap();
        assert!((nl3.g(1.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_parameters() {
        assert!(Nonlinearity::cubic(0.0).is_err());
        assert!(Nonlinearity::cubic(-1.0).is_err());
        assert!(Nonlinearity::scaled_cubic(-0.25, 1.0).is_err());
    }

    #[test]
    fn parses_cli_specs() {
        let nl: Nonlinearity = "cubic:3".parse().unwrap();
        assert_eq!(nl.beta(), 1.0);
        let nl: Nonlinearity = "scaled-cubic:0.25:1".parse().unwrap();
        assert_eq!(nl.cubic_params(), Some((0.25, 1.0)));
        assert!("quartic:2".parse::<Nonlinearity>().is_err());
        assert!("cubic:x".parse::<Nonlinearity>().is_err());
    }

    #[test]
    fn cubic_family_passes_validation() {
        for nl in [Nonlinearity::cubic(1.0).unwrap(), Nonlinearity::scaled_cubic(0.25, 1.0).unwrap(), Nonlinearity::cubic(3.0).unwrap()] {
            let report = validate_bistable(&nl, &SampleGrid::default());
            assert!(report.passed, "{:?}: {:?}", nl, report.violations);
        }
    }

    #[test]
    fn sine_fails_validation() {
        use std::f64::consts::PI;
        let nl = Nonlinearity::custom_unchecked("sin", PI, PI / 2.0, f64::sin, f64::cos, |u: f64| -u.sin(), |t: f64| 1.0 - t.cos())
            .unwrap();
        let report = validate_bistable(&nl, &SampleGrid::default());
        assert!(!report.passed);
        assert!(report.violations.iter().any(|v| v.property == "dg_negative_beyond_beta"));
        assert!(Nonlinearity::custom("sin", PI, PI / 2.0, f64::sin, f64::cos, |u: f64| -u.sin(), |t: f64| 1.0 - t.cos()).is_err());
    }

    #[test]
    fn custom_cubic_is_accepted() {
        let nl = Nonlinearity::custom("u-u^3", 1.0, 1.0 / 3f64.sqrt(), |u| u - u * u * u, |u| 1.0 - 3.0 * u * u, |u| -6.0 * u, |t| {
            0.5 * t * t - 0.25 * t.powi(4)
        })
        .unwrap();
        assert_eq!(nl.cubic_params(), None);
        assert!((nl.g(0.5) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn potential_matches_quadrature_and_zeros_are_exact() {
        for nl in [Nonlinearity::cubic(1.0).unwrap(), Nonlinearity::scaled_cubic(0.25, 1.0).unwrap(), Nonlinearity::cubic(3.0).unwrap()] {
            let a = nl.alpha();
            for i in 0..=40 {
                let t = -a + 2.0 * a * (i as f64) / 40.0;
                let q = integrate(|s| nl.g(s), 0.0, t, QuadOptions::default()).unwrap().value;
                let closed = nl.potential(t);
                assert!((q - closed).abs() <= 1e-10 * closed.abs().max(1e-300) + 1e-15, "t = {t}");
            }
            assert!(nl.g(a).abs() < 1e-12);
            assert!(nl.dg(nl.beta()).abs() < 1e-12);
            for i in 0..200 {
                let u = -2.0 * a + 4.0 * a * (i as f64) / 199.0;
                assert_eq!(nl.g(u) + nl.g(-u), 0.0);
            }
        }
    }
}

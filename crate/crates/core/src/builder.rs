//! Maximal radial solutions of `P_k^+ u + g(u) = 0` built by gluing the
//! first- and second-order regimes at their switching points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RadialError, Result};
use crate::foe::{foe_switch_radius, FoeCurve, FoeState};
use crate::nonlinearity::{Nonlinearity, NonlinearitySummary};
use crate::ode::{StepperOptions, Tolerances};
use crate::soe::{soe_integrate, EventSpec, SoeLimits, SoeRun, SoeStart, SoeState, Termination};

/// Knobs shared by every construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub tol: Tolerances,
    /// Blow-up cap on `|u|`.
    pub cap_u: f64,
    /// Blow-up cap on `|u'|`.
    pub cap_du: f64,
    pub truncation: f64,
    /// Series start radius as a multiple of `max(1, alpha)`.
    pub h0_factor: f64,
    pub event_tol: f64,
    /// Spacing of the stored sample grid.
    pub sample_dr: f64,
    pub max_steps: usize,
    /// Half-width of the band around `±alpha` used to flag heteroclinic limits.
    pub dwell_band: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol: Tolerances::default(),
            cap_u: 1e6,
            cap_du: 1e9,
            truncation: 200.0,
            h0_factor: 1e-4,
            event_tol: 1e-10,
            sample_dr: 0.05,
            max_steps: 2_000_000,
            dwell_band: 1e-3,
        }
    }
}

impl SolveConfig {
    pub fn soe_limits(&self) -> SoeLimits {
        SoeLimits {
            stepper: StepperOptions { tol: self.tol, max_steps: self.max_steps, h_max: None },
            cap_u: self.cap_u,
            cap_du: self.cap_du,
            truncation: self.truncation,
            h0_factor: self.h0_factor,
            event_tol: self.event_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.tol.abs) && positive(self.tol.rel)) {
            return Err(RadialError::invalid("tol", "tolerances must be positive"));
        }
        if !(positive(self.cap_u) && positive(self.cap_du)) {
            return Err(RadialError::invalid("cap", "blow-up caps must be positive"));
        }
        if !positive(self.truncation) {
            return Err(RadialError::invalid("truncation", "must be positive and finite"));
        }
        if !(positive(self.h0_factor) && self.h0_factor <= 1e-3) {
            return Err(RadialError::invalid("h0_factor", "must lie in (0, 1e-3]"));
        }
        if !(positive(self.event_tol) && positive(self.sample_dr) && positive(self.dwell_band)) {
            return Err(RadialError::invalid("config", "event tolerance, sample spacing and dwell band must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Foe,
    Soe,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Foe => "FOE",
            Regime::Soe => "SOE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartingRegime {
    Foe,
    Soe,
    Constant,
}

/// Regime followed from the origin by the solution with `u(0) = xi`.
pub fn starting_regime(nl: &Nonlinearity, xi: f64) -> StartingRegime {
    let (alpha, beta) = (nl.alpha(), nl.beta());
    if nl.is_zero_of_g(xi) {
        StartingRegime::Constant
    } else if xi < -alpha || (xi >= -beta && xi < 0.0) || (xi > beta && xi < alpha) {
        StartingRegime::Foe
    } else {
        StartingRegime::Soe
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub r: f64,
    pub u: f64,
    pub uprime: f64,
    /// `u'' - u'/r`.
    pub au: f64,
    pub regime: Regime,
    pub segment: usize,
}

#[derive(Debug, Clone)]
pub enum SegmentCurve {
    Foe(FoeCurve),
    Soe(SoeRun),
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub regime: Regime,
    pub r_start: f64,
    pub r_end: f64,
    /// `(u, u')` at `r_start`.
    pub start: (f64, f64),
    /// `(u, u')` at `r_end`.
    pub end: (f64, f64),
    pub samples: Vec<Sample>,
    pub curve: SegmentCurve,
}

impl Segment {
    fn from_foe(nl: &Nonlinearity, index: usize, curve: FoeCurve, r_end: f64, end_u: Option<f64>, dr: f64) -> Result<Self> {
        let r0 = curve.r0();
        let radii = grid(r0, r_end, dr);
        let mut states = curve.sample(&radii[..radii.len() - 1])?;
        let last = match end_u {
            Some(u) => FoeState::on_trajectory(nl, curve.k(), r_end, u),
            None => curve.state_at(r_end)?,
        };
        states.push(last);
        let samples: Vec<Sample> = states
            .iter()
            .map(|s| Sample { r: s.r, u: s.u, uprime: s.uprime, au: s.au, regime: Regime::Foe, segment: index })
            .collect();
        let first = samples[0];
        Ok(Segment {
            regime: Regime::Foe,
            r_start: r0,
            r_end,
            start: (first.u, first.uprime),
            end: (last.u, last.uprime),
            samples,
            curve: SegmentCurve::Foe(curve),
        })
    }

    /// Wraps a second-order run as a segment sampled every `dr`.
    pub fn from_soe(index: usize, run: SoeRun, dr: f64) -> Self {
        let samples: Vec<Sample> = run
            .sample(dr)
            .iter()
            .map(|s| Sample { r: s.r, u: s.u, uprime: s.uprime, au: s.au, regime: Regime::Soe, segment: index })
            .collect();
        let first = samples[0];
        let last = run.end_state();
        Segment {
            regime: Regime::Soe,
            r_start: first.r,
            r_end: last.r,
            start: (first.u, first.uprime),
            end: (last.u, last.uprime),
            samples,
            curve: SegmentCurve::Soe(run),
        }
    }

    /// `(u, u')` at `r` from the underlying curve, in the `P^+` frame.
    fn eval_raw(&self, r: f64) -> Option<(f64, f64)> {
        if r < self.r_start || r > self.r_end {
            return None;
        }
        match &self.curve {
            SegmentCurve::Foe(c) => c.state_at(r).ok().map(|s| (s.u, s.uprime)),
            SegmentCurve::Soe(run) => run.state_at(r).map(|s| (s.u, s.uprime)),
        }
    }
}

fn grid(a: f64, b: f64, dr: f64) -> Vec<f64> {
    if b <= a {
        return vec![a];
    }
    let n = ((b - a) / dr).ceil().max(1.0) as usize;
    (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchDirection {
    FoeToSoe,
    SoeToFoe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub r: f64,
    pub direction: SwitchDirection,
    pub u: f64,
    pub uprime: f64,
    /// `u''(r-) - u''(r+)`.
    pub jump: f64,
    /// `|u'(r-) - u'(r+)|`.
    pub slope_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    /// Sum of the `k` largest Hessian eigenvalues.
    Plus,
    /// Sum of the `k` smallest Hessian eigenvalues.
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Constant,
    UnboundedUp,
    UnboundedDown,
    LocalizedMonotone,
    LocalizedDip,
    HeteroclinicLimit,
    SignChangingUnbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    NegInfinity,
    MinusAlpha,
    Zero,
    Alpha,
    PosInfinity,
}

impl Limit {
    pub fn value(self, alpha: f64) -> f64 {
        match self {
            Limit::NegInfinity => f64::NEG_INFINITY,
            Limit::MinusAlpha => -alpha,
            Limit::Zero => 0.0,
            Limit::Alpha => alpha,
            Limit::PosInfinity => f64::INFINITY,
        }
    }

    fn mirrored(self) -> Self {
        match self {
            Limit::NegInfinity => Limit::PosInfinity,
            Limit::MinusAlpha => Limit::Alpha,
            Limit::Zero => Limit::Zero,
            Limit::Alpha => Limit::MinusAlpha,
            Limit::PosInfinity => Limit::NegInfinity,
        }
    }
}

/// Sign pattern of `u'` along the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Constant,
    Increasing,
    Decreasing,
    DecreasingIncreasing,
    IncreasingDecreasing,
    Oscillating,
}

impl Monotonicity {
    fn mirrored(self) -> Self {
        match self {
            Monotonicity::Increasing => Monotonicity::Decreasing,
            Monotonicity::Decreasing => Monotonicity::Increasing,
            Monotonicity::DecreasingIncreasing => Monotonicity::IncreasingDecreasing,
            Monotonicity::IncreasingDecreasing => Monotonicity::DecreasingIncreasing,
            m => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: ClassKind,
    pub limit: Limit,
    pub monotonicity: Monotonicity,
}

impl Classification {
    fn mirrored(self) -> Self {
        let kind = match self.kind {
            ClassKind::UnboundedUp => ClassKind::UnboundedDown,
            ClassKind::UnboundedDown => ClassKind::UnboundedUp,
            k => k,
        };
        Classification { kind, limit: self.limit.mirrored(), monotonicity: self.monotonicity.mirrored() }
    }
}

#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub xi: f64,
    pub k: u32,
    pub operator: Operator,
    pub nonlinearity: NonlinearitySummary,
    pub segments: Vec<Segment>,
    pub switches: Vec<SwitchEvent>,
    /// Maximal radius, or the truncation radius when `r_max_is_truncation`.
    pub r_max: f64,
    pub r_max_is_truncation: bool,
    pub classification: Option<Classification>,
    /// Why classification was withheld, if it was.
    pub unclassified_reason: Option<String>,
    pub config: SolveConfig,
}

impl RadialSolution {
    fn new(nl: &Nonlinearity, k: u32, xi: f64, config: SolveConfig) -> Self {
        RadialSolution {
            xi,
            k,
            operator: Operator::Plus,
            nonlinearity: nl.summary(),
            segments: Vec::new(),
            switches: Vec::new(),
            r_max: 0.0,
            r_max_is_truncation: false,
            classification: None,
            unclassified_reason: None,
            config,
        }
    }

    fn sign(&self) -> f64 {
        match self.operator {
            Operator::Plus => 1.0,
            Operator::Minus => -1.0,
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.segments.iter().flat_map(|s| s.samples.iter())
    }

    /// `(u, u')` at `r` from the segment curves (dense, not the sample grid).
    pub fn eval(&self, r: f64) -> Option<(f64, f64)> {
        let s = self.sign();
        self.segments.iter().find_map(|seg| seg.eval_raw(r)).map(|(u, up)| (s * u, s * up))
    }

    pub fn r_end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.r_end)
    }

    pub fn is_finite_radius(&self) -> bool {
        !self.r_max_is_truncation
    }

    fn negate(&mut self) {
        self.operator = match self.operator {
            Operator::Plus => Operator::Minus,
            Operator::Minus => Operator::Plus,
        };
        self.xi = -self.xi;
        for seg in &mut self.segments {
            seg.start = (-seg.start.0, -seg.start.1);
            seg.end = (-seg.end.0, -seg.end.1);
            for s in &mut seg.samples {
                s.u = -s.u;
                s.uprime = -s.uprime;
                s.au = -s.au;
            }
        }
        for sw in &mut self.switches {
            sw.u = -sw.u;
            sw.uprime = -sw.uprime;
            sw.jump = -sw.jump;
        }
        self.classification = self.classification.map(Classification::mirrored);
    }
}

/// Maximal number of segments; the theory allows at most four.
const MAX_SEGMENTS: usize = 8;

/// Builds the maximal radial solution of `P_k^+ u + g(u) = 0` with
/// `u(0) = xi`, `u'(0) = 0`.
pub fn build_radial(nl: &Nonlinearity, k: u32, xi: f64, config: &SolveConfig) -> Result<RadialSolution> {
    if k == 0 {
        return Err(RadialError::invalid("k", "must be at least 1"));
    }
    if !xi.is_finite() {
        return Err(RadialError::invalid("xi", "must be finite"));
    }
    config.validate()?;
    let mut sol = RadialSolution::new(nl, k, xi, *config);
    if let Err(e) = glue(nl, k, xi, config, &mut sol) {
        return Err(RadialError::Build { partial: Box::new(sol), source: Box::new(e) });
    }
    match classify(&sol, nl, k) {
        Ok(c) => sol.classification = Some(c),
        Err(e) => sol.unclassified_reason = Some(e.to_string()),
    }
    Ok(sol)
}

enum Next {
    Foe { r: f64, u: f64 },
    Soe { r: f64, u: f64, theta: f64 },
    Done,
}

fn glue(nl: &Nonlinearity, k: u32, xi: f64, config: &SolveConfig, sol: &mut RadialSolution) -> Result<()> {
    let kf = k as f64;
    let truncation = config.truncation;
    let mut next = match starting_regime(nl, xi) {
        StartingRegime::Soe => Next::Soe { r: 0.0, u: xi, theta: 0.0 },
        _ => Next::Foe { r: 0.0, u: xi },
    };
    loop {
        let index = sol.segments.len();
        if index >= MAX_SEGMENTS {
            return Err(RadialError::Ambiguous(format!("more than {MAX_SEGMENTS} segments")));
        }
        next = match next {
            Next::Done => return Ok(()),
            Next::Foe { r, u } => {
                let curve = FoeCurve::new(nl, k, r, u)?;
                let switch_at = if u > nl.beta() && u < nl.alpha() && !nl.is_zero_of_g(u) {
                    foe_switch_radius(nl, k, r, u)?.filter(|&rs| rs <= truncation)
                } else {
                    None
                };
                if let Some(rs) = switch_at {
                    let beta = nl.beta();
                    let seg = Segment::from_foe(nl, index, curve, rs, Some(beta), config.sample_dr)?;
                    let theta = -(rs / kf) * nl.g(beta);
                    sol.segments.push(seg);
                    sol.switches.push(SwitchEvent {
                        r: rs,
                        direction: SwitchDirection::FoeToSoe,
                        u: beta,
                        uprime: theta,
                        jump: 0.0,
                        slope_gap: 0.0,
                    });
                    Next::Soe { r: rs, u: beta, theta }
                } else {
                    let blowup = curve.blowup_radius();
                    if blowup <= truncation {
                        let cap = config.cap_u.copysign(u);
                        let r_cap = curve.radius_at(cap)?;
                        let seg = Segment::from_foe(nl, index, curve, r_cap, Some(cap), config.sample_dr)?;
                        sol.segments.push(seg);
                        sol.r_max = blowup;
                        sol.r_max_is_truncation = false;
                    } else {
                        let seg = Segment::from_foe(nl, index, curve, truncation, None, config.sample_dr)?;
                        sol.segments.push(seg);
                        sol.r_max = truncation;
                        sol.r_max_is_truncation = true;
                    }
                    Next::Done
                }
            }
            Next::Soe { r, u, theta } => {
                let limits = config.soe_limits();
                let run = soe_integrate(nl, k, SoeStart { r0: r, xi: u, theta }, &[EventSpec::switch()], &limits)?;
                let termination = run.termination;
                let end = run.end_state();
                sol.segments.push(Segment::from_soe(index, run, config.sample_dr));
                match termination {
                    Termination::Event(_) => {
                        let rs = end.r;
                        let (g, dg) = (nl.g(end.u), nl.dg(end.u));
                        let foe_slope = -(rs / kf) * g;
                        let left = SoeState::new(nl, k, rs, end.u, end.uprime).second_derivative(nl, k);
                        let right = -g / kf + (rs * rs) / (kf * kf) * g * dg;
                        sol.switches.push(SwitchEvent {
                            r: rs,
                            direction: SwitchDirection::SoeToFoe,
                            u: end.u,
                            uprime: end.uprime,
                            jump: left - right,
                            slope_gap: (end.uprime - foe_slope).abs(),
                        });
                        Next::Foe { r: rs, u: end.u }
                    }
                    Termination::BlowUp => {
                        sol.r_max = end.r;
                        sol.r_max_is_truncation = false;
                        Next::Done
                    }
                    Termination::Truncation => {
                        sol.r_max = truncation;
                        sol.r_max_is_truncation = true;
                        Next::Done
                    }
                }
            }
        };
    }
}

fn monotonicity(sol: &RadialSolution, sign: f64) -> Monotonicity {
    let mut pattern: Vec<bool> = Vec::new();
    for s in sol.samples() {
        let up = sign * s.uprime;
        if up.abs() <= 1e-14 {
            continue;
        }
        let rising = up > 0.0;
        if pattern.last() != Some(&rising) {
            pattern.push(rising);
        }
    }
    match pattern.as_slice() {
        [] => Monotonicity::Constant,
        [true] => Monotonicity::Increasing,
        [false] => Monotonicity::Decreasing,
        [false, true] => Monotonicity::DecreasingIncreasing,
        [true, false] => Monotonicity::IncreasingDecreasing,
        _ => Monotonicity::Oscillating,
    }
}

/// Maps the terminal behaviour of a built solution to its outcome family.
pub fn classify(sol: &RadialSolution, nl: &Nonlinearity, _k: u32) -> Result<Classification> {
    // work in the P^+ frame and mirror back at the end
    let sign = sol.sign();
    let alpha = nl.alpha();
    let last = sol.segments.last().ok_or_else(|| RadialError::Ambiguous("solution has no segments".into()))?;
    let mono = monotonicity(sol, sign);
    let end_u = sign * last.end.0;

    let plus = if let SegmentCurve::Foe(c) = &last.curve {
        if c.is_constant() {
            let limit = if c.xi() == 0.0 {
                Limit::Zero
            } else if c.xi() > 0.0 {
                Limit::Alpha
            } else {
                Limit::MinusAlpha
            };
            if sol.segments.len() == 1 {
                Classification { kind: ClassKind::Constant, limit, monotonicity: Monotonicity::Constant }
            } else {
                return Err(RadialError::Ambiguous("glued onto a constant state".into()));
            }
        } else if c.xi().abs() < alpha {
            let kind = if mono == Monotonicity::Increasing || mono == Monotonicity::Decreasing {
                ClassKind::LocalizedMonotone
            } else {
                ClassKind::LocalizedDip
            };
            Classification { kind, limit: Limit::Zero, monotonicity: mono }
        } else {
            unbounded(sol, sign, end_u, mono)
        }
    } else if !sol.r_max_is_truncation {
        unbounded(sol, sign, end_u, mono)
    } else {
        // still in the second-order regime at the truncation radius
        let target = alpha.copysign(end_u);
        let band = sol.config.dwell_band;
        let lingering = last.samples.iter().rev().take_while(|s| (sign * s.u - target).abs() <= band).last();
        match lingering {
            Some(s) if (sign * last.end.0 - target).abs() <= band && s.r <= 0.5 * sol.r_max => Classification {
                kind: ClassKind::HeteroclinicLimit,
                limit: if target > 0.0 { Limit::Alpha } else { Limit::MinusAlpha },
                monotonicity: mono,
            },
            _ => {
                return Err(RadialError::Ambiguous(format!(
                    "second-order regime still active at r = {} with u = {}",
                    last.r_end, last.end.0
                )))
            }
        }
    };
    Ok(if sign < 0.0 { plus.mirrored() } else { plus })
}

fn unbounded(sol: &RadialSolution, sign: f64, end_u: f64, mono: Monotonicity) -> Classification {
    let scale = 1e-12;
    let (mut pos, mut neg) = (false, false);
    for s in sol.samples() {
        let u = sign * s.u;
        pos |= u > scale;
        neg |= u < -scale;
    }
    let up = end_u > 0.0;
    let kind = if pos && neg {
        ClassKind::SignChangingUnbounded
    } else if up {
        ClassKind::UnboundedUp
    } else {
        ClassKind::UnboundedDown
    };
    Classification { kind, limit: if up { Limit::PosInfinity } else { Limit::NegInfinity }, monotonicity: mono }
}

/// Solution of `P_k^- u + g(u) = 0` from `u(0) = xi`, obtained as the
/// negation of the `P_k^+` solution from `-xi`.
pub fn solve_minus(nl: &Nonlinearity, k: u32, xi: f64, config: &SolveConfig) -> Result<RadialSolution> {
    let mut sol = build_radial(nl, k, -xi, config).map_err(|e| match e {
        RadialError::Build { mut partial, source } => {
            partial.negate();
            RadialError::Build { partial, source }
        }
        other => other,
    })?;
    sol.negate();
    Ok(sol)
}

/// Builds solutions for every value in `xis` in parallel.
pub fn sweep_xi(nl: &Nonlinearity, k: u32, xis: &[f64], config: &SolveConfig) -> Vec<Result<RadialSolution>> {
    xis.par_iter().map(|&xi| build_radial(nl, k, xi, config)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchViolation {
    pub r: f64,
    pub segment: usize,
    pub regime: Regime,
    pub au: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Largest residual scaled by `1 + |g| + |u''| + k |u'/r|`.
    pub max_residual: f64,
    pub max_abs_residual: f64,
    pub worst_r: f64,
    pub checked: usize,
    pub branch_violations: Vec<BranchViolation>,
}

impl ResidualReport {
    pub fn consistent(&self) -> bool {
        self.branch_violations.is_empty()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.consistent() && self.max_residual <= tol
    }
}

/// Evaluates the radial form of the truncated Laplacian on every stored
/// sample: the Hessian eigenvalues are `u''` (once) and `u'/r` (`k` times,
/// for the smallest admissible dimension `N = k + 1`). Also checks that the
/// sign of `Au` agrees with the regime of each segment, up to `branch_tol`
/// (scaled like the residual).
pub fn verify_residual(sol: &RadialSolution, nl: &Nonlinearity, branch_tol: f64) -> ResidualReport {
    let kf = sol.k as f64;
    let sign = sol.sign();
    let mut report =
        ResidualReport { max_residual: 0.0, max_abs_residual: 0.0, worst_r: 0.0, checked: 0, branch_violations: Vec::new() };
    for s in sol.samples() {
        if s.r <= 0.0 {
            continue;
        }
        let radial = s.uprime / s.r;
        let second = s.au + radial;
        let take_second = match sol.operator {
            Operator::Plus => second >= radial,
            Operator::Minus => second <= radial,
        };
        let p = if take_second { second + (kf - 1.0) * radial } else { kf * radial };
        let g = nl.g(s.u);
        let res = (p + g).abs();
        let scale = 1.0 + g.abs() + second.abs() + kf * radial.abs();
        let scaled = res / scale;
        report.checked += 1;
        report.max_abs_residual = report.max_abs_residual.max(res);
        if scaled > report.max_residual {
            report.max_residual = scaled;
            report.worst_r = s.r;
        }
        // in the P^+ frame FOE needs Au <= 0 and SOE needs Au >= 0
        let au_plus = sign * s.au;
        let bad = match s.regime {
            Regime::Foe => au_plus > branch_tol * scale,
            Regime::Soe => au_plus < -branch_tol * scale,
        };
        if bad {
            report.branch_violations.push(BranchViolation { r: s.r, segment: s.segment, regime: s.regime, au: s.au });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic1() -> Nonlinearity {
        Nonlinearity::cubic(1.0).unwrap()
    }

    #[test]
    fn starting_regime_table() {
        let nl = cubic1();
        let (a, b) = (nl.alpha(), nl.beta());
        assert_eq!(starting_regime(&nl, b), StartingRegime::Soe);
        assert_eq!(starting_regime(&nl, -b), StartingRegime::Foe);
        assert_eq!(starting_regime(&nl, a), StartingRegime::Constant);
        assert_eq!(starting_regime(&nl, 0.0), StartingRegime::Constant);
        assert_eq!(starting_regime(&nl, -a), StartingRegime::Constant);
        assert_eq!(starting_regime(&nl, -1.5), StartingRegime::Foe);
        assert_eq!(starting_regime(&nl, -0.8), StartingRegime::Soe);
        assert_eq!(starting_regime(&nl, 0.3), StartingRegime::Soe);
        assert_eq!(starting_regime(&nl, 0.8), StartingRegime::Foe);
        assert_eq!(starting_regime(&nl, 1.5), StartingRegime::Soe);
    }

    #[test]
    fn dip_solution_for_small_positive_start() {
        let nl = cubic1();
        let sol = build_radial(&nl, 1, 0.5, &SolveConfig::default()).unwrap();
        let c = sol.classification.unwrap();
        assert_eq!(c.kind, ClassKind::LocalizedDip);
        assert_eq!(c.limit, Limit::Zero);
        assert_eq!(c.monotonicity, Monotonicity::DecreasingIncreasing);
        assert_eq!(sol.switches.len(), 1);
        let sw = sol.switches[0];
        assert_eq!(sw.direction, SwitchDirection::SoeToFoe);
        assert!(sw.u > -nl.beta() && sw.u < 0.0);
        assert!(sw.jump > 0.0);
        assert!(sol.r_max_is_truncation);
    }

    #[test]
    fn negative_start_is_monotone_foe() {
        let nl = cubic1();
        let sol = build_radial(&nl, 1, -0.5, &SolveConfig::default()).unwrap();
        assert_eq!(sol.segments.len(), 1);
        assert_eq!(sol.segments[0].regime, Regime::Foe);
        let c = sol.classification.unwrap();
        assert_eq!((c.kind, c.monotonicity), (ClassKind::LocalizedMonotone, Monotonicity::Increasing));
    }

    #[test]
    fn outer_starts_are_unbounded() {
        let nl = cubic1();
        let cfg = SolveConfig::default();
        let up = build_radial(&nl, 1, 1.5, &cfg).unwrap();
        assert_eq!(up.classification.unwrap().kind, ClassKind::UnboundedUp);
        assert!(up.is_finite_radius());
        assert!(up.samples().all(|s| s.uprime >= 0.0));
        let down = build_radial(&nl, 1, -1.5, &cfg).unwrap();
        assert_eq!(down.classification.unwrap().kind, ClassKind::UnboundedDown);
        let last = down.samples().last().unwrap();
        assert!(last.u.abs() + last.uprime.abs() > cfg.cap_u);
    }

    #[test]
    fn constants() {
        let nl = cubic1();
        for xi in [-1.0, 0.0, 1.0] {
            let sol = build_radial(&nl, 2, xi, &SolveConfig::default()).unwrap();
            assert_eq!(sol.classification.unwrap().kind, ClassKind::Constant);
            assert!(sol.samples().all(|s| s.u == xi && s.uprime == 0.0));
            let report = verify_residual(&sol, &nl, 1e-7);
            assert_eq!(report.max_abs_residual, 0.0);
        }
    }

    #[test]
    fn late_switch_start_falls_through() {
        let nl = Nonlinearity::cubic(3.0).unwrap();
        let xi = crate::critical::xi_of_r0(&nl, 2, 5.0).unwrap();
        let sol = build_radial(&nl, 2, xi, &SolveConfig::default()).unwrap();
        let first = sol.switches[0];
        assert_eq!(first.direction, SwitchDirection::FoeToSoe);
        assert!((first.r - 5.0).abs() < 1e-8);
        assert_eq!(first.u, nl.beta());
        assert_eq!(sol.classification.unwrap().kind, ClassKind::SignChangingUnbounded);
        assert_eq!(sol.classification.unwrap().limit, Limit::NegInfinity);
    }

    #[test]
    fn minus_operator_mirrors() {
        let nl = cubic1();
        let cfg = SolveConfig::default();
        let sol = solve_minus(&nl, 1, 0.5, &cfg).unwrap();
        assert_eq!(sol.operator, Operator::Minus);
        let c = sol.classification.unwrap();
        assert_eq!((c.kind, c.monotonicity), (ClassKind::LocalizedMonotone, Monotonicity::Decreasing));
        assert!(sol.samples().all(|s| s.u >= 0.0 && s.u <= 0.5));
        assert!(verify_residual(&sol, &nl, 1e-7).passes(1e-7));
        let mirrored = solve_minus(&nl, 1, -0.9, &cfg).unwrap().classification.unwrap();
        assert_eq!((mirrored.kind, mirrored.limit), (ClassKind::SignChangingUnbounded, Limit::PosInfinity));
        let c = solve_minus(&nl, 1, 1.0, &cfg).unwrap();
        assert!(c.samples().all(|s| s.u == 1.0));
    }

    #[test]
    fn plus_solution_fails_the_minus_residual() {
        let nl = cubic1();
        let mut sol = build_radial(&nl, 2, 0.5, &SolveConfig::default()).unwrap();
        assert!(verify_residual(&sol, &nl, 1e-7).passes(1e-7));
        sol.operator = Operator::Minus;
        assert!(!verify_residual(&sol, &nl, 1e-7).passes(1e-7));
    }

    #[test]
    fn eval_matches_samples() {
        let nl = cubic1();
        let sol = build_radial(&nl, 2, 0.9, &SolveConfig::default()).unwrap();
        for s in sol.samples().step_by(37) {
            let (u, up) = sol.eval(s.r).unwrap();
            assert!((u - s.u).abs() < 1e-9 && (up - s.uprime).abs() < 1e-9, "r = {}", s.r);
        }
    }

    #[test]
    fn config_validation() {
        let nl = cubic1();
        let bad = SolveConfig { truncation: -1.0, ..SolveConfig::default() };
        assert!(build_radial(&nl, 1, 0.5, &bad).is_err());
        let bad = SolveConfig { h0_factor: 0.1, ..SolveConfig::default() };
        assert!(bad.validate().is_err());
        assert!(build_radial(&nl, 0, 0.5, &SolveConfig::default()).is_err());
    }
}

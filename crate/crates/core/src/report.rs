//! CSV and JSON output of a built solution.

use std::io::Write;

use serde::Serialize;

use crate::builder::{Classification, Operator, RadialSolution, SwitchDirection};
use crate::error::{RadialError, Result};
use crate::nonlinearity::NonlinearitySummary;

fn output_err(e: impl std::fmt::Display) -> RadialError {
    RadialError::Output(e.to_string())
}

#[derive(Serialize)]
struct Row {
    r: f64,
    u: f64,
    uprime: f64,
    #[serde(rename = "Au")]
    au: f64,
    regime: &'static str,
    segment_index: usize,
}

/// Writes the sampled solution with columns `r,u,uprime,Au,regime,segment_index`.
pub fn write_solution_csv<W: Write>(sol: &RadialSolution, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in sol.samples() {
        w.serialize(Row { r: s.r, u: s.u, uprime: s.uprime, au: s.au, regime: s.regime.as_str(), segment_index: s.segment })
            .map_err(output_err)?;
    }
    w.flush().map_err(output_err)
}

#[derive(Serialize)]
struct PhaseRow {
    r: f64,
    u: f64,
    uprime: f64,
    energy: f64,
}

/// Writes `(r, u, u', u'^2/2 + G(u))` for phase-plane plots.
pub fn write_phase_csv<W: Write, G: Fn(f64) -> f64>(sol: &RadialSolution, potential: G, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in sol.samples() {
        let energy = 0.5 * s.uprime * s.uprime + potential(s.u);
        w.serialize(PhaseRow { r: s.r, u: s.u, uprime: s.uprime, energy }).map_err(output_err)?;
    }
    w.flush().map_err(output_err)
}

#[derive(Debug, Clone, Serialize)]
pub struct SwitchSummary {
    pub r: f64,
    pub direction: SwitchDirection,
    pub u: f64,
    pub jump: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub xi: f64,
    pub k: u32,
    pub operator: Operator,
    pub nonlinearity: NonlinearitySummary,
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unclassified_reason: Option<String>,
    pub switches: Vec<SwitchSummary>,
    #[serde(rename = "R")]
    pub r_max: f64,
    #[serde(rename = "R_is_truncation")]
    pub r_max_is_truncation: bool,
    pub residual_max: Option<f64>,
}

impl RunSummary {
    pub fn new(sol: &RadialSolution, residual_max: Option<f64>) -> Self {
        RunSummary {
            xi: sol.xi,
            k: sol.k,
            operator: sol.operator,
            nonlinearity: sol.nonlinearity.clone(),
            classification: sol.classification,
            unclassified_reason: sol.unclassified_reason.clone(),
            switches: sol
                .switches
                .iter()
                .map(|s| SwitchSummary { r: s.r, direction: s.direction, u: s.u, jump: s.jump })
                .collect(),
            r_max: sol.r_max,
            r_max_is_truncation: sol.r_max_is_truncation,
            residual_max,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(output_err)
    }
}

mod args;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde::Serialize;

use radial_core::builder::{Regime, Segment};
use radial_core::critical::{k1_threshold_check, scan_r0, thresholds, xi_of_r0, R0Class};
use radial_core::oracle::{rk4_foe, rk4_soe, OracleReport};
use radial_core::report::{write_phase_csv, write_solution_csv, RunSummary};
use radial_core::soe::{
    k1_amplitude_and_period, k1_classify, soe_energy_audit, soe_integrate, EventSpec, K1Outcome, SoeStart,
};
use radial_core::{
    build_radial, solve_minus, sweep_xi, verify_residual, Nonlinearity, RadialError, RadialSolution, SolveConfig,
};

use args::{parse_grid, AuditArgs, Cli, Command, CriticalArgs, PeriodArgs, SolveArgs, SweepArgs};

fn main() -> Result<()> {
    let argv = args::expand_config(std::env::args_os().collect())?;
    let cli = Cli::parse_from(argv);
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Critical(a) => critical(a),
        Command::Period(a) => period(a),
        Command::Audit(a) => audit(a),
    }
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_json<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<()> {
    let mut w = open_out(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput {
    #[serde(flatten)]
    summary: RunSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    orbit: Option<K1Outcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    cross_check: Vec<OracleReport>,
}

fn solve(a: SolveArgs) -> Result<()> {
    let nl = a.common.nonlinearity()?;
    let cfg = a.common.solve_config()?;
    let k = a.common.k;
    let xi = match (a.xi, a.r0, a.from_switch) {
        (Some(xi), None, false) => xi,
        (None, Some(r0), true) => xi_of_r0(&nl, k, r0)?,
        (None, Some(_), false) => bail!("--r0 needs --from-switch"),
        _ => bail!("give either --xi or --r0 with --from-switch"),
    };

    let mut orbit = None;
    let built = match a.theta {
        Some(theta) if theta != 0.0 => {
            if a.minus {
                bail!("--theta and --minus cannot be combined");
            }
            orbit = (k == 1).then(|| k1_classify(&nl, xi, theta));
            direct_run(&nl, k, xi, theta, &cfg)
        }
        _ if a.minus => solve_minus(&nl, k, xi, &cfg),
        _ => build_radial(&nl, k, xi, &cfg),
    };
    let (sol, failure) = match built {
        Ok(sol) => (sol, None),
        Err(RadialError::Build { partial, source }) => (*partial, Some(source)),
        Err(e) => return Err(e.into()),
    };

    let residual = verify_residual(&sol, &nl, 1e-7);
    let cross_check = if a.cross_check { cross_check(&nl, &sol, a.tol)? } else { Vec::new() };
    let output = SolveOutput { summary: RunSummary::new(&sol, Some(residual.max_residual)), orbit, cross_check };

    match &a.common.out {
        Some(prefix) => {
            write_solution_csv(&sol, BufWriter::new(File::create(with_extension(prefix, ".csv"))?))?;
            if a.phase_plane {
                let w = BufWriter::new(File::create(with_extension(prefix, ".phase.csv"))?);
                write_phase_csv(&sol, |u| nl.potential(u), w)?;
            }
            print_json(&output, &Some(with_extension(prefix, ".json")))?;
        }
        None if a.phase_plane => write_phase_csv(&sol, |u| nl.potential(u), io::stdout().lock())?,
        None => print_json(&output, &None)?,
    }

    if let Some(e) = failure {
        bail!("construction stopped early: {e}");
    }
    if output.cross_check.iter().any(|r| !r.pass) {
        bail!("cross-check exceeded tolerance {}", a.tol);
    }
    Ok(())
}

/// The second-order equation integrated from `(0, xi, theta)` without
/// switching, wrapped as a one-segment solution.
fn direct_run(nl: &Nonlinearity, k: u32, xi: f64, theta: f64, cfg: &SolveConfig) -> radial_core::Result<RadialSolution> {
    let run = soe_integrate(nl, k, SoeStart { r0: 0.0, xi, theta }, &[], &cfg.soe_limits())?;
    let blew_up = run.blew_up();
    let seg = Segment::from_soe(0, run, cfg.sample_dr);
    Ok(RadialSolution {
        xi,
        k,
        operator: radial_core::Operator::Plus,
        nonlinearity: nl.summary(),
        r_max: seg.r_end,
        segments: vec![seg],
        switches: Vec::new(),
        r_max_is_truncation: !blew_up,
        classification: None,
        unclassified_reason: Some("direct integration with nonzero initial slope".into()),
        config: *cfg,
    })
}

fn cross_check(nl: &Nonlinearity, sol: &RadialSolution, tol: f64) -> Result<Vec<OracleReport>> {
    const STEP: f64 = 1e-4;
    let sign = if sol.operator == radial_core::Operator::Minus { -1.0 } else { 1.0 };
    let mut reports = Vec::new();
    for (i, seg) in sol.segments.iter().enumerate() {
        let until = seg.r_end.min(seg.r_start + 10.0);
        if until <= seg.r_start {
            continue;
        }
        let (u0, up0) = (sign * seg.start.0, sign * seg.start.1);
        let points: Vec<(f64, f64)> = match seg.regime {
            Regime::Foe => rk4_foe(nl, sol.k, seg.r_start, u0, STEP, until)?.points.iter().map(|p| (p.0, p.1[0])).collect(),
            Regime::Soe => {
                rk4_soe(nl, sol.k, seg.r_start, u0, up0, STEP, until)?.points.iter().map(|p| (p.0, p.1[0])).collect()
            }
        };
        let mut worst: (f64, f64, f64) = (seg.r_start, 0.0, 0.0);
        for &(r, u_ref) in points.iter().step_by(100) {
            if u_ref.abs() > 10.0 * nl.alpha() {
                break;
            }
            if let Some((u, _)) = sol.eval(r) {
                if (sign * u - u_ref).abs() > (worst.1 - worst.2).abs() {
                    worst = (r, sign * u, u_ref);
                }
            }
        }
        let name = format!("segment {i} ({}) u at r = {:.4}", seg.regime.as_str(), worst.0);
        reports.push(OracleReport::absolute(&name, worst.1, worst.2, tol));
    }
    Ok(reports)
}

#[derive(Serialize)]
struct XiRow {
    xi: f64,
    kind: String,
    limit: String,
    monotonicity: String,
    switch_radii: String,
    #[serde(rename = "R")]
    r_max: f64,
    #[serde(rename = "R_is_truncation")]
    r_max_is_truncation: bool,
}

#[derive(Serialize)]
struct R0Row {
    r0: f64,
    class: String,
    decided_at: f64,
    xi: Option<f64>,
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn sweep(a: SweepArgs) -> Result<()> {
    let nl = a.common.nonlinearity()?;
    let cfg = a.common.solve_config()?;
    let k = a.common.k;
    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    let mut w = csv_writer(&a.common.out)?;
    match (&a.xi, &a.r0) {
        (Some(spec), None) => {
            let xis = parse_grid(spec)?;
            for (xi, res) in xis.iter().zip(sweep_xi(&nl, k, &xis, &cfg)) {
                let row = match res {
                    Ok(sol) => {
                        let c = sol.classification;
                        XiRow {
                            xi: *xi,
                            kind: c.map_or("unclassified".into(), |c| label(&c.kind)),
                            limit: c.map_or(String::new(), |c| label(&c.limit)),
                            monotonicity: c.map_or(String::new(), |c| label(&c.monotonicity)),
                            switch_radii: sol.switches.iter().map(|s| s.r.to_string()).collect::<Vec<_>>().join(";"),
                            r_max: sol.r_max,
                            r_max_is_truncation: sol.r_max_is_truncation,
                        }
                    }
                    Err(e) => {
                        eprintln!("xi = {xi}: {e}");
                        XiRow {
                            xi: *xi,
                            kind: "error".into(),
                            limit: String::new(),
                            monotonicity: String::new(),
                            switch_radii: String::new(),
                            r_max: f64::NAN,
                            r_max_is_truncation: false,
                        }
                    }
                };
                *histogram.entry(row.kind.clone()).or_default() += 1;
                w.serialize(row)?;
            }
        }
        (None, Some(spec)) => {
            let r0s = parse_grid(spec)?;
            for (r0, res) in r0s.iter().zip(scan_r0(&nl, k, &r0s, &cfg)) {
                let row = match res {
                    Ok(o) => R0Row {
                        r0: *r0,
                        class: match o.class {
                            R0Class::A => "A".into(),
                            R0Class::C => "C".into(),
                            R0Class::NearBoundary => "near_boundary".into(),
                        },
                        decided_at: o.decided_at,
                        xi: xi_of_r0(&nl, k, *r0).ok(),
                    },
                    Err(e) => {
                        eprintln!("r0 = {r0}: {e}");
                        R0Row { r0: *r0, class: "error".into(), decided_at: f64::NAN, xi: None }
                    }
                };
                *histogram.entry(row.class.clone()).or_default() += 1;
                w.serialize(row)?;
            }
        }
        _ => bail!("give exactly one of --xi or --r0"),
    }
    w.flush()?;
    for (kind, count) in &histogram {
        eprintln!("{kind:>24} {count}");
    }
    Ok(())
}

fn csv_writer(out: &Option<PathBuf>) -> Result<csv::Writer<Box<dyn Write>>> {
    Ok(csv::Writer::from_writer(open_out(out)?))
}

fn critical(a: CriticalArgs) -> Result<()> {
    let nl = a.common.nonlinearity()?;
    let cfg = a.common.solve_config()?;
    let set = thresholds(&nl, a.common.k, a.tol, &cfg)?;
    if a.common.k == 1 {
        #[derive(Serialize)]
        struct K1 {
            #[serde(flatten)]
            set: radial_core::ThresholdSet,
            check: radial_core::critical::K1ThresholdReport,
        }
        let check = k1_threshold_check(&nl, &cfg)?;
        return print_json(&K1 { set, check }, &a.common.out);
    }
    print_json(&set, &a.common.out)
}

fn period(a: PeriodArgs) -> Result<()> {
    let nl = a.common.nonlinearity()?;
    let cfg = a.common.solve_config()?;
    if a.common.k != 1 {
        bail!("periodic orbits exist only for k = 1");
    }
    let outcome = k1_classify(&nl, a.xi, a.theta);
    #[derive(Serialize)]
    struct Out {
        #[serde(flatten)]
        outcome: K1Outcome,
        #[serde(skip_serializing_if = "Option::is_none")]
        cross_check: Option<OracleReport>,
    }
    let mut cross = None;
    if a.cross_check {
        let (_, period) = k1_amplitude_and_period(&nl, a.xi, a.theta)?;
        let run = soe_integrate(&nl, 1, SoeStart { r0: 0.0, xi: a.xi, theta: a.theta }, &[EventSpec::extrema()], &cfg.soe_limits())?;
        let maxima: Vec<f64> = run.hits.iter().filter(|h| h.state.second_derivative(&nl, 1) < 0.0).map(|h| h.r).collect();
        if maxima.len() < 2 {
            bail!("fewer than two maxima before r = {}", cfg.truncation);
        }
        let spacing = (maxima[maxima.len() - 1] - maxima[0]) / (maxima.len() - 1) as f64;
        cross = Some(OracleReport::relative("period vs spacing of maxima", period, spacing, a.tol));
    }
    let failed = cross.as_ref().is_some_and(|r| !r.pass);
    print_json(&Out { outcome, cross_check: cross }, &a.common.out)?;
    if failed {
        bail!("period cross-check exceeded tolerance {}", a.tol);
    }
    Ok(())
}

fn audit(a: AuditArgs) -> Result<()> {
    let nl = a.common.nonlinearity()?;
    let cfg = a.common.solve_config()?;
    let k = a.common.k;
    let run = soe_integrate(&nl, k, SoeStart { r0: 0.0, xi: a.xi, theta: a.theta }, &[], &cfg.soe_limits())?;
    #[derive(Serialize)]
    struct Out {
        xi: f64,
        theta: f64,
        k: u32,
        r_end: f64,
        blew_up: bool,
        energy_residual: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        pde_residual: Option<f64>,
    }
    let pde_residual = if a.theta == 0.0 {
        build_radial(&nl, k, a.xi, &cfg).ok().map(|s| verify_residual(&s, &nl, 1e-7).max_residual)
    } else {
        None
    };
    print_json(
        &Out {
            xi: a.xi,
            theta: a.theta,
            k,
            r_end: run.r_end(),
            blew_up: run.blew_up(),
            energy_residual: soe_energy_audit(&run),
            pde_residual,
        },
        &a.common.out,
    )
}

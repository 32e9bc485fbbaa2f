use radial_core::report::{write_phase_csv, write_solution_csv, RunSummary};
use radial_core::{build_radial, verify_residual, Nonlinearity, SolveConfig};

#[test]
fn csv_has_expected_columns() {
    let nl = Nonlinearity::cubic(1.0).unwrap();
    let sol = build_radial(&nl, 2, 0.9, &SolveConfig::default()).unwrap();
    let mut buf = Vec::new();
    write_solution_csv(&sol, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "r,u,uprime,Au,regime,segment_index");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), sol.samples().count());
    assert!(rows.iter().all(|r| r.len() == 6 && (r[4] == "FOE" || r[4] == "SOE")));
    assert!(rows.iter().any(|r| r[4] == "SOE"));

    let mut buf = Vec::new();
    write_phase_csv(&sol, |u| nl.potential(u), &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("r,u,uprime,energy\n"));
}

#[test]
fn json_summary_round_trips() {
    let nl = Nonlinearity::cubic(1.0).unwrap();
    let sol = build_radial(&nl, 1, 0.9, &SolveConfig::default()).unwrap();
    let residual = verify_residual(&sol, &nl, 1e-7).max_residual;
    let json = RunSummary::new(&sol, Some(residual)).to_json().unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["xi"], 0.9);
    assert_eq!(v["k"], 1);
    assert_eq!(v["classification"]["kind"], "sign_changing_unbounded");
    assert_eq!(v["R_is_truncation"], false);
    assert!(v["R"].as_f64().unwrap() > 0.0);
    let switches = v["switches"].as_array().unwrap();
    assert!(!switches.is_empty());
    for s in switches {
        assert!(s["r"].as_f64().unwrap() > 0.0);
        let u = s["u"].as_f64().unwrap();
        match s["direction"].as_str().unwrap() {
            "foe_to_soe" => assert_eq!(u, nl.beta()),
            "soe_to_foe" => assert!(radial_core::soe::switch_region_valid(&nl, u)),
            other => panic!("unexpected direction {other}"),
        }
    }
}

//! Radial solutions of `P_k^± u + g(u) = 0` for bistable `g`.
//!
//! A solution is glued from first-order pieces `u' = -(r/k) g(u)` and
//! second-order pieces `u'' + ((k-1)/r) u' + g(u) = 0`, switching where the
//! sign of `u'' - u'/r` demands it.

pub mod builder;
pub mod critical;
pub mod error;
pub mod foe;
pub mod nonlinearity;
pub mod ode;
pub mod oracle;
pub mod quad;
pub mod report;
pub mod roots;
pub mod soe;

pub use builder::{
    build_radial, classify, solve_minus, starting_regime, sweep_xi, verify_residual, ClassKind, Classification,
    Limit, Monotonicity, Operator, RadialSolution, Regime, ResidualReport, Sample, Segment, SolveConfig,
    StartingRegime, SwitchDirection, SwitchEvent,
};
pub use critical::{
    bisect_boundary, classify_r0, k1_threshold_check, r0_bounds, r0_of_xi, thresholds, xi_of_r0, xi_star,
    R0Class, ThresholdSet,
};
pub use error::{RadialError, Result};
pub use foe::{foe_blowup_radius, foe_closed, foe_switch_radius, h_integral, FoeCurve};
pub use nonlinearity::{validate_bistable, Nonlinearity, NonlinearitySummary};
pub use ode::Tolerances;
pub use report::{write_solution_csv, RunSummary};
pub use soe::{k1_amplitude_and_period, k1_classify, soe_energy_audit, soe_integrate, SoeRun, SoeStart};

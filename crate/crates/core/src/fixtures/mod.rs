//! Analytic benchmark problems, convergence studies and brute-force oracles.

pub mod analytic;
pub mod oracles;

pub use analytic::{
    case_by_name, kinderlehrer_signorini, lshape_corner, observed_order, run_convergence_study, smooth_square,
    AnalyticCase, CaseKind, ConvergenceStudy, ErrorNorm, LevelError, CASE_NAMES,
};

pub use oracles::{oracle_active_set_qp, oracle_gnep_fixed_point, oracle_stick_slip, Contact, KktPoint, SignSet, StickSlipPoint};

#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use hypvar::config::{example5_value, ProblemSpec};
use hypvar::functional::Problem;
use hypvar::radial::{RadialFunction, RadialGrid};
use hypvar::threshold::{threshold_report, ThresholdOptions, ThresholdReport};

/// The worked example with dotted-path overrides.
pub fn example(overrides: &[&str]) -> Problem {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ProblemSpec::from_value(example5_value(), &o).unwrap().build().unwrap()
}

pub fn thresholds(p: &Problem) -> ThresholdReport {
    let opts = ThresholdOptions { theta_candidates: 8, ..ThresholdOptions::default() };
    threshold_report(p, &opts).unwrap()
}

/// Example on 512 cells with its threshold report, computed once per binary.
pub fn coarse() -> &'static (Problem, ThresholdReport) {
    static CELL: OnceLock<(Problem, ThresholdReport)> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = example(&["grid.M=512"]);
        let th = thresholds(&p);
        (p, th)
    })
}

/// Smooth, sign-changing profile `sum_k c_k e^{-(k+2) rho} cos(k rho)`.
pub fn profile(grid: &Arc<RadialGrid>, coeffs: &[f64]) -> RadialFunction {
    RadialFunction::sample(grid.clone(), |s| {
        coeffs.iter().enumerate().map(|(k, c)| c * (-(k as f64 + 2.0) * s).exp() * (k as f64 * s).cos()).sum()
    })
    .unwrap()
}

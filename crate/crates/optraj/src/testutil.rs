//! Shared problem builders for unit tests.

use crate::expr::{parse_expr, Expr};
use crate::ocp::{OcProblem, ProblemInputs};

pub fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

pub fn exprs(list: &[&str]) -> Vec<Expr> {
    list.iter().map(|s| parse_expr(s).unwrap()).collect()
}

/// Double integrator, minimum energy: ẋ1 = x2, ẋ2 = u, L = ½u²,
/// x(0) = [1, 1], x(2) = [0, 0]. Analytic x1(t) = 0.5t³ − 1.75t² + t + 1.
pub fn double_integrator() -> OcProblem {
    OcProblem::build(ProblemInputs {
        states: names(&["x1", "x2"]),
        controls: names(&["u"]),
        dynamics: exprs(&["x2", "u"]),
        lagrange: parse_expr("0.5*u^2").unwrap(),
        t0: 0.0,
        tf: 2.0,
        x_initial: vec![Some(1.0), Some(1.0)],
        x_final: vec![Some(0.0), Some(0.0)],
        ..Default::default()
    })
    .unwrap()
}

/// Analytic optimal x1 for [`double_integrator`].
pub fn double_integrator_analytic_x1(t: f64) -> f64 {
    0.5 * t.powi(3) - 1.75 * t.powi(2) + t + 1.0
}

/// One state, ẋ = u, min ∫u², x(0) = 0, x(1) = 1. Optimal u ≡ 1.
pub fn single_state_reach() -> OcProblem {
    OcProblem::build(ProblemInputs {
        states: names(&["x1"]),
        controls: names(&["u"]),
        dynamics: exprs(&["u"]),
        lagrange: parse_expr("u^2").unwrap(),
        t0: 0.0,
        tf: 1.0,
        x_initial: vec![Some(0.0)],
        x_final: vec![Some(1.0)],
        ..Default::default()
    })
    .unwrap()
}

/// Smooth nonlinear two-state problem exercising the SQP path:
/// ẋ1 = exp(x1) + cos(x2) + u, ẋ2 = sin(x1) − x2, L = u²,
/// x(0) = [1, 1], x(2) = [0, 0].
pub fn nonlinear_smooth() -> OcProblem {
    OcProblem::build(ProblemInputs {
        states: names(&["x1", "x2"]),
        controls: names(&["u"]),
        dynamics: exprs(&["exp(x1) + cos(x2) + u", "sin(x1) - x2"]),
        lagrange: parse_expr("u^2").unwrap(),
        t0: 0.0,
        tf: 2.0,
        x_initial: vec![Some(1.0), Some(1.0)],
        x_final: vec![Some(0.0), Some(0.0)],
        ..Default::default()
    })
    .unwrap()
}

/// The same nonlinear structure with the unstable second state
/// (`ẋ2 = sin(x1) + x2`). Starting from x2(0) = 1, x2 can never fall below
/// 1, so the x2(2) = 0 pin is unreachable and a solver must report
/// non-convergence gracefully.
pub fn nonlinear_unreachable() -> OcProblem {
    OcProblem::build(ProblemInputs {
        states: names(&["x1", "x2"]),
        controls: names(&["u"]),
        dynamics: exprs(&["exp(x1) + cos(x2) + u", "sin(x1) + x2"]),
        lagrange: parse_expr("u^2").unwrap(),
        t0: 0.0,
        tf: 2.0,
        x_initial: vec![Some(1.0), Some(1.0)],
        x_final: vec![Some(0.0), Some(0.0)],
        ..Default::default()
    })
    .unwrap()
}

/// Scalar tracking problem with a Mayer term and a free final state:
/// ẋ = u, L = ½u², Φ = x², x(0) = 1, x(1) free. The continuous optimum is
/// u ≡ −2/3 with objective exactly 1/3, and the discrete optimum matches it
/// exactly because constant controls are represented exactly by every
/// scheme here.
pub fn mayer_free_end() -> OcProblem {
    OcProblem::build(ProblemInputs {
        states: names(&["x1"]),
        controls: names(&["u"]),
        dynamics: exprs(&["u"]),
        lagrange: parse_expr("0.5*u^2").unwrap(),
        mayer: Some(parse_expr("x1^2").unwrap()),
        t0: 0.0,
        tf: 1.0,
        x_initial: vec![Some(1.0)],
        x_final: vec![None],
        ..Default::default()
    })
    .unwrap()
}

//! optraj — an optimal-control toolkit built around a small symbolic core.
//!
//! The pipeline has five stages, each usable on its own:
//!
//! 1. **Expressions** ([`expr`]): parse, evaluate, differentiate, and
//!    linearize the formulas a problem is made of.
//! 2. **Problem model** ([`ocp`]): the continuous fixed-horizon problem
//!    `min Φ(x(tf)) + ∫L dt` subject to `ẋ = f(x, u, t)` with per-state
//!    boundary pins, validated and classified as linear-quadratic or
//!    nonlinear.
//! 3. **Transcription** ([`transcribe`]): forward Euler, backward Euler, or
//!    trapezoidal discretization onto a uniform grid, yielding a
//!    finite-dimensional program over node samples.
//! 4. **Solver** ([`solver`]): a dense KKT solve for linear-quadratic
//!    programs and a line-search SQP with exact symbolic derivatives for
//!    the rest.
//! 5. **Surfaces**: circuits flatten into the same problem model
//!    ([`circuit`]), programs round-trip as text ([`model_text`]), and the
//!    `optraj` binary drives everything from declarative problem files
//!    ([`problem_file`], [`cli`]).
//!
//! ```
//! use optraj::expr::parse_expr;
//! use optraj::ocp::{OcProblem, ProblemInputs};
//! use optraj::solver::{solve_nlp};
//! use optraj::transcribe::{transcribe, Grid, Scheme};
//!
//! // Minimum-energy double integrator: reach the origin at t = 2.
//! let problem = OcProblem::build(ProblemInputs {
//!     states: vec!["x1".into(), "x2".into()],
//!     controls: vec!["u".into()],
//!     dynamics: vec![parse_expr("x2").unwrap(), parse_expr("u").unwrap()],
//!     lagrange: parse_expr("0.5*u^2").unwrap(),
//!     t0: 0.0,
//!     tf: 2.0,
//!     x_initial: vec![Some(1.0), Some(1.0)],
//!     x_final: vec![Some(0.0), Some(0.0)],
//!     ..Default::default()
//! })
//! .unwrap();
//!
//! let grid = Grid::new(0.0, 2.0, 100).unwrap();
//! let nlp = transcribe(&problem, Scheme::Trapezoidal, &grid).unwrap();
//! let solution = solve_nlp(&nlp, &problem.classify()).unwrap();
//! assert!(solution.diagnostics.converged);
//! ```

pub mod circuit;
pub mod cli;
pub mod expr;
pub mod linalg;
pub mod model_text;
pub mod ocp;
pub mod problem_file;
pub mod solver;
pub mod transcribe;

#[cfg(test)]
pub(crate) mod testutil;

// The guide chapters double as doc-tests: every fenced Rust block in the
// book is compiled and run by `cargo test --doc`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/transcription.md")]
    mod transcription {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/circuits.md")]
    mod circuits {}
}

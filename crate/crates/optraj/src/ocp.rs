//! The continuous optimal-control problem model.
//!
//! An [`OcProblem`] is the fixed-horizon problem
//!
//! ```text
//! min   Φ(x(tf)) + ∫ L(x, u, t) dt      over t ∈ [t0, tf]
//! s.t.  ẋ = f(x, u, t),   per-state boundary pins at t0 and tf
//! ```
//!
//! held entirely as expression trees. Parameters are substituted at build
//! time, every invariant is validated up front, and the result is immutable.
//!
//! [`classify`](OcProblem::classify) decides the solver route: problems
//! whose dynamics are affine in states and controls with constant
//! coefficients, and whose cost is at most quadratic, go to the direct QP
//! path; everything else — including any time dependence in the dynamics
//! coefficients — goes to the iterative nonlinear path.

use crate::expr::{Expr, Linearization};
use std::collections::{BTreeMap, HashMap, HashSet};

/// A validated, immutable continuous optimal-control problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OcProblem {
    states: Vec<String>,
    controls: Vec<String>,
    dynamics: Vec<Expr>,
    lagrange: Expr,
    mayer: Option<Expr>,
    t0: f64,
    tf: f64,
    x_initial: Vec<Option<f64>>,
    x_final: Vec<Option<f64>>,
}

/// Construction inputs for [`OcProblem::build`]. Expressions may reference
/// states, controls, `t`, and the keys of `parameters` (which are
/// substituted by value before validation).
#[derive(Debug, Clone, Default)]
pub struct ProblemInputs {
    pub states: Vec<String>,
    pub controls: Vec<String>,
    pub dynamics: Vec<Expr>,
    pub lagrange: Expr,
    pub mayer: Option<Expr>,
    pub parameters: BTreeMap<String, f64>,
    pub t0: f64,
    pub tf: f64,
    pub x_initial: Vec<Option<f64>>,
    pub x_final: Vec<Option<f64>>,
}

/// Validation failure while building a problem.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("dynamics length {got} does not match state count {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("boundary list length {got} does not match state count {expected}")]
    BoundaryMismatch { expected: usize, got: usize },
    #[error("unknown variable '{0}' in {1}")]
    UnknownVariable(String, String),
    #[error("horizon is empty: tf ({tf}) must exceed t0 ({t0})")]
    EmptyHorizon { t0: f64, tf: f64 },
    #[error("duplicate identifier '{0}'")]
    DuplicateIdentifier(String),
    #[error("no state variables declared")]
    NoStates,
    #[error("no control variables declared")]
    NoControls,
}

/// Solver routing decision, with the extracted linear system when it exists.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemClass {
    /// `ẋ = A·x + B·u + offset` with constant matrices, cost at most
    /// quadratic in states and controls.
    LinearQuadratic {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    Nonlinear,
}

impl ProblemClass {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemClass::LinearQuadratic { .. } => "LinearQuadratic",
            ProblemClass::Nonlinear => "Nonlinear",
        }
    }
}

impl OcProblem {
    /// Validate raw inputs into an immutable problem. Parameters are
    /// substituted into all expressions first, so downstream code never
    /// sees them.
    pub fn build(inputs: ProblemInputs) -> Result<OcProblem, ProblemError> {
        let ProblemInputs {
            states,
            controls,
            dynamics,
            lagrange,
            mayer,
            parameters,
            t0,
            tf,
            x_initial,
            x_final,
        } = inputs;

        if states.is_empty() {
            return Err(ProblemError::NoStates);
        }
        if controls.is_empty() {
            return Err(ProblemError::NoControls);
        }
        if !(tf > t0) {
            return Err(ProblemError::EmptyHorizon { t0, tf });
        }
        if dynamics.len() != states.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: states.len(),
                got: dynamics.len(),
            });
        }
        if x_initial.len() != states.len() {
            return Err(ProblemError::BoundaryMismatch {
                expected: states.len(),
                got: x_initial.len(),
            });
        }
        if x_final.len() != states.len() {
            return Err(ProblemError::BoundaryMismatch {
                expected: states.len(),
                got: x_final.len(),
            });
        }

        let mut seen = HashSet::new();
        for name in states.iter().chain(&controls).chain([&"t".to_string()]) {
            if !seen.insert(name.clone()) {
                return Err(ProblemError::DuplicateIdentifier(name.clone()));
            }
        }

        let subst: HashMap<String, Expr> = parameters
            .iter()
            .map(|(k, v)| (k.clone(), Expr::Constant(*v)))
            .collect();
        let dynamics: Vec<Expr> = dynamics.iter().map(|e| e.substitute(&subst)).collect();
        let lagrange = lagrange.substitute(&subst);
        let mayer = mayer.map(|e| e.substitute(&subst));

        let mut allowed: HashSet<&str> = states.iter().map(|s| s.as_str()).collect();
        allowed.extend(controls.iter().map(|s| s.as_str()));
        allowed.insert("t");
        for (i, e) in dynamics.iter().enumerate() {
            check_free_vars(e, &allowed, &format!("dynamics of {}", states[i]))?;
        }
        check_free_vars(&lagrange, &allowed, "lagrange term")?;
        if let Some(m) = &mayer {
            let state_only: HashSet<&str> = states.iter().map(|s| s.as_str()).collect();
            check_free_vars(m, &state_only, "mayer term")?;
        }

        Ok(OcProblem {
            states,
            controls,
            dynamics,
            lagrange,
            mayer,
            t0,
            tf,
            x_initial,
            x_final,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn controls(&self) -> &[String] {
        &self.controls
    }

    pub fn dynamics(&self) -> &[Expr] {
        &self.dynamics
    }

    pub fn lagrange(&self) -> &Expr {
        &self.lagrange
    }

    pub fn mayer(&self) -> Option<&Expr> {
        self.mayer.as_ref()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn x_initial(&self) -> &[Option<f64>] {
        &self.x_initial
    }

    pub fn x_final(&self) -> &[Option<f64>] {
        &self.x_final
    }

    /// Route the problem: extract `A`, `B`, `offset` when every dynamics row
    /// is affine with constant coefficients and the cost is at most
    /// quadratic; otherwise `Nonlinear`.
    pub fn classify(&self) -> ProblemClass {
        let n_x = self.states.len();
        let vars: Vec<&str> = self
            .states
            .iter()
            .chain(&self.controls)
            .map(|s| s.as_str())
            .collect();

        let mut a = Vec::with_capacity(n_x);
        let mut b = Vec::with_capacity(n_x);
        let mut offset = Vec::with_capacity(n_x);
        for row in &self.dynamics {
            match row.linearize(&vars) {
                Linearization::Affine {
                    coefficients,
                    constant,
                } => {
                    a.push(coefficients[..n_x].to_vec());
                    b.push(coefficients[n_x..].to_vec());
                    offset.push(constant);
                }
                Linearization::NonAffine => return ProblemClass::Nonlinear,
            }
        }

        if !is_quadratic(&self.lagrange, &vars) {
            return ProblemClass::Nonlinear;
        }
        if let Some(m) = &self.mayer {
            let state_vars: Vec<&str> = self.states.iter().map(|s| s.as_str()).collect();
            if !is_quadratic(m, &state_vars) {
                return ProblemClass::Nonlinear;
            }
        }
        ProblemClass::LinearQuadratic { a, b, offset }
    }
}

fn check_free_vars(
    e: &Expr,
    allowed: &HashSet<&str>,
    context: &str,
) -> Result<(), ProblemError> {
    for v in e.free_vars() {
        if !allowed.contains(v.as_str()) {
            return Err(ProblemError::UnknownVariable(v, context.to_string()));
        }
    }
    Ok(())
}

/// Degree ≤ 2 in `vars`: every second partial derivative folds to a literal
/// constant (which also makes every third partial identically zero). Time
/// may appear additively or as a linear-term coefficient, but not in any
/// second derivative.
fn is_quadratic<S: AsRef<str>>(e: &Expr, vars: &[S]) -> bool {
    for (i, vi) in vars.iter().enumerate() {
        let di = e.differentiate(vi.as_ref());
        for vj in &vars[i..] {
            let dij = di.differentiate(vj.as_ref());
            if dij.as_constant().is_none() {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn exprs(list: &[&str]) -> Vec<Expr> {
        list.iter().map(|s| parse_expr(s).unwrap()).collect()
    }

    /// The double-integrator minimum-energy problem used throughout the tests.
    pub(crate) fn double_integrator() -> OcProblem {
        OcProblem::build(ProblemInputs {
            states: names(&["x1", "x2"]),
            controls: names(&["u"]),
            dynamics: exprs(&["x2", "u"]),
            lagrange: parse_expr("0.5*u^2").unwrap(),
            mayer: None,
            parameters: BTreeMap::new(),
            t0: 0.0,
            tf: 2.0,
            x_initial: vec![Some(1.0), Some(1.0)],
            x_final: vec![Some(0.0), Some(0.0)],
        })
        .unwrap()
    }

    #[test]
    fn builds_valid_problem() {
        let p = double_integrator();
        assert_eq!(p.states(), &["x1".to_string(), "x2".to_string()]);
        assert_eq!(p.dynamics()[0], Expr::variable("x2"));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let err = OcProblem::build(ProblemInputs {
            states: names(&["x1", "x2"]),
            controls: names(&["u"]),
            dynamics: exprs(&["x2"]),
            lagrange: parse_expr("0.5*u^2").unwrap(),
            t0: 0.0,
            tf: 1.0,
            x_initial: vec![None, None],
            x_final: vec![None, None],
            ..Default::default()
        })
        .unwrap_err();
        assert_eq!(err, ProblemError::DimensionMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn rejects_unknown_variable() {
        let err = OcProblem::build(ProblemInputs {
            states: names(&["x1"]),
            controls: names(&["u"]),
            dynamics: exprs(&["u"]),
            lagrange: parse_expr("u^2 + y").unwrap(),
            t0: 0.0,
            tf: 1.0,
            x_initial: vec![None],
            x_final: vec![None],
            ..Default::default()
        })
        .unwrap_err();
        assert_eq!(
            err,
            ProblemError::UnknownVariable("y".into(), "lagrange term".into())
        );
    }

    #[test]
    fn rejects_empty_horizon_and_duplicates() {
        let base = ProblemInputs {
            states: names(&["x1"]),
            controls: names(&["u"]),
            dynamics: exprs(&["u"]),
            lagrange: parse_expr("u^2").unwrap(),
            t0: 1.0,
            tf: 1.0,
            x_initial: vec![None],
            x_final: vec![None],
            ..Default::default()
        };
        assert_eq!(
            OcProblem::build(base.clone()).unwrap_err(),
            ProblemError::EmptyHorizon { t0: 1.0, tf: 1.0 }
        );
        let mut dup = base.clone();
        dup.tf = 2.0;
        dup.controls = names(&["x1"]);
        assert_eq!(
            OcProblem::build(dup).unwrap_err(),
            ProblemError::DuplicateIdentifier("x1".into())
        );
        let mut t_state = base;
        t_state.tf = 2.0;
        t_state.states = names(&["t"]);
        assert!(matches!(
            OcProblem::build(t_state),
            Err(ProblemError::DuplicateIdentifier(_))
        ));
    }

    #[test]
    fn parameters_substituted_before_validation() {
        let p = OcProblem::build(ProblemInputs {
            states: names(&["x"]),
            controls: names(&["u"]),
            dynamics: exprs(&["(u - x)/tau"]),
            lagrange: parse_expr("0.5*u^2").unwrap(),
            parameters: BTreeMap::from([("tau".to_string(), 2.0)]),
            t0: 0.0,
            tf: 1.0,
            x_initial: vec![Some(0.0)],
            x_final: vec![Some(1.0)],
            ..Default::default()
        })
        .unwrap();
        assert!(p.dynamics()[0].free_vars().contains("x"));
        assert!(!p.dynamics()[0].free_vars().contains("tau"));
    }

    #[test]
    fn classifies_linear_quadratic_with_matrices() {
        let p = double_integrator();
        match p.classify() {
            ProblemClass::LinearQuadratic { a, b, offset } => {
                assert_eq!(a, vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
                assert_eq!(b, vec![vec![0.0], vec![1.0]]);
                assert_eq!(offset, vec![0.0, 0.0]);
            }
            ProblemClass::Nonlinear => panic!("expected LinearQuadratic"),
        }
    }

    #[test]
    fn classifies_transcendental_dynamics_as_nonlinear() {
        let p = OcProblem::build(ProblemInputs {
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
        .unwrap();
        assert_eq!(p.classify(), ProblemClass::Nonlinear);
    }

    #[test]
    fn quartic_cost_is_nonlinear() {
        let p = OcProblem::build(ProblemInputs {
            states: names(&["x1", "x2"]),
            controls: names(&["u"]),
            dynamics: exprs(&["x2", "u"]),
            lagrange: parse_expr("u^4").unwrap(),
            t0: 0.0,
            tf: 2.0,
            x_initial: vec![Some(1.0), Some(1.0)],
            x_final: vec![Some(0.0), Some(0.0)],
            ..Default::default()
        })
        .unwrap();
        assert_eq!(p.classify(), ProblemClass::Nonlinear);
    }

    #[test]
    fn time_varying_dynamics_forces_nonlinear() {
        let p = OcProblem::build(ProblemInputs {
            states: names(&["x"]),
            controls: names(&["u"]),
            dynamics: exprs(&["t*x + u"]),
            lagrange: parse_expr("u^2").unwrap(),
            t0: 0.0,
            tf: 1.0,
            x_initial: vec![Some(0.0)],
            x_final: vec![Some(1.0)],
            ..Default::default()
        })
        .unwrap();
        assert_eq!(p.classify(), ProblemClass::Nonlinear);
    }

    #[test]
    fn classification_invariant_under_positive_cost_scaling() {
        for scale in [0.25, 1.0, 8.0] {
            let p = OcProblem::build(ProblemInputs {
                states: names(&["x1", "x2"]),
                controls: names(&["u"]),
                dynamics: exprs(&["x2", "u"]),
                lagrange: Expr::mul(
                    Expr::constant(scale),
                    parse_expr("0.5*u^2").unwrap(),
                ),
                t0: 0.0,
                tf: 2.0,
                x_initial: vec![Some(1.0), Some(1.0)],
                x_final: vec![Some(0.0), Some(0.0)],
                ..Default::default()
            })
            .unwrap();
            assert_eq!(p.classify().name(), "LinearQuadratic");

            let q = OcProblem::build(ProblemInputs {
                states: names(&["x1"]),
                controls: names(&["u"]),
                dynamics: exprs(&["u"]),
                lagrange: Expr::mul(Expr::constant(scale), parse_expr("u^4").unwrap()),
                t0: 0.0,
                tf: 2.0,
                x_initial: vec![Some(1.0)],
                x_final: vec![Some(0.0)],
                ..Default::default()
            })
            .unwrap();
            assert_eq!(q.classify().name(), "Nonlinear");
        }
    }

    #[test]
    fn linear_dynamics_rows_match_matrix_arithmetic() {
        let p = double_integrator();
        let (a, b, offset) = match p.classify() {
            ProblemClass::LinearQuadratic { a, b, offset } => (a, b, offset),
            _ => panic!(),
        };
        let mut rng_state = 1u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for _ in 0..20 {
            let (x1, x2, u) = (next(), next(), next());
            for (row, e) in p.dynamics().iter().enumerate() {
                let direct = e
                    .eval_map(&[("x1", x1), ("x2", x2), ("u", u)].into())
                    .unwrap();
                let linear =
                    a[row][0] * x1 + a[row][1] * x2 + b[row][0] * u + offset[row];
                assert!((direct - linear).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let p1 = double_integrator();
        let p2 = double_integrator();
        assert_eq!(p1, p2);
    }
}

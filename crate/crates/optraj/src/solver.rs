//! Equality-constrained QP and SQP solvers for transcribed problems.
//!
//! Pinned variables are eliminated by substitution before anything else, so
//! the constraint Jacobian of a well-posed problem has full row rank. The
//! linear-quadratic path assembles the objective Hessian and constraint
//! matrix once and solves a single saddle-point (KKT) system
//!
//! ```text
//! [ H  Aᵀ ] [ z ]   [ -g ]
//! [ A  0  ] [ λ ] = [  b ]
//! ```
//!
//! by dense LU with partial pivoting. A singular factorization is retried
//! with `H + εI` for escalating `ε`; if every retry fails the system is
//! reported as [`SolverError::SingularKkt`] (the signature of contradictory
//! pins or redundant constraints).
//!
//! The nonlinear path is a line-search SQP: at each iterate it solves the
//! same KKT system built from the exact constraint Jacobian and the exact
//! Hessian of the Lagrangian (regularized by the same escalating `εI` when
//! the step is not a descent direction for the merit function), then
//! backtracks on the ℓ1 merit `f + ρ·Σ|cᵢ|` with `ρ = 10·(1+‖λ‖∞)`.
//! Non-convergence is reported in the diagnostics, not raised as an error.

use crate::expr::{EvalError, Expr, Linearization};
use crate::linalg::{inf_norm, lu_solve, Matrix};
use crate::ocp::ProblemClass;
use crate::transcribe::{DiscreteNlp, Grid, Scheme};
use std::collections::HashMap;

/// Assembled equality-constrained QP over the pin-eliminated variables.
#[derive(Debug, Clone)]
pub struct QpData {
    /// Objective Hessian (n×n, symmetric).
    pub h: Matrix,
    /// Objective gradient at the origin.
    pub g: Vec<f64>,
    /// Constraint Jacobian (m×n, m ≤ n for well-posed problems).
    pub a: Matrix,
    /// Constraint right-hand side: rows satisfy `A·z = b`.
    pub b: Vec<f64>,
    /// Names of the free variables, in decision order.
    pub free: Vec<String>,
}

/// Output of one KKT solve.
#[derive(Debug, Clone)]
pub struct KktSolution {
    pub z: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// ∞-norm of the residual of the (possibly regularized) system.
    pub residual_inf: f64,
    /// The `ε` of the `H + εI` regularization that succeeded (0 when none).
    pub regularization: f64,
}

/// Solver diagnostics attached to every solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub kkt_residual_inf: f64,
    pub converged: bool,
    pub scheme: Scheme,
    pub problem_class: &'static str,
}

/// A solved trajectory on the transcription grid.
#[derive(Debug, Clone)]
pub struct Solution {
    pub grid: Grid,
    /// `states[i][j]`: state `j` at node `i`, `i = 0..=N`.
    pub states: Vec<Vec<f64>>,
    /// `controls[r][k]`: control `k` at node `control_offset + r`.
    pub controls: Vec<Vec<f64>>,
    /// First node index carrying control variables.
    pub control_offset: usize,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("not a linear-quadratic program: {0}")]
    NotLinearQuadratic(String),
    #[error("singular KKT system (contradictory pins or redundant constraints)")]
    SingularKkt,
    #[error("constraints are contradictory: {0}")]
    Infeasible(String),
    #[error("initial point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("objective could not be evaluated: {0}")]
    BadObjective(EvalError),
}

/// SQP stopping controls.
#[derive(Debug, Clone, Copy)]
pub struct SqpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SqpOptions {
    fn default() -> Self {
        SqpOptions {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Escalation ladder for `H + εI` regularization. The first three rungs
/// match the singularity-retry policy of [`solve_kkt`]; the later ones are
/// only reached by the SQP path when an exact Lagrangian Hessian is
/// indefinite enough that small shifts cannot produce a descent direction.
const EPSILON_LADDER: [f64; 8] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2];

const FEASIBILITY_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Pin elimination
// ---------------------------------------------------------------------------

/// The NLP with pinned variables substituted out.
struct Reduction {
    free: Vec<String>,
    index: HashMap<String, usize>,
    objective: Expr,
    /// Constraints with pins substituted; entries that folded to ~0 are
    /// dropped, keeping the Jacobian free of vacuous rows.
    constraints: Vec<Expr>,
    pins: HashMap<String, f64>,
}

fn reduce(nlp: &DiscreteNlp) -> Result<Reduction, SolverError> {
    let pins: HashMap<String, f64> = nlp.pins.iter().cloned().collect();
    let free: Vec<String> = nlp
        .variables
        .iter()
        .filter(|v| !pins.contains_key(*v))
        .cloned()
        .collect();
    let index: HashMap<String, usize> = free
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), i))
        .collect();

    let pin_exprs: HashMap<String, Expr> = pins
        .iter()
        .map(|(k, v)| (k.clone(), Expr::Constant(*v)))
        .collect();
    let objective = nlp.objective.substitute(&pin_exprs);

    let mut constraints = Vec::with_capacity(nlp.constraints.len());
    for c in &nlp.constraints {
        let c = c.substitute(&pin_exprs);
        if let Some(value) = c.as_constant() {
            if value.abs() > FEASIBILITY_TOL {
                return Err(SolverError::Infeasible(format!(
                    "fully pinned constraint has residual {value:.3e}"
                )));
            }
            continue;
        }
        constraints.push(c);
    }

    Ok(Reduction {
        free,
        index,
        objective,
        constraints,
        pins,
    })
}

impl Reduction {
    fn full_vector(&self, nlp: &DiscreteNlp, z: &[f64]) -> Vec<f64> {
        nlp.variables
            .iter()
            .map(|name| match self.pins.get(name) {
                Some(v) => *v,
                None => z[self.index[name]],
            })
            .collect()
    }

    fn eval(&self, e: &Expr, z: &[f64]) -> Result<f64, EvalError> {
        e.evaluate(&|name: &str| self.index.get(name).map(|&j| z[j]))
    }
}

// ---------------------------------------------------------------------------
// QP assembly and KKT solve
// ---------------------------------------------------------------------------

/// Assemble the QP data for an NLP whose objective is quadratic and whose
/// constraints are affine in the decision variables. Pins are eliminated
/// first; [`SolverError::NotLinearQuadratic`] reports any nonlinearity.
pub fn assemble_qp(nlp: &DiscreteNlp) -> Result<QpData, SolverError> {
    let red = reduce(nlp)?;
    assemble_reduced(&red).map(|(qp, _)| qp)
}

fn assemble_reduced(red: &Reduction) -> Result<(QpData, Vec<Expr>), SolverError> {
    let n = red.free.len();
    let m = red.constraints.len();
    let free_refs: Vec<&str> = red.free.iter().map(|s| s.as_str()).collect();

    let mut a = Matrix::zeros(m, n);
    let mut b = vec![0.0; m];
    for (k, c) in red.constraints.iter().enumerate() {
        match c.linearize(&free_refs) {
            Linearization::Affine {
                coefficients,
                constant,
            } => {
                for (j, v) in coefficients.iter().enumerate() {
                    a[(k, j)] = *v;
                }
                b[k] = -constant;
            }
            Linearization::NonAffine => {
                return Err(SolverError::NotLinearQuadratic(format!(
                    "constraint '{c}' is not affine"
                )));
            }
        }
    }

    let mut h = Matrix::zeros(n, n);
    let mut g = vec![0.0; n];
    let zero = vec![0.0; n];
    for (j, name) in red.free.iter().enumerate() {
        let gj = red.objective.differentiate(name);
        for v in gj.free_vars() {
            let Some(&l) = red.index.get(&v) else { continue };
            let hjl = gj.differentiate(&v);
            match hjl.as_constant() {
                Some(c) => {
                    h[(j, l)] = c;
                }
                None => {
                    return Err(SolverError::NotLinearQuadratic(format!(
                        "objective is not quadratic in {name}, {v}"
                    )));
                }
            }
        }
        g[j] = red
            .eval(&gj, &zero)
            .map_err(SolverError::BadObjective)?;
    }

    Ok((
        QpData {
            h,
            g,
            a,
            b,
            free: red.free.clone(),
        },
        red.constraints.clone(),
    ))
}

/// Solve the saddle-point system `[H Aᵀ; A 0]·[z; λ] = [-g; b]`.
///
/// If LU factorization detects singularity the Hessian block is shifted by
/// `ε ∈ {1e-10, 1e-8, 1e-6}` and the solve retried; the `ε` that succeeded
/// is reported. Exhausting the ladder yields [`SolverError::SingularKkt`].
pub fn solve_kkt(qp: &QpData) -> Result<KktSolution, SolverError> {
    let n = qp.h.rows();
    let m = qp.a.rows();
    debug_assert_eq!(qp.g.len(), n);
    debug_assert_eq!(qp.b.len(), m);
    debug_assert!(hessian_is_symmetric(&qp.h), "H must be symmetric");

    let mut rhs = Vec::with_capacity(n + m);
    rhs.extend(qp.g.iter().map(|v| -v));
    rhs.extend(qp.b.iter().copied());
    let bound = 1e-9 * (1.0 + inf_norm(&qp.b) + inf_norm(&qp.g));

    for &eps in &EPSILON_LADDER[..4] {
        let kkt = build_kkt(&qp.h, &qp.a, eps);
        let sol = match lu_solve(&kkt, &rhs) {
            Ok(sol) => sol,
            Err(_) => continue,
        };
        let residual: Vec<f64> = kkt
            .mul_vec(&sol)
            .iter()
            .zip(&rhs)
            .map(|(kx, r)| kx - r)
            .collect();
        let residual_inf = inf_norm(&residual);
        if residual_inf > bound {
            continue;
        }
        return Ok(KktSolution {
            z: sol[..n].to_vec(),
            multipliers: sol[n..].to_vec(),
            residual_inf,
            regularization: eps,
        });
    }
    Err(SolverError::SingularKkt)
}

fn hessian_is_symmetric(h: &Matrix) -> bool {
    let n = h.rows();
    let scale = 1e-12 * (1.0 + h.max_abs());
    (0..n).all(|i| (i + 1..n).all(|j| (h[(i, j)] - h[(j, i)]).abs() <= scale))
}

fn build_kkt(h: &Matrix, a: &Matrix, eps: f64) -> Matrix {
    let n = h.rows();
    let m = a.rows();
    let mut kkt = Matrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            kkt[(i, j)] = h[(i, j)];
        }
        kkt[(i, i)] += eps;
    }
    for k in 0..m {
        for j in 0..n {
            kkt[(n + k, j)] = a[(k, j)];
            kkt[(j, n + k)] = a[(k, j)];
        }
    }
    kkt
}

// ---------------------------------------------------------------------------
// Initial guess
// ---------------------------------------------------------------------------

/// Reference starting point: states interpolate linearly between their
/// pinned endpoint values (a single pinned end extends as a constant, a
/// state with neither end pinned sits at 0); controls start at 0.
pub fn initial_guess(nlp: &DiscreteNlp) -> Vec<f64> {
    let layout = &nlp.layout;
    let n = layout.intervals;
    let mut z = Vec::with_capacity(nlp.variables.len());
    for j in 0..layout.n_states {
        let first = nlp.pin_value(&layout.state_var(j, 0));
        let last = nlp.pin_value(&layout.state_var(j, n));
        for i in 0..=n {
            let s = i as f64 / n as f64;
            let v = match (first, last) {
                (Some(a), Some(b)) => a + s * (b - a),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => 0.0,
            };
            z.push(v);
        }
    }
    let (lo, hi) = layout.control_range;
    z.extend(std::iter::repeat(0.0).take(layout.n_controls * (hi - lo + 1)));
    z
}

// ---------------------------------------------------------------------------
// Solution extraction
// ---------------------------------------------------------------------------

fn extract_solution(
    nlp: &DiscreteNlp,
    red: &Reduction,
    z: &[f64],
    objective: f64,
    diagnostics: Diagnostics,
) -> Solution {
    let full = red.full_vector(nlp, z);
    let at: HashMap<&str, f64> = nlp
        .variables
        .iter()
        .map(|s| s.as_str())
        .zip(full.iter().copied())
        .collect();
    let layout = &nlp.layout;
    let n = layout.intervals;
    let states: Vec<Vec<f64>> = (0..=n)
        .map(|i| {
            (0..layout.n_states)
                .map(|j| at[layout.state_var(j, i).as_str()])
                .collect()
        })
        .collect();
    let (lo, hi) = layout.control_range;
    let controls: Vec<Vec<f64>> = (lo..=hi)
        .map(|i| {
            (0..layout.n_controls)
                .map(|k| at[layout.control_var(k, i).as_str()])
                .collect()
        })
        .collect();
    Solution {
        grid: nlp.grid,
        states,
        controls,
        control_offset: lo,
        objective,
        diagnostics,
    }
}

fn max_defect(red: &Reduction, z: &[f64]) -> f64 {
    red.constraints
        .iter()
        .map(|c| red.eval(c, z).map(f64::abs).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// QP path
// ---------------------------------------------------------------------------

/// Direct solve for linear-quadratic transcriptions: assemble once, solve
/// one KKT system.
pub fn solve_qp(nlp: &DiscreteNlp) -> Result<Solution, SolverError> {
    let red = reduce(nlp)?;
    let (qp, _) = assemble_reduced(&red)?;

    let (z, iterations, residual) = if red.free.is_empty() {
        (Vec::new(), 0, 0.0)
    } else {
        let kkt = solve_kkt(&qp)?;
        (kkt.z, 1, kkt.residual_inf)
    };

    let objective = red
        .eval(&red.objective, &z)
        .map_err(SolverError::BadObjective)?;
    let defect = max_defect(&red, &z);
    let state_scale = 1.0 + z.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let converged = defect <= FEASIBILITY_TOL * state_scale;
    let diagnostics = Diagnostics {
        iterations,
        kkt_residual_inf: residual,
        converged,
        scheme: nlp.scheme,
        problem_class: "LinearQuadratic",
    };
    Ok(extract_solution(nlp, &red, &z, objective, diagnostics))
}

// ---------------------------------------------------------------------------
// SQP path
// ---------------------------------------------------------------------------

/// Sparse symbolic derivatives of one expression, prepared once.
struct Derivatives {
    /// (free index, ∂e/∂zⱼ)
    gradient: Vec<(usize, Expr)>,
    /// (j, l, ∂²e/∂zⱼ∂zₗ) with j ≤ l, zero entries omitted.
    hessian: Vec<(usize, usize, Expr)>,
}

fn differentiate_sparse(e: &Expr, index: &HashMap<String, usize>) -> Derivatives {
    let mut gradient = Vec::new();
    let mut hessian = Vec::new();
    let vars: Vec<String> = e
        .free_vars()
        .into_iter()
        .filter(|v| index.contains_key(v))
        .collect();
    for vi in &vars {
        let j = index[vi];
        let di = e.differentiate(vi);
        if di.is_zero() {
            continue;
        }
        for vl in di.free_vars() {
            let Some(&l) = index.get(&vl) else { continue };
            if l < j {
                continue; // symmetric entry handled from the other side
            }
            let dil = di.differentiate(&vl);
            if !dil.is_zero() {
                hessian.push((j, l, dil));
            }
        }
        gradient.push((j, di));
    }
    Derivatives { gradient, hessian }
}

/// Line-search SQP with exact derivatives.
///
/// `z0` is a full decision vector (see [`initial_guess`]); entries at pinned
/// positions are overridden by the pin values. Non-convergence returns the
/// best iterate with `converged = false` rather than an error.
pub fn solve_sqp(
    nlp: &DiscreteNlp,
    z0: &[f64],
    opts: &SqpOptions,
) -> Result<Solution, SolverError> {
    solve_sqp_traced(nlp, z0, opts, &mut Vec::new())
}

/// As [`solve_sqp`], recording `(merit before, merit after)` for every
/// accepted step, both under that iteration's penalty weight.
pub(crate) fn solve_sqp_traced(
    nlp: &DiscreteNlp,
    z0: &[f64],
    opts: &SqpOptions,
    merit_trace: &mut Vec<(f64, f64)>,
) -> Result<Solution, SolverError> {
    if z0.len() != nlp.variables.len() {
        return Err(SolverError::DimensionMismatch {
            expected: nlp.variables.len(),
            got: z0.len(),
        });
    }
    let red = reduce(nlp)?;
    let n = red.free.len();
    let m = red.constraints.len();

    let mut z: Vec<f64> = nlp
        .variables
        .iter()
        .zip(z0)
        .filter(|(name, _)| !red.pins.contains_key(*name))
        .map(|(_, v)| *v)
        .collect();

    let objective_derivs = differentiate_sparse(&red.objective, &red.index);
    let constraint_derivs: Vec<Derivatives> = red
        .constraints
        .iter()
        .map(|c| differentiate_sparse(c, &red.index))
        .collect();

    let mut lambda = vec![0.0; m];
    let mut iterations = 0usize;
    let mut converged = false;
    let mut kkt_residual = f64::INFINITY;

    for _ in 0..=opts.max_iter {
        // Exact first-order data at the current iterate.
        let c = eval_all(&red, &red.constraints, &z)?;
        let mut grad = vec![0.0; n];
        for (j, e) in &objective_derivs.gradient {
            grad[*j] = red.eval(e, &z).map_err(SolverError::BadObjective)?;
        }
        let mut a = Matrix::zeros(m, n);
        for (k, derivs) in constraint_derivs.iter().enumerate() {
            for (j, e) in &derivs.gradient {
                a[(k, *j)] = red.eval(e, &z).map_err(SolverError::BadObjective)?;
            }
        }

        let mut stationarity = a.mul_vec_transposed(&lambda);
        for (s, gj) in stationarity.iter_mut().zip(&grad) {
            *s += gj;
        }
        kkt_residual = inf_norm(&stationarity).max(inf_norm(&c));
        if kkt_residual <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        // Exact Hessian of the Lagrangian f + λᵀc.
        let mut h = Matrix::zeros(n, n);
        scatter_hessian(&objective_derivs.hessian, 1.0, &red, &z, &mut h)?;
        for (k, derivs) in constraint_derivs.iter().enumerate() {
            if lambda[k] != 0.0 {
                scatter_hessian(&derivs.hessian, lambda[k], &red, &z, &mut h)?;
            }
        }

        let f0 = red
            .eval(&red.objective, &z)
            .map_err(SolverError::BadObjective)?;
        let c_l1: f64 = c.iter().map(|v| v.abs()).sum();

        let mut rhs = Vec::with_capacity(n + m);
        rhs.extend(grad.iter().map(|v| -v));
        rhs.extend(c.iter().map(|v| -v));

        let mut stepped = false;
        for &eps in &EPSILON_LADDER {
            let kkt = build_kkt(&h, &a, eps);
            let sol = match lu_solve(&kkt, &rhs) {
                Ok(sol) => sol,
                Err(_) => continue,
            };
            let d = &sol[..n];
            let lambda_new = &sol[n..];

            let rho = 10.0 * (1.0 + inf_norm(lambda_new));
            let directional: f64 =
                grad.iter().zip(d).map(|(g, d)| g * d).sum::<f64>() - rho * c_l1;
            if !(directional < 0.0) || !directional.is_finite() {
                continue;
            }
            let merit0 = f0 + rho * c_l1;

            let mut alpha = 1.0f64;
            for _ in 0..30 {
                let z_try: Vec<f64> =
                    z.iter().zip(d).map(|(zi, di)| zi + alpha * di).collect();
                if let Some(merit_try) = merit_at(&red, &z_try, rho) {
                    if merit_try <= merit0 + 1e-4 * alpha * directional {
                        merit_trace.push((merit0, merit_try));
                        z = z_try;
                        lambda = lambda_new.to_vec();
                        stepped = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if stepped {
                break;
            }
        }
        if !stepped {
            break; // no descent available: report the best iterate
        }
        iterations += 1;
    }

    let objective = red
        .eval(&red.objective, &z)
        .map_err(SolverError::BadObjective)?;
    let diagnostics = Diagnostics {
        iterations,
        kkt_residual_inf: kkt_residual,
        converged,
        scheme: nlp.scheme,
        problem_class: "Nonlinear",
    };
    Ok(extract_solution(nlp, &red, &z, objective, diagnostics))
}

fn scatter_hessian(
    entries: &[(usize, usize, Expr)],
    weight: f64,
    red: &Reduction,
    z: &[f64],
    h: &mut Matrix,
) -> Result<(), SolverError> {
    for (j, l, e) in entries {
        let v = weight * red.eval(e, z).map_err(SolverError::BadObjective)?;
        h[(*j, *l)] += v;
        if j != l {
            h[(*l, *j)] += v;
        }
    }
    Ok(())
}

fn eval_all(red: &Reduction, exprs: &[Expr], z: &[f64]) -> Result<Vec<f64>, SolverError> {
    exprs
        .iter()
        .map(|e| red.eval(e, z).map_err(SolverError::BadObjective))
        .collect()
}

/// ℓ1 merit `f(z) + ρ·Σ|cᵢ(z)|`; `None` when any piece is non-finite, which
/// makes the line search reject the trial point.
fn merit_at(red: &Reduction, z: &[f64], rho: f64) -> Option<f64> {
    let f = red.eval(&red.objective, z).ok()?;
    let mut penalty = 0.0;
    for c in &red.constraints {
        penalty += red.eval(c, z).ok()?.abs();
    }
    Some(f + rho * penalty)
}

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

/// Route by problem class: linear-quadratic → QP path, otherwise SQP from
/// the reference initial guess.
pub fn solve_nlp(
    nlp: &DiscreteNlp,
    class: &ProblemClass,
) -> Result<Solution, SolverError> {
    match class {
        ProblemClass::LinearQuadratic { .. } => solve_qp(nlp),
        ProblemClass::Nonlinear => {
            solve_sqp(nlp, &initial_guess(nlp), &SqpOptions::default())
        }
    }
}

/// Route without a classification in hand (e.g. a re-parsed model): try the
/// QP path, fall back to SQP when the program is not linear-quadratic.
pub fn solve_auto(nlp: &DiscreteNlp) -> Result<Solution, SolverError> {
    match solve_qp(nlp) {
        Ok(sol) => Ok(sol),
        Err(SolverError::NotLinearQuadratic(_)) => {
            solve_sqp(nlp, &initial_guess(nlp), &SqpOptions::default())
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::testutil::{
        double_integrator, mayer_free_end, nonlinear_smooth, nonlinear_unreachable,
        single_state_reach,
    };
    use crate::transcribe::{transcribe, Grid, Scheme, VarLayout};

    #[test]
    fn kkt_scalar_example() {
        let qp = QpData {
            h: Matrix::from_rows(&[vec![1.0]]),
            g: vec![0.0],
            a: Matrix::from_rows(&[vec![1.0]]),
            b: vec![1.0],
            free: vec!["z".into()],
        };
        let sol = solve_kkt(&qp).unwrap();
        assert!((sol.z[0] - 1.0).abs() < 1e-12);
        assert!((sol.multipliers[0] + 1.0).abs() < 1e-12);
        assert_eq!(sol.regularization, 0.0);
    }

    #[test]
    fn kkt_symmetric_pair() {
        let qp = QpData {
            h: Matrix::identity(2),
            g: vec![0.0, 0.0],
            a: Matrix::from_rows(&[vec![1.0, 1.0]]),
            b: vec![2.0],
            free: vec!["z1".into(), "z2".into()],
        };
        let sol = solve_kkt(&qp).unwrap();
        assert!((sol.z[0] - 1.0).abs() < 1e-12);
        assert!((sol.z[1] - 1.0).abs() < 1e-12);
        assert!((sol.multipliers[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_contradictory_rows_are_singular() {
        let qp = QpData {
            h: Matrix::from_rows(&[vec![1.0]]),
            g: vec![0.0],
            a: Matrix::from_rows(&[vec![1.0], vec![1.0]]),
            b: vec![1.0, 2.0],
            free: vec!["z".into()],
        };
        assert!(matches!(solve_kkt(&qp), Err(SolverError::SingularKkt)));
    }

    /// Hand-assembled oracle for the double integrator at N = 2 under
    /// forward Euler (dt = 1). After eliminating the four pinned states the
    /// free variables are [x1_1, x2_1, u1_0, u1_1] and the system is:
    ///
    ///   defects: x1_1 = 2;  x2_1 − u1_0 = 1;  −x1_1 − x2_1 = 0;  −x2_1 − u1_1 = 0
    ///   H = diag(0, 0, 1, 1),  g = 0
    ///
    /// whose unique feasible point is x1_1 = 2, x2_1 = −2, u = (−3, 2) with
    /// objective 0.5·(9 + 4) = 6.5.
    #[test]
    fn assemble_qp_matches_hand_assembly() {
        let p = double_integrator();
        let g = Grid::new(0.0, 2.0, 2).unwrap();
        let nlp = transcribe(&p, Scheme::ForwardEuler, &g).unwrap();
        let qp = assemble_qp(&nlp).unwrap();

        assert_eq!(qp.free, vec!["x1_1", "x2_1", "u1_0", "u1_1"]);
        let expected_h = Matrix::from_rows(&[
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
        assert_eq!(qp.h, expected_h);
        assert_eq!(qp.g, vec![0.0; 4]);
        let expected_a = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, -1.0, 0.0],
            vec![-1.0, -1.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0, -1.0],
        ]);
        assert_eq!(qp.a, expected_a);
        assert_eq!(qp.b, vec![2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn qp_solves_double_integrator_n2() {
        let p = double_integrator();
        let g = Grid::new(0.0, 2.0, 2).unwrap();
        let nlp = transcribe(&p, Scheme::ForwardEuler, &g).unwrap();
        let sol = solve_qp(&nlp).unwrap();
        assert!(sol.diagnostics.converged);
        assert_eq!(sol.diagnostics.problem_class, "LinearQuadratic");
        let u: Vec<f64> = sol.controls.iter().map(|r| r[0]).collect();
        assert!((u[0] + 3.0).abs() < 1e-10 && (u[1] - 2.0).abs() < 1e-10);
        assert!((sol.objective - 6.5).abs() < 1e-10);
        // Pins are honored exactly, not approximately.
        assert_eq!(sol.states[0], vec![1.0, 1.0]);
        assert_eq!(sol.states[2], vec![0.0, 0.0]);
    }

    #[test]
    fn empty_qp_reports_objective_directly() {
        let layout = VarLayout::new(1, 0, 2, Scheme::ForwardEuler);
        let nlp = DiscreteNlp {
            variables: layout.names(),
            objective: parse_expr("0.5*x1_2^2").unwrap(),
            constraints: vec![],
            pins: vec![
                ("x1_0".into(), 0.0),
                ("x1_1".into(), 0.5),
                ("x1_2".into(), 1.0),
            ],
            scheme: Scheme::ForwardEuler,
            grid: Grid::new(0.0, 1.0, 2).unwrap(),
            layout,
        };
        let sol = solve_qp(&nlp).unwrap();
        assert_eq!(sol.objective, 0.5);
        assert_eq!(sol.diagnostics.iterations, 0);
        assert!(sol.diagnostics.converged);
    }

    #[test]
    fn fully_pinned_contradiction_is_infeasible() {
        let layout = VarLayout::new(1, 0, 2, Scheme::ForwardEuler);
        let nlp = DiscreteNlp {
            variables: layout.names(),
            objective: parse_expr("x1_1^2").unwrap(),
            constraints: vec![parse_expr("x1_2 - x1_0 - 1").unwrap()],
            pins: vec![("x1_0".into(), 0.0), ("x1_2".into(), 0.0)],
            scheme: Scheme::ForwardEuler,
            grid: Grid::new(0.0, 1.0, 2).unwrap(),
            layout,
        };
        assert!(matches!(solve_qp(&nlp), Err(SolverError::Infeasible(_))));
    }

    #[test]
    fn drift_against_pins_is_singular() {
        // ẋ = 1 with both ends pinned to 0 is contradictory; the defect
        // rows become rank-deficient and the KKT solve reports it.
        use crate::ocp::{OcProblem, ProblemInputs};
        let p = OcProblem::build(ProblemInputs {
            states: vec!["x1".into()],
            controls: vec!["u".into()],
            dynamics: vec![parse_expr("1 + 0*u").unwrap()],
            lagrange: parse_expr("0.5*u^2").unwrap(),
            t0: 0.0,
            tf: 1.0,
            x_initial: vec![Some(0.0)],
            x_final: vec![Some(0.0)],
            ..Default::default()
        })
        .unwrap();
        let g = Grid::new(0.0, 1.0, 2).unwrap();
        let nlp = transcribe(&p, Scheme::ForwardEuler, &g).unwrap();
        assert!(matches!(solve_qp(&nlp), Err(SolverError::SingularKkt)));
    }

    #[test]
    fn initial_guess_interpolates_pinned_states() {
        let p = double_integrator();
        let g = Grid::new(0.0, 2.0, 2).unwrap();
        let nlp = transcribe(&p, Scheme::ForwardEuler, &g).unwrap();
        let z = initial_guess(&nlp);
        // x1: 1 → 0, x2: 1 → 0, controls 0.
        assert_eq!(z, vec![1.0, 0.5, 0.0, 1.0, 0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn initial_guess_extends_free_ends_as_constants() {
        let p = mayer_free_end();
        let g = Grid::new(0.0, 1.0, 4).unwrap();
        let nlp = transcribe(&p, Scheme::Trapezoidal, &g).unwrap();
        let z = initial_guess(&nlp);
        assert_eq!(&z[..5], &[1.0; 5]);
        assert_eq!(&z[5..], &[0.0; 5]);
    }

    #[test]
    fn constant_velocity_is_optimal_for_reach_problem() {
        // Calculus-of-variations oracle: ẍ = 0, so u ≡ 1 and x is linear.
        let p = single_state_reach();
        let g = Grid::new(0.0, 1.0, 50).unwrap();
        for scheme in [Scheme::ForwardEuler, Scheme::BackwardEuler, Scheme::Trapezoidal] {
            let nlp = transcribe(&p, scheme, &g).unwrap();
            let sol = solve_qp(&nlp).unwrap();
            assert!(sol.diagnostics.converged);
            for row in &sol.controls {
                assert!((row[0] - 1.0).abs() < 1e-9, "{scheme:?}: u = {}", row[0]);
            }
            for (i, row) in sol.states.iter().enumerate() {
                let t = g.node(i);
                assert!((row[0] - t).abs() < 1e-9, "{scheme:?}: x({t}) = {}", row[0]);
            }
            assert!((sol.objective - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mayer_tradeoff_matches_analytic_value() {
        // Euler–Lagrange for min ∫½u² + x(1)² with ẋ = u, x(0) = 1 gives a
        // constant u = −2/3 and objective exactly 1/3; constant controls are
        // represented exactly by the discretization, so the discrete
        // optimum coincides with the continuous one.
        let p = mayer_free_end();
        let g = Grid::new(0.0, 1.0, 40).unwrap();
        let nlp = transcribe(&p, Scheme::Trapezoidal, &g).unwrap();
        let sol = solve_qp(&nlp).unwrap();
        assert!(sol.diagnostics.converged);
        assert!((sol.objective - 1.0 / 3.0).abs() < 1e-10);
        assert!((sol.states[40][0] - 1.0 / 3.0).abs() < 1e-9);
        for row in &sol.controls {
            assert!((row[0] + 2.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sqp_solves_lq_in_one_iteration() {
        let p = double_integrator();
        let g = Grid::new(0.0, 2.0, 20).unwrap();
        let nlp = transcribe(&p, Scheme::Trapezoidal, &g).unwrap();
        let qp_sol = solve_qp(&nlp).unwrap();
        let sqp_sol = solve_sqp(&nlp, &initial_guess(&nlp), &SqpOptions::default()).unwrap();
        assert!(sqp_sol.diagnostics.converged);
        assert_eq!(sqp_sol.diagnostics.iterations, 1);
        for (a, b) in qp_sol.states.iter().flatten().zip(sqp_sol.states.iter().flatten()) {
            assert!((a - b).abs() < 1e-8);
        }
        for (a, b) in qp_sol
            .controls
            .iter()
            .flatten()
            .zip(sqp_sol.controls.iter().flatten())
        {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn sqp_converges_on_smooth_nonlinear_problem() {
        let p = nonlinear_smooth();
        let g = Grid::new(0.0, 2.0, 40).unwrap();
        let nlp = transcribe(&p, Scheme::Trapezoidal, &g).unwrap();
        let mut trace = Vec::new();
        let sol =
            solve_sqp_traced(&nlp, &initial_guess(&nlp), &SqpOptions::default(), &mut trace)
                .unwrap();
        assert!(sol.diagnostics.converged, "{:?}", sol.diagnostics);
        assert!(sol.diagnostics.iterations <= 50);
        assert!(sol.diagnostics.kkt_residual_inf <= 1e-8);
        // Boundary pins are exact.
        assert_eq!(sol.states[0], vec![1.0, 1.0]);
        assert_eq!(sol.states[40], vec![0.0, 0.0]);
        // Every accepted step strictly decreased that iteration's merit.
        assert!(!trace.is_empty());
        for (before, after) in trace {
            assert!(after < before, "merit did not decrease: {before} → {after}");
        }
    }

    #[test]
    fn sqp_reports_nonconvergence_on_unreachable_pins() {
        let p = nonlinear_unreachable();
        let g = Grid::new(0.0, 2.0, 20).unwrap();
        let nlp = transcribe(&p, Scheme::Trapezoidal, &g).unwrap();
        let sol = solve_sqp(&nlp, &initial_guess(&nlp), &SqpOptions::default()).unwrap();
        assert!(!sol.diagnostics.converged);
        assert!(sol.diagnostics.kkt_residual_inf.is_finite());
        assert!(sol.objective.is_finite());
    }

    #[test]
    fn sqp_rejects_wrong_dimension() {
        let p = single_state_reach();
        let g = Grid::new(0.0, 1.0, 4).unwrap();
        let nlp = transcribe(&p, Scheme::Trapezoidal, &g).unwrap();
        let err = solve_sqp(&nlp, &[0.0; 3], &SqpOptions::default()).unwrap_err();
        assert!(matches!(err, SolverError::DimensionMismatch { .. }));
    }

    #[test]
    fn auto_route_falls_back_to_sqp() {
        let p = nonlinear_smooth();
        let g = Grid::new(0.0, 2.0, 10).unwrap();
        let nlp = transcribe(&p, Scheme::Trapezoidal, &g).unwrap();
        let sol = solve_auto(&nlp).unwrap();
        assert_eq!(sol.diagnostics.problem_class, "Nonlinear");
    }
}

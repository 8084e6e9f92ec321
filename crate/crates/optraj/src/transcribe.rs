//! Direct transcription: continuous problem → finite-dimensional NLP.
//!
//! States and controls are sampled on a uniform grid and the dynamics become
//! algebraic *defect* constraints tying consecutive nodes together. Three
//! one-step schemes are provided:
//!
//! | scheme           | defect for interval `i`                                  | controls at |
//! |------------------|----------------------------------------------------------|-------------|
//! | `forward_euler`  | `x[i+1] - x[i] - dt·f(x[i], u[i], t[i])`                 | `0..N-1`    |
//! | `backward_euler` | `x[i+1] - x[i] - dt·f(x[i+1], u[i+1], t[i+1])`           | `1..N`      |
//! | `trapezoidal`    | `x[i+1] - x[i] - dt/2·(f(x[i],u[i],t[i]) + f(x[i+1],u[i+1],t[i+1]))` | `0..N` |
//!
//! The objective is the Mayer term at the final node plus a dt-weighted
//! quadrature of the Lagrange term (trapezoidal weights ½,1,…,1,½ under the
//! trapezoidal scheme). Control variables exist only at the node indices a
//! scheme actually references, which keeps the control block of the QP
//! Hessian nonsingular.
//!
//! Boundary conditions become *pins* — variables fixed to constants — kept
//! separate from the defect list so the solver can eliminate them before
//! assembling the KKT system.

use crate::expr::Expr;
use crate::ocp::OcProblem;
use std::collections::HashMap;

/// Discretization scheme selector. The default is `Trapezoidal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    ForwardEuler,
    BackwardEuler,
    #[default]
    Trapezoidal,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ForwardEuler => "forward_euler",
            Scheme::BackwardEuler => "backward_euler",
            Scheme::Trapezoidal => "trapezoidal",
        }
    }

    pub fn parse(text: &str) -> Option<Scheme> {
        match text {
            "forward_euler" => Some(Scheme::ForwardEuler),
            "backward_euler" => Some(Scheme::BackwardEuler),
            "trapezoidal" => Some(Scheme::Trapezoidal),
            _ => None,
        }
    }

    /// Inclusive node-index range at which controls are allocated.
    pub fn control_range(self, intervals: usize) -> (usize, usize) {
        match self {
            Scheme::ForwardEuler => (0, intervals - 1),
            Scheme::BackwardEuler => (1, intervals),
            Scheme::Trapezoidal => (0, intervals),
        }
    }
}

/// Uniform time grid with `N` intervals (`N+1` nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t0: f64,
    tf: f64,
    intervals: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TranscribeError {
    #[error("grid needs at least 2 intervals, got {0}")]
    TooFewIntervals(usize),
    #[error("grid horizon is empty: tf ({tf}) must exceed t0 ({t0})")]
    EmptyHorizon { t0: f64, tf: f64 },
    #[error("grid horizon [{grid_t0}, {grid_tf}] does not match problem horizon [{t0}, {tf}]")]
    HorizonMismatch {
        grid_t0: f64,
        grid_tf: f64,
        t0: f64,
        tf: f64,
    },
}

impl Grid {
    /// Build a uniform grid over `[t0, tf]` with `intervals ≥ 2` steps.
    pub fn new(t0: f64, tf: f64, intervals: usize) -> Result<Grid, TranscribeError> {
        if !(tf > t0) {
            return Err(TranscribeError::EmptyHorizon { t0, tf });
        }
        if intervals < 2 {
            return Err(TranscribeError::TooFewIntervals(intervals));
        }
        Ok(Grid { t0, tf, intervals })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn dt(&self) -> f64 {
        (self.tf - self.t0) / self.intervals as f64
    }

    /// Node time `t_i = t0 + i·dt`.
    pub fn node(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(|i| self.node(i))
    }
}

/// Shape of the decision vector: all state samples (state-major), then all
/// control samples over the scheme's index range.
#[derive(Debug, Clone, PartialEq)]
pub struct VarLayout {
    pub n_states: usize,
    pub n_controls: usize,
    pub intervals: usize,
    /// Inclusive node range carrying control variables.
    pub control_range: (usize, usize),
}

impl VarLayout {
    pub fn new(n_states: usize, n_controls: usize, intervals: usize, scheme: Scheme) -> VarLayout {
        VarLayout {
            n_states,
            n_controls,
            intervals,
            control_range: scheme.control_range(intervals),
        }
    }

    /// Decision-variable name for state `j` (0-based) at node `i`.
    pub fn state_var(&self, j: usize, i: usize) -> String {
        format!("x{}_{}", j + 1, i)
    }

    /// Decision-variable name for control `k` (0-based) at node `i`.
    pub fn control_var(&self, k: usize, i: usize) -> String {
        format!("u{}_{}", k + 1, i)
    }

    pub fn var_count(&self) -> usize {
        let (lo, hi) = self.control_range;
        self.n_states * (self.intervals + 1) + self.n_controls * (hi - lo + 1)
    }

    /// All decision-variable names in declaration order.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.var_count());
        for j in 0..self.n_states {
            for i in 0..=self.intervals {
                out.push(self.state_var(j, i));
            }
        }
        let (lo, hi) = self.control_range;
        for k in 0..self.n_controls {
            for i in lo..=hi {
                out.push(self.control_var(k, i));
            }
        }
        out
    }
}

/// The transcribed nonlinear program: `min objective` subject to every
/// constraint expression equal to zero and every pinned variable fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteNlp {
    pub variables: Vec<String>,
    pub objective: Expr,
    pub constraints: Vec<Expr>,
    /// Boundary fixings in declaration order (initial pins, then final).
    pub pins: Vec<(String, f64)>,
    pub scheme: Scheme,
    pub grid: Grid,
    pub layout: VarLayout,
}

impl DiscreteNlp {
    pub fn pin_value(&self, name: &str) -> Option<f64> {
        self.pins
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Transcribe `problem` on `grid` with the given scheme.
pub fn transcribe(
    problem: &OcProblem,
    scheme: Scheme,
    grid: &Grid,
) -> Result<DiscreteNlp, TranscribeError> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
    if !close(grid.t0(), problem.t0()) || !close(grid.tf(), problem.tf()) {
        return Err(TranscribeError::HorizonMismatch {
            grid_t0: grid.t0(),
            grid_tf: grid.tf(),
            t0: problem.t0(),
            tf: problem.tf(),
        });
    }

    let n_x = problem.states().len();
    let n = grid.intervals();
    let dt = grid.dt();
    let layout = VarLayout::new(n_x, problem.controls().len(), n, scheme);

    // Substitution map sending each state/control name to its sample at
    // node i, and t to the node time.
    let node_map = |i: usize| -> HashMap<String, Expr> {
        let mut map = HashMap::new();
        for (j, s) in problem.states().iter().enumerate() {
            map.insert(s.clone(), Expr::variable(layout.state_var(j, i)));
        }
        for (k, c) in problem.controls().iter().enumerate() {
            map.insert(c.clone(), Expr::variable(layout.control_var(k, i)));
        }
        map.insert("t".to_string(), Expr::Constant(grid.node(i)));
        map
    };

    let mut constraints = Vec::with_capacity(n_x * n);
    for i in 0..n {
        let here = node_map(i);
        let next = node_map(i + 1);
        for (j, f) in problem.dynamics().iter().enumerate() {
            let x_next = Expr::variable(layout.state_var(j, i + 1));
            let x_here = Expr::variable(layout.state_var(j, i));
            let step = match scheme {
                Scheme::ForwardEuler => {
                    Expr::mul(Expr::constant(dt), f.substitute(&here))
                }
                Scheme::BackwardEuler => {
                    Expr::mul(Expr::constant(dt), f.substitute(&next))
                }
                Scheme::Trapezoidal => Expr::mul(
                    Expr::constant(dt / 2.0),
                    Expr::add(f.substitute(&here), f.substitute(&next)),
                ),
            };
            constraints.push(Expr::sub(Expr::sub(x_next, x_here), step));
        }
    }

    let lagrange_terms = |indices: &mut dyn Iterator<Item = (usize, f64)>| -> Vec<Expr> {
        indices
            .map(|(i, weight)| {
                Expr::mul(
                    Expr::constant(weight * dt),
                    problem.lagrange().substitute(&node_map(i)),
                )
            })
            .collect()
    };
    let quadrature = match scheme {
        Scheme::ForwardEuler => lagrange_terms(&mut (0..n).map(|i| (i, 1.0))),
        Scheme::BackwardEuler => lagrange_terms(&mut (1..=n).map(|i| (i, 1.0))),
        Scheme::Trapezoidal => lagrange_terms(&mut (0..=n).map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            (i, w)
        })),
    };
    let mut objective = Expr::sum(quadrature);
    if let Some(mayer) = problem.mayer() {
        objective = Expr::add(mayer.substitute(&node_map(n)), objective);
    }

    let mut pins = Vec::new();
    for (j, v) in problem.x_initial().iter().enumerate() {
        if let Some(v) = v {
            pins.push((layout.state_var(j, 0), *v));
        }
    }
    for (j, v) in problem.x_final().iter().enumerate() {
        if let Some(v) = v {
            pins.push((layout.state_var(j, n), *v));
        }
    }

    Ok(DiscreteNlp {
        variables: layout.names(),
        objective,
        constraints,
        pins,
        scheme,
        grid: *grid,
        layout,
    })
}

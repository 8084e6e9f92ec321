//! Command-line entry points: `solve`, `export`, `check`.
//!
//! Each takes a problem-file path and writes its outputs next to the input,
//! keyed by the file stem: `solve` produces `<stem>.traj.csv` and
//! `<stem>.sol.json`, `export` produces `<stem>.nlp.txt`.
//!
//! Exit codes: 0 on success (for `solve`, a converged solution), 2 when the
//! solver finished without converging, 1 for any input or setup error.
//! Trajectory and model-text bytes are deterministic across runs; only the
//! `wall_time_ms` field of the JSON diagnostics varies.

use crate::model_text::export_model_text;
use crate::ocp::ProblemClass;
use crate::problem_file::{parse_problem_file, ProblemFile};
use crate::solver::{solve_nlp, Solution, SolverError};
use crate::transcribe::{transcribe, DiscreteNlp, Grid, Scheme};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Exit status used by the binary.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Command-line overrides for `solve`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOverrides {
    pub intervals: Option<usize>,
    pub scheme: Option<Scheme>,
}

fn fail(message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    EXIT_INPUT_ERROR
}

fn load(path: &Path) -> Result<ProblemFile, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    parse_problem_file(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn build_nlp(
    file: &ProblemFile,
    overrides: SolveOverrides,
) -> Result<(DiscreteNlp, ProblemClass), String> {
    let intervals = overrides.intervals.unwrap_or(file.intervals);
    let scheme = overrides.scheme.unwrap_or(file.scheme);
    let grid = Grid::new(file.problem.t0(), file.problem.tf(), intervals)
        .map_err(|e| e.to_string())?;
    let nlp = transcribe(&file.problem, scheme, &grid).map_err(|e| e.to_string())?;
    Ok((nlp, file.problem.classify()))
}

fn output_path(input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    input.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Serialize)]
struct SolveReport<'a> {
    objective: f64,
    iterations: usize,
    kkt_residual_inf: f64,
    converged: bool,
    scheme: &'a str,
    problem_class: &'a str,
    wall_time_ms: f64,
}

/// Render the trajectory CSV: header `t,x1,..,u1,..`, one row per grid
/// node, control cells empty at nodes outside the scheme's index range.
pub fn trajectory_csv(sol: &Solution, n_states: usize, n_controls: usize) -> String {
    let mut out = String::from("t");
    for j in 1..=n_states {
        out.push_str(&format!(",x{j}"));
    }
    for k in 1..=n_controls {
        out.push_str(&format!(",u{k}"));
    }
    out.push('\n');
    for (i, t) in sol.grid.nodes().enumerate() {
        out.push_str(&format!("{t:.16e}"));
        for v in &sol.states[i] {
            out.push_str(&format!(",{v:.16e}"));
        }
        let row = i
            .checked_sub(sol.control_offset)
            .and_then(|r| sol.controls.get(r));
        for k in 0..n_controls {
            match row {
                Some(row) => out.push_str(&format!(",{:.16e}", row[k])),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Solve a problem file, writing `<stem>.traj.csv` and `<stem>.sol.json`.
pub fn run_solve(path: &Path, overrides: SolveOverrides) -> i32 {
    let file = match load(path) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let (nlp, class) = match build_nlp(&file, overrides) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };

    let started = Instant::now();
    let sol = match solve_nlp(&nlp, &class) {
        Ok(sol) => sol,
        Err(e @ SolverError::SingularKkt) => return fail(e),
        Err(e) => return fail(e),
    };
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;

    let csv = trajectory_csv(&sol, nlp.layout.n_states, nlp.layout.n_controls);
    let report = SolveReport {
        objective: sol.objective,
        iterations: sol.diagnostics.iterations,
        kkt_residual_inf: sol.diagnostics.kkt_residual_inf,
        converged: sol.diagnostics.converged,
        scheme: sol.diagnostics.scheme.name(),
        problem_class: sol.diagnostics.problem_class,
        wall_time_ms,
    };
    let json = match serde_json::to_string_pretty(&report) {
        Ok(j) => j + "\n",
        Err(e) => return fail(e),
    };
    if let Err(e) = std::fs::write(output_path(path, "traj.csv"), csv) {
        return fail(e);
    }
    if let Err(e) = std::fs::write(output_path(path, "sol.json"), json) {
        return fail(e);
    }
    if sol.diagnostics.converged {
        EXIT_OK
    } else {
        eprintln!(
            "warning: solver did not converge (kkt residual {:.3e} after {} iterations)",
            sol.diagnostics.kkt_residual_inf, sol.diagnostics.iterations
        );
        EXIT_NOT_CONVERGED
    }
}

/// Export the transcribed program as `<stem>.nlp.txt`.
pub fn run_export(path: &Path) -> i32 {
    let file = match load(path) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let (nlp, _) = match build_nlp(&file, SolveOverrides::default()) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    match std::fs::write(output_path(path, "nlp.txt"), export_model_text(&nlp)) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(e),
    }
}

/// Validate a problem file, printing its classification and problem sizes.
pub fn run_check(path: &Path) -> i32 {
    let file = match load(path) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let (nlp, class) = match build_nlp(&file, SolveOverrides::default()) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    println!("{}", class.name());
    println!(
        "{} vars / {} rows ({} defects + {} pins), scheme {}, N={}",
        nlp.variables.len(),
        nlp.constraints.len() + nlp.pins.len(),
        nlp.constraints.len(),
        nlp.pins.len(),
        nlp.scheme.name(),
        nlp.grid.intervals(),
    );
    EXIT_OK
}

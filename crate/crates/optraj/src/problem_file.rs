//! The declarative problem-file format consumed by the command line.
//!
//! A file is a sequence of bracketed sections with `key = value` lines
//! (`#` starts a comment). The dynamics can be given directly:
//!
//! ```text
//! [variables]
//! states = [x1, x2]
//! controls = [u]
//!
//! [dynamics]            # one line per state, same order as states
//! x1 = "x2"
//! x2 = "u"
//!
//! [cost]
//! lagrange = "0.5*u^2"
//! # mayer = "<expr>"    # optional
//!
//! [boundary]
//! x_initial = [1.0, 1.0]    # entry may be "free"
//! x_final   = [0.0, 0.0]
//!
//! [horizon]
//! t0 = 0.0
//! tf = 2.0
//! N = 100
//! scheme = "trapezoidal"    # forward_euler | backward_euler | trapezoidal
//! ```
//!
//! or come from a circuit, in which case `[circuit]` replaces
//! `[variables]` + `[dynamics]`:
//!
//! ```text
//! [circuit]
//! component resistor  Resistor  R=1.0
//! component capacitor Capacitor C=1.0
//! component source    ConstantVoltage V=1.0
//! component ground    Ground
//! connect source.p resistor.p
//! connect resistor.n capacitor.p
//! connect capacitor.n source.n ground.g
//! controls = [source.V]
//! ```
//!
//! The circuit is reduced to state-space form and its variables renamed to
//! the positional names `x1..` (reduced states, in order of appearance of
//! their derivatives) and `u1..` (declared controls, in order), which are
//! the names `[cost]` and `[boundary]` refer to.

use crate::circuit::{Component, ComponentKind, ComponentSystem, PinRef};
use crate::expr::{parse_expr, Expr};
use crate::ocp::{OcProblem, ProblemInputs};
use crate::transcribe::Scheme;
use std::collections::HashMap;

/// A parsed and validated problem file.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: OcProblem,
    pub intervals: usize,
    pub scheme: Scheme,
}

/// Parse failure with the 1-based source line when one is known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FileError {
    #[error("line {line}: {message}")]
    At { line: usize, message: String },
    #[error("{message}")]
    General { message: String },
}

fn at(line: usize, message: impl Into<String>) -> FileError {
    FileError::At {
        line,
        message: message.into(),
    }
}

fn general(message: impl Into<String>) -> FileError {
    FileError::General {
        message: message.into(),
    }
}

type Lines = Vec<(usize, String)>;

#[derive(Default)]
struct Sections {
    variables: Lines,
    dynamics: Lines,
    cost: Lines,
    boundary: Lines,
    horizon: Lines,
    circuit: Lines,
    seen: Vec<String>,
}

/// Parse a problem file into a validated [`ProblemFile`].
pub fn parse_problem_file(text: &str) -> Result<ProblemFile, FileError> {
    let sections = split_sections(text)?;

    let has_dynamics = sections.seen.iter().any(|s| s == "dynamics");
    let has_circuit = sections.seen.iter().any(|s| s == "circuit");
    if has_dynamics && has_circuit {
        return Err(general("[dynamics] and [circuit] are mutually exclusive"));
    }
    if !has_dynamics && !has_circuit {
        return Err(general("missing section: need [dynamics] or [circuit]"));
    }
    for required in ["cost", "boundary", "horizon"] {
        if !sections.seen.iter().any(|s| s == required) {
            return Err(general(format!("missing section [{required}]")));
        }
    }
    if has_dynamics && !sections.seen.iter().any(|s| s == "variables") {
        return Err(general("missing section [variables]"));
    }
    if has_circuit && sections.seen.iter().any(|s| s == "variables") {
        return Err(general("[variables] is not allowed with [circuit]"));
    }

    let (states, controls, dynamics) = if has_dynamics {
        parse_symbolic_plant(&sections)?
    } else {
        parse_circuit_plant(&sections.circuit)?
    };

    let cost = KeyValues::parse(&sections.cost, &["lagrange", "mayer"])?;
    let (line, value) = cost.require("cost", "lagrange")?;
    let lagrange = parse_expr_value(line, value)?;
    let mayer = match cost.get("mayer") {
        Some((line, value)) => Some(parse_expr_value(line, value)?),
        None => None,
    };

    let boundary = KeyValues::parse(&sections.boundary, &["x_initial", "x_final"])?;
    let (line, value) = boundary.require("boundary", "x_initial")?;
    let x_initial = parse_boundary_list(line, value)?;
    let (line, value) = boundary.require("boundary", "x_final")?;
    let x_final = parse_boundary_list(line, value)?;

    let horizon = KeyValues::parse(&sections.horizon, &["t0", "tf", "N", "scheme"])?;
    let (line, value) = horizon.require("horizon", "t0")?;
    let t0 = parse_float(line, value)?;
    let (line, value) = horizon.require("horizon", "tf")?;
    let tf = parse_float(line, value)?;
    let (line, value) = horizon.require("horizon", "N")?;
    let intervals: usize = value
        .trim()
        .parse()
        .map_err(|_| at(line, "N must be a positive integer"))?;
    let scheme = match horizon.get("scheme") {
        Some((line, value)) => {
            let name = unquote(value);
            Scheme::parse(&name)
                .ok_or_else(|| at(line, format!("unknown scheme \"{name}\"")))?
        }
        None => Scheme::default(),
    };

    let problem = OcProblem::build(ProblemInputs {
        states,
        controls,
        dynamics,
        lagrange,
        mayer,
        parameters: Default::default(),
        t0,
        tf,
        x_initial,
        x_final,
    })
    .map_err(|e| general(e.to_string()))?;

    Ok(ProblemFile {
        problem,
        intervals,
        scheme,
    })
}

fn split_sections(text: &str) -> Result<Sections, FileError> {
    let mut sections = Sections::default();
    let mut current: Option<usize> = None; // index into the table below

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim().to_string();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            if sections.seen.iter().any(|s| s == name) {
                return Err(at(line_no, format!("duplicate section [{name}]")));
            }
            let slot = match name {
                "variables" => 0,
                "dynamics" => 1,
                "cost" => 2,
                "boundary" => 3,
                "horizon" => 4,
                "circuit" => 5,
                _ => return Err(at(line_no, format!("unknown section [{name}]"))),
            };
            sections.seen.push(name.to_string());
            current = Some(slot);
            continue;
        }
        let Some(slot) = current else {
            return Err(at(line_no, "content before the first section header"));
        };
        let target = match slot {
            0 => &mut sections.variables,
            1 => &mut sections.dynamics,
            2 => &mut sections.cost,
            3 => &mut sections.boundary,
            4 => &mut sections.horizon,
            _ => &mut sections.circuit,
        };
        target.push((line_no, line));
    }
    Ok(sections)
}

/// `[variables]` + `[dynamics]` path.
fn parse_symbolic_plant(
    sections: &Sections,
) -> Result<(Vec<String>, Vec<String>, Vec<Expr>), FileError> {
    let vars = KeyValues::parse(&sections.variables, &["states", "controls"])?;
    let (line, value) = vars.require("variables", "states")?;
    let states = parse_name_list(line, value)?;
    let (line, value) = vars.require("variables", "controls")?;
    let controls = parse_name_list(line, value)?;

    // One line per state, in the declared state order.
    if sections.dynamics.len() != states.len() {
        return Err(general(format!(
            "[dynamics] has {} lines for {} states",
            sections.dynamics.len(),
            states.len()
        )));
    }
    let mut dynamics = Vec::with_capacity(states.len());
    for ((line_no, line), expected) in sections.dynamics.iter().zip(&states) {
        let (key, value) = split_key_value(*line_no, line)?;
        if key != *expected {
            return Err(at(
                *line_no,
                format!("expected dynamics for '{expected}', found '{key}'"),
            ));
        }
        dynamics.push(parse_expr_value(*line_no, &value)?);
    }
    Ok((states, controls, dynamics))
}

/// `[circuit]` path: build, reduce, and rename to positional variables.
fn parse_circuit_plant(
    lines: &[(usize, String)],
) -> Result<(Vec<String>, Vec<String>, Vec<Expr>), FileError> {
    let mut components = Vec::new();
    let mut connects = Vec::new();
    let mut controls: Option<Vec<String>> = None;

    for (line_no, line) in lines {
        let line_no = *line_no;
        if let Some(rest) = line.strip_prefix("component ") {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let (name, kind_name, param) = match fields.as_slice() {
                [name, kind] => (*name, *kind, None),
                [name, kind, param] => (*name, *kind, Some(*param)),
                _ => {
                    return Err(at(
                        line_no,
                        "expected 'component <name> <Kind> [<P>=<value>]'",
                    ))
                }
            };
            let kind = parse_component_kind(line_no, kind_name, param)?;
            components.push(Component::new(name, kind));
        } else if let Some(rest) = line.strip_prefix("connect ") {
            let pins: Result<Vec<PinRef>, FileError> = rest
                .split_whitespace()
                .map(|p| {
                    PinRef::parse(p)
                        .ok_or_else(|| at(line_no, format!("malformed pin '{p}'")))
                })
                .collect();
            connects.push(pins?);
        } else if let Some(rest) = line.strip_prefix("controls") {
            let value = rest
                .trim_start()
                .strip_prefix('=')
                .ok_or_else(|| at(line_no, "expected 'controls = [..]'"))?
                .trim();
            controls = Some(parse_name_list(line_no, value)?);
        } else {
            return Err(at(line_no, format!("unknown circuit statement '{line}'")));
        }
    }
    let controls =
        controls.ok_or_else(|| general("missing 'controls = [..]' in [circuit]"))?;

    let system = ComponentSystem::new(components, connects)
        .map_err(|e| general(format!("circuit: {e}")))?;
    let reduced = system
        .reduce_to_state_space(&controls)
        .map_err(|e| general(format!("circuit reduction: {e}")))?;

    // Rename to positional x<j>/u<k> variables, the names [cost] and
    // [boundary] are written in.
    let state_names: Vec<String> = (1..=reduced.states.len())
        .map(|j| format!("x{j}"))
        .collect();
    let control_names: Vec<String> =
        (1..=controls.len()).map(|k| format!("u{k}")).collect();
    let mut rename: HashMap<String, Expr> = HashMap::new();
    for (old, new) in reduced.states.iter().zip(&state_names) {
        rename.insert(old.clone(), Expr::variable(new.clone()));
    }
    for (old, new) in controls.iter().zip(&control_names) {
        rename.insert(old.clone(), Expr::variable(new.clone()));
    }
    let dynamics: Vec<Expr> = reduced
        .dynamics
        .iter()
        .map(|e| e.substitute(&rename))
        .collect();
    Ok((state_names, control_names, dynamics))
}

fn parse_component_kind(
    line_no: usize,
    kind: &str,
    param: Option<&str>,
) -> Result<ComponentKind, FileError> {
    let parse_param = |expected: &str| -> Result<f64, FileError> {
        let text = param.ok_or_else(|| {
            at(line_no, format!("{kind} needs a parameter {expected}=<value>"))
        })?;
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| at(line_no, format!("malformed parameter '{text}'")))?;
        if key != expected {
            return Err(at(
                line_no,
                format!("{kind} takes parameter '{expected}', found '{key}'"),
            ));
        }
        value
            .parse()
            .map_err(|_| at(line_no, format!("malformed value in '{text}'")))
    };
    match kind {
        "Resistor" => Ok(ComponentKind::Resistor {
            resistance: parse_param("R")?,
        }),
        "Capacitor" => Ok(ComponentKind::Capacitor {
            capacitance: parse_param("C")?,
        }),
        "ConstantVoltage" => Ok(ComponentKind::ConstantVoltage {
            volts: parse_param("V")?,
        }),
        "Ground" => match param {
            None => Ok(ComponentKind::Ground),
            Some(p) => Err(at(
                line_no,
                format!("Ground takes no parameter, found '{p}'"),
            )),
        },
        _ => Err(at(line_no, format!("unknown component kind '{kind}'"))),
    }
}

// ---------------------------------------------------------------------------
// Low-level line helpers
// ---------------------------------------------------------------------------

/// Drop everything from the first `#` that is not inside double quotes.
fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn split_key_value(line_no: usize, line: &str) -> Result<(String, String), FileError> {
    let (key, value) = line
        .split_once('=')
        .ok_or_else(|| at(line_no, format!("expected 'key = value', found '{line}'")))?;
    Ok((key.trim().to_string(), value.trim().to_string()))
}

/// Ordered `key = value` pairs with a known-key check.
struct KeyValues {
    entries: Vec<(String, usize, String)>,
}

impl KeyValues {
    fn parse(lines: &Lines, known: &[&str]) -> Result<KeyValues, FileError> {
        let mut entries = Vec::new();
        for (line_no, line) in lines {
            let (key, value) = split_key_value(*line_no, line)?;
            if !known.contains(&key.as_str()) {
                return Err(at(*line_no, format!("unknown key '{key}'")));
            }
            if entries.iter().any(|(k, _, _)| *k == key) {
                return Err(at(*line_no, format!("duplicate key '{key}'")));
            }
            entries.push((key, *line_no, value));
        }
        Ok(KeyValues { entries })
    }

    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, line, value)| (*line, value.as_str()))
    }

    fn require(&self, section: &str, key: &str) -> Result<(usize, &str), FileError> {
        self.get(key)
            .ok_or_else(|| general(format!("missing key '{key}' in [{section}]")))
    }
}

fn unquote(text: &str) -> String {
    let t = text.trim();
    t.strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .unwrap_or(t)
        .to_string()
}

fn parse_expr_value(line_no: usize, value: &str) -> Result<Expr, FileError> {
    let inner = value
        .trim()
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .ok_or_else(|| at(line_no, "expression must be double-quoted"))?;
    parse_expr(inner).map_err(|e| at(line_no, e.to_string()))
}

fn parse_float(line_no: usize, value: &str) -> Result<f64, FileError> {
    value
        .trim()
        .parse()
        .map_err(|_| at(line_no, format!("malformed number '{}'", value.trim())))
}

fn bracket_items(line_no: usize, value: &str) -> Result<Vec<String>, FileError> {
    let t = value.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| at(line_no, format!("expected a [..] list, found '{t}'")))?;
    let inner = inner.trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    Ok(inner.split(',').map(|s| s.trim().to_string()).collect())
}

fn parse_name_list(line_no: usize, value: &str) -> Result<Vec<String>, FileError> {
    let items = bracket_items(line_no, value)?;
    for item in &items {
        if item.is_empty() || item.contains(char::is_whitespace) {
            return Err(at(line_no, format!("malformed name '{item}'")));
        }
    }
    Ok(items)
}

fn parse_boundary_list(line_no: usize, value: &str) -> Result<Vec<Option<f64>>, FileError> {
    bracket_items(line_no, value)?
        .into_iter()
        .map(|item| match unquote(&item).as_str() {
            "free" => Ok(None),
            t => t.parse().map(Some).map_err(|_| {
                at(
                    line_no,
                    format!("boundary entry '{item}' is neither a number nor \"free\""),
                )
            }),
        })
        .collect()
}

//! Line-oriented text form of a transcribed program.
//!
//! The exporter emits a deterministic, re-parseable dump of a
//! [`DiscreteNlp`] so a transcription can be saved, inspected, edited, and
//! solved again later:
//!
//! ```text
//! nlpmodel 1
//! scheme trapezoidal
//! grid <t0> <tf> <N>
//! var <name>            one line per decision variable, declaration order
//! min <expr>
//! st <expr>             one line per constraint, meaning <expr> = 0
//! fix <name> <value>    one line per pinned variable
//! end
//! ```
//!
//! Reals are printed with 17 significant digits, which is enough to
//! reconstruct every `f64` bit-exactly, and expressions use the grammar of
//! [`crate::expr::parse_expr`]. Exporting the same program twice yields
//! byte-identical text.

use crate::expr::{parse_expr, Expr};
use crate::transcribe::{DiscreteNlp, Grid, Scheme, VarLayout};

/// Parse failure, with the 1-based line it occurred on.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("model text line {line}: {message}")]
pub struct ModelTextError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ModelTextError {
    ModelTextError {
        line,
        message: message.into(),
    }
}

/// Serialize to the model-text format. Byte-deterministic.
pub fn export_model_text(nlp: &DiscreteNlp) -> String {
    let mut out = String::new();
    out.push_str("nlpmodel 1\n");
    out.push_str(&format!("scheme {}\n", nlp.scheme.name()));
    out.push_str(&format!(
        "grid {:.16e} {:.16e} {}\n",
        nlp.grid.t0(),
        nlp.grid.tf(),
        nlp.grid.intervals()
    ));
    for v in &nlp.variables {
        out.push_str(&format!("var {v}\n"));
    }
    out.push_str(&format!("min {}\n", nlp.objective.to_exact_text()));
    for c in &nlp.constraints {
        out.push_str(&format!("st {}\n", c.to_exact_text()));
    }
    for (name, value) in &nlp.pins {
        out.push_str(&format!("fix {name} {value:.16e}\n"));
    }
    out.push_str("end\n");
    out
}

/// Parse model text back into a [`DiscreteNlp`].
///
/// Variable declarations must follow the standard transcription layout
/// (`x<j>_<i>` state samples, then `u<k>_<i>` control samples over the
/// scheme's index range) so that trajectories can be reconstructed from a
/// solved model.
pub fn parse_model_text(text: &str) -> Result<DiscreteNlp, ModelTextError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut next = |expected: &str| -> Result<(usize, String), ModelTextError> {
        lines
            .next()
            .map(|(n, l)| (n, l.to_string()))
            .ok_or_else(|| err(usize::MAX, format!("unexpected end of input, expected {expected}")))
    };

    let (n, header) = next("header")?;
    if header != "nlpmodel 1" {
        return Err(err(n, "expected header 'nlpmodel 1'"));
    }

    let (n, scheme_line) = next("scheme")?;
    let scheme = match scheme_line.strip_prefix("scheme ") {
        Some(name) => Scheme::parse(name.trim())
            .ok_or_else(|| err(n, format!("unknown scheme '{}'", name.trim())))?,
        None => return Err(err(n, "expected 'scheme <name>'")),
    };

    let (n, grid_line) = next("grid")?;
    let grid = match grid_line.strip_prefix("grid ") {
        Some(rest) => {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(n, "expected 'grid <t0> <tf> <N>'"));
            }
            let t0: f64 = fields[0]
                .parse()
                .map_err(|_| err(n, "malformed t0 in grid line"))?;
            let tf: f64 = fields[1]
                .parse()
                .map_err(|_| err(n, "malformed tf in grid line"))?;
            let intervals: usize = fields[2]
                .parse()
                .map_err(|_| err(n, "malformed interval count in grid line"))?;
            Grid::new(t0, tf, intervals).map_err(|e| err(n, e.to_string()))?
        }
        None => return Err(err(n, "expected 'grid <t0> <tf> <N>'")),
    };

    let mut variables = Vec::new();
    let mut objective: Option<Expr> = None;
    let mut constraints = Vec::new();
    let mut pins = Vec::new();
    let mut ended = false;

    #[derive(PartialEq, PartialOrd)]
    enum Stage {
        Vars,
        Min,
        St,
        Fix,
    }
    let mut stage = Stage::Vars;

    for (line_no, line) in lines {
        let (keyword, rest) = match line.split_once(' ') {
            Some((k, r)) => (k, r.trim()),
            None => (line, ""),
        };
        match keyword {
            "var" if stage == Stage::Vars => {
                if rest.is_empty() || rest.contains(' ') {
                    return Err(err(line_no, "expected 'var <name>'"));
                }
                variables.push(rest.to_string());
            }
            "min" if stage <= Stage::Min => {
                let e = parse_expr(rest)
                    .map_err(|e| err(line_no, format!("objective: {e}")))?;
                objective = Some(e);
                stage = Stage::St;
            }
            "st" if stage == Stage::St => {
                let e = parse_expr(rest)
                    .map_err(|e| err(line_no, format!("constraint: {e}")))?;
                constraints.push(e);
            }
            "fix" if stage == Stage::St || stage == Stage::Fix => {
                let (name, value) = rest
                    .split_once(' ')
                    .ok_or_else(|| err(line_no, "expected 'fix <name> <value>'"))?;
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| err(line_no, "malformed pin value"))?;
                pins.push((name.trim().to_string(), value));
                stage = Stage::Fix;
            }
            "end" => {
                ended = true;
                break;
            }
            _ => {
                return Err(err(
                    line_no,
                    format!("unexpected line '{line}' (section order is var/min/st/fix/end)"),
                ));
            }
        }
    }
    if !ended {
        return Err(err(usize::MAX, "missing 'end' line"));
    }
    let objective =
        objective.ok_or_else(|| err(usize::MAX, "missing 'min' objective line"))?;

    let layout = infer_layout(&variables, &grid, scheme)?;

    let declared: std::collections::HashSet<&str> =
        variables.iter().map(|s| s.as_str()).collect();
    for v in objective
        .free_vars()
        .into_iter()
        .chain(constraints.iter().flat_map(|c| c.free_vars()))
    {
        if !declared.contains(v.as_str()) {
            return Err(err(
                usize::MAX,
                format!("expression references undeclared variable '{v}'"),
            ));
        }
    }
    for (name, _) in &pins {
        if !declared.contains(name.as_str()) {
            return Err(err(
                usize::MAX,
                format!("pin references undeclared variable '{name}'"),
            ));
        }
    }

    Ok(DiscreteNlp {
        variables,
        objective,
        constraints,
        pins,
        scheme,
        grid,
        layout,
    })
}

/// Recover the variable layout from declared names, insisting on exactly
/// the order the exporter produces.
fn infer_layout(
    variables: &[String],
    grid: &Grid,
    scheme: Scheme,
) -> Result<VarLayout, ModelTextError> {
    let n = grid.intervals();
    let mut n_states = 0usize;
    let mut n_controls = 0usize;
    for v in variables {
        if let Some((kind, j)) = split_sample_name(v) {
            match kind {
                'x' => n_states = n_states.max(j),
                'u' => n_controls = n_controls.max(j),
                _ => {}
            }
        }
    }
    let layout = VarLayout::new(n_states.max(1), n_controls, n, scheme);
    if layout.names() != variables {
        return Err(err(
            usize::MAX,
            "variable declarations do not follow the x<j>_<i>/u<k>_<i> layout",
        ));
    }
    Ok(layout)
}

/// Split `x3_12` into `('x', 3)`; `None` for anything else.
fn split_sample_name(name: &str) -> Option<(char, usize)> {
    let mut chars = name.chars();
    let kind = chars.next()?;
    if kind != 'x' && kind != 'u' {
        return None;
    }
    let rest: &str = chars.as_str();
    let (j, i) = rest.split_once('_')?;
    let j: usize = j.parse().ok()?;
    let _: usize = i.parse().ok()?;
    Some((kind, j))
}

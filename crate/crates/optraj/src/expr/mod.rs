//! Symbolic expression trees.
//!
//! Every formula the toolkit manipulates — dynamics right-hand sides, cost
//! integrands, defect constraints, circuit equations — is an immutable
//! [`Expr`] tree over constants, named variables, the arithmetic operators
//! `+ - * / ^`, and the functions `sin`, `cos`, `exp`.
//!
//! Trees are built through folding constructors ([`Expr::add`],
//! [`Expr::mul`], ...) that apply a small, fixed set of simplifications:
//! arithmetic on constant subtrees, `x+0`, `x*1`, `x*0`, `x^1`, `x^0`, and
//! `-(-x)`. Nothing beyond that — no polynomial canonicalization — so the
//! structural shape of a tree is predictable and structural equality
//! (`PartialEq`) is meaningful in tests.
//!
//! ```
//! use optraj::expr::{parse_expr, Expr};
//!
//! let e = parse_expr("0.5*u^2").unwrap();
//! let du = e.differentiate("u");
//! assert_eq!(du, Expr::variable("u"));
//! assert_eq!(du.eval_map(&[("u", 3.0)].into()).unwrap(), 3.0);
//! ```
//!
//! The exponent of `^` is restricted to a constant: `x^u` is rejected at
//! construction. Variable names are arbitrary strings internally (the
//! circuit module uses dotted names like `source.V`); only the text
//! grammar in [`parse_expr`] restricts identifiers.

mod calculus;
mod parse;

pub use calculus::{affine_parts, Linearization};
pub use parse::{parse_expr, ParseError};

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

/// Unary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
}

/// Binary operators. `Pow` always carries a constant right child.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// An immutable expression tree.
///
/// `Expr` values are cheap to clone (children are shared via [`Arc`]) and
/// safe to send between threads. All operations on them are pure.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Constant(f64),
    Variable(String),
    Unary(UnaryOp, Arc<Expr>),
    Binary(BinaryOp, Arc<Expr>, Arc<Expr>),
}

impl Default for Expr {
    /// The zero expression.
    fn default() -> Self {
        Expr::Constant(0.0)
    }
}

/// Construction error: the only way to build an invalid tree.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("exponent of '^' must be a constant")]
    NonConstantExponent,
}

/// Evaluation failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable '{0}'")]
    Unbound(String),
    #[error("expression evaluated to a non-finite value")]
    NonFinite,
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Constant(value)
    }

    pub fn variable(name: impl Into<String>) -> Expr {
        Expr::Variable(name.into())
    }

    pub fn add(lhs: Expr, rhs: Expr) -> Expr {
        fold_binary(BinaryOp::Add, lhs, rhs)
    }

    pub fn sub(lhs: Expr, rhs: Expr) -> Expr {
        fold_binary(BinaryOp::Sub, lhs, rhs)
    }

    pub fn mul(lhs: Expr, rhs: Expr) -> Expr {
        fold_binary(BinaryOp::Mul, lhs, rhs)
    }

    pub fn div(lhs: Expr, rhs: Expr) -> Expr {
        fold_binary(BinaryOp::Div, lhs, rhs)
    }

    /// Raise `base` to `exponent`. The exponent must fold to a constant.
    pub fn pow(base: Expr, exponent: Expr) -> Result<Expr, ExprError> {
        match exponent {
            Expr::Constant(c) => Ok(Expr::powc(base, c)),
            _ => Err(ExprError::NonConstantExponent),
        }
    }

    /// Raise `base` to a constant exponent.
    pub fn powc(base: Expr, exponent: f64) -> Expr {
        fold_binary(BinaryOp::Pow, base, Expr::Constant(exponent))
    }

    pub fn neg(e: Expr) -> Expr {
        fold_unary(UnaryOp::Neg, e)
    }

    pub fn sin(e: Expr) -> Expr {
        fold_unary(UnaryOp::Sin, e)
    }

    pub fn cos(e: Expr) -> Expr {
        fold_unary(UnaryOp::Cos, e)
    }

    pub fn exp(e: Expr) -> Expr {
        fold_unary(UnaryOp::Exp, e)
    }

    /// Sum a sequence of expressions, folding as it goes. Empty input is 0.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut iter = terms.into_iter();
        let first = match iter.next() {
            Some(e) => e,
            None => Expr::Constant(0.0),
        };
        iter.fold(first, Expr::add)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Constant(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Constant(c) if *c == 0.0)
    }

    /// Evaluate with a variable lookup function.
    ///
    /// Division by zero and other domain failures surface as
    /// [`EvalError::NonFinite`] rather than silently propagating NaN.
    pub fn evaluate<F>(&self, lookup: &F) -> Result<f64, EvalError>
    where
        F: Fn(&str) -> Option<f64>,
    {
        let v = match self {
            Expr::Constant(c) => *c,
            Expr::Variable(name) => {
                lookup(name).ok_or_else(|| EvalError::Unbound(name.clone()))?
            }
            Expr::Unary(op, a) => {
                let a = a.evaluate(lookup)?;
                apply_unary(*op, a)
            }
            Expr::Binary(op, l, r) => {
                let l = l.evaluate(lookup)?;
                let r = r.evaluate(lookup)?;
                apply_binary(*op, l, r)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Evaluate against a name→value map.
    pub fn eval_map(&self, bindings: &HashMap<&str, f64>) -> Result<f64, EvalError> {
        self.evaluate(&|name| bindings.get(name).copied())
    }

    /// The set of variable names appearing in the tree, sorted.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Constant(_) => {}
            Expr::Variable(name) => {
                if !out.contains(name.as_str()) {
                    out.insert(name.clone());
                }
            }
            Expr::Unary(_, a) => a.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self {
            Expr::Constant(_) => false,
            Expr::Variable(v) => v == name,
            Expr::Unary(_, a) => a.contains_var(name),
            Expr::Binary(_, l, r) => l.contains_var(name) || r.contains_var(name),
        }
    }

    /// Simultaneous substitution: replacement expressions are spliced in
    /// as-is and never re-scanned, so `{x1→x2, x2→x1}` swaps the two.
    /// The result is re-folded bottom-up.
    pub fn substitute(&self, replacements: &HashMap<String, Expr>) -> Expr {
        match self {
            Expr::Constant(_) => self.clone(),
            Expr::Variable(name) => match replacements.get(name) {
                Some(r) => r.clone(),
                None => self.clone(),
            },
            Expr::Unary(op, a) => fold_unary(*op, a.substitute(replacements)),
            Expr::Binary(BinaryOp::Pow, base, exp) => {
                // Exponent is constant by invariant; only the base is rewritten.
                fold_binary(
                    BinaryOp::Pow,
                    base.substitute(replacements),
                    exp.as_ref().clone(),
                )
            }
            Expr::Binary(op, l, r) => fold_binary(
                *op,
                l.substitute(replacements),
                r.substitute(replacements),
            ),
        }
    }

    /// Substitute a set of variables by constant values.
    pub fn substitute_values<'a>(
        &self,
        values: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Expr {
        let map: HashMap<String, Expr> = values
            .into_iter()
            .map(|(name, v)| (name.to_string(), Expr::Constant(v)))
            .collect();
        self.substitute(&map)
    }

    /// Render with enough digits to reconstruct every `f64` exactly
    /// (17 significant digits). Used by the model-text exporter.
    pub fn to_exact_text(&self) -> String {
        let mut s = String::new();
        write_expr(&mut s, self, 0, FloatStyle::Exact17);
        s
    }
}

fn apply_unary(op: UnaryOp, a: f64) -> f64 {
    match op {
        UnaryOp::Neg => -a,
        UnaryOp::Sin => a.sin(),
        UnaryOp::Cos => a.cos(),
        UnaryOp::Exp => a.exp(),
    }
}

fn apply_binary(op: BinaryOp, l: f64, r: f64) -> f64 {
    match op {
        BinaryOp::Add => l + r,
        BinaryOp::Sub => l - r,
        BinaryOp::Mul => l * r,
        BinaryOp::Div => l / r,
        BinaryOp::Pow => l.powf(r),
    }
}

/// Folding rules: constant subtrees (when the result is finite), x+0, x*1,
/// x*0, x^1, x^0, and -(-x). Intentionally nothing more.
fn fold_binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
    if let (Some(l), Some(r)) = (lhs.as_constant(), rhs.as_constant()) {
        let v = apply_binary(op, l, r);
        if v.is_finite() {
            return Expr::Constant(v);
        }
    }
    match op {
        BinaryOp::Add => {
            if lhs.is_zero() {
                return rhs;
            }
            if rhs.is_zero() {
                return lhs;
            }
        }
        BinaryOp::Mul => {
            if lhs.is_zero() || rhs.is_zero() {
                return Expr::Constant(0.0);
            }
            if lhs.as_constant() == Some(1.0) {
                return rhs;
            }
            if rhs.as_constant() == Some(1.0) {
                return lhs;
            }
            // Constants combine across one level of nested multiplication,
            // c1*(c2*y) → (c1·c2)*y, so derivatives like d/du(0.5*u^2) fold
            // all the way down to `u`.
            if let Some(c) = lhs.as_constant() {
                if let Some(e) = combine_constant_factor(c, &rhs) {
                    return e;
                }
            }
            if let Some(c) = rhs.as_constant() {
                if let Some(e) = combine_constant_factor(c, &lhs) {
                    return e;
                }
            }
        }
        BinaryOp::Pow => {
            if rhs.as_constant() == Some(1.0) {
                return lhs;
            }
            if rhs.as_constant() == Some(0.0) {
                return Expr::Constant(1.0);
            }
        }
        BinaryOp::Sub | BinaryOp::Div => {}
    }
    Expr::Binary(op, Arc::new(lhs), Arc::new(rhs))
}

fn combine_constant_factor(c: f64, other: &Expr) -> Option<Expr> {
    if let Expr::Binary(BinaryOp::Mul, a, b) = other {
        if let Some(c2) = a.as_constant() {
            return Some(Expr::mul(Expr::Constant(c * c2), b.as_ref().clone()));
        }
        if let Some(c2) = b.as_constant() {
            return Some(Expr::mul(Expr::Constant(c * c2), a.as_ref().clone()));
        }
    }
    None
}

fn fold_unary(op: UnaryOp, child: Expr) -> Expr {
    if let Some(c) = child.as_constant() {
        let v = apply_unary(op, c);
        if v.is_finite() {
            return Expr::Constant(v);
        }
    }
    if op == UnaryOp::Neg {
        if let Expr::Unary(UnaryOp::Neg, inner) = &child {
            return inner.as_ref().clone();
        }
    }
    Expr::Unary(op, Arc::new(child))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum FloatStyle {
    /// Shortest representation that round-trips (`{}`).
    Shortest,
    /// 17 significant digits in scientific notation.
    Exact17,
}

// Operator precedence levels for printing: higher binds tighter.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Constant(c) if *c < 0.0 => 3, // prints with a leading '-'
        Expr::Constant(_) | Expr::Variable(_) => 5,
        Expr::Unary(UnaryOp::Neg, _) => 3,
        Expr::Unary(_, _) => 5, // function call, self-delimiting
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => 1,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => 2,
        Expr::Binary(BinaryOp::Pow, _, _) => 4,
    }
}

fn write_float(out: &mut String, v: f64, style: FloatStyle) {
    match style {
        FloatStyle::Shortest => out.push_str(&format!("{}", v)),
        FloatStyle::Exact17 => out.push_str(&format!("{:.16e}", v)),
    }
}

fn write_expr(out: &mut String, e: &Expr, parent_prec: u8, style: FloatStyle) {
    let prec = precedence(e);
    let parens = prec < parent_prec;
    if parens {
        out.push('(');
    }
    match e {
        Expr::Constant(c) => write_float(out, *c, style),
        Expr::Variable(name) => out.push_str(name),
        Expr::Unary(UnaryOp::Neg, a) => {
            out.push('-');
            write_expr(out, a, 3, style);
        }
        Expr::Unary(op, a) => {
            out.push_str(match op {
                UnaryOp::Sin => "sin",
                UnaryOp::Cos => "cos",
                UnaryOp::Exp => "exp",
                UnaryOp::Neg => unreachable!(),
            });
            out.push('(');
            write_expr(out, a, 0, style);
            out.push(')');
        }
        Expr::Binary(op, l, r) => {
            let (sym, lp, rp) = match op {
                // Left-associative: the right child needs strictly higher
                // precedence to print bare.
                BinaryOp::Add => ("+", 1, 2),
                BinaryOp::Sub => ("-", 1, 2),
                BinaryOp::Mul => ("*", 2, 3),
                BinaryOp::Div => ("/", 2, 3),
                // Right-associative and tighter than unary minus.
                BinaryOp::Pow => ("^", 5, 4),
            };
            write_expr(out, l, lp, style);
            out.push_str(sym);
            write_expr(out, r, rp, style);
        }
    }
    if parens {
        out.push(')');
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self, 0, FloatStyle::Shortest);
        f.write_str(&s)
    }
}

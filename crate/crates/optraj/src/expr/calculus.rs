//! Symbolic differentiation and affine-structure extraction.

use super::{BinaryOp, Expr, UnaryOp};

impl Expr {
    /// Exact partial derivative with respect to `var`, constant-folded.
    ///
    /// Powers differentiate as `d(b^c) = c*b^(c-1)*db` — the exponent is a
    /// constant by construction, which sidesteps the log-domain cases of a
    /// general power rule.
    pub fn differentiate(&self, var: &str) -> Expr {
        match self {
            Expr::Constant(_) => Expr::Constant(0.0),
            Expr::Variable(name) => {
                if name == var {
                    Expr::Constant(1.0)
                } else {
                    Expr::Constant(0.0)
                }
            }
            Expr::Unary(op, a) => {
                let da = a.differentiate(var);
                match op {
                    UnaryOp::Neg => Expr::neg(da),
                    UnaryOp::Sin => Expr::mul(Expr::cos(a.as_ref().clone()), da),
                    UnaryOp::Cos => {
                        Expr::mul(Expr::neg(Expr::sin(a.as_ref().clone())), da)
                    }
                    UnaryOp::Exp => Expr::mul(Expr::exp(a.as_ref().clone()), da),
                }
            }
            Expr::Binary(op, l, r) => {
                let (l, r) = (l.as_ref(), r.as_ref());
                match op {
                    BinaryOp::Add => Expr::add(l.differentiate(var), r.differentiate(var)),
                    BinaryOp::Sub => Expr::sub(l.differentiate(var), r.differentiate(var)),
                    BinaryOp::Mul => Expr::add(
                        Expr::mul(l.differentiate(var), r.clone()),
                        Expr::mul(l.clone(), r.differentiate(var)),
                    ),
                    BinaryOp::Div => Expr::div(
                        Expr::sub(
                            Expr::mul(l.differentiate(var), r.clone()),
                            Expr::mul(l.clone(), r.differentiate(var)),
                        ),
                        Expr::powc(r.clone(), 2.0),
                    ),
                    BinaryOp::Pow => {
                        let c = r
                            .as_constant()
                            .expect("pow exponent is constant by construction");
                        Expr::mul(
                            Expr::mul(
                                Expr::Constant(c),
                                Expr::powc(l.clone(), c - 1.0),
                            ),
                            l.differentiate(var),
                        )
                    }
                }
            }
        }
    }
}

/// Result of [`linearize`]: either exact affine coefficients with a real
/// constant term, or `NonAffine`. `NonAffine` is an answer, not an error —
/// it is what routes a problem to the nonlinear solver path.
#[derive(Debug, Clone, PartialEq)]
pub enum Linearization {
    Affine {
        coefficients: Vec<f64>,
        constant: f64,
    },
    NonAffine,
}

impl Expr {
    /// Decompose `self` as `Σ cᵢ·varsᵢ + constant` with real `cᵢ` and a real
    /// constant, or report `NonAffine`. Any appearance of another free
    /// variable (including `t`) makes the constant non-real and therefore
    /// the result `NonAffine`; use [`affine_parts`] when a symbolic
    /// remainder is acceptable.
    pub fn linearize<S: AsRef<str>>(&self, vars: &[S]) -> Linearization {
        match affine_parts(self, vars) {
            Some((coefficients, remainder)) => match remainder.as_constant() {
                Some(constant) => Linearization::Affine {
                    coefficients,
                    constant,
                },
                None => Linearization::NonAffine,
            },
            None => Linearization::NonAffine,
        }
    }
}

/// Split `e` as `Σ cᵢ·varsᵢ + remainder` where every `cᵢ` is a real constant
/// and `remainder` is an expression free of `vars`. Returns `None` when `e`
/// depends on `vars` non-affinely or with non-constant coefficients (e.g. a
/// remaining symbol multiplying one of `vars`).
///
/// This is the workhorse behind both linear-problem classification and the
/// circuit module's symbolic Gaussian elimination, where the remainder may
/// legitimately involve state and control symbols.
pub fn affine_parts<S: AsRef<str>>(e: &Expr, vars: &[S]) -> Option<(Vec<f64>, Expr)> {
    let names: Vec<&str> = vars.iter().map(|s| s.as_ref()).collect();
    decompose(e, &names)
}

fn decompose(e: &Expr, vars: &[&str]) -> Option<(Vec<f64>, Expr)> {
    let zero = || vec![0.0; vars.len()];
    match e {
        Expr::Constant(_) => Some((zero(), e.clone())),
        Expr::Variable(name) => match vars.iter().position(|v| v == name) {
            Some(idx) => {
                let mut c = zero();
                c[idx] = 1.0;
                Some((c, Expr::Constant(0.0)))
            }
            None => Some((zero(), e.clone())),
        },
        Expr::Unary(UnaryOp::Neg, a) => {
            let (mut c, r) = decompose(a, vars)?;
            for ci in &mut c {
                *ci = -*ci;
            }
            Some((c, Expr::neg(r)))
        }
        Expr::Unary(op, a) => {
            // sin/cos/exp of anything containing vars is nonlinear.
            let (c, r) = decompose(a, vars)?;
            if c.iter().any(|ci| *ci != 0.0) {
                return None;
            }
            Some((c, super::fold_unary(*op, r)))
        }
        Expr::Binary(op, l, r) => {
            match op {
                BinaryOp::Add | BinaryOp::Sub => {
                    let (lc, lr) = decompose(l, vars)?;
                    let (rc, rr) = decompose(r, vars)?;
                    let combine: fn(f64, f64) -> f64 = match op {
                        BinaryOp::Add => |a, b| a + b,
                        _ => |a, b| a - b,
                    };
                    let c = lc.iter().zip(&rc).map(|(a, b)| combine(*a, *b)).collect();
                    let rem = match op {
                        BinaryOp::Add => Expr::add(lr, rr),
                        _ => Expr::sub(lr, rr),
                    };
                    Some((c, rem))
                }
                BinaryOp::Mul => {
                    let (lc, lr) = decompose(l, vars)?;
                    let (rc, rr) = decompose(r, vars)?;
                    let l_has = lc.iter().any(|ci| *ci != 0.0);
                    let r_has = rc.iter().any(|ci| *ci != 0.0);
                    match (l_has, r_has) {
                        (false, false) => Some((zero(), Expr::mul(lr, rr))),
                        (true, true) => None, // product of two var-bearing factors
                        (true, false) => scale_side(lc, lr, &rr),
                        (false, true) => scale_side(rc, rr, &lr),
                    }
                }
                BinaryOp::Div => {
                    let (lc, lr) = decompose(l, vars)?;
                    let (rc, rr) = decompose(r, vars)?;
                    if rc.iter().any(|ci| *ci != 0.0) {
                        return None; // vars in a denominator
                    }
                    if lc.iter().all(|ci| *ci == 0.0) {
                        return Some((zero(), Expr::div(lr, rr)));
                    }
                    // Coefficients stay real only for a constant divisor.
                    let d = rr.as_constant()?;
                    let c = lc.iter().map(|ci| ci / d).collect();
                    Some((c, Expr::div(lr, Expr::Constant(d))))
                }
                BinaryOp::Pow => {
                    let (lc, lr) = decompose(l, vars)?;
                    if lc.iter().any(|ci| *ci != 0.0) {
                        return None; // var under a power
                    }
                    let exp = r.as_constant()?;
                    Some((zero(), Expr::powc(lr, exp)))
                }
            }
        }
    }
}

/// Multiply an affine part `(coeffs, rem)` by a var-free factor. The
/// coefficients stay real only when the factor is a constant.
fn scale_side(coeffs: Vec<f64>, rem: Expr, factor: &Expr) -> Option<(Vec<f64>, Expr)> {
    let f = factor.as_constant()?;
    let c = coeffs.iter().map(|ci| ci * f).collect();
    Some((c, Expr::mul(rem, Expr::Constant(f))))
}

//! Expression language for the right-hand sides of first-order systems:
//! rational-coefficient arithmetic over the jet variables `x[i]`, `p[A]`,
//! `pd[A][L]`, with a small table of analytic primitives.
//!
//! Construction goes through the smart constructors ([`add`], [`mul`], …),
//! which perform local constant folding and nothing else, so ASTs stay
//! predictable. The canonical printer round-trips through [`parse`].

mod eval;
mod parser;

pub use eval::{PointEnv, SeriesEnv};
pub use parser::{parse, ParseContext};

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{exact_sqrt, factorial, format_rational, rat_i64, Rational};

/// Reference to a jet variable, 1-based as in the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarRef {
    /// Base coordinate `x[i]`.
    X(usize),
    /// Unknown value `p[A]`.
    P(usize),
    /// Tangential derivative `pd[A][L]` (A = unknown, L = direction).
    Pd(usize, usize),
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarRef::X(i) => write!(f, "x[{i}]"),
            VarRef::P(a) => write!(f, "p[{a}]"),
            VarRef::Pd(a, l) => write!(f, "pd[{a}][{l}]"),
        }
    }
}

/// Named univariate analytic primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Primitive {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

pub const PRIMITIVES: [Primitive; 5] = [
    Primitive::Exp,
    Primitive::Log,
    Primitive::Sin,
    Primitive::Cos,
    Primitive::Sqrt,
];

impl Primitive {
    pub fn name(self) -> &'static str {
        match self {
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Sin => "sin",
            Primitive::Cos => "cos",
            Primitive::Sqrt => "sqrt",
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        PRIMITIVES.iter().copied().find(|p| p.name() == name)
    }

    /// Symbolic derivative of `self(arg)` with respect to `arg`.
    pub fn derivative_rule(self, arg: &Expr) -> Expr {
        let a = arg.clone();
        match self {
            Primitive::Exp => prim(self, a),
            Primitive::Log => quot(constant(Rational::one()), a),
            Primitive::Sin => prim(Primitive::Cos, a),
            Primitive::Cos => neg(prim(Primitive::Sin, a)),
            Primitive::Sqrt => quot(
                constant(Rational::one()),
                mul(constant(rat_i64(2)), prim(Primitive::Sqrt, a)),
            ),
        }
    }

    /// Exact value at an admissible rational base point. Exactness over the
    /// rationals restricts each primitive to the base values where its value
    /// is itself rational.
    pub fn eval_point(self, c: &Rational) -> Result<Rational> {
        let inadmissible = |reason: &str| Error::InadmissibleBase {
            op: self.name().into(),
            reason: reason.into(),
        };
        match self {
            Primitive::Exp => {
                if c.is_zero() {
                    Ok(Rational::one())
                } else {
                    Err(inadmissible("argument must be zero for an exact value"))
                }
            }
            Primitive::Log => {
                if !c.is_positive() {
                    Err(inadmissible("argument is not positive"))
                } else if c.is_one() {
                    Ok(Rational::zero())
                } else {
                    Err(inadmissible("argument must be one for an exact value"))
                }
            }
            Primitive::Sin => {
                if c.is_zero() {
                    Ok(Rational::zero())
                } else {
                    Err(inadmissible("argument must be zero for an exact value"))
                }
            }
            Primitive::Cos => {
                if c.is_zero() {
                    Ok(Rational::one())
                } else {
                    Err(inadmissible("argument must be zero for an exact value"))
                }
            }
            Primitive::Sqrt => {
                if c.is_negative() {
                    Err(inadmissible("argument is negative"))
                } else {
                    exact_sqrt(c).ok_or_else(|| inadmissible("argument is not a rational square"))
                }
            }
        }
    }

    /// Taylor coefficients at an admissible base value `c`, up to `order`:
    /// `f(c + h) = Σ_j coeffs[j] h^j`.
    pub fn taylor_coeffs(self, c: &Rational, order: usize) -> Result<Vec<Rational>> {
        let inadmissible = |reason: &str| Error::InadmissibleBase {
            op: self.name().into(),
            reason: reason.into(),
        };
        match self {
            Primitive::Exp => {
                if !c.is_zero() {
                    return Err(inadmissible("base value must be zero"));
                }
                Ok((0..=order).map(|j| factorial(j).recip()).collect())
            }
            Primitive::Log => {
                if !c.is_one() {
                    return Err(inadmissible("base value must be one"));
                }
                let mut v = vec![Rational::zero()];
                for j in 1..=order {
                    let sign: i64 = if j % 2 == 1 { 1 } else { -1 };
                    v.push(rat_i64(sign) / rat_i64(j as i64));
                }
                Ok(v)
            }
            Primitive::Sin => {
                if !c.is_zero() {
                    return Err(inadmissible("base value must be zero"));
                }
                Ok((0..=order)
                    .map(|j| match j % 4 {
                        1 => factorial(j).recip(),
                        3 => -factorial(j).recip(),
                        _ => Rational::zero(),
                    })
                    .collect())
            }
            Primitive::Cos => {
                if !c.is_zero() {
                    return Err(inadmissible("base value must be zero"));
                }
                Ok((0..=order)
                    .map(|j| match j % 4 {
                        0 => factorial(j).recip(),
                        2 => -factorial(j).recip(),
                        _ => Rational::zero(),
                    })
                    .collect())
            }
            Primitive::Sqrt => {
                if !c.is_positive() {
                    return Err(inadmissible("base value is not positive"));
                }
                let Some(r) = exact_sqrt(c) else {
                    return Err(inadmissible("base value is not a rational square"));
                };
                // √(c+h) = r Σ binom(1/2, j) (h/c)^j
                let half = Rational::new(1.into(), 2.into());
                let inv_c = c.recip();
                let mut v = Vec::with_capacity(order + 1);
                let mut binom = Rational::one();
                let mut scale = r;
                for j in 0..=order {
                    v.push(&binom * &scale);
                    binom = binom * (&half - rat_i64(j as i64)) / rat_i64(j as i64 + 1);
                    scale *= &inv_c;
                }
                Ok(v)
            }
        }
    }
}

/// Expression AST. Shared subtrees are reference counted; values are
/// immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(Rational),
    Var(VarRef),
    Sum(Arc<Expr>, Arc<Expr>),
    Prod(Arc<Expr>, Arc<Expr>),
    Quot(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, u32),
    Prim(Primitive, Arc<Expr>),
}

pub fn constant(q: Rational) -> Expr {
    Expr::Const(q)
}

pub fn int(n: i64) -> Expr {
    Expr::Const(rat_i64(n))
}

pub fn var(v: VarRef) -> Expr {
    Expr::Var(v)
}

pub fn x(i: usize) -> Expr {
    Expr::Var(VarRef::X(i))
}

pub fn p(a: usize) -> Expr {
    Expr::Var(VarRef::P(a))
}

pub fn pd(a: usize, l: usize) -> Expr {
    Expr::Var(VarRef::Pd(a, l))
}

fn as_const(e: &Expr) -> Option<&Rational> {
    match e {
        Expr::Const(q) => Some(q),
        _ => None,
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), None) if x.is_zero() => b,
        (None, Some(y)) if y.is_zero() => a,
        _ => Expr::Sum(Arc::new(a), Arc::new(b)),
    }
}

pub fn neg(e: Expr) -> Expr {
    match e {
        Expr::Const(q) => Expr::Const(-q),
        other => mul(int(-1), other),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    add(a, neg(b))
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), None) => {
            if x.is_zero() {
                int(0)
            } else if x.is_one() {
                b
            } else {
                Expr::Prod(Arc::new(a), Arc::new(b))
            }
        }
        (None, Some(y)) => {
            if y.is_zero() {
                int(0)
            } else if y.is_one() {
                a
            } else {
                Expr::Prod(Arc::new(a), Arc::new(b))
            }
        }
        _ => Expr::Prod(Arc::new(a), Arc::new(b)),
    }
}

/// Quotient. The denominator must not be the constant zero; that case is
/// rejected by the parser and unreachable from the other constructors.
pub fn quot(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (_, Some(y)) if y.is_zero() => {
            panic!("quotient by the constant zero")
        }
        (Some(x), Some(y)) => Expr::Const(x / y),
        (Some(x), None) if x.is_zero() => int(0),
        (None, Some(y)) if y.is_one() => a,
        _ => Expr::Quot(Arc::new(a), Arc::new(b)),
    }
}

pub fn pow(a: Expr, n: u32) -> Expr {
    match n {
        0 => int(1),
        1 => a,
        _ => match as_const(&a) {
            Some(q) => {
                let mut acc = Rational::one();
                for _ in 0..n {
                    acc *= q;
                }
                Expr::Const(acc)
            }
            None => Expr::Pow(Arc::new(a), n),
        },
    }
}

/// Primitive application; folds constant arguments only when the value is
/// exactly representable.
pub fn prim(pk: Primitive, a: Expr) -> Expr {
    if let Some(q) = as_const(&a) {
        if let Ok(v) = pk.eval_point(q) {
            return Expr::Const(v);
        }
    }
    Expr::Prim(pk, Arc::new(a))
}

impl Expr {
    /// Exact symbolic partial derivative with respect to `v`.
    pub fn differentiate(&self, v: VarRef) -> Expr {
        match self {
            Expr::Const(_) => int(0),
            Expr::Var(w) => {
                if *w == v {
                    int(1)
                } else {
                    int(0)
                }
            }
            Expr::Sum(a, b) => add(a.differentiate(v), b.differentiate(v)),
            Expr::Prod(a, b) => add(
                mul(a.differentiate(v), (**b).clone()),
                mul((**a).clone(), b.differentiate(v)),
            ),
            // d(a/b) = a'/b - a b'/b^2
            Expr::Quot(a, b) => sub(
                quot(a.differentiate(v), (**b).clone()),
                quot(
                    mul((**a).clone(), b.differentiate(v)),
                    pow((**b).clone(), 2),
                ),
            ),
            Expr::Pow(a, n) => mul(
                mul(int(*n as i64), pow((**a).clone(), n - 1)),
                a.differentiate(v),
            ),
            Expr::Prim(pk, a) => mul(pk.derivative_rule(a), a.differentiate(v)),
        }
    }

    /// All variable references, each listed once in `VarRef` order.
    pub fn variables(&self) -> Vec<VarRef> {
        let mut set = std::collections::BTreeSet::new();
        self.collect_vars(&mut set);
        set.into_iter().collect()
    }

    fn collect_vars(&self, out: &mut std::collections::BTreeSet<VarRef>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Sum(a, b) | Expr::Prod(a, b) | Expr::Quot(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Pow(a, _) => a.collect_vars(out),
            Expr::Prim(_, a) => a.collect_vars(out),
        }
    }

    pub fn contains_primitive(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Sum(a, b) | Expr::Prod(a, b) | Expr::Quot(a, b) => {
                a.contains_primitive() || b.contains_primitive()
            }
            Expr::Pow(a, _) => a.contains_primitive(),
            Expr::Prim(_, _) => true,
        }
    }

    /// Checks every variable reference against the dimensions (n, k, m).
    pub fn validate_indices(&self, n: usize, k: usize, m: usize) -> Result<()> {
        for v in self.variables() {
            let ok = match v {
                VarRef::X(i) => i >= 1 && i <= n,
                VarRef::P(a) => a >= 1 && a <= m,
                VarRef::Pd(a, l) => a >= 1 && a <= m && l >= 1 && l <= k,
            };
            if !ok {
                return Err(Error::IndexOutOfRange {
                    reference: v.to_string(),
                    msg: format!("bounds are n = {n}, k = {k}, m = {m}"),
                });
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse` of the output reproduces the AST.
    pub fn print(&self) -> String {
        let mut out = String::new();
        self.print_prec(1, &mut out);
        out
    }

    fn print_prec(&self, prec: u8, out: &mut String) {
        match self {
            Expr::Const(q) => {
                let needs_parens = prec > 1 && (q.is_negative() || !q.denom().is_one());
                if needs_parens {
                    out.push('(');
                }
                out.push_str(&format_rational(q));
                if needs_parens {
                    out.push(')');
                }
            }
            Expr::Var(v) => out.push_str(&v.to_string()),
            Expr::Sum(a, b) => {
                let needs_parens = prec > 1;
                if needs_parens {
                    out.push('(');
                }
                a.print_prec(1, out);
                match &**b {
                    Expr::Prod(l, r) if matches!(&**l, Expr::Const(q) if *q == -Rational::one()) => {
                        out.push_str(" - ");
                        r.print_prec(2, out);
                    }
                    Expr::Const(q) if q.is_negative() => {
                        out.push_str(" - ");
                        Expr::Const(-q.clone()).print_prec(2, out);
                    }
                    other => {
                        out.push_str(" + ");
                        other.print_prec(2, out);
                    }
                }
                if needs_parens {
                    out.push(')');
                }
            }
            Expr::Prod(a, b) => {
                if matches!(&**a, Expr::Const(q) if *q == -Rational::one()) {
                    let needs_parens = prec > 1;
                    if needs_parens {
                        out.push('(');
                    }
                    out.push('-');
                    b.print_prec(2, out);
                    if needs_parens {
                        out.push(')');
                    }
                } else {
                    let needs_parens = prec > 2;
                    if needs_parens {
                        out.push('(');
                    }
                    a.print_prec(2, out);
                    out.push('*');
                    b.print_prec(3, out);
                    if needs_parens {
                        out.push(')');
                    }
                }
            }
            Expr::Quot(a, b) => {
                let needs_parens = prec > 2;
                if needs_parens {
                    out.push('(');
                }
                a.print_prec(2, out);
                out.push('/');
                b.print_prec(3, out);
                if needs_parens {
                    out.push(')');
                }
            }
            Expr::Pow(a, n) => {
                let needs_parens = prec > 3;
                if needs_parens {
                    out.push('(');
                }
                a.print_prec(4, out);
                out.push('^');
                out.push_str(&n.to_string());
                if needs_parens {
                    out.push(')');
                }
            }
            Expr::Prim(pk, a) => {
                out.push_str(pk.name());
                out.push('(');
                a.print_prec(1, out);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.print())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn constructors_fold_constants() {
        assert_eq!(add(int(2), int(3)), int(5));
        assert_eq!(mul(int(0), x(1)), int(0));
        assert_eq!(mul(int(1), x(1)), x(1));
        assert_eq!(quot(int(3), int(5)), constant(rat(3, 5)));
        assert_eq!(pow(x(1), 0), int(1));
        assert_eq!(pow(x(1), 1), x(1));
        assert_eq!(prim(Primitive::Cos, int(0)), int(1));
        assert_eq!(
            prim(Primitive::Sqrt, constant(rat(16, 25))),
            constant(rat(4, 5))
        );
        // inexact values stay symbolic
        assert!(matches!(prim(Primitive::Exp, int(1)), Expr::Prim(_, _)));
    }

    #[test]
    fn quotient_derivative_matches_quotient_rule() {
        // d/d pd[2][1] of pd[2][1]/pd[1][1] = 1/pd[1][1]
        let e = quot(pd(2, 1), pd(1, 1));
        let d = e.differentiate(VarRef::Pd(2, 1));
        assert_eq!(d, quot(int(1), pd(1, 1)));
        assert_eq!(d.print(), "1/pd[1][1]");
    }

    #[test]
    fn monge_rhs_derivative_prints_like_the_closed_form() {
        // d/d pd[1][1] of (pd[2][1]*pd[3][1])/pd[1][1]
        let e = quot(mul(pd(2, 1), pd(3, 1)), pd(1, 1));
        let d = e.differentiate(VarRef::Pd(1, 1));
        assert_eq!(d.print(), "-pd[2][1]*pd[3][1]/pd[1][1]^2");
    }

    #[test]
    fn derivative_of_unrelated_variable_is_zero() {
        assert_eq!(p(1).differentiate(VarRef::X(1)), int(0));
    }

    #[test]
    fn index_validation() {
        let e = pd(1, 2);
        assert!(e.validate_indices(3, 1, 1).is_err());
        assert!(e.validate_indices(3, 2, 1).is_ok());
    }

    #[test]
    fn printer_parenthesizes_associativity() {
        let left = add(add(x(1), x(2)), x(3));
        assert_eq!(left.print(), "x[1] + x[2] + x[3]");
        let right = add(x(1), add(x(2), x(3)));
        assert_eq!(right.print(), "x[1] + (x[2] + x[3])");
        let m = mul(add(x(1), x(2)), x(3));
        assert_eq!(m.print(), "(x[1] + x[2])*x[3]");
        let q = quot(x(1), mul(x(2), x(3)));
        assert_eq!(q.print(), "x[1]/(x[2]*x[3])");
        let s = sub(x(1), x(2));
        assert_eq!(s.print(), "x[1] - x[2]");
    }
}

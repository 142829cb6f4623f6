//! Canonical-form zero testing for rational-function expressions, the
//! engine behind compat's symbolic verdict (and reused by the Monge
//! classifier). An expression built from constants, jet variables, ring
//! operations, quotients, and integer powers is flattened to a
//! numerator/denominator pair of expanded polynomials over the full jet
//! variable set; it vanishes identically on its domain iff the numerator
//! expands to the zero polynomial.

use crate::error::{Error, Result};
use crate::expr::{Expr, PointEnv, SeriesEnv, VarRef};
use crate::rational::Rational;
use crate::series::TruncatedSeries;

/// Flat enumeration of the jet variables x[1..n], p[1..m], pd[1..m][1..k].
#[derive(Debug, Clone, Copy)]
pub struct VarSlots {
    pub n: usize,
    pub k: usize,
    pub m: usize,
}

impl VarSlots {
    pub fn count(&self) -> usize {
        self.n + self.m + self.m * self.k
    }

    pub fn slot(&self, v: VarRef) -> usize {
        match v {
            VarRef::X(i) => i - 1,
            VarRef::P(a) => self.n + a - 1,
            VarRef::Pd(a, l) => self.n + self.m + (a - 1) * self.k + (l - 1),
        }
    }

    /// All variables in slot order.
    pub fn all_vars(&self) -> Vec<VarRef> {
        let mut out = Vec::with_capacity(self.count());
        for i in 1..=self.n {
            out.push(VarRef::X(i));
        }
        for a in 1..=self.m {
            out.push(VarRef::P(a));
        }
        for a in 1..=self.m {
            for l in 1..=self.k {
                out.push(VarRef::Pd(a, l));
            }
        }
        out
    }
}

/// (numerator degree, denominator degree) bounds per subexpression.
fn degree_bounds(e: &Expr, max_seen: &mut usize) -> Result<(usize, usize)> {
    let out = match e {
        Expr::Const(_) => (0, 0),
        Expr::Var(_) => (1, 0),
        Expr::Sum(a, b) => {
            let (na, da) = degree_bounds(a, max_seen)?;
            let (nb, db) = degree_bounds(b, max_seen)?;
            ((na + db).max(nb + da), da + db)
        }
        Expr::Prod(a, b) => {
            let (na, da) = degree_bounds(a, max_seen)?;
            let (nb, db) = degree_bounds(b, max_seen)?;
            (na + nb, da + db)
        }
        Expr::Quot(a, b) => {
            let (na, da) = degree_bounds(a, max_seen)?;
            let (nb, db) = degree_bounds(b, max_seen)?;
            (na + db, da + nb)
        }
        Expr::Pow(a, n) => {
            let (na, da) = degree_bounds(a, max_seen)?;
            (na * *n as usize, da * *n as usize)
        }
        Expr::Prim(_, _) => {
            return Err(Error::InvalidInput(
                "expression contains an analytic primitive".into(),
            ))
        }
    };
    *max_seen = (*max_seen).max(out.0).max(out.1);
    Ok(out)
}

/// Expanded polynomials are sparse series with an order high enough that no
/// truncation occurs.
type Poly = TruncatedSeries;

fn to_fraction(e: &Expr, slots: &VarSlots, order: usize) -> Result<(Poly, Poly)> {
    let arity = slots.count();
    let one = || Poly::constant(arity, order, Rational::from_integer(1.into()));
    match e {
        Expr::Const(q) => Ok((Poly::constant(arity, order, q.clone()), one())),
        Expr::Var(v) => Ok((Poly::variable(arity, order, slots.slot(*v) + 1)?, one())),
        Expr::Sum(a, b) => {
            let (na, da) = to_fraction(a, slots, order)?;
            let (nb, db) = to_fraction(b, slots, order)?;
            Ok((na.mul(&db)?.add(&nb.mul(&da)?)?, da.mul(&db)?))
        }
        Expr::Prod(a, b) => {
            let (na, da) = to_fraction(a, slots, order)?;
            let (nb, db) = to_fraction(b, slots, order)?;
            Ok((na.mul(&nb)?, da.mul(&db)?))
        }
        Expr::Quot(a, b) => {
            let (na, da) = to_fraction(a, slots, order)?;
            let (nb, db) = to_fraction(b, slots, order)?;
            if nb.is_zero() {
                return Err(Error::NowhereDefined);
            }
            Ok((na.mul(&db)?, da.mul(&nb)?))
        }
        Expr::Pow(a, n) => {
            let (na, da) = to_fraction(a, slots, order)?;
            Ok((na.pow(*n as usize)?, da.pow(*n as usize)?))
        }
        Expr::Prim(_, _) => Err(Error::InvalidInput(
            "expression contains an analytic primitive".into(),
        )),
    }
}

/// Exact zero test for a rational-function expression: true iff the
/// expression vanishes identically wherever it is defined. Errors on
/// primitives (caller falls back to a germ test) and on identically
/// vanishing denominators.
pub fn is_identically_zero(e: &Expr, slots: &VarSlots) -> Result<bool> {
    let mut bound = 0usize;
    degree_bounds(e, &mut bound)?;
    let (num, den) = to_fraction(e, slots, bound)?;
    if den.is_zero() {
        return Err(Error::NowhereDefined);
    }
    Ok(num.is_zero())
}

/// Germ-level zero test at a base point: expands the expression as a series
/// in all jet variables around the point, up to `order`. Supports
/// primitives; the verdict is only germ-at-base-point.
pub fn is_zero_germ_at(e: &Expr, slots: &VarSlots, base: &PointEnv, order: usize) -> Result<bool> {
    let arity = slots.count();
    let mut env = SeriesEnv::new(arity, order);
    for v in slots.all_vars() {
        let Some(c) = base.get(v) else {
            return Err(Error::UnboundVariable(v.to_string()));
        };
        let germ = TruncatedSeries::variable(arity, order, slots.slot(v) + 1)?
            .add(&TruncatedSeries::constant(arity, order, c.clone()))?;
        env.bind(v, germ)?;
    }
    Ok(env.evaluate(e)?.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{mul, p, parse, pd, quot, sub, x, ParseContext};
    use crate::rational::rat_i64;

    fn slots() -> VarSlots {
        VarSlots { n: 3, k: 1, m: 2 }
    }

    #[test]
    fn detects_hidden_zero() {
        // x1*(p1/x1) - p1 == 0 away from {x1 = 0}
        let e = sub(mul(x(1), quot(p(1), x(1))), p(1));
        assert!(is_identically_zero(&e, &slots()).unwrap());
    }

    #[test]
    fn detects_nonzero() {
        let e = sub(mul(pd(1, 1), pd(2, 1)), pd(2, 1));
        assert!(!is_identically_zero(&e, &slots()).unwrap());
    }

    #[test]
    fn rejects_primitives() {
        let ctx = ParseContext::system(3, 1, 2);
        let e = parse("sin(x[1])", &ctx).unwrap();
        assert!(is_identically_zero(&e, &slots()).is_err());
    }

    #[test]
    fn germ_test_handles_primitives() {
        // sin(x1)^2 + cos(x1)^2 - 1 vanishes as a germ at the base point 0
        let ctx = ParseContext::system(3, 1, 2);
        let e = parse("sin(x[1])^2 + cos(x[1])^2 - 1", &ctx).unwrap();
        let mut base = PointEnv::new();
        for v in slots().all_vars() {
            base.bind(v, rat_i64(0));
        }
        assert!(is_zero_germ_at(&e, &slots(), &base, 9).unwrap());

        let e2 = parse("sin(x[1]) - x[1]", &ctx).unwrap();
        assert!(!is_zero_germ_at(&e2, &slots(), &base, 9).unwrap());
    }
}

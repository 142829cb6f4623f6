//! Evaluation of expressions over truncated series and over rational points.
//! A degree-0 environment makes series evaluation collapse to exact point
//! evaluation; the two paths are kept separate for clarity and speed but are
//! tested against each other.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::{Expr, VarRef};
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::series::TruncatedSeries;

/// Environment binding jet variables to series of one common arity; the
/// evaluation order is the minimum order over all bindings.
#[derive(Debug, Clone)]
pub struct SeriesEnv {
    arity: usize,
    order: usize,
    bindings: BTreeMap<VarRef, TruncatedSeries>,
}

impl SeriesEnv {
    pub fn new(arity: usize, order: usize) -> Self {
        SeriesEnv {
            arity,
            order,
            bindings: BTreeMap::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bind(&mut self, v: VarRef, s: TruncatedSeries) -> Result<()> {
        if s.arity() != self.arity {
            return Err(Error::ArityMismatch(s.arity(), self.arity));
        }
        self.order = self.order.min(s.order());
        self.bindings.insert(v, s);
        Ok(())
    }

    pub fn get(&self, v: VarRef) -> Option<&TruncatedSeries> {
        self.bindings.get(&v)
    }

    /// Composes the expression with the bound series, truncated at the
    /// common order.
    pub fn evaluate(&self, e: &Expr) -> Result<TruncatedSeries> {
        match e {
            Expr::Const(q) => Ok(TruncatedSeries::constant(self.arity, self.order, q.clone())),
            Expr::Var(v) => match self.bindings.get(v) {
                Some(s) => Ok(s.truncated(self.order)),
                None => Err(Error::UnboundVariable(v.to_string())),
            },
            Expr::Sum(a, b) => self.evaluate(a)?.add(&self.evaluate(b)?),
            Expr::Prod(a, b) => self.evaluate(a)?.mul(&self.evaluate(b)?),
            Expr::Quot(a, b) => {
                let den = self.evaluate(b)?;
                let inv = den.reciprocal()?;
                self.evaluate(a)?.mul(&inv)
            }
            Expr::Pow(a, n) => self.evaluate(a)?.pow(*n as usize),
            Expr::Prim(pk, a) => {
                let arg = self.evaluate(a)?;
                let base = arg.constant_term();
                let coeffs = pk.taylor_coeffs(&base, self.order)?;
                arg.compose_coeffs(&base, &coeffs)
            }
        }
    }
}

/// Exact evaluation point: every variable bound to a rational.
#[derive(Debug, Clone, Default)]
pub struct PointEnv {
    bindings: BTreeMap<VarRef, Rational>,
}

impl PointEnv {
    pub fn new() -> Self {
        PointEnv::default()
    }

    pub fn bind(&mut self, v: VarRef, q: Rational) {
        self.bindings.insert(v, q);
    }

    pub fn get(&self, v: VarRef) -> Option<&Rational> {
        self.bindings.get(&v)
    }

    pub fn evaluate(&self, e: &Expr) -> Result<Rational> {
        match e {
            Expr::Const(q) => Ok(q.clone()),
            Expr::Var(v) => self
                .bindings
                .get(v)
                .cloned()
                .ok_or_else(|| Error::UnboundVariable(v.to_string())),
            Expr::Sum(a, b) => Ok(self.evaluate(a)? + self.evaluate(b)?),
            Expr::Prod(a, b) => Ok(self.evaluate(a)? * self.evaluate(b)?),
            Expr::Quot(a, b) => {
                let den = self.evaluate(b)?;
                if den.is_zero() {
                    return Err(Error::ZeroConstantTerm);
                }
                Ok(self.evaluate(a)? / den)
            }
            Expr::Pow(a, n) => {
                let base = self.evaluate(a)?;
                let mut acc = Rational::from_integer(1.into());
                for _ in 0..*n {
                    acc *= &base;
                }
                Ok(acc)
            }
            Expr::Prim(pk, a) => pk.eval_point(&self.evaluate(a)?),
        }
    }
}

//! Exact truncated multivariate power series.
//!
//! A [`TruncatedSeries`] is a germ at the origin: a sparse map from
//! multi-indices to rational coefficients, cut off at a total-degree
//! truncation order. All arithmetic is exact; nothing in this module
//! touches floating point.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{exact_sqrt, factorial, parse_rational, rat_i64, Rational};

/// Exponent vector; total degree is the sum of entries.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(arity: usize) -> Self {
        MultiIndex(vec![0; arity])
    }

    /// Unit index for variable `i` (1-based).
    pub fn unit(arity: usize, i: usize) -> Self {
        let mut e = vec![0; arity];
        e[i - 1] = 1;
        MultiIndex(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().fold(0u32, |acc, &e| acc.saturating_add(e))
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// I! = I_1! ··· I_n!
    pub fn factorial(&self) -> Rational {
        self.0.iter().map(|&e| factorial(e as usize)).product()
    }
}

/// Multivariate Taylor polynomial with exact rational coefficients,
/// truncated at total degree `order`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedSeries {
    arity: usize,
    order: usize,
    terms: BTreeMap<MultiIndex, Rational>,
}

impl TruncatedSeries {
    pub fn zero(arity: usize, order: usize) -> Self {
        TruncatedSeries {
            arity,
            order,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, order: usize, value: Rational) -> Self {
        let mut s = Self::zero(arity, order);
        if !value.is_zero() {
            s.terms.insert(MultiIndex::zero(arity), value);
        }
        s
    }

    /// The coordinate germ `x_i` (1-based).
    pub fn variable(arity: usize, order: usize, i: usize) -> Result<Self> {
        if i == 0 || i > arity {
            return Err(Error::BadVariableIndex { index: i, arity });
        }
        let mut s = Self::zero(arity, order);
        if order >= 1 {
            s.terms.insert(MultiIndex::unit(arity, i), Rational::one());
        }
        Ok(s)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Rational {
        self.terms.get(idx).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&MultiIndex::zero(self.arity))
    }

    /// Inserts a coefficient, pruning zeros and degrees beyond the order.
    pub fn set_coeff(&mut self, idx: MultiIndex, value: Rational) {
        assert_eq!(idx.arity(), self.arity, "multi-index arity mismatch");
        if idx.degree() as usize > self.order || value.is_zero() {
            self.terms.remove(&idx);
        } else {
            self.terms.insert(idx, value);
        }
    }

    /// Lowest total degree carrying a nonzero coefficient.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::degree).min()
    }

    /// Re-truncates to a (usually lower) order.
    pub fn truncated(&self, order: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(k, _)| k.degree() as usize <= order)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        TruncatedSeries {
            arity: self.arity,
            order,
            terms,
        }
    }

    fn check_arity(&self, other: &Self) -> Result<()> {
        if self.arity != other.arity {
            return Err(Error::ArityMismatch(self.arity, other.arity));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_arity(other)?;
        let order = self.order.min(other.order);
        let mut out = self.truncated(order);
        for (k, v) in other.terms.iter() {
            if k.degree() as usize > order {
                continue;
            }
            let acc = out.coeff(k) + v;
            out.set_coeff(k.clone(), acc);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (k.clone(), -v.clone()))
            .collect();
        TruncatedSeries {
            arity: self.arity,
            order: self.order,
            terms,
        }
    }

    pub fn scale(&self, q: &Rational) -> Self {
        if q.is_zero() {
            return Self::zero(self.arity, self.order);
        }
        let terms = self.terms.iter().map(|(k, v)| (k.clone(), v * q)).collect();
        TruncatedSeries {
            arity: self.arity,
            order: self.order,
            terms,
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_arity(other)?;
        let order = self.order.min(other.order);
        let mut out = Self::zero(self.arity, order);
        for (ka, va) in self.terms.iter() {
            let da = ka.degree() as usize;
            if da > order {
                continue;
            }
            for (kb, vb) in other.terms.iter() {
                let db = kb.degree() as usize;
                if da + db > order {
                    continue;
                }
                let idx = MultiIndex(ka.0.iter().zip(kb.0.iter()).map(|(a, b)| a + b).collect());
                let acc = out.coeff(&idx) + va * vb;
                out.set_coeff(idx, acc);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, n: usize) -> Result<Self> {
        let mut acc = Self::constant(self.arity, self.order, Rational::one());
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Partial derivative in variable `i` (1-based); output order drops by one.
    pub fn derivative(&self, i: usize) -> Result<Self> {
        if i == 0 || i > self.arity {
            return Err(Error::BadVariableIndex {
                index: i,
                arity: self.arity,
            });
        }
        let order = self.order.saturating_sub(1);
        let mut out = Self::zero(self.arity, order);
        for (k, v) in self.terms.iter() {
            let e = k.0[i - 1];
            if e == 0 {
                continue;
            }
            let mut idx = k.clone();
            idx.0[i - 1] -= 1;
            out.set_coeff(idx, v * rat_i64(e as i64));
        }
        Ok(out)
    }

    /// Antiderivative in variable `i` with zero constant term; output order
    /// grows by one.
    pub fn antiderivative(&self, i: usize) -> Result<Self> {
        if i == 0 || i > self.arity {
            return Err(Error::BadVariableIndex {
                index: i,
                arity: self.arity,
            });
        }
        let mut out = Self::zero(self.arity, self.order + 1);
        for (k, v) in self.terms.iter() {
            let mut idx = k.clone();
            idx.0[i - 1] += 1;
            let factor = rat_i64(idx.0[i - 1] as i64);
            out.set_coeff(idx, v / factor);
        }
        Ok(out)
    }

    /// Composes the Taylor coefficients `coeffs` of an analytic function at
    /// `base` (i.e. `f(base + h) = Σ coeffs[j]·h^j`) with this series, whose
    /// constant term must equal `base`. Evaluated by Horner's scheme.
    pub fn compose_coeffs(&self, base: &Rational, coeffs: &[Rational]) -> Result<Self> {
        let h = self.sub(&Self::constant(self.arity, self.order, base.clone()))?;
        debug_assert!(h.constant_term().is_zero());
        let mut acc = Self::zero(self.arity, self.order);
        for c in coeffs.iter().rev() {
            acc = acc.mul(&h)?;
            if !c.is_zero() {
                acc = acc.add(&Self::constant(self.arity, self.order, c.clone()))?;
            }
        }
        Ok(acc)
    }

    /// 1/s. The constant term must be nonzero.
    pub fn reciprocal(&self) -> Result<Self> {
        let c = self.constant_term();
        if c.is_zero() {
            return Err(Error::ZeroConstantTerm);
        }
        // 1/(c + h) = (1/c) Σ (-h/c)^j
        let inv = c.recip();
        let mut coeffs = Vec::with_capacity(self.order + 1);
        let mut cur = inv.clone();
        for _ in 0..=self.order {
            coeffs.push(cur.clone());
            cur = -cur * &inv;
        }
        self.compose_coeffs(&c, &coeffs)
    }

    /// √s. The constant term must be positive and a rational square, or the
    /// output would leave the rationals.
    pub fn sqrt(&self) -> Result<Self> {
        let c = self.constant_term();
        if !c.is_positive() {
            return Err(Error::InadmissibleBase {
                op: "sqrt".into(),
                reason: "constant term is not positive".into(),
            });
        }
        let Some(r) = exact_sqrt(&c) else {
            return Err(Error::InadmissibleBase {
                op: "sqrt".into(),
                reason: "constant term is not a rational square".into(),
            });
        };
        // √(c+h) = r Σ binom(1/2, j) (h/c)^j
        let half = Rational::new(1.into(), 2.into());
        let inv_c = c.recip();
        let mut coeffs = Vec::with_capacity(self.order + 1);
        let mut binom = Rational::one();
        let mut scale = r.clone();
        for j in 0..=self.order {
            coeffs.push(&binom * &scale);
            binom = binom * (&half - rat_i64(j as i64)) / rat_i64(j as i64 + 1);
            scale *= &inv_c;
        }
        self.compose_coeffs(&c, &coeffs)
    }

    /// exp(s). Exactness restricts the constant term to zero.
    pub fn exp(&self) -> Result<Self> {
        let c = self.constant_term();
        if !c.is_zero() {
            return Err(Error::InadmissibleBase {
                op: "exp".into(),
                reason: "constant term must be zero for an exact value".into(),
            });
        }
        let coeffs: Vec<Rational> = (0..=self.order).map(|j| factorial(j).recip()).collect();
        self.compose_coeffs(&Rational::zero(), &coeffs)
    }

    /// log(s). Exactness restricts the constant term to one.
    pub fn log(&self) -> Result<Self> {
        let c = self.constant_term();
        if !c.is_positive() {
            return Err(Error::InadmissibleBase {
                op: "log".into(),
                reason: "constant term is not positive".into(),
            });
        }
        if !c.is_one() {
            return Err(Error::InadmissibleBase {
                op: "log".into(),
                reason: "constant term must be one for an exact value".into(),
            });
        }
        // log(1+h) = Σ_{j≥1} (-1)^{j+1} h^j / j
        let mut coeffs = vec![Rational::zero()];
        for j in 1..=self.order {
            let sign = if j % 2 == 1 { 1 } else { -1 };
            coeffs.push(Rational::new(sign.into(), j.into()));
        }
        self.compose_coeffs(&c, &coeffs)
    }

    /// Full composition: substitutes `args[i-1]` for variable `i`. Every
    /// argument must share one arity and have zero constant term, so the
    /// germ stays based at the origin.
    pub fn substitute(&self, args: &[TruncatedSeries]) -> Result<Self> {
        if args.len() != self.arity {
            return Err(Error::ArityMismatch(args.len(), self.arity));
        }
        let (out_arity, mut order) = match args.first() {
            Some(a) => (a.arity(), a.order()),
            None => (0, self.order),
        };
        for a in args {
            if a.arity() != out_arity {
                return Err(Error::ArityMismatch(a.arity(), out_arity));
            }
            if !a.constant_term().is_zero() {
                return Err(Error::InvalidInput(
                    "substitution argument has nonzero constant term".into(),
                ));
            }
            order = order.min(a.order());
        }
        order = order.min(self.order);
        let mut out = TruncatedSeries::zero(out_arity, order);
        for (k, v) in self.terms.iter() {
            let mut mono = TruncatedSeries::constant(out_arity, order, v.clone());
            for (pos, &e) in k.0.iter().enumerate() {
                for _ in 0..e {
                    mono = mono.mul(&args[pos])?;
                    if mono.is_zero() {
                        break;
                    }
                }
            }
            out = out.add(&mono)?;
        }
        Ok(out)
    }

    /// Exact evaluation of the underlying polynomial at a rational point.
    pub fn eval_point(&self, point: &[Rational]) -> Result<Rational> {
        if point.len() != self.arity {
            return Err(Error::ArityMismatch(point.len(), self.arity));
        }
        let mut acc = Rational::zero();
        for (k, v) in self.terms.iter() {
            let mut term = v.clone();
            for (pos, &e) in k.0.iter().enumerate() {
                for _ in 0..e {
                    term *= &point[pos];
                }
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Taylor coefficient → derivative value at 0: `∂^I s(0) = I!·coeff(I)`.
    pub fn derivative_at_zero(&self, idx: &MultiIndex) -> Rational {
        self.coeff(idx) * idx.factorial()
    }
}

/// JSON form: integers as decimal strings, exponents as plain arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesJson {
    pub arity: usize,
    pub order: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub num: String,
    pub den: String,
}

impl TruncatedSeries {
    pub fn to_json(&self) -> SeriesJson {
        SeriesJson {
            arity: self.arity,
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|(k, v)| TermJson {
                    exp: k.0.clone(),
                    num: v.numer().to_string(),
                    den: v.denom().to_string(),
                })
                .collect(),
        }
    }

    /// Decode cap: orders beyond this are rejected, since several
    /// operations allocate coefficient tables of length order + 1.
    pub const MAX_JSON_ORDER: usize = 10_000;

    pub fn from_json(json: &SeriesJson) -> Result<Self> {
        if json.order > Self::MAX_JSON_ORDER {
            return Err(Error::InvalidInput(format!(
                "series order {} exceeds the decode cap {}",
                json.order,
                Self::MAX_JSON_ORDER
            )));
        }
        let mut s = TruncatedSeries::zero(json.arity, json.order);
        for t in &json.terms {
            if t.exp.len() != json.arity {
                return Err(Error::InvalidInput(format!(
                    "term exponent arity {} does not match series arity {}",
                    t.exp.len(),
                    json.arity
                )));
            }
            let q = parse_rational(&format!("{}/{}", t.num, t.den))?;
            let idx = MultiIndex(t.exp.clone());
            if idx.degree() as usize > json.order {
                return Err(Error::InvalidInput(format!(
                    "term degree {} exceeds order {}",
                    idx.degree(),
                    json.order
                )));
            }
            let acc = s.coeff(&idx) + q;
            s.set_coeff(idx, acc);
        }
        Ok(s)
    }
}

/// All multi-indices of the given arity with total degree <= max_degree,
/// in lexicographic order.
pub fn multi_indices(arity: usize, max_degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; arity];
    fn rec(pos: usize, budget: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if pos == cur.len() {
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for e in 0..=budget {
            cur[pos] = e;
            rec(pos + 1, budget - e, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, max_degree as u32, &mut cur, &mut out);
    out
}

/// sin germ at 0, as a series in one variable up to `order`.
pub fn sin_series(order: usize) -> TruncatedSeries {
    let t = TruncatedSeries::variable(1, order, 1).unwrap();
    let coeffs: Vec<Rational> = (0..=order)
        .map(|j| match j % 4 {
            1 => factorial(j).recip(),
            3 => -factorial(j).recip(),
            _ => Rational::zero(),
        })
        .collect();
    t.compose_coeffs(&Rational::zero(), &coeffs).unwrap()
}

/// cos germ at 0.
pub fn cos_series(order: usize) -> TruncatedSeries {
    let t = TruncatedSeries::variable(1, order, 1).unwrap();
    let coeffs: Vec<Rational> = (0..=order)
        .map(|j| match j % 4 {
            0 => factorial(j).recip(),
            2 => -factorial(j).recip(),
            _ => Rational::zero(),
        })
        .collect();
    t.compose_coeffs(&Rational::zero(), &coeffs).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn x(order: usize) -> TruncatedSeries {
        TruncatedSeries::variable(1, order, 1).unwrap()
    }

    fn one(order: usize) -> TruncatedSeries {
        TruncatedSeries::constant(1, order, rat(1, 1))
    }

    #[test]
    fn mul_truncates() {
        // (1+x)(1-x) = 1 - x^2
        let a = one(3).add(&x(3)).unwrap();
        let b = one(3).sub(&x(3)).unwrap();
        let p = a.mul(&b).unwrap();
        let mut expect = one(3);
        expect.set_coeff(MultiIndex(vec![2]), rat(-1, 1));
        assert_eq!(p, expect);

        // order-2 square of 1+x+x^2 is 1+2x+3x^2
        let mut s = one(2).add(&x(2)).unwrap();
        s.set_coeff(MultiIndex(vec![2]), rat(1, 1));
        let sq = s.mul(&s).unwrap();
        assert_eq!(sq.coeff(&MultiIndex(vec![0])), rat(1, 1));
        assert_eq!(sq.coeff(&MultiIndex(vec![1])), rat(2, 1));
        assert_eq!(sq.coeff(&MultiIndex(vec![2])), rat(3, 1));
    }

    #[test]
    fn add_two_variables() {
        let x1 = TruncatedSeries::variable(2, 4, 1).unwrap();
        let x2 = TruncatedSeries::variable(2, 4, 2).unwrap();
        let s = x1.add(&x2).unwrap();
        assert_eq!(s.coeff(&MultiIndex(vec![1, 0])), rat(1, 1));
        assert_eq!(s.coeff(&MultiIndex(vec![0, 1])), rat(1, 1));
    }

    #[test]
    fn reciprocal_geometric() {
        // 1/(1-x) = 1 + x + x^2 + x^3 at order 3
        let s = one(3).sub(&x(3)).unwrap();
        let r = s.reciprocal().unwrap();
        for d in 0..=3 {
            assert_eq!(r.coeff(&MultiIndex(vec![d])), rat(1, 1));
        }
        assert!(x(3).reciprocal().is_err());
    }

    #[test]
    fn sqrt_oracle() {
        // Oracle: square the output and compare with the input.
        let s = one(2).add(&x(2).scale(&rat(2, 1))).unwrap();
        let r = s.sqrt().unwrap();
        assert_eq!(r.coeff(&MultiIndex(vec![0])), rat(1, 1));
        assert_eq!(r.coeff(&MultiIndex(vec![1])), rat(1, 1));
        assert_eq!(r.coeff(&MultiIndex(vec![2])), rat(-1, 2));
        assert_eq!(r.mul(&r).unwrap(), s);

        // non-square constant term is rejected
        let bad = one(2).add(&one(2)).unwrap();
        assert!(matches!(bad.sqrt(), Err(Error::InadmissibleBase { .. })));
    }

    #[test]
    fn antiderivative_of_tan_is_log_sec() {
        // tan t = t + t^3/3 + 2 t^5/15; ∫ = t^2/2 + t^4/12 + t^6/45,
        // cross-checked below against log(1/cos t).
        let mut tan = TruncatedSeries::zero(1, 5);
        tan.set_coeff(MultiIndex(vec![1]), rat(1, 1));
        tan.set_coeff(MultiIndex(vec![3]), rat(1, 3));
        tan.set_coeff(MultiIndex(vec![5]), rat(2, 15));
        let a = tan.antiderivative(1).unwrap();
        assert_eq!(a.order(), 6);
        assert_eq!(a.coeff(&MultiIndex(vec![2])), rat(1, 2));
        assert_eq!(a.coeff(&MultiIndex(vec![4])), rat(1, 12));
        assert_eq!(a.coeff(&MultiIndex(vec![6])), rat(1, 45));
        assert!(a.constant_term().is_zero());

        // derivative undoes it
        assert_eq!(a.derivative(1).unwrap(), tan);

        // -log cos t via log∘reciprocal of the cos series
        let mlc = cos_series(6).reciprocal().unwrap().log().unwrap();
        assert_eq!(mlc, a);
    }

    #[test]
    fn derivative_examples() {
        // d/dx (x^2 y) = 2xy
        let mut s = TruncatedSeries::zero(2, 4);
        s.set_coeff(MultiIndex(vec![2, 1]), rat(1, 1));
        let d = s.derivative(1).unwrap();
        assert_eq!(d.coeff(&MultiIndex(vec![1, 1])), rat(2, 1));
        // d of constant is 0
        let c = TruncatedSeries::constant(1, 4, rat(5, 1));
        assert!(c.derivative(1).unwrap().is_zero());
        assert!(s.derivative(3).is_err());
    }

    #[test]
    fn exp_log_identities() {
        let s = one(6).add(&x(6).scale(&rat(1, 2))).unwrap();
        let l = s.log().unwrap();
        assert_eq!(l.exp().unwrap(), s);
        assert!(one(4).add(&one(4)).unwrap().log().is_err());
        assert!(x(4).add(&one(4)).unwrap().exp().is_err());
    }

    #[test]
    fn substitution_composes() {
        // u(x) = x^2, substitute x = t + t^2: (t+t^2)^2 = t^2 + 2t^3 + t^4
        let u = x(4).mul(&x(4)).unwrap();
        let mut arg = TruncatedSeries::zero(1, 4);
        arg.set_coeff(MultiIndex(vec![1]), rat(1, 1));
        arg.set_coeff(MultiIndex(vec![2]), rat(1, 1));
        let c = u.substitute(&[arg]).unwrap();
        assert_eq!(c.coeff(&MultiIndex(vec![2])), rat(1, 1));
        assert_eq!(c.coeff(&MultiIndex(vec![3])), rat(2, 1));
        assert_eq!(c.coeff(&MultiIndex(vec![4])), rat(1, 1));
    }

    #[test]
    fn json_round_trip() {
        let mut s = TruncatedSeries::zero(2, 3);
        s.set_coeff(MultiIndex(vec![1, 2]), rat(-7, 3));
        s.set_coeff(MultiIndex(vec![0, 0]), rat(4, 1));
        let j = s.to_json();
        let text = serde_json::to_string(&j).unwrap();
        let back: SeriesJson = serde_json::from_str(&text).unwrap();
        assert_eq!(TruncatedSeries::from_json(&back).unwrap(), s);
    }

    #[test]
    fn sin_cos_pythagoras() {
        let s = sin_series(8);
        let c = cos_series(8);
        let sum = s.mul(&s).unwrap().add(&c.mul(&c).unwrap()).unwrap();
        assert_eq!(sum, one(8));
    }
}

//! Exact rational scalars: arbitrary-precision, always reduced, positive
//! denominator. Backed by `num`'s `BigRational`, which maintains exactly
//! those invariants.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

/// `n` as a rational.
pub fn rat_i64(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `n/d` as a rational. Panics on `d == 0`; use only with literal inputs.
pub fn rat(n: i64, d: i64) -> Rational {
    assert!(d != 0, "rational with zero denominator");
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"-3/5"`, `"7"`, or `"  2 / 4 "` (reduced on construction).
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = |msg: &str| Error::InvalidInput(format!("bad rational `{text}`: {msg}"));
    let (num_s, den_s) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num_s.parse().map_err(|_| bad("numerator"))?;
    let den: BigInt = den_s.parse().map_err(|_| bad("denominator"))?;
    if den.is_zero() {
        return Err(bad("zero denominator"));
    }
    Ok(Rational::new(num, den))
}

/// Canonical text form: `"n"` for integers, `"n/d"` otherwise.
pub fn format_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Fraction plus a 6-significant-digit decimal, for text reports.
pub fn format_rational_decimal(q: &Rational) -> String {
    if q.is_zero() {
        return "0".to_string();
    }
    let approx = to_f64(q);
    if q.denom().is_one() {
        format!("{}", q.numer())
    } else {
        format!("{} ({:.5e})", format_rational(q), approx)
    }
}

/// Lossy float view (reports only; the core stays exact).
pub fn to_f64(q: &Rational) -> f64 {
    let num = q.numer();
    let den = q.denom();
    // Scale down in tandem so huge integers still convert.
    let bits = num.bits().max(den.bits());
    if bits <= 52 {
        let n = num.to_string().parse::<f64>().unwrap_or(f64::NAN);
        let d = den.to_string().parse::<f64>().unwrap_or(f64::NAN);
        n / d
    } else {
        let shift = bits - 52;
        let n = (num >> shift)
            .to_string()
            .parse::<f64>()
            .unwrap_or(f64::NAN);
        let d = (den >> shift)
            .to_string()
            .parse::<f64>()
            .unwrap_or(f64::NAN);
        n / d
    }
}

/// Exact square root when the argument is a perfect square of a rational.
pub fn exact_sqrt(q: &Rational) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let ns = q.numer().sqrt();
    let ds = q.denom().sqrt();
    if &(&ns * &ns) == q.numer() && &(&ds * &ds) == q.denom() {
        Some(Rational::new(ns, ds))
    } else {
        None
    }
}

/// n! as a rational.
pub fn factorial(n: usize) -> Rational {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= BigInt::from(i);
    }
    Rational::from_integer(acc)
}


/// Serde wrapper: rationals serialize as `"n/d"` strings and deserialize
/// from strings or plain JSON integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalText(pub Rational);

impl serde::Serialize for RationalText {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> serde::Deserialize<'de> for RationalText {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = RationalText;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a rational as a string like \"3/5\" or an integer")
            }
            fn visit_str<E: serde::de::Error>(
                self,
                v: &str,
            ) -> std::result::Result<RationalText, E> {
                parse_rational(v).map(RationalText).map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(
                self,
                v: i64,
            ) -> std::result::Result<RationalText, E> {
                Ok(RationalText(rat_i64(v)))
            }
            fn visit_u64<E: serde::de::Error>(
                self,
                v: u64,
            ) -> std::result::Result<RationalText, E> {
                Ok(RationalText(Rational::from_integer(v.into())))
            }
        }
        d.deserialize_any(V)
    }
}

pub fn wrap_rationals(v: &[Rational]) -> Vec<RationalText> {
    v.iter().cloned().map(RationalText).collect()
}

pub fn unwrap_rationals(v: &[RationalText]) -> Vec<Rational> {
    v.iter().map(|r| r.0.clone()).collect()
}

//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := '-'? term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' nonneg-int)?
//! base   := integer | varref | primitive '(' expr ')' | '(' expr ')'
//! varref := 'x[' int ']' | 'p[' int ']' | 'pd[' int '][' int ']'
//! ```
//!
//! Whitespace insensitive. Rational constants are written `3/5`; they come
//! out of the division fold. There are no bare identifiers: the only names
//! are the three variable classes, the primitives, and (in Monge contexts)
//! the reserved symbol `t` for the distinguished second derivative.

use num_bigint::BigInt;
use num_traits::Zero;

use super::{add, mul, neg, pow, prim, quot, Expr, Primitive, VarRef};
use crate::error::{Error, Result};
use crate::rational::Rational;

/// Index bounds against which variable references are checked, plus the
/// context switches for the Monge right-hand-side dialect.
#[derive(Debug, Clone, Copy)]
pub struct ParseContext {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// Accept the reserved symbol `t` (parsed as `pd[1][1]`).
    pub allow_t: bool,
    /// Accept `p[…]`/`pd[…][…]` references.
    pub allow_jet_vars: bool,
}

impl ParseContext {
    /// Ordinary system context: all three variable classes.
    pub fn system(n: usize, k: usize, m: usize) -> Self {
        ParseContext {
            n,
            k,
            m,
            allow_t: false,
            allow_jet_vars: true,
        }
    }

    /// Monge right-hand-side context: `x[1..n]` and `t` only. The symbol
    /// `t` stands for u_11 and is represented internally as `pd[1][1]` of
    /// the reduced first-order system (m = n, k = 1).
    pub fn monge(n: usize) -> Self {
        ParseContext {
            n,
            k: 1,
            m: n,
            allow_t: true,
            allow_jet_vars: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Int(BigInt),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Token, usize)>> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        while let Some(t) = lx.next_token()? {
            out.push(t);
        }
        Ok(out)
    }

    fn next_token(&mut self) -> Result<Option<(Token, usize)>> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos];
        let simple = |t| Ok(Some((t, start)));
        match c {
            b'+' => {
                self.pos += 1;
                simple(Token::Plus)
            }
            b'-' => {
                self.pos += 1;
                simple(Token::Minus)
            }
            b'*' => {
                self.pos += 1;
                simple(Token::Star)
            }
            b'/' => {
                self.pos += 1;
                simple(Token::Slash)
            }
            b'^' => {
                self.pos += 1;
                simple(Token::Caret)
            }
            b'(' => {
                self.pos += 1;
                simple(Token::LParen)
            }
            b')' => {
                self.pos += 1;
                simple(Token::RParen)
            }
            b'[' => {
                self.pos += 1;
                simple(Token::LBracket)
            }
            b']' => {
                self.pos += 1;
                simple(Token::RBracket)
            }
            b'0'..=b'9' => {
                let mut end = self.pos;
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                let value: BigInt = text.parse().map_err(|_| Error::Syntax {
                    pos: start,
                    msg: "unreadable integer".into(),
                })?;
                self.pos = end;
                Ok(Some((Token::Int(value), start)))
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                let mut end = self.pos;
                while end < self.src.len() && self.src[end].is_ascii_alphabetic() {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                self.pos = end;
                Ok(Some((Token::Name(text.to_string()), start)))
            }
            other => Err(Error::Syntax {
                pos: start,
                msg: format!("unexpected character `{}`", other as char),
            }),
        }
    }
}

const MAX_EXPONENT: u32 = 1 << 16;
const MAX_DEPTH: usize = 256;

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    cursor: usize,
    end_pos: usize,
    depth: usize,
    ctx: &'a ParseContext,
}

/// Parses expression text against a binding context.
pub fn parse(text: &str, ctx: &ParseContext) -> Result<Expr> {
    let tokens = Lexer::tokenize(text)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        end_pos: text.len(),
        depth: 0,
        ctx,
    };
    let e = parser.expr()?;
    if let Some((_, pos)) = parser.peek_full() {
        return Err(Error::Syntax {
            pos,
            msg: "trailing input after expression".into(),
        });
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn peek_full(&self) -> Option<(&Token, usize)> {
        self.tokens.get(self.cursor).map(|(t, p)| (t, *p))
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.cursor)
            .map(|(_, p)| *p)
            .unwrap_or(self.end_pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.cursor).map(|(t, _)| t.clone());
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        let pos = self.pos();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(Error::Syntax {
                pos,
                msg: format!("expected {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(Error::Syntax {
                pos: self.pos(),
                msg: format!("nesting deeper than {MAX_DEPTH}"),
            });
        }
        let result = self.expr_inner();
        self.depth -= 1;
        result
    }

    fn expr_inner(&mut self) -> Result<Expr> {
        let mut acc = if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            neg(self.term()?)
        } else {
            self.term()?
        };
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    // tolerate "+ -term" on input; the printer never emits it
                    let t = if matches!(self.peek(), Some(Token::Minus)) {
                        self.bump();
                        neg(self.term()?)
                    } else {
                        self.term()?
                    };
                    acc = add(acc, t);
                }
                Some(Token::Minus) => {
                    self.bump();
                    acc = add(acc, neg(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    let f = self.factor()?;
                    acc = mul(acc, f);
                }
                Some(Token::Slash) => {
                    let pos = self.pos();
                    self.bump();
                    let f = self.factor()?;
                    if matches!(&f, Expr::Const(q) if q.is_zero()) {
                        return Err(Error::Syntax {
                            pos,
                            msg: "division by the constant zero".into(),
                        });
                    }
                    acc = quot(acc, f);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            let pos = self.pos();
            match self.bump() {
                Some(Token::Int(n)) => {
                    let exp = u32::try_from(&n)
                        .ok()
                        .filter(|&e| e <= MAX_EXPONENT)
                        .ok_or(Error::Syntax {
                            pos,
                            msg: "exponent too large".into(),
                        })?;
                    Ok(pow(base, exp))
                }
                _ => Err(Error::Syntax {
                    pos,
                    msg: "expected a nonnegative integer exponent".into(),
                }),
            }
        } else {
            Ok(base)
        }
    }

    fn base(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.bump() {
            Some(Token::Int(n)) => Ok(Expr::Const(Rational::from_integer(n))),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(e)
            }
            Some(Token::Name(name)) => self.named(&name, pos),
            _ => Err(Error::Syntax {
                pos,
                msg: "expected a constant, variable, primitive, or `(`".into(),
            }),
        }
    }

    fn named(&mut self, name: &str, pos: usize) -> Result<Expr> {
        match name {
            "x" => {
                let i = self.bracket_index()?;
                self.check_var(VarRef::X(i), pos)
            }
            "p" => {
                let a = self.bracket_index()?;
                self.check_var(VarRef::P(a), pos)
            }
            "pd" => {
                let a = self.bracket_index()?;
                let l = self.bracket_index()?;
                self.check_var(VarRef::Pd(a, l), pos)
            }
            "t" if self.ctx.allow_t => Ok(Expr::Var(VarRef::Pd(1, 1))),
            other => match Primitive::by_name(other) {
                Some(pk) => {
                    self.expect(Token::LParen, "`(` after primitive name")?;
                    let arg = self.expr()?;
                    self.expect(Token::RParen, "`)`")?;
                    Ok(prim(pk, arg))
                }
                None => Err(Error::Syntax {
                    pos,
                    msg: format!("unknown name `{other}`"),
                }),
            },
        }
    }

    fn bracket_index(&mut self) -> Result<usize> {
        self.expect(Token::LBracket, "`[`")?;
        let pos = self.pos();
        let value = match self.bump() {
            Some(Token::Int(n)) => usize::try_from(&n).map_err(|_| Error::Syntax {
                pos,
                msg: "index too large".into(),
            })?,
            _ => {
                return Err(Error::Syntax {
                    pos,
                    msg: "expected an integer index".into(),
                })
            }
        };
        self.expect(Token::RBracket, "`]`")?;
        Ok(value)
    }

    fn check_var(&self, v: VarRef, pos: usize) -> Result<Expr> {
        let (ok, why) = match v {
            VarRef::X(i) => (i >= 1 && i <= self.ctx.n, format!("n = {}", self.ctx.n)),
            VarRef::P(a) => (
                self.ctx.allow_jet_vars && a >= 1 && a <= self.ctx.m,
                format!("m = {}", self.ctx.m),
            ),
            // pd[1][1] doubles as the internal spelling of `t` in Monge
            // contexts, so printed forms reparse
            VarRef::Pd(1, 1) if self.ctx.allow_t => (true, String::new()),
            VarRef::Pd(a, l) => (
                self.ctx.allow_jet_vars && a >= 1 && a <= self.ctx.m && l >= 1 && l <= self.ctx.k,
                format!("m = {}, k = {}", self.ctx.m, self.ctx.k),
            ),
        };
        if !ok {
            if !self.ctx.allow_jet_vars && !matches!(v, VarRef::X(_)) {
                return Err(Error::Syntax {
                    pos,
                    msg: format!("`{v}` is not allowed in this context"),
                });
            }
            return Err(Error::IndexOutOfRange {
                reference: v.to_string(),
                msg: why,
            });
        }
        Ok(Expr::Var(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{pd, x};
    use crate::rational::rat;

    fn ctx() -> ParseContext {
        ParseContext::system(3, 1, 3)
    }

    #[test]
    fn grammar_examples() {
        let e = parse("x[1] + 2*p[1]", &ctx()).unwrap();
        assert_eq!(e, add(x(1), mul(Expr::Const(rat(2, 1)), crate::expr::p(1))));

        let e = parse("(pd[2][1]*pd[3][1] )/ pd[1][1]", &ctx()).unwrap();
        assert_eq!(e, quot(mul(pd(2, 1), pd(3, 1)), pd(1, 1)));
    }

    #[test]
    fn index_bounds_are_checked() {
        let c = ParseContext::system(2, 1, 1);
        let err = parse("pd[1][2]", &c).unwrap_err();
        match err {
            Error::IndexOutOfRange { reference, .. } => {
                assert_eq!(reference, "pd[1][2]")
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse("x[1] + ", &ctx()) {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 7),
            other => panic!("unexpected {other:?}"),
        }
        match parse("x[1] $ 2", &ctx()) {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("1/0", &ctx()).is_err());
        assert!(parse("x[1]^(2)", &ctx()).is_err());
    }

    #[test]
    fn rational_literals_fold() {
        assert_eq!(parse("3/5", &ctx()).unwrap(), Expr::Const(rat(3, 5)));
        assert_eq!(parse("-3/5", &ctx()).unwrap(), Expr::Const(rat(-3, 5)));
        assert_eq!(parse("2^10", &ctx()).unwrap(), Expr::Const(rat(1024, 1)));
    }

    #[test]
    fn monge_context_resolves_t() {
        let c = ParseContext::monge(3);
        assert_eq!(parse("x[2]*t", &c).unwrap(), mul(x(2), pd(1, 1)));
        assert!(parse("p[1]", &c).is_err());
        assert!(parse("t", &ctx()).is_err());
    }

    #[test]
    fn whitespace_insensitive() {
        let a = parse("x[1]+2*p[2]", &ctx()).unwrap();
        let b = parse("  x[ 1 ] +  2 * p[ 2 ]  ", &ctx()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn print_parse_round_trip_on_samples() {
        let samples = [
            "x[1] + 2*p[1]",
            "pd[2][1]*pd[3][1]/pd[1][1]",
            "-pd[2][1]*pd[3][1]/pd[1][1]^2",
            "1/pd[1][1]",
            "(x[1] + x[2])^3*p[1] - 5/7",
            "exp(x[1])*cos(x[2]) - sqrt(1 + x[3])",
            "x[1] - (x[2] - x[3])",
        ];
        let c = ParseContext::system(3, 2, 3);
        for s in samples {
            let e = parse(s, &c).unwrap();
            let printed = e.print();
            let back = parse(&printed, &c).unwrap();
            assert_eq!(back, e, "round trip failed for `{s}` -> `{printed}`");
        }
    }
}

//! First-order overdetermined system declarations: dimensions, base point,
//! the right-hand sides F^A_alpha, and optional domain guards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr, ParseContext, PointEnv, VarRef};
use crate::rational::{unwrap_rationals, wrap_rationals, Rational, RationalText};

/// A system `u^A_alpha = F^A_alpha(x, u, u_Lambda)` for `A = 1..m`,
/// `alpha = k+1..n`, anchored at a base point `(x0, p0, p'0)`.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub x0: Vec<Rational>,
    pub p0: Vec<Rational>,
    /// Row A (1-based A-1), column Lambda.
    pub pprime0: Vec<Vec<Rational>>,
    /// rhs[A-1][alpha-(k+1)] = F^A_alpha.
    rhs: Vec<Vec<Expr>>,
    /// Expressions that must stay nonzero wherever the system is evaluated.
    pub guards: Vec<Expr>,
}

impl SystemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        k: usize,
        m: usize,
        x0: Vec<Rational>,
        p0: Vec<Rational>,
        pprime0: Vec<Vec<Rational>>,
        rhs: Vec<Vec<Expr>>,
        guards: Vec<Expr>,
    ) -> Result<Self> {
        if n == 0 || k == 0 || m == 0 || k >= n {
            return Err(Error::InvalidInput(format!(
                "dimensions must satisfy 1 <= k < n and m >= 1; got n={n}, k={k}, m={m}"
            )));
        }
        if x0.len() != n || p0.len() != m {
            return Err(Error::InvalidInput(
                "base point length does not match dimensions".into(),
            ));
        }
        if pprime0.len() != m || pprime0.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidInput(
                "pprime0 must be an m x k matrix".into(),
            ));
        }
        if rhs.len() != m || rhs.iter().any(|row| row.len() != n - k) {
            return Err(Error::InvalidInput(format!(
                "expected exactly m*(n-k) = {} right-hand sides",
                m * (n - k)
            )));
        }
        for row in &rhs {
            for e in row {
                e.validate_indices(n, k, m)?;
            }
        }
        for g in &guards {
            g.validate_indices(n, k, m)?;
        }
        let sys = SystemSpec {
            n,
            k,
            m,
            x0,
            p0,
            pprime0,
            rhs,
            guards,
        };
        sys.check_guards(&sys.base_point_env())?;
        Ok(sys)
    }

    /// Normal indices alpha = k+1..=n.
    pub fn normal_range(&self) -> std::ops::RangeInclusive<usize> {
        self.k + 1..=self.n
    }

    /// Tangential indices Lambda = 1..=k.
    pub fn tangential_range(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.k
    }

    /// F^A_alpha with 1-based A and absolute alpha in k+1..=n.
    pub fn rhs(&self, a: usize, alpha: usize) -> &Expr {
        &self.rhs[a - 1][alpha - self.k - 1]
    }

    pub fn base_point_env(&self) -> PointEnv {
        self.point_env(&self.x0, &self.p0, &self.pprime0)
    }

    pub fn point_env(&self, x: &[Rational], p: &[Rational], pp: &[Vec<Rational>]) -> PointEnv {
        let mut env = PointEnv::new();
        for (i, v) in x.iter().enumerate() {
            env.bind(VarRef::X(i + 1), v.clone());
        }
        for (a, v) in p.iter().enumerate() {
            env.bind(VarRef::P(a + 1), v.clone());
        }
        for (a, row) in pp.iter().enumerate() {
            for (l, v) in row.iter().enumerate() {
                env.bind(VarRef::Pd(a + 1, l + 1), v.clone());
            }
        }
        env
    }

    /// Errors unless every guard is nonzero at the point.
    pub fn check_guards(&self, env: &PointEnv) -> Result<()> {
        use num_traits::Zero;
        for g in &self.guards {
            let v = env.evaluate(g)?;
            if v.is_zero() {
                return Err(Error::GuardViolation { guard: g.print() });
            }
        }
        Ok(())
    }

    pub fn any_primitive(&self) -> bool {
        self.rhs
            .iter()
            .flatten()
            .chain(self.guards.iter())
            .any(Expr::contains_primitive)
    }
}

/// Symbolic first-derivative tables of every F^A_alpha, computed once.
#[derive(Debug, Clone)]
pub struct SystemDerivatives {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// [A-1][alpha-k-1]
    pub f: Vec<Vec<Expr>>,
    /// [A-1][alpha-k-1][i-1], i = 1..n
    pub fx: Vec<Vec<Vec<Expr>>>,
    /// [A-1][alpha-k-1][B-1]
    pub fp: Vec<Vec<Vec<Expr>>>,
    /// [A-1][alpha-k-1][B-1][Gamma-1]
    pub fpd: Vec<Vec<Vec<Vec<Expr>>>>,
}

impl SystemDerivatives {
    pub fn new(sys: &SystemSpec) -> Self {
        let (n, k, m) = (sys.n, sys.k, sys.m);
        let mut f = Vec::with_capacity(m);
        let mut fx = Vec::with_capacity(m);
        let mut fp = Vec::with_capacity(m);
        let mut fpd = Vec::with_capacity(m);
        for a in 1..=m {
            let mut fa = Vec::new();
            let mut fxa = Vec::new();
            let mut fpa = Vec::new();
            let mut fpda = Vec::new();
            for alpha in k + 1..=n {
                let e = sys.rhs(a, alpha).clone();
                fxa.push(
                    (1..=n)
                        .map(|i| e.differentiate(VarRef::X(i)))
                        .collect::<Vec<_>>(),
                );
                fpa.push(
                    (1..=m)
                        .map(|b| e.differentiate(VarRef::P(b)))
                        .collect::<Vec<_>>(),
                );
                fpda.push(
                    (1..=m)
                        .map(|b| {
                            (1..=k)
                                .map(|g| e.differentiate(VarRef::Pd(b, g)))
                                .collect::<Vec<_>>()
                        })
                        .collect::<Vec<_>>(),
                );
                fa.push(e);
            }
            f.push(fa);
            fx.push(fxa);
            fp.push(fpa);
            fpd.push(fpda);
        }
        SystemDerivatives {
            n,
            k,
            m,
            f,
            fx,
            fp,
            fpd,
        }
    }

    /// Exact values of F and its first derivatives at a point.
    pub fn eval_at(&self, env: &PointEnv) -> Result<FirstOrderJet> {
        let eval_nested = |rows: &Vec<Vec<Expr>>| -> Result<Vec<Vec<Rational>>> {
            rows.iter()
                .map(|r| r.iter().map(|e| env.evaluate(e)).collect())
                .collect()
        };
        let f = eval_nested(&self.f)?;
        let mut fx = Vec::with_capacity(self.m);
        let mut fp = Vec::with_capacity(self.m);
        let mut fpd = Vec::with_capacity(self.m);
        for a in 0..self.m {
            fx.push(
                self.fx[a]
                    .iter()
                    .map(|r| r.iter().map(|e| env.evaluate(e)).collect())
                    .collect::<Result<Vec<Vec<Rational>>>>()?,
            );
            fp.push(
                self.fp[a]
                    .iter()
                    .map(|r| r.iter().map(|e| env.evaluate(e)).collect())
                    .collect::<Result<Vec<Vec<Rational>>>>()?,
            );
            fpd.push(
                self.fpd[a]
                    .iter()
                    .map(|per_alpha| {
                        per_alpha
                            .iter()
                            .map(|r| r.iter().map(|e| env.evaluate(e)).collect())
                            .collect()
                    })
                    .collect::<Result<Vec<Vec<Vec<Rational>>>>>()?,
            );
        }
        Ok(FirstOrderJet {
            k: self.k,
            f,
            fx,
            fp,
            fpd,
        })
    }
}

/// Values of F^A_alpha and its first derivatives at one point. All outer
/// indices are zero-based; `alpha` is stored relative to k+1.
#[derive(Debug, Clone)]
pub struct FirstOrderJet {
    k: usize,
    f: Vec<Vec<Rational>>,
    fx: Vec<Vec<Vec<Rational>>>,
    fp: Vec<Vec<Vec<Rational>>>,
    fpd: Vec<Vec<Vec<Vec<Rational>>>>,
}

impl FirstOrderJet {
    /// F^A_alpha (1-based A, absolute alpha).
    pub fn f(&self, a: usize, alpha: usize) -> &Rational {
        &self.f[a - 1][alpha - self.k - 1]
    }

    /// dF^A_alpha / dx^i (absolute i in 1..=n).
    pub fn fx(&self, a: usize, alpha: usize, i: usize) -> &Rational {
        &self.fx[a - 1][alpha - self.k - 1][i - 1]
    }

    /// dF^A_alpha / dp^B.
    pub fn fp(&self, a: usize, alpha: usize, b: usize) -> &Rational {
        &self.fp[a - 1][alpha - self.k - 1][b - 1]
    }

    /// dF^A_alpha / dp^B_Gamma (Gamma in 1..=k).
    pub fn fpd(&self, a: usize, alpha: usize, b: usize, gamma: usize) -> &Rational {
        &self.fpd[a - 1][alpha - self.k - 1][b - 1][gamma - 1]
    }
}

/// JSON form of a system, mirroring the published schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpecJson {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub x0: Vec<RationalText>,
    pub p0: Vec<RationalText>,
    pub pprime0: Vec<Vec<RationalText>>,
    #[serde(rename = "F")]
    pub f: Vec<RhsEntryJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub guards: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhsEntryJson {
    #[serde(rename = "A")]
    pub a: usize,
    pub alpha: usize,
    pub expr: String,
}

impl SystemSpec {
    pub fn to_json(&self) -> SystemSpecJson {
        let mut f = Vec::new();
        for a in 1..=self.m {
            for alpha in self.normal_range() {
                f.push(RhsEntryJson {
                    a,
                    alpha,
                    expr: self.rhs(a, alpha).print(),
                });
            }
        }
        SystemSpecJson {
            n: self.n,
            k: self.k,
            m: self.m,
            x0: wrap_rationals(&self.x0),
            p0: wrap_rationals(&self.p0),
            pprime0: self.pprime0.iter().map(|r| wrap_rationals(r)).collect(),
            f,
            guards: self.guards.iter().map(Expr::print).collect(),
        }
    }

    /// Missing (A, alpha) entries default to zero; duplicates are errors.
    pub fn from_json(json: &SystemSpecJson) -> Result<Self> {
        let (n, k, m) = (json.n, json.k, json.m);
        if n == 0 || k == 0 || m == 0 || k >= n {
            return Err(Error::InvalidInput(format!(
                "dimensions must satisfy 1 <= k < n and m >= 1; got n={n}, k={k}, m={m}"
            )));
        }
        if json.x0.len() != n || json.p0.len() != m {
            return Err(Error::InvalidInput(
                "base point length does not match dimensions".into(),
            ));
        }
        if json.pprime0.len() != m || json.pprime0.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput(
                "pprime0 must be an m x k matrix".into(),
            ));
        }
        let ctx = ParseContext::system(n, k, m);
        let mut rhs = vec![vec![crate::expr::int(0); n - k]; m];
        let mut seen = vec![vec![false; n - k]; m];
        for entry in &json.f {
            if entry.a == 0 || entry.a > m || entry.alpha <= k || entry.alpha > n {
                return Err(Error::InvalidInput(format!(
                    "rhs entry (A={}, alpha={}) is out of range",
                    entry.a, entry.alpha
                )));
            }
            let (ai, oi) = (entry.a - 1, entry.alpha - k - 1);
            if seen[ai][oi] {
                return Err(Error::InvalidInput(format!(
                    "duplicate rhs entry (A={}, alpha={})",
                    entry.a, entry.alpha
                )));
            }
            seen[ai][oi] = true;
            rhs[ai][oi] = parse(&entry.expr, &ctx)?;
        }
        let guards = json
            .guards
            .iter()
            .map(|g| parse(g, &ctx))
            .collect::<Result<Vec<_>>>()?;
        SystemSpec::new(
            n,
            k,
            m,
            unwrap_rationals(&json.x0),
            unwrap_rationals(&json.p0),
            json.pprime0.iter().map(|r| unwrap_rationals(r)).collect(),
            rhs,
            guards,
        )
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let json: SystemSpecJson = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("system JSON: {e}")))?;
        SystemSpec::from_json(&json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_i64};

    /// n=2, k=1, m=1 transport system u_2 = u_1.
    pub fn transport() -> SystemSpec {
        let ctx = ParseContext::system(2, 1, 1);
        SystemSpec::new(
            2,
            1,
            1,
            vec![rat_i64(0); 2],
            vec![rat_i64(0)],
            vec![vec![rat_i64(1)]],
            vec![vec![parse("pd[1][1]", &ctx).unwrap()]],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn construction_validates_counts() {
        assert!(SystemSpec::new(
            2,
            1,
            1,
            vec![rat_i64(0)],
            vec![rat_i64(0)],
            vec![vec![rat_i64(0)]],
            vec![vec![crate::expr::int(0)]],
            vec![],
        )
        .is_err());
    }

    #[test]
    fn json_round_trip() {
        let sys = transport();
        let j = sys.to_json();
        let text = serde_json::to_string_pretty(&j).unwrap();
        let back = SystemSpec::from_json_str(&text).unwrap();
        assert_eq!(back.rhs(1, 2), sys.rhs(1, 2));
        assert_eq!(back.p0, sys.p0);
    }

    #[test]
    fn guard_violation_at_base_is_rejected() {
        let ctx = ParseContext::system(2, 1, 1);
        let err = SystemSpec::new(
            2,
            1,
            1,
            vec![rat_i64(0); 2],
            vec![rat_i64(0)],
            vec![vec![rat_i64(0)]],
            vec![vec![parse("1/pd[1][1]", &ctx).unwrap()]],
            vec![parse("pd[1][1]", &ctx).unwrap()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::GuardViolation { .. }));
    }

    #[test]
    fn derivative_tables_evaluate() {
        let sys = transport();
        let der = SystemDerivatives::new(&sys);
        let jet = der.eval_at(&sys.base_point_env()).unwrap();
        assert_eq!(*jet.f(1, 2), rat(1, 1));
        assert_eq!(*jet.fpd(1, 2, 1, 1), rat(1, 1));
        assert_eq!(*jet.fp(1, 2, 1), rat(0, 1));
    }
}

//! Compatibility analysis for overdetermined first-order systems: the
//! tensors Phi and Psi, exact sampling plus a symbolic verdict, and the
//! linear-vector-field (generalized Frobenius) specialization.

use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canon::{is_identically_zero, is_zero_germ_at, VarSlots};
use crate::error::{Error, Result};
use crate::expr::{add, mul, neg, pd, sub, Expr, PointEnv, VarRef};
use crate::rational::{rat_i64, Rational, RationalText};
use crate::system::{FirstOrderJet, SystemDerivatives, SystemSpec};

/// Phi^A_{alpha beta}: dense (m, n-k, n-k) tensor, indices 1-based with
/// alpha, beta absolute in k+1..=n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiTensor {
    m: usize,
    k: usize,
    nk: usize,
    data: Vec<Rational>,
}

impl PhiTensor {
    fn idx(&self, a: usize, alpha: usize, beta: usize) -> usize {
        let (a, al, be) = (a - 1, alpha - self.k - 1, beta - self.k - 1);
        (a * self.nk + al) * self.nk + be
    }

    pub fn get(&self, a: usize, alpha: usize, beta: usize) -> &Rational {
        &self.data[self.idx(a, alpha, beta)]
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<RationalText>>> {
        (1..=self.m)
            .map(|a| {
                (self.k + 1..=self.k + self.nk)
                    .map(|al| {
                        (self.k + 1..=self.k + self.nk)
                            .map(|be| RationalText(self.get(a, al, be).clone()))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }
}

/// Psi^{A Gamma Lambda}_{alpha beta C}: dense (m, k, k, n-k, n-k, m).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PsiTensor {
    m: usize,
    k: usize,
    nk: usize,
    data: Vec<Rational>,
}

impl PsiTensor {
    #[allow(clippy::too_many_arguments)]
    fn idx(
        &self,
        a: usize,
        gamma: usize,
        lambda: usize,
        alpha: usize,
        beta: usize,
        c: usize,
    ) -> usize {
        let (a, g, l) = (a - 1, gamma - 1, lambda - 1);
        let (al, be, c) = (alpha - self.k - 1, beta - self.k - 1, c - 1);
        ((((a * self.k + g) * self.k + l) * self.nk + al) * self.nk + be) * self.m + c
    }

    pub fn get(
        &self,
        a: usize,
        gamma: usize,
        lambda: usize,
        alpha: usize,
        beta: usize,
        c: usize,
    ) -> &Rational {
        &self.data[self.idx(a, gamma, lambda, alpha, beta, c)]
    }

    /// Nested [A][Gamma][Lambda][alpha][beta][C] view for serialization.
    pub fn to_nested(&self) -> PsiNested {
        (1..=self.m)
            .map(|a| {
                (1..=self.k)
                    .map(|g| {
                        (1..=self.k)
                            .map(|l| {
                                (self.k + 1..=self.k + self.nk)
                                    .map(|al| {
                                        (self.k + 1..=self.k + self.nk)
                                            .map(|be| {
                                                (1..=self.m)
                                                    .map(|c| {
                                                        RationalText(
                                                            self.get(a, g, l, al, be, c).clone(),
                                                        )
                                                    })
                                                    .collect()
                                            })
                                            .collect()
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }
}

pub type PsiNested = Vec<Vec<Vec<Vec<Vec<Vec<RationalText>>>>>>;

/// One evaluation point (x, p, p').
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: Vec<RationalText>,
    pub p: Vec<RationalText>,
    pub pprime: Vec<Vec<RationalText>>,
}

impl SamplePoint {
    pub fn new(x: &[Rational], p: &[Rational], pp: &[Vec<Rational>]) -> Self {
        SamplePoint {
            x: crate::rational::wrap_rationals(x),
            p: crate::rational::wrap_rationals(p),
            pprime: pp
                .iter()
                .map(|r| crate::rational::wrap_rationals(r))
                .collect(),
        }
    }

    pub fn x_values(&self) -> Vec<Rational> {
        crate::rational::unwrap_rationals(&self.x)
    }

    pub fn p_values(&self) -> Vec<Rational> {
        crate::rational::unwrap_rationals(&self.p)
    }

    pub fn pprime_values(&self) -> Vec<Vec<Rational>> {
        self.pprime
            .iter()
            .map(|r| crate::rational::unwrap_rationals(r))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Phi,
    Psi,
}

/// A failed symmetry instance: the index tuple, the point it was seen at,
/// and the exact difference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymmetryWitness {
    pub condition: ConditionKind,
    /// Phi: [A, alpha, beta]. Psi: [A, Gamma, Lambda, alpha, beta, C].
    pub indices: Vec<usize>,
    pub point_index: usize,
    pub difference: RationalText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CompatibleAtSamples,
    Violated,
}

/// Symbolic tier outcome. Rational right-hand sides admit a decision on all
/// of the domain; primitives fall back to a germ expansion at the base
/// point, which is only a germ-level verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolicVerdict {
    IdentitiesHold,
    IdentitiesFail,
    GermAtBasePointHolds,
    GermAtBasePointFails,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompatReport {
    pub seed: u64,
    pub points: Vec<SamplePoint>,
    /// Phi tensors per point, as nested arrays [A][alpha][beta].
    pub phi: Vec<Vec<Vec<Vec<RationalText>>>>,
    /// Psi tensors per point, [A][Gamma][Lambda][alpha][beta][C].
    pub psi: Vec<PsiNested>,
    pub witnesses: Vec<AsymmetryWitness>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbolic: Option<SymbolicVerdict>,
}

impl CompatReport {
    pub fn compatible(&self) -> bool {
        matches!(self.verdict, Verdict::CompatibleAtSamples)
    }

    pub fn symbolic_compatible(&self) -> Option<bool> {
        self.symbolic.map(|s| {
            matches!(
                s,
                SymbolicVerdict::IdentitiesHold | SymbolicVerdict::GermAtBasePointHolds
            )
        })
    }
}

fn phi_from_jet(sys: &SystemSpec, jet: &FirstOrderJet, pp: &[Vec<Rational>]) -> PhiTensor {
    let (m, k, nk) = (sys.m, sys.k, sys.n - sys.k);
    let mut data = Vec::with_capacity(m * nk * nk);
    for a in 1..=m {
        for alpha in sys.normal_range() {
            for beta in sys.normal_range() {
                let mut acc = jet.fx(a, alpha, beta).clone();
                for b in 1..=m {
                    acc += jet.fp(a, alpha, b) * jet.f(b, beta);
                }
                for gamma in sys.tangential_range() {
                    for b in 1..=m {
                        let mut inner = jet.fx(b, beta, gamma).clone();
                        for c in 1..=m {
                            inner += jet.fp(b, beta, c) * &pp[c - 1][gamma - 1];
                        }
                        acc += jet.fpd(a, alpha, b, gamma) * inner;
                    }
                }
                data.push(acc);
            }
        }
    }
    PhiTensor { m, k, nk, data }
}

fn psi_from_jet(sys: &SystemSpec, jet: &FirstOrderJet) -> PsiTensor {
    let (m, k, nk) = (sys.m, sys.k, sys.n - sys.k);
    let mut data = Vec::with_capacity(m * k * k * nk * nk * m);
    for a in 1..=m {
        for gamma in 1..=k {
            for lambda in 1..=k {
                for alpha in sys.normal_range() {
                    for beta in sys.normal_range() {
                        for c in 1..=m {
                            let mut acc = Rational::zero();
                            for b in 1..=m {
                                acc += jet.fpd(a, alpha, b, gamma) * jet.fpd(b, beta, c, lambda);
                                acc += jet.fpd(a, alpha, b, lambda) * jet.fpd(b, beta, c, gamma);
                            }
                            data.push(acc);
                        }
                    }
                }
            }
        }
    }
    let psi = PsiTensor { m, k, nk, data };
    // symmetric under the simultaneous Gamma <-> Lambda swap by construction
    for a in 1..=m {
        for g in 1..=k {
            for l in 1..=k {
                for alpha in sys.normal_range() {
                    for beta in sys.normal_range() {
                        for c in 1..=m {
                            assert_eq!(
                                psi.get(a, g, l, alpha, beta, c),
                                psi.get(a, l, g, alpha, beta, c)
                            );
                        }
                    }
                }
            }
        }
    }
    psi
}

/// Exact values of the compatibility tensors at one point.
pub fn phi_psi(
    sys: &SystemSpec,
    x: &[Rational],
    p: &[Rational],
    pp: &[Vec<Rational>],
) -> Result<(PhiTensor, PsiTensor)> {
    let der = SystemDerivatives::new(sys);
    phi_psi_with(sys, &der, x, p, pp)
}

/// Same as [`phi_psi`] with precomputed derivative tables.
pub fn phi_psi_with(
    sys: &SystemSpec,
    der: &SystemDerivatives,
    x: &[Rational],
    p: &[Rational],
    pp: &[Vec<Rational>],
) -> Result<(PhiTensor, PsiTensor)> {
    let env = sys.point_env(x, p, pp);
    sys.check_guards(&env)?;
    let jet = der.eval_at(&env)?;
    Ok((phi_from_jet(sys, &jet, pp), psi_from_jet(sys, &jet)))
}

/// Witnesses of Phi/Psi symmetry failure at one evaluated point.
pub fn witnesses_at(
    sys: &SystemSpec,
    phi: &PhiTensor,
    psi: &PsiTensor,
    point_index: usize,
) -> Vec<AsymmetryWitness> {
    let mut out = Vec::new();
    for a in 1..=sys.m {
        for alpha in sys.normal_range() {
            for beta in alpha + 1..=sys.n {
                let d = phi.get(a, alpha, beta) - phi.get(a, beta, alpha);
                if !d.is_zero() {
                    out.push(AsymmetryWitness {
                        condition: ConditionKind::Phi,
                        indices: vec![a, alpha, beta],
                        point_index,
                        difference: RationalText(d),
                    });
                }
            }
        }
    }
    for a in 1..=sys.m {
        for gamma in 1..=sys.k {
            for lambda in 1..=sys.k {
                for alpha in sys.normal_range() {
                    for beta in alpha + 1..=sys.n {
                        for c in 1..=sys.m {
                            let d = psi.get(a, gamma, lambda, alpha, beta, c)
                                - psi.get(a, gamma, lambda, beta, alpha, c);
                            if !d.is_zero() {
                                out.push(AsymmetryWitness {
                                    condition: ConditionKind::Psi,
                                    indices: vec![a, gamma, lambda, alpha, beta, c],
                                    point_index,
                                    difference: RationalText(d),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// True iff both compatibility conditions hold exactly at the given point.
pub fn compatible_at_point(
    sys: &SystemSpec,
    der: &SystemDerivatives,
    x: &[Rational],
    p: &[Rational],
    pp: &[Vec<Rational>],
) -> Result<bool> {
    let (phi, psi) = phi_psi_with(sys, der, x, p, pp)?;
    Ok(witnesses_at(sys, &phi, &psi, 0).is_empty())
}

/// Symbolic Phi^A_{alpha beta} as an expression in the jet variables.
pub fn phi_expr(der: &SystemDerivatives, a: usize, alpha: usize, beta: usize) -> Expr {
    let k = der.k;
    let (ai, al) = (a - 1, alpha - k - 1);
    let mut acc = der.fx[ai][al][beta - 1].clone();
    for b in 1..=der.m {
        acc = add(
            acc,
            mul(
                der.fp[ai][al][b - 1].clone(),
                der.f[b - 1][beta - k - 1].clone(),
            ),
        );
    }
    for gamma in 1..=k {
        for b in 1..=der.m {
            let mut inner = der.fx[b - 1][beta - k - 1][gamma - 1].clone();
            for c in 1..=der.m {
                inner = add(
                    inner,
                    mul(der.fp[b - 1][beta - k - 1][c - 1].clone(), pd(c, gamma)),
                );
            }
            acc = add(acc, mul(der.fpd[ai][al][b - 1][gamma - 1].clone(), inner));
        }
    }
    acc
}

/// Symbolic Psi^{A Gamma Lambda}_{alpha beta C}.
pub fn psi_expr(
    der: &SystemDerivatives,
    a: usize,
    gamma: usize,
    lambda: usize,
    alpha: usize,
    beta: usize,
    c: usize,
) -> Expr {
    let k = der.k;
    let mut acc = crate::expr::int(0);
    for b in 1..=der.m {
        acc = add(
            acc,
            mul(
                der.fpd[a - 1][alpha - k - 1][b - 1][gamma - 1].clone(),
                der.fpd[b - 1][beta - k - 1][c - 1][lambda - 1].clone(),
            ),
        );
        acc = add(
            acc,
            mul(
                der.fpd[a - 1][alpha - k - 1][b - 1][lambda - 1].clone(),
                der.fpd[b - 1][beta - k - 1][c - 1][gamma - 1].clone(),
            ),
        );
    }
    acc
}

/// All symmetry-difference expressions for the two compatibility
/// conditions.
fn difference_exprs(sys: &SystemSpec, der: &SystemDerivatives) -> Vec<Expr> {
    let mut out = Vec::new();
    for a in 1..=sys.m {
        for alpha in sys.normal_range() {
            for beta in alpha + 1..=sys.n {
                out.push(sub(
                    phi_expr(der, a, alpha, beta),
                    phi_expr(der, a, beta, alpha),
                ));
            }
        }
    }
    for a in 1..=sys.m {
        for gamma in 1..=sys.k {
            for lambda in gamma..=sys.k {
                for alpha in sys.normal_range() {
                    for beta in alpha + 1..=sys.n {
                        for c in 1..=sys.m {
                            out.push(sub(
                                psi_expr(der, a, gamma, lambda, alpha, beta, c),
                                psi_expr(der, a, gamma, lambda, beta, alpha, c),
                            ));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Draws a small random rational offset: numerator in [-2, 2], denominator
/// in [1, 3].
fn small_offset(rng: &mut ChaCha8Rng) -> Rational {
    let num = rng.gen_range(-2i64..=2);
    let den = rng.gen_range(1i64..=3);
    Rational::new(num.into(), den.into())
}

const SAMPLE_RETRIES: usize = 200;

/// A guard-satisfying pseudorandom point near the base point.
pub fn sample_point(sys: &SystemSpec, rng: &mut ChaCha8Rng) -> Result<SamplePoint> {
    for _ in 0..SAMPLE_RETRIES {
        let x: Vec<Rational> = sys.x0.iter().map(|v| v + small_offset(rng)).collect();
        let p: Vec<Rational> = sys.p0.iter().map(|v| v + small_offset(rng)).collect();
        let pp: Vec<Vec<Rational>> = sys
            .pprime0
            .iter()
            .map(|row| row.iter().map(|v| v + small_offset(rng)).collect())
            .collect();
        let env = sys.point_env(&x, &p, &pp);
        if sys.check_guards(&env).is_ok() {
            return Ok(SamplePoint::new(&x, &p, &pp));
        }
    }
    Err(Error::SamplingExhausted {
        retries: SAMPLE_RETRIES,
    })
}

/// Decides the compatibility conditions: evaluates the tensors at the base point
/// plus `samples - 1` pseudorandom guard-satisfying points, recording every
/// asymmetry, and additionally runs the symbolic tier (exact identity test
/// for rational right-hand sides; germ expansion of order `germ_order` at
/// the base point when primitives are present).
pub fn check_compatibility(
    sys: &SystemSpec,
    samples: usize,
    seed: u64,
    germ_order: usize,
) -> Result<CompatReport> {
    if samples < 1 {
        return Err(Error::InvalidInput("samples must be >= 1".into()));
    }
    let der = SystemDerivatives::new(sys);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut points = vec![SamplePoint::new(&sys.x0, &sys.p0, &sys.pprime0)];
    for _ in 1..samples {
        points.push(sample_point(sys, &mut rng)?);
    }

    let mut phi_out = Vec::with_capacity(points.len());
    let mut psi_out = Vec::with_capacity(points.len());
    let mut witnesses = Vec::new();
    for (idx, pt) in points.iter().enumerate() {
        let (phi, psi) = phi_psi_with(
            sys,
            &der,
            &pt.x_values(),
            &pt.p_values(),
            &pt.pprime_values(),
        )?;
        witnesses.extend(witnesses_at(sys, &phi, &psi, idx));
        phi_out.push(phi.to_nested());
        psi_out.push(psi.to_nested());
    }

    let slots = VarSlots {
        n: sys.n,
        k: sys.k,
        m: sys.m,
    };
    let diffs = difference_exprs(sys, &der);
    let symbolic = if sys.any_primitive() {
        let base = sys.base_point_env();
        let mut holds = true;
        for d in &diffs {
            if !is_zero_germ_at(d, &slots, &base, germ_order)? {
                holds = false;
                break;
            }
        }
        Some(if holds {
            SymbolicVerdict::GermAtBasePointHolds
        } else {
            SymbolicVerdict::GermAtBasePointFails
        })
    } else {
        let mut holds = true;
        for d in &diffs {
            if !is_identically_zero(d, &slots)? {
                holds = false;
                break;
            }
        }
        Some(if holds {
            SymbolicVerdict::IdentitiesHold
        } else {
            SymbolicVerdict::IdentitiesFail
        })
    };

    let verdict = if witnesses.is_empty() {
        Verdict::CompatibleAtSamples
    } else {
        Verdict::Violated
    };
    Ok(CompatReport {
        seed,
        points,
        phi: phi_out,
        psi: psi_out,
        witnesses,
        verdict,
        symbolic,
    })
}

/// The Example 1.2 family: matrices of vector fields
/// `L^A_{alpha B} = delta^A_B d/dx^alpha + xi^{A Lambda}_{alpha B}(x) d/dx^Lambda`
/// with coefficients depending on x only.
#[derive(Debug, Clone)]
pub struct LinearFieldSystem {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub x0: Vec<Rational>,
    /// xi[A-1][alpha-k-1][B-1][Lambda-1]
    pub xi: Vec<Vec<Vec<Vec<Expr>>>>,
}

impl LinearFieldSystem {
    pub fn new(
        n: usize,
        k: usize,
        m: usize,
        x0: Vec<Rational>,
        xi: Vec<Vec<Vec<Vec<Expr>>>>,
    ) -> Result<Self> {
        if n == 0 || k == 0 || m == 0 || k >= n || x0.len() != n {
            return Err(Error::InvalidInput("bad linear field dimensions".into()));
        }
        let shape_ok = xi.len() == m
            && xi.iter().all(|per_alpha| {
                per_alpha.len() == n - k
                    && per_alpha
                        .iter()
                        .all(|per_b| per_b.len() == m && per_b.iter().all(|row| row.len() == k))
            });
        if !shape_ok {
            return Err(Error::InvalidInput(
                "xi must have shape m x (n-k) x m x k".into(),
            ));
        }
        for e in xi.iter().flatten().flatten().flatten() {
            e.validate_indices(n, 0, 0)?;
            if e.variables().iter().any(|v| !matches!(v, VarRef::X(_))) {
                return Err(Error::InvalidInput(
                    "xi coefficients must depend on x only".into(),
                ));
            }
        }
        Ok(LinearFieldSystem { n, k, m, x0, xi })
    }

    pub fn xi(&self, a: usize, alpha: usize, b: usize, lambda: usize) -> &Expr {
        &self.xi[a - 1][alpha - self.k - 1][b - 1][lambda - 1]
    }

    /// Coefficient vector of the field L^A_{alpha B} over d/dx^i, i = 1..n.
    fn field_coeffs(&self, a: usize, alpha: usize, b: usize) -> Vec<Expr> {
        let mut v = vec![crate::expr::int(0); self.n];
        for lambda in 1..=self.k {
            v[lambda - 1] = self.xi(a, alpha, b, lambda).clone();
        }
        if a == b {
            v[alpha - 1] = crate::expr::int(1);
        }
        v
    }

    /// Rewrites `L_alpha u = 0` in the explicit first-order form:
    /// `u^A_alpha = -sum_{B,Lambda} xi^{A Lambda}_{alpha B}(x) u^B_Lambda`.
    pub fn to_system(&self) -> Result<SystemSpec> {
        let mut rhs = Vec::with_capacity(self.m);
        for a in 1..=self.m {
            let mut row = Vec::with_capacity(self.n - self.k);
            for alpha in self.k + 1..=self.n {
                let mut acc = crate::expr::int(0);
                for b in 1..=self.m {
                    for lambda in 1..=self.k {
                        acc = add(
                            acc,
                            mul(self.xi(a, alpha, b, lambda).clone(), pd(b, lambda)),
                        );
                    }
                }
                row.push(neg(acc));
            }
            rhs.push(row);
        }
        SystemSpec::new(
            self.n,
            self.k,
            self.m,
            self.x0.clone(),
            vec![rat_i64(0); self.m],
            vec![vec![rat_i64(0); self.k]; self.m],
            rhs,
            vec![],
        )
    }

    /// Expands the operator commutators `[L_alpha, L_beta]` symbolically and
    /// tests every coefficient (second and first order) for zero.
    pub fn bracket_check(&self) -> Result<bool> {
        let slots = VarSlots {
            n: self.n,
            k: self.k,
            m: self.m,
        };
        let base: Option<PointEnv> = if self
            .xi
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .any(Expr::contains_primitive)
        {
            let mut env = PointEnv::new();
            for v in slots.all_vars() {
                let q = match v {
                    VarRef::X(i) => self.x0[i - 1].clone(),
                    _ => Rational::zero(),
                };
                env.bind(v, q);
            }
            Some(env)
        } else {
            None
        };

        let zero_test = |e: &Expr| -> Result<bool> {
            match &base {
                Some(env) => is_zero_germ_at(e, &slots, env, 16),
                None => is_identically_zero(e, &slots),
            }
        };

        for alpha in self.k + 1..=self.n {
            for beta in alpha + 1..=self.n {
                for a in 1..=self.m {
                    for c in 1..=self.m {
                        // [L_alpha, L_beta]^A_C = sum_B (D^A_{alpha B} D^B_{beta C}
                        //                              - D^A_{beta B} D^B_{alpha C})
                        let mut second = vec![vec![crate::expr::int(0); self.n]; self.n];
                        let mut first = vec![crate::expr::int(0); self.n];
                        for b in 1..=self.m {
                            for (u, v, sign) in [
                                ((a, alpha, b), (b, beta, c), 1i64),
                                ((a, beta, b), (b, alpha, c), -1),
                            ] {
                                let av = self.field_coeffs(u.0, u.1, u.2);
                                let bv = self.field_coeffs(v.0, v.1, v.2);
                                for i in 0..self.n {
                                    for j in 0..self.n {
                                        // canonicalize the symmetric pair
                                        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                                        second[lo][hi] = add(
                                            second[lo][hi].clone(),
                                            mul(
                                                crate::expr::int(sign),
                                                mul(av[i].clone(), bv[j].clone()),
                                            ),
                                        );
                                    }
                                    for j in 0..self.n {
                                        first[j] = add(
                                            first[j].clone(),
                                            mul(
                                                crate::expr::int(sign),
                                                mul(
                                                    av[i].clone(),
                                                    bv[j].differentiate(VarRef::X(i + 1)),
                                                ),
                                            ),
                                        );
                                    }
                                }
                            }
                        }
                        for row in &second {
                            for e in row {
                                if !zero_test(e)? {
                                    return Ok(false);
                                }
                            }
                        }
                        for e in &first {
                            if !zero_test(e)? {
                                return Ok(false);
                            }
                        }
                    }
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, x, ParseContext};
    use crate::rational::rat;

    fn sys_from_at(
        n: usize,
        k: usize,
        m: usize,
        pp0: i64,
        f: &[(usize, usize, &str)],
    ) -> SystemSpec {
        let ctx = ParseContext::system(n, k, m);
        let mut json = crate::system::SystemSpecJson {
            n,
            k,
            m,
            x0: crate::rational::wrap_rationals(&vec![rat_i64(0); n]),
            p0: crate::rational::wrap_rationals(&vec![rat_i64(0); m]),
            pprime0: vec![crate::rational::wrap_rationals(&vec![rat_i64(pp0); k]); m],
            f: vec![],
            guards: vec![],
        };
        for (a, alpha, e) in f {
            parse(e, &ctx).unwrap();
            json.f.push(crate::system::RhsEntryJson {
                a: *a,
                alpha: *alpha,
                expr: (*e).to_string(),
            });
        }
        SystemSpec::from_json(&json).unwrap()
    }

    fn sys_from(n: usize, k: usize, m: usize, f: &[(usize, usize, &str)]) -> SystemSpec {
        sys_from_at(n, k, m, 0, f)
    }

    #[test]
    fn zero_system_has_zero_tensors() {
        let sys = sys_from(3, 1, 1, &[]);
        let (phi, psi) = phi_psi(
            &sys,
            &vec![rat_i64(0); 3],
            &[rat_i64(0)],
            &[vec![rat_i64(0)]],
        )
        .unwrap();
        for alpha in 2..=3 {
            for beta in 2..=3 {
                assert!(phi.get(1, alpha, beta).is_zero());
                assert!(psi.get(1, 1, 1, alpha, beta, 1).is_zero());
            }
        }
    }

    #[test]
    fn twisted_transport_is_asymmetric() {
        // F_2 = -x[3]*pd[1][1], F_3 = 0: Phi^1_23 = -p'_1, Phi^1_32 = 0.
        let sys = sys_from_at(3, 1, 1, 1, &[(1, 2, "-x[3]*pd[1][1]")]);
        let (phi, _) = phi_psi(
            &sys,
            &vec![rat_i64(0); 3],
            &[rat_i64(0)],
            &[vec![rat_i64(1)]],
        )
        .unwrap();
        assert_eq!(*phi.get(1, 2, 3), rat(-1, 1));
        assert_eq!(*phi.get(1, 3, 2), rat(0, 1));

        let report = check_compatibility(&sys, 4, 0, 16).unwrap();
        assert_eq!(report.verdict, Verdict::Violated);
        assert_eq!(report.symbolic, Some(SymbolicVerdict::IdentitiesFail));
        let w = report
            .witnesses
            .iter()
            .find(|w| w.point_index == 0)
            .unwrap();
        assert_eq!(w.indices, vec![1, 2, 3]);
    }

    #[test]
    fn integrable_twisted_transport_is_compatible() {
        // F_2 = -x[2]*pd[1][1], F_3 = 0: commutator oracle says compatible.
        let sys = sys_from(3, 1, 1, &[(1, 2, "-x[2]*pd[1][1]")]);
        let report = check_compatibility(&sys, 4, 0, 16).unwrap();
        assert_eq!(report.verdict, Verdict::CompatibleAtSamples);
        assert_eq!(report.symbolic, Some(SymbolicVerdict::IdentitiesHold));
    }

    /// The reduced rank-one system (f = 0): F^1_alpha = pd[alpha][1],
    /// F^beta_alpha = pd[beta][1]*pd[alpha][1]/pd[1][1], m = n, k = 1.
    pub fn reduced_rank_one(n: usize, pp: &[i64]) -> SystemSpec {
        let ctx = ParseContext::system(n, 1, n);
        let mut f = vec![];
        for alpha in 2..=n {
            f.push(crate::system::RhsEntryJson {
                a: 1,
                alpha,
                expr: format!("pd[{alpha}][1]"),
            });
            for beta in 2..=n {
                f.push(crate::system::RhsEntryJson {
                    a: beta,
                    alpha,
                    expr: format!("pd[{beta}][1]*pd[{alpha}][1]/pd[1][1]"),
                });
            }
        }
        for entry in &f {
            parse(&entry.expr, &ctx).unwrap();
        }
        let json = crate::system::SystemSpecJson {
            n,
            k: 1,
            m: n,
            x0: crate::rational::wrap_rationals(&vec![rat_i64(0); n]),
            p0: crate::rational::wrap_rationals(&vec![rat_i64(0); n]),
            pprime0: pp
                .iter()
                .map(|&v| crate::rational::wrap_rationals(&[rat_i64(v)]))
                .collect(),
            f,
            guards: vec!["pd[1][1]".to_string()],
        };
        SystemSpec::from_json(&json).unwrap()
    }

    #[test]
    fn reduced_system_psi_value() {
        // Psi^{111}_{231} = -2 p^2_1 p^3_1 / (p^1_1)^2 = -12 at (1, 2, 3).
        let sys = reduced_rank_one(3, &[1, 2, 3]);
        let (_, psi) = phi_psi(
            &sys,
            &vec![rat_i64(0); 3],
            &vec![rat_i64(0); 3],
            &[vec![rat_i64(1)], vec![rat_i64(2)], vec![rat_i64(3)]],
        )
        .unwrap();
        assert_eq!(*psi.get(1, 1, 1, 2, 3, 1), rat(-12, 1));
    }

    #[test]
    fn reduced_system_is_symbolically_compatible() {
        let sys = reduced_rank_one(3, &[1, 2, 3]);
        let report = check_compatibility(&sys, 6, 1, 16).unwrap();
        assert_eq!(report.verdict, Verdict::CompatibleAtSamples);
        assert_eq!(report.symbolic, Some(SymbolicVerdict::IdentitiesHold));
    }

    fn lf_with_xi(e: Expr) -> LinearFieldSystem {
        // m = 1, n = 3, k = 1: xi^{1,1}_{2,1} = e, xi^{1,1}_{3,1} = 0
        LinearFieldSystem::new(
            3,
            1,
            1,
            vec![rat_i64(0); 3],
            vec![vec![vec![vec![e]], vec![vec![crate::expr::int(0)]]]],
        )
        .unwrap()
    }

    #[test]
    fn frobenius_equivalence_on_examples() {
        // xi = 0: L_alpha = d_alpha, bracket holds, system compatible.
        let trivial = lf_with_xi(crate::expr::int(0));
        assert!(trivial.bracket_check().unwrap());
        let sys = trivial.to_system().unwrap();
        let report = check_compatibility(&sys, 3, 0, 16).unwrap();
        assert_eq!(report.symbolic, Some(SymbolicVerdict::IdentitiesHold));

        // xi^1_2 = x[3]: bracket fails and the system is violated.
        let twisted = lf_with_xi(x(3));
        assert!(!twisted.bracket_check().unwrap());
        let sys = twisted.to_system().unwrap();
        let report = check_compatibility(&sys, 4, 0, 16).unwrap();
        assert_eq!(report.verdict, Verdict::Violated);
        assert_eq!(report.symbolic, Some(SymbolicVerdict::IdentitiesFail));

        // xi^1_2 = x[2]: bracket holds and the system is compatible.
        let sheared = lf_with_xi(x(2));
        assert!(sheared.bracket_check().unwrap());
        let sys = sheared.to_system().unwrap();
        let report = check_compatibility(&sys, 4, 0, 16).unwrap();
        assert_eq!(report.symbolic, Some(SymbolicVerdict::IdentitiesHold));
    }

    #[test]
    fn reports_serialize_deterministically() {
        let sys = sys_from(3, 1, 1, &[(1, 2, "-x[3]*pd[1][1]")]);
        let r1 = check_compatibility(&sys, 4, 7, 16).unwrap();
        let r2 = check_compatibility(&sys, 4, 7, 16).unwrap();
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
    }
}

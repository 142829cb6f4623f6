//! The Cauchy problem: 2-jet approximate solutions (straight and tilted),
//! non-characteristic slope tests, and the order-by-order exact power series
//! solver with residual verification.
//!
//! Everything is a germ at the origin: base points are translated away on
//! ingestion, so data series and solution series are centered at 0.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{SeriesEnv, VarRef};
use crate::linalg::{self, Matrix};
use crate::rational::{rat_i64, Rational, RationalText};
use crate::series::{multi_indices, MultiIndex, SeriesJson, TruncatedSeries};
use crate::system::{SystemDerivatives, SystemSpec};

/// Cauchy data: m series in the k tangential variables.
#[derive(Debug, Clone)]
pub struct CauchyData {
    pub series: Vec<TruncatedSeries>,
}

impl CauchyData {
    pub fn new(series: Vec<TruncatedSeries>) -> Self {
        CauchyData { series }
    }

    pub fn order(&self) -> usize {
        self.series
            .iter()
            .map(TruncatedSeries::order)
            .min()
            .unwrap_or(0)
    }

    /// Checks shape and the base condition (a^A(0), a^A_Lambda(0)) = (p0, p'0).
    pub fn validate(&self, sys: &SystemSpec) -> Result<()> {
        if self.series.len() != sys.m {
            return Err(Error::InvalidInput(format!(
                "expected {} data series, got {}",
                sys.m,
                self.series.len()
            )));
        }
        for (a, s) in self.series.iter().enumerate() {
            if s.arity() != sys.k {
                return Err(Error::ArityMismatch(s.arity(), sys.k));
            }
            if s.constant_term() != sys.p0[a] {
                return Err(Error::InvalidInput(format!(
                    "a^{}(0) != p0^{}",
                    a + 1,
                    a + 1
                )));
            }
            for l in 1..=sys.k {
                let got = s.coeff(&MultiIndex::unit(sys.k, l));
                if got != sys.pprime0[a][l - 1] {
                    return Err(Error::InvalidInput(format!(
                        "d a^{} / d x^{} (0) != (p'_0)^{}_{}",
                        a + 1,
                        l,
                        a + 1,
                        l
                    )));
                }
            }
        }
        Ok(())
    }

    /// The 2-jet of the data at the origin.
    pub fn jet2(&self, k: usize) -> DataJet2 {
        let m = self.series.len();
        let mut value = Vec::with_capacity(m);
        let mut grad = Vec::with_capacity(m);
        let mut hess = Vec::with_capacity(m);
        for s in &self.series {
            value.push(s.constant_term());
            grad.push(
                (1..=k)
                    .map(|l| s.coeff(&MultiIndex::unit(k, l)))
                    .collect::<Vec<_>>(),
            );
            let mut h = vec![vec![Rational::zero(); k]; k];
            for i in 1..=k {
                for j in 1..=k {
                    let mut idx = MultiIndex::zero(k);
                    idx.0[i - 1] += 1;
                    idx.0[j - 1] += 1;
                    h[i - 1][j - 1] = s.derivative_at_zero(&idx);
                }
            }
            hess.push(h);
        }
        DataJet2 { value, grad, hess }
    }
}

/// 2-jet of Cauchy data at the origin: values, tangential gradients, and
/// symmetric tangential Hessians.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataJet2 {
    pub value: Vec<Rational>,
    /// grad[A-1][Lambda-1]
    pub grad: Vec<Vec<Rational>>,
    /// hess[A-1][Omega-1][Gamma-1], symmetric
    pub hess: Vec<Vec<Vec<Rational>>>,
}

impl DataJet2 {
    pub fn validate_shape(&self, m: usize, k: usize) -> Result<()> {
        let ok = self.value.len() == m
            && self.grad.len() == m
            && self.grad.iter().all(|g| g.len() == k)
            && self.hess.len() == m
            && self
                .hess
                .iter()
                .all(|h| h.len() == k && h.iter().all(|r| r.len() == k));
        if !ok {
            return Err(Error::InvalidInput("data jet shape mismatch".into()));
        }
        for h in &self.hess {
            for i in 0..k {
                for j in 0..k {
                    if h[i][j] != h[j][i] {
                        return Err(Error::InvalidInput("data Hessian is not symmetric".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_base(&self, sys: &SystemSpec) -> Result<()> {
        self.validate_shape(sys.m, sys.k)?;
        if self.value != sys.p0 || self.grad != sys.pprime0 {
            return Err(Error::InvalidInput(
                "data jet does not match the base point constraint".into(),
            ));
        }
        Ok(())
    }
}

/// Full 2-jet of a candidate solution at the base point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Jet2 {
    pub n: usize,
    pub m: usize,
    pub value: Vec<Rational>,
    /// grad[A-1][i-1], i = 1..n
    pub grad: Vec<Vec<Rational>>,
    /// hess[A-1][i-1][j-1], symmetric
    pub hess: Vec<Vec<Vec<Rational>>>,
}

/// Slope matrix c^alpha_Lambda of a tilted initial plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slope(pub Vec<Vec<Rational>>);

impl Slope {
    pub fn zero(n: usize, k: usize) -> Self {
        Slope(vec![vec![Rational::zero(); k]; n - k])
    }

    pub fn validate_shape(&self, n: usize, k: usize) -> Result<()> {
        if self.0.len() != n - k || self.0.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput(
                "slope must be an (n-k) x k matrix".into(),
            ));
        }
        Ok(())
    }

    /// c^alpha_Lambda with absolute alpha in k+1..=n and Lambda in 1..=k.
    pub fn get(&self, k: usize, alpha: usize, lambda: usize) -> &Rational {
        &self.0[alpha - k - 1][lambda - 1]
    }
}

/// The unique approximate-solution 2-jet for the given data, or the
/// asymmetry witness that obstructs it.
pub fn approximate_jet(sys: &SystemSpec, data: &DataJet2) -> Result<Jet2> {
    data.check_base(sys)?;
    let env = sys.base_point_env();
    sys.check_guards(&env)?;
    let der = SystemDerivatives::new(sys);
    let jet = der.eval_at(&env)?;

    let (n, k, m) = (sys.n, sys.k, sys.m);
    let mut value = Vec::with_capacity(m);
    let mut grad = vec![vec![Rational::zero(); n]; m];
    let mut hess = vec![vec![vec![Rational::zero(); n]; n]; m];

    for a in 1..=m {
        value.push(data.value[a - 1].clone());
        for l in 1..=k {
            grad[a - 1][l - 1] = data.grad[a - 1][l - 1].clone();
        }
        for alpha in sys.normal_range() {
            grad[a - 1][alpha - 1] = jet.f(a, alpha).clone();
        }
        // tangential-tangential block straight from the data
        for i in 1..=k {
            for j in 1..=k {
                hess[a - 1][i - 1][j - 1] = data.hess[a - 1][i - 1][j - 1].clone();
            }
        }
        // u^A_{alpha Lambda} = F^A_{alpha Lambda} + F^A_{alpha B} a^B_Lambda
        //                      + F^{A Gamma}_{alpha B} a^B_{Gamma Lambda}
        for alpha in sys.normal_range() {
            for lambda in 1..=k {
                let mut acc = jet.fx(a, alpha, lambda).clone();
                for b in 1..=m {
                    acc += jet.fp(a, alpha, b) * &data.grad[b - 1][lambda - 1];
                    for gamma in 1..=k {
                        acc +=
                            jet.fpd(a, alpha, b, gamma) * &data.hess[b - 1][gamma - 1][lambda - 1];
                    }
                }
                hess[a - 1][alpha - 1][lambda - 1] = acc.clone();
                hess[a - 1][lambda - 1][alpha - 1] = acc;
            }
        }
    }

    // normal-normal block, computed for every ordered pair; asymmetry is the
    // compatibility obstruction and is reported, never silently symmetrized
    for a in 1..=m {
        for alpha in sys.normal_range() {
            for beta in sys.normal_range() {
                let mut acc = jet.fx(a, alpha, beta).clone();
                for b in 1..=m {
                    acc += jet.fp(a, alpha, b) * jet.f(b, beta);
                }
                for gamma in 1..=k {
                    for b in 1..=m {
                        let mut inner = jet.fx(b, beta, gamma).clone();
                        for c in 1..=m {
                            inner += jet.fp(b, beta, c) * &data.grad[c - 1][gamma - 1];
                            for omega in 1..=k {
                                inner += jet.fpd(b, beta, c, omega)
                                    * &data.hess[c - 1][omega - 1][gamma - 1];
                            }
                        }
                        acc += jet.fpd(a, alpha, b, gamma) * inner;
                    }
                }
                hess[a - 1][alpha - 1][beta - 1] = acc;
            }
        }
        for alpha in sys.normal_range() {
            for beta in alpha + 1..=n {
                let d = &hess[a - 1][alpha - 1][beta - 1] - &hess[a - 1][beta - 1][alpha - 1];
                if !d.is_zero() {
                    return Err(Error::JetAsymmetry {
                        a,
                        alpha,
                        beta,
                        witness: crate::rational::format_rational(&d),
                    });
                }
            }
        }
    }

    Ok(Jet2 {
        n,
        m,
        value,
        grad,
        hess,
    })
}

/// Finite certificate for approximate solvability *for every initial data*
/// at a point: since the jet equations are affine in the data Hessian, it
/// suffices to try the zero Hessian together with each unit Hessian.
pub fn approximately_solvable_at(
    sys: &SystemSpec,
    x: &[Rational],
    p: &[Rational],
    pp: &[Vec<Rational>],
) -> Result<bool> {
    let shifted = SystemSpec::new(
        sys.n,
        sys.k,
        sys.m,
        x.to_vec(),
        p.to_vec(),
        pp.to_vec(),
        (1..=sys.m)
            .map(|a| {
                sys.normal_range()
                    .map(|alpha| sys.rhs(a, alpha).clone())
                    .collect()
            })
            .collect(),
        sys.guards.clone(),
    )?;
    let mut hessians = vec![vec![vec![vec![Rational::zero(); sys.k]; sys.k]; sys.m]];
    for a in 0..sys.m {
        for i in 0..sys.k {
            for j in i..sys.k {
                let mut h = vec![vec![vec![Rational::zero(); sys.k]; sys.k]; sys.m];
                h[a][i][j] = rat_i64(1);
                h[a][j][i] = rat_i64(1);
                hessians.push(h);
            }
        }
    }
    for hess in hessians {
        let data = DataJet2 {
            value: p.to_vec(),
            grad: pp.to_vec(),
            hess,
        };
        match approximate_jet(&shifted, &data) {
            Ok(_) => {}
            Err(Error::JetAsymmetry { .. }) => return Ok(false),
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Builds the characteristicity matrix V and returns its invertibility and exact
/// determinant at the given point.
pub fn slope_noncharacteristic(
    sys: &SystemSpec,
    slope: &Slope,
    x: &[Rational],
    p: &[Rational],
    pp: &[Vec<Rational>],
) -> Result<(bool, Rational)> {
    slope.validate_shape(sys.n, sys.k)?;
    let env = sys.point_env(x, p, pp);
    sys.check_guards(&env)?;
    let der = SystemDerivatives::new(sys);
    let jet = der.eval_at(&env)?;

    let (k, m) = (sys.k, sys.m);
    let nk = sys.n - k;
    let dim = m * nk;
    let mut v = Matrix::zero(dim, dim);
    // rows (A, beta), columns (B, alpha):
    // V = delta^A_B delta^beta_alpha - sum_Lambda F^{A Lambda}_{alpha B} c^beta_Lambda
    for a in 1..=m {
        for beta in sys.normal_range() {
            let row = (a - 1) * nk + (beta - k - 1);
            for b in 1..=m {
                for alpha in sys.normal_range() {
                    let col = (b - 1) * nk + (alpha - k - 1);
                    let mut entry = if a == b && alpha == beta {
                        rat_i64(1)
                    } else {
                        Rational::zero()
                    };
                    for lambda in 1..=k {
                        entry -= jet.fpd(a, alpha, b, lambda) * slope.get(k, beta, lambda);
                    }
                    v[(row, col)] = entry;
                }
            }
        }
    }
    let det = linalg::determinant(&v);
    Ok((!det.is_zero(), det))
}

/// Checks the tilted data constraint.
fn check_tilted_data(
    sys: &SystemSpec,
    slope: &Slope,
    data: &DataJet2,
    f_base: &[Vec<Rational>],
) -> Result<()> {
    data.validate_shape(sys.m, sys.k)?;
    for a in 1..=sys.m {
        if data.value[a - 1] != sys.p0[a - 1] {
            return Err(Error::InvalidInput("a^A(0) != p0^A".into()));
        }
        for lambda in 1..=sys.k {
            let mut want = sys.pprime0[a - 1][lambda - 1].clone();
            for alpha in sys.normal_range() {
                want += &f_base[a - 1][alpha - sys.k - 1] * slope.get(sys.k, alpha, lambda);
            }
            if data.grad[a - 1][lambda - 1] != want {
                return Err(Error::InvalidInput(format!(
                    "a^{a}_{lambda}(0) violates the tilted data constraint"
                )));
            }
        }
    }
    Ok(())
}

/// The unique 2-jet of an approximate solution with data on the tilted plane
/// x^alpha = x0^alpha + c^alpha_Lambda (x^Lambda - x0^Lambda).
pub fn tilted_approximate_jet(sys: &SystemSpec, slope: &Slope, data: &DataJet2) -> Result<Jet2> {
    slope.validate_shape(sys.n, sys.k)?;
    let (nonchar, _) = slope_noncharacteristic(sys, slope, &sys.x0, &sys.p0, &sys.pprime0)?;
    if !nonchar {
        return Err(Error::CharacteristicSlope);
    }
    let env = sys.base_point_env();
    let der = SystemDerivatives::new(sys);
    let jet = der.eval_at(&env)?;
    let (n, k, m) = (sys.n, sys.k, sys.m);

    let f_base: Vec<Vec<Rational>> = (1..=m)
        .map(|a| sys.normal_range().map(|al| jet.f(a, al).clone()).collect())
        .collect();
    check_tilted_data(sys, slope, data, &f_base)?;

    // Unknowns: the symmetric second-derivative blocks u^A_{ij}, i <= j.
    let pair_count = n * (n + 1) / 2;
    let col = |a: usize, i: usize, j: usize| -> usize {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        // position of (lo, hi) among ordered pairs over 1..=n
        let offset = (lo - 1) * (n + 1) - (lo - 1) * lo / 2 + (hi - lo);
        (a - 1) * pair_count + offset
    };
    let cols = m * pair_count;

    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let mut rhs: Vec<Rational> = Vec::new();
    let mut blocks: Vec<String> = Vec::new();

    // (a) tangential block:
    // u_{ΛΓ} + Σ_β u_{Λβ} c^β_Γ + Σ_α u_{αΓ} c^α_Λ + Σ_{αβ} u_{αβ} c^α_Λ c^β_Γ = a_{ΛΓ}
    for a in 1..=m {
        for l in 1..=k {
            for g in l..=k {
                let mut row = vec![Rational::zero(); cols];
                row[col(a, l, g)] += rat_i64(1);
                for beta in sys.normal_range() {
                    row[col(a, l, beta)] += slope.get(k, beta, g);
                    row[col(a, beta, g)] += slope.get(k, beta, l);
                }
                for alpha in sys.normal_range() {
                    for beta in sys.normal_range() {
                        row[col(a, alpha, beta)] += slope.get(k, alpha, l) * slope.get(k, beta, g);
                    }
                }
                rows.push(row);
                rhs.push(data.hess[a - 1][l - 1][g - 1].clone());
                blocks.push(format!("tangential (A={a}, {l}{g})"));
            }
        }
    }

    // (b) mixed block: u_{αΛ} - Σ_{Γ,B} F^{AΓ}_{αB} u^B_{ΓΛ}
    //                  = F^A_{αΛ} + Σ_B F^A_{αB} (p^B_Λ)_0
    for a in 1..=m {
        for alpha in sys.normal_range() {
            for l in 1..=k {
                let mut row = vec![Rational::zero(); cols];
                row[col(a, alpha, l)] += rat_i64(1);
                for b in 1..=m {
                    for g in 1..=k {
                        row[col(b, g, l)] -= jet.fpd(a, alpha, b, g);
                    }
                }
                let mut want = jet.fx(a, alpha, l).clone();
                for b in 1..=m {
                    want += jet.fp(a, alpha, b) * &sys.pprime0[b - 1][l - 1];
                }
                rows.push(row);
                rhs.push(want);
                blocks.push(format!("mixed (A={a}, {alpha}{l})"));
            }
        }
    }

    // (c) normal block, one equation per ordered (α, β); asymmetry of the
    // right-hand side surfaces as inconsistency of the linear system
    for a in 1..=m {
        for alpha in sys.normal_range() {
            for beta in sys.normal_range() {
                let mut row = vec![Rational::zero(); cols];
                row[col(a, alpha, beta)] += rat_i64(1);
                for b in 1..=m {
                    for g in 1..=k {
                        for c in 1..=m {
                            for omega in 1..=k {
                                let coeff = jet.fpd(a, alpha, b, g) * jet.fpd(b, beta, c, omega);
                                row[col(c, omega, g)] -= coeff;
                            }
                        }
                    }
                }
                let mut want = jet.fx(a, alpha, beta).clone();
                for b in 1..=m {
                    want += jet.fp(a, alpha, b) * jet.f(b, beta);
                }
                for g in 1..=k {
                    for b in 1..=m {
                        let mut inner = jet.fx(b, beta, g).clone();
                        for c in 1..=m {
                            inner += jet.fp(b, beta, c) * &sys.pprime0[c - 1][g - 1];
                        }
                        want += jet.fpd(a, alpha, b, g) * inner;
                    }
                }
                rows.push(row);
                rhs.push(want);
                blocks.push(format!("normal (A={a}, {alpha}{beta})"));
            }
        }
    }

    let matrix = Matrix::from_rows(rows);
    let solution = match linalg::solve(&matrix, &rhs) {
        linalg::SolveOutcome::Unique(x) => x,
        linalg::SolveOutcome::Underdetermined => {
            return Err(Error::TiltedJetUnsolvable {
                kind: "underdetermined".into(),
                block: "whole system".into(),
            })
        }
        linalg::SolveOutcome::Inconsistent(r) => {
            return Err(Error::TiltedJetUnsolvable {
                kind: "inconsistent".into(),
                block: blocks[r].clone(),
            })
        }
    };

    let mut value = Vec::with_capacity(m);
    let mut grad = vec![vec![Rational::zero(); n]; m];
    let mut hess = vec![vec![vec![Rational::zero(); n]; n]; m];
    for a in 1..=m {
        value.push(sys.p0[a - 1].clone());
        for l in 1..=k {
            grad[a - 1][l - 1] = sys.pprime0[a - 1][l - 1].clone();
        }
        for alpha in sys.normal_range() {
            grad[a - 1][alpha - 1] = f_base[a - 1][alpha - k - 1].clone();
        }
        for i in 1..=n {
            for j in 1..=n {
                hess[a - 1][i - 1][j - 1] = solution[col(a, i, j)].clone();
            }
        }
    }
    Ok(Jet2 {
        n,
        m,
        value,
        grad,
        hess,
    })
}

/// A solved Cauchy problem: m series of arity n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionSeries {
    pub components: Vec<TruncatedSeries>,
    pub order: usize,
}

impl SolutionSeries {
    /// The 2-jet at the origin.
    pub fn jet2(&self, n: usize) -> Jet2 {
        let m = self.components.len();
        let mut value = Vec::with_capacity(m);
        let mut grad = Vec::with_capacity(m);
        let mut hess = Vec::with_capacity(m);
        for s in &self.components {
            value.push(s.constant_term());
            grad.push(
                (1..=n)
                    .map(|i| s.coeff(&MultiIndex::unit(n, i)))
                    .collect::<Vec<_>>(),
            );
            let mut h = vec![vec![Rational::zero(); n]; n];
            for i in 1..=n {
                for j in 1..=n {
                    let mut idx = MultiIndex::zero(n);
                    idx.0[i - 1] += 1;
                    idx.0[j - 1] += 1;
                    h[i - 1][j - 1] = s.derivative_at_zero(&idx);
                }
            }
            hess.push(h);
        }
        Jet2 {
            n,
            m,
            value,
            grad,
            hess,
        }
    }

    pub fn to_json(&self) -> Vec<SeriesJson> {
        self.components
            .iter()
            .map(TruncatedSeries::to_json)
            .collect()
    }
}

/// Builds the evaluation environment over the current partial solution.
fn composition_env(sys: &SystemSpec, u: &[TruncatedSeries], order: usize) -> Result<SeriesEnv> {
    let n = sys.n;
    let mut env = SeriesEnv::new(n, order);
    for i in 1..=n {
        let coord = TruncatedSeries::variable(n, order, i)?.add(&TruncatedSeries::constant(
            n,
            order,
            sys.x0[i - 1].clone(),
        ))?;
        env.bind(VarRef::X(i), coord)?;
    }
    for (a, ua) in u.iter().enumerate() {
        env.bind(VarRef::P(a + 1), ua.truncated(order))?;
        for l in 1..=sys.k {
            env.bind(VarRef::Pd(a + 1, l), ua.derivative(l)?.truncated(order))?;
        }
    }
    Ok(env)
}

/// Residuals of a candidate solution: the PDE residuals
/// `u^A_alpha - F^A_alpha(x, u, u_Gamma)` to order N-1 and the initial-plane
/// mismatches `u^A|_{x^alpha = 0} - a^A` to order N.
pub struct ResidualReport {
    /// pde[A-1][alpha-k-1], order N-1
    pub pde: Vec<Vec<TruncatedSeries>>,
    /// data[A-1], order N
    pub data: Vec<TruncatedSeries>,
}

impl ResidualReport {
    pub fn is_clean(&self) -> bool {
        self.pde.iter().flatten().all(TruncatedSeries::is_zero)
            && self.data.iter().all(TruncatedSeries::is_zero)
    }

    /// Highest total degree carrying a nonzero residual term, if any.
    pub fn max_nonzero_degree(&self) -> Option<u32> {
        self.pde
            .iter()
            .flatten()
            .chain(self.data.iter())
            .filter_map(|s| s.terms().map(|(k, _)| k.degree()).max())
            .max()
    }
}

pub fn residual(sys: &SystemSpec, u: &SolutionSeries, data: &CauchyData) -> Result<ResidualReport> {
    let order = u.order;
    let env = composition_env(sys, &u.components, order.saturating_sub(1))?;
    let mut pde = Vec::with_capacity(sys.m);
    for a in 1..=sys.m {
        let mut row = Vec::with_capacity(sys.n - sys.k);
        for alpha in sys.normal_range() {
            let lhs = u.components[a - 1].derivative(alpha)?;
            let rhs = env.evaluate(sys.rhs(a, alpha))?;
            row.push(lhs.truncated(order - 1).sub(&rhs)?);
        }
        pde.push(row);
    }
    // restriction to the initial plane: x^Lambda free, x^alpha = 0
    let mut args = Vec::with_capacity(sys.n);
    for l in 1..=sys.k {
        args.push(TruncatedSeries::variable(sys.k, order, l)?);
    }
    for _ in sys.normal_range() {
        args.push(TruncatedSeries::zero(sys.k, order));
    }
    let mut data_res = Vec::with_capacity(sys.m);
    for a in 0..sys.m {
        let restricted = u.components[a].substitute(&args)?;
        data_res.push(restricted.sub(&data.series[a].truncated(order))?);
    }
    Ok(ResidualReport {
        pde,
        data: data_res,
    })
}

/// Solves the Cauchy problem by exact order-by-order coefficient recursion:
/// tangential coefficients come from the data; a coefficient with normal
/// degree d is read off the equation for its smallest normal direction,
/// using only coefficients of normal degree < d. The full residual is then
/// verified, which certifies well-definedness independently of the
/// production order.
pub fn solve(sys: &SystemSpec, data: &CauchyData, order: usize) -> Result<SolutionSeries> {
    data.validate(sys)?;
    let der = SystemDerivatives::new(sys);
    if !crate::compat::compatible_at_point(sys, &der, &sys.x0, &sys.p0, &sys.pprime0)? {
        return Err(Error::IncompatibleAtBase(
            "Phi/Psi symmetry fails at (x0, p0, p'0)".into(),
        ));
    }

    let (n, k, m) = (sys.n, sys.k, sys.m);
    let mut u: Vec<TruncatedSeries> = vec![TruncatedSeries::zero(n, order); m];

    // normal degree 0: tangential coefficients straight from the data
    for (a, s) in data.series.iter().enumerate() {
        for (idx, coeff) in s.terms() {
            if idx.degree() as usize > order {
                continue;
            }
            let mut full = vec![0u32; n];
            full[..k].copy_from_slice(&idx.0);
            u[a].set_coeff(MultiIndex(full), coeff.clone());
        }
    }

    let indices = multi_indices(n, order);
    let eval_order = order.saturating_sub(1);
    for d in 1..=order {
        // evaluating F against coefficients of normal degree < d is sound:
        // the coefficients read off below only involve those
        let env = composition_env(sys, &u, eval_order)?;
        let mut rhs_series = Vec::with_capacity(m);
        for a in 1..=m {
            let mut row = Vec::with_capacity(n - k);
            for alpha in sys.normal_range() {
                row.push(env.evaluate(sys.rhs(a, alpha))?);
            }
            rhs_series.push(row);
        }
        for idx in &indices {
            let normal_degree: u32 = idx.0[k..].iter().sum();
            if normal_degree as usize != d {
                continue;
            }
            let alpha_star = (k..n).find(|&pos| idx.0[pos] > 0).unwrap() + 1;
            let mut j = idx.clone();
            j.0[alpha_star - 1] -= 1;
            let factor = rat_i64(idx.0[alpha_star - 1] as i64);
            for a in 0..m {
                let c = rhs_series[a][alpha_star - k - 1].coeff(&j) / &factor;
                u[a].set_coeff(idx.clone(), c);
            }
        }
    }

    let solution = SolutionSeries {
        components: u,
        order,
    };
    let report = residual(sys, &solution, data)?;
    if !report.is_clean() {
        let deg = report.max_nonzero_degree().unwrap_or(0);
        return Err(Error::ResidualFailure(format!(
            "solve left a nonzero residual up to degree {deg}; the system is \
             incompatible away from the base point"
        )));
    }
    Ok(solution)
}

/// JSON problem statement consumed by the CLI: data series, order, and an
/// optional slope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CauchyProblemJson {
    pub data: Vec<SeriesJson>,
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<Vec<Vec<RationalText>>>,
}

impl CauchyProblemJson {
    pub fn data_series(&self) -> Result<CauchyData> {
        Ok(CauchyData::new(
            self.data
                .iter()
                .map(TruncatedSeries::from_json)
                .collect::<Result<Vec<_>>>()?,
        ))
    }

    pub fn slope_matrix(&self) -> Option<Slope> {
        self.slope.as_ref().map(|rows| {
            Slope(
                rows.iter()
                    .map(|r| crate::rational::unwrap_rationals(r))
                    .collect(),
            )
        })
    }
}

//! Pointwise exterior-differential-system checks on the jet space
//! R^{n+m+nm}: the residual family of the generating forms evaluated on a
//! candidate integral-element basis, and exact polar-space computation.
//!
//! Coordinates are ordered (x^i, p^A, p^A_j); forms are never materialized
//! as exterior-algebra objects, only their closed-form contractions are
//! evaluated.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::cauchy::{DataJet2, Jet2, Slope};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rational::{rat_i64, Rational, RationalText};
use crate::system::{SystemDerivatives, SystemSpec};

/// A point z = (x^i, p^A, p^A_i) of the full jet space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JetPoint {
    pub x: Vec<Rational>,
    pub p: Vec<Rational>,
    /// pmat[A-1][i-1] = p^A_i, all n directions.
    pub pmat: Vec<Vec<Rational>>,
}

impl JetPoint {
    pub fn validate_shape(&self, n: usize, m: usize) -> Result<()> {
        if self.x.len() != n
            || self.p.len() != m
            || self.pmat.len() != m
            || self.pmat.iter().any(|r| r.len() != n)
        {
            return Err(Error::InvalidInput("jet point shape mismatch".into()));
        }
        Ok(())
    }

    /// Environment binding x, p, and the tangential p'-block.
    fn env(&self, sys: &SystemSpec) -> crate::expr::PointEnv {
        let pp: Vec<Vec<Rational>> = self.pmat.iter().map(|row| row[..sys.k].to_vec()).collect();
        sys.point_env(&self.x, &self.p, &pp)
    }

    /// Flat coordinates (x, p, p') of length n + m + nm.
    pub fn coords(&self, n: usize, m: usize) -> Vec<Rational> {
        let mut out = Vec::with_capacity(n + m + n * m);
        out.extend(self.x.iter().cloned());
        out.extend(self.p.iter().cloned());
        for row in &self.pmat {
            out.extend(row.iter().cloned());
        }
        out
    }
}

/// Basis of an l-dimensional candidate integral element in the normal form
/// e_a = d/dx^a + c^b_a d/dx^b + c^A_a d/dp^A + c^A_{aj} d/dp^A_j,
/// for a = 1..l and b = l+1..n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralElementBasis {
    pub l: usize,
    /// c_xb[a-1][b-l-1] = c^b_a.
    pub c_xb: Vec<Vec<Rational>>,
    /// c_p[a-1][A-1] = c^A_a.
    pub c_p: Vec<Vec<Rational>>,
    /// c_pd[a-1][A-1][j-1] = c^A_{aj}.
    pub c_pd: Vec<Vec<Vec<Rational>>>,
}

impl IntegralElementBasis {
    pub fn validate_shape(&self, n: usize, k: usize, m: usize) -> Result<()> {
        let l = self.l;
        let ok = l >= k
            && l <= n
            && self.c_xb.len() == l
            && self.c_xb.iter().all(|r| r.len() == n - l)
            && self.c_p.len() == l
            && self.c_p.iter().all(|r| r.len() == m)
            && self.c_pd.len() == l
            && self
                .c_pd
                .iter()
                .all(|per_a| per_a.len() == m && per_a.iter().all(|r| r.len() == n));
        if !ok {
            return Err(Error::InvalidInput(
                "integral element basis shape mismatch (need k <= l <= n)".into(),
            ));
        }
        Ok(())
    }

    /// The basis vector e_a as flat coordinates of length n + m + nm.
    pub fn vector(&self, n: usize, m: usize, a: usize) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); n + m + n * m];
        v[a - 1] = rat_i64(1);
        for (bi, c) in self.c_xb[a - 1].iter().enumerate() {
            v[self.l + bi] = c.clone();
        }
        for (ai, c) in self.c_p[a - 1].iter().enumerate() {
            v[n + ai] = c.clone();
        }
        for (ai, row) in self.c_pd[a - 1].iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                v[n + m + ai * n + j] = c.clone();
            }
        }
        v
    }

    /// x-component of e_a in direction i (1-based absolute).
    fn dx(&self, i: usize, a: usize) -> Rational {
        if i == a {
            rat_i64(1)
        } else if i > self.l {
            self.c_xb[a - 1][i - self.l - 1].clone()
        } else {
            Rational::zero()
        }
    }
}

/// Exact values of the residual family on (z, basis).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementResiduals {
    /// f^A_alpha = p^A_alpha - F^A_alpha, [A-1][alpha-k-1].
    pub locus: Vec<Vec<RationalText>>,
    /// g^A_a = eta^A(e_a), [A-1][a-1].
    pub eta: Vec<Vec<RationalText>>,
    /// g^A_{alpha a} = omega^A_alpha(e_a), [A-1][alpha-k-1][a-1].
    pub omega: Vec<Vec<Vec<RationalText>>>,
    /// h^A_{a a'} = Omega^A(e_a, e_{a'}), a < a', [A-1][pair index].
    pub two_form: Vec<Vec<RationalText>>,
}

impl ElementResiduals {
    pub fn all_zero(&self) -> bool {
        self.locus
            .iter()
            .flatten()
            .chain(self.eta.iter().flatten())
            .chain(self.omega.iter().flatten().flatten())
            .chain(self.two_form.iter().flatten())
            .all(|r| r.0.is_zero())
    }

    fn first_nonzero(&self) -> Option<String> {
        let scan = |name: &str, it: &mut dyn Iterator<Item = &RationalText>| -> Option<String> {
            it.enumerate().find_map(|(i, r)| {
                (!r.0.is_zero())
                    .then(|| format!("{name}[{i}] = {}", crate::rational::format_rational(&r.0)))
            })
        };
        scan("f", &mut self.locus.iter().flatten())
            .or_else(|| scan("g", &mut self.eta.iter().flatten()))
            .or_else(|| scan("g'", &mut self.omega.iter().flatten().flatten()))
            .or_else(|| scan("h", &mut self.two_form.iter().flatten()))
    }
}

/// Evaluates the residual family: the basis spans an integral element
/// through z iff every value vanishes.
pub fn element_residuals(
    sys: &SystemSpec,
    z: &JetPoint,
    basis: &IntegralElementBasis,
) -> Result<ElementResiduals> {
    let (n, k, m) = (sys.n, sys.k, sys.m);
    z.validate_shape(n, m)?;
    basis.validate_shape(n, k, m)?;
    let env = z.env(sys);
    sys.check_guards(&env)?;
    let der = SystemDerivatives::new(sys);
    let jet = der.eval_at(&env)?;
    let l = basis.l;

    let mut locus = Vec::with_capacity(m);
    for a in 1..=m {
        let row: Vec<RationalText> = sys
            .normal_range()
            .map(|alpha| RationalText(&z.pmat[a - 1][alpha - 1] - jet.f(a, alpha)))
            .collect();
        locus.push(row);
    }

    // eta^A(e_a) = c^A_a - p^A_a - sum_b p^A_b c^b_a
    let mut eta = Vec::with_capacity(m);
    for big_a in 1..=m {
        let mut row = Vec::with_capacity(l);
        for a in 1..=l {
            let mut acc = basis.c_p[a - 1][big_a - 1].clone() - &z.pmat[big_a - 1][a - 1];
            for b in l + 1..=n {
                acc -= &z.pmat[big_a - 1][b - 1] * &basis.c_xb[a - 1][b - l - 1];
            }
            row.push(RationalText(acc));
        }
        eta.push(row);
    }

    // omega^A_alpha(e_a) = c^A_{a alpha} - F^A_{alpha a} - sum_b F^A_{alpha b} c^b_a
    //                      - sum_B F^A_{alpha B} c^B_a - sum_{B,Gamma} F^{A Gamma}_{alpha B} c^B_{a Gamma}
    let mut omega = Vec::with_capacity(m);
    for big_a in 1..=m {
        let mut per_alpha = Vec::with_capacity(n - k);
        for alpha in sys.normal_range() {
            let mut row = Vec::with_capacity(l);
            for a in 1..=l {
                let mut acc =
                    basis.c_pd[a - 1][big_a - 1][alpha - 1].clone() - jet.fx(big_a, alpha, a);
                for b in l + 1..=n {
                    acc -= jet.fx(big_a, alpha, b) * &basis.c_xb[a - 1][b - l - 1];
                }
                for b in 1..=m {
                    acc -= jet.fp(big_a, alpha, b) * &basis.c_p[a - 1][b - 1];
                    for gamma in 1..=k {
                        acc -=
                            jet.fpd(big_a, alpha, b, gamma) * &basis.c_pd[a - 1][b - 1][gamma - 1];
                    }
                }
                row.push(RationalText(acc));
            }
            per_alpha.push(row);
        }
        omega.push(per_alpha);
    }

    // Omega^A(e_a, e_a') = sum_i (c^A_{a i} dx^i(e_a') - c^A_{a' i} dx^i(e_a))
    let mut two_form = Vec::with_capacity(m);
    for big_a in 1..=m {
        let mut row = Vec::new();
        for a in 1..=l {
            for a2 in a + 1..=l {
                let mut acc = Rational::zero();
                for i in 1..=n {
                    acc += &basis.c_pd[a - 1][big_a - 1][i - 1] * basis.dx(i, a2);
                    acc -= &basis.c_pd[a2 - 1][big_a - 1][i - 1] * basis.dx(i, a);
                }
                row.push(RationalText(acc));
            }
        }
        two_form.push(row);
    }

    Ok(ElementResiduals {
        locus,
        eta,
        omega,
        two_form,
    })
}

/// Polar space of an integral element: its dimension, an exact basis, and
/// (when the element sits over a non-characteristic slope) the solved
/// relations expressing the p-components through the base components.
#[derive(Debug, Clone)]
pub struct PolarSpaceResult {
    pub dim: usize,
    /// Basis vectors in flat (x, p, p') coordinates.
    pub basis: Vec<Vec<Rational>>,
    /// True when H(E) projects bijectively onto the d^j coordinates.
    pub graph_over_base: bool,
    /// relations[(A-1)][j-1] and relations[m + (A-1)n + (i-1)][j-1]:
    /// coefficients expressing d^A and d^A_i through d^j. Present only when
    /// `graph_over_base`.
    pub relations: Option<Vec<Vec<Rational>>>,
}

/// Solves the linear polar-space conditions exactly.
pub fn polar_space(
    sys: &SystemSpec,
    z: &JetPoint,
    basis: &IntegralElementBasis,
) -> Result<PolarSpaceResult> {
    let residuals = element_residuals(sys, z, basis)?;
    if !residuals.all_zero() {
        return Err(Error::NotIntegral {
            witness: residuals.first_nonzero().unwrap_or_default(),
        });
    }
    let (n, k, m) = (sys.n, sys.k, sys.m);
    let env = z.env(sys);
    let der = SystemDerivatives::new(sys);
    let jet = der.eval_at(&env)?;
    let l = basis.l;
    let dim_total = n + m + n * m;
    let slot_p = |a: usize| n + a - 1;
    let slot_pd = |a: usize, j: usize| n + m + (a - 1) * n + (j - 1);

    let mut rows: Vec<Vec<Rational>> = Vec::new();
    // eta^A(v) = d^A - sum_i p^A_i d^i
    for a in 1..=m {
        let mut row = vec![Rational::zero(); dim_total];
        row[slot_p(a)] = rat_i64(1);
        for i in 1..=n {
            row[i - 1] = -z.pmat[a - 1][i - 1].clone();
        }
        rows.push(row);
    }
    // omega^A_alpha(v) = d^A_alpha - sum_j F^A_{alpha j} d^j
    //                    - sum_B F^A_{alpha B} d^B - sum_{B,L} F^{A L}_{alpha B} d^B_L
    for a in 1..=m {
        for alpha in sys.normal_range() {
            let mut row = vec![Rational::zero(); dim_total];
            row[slot_pd(a, alpha)] = rat_i64(1);
            for j in 1..=n {
                row[j - 1] -= jet.fx(a, alpha, j);
            }
            for b in 1..=m {
                row[slot_p(b)] = row[slot_p(b)].clone() - jet.fp(a, alpha, b);
                for lambda in 1..=k {
                    row[slot_pd(b, lambda)] =
                        row[slot_pd(b, lambda)].clone() - jet.fpd(a, alpha, b, lambda);
                }
            }
            rows.push(row);
        }
    }
    // Omega^A(v, e_a) = sum_i (d^A_i dx^i(e_a) - c^A_{a i} d^i)
    for big_a in 1..=m {
        for a in 1..=l {
            let mut row = vec![Rational::zero(); dim_total];
            for i in 1..=n {
                let coeff = basis.dx(i, a);
                if !coeff.is_zero() {
                    row[slot_pd(big_a, i)] = coeff;
                }
                row[i - 1] = row[i - 1].clone() - &basis.c_pd[a - 1][big_a - 1][i - 1];
            }
            rows.push(row);
        }
    }

    let matrix = Matrix::from_rows(rows);
    let null = linalg::nullspace(&matrix);
    let dim = null.len();

    // graph test: the x-parts of the basis must span R^n
    let x_parts: Vec<Vec<Rational>> = null.iter().map(|v| v[..n].to_vec()).collect();
    let graph_over_base = dim == n && linalg::span_dimension(&x_parts) == n;

    // slope detection: the first k basis vectors project onto the
    // slope with entries c^alpha_Lambda (zero within l, c_xb beyond)
    if l == k {
        let slope = Slope(
            (k + 1..=n)
                .map(|alpha| {
                    (1..=k)
                        .map(|lambda| {
                            if alpha <= l {
                                Rational::zero()
                            } else {
                                basis.c_xb[lambda - 1][alpha - l - 1].clone()
                            }
                        })
                        .collect()
                })
                .collect(),
        );
        let pp: Vec<Vec<Rational>> = z.pmat.iter().map(|r| r[..k].to_vec()).collect();
        let (nonchar, _) = slope_noncharacteristic_at(sys, &slope, z, &pp)?;
        if nonchar && (dim != n || !graph_over_base) {
            return Err(Error::DegenerateSystem(format!(
                "polar space has dimension {dim} (expected n = {n}) over a \
                 non-characteristic slope"
            )));
        }
    }

    let relations = if graph_over_base {
        // normalize: for each j find w in H(E) with x-part e_j
        let xm = Matrix::from_rows(x_parts);
        let mut rel = vec![vec![Rational::zero(); n]; m + n * m];
        for j in 1..=n {
            let mut target = vec![Rational::zero(); n];
            target[j - 1] = rat_i64(1);
            // solve xm^T c = e_j for the combination c
            let mut t = Matrix::zero(n, dim);
            for r in 0..dim {
                for cidx in 0..n {
                    t[(cidx, r)] = xm[(r, cidx)].clone();
                }
            }
            let combo = linalg::solve_unique(&t, &target)?;
            for (r, c) in combo.iter().enumerate() {
                for dep in 0..m + n * m {
                    let v = &null[r][n + dep] * c;
                    rel[dep][j - 1] = rel[dep][j - 1].clone() + v;
                }
            }
        }
        Some(rel)
    } else {
        None
    };

    Ok(PolarSpaceResult {
        dim,
        basis: null,
        graph_over_base,
        relations,
    })
}

fn slope_noncharacteristic_at(
    sys: &SystemSpec,
    slope: &Slope,
    z: &JetPoint,
    pp: &[Vec<Rational>],
) -> Result<(bool, Rational)> {
    crate::cauchy::slope_noncharacteristic(sys, slope, &z.x, &z.p, pp)
}

/// The jet point and k-dimensional tangent element of the data jet-graph
/// at the base point.
pub fn data_jet_graph_element(
    sys: &SystemSpec,
    data: &DataJet2,
) -> Result<(JetPoint, IntegralElementBasis)> {
    data.validate_shape(sys.m, sys.k)?;
    let env = sys.base_point_env();
    sys.check_guards(&env)?;
    let der = SystemDerivatives::new(sys);
    let jet = der.eval_at(&env)?;
    let (n, k, m) = (sys.n, sys.k, sys.m);

    let mut pmat = Vec::with_capacity(m);
    for a in 1..=m {
        let mut row = vec![Rational::zero(); n];
        for lambda in 1..=k {
            row[lambda - 1] = data.grad[a - 1][lambda - 1].clone();
        }
        for alpha in sys.normal_range() {
            row[alpha - 1] = jet.f(a, alpha).clone();
        }
        pmat.push(row);
    }
    let z = JetPoint {
        x: sys.x0.clone(),
        p: data.value.clone(),
        pmat,
    };

    let mut c_p = Vec::with_capacity(k);
    let mut c_pd = Vec::with_capacity(k);
    for lambda in 1..=k {
        c_p.push(
            (1..=m)
                .map(|a| data.grad[a - 1][lambda - 1].clone())
                .collect::<Vec<_>>(),
        );
        let mut per_a = Vec::with_capacity(m);
        for a in 1..=m {
            let mut row = vec![Rational::zero(); n];
            for gamma in 1..=k {
                row[gamma - 1] = data.hess[a - 1][lambda - 1][gamma - 1].clone();
            }
            // c^A_{Lambda alpha} = F^A_{alpha Lambda} + F^A_{alpha B} a^B_Lambda
            //                      + F^{A Gamma}_{alpha B} a^B_{Gamma Lambda}
            for alpha in sys.normal_range() {
                let mut acc = jet.fx(a, alpha, lambda).clone();
                for b in 1..=m {
                    acc += jet.fp(a, alpha, b) * &data.grad[b - 1][lambda - 1];
                    for gamma in 1..=k {
                        acc +=
                            jet.fpd(a, alpha, b, gamma) * &data.hess[b - 1][gamma - 1][lambda - 1];
                    }
                }
                row[alpha - 1] = acc;
            }
            per_a.push(row);
        }
        c_pd.push(per_a);
    }
    let basis = IntegralElementBasis {
        l: k,
        c_xb: vec![vec![Rational::zero(); n - k]; k],
        c_p,
        c_pd,
    };
    Ok((z, basis))
}

/// The first `l` tangent vectors of an approximate-solution jet graph, as
/// an integral element through the jet's base point.
pub fn solution_jet_graph_element(
    sys: &SystemSpec,
    jet: &Jet2,
    l: usize,
) -> Result<(JetPoint, IntegralElementBasis)> {
    if l < sys.k || l > sys.n {
        return Err(Error::InvalidInput(format!(
            "element dimension l = {l} must satisfy k <= l <= n"
        )));
    }
    let (n, m) = (sys.n, sys.m);
    let z = JetPoint {
        x: sys.x0.clone(),
        p: jet.value.clone(),
        pmat: jet.grad.clone(),
    };
    let mut c_p = Vec::with_capacity(l);
    let mut c_pd = Vec::with_capacity(l);
    for a in 1..=l {
        c_p.push(
            (1..=m)
                .map(|big_a| jet.grad[big_a - 1][a - 1].clone())
                .collect::<Vec<_>>(),
        );
        c_pd.push(
            (1..=m)
                .map(|big_a| jet.hess[big_a - 1][a - 1].clone())
                .collect::<Vec<_>>(),
        );
    }
    Ok((
        z,
        IntegralElementBasis {
            l,
            c_xb: vec![vec![Rational::zero(); n - l]; l],
            c_p,
            c_pd,
        },
    ))
}

/// JSON element input: dimension and the normal-form coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementJson {
    pub z: Vec<RationalText>,
    pub basis: ElementBasisJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementBasisJson {
    pub l: usize,
    pub c_ab: Vec<Vec<RationalText>>,
    #[serde(rename = "c_aA")]
    pub c_a_upper: Vec<Vec<RationalText>>,
    #[serde(rename = "c_aAj")]
    pub c_a_upper_j: Vec<Vec<Vec<RationalText>>>,
}

impl ElementJson {
    pub fn decode(&self, n: usize, m: usize) -> Result<(JetPoint, IntegralElementBasis)> {
        let flat = crate::rational::unwrap_rationals(&self.z);
        if flat.len() != n + m + n * m {
            return Err(Error::InvalidInput(format!(
                "z must have n + m + n*m = {} entries",
                n + m + n * m
            )));
        }
        let x = flat[..n].to_vec();
        let p = flat[n..n + m].to_vec();
        let pmat = (0..m)
            .map(|a| flat[n + m + a * n..n + m + (a + 1) * n].to_vec())
            .collect();
        let basis = IntegralElementBasis {
            l: self.basis.l,
            c_xb: self
                .basis
                .c_ab
                .iter()
                .map(|r| crate::rational::unwrap_rationals(r))
                .collect(),
            c_p: self
                .basis
                .c_a_upper
                .iter()
                .map(|r| crate::rational::unwrap_rationals(r))
                .collect(),
            c_pd: self
                .basis
                .c_a_upper_j
                .iter()
                .map(|per_a| {
                    per_a
                        .iter()
                        .map(|r| crate::rational::unwrap_rationals(r))
                        .collect()
                })
                .collect(),
        };
        Ok((JetPoint { x, p, pmat }, basis))
    }
}

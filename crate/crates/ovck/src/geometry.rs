//! Gauss-image geometry: stereographic projection, sphere curves to Cauchy
//! data, construction of the rank-one-Gauss-map hypersurface prescribed by
//! a curve, and Levi-nondegeneracy analysis of the associated tube.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::monge::{self, MongeRhs, RankProfile};
use crate::rational::{exact_sqrt, rat_i64, Rational, RationalText};
use crate::series::{multi_indices, MultiIndex, SeriesJson, TruncatedSeries};

/// A germ at t = 0 of a curve on the unit sphere S^n, normalized to start
/// at the south pole with unit speed along the first axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SphereCurve {
    /// n + 1 univariate series.
    pub components: Vec<TruncatedSeries>,
    pub order: usize,
}

impl SphereCurve {
    pub fn n(&self) -> usize {
        self.components.len() - 1
    }

    pub fn new(components: Vec<TruncatedSeries>) -> Result<Self> {
        if components.len() < 3 {
            return Err(Error::InvalidInput(
                "a sphere curve needs at least 3 components (n >= 2)".into(),
            ));
        }
        let order = components.iter().map(TruncatedSeries::order).min().unwrap();
        for c in &components {
            if c.arity() != 1 {
                return Err(Error::ArityMismatch(c.arity(), 1));
            }
        }
        let curve = SphereCurve { components, order };
        curve.validate()?;
        Ok(curve)
    }

    /// From the exact form (v, -1)/sqrt(1 + |v|^2) with v a curve in R^n.
    pub fn from_unnormalized(v: Vec<TruncatedSeries>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::InvalidInput("need n >= 2 components".into()));
        }
        let order = v.iter().map(TruncatedSeries::order).min().unwrap();
        let mut norm_sq = TruncatedSeries::constant(1, order, Rational::one());
        for s in &v {
            let t = s.truncated(order);
            norm_sq = norm_sq.add(&t.mul(&t)?)?;
        }
        let r = norm_sq.sqrt()?.reciprocal()?;
        let mut components: Vec<TruncatedSeries> = v
            .iter()
            .map(|s| s.truncated(order).mul(&r))
            .collect::<Result<_>>()?;
        components.push(r.neg());
        Self::new(components)
    }

    fn validate(&self) -> Result<()> {
        let n1 = self.components.len();
        let fail = |msg: &str| Error::InvalidInput(format!("sphere curve: {msg}"));
        // gamma(0) = (0, ..., 0, -1)
        for (i, c) in self.components.iter().enumerate() {
            let want = if i + 1 == n1 {
                rat_i64(-1)
            } else {
                Rational::zero()
            };
            if c.constant_term() != want {
                return Err(fail("gamma(0) must be the south pole"));
            }
        }
        // gamma'(0) = (1, 0, ..., 0)
        for (i, c) in self.components.iter().enumerate() {
            let want = if i == 0 {
                Rational::one()
            } else {
                Rational::zero()
            };
            if c.coeff(&MultiIndex(vec![1])) != want {
                return Err(fail("gamma'(0) must be e_1"));
            }
        }
        // sum gamma_j^2 = 1 to the truncation order
        let mut acc = TruncatedSeries::zero(1, self.order);
        for c in &self.components {
            let t = c.truncated(self.order);
            acc = acc.add(&t.mul(&t)?)?;
        }
        let one = TruncatedSeries::constant(1, self.order, Rational::one());
        if acc != one {
            return Err(fail("|gamma|^2 != 1 to the truncation order"));
        }
        Ok(())
    }
}

/// A point `numerator / sqrt(radicand)`; exact componentwise when the
/// radicand is a rational square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaledPoint {
    pub numerator: Vec<Rational>,
    pub radicand: Rational,
}

impl ScaledPoint {
    /// Exact rational coordinates, when representable.
    pub fn exact(&self) -> Option<Vec<Rational>> {
        let r = exact_sqrt(&self.radicand)?;
        Some(self.numerator.iter().map(|q| q / &r).collect())
    }
}

/// Forward stereographic projection of the lower-hemisphere point with
/// x-part `x`: returns x / sqrt(1 - |x|^2). Errors on |x| >= 1.
pub fn stereographic_forward(x: &[Rational]) -> Result<ScaledPoint> {
    let mut radicand = Rational::one();
    for q in x {
        radicand -= q * q;
    }
    if !radicand.is_positive() {
        return Err(Error::InvalidInput(
            "stereographic projection requires |x| < 1".into(),
        ));
    }
    Ok(ScaledPoint {
        numerator: x.to_vec(),
        radicand,
    })
}

/// Inverse stereographic projection: the unique lower-hemisphere preimage
/// (y, -1)/sqrt(1 + |y|^2) of y, as an (n+1)-vector.
pub fn stereographic_inverse(y: &[Rational]) -> ScaledPoint {
    let mut radicand = Rational::one();
    for q in y {
        radicand += q * q;
    }
    let mut numerator = y.to_vec();
    numerator.push(rat_i64(-1));
    ScaledPoint {
        numerator,
        radicand,
    }
}

/// Cauchy data extracted from a sphere curve: the projected curve
/// Gamma = P o gamma = (phi, a_2, ..., a_n) and a = integral of phi.
#[derive(Debug, Clone)]
pub struct CurveData {
    pub phi: TruncatedSeries,
    pub a: TruncatedSeries,
    pub a_tangent: Vec<TruncatedSeries>,
}

/// Composes the curve with the stereographic projection and integrates the
/// first component. The output satisfies a(0) = a'(0) = 0 and a''(0) = 1.
pub fn curve_to_cauchy_data(curve: &SphereCurve) -> Result<CurveData> {
    let n = curve.n();
    let order = curve.order;
    // P(gamma) = (gamma_1, ..., gamma_n) / (-gamma_{n+1})
    let inv = curve.components[n].truncated(order).neg().reciprocal()?;
    let mut gamma_proj = Vec::with_capacity(n);
    for i in 0..n {
        gamma_proj.push(curve.components[i].truncated(order).mul(&inv)?);
    }
    let phi = gamma_proj[0].clone();
    let a = phi.antiderivative(1)?;
    debug_assert!(a.constant_term().is_zero());
    debug_assert_eq!(
        a.derivative(1)
            .unwrap()
            .derivative(1)
            .unwrap()
            .constant_term(),
        Rational::one()
    );
    Ok(CurveData {
        phi,
        a,
        a_tangent: gamma_proj[1..].to_vec(),
    })
}

/// A hypersurface graph y = u(x) with u(0) = 0, with its derived caches.
#[derive(Debug, Clone)]
pub struct HypersurfaceModel {
    pub u: TruncatedSeries,
    /// gradient[i-1] = du/dx^i, order N-1.
    pub gradient: Vec<TruncatedSeries>,
    /// Minors Delta_{alpha beta}(u), upper triangle in (alpha, beta) order.
    pub minors: Vec<(usize, usize, TruncatedSeries)>,
}

impl HypersurfaceModel {
    pub fn new(u: TruncatedSeries) -> Result<Self> {
        if !u.constant_term().is_zero() {
            return Err(Error::InvalidInput("hypersurface needs u(0) = 0".into()));
        }
        let n = u.arity();
        if n < 2 || u.order() < 2 {
            return Err(Error::InvalidInput(
                "hypersurface needs arity >= 2 and order >= 2".into(),
            ));
        }
        let gradient = (1..=n)
            .map(|i| u.derivative(i))
            .collect::<Result<Vec<_>>>()?;
        let mut minors = Vec::new();
        for alpha in 2..=n {
            for beta in alpha..=n {
                minors.push((alpha, beta, monge::delta_minor(&u, alpha, beta)?));
            }
        }
        Ok(HypersurfaceModel {
            u,
            gradient,
            minors,
        })
    }

    pub fn n(&self) -> usize {
        self.u.arity()
    }

    pub fn rank_one(&self) -> bool {
        !self.u11_at_zero().is_zero() && self.minors.iter().all(|(_, _, m)| m.is_zero())
    }

    fn u11_at_zero(&self) -> Rational {
        let mut idx = MultiIndex::zero(self.n());
        idx.0[0] = 2;
        self.u.derivative_at_zero(&idx)
    }
}

/// Runs the full curve-to-hypersurface construction: converts the curve to
/// Cauchy data, solves the rank-one system (f = 0) at the origin, and
/// verifies both the rank-one profile and the prescribed Gauss image along
/// the x^1-axis.
pub fn construct_from_curve(curve: &SphereCurve, order: usize) -> Result<HypersurfaceModel> {
    let n = curve.n();
    let data = curve_to_cauchy_data(curve)?;
    if data.a.order() < order {
        return Err(Error::InvalidInput(format!(
            "curve order {} too small for requested order {order}",
            curve.order
        )));
    }
    let f = MongeRhs::zero(n);
    let solution = monge::solve_full(&f, &data.a.truncated(order), &data.a_tangent, order)?;
    let model = HypersurfaceModel::new(solution.u)?;

    // rank of the Gauss map is one
    if !matches!(
        monge::hessian_rank_profile(&model.u, order - 2)?,
        RankProfile::One
    ) {
        return Err(Error::ResidualFailure(
            "constructed surface is not rank one".into(),
        ));
    }
    // axis Gauss image: u_x(x^1, 0, ..., 0) = Gamma(x^1) to order N-1
    let mut axis = Vec::with_capacity(n);
    axis.push(TruncatedSeries::variable(1, order, 1)?);
    for _ in 1..n {
        axis.push(TruncatedSeries::zero(1, order));
    }
    let gamma_proj: Vec<TruncatedSeries> = std::iter::once(&data.phi)
        .chain(data.a_tangent.iter())
        .cloned()
        .collect();
    for i in 0..n {
        let restricted = model.gradient[i].substitute(&axis)?.truncated(order - 1);
        if restricted != gamma_proj[i].truncated(order - 1) {
            return Err(Error::ResidualFailure(format!(
                "axis Gauss image mismatch in component {}",
                i + 1
            )));
        }
    }
    Ok(model)
}

/// Levi analysis of the tube over the graph: span growth of the derived
/// gradient vectors, hyperplane containment of the Gauss image, and the
/// nondegeneracy order at the fiber over 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub n: usize,
    pub j_max: usize,
    /// span_dims[j] = dim span { u_{x x^I}(0) : |I| <= j }.
    pub span_dims: Vec<usize>,
    /// Pure-x^1 spans; equals `span_dims` for rank-one models.
    pub reduced_span_dims: Vec<usize>,
    /// Least j with full span, when reached within j_max.
    pub nondegeneracy_order: Option<usize>,
    pub hyperplane_contained: bool,
    /// Exact normals of the containing hyperplanes (nullspace basis).
    pub hyperplane_normals: Vec<Vec<RationalText>>,
    /// Rank of the Levi form: span dimension at j = 1, minus one.
    pub levi_form_rank: usize,
    /// The Levi number n, reported per the tube correspondence when the
    /// model is rank one and finitely nondegenerate at 0.
    pub levi_number: Option<usize>,
    pub levi_number_label: String,
}

/// Derivative vectors u_{x x^I}(0) for all |I| <= j_max, keyed by index.
fn gradient_jets(model: &HypersurfaceModel, j_max: usize) -> Vec<(MultiIndex, Vec<Rational>)> {
    let n = model.n();
    multi_indices(n, j_max)
        .into_iter()
        .map(|idx| {
            let v: Vec<Rational> = (1..=n)
                .map(|i| {
                    let mut w = idx.clone();
                    w.0[i - 1] += 1;
                    model.u.derivative_at_zero(&w)
                })
                .collect();
            (idx, v)
        })
        .collect()
}

pub fn nondegeneracy_analysis(
    model: &HypersurfaceModel,
    j_max: usize,
) -> Result<NondegeneracyReport> {
    let n = model.n();
    let order = model.u.order();
    if j_max + 1 > order {
        return Err(Error::InvalidInput(format!(
            "j_max = {j_max} needs series order >= {}",
            j_max + 1
        )));
    }
    let jets = gradient_jets(model, j_max);

    let mut span_dims = Vec::with_capacity(j_max + 1);
    let mut reduced_span_dims = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let full: Vec<Vec<Rational>> = jets
            .iter()
            .filter(|(idx, _)| idx.degree() as usize <= j)
            .map(|(_, v)| v.clone())
            .collect();
        span_dims.push(linalg::span_dimension(&full));
        let reduced: Vec<Vec<Rational>> = jets
            .iter()
            .filter(|(idx, _)| idx.degree() as usize <= j && idx.0[1..].iter().all(|&e| e == 0))
            .map(|(_, v)| v.clone())
            .collect();
        reduced_span_dims.push(linalg::span_dimension(&reduced));
    }

    let rank_one = model.rank_one();
    if rank_one && span_dims != reduced_span_dims {
        return Err(Error::ResidualFailure(
            "pure-x^1 spans disagree with full spans on a rank-one model".into(),
        ));
    }

    let nondegeneracy_order = (0..=j_max).find(|&j| span_dims[j] == n);

    // hyperplane containment from the truncated moment matrix of pure-x^1
    // rows, m <= N-1
    let mut rows = Vec::new();
    for m in 0..order {
        let mut idx = MultiIndex::zero(n);
        idx.0[0] = m as u32;
        let v: Vec<Rational> = (1..=n)
            .map(|i| {
                let mut w = idx.clone();
                w.0[i - 1] += 1;
                model.u.derivative_at_zero(&w)
            })
            .collect();
        rows.push(v);
    }
    let normals = linalg::nullspace(&Matrix::from_rows(rows));
    let hyperplane_contained = !normals.is_empty();

    let levi_form_rank = span_dims.get(1).copied().unwrap_or(0).saturating_sub(1);
    let (levi_number, levi_number_label) =
        if rank_one && nondegeneracy_order.is_some() && !hyperplane_contained {
            (
                Some(n),
                "finitely nondegenerate at 0; Levi number n on a dense open \
                 set by lower semicontinuity"
                    .to_string(),
            )
        } else {
            (None, String::new())
        };

    Ok(NondegeneracyReport {
        n,
        j_max,
        span_dims,
        reduced_span_dims,
        nondegeneracy_order,
        hyperplane_contained,
        hyperplane_normals: normals
            .iter()
            .map(|v| crate::rational::wrap_rationals(v))
            .collect(),
        levi_form_rank,
        levi_number,
        levi_number_label,
    })
}

/// Curve input schema: either explicit gamma series or the exact
/// "(v, -1) then normalize" form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveJson {
    Unnormalized {
        form: String,
        v: Vec<SeriesJson>,
    },
    Gamma {
        n: usize,
        order: usize,
        gamma: Vec<SeriesJson>,
    },
}

impl CurveJson {
    pub fn decode(&self) -> Result<SphereCurve> {
        match self {
            CurveJson::Gamma { n, order, gamma } => {
                if gamma.len() != n + 1 {
                    return Err(Error::InvalidInput(format!(
                        "expected {} curve components, got {}",
                        n + 1,
                        gamma.len()
                    )));
                }
                let comps = gamma
                    .iter()
                    .map(|s| Ok(TruncatedSeries::from_json(s)?.truncated(*order)))
                    .collect::<Result<Vec<_>>>()?;
                SphereCurve::new(comps)
            }
            CurveJson::Unnormalized { form, v } => {
                if form != "unnormalized" {
                    return Err(Error::InvalidInput(format!("unknown curve form `{form}`")));
                }
                let comps = v
                    .iter()
                    .map(TruncatedSeries::from_json)
                    .collect::<Result<Vec<_>>>()?;
                SphereCurve::from_unnormalized(comps)
            }
        }
    }
}

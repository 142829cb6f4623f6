//! Cross-module invariants beyond the acceptance criteria: the chain rule,
//! point-versus-series agreement, affinity of the element residuals,
//! solver determinism, and the tube-criterion coherence checks.

use num_traits::Zero;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ovck::cauchy::{self, CauchyData};
use ovck::eds::{self, IntegralElementBasis, JetPoint};
use ovck::expr::{self, Expr, ParseContext, PointEnv, SeriesEnv, VarRef};
use ovck::geometry::{self, SphereCurve};
use ovck::monge::{self, MongeRhs};
use ovck::rational::{rat, rat_i64, Rational};
use ovck::series::{cos_series, sin_series, MultiIndex, TruncatedSeries};
use ovck::system::SystemSpec;

fn rational_strategy() -> impl Strategy<Value = Rational> {
    (-5i64..=5, 1i64..=5).prop_map(|(n, d)| rat(n, d))
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        rational_strategy().prop_map(expr::constant),
        (1usize..=2).prop_map(expr::x),
        Just(expr::p(1)),
        Just(expr::pd(1, 1)),
    ]
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| expr::mul(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| {
                let den = if matches!(&b, Expr::Const(q) if q.is_zero()) {
                    expr::int(1)
                } else {
                    b
                };
                expr::quot(a, den)
            }),
            (inner, 1u32..=2).prop_map(|(a, n)| expr::pow(a, n)),
        ]
    })
}

fn univariate_poly() -> impl Strategy<Value = TruncatedSeries> {
    proptest::collection::vec(rational_strategy(), 1..5).prop_map(|coeffs| {
        let mut s = TruncatedSeries::zero(1, 6);
        for (e, c) in coeffs.into_iter().enumerate() {
            s.set_coeff(MultiIndex(vec![e as u32]), c);
        }
        s
    })
}

proptest! {
    /// Chain rule: d/dt of the composed series equals the sum over
    /// variables of (partial derivative composed) times the argument's
    /// t-derivative.
    #[test]
    fn chain_rule(e in expr_strategy(),
                  args in proptest::collection::vec(univariate_poly(), 4)) {
        let vars = [VarRef::X(1), VarRef::X(2), VarRef::P(1), VarRef::Pd(1, 1)];
        let mut env = SeriesEnv::new(1, 6);
        for (v, s) in vars.iter().zip(args.iter()) {
            env.bind(*v, s.clone()).unwrap();
        }
        // skip inputs where composition hits a zero denominator
        let Ok(value) = env.evaluate(&e) else { return Ok(()) };
        let lhs = value.derivative(1).unwrap();

        let mut env5 = SeriesEnv::new(1, 5);
        for (v, s) in vars.iter().zip(args.iter()) {
            env5.bind(*v, s.truncated(5)).unwrap();
        }
        let mut rhs = TruncatedSeries::zero(1, 5);
        for (v, s) in vars.iter().zip(args.iter()) {
            let Ok(partial) = env5.evaluate(&e.differentiate(*v)) else {
                return Ok(());
            };
            rhs = rhs.add(&partial.mul(&s.derivative(1).unwrap()).unwrap()).unwrap();
        }
        prop_assert_eq!(lhs, rhs);
    }

    /// Point evaluation agrees with the constant term of series evaluation.
    #[test]
    fn point_eval_matches_series_constant_term(
        e in expr_strategy(),
        vals in proptest::collection::vec(rational_strategy(), 4),
    ) {
        let vars = [VarRef::X(1), VarRef::X(2), VarRef::P(1), VarRef::Pd(1, 1)];
        let mut pt = PointEnv::new();
        let mut env = SeriesEnv::new(1, 0);
        for (v, q) in vars.iter().zip(vals.iter()) {
            pt.bind(*v, q.clone());
            env.bind(*v, TruncatedSeries::constant(1, 0, q.clone())).unwrap();
        }
        match (pt.evaluate(&e), env.evaluate(&e)) {
            (Ok(a), Ok(s)) => prop_assert_eq!(a, s.constant_term()),
            (Err(_), Err(_)) => {}
            (a, s) => prop_assert!(false, "divergent outcomes: {:?} vs {:?}", a, s),
        }
    }
}

fn transport3() -> SystemSpec {
    let ctx = ParseContext::system(3, 1, 1);
    SystemSpec::new(
        3,
        1,
        1,
        vec![Rational::zero(); 3],
        vec![Rational::zero()],
        vec![vec![rat_i64(1)]],
        vec![vec![
            expr::parse("pd[1][1]", &ctx).unwrap(),
            expr::parse("2*pd[1][1]", &ctx).unwrap(),
        ]],
        vec![],
    )
    .unwrap()
}

/// element_residuals is affine in (c^A_a, c^A_{aj}) at fixed (z, c^b_a):
/// R((1-s) b0 + s b1) = (1-s) R(b0) + s R(b1).
#[test]
fn element_residuals_affine_in_fiber_coefficients() {
    let sys = transport3();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let sample = |rng: &mut ChaCha8Rng| rat(rng.gen_range(-3i64..=3), rng.gen_range(1i64..=3));

    let z = JetPoint {
        x: vec![rat_i64(0); 3],
        p: vec![sample(&mut rng)],
        pmat: vec![vec![sample(&mut rng), sample(&mut rng), sample(&mut rng)]],
    };
    for _ in 0..10 {
        let c_xb: Vec<Vec<Rational>> = vec![vec![sample(&mut rng), sample(&mut rng)]];
        let mk = |rng: &mut ChaCha8Rng, c_xb: &Vec<Vec<Rational>>| IntegralElementBasis {
            l: 1,
            c_xb: c_xb.clone(),
            c_p: vec![vec![sample(rng)]],
            c_pd: vec![vec![vec![sample(rng), sample(rng), sample(rng)]]],
        };
        let b0 = mk(&mut rng, &c_xb);
        let b1 = mk(&mut rng, &c_xb);
        let s = sample(&mut rng);

        let blend = IntegralElementBasis {
            l: 1,
            c_xb,
            c_p: vec![vec![(rat_i64(1) - &s) * &b0.c_p[0][0] + &s * &b1.c_p[0][0]]],
            c_pd: vec![vec![(0..3)
                .map(|j| (rat_i64(1) - &s) * &b0.c_pd[0][0][j] + &s * &b1.c_pd[0][0][j])
                .collect()]],
        };
        let r0 = eds::element_residuals(&sys, &z, &b0).unwrap();
        let r1 = eds::element_residuals(&sys, &z, &b1).unwrap();
        let rb = eds::element_residuals(&sys, &z, &blend).unwrap();
        let check = |v0: &Rational, v1: &Rational, vb: &Rational| {
            assert_eq!(*vb, (rat_i64(1) - &s) * v0 + &s * v1);
        };
        for a in 0..1 {
            check(&r0.eta[0][a].0, &r1.eta[0][a].0, &rb.eta[0][a].0);
            for al in 0..2 {
                check(
                    &r0.omega[0][al][a].0,
                    &r1.omega[0][al][a].0,
                    &rb.omega[0][al][a].0,
                );
            }
        }
    }
}

/// Determinism: solve output is a pure function of (system, data, order).
#[test]
fn solve_is_deterministic() {
    let sys = transport3();
    let data = CauchyData::new(vec![TruncatedSeries::variable(1, 6, 1).unwrap()]);
    let u1 = cauchy::solve(&sys, &data, 6).unwrap();
    let u2 = cauchy::solve(&sys, &data, 6).unwrap();
    assert_eq!(u1, u2);
    let json1 = serde_json::to_string(&u1.to_json()).unwrap();
    let json2 = serde_json::to_string(&u2.to_json()).unwrap();
    assert_eq!(json1, json2);
}

/// Hyperplane containment coherence: on the
/// example suite, hyperplane containment holds iff the span never reaches n
/// (both computed independently), and finite nondegeneracy at 0 iff the
/// Gauss image is not contained in a hyperplane.
#[test]
fn hyperplane_containment_coherence() {
    let order = 8;
    let curves: Vec<(SphereCurve, bool)> = vec![
        (
            SphereCurve::new(vec![
                sin_series(order),
                TruncatedSeries::zero(1, order),
                TruncatedSeries::zero(1, order),
                cos_series(order).neg(),
            ])
            .unwrap(),
            true, // cylinder: contained
        ),
        (
            {
                let mono = |p: u32, c: Rational| {
                    let mut s = TruncatedSeries::zero(1, order);
                    s.set_coeff(MultiIndex(vec![p]), c);
                    s
                };
                SphereCurve::from_unnormalized(vec![
                    mono(1, rat_i64(1)),
                    mono(2, rat(1, 2)),
                    mono(3, rat(1, 6)),
                ])
                .unwrap()
            },
            false, // moment curve: not contained
        ),
    ];
    for (curve, contained) in curves {
        let model = geometry::construct_from_curve(&curve, order).unwrap();
        let report = geometry::nondegeneracy_analysis(&model, 5).unwrap();
        assert_eq!(report.hyperplane_contained, contained);
        let span_reaches_n = report.span_dims.iter().any(|&d| d == model.n());
        assert_eq!(span_reaches_n, !contained, "containment <=> bounded span");
        assert_eq!(
            report.nondegeneracy_order.is_some(),
            !contained,
            "nondegeneracy <=> unbounded Gauss image"
        );
    }
}

/// Classification coherence, inadmissible direction: a g-form witness
/// implies the reduced system fails approximate solvability at some sampled
/// base point.
#[test]
fn inadmissible_rhs_obstructs_jets() {
    let ctx = ParseContext::monge(3);
    let f = MongeRhs::new(
        3,
        vec![Rational::zero(); 3],
        vec![(2, 2, expr::parse("x[1]*t", &ctx).unwrap())],
    )
    .unwrap();
    let report = monge::classify_rhs(&f, 6).unwrap();
    assert!(!report.admissible());

    let (sys, _) = monge::reduce_to_first_order(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut obstructed = false;
    for _ in 0..20 {
        let x: Vec<Rational> = (0..3).map(|_| rat(rng.gen_range(-2i64..=2), 1)).collect();
        let p: Vec<Rational> = (0..3).map(|_| rat(rng.gen_range(-2i64..=2), 1)).collect();
        let mut pp: Vec<Vec<Rational>> = (0..3)
            .map(|_| vec![rat(rng.gen_range(-2i64..=2), 1)])
            .collect();
        pp[0][0] = rat_i64(1);
        if !cauchy::approximately_solvable_at(&sys, &x, &p, &pp).unwrap() {
            obstructed = true;
            break;
        }
    }
    assert!(obstructed, "expected an obstructed base point");
}

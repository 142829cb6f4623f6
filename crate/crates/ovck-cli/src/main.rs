//! Batch front-end: each subcommand reads JSON inputs, runs one pipeline,
//! and emits a JSON or text report. Exit status encodes the verdict:
//! 0 = positive/clean, 1 = negative (incompatible, residual failure,
//! degenerate), 2 = input or usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use ovck::cauchy::{self, CauchyProblemJson, DataJet2, Jet2, Slope};
use ovck::compat;
use ovck::eds::{self, ElementJson};
use ovck::error::Error;
use ovck::geometry::{self, CurveJson, HypersurfaceModel, NondegeneracyReport};
use ovck::monge::{self, MongeRhs, MongeVerdict, RankProfile};
use ovck::rational::{
    format_rational, format_rational_decimal, unwrap_rationals, wrap_rationals, Rational,
    RationalText,
};
use ovck::series::{SeriesJson, TruncatedSeries};
use ovck::system::SystemSpec;

#[derive(Parser)]
#[command(
    name = "ovck",
    about = "Overdetermined analytic Cauchy problems: \
compatibility, exact series solving, Monge-Ampere reduction, and Gauss-map \
geometry",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Truncation order N.
    #[arg(long, default_value_t = 8, env = "CK_DEFAULT_ORDER")]
    order: usize,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Check the compatibility conditions of a first-order system.
    Compat {
        #[arg(long)]
        system: PathBuf,
        /// Number of evaluation points (base point included).
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Solve the Cauchy problem by exact power series.
    Solve {
        #[arg(long)]
        system: PathBuf,
        /// Problem JSON: { "data": [series...], "order": N }.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Compute the approximate-solution 2-jet (tilted when a slope is given).
    Jet {
        #[arg(long)]
        system: PathBuf,
        /// Data-jet JSON: { "a": [...], "a_d": [[...]], "a_dd": [[[...]]],
        /// "slope": [[...]] (optional) }.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Test a slope for non-characteristicity.
    Slope {
        #[arg(long)]
        system: PathBuf,
        /// Slope JSON: { "slope": [[...]], "point": {...} (optional) }.
        #[arg(long)]
        slope: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate the integral-element residual family and the polar space.
    Eds {
        #[arg(long)]
        system: PathBuf,
        /// Element JSON: { "z": [...], "basis": { "l", "c_ab", "c_aA", "c_aAj" } }.
        #[arg(long)]
        element: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Classify a Monge-Ampere right-hand side; solve when data is given.
    Monge {
        #[arg(long)]
        rhs: PathBuf,
        /// Data JSON: { "a": series, "a_tangent": [series...] }.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Construct the rank-one hypersurface prescribed by a sphere curve.
    Gauss {
        #[arg(long)]
        curve: PathBuf,
        /// Chain the Levi nondegeneracy analysis onto the construction.
        #[arg(long = "then", value_parser = ["levi"])]
        then: Option<String>,
        #[arg(long)]
        jmax: Option<usize>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Levi nondegeneracy analysis of the tube over a graph y = u(x).
    Levi {
        /// Surface JSON: { "u": series }.
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        jmax: Option<usize>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(classify_error(&err))
        }
    }
}

/// Input/usage errors exit 2; verdict-negative outcomes exit 1.
fn classify_error(err: &Error) -> u8 {
    match err {
        Error::Syntax { .. }
        | Error::IndexOutOfRange { .. }
        | Error::UnboundVariable(_)
        | Error::ArityMismatch(_, _)
        | Error::BadVariableIndex { .. }
        | Error::InvalidInput(_)
        | Error::NowhereDefined => 2,
        _ => 1,
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn emit(common: &CommonOpts, report: &Value, text: String) -> Result<(), Error> {
    let body = match common.format {
        Format::Json => serde_json::to_string_pretty(report).unwrap() + "\n",
        Format::Text => text,
    };
    match &common.output {
        Some(path) => fs::write(path, body)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn rat_line(q: &Rational) -> String {
    format_rational_decimal(q)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Compat {
            system,
            samples,
            seed,
            common,
        } => {
            let sys = SystemSpec::from_json(&read_json(&system)?)?;
            let report = compat::check_compatibility(&sys, samples, seed, 2 * common.order)?;
            let verdict_positive = report.compatible();
            let mut text = String::new();
            let symbolic = match report.symbolic {
                Some(compat::SymbolicVerdict::IdentitiesHold) => "symbolic: identities hold",
                Some(compat::SymbolicVerdict::IdentitiesFail) => "symbolic: identities fail",
                Some(compat::SymbolicVerdict::GermAtBasePointHolds) => {
                    "symbolic: germ-at-base-point holds"
                }
                Some(compat::SymbolicVerdict::GermAtBasePointFails) => {
                    "symbolic: germ-at-base-point fails"
                }
                None => "symbolic: unavailable",
            };
            if verdict_positive {
                text.push_str(&format!("compatible ({symbolic})\n"));
            } else {
                text.push_str(&format!(
                    "violated: {} witnesses ({symbolic})\n",
                    report.witnesses.len()
                ));
                if let Some(w) = report.witnesses.first() {
                    text.push_str(&format!(
                        "  first witness: {:?} indices {:?} at point {} difference {}\n",
                        w.condition,
                        w.indices,
                        w.point_index,
                        rat_line(&w.difference.0)
                    ));
                }
            }
            text.push_str(&format!("points evaluated: {}\n", report.points.len()));
            emit(&common, &serde_json::to_value(&report).unwrap(), text)?;
            Ok(exit_verdict(verdict_positive))
        }

        Command::Solve {
            system,
            data,
            common,
        } => {
            let sys = SystemSpec::from_json(&read_json(&system)?)?;
            let problem: CauchyProblemJson = read_json(&data)?;
            if problem.slope_matrix().is_some() {
                return Err(Error::InvalidInput(
                    "slopes apply to the jet subcommand; the series solver \
                     works on the straight initial plane"
                        .into(),
                ));
            }
            let order = problem.order.unwrap_or(common.order);
            let cauchy_data = problem.data_series()?;
            let solution = cauchy::solve(&sys, &cauchy_data, order)?;
            let residual = cauchy::residual(&sys, &solution, &cauchy_data)?;
            let summary = match residual.max_nonzero_degree() {
                None => "clean".to_string(),
                Some(d) => format!("nonzero up to degree {d}"),
            };
            let report = json!({
                "order": order,
                "solution": solution.to_json(),
                "residual": summary,
            });
            let text = format!(
                "solved to order {order}; residual {summary}\nu^1 = {}\n",
                series_text(&solution.components[0])
            );
            emit(&common, &report, text)?;
            Ok(exit_verdict(residual.is_clean()))
        }

        Command::Jet {
            system,
            data,
            common,
        } => {
            let sys = SystemSpec::from_json(&read_json(&system)?)?;
            let jet_input: JetDataJson = read_json(&data)?;
            let data_jet = jet_input.data_jet();
            let result = match jet_input.slope_matrix() {
                Some(slope) => cauchy::tilted_approximate_jet(&sys, &slope, &data_jet),
                None => cauchy::approximate_jet(&sys, &data_jet),
            };
            match result {
                Ok(jet) => {
                    let report = jet_json(&jet);
                    let text = jet_text(&jet);
                    emit(&common, &report, text)?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(
                    e @ (Error::JetAsymmetry { .. }
                    | Error::CharacteristicSlope
                    | Error::TiltedJetUnsolvable { .. }),
                ) => {
                    let report = json!({ "verdict": "obstructed", "reason": e.to_string() });
                    emit(&common, &report, format!("obstructed: {e}\n"))?;
                    Ok(ExitCode::from(1))
                }
                Err(e) => Err(e),
            }
        }

        Command::Slope {
            system,
            slope,
            common,
        } => {
            let sys = SystemSpec::from_json(&read_json(&system)?)?;
            let input: SlopeJson = read_json(&slope)?;
            let matrix = Slope(input.slope.iter().map(|r| unwrap_rationals(r)).collect());
            let (x, p, pp) = match &input.point {
                Some(pt) => (
                    unwrap_rationals(&pt.x),
                    unwrap_rationals(&pt.p),
                    pt.pprime.iter().map(|r| unwrap_rationals(r)).collect(),
                ),
                None => (sys.x0.clone(), sys.p0.clone(), sys.pprime0.clone()),
            };
            let (nonchar, det) = cauchy::slope_noncharacteristic(&sys, &matrix, &x, &p, &pp)?;
            let report = json!({
                "noncharacteristic": nonchar,
                "determinant": format_rational(&det),
            });
            let text = format!(
                "{} (det V = {})\n",
                if nonchar {
                    "non-characteristic"
                } else {
                    "characteristic"
                },
                rat_line(&det)
            );
            emit(&common, &report, text)?;
            Ok(exit_verdict(nonchar))
        }

        Command::Eds {
            system,
            element,
            common,
        } => {
            let sys = SystemSpec::from_json(&read_json(&system)?)?;
            let input: ElementJson = read_json(&element)?;
            let (z, basis) = input.decode(sys.n, sys.m)?;
            let residuals = eds::element_residuals(&sys, &z, &basis)?;
            if !residuals.all_zero() {
                let report = json!({
                    "integral": false,
                    "residuals": serde_json::to_value(&residuals).unwrap(),
                });
                emit(
                    &common,
                    &report,
                    "not an integral element (nonzero residuals)\n".into(),
                )?;
                return Ok(ExitCode::from(1));
            }
            let polar = eds::polar_space(&sys, &z, &basis)?;
            let report = json!({
                "integral": true,
                "residuals": serde_json::to_value(&residuals).unwrap(),
                "polar_dimension": polar.dim,
                "graph_over_base": polar.graph_over_base,
                "polar_basis": polar.basis.iter()
                    .map(|v| wrap_rationals(v))
                    .collect::<Vec<_>>(),
            });
            let text = format!(
                "integral element; dim H(E) = {}{}\n",
                polar.dim,
                if polar.graph_over_base {
                    " (graph over the base directions)"
                } else {
                    ""
                }
            );
            emit(&common, &report, text)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Monge { rhs, data, common } => {
            let f = MongeRhs::from_json(&read_json(&rhs)?)?;
            let report = if f.n > 2 {
                Some(monge::classify_rhs(&f, common.order)?)
            } else {
                None
            };
            let admissible = report.as_ref().map(|r| r.admissible()).unwrap_or(true);
            let mut body = json!({
                "classification": report.as_ref().map(|r| serde_json::to_value(r).unwrap()),
            });
            let mut text = match report.as_ref().map(|r| &r.verdict) {
                Some(MongeVerdict::Admissible { .. }) => {
                    "admissible: f = g(x) t with integrable g\n".to_string()
                }
                Some(MongeVerdict::Inadmissible { witness }) => {
                    format!("inadmissible: {}\n", witness_text(witness))
                }
                None => "n = 2: every right-hand side is solvable (classification \
                         not applicable)\n"
                    .to_string(),
            };
            let mut clean = true;
            if let Some(data_path) = data {
                if !admissible {
                    clean = false;
                } else {
                    let d: MongeDataJson = read_json(&data_path)?;
                    let a = TruncatedSeries::from_json(&d.a)?;
                    let tangent = d
                        .a_tangent
                        .iter()
                        .map(TruncatedSeries::from_json)
                        .collect::<Result<Vec<_>, _>>()?;
                    let solution = monge::solve_full(&f, &a, &tangent, common.order)?;
                    let rank = monge::hessian_rank_profile(&solution.u, common.order - 2)?;
                    body["solution"] = serde_json::to_value(solution.u.to_json()).unwrap();
                    body["residual"] = json!("clean");
                    body["rank_profile"] = serde_json::to_value(&rank).unwrap();
                    text.push_str(&format!(
                        "solved to order {}; residual clean; Hessian rank {}\n",
                        common.order,
                        match rank {
                            RankProfile::One => "identically one".to_string(),
                            RankProfile::Higher { alpha, beta, .. } =>
                                format!("> 1 (witness minor ({alpha},{beta}))"),
                        }
                    ));
                }
            }
            emit(&common, &body, text)?;
            Ok(exit_verdict(admissible && clean))
        }

        Command::Gauss {
            curve,
            then,
            jmax,
            common,
        } => {
            let curve_json: CurveJson = read_json(&curve)?;
            let sphere_curve = curve_json.decode()?;
            let model = geometry::construct_from_curve(&sphere_curve, common.order)?;
            let mut body = json!({
                "n": model.n(),
                "order": common.order,
                "u": model.u.to_json(),
                "rank": "one",
                "axis_gauss_image": "verified",
            });
            let mut text = format!(
                "constructed rank-one hypersurface (n = {}, order {}); axis \
                 Gauss image verified\n",
                model.n(),
                common.order
            );
            let mut verdict = true;
            if then.as_deref() == Some("levi") {
                let j = jmax.unwrap_or_else(|| 5.min(common.order - 1));
                let levi = geometry::nondegeneracy_analysis(&model, j)?;
                text.push_str(&levi_text(&levi));
                verdict = levi.nondegeneracy_order.is_some();
                body["levi"] = serde_json::to_value(&levi).unwrap();
            }
            emit(&common, &body, text)?;
            Ok(exit_verdict(verdict))
        }

        Command::Levi {
            surface,
            jmax,
            common,
        } => {
            let input: SurfaceJson = read_json(&surface)?;
            let u = TruncatedSeries::from_json(&input.u)?;
            let model = HypersurfaceModel::new(u)?;
            let j = jmax.unwrap_or_else(|| 5.min(model.u.order().saturating_sub(1)));
            let levi = geometry::nondegeneracy_analysis(&model, j)?;
            let verdict = levi.nondegeneracy_order.is_some();
            let body = serde_json::to_value(&levi).unwrap();
            emit(&common, &body, levi_text(&levi))?;
            Ok(exit_verdict(verdict))
        }
    }
}

fn exit_verdict(positive: bool) -> ExitCode {
    if positive {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn witness_text(witness: &monge::InadmissibleWitness) -> String {
    use monge::InadmissibleWitness::*;
    match witness {
        TIndependentNonzero { alpha, beta } => {
            format!("t-independent nonzero f at ({alpha},{beta})")
        }
        NotLinearInT { alpha, beta } => {
            format!("f_{{{alpha},{beta}}} is not of the form g(x) t")
        }
        FirstVariableDependence { alpha, beta } => {
            format!("g_{{{alpha},{beta}}} depends on x[1]")
        }
        CurlMismatch { alpha, beta, gamma } => {
            format!("d_{gamma} g_{{{alpha},{beta}}} != d_{beta} g_{{{alpha},{gamma}}}")
        }
    }
}

fn levi_text(levi: &NondegeneracyReport) -> String {
    let mut text = format!("span dims by jet order: {:?}\n", levi.span_dims);
    match levi.nondegeneracy_order {
        Some(l) => {
            text.push_str(&format!("l = {l} at 0"));
            if levi.levi_number == Some(levi.n) {
                text.push_str(&format!("; Levi number verdict: n = {}", levi.n));
            }
            text.push('\n');
        }
        None => text.push_str(&format!(
            "not finitely nondegenerate at 0 up to j = {}\n",
            levi.j_max
        )),
    }
    if levi.hyperplane_contained {
        let normals: Vec<String> = levi
            .hyperplane_normals
            .iter()
            .map(|v| {
                let parts: Vec<String> = v.iter().map(|q| format_rational(&q.0)).collect();
                format!("({})", parts.join(", "))
            })
            .collect();
        text.push_str(&format!(
            "Gauss image contained in hyperplanes with normals {}\n",
            normals.join(", ")
        ));
    } else {
        text.push_str("Gauss image not contained in a hyperplane\n");
    }
    text.push_str(&format!("Levi form rank: {}\n", levi.levi_form_rank));
    text
}

fn series_text(s: &TruncatedSeries) -> String {
    if s.is_zero() {
        return "0".to_string();
    }
    let terms: Vec<String> = s
        .terms()
        .map(|(idx, coeff)| {
            let mut mono = String::new();
            for (i, &e) in idx.0.iter().enumerate() {
                if e == 1 {
                    mono.push_str(&format!("*x{}", i + 1));
                } else if e > 1 {
                    mono.push_str(&format!("*x{}^{}", i + 1, e));
                }
            }
            format!("{}{}", format_rational(coeff), mono)
        })
        .collect();
    terms.join(" + ")
}

fn jet_json(jet: &Jet2) -> Value {
    json!({
        "value": wrap_rationals(&jet.value),
        "grad": jet.grad.iter().map(|r| wrap_rationals(r)).collect::<Vec<_>>(),
        "hess": jet.hess.iter()
            .map(|h| h.iter().map(|r| wrap_rationals(r)).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

fn jet_text(jet: &Jet2) -> String {
    let mut text = String::from("approximate-solution 2-jet:\n");
    for a in 0..jet.m {
        text.push_str(&format!(
            "  u^{} = {}; grad = [{}]\n",
            a + 1,
            rat_line(&jet.value[a]),
            jet.grad[a]
                .iter()
                .map(format_rational)
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    text
}

#[derive(Deserialize)]
struct JetDataJson {
    a: Vec<RationalText>,
    a_d: Vec<Vec<RationalText>>,
    a_dd: Vec<Vec<Vec<RationalText>>>,
    #[serde(default)]
    slope: Option<Vec<Vec<RationalText>>>,
}

impl JetDataJson {
    fn data_jet(&self) -> DataJet2 {
        DataJet2 {
            value: unwrap_rationals(&self.a),
            grad: self.a_d.iter().map(|r| unwrap_rationals(r)).collect(),
            hess: self
                .a_dd
                .iter()
                .map(|h| h.iter().map(|r| unwrap_rationals(r)).collect())
                .collect(),
        }
    }

    fn slope_matrix(&self) -> Option<Slope> {
        self.slope
            .as_ref()
            .map(|rows| Slope(rows.iter().map(|r| unwrap_rationals(r)).collect()))
    }
}

#[derive(Deserialize)]
struct SlopeJson {
    slope: Vec<Vec<RationalText>>,
    #[serde(default)]
    point: Option<SlopePointJson>,
}

#[derive(Deserialize)]
struct SlopePointJson {
    x: Vec<RationalText>,
    p: Vec<RationalText>,
    pprime: Vec<Vec<RationalText>>,
}

#[derive(Deserialize)]
struct MongeDataJson {
    a: SeriesJson,
    a_tangent: Vec<SeriesJson>,
}

#[derive(Deserialize)]
struct SurfaceJson {
    u: SeriesJson,
}

//! End-to-end CLI tests: schemas, exit-status contract, determinism, and
//! the flagship gauss --then levi chain.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ovck"))
}

fn fixture_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ovck-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

const TRANSPORT: &str = r#"{
  "n": 2, "k": 1, "m": 1,
  "x0": ["0", "0"], "p0": ["0"], "pprime0": [["1"]],
  "F": [{ "A": 1, "alpha": 2, "expr": "pd[1][1]" }]
}"#;

const TWISTED: &str = r#"{
  "n": 3, "k": 1, "m": 1,
  "x0": ["0", "0", "0"], "p0": ["0"], "pprime0": [["1"]],
  "F": [{ "A": 1, "alpha": 2, "expr": "-x[3]*pd[1][1]" }]
}"#;

#[test]
fn compat_exit_codes_and_text() {
    let dir = fixture_dir("compat");
    let sys = write(&dir, "transport.json", TRANSPORT);
    let out = bin()
        .args(["compat", "--system"])
        .arg(&sys)
        .args(["--format", "text"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("compatible (symbolic: identities hold)"));

    let sys = write(&dir, "twisted.json", TWISTED);
    let out = bin()
        .args(["compat", "--system"])
        .arg(&sys)
        .args(["--format", "text"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("violated"));

    // schema error: missing file
    let out = bin()
        .args(["compat", "--system", "/nonexistent.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compat_reports_are_deterministic() {
    let dir = fixture_dir("det");
    let sys = write(&dir, "twisted.json", TWISTED);
    let run = || {
        let out = bin()
            .args(["compat", "--system"])
            .arg(&sys)
            .args(["--samples", "6", "--seed", "11"])
            .output()
            .unwrap();
        stdout(&out)
    };
    assert_eq!(run(), run());
}

#[test]
fn solve_burgers_through_the_cli() {
    let dir = fixture_dir("solve");
    let sys = write(
        &dir,
        "burgers.json",
        r#"{
          "n": 2, "k": 1, "m": 1,
          "x0": ["0", "0"], "p0": ["0"], "pprime0": [["1"]],
          "F": [{ "A": 1, "alpha": 2, "expr": "p[1]*pd[1][1]" }]
        }"#,
    );
    let data = write(
        &dir,
        "data.json",
        r#"{
          "data": [{ "arity": 1, "order": 6,
                     "terms": [{ "exp": [1], "num": "1", "den": "1" }] }],
          "order": 6
        }"#,
    );
    let out = bin()
        .args(["solve", "--system"])
        .arg(&sys)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["residual"], "clean");
    // coefficient of x1 x2^5 is 1
    let terms = report["solution"][0]["terms"].as_array().unwrap();
    assert!(terms
        .iter()
        .any(|t| t["exp"] == serde_json::json!([1, 5]) && t["num"] == "1"));
}

#[test]
fn jet_detects_incompatibility() {
    let dir = fixture_dir("jet");
    let sys = write(&dir, "twisted.json", TWISTED);
    let data = write(
        &dir,
        "jet.json",
        r#"{ "a": ["0"], "a_d": [["1"]], "a_dd": [[["0"]]] }"#,
    );
    let out = bin()
        .args(["jet", "--system"])
        .arg(&sys)
        .arg("--data")
        .arg(&data)
        .args(["--format", "text"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("obstructed"));

    // the straight transport jet succeeds
    let sys = write(&dir, "transport.json", TRANSPORT);
    let out = bin()
        .args(["jet", "--system"])
        .arg(&sys)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn slope_characteristic_detection() {
    let dir = fixture_dir("slope");
    let sys = write(&dir, "transport.json", TRANSPORT);
    let good = write(&dir, "half.json", r#"{ "slope": [["1/2"]] }"#);
    let bad = write(&dir, "one.json", r#"{ "slope": [["1"]] }"#);
    let out = bin()
        .args(["slope", "--system"])
        .arg(&sys)
        .arg("--slope")
        .arg(&good)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = bin()
        .args(["slope", "--system"])
        .arg(&sys)
        .arg("--slope")
        .arg(&bad)
        .args(["--format", "text"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("characteristic"));
}

#[test]
fn eds_element_checks() {
    let dir = fixture_dir("eds");
    let sys = write(&dir, "transport.json", TRANSPORT);
    // tangent of the jet graph at z = (0,0,0,(1,1)): integral, dim H(E) = 2
    let good = write(
        &dir,
        "element.json",
        r#"{
          "z": ["0", "0", "0", "1", "1"],
          "basis": { "l": 1, "c_ab": [["0"]], "c_aA": [["1"]],
                     "c_aAj": [[["0", "0"]]] }
        }"#,
    );
    let out = bin()
        .args(["eds", "--system"])
        .arg(&sys)
        .arg("--element")
        .arg(&good)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["polar_dimension"], 2);

    // perturbed: not integral
    let bad = write(
        &dir,
        "bad.json",
        r#"{
          "z": ["0", "0", "0", "1", "1"],
          "basis": { "l": 1, "c_ab": [["0"]], "c_aA": [["2"]],
                     "c_aAj": [[["0", "0"]]] }
        }"#,
    );
    let out = bin()
        .args(["eds", "--system"])
        .arg(&sys)
        .arg("--element")
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn monge_gate_exit_codes() {
    let dir = fixture_dir("monge");
    let constant = write(
        &dir,
        "f_const.json",
        r#"{ "n": 3, "f": [{ "alpha": 2, "beta": 2, "expr": "1" }],
             "x0": ["0", "0", "0"] }"#,
    );
    let out = bin()
        .args(["monge", "--rhs"])
        .arg(&constant)
        .args(["--format", "text"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("inadmissible: t-independent nonzero f"));

    let potential = write(
        &dir,
        "f_pot.json",
        r#"{ "n": 3, "f": [{ "alpha": 2, "beta": 3, "expr": "t" }],
             "x0": ["0", "0", "0"] }"#,
    );
    let data = write(
        &dir,
        "data.json",
        r#"{
          "a": { "arity": 1, "order": 6,
                 "terms": [{ "exp": [2], "num": "1", "den": "2" }] },
          "a_tangent": [
            { "arity": 1, "order": 6,
              "terms": [{ "exp": [1], "num": "1", "den": "3" }] },
            { "arity": 1, "order": 6,
              "terms": [{ "exp": [2], "num": "1", "den": "4" }] }
          ]
        }"#,
    );
    let out = bin()
        .args(["monge", "--rhs"])
        .arg(&potential)
        .arg("--data")
        .arg(&data)
        .args(["--order", "6", "--format", "text"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("admissible"));
    assert!(stdout(&out).contains("residual clean"));
}

#[test]
fn gauss_then_levi_chain() {
    let dir = fixture_dir("gauss");
    let moment = write(
        &dir,
        "moment.json",
        r#"{
          "form": "unnormalized",
          "v": [
            { "arity": 1, "order": 8,
              "terms": [{ "exp": [1], "num": "1", "den": "1" }] },
            { "arity": 1, "order": 8,
              "terms": [{ "exp": [2], "num": "1", "den": "2" }] },
            { "arity": 1, "order": 8,
              "terms": [{ "exp": [3], "num": "1", "den": "6" }] }
          ]
        }"#,
    );
    let out = bin()
        .args(["gauss", "--curve"])
        .arg(&moment)
        .args(["--order", "8", "--then", "levi", "--format", "text"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("l = 3 at 0"));
    assert!(text.contains("Levi number verdict: n = 3"));

    // env var override of the default order
    let out = bin()
        .args(["gauss", "--curve"])
        .arg(&moment)
        .args(["--then", "levi"])
        .env("CK_DEFAULT_ORDER", "6")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["order"], 6);
}

#[test]
fn levi_standalone_on_a_cylinder() {
    let dir = fixture_dir("levi");
    // u = x1^2/2 + x1^4/12 + ... is enough: use x1^2/2 constant in x2, x3
    let surf = write(
        &dir,
        "surf.json",
        r#"{ "u": { "arity": 3, "order": 6,
                    "terms": [{ "exp": [2, 0, 0], "num": "1", "den": "2" }] } }"#,
    );
    let out = bin()
        .args(["levi", "--surface"])
        .arg(&surf)
        .args(["--format", "text"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("not finitely nondegenerate"));
    assert!(stdout(&out).contains("contained in hyperplanes"));
}

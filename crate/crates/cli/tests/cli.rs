use std::path::{Path, PathBuf};
use std::process::Command;

use heisgeo_cli::io::{to_json, MetricInput};
use heisgeo_cli::run;
use heisgeo_cli::sequence::SequenceSpec;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn heisgeo(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_heisgeo"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).expect("valid JSON")
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heisgeo-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn fixtures_round_trip_byte_identically() {
    let mut seen = 0;
    for entry in std::fs::read_dir(fixture("")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let v: Value = json(&text);
        let back = if v.get("family").is_some() {
            to_json(&serde_json::from_str::<SequenceSpec>(&text).unwrap())
        } else {
            to_json(&serde_json::from_str::<MetricInput>(&text).unwrap())
        };
        assert_eq!(back, text, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 4);
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let id = fixture("sheared-n2.json");
    let id = id.to_str().unwrap();
    let spec = fixture("ex-5-3.json");
    let spec = spec.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["canonicalize", "--input", id],
        vec![
            "distance",
            "--input",
            id,
            "--target",
            "0.3,-0.2,0.1,0.4,2",
            "--grid",
            "256",
        ],
        vec!["sequence", "--spec", spec, "--volume-floor", "0.5"],
        vec!["sequence", "--spec", spec, "--volume-floor", "0.5", "--csv"],
    ];
    for args in cases {
        let a = heisgeo(&args);
        let b = heisgeo(&args);
        assert_eq!(a.0, 0, "{args:?}: {}", a.2);
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn invariants_of_the_identity() {
    let (code, out, _) = heisgeo(&[
        "invariants",
        "--input",
        fixture("identity.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["d"][0], 1.0);
    assert_eq!(v["absdet"], 1.0);
    assert_eq!(v["absrho"], 1.0);
    assert!((v["delta"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn vertical_distance_matches_the_closed_form() {
    let input = fixture("identity.json");
    for (z, expected) in [
        (1.0, 1.0),
        (2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI),
        (
            10.0,
            2.0 * (10.0 * std::f64::consts::PI - std::f64::consts::PI.powi(2)).sqrt(),
        ),
    ] {
        let target = format!("0,0,{z}");
        let (code, out, err) = heisgeo(&[
            "distance",
            "--input",
            input.to_str().unwrap(),
            "--target",
            &target,
        ]);
        assert_eq!(code, 0, "{err}");
        let d = json(&out)["distance"].as_f64().unwrap();
        assert!(
            (d - expected).abs() < 1e-8 * expected,
            "z = {z}: {d} vs {expected}"
        );
    }
}

#[test]
fn example_sequences_reproduce_their_totals() {
    let (code, out, _) = heisgeo(&[
        "sequence",
        "--spec",
        fixture("ex-4-9.json").to_str().unwrap(),
        "--volume-floor",
        "0.5",
    ]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert_eq!(r["verdict"], "non-collapsed (limit corank-1)");
    assert_eq!(r["limit"]["fingerprint"]["absrho"], 0.0);
    for row in r["rows"].as_array().unwrap() {
        let k = row["k"].as_f64().unwrap();
        let m = row["minimal_popp_total"].as_f64().unwrap();
        assert!((m - 0.5f64.sqrt()).abs() <= 1e-9 * m);
        let t = row["riemannian_total"].as_f64().unwrap();
        assert!((t - k).abs() <= 1e-9 * k);
    }

    let (code, out, _) = heisgeo(&[
        "sequence",
        "--spec",
        fixture("ex-5-3.json").to_str().unwrap(),
        "--volume-floor",
        "0.5",
    ]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert_eq!(r["verdict"], "collapsed");
    let pi = std::f64::consts::PI;
    for row in r["rows"].as_array().unwrap() {
        let k = row["k"].as_f64().unwrap();
        let m = row["minimal_popp_total"].as_f64().unwrap();
        let expected = 1.0 / (2f64.sqrt() * k * k);
        assert!((m - expected).abs() <= 1e-9 * expected);
        if k >= 2.0 {
            let fiber = row["fiber_length"].as_f64().unwrap();
            let expected = (2.0 / k) * (k * pi - pi * pi / (k * k)).sqrt();
            assert!((fiber - expected).abs() <= 1e-9 * expected, "k = {k}");
        }
    }
}

#[test]
fn csv_output_has_a_fixed_header() {
    let (code, out, _) = heisgeo(&[
        "sequence",
        "--spec",
        fixture("ex-4-9.json").to_str().unwrap(),
        "--volume-floor",
        "0.5",
        "--csv",
    ]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        heisgeo_cli::sequence::CSV_HEADER.join(",")
    );
    assert_eq!(lines.count(), 50);
}

#[test]
fn validation_errors_exit_with_one() {
    let bad = write_temp(
        "singular.json",
        r#"{"n": 1, "lattice": [1], "matrix": [[1, 0, 0], [1, 0, 0], [0, 0, 1]]}"#,
    );
    let (code, out, err) = heisgeo(&["invariants", "--input", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    let kind = json(&err)["error"]["kind"].as_str().unwrap().to_string();
    assert!(
        kind == "not_bracket_generating" || kind == "invalid_metric",
        "{kind}"
    );

    let lattice = write_temp(
        "lattice.json",
        r#"{"n": 2, "lattice": [2, 3], "matrix": [[1,0,0,0,0],[0,1,0,0,0],[0,0,1,0,0],[0,0,0,1,0],[0,0,0,0,1]]}"#,
    );
    let (code, _, err) = heisgeo(&[
        "volume",
        "--input",
        lattice.to_str().unwrap(),
        "--kind",
        "popp",
    ]);
    assert_eq!(code, 1);
    assert_eq!(json(&err)["error"]["kind"], "invalid_lattice");

    let sub = fixture("subriemannian.json");
    let (code, _, err) = heisgeo(&["ricci", "--input", sub.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(json(&err)["error"]["kind"], "unsupported_subriemannian");

    let (code, _, err) = heisgeo(&["invariants", "--input", "/nonexistent/file.json"]);
    assert_eq!(code, 1);
    assert_eq!(json(&err)["error"]["kind"], "input");

    let (code, _, err) = heisgeo(&["volume", "--kind", "riemannian"]);
    assert_eq!(code, 1);
    assert_eq!(json(&err)["error"]["kind"], "usage");
}

#[test]
fn sequence_member_errors_name_k() {
    let spec = write_temp(
        "bad-family.json",
        r#"{"n": 1, "lattice": [1], "family": {"kind": "diagonal-parametric", "entries": ["1", "k - 4", "1"], "k_range": [1, 10]}}"#,
    );
    let (code, _, err) = heisgeo(&[
        "sequence",
        "--spec",
        spec.to_str().unwrap(),
        "--volume-floor",
        "1",
    ]);
    assert_eq!(code, 1);
    let msg = json(&err)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("k = 4"), "{msg}");
}

#[test]
fn solver_failure_exits_with_two() {
    let o = heisgeo_cli::error_outcome(heisgeo::Error::SolverFailure {
        best_residual: 0.25,
    });
    assert_eq!(o.code, 2);
    assert!(o.stdout.is_empty());
    let e = json(&o.stderr);
    assert_eq!(e["error"]["kind"], "solver_failure");
    assert!(e["error"]["message"].as_str().unwrap().contains("2.5e-1"));
}

#[test]
fn help_and_version_succeed() {
    let o = run(["heisgeo", "--help"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("sequence"));
    let o = run(["heisgeo", "--version"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.starts_with("heisgeo "));
}

#[test]
fn tilted_volume_at_zero_is_popp() {
    let input = fixture("sheared-n2.json");
    let input = input.to_str().unwrap();
    let popp = run(["heisgeo", "volume", "--input", input, "--kind", "popp"]);
    let tilted = run([
        "heisgeo", "volume", "--input", input, "--kind", "tilted", "--t", "0,0,0,0",
    ]);
    let shifted = run([
        "heisgeo",
        "volume",
        "--input",
        input,
        "--kind",
        "tilted",
        "--t",
        "-0.5,0,0.2,0",
    ]);
    let coeff = |o: &heisgeo_cli::Outcome| json(&o.stdout)["coefficient"].as_f64().unwrap();
    assert!((coeff(&popp) - coeff(&tilted)).abs() < 1e-12 * coeff(&popp));
    assert!(coeff(&shifted) > coeff(&tilted));
}

#[test]
fn lattice_bound_for_unit_data() {
    let o = run(["heisgeo", "lattice-bound", "--D", "1", "--V", "1", "--list"]);
    assert_eq!(o.code, 0);
    let v = json(&o.stdout);
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((v["bound"].as_f64().unwrap() - 64.0 * pi2).abs() < 1e-12 * 64.0 * pi2);
    assert_eq!(v["count"], 631);
    assert_eq!(v["lattices"].as_array().unwrap().len(), 631);
}

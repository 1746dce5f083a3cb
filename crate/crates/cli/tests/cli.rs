use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_brinkmann"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.metric"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn check_verdicts() {
    let cases = [
        ("flat", "flat"),
        ("cw4_order1", "locally_symmetric"),
        ("cw4_order2", "proper_second_symmetric"),
        ("cw4_order3", "not_second_symmetric"),
        ("cw4_order2_x_sphere", "proper_second_symmetric"),
        ("cw4_order1_x_hyperbolic", "locally_symmetric"),
        ("scrambled_cw4_order2", "proper_second_symmetric"),
        ("cw4_order2_generated", "proper_second_symmetric"),
    ];
    for (name, verdict) in cases {
        let f = fixture(name);
        let out = run(&["check", f.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out);
        assert_eq!(v["verdict"], verdict, "{name}");
        assert_eq!(v["schema_version"], 1);
    }
}

#[test]
fn depth_one_leaves_second_order_open() {
    let f = fixture("cw4_order2");
    let out = run(&["check", f.to_str().unwrap(), "--depth", "1"]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["verdict"], "undetermined");
    let f = fixture("cw4_order1");
    let out = run(&["check", f.to_str().unwrap(), "--depth", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["verdict"], "locally_symmetric");
}

#[test]
fn check_output_is_byte_deterministic() {
    let f = fixture("cw4_order2_x_sphere");
    let a = run(&["check", f.to_str().unwrap(), "--seed", "3"]);
    let b = run(&["check", f.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(a.stdout.ends_with(b"}\n"));
}

#[test]
fn check_writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let f = fixture("flat");
    let out = run(&["check", f.to_str().unwrap(), "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["verdict"], "flat");
}

#[test]
fn parse_errors_carry_positions() {
    let f = fixture("bad_expr");
    let out = run(&["check", f.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad_expr.metric:4:15:"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.metric");
    std::fs::write(&path, "dimension = 4\n[metric]\nH = \"u\"\nQ = \"1\"\n").unwrap();
    let out = run(&["check", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("typo.metric:4:1:"), "{err}");
}

#[test]
fn missing_file_is_an_error() {
    let out = run(&["check", "/nonexistent/x.metric"]);
    assert_eq!(code(&out), 1);
}

fn metric_line<'a>(text: &'a str, key: &str) -> &'a str {
    let prefix = format!("{key} = ");
    text.lines()
        .find_map(|l| l.strip_prefix(prefix.as_str()))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

#[test]
fn generate_examples() {
    let out = run(&["generate", "cw", "--d", "4", "--p", "0", "--p", "diag(1,0)"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(metric_line(&text, "H"), "\"u*x2^2\"");

    let out = run(&["generate", "cw", "--d", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(metric_line(&text, "H"), "\"0\"");

    let base = fixture("cw4_order2");
    let out = run(&["generate", "product", "--base", base.to_str().unwrap(), "--block", "sphere:1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(metric_line(&text, "g55"), "\"sin(x4)^2\"");
    assert_eq!(metric_line(&text, "dimension"), "6");
}

#[test]
fn generate_rejects_bad_matrices() {
    let out = run(&["generate", "cw", "--d", "4", "--p", "diag(1,2,3)"]);
    assert_eq!(code(&out), 1);
    let out = run(&["generate", "cw", "--d", "4", "--p", "1,2;3"]);
    assert_eq!(code(&out), 1);
    let out = run(&["generate", "cw", "--d", "4", "--p", "1,2;3,4"]);
    assert_eq!(code(&out), 1, "asymmetric P must be refused");
    let out = run(&["generate", "fixture", "no_such_space"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn generated_file_round_trips_through_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.metric");
    let out = run(&[
        "generate", "cw", "--d", "4", "--p", "0.5,0.25;0.25,-1", "--p", "diag(1,0)", "--block", "sphere:2",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["check", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["verdict"], "proper_second_symmetric");
    assert_eq!(json(&out)["dimension"], 6);
}

#[test]
fn oracle_diff_passes_on_fixtures() {
    for name in ["cw4_order2_x_sphere", "scrambled_cw4_order2", "random_1", "rotation_w"] {
        let f = fixture(name);
        let out = run(&["oracle-diff", f.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}");
        let v = json(&out);
        assert_eq!(v["pass"], true);
        assert!(v["max_rel"].as_f64().unwrap() < 1e-8);
    }
}

#[test]
fn oracle_diff_random_seed_42() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.metric");
    let out = run(&["generate", "random", "--n", "5", "--seed", "42", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let out = run(&["oracle-diff", path.to_str().unwrap(), "--schema", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("block,max_abs,max_rel\n"));
    assert!(text.lines().count() > 20);
}

#[test]
fn oracle_diff_detects_a_perturbed_block() {
    let f = fixture("cw4_order2");
    for block in ["A", "Atil", "nabla_0 nabla_0 R^1_i0j"] {
        let p = format!("{block}=1e-6");
        let out = run(&["oracle-diff", f.to_str().unwrap(), "--perturb", &p]);
        assert_eq!(code(&out), 1, "{block}");
        let v = json(&out);
        assert_eq!(v["pass"], false);
        let hit = v["blocks"].as_array().unwrap().iter().find(|b| b["name"] == block).unwrap();
        assert!(hit["max_abs"].as_f64().unwrap() > 5e-7);
    }
}

#[test]
fn canonicalize_recovers_normal_form() {
    let f = fixture("scrambled_cw4_order2");
    let out = run(&["canonicalize", f.to_str().unwrap(), "--table", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["verdict"], "proper_second_symmetric");
    let diag: Vec<f64> = v["normal_form"]["a1_diagonal"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((diag[0] + 1.0).abs() < 1e-9 && diag[1].abs() < 1e-9, "{diag:?}");
    assert!(v["orthogonality_error"].as_f64().unwrap() < 1e-9);
}

#[test]
fn canonicalize_refuses_non_proper() {
    for name in ["cw4_order3", "cw4_order1"] {
        let f = fixture(name);
        let out = run(&["canonicalize", f.to_str().unwrap()]);
        assert_eq!(code(&out), 2, "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("not proper_second_symmetric"));
    }
}

fn csv(out: &Output) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (head, rows)
}

#[test]
fn transport_nullsec_csv() {
    let f = fixture("cw4_order2");
    let out = run(&["transport", f.to_str().unwrap(), "--experiment", "nullsec", "--steps", "200"]);
    assert_eq!(code(&out), 0);
    let (head, rows) = csv(&out);
    assert_eq!(head, ["tau", "u", "K", "dK"]);
    assert_eq!(rows.len(), 201);
    for r in &rows {
        assert!((r[2] - 2.0 * r[1]).abs() < 1e-8, "{r:?}");
        assert!((r[3] - 2.0).abs() < 1e-6);
    }
}

#[test]
fn transport_geodesic_and_d0() {
    let f = fixture("cw4_order2");
    let out = run(&[
        "transport", f.to_str().unwrap(), "--experiment", "geodesic", "--q0", "-0.5,0,0.2,-0.1", "--v0", "1,0.3,0.4,0",
        "--span", "1", "--steps", "400",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (head, rows) = csv(&out);
    assert_eq!(head.last().unwrap(), "killing");
    let e0 = rows[0][9];
    assert!(rows.iter().all(|r| (r[9] - e0).abs() < 1e-7 && (r[10] - 1.0).abs() < 1e-7));

    let f = fixture("rotation_w");
    let out = run(&["transport", f.to_str().unwrap(), "--experiment", "d0", "--steps", "400", "--vector", "0,2"]);
    assert_eq!(code(&out), 0);
    let (head, rows) = csv(&out);
    assert_eq!(head, ["u", "X2", "X3", "norm"]);
    assert!(rows.iter().all(|r| (r[3] - 2.0).abs() < 1e-8));
}

#[test]
fn transport_leaving_the_box_fails() {
    let f = fixture("cw4_order2");
    let out = run(&["transport", f.to_str().unwrap(), "--experiment", "nullsec", "--span", "10"]);
    assert_eq!(code(&out), 1);
}

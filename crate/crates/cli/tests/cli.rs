use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

fn fairpath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairpath"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn synth_audit_args<'a>(data_csv: &'a str, scores_csv: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "audit",
        "--train",
        data_csv,
        "--test",
        "none",
        "--protected",
        "a",
        "--target",
        "y",
        "--positive-label",
        "1",
        "--negative-label",
        "0",
        "--group1-label",
        "1",
        "--group0-label",
        "0",
        "--drop",
        "",
        "--external-scores",
        scores_csv,
        "--out",
        out,
    ]
}

#[test]
fn exit_codes_follow_the_error_kind() {
    assert_eq!(code(&fairpath(&["audit", "--alpha", "1.5"])), 2);
    assert_eq!(code(&fairpath(&["audit", "--rank-basis", "sideways"])), 2);
    assert_eq!(code(&fairpath(&["audit", "--no-such-flag"])), 2);
    assert_eq!(
        code(&fairpath(&[
            "audit",
            "--train",
            "/definitely/not/here.csv",
            "--test",
            "none"
        ])),
        3
    );
    let train = data("adult.data");
    let out = fairpath(&[
        "train",
        "--train",
        &train,
        "--test",
        "none",
        "--max-iter",
        "1",
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn scoring_with_a_model_from_another_schema_is_a_contract_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = s(&dir.path().join("model.txt"));
    let train = data("adult.data");
    let out = fairpath(&[
        "train",
        "--train",
        &train,
        "--test",
        "none",
        "--drop",
        "fnlwgt,education",
        "--model",
        &model,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = fairpath(&[
        "score", "--train", &train, "--test", "none", "--model", &model,
    ]);
    assert_eq!(code(&out), 5);
}

#[test]
fn train_then_score_matches_the_audit_scores() {
    let dir = tempfile::tempdir().unwrap();
    let model = s(&dir.path().join("model.txt"));
    let scores = dir.path().join("scores.csv");
    let train = data("adult.data");
    assert_eq!(
        code(&fairpath(&[
            "train", "--train", &train, "--test", "none", "--model", &model
        ])),
        0
    );
    assert_eq!(
        code(&fairpath(&[
            "score",
            "--train",
            &train,
            "--test",
            "none",
            "--model",
            &model,
            "--scores-out",
            &s(&scores)
        ])),
        0
    );
    let text = fs::read_to_string(&scores).unwrap();
    assert!(text.starts_with("row_index,score\n"));
    assert_eq!(text.lines().count(), 30_162 + 1);

    // Feeding the scores back as an external scorer reproduces the built-in fit.
    let out = dir.path().join("audit");
    let code_ = code(&fairpath(&[
        "audit",
        "--train",
        &train,
        "--test",
        "none",
        "--external-scores",
        &s(&scores),
        "--out",
        &s(&out),
    ]));
    assert_eq!(code_, 0);
    let a = &report(&out)["path_model"]["score_equation"][1]["estimate"];
    assert!((a.as_f64().unwrap() - 0.117177).abs() < 1e-6);
}

#[test]
fn constant_external_scores_are_unbiased() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    assert_eq!(
        code(&fairpath(&["synth", "--n", "300", "--out", &s(&synth)])),
        0
    );
    let constant = dir.path().join("constant.csv");
    let mut text = String::from("row_index,score\n");
    for i in 0..300 {
        text.push_str(&format!("{i},0.5\n"));
    }
    fs::write(&constant, text).unwrap();
    let out = dir.path().join("out");
    let (d, c, o) = (s(&synth.join("data.csv")), s(&constant), s(&out));
    let run = fairpath(&synth_audit_args(&d, &c, &o));
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r = report(&out);
    assert_eq!(
        r["path_model"]["score_equation"][1]["estimate"].as_f64(),
        Some(0.0)
    );
    assert_eq!(r["policy"]["biased"], Value::Bool(false));
    assert_eq!(
        r["policy"]["raw_threshold"],
        r["policy"]["mitigated_threshold"]
    );
    let variants = &r["splits"][0]["variants"];
    assert_eq!(variants[0]["confusion"], variants[1]["confusion"]);
}

#[test]
fn synthetic_data_round_trips_through_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    let gen = fairpath(&[
        "synth",
        "--n",
        "2000",
        "--seed",
        "3",
        "--beta-a-yhat",
        "0.25",
        "--out",
        &s(&synth),
    ]);
    assert_eq!(code(&gen), 0);
    let out = dir.path().join("out");
    let (d, c, o) = (
        s(&synth.join("data.csv")),
        s(&synth.join("scores.csv")),
        s(&out),
    );
    let run = fairpath(&synth_audit_args(&d, &c, &o));
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r = report(&out);
    let truth = [0.1, 0.25, 0.5];
    for (row, b) in r["path_model"]["score_equation"]
        .as_array()
        .unwrap()
        .iter()
        .zip(truth)
    {
        let est = row["estimate"].as_f64().unwrap();
        let se = row["std_error"].as_f64().unwrap();
        assert!((est - b).abs() < 4.0 * se, "{row}");
    }
    assert_eq!(r["policy"]["biased"], Value::Bool(true));
    let tables = fs::read_to_string(out.join("tables.txt")).unwrap();
    assert!(tables.contains("No test split configured"));
}

#[test]
fn summary_is_recomputable_from_the_confusions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (train, test) = (data("adult.data"), data("adult.test"));
    assert_eq!(
        code(&fairpath(&[
            "audit",
            "--train",
            &train,
            "--test",
            &test,
            "--out",
            &s(&out)
        ])),
        0
    );
    let r = report(&out);
    let mut rows = 0;
    for split in r["splits"].as_array().unwrap() {
        for v in split["variants"].as_array().unwrap() {
            let cells = &v["confusion"]["cells"];
            let c = |a: usize, y: usize, p: usize| cells[a][y][p].as_u64().unwrap() as f64;
            let rate0 = c(0, 1, 1) / (c(0, 1, 0) + c(0, 1, 1));
            let rate1 = c(1, 1, 1) / (c(1, 1, 0) + c(1, 1, 1));
            let total: f64 = (0..8).map(|k| c(k / 4, (k / 2) % 2, k % 2)).sum();
            let correct = c(0, 0, 0) + c(0, 1, 1) + c(1, 0, 0) + c(1, 1, 1);
            assert_eq!(v["eo_rate_group0"].as_f64(), Some(rate0));
            assert_eq!(v["eo_rate_group1"].as_f64(), Some(rate1));
            assert_eq!(v["eo_gap"].as_f64(), Some((rate1 - rate0).abs()));
            assert_eq!(v["accuracy"].as_f64(), Some(correct / total));
            rows += 1;
        }
    }
    assert_eq!(rows, 4);

    // The CSV tables carry the same counts.
    let csv = fs::read_to_string(out.join("tables.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("split,variant,a,y,pred0,pred1"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let split = r["splits"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["split"] == f[0])
            .unwrap();
        let v = split["variants"]
            .as_array()
            .unwrap()
            .iter()
            .find(|v| v["variant"] == f[1])
            .unwrap();
        let (a, y): (usize, usize) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        assert_eq!(
            v["confusion"]["cells"][a][y][0].as_u64(),
            Some(f[4].parse().unwrap())
        );
        assert_eq!(
            v["confusion"]["cells"][a][y][1].as_u64(),
            Some(f[5].parse().unwrap())
        );
    }
    for name in ["tables.txt", "policy.txt", "schema.txt", "model.txt"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(r["report_version"], 1);
    assert_eq!(r["plot_data"]["histograms"].as_array().unwrap().len(), 8);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("audit.conf");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!("# test config\ntrain = {}\ntest = none\nalpha = 0.01\nround-coefficient = 3\nout = {}\n", data("adult.data"), s(&out)),
    )
    .unwrap();
    let run = fairpath(&["audit", "--config", &s(&cfg), "--alpha", "0.2"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r = report(&out);
    assert_eq!(r["config"]["alpha"].as_f64(), Some(0.2));
    assert_eq!(r["config"]["round_coefficient"], 3);
    assert_eq!(r["policy"]["bias_coefficient"].as_f64(), Some(0.117));
    assert_eq!(r["splits"].as_array().unwrap().len(), 1);
}

#[test]
fn calibrate_reports_a_rate() {
    let out = fairpath(&["calibrate", "--beta-a-yhat", "0", "--trials", "200"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("/ 200 at alpha 0.05"));
    assert_eq!(code(&fairpath(&["calibrate", "--trials", "10"])), 2);
}

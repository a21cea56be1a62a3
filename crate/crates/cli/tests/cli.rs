use std::path::Path;
use std::process::{Command, Output};

fn subrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subrec")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = subrec(args);
    assert!(out.status.success(), "subrec {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).to_string_lossy().into_owned()
}

#[test]
fn help_exits_zero() {
    let out = subrec(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["ingest", "split", "embed", "train", "evaluate", "recommend", "similar", "popularity"] {
        assert!(text.contains(cmd), "help lacks {cmd}");
    }
    assert!(subrec(&["train", "--help"]).status.success());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = subrec(&["split", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.srds");
    let out_path = dir.path().join("m.bin");
    let out = subrec(&[
        "train",
        "bpr",
        "--train",
        missing.to_str().unwrap(),
        "--seed",
        "1",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.srds"));
    assert!(!out_path.exists());
}

#[test]
fn missing_seed_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("all.srds");
    ok(&["ingest", "--input", &fixture("comments_1k.jsonl"), "--output", ds.to_str().unwrap()]);
    let out = subrec(&[
        "split",
        "--dataset",
        ds.to_str().unwrap(),
        "--output-train",
        dir.path().join("a").to_str().unwrap(),
        "--output-test",
        dir.path().join("b").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn bpr_pipeline_and_queries() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    ok(&["ingest", "--input", &fixture("comments_1k.jsonl"), "--output", &p("all.srds")]);
    assert!(Path::new(&p("all.srds.manifest.json")).exists());
    ok(&[
        "split",
        "--dataset",
        &p("all.srds"),
        "--test-fraction",
        "0.2",
        "--seed",
        "1",
        "--output-train",
        &p("train.srds"),
        "--output-test",
        &p("test.srds"),
    ]);
    ok(&["train", "bpr", "--train", &p("train.srds"), "--epochs", "5", "--seed", "2", "--output", &p("bpr.bin")]);
    ok(&[
        "evaluate",
        "--model",
        &p("bpr.bin"),
        "--train",
        &p("train.srds"),
        "--test",
        &p("test.srds"),
        "--report",
        &p("auc.txt"),
    ]);
    let report = std::fs::read_to_string(p("auc.txt")).unwrap();
    let auc: f64 = report.lines().find_map(|l| l.strip_prefix("auc = ")).expect("auc line").parse().unwrap();
    assert!((0.0..=1.0).contains(&auc), "auc {auc}");
    assert!(Path::new(&p("auc.txt.users.csv")).exists());

    let table =
        ok(&["recommend", "--model", &p("bpr.bin"), "--dataset", &p("train.srds"), "--user", "user03", "-k", "5"]);
    assert_eq!(table.lines().count(), 6, "{table}");

    let pop = ok(&["popularity", "--dataset", &p("all.srds"), "--top", "3"]);
    assert_eq!(pop.lines().count(), 4, "{pop}");

    let out = subrec(&["recommend", "--model", &p("bpr.bin"), "--dataset", &p("train.srds"), "--user", "nobody"]);
    assert!(!out.status.success());
}

#[test]
fn config_file_supplies_options() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    ok(&["ingest", "--input", &fixture("comments_1k.jsonl"), "--output", &p("all.srds")]);
    std::fs::write(p("run.conf"), "# split defaults\nseed = 9\ntest-fraction = 0.2\n").unwrap();
    ok(&[
        "split",
        "--config",
        &p("run.conf"),
        "--dataset",
        &p("all.srds"),
        "--output-train",
        &p("train.srds"),
        "--output-test",
        &p("test.srds"),
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p("train.srds.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["options"]["test_fraction"], 0.2);
}

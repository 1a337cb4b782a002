use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cdn_core::mvn::normal_cdf;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn cdn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdn")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_passes_a_valid_model() {
    let o = cdn(&["check", path(&data("chain.cdn"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("result\tPASS\n"));
}

#[test]
fn check_reports_a_decreasing_table_entry() {
    let o = cdn(&["check", path(&data("bad_table.cdn"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("witness\tt\tsubset [0]"), "{}", stdout(&o));
}

#[test]
fn check_rejects_malformed_input() {
    let o = cdn(&["check", path(&data("malformed.cdn"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("malformed.cdn:2:5"), "{}", stderr(&o));
}

#[test]
fn infer_writes_the_marginal_for_a_separable_model() {
    let o = cdn(&["infer", path(&data("separable.cdn")), "-e", path(&data("y0.ev")), "-q", "x"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("support"))
        .map(|l| l.split('\t').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    let top = normal_cdf(4.0);
    for r in rows {
        assert!((r[3] - normal_cdf(r[0]) / top).abs() < 1e-11, "{r:?}");
    }
}

#[test]
fn infer_prints_root_pdf_when_fully_observed() {
    let o = cdn(&["infer", path(&data("separable.cdn")), "-e", path(&data("xy0.ev"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    let v: f64 = text.trim().strip_prefix("rootPdf\t").unwrap().parse().unwrap();
    assert!((v - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
}

#[test]
fn infer_input_and_structure_errors() {
    let unknown = cdn(&["infer", path(&data("separable.cdn")), "-e", path(&data("y0.ev")), "-q", "nope"]);
    assert_eq!(unknown.status.code(), Some(2));
    let cycle = cdn(&["infer", path(&data("cycle.cdn")), "-q", "x"]);
    assert_eq!(cycle.status.code(), Some(1));
    assert!(stderr(&cycle).contains("cycle"));
}

#[test]
fn oracle_suites() {
    let t = cdn(&["oracle", "table1"]);
    assert_eq!(t.status.code(), Some(0));
    assert_eq!(stdout(&t).lines().filter(|l| l.contains("\tPASS\t")).count(), 8);
    assert!(stdout(&t).contains("25/72 vs 10/27"));
    let d = cdn(&["oracle", "dsp", "--seeds", "10"]);
    assert_eq!(d.status.code(), Some(0));
    assert!(stdout(&d).contains("dsp\tseeds 10\tmax_deviation"));
    let empty = cdn(&["oracle", "dsp", "--seeds", "0"]);
    assert_eq!(empty.status.code(), Some(0));
    assert!(stderr(&empty).contains("--seeds 0"));
}

#[test]
fn ranking_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let params = dir.path().join("params.toml");
    let synth = cdn(&["rank", "synth", "--players", "20", "--games", "60", "-o", path(&log)]);
    assert_eq!(synth.status.code(), Some(0));
    assert_eq!(cdn(&["rank", "fit", path(&log), "-o", path(&params)]).status.code(), Some(0));
    let mut series = Vec::new();
    for name in ["a.tsv", "b.tsv"] {
        let out = dir.path().join(name);
        let o = cdn(&["rank", "eval", path(&log), "-p", path(&params), "-o", path(&out), "--window", "20"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        series.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(series[0], series[1]);
    let text = String::from_utf8(series.remove(0)).unwrap();
    assert!(text.starts_with("# game\tcumulative_error\n1\t"));
    assert!(text.contains("# random\tfinal"));
    // no temporary files are left behind
    let leftovers = std::fs::read_dir(dir.path()).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp")
    });
    assert_eq!(leftovers.count(), 0);
}

#[test]
fn rank_fit_warns_on_a_single_level() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("tied.jsonl");
    std::fs::write(
        &log,
        r#"{"game_id":"a","game_type":"HeadToHead","teams":[["p"],["q"]],"ranks":[1,1],"scores":[[3.0],[3.0]]}
{"game_id":"b","game_type":"HeadToHead","teams":[["p"],["r"]],"ranks":[2,2],"scores":[[4.0],[5.0]]}
"#,
    )
    .unwrap();
    let o = cdn(&["rank", "fit", path(&log)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("cutpoints = []"));
    assert!(stderr(&o).contains("cutpoint list is empty"));
}

#[test]
fn rank_predict_handles_unseen_players() {
    let dir = tempfile::tempdir().unwrap();
    let history = dir.path().join("history.jsonl");
    let upcoming = dir.path().join("upcoming.jsonl");
    assert_eq!(cdn(&["rank", "synth", "--players", "10", "--games", "30", "-o", path(&history)]).status.code(), Some(0));
    std::fs::write(
        &upcoming,
        r#"{"game_id":"next","game_type":"HeadToHead","teams":[["p001"],["stranger"]],"ranks":[1,1]}
"#,
    )
    .unwrap();
    let o = cdn(&["rank", "predict", path(&history), path(&upcoming)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("`stranger` is unseen"));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("next\t"));
}

#[test]
fn rank_schema_errors_name_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.jsonl");
    std::fs::write(
        &log,
        r#"{"game_id":"a","game_type":"HeadToHead","teams":[["p"],["q"]],"ranks":[1,2],"scores":[[3.0],[1.0]]}
{"game_id":"b","game_type":"HeadToHead","teams":[["p"],["p"]],"ranks":[1,2]}
"#,
    )
    .unwrap();
    let o = cdn(&["rank", "fit", path(&log)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("record 1"), "{}", stderr(&o));
}

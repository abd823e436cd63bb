use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_lexevolve");

fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini")
}

fn lexevolve(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("LEXEVOLVE_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(args: &[&str]) -> String {
    let out = lexevolve(args);
    assert_eq!(
        code(&out),
        0,
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn index_writes_identical_files_on_rebuild() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        ok(&["index", "--dataset", s(&mini()), "--scorer", "evolved-bm25", "-o", s(out)]);
    }
    for ch in ["base", "prefix", "bigram", "micro"] {
        let rel = format!("index/mini/{ch}.idx");
        let (x, y) = (fs::read(a.join(&rel)).unwrap(), fs::read(b.join(&rel)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{ch} index differs between builds");
    }
    // bm25 reads only the base channel.
    let c = tmp.path().join("c");
    ok(&["index", "--dataset", s(&mini()), "-o", s(&c)]);
    assert!(c.join("index/mini/base.idx").exists());
    assert!(!c.join("index/mini/micro.idx").exists());
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let out = lexevolve(&["index", "--dataset", "/definitely/not/here"]);
    assert_eq!(code(&out), 2);
    let out = lexevolve(&["eval"]);
    assert_eq!(code(&out), 2, "no datasets configured");
}

#[test]
fn bad_overrides_and_params_are_usage_errors() {
    let m = mini();
    for args in [
        vec!["eval", "--dataset", s(&m), "--set", "scorer.k1=-1"],
        vec!["eval", "--dataset", s(&m), "--set", "scorer.nonsense=1"],
        vec!["eval", "--dataset", s(&m), "--scorer", "bm26"],
        vec!["eval", "--dataset", s(&m), "--set", "novalue"],
        vec!["eval", "--dataset", s(&m), "--set", "depth=0"],
        vec!["frobnicate"],
    ] {
        assert_eq!(code(&lexevolve(&args)), 2, "{args:?}");
    }
}

#[test]
fn malformed_corpus_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("broken");
    fs::create_dir_all(d.join("qrels")).unwrap();
    fs::write(d.join("corpus.jsonl"), "{not json}\n").unwrap();
    fs::write(d.join("queries.jsonl"), "").unwrap();
    fs::write(d.join("qrels/test.tsv"), "query-id\tcorpus-id\tscore\n").unwrap();
    let out = lexevolve(&["index", "--dataset", s(&d), "-o", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 1);
}

fn report(dir: &Path, scorer: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("report.{scorer}.json"))).unwrap()).unwrap()
}

#[test]
fn eval_matches_trec_eval_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let table = ok(&["eval", "--dataset", s(&mini()), "--set", "gain=linear", "-o", s(&out)]);
    assert!(table.contains("mini"));
    // The run file is byte-identical to the checked-in one that trec_eval scored.
    let run = fs::read_to_string(out.join("runs/mini.bm25.trec")).unwrap();
    assert_eq!(run, fs::read_to_string(mini().join("bm25.linear.trec")).unwrap());

    let expected: BTreeMap<String, BTreeMap<String, f64>> =
        serde_json::from_str(&fs::read_to_string(mini().join("expected.json")).unwrap()).unwrap();
    let rep = report(&out, "bm25");
    let per_query = &rep["datasets"][0]["per_query"];
    for (q, m) in &expected {
        for metric in ["ndcg10", "recall100"] {
            let got = per_query[q][metric].as_f64().unwrap();
            assert!((got - m[metric]).abs() < 1e-4, "{q} {metric}: {got} vs {}", m[metric]);
        }
    }
    // Fitness recomputed from the report's own means.
    let (r, n) = (rep["mean_recall100"].as_f64().unwrap(), rep["mean_ndcg10"].as_f64().unwrap());
    assert!((rep["fitness"].as_f64().unwrap() - (0.8 * r + 0.2 * n)).abs() < 1e-12);
    assert!(rep["indexing_ms_per_doc"].as_f64().unwrap() > 0.0);
    assert!(rep["query_ms_per_query"].as_f64().unwrap() > 0.0);

    // Default exponential gain differs on the graded query q3.
    let out2 = tmp.path().join("o2");
    ok(&["eval", "--dataset", s(&mini()), "-o", s(&out2)]);
    let exp = report(&out2, "bm25")["datasets"][0]["per_query"]["q3"]["ndcg10"].as_f64().unwrap();
    assert!((exp - expected["q3"]["ndcg10"]).abs() > 1e-3);
}

#[test]
fn config_file_and_overrides_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    let out = tmp.path().join("o");
    fs::write(
        &cfg,
        serde_json::json!({
            "datasets": [{"path": mini()}],
            "scorer": {"name": "ql-dir", "mu": 100.0},
            "output_dir": out,
        })
        .to_string(),
    )
    .unwrap();
    ok(&["eval", "--config", s(&cfg), "--set", "scorer.mu=50"]);
    let rep = report(&out, "ql-dir");
    assert_eq!(rep["scorer"], "ql-dir");
    // --scorer replaces the configured scorer wholesale.
    ok(&["eval", "--config", s(&cfg), "--scorer", "evolved-ql"]);
    assert!(out.join("runs/mini.evolved-ql.trec").exists());
}

fn write_run(path: &Path, rows: &[(&str, &str, f64)]) {
    let text: String = rows
        .iter()
        .enumerate()
        .map(|(i, (q, d, sc))| format!("{q} Q0 {d} {} {sc} t\n", i + 1))
        .collect();
    fs::write(path, text).unwrap();
}

fn write_qrels(path: &Path, rows: &[(&str, &str, u32)]) {
    let mut text = String::from("query-id\tcorpus-id\tscore\n");
    for (q, d, g) in rows {
        text += &format!("{q}\t{d}\t{g}\n");
    }
    fs::write(path, text).unwrap();
}

#[test]
fn compare_identical_runs_has_p_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    ok(&["eval", "--dataset", s(&mini()), "-o", s(&out)]);
    let run = out.join("runs/mini.bm25.trec");
    let json = tmp.path().join("cmp.json");
    let qrels = mini().join("qrels/test.tsv");
    ok(&["compare", "--run-a", s(&run), "--run-b", s(&run), "--qrels", s(&qrels), "--json", s(&json)]);
    let rows: Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    for row in rows.as_array().unwrap() {
        assert_eq!(row["p"], 1.0);
        assert_eq!(row["significant"], false);
    }
}

#[test]
fn compare_rejects_different_query_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, q) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("q.tsv"));
    write_run(&a, &[("q1", "d1", 1.0)]);
    write_run(&b, &[("q2", "d1", 1.0)]);
    write_qrels(&q, &[("q1", "d1", 1), ("q2", "d1", 1)]);
    let out = lexevolve(&["compare", "--run-a", s(&a), "--run-b", s(&b), "--qrels", s(&q)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("different query sets"));
}

#[test]
fn compare_t_statistic_matches_hand_formula() {
    // Recall@100 per query: A = {1, 1, 1}, B = {0, 1/2, 2/3}. The paired
    // differences are {1, 1/2, 1/3}; t = mean / (sd / sqrt(3)).
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, q) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("q.tsv"));
    write_qrels(
        &q,
        &[("q1", "x", 1), ("q2", "y1", 1), ("q2", "y2", 1), ("q3", "z1", 1), ("q3", "z2", 1), ("q3", "z3", 1)],
    );
    write_run(
        &a,
        &[("q1", "x", 3.0), ("q2", "y1", 3.0), ("q2", "y2", 2.0), ("q3", "z1", 3.0), ("q3", "z2", 2.0), ("q3", "z3", 1.0)],
    );
    write_run(&b, &[("q1", "n", 3.0), ("q2", "y1", 3.0), ("q3", "z1", 3.0), ("q3", "z2", 2.0)]);
    let json = tmp.path().join("cmp.json");
    ok(&["compare", "--run-a", s(&a), "--run-b", s(&b), "--qrels", s(&q), "--json", s(&json)]);
    let rows: Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    let recall = rows.as_array().unwrap().iter().find(|r| r["metric"] == "R@100").unwrap();
    let d = [1.0, 0.5, 1.0 / 3.0];
    let mean = d.iter().sum::<f64>() / 3.0;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    let t = mean / (sd / 3f64.sqrt());
    assert!((recall["t"].as_f64().unwrap() - t).abs() < 1e-9);
    assert_eq!(recall["df"], 2);
}

#[test]
fn evolve_zero_steps_echoes_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    ok(&["evolve", "--dataset", s(&mini()), "--steps", "0", "-q", "-o", s(&out)]);
    let best = fs::read_to_string(out.join("best_program.txt")).unwrap();
    let v: Value = serde_json::from_str(&best).unwrap();
    assert_eq!(v["name"], "bm25");
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "header plus step 0");
}

fn toy_evolve(out: &Path, seed: &str) -> String {
    ok(&[
        "evolve",
        "--steps",
        "60",
        "-q",
        "--seed",
        seed,
        "--set",
        "evolve.evaluator.kind=marker",
        "--set",
        "evolve.mutator.kind=toy",
        "--set",
        "evolve.population.complexity_range=[10, 2000]",
        "-o",
        s(out),
    ])
}

#[test]
fn toy_evolution_improves_and_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    toy_evolve(&a, "11");
    toy_evolve(&b, "11");
    for f in ["best_program.txt", "best.json", "trajectory.csv", "lineage.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    let best: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(best.len(), 61);
    assert!(best.windows(2).all(|w| w[1] >= w[0]));
    assert!(best[60] > best[0]);
    let lineage = fs::read_to_string(a.join("lineage.jsonl")).unwrap();
    assert!(lineage.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
}

#[test]
fn http_backend_without_key_fails_before_step_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let res = lexevolve(&[
        "evolve",
        "--dataset",
        s(&mini()),
        "--set",
        "evolve.mutator.kind=http",
        "--set",
        "evolve.mutator.api_key_env=LEXEVOLVE_TEST_UNSET_KEY",
        "-o",
        s(&out),
    ]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("LEXEVOLVE_TEST_UNSET_KEY"));
    assert!(!out.join("lineage.jsonl").exists());
}

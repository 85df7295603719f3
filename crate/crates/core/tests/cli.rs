use std::fs;

fn cli(args: &[&str]) -> i32 {
    tweetprobe::cli::run(std::iter::once("tweetprobe").chain(args.iter().copied()))
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        assert_eq!(cli(&["synth", "--n", "300", "--seed", "4", "--out", p.to_str().unwrap()]), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 300);
}

#[test]
fn probe_writes_metrics_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    assert_eq!(cli(&["synth", "--n", "400", "--seed", "2", "--out", &p("c.jsonl")]), 0);
    let code = cli(&[
        "probe", "--corpus", &p("c.jsonl"), "--task", "hashtag", "--model", "random", "--seed", "2", "--out", &p("run"),
    ]);
    assert_eq!(code, 0);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("run/metrics.json")).unwrap()).unwrap();
    let f1 = m["macro_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    for f in ["dataset.jsonl", "model.txt", "metrics.csv", "history.json"] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }
    assert_eq!(cli(&["replay", &p("run.manifest.json"), "--out", &p("again")]), 0);
    assert_eq!(fs::read(p("run/metrics.json")).unwrap(), fs::read(p("again/metrics.json")).unwrap());
}

#[test]
fn report_renders_reference_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    assert_eq!(cli(&["report", "--format", "csv", "--out", out.to_str().unwrap()]), 0);
    let text = fs::read_to_string(out).unwrap();
    let g = tweetprobe::report::parse_grid_csv(&text).unwrap();
    assert_eq!(g.len(), 169);
}

#[test]
fn bad_input_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    assert_eq!(cli(&["synth", "--frobnicate"]), 1);
    assert_eq!(
        cli(&["tasks", "--corpus", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]),
        1
    );
    let c = dir.path().join("c.jsonl");
    assert_eq!(cli(&["synth", "--n", "50", "--out", c.to_str().unwrap()]), 0);
    assert_eq!(
        cli(&["probe", "--corpus", c.to_str().unwrap(), "--task", "not_a_task", "--model", "bow"]),
        1
    );
    assert_eq!(
        cli(&["probe", "--corpus", c.to_str().unwrap(), "--task", "length", "--model", "mystery"]),
        1
    );
}

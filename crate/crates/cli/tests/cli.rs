use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tagvalue(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tagvalue"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn synth(dir: &Path) -> String {
    let trace = dir.join("trace.tsv.gz");
    let out = tagvalue(&["synth", "--preset", "two-group", "--out", trace.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    trace.to_str().unwrap().to_owned()
}

fn small_run(trace: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--trace",
        trace,
        "--min-items",
        "10",
        "--topics",
        "1,2",
        "--iterations",
        "40",
        "--top-n",
        "100",
        "--random-size",
        "10",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    tagvalue(&args)
}

#[test]
fn missing_trace_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.tsv");
    let out = tagvalue(&[
        "ingest",
        "--trace",
        missing.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nowhere.tsv"), "{}", stderr(&out));
}

#[test]
fn ingest_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.tsv");
    fs::write(&trace, "user\titem\ttag\ttime\nalice\tbook1\tpoetry\t10\nalice\tbook2\tpoetry\t11\nbob\tbook1\tverse\t12\nbob\tbroken\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = tagvalue(&[
        "ingest",
        "--trace",
        trace.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["annotations"], 3);
    assert_eq!(manifest["users"], 2);
    assert_eq!(manifest["skipped_records"], 1);
    let snapshot = fs::read_to_string(out_dir.join("corpus.tsv")).unwrap();
    assert_eq!(snapshot.lines().next(), Some("user\titem\ttag\ttimestamp"));
    assert_eq!(snapshot.lines().count(), 4);
}

#[test]
fn bad_usage_and_config_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let o = out_dir.to_str().unwrap();
    assert_eq!(tagvalue(&["run", "--bogus", "--out", o]).status.code(), Some(1));
    assert_eq!(tagvalue(&["run", "--out", o]).status.code(), Some(1));
    assert_eq!(
        tagvalue(&["run", "--trace", "x.tsv", "--fractions", "0.5,0.5,0.5", "--out", o])
            .status
            .code(),
        Some(1)
    );

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "trace = \"x.tsv\"\nno_such_key = 1\n").unwrap();
    let out = tagvalue(&["run", "--config", cfg.to_str().unwrap(), "--out", o]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(tagvalue(&["--help"]).status.success());
}

#[test]
fn runs_are_reproducible_and_reports_check_out() {
    let dir = tempfile::tempdir().unwrap();
    let trace = synth(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = small_run(&trace, &a, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("info") && stdout.contains("naive"), "{stdout}");
    assert!(small_run(&trace, &b, &["--sequential"]).status.success());
    for f in [
        "report.json",
        "values_hidden.csv",
        "cdf_info.csv",
        "tuning.csv",
        "model_prior.bin",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let report = tagvalue(&["report", "--out", a.to_str().unwrap()]);
    assert!(report.status.success(), "{}", stderr(&report));

    // a tampered CDF table no longer reproduces D
    let cdf = a.join("cdf_info.csv");
    let text = fs::read_to_string(&cdf).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.truncate(lines.len() / 2);
    fs::write(&cdf, lines.join("\n") + "\n").unwrap();
    assert_ne!(
        tagvalue(&["report", "--out", a.to_str().unwrap()]).status.code(),
        Some(0)
    );
}

#[test]
fn staged_commands_match_run() {
    let dir = tempfile::tempdir().unwrap();
    let trace = synth(dir.path());
    let full = dir.path().join("full");
    assert!(small_run(&trace, &full, &[]).status.success());

    let cfg = full.join("config.toml");
    let c = cfg.to_str().unwrap();
    let split = dir.path().join("split");
    let models = dir.path().join("models");
    let eval = dir.path().join("eval");
    let s = split.to_str().unwrap();
    let steps: [&[&str]; 3] = [
        &["split", "--config", c, "--out", s],
        &["tune", "--config", c, "--split", s, "--out", models.to_str().unwrap()],
        &[
            "eval",
            "--config",
            c,
            "--split",
            s,
            "--models",
            models.to_str().unwrap(),
            "--out",
            eval.to_str().unwrap(),
        ],
    ];
    for args in steps {
        let out = tagvalue(args);
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
    }
    let experiments = |dir: &Path| {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
        v["experiments"].clone()
    };
    assert_eq!(experiments(&full), experiments(&eval));

    let out = tagvalue(&[
        "train",
        "--config",
        c,
        "--split",
        s,
        "--topics",
        "1,2",
        "--out",
        dir.path().join("t").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

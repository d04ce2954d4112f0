use std::path::Path;
use std::process::{Command, Output};

fn pmlp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmlp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn synth(dir: &Path, name: &str, kind: &str, seed: &str) {
    let out = pmlp(
        dir,
        &[
            "synth", "--kind", kind, "--length", "3607", "--seed", seed, "--out", name,
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
}

const SMALL: &str = r#"
n_runs = 2
[split]
n_train = 600
n_test = 100
[lm]
max_iters = 40
[[series]]
source = "csv"
path = "t.csv"
[[series]]
source = "synthetic"
kind = "humidity"
site = 3
"#;

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["synth", "--kind", "temperature", "--bogus"],
        vec!["synth", "--kind", "snowfall", "--out", "x.csv"],
        vec!["train"],
        vec![],
    ] {
        let out = pmlp(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn synth_then_compare_on_it() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "t.csv", "temperature", "1");
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(text.lines().count(), 3608);

    let out = pmlp(
        dir.path(),
        &["compare", "--data", "t.csv", "--seed", "1", "--out", "res"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for name in [
        "minima_table.txt",
        "minima_table.csv",
        "minima_table.json",
        "means_table.txt",
        "boxstats.csv",
        "ratios.csv",
        "trace_csv_t.csv",
    ] {
        assert!(dir.path().join("res").join(name).exists(), "{name}");
    }
    let trace = std::fs::read_to_string(dir.path().join("res/trace_csv_t.csv")).unwrap();
    assert_eq!(trace.lines().count(), 401);
}

#[test]
fn compare_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "t.csv", "wind_speed", "4");
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    for out_dir in ["a", "b"] {
        let out = pmlp(
            dir.path(),
            &[
                "compare", "--config", "c.toml", "--seed", "7", "--out", out_dir,
            ],
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let out = pmlp(
        dir.path(),
        &[
            "compare",
            "--config",
            "c.toml",
            "--seed",
            "7",
            "--out",
            "s",
            "--sequential",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 12);
    for name in names {
        let a = std::fs::read(dir.path().join("a").join(&name)).unwrap();
        assert_eq!(
            a,
            std::fs::read(dir.path().join("b").join(&name)).unwrap(),
            "{name:?}"
        );
        assert_eq!(
            a,
            std::fs::read(dir.path().join("s").join(&name)).unwrap(),
            "{name:?}"
        );
    }

    let out = pmlp(
        dir.path(),
        &["compare", "--config", "c.toml", "--seed", "8", "--out", "c"],
    );
    assert!(out.status.success());
    assert_ne!(
        std::fs::read(dir.path().join("a/runs.csv")).unwrap(),
        std::fs::read(dir.path().join("c/runs.csv")).unwrap()
    );
}

#[test]
fn train_save_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "t.csv", "temperature", "2");
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    for (cmd, model) in [("train", "m.txt"), ("prune-train", "p.txt")] {
        let out = pmlp(
            dir.path(),
            &[cmd, "--config", "c.toml", "--data", "t.csv", "--out", model],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let text = std::fs::read_to_string(dir.path().join(model)).unwrap();
        assert!(text.starts_with("pmlp-model 1\n"));

        let out = pmlp(dir.path(), &["eval", "--model", model, "--data", "t.csv"]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(String::from_utf8_lossy(&out.stdout).contains("samples 3600"));
    }
    let out = pmlp(
        dir.path(),
        &["prune-train", "--config", "c.toml", "--data", "t.csv"],
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("pruned"));
}

#[test]
fn eval_rejects_mismatched_lag_order() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "t.csv", "humidity", "2");
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let out = pmlp(
        dir.path(),
        &[
            "train", "--config", "c.toml", "--data", "t.csv", "--out", "m.txt",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let out = pmlp(
        dir.path(),
        &["eval", "--model", "m.txt", "--data", "t.csv", "--lags", "5"],
    );
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert_eq!(msg.lines().count(), 1);
    assert!(
        msg.contains("lag order 5") && msg.contains("input width 7"),
        "{msg}"
    );
}

#[test]
fn runtime_failures_give_one_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "n_runs = 1\nextra_key = true\n",
    )
    .unwrap();
    let cases: [&[&str]; 4] = [
        &["compare", "--config", "bad.toml"],
        &["compare", "--config", "missing.toml"],
        &["synth", "--kind", "humidity"],
        &["eval", "--model", "none.txt", "--data", "none.csv"],
    ];
    for args in cases {
        let out = pmlp(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert_eq!(stderr(&out).lines().count(), 1, "{args:?}");
    }
    let out = pmlp(dir.path(), &["compare", "--config", "bad.toml"]);
    assert!(stderr(&out).contains("extra_key"));
}

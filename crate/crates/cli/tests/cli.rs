use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn svfend(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svfend"))
        .args(args)
        .current_dir(dir)
        .env_remove("SVFEND_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn synth(dir: &Path, out: &str, events: &str, seed: &str) {
    let o = svfend(
        dir,
        &[
            "synth",
            "--events",
            events,
            "--per-event",
            "3",
            "--seed",
            seed,
            "--out",
            out,
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&svfend(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&svfend(tmp.path(), &["--version"])), 0);
    assert_eq!(code(&svfend(tmp.path(), &[])), 1);
    assert_eq!(code(&svfend(tmp.path(), &["frobnicate"])), 1);
    assert_eq!(code(&svfend(tmp.path(), &["synth", "--events", "0"])), 1);
    assert_eq!(code(&svfend(tmp.path(), &["benchmark"])), 1);
    let o = svfend(tmp.path(), &["benchmark", "--dataset", "missing.jsonl"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn synth_output_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "a", "6", "2");
    synth(tmp.path(), "b", "6", "2");
    synth(tmp.path(), "c", "6", "3");
    let digest = |d: &str| Sha256::digest(read(&tmp.path().join(d).join("dataset.jsonl")));
    assert_eq!(digest("a"), digest("b"));
    assert_ne!(digest("a"), digest("c"));
    assert_eq!(
        read(&tmp.path().join("a/dataset.jsonl")).lines().count(),
        18
    );
    let cache = tmp.path().join("a/features");
    assert!(fs::read_dir(cache).unwrap().count() > 0);
}

#[test]
fn benchmark_report_has_one_row_per_fold_plus_aggregates() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d", "10", "1");
    let o = svfend(
        tmp.path(),
        &[
            "benchmark",
            "--dataset",
            "d/dataset.jsonl",
            "--methods",
            "majority,svm_meta,attn_audio",
            "--epochs",
            "2",
            "--out",
            "r",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&tmp.path().join("r/report.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "method,modality_tag,fold,accuracy,macro_precision,macro_recall,macro_f1"
    );
    assert_eq!(lines.len(), 1 + 3 * 7);
    for (k, method) in ["majority", "svm_meta", "attn_audio"].iter().enumerate() {
        let rows = &lines[1 + 7 * k..1 + 7 * (k + 1)];
        let folds: Vec<&str> = rows.iter().map(|r| r.split(',').nth(2).unwrap()).collect();
        assert_eq!(folds, ["0", "1", "2", "3", "4", "mean", "std"]);
        assert!(rows.iter().all(|r| r.starts_with(&format!("{method},"))));
        for r in rows {
            for v in r.split(',').skip(3) {
                let x: f64 = v.parse().unwrap();
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }
    let json: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("r/report.json"))).unwrap();
    assert_eq!(json["report"]["n_samples"], 30);
}

#[test]
fn temporal_benchmark_emits_one_row_per_method() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d", "8", "4");
    let o = svfend(
        tmp.path(),
        &[
            "benchmark",
            "--dataset",
            "d/dataset.jsonl",
            "--split",
            "temporal",
            "--methods",
            "majority,svm_text",
            "--out",
            "r",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&tmp.path().join("r/report.csv"));
    let folds: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|r| r.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(folds, ["temporal", "temporal"]);
}

#[test]
fn unknown_method_lists_the_registry() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d", "5", "1");
    let o = svfend(
        tmp.path(),
        &[
            "benchmark",
            "--dataset",
            "d/dataset.jsonl",
            "--methods",
            "nope",
        ],
    );
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("svfend") && err.contains("attn_clip"), "{err}");
}

#[test]
fn failing_cells_give_exit_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d", "5", "1");
    let o = svfend(
        tmp.path(),
        &[
            "benchmark",
            "--dataset",
            "d/dataset.jsonl",
            "--methods",
            "majority,textcnn",
            "--max-text-tokens",
            "3",
            "--out",
            "r",
        ],
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&tmp.path().join("r/report.csv"));
    assert!(csv.lines().any(|l| l.starts_with("majority,-,mean,")));
    assert!(!csv.lines().any(|l| l.starts_with("textcnn,")));
    let json: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("r/report.json"))).unwrap();
    assert_eq!(json["report"]["failures"].as_array().unwrap().len(), 5);
}

#[test]
fn config_file_supplies_defaults_and_rejects_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d", "5", "1");
    fs::write(
        tmp.path().join("run.toml"),
        "dataset = \"d/dataset.jsonl\"\nmethods = [\"majority\"]\nseed = 3\n\n[train]\nepochs = 1\n",
    )
    .unwrap();
    let o = svfend(
        tmp.path(),
        &["benchmark", "--config", "run.toml", "--out", "r"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("r/report.json"))).unwrap();
    assert_eq!(json["report"]["config"]["seed"], 3);
    assert_eq!(json["report"]["config"]["train"]["epochs"], 1);

    fs::write(
        tmp.path().join("bad.toml"),
        "dataset = \"d/dataset.jsonl\"\nlearning_rate = 1\n",
    )
    .unwrap();
    assert_eq!(
        code(&svfend(tmp.path(), &["benchmark", "--config", "bad.toml"])),
        1
    );
}

#[test]
fn split_train_and_inspect() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d", "6", "9");
    let o = svfend(
        tmp.path(),
        &[
            "split",
            "--dataset",
            "d/dataset.jsonl",
            "--kind",
            "temporal",
            "--out",
            "s.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&tmp.path().join("s.json")).contains("s0000_000"));

    let o = svfend(
        tmp.path(),
        &[
            "train",
            "--dataset",
            "d/dataset.jsonl",
            "--hidden-dim",
            "8",
            "--epochs",
            "2",
            "--out",
            "m",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["model.json", "model.bin", "history.json"] {
        assert!(tmp.path().join("m").join(f).exists(), "{f}");
    }
    let o = svfend(tmp.path(), &["inspect", "--checkpoint", "m/model"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = svfend(tmp.path(), &["inspect", "--dataset", "d/dataset.jsonl"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("18"));
}

#[test]
fn analyze_commands_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d", "6", "5");
    let ds = "d/dataset.jsonl";
    let runs: [(&[&str], &str, &str); 7] = [
        (&["doubt"], "doubt.csv", "label,"),
        (&["emotion"], "emotion.csv", "label,"),
        (&["likes-fans"], "likes_fans.csv", ""),
        (&["terms", "--top", "5"], "terms.csv", ""),
        (&["locations"], "locations.csv", ""),
        (&["hours", "--utc-offset", "-3"], "hours.csv", ""),
        (&["dedup", "--threshold", "4"], "dedup.csv", ""),
    ];
    for (args, out, header) in runs {
        let mut full = vec!["analyze", args[0], "--dataset", ds, "--out", out];
        full.extend_from_slice(&args[1..]);
        let o = svfend(tmp.path(), &full);
        assert_eq!(
            code(&o),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let text = read(&tmp.path().join(out));
        assert!(text.lines().count() >= 2, "{out}");
        assert!(text.starts_with(header), "{out}: {text}");
    }
    let o = svfend(
        tmp.path(),
        &["analyze", "dedup", "--dataset", ds, "--threshold", "65"],
    );
    assert_eq!(code(&o), 1);

    fs::write(
        tmp.path().join("articles.txt"),
        "Rumor: the river runs backwards\nunrelated text\n",
    )
    .unwrap();
    let o = svfend(
        tmp.path(),
        &[
            "analyze",
            "extract",
            "--articles",
            "articles.txt",
            "--out",
            "claims.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&tmp.path().join("claims.csv")).contains("the river runs backwards"));
}

#[test]
fn covers_directory_is_hashed() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d", "5", "1");
    let covers = tmp.path().join("covers");
    fs::create_dir(&covers).unwrap();
    let img =
        image::GrayImage::from_fn(40, 30, |x, y| image::Luma([((x * 7 + y * 3) % 256) as u8]));
    for id in ["s0000_000", "s0000_001"] {
        img.save(covers.join(format!("{id}.png"))).unwrap();
    }
    let o = svfend(
        tmp.path(),
        &[
            "analyze",
            "dedup",
            "--dataset",
            "d/dataset.jsonl",
            "--covers",
            "covers",
            "--out",
            "dd.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&tmp.path().join("dd.csv")).lines().count() >= 2);
}

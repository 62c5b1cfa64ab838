use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn attrex(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attrex"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = attrex(args, dir);
    assert!(
        out.status.success(),
        "attrex {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn jsonl(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn synth_annotate_train_predict_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "--out-dir", "s", "--values", "80", "--seed", "4"], d);
    ok(&["annotate", "--catalog", "s/catalog.jsonl", "--output", "train.jsonl", "--seed", "4"], d);
    ok(&["train", "--model", "crf", "--corpus", "train.jsonl", "--output", "crf.json", "--seed", "4"], d);
    ok(
        &[
            "predict", "--model", "crf.json", "--input", "s/catalog.jsonl", "--normalization",
            "s/normalization.tsv", "--out-dir", "pred",
        ],
        d,
    );
    let text = ok(
        &[
            "evaluate", "--gold", "s/corpus.jsonl", "--predictions", "pred/predictions.jsonl", "--normalization",
            "s/normalization.tsv", "--out-dir", "eval",
        ],
        d,
    );
    assert!(text.contains("precision"), "{text}");
    let report = &jsonl(&d.join("eval/evaluation.jsonl"))[0];
    assert!(report["f1"].as_f64().unwrap() > 0.7, "{report}");
    assert!(report["label_accuracy"].as_f64().is_some());
    let curve = jsonl(&d.join("eval/threshold_curve.jsonl"));
    assert_eq!(curve.len(), 101);
    let recalls: Vec<f64> = curve.iter().map(|p| p["recall"].as_f64().unwrap()).collect();
    assert!(recalls.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn misaligned_evaluation_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "--out-dir", "s", "--values", "20", "--seed", "1"], d);
    ok(&["train", "--model", "dict-max", "--corpus", "s/corpus.jsonl", "--output", "m.json"], d);
    ok(&["predict", "--model", "m.json", "--input", "s/catalog.jsonl", "--out-dir", "p"], d);
    let lines: Vec<String> = fs::read_to_string(d.join("s/corpus.jsonl")).unwrap().lines().map(String::from).collect();
    fs::write(d.join("short.jsonl"), lines[..5].join("\n")).unwrap();
    let out = attrex(&["evaluate", "--gold", "short.jsonl", "--predictions", "p/predictions.jsonl"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("misaligned"));

    let mut swapped = lines.clone();
    swapped.swap(0, 1);
    fs::write(d.join("swapped.jsonl"), swapped.join("\n")).unwrap();
    let out = attrex(&["evaluate", "--gold", "swapped.jsonl", "--predictions", "p/predictions.jsonl"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("misaligned"));
}

#[test]
fn errors_name_the_input() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = attrex(&["train", "--model", "crf", "--corpus", "missing.jsonl", "--output", "m.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));

    fs::write(d.join("bad.jsonl"), "{\"title\": \"a b\", \"attribute\": \"brand\", \"value\": null}\nnot json\n").unwrap();
    let out = attrex(&["stats", "--corpus", "bad.jsonl"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl:2"));

    let out = attrex(&["train", "--model", "crf", "--corpus", "bad.jsonl", "--bogus"], d);
    assert!(!out.status.success());

    fs::write(d.join("one.jsonl"), "{\"title\": \"Acme Mug\", \"attribute\": \"brand\", \"value\": \"Acme\"}\n").unwrap();
    ok(&["train", "--model", "sp", "--corpus", "one.jsonl", "--output", "m.json"], d);
    let text = fs::read_to_string(d.join("m.json")).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
    fs::write(d.join("m7.json"), text).unwrap();
    fs::write(d.join("titles.jsonl"), "{\"title\": \"Acme Cup\", \"attribute\": \"brand\", \"value\": null}\n").unwrap();
    let out = attrex(&["predict", "--model", "m7.json", "--input", "titles.jsonl", "--out-dir", "p"], d);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("m7.json") && err.contains('7') && err.contains('1'), "{err}");
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = walk(dir)
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn full_run(d: &Path) -> Vec<String> {
    let mut stdout = Vec::new();
    let mut run = |args: &[&str]| stdout.push(ok(args, d));
    run(&["synth", "--out-dir", "s", "--values", "40", "--seed", "9"]);
    run(&["annotate", "--catalog", "s/catalog.jsonl", "--output", "train.jsonl", "--unbranded", "5", "--seed", "9"]);
    for m in ["crf", "sp", "hmm", "dict-first", "3nn"] {
        let out = format!("{m}.json");
        run(&["train", "--model", m, "--corpus", "train.jsonl", "--output", &out, "--seed", "9"]);
    }
    run(&[
        "predict", "--model", "sp.json", "--input", "s/catalog.jsonl", "--out-dir", "pred", "--frequency-threshold",
        "1", "--seed", "9",
    ]);
    run(&["evaluate", "--gold", "s/corpus.jsonl", "--predictions", "pred/predictions.jsonl", "--out-dir", "eval"]);
    run(&["cv", "--model", "crf", "--corpus", "s/corpus.jsonl", "--folds", "3", "--seed", "9", "--out-dir", "cv"]);
    run(&["compare", "--corpus", "s/corpus.jsonl", "--folds", "3", "--seed", "9", "--out-dir", "cmp"]);
    run(&["stats", "--corpus", "s/corpus.jsonl"]);
    stdout
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = full_run(a.path());
    let out_b = full_run(b.path());
    assert_eq!(out_a, out_b);
    let snap_a = snapshot(a.path());
    assert_eq!(snap_a, snapshot(b.path()));
    assert!(snap_a.iter().any(|(n, _)| n == "crf.json"));
    assert!(snap_a.iter().any(|(n, _)| n == "pred/review_queue.jsonl"));
}

#[test]
fn different_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "--out-dir", "a", "--values", "30", "--seed", "1"], d);
    ok(&["synth", "--out-dir", "b", "--values", "30", "--seed", "2"], d);
    assert_ne!(fs::read(d.join("a/corpus.jsonl")).unwrap(), fs::read(d.join("b/corpus.jsonl")).unwrap());
}

#[test]
fn inputs_are_left_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "--out-dir", "s", "--values", "30", "--seed", "2"], d);
    fs::write(d.join("blacklist.txt"), "Zzz\n").unwrap();
    fs::write(
        d.join("decisions.jsonl"),
        "{\"predicted_value\": \"Qq\", \"verdict\": \"accept\", \"canonical\": \"Qq Inc\"}\n",
    )
    .unwrap();
    let before = snapshot(d);
    ok(&["train", "--model", "hmm", "--corpus", "s/corpus.jsonl", "--output", "out/m.json"], d);
    ok(
        &[
            "predict", "--model", "out/m.json", "--input", "s/catalog.jsonl", "--normalization", "s/normalization.tsv",
            "--blacklist", "blacklist.txt", "--out-dir", "out/p",
        ],
        d,
    );
    ok(
        &[
            "review-apply", "--decisions", "decisions.jsonl", "--normalization", "s/normalization.tsv", "--blacklist",
            "blacklist.txt", "--pending", "out/p/pending.jsonl", "--out-dir", "out/r",
        ],
        d,
    );
    let after: Vec<_> = snapshot(d).into_iter().filter(|(n, _)| !n.starts_with("out")).collect();
    assert_eq!(before, after);
}

/// Titles for one value, each with a distinct product word.
fn titles(value: &str, n: usize, start: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            format!(
                "{{\"id\": \"item-{}\", \"title\": \"{value} Widget {i}\", \"attribute\": \"brand\", \"value\": null}}",
                start + i
            )
        })
        .collect()
}

#[test]
fn review_queue_follows_frequency_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let corpus: Vec<String> = ["Acme", "Zorblax", "Quux"]
        .iter()
        .map(|v| format!("{{\"title\": \"{v} Widget\", \"attribute\": \"brand\", \"value\": \"{v}\"}}"))
        .collect();
    fs::write(d.join("corpus.jsonl"), corpus.join("\n")).unwrap();
    ok(&["train", "--model", "dict-max", "--corpus", "corpus.jsonl", "--output", "dict.json"], d);

    let mut input = titles("Acme", 100, 0);
    input.extend(titles("Zorblax", 31, 100));
    input.extend(titles("Quux", 10, 131));
    fs::write(d.join("input.jsonl"), input.join("\n")).unwrap();
    fs::write(d.join("table.tsv"), "acme\tAcme\n").unwrap();
    let summary = ok(
        &["predict", "--model", "dict.json", "--input", "input.jsonl", "--normalization", "table.tsv", "--out-dir", "p"],
        d,
    );
    assert!(summary.contains("100 accepted"), "{summary}");
    assert_eq!(jsonl(&d.join("p/accepted.jsonl")).len(), 100);
    let queue = jsonl(&d.join("p/review_queue.jsonl"));
    assert_eq!(queue.len(), 1);
    assert_eq!(queue[0]["value"], "Zorblax");
    assert_eq!(queue[0]["frequency"], 31);
    assert_eq!(queue[0]["samples"].as_array().unwrap().len(), 5);
    assert_eq!(jsonl(&d.join("p/pending.jsonl")).len(), 41);

    fs::write(
        d.join("decisions.jsonl"),
        concat!(
            "{\"predicted_value\": \"Zorblax\", \"verdict\": \"accept\", \"canonical\": \"Zorblax Labs\"}\n",
            "{\"predicted_value\": \"Quux\", \"verdict\": \"blacklist\"}\n",
            "{\"predicted_value\": \"Quux\", \"verdict\": \"relabel\", \"title\": \"Widget by Quux\", \"span\": null}\n",
        ),
    )
    .unwrap();
    ok(
        &[
            "review-apply", "--decisions", "decisions.jsonl", "--normalization", "table.tsv", "--pending",
            "p/pending.jsonl", "--out-dir", "r",
        ],
        d,
    );
    let table = fs::read_to_string(d.join("r/normalization.tsv")).unwrap();
    assert!(table.contains("zorblax\tZorblax Labs"), "{table}");
    assert_eq!(fs::read_to_string(d.join("r/blacklist.txt")).unwrap().trim(), "quux");
    assert_eq!(jsonl(&d.join("r/accepted.jsonl")).len(), 31);
    assert_eq!(jsonl(&d.join("r/blacklisted.jsonl")).len(), 10);
    assert!(jsonl(&d.join("r/pending.jsonl")).is_empty());
    let additions = jsonl(&d.join("r/training_additions.jsonl"));
    assert_eq!(additions.len(), 1);
    assert!(additions[0]["labels"].as_array().unwrap().iter().all(|l| l == "O"));
}

#[test]
fn tokenize_and_ablate_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("titles.txt"), "Apple iPad Mini 3 16GB Wi-Fi Refurbished, Gold\n").unwrap();
    let out = ok(&["tokenize", "--input", "titles.txt"], d);
    let v: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(v["tokens"].as_array().unwrap().len(), 8);

    ok(&["synth", "--out-dir", "s", "--values", "25", "--seed", "5"], d);
    fs::write(d.join("features.txt"), "w0\nw-1\nbias\n").unwrap();
    let text = ok(
        &[
            "ablate", "--model", "sp", "--corpus", "s/corpus.jsonl", "--folds", "3", "--config", "features.txt",
            "--out-dir", "abl",
        ],
        d,
    );
    assert_eq!(text.lines().filter(|l| l.contains('|')).count(), 5, "{text}");
    assert!(d.join("abl/ablation.jsonl").exists());
}

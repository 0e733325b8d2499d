use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mia_core::store::{write_feature_file, FeatureSequence, Frames};

fn mia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mia")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "stderr: {text}");
    serde_json::from_str(text.trim()).unwrap()
}

fn small_config(dir: &Path, level: &str) -> PathBuf {
    let path = dir.join("run.json");
    let cfg = serde_json::json!({
        "synth": {
            "q": 6,
            "num_speakers_seen": 4,
            "num_speakers_unseen": 4,
            "utterances_per_speaker": 3,
            "frames_per_utterance": {"min": 4, "max": 8}
        },
        "level": level,
        "k": 2,
        "train": {"epochs": 3, "learning_rate": 1e-3, "batch_size": 4},
        "net": {"p": 5, "r": 7},
        "seed": 11
    });
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn score_skips_single_frame_utterance() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let rows: [(&str, Vec<[f64; 2]>); 3] = [
        ("u_a", vec![[1.0, 0.0], [0.0, 1.0]]),
        ("u_bad", vec![[1.0, 1.0]]),
        ("u_c", vec![[1.0, 2.0], [2.0, 1.0], [0.5, 0.5]]),
    ];
    let mut manifest = String::new();
    for (id, frames) in &rows {
        let f = Frames::from_rows(frames).unwrap();
        write_feature_file(&FeatureSequence::new(*id, "s", f), root.join(format!("{id}.miaf"))).unwrap();
        manifest.push_str(&format!(
            "{{\"utterance_id\":\"{id}\",\"speaker_id\":\"s\",\"path\":\"{id}.miaf\"}}\n"
        ));
    }
    fs::write(root.join("m.ndjson"), manifest).unwrap();
    let out_dir = root.join("out");
    let out = mia(&["score", "--manifest", p(&root.join("m.ndjson")), "--out", p(&out_dir)]);
    assert!(out.status.success(), "{out:?}");
    let warning = stderr_json(&out);
    assert_eq!(warning["warning"], "skipped");
    assert_eq!(warning["count"], 1);
    let skipped: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("skipped.json")).unwrap()).unwrap();
    assert_eq!(skipped[0]["id"], "u_bad");
    let csv = fs::read_to_string(out_dir.join("scores.csv")).unwrap();
    let ids: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids, ["u_a", "u_c"]);
}

#[test]
fn evaluate_single_class_fails_with_marker() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    fs::write(&scores, "id,score,membership\na,0.9,seen\nb,0.1,seen\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = mia(&["evaluate", "--scores", p(&scores), "--out", p(&out_dir)]);
    assert!(!out.status.success());
    let err = stderr_json(&out);
    assert_eq!(err["error"], "evaluation");
    assert!(out_dir.join(".failed").exists());
}

#[test]
fn evaluate_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    fs::write(
        &scores,
        "id,score,membership\na,0.8,seen\nb,0.3,seen\nc,0.5,unseen\nd,0.1,unseen\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = mia(&["evaluate", "--scores", p(&scores), "--out", p(&out_dir)]);
    assert!(out.status.success(), "{out:?}");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["auc"], 0.75);
    let roc = fs::read_to_string(out_dir.join("roc.csv")).unwrap();
    assert_eq!(roc.lines().next(), Some("fpr,tpr,threshold"));
}

#[test]
fn usage_errors_are_json() {
    let out = mia(&["score", "--level", "frame", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
    let out = mia(&["--help"]);
    assert!(out.status.success());
}

#[test]
fn refuses_non_empty_out_without_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "utterance");
    let out_dir = dir.path().join("out");
    fs::create_dir(&out_dir).unwrap();
    fs::write(out_dir.join("keep.txt"), "mine").unwrap();
    let out = mia(&["synth", "--config", p(&cfg), "--out", p(&out_dir)]);
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["error"], "config");
    assert_eq!(fs::read_to_string(out_dir.join("keep.txt")).unwrap(), "mine");
    assert!(!out_dir.join(".failed").exists());
    let out = mia(&["synth", "--config", p(&cfg), "--out", p(&out_dir), "--overwrite"]);
    assert!(out.status.success(), "{out:?}");
    assert!(!out_dir.join("keep.txt").exists());
}

/// Runs `mia <sub> --config <cfg> --out <out> <args>` and asserts success.
fn step(sub: &str, cfg: &Path, out: &Path, args: &[String]) {
    let mut all = vec![
        sub.to_string(),
        "--config".into(),
        p(cfg).into(),
        "--out".into(),
        p(out).into(),
    ];
    all.extend_from_slice(args);
    let refs: Vec<&str> = all.iter().map(String::as_str).collect();
    let output = mia(&refs);
    assert!(output.status.success(), "{all:?}: {output:?}");
}

fn flag(name: &str, path: PathBuf) -> [String; 2] {
    [format!("--{name}"), p(&path).to_string()]
}

/// Evaluates into a scratch directory and copies the report next to the scores,
/// which is where the pipeline keeps it.
fn evaluate_into(cfg: &Path, scratch: &Path, dir: &Path) {
    let mut args = flag("scores", dir.join("scores.csv")).to_vec();
    args.push("--overwrite".into());
    step("evaluate", cfg, scratch, &args);
    for f in ["report.json", "roc.csv"] {
        fs::copy(scratch.join(f), dir.join(f)).unwrap();
    }
}

#[test]
fn pipeline_equals_composed_subcommands() {
    for level in ["utterance", "speaker"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path(), level);
        let whole = dir.path().join("whole");
        step("pipeline", &cfg, &whole, &[]);

        let steps = dir.path().join("steps");
        let d = |s: &str| steps.join(s);
        let scratch = dir.path().join("scratch");
        step("synth", &cfg, &d("data"), &[]);
        step("score", &cfg, &d("basic"), &flag("manifest", d("data/manifest.ndjson")));
        evaluate_into(&cfg, &scratch, &d("basic"));
        step(
            "pseudo-label",
            &cfg,
            &d("labels"),
            &flag("scores", d("basic/scores.csv")),
        );
        step(
            "train",
            &cfg,
            &d("train"),
            &[
                flag("manifest", d("data/manifest.ndjson")),
                flag("labels", d("labels/pseudo_labels.json")),
            ]
            .concat(),
        );
        step(
            "infer",
            &cfg,
            &d("improved"),
            &[
                flag("checkpoint", d("train/model.miac")),
                flag("manifest", d("data/manifest.ndjson")),
            ]
            .concat(),
        );
        evaluate_into(&cfg, &scratch, &d("improved"));

        let mut expected = tree(&whole);
        expected.retain(|(path, _)| path != Path::new("summary.json"));
        assert_eq!(tree(&steps), expected, "{level}");
    }
}

use std::ffi::{CStr, CString};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use mia_core::pipeline::{SCORES_FILE, SUMMARY_FILE};
use mia_ffi::*;

fn c(path: &Path) -> CString {
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mia_last_error_message()) }
        .to_str()
        .unwrap()
        .to_owned()
}

fn small_config(dir: &Path, level: &str) -> PathBuf {
    let path = dir.join("run.json");
    let text = format!(
        r#"{{
  "synth": {{"q": 5, "num_speakers_seen": 4, "num_speakers_unseen": 4,
             "utterances_per_speaker": 3, "frames_per_utterance": {{"min": 4, "max": 7}}}},
  "level": "{level}",
  "k": 2,
  "train": {{"epochs": 2, "learning_rate": 0.001, "batch_size": 4}},
  "net": {{"p": 4, "r": 6}},
  "seed": 3
}}"#
    );
    fs::write(&path, text).unwrap();
    path
}

fn run_pipeline(dir: &Path, level: &str) -> PathBuf {
    let cfg = small_config(dir, level);
    let out = dir.join("out");
    let status = unsafe { mia_run_pipeline(c(&cfg).as_ptr(), c(&out).as_ptr(), 0) };
    assert_eq!(status, MiaStatus::Ok, "{}", last_error());
    out
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(mia_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let mut out = 0.0;
    let status = unsafe { mia_auc(ptr::null(), &mut out) };
    assert_eq!(status, MiaStatus::NullPointer);
    assert!(last_error().contains("table"));

    let mut ds = ptr::null_mut();
    assert_eq!(
        unsafe { mia_dataset_open(ptr::null(), &mut ds) },
        MiaStatus::NullPointer
    );
    assert!(ds.is_null());

    // Length queries and frees tolerate NULL.
    unsafe {
        assert_eq!(mia_dataset_len(ptr::null()), 0);
        assert_eq!(mia_score_table_len(ptr::null()), 0);
        mia_dataset_free(ptr::null_mut());
        mia_score_table_free(ptr::null_mut());
        mia_model_free(ptr::null_mut());
    }
}

#[test]
fn scalar_scoring() {
    // Two orthogonal unit frames: cosine distance 1.
    let frames = [1.0, 0.0, 0.0, 1.0];
    let mut s = f64::NAN;
    let status = unsafe { mia_utterance_score(frames.as_ptr(), 2, 2, MiaMetric::Cosine, &mut s) };
    assert_eq!(status, MiaStatus::Ok);
    assert!((s - 1.0).abs() < 1e-12);
    assert_eq!(last_error(), "");

    let status = unsafe { mia_utterance_score(frames.as_ptr(), 1, 4, MiaMetric::Cosine, &mut s) };
    assert_eq!(status, MiaStatus::TooFewFrames, "{}", last_error());

    let (a, b) = ([3.0, 4.0], [4.0, 3.0]);
    let status = unsafe { mia_cosine_similarity(a.as_ptr(), b.as_ptr(), 2, &mut s) };
    assert_eq!(status, MiaStatus::Ok);
    assert!((s - 24.0 / 25.0).abs() < 1e-15);

    let z = [0.0, 0.0];
    let status = unsafe { mia_cosine_similarity(a.as_ptr(), z.as_ptr(), 2, &mut s) };
    assert_eq!(status, MiaStatus::DegenerateVector);
}

#[test]
fn missing_manifest_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut ds = ptr::null_mut();
    let status = unsafe { mia_dataset_open(c(&dir.path().join("nope.ndjson")).as_ptr(), &mut ds) };
    assert_eq!(status, MiaStatus::Io);
    assert!(ds.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn pipeline_artifacts_round_trip_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_pipeline(dir.path(), "utterance");
    assert!(out.join(SUMMARY_FILE).is_file());

    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            mia_dataset_open(c(&out.join("data/manifest.ndjson")).as_ptr(), &mut ds),
            MiaStatus::Ok
        );
        assert_eq!(mia_dataset_len(ds), 24);
        assert_eq!(mia_dataset_dim(ds), 5);

        // Basic scores through the handle match the CSV the pipeline wrote.
        let mut table = ptr::null_mut();
        let mut skipped = usize::MAX;
        let status = mia_score_dataset(ds, MiaLevel::Utterance, MiaMetric::Cosine, &mut table, &mut skipped);
        assert_eq!(status, MiaStatus::Ok, "{}", last_error());
        assert_eq!(skipped, 0);
        let mut from_csv = ptr::null_mut();
        let csv = c(&out.join("basic").join(SCORES_FILE));
        assert_eq!(
            mia_score_table_read_csv(csv.as_ptr(), MiaLevel::Utterance, &mut from_csv),
            MiaStatus::Ok
        );
        assert_eq!(mia_score_table_len(table), 24);
        assert_eq!(mia_score_table_len(from_csv), 24);
        for i in 0..24 {
            let (mut a, mut b) = (0.0, 0.0);
            let (mut ma, mut mb) = (MiaMembership::Unknown, MiaMembership::Unknown);
            assert_eq!(mia_score_table_row(table, i, &mut a, &mut ma), MiaStatus::Ok);
            assert_eq!(mia_score_table_row(from_csv, i, &mut b, &mut mb), MiaStatus::Ok);
            assert_eq!(ma, mb);
            assert_ne!(ma, MiaMembership::Unknown);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        assert_eq!(
            mia_score_table_row(table, 24, ptr::null_mut(), ptr::null_mut()),
            MiaStatus::InvalidArgument
        );

        let mut auc = f64::NAN;
        assert_eq!(mia_auc(table, &mut auc), MiaStatus::Ok);
        assert!((0.0..=1.0).contains(&auc));
        let mut tpr = f64::NAN;
        assert_eq!(mia_tpr_at_fpr(table, 1.0, &mut tpr), MiaStatus::Ok);
        assert_eq!(tpr, 1.0);

        // Write and reread.
        let copy = c(&dir.path().join("copy.csv"));
        assert_eq!(mia_score_table_write_csv(table, copy.as_ptr()), MiaStatus::Ok);
        assert_eq!(
            fs::read(dir.path().join("copy.csv")).unwrap(),
            fs::read(out.join("basic").join(SCORES_FILE)).unwrap()
        );

        // The trained model reproduces the improved scores.
        let mut model = ptr::null_mut();
        assert_eq!(
            mia_model_load(c(&out.join("train/model.miac")).as_ptr(), &mut model),
            MiaStatus::Ok,
            "{}",
            last_error()
        );
        let mut level = MiaLevel::Speaker;
        let mut q = 0;
        assert_eq!(mia_model_level(model, &mut level), MiaStatus::Ok);
        assert_eq!(mia_model_q(model, &mut q), MiaStatus::Ok);
        assert_eq!((level, q), (MiaLevel::Utterance, 5));
        let mut improved = ptr::null_mut();
        assert_eq!(
            mia_model_score_dataset(model, ds, &mut improved, ptr::null_mut()),
            MiaStatus::Ok
        );
        let written = c(&dir.path().join("improved.csv"));
        assert_eq!(mia_score_table_write_csv(improved, written.as_ptr()), MiaStatus::Ok);
        assert_eq!(
            fs::read(dir.path().join("improved.csv")).unwrap(),
            fs::read(out.join("improved").join(SCORES_FILE)).unwrap()
        );

        mia_score_table_free(improved);
        mia_model_free(model);
        mia_score_table_free(from_csv);
        mia_score_table_free(table);
        mia_dataset_free(ds);
    }
}

#[test]
fn pipeline_refuses_non_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_pipeline(dir.path(), "speaker");
    let cfg = dir.path().join("run.json");
    let status = unsafe { mia_run_pipeline(c(&cfg).as_ptr(), c(&out).as_ptr(), 0) };
    assert_eq!(status, MiaStatus::Config, "{}", last_error());
    assert!(last_error().contains("not empty"));
    let status = unsafe { mia_run_pipeline(c(&cfg).as_ptr(), c(&out).as_ptr(), 1) };
    assert_eq!(status, MiaStatus::Ok, "{}", last_error());
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"levle": "speaker"}"#).unwrap();
    let status = unsafe { mia_run_pipeline(c(&cfg).as_ptr(), c(&dir.path().join("o")).as_ptr(), 0) };
    assert_ne!(status, MiaStatus::Ok);
    assert!(last_error().contains("levle"), "{}", last_error());
}

/// Compiles a small C program against the generated header and static
/// library. Skipped when no C compiler is on PATH.
#[test]
fn header_links_from_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test-binary>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libmia_ffi.a");
    if !lib.is_file() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "mia.h"
int main(void) {
    double f[4] = {1.0, 0.0, 0.0, 1.0};
    double s = 0.0;
    if (mia_utterance_score(f, 2, 2, MIA_METRIC_COSINE, &s) != MIA_STATUS_OK) return 1;
    if (s < 0.999999 || s > 1.000001) return 2;
    if (mia_auc(NULL, &s) != MIA_STATUS_NULL_POINTER) return 3;
    if (strlen(mia_last_error_message()) == 0) return 4;
    printf("%s\n", mia_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(manifest_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
        {
            return Ok(cc.to_owned());
        }
    }
    Err(())
}

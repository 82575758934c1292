#![cfg(unix)]

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use lookalike_core::embed_adapter::{extract_batch, extract_landmarks_via_process, extract_via_process, ExtractorSpec};
use lookalike_core::Error;

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn image(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, b"not really a png").unwrap();
    path
}

/// Extractor stub writing one `dim`-dimensional zero vector.
fn zero_extractor(dir: &Path, dim: usize) -> PathBuf {
    let zeros = vec!["0"; dim].join(" ");
    script(
        dir,
        &format!("zeros{dim}.sh"),
        &format!("printf 'emb-v1 dim={dim}\\nx s {zeros}\\n' > \"$2\""),
    )
}

fn spec(cmd: &Path, dim: usize, secs: u64) -> ExtractorSpec {
    ExtractorSpec::new(
        &format!("{} {{input}} {{output}}", cmd.display()),
        dim,
        Duration::from_secs(secs),
    )
    .unwrap()
}

#[test]
fn reads_extractor_output() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = zero_extractor(dir.path(), 4);
    let img = image(dir.path(), "face_01.png");
    let e = extract_via_process(&spec(&cmd, 4, 10), &img).unwrap();
    assert_eq!(e.values, vec![0.0; 4]);
    assert_eq!(e.image_id, "face_01");
}

#[test]
fn nonzero_exit_is_reported_with_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), "fail.sh", "echo 'no face found' >&2\nexit 1");
    let img = image(dir.path(), "a.png");
    match extract_via_process(&spec(&cmd, 4, 10), &img) {
        Err(Error::Extraction { stderr, .. }) => assert!(stderr.contains("no face found")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn wrong_dimension_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = zero_extractor(dir.path(), 511);
    let img = image(dir.path(), "a.png");
    match extract_via_process(&spec(&cmd, 512, 10), &img) {
        Err(Error::Dimension {
            expected: 512,
            actual: 511,
        }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn slow_extractor_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), "slow.sh", "exec sleep 30");
    let img = image(dir.path(), "a.png");
    let start = Instant::now();
    let r = extract_via_process(&spec(&cmd, 4, 1), &img);
    assert!(matches!(r, Err(Error::Timeout(_))), "{r:?}");
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn missing_image_and_program() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = zero_extractor(dir.path(), 4);
    assert!(matches!(
        extract_via_process(&spec(&cmd, 4, 10), &dir.path().join("absent.png")),
        Err(Error::Io { .. })
    ));
    let img = image(dir.path(), "a.png");
    assert!(matches!(
        extract_via_process(&spec(&dir.path().join("nope"), 4, 10), &img),
        Err(Error::Io { .. })
    ));
}

#[test]
fn landmark_extraction() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), "lmk.sh", "printf 'lmk-v1 n=3\\nx 1 2 3 4 5 6\\n' > \"$2\"");
    let img = image(dir.path(), "p7.png");
    let s = extract_landmarks_via_process(&spec(&cmd, 3, 10), &img).unwrap();
    assert_eq!(s.image_id, "p7");
    assert_eq!(s.points.len(), 3);
    assert_eq!((s.points[2].x, s.points[2].y), (5.0, 6.0));
    assert!(matches!(
        extract_landmarks_via_process(&spec(&cmd, 68, 10), &img),
        Err(Error::Dimension {
            expected: 68,
            actual: 3
        })
    ));
}

#[test]
fn batch_keeps_order_and_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(
        dir.path(),
        "sel.sh",
        "case \"$1\" in *bad*) exit 2;; esac\nprintf 'emb-v1 dim=2\\nx s 1 0\\n' > \"$2\"",
    );
    let images: Vec<PathBuf> = ["a", "bad", "c", "d"]
        .iter()
        .map(|n| image(dir.path(), &format!("{n}.png")))
        .collect();
    let out = extract_batch(&spec(&cmd, 2, 10), &images, 2).unwrap();
    assert_eq!(out.len(), 4);
    assert!(out[1].is_err());
    let ids: Vec<_> = out
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|e| e.image_id.as_str())
        .collect();
    assert_eq!(ids, ["a", "c", "d"]);
}

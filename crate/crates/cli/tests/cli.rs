use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fiesta(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fiesta"));
    cmd.env_remove("FIESTA_SEED").args(args);
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn phantom(dir: &Path, count: usize) {
    let out = run(&mut fiesta(&["phantom", "--out", p(dir), "--count", &count.to_string(), "--size", "40"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn report_seed(dir: &Path) -> u64 {
    let text = fs::read_to_string(dir.join("report.json")).unwrap();
    let line = text.lines().find(|l| l.trim_start().starts_with("\"seed\"")).unwrap();
    line.trim().trim_start_matches("\"seed\":").trim().trim_end_matches(',').parse().unwrap()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    phantom(&data, 2);
    let ok = run(&mut fiesta(&["fat", "--input", p(&data), "--out", p(&tmp.path().join("a"))]));
    assert_eq!(ok.status.code(), Some(0));

    let partial = run(&mut fiesta(&["mutual", "--input", p(&data), "--out", p(&tmp.path().join("b"))]));
    assert_eq!(partial.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&partial.stderr).contains("missing uncertainty inputs"));

    let bad_cfg = tmp.path().join("bad.json");
    fs::write(&bad_cfg, "{\"lambda_mix\": 3}").unwrap();
    let abort = run(&mut fiesta(&["fat", "--config", p(&bad_cfg), "--input", p(&data), "--out", p(&tmp.path().join("c"))]));
    assert_eq!(abort.status.code(), Some(1));
    assert!(!tmp.path().join("c").exists());

    let missing = run(&mut fiesta(&["fat", "--input", p(&tmp.path().join("none")), "--out", p(&tmp.path().join("d"))]));
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    phantom(&data, 1);
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, "{\"seed\": 5}").unwrap();
    let input = data.join("slice_000.pfm");

    let out = tmp.path().join("config_only");
    run(&mut fiesta(&["fat", "--config", p(&cfg), "--input", p(&input), "--out", p(&out)]));
    assert_eq!(report_seed(&out), 5);

    let out = tmp.path().join("flag");
    run(&mut fiesta(&["fat", "--config", p(&cfg), "--seed", "6", "--input", p(&input), "--out", p(&out)]));
    assert_eq!(report_seed(&out), 6);

    let out = tmp.path().join("env");
    let mut cmd = fiesta(&["fat", "--config", p(&cfg), "--seed", "6", "--input", p(&input), "--out", p(&out)]);
    run(cmd.env("FIESTA_SEED", "7"));
    assert_eq!(report_seed(&out), 7);

    let mut cmd = fiesta(&["fat", "--input", p(&input), "--out", p(&tmp.path().join("x"))]);
    assert_eq!(run(cmd.env("FIESTA_SEED", "seven")).status.code(), Some(1));
}

#[test]
fn density_writes_360_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    phantom(&data, 2);
    let out = tmp.path().join("density");
    assert!(run(&mut fiesta(&["density", "--input", p(&data), "--out", p(&out)])).status.success());
    let csv = fs::read_to_string(out.join("slice_001.density.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 360);
    assert!(rows[0].starts_with("0,") && rows[359].starts_with("359,"));
    assert!(rows.iter().all(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn dice_against_itself_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    phantom(tmp.path(), 1);
    let labels = tmp.path().join("labels/slice_000.pgm");
    let out = run(&mut fiesta(&["dice", "--input", p(&labels), "--labels", p(&labels)]));
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "class,dice\n1,1\n2,1\n3,1\n");
}

#[test]
fn preprocess_resizes_images_and_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    phantom(&data, 1);
    let out = tmp.path().join("pre");
    let status = run(&mut fiesta(&[
        "preprocess",
        "--input",
        p(&data),
        "--labels",
        p(&data.join("labels")),
        "--modality",
        "mri",
        "--size",
        "32",
        "--out",
        p(&out),
    ]));
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let img = fiesta_core::io::read_image(&out.join("slice_000.pfm")).unwrap();
    assert_eq!(img.dims(), (32, 32));
    img.validate_normalized().unwrap();
    let labels = fiesta_core::io::read_labels(&out.join("labels/slice_000.pgm")).unwrap();
    assert_eq!(labels.dims(), (32, 32));
}

#[test]
fn json_manifest_input() {
    let tmp = tempfile::tempdir().unwrap();
    phantom(tmp.path(), 2);
    let manifest = tmp.path().join("manifest.json");
    fs::write(
        &manifest,
        r#"{"items": [
            {"image": "slice_001.pfm", "labels": "labels/slice_001.pgm",
             "prob_ca": "prob_ca/slice_001", "prob_la": "prob_la/slice_001"}
        ]}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let status = run(&mut fiesta(&["all", "--input", p(&manifest), "--out", p(&out)]));
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    for suffix in ["ca", "la", "ma"] {
        assert!(out.join(format!("slice_001_{suffix}.pfm")).is_file());
    }
}

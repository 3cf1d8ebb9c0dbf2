use std::path::Path;
use std::process::{Command, Output};

use gapfill::experiment::MetricsReport;
use gapfill::recon::Method;

fn gapfill(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapfill"))
        .current_dir(dir)
        .env_remove("GAPFILL_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = gapfill(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gapfill(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = gapfill(dir.path(), &["generate", "--kind", "zigzag", "--out", "a.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--kind"));
    let out = gapfill(dir.path(), &["export", "-i", "a.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["generate", "--kind", "straight", "--seed", "7", "--out", "a.csv"],
    );
    ok(
        d,
        &["generate", "--kind", "straight", "--seed", "7", "--out", "b.csv"],
    );
    ok(
        d,
        &["generate", "--kind", "straight", "--seed", "8", "--out", "c.csv"],
    );
    assert_eq!(read(d, "a.csv"), read(d, "b.csv"));
    assert_ne!(read(d, "a.csv"), read(d, "c.csv"));
    assert!(read(d, "a.csv").starts_with("t,lat,lon,gnss_valid,speed,yaw_rate\n"));
}

#[test]
fn seed_precedence_is_flag_then_file_then_env() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), r#"{"version": 1, "seed": 5}"#).unwrap();
    ok(d, &["generate", "--seed", "5", "--out", "five.csv"]);
    ok(d, &["generate", "--seed", "9", "--out", "nine.csv"]);
    ok(d, &["generate", "--config", "cfg.json", "--out", "file.csv"]);
    ok(
        d,
        &[
            "generate", "--config", "cfg.json", "--seed", "9", "--out", "flag.csv",
        ],
    );
    assert_eq!(read(d, "file.csv"), read(d, "five.csv"));
    assert_eq!(read(d, "flag.csv"), read(d, "nine.csv"));

    let run_env = |seed: &str, args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_gapfill"))
            .current_dir(d)
            .env("GAPFILL_SEED", seed)
            .args(args)
            .output()
            .unwrap()
    };
    assert!(run_env("9", &["generate", "--out", "env.csv"]).status.success());
    assert_eq!(read(d, "env.csv"), read(d, "nine.csv"));
    assert!(run_env(
        "9",
        &["generate", "--config", "cfg.json", "--out", "env_file.csv"]
    )
    .status
    .success());
    assert_eq!(read(d, "env_file.csv"), read(d, "five.csv"));
    assert_eq!(
        run_env("nine", &["generate", "--out", "x.csv"]).status.code(),
        Some(1)
    );
}

#[test]
fn config_file_errors_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), r#"{"version": 7}"#).unwrap();
    let out = gapfill(d, &["generate", "--config", "cfg.json", "--out", "a.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn data_errors_name_the_file_and_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("bad.csv"),
        "t,lat,lon,gnss_valid,speed,yaw_rate\n0,30,114,1,1,0\n1,30,114,1,-2,0\n",
    )
    .unwrap();
    let out = gapfill(d, &["train", "-i", "bad.csv", "-o", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.csv") && err.contains("row 2"), "{err}");
    assert!(!d.join("m.json").exists());

    let out = gapfill(d, &["train", "-i", "missing.csv", "-o", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}

#[test]
fn full_pipeline_on_right_angle_turn() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("cfg.json"),
        r#"{"version": 1, "recon": {"train": {"epochs": 60}}}"#,
    )
    .unwrap();
    ok(
        d,
        &[
            "generate",
            "--kind",
            "right_angle_turn",
            "--seed",
            "2",
            "--out",
            "m.csv",
            "--truth-out",
            "t.csv",
        ],
    );
    ok(
        d,
        &[
            "train",
            "--config",
            "cfg.json",
            "--seed",
            "2",
            "-i",
            "m.csv",
            "-o",
            "model.json",
        ],
    );
    ok(
        d,
        &[
            "reconstruct",
            "--model",
            "model.json",
            "-i",
            "m.csv",
            "--out-dir",
            "rec",
        ],
    );
    ok(
        d,
        &[
            "evaluate",
            "--truth",
            "t.csv",
            "--recon-dir",
            "rec",
            "-o",
            "metrics.json",
        ],
    );
    ok(
        d,
        &[
            "export",
            "-i",
            "t.csv",
            "-i",
            "rec",
            "--kml",
            "gaps.kml",
            "--geojson",
            "gaps.geojson",
        ],
    );

    let metrics = read(d, "metrics.json");
    let report = MetricsReport::from_json(&metrics).unwrap();
    for m in Method::ALL {
        assert!(metrics.contains(&format!("\"{m}\"")), "missing {m}");
        assert_eq!(report.methods[&m].per_point.len(), 40);
    }
    assert_eq!(read(d, "gaps.kml").matches("<Placemark>").count(), 7);

    // Same config and seed, same bytes.
    ok(
        d,
        &[
            "train",
            "--config",
            "cfg.json",
            "--seed",
            "2",
            "-i",
            "m.csv",
            "-o",
            "model2.json",
        ],
    );
    assert_eq!(read(d, "model.json"), read(d, "model2.json"));
    ok(
        d,
        &[
            "reconstruct",
            "--model",
            "model2.json",
            "-i",
            "m.csv",
            "--out-dir",
            "rec2",
        ],
    );
    for m in Method::ALL {
        assert_eq!(
            read(d, &format!("rec/{m}.csv")),
            read(d, &format!("rec2/{m}.csv"))
        );
    }

    // Baselines need no model; neural methods do.
    ok(
        d,
        &[
            "reconstruct",
            "-i",
            "m.csv",
            "--methods",
            "linear,gpr",
            "--out-dir",
            "base",
        ],
    );
    assert!(d.join("base/gpr.csv").exists() && !d.join("base/dr_obd.csv").exists());
    assert_eq!(
        gapfill(d, &["reconstruct", "-i", "m.csv", "--out-dir", "x"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn similarity_subcommand_reports_confusion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir(d.join("tracks")).unwrap();
    for s in ["1", "2", "3"] {
        ok(
            d,
            &[
                "generate",
                "--kind",
                "straight",
                "--seed",
                s,
                "--out",
                &format!("tracks/s{s}.csv"),
            ],
        );
        ok(
            d,
            &[
                "generate",
                "--kind",
                "curve",
                "--seed",
                s,
                "--out",
                &format!("tracks/c{s}.csv"),
            ],
        );
    }
    std::fs::write(
        d.join("pairs.csv"),
        "id_a,id_b,linked\ns1,s2,1\nc1,c2,1\ns1,c1,0\ns2,c3,0\ns3,s1,1\nc3,c1,1\ns3,c2,0\nc3,s2,0\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "similarity",
            "--dir",
            "tracks",
            "--pairs",
            "pairs.csv",
            "--cell-size",
            "100",
            "-o",
            "sim.json",
        ],
    );
    let report = MetricsReport::from_json(&read(d, "sim.json")).unwrap();
    let sim = report.similarity.unwrap();
    assert_eq!(sim.scores.len(), 8);
    assert_eq!(sim.cell_size, 100.0);
    assert_eq!(sim.confusion.total() as usize + sim.calibration_pairs, 8);

    std::fs::write(d.join("pairs_bad.csv"), "id_a,id_b,linked\ns1,nobody,1\n").unwrap();
    let out = gapfill(
        d,
        &[
            "similarity",
            "--dir",
            "tracks",
            "--pairs",
            "pairs_bad.csv",
            "-o",
            "x.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pairs_bad.csv"));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use persyn::io::load_image;
use persyn::scale_map::load_scale_map;
use persyn::{compute_scale_map, Channel, RasterImage, ViewAngles};

fn persyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persyn")).args(args).output().expect("binary runs")
}

fn wood64() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/wood_64.png")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_input_is_a_usage_error() {
    let out = persyn(&["synth", "--sigma", "30", "--tau", "18", "--out-size", "32x32", "--out", "x.png"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--in") && err.contains("Usage"), "{err}");
}

#[test]
fn bad_flag_values_are_usage_errors() {
    for args in [
        ["scalemap", "--size", "8x0", "--sigma", "10", "--tau", "0", "--out", "a.psm"],
        ["scalemap", "--size", "8x8", "--sigma", "95", "--tau", "0", "--out", "a.psm"],
        ["scalemap", "--size", "8x8", "--sigma", "10", "--tau", "-1", "--out", "a.psm"],
    ] {
        assert_eq!(persyn(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unreadable_exemplar_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_png = dir.path().join("o.png");
    let out = persyn(&[
        "synth", "--in", "/no/such/file.png", "--sigma", "30", "--tau", "18", "--out-size", "16x16", "--out",
        s(&out_png),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_png.exists());
}

#[test]
fn synth_is_reproducible_and_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let img = dir.path().join(format!("{tag}.png"));
        let report = dir.path().join(format!("{tag}.json"));
        let maps = dir.path().join(format!("{tag}_maps"));
        let out = persyn(&[
            "synth", "--in", s(&wood64()), "--sigma", "30", "--tau", "18", "--out-size", "40x36", "--seed", "7",
            "--levels", "1", "--max-iterations", "3", "--out", s(&img), "--report", s(&report),
            "--emit-scalemaps", s(&maps),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (img, report, maps)
    };
    let (a, report, maps) = run("a");
    let (b, _, _) = run("b");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let img: RasterImage<f64> = load_image(&a).unwrap();
    assert_eq!((img.width(), img.height()), (40, 36));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    assert_eq!(json["config"]["seed"], 7);
    for f in ["exemplar.psm", "exemplar.png", "output.psm", "output.png"] {
        assert!(maps.join(f).exists(), "{f}");
    }
}

#[test]
fn flat_view_preview_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let psm = dir.path().join("flat.psm");
    let out = persyn(&["scalemap", "--size", "33x21", "--sigma", "0", "--tau", "40", "--out", s(&psm)]);
    assert_eq!(out.status.code(), Some(0));
    let preview: RasterImage<f64> = load_image(dir.path().join("flat.png")).unwrap();
    let first = preview.get(Channel::R, 0, 0);
    for c in Channel::RGB {
        assert!(preview.plane(c).iter().all(|&v| v == first));
    }
}

#[test]
fn scale_map_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let psm = dir.path().join("m.psm");
    let png = dir.path().join("preview.png");
    let out = persyn(&[
        "scalemap", "--size", "50x40", "--sigma", "60", "--tau", "60", "--out", s(&psm), "--preview", s(&png),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let loaded = load_scale_map::<f64>(&psm).unwrap();
    let direct = compute_scale_map(50, 40, ViewAngles::new(60.0, 60.0).unwrap()).unwrap();
    assert_eq!((loaded.width(), loaded.height()), (50, 40));
    for (l, d) in loaded.values().iter().zip(direct.values()) {
        assert_eq!(*l, *d as f32 as f64);
    }
    assert!(png.exists());
}

#[test]
fn bench_csv_has_one_row_per_size_and_mode() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let json = dir.path().join("b.json");
    let out = persyn(&[
        "bench", "--in", s(&wood64()), "--sizes", "24x24,32x32", "--reps", "1", "--levels", "1",
        "--max-iterations", "2", "--csv", s(&csv), "--json", s(&json),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[0].contains("mean_millis") && lines[0].contains("stddev_millis"));
    let sd_col = lines[0].split(',').position(|c| c == "stddev_millis").unwrap();
    for row in &lines[1..] {
        assert_eq!(row.split(',').nth(sd_col).unwrap().parse::<f64>().unwrap(), 0.0);
    }
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(json).unwrap()).unwrap();
    assert_eq!(doc["runs"].as_array().unwrap().len(), 6);
}

#[test]
fn zero_reps_is_rejected() {
    let out = persyn(&["bench", "--in", s(&wood64()), "--reps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

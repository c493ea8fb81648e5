use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use serde_json::Value;

use courtreg::heatmap::ClassMap;
use courtreg::io;

fn courtreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_courtreg"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&courtreg(&["--help"])), 0);
    assert_eq!(code(&courtreg(&["--version"])), 0);
    assert_eq!(code(&courtreg(&["grid", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&courtreg(&[])), 1);
    assert_eq!(code(&courtreg(&["frobnicate"])), 1);
    assert_eq!(code(&courtreg(&["grid", "--bogus"])), 1);
    assert_eq!(code(&courtreg(&["grid", "--rows", "x"])), 1);
}

#[test]
fn grid_defaults_write_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("layout.json");
    let o = courtreg(&["grid", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("175.000 205.000 235.000 265.000 295.000 325.000"));
    let v = read_json(&out);
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 94);
    assert_eq!(entries[93]["role"], "background");
    assert_eq!(entries[91]["role"], "basket");
    assert_eq!(entries[13]["xy_cm"], serde_json::json!([0.0, 175.0]));
}

#[test]
fn grid_rejects_two_rows() {
    let o = courtreg(&["grid", "--rows", "2"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rows"), "{}", stderr(&o));
}

#[test]
fn grid_reports_uniform_spacing() {
    let o = courtreg(&["grid", "--w0-cm", "250"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("uniform"));
    assert!(stdout(&o).contains("250.000 250.000 250.000 250.000 250.000 250.000"));
}

#[test]
fn grid_rejects_non_positive_gap() {
    let o = courtreg(&["grid", "--width-cm", "1000", "--rows", "3", "--w0-cm", "1100"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("gap"), "{}", stderr(&o));
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (p, jobs) in [(&a, "1"), (&b, "3")] {
        let o = courtreg(&["synth", "--n", "5", "--seed", "42", "--out", s(p), "--jobs", jobs]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.len(), 5 * 2 + 3);
    assert_eq!(ta, tb);
}

#[test]
fn synth_rejects_zero_frames() {
    let dir = tempfile::tempdir().unwrap();
    let o = courtreg(&["synth", "--n", "0", "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
    let o = courtreg(&["synth", "--n", "2", "--dropout", "1.5", "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
}

fn synth_dir(n: &str, extra: &[&str]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["synth", "--n", n, "--seed", "5", "--out", s(dir.path())];
    args.extend_from_slice(extra);
    let o = courtreg(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir
}

#[test]
fn estimate_clean_frame_without_fallback() {
    let d = synth_dir("1", &[]);
    let out = d.path().join("est.json");
    let o = courtreg(&[
        "estimate",
        "--heatmaps",
        s(&d.path().join("frames/frame_00000.kchm")),
        "--layout",
        s(&d.path().join("layout.json")),
        "--fallback",
        s(&d.path().join("fallback.json")),
        "--out",
        s(&out),
        "--strict",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("inliers"));
    let v = read_json(&out);
    assert_eq!(v["used_fallback"], false);
    assert_eq!(v["homography"]["direction"], "court_to_image");
    assert!(v["inlier_count"].as_u64().unwrap() >= 20);
}

#[test]
fn estimate_all_background_falls_back() {
    let d = synth_dir("1", &[]);
    let empty = d.path().join("empty.labels");
    io::write_bytes(&empty, &io::encode_labels(&ClassMap::filled(135, 240, 93))).unwrap();
    let out = d.path().join("est.json");
    let (layout, fallback) = (d.path().join("layout.json"), d.path().join("fallback.json"));
    let args = [
        "estimate",
        "--heatmaps",
        s(&empty),
        "--layout",
        s(&layout),
        "--fallback",
        s(&fallback),
        "--out",
        s(&out),
    ];
    let o = courtreg(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = read_json(&out);
    assert_eq!(v["used_fallback"], true);
    assert_eq!(v["fallback_reason"], "too_few_keypoints");
    let fb = read_json(&d.path().join("fallback.json"));
    assert_eq!(v["homography"], fb);

    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(code(&courtreg(&strict)), 3);
}

#[test]
fn estimate_missing_or_bad_input_is_a_data_error() {
    let d = synth_dir("1", &[]);
    let layout = d.path().join("layout.json");
    let fallback = d.path().join("fallback.json");
    let out = d.path().join("est.json");
    let o = courtreg(&[
        "estimate", "--heatmaps", "/nonexistent/x.kchm", "--layout", s(&layout),
        "--fallback", s(&fallback), "--out", s(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());

    let junk = d.path().join("junk.kchm");
    fs::write(&junk, b"not a tensor file at all, definitely not").unwrap();
    let o = courtreg(&[
        "estimate", "--heatmaps", s(&junk), "--layout", s(&layout),
        "--fallback", s(&fallback), "--out", s(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));
}

#[test]
fn eval_reports_mean_and_share_below_one_meter() {
    let d = synth_dir("4", &[]);
    let out = d.path().join("report.json");
    let o = courtreg(&[
        "eval",
        "--manifest",
        s(&d.path().join("manifest.json")),
        "--layout",
        s(&d.path().join("layout.json")),
        "--fallback",
        s(&d.path().join("fallback.json")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("mean error:") && text.contains("below 100 cm:"), "{text}");
    let v = read_json(&out);
    let per_frame = v["per_frame_error_cm"].as_array().unwrap();
    assert_eq!(per_frame.len(), 4);
    let mean = per_frame.iter().map(|x| x.as_f64().unwrap()).sum::<f64>() / 4.0;
    assert!((v["mean_error_cm"].as_f64().unwrap() - mean).abs() < 1e-9);
    assert_eq!(v["frames"].as_array().unwrap().len(), 4);
    assert_eq!(v["fallback_count"], 0);
    let report: courtreg::EvaluationReport = serde_json::from_value(v).unwrap();
    assert_eq!(report.failure_count, 0);
}

#[test]
fn eval_empty_manifest_is_a_data_error() {
    let d = synth_dir("1", &[]);
    let m = d.path().join("empty.json");
    fs::write(&m, br#"{"frames": [], "frame_size": [960, 540]}"#).unwrap();
    let o = courtreg(&[
        "eval",
        "--manifest",
        s(&m),
        "--layout",
        s(&d.path().join("layout.json")),
        "--fallback",
        s(&d.path().join("fallback.json")),
        "--out",
        s(&d.path().join("r.json")),
    ]);
    assert_eq!(code(&o), 2);
}

const BASE_COLOR: Rgb<u8> = Rgb([40, 60, 40]);

fn overlay_inputs(dir: &Path, h: [[f64; 3]; 3]) -> (PathBuf, PathBuf, PathBuf) {
    let img = dir.join("base.png");
    RgbImage::from_pixel(320, 180, BASE_COLOR).save(&img).unwrap();
    let hp = dir.join("h.json");
    let doc = serde_json::json!({"direction": "court_to_image", "units": "cm_to_px", "h": h});
    fs::write(&hp, serde_json::to_vec(&doc).unwrap()).unwrap();
    let tp = dir.join("template.json");
    fs::write(&tp, io::to_json_bytes(&courtreg::CourtTemplate::default())).unwrap();
    (img, hp, tp)
}

#[test]
fn overlay_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (img, hp, tp) = overlay_inputs(dir.path(), [[0.1, 0.0, 10.0], [0.0, 0.1, 20.0], [0.0, 0.0, 1.0]]);
    let out = dir.path().join("out/overlay.png");
    let o = courtreg(&["overlay", "--image", s(&img), "--homography", s(&hp), "--template", s(&tp), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let got = image::open(&out).unwrap().to_rgb8();

    // court outline spans x 10..290, y 20..170; halfway line at x = 150
    let magenta = Rgb([255, 0, 255]);
    for &(x, y) in &[(150, 95), (10, 95), (289, 95), (80, 20), (80, 169)] {
        assert_eq!(*got.get_pixel(x, y), magenta, "({x}, {y})");
    }
    for &(x, y) in &[(80, 95), (220, 60), (5, 5), (310, 175)] {
        assert_eq!(*got.get_pixel(x, y), BASE_COLOR, "({x}, {y})");
    }

    let golden_path = golden_dir().join("overlay_0.1px_per_cm.png");
    if std::env::var_os("COURTREG_BLESS").is_some() {
        fs::create_dir_all(golden_dir()).unwrap();
        got.save(&golden_path).unwrap();
    }
    let golden = image::open(&golden_path).unwrap().to_rgb8();
    assert_eq!(got.dimensions(), golden.dimensions());
    assert!(got.as_raw() == golden.as_raw(), "overlay differs from golden image");
}

#[test]
fn overlay_accepts_layout_and_estimate_documents() {
    let d = synth_dir("1", &[]);
    let est = d.path().join("est.json");
    let o = courtreg(&[
        "estimate",
        "--heatmaps",
        s(&d.path().join("frames/frame_00000.kchm")),
        "--layout",
        s(&d.path().join("layout.json")),
        "--fallback",
        s(&d.path().join("fallback.json")),
        "--out",
        s(&est),
    ]);
    assert_eq!(code(&o), 0);
    let img = d.path().join("frame.png");
    RgbImage::from_pixel(960, 540, BASE_COLOR).save(&img).unwrap();
    let out = d.path().join("overlay.png");
    let o = courtreg(&[
        "overlay", "--image", s(&img), "--homography", s(&est),
        "--template", s(&d.path().join("layout.json")), "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let got = image::open(&out).unwrap().to_rgb8();
    assert!(got.pixels().any(|p| *p == Rgb([255, 0, 255])));
}

#[test]
fn overlay_out_of_frame_leaves_image_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let (img, hp, tp) = overlay_inputs(dir.path(), [[0.1, 0.0, 5000.0], [0.0, 0.1, 5000.0], [0.0, 0.0, 1.0]]);
    let out = dir.path().join("overlay.png");
    let o = courtreg(&["overlay", "--image", s(&img), "--homography", s(&hp), "--template", s(&tp), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let got = image::open(&out).unwrap().to_rgb8();
    assert!(got.pixels().all(|p| *p == BASE_COLOR));
}

#[test]
fn overlay_malformed_homography_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (img, hp, tp) = overlay_inputs(dir.path(), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    fs::write(&hp, br#"{"direction": "image_to_court", "h": [[1, 0]]}"#).unwrap();
    let out = dir.path().join("overlay.png");
    let o = courtreg(&["overlay", "--image", s(&img), "--homography", s(&hp), "--template", s(&tp), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

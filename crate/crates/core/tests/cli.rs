use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lfx_core::cli::EVAL_HEADER;
use lfx_core::features::{read_tensor, Manifest, FEATURE_CHANNELS};
use lfx_core::io::{load_image, load_labels, load_mask};

fn lfx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfx")).args(args).output().expect("spawn lfx")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TWO_PLANE: &str = r#"{
  "name": "two-plane",
  "width": 64,
  "height": 48,
  "planes": [
    {"disparity": 0, "region": "full", "texture": {"kind": "noise", "seed": 17, "scale": 5}},
    {"disparity": 1, "region": {"rect": {"x": 20, "y": 14, "width": 16, "height": 18}},
     "texture": {"kind": "checker", "period": 4}}
  ]
}"#;

fn synth_two_plane(dir: &Path) -> std::path::PathBuf {
    let scene = dir.join("scene.json");
    fs::write(&scene, TWO_PLANE).unwrap();
    let data = dir.join("data");
    let out = lfx(&["synth", "--scene", s(&scene), "--out", s(&data), "--radius", "4", "--gt", "20,-20,0,40"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

#[test]
fn synth_writes_full_layout() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_two_plane(dir.path());
    for v in -4..=4 {
        for name in [format!("view_{v}.png"), format!("disp_{v}.pfm"), format!("conf_{v}.pfm")] {
            assert!(data.join(&name).is_file(), "{name}");
        }
    }
    assert!(data.join("gt_-20.png").is_file() && data.join("gt_mask_40.png").is_file());
    // deterministic bytes
    let again = dir.path().join("again");
    let scene = dir.path().join("scene.json");
    assert!(lfx(&["synth", "--scene", s(&scene), "--out", s(&again), "--radius", "4"]).status.success());
    for v in -4..=4 {
        let f = format!("view_{v}.png");
        assert_eq!(fs::read(data.join(&f)).unwrap(), fs::read(again.join(&f)).unwrap());
    }
}

#[test]
fn malformed_scene_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("bad.json");
    fs::write(&scene, "{ not json").unwrap();
    let out = lfx(&["synth", "--scene", s(&scene), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(lfx(&["render", "--t", "3"]).status.code(), Some(1));
    assert_eq!(lfx(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lfx(&["render", "--dataset", "x", "--out", "y", "--t", "1", "--avg-mode", "mean"]).status.code(), Some(1));
    let help = lfx(&["render", "--help"]);
    assert!(help.status.success());
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--layers", "--sp-sizes", "--avg-mode", "--window", "--config", "--patch-size"] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lfx(&["render", "--dataset", s(&dir.path().join("nope")), "--t", "20", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn render_writes_artifacts_and_eval_scores_them() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_two_plane(dir.path());
    let r20 = dir.path().join("r20");
    let out = lfx(&[
        "render", "--dataset", s(&data), "--t", "20", "--out", s(&r20),
        "--ground-truth", s(&data.join("gt_20.png")), "--patch-size", "32", "--stride", "16",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "vd.png", "vd_mask.png", "vsp1.png", "vsp2.png", "vsp1_mask.png", "vsp2_mask.png", "wt.pfm", "wt_mask.png",
        "labels.png", "labels_filled.png", "labels_filled_vis.png", "gap_mask.png", "completed.png", "baseline.png",
        "features.lft", "vd.lft", "gap_mask.lft", "gt.lft", "manifest.json",
    ] {
        assert!(r20.join(f).is_file(), "{f}");
    }
    let features = read_tensor(r20.join("features.lft")).unwrap();
    assert_eq!(features.dims, vec![48, 64, FEATURE_CHANNELS]);
    assert_eq!(read_tensor(r20.join("vd.lft")).unwrap().dims, vec![48, 64, 3]);

    let manifest = Manifest::load(r20.join("manifest.json")).unwrap();
    assert_eq!(manifest.entries[0].scene, "two-plane");
    assert_eq!(manifest.entries[0].alpha, 5.0);
    // 48x64 with 32-pixel patches on a 16 stride: 2 rows x 3 columns
    assert_eq!(manifest.entries.len(), 1 + 6);
    for e in &manifest.entries[1..] {
        assert_eq!(read_tensor(r20.join(&e.tensor)).unwrap().dims, vec![32, 32, FEATURE_CHANNELS]);
        assert!(r20.join(e.ground_truth.as_ref().unwrap()).is_file());
    }

    let r40 = dir.path().join("r40");
    assert!(lfx(&["render", "--dataset", s(&data), "--t", "40", "--out", s(&r40)]).status.success());
    let ambiguous = |d: &Path| {
        let l = load_labels(d.join("labels.png"), 16).unwrap();
        l.ambiguous_count()
    };
    assert!(ambiguous(&r40) >= ambiguous(&r20));
    assert!(load_labels(r20.join("labels_filled.png"), 16).unwrap().ambiguous_count() == 0);

    let rm20 = dir.path().join("rm20");
    assert!(lfx(&["render", "--dataset", s(&data), "--t", "-20", "--out", s(&rm20)]).status.success());

    let csv = dir.path().join("metrics.csv");
    let out = lfx(&[
        "eval", "--rendered", s(&r40), s(&rm20), s(&r20), "--ground-truth", s(&data), "--output", s(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], EVAL_HEADER);
    assert_eq!(lines.len(), 1 + 3 * 3);
    let t_col: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(t_col, ["-20", "-20", "-20", "20", "20", "20", "40", "40", "40"]);
    let psnr_of = |t: &str, method: &str| -> f64 {
        let row = lines.iter().find(|l| l.split(',').nth(1) == Some(t) && l.split(',').nth(3) == Some(method)).unwrap();
        row.split(',').nth(4).unwrap().parse().unwrap()
    };
    assert!(psnr_of("20", "completed") > psnr_of("20", "baseline"));
}

#[test]
fn t_zero_completes_to_the_center_view() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_two_plane(dir.path());
    let r0 = dir.path().join("r0");
    assert!(lfx(&["render", "--dataset", s(&data), "--t", "0", "--out", s(&r0)]).status.success());
    let center = load_image(data.join("view_0.png")).unwrap();
    let completed = load_image(r0.join("completed.png")).unwrap();
    for (a, b) in center.data().iter().zip(completed.data()) {
        assert!((a - b).abs() < 1e-6);
    }
    assert_eq!(load_mask(r0.join("gap_mask.png")).unwrap().count_set(), 0);

    let out = lfx(&["eval", "--rendered", s(&r0), "--ground-truth", s(&data)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let completed_row = text.lines().find(|l| l.contains(",completed,")).unwrap();
    assert!(completed_row.ends_with(",99.0000,1.000000"), "{completed_row}");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_two_plane(dir.path());
    let cfg = dir.path().join("render.toml");
    fs::write(&cfg, "layers = 4\nsp_sizes = [50, 200]\navg_mode = \"paper\"\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(lfx(&["render", "--dataset", s(&data), "--t", "20", "--out", s(&a), "--config", s(&cfg)]).status.success());
    assert!(lfx(&[
        "render", "--dataset", s(&data), "--t", "20", "--out", s(&b), "--layers", "4", "--sp-sizes", "50,200",
        "--avg-mode", "paper",
    ])
    .status
    .success());
    assert_eq!(fs::read(a.join("features.lft")).unwrap(), fs::read(b.join("features.lft")).unwrap());
    // flag overrides the file
    let c = dir.path().join("c");
    assert!(lfx(&[
        "render", "--dataset", s(&data), "--t", "20", "--out", s(&c), "--config", s(&cfg), "--layers", "16",
    ])
    .status
    .success());
    assert!(load_labels(c.join("labels_filled.png"), 16).unwrap().labels().data().iter().any(|&l| l > 4));

    fs::write(&cfg, "layers = \"many\"\n").unwrap();
    let bad = lfx(&["render", "--dataset", s(&data), "--t", "20", "--out", s(&c), "--config", s(&cfg)]);
    assert_eq!(bad.status.code(), Some(2));
}

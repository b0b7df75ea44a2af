use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gbi::config::Config;
use gbi::geometry::Vec2;
use gbi::junction::{detect_junctions, DetectionParams};
use gbi::prior::AnglePriorModel;
use gbi::raster::{load_image, load_mask, save_pgm, save_png, Raster};
use gbi::saliency::{gbi_from_junctions, SaliencyParams, Stages};
use gbi::scene::{render, Building, SceneSpec};

fn gbi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbi")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gbi(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rectangle_scene(dir: &Path) -> (PathBuf, PathBuf) {
    let scene = render(&SceneSpec {
        width: 128,
        height: 128,
        background: 0.2,
        buildings: vec![Building {
            corner: Vec2::new(30.0, 35.0),
            edge1: Vec2::new(45.0, 0.0),
            edge2: Vec2::new(0.0, 38.0),
            intensity: 0.75,
        }],
        roads: vec![],
        shadow: None,
        noise_sigma: 0.01,
        seed: 4,
    })
    .unwrap();
    let (img, mask) = (dir.join("rect.pgm"), dir.join("rect_mask.pgm"));
    save_pgm(&scene.image, &img).unwrap();
    save_pgm(&scene.mask, &mask).unwrap();
    (img, mask)
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn junctions_on_constant_image_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("flat.pgm");
    save_pgm(&Raster::filled(80, 80, 0.4), &img).unwrap();
    let out = dir.path().join("out");
    ok(&["junctions", s(&img), "--out-dir", s(&out)]);
    assert_eq!(csv_rows(&out.join("flat.csv")), 0);
    assert!(out.join("flat_overlay.png").exists());
}

#[test]
fn junctions_on_rectangle_finds_corners() {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = rectangle_scene(dir.path());
    let out = dir.path().join("out");
    ok(&["junctions", s(&img), "--out-dir", s(&out)]);
    assert!(csv_rows(&out.join("rect.csv")) >= 4);
    assert!(csv_rows(&out.join("rect_l.csv")) >= 4);
}

#[test]
fn missing_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = gbi(&["junctions", s(&dir.path().join("nope.png")), "--out-dir", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&res.stderr).is_empty());
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(gbi(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(gbi(&["segment", "x.png"]).status.code(), Some(2));
    assert_eq!(gbi(&["--jobs", "0", "dump-config"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[saliency]\nblur_side = 4\n").unwrap();
    assert_eq!(gbi(&["--config", s(&bad), "dump-config"]).status.code(), Some(2));
}

#[test]
fn segment_checks_threshold_range() {
    let dir = tempfile::tempdir().unwrap();
    let heat = dir.path().join("h.png");
    save_png(&Raster::from_fn(10, 10, |x, _| x as f64 / 9.0), &heat).unwrap();
    let out = dir.path().join("seg.png");
    for t in ["-0.1", "1.01"] {
        assert_eq!(gbi(&["segment", s(&heat), "-t", t, "--out", s(&out)]).status.code(), Some(2));
    }
    assert!(!out.exists());
    ok(&["segment", s(&heat), "-t", "0.5", "--out", s(&out)]);
    let seg = load_image(&out).unwrap();
    for y in 0..10 {
        for x in 0..10 {
            let v = (x as f64 / 9.0 * 255.0).round() / 255.0;
            assert_eq!(seg.get(x, y), if v >= 0.5 { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = String::from_utf8(ok(&["dump-config"]).stdout).unwrap();
    assert_eq!(Config::from_toml(&first).unwrap(), Config::default());
    let path = dir.path().join("c.toml");
    std::fs::write(&path, &first).unwrap();
    let second = String::from_utf8(ok(&["--config", s(&path), "dump-config"]).stdout).unwrap();
    assert_eq!(first, second);
    let seeded = dir.path().join("seeded.toml");
    ok(&["--seed", "99", "dump-config", "--out", s(&seeded)]);
    assert_eq!(Config::load(&seeded).unwrap().seed, 99);
}

#[test]
fn gbi_on_constant_image_is_black() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("flat.pgm");
    save_pgm(&Raster::filled(80, 80, 0.6), &img).unwrap();
    ok(&["gbi", s(&img), "--out-dir", s(dir.path())]);
    let heat = load_image(dir.path().join("flat_gbi.png")).unwrap();
    assert!(heat.data().iter().all(|&v| v == 0.0));
}

#[test]
fn gbi_flags_select_stages() {
    let dir = tempfile::tempdir().unwrap();
    let (img, mask) = rectangle_scene(dir.path());
    let raw_dir = dir.path().join("raw");
    let args = ["--no-angle", "--no-neighbor", "--no-shadow", "--no-blur"];
    ok(&[&["gbi", s(&img), "--out-dir", s(&raw_dir)][..], &args[..]].concat());
    let image = load_image(&img).unwrap();
    let junctions = detect_junctions(&image, &DetectionParams::default()).unwrap();
    let (_, expected) = gbi_from_junctions(
        &image,
        &junctions,
        &AnglePriorModel::shipped(),
        &SaliencyParams::default(),
        Stages::RAW,
    )
    .unwrap();
    let expected_png = dir.path().join("expected.png");
    save_png(&expected.index, &expected_png).unwrap();
    assert_eq!(std::fs::read(raw_dir.join("rect_gbi.png")).unwrap(), std::fs::read(&expected_png).unwrap());

    let full_dir = dir.path().join("full");
    ok(&["gbi", s(&img), "--out-dir", s(&full_dir)]);
    let heat = load_image(full_dir.join("rect_gbi.png")).unwrap();
    let mask = load_mask(&mask).unwrap();
    let mean = |want: f64| {
        let v: Vec<f64> = heat.data().iter().zip(mask.data()).filter(|(_, m)| **m == want).map(|(h, _)| *h).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(1.0) > mean(0.0));
}

#[test]
fn gbi_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = rectangle_scene(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["gbi", s(&img), "--out-dir", s(&a)]);
    ok(&["--jobs", "1", "gbi", s(&img), "--out-dir", s(&b)]);
    for f in ["rect_gbi.png", "rect_raw.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    ok(&["--seed", "3", "gen-scenes", s(&suite), "--count", "3"]);
    let out = dir.path().join("eval");
    ok(&["eval", s(&suite.join("masks")), s(&suite.join("masks")), "--out-dir", s(&out)]);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mAP"], 1.0);
    assert_eq!(summary["mean_f"], 1.0);
    assert_eq!(csv_rows(&out.join("pr.csv")), 3 * 101);
}

#[test]
fn eval_lists_unmatched_files() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    ok(&["gen-scenes", s(&suite), "--count", "2"]);
    std::fs::remove_file(suite.join("masks").join("001.pgm")).unwrap();
    let out = dir.path().join("eval");
    let res = gbi(&["eval", s(&suite.join("scenes")), s(&suite.join("masks")), "--out-dir", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("001.pgm"));
    assert!(!out.exists());
}

#[test]
fn fit_prior_refuses_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    assert_eq!(gbi(&["fit-prior", s(dir.path()), "--out", s(&out)]).status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn fit_prior_refuses_too_few_junctions() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    ok(&["gen-scenes", s(&suite), "--count", "1"]);
    let out = dir.path().join("m.json");
    let res = gbi(&["fit-prior", s(&suite), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("at least"));
    assert!(!out.exists());
}

fn mass(model: &AnglePriorModel, lo: f64, hi: f64) -> f64 {
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| model.building.pdf(lo + (i as f64 + 0.5) * h) * h).sum()
}

#[test]
fn fit_prior_concentrates_building_mass_near_right_angles() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    ok(&["--seed", "5", "gen-scenes", s(&suite), "--count", "50"]);
    let out = dir.path().join("m.json");
    let hist = dir.path().join("h.csv");
    ok(&["fit-prior", s(&suite), "--out", s(&out), "--histogram", s(&hist)]);
    let model = AnglePriorModel::load(&out).unwrap();
    assert!(mass(&model, PI / 3.0, 2.0 * PI / 3.0) >= 0.6);
    assert!(model.posterior_building(PI / 2.0) > model.posterior_building(PI / 6.0));
    assert_eq!(csv_rows(&hist), 36);
}

#[test]
fn fit_prior_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    ok(&["gen-scenes", s(&suite), "--count", "12", "--seed", "1"]);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    ok(&["--seed", "4", "fit-prior", s(&suite), "--out", s(&a)]);
    ok(&["--seed", "4", "--jobs", "1", "fit-prior", s(&suite), "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn gen_scenes_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["--seed", "8", "gen-scenes", s(&a), "--count", "2"]);
    ok(&["--seed", "8", "gen-scenes", s(&b), "--count", "2"]);
    for sub in ["scenes/000.pgm", "masks/001.pgm", "corners/001.csv"] {
        assert_eq!(std::fs::read(a.join(sub)).unwrap(), std::fs::read(b.join(sub)).unwrap());
    }
}

#[test]
fn ablate_rows_improve_down_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    ok(&["--seed", "7", "gen-scenes", s(&suite), "--count", "8"]);
    let out = dir.path().join("ablate.csv");
    ok(&["ablate", s(&suite), "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["raw", "+neighbor", "+angle", "+shadow"]);
    let f: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    for w in f.windows(2) {
        assert!(w[1] >= w[0] - 0.02, "{f:?}");
    }
}

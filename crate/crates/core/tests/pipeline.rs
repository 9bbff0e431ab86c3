mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use common::{fixture_config, fixture_pairs};
use reframe::camera::CameraParams;
use reframe::ingest::{save_ply, PlyEncoding};
use reframe::objective::{render_view, thirds_analysis, ConstantScorer, Scorer, SplatPolicy};
use reframe::pipeline::{
    optimize_with_and_without_scaling, run_ablation, run_batch, run_single, Method, PipelineConfig, PipelineError,
};
use reframe::synthetic::{fixture_scenes, write_scene};

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares against a recorded file; `REFRAME_BLESS=1` records it instead.
fn assert_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("REFRAME_BLESS").is_some() {
        fs::create_dir_all(golden_dir()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("missing golden {}: {e}", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

fn fixture_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for s in fixture_scenes() {
        write_scene(&s, dir.path()).unwrap();
    }
    dir
}

fn single_config(inputs: &Path, name: &str, out: &Path) -> PipelineConfig {
    let mut cfg = fixture_config();
    cfg.image = Some(inputs.join(format!("{name}.png")));
    cfg.depth = Some(inputs.join(format!("{name}.depth.f32")));
    cfg.output_dir = out.to_path_buf();
    cfg
}

#[test]
fn single_run_writes_consistent_artifacts() {
    let inputs = fixture_dir();
    let out = tempfile::tempdir().unwrap();
    let cfg = single_config(inputs.path(), "portrait", out.path());
    let r = run_single(&cfg).unwrap();
    let s = &r.summary;
    assert!(s.optimized.total >= s.input.total);
    assert!(s.frozen_scaling_best_total.unwrap() <= s.optimized.total);

    let trace = fs::read_to_string(out.path().join("trace.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), s.evaluations);
    assert_eq!(lines[0]["stage"], "frozen_scaling");
    assert_eq!(lines.last().unwrap()["stage"], "full");
    let best_line = lines.iter().map(|l| l["total"].as_f64().unwrap()).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best_line, s.optimized.total);
    assert_eq!(lines[0]["params"], serde_json::to_value(CameraParams::identity()).unwrap());

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["optimized"]["total"].as_f64().unwrap(), s.optimized.total);
    let params: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("best_params.json")).unwrap()).unwrap();
    let optimized = image::open(out.path().join("optimized.png")).unwrap();
    assert_eq!(optimized.width() as u64, params["output_width"].as_u64().unwrap());
    assert_eq!(optimized.height() as u64, params["output_height"].as_u64().unwrap());

    // The capture view reproduces the input photograph.
    let input = image::open(inputs.path().join("portrait.png")).unwrap().to_rgb8();
    let view = image::open(out.path().join("input_view.png")).unwrap().to_rgb8();
    assert_eq!(input, view);
}

#[test]
fn frozen_scaling_mode_keeps_unit_scales() {
    let inputs = fixture_dir();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = single_config(inputs.path(), "edge", out.path());
    cfg.scaling = false;
    let r = run_single(&cfg).unwrap();
    assert_eq!((r.summary.best_params.s_w, r.summary.best_params.s_h), (1.0, 1.0));
    assert_eq!(r.summary.frozen_scaling_best_total, None);
    assert!(r.summary.optimized.total >= r.summary.input.total);
}

#[test]
fn dead_center_subject_moves_toward_a_thirds_point() {
    let pairs = fixture_pairs();
    let (src, scene) = &pairs[0];
    assert_eq!(src.name, "centered");
    let cfg = fixture_config();
    let scorer: Arc<dyn Scorer> = Arc::new(reframe::objective::ThirdsScorer);
    let cmp = optimize_with_and_without_scaling(scene, &cfg, &scorer).unwrap();
    let before = thirds_analysis(&render_view(&scene.cloud, &CameraParams::identity(), &scene.base, cfg.splat).color);
    let after = thirds_analysis(&render_view(&scene.cloud, &cmp.full_params(&cfg), &scene.base, cfg.splat).color);
    let (d0, d1) = (before.distance.unwrap(), after.distance.unwrap());
    assert!(d1 < d0, "centroid distance {d0} -> {d1}");
}

#[test]
fn constant_scorer_without_penalty_returns_the_constant() {
    let pairs = fixture_pairs();
    let mut cfg = fixture_config();
    cfg.lambda_mask = 0.0;
    let scorer: Arc<dyn Scorer> = Arc::new(ConstantScorer::new(2.5));
    let cmp = optimize_with_and_without_scaling(&pairs[2].1, &cfg, &scorer).unwrap();
    for out in [&cmp.frozen, &cmp.full] {
        assert!((out.best.total - 2.5).abs() <= 1e-12);
        assert!(out.trace.len() <= 510);
    }
}

#[test]
fn batch_reports_rows_and_means() {
    let inputs = fixture_dir();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config();
    cfg.output_dir = out.path().to_path_buf();
    let b = run_batch(inputs.path(), &cfg).unwrap();
    let names: Vec<&str> = b.report.rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["centered", "edge", "portrait"]);
    assert!(b.report.failures.is_empty());
    let mean = b.report.rows.iter().map(|r| r.optimized_total).sum::<f64>() / 3.0;
    let total = b.report.aggregates.last().unwrap();
    assert_eq!(total.images, 3);
    assert!((total.optimized_total - mean).abs() <= 1e-9);
    for r in &b.report.rows {
        assert!(r.optimized_total >= r.input_total);
        assert!(out.path().join(&r.name).join("optimized.png").is_file());
    }
    let csv = fs::read_to_string(out.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("image,")).count(), 3);
    assert!(out.path().join("report.json").is_file());
    assert_eq!(b.timings.len(), 3);
}

#[test]
fn corrupt_input_becomes_a_failure_record() {
    let inputs = fixture_dir();
    fs::write(inputs.path().join("edge.png"), b"definitely not a png").unwrap();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config();
    cfg.output_dir = out.path().to_path_buf();
    let b = run_batch(inputs.path(), &cfg).unwrap();
    assert!(b.has_failures());
    assert_eq!(b.report.rows.len(), 2);
    assert_eq!(b.report.failures.len(), 1);
    assert_eq!(b.report.failures[0].name, "edge");
    assert_eq!(b.report.failures[0].kind, "unreadable_input");
    let csv = fs::read_to_string(out.path().join("report.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("failure,.,edge,")));
}

#[test]
fn datasets_follow_subdirectories() {
    let root = tempfile::tempdir().unwrap();
    let scenes = fixture_scenes();
    for (dir, s) in [("alpha", &scenes[0]), ("alpha", &scenes[1]), ("beta", &scenes[2])] {
        let d = root.path().join(dir);
        fs::create_dir_all(&d).unwrap();
        write_scene(s, &d).unwrap();
    }
    let out = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config();
    cfg.output_dir = out.path().to_path_buf();
    cfg.stop.max_evaluations = 200;
    cfg.stop.window = 100;
    let b = run_batch(root.path(), &cfg).unwrap();
    let aggs: Vec<(&str, usize)> = b.report.aggregates.iter().map(|a| (a.dataset.as_str(), a.images)).collect();
    assert_eq!(aggs, [("alpha", 2), ("beta", 1), ("Total", 3)]);
    assert!(out.path().join("alpha/centered/summary.json").is_file());
}

#[test]
fn ply_scene_matches_rgbd_scene() {
    let pairs = fixture_pairs();
    let (src, scene) = &pairs[1];
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("edge.ply");
    save_ply(&scene.cloud, &ply, PlyEncoding::BinaryLittleEndian).unwrap();
    let mut cfg = fixture_config();
    cfg.ply = Some(ply);
    cfg.output_dir = dir.path().join("out");
    assert!(matches!(run_single(&cfg), Err(PipelineError::Config(_))));
    cfg.base_width = Some(src.image.width());
    cfg.base_height = Some(src.image.height());
    cfg.stop.max_evaluations = 100;
    cfg.stop.window = 100;
    let r = run_single(&cfg).unwrap();
    let view = image::open(dir.path().join("out/input_view.png")).unwrap().to_rgb8();
    assert_eq!(view.as_raw(), &src.image.to_rgb8());
    assert!(r.summary.optimized.total >= r.summary.input.total);
}

#[test]
fn preprocessing_pads_the_scene() {
    let inputs = fixture_dir();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = single_config(inputs.path(), "centered", out.path());
    cfg.preprocess = true;
    cfg.stop.max_evaluations = 12;
    cfg.stop.window = 12;
    let r = run_single(&cfg).unwrap();
    let view = image::open(out.path().join("input_view.png")).unwrap();
    // 64x48 scales to 512x384, then 256 pixels are added on every side.
    assert_eq!((view.width(), view.height()), (1024, 896));
    assert!(r.summary.optimized.total >= r.summary.input.total);
}

#[test]
fn errors_are_classified() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config();
    cfg.output_dir = out.path().to_path_buf();
    let e = run_single(&cfg).unwrap_err();
    assert_eq!(e.kind(), "invalid_config");
    cfg.image = Some(out.path().join("missing.png"));
    cfg.depth = Some(out.path().join("missing.depth.f32"));
    let e = run_single(&cfg).unwrap_err();
    assert_eq!(e.kind(), "unreadable_input");
    assert_eq!(e.to_json()["error"]["kind"], "unreadable_input");
}

#[test]
fn ablation_table_matches_golden() {
    let inputs = fixture_dir();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config();
    cfg.output_dir = out.path().to_path_buf();
    let t = run_ablation(inputs.path(), &cfg).unwrap();
    let totals: Vec<f64> = Method::ALL.iter().map(|m| t.row(*m).total).collect();
    assert!(totals.windows(2).all(|w| w[0] <= w[1]), "ordering violated: {totals:?}");
    assert_golden("ablation.txt", &fs::read_to_string(out.path().join("ablation.txt")).unwrap());
    assert_golden("ablation.csv", &fs::read_to_string(out.path().join("ablation.csv")).unwrap());
}

#[test]
fn scaling_comparison_best_totals_match_golden() {
    let cfg = fixture_config();
    let scorer: Arc<dyn Scorer> = Arc::new(reframe::objective::ThirdsScorer);
    let mut lines = String::new();
    for (src, scene) in fixture_pairs() {
        let cmp = optimize_with_and_without_scaling(&scene, &cfg, &scorer).unwrap();
        lines.push_str(&format!(
            "{} frozen={:?} full={:?} evaluations={}+{}\n",
            src.name,
            cmp.frozen.best.total,
            cmp.full.best.total,
            cmp.frozen.trace.len(),
            cmp.full.trace.len()
        ));
    }
    assert_golden("scaling_best_totals.txt", &lines);
}

#[test]
fn auto_splat_render_of_best_view_has_no_pinholes() {
    let pairs = fixture_pairs();
    let (_, scene) = &pairs[1];
    let p = CameraParams {
        s_w: 1.6,
        s_h: 1.6,
        ..CameraParams::identity()
    };
    let out = render_view(&scene.cloud, &p, &scene.base, SplatPolicy::Auto);
    let (w, h) = (out.mask.width(), out.mask.height());
    let holes = (1..h - 1)
        .flat_map(|y| (1..w - 1).map(move |x| (x, y)))
        .filter(|&(x, y)| !out.mask.get(x, y))
        .count();
    assert_eq!(holes, 0);
}

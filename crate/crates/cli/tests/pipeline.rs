use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use hodl_cli::demo::{write_demo, DemoSpec};
use hodl_cli::pipeline::{EpisodeManifest, Manifest};
use hodl_cli::{run_pipeline, Members, RunConfig, RunError, Stage, StageStatus};
use hodl_core::metrics::read_json;
use hodl_core::report::{read_bubble_csv, render_svg, ChartLayout};

fn demo(dir: &Path) -> RunConfig {
    write_demo(dir, &DemoSpec::default()).unwrap();
    let mut cfg = RunConfig::load(&dir.join("run.json")).unwrap();
    cfg.selection.bootstrap = 20;
    cfg.selection.grid_points = 20;
    cfg.irf.bootstrap = 99;
    cfg
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, p: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(p).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn without_timestamp(bytes: &[u8]) -> Manifest {
    let mut m: Manifest = serde_json::from_slice(bytes).unwrap();
    m.updated_at = None;
    m
}

#[test]
fn smoke_run_emits_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo(tmp.path());
    assert_eq!(cfg.n_per_interval, 10_000);
    let out = cfg.paths.output.clone();
    let bundle = run_pipeline(cfg.clone()).unwrap();
    assert!(bundle.stages.iter().all(|(_, s)| *s == StageStatus::Ran));
    assert_eq!(bundle.stages.len(), Stage::ALL.len());

    for stage in Stage::ALL {
        for rel in stage.outputs() {
            assert!(out.join(rel).exists(), "{stage}: missing {rel}");
        }
    }
    assert_eq!(fs::read_dir(out.join("clean_panels")).unwrap().count(), 3);

    let episodes: EpisodeManifest = read_json(&out.join("episodes/manifest.json")).unwrap();
    assert_eq!(episodes.seed, 42);
    assert_eq!(episodes.config_hash, cfg.hash());
    assert_eq!(episodes.batches.len(), 6);
    assert!(episodes.batches.iter().all(|b| b.accepted == 10_000 && b.complete));

    let manifest: Manifest = read_json(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.seeds, Some(cfg.seeds));
    assert_eq!(manifest.config_hash, cfg.hash());
    assert_eq!(bundle.seeds, cfg.seeds);

    for f in &bundle.figures {
        let layout = if f.svg.contains("tail_risk") { ChartLayout::TailRisk } else { ChartLayout::Upside };
        let rows = read_bubble_csv(&out.join(&f.csv)).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(fs::read_to_string(out.join(&f.svg)).unwrap(), render_svg(&rows, layout));
    }
    for t in bundle.metric_tables.iter().chain(&bundle.irf_tables) {
        assert!(out.join(t).is_file(), "{t}");
    }
    let surface = fs::read_to_string(out.join("irf_surface.csv")).unwrap();
    assert!(surface.starts_with("basket,predictor,target,horizon,estimate,lo,hi,significant\n"));
}

#[test]
fn rerun_is_byte_identical_and_skips() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = demo(tmp.path());
    cfg.paths.output = tmp.path().join("a");
    run_pipeline(cfg.clone()).unwrap();
    let first = files(&cfg.paths.output);

    let again = run_pipeline(cfg.clone()).unwrap();
    assert!(again.stages.iter().all(|(_, s)| *s == StageStatus::Skipped));

    // A fresh directory recomputes everything.
    let mut other = cfg.clone();
    other.paths.output = tmp.path().join("b");
    let fresh = run_pipeline(other.clone()).unwrap();
    assert!(fresh.stages.iter().all(|(_, s)| *s == StageStatus::Ran));
    let second = files(&other.paths.output);

    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (path, bytes) in &first {
        if path == Path::new("manifest.json") {
            assert_eq!(without_timestamp(bytes), without_timestamp(&second[path]));
        } else {
            assert!(bytes == &second[path], "{} differs", path.display());
        }
    }
}

#[test]
fn deleting_irf_outputs_reruns_only_irf_onward() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo(tmp.path());
    let out = cfg.paths.output.clone();
    run_pipeline(cfg.clone()).unwrap();
    let before = files(&out);
    let mtime = |rel: &str| fs::metadata(out.join(rel)).unwrap().modified().unwrap();
    let kept = ["episodes/manifest.json", "metrics_overall.csv", "tensor/ALL/tensor_meta.json", "stability_report.json"];
    let stamps: Vec<_> = kept.iter().map(|r| mtime(r)).collect();

    for rel in Stage::Irf.outputs() {
        fs::remove_file(out.join(rel)).unwrap();
    }
    let bundle = run_pipeline(cfg).unwrap();
    let status: BTreeMap<Stage, StageStatus> = bundle.stages.into_iter().collect();
    for s in [Stage::Ingest, Stage::Simulate, Stage::Metrics, Stage::Features, Stage::Select] {
        assert_eq!(status[&s], StageStatus::Skipped, "{s}");
    }
    assert_eq!(status[&Stage::Irf], StageStatus::Ran);
    assert_eq!(kept.iter().map(|r| mtime(r)).collect::<Vec<_>>(), stamps);

    let after = files(&out);
    for rel in Stage::Irf.outputs() {
        assert_eq!(before[Path::new(rel)], after[Path::new(rel)], "{rel}");
    }
}

#[test]
fn changing_a_seed_invalidates_only_downstream_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = demo(tmp.path());
    cfg.irf.bootstrap = 19;
    run_pipeline(cfg.clone()).unwrap();
    cfg.seeds.select += 1;
    let status: BTreeMap<Stage, StageStatus> = run_pipeline(cfg).unwrap().stages.into_iter().collect();
    assert_eq!(status[&Stage::Features], StageStatus::Skipped);
    assert_eq!(status[&Stage::Select], StageStatus::Ran);
    assert_eq!(status[&Stage::Irf], StageStatus::Ran);
}

#[test]
fn errors_carry_stage_and_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = demo(tmp.path());

    let mut missing = cfg.clone();
    missing.paths.riskfree = tmp.path().join("nope.csv");
    let err = run_pipeline(missing).unwrap_err();
    assert!(matches!(err, RunError::Config(_)));
    assert_eq!(err.exit_code(), 1);

    cfg.baskets.insert("L1".into(), Members::Symbols(vec!["BTC".into(), "NOPE".into()]));
    let err = run_pipeline(cfg).unwrap_err();
    match &err {
        RunError::Stage { stage, error } => {
            assert_eq!(*stage, Stage::Simulate);
            assert!(error.to_string().contains("NOPE"));
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let hodl = || {
        let mut c = Command::new(env!("CARGO_BIN_EXE_hodl"));
        c.current_dir(tmp.path()).env("RUST_LOG", "error");
        c
    };
    let code = |c: &mut Command| c.status().unwrap().code();

    assert_eq!(code(hodl().args(["demo-data", "--dir", "d"])), Some(0));
    assert_eq!(code(hodl().args(["all", "--config", "missing.json"])), Some(1));
    assert_eq!(code(hodl().args(["not-a-verb"])), Some(1));
    // Metrics before simulate has nothing to read.
    assert_eq!(code(hodl().args(["metrics", "--config", "d/run.json"])), Some(2));
    assert_eq!(code(hodl().args(["ingest", "--config", "d/run.json"])), Some(0));
    assert!(tmp.path().join("d/out/exclusions.json").is_file());
    assert_eq!(
        code(hodl().args(["simulate", "--config", "d/run.json", "--basket", "ALL", "--interval", "731-1095", "--n", "500", "--seed-simulate", "3"])),
        Some(0)
    );
    let m: EpisodeManifest = read_json(&tmp.path().join("d/out/episodes/manifest.json")).unwrap();
    assert_eq!((m.seed, m.batches.len(), m.batches[0].accepted), (3, 1, 500));
}

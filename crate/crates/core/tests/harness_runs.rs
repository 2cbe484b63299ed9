use std::fs;
use std::path::Path;

use airy_flow::geometry::Shape;
use airy_flow::harness::{
    self, Axis, ConvergenceStudyConfig, HarnessError, RunConfig, RunStatus, CONVERGENCE_HEADER, DIAGNOSTICS_HEADER,
    FILTER_STUDY_VARIANTS,
};
use airy_flow::{FilterMode, Scheme, SchemeError};

fn circle_run(dir: &Path, scheme: Scheme) -> RunConfig {
    let mut cfg = RunConfig::new(Shape::Circle { radius: 1.0 }, 32, 1e-3, 1.0, scheme);
    cfg.diagnostic_stride = 50;
    cfg.snapshot_stride = 400;
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn columns(line: &str) -> Vec<f64> {
    line.split(',').map(|v| v.parse().unwrap()).collect()
}

#[test]
fn circle_diagnostics_are_flat() {
    for scheme in Scheme::ALL {
        let dir = tempfile::tempdir().unwrap();
        let summary = harness::run_experiment(&circle_run(dir.path(), scheme)).unwrap();
        assert_eq!(summary.status, RunStatus::Completed);
        assert_eq!(summary.steps, 1000);
        let text = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(DIAGNOSTICS_HEADER));
        let rows: Vec<Vec<f64>> = lines.map(columns).collect();
        assert_eq!(rows.len(), 21);
        assert_eq!(rows.last().unwrap()[0], 1.0);
        // Every column but time is constant.
        for col in 1..rows[0].len() {
            for row in &rows {
                assert!(
                    (row[col] - rows[0][col]).abs() <= 1e-10,
                    "{scheme:?} column {col}: {} vs {}",
                    row[col],
                    rows[0][col]
                );
            }
        }
    }
}

#[test]
fn snapshots_include_the_final_step() {
    let dir = tempfile::tempdir().unwrap();
    harness::run_experiment(&circle_run(dir.path(), Scheme::Cn)).unwrap();
    let mut names: Vec<String> = fs::read_dir(dir.path().join("snapshots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    // Stride 400 of 1000 steps: 0, 400, 800 and the forced final step.
    let curves: Vec<&String> = names.iter().filter(|n| n.starts_with("curve_t")).collect();
    assert_eq!(curves.len(), 4, "{names:?}");
    assert!(names.contains(&"curve_t1.00000000.csv".to_string()));
    assert!(names.contains(&"spectrum_t0.40000000.csv".to_string()));

    let curve = fs::read_to_string(dir.path().join("snapshots/curve_t1.00000000.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("alpha,x,y,k"));
    for line in curve.lines().skip(1) {
        let v = columns(line);
        assert!((v[1].hypot(v[2]) - 1.0).abs() < 1e-10);
        assert!((v[3] - 1.0).abs() < 1e-10);
    }
    let spectrum = fs::read_to_string(dir.path().join("snapshots/spectrum_t1.00000000.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 33);
}

#[test]
fn manifest_lists_existing_files() {
    let dir = tempfile::tempdir().unwrap();
    let summary = harness::run_experiment(&circle_run(dir.path(), Scheme::Adb)).unwrap();
    let manifest: toml::Table = fs::read_to_string(dir.path().join("manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let result = manifest["result"].as_table().unwrap();
    assert_eq!(result["status"].as_str(), Some("completed"));
    assert_eq!(result["steps"].as_integer(), Some(1000));
    assert!(result["wall_time_s"].as_float().unwrap() >= 0.0);
    let files = result["files"].as_array().unwrap();
    assert_eq!(files.len(), summary.files.len());
    for f in files {
        assert!(dir.path().join(f.as_str().unwrap()).is_file(), "{f}");
    }
    assert_eq!(manifest["config"]["run"]["scheme"].as_str(), Some("adb"));

    // The echoed config reproduces the run.
    let echo = fs::read_to_string(dir.path().join("config.toml")).unwrap();
    match harness::parse_config(&echo).unwrap() {
        harness::ParsedConfig::Run(cfg) => assert_eq!(cfg, circle_run(dir.path(), Scheme::Adb)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let read_all = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        for sub in ["", "snapshots"] {
            let mut entries: Vec<_> = fs::read_dir(dir.join(sub))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            entries.sort();
            for p in entries.into_iter().filter(|p| p.is_file()) {
                let name = p.file_name().unwrap().to_string_lossy().to_string();
                if name == "manifest.toml" || name == "config.toml" {
                    continue;
                }
                out.push((name, fs::read(&p).unwrap()));
            }
        }
        out
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let mut cfg = RunConfig::new(Shape::e1(), 64, 1e-3, 0.2, Scheme::Cnadb);
        cfg.snapshot_stride = 50;
        cfg.output_dir = dir.path().to_path_buf();
        harness::run_experiment(&cfg).unwrap();
    }
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    assert!(fa.len() >= 10);
    assert_eq!(fa, fb);
}

#[test]
fn blow_up_leaves_flagged_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(Shape::e3(), 256, 1e-3, 1.0, Scheme::Adb);
    cfg.output_dir = dir.path().to_path_buf();
    let err = harness::run_experiment(&cfg).unwrap_err();
    let HarnessError::Scheme(SchemeError::BlowUp { step, .. }) = err else {
        panic!("{err}");
    };
    let manifest: toml::Table = fs::read_to_string(dir.path().join("manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(manifest["result"]["status"].as_str(), Some("blow_up"));
    assert_eq!(manifest["result"]["blow_up_step"].as_integer(), Some(step as i64));
    let rows = fs::read_to_string(dir.path().join("diagnostics.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(rows, step);
}

#[test]
fn linear_problem_converges_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = RunConfig::new(Shape::e1(), 64, 1e-3, 0.1, Scheme::Adb);
    base.nonlinear = false;
    base.output_dir = dir.path().to_path_buf();
    let study = ConvergenceStudyConfig::new(base, Axis::Time, 0.1);
    let row = harness::run_convergence_study(&study, 2).unwrap();
    assert!(row.err1 <= 1e-13 && row.err2 <= 1e-13, "{row:?}");
    assert_eq!(row.order, None);
    let text = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CONVERGENCE_HEADER));
    let last = lines.next().unwrap();
    assert!(last.starts_with("E1,ADB,") && last.ends_with(",exact"), "{last}");
}

#[test]
fn cardioid_cn_time_order() {
    let study = match harness::preset("time-c-cn").unwrap() {
        harness::Preset::Convergence(s) => s,
        _ => unreachable!(),
    };
    let row = harness::convergence_row(&study, 0).unwrap();
    let order = row.order.unwrap();
    assert!((1.6..=2.5).contains(&order), "{row:?}");
    assert_eq!((row.curve.as_str(), row.scheme.as_str()), ("C", "CN"));
}

#[test]
fn filter_study_covers_every_variant() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = RunConfig::new(Shape::e3(), 128, 2e-3, 0.2, Scheme::Adb);
    base.diagnostic_stride = 5;
    base.output_dir = dir.path().to_path_buf();
    let runs = harness::run_filter_study(&base, 0).unwrap();
    let labels: Vec<&str> = runs.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["ADB", "ADBDPR", "ADBK", "CN", "CNDPR", "CNK", "CNADB"]);
    assert_eq!(runs.len(), FILTER_STUDY_VARIANTS.len());
    // Unfiltered ADB blows up at this step; the study still completes the rest.
    assert!(matches!(runs[0].status, RunStatus::BlowUp { .. }));
    assert!(runs.iter().skip(3).all(|r| r.status == RunStatus::Completed));

    let summary = fs::read_to_string(dir.path().join("filter_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 8);
    assert!(summary.contains("ADB,blow_up,"));
    let spectrum = fs::read_to_string(dir.path().join("filter_spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 1 + 7 * 128);
    assert!(dir.path().join("filter_xi.csv").is_file());
}

#[test]
fn krasny_only_touches_tiny_modes() {
    let mut base = RunConfig::new(Shape::e1(), 128, 1e-3, 0.05, Scheme::Adb);
    base.diagnostic_stride = 50;
    let runs = harness::filter_study_runs(&base, 0).unwrap();
    let (adb, adbk) = (&runs[0], &runs[2]);
    assert_eq!(adbk.filter, FilterMode::Krasny);
    // Removed amplitudes are below 1e-13 per step; coupling spreads them
    // but they stay at that level in every mode.
    let worst = adb
        .spectrum
        .iter()
        .zip(&adbk.spectrum)
        .map(|((_, p), (_, q))| (p.sqrt() - q.sqrt()).abs())
        .fold(0.0f64, f64::max);
    assert!(worst > 0.0 && worst <= 1e-11, "{worst:e}");
}

//! Black-box tests of the `honeyspec` binary: exit codes, output shapes
//! and run-to-run determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_honeyspec"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn make_fixture(dir: &Path) {
    let out = run(
        &[
            "synth",
            "--out",
            "synth.csv",
            "--origins",
            "3",
            "--groups-per-class",
            "3",
            "--records-per-group",
            "2",
            "--bands",
            "16",
            "--noise",
            "0.5",
            "--seed",
            "7",
        ],
        dir,
    );
    assert_success(&out);
}

#[test]
fn cv_on_synthetic_fixture_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    make_fixture(dir.path());
    let out = run(
        &[
            "cv",
            "--data",
            "synth.csv",
            "--bands",
            "16",
            "--target",
            "origin",
            "--features",
            "lda",
            "--dims",
            "10",
            "--classifier",
            "knn",
            "--k",
            "5",
            "--folds",
            "20",
            "--out",
            "reports",
        ],
        dir.path(),
    );
    assert_success(&out);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("balanced accuracy: 1.0000±0.0000"),
        "stdout: {stdout}"
    );
    let report = fs::read_to_string(dir.path().join("reports/cv_report.csv")).unwrap();
    assert!(report.starts_with("# target=origin features=lda(10) classifier=knn(5)"));
    assert!(report.contains("fold,score"));
    assert!(report.lines().last().unwrap().starts_with("summary,"));
}

#[test]
fn tables_rows_list_origins_then_average() {
    let dir = tempfile::tempdir().unwrap();
    make_fixture(dir.path());
    let out = run(
        &[
            "tables",
            "--data",
            "synth.csv",
            "--bands",
            "16",
            "--features",
            "lda",
            "--classifiers",
            "knn",
            "--folds",
            "10",
            "--out",
            "tables",
            "--format",
            "delimited",
        ],
        dir.path(),
    );
    assert_success(&out);
    let table =
        fs::read_to_string(dir.path().join("tables/table_adulteration_lda10.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[1], "origin,knn(5)");
    assert!(rows[2].starts_with("origin00,"));
    assert!(rows[3].starts_with("origin01,"));
    assert!(rows[4].starts_with("origin02,"));
    assert!(rows[5].starts_with("Average,"));
    // origin-stage and end-to-end documents exist alongside
    assert!(dir.path().join("tables/table_origin_stage.csv").exists());
    assert!(dir.path().join("tables/table_end_to_end.csv").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin().arg("--frobnicate").output().expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("Usage"), "stderr: {stderr}");
}

#[test]
fn operational_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // unreadable dataset
    let out = run(&["cv", "--data", "missing.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    // malformed dataset: band count mismatch
    fs::write(
        dir.path().join("bad.csv"),
        "record_id,group_id,acquisition_id,origin,level,b000,b001\nr1,g1,,Clover,0,0.5\n",
    )
    .unwrap();
    let out = run(&["validate", "--data", "bad.csv", "--bands", "2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("band"), "stderr: {stderr}");
}

#[test]
fn validate_accepts_well_formed_dataset() {
    let dir = tempfile::tempdir().unwrap();
    make_fixture(dir.path());
    let out = run(&["validate", "--data", "synth.csv", "--bands", "16"], dir.path());
    assert_success(&out);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("ok:"), "stdout: {stdout}");
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    make_fixture(dir.path());

    for pass in ["a", "b"] {
        let out = run(
            &[
                "train",
                "--data",
                "synth.csv",
                "--bands",
                "16",
                "--model",
                &format!("model_{pass}.hspec"),
                "--standardize",
            ],
            dir.path(),
        );
        assert_success(&out);
        let out = run(
            &[
                "cv",
                "--data",
                "synth.csv",
                "--bands",
                "16",
                "--folds",
                "9",
                "--out",
                &format!("cv_{pass}"),
            ],
            dir.path(),
        );
        assert_success(&out);
        let out = run(
            &[
                "tables",
                "--data",
                "synth.csv",
                "--bands",
                "16",
                "--features",
                "lda",
                "--classifiers",
                "knn",
                "--folds",
                "9",
                "--out",
                &format!("tables_{pass}"),
            ],
            dir.path(),
        );
        assert_success(&out);
    }

    let model_a = fs::read(dir.path().join("model_a.hspec")).unwrap();
    let model_b = fs::read(dir.path().join("model_b.hspec")).unwrap();
    assert_eq!(model_a, model_b, "model files differ across runs");
    let cv_a = fs::read(dir.path().join("cv_a/cv_report.csv")).unwrap();
    let cv_b = fs::read(dir.path().join("cv_b/cv_report.csv")).unwrap();
    assert_eq!(cv_a, cv_b, "cv reports differ across runs");
    for name in [
        "table_origin_stage.csv",
        "table_adulteration_lda10.csv",
        "table_end_to_end.csv",
    ] {
        let a = fs::read(dir.path().join("tables_a").join(name)).unwrap();
        let b = fs::read(dir.path().join("tables_b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across runs");
    }
}

#[test]
fn predict_agrees_with_library_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    make_fixture(dir.path());
    let out = run(
        &[
            "train",
            "--data",
            "synth.csv",
            "--bands",
            "16",
            "--model",
            "model.hspec",
        ],
        dir.path(),
    );
    assert_success(&out);

    let out = run(
        &[
            "predict",
            "--model",
            "model.hspec",
            "--input",
            "synth.csv",
            "--out",
            "plots",
        ],
        dir.path(),
    );
    assert_success(&out);
    let stdout = String::from_utf8(out.stdout).unwrap();

    // replay through the library and compare row by row
    let model = honeyspec::pipeline::load_model(
        fs::File::open(dir.path().join("model.hspec")).unwrap(),
    )
    .unwrap();
    let grid = honeyspec::WavelengthGrid::new(400.0, 5.0, 16).unwrap();
    let ds = honeyspec::dataset::load_dataset(
        fs::File::open(dir.path().join("synth.csv")).unwrap(),
        &grid,
        &[0, 5, 10, 25, 50],
    )
    .unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), ds.records.len());
    for (line, rec) in lines.iter().zip(&ds.records) {
        let p = honeyspec::pipeline::predict(&model, &rec.bands).unwrap();
        let purity = if p.is_pure() { "pure" } else { "adulterated" };
        assert_eq!(
            *line,
            format!("{},{},{},{purity}", rec.record_id, p.origin, p.level)
        );
    }

    // plot data: two columns, wavelengths from the grid
    let plot = fs::read_to_string(
        dir.path()
            .join("plots")
            .join(format!("plot_{}.csv", ds.records[0].record_id)),
    )
    .unwrap();
    let mut plot_lines = plot.lines();
    assert_eq!(plot_lines.next(), Some("wavelength_nm,value"));
    let first: Vec<&str> = plot_lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "400");
    assert_eq!(first[1], ds.records[0].bands[0].to_string());
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    make_fixture(dir.path());
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = bin()
            .args(["cv", "--data", "synth.csv", "--bands", "16", "--folds", "9"])
            .env("HONEYSPEC_THREADS", threads)
            .current_dir(dir.path())
            .output()
            .expect("binary runs");
        assert_success(&out);
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
}

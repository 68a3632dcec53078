use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mfa_core::dense::matmul;
use mfa_core::Matrix;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn mfa<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_mfa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value_after(text: &str, key: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no {key} in {text}"));
    line.rsplit('=').next().unwrap().trim().parse().unwrap()
}

fn csv_numbers(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn identity_a_gives_d_plus_cb() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.txt");
    let o = mfa([
        "mfa".into(),
        fixture("identity6.txt"),
        fixture("b.txt"),
        fixture("c.txt"),
        fixture("d.txt"),
        "-o".into(),
        out.clone(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b = Matrix::read_file(fixture("b.txt")).unwrap();
    let c = Matrix::read_file(fixture("c.txt")).unwrap();
    let d = Matrix::read_file(fixture("d.txt")).unwrap();
    let want = d.add(&matmul(&c, &b).unwrap()).unwrap();
    let got = Matrix::read_file(&out).unwrap();
    assert!(
        got.max_abs_diff(&want) <= 1e-14,
        "{}",
        got.max_abs_diff(&want)
    );
}

#[test]
fn check_reports_small_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfa([
        "mfa".into(),
        fixture("a.txt"),
        fixture("b.txt"),
        fixture("c.txt"),
        fixture("d.txt"),
        "--out".into(),
        dir.path().join("s.txt"),
        "--check".into(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(value_after(&text, "residual") <= 1e-9);
    assert!(value_after(&text, "r_diag_min_abs") > 0.0);
}

#[test]
fn missing_matrix_file_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.txt");
    let o = mfa([
        "mfa".into(),
        fixture("a.txt"),
        missing.clone(),
        fixture("c.txt"),
        fixture("d.txt"),
        "-o".into(),
        dir.path().join("s.txt"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains(&missing.display().to_string()),
        "{}",
        stderr(&o)
    );
}

#[test]
fn singular_a_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.txt");
    Matrix::zeros(6, 6).write_file(&zero).unwrap();
    let o = mfa([
        "mfa".into(),
        zero,
        fixture("b.txt"),
        fixture("c.txt"),
        fixture("d.txt"),
        "-o".into(),
        dir.path().join("s.txt"),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn malformed_or_mismatched_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "2 2\n1 2\n3\n").unwrap();
    let out = dir.path().join("s.txt");
    let o = mfa([
        "mfa".into(),
        bad,
        fixture("b.txt"),
        fixture("c.txt"),
        fixture("d.txt"),
        "-o".into(),
        out.clone(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    // C is 4x6 and D is 4x3; swapping them breaks the shapes.
    let o = mfa([
        "mfa".into(),
        fixture("a.txt"),
        fixture("b.txt"),
        fixture("d.txt"),
        fixture("c.txt"),
        "-o".into(),
        out,
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn kf_engines_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("mfa.csv"), dir.path().join("direct.csv"));
    for (engine, out) in [("mfa", &a), ("direct", &b)] {
        let o = mfa([
            "kf".into(),
            fixture("cv_scenario.json"),
            "-o".into(),
            out.clone(),
            "--engine".into(),
            engine.into(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ta, tb) = (csv_numbers(&a), csv_numbers(&b));
    assert_eq!(ta.len(), 100);
    let diff = ta
        .iter()
        .zip(&tb)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    assert!(diff <= 1e-8, "{diff:e}");
}

#[test]
fn kf_rejects_zero_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfa([
        "kf".into(),
        fixture("zero_steps.json"),
        "-o".into(),
        dir.path().join("t.csv"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least one measurement"));
}

#[test]
fn kf_seed_override_changes_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    mfa([
        "kf".into(),
        fixture("cv_scenario.json"),
        "-o".into(),
        a.clone(),
    ]);
    mfa([
        "kf".into(),
        fixture("cv_scenario.json"),
        "-o".into(),
        b.clone(),
        "--seed".into(),
        "7".into(),
    ]);
    assert_ne!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn sim_prints_rdp_peak_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = mfa([
        "sim",
        "--workload",
        "kf",
        "--size",
        "8",
        "--mode",
        "hw",
        "-o",
    ]
    .map(PathBuf::from)
    .into_iter()
    .chain([out.clone()]));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(value_after(&stdout(&o), "peak_gflops (rdp"), 4.9);
    let r = mfa_core::cgra::CycleReport::from_json(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r.mode, mfa_core::cgra::Mode::Hw);
    assert_eq!(r.peak_gflops, 4.9);
}

#[test]
fn sim_mode_sweep_has_three_ordered_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("modes.csv");
    let o = mfa([
        "sim",
        "--workload",
        "kf",
        "--size",
        "16",
        "--sweep",
        "modes",
        "--config",
    ]
    .map(PathBuf::from)
    .into_iter()
    .chain([fixture("sim_default.json"), "-o".into(), out.clone()]));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(
        rows.iter().map(|r| r[2]).collect::<Vec<_>>(),
        ["base", "hw", "sw"]
    );
    let cycles: Vec<u64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(
        cycles[0] >= cycles[1] && cycles[1] >= cycles[2],
        "{cycles:?}"
    );
    let util: f64 = rows[0][12].parse().unwrap();
    assert!((0.25..=0.35).contains(&util), "{util}");
}

#[test]
fn sim_grid_sweep_covers_the_standard_grids() {
    let o = mfa([
        "sim",
        "--workload",
        "gemm",
        "--size",
        "16",
        "--sweep",
        "grids",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let targets: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(targets, ["2x2", "3x3", "4x4"]);
}

#[test]
fn sim_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, "{\"base\": 1}").unwrap();
    let o = mfa(["sim", "--config"]
        .map(PathBuf::from)
        .into_iter()
        .chain([cfg]));
    assert_eq!(o.status.code(), Some(2));
    let o = mfa(["sim", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/cfg.json"));
    let o = mfa(["sim", "--mode", "turbo"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_config_is_the_default() {
    let text = fs::read_to_string(fixture("sim_default.json")).unwrap();
    let cfg = mfa_core::cgra::SimConfig::from_json(&text).unwrap();
    assert_eq!(cfg, mfa_core::cgra::SimConfig::default());
}

fn modes_csv(dir: &Path) -> PathBuf {
    let out = dir.join("modes.csv");
    let o = mfa([
        "sim",
        "--workload",
        "kf",
        "--size",
        "16",
        "--sweep",
        "modes",
        "-o",
    ]
    .map(PathBuf::from)
    .into_iter()
    .chain([out.clone()]));
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn report_prints_speedup_and_single_file_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let csv = modes_csv(dir.path());
    let tidy = dir.path().join("tidy.csv");
    let o = mfa([
        PathBuf::from("report"),
        csv.clone(),
        "--tidy".into(),
        tidy.clone(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sp = value_after(&stdout(&o), "speedup sw vs base");
    assert!(sp >= 2.0, "{sp}");

    let input = fs::read_to_string(&csv).unwrap();
    let output = fs::read_to_string(&tidy).unwrap();
    let n_in = input.lines().next().unwrap().split(',').count();
    assert_eq!(input.lines().count(), output.lines().count());
    for (a, b) in input.lines().zip(output.lines()) {
        let b: Vec<&str> = b.split(',').collect();
        assert_eq!(a, b[1..=n_in].join(","));
    }
}

#[test]
fn report_errors() {
    let o = mfa(["report"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "workload,target\nx,y\n").unwrap();
    let o = mfa([PathBuf::from("report"), bad]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn manifest_runs_relative_to_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixture("cv_scenario.json"), dir.path().join("cv.json")).unwrap();
    let man = dir.path().join("run.json");
    fs::write(
        &man,
        r#"{"command": "kf", "scenario": "cv.json", "out": "trace.csv", "engine": "direct"}"#,
    )
    .unwrap();
    let o = mfa([PathBuf::from("run"), man]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv_numbers(&dir.path().join("trace.csv")).len(), 100);
}

#[test]
fn repeated_commands_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let runs: Vec<(Vec<PathBuf>, &str)> = vec![
        (
            vec![
                "mfa".into(),
                fixture("a.txt"),
                fixture("b.txt"),
                fixture("c.txt"),
                fixture("d.txt"),
                "-o".into(),
                d.join("OUT"),
            ],
            "s.txt",
        ),
        (
            vec![
                "kf".into(),
                fixture("cv_scenario.json"),
                "-o".into(),
                d.join("OUT"),
            ],
            "t.csv",
        ),
        (
            ["sim", "--workload", "mfa", "--size", "8", "-o"]
                .map(PathBuf::from)
                .into_iter()
                .chain([d.join("OUT")])
                .collect(),
            "r.json",
        ),
    ];
    for (args, name) in runs {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = d.join(format!("{rep}-{name}"));
            let args: Vec<PathBuf> = args
                .iter()
                .map(|a| {
                    if a.ends_with("OUT") {
                        out.clone()
                    } else {
                        a.clone()
                    }
                })
                .collect();
            let o = mfa(&args);
            assert!(o.status.success(), "{:?}: {}", args, stderr(&o));
            outputs.push((fs::read(&out).unwrap(), o.stdout));
        }
        assert_eq!(outputs[0], outputs[1], "{name}");
    }
}

use std::path::Path;
use std::process::{Command, Output};

use splineortho::io::{read_adversarial, read_knots, SystemDump};
use splineortho::knotseq::RegularityReport;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splineortho"))
        .args(args)
        .env_remove("SPLINEORTHO_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dyadic_knots_are_two_regular_at_first_order() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("dyadic.json");
    let out = run(&["knots", "gen", "--kind", "dyadic", "--k", "2", "--n", "31", "--out", path_str(&file)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_knots(&file).unwrap().points().len(), 31);

    let out = run(&["knots", "check", "--input", path_str(&file)]);
    assert_eq!(code(&out), 0);
    let reports: Vec<RegularityReport> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].ell, 1);
    assert_eq!(reports[0].gamma, 2.0);
}

#[test]
fn text_knot_files_are_accepted() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("u.txt");
    let out = run(&["knots", "gen", "--kind", "uniform", "--k", "3", "--n", "9", "--format", "text", "--out", path_str(&file)]);
    assert_eq!(code(&out), 0);
    assert!(std::fs::read_to_string(&file).unwrap().starts_with("k=3\n"));
    assert_eq!(code(&run(&["knots", "check", "--input", path_str(&file), "--ell", "2"])), 0);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("d.json");
    run(&["knots", "gen", "--kind", "dyadic", "--k", "2", "--n", "15", "--out", path_str(&file)]);
    assert_eq!(code(&run(&["knots", "check", "--ell", "3", "--k", "2", "--input", path_str(&file)])), 2);
    assert_eq!(code(&run(&["knots", "check", "--k", "3", "--input", path_str(&file)])), 2);
    assert_eq!(code(&run(&["system", "build", "--input", path_str(&file), "--N", "1"])), 2);
    assert_eq!(code(&run(&["system", "build", "--input", path_str(&file), "--N", "17"])), 2);
    assert_eq!(code(&run(&["knots", "gen", "--kind", "fractal"])), 2);
    assert_eq!(code(&run(&["knots", "check", "--input", "/nonexistent/knots.json"])), 2);
    assert_eq!(code(&run(&["knots", "gen", "--kind", "adversarial", "--ell", "8", "--delta", "0.1"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn adversarial_generation_writes_a_stages_sidecar() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("adv.json");
    let out = run(&["knots", "gen", "--kind", "adversarial", "--ell", "8", "--k", "2", "--out", path_str(&file)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("adv.stages.json").exists());
    let adv = read_adversarial(&file).unwrap();
    assert_eq!(adv.stages.len(), 8);
    let report = splineortho::adversary::verify_lemma_properties(&adv, 4.0, 2.0).unwrap();
    assert!(report.all_passed());
}

#[test]
fn build_and_verify_a_franklin_system() {
    let dir = TempDir::new().unwrap();
    let knots = dir.path().join("d.json");
    let dump = dir.path().join("sys.json");
    run(&["knots", "gen", "--kind", "dyadic", "--k", "2", "--n", "62", "--out", path_str(&knots)]);
    let out = run(&["system", "build", "--input", path_str(&knots), "--N", "63", "--out", path_str(&dump)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["system", "verify", "--dump", path_str(&dump), "--tol-orth", "1e-9"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn corrupted_dump_fails_verification_by_name() {
    let dir = TempDir::new().unwrap();
    let knots = dir.path().join("d.json");
    let dump = dir.path().join("sys.json");
    run(&["knots", "gen", "--kind", "dyadic", "--k", "2", "--n", "62", "--out", path_str(&knots)]);
    run(&["system", "build", "--input", path_str(&knots), "--N", "63", "--out", path_str(&dump)]);
    let mut sys: SystemDump = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    sys.functions[20].w[3] += 1e-3;
    std::fs::write(&dump, serde_json::to_string(&sys).unwrap()).unwrap();
    let out = run(&["system", "verify", "--dump", path_str(&dump)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("orthonormality"));
}

#[test]
fn divergence_csv_has_positive_slope_and_is_reproducible() {
    let first = run(&["experiment", "divergence", "--ladder", "2,4,8,16", "--seed", "3"]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let text = String::from_utf8(first.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("ell,G,stage_sum,min_coeff_product"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            (f[0], f[2])
        })
        .collect();
    assert_eq!(rows.len(), 4);
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    assert!(splineortho::stats::linear_fit(&xs, &ys).slope > 0.0);

    let second = run(&["experiment", "divergence", "--ladder", "2,4,8,16", "--seed", "3", "--threads", "1"]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn equivalence_report_is_json_and_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = |p: &Path| {
        vec![
            "experiment".to_string(),
            "equivalence".into(),
            "--atoms".into(),
            "6".into(),
            "--N".into(),
            "64".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            p.to_str().unwrap().to_string(),
        ]
    };
    let out = Command::new(env!("CARGO_BIN_EXE_splineortho")).args(args(&a)).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = Command::new(env!("CARGO_BIN_EXE_splineortho"))
        .args(args(&b))
        .env("SPLINEORTHO_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let report: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(report["ratios"]["square/sign_flip"].as_array().unwrap().len(), 6);
    assert_eq!(report["params"]["all_atoms_valid"], true);
}

#[test]
fn khinchin_sweep_emits_csv() {
    let out = run(&["experiment", "khinchin", "--atoms", "3", "--N", "32", "--trials", "1,20", "--format", "csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("atom,"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn bad_thread_setting_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_splineortho"))
        .args(["knots", "gen", "--kind", "dyadic"])
        .env("SPLINEORTHO_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_annular-ma")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-tests").join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(bin()).arg("--out").arg(out).args(args).output().expect("spawn annular-ma")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

/// Rows of a labelled CSV as (label, numbers).
fn labeled_rows(path: PathBuf) -> Vec<(String, Vec<f64>)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            let label = it.next().unwrap().to_string();
            (label, it.map(|v| v.parse().unwrap()).collect())
        })
        .collect()
}

#[test]
fn every_recipe_runs() {
    let recipes = json(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/recipes.json"));
    let list = recipes["recipes"].as_array().unwrap();
    assert!(list.len() >= 5);
    for r in list {
        let name = r["name"].as_str().unwrap();
        let args: Vec<&str> = r["args"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
        let dir = scratch(&format!("recipe-{name}"));
        let o = run(&dir, &args);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let manifest = json(dir.join("manifest.json"));
        for f in manifest["outputs"].as_array().unwrap() {
            assert!(dir.join(f.as_str().unwrap()).is_file(), "{name}: missing {f}");
        }
        assert_eq!(manifest["spec_digest"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    for args in [
        &["solve-radial", "--preset", "paper-4.2"][..],
        &["oracle", "--family", "skewed-quadratic"][..],
        &["flow", "--T", "0.1", "--dt", "0.002"][..],
    ] {
        let a = scratch(&format!("det-a-{}", args[0]));
        let b = scratch(&format!("det-b-{}", args[0]));
        assert_eq!(code(&run(&a, args)), 0);
        assert_eq!(code(&run(&b, args)), 0);
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.iter().any(|n| n == "manifest.json"));
        for n in names {
            assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{:?} differs", n);
        }
    }
}

#[test]
fn invalid_input_exits_2() {
    let dir = scratch("bad-input");
    assert_eq!(code(&run(&dir, &["oracle", "--family", "radial2d"])), 2);
    assert_eq!(code(&run(&dir, &["constants", "--preset", "no-such-preset"])), 2);
    let bad = dir.join("bad.json");
    fs::create_dir_all(&dir).unwrap();
    fs::write(&bad, r#"{"domain": {"kind": "concentric", "dim": 2, "r_inner": 2, "r_outer": 1}}"#).unwrap();
    assert_eq!(code(&run(&dir, &["solve-radial", "--spec", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&dir, &["solve-2d", "--preset", "paper-4.3"])), 2);
    assert_eq!(code(&run(&dir, &["no-such-command"])), 2);
}

#[test]
fn newton_budget_exhaustion_exits_3() {
    let dir = scratch("diverge");
    let o = run(&dir, &["solve-2d", "--nr", "33", "--ntheta", "32", "--max-iter", "1"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unsatisfied_condition_still_exits_0() {
    let dir = scratch("unsatisfied");
    let o = run(&dir, &["check", "curvature", "--m", "1"]);
    assert_eq!(code(&o), 0);
    let r = json(dir.join("check_curvature.json"));
    assert_eq!(r["satisfied"], false);
    assert!(r["margin"].as_f64().unwrap() < 0.0);
}

#[test]
fn radial_oracle_inner_second_derivative() {
    let dir = scratch("oracle-radial");
    assert_eq!(code(&run(&dir, &["oracle", "--family", "radial2d", "--dk", "0.1"])), 0);
    let rows = labeled_rows(dir.join("oracle_boundary.csv"));
    let dnn = rows.iter().find(|(l, _)| l == "u_nunu").unwrap().1.last().copied().unwrap();
    // With ψ = 1 and R₋ = 1: u_r = d and u_rr = 1/d there, so u_rr + u_r/R₋ = 1/d + d.
    assert!((dnn - 10.1).abs() < 1e-12, "{dnn}");
    let table = fs::read_to_string(dir.join("oracle_blowup.csv")).unwrap();
    assert_eq!(table.lines().count(), 8);
}

#[test]
fn skewed_oracle_inner_normal_derivative() {
    let dir = scratch("oracle-skewed");
    assert_eq!(code(&run(&dir, &["oracle", "--family", "skewed-quadratic"])), 0);
    let rows = labeled_rows(dir.join("oracle_boundary.csv"));
    let (_, v) = rows.iter().find(|(l, v)| l == "u_nu" && (v[0] - 0.75).abs() < 1e-12 && v[1].abs() < 1e-12).unwrap();
    assert!((v[2] + 0.25).abs() < 1e-12, "{}", v[2]);
    let samples = fs::read_to_string(dir.join("oracle_samples.csv")).unwrap();
    for l in samples.lines().skip(1) {
        let res: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(res.abs() < 1e-12);
    }
}

#[test]
fn structure_radius_for_half_width() {
    let dir = scratch("structure");
    assert_eq!(code(&run(&dir, &["check", "structure", "--preset", "paper-5.2", "--width", "0.5"])), 0);
    let r = json(dir.join("check_structure.json"));
    let r0 = r["constants_used"]["R0"].as_f64().unwrap();
    assert!((r0 - 2f64.ln()).abs() < 1e-6, "{r0}");
}

#[test]
fn out_directory_from_environment() {
    let dir = scratch("env-out");
    let o = Command::new(bin()).env("ANNULAR_MA_OUT", &dir).args(["solve-radial"]).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.join("radial_profile.csv").is_file());
}

#[test]
fn csv_floats_round_trip() {
    let dir = scratch("csv-format");
    assert_eq!(code(&run(&dir, &["solve-radial"])), 0);
    let text = fs::read_to_string(dir.join("radial_profile.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "r,u,u_r,u_rr");
    for cell in lines.next().unwrap().split(',') {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.len(), 18, "{cell}");
    }
}

#[test]
fn negative_arguments_parse() {
    let dir = scratch("negative");
    let o = run(&dir, &["flow", "--theta", "-0.5", "--phi0", "4", "--phit", "2", "--gamma0", "2", "--T", "0.05"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(dir.join("flow_report.json"));
    assert_eq!(r["audit"]["violated"], false);
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scene(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn qg(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qg"))
        .args(args)
        .env("QG_THREADS", threads.to_string())
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn check_exit_codes() {
    let ok = qg(&["check", &scene("circle.json")], 1);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));

    let dup = qg(&["check", &scene("duplicated.json")], 1);
    assert_eq!(code(&dup), 1);
    let text = String::from_utf8_lossy(&dup.stdout);
    assert!(text.contains("constraints 0 and 1"), "{text}");

    let multi = qg(&["check", &scene("multi_max.json")], 1);
    assert_eq!(code(&multi), 1);

    assert_eq!(code(&qg(&["check", "/definitely/missing.json"], 1)), 2);
    assert_eq!(code(&qg(&["check", &scene("duplicated.json"), "--require-morse"], 1)), 2);
    assert_eq!(code(&qg(&["bounds", "1"], 1)), 2);
}

#[test]
fn analysis_failures_exit_one_and_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mm = qg(&["diameter", &scene("multi_max.json"), "--method", "trajectory", "--out", out], 1);
    assert_eq!(code(&mm), 1);
    assert!(String::from_utf8_lossy(&mm.stderr).contains("multiple maxima"));

    assert_eq!(code(&qg(&["thicken", &scene("duplicated.json"), "--out", out], 1)), 1);
    // No inequalities: nothing to lift.
    assert_eq!(code(&qg(&["lift", &scene("circle.json"), "--out", out], 1)), 2);
    // Missing morse quadric.
    assert_eq!(code(&qg(&["thalweg", &scene("duplicated.json"), "--out", out], 1)), 2);
    // Wrong number of hyperplane coefficients.
    assert_eq!(code(&qg(&["solve", &scene("circle.json"), "--hyperplane", "1,0", "--out", out], 1)), 2);
}

#[test]
fn json_report_carries_digest_and_summary() {
    let o = qg(&["--json", "bounds", "1", "2"], 1);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["command"], "bounds");
    assert_eq!(v["summary"]["c"], 3);
    let p = v["summary"]["rows"].as_array().unwrap().iter().find(|r| r["name"] == "p").unwrap();
    assert_eq!(p["value"].as_f64().unwrap(), 241_517_396_736.0);

    let o = qg(&["--json", "check", &scene("circle.json")], 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["scene_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn digest_ignores_formatting() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scene("circle.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let compact = dir.path().join("compact.json");
    std::fs::write(&compact, serde_json::to_string(&v).unwrap()).unwrap();
    let digest = |p: &str| {
        let o = qg(&["--json", "check", p], 1);
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()["scene_digest"].clone()
    };
    assert_eq!(digest(&scene("circle.json")), digest(compact.to_str().unwrap()));
}

/// Same seed and any thread count give byte-identical output files.
#[test]
fn outputs_are_reproducible_across_thread_counts() {
    let runs: [(&[&str], &[&str]); 4] = [
        (&["thalweg", "circle.json", "--svg"], &["thalweg.csv", "thalweg.json", "thalweg.svg"]),
        (&["length", "segment.csv", "--samples", "50000"], &["crofton.json"]),
        (&["solve", "circle.json", "--random-planes", "3"], &["solutions.csv"]),
        (&["diameter", "sphere.json", "--samples", "500"], &["diameter.json"]),
    ];
    for (args, files) in runs {
        let mut outputs = Vec::new();
        for threads in [1, 4, 1] {
            let dir = tempfile::tempdir().unwrap();
            let mut a: Vec<String> = args.iter().map(|s| s.to_string()).collect();
            a[1] = scene(args[1]);
            a.extend(["--seed".into(), "3".into(), "--out".into(), dir.path().to_string_lossy().into_owned()]);
            let refs: Vec<&str> = a.iter().map(String::as_str).collect();
            let o = qg(&refs, threads);
            assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
            outputs.push(files.iter().map(|f| read(dir.path(), f)).collect::<Vec<_>>());
        }
        assert_eq!(outputs[0], outputs[1], "{args:?}: 1 vs 4 threads");
        assert_eq!(outputs[0], outputs[2], "{args:?}: repeated run");
    }
}

#[test]
fn degenerate_thalweg_suggests_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qg(&["thalweg", &scene("axial_sphere.json"), "--out", out], 1);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("kernel dimension 2"), "{text}");
    assert!(text.contains("--perturb"), "{text}");

    let o = qg(&["thalweg", &scene("axial_sphere.json"), "--perturb", "1e-2", "--out", out], 1);
    assert_eq!(code(&o), 0);
    assert!(!String::from_utf8_lossy(&o.stdout).contains("kernel dimension"));
}

#[test]
fn lift_and_thicken_write_loadable_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&qg(&["lift", &scene("half_disk.json"), "--out", out], 1)), 0);
    let lifted = dir.path().join("lifted.json");
    let o = qg(&["check", lifted.to_str().unwrap()], 1);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    assert_eq!(code(&qg(&["thicken", &scene("circle.json"), "--eps", "0.01", "--out", out], 1)), 0);
    let t = qg_cli::load_scene(&dir.path().join("thickened.json")).unwrap();
    assert_eq!(t.constraints().len(), 2);
    assert_eq!(code(&qg(&["thicken", &scene("circle.json"), "--eps", "0.01,0.02", "--out", out], 1)), 2);

    assert_eq!(code(&qg(&["sample", &scene("two_circles.json"), "--count", "20", "--out", out], 1)), 0);
    assert_eq!(std::fs::read_to_string(dir.path().join("points.csv")).unwrap().lines().count(), 21);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pcsir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcsir")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.ini");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const TINY: &str = "[experiment]\nkind = small_object\nparticles = 100,200\nrepetitions = 2\nvariants = SIR,pcSIR-1x1-CoM\n\n[scene]\nframes = 6\nwidth = 48\nheight = 48\n";

#[test]
fn bounds_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = pcsir(&["bounds", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(csv.starts_with("field,cell_size,true_error,rect_bound,square_bound\n"));
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn track_is_reproducible_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = pcsir(&["track", "--config", &cfg, "--no-timing", "--seed", "3", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("small_object_rmse.svg").exists());
        outputs.push(fs::read(out.join("small_object_summary.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}

#[test]
fn report_rerenders_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("run");
    assert_eq!(code(&pcsir(&["track", "--config", &cfg, "--out", out.to_str().unwrap()])), 0);
    let plots = dir.path().join("plots");
    let csv = out.join("small_object_summary.csv");
    let o = pcsir(&["report", "--input", csv.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for name in ["time", "speedup", "rmse"] {
        assert!(plots.join(format!("small_object_{name}.svg")).exists());
    }
}

#[test]
fn generate_writes_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcsir(&["generate", "--experiment", "small_object", "--scenes", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let scene = dir.path().join("small_object_000");
    assert!(scene.join("frame_0049.pgm").exists());
    assert_eq!(fs::read_to_string(scene.join("truth.csv")).unwrap().lines().count(), 51);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&pcsir(&["track", "--particles", "200,100", "--out", out])), 2);
    assert_eq!(code(&pcsir(&["pseudo", "--variants", "", "--out", out])), 2);
    assert_eq!(code(&pcsir(&["pseudo", "--variants", "pcSIR-9x9-CoM", "--out", out])), 2);
    assert_eq!(code(&pcsir(&["track", "--reps", "many"])), 2);
    let cfg = write_config(dir.path(), "[experiment]\nkind = small_object\nsigma_xi = -1\n");
    assert_eq!(code(&pcsir(&["track", "--config", &cfg, "--out", out])), 2);
}

#[test]
fn runtime_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = pcsir(&["report", "--input", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));
}

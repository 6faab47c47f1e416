use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

#[test]
fn rejects_zero_degree() {
    let out = bench().args(["antiplane", "--p", "0"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn rejects_unknown_benchmark() {
    let out = bench().arg("torsion").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn writes_antiplane_outputs() {
    let dir = std::env::temp_dir().join(format!("bench-cli-{}", std::process::id()));
    let out = bench()
        .args(["antiplane", "--p", "1", "--refine", "1", "--out"])
        .arg(&dir)
        .env("MM_FEM_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("antiplane.csv").is_file());
    assert!(dir.join("antiplane.json").is_file());
    let _ = std::fs::remove_dir_all(&dir);
}

use std::path::Path;
use std::process::{Command, Output};

const MANIFEST: &str = r#"
study = "graph-stats"
seed = 11

[window]
lower = [0.0, 0.0]
upper = [5.0, 5.0]

[process]
kind = "poisson"
intensity = 1.0

[model.pair]
kind = "bilinear"
range = 1.0
matrix = [[-0.1]]

[model.single]
a = 1.0
q = 4.0

[model.tempered]
alpha = 0.5
p = 3.0
M = 6
"#;

fn qgibbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgibbs"))
        .args(args)
        .env_remove("QGIBBS_THREADS")
        .output()
        .unwrap()
}

fn write_manifest(dir: &Path, body: &str) -> String {
    let path = dir.join("study.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn graph_stats_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path(), MANIFEST);
    let out = dir.path().join("out");
    let o = qgibbs(&["run", &manifest, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("report.json"));
    for f in ["report.json", "resolved.toml", "edges.tsv", "degrees.tsv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert_eq!(report(&out)["master_seed"], 11);
}

#[test]
fn seed_and_override_flags_apply() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path(), MANIFEST);
    let out = dir.path().join("out");
    let o = qgibbs(&[
        "run",
        &manifest,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "99",
        "--override",
        "sampler.sweeps=123",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&out)["master_seed"], 99);
    let resolved = std::fs::read_to_string(out.join("resolved.toml")).unwrap();
    assert!(resolved.contains("sweeps = 123"));
}

#[test]
fn invalid_model_exits_nonzero_with_violated_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path(), &MANIFEST.replace("q = 4.0", "q = 2.0"));
    let o = qgibbs(&["run", &manifest, "--out", dir.path().join("out").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("q > 2 violated"));
}

#[test]
fn unknown_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path(), &format!("bogus = 1\n{MANIFEST}"));
    let o = qgibbs(&["run", &manifest]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path(), &MANIFEST.replace("graph-stats", "moments"));
    let run = |threads: &str| {
        let out = dir.path().join(format!("out{threads}"));
        let o = qgibbs(&[
            "run",
            &manifest,
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
            "--override",
            "sampler.sweeps=500",
            "--override",
            "volumes.count=3",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("report.json")).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn misspelled_model_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path(), &MANIFEST.replace("M = 6", "M = 6\nalhpa = 1.0"));
    let o = qgibbs(&["run", &manifest]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("alhpa"));
}

#[test]
fn shipped_manifests_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "model.toml" {
            continue;
        }
        let m = qgibbs::Manifest::load(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let report = m.model().unwrap().validate();
        assert!(report.valid, "{}: {:?}", path.display(), report.violations);
        count += 1;
    }
    assert!(count >= 4);
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qfd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("QFD_THREADS")
        .output()
        .expect("spawn qfd")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FREE: &str = r#"
mode = "single"
output_dir = "out"

[grid]
boundary = "periodic"
x_min = -20.0
length = 40.0
n = 256

[potential]
kind = "free"

[[state]]
kind = "gaussian"
center = 0.0
sigma = 1.0
k0 = 0.3

[propagator]
scheme = "split_operator"
mass = 1.0
t_final = 0.5
dt = 0.01
stride = 10

[trajectories]
n = 1000
seed = 3
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn checksums(m: &Value) -> Vec<(String, String)> {
    m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["path"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn free_gaussian_run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "free.toml", FREE);
    let o = qfd(&["run", "free.toml"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let out = tmp.path().join("out");
    for f in [
        "snapshots/psi_00000.qfdf",
        "snapshots/psi_00005.qfdf",
        "hydro/t00005_rho.qfdf",
        "hydro/t00005_q_potential.qfdf",
        "hydro/t00005_manifest.csv",
        "log.csv",
        "ensemble_trajectories.csv",
        "ensemble_manifest.csv",
        "equivariance.csv",
        "summary.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(!out.join("snapshots/psi_00006.qfdf").exists());

    let m = manifest(&out);
    assert_eq!(m["mode"], "single");
    assert_eq!(m["seeds"]["trajectories.seed"], 3);
    assert_eq!(m["config_toml"].as_str().unwrap(), FREE);
    assert!(m["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert!(m["threads"].as_u64().unwrap() >= 1);
    // Omitted numerical keys are filled in and reported.
    assert!(m["applied_defaults"]["trajectories.dt"].is_number());
    assert_eq!(m["applied_defaults"]["trajectories.bins"], 20);
    assert!(m["applied_defaults"].get("propagator.dt").is_none());

    let files = checksums(&m);
    assert!(files.windows(2).all(|w| w[0].0 < w[1].0));
    assert!(files.iter().all(|(p, _)| p != "manifest.json"));
    assert_eq!(files.len(), walk(&out) - 1);

    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("metric,value\nsteps,50\n"), "{summary}");
}

fn walk(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() { walk(&p) } else { 1 }
        })
        .sum()
}

#[test]
fn omitted_dt_is_recorded_as_a_default() {
    let tmp = tempfile::tempdir().unwrap();
    let text = FREE.replace("dt = 0.01\n", "").replace("t_final = 0.5", "t_final = 0.05");
    write_config(tmp.path(), "c.toml", &text);
    let o = qfd(&["run", "c.toml"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&tmp.path().join("out"));
    let dx = 40.0 / 256.0;
    let dt = m["applied_defaults"]["propagator.dt"].as_f64().unwrap();
    assert!((dt - 0.01 * dx * dx).abs() < 1e-15, "{dt}");
}

#[test]
fn negative_dt_is_a_validation_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "bad.toml", &FREE.replace("dt = 0.01", "dt = -0.01"));
    let o = qfd(&["run", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("propagator.dt"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists(), "nothing is written before validation passes");
}

#[test]
fn unknown_key_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "bad.toml", &FREE.replace("stride = 10", "stride = 10\nstrid = 3"));
    let o = qfd(&["run", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("strid"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfd(&["run", "nope.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validation_errors_name_their_field() {
    let cases = [
        (FREE.replace("sigma = 1.0", "sigma = 0.0"), "state[0].sigma"),
        (FREE.replace("n = 256", "n = 4"), "grid"),
        (FREE.replace("kind = \"free\"", "kind = \"free\"\n\n[interaction]\nkind = \"none\""), "interaction"),
        (
            FREE.replace("boundary = \"periodic\"\nx_min = -20.0\nlength = 40.0", "boundary = \"dirichlet\"\nx_min = -20.0\nx_max = 20.0"),
            "scheme",
        ),
    ];
    for (text, field) in &cases {
        let tmp = tempfile::tempdir().unwrap();
        write_config(tmp.path(), "bad.toml", text);
        let o = qfd(&["run", "bad.toml"], tmp.path());
        assert_eq!(o.status.code(), Some(3), "{field}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "{field}: {}", stderr(&o));
    }
}

#[test]
fn missing_state_file_is_rejected_before_compute() {
    let tmp = tempfile::tempdir().unwrap();
    let text = FREE.replace(
        "kind = \"gaussian\"\ncenter = 0.0\nsigma = 1.0\nk0 = 0.3",
        "kind = \"file\"\npath = \"missing.qfdf\"",
    );
    write_config(tmp.path(), "bad.toml", &text);
    let o = qfd(&["run", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("state[0].path"), "{}", stderr(&o));
}

#[test]
fn non_empty_output_dir_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "free.toml", FREE);
    std::fs::create_dir(tmp.path().join("out")).unwrap();
    std::fs::write(tmp.path().join("out/keep.txt"), "x").unwrap();
    let o = qfd(&["run", "free.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("output_dir"));
    assert_eq!(walk(&tmp.path().join("out")), 1);
}

#[test]
fn same_config_gives_identical_checksums_and_manifest_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "free.toml", FREE);
    assert!(qfd(&["run", "free.toml", "--out", "a"], tmp.path()).status.success());
    assert!(qfd(&["run", "free.toml", "--out", "b"], tmp.path()).status.success());
    let a = checksums(&manifest(&tmp.path().join("a")));
    let b = checksums(&manifest(&tmp.path().join("b")));
    assert!(!a.is_empty());
    assert_eq!(a, b);

    // Re-running from the manifest alone reproduces the outputs.
    let o = qfd(&["run", "a/manifest.json", "--out", "c"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(a, checksums(&manifest(&tmp.path().join("c"))));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "free.toml", FREE);
    let run = |threads: &str, out: &str| {
        Command::new(env!("CARGO_BIN_EXE_qfd"))
            .args(["run", "free.toml", "--out", out])
            .current_dir(tmp.path())
            .env("QFD_THREADS", threads)
            .output()
            .unwrap()
    };
    assert!(run("1", "one").status.success());
    assert!(run("3", "three").status.success());
    let one = manifest(&tmp.path().join("one"));
    let three = manifest(&tmp.path().join("three"));
    assert_eq!(one["threads"], 1);
    assert_eq!(three["threads"], 3);
    assert_eq!(checksums(&one), checksums(&three));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qfd"))
        .args(["check", "vortex"])
        .current_dir(tmp.path())
        .env("QFD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("QFD_THREADS"));
}

#[test]
fn info_verifies_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "free.toml", FREE);
    assert!(qfd(&["run", "free.toml"], tmp.path()).status.success());

    let o = qfd(&["info", "out"], tmp.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("mode: single"));
    assert!(text.contains("seed trajectories.seed: 3"));
    assert!(text.contains("checksums: ok"));

    std::fs::write(tmp.path().join("out/log.csv"), "tampered\n").unwrap();
    let o = qfd(&["info", "out"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("log.csv: checksum mismatch"));

    let o = qfd(&["info", "."], tmp.path());
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn unknown_suite_exits_with_validation_status() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfd(&["check", "nonsense"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("nonsense"));
}

#[test]
fn check_prints_csv_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfd(&["check", "vortex"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("suite,criterion,value,threshold,relation,pass"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.starts_with("vortex,") && r.ends_with(",true")));
    assert!(walk(tmp.path()) == 0, "stdout mode writes no files");
}

const TWO_BODY: &str = r#"
mode = "twobody_hartree"
output_dir = "out"

[grid]
boundary = "periodic"
x_min = -10.0
length = 20.0
n = 48

[potential]
kind = "harmonic"
omega = 0.5
center = 0.0

[[state]]
kind = "gaussian"
center = -2.0
sigma = 1.0
k0 = 0.5

[[state]]
kind = "gaussian"
center = 2.0
sigma = 1.0
k0 = -0.5

[interaction]
kind = "none"

[twobody]
symmetry = "none"

[propagator]
scheme = "split_operator"
mass = 1.0
t_final = 0.5
dt = 0.005
stride = 10

[trajectories]
n = 50
seed = 11
"#;

#[test]
fn hartree_run_matches_full_run_for_uncoupled_product() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "c.toml", TWO_BODY);
    let o = qfd(&["run", "c.toml"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("out");
    for f in [
        "comparison.csv",
        "full_particle1_trajectories.csv",
        "hartree_particle2_trajectories.csv",
        "orbitals/orbital1_00005.qfdf",
        "snapshots/psi_00005.qfdf",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let dev: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("max_trajectory_deviation,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev <= 1e-4, "{dev}");
}

#[test]
fn reduced_and_qfdft_modes_run() {
    let tmp = tempfile::tempdir().unwrap();
    let reduced = TWO_BODY
        .replace("twobody_hartree", "reduced")
        .replace("symmetry = \"none\"", "symmetry = \"symmetric\"")
        .replace("n = 50", "n = 200");
    write_config(tmp.path(), "r.toml", &reduced);
    let o = qfd(&["run", "r.toml", "--out", "r"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["purity.csv", "continuity.csv", "rdm/rdm_00005.qfdf", "reduced_trajectories.csv"] {
        assert!(tmp.path().join("r").join(f).is_file(), "missing {f}");
    }

    let qfdft = r#"
mode = "qfdft"
output_dir = "q"

[grid]
boundary = "dirichlet"
x_min = -8.0
x_max = 8.0
n = 161

[potential]
kind = "harmonic"
omega = 1.0
center = 0.0

[[state]]
kind = "harmonic"
level = 0
omega = 1.0

[[state]]
kind = "harmonic"
level = 1
omega = 1.0

[functional]
hartree = false
xc = "none"
stationary = true

[propagator]
scheme = "crank_nicolson"
mass = 1.0
t_final = 0.2
dt = 0.002
stride = 20
"#;
    write_config(tmp.path(), "q.toml", qfdft);
    let o = qfd(&["run", "q.toml"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let q = tmp.path().join("q");
    for f in [
        "scf_history.csv",
        "eigenvalues.csv",
        "diagnostics.csv",
        "continuity.csv",
        "profiles/profile_00005.csv",
        "profiles/density_00005.qfdf",
        "orbitals/orbital2_00005.qfdf",
    ] {
        assert!(q.join(f).is_file(), "missing {f}");
    }
    let m = manifest(&q);
    assert_eq!(m["applied_defaults"]["scf.alpha"], 0.3);
    let eig = std::fs::read_to_string(q.join("eigenvalues.csv")).unwrap();
    let e: Vec<f64> = eig.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // Second-order stencil at dx = 0.1.
    assert!((e[0] - 0.5).abs() < 5e-3 && (e[1] - 1.5).abs() < 5e-3, "{e:?}");
}

#[test]
fn file_state_round_trips_through_a_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "free.toml", FREE);
    assert!(qfd(&["run", "free.toml", "--out", "first"], tmp.path()).status.success());
    let text = FREE
        .replace(
            "kind = \"gaussian\"\ncenter = 0.0\nsigma = 1.0\nk0 = 0.3",
            "kind = \"file\"\npath = \"first/snapshots/psi_00000.qfdf\"",
        )
        .replace("output_dir = \"out\"", "output_dir = \"second\"");
    write_config(tmp.path(), "again.toml", &text);
    let o = qfd(&["run", "again.toml"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let last = |d: &str| std::fs::read(tmp.path().join(d).join("snapshots/psi_00005.qfdf")).unwrap();
    assert_eq!(last("first"), last("second"));
}

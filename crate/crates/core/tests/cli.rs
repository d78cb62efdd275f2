use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_biofilm-fv");

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("THREADS").output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_1D: &str = "
[experiment]
name = small
initial = paper-1d
u_d = 0.1, 0.1
snapshots = 0.0001, 0.0002

[model]
model = case1
alphas = 1, 1

[mesh]
cells = 20

[time]
t_end = 2e-4
dt = fixed:2e-5
";

fn metadata(dir: &Path) -> Vec<(String, String)> {
    fs::read_to_string(dir.join("metadata.txt"))
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn meta_value(dir: &Path, key: &str) -> String {
    metadata(dir).into_iter().find(|(k, _)| k == key).unwrap().1
}

#[test]
fn run_writes_outputs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL_1D);
    let mut bytes = Vec::new();
    for out in ["a", "b"] {
        let out = tmp.path().join(out);
        let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let dir = out.join("small");
        for f in ["entropy.csv", "metadata.txt", "snapshot_0.0001.csv", "snapshot_0.0002.csv"] {
            assert!(dir.join(f).is_file(), "missing {f}");
        }
        bytes.push(fs::read(dir.join("snapshot_0.0002.csv")).unwrap());
        let entropy = fs::read_to_string(dir.join("entropy.csv")).unwrap();
        assert!(entropy.starts_with("step,time,dt,H,I_total,min_u,max_M,newton_iters\n"));
        assert_eq!(entropy.lines().count(), 11);
        assert_eq!(meta_value(&dir, "steps"), "10");
        assert_eq!(meta_value(&dir, "xi"), "0.5");
        assert!(meta_value(&dir, "entropy_margin_min").parse::<f64>().unwrap() > 0.0);
        assert!(meta_value(&dir, "m_star").parse::<f64>().unwrap() > 0.29);
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn bundled_configs_parse_and_2d_writes_vtk() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--config",
        configs().join("acute_square.cfg").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let vtk = fs::read_to_string(tmp.path().join("acute_square/snapshot_0.01.vtk")).unwrap();
    assert!(vtk.contains("CELLS 224 "));
    assert!(vtk.contains("SCALARS M double 1"));
}

#[test]
fn convergence_and_steady_state_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let conv = SMALL_1D.replace("cells = 20", "") + "\n[convergence]\nresolutions = 10, 20, 40, 80\nreference = 160\n";
    let conv = conv.replace("dt = fixed:2e-5", "dt = mesh-squared").replace("snapshots = 0.0001, 0.0002", "");
    let cfg = write_config(tmp.path(), "conv.cfg", &conv);
    let o = run(&["convergence", "--config", &cfg, "--out", tmp.path().to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("small/convergence.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("resolution,h,dt,species,l2_error"));
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("fitted L2 order"));

    let steady = SMALL_1D.replace("snapshots = 0.0001, 0.0002", "").replace("t_end = 2e-4", "t_end = 0.05");
    let steady = steady.replace("dt = fixed:2e-5", "dt = adaptive");
    let cfg = write_config(tmp.path(), "steady.cfg", &steady);
    let o = run(&["steady-state", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let decay = fs::read_to_string(tmp.path().join("small/decay.csv")).unwrap();
    assert_eq!(decay.lines().next(), Some("time,species,l2_distance"));
    assert!(tmp.path().join("small/snapshot_0.05.csv").is_file());
    assert_eq!(meta_value(&tmp.path().join("small"), "entropy_nonincreasing"), "true");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();

    let bad = write_config(tmp.path(), "bad.cfg", &SMALL_1D.replace("u_d = 0.1, 0.1", "u_d = 0.6, 0.4"));
    let o = run(&["run", "--config", &bad, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sum of u_D < 1"));

    let unequal = write_config(tmp.path(), "unequal.cfg", &SMALL_1D.replace("alphas = 1, 1", "alphas = 1, 10"));
    assert_eq!(run(&["run", "--config", &unequal, "--out", out]).status.code(), Some(0));
    let o = run(&["run", "--config", &unequal, "--out", out, "--strict-theory"]);
    assert_eq!(o.status.code(), Some(2));

    // a huge fixed step with a tiny Newton budget cannot converge
    let stiff = SMALL_1D.replace("dt = fixed:2e-5", "dt = fixed:1e-4\nmax_iters = 1");
    let stiff = write_config(tmp.path(), "stiff.cfg", &stiff);
    assert_eq!(run(&["run", "--config", &stiff, "--out", out]).status.code(), Some(3));

    let tri = write_config(tmp.path(), "right.tri", "nodes 4 triangles 2\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n");
    let o = run(&["check-mesh", &tri]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("triangles: [0, 1]"));

    let o = run(&["run", "--config", tmp.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_mesh_reports() {
    let o = run(&["check-mesh", "--rectangle", "8x4"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("cells: 32"));
    assert!(text.contains("xi: 0.5"));
    assert!(text.contains("dirichlet edges: 8"));

    let o = run(&["check-mesh", "--acute-square", "--refine", "4"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("cells: 3584"));
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest", "--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn threads_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL_1D);
    let o = Command::new(BIN)
        .args(["run", "--config", &cfg, "--out", tmp.path().to_str().unwrap()])
        .env("THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(meta_value(&tmp.path().join("small"), "threads"), "3");
}

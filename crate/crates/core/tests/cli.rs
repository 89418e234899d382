use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "mesh.subdivisions = 1\nscheme.steps = 16\nobserve.points = 2,0,0; 0,0,0\nreference.steps = 64\n";

fn cqbem(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cqbem"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--quiet")
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn run_writes_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = cqbem(dir.path(), SMALL, &["run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");

    let (h, rows) = read_csv(&o.join("field_points.csv"));
    assert_eq!(h, ["t", "u_0", "u_1"]);
    assert_eq!(rows.len(), 17);
    assert_eq!(rows[16][0], 4.0);
    assert!(rows.iter().all(|r| r[1].is_finite() && r[2].is_nan()));
    assert!(rows.iter().any(|r| r[1] != 0.0));

    let (h, rows) = read_csv(&o.join("densities.csv"));
    assert_eq!(h, ["t", "phi_l2", "psi_l2", "psi_min", "psi_max"]);
    assert_eq!(rows.len(), 17);
    assert!(rows.iter().all(|r| r[3] <= r[4]));

    let manifest = fs::read_to_string(o.join("manifest.txt")).unwrap();
    for key in ["bc.kind = B2", "scheme.steps = 16", "mesh.triangles = 80", "point.1.inside = true"] {
        assert!(manifest.contains(key), "missing `{key}` in\n{manifest}");
    }
}

#[test]
fn rerun_is_bitwise_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(cqbem(d.path(), SMALL, &["run"]).status.success());
    }
    for f in ["field_points.csv", "densities.csv"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn zero_amplitude_gives_zero_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}wave.amplitude = 0\n");
    assert!(cqbem(dir.path(), &cfg, &["run"]).status.success());
    let (_, rows) = read_csv(&dir.path().join("out/field_points.csv"));
    assert!(rows.iter().all(|r| r[1] == 0.0));
    let (_, rows) = read_csv(&dir.path().join("out/densities.csv"));
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| *v == 0.0)));
}

#[test]
fn snapshots_are_written_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{SMALL}snapshot.axis = z\nsnapshot.offset = 0\nsnapshot.extent = -2,2,-2,2\n\
         snapshot.resolution = 5,5\nsnapshot.times = 1, 3.9\n"
    );
    let out = cqbem(dir.path(), &cfg, &["run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // 3.9 snaps to the nearest grid time 4.0
    for name in ["snapshot_0_t1.0000.csv", "snapshot_1_t4.0000.csv"] {
        let (h, rows) = read_csv(&dir.path().join("out").join(name));
        assert_eq!(h, ["x", "y", "z", "u"]);
        assert_eq!(rows.len(), 25);
        // the centre of the plane is inside the sphere
        assert!(rows.iter().any(|r| r[3].is_nan()));
        assert!(rows.iter().filter(|r| r[0].hypot(r[1]) > 1.5).all(|r| r[3].is_finite()));
    }
}

#[test]
fn reference_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = cqbem(dir.path(), SMALL, &["reference"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = read_csv(&dir.path().join("out/reference.csv"));
    assert_eq!(h, ["t", "psi", "u_0", "u_1"]);
    assert_eq!(rows.len(), 65);
    // the scattered wave reaches |x| = 2 one time unit after the surface
    assert!(rows.iter().filter(|r| r[0] < 1.0).all(|r| r[2].abs() < 1e-6));
    assert!(rows.iter().all(|r| r[3].is_nan()));
}

#[test]
fn convergence_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "mesh.subdivisions = 0\nconvergence.mode = time\nconvergence.levels = 8,16,32\nreference.steps = 256\n";
    let out = cqbem(dir.path(), cfg, &["convergence"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = read_csv(&dir.path().join("out/convergence.csv"));
    assert_eq!(h, ["level", "h", "tau", "error", "eoc", "psi_spread"]);
    assert_eq!(rows.len(), 3);
    assert!(rows[0][4].is_nan());
    assert!(rows.iter().all(|r| r[3] > 0.0 && r[3].is_finite()));
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    for (cfg, key) in [
        ("bc.kind = D\n", "bc.kind"),
        ("scheme.order = 3\n", "scheme.order"),
        ("color = blue\n", "color"),
        ("mesh.kind = file\nmesh.path = missing.off\n", "mesh.path"),
    ] {
        let out = cqbem(dir.path(), cfg, &["run"]);
        assert_eq!(out.status.code(), Some(2), "{cfg}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(key), "{cfg}");
    }
}

#[test]
fn failed_preconditions_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = cqbem(dir.path(), "wave.kind = plane\n", &["reference"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cqbem(dir.path(), "convergence.levels = 8,16\n", &["convergence"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("3 levels"));
}

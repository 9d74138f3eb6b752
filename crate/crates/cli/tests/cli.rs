use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn grf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grf"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("RUST_BACKTRACE")
        .output()
        .expect("spawn grf")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = grf(args, dir);
    assert!(
        out.status.success(),
        "grf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn mesh_gen_and_info() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["mesh", "gen", "--shape", "icosphere", "--level", "1", "--out", "s.off"], d);
    let info = ok(&["mesh", "info", "--mesh", "s.off"], d);
    assert!(info.contains("vertices: 42"));
    assert!(info.contains("triangles: 80"));
    assert!(info.contains("euler characteristic: 2"));
    assert!(info.contains("closed: true"));

    ok(&["mesh", "gen", "--shape", "hyperboloid", "--level", "0", "--out", "h.off"], d);
    let info = ok(&["mesh", "info", "--mesh", "h.off"], d);
    assert!(info.contains("vertices: 144"), "{info}");
    assert!(info.contains("closed: false"));
}

#[test]
fn sample_csv_directory_and_binary_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["mesh", "gen", "--shape", "icosphere", "--level", "1", "--out", "s.off"], d);
    let base = ["sample", "--mesh", "s.off", "--nu", "1", "--range", "0.5", "--seed", "7"];

    let mut args = base.to_vec();
    args.extend(["--count", "3", "--out", "csv"]);
    ok(&args, d);
    let csv = fs::read_to_string(d.join("csv/sample_1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("vertex_index,x,y,z,value"));
    assert_eq!(lines.count(), 42);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("csv/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["count"], 3);
    assert_eq!(meta["n"], 42);
    assert_eq!(meta["mass_mode"], "cholesky");

    let mut args = base.to_vec();
    args.extend(["--count", "4", "--workers", "1", "--format", "binary", "--out", "a.bin"]);
    ok(&args, d);
    let mut args = base.to_vec();
    args.extend(["--count", "4", "--workers", "3", "--format", "binary", "--out", "b.bin"]);
    ok(&args, d);
    let a = fs::read(d.join("a.bin")).unwrap();
    assert_eq!(a, fs::read(d.join("b.bin")).unwrap());
    assert!(d.join("a.bin.json").exists());

    // sample 1 of the binary batch equals the CSV sample 1 (same seed, same stream)
    let mut args = base.to_vec();
    args.extend(["--count", "3", "--format", "binary", "--out", "c.bin"]);
    ok(&args, d);
    let bytes = fs::read(d.join("c.bin")).unwrap();
    let binary: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let from_csv: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(binary.len(), 3 * 42);
    assert_eq!(&binary[42..84], &from_csv[..]);
}

#[test]
fn sample_rejects_mixed_psd_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["mesh", "gen", "--shape", "icosphere", "--level", "0", "--out", "s.off"], d);
    let out = grf(
        &["sample", "--mesh", "s.off", "--nu", "1", "--range", "0.5", "--kappa2", "2", "--beta", "1", "--out", "x.csv"],
        d,
    );
    assert!(!out.status.success());
    let out = grf(&["sample", "--mesh", "s.off", "--out", "x.csv"], d);
    assert!(!out.status.success());
}

#[test]
fn fem_export_writes_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["mesh", "gen", "--shape", "icosphere", "--level", "0", "--out", "s.off"], d);
    ok(&["fem", "export", "--mesh", "s.off", "--out-dir", "m"], d);
    for name in ["mass.mtx", "stiffness.mtx", "lumped_mass.mtx"] {
        let text = fs::read_to_string(d.join("m").join(name)).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric"), "{name}");
        let size = text.lines().find(|l| !l.starts_with('%')).unwrap();
        assert!(size.starts_with("12 12 "), "{name}: {size}");
    }
    // lumped mass entries sum to the surface area
    let lumped = fs::read_to_string(d.join("m/lumped_mass.mtx")).unwrap();
    let total: f64 = lumped
        .lines()
        .filter(|l| !l.starts_with('%'))
        .skip(1)
        .map(|l| l.split_whitespace().nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    let area = ok(&["mesh", "info", "--mesh", "s.off"], d);
    let area: f64 = area
        .lines()
        .find_map(|l| l.strip_prefix("surface area: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((total - area).abs() < 1e-12 * area);
}

#[test]
fn sphere_oracles_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("t.txt"), "0\n0.25, 1.0\n").unwrap();
    let cov = ok(&["sphere", "cov", "--nu", "1", "--range", "0.5", "--thetas", "t.txt"], d);
    let values: Vec<f64> = cov
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(cov.lines().next(), Some("theta,covariance"));
    assert_eq!(values.len(), 3);
    assert!(values[0] > values[1] && values[1] > values[2] && values[2] > 0.0);

    fs::write(d.join("bad.txt"), "4.0\n").unwrap();
    assert!(!grf(&["sphere", "cov", "--nu", "1", "--range", "0.5", "--thetas", "bad.txt"], d).status.success());

    ok(&["sphere", "trunc-error", "--nu", "1", "--range", "0.5", "--orders", "10,100,1000", "--out", "e.csv"], d);
    let text = fs::read_to_string(d.join("e.csv")).unwrap();
    let errs: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errs.len(), 3);
    assert!(errs[0] > errs[1] && errs[1] > errs[2]);
}

#[test]
fn study_writes_reports_and_validates_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("t.json"), r#"{"orders": [100, 1000, 10000, 100000]}"#).unwrap();
    let line = ok(&["study", "trunc", "--config", "t.json", "--out", "r"], d);
    assert!(line.contains("PASS"), "{line}");
    let csv = fs::read_to_string(d.join("r/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r/report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["orders"].as_array().unwrap().len(), 4);
    assert_eq!(json["config"]["nu"], 1.0);

    fs::write(d.join("bad.json"), r#"{"ordres": [1]}"#).unwrap();
    let out = grf(&["study", "trunc", "--config", "bad.json", "--out", "x"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ordres"));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_zs-resonance"));
    c.env_remove("ZS_OUTPUT_DIR").env_remove("ZS_THREADS").env("RUST_LOG", "warn");
    c
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn run(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(cfg)
        .arg("--output")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn box_config(c: f64, gamma: f64) -> String {
    format!("[potential]\ntype = \"box\"\ngamma = {gamma}\nvalue = [{c}, 0.0]\n")
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn resonances_box_rows_match_winding() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &(box_config(2.0, 1.0) + "[resonances]\nre_max = 40.0\ndepth = \"auto\"\n"),
    );
    let out = tmp.path().join("out");
    let o = run("resonances", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let (header, rows) = read_rows(&out.join("resonances.csv"));
    assert_eq!(header, ["re", "im", "multiplicity", "residual", "cluster_radius"]);
    let mult: usize = rows.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
    assert_eq!(mult, rows.len());
    // roughly 2·40/π zeros in the half-disc, padded by the box corners
    assert!((24..=32).contains(&rows.len()), "{} rows", rows.len());
    for r in &rows {
        let im: f64 = r[1].parse().unwrap();
        assert!(im < 0.0);
    }

    let (header, counts) = read_rows(&out.join("counting.csv"));
    assert_eq!(header, ["r", "N"]);
    let last: usize = counts.last().unwrap()[1].parse().unwrap();
    assert!(last <= rows.len());

    let fd: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("forbidden_domain.json")).unwrap()).unwrap();
    assert_eq!(fd["informational"], true);
    assert_eq!(fd["entries"].as_array().unwrap().len(), rows.len());
}

#[test]
fn zero_potential_gives_header_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &box_config(0.0, 1.0));
    let out = tmp.path().join("out");
    let o = run("resonances", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("resonances.csv")).unwrap();
    assert_eq!(text, "re,im,multiplicity,residual,cluster_radius\n");
}

#[test]
fn malformed_complex_names_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[potential]\ntype = \"box\"\ngamma = 1.0\nvalue = [1.0, \"x\"]\n",
    );
    let o = run("resonances", &cfg, &tmp.path().join("out"), &[]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("value"), "{err}");
}

#[test]
fn unknown_suite_fails() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &box_config(1.0, 1.0));
    let o = run("verify", &cfg, &tmp.path().join("out"), &["--only", "unitarity,nonsense"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonsense"));

    let cfg = write_config(
        tmp.path(),
        &(box_config(1.0, 1.0) + "[verify]\nidentities = [\"bogus\"]\n"),
    );
    let o = run("verify", &cfg, &tmp.path().join("out"), &[]);
    assert!(!o.status.success());
}

#[test]
fn only_flag_gives_one_record() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &box_config(1.0, 1.0));
    let out = tmp.path().join("out");
    let o = run("verify", &cfg, &out, &["--only", "unitarity"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let records = report["records"].as_array().unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["name"], "unitarity");
    assert_eq!(records[0]["pass"], true);
    assert_eq!(report["potential_fingerprint"].as_str().unwrap().len(), 64);
}

#[test]
fn default_suite_box_1_1_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &box_config(1.0, 1.0));
    let out = tmp.path().join("out");
    let o = run("verify", &cfg, &out, &[]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let records = report["records"].as_array().unwrap();
    assert_eq!(records.len(), 11);
    for r in records {
        assert_eq!(r["pass"], true, "{}", r["name"]);
    }
    assert!(o.status.success());
}

#[test]
fn config_identities_all_reported() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &(box_config(1.0, 1.0)
            + "[verify]\nidentities = [\"conjugation\", \"jost_bounds\", \"q0_action\"]\n"
            + "[verify.tolerances]\nconjugation = 1e-12\n"),
    );
    let out = tmp.path().join("out");
    assert!(run("verify", &cfg, &out, &[]).status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let names: Vec<&str> = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["conjugation", "jost_bounds", "q0_action"]);
    assert_eq!(report["records"][0]["bound"], 1e-12);
}

#[test]
fn scattering_columns_and_unitarity() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &(box_config(2.0, 1.0) + "[scattering]\nlambda_min = -5.0\nlambda_max = 5.0\nn_points = 41\n"),
    );
    let out = tmp.path().join("out");
    assert!(run("scattering", &cfg, &out, &[]).status.success());
    let (header, rows) = read_rows(&out.join("scattering.csv"));
    assert_eq!(header, ["lambda", "re_a", "im_a", "re_b", "im_b", "unitarity", "phase"]);
    assert_eq!(rows.len(), 41);
    for r in &rows {
        let u: f64 = r[5].parse().unwrap();
        assert!((u - 1.0).abs() < 1e-10);
    }
}

#[test]
fn determinant_matches_a() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &(box_config(1.0, 1.0) + "[determinant]\nlambdas = [[0.0, 3.0], [2.0, 5.0]]\nN = 30\nM = 64\n"),
    );
    let out = tmp.path().join("out");
    assert!(run("determinant", &cfg, &out, &[]).status.success());
    let (header, rows) = read_rows(&out.join("determinant.csv"));
    assert_eq!(header[7], "abs_d_minus_a");
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let resid: f64 = r[7].parse().unwrap();
        let tail: f64 = r[5].parse().unwrap();
        assert!(resid < tail + 1e-7, "{resid}");
    }
    let (_, terms) = read_rows(&out.join("determinant_terms.csv"));
    assert_eq!(terms.len(), 60);
}

#[test]
fn outputs_are_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &(box_config(2.0, 1.0) + "[resonances]\nre_max = 30.0\n[scattering]\nn_points = 101\n"),
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for cmd in ["resonances", "scattering"] {
        assert!(run(cmd, &cfg, &a, &["--threads", "1"]).status.success());
        assert!(run(cmd, &cfg, &b, &["--threads", "4"]).status.success());
    }
    for f in ["resonances.csv", "counting.csv", "forbidden_domain.json", "scattering.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn env_overrides_output_dir() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &(box_config(1.0, 1.0) + "[output]\ndir = \"ignored\"\n"));
    let target = tmp.path().join("from_env");
    let o = bin()
        .args(["scattering", "--config"])
        .arg(&cfg)
        .env("ZS_OUTPUT_DIR", &target)
        .env("ZS_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(target.join("scattering.csv").exists());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn sampled_file_relative_to_config() {
    let tmp = TempDir::new().unwrap();
    let mut csv = String::from("x,re,im\n");
    let m = 200;
    for j in 0..=m {
        let x = j as f64 / m as f64;
        let q = (std::f64::consts::PI * x).sin().powi(2);
        csv.push_str(&format!("{x},{q},0\n"));
    }
    fs::write(tmp.path().join("q.csv"), csv).unwrap();
    let cfg = write_config(
        tmp.path(),
        "[potential]\ntype = \"sampled\"\nsamples_file = \"q.csv\"\n[scattering]\nn_points = 11\n",
    );
    let out = tmp.path().join("out");
    let o = run("scattering", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_rows(&out.join("scattering.csv"));
    assert_eq!(rows.len(), 11);
}

#[test]
fn missing_samples_file_names_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[potential]\ntype = \"sampled\"\ngamma = 1.0\nsamples_file = \"absent.csv\"\n",
    );
    let o = run("scattering", &cfg, &tmp.path().join("out"), &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples_file"));
}

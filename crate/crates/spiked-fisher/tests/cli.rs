//! End-to-end checks of the installed binary: exit codes, envelope layout,
//! dataset ingestion, and row-order invariance.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spiked-fisher"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/cca_sample.csv")
        .canonicalize()
        .expect("fixture present")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

const X_COLS: &str = "x1,x2,x3,x4,x5,x6,x7";
const Y_COLS: &str = "y1,y2,y3,y4,y5,y6,y7,y8,y9,y10,y11";

#[test]
fn success_exits_zero() {
    let out = run(&["phase"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(stdout_str(&out).contains("\"command\": \"phase\""));
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["phase", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    // config errors share the usage exit code
    let out = run(&["clt", "--reps", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reps"));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    for sub in ["phase", "clt", "mse", "cca-analyze", "lsd"] {
        assert!(text.contains(sub), "help must mention {sub}");
    }
}

#[test]
fn domain_errors_exit_two() {
    // spike index beyond the model's spike list
    let dir = std::env::temp_dir().join("sf-int-domain");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"model":"covariance","p":30,"n":300,"spikes":[10.0],"reps":5,"spike_index":3}"#,
    )
    .unwrap();
    let out = run(&["clt", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn io_errors_exit_three() {
    let out = run(&["phase", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&[
        "cca-analyze",
        "--input",
        "/nonexistent/data.csv",
        "--x-cols",
        "a",
        "--y-cols",
        "b",
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn envelope_fields_stay_in_canonical_order() {
    let text = stdout_str(&run(&["phase"]));
    let pos = |needle: &str| text.find(needle).unwrap_or_else(|| panic!("missing {needle}"));
    assert!(pos("\"command\"") < pos("\"config_echo\""));
    assert!(pos("\"config_echo\"") < pos("\"seed\""));
    assert!(pos("\"seed\"") < pos("\"results\""));
    assert!(pos("\"results\"") < pos("\"warnings\""));
}

#[test]
fn cca_analyze_reads_the_sample_dataset() {
    let fixture = fixture();
    let out = run(&[
        "cca-analyze",
        "--input",
        fixture.to_str().unwrap(),
        "--x-cols",
        X_COLS,
        "--y-cols",
        Y_COLS,
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(v["results"]["p"], 7);
    assert_eq!(v["results"]["q"], 11);
    assert_eq!(v["results"]["n_retained"], 188);
    assert_eq!(v["results"]["dropped_rows"], 2);
    let top = v["results"]["lambda_sq"][0].as_f64().unwrap();
    assert!((top - 0.9152).abs() < 1e-10, "top correlation {top}");
    let rho = v["results"]["estimates"][0]["rho_sq_hat"].as_f64().unwrap();
    assert!((rho - 0.906364).abs() < 5e-4, "rho {rho}");
    assert_eq!(
        v["results"]["tracy_widom_p_value"],
        "not computed (out of scope)"
    );
}

#[test]
fn data_row_order_does_not_change_the_spectrum() {
    let text = std::fs::read_to_string(fixture()).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    // deterministic permutation: reverse, then interleave halves
    lines.reverse();
    let mid = lines.len() / 2;
    let (a, b) = lines.split_at(mid);
    let mut shuffled: Vec<&str> = Vec::with_capacity(lines.len());
    for i in 0..mid.max(lines.len() - mid) {
        if let Some(x) = a.get(i) {
            shuffled.push(x);
        }
        if let Some(x) = b.get(i) {
            shuffled.push(x);
        }
    }
    let dir = std::env::temp_dir().join("sf-int-perm");
    std::fs::create_dir_all(&dir).unwrap();
    let permuted = dir.join("permuted.csv");
    std::fs::write(&permuted, format!("{header}\n{}\n", shuffled.join("\n"))).unwrap();

    let spectrum = |path: &str| -> Vec<f64> {
        let out = run(&["cca-analyze", "--input", path, "--x-cols", X_COLS, "--y-cols", Y_COLS]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
        v["results"]["lambda_sq"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect()
    };
    let base = spectrum(fixture().to_str().unwrap());
    let perm = spectrum(permuted.to_str().unwrap());
    assert_eq!(base.len(), perm.len());
    for (i, (x, y)) in base.iter().zip(perm.iter()).enumerate() {
        assert!((x - y).abs() < 1e-10, "eig {i}: {x} vs {y}");
    }
}

#[test]
fn out_file_leaves_stdout_empty() {
    let dir = std::env::temp_dir().join("sf-int-out");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("phase.json");
    let out = run(&["phase", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"command\": \"phase\""));
}

#[test]
fn identical_runs_are_byte_identical_across_thread_counts() {
    let dir = std::env::temp_dir().join("sf-int-bytes");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"model":"fisher","p":24,"n":240,"n2":120,"spikes":[10.0],"reps":20}"#,
    )
    .unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "2"] {
        let out = run(&[
            "clt",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "99",
            "--threads",
            threads,
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        outs.push(out.stdout);
    }
    assert_eq!(outs[0], outs[1]);
}

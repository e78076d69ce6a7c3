use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ebb84(dir: &Path, args: &[&str], config: &str) -> Output {
    let path = dir.join("run.conf");
    fs::write(&path, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ebb84"));
    for (k, _) in std::env::vars() {
        if k.starts_with("EBB84_") {
            cmd.env_remove(k);
        }
    }
    cmd.args(args).arg("--config").arg(&path).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const FIXED: &str = "\
channel.eta_loss_db = 30
channel.p_ec = 1e-6
channel.qber_i = 0.01
channel.integration_time_s = 600
protocol.pax = 0.8
protocol.pbx = 0.8
protocol.mu1 = 0.5
protocol.mu2 = 0.1
protocol.p_mu1 = 0.7
protocol.p_mu2 = 0.2
protocol.p_mu3 = 0.1
";

#[test]
fn zero_window_is_a_valid_answer() {
    let dir = TempDir::new().unwrap();
    let out = ebb84(dir.path(), &["keylength"], &FIXED.replace("= 600", "= 0"));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["ell"], 0);
}

#[test]
fn keylength_reports_diagnostics() {
    let dir = TempDir::new().unwrap();
    let v = json(&ebb84(dir.path(), &["keylength"], FIXED));
    let r = &v["result"];
    assert!(r["ell"].as_u64().unwrap() > 0);
    for key in ["s_x0", "s_x1", "phi_x", "lambda_ec", "qber_x"] {
        assert!(r[key].is_number(), "{key}");
    }
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    for bad in ["channel.p_ec 1e-6", "channel.bogus = 1", "channel.p_ec = x", "{\"channel\": 3", "protocol.pax = 2"] {
        let out = ebb84(dir.path(), &["keylength"], bad);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(out.stdout.is_empty(), "{bad}");
    }
    let out = ebb84(dir.path(), &["keylength"], "channel.bogus = 1");
    assert!(String::from_utf8_lossy(&out.stderr).contains("channel.bogus"));
}

#[test]
fn sweep_grid_rows_in_input_order() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{FIXED}sweep.eta_loss_db = 20, 30, 40\nsweep.log10_pec = -7:-5:3\n");
    let out = ebb84(dir.path(), &["sweep"], &cfg);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "eta_loss_db,log10_pec,qber_i,tau_s,ell,s_x0,s_x1,phi_x,lambda_ec,pax,pbx,mu1,mu2,mu3,p_mu1,p_mu2,p_mu3"
    );
    assert_eq!(lines.len(), 10);
    let lead: Vec<String> = lines[1..].iter().map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(lead[0], "20,-7");
    assert_eq!(lead[1], "20,-6");
    assert_eq!(lead[3], "30,-7");
    assert_eq!(lead[8], "40,-5");
}

#[test]
fn worstcase_without_deviation_matches_keylength() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{FIXED}worstcase.f = 0\n");
    let k = json(&ebb84(dir.path(), &["keylength"], &cfg));
    let w = json(&ebb84(dir.path(), &["worstcase"], &cfg));
    assert_eq!(w["worst_case"]["min_ell"], k["result"]["ell"]);
    assert_eq!(w["worst_case"]["nominal_ell"], k["result"]["ell"]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{FIXED}optimize.regime = fixed-pbx\noptimize.restarts = 4\n");
    let a = ebb84(dir.path(), &["optimize", "--seed", "7"], &cfg);
    let b = ebb84(dir.path(), &["optimize", "--seed", "7", "--threads", "2"], &cfg);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn json_config_and_out_file() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("sift.csv");
    let cfg = r#"{"protocol": {"pax": 0.9, "pbx": 0.5}}"#;
    let out = ebb84(dir.path(), &["sift-equiv", "--format", "csv", "--out", target.to_str().unwrap()], cfg);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(target).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "pax,pbx,k,p_x,f,f_prime");
    let values: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    for (v, expected) in values.iter().zip([0.9, 0.5, 9.0, 0.75, 0.5, 0.625]) {
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }
}

#[test]
fn environment_overrides_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, FIXED).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ebb84"))
        .args(["keylength", "--config"])
        .arg(&path)
        .env("EBB84_CHANNEL__INTEGRATION_TIME_S", "0")
        .output()
        .unwrap();
    assert_eq!(json(&out)["result"]["ell"], 0);
}

#[test]
fn budget_matches_direct_evaluation() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{FIXED}budget.target_bits = 10000\n");
    let b = json(&ebb84(dir.path(), &["budget"], &cfg));
    let eta = b["budget"]["eta_loss_db"].as_f64().unwrap();
    assert!(b["budget"]["ell"].as_u64().unwrap() >= 10_000);
    let at = |e: f64| {
        let k = json(&ebb84(dir.path(), &["keylength"], &FIXED.replace("eta_loss_db = 30", &format!("eta_loss_db = {e}"))));
        k["result"]["ell"].as_u64().unwrap()
    };
    assert!(at(eta) >= 10_000);
    assert!(at(eta + 0.1) < 10_000);
}

use std::path::Path;
use std::process::{Command, Output};

fn wdma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wdma-vlc"))
        .args(args)
        .env_remove("WDMA_VLC_OUT")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn oracle_twice_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = wdma(&[
            "oracle",
            "--scenario",
            "scenario2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["report.json", "sinr.csv", "config.toml"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let csv = String::from_utf8(read(&a, "sinr.csv")).unwrap();
    assert!(csv.starts_with("user,method,ap,wavelength,sinr_db\n"));
    assert!(csv.lines().nth(1).unwrap().starts_with("1,oracle,4,red,"));
}

#[test]
fn run_with_overrides_and_config_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = wdma(&[
        "run",
        "--scenario",
        "scenario1",
        "--seed",
        "3",
        "--episodes",
        "300",
        "--reward-scale",
        "db",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_like::Report = serde_like::parse(&read(&out, "report.json"));
    assert_eq!(report.seed, 3);
    assert!(report.text.contains("\"scale\": \"db\""));
    assert!(out.join("trace.csv").exists() && out.join("qtable.bin").exists());

    // the echoed config reproduces the run
    let again = tmp.path().join("again");
    let o = wdma(&[
        "run",
        "--config",
        out.join("config.toml").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "report.json",
        "sinr.csv",
        "trace.csv",
        "config.toml",
        "qtable.bin",
    ] {
        assert_eq!(read(&out, f), read(&again, f), "{f}");
    }
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wdma-vlc"))
        .args(["trace-channel", "--scenario", "scenario1"])
        .env("WDMA_VLC_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(read(tmp.path(), "power_matrix.csv")).unwrap();
    assert!(csv.starts_with("user,ap,wavelength,los_w,first_order_w,second_order_w,total_w\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 4 * 4);
}

#[test]
fn invalid_config_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cfg");
    let o = wdma(&[
        "oracle",
        "--scenario",
        "scenario1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(read(&out, "config.toml")).unwrap();
    let bad = text.replacen("fov_deg = 40.0", "fov_deg = 95.0", 1);
    assert_ne!(bad, text);
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, bad).unwrap();
    let o = wdma(&[
        "oracle",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("receivers[0].fov_deg"), "{err}");
}

#[test]
fn unknown_scenario_and_bad_flags_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = wdma(&["run", "--scenario", "scenario7", "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario7"));
    let o = wdma(&["run", "--reward-scale", "log", "--out", out]);
    assert!(!o.status.success());
    let o = wdma(&["train", "--episodes", "0", "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_episodes"));
}

#[test]
fn cache_dir_is_reused() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let out = tmp.path().join("out");
    for _ in 0..2 {
        let o = wdma(&[
            "oracle",
            "--scenario",
            "scenario1",
            "--cache-dir",
            cache.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let entries: Vec<_> = std::fs::read_dir(&cache).unwrap().collect();
    assert_eq!(entries.len(), 1);
}

/// Minimal field extraction so the test needs no JSON dependency.
mod serde_like {
    pub struct Report {
        pub seed: u64,
        pub text: String,
    }

    pub fn parse(bytes: &[u8]) -> Report {
        let text = String::from_utf8(bytes.to_vec()).unwrap();
        let seed = text
            .lines()
            .find_map(|l| l.trim().strip_prefix("\"seed\": "))
            .map(|v| v.trim_end_matches(',').parse().unwrap())
            .expect("seed field");
        Report { seed, text }
    }
}

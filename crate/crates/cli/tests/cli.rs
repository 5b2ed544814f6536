use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crackprobe_cli::config::{ScenarioConfig, DEFAULT_SCENARIO};
use proptest::prelude::*;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_crackprobe"));
    c.env_remove("CRACKPROBE_CACHE");
    c
}

fn run_in(dir: &Path, config: Option<&Path>, args: &[&str]) -> Output {
    let mut c = bin();
    c.current_dir(dir).arg("--out").arg("out");
    if let Some(p) = config {
        c.arg("--config").arg(p);
    }
    c.args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// The bundled scenario at a coarser resolution.
fn small_scenario() -> String {
    DEFAULT_SCENARIO
        .replace("n_boundary = 256", "n_boundary = 128")
        .replace("n_crack = 48", "n_crack = 24")
        .replace("modes = 65", "modes = 33")
        .replace("refine = true", "refine = false")
        .replace("grid = 0.05", "grid = 0.1")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bundled_scenario_round_trips() {
    let cfg = ScenarioConfig::default_scenario();
    let again = ScenarioConfig::parse(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(cfg.hash(), again.hash());
    assert_eq!(cfg.hash().len(), 64);
    let mut moved = cfg.clone();
    moved.output = Some("elsewhere".into());
    assert_eq!(moved.hash(), cfg.hash());
    moved.seed += 1;
    assert_ne!(moved.hash(), cfg.hash());
}

#[test]
fn negative_gamma_bar_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let p = write_config(tmp.path(), "bad.toml", &DEFAULT_SCENARIO.replace("gamma_bar = 10.0", "gamma_bar = -1.0"));
    let o = run_in(tmp.path(), Some(&p), &["validate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma_bar"), "{}", stderr(&o));
}

#[test]
fn parse_errors_carry_line_and_column() {
    let tmp = TempDir::new().unwrap();
    let p = write_config(tmp.path(), "bad.toml", "seed = 1\n\n[apriori\nr0 = 0.25\n");
    let o = run_in(tmp.path(), Some(&p), &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3, column"), "{}", stderr(&o));
    let p = write_config(tmp.path(), "typo.toml", "seed = 1\nsede = 2\n");
    let o = run_in(tmp.path(), Some(&p), &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2, column 1"), "{}", stderr(&o));
}

#[test]
fn out_of_range_fields_are_named() {
    for (from, to, field) in [
        ("modes = 65", "modes = 64", "modes"),
        ("r0 = 0.25", "r0 = 0.0", "r0"),
        ("plus = [1.0], minus = [1.0] }\n\n[[cracks]]", "plus = [11.0], minus = [1.0] }\n\n[[cracks]]", "gamma"),
    ] {
        let text = DEFAULT_SCENARIO.replacen(from, to, 1);
        assert_ne!(text, DEFAULT_SCENARIO);
        let err = ScenarioConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains(field), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
    let tmp = TempDir::new().unwrap();
    assert_eq!(run_in(tmp.path(), None, &["--threads", "0", "solve"]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3() {
    let tmp = TempDir::new().unwrap();
    let text = small_scenario().replace("kinds = [\"dn\", \"nd\", \"local_dn\", \"local_nd\"]", "magnitudes = [0.01, 0.005]");
    let p = write_config(tmp.path(), "narrow.toml", &text);
    let o = run_in(tmp.path(), Some(&p), &["sweep"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("stability"), "{}", stderr(&o));
}

#[test]
fn repeated_dnmap_runs_hit_the_cache() {
    let tmp = TempDir::new().unwrap();
    let cache = tmp.path().join("cache");
    let run = |out: &str| {
        let o = bin()
            .current_dir(tmp.path())
            .env("CRACKPROBE_CACHE", &cache)
            .args(["--out", out, "dnmap"])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        stderr(&o)
    };
    let ms = |log: &str| -> f64 {
        log.lines()
            .filter_map(|l| l.strip_suffix(" ms").and_then(|l| l.rsplit(' ').next()))
            .map(|v| v.parse::<f64>().unwrap())
            .sum()
    };
    let first = run("a");
    let second = run("b");
    assert!(first.contains("cache miss") && !first.contains("cache hit"), "{first}");
    assert_eq!(second.matches("cache hit").count(), 6, "{second}");
    assert!(ms(&first) >= 10.0 * ms(&second), "{} {}", ms(&first), ms(&second));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(fs::read(a.join("dnmap.manifest.json")).unwrap(), fs::read(b.join("dnmap.manifest.json")).unwrap());
    assert_eq!(fs::read(a.join("maps/crack0-dn.cpmap")).unwrap(), fs::read(b.join("maps/crack0-dn.cpmap")).unwrap());
    // One file per kind even for the same configuration.
    let names: Vec<String> = fs::read_dir(&cache).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names.len(), 6);
    assert_eq!(names.iter().filter(|n| n.starts_with("dn-")).count(), 3);
    assert_eq!(names.iter().filter(|n| n.starts_with("nd-")).count(), 3);
}

#[test]
fn corrupt_cache_entries_are_rebuilt() {
    let tmp = TempDir::new().unwrap();
    let p = write_config(tmp.path(), "s.toml", &small_scenario());
    assert!(run_in(tmp.path(), Some(&p), &["dnmap"]).status.success());
    let cache = tmp.path().join("out/.cache");
    let entry = fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    let bytes = fs::read(&entry).unwrap();
    fs::write(&entry, &bytes[..bytes.len() / 2]).unwrap();
    let o = run_in(tmp.path(), Some(&p), &["dnmap"]);
    assert!(o.status.success());
    let log = stderr(&o);
    assert!(log.contains("warning") && log.contains("rebuilding"), "{log}");
    assert_eq!(log.matches("cache miss").count(), 1, "{log}");
    assert_eq!(fs::read(&entry).unwrap(), bytes);
}

#[test]
fn no_cache_leaves_no_cache_behind() {
    let tmp = TempDir::new().unwrap();
    let p = write_config(tmp.path(), "s.toml", &small_scenario());
    let o = run_in(tmp.path(), Some(&p), &["--no-cache", "dnmap"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("assembled"));
    assert!(!tmp.path().join("out/.cache").exists());
}

/// Every listed output exists with the recorded hash, and every CSV and
/// JSON cites the config hash.
fn check_manifest(out: &Path, command: &str) -> Value {
    let m = json(&out.join(format!("{command}.manifest.json")));
    let hash = m["config_hash"].as_str().unwrap().to_string();
    for e in m["outputs"].as_array().unwrap() {
        let path = out.join(e["path"].as_str().unwrap());
        let bytes = fs::read(&path).unwrap();
        assert_eq!(e["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(e["sha256"].as_str().unwrap(), crackprobe_cli::store::sha256_hex(&bytes));
        let name = path.to_string_lossy();
        if name.ends_with(".csv") || name.ends_with(".json") {
            assert!(String::from_utf8_lossy(&bytes).contains(&hash), "{name}");
        }
    }
    assert!(!fs::read_dir(out).unwrap().any(|e| e.unwrap().file_name().to_string_lossy().contains(".tmp-")));
    m
}

#[test]
fn small_scenario_commands_write_manifests() {
    let tmp = TempDir::new().unwrap();
    let p = write_config(tmp.path(), "s.toml", &small_scenario());
    for cmd in ["solve", "probe", "reconstruct"] {
        let o = run_in(tmp.path(), Some(&p), &["--threads", "2", cmd]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        let m = check_manifest(&tmp.path().join("out"), cmd);
        assert_eq!(m["command"], cmd);
    }
    let out = tmp.path().join("out");
    let solve = json(&out.join("solve.json"));
    assert!(solve["configs"][0]["harmonic_error"].as_f64().unwrap() < 1e-6);
    assert!(solve["configs"][1]["positive_minimum"].as_f64().unwrap() > 0.0);
    let csv = fs::read_to_string(out.join("solve/crack0.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("s,u_plus,u_minus,flux_plus,flux_minus"));
    assert_eq!(csv.lines().count(), 2 + 64);
    let probe = json(&out.join("probe.json"));
    let (hit, miss) = (&probe["profiles"][0], &probe["profiles"][1]);
    assert!(hit["max_abs"].as_f64().unwrap() > 10.0 * miss["max_abs"].as_f64().unwrap());
    let rec = json(&out.join("reconstruct.json"));
    assert!(rec["hits"].as_u64().unwrap() > 0 && rec.get("runtime_ms").is_none());
}

#[test]
fn validate_passes_on_the_bundled_scenario_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let manifests: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|out| {
            let o = bin().current_dir(tmp.path()).args(["--out", out, "--no-cache", "validate"]).output().unwrap();
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            let dir = tmp.path().join(out);
            check_manifest(&dir, "validate");
            let report = json(&dir.join("validate.json"));
            assert_eq!(report["passed"], true);
            let checks = report["checks"].as_array().unwrap();
            assert!(checks.iter().all(|c| c["status"] == "pass"), "{report}");
            assert!(checks.len() >= 12);
            fs::read(dir.join("validate.manifest.json")).unwrap()
        })
        .collect();
    assert_eq!(manifests[0], manifests[1]);
}

#[test]
fn failed_checks_exit_with_3_and_keep_the_report() {
    let tmp = TempDir::new().unwrap();
    // A ladder too coarse for the asymptotic fit.
    let text = small_scenario().replace("[probe]\n", "[probe]\nladder = [0.05, 0.04]\n");
    let p = write_config(tmp.path(), "s.toml", &text);
    let o = run_in(tmp.path(), Some(&p), &["validate"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("asymptotics"));
    let report = json(&tmp.path().join("out/validate.json"));
    assert_eq!(report["passed"], false);
    check_manifest(&tmp.path().join("out"), "validate");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parse_validate_round_trip_is_stable(
        seed in 0..=i64::MAX as u64,
        half_modes in 1usize..40,
        noise in 0.0f64..1e-3,
        gamma in 0.0f64..10.0,
        s0 in -0.9f64..0.9,
    ) {
        let mut cfg = ScenarioConfig::default_scenario();
        cfg.seed = seed;
        cfg.maps.modes = 2 * half_modes + 1;
        cfg.maps.noise = noise;
        cfg.cracks[1].impedance.plus = vec![gamma, 0.5 * gamma];
        cfg.probe.asymptotic_s0 = s0;
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let again = ScenarioConfig::parse(&text).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_toml(), text);
        prop_assert_eq!(again.hash(), cfg.hash());
    }
}

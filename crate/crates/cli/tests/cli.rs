use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[atom]
L = 60.0
[pulse]
n_cycles = 4
steps_per_cycle = 100
[preparation]
protocol = "pi2"
N = 100
[detection]
harmonics = [3, 5]
pairs = [[3, 5]]
spectrum_max_order = 10
[statistics]
grid_points = 61
"#;

fn hhg(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hhg"));
    c.current_dir(dir).args(["--config", "small.toml", "--cache-dir", "cache"]).args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("HHG_")) {
        c.env_remove(k);
    }
    c.envs(env.iter().copied());
    c.output().expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("small.toml"), SMALL).unwrap();
    d
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn stages(m: &serde_json::Value) -> Vec<(String, bool)> {
    m["stages"].as_array().unwrap().iter().map(|s| (s["stage"].as_str().unwrap().to_owned(), s["cache_hit"].as_bool().unwrap())).collect()
}

#[test]
fn atom_writes_levels_and_binary_cache() {
    let d = setup();
    let o = hhg(d.path(), &["atom", "-o", "a"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = d.path().join("a");
    assert!(a.join("atom_levels.tsv").is_file() && a.join("atom.bin").is_file());
    assert_eq!(stages(&manifest(&a)), vec![("atom".to_owned(), false)]);
}

#[test]
fn second_run_is_served_from_the_cache_with_identical_outputs() {
    let d = setup();
    assert!(hhg(d.path(), &["run", "-o", "r1"], &[]).status.success());
    assert!(hhg(d.path(), &["run", "-o", "r2"], &[]).status.success());
    let (m1, m2) = (manifest(&d.path().join("r1")), manifest(&d.path().join("r2")));
    assert!(stages(&m1).iter().all(|(_, hit)| !hit));
    assert!(stages(&m2).iter().all(|(_, hit)| *hit));
    assert_eq!(m1["files"], m2["files"]);
}

#[test]
fn env_override_reaches_the_config_and_flags_win_over_it() {
    let d = setup();
    let o = hhg(d.path(), &["prepare", "-o", "e"], &[("HHG_PREPARATION_N", "40")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&d.path().join("e"))["config"]["preparation"]["N"], 40);
    let o = hhg(d.path(), &["prepare", "-o", "f", "--N", "30"], &[("HHG_PREPARATION_N", "40")]);
    assert!(o.status.success());
    assert_eq!(manifest(&d.path().join("f"))["config"]["preparation"]["N"], 30);
}

#[test]
fn unknown_env_block_key_is_rejected() {
    let d = setup();
    let o = hhg(d.path(), &["atom", "-o", "x"], &[("HHG_ATOM_WIDTH", "3")]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field `width`"));
}

#[test]
fn bad_pair_and_unknown_figure_fail_with_messages() {
    let d = setup();
    let o = hhg(d.path(), &["stats", "--pairs", "3-5"], &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("3-5"));
    let o = hhg(d.path(), &["figure", "fig9"], &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig2"));
}

#[test]
fn stage_failure_names_the_stage_and_still_writes_a_manifest() {
    let d = setup();
    assert!(hhg(d.path(), &["atom", "-o", "a"], &[]).status.success());
    // An unreadable artifact is an error, never a silent recompute.
    for e in std::fs::read_dir(d.path().join("cache/atom")).unwrap() {
        std::fs::write(e.unwrap().path(), b"not an artifact").unwrap();
    }
    let o = hhg(d.path(), &["propagate", "-o", "t"], &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage `atom` failed"));
    let m = manifest(&d.path().join("t"));
    assert_eq!(m["failed_stage"], "atom");
}

#[test]
fn twa_on_a_bright_state_writes_summary() {
    let d = setup();
    let o = hhg(d.path(), &["twa", "--family", "up", "--N", "20000", "--R", "2000", "--seed", "7", "-o", "t"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = std::fs::read_to_string(d.path().join("t/twa/summary.tsv")).unwrap();
    assert!(s.contains("seed = 7"));
}

use hhg_core::pipeline::*;
use hhg_core::Error;

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
[twa]
enabled = true
R = 2000
"#;

fn small() -> RunConfig {
    RunConfig::from_toml(SMALL).unwrap()
}

fn opts(root: &std::path::Path, out: &str) -> RunOptions {
    RunOptions { cache_dir: root.join("cache"), out_dir: root.join(out) }
}

fn hashes(m: &Manifest) -> Vec<(String, String)> {
    m.files.iter().map(|f| (f.path.clone(), f.sha256.clone())).collect()
}

#[test]
fn rerun_hits_every_stage_and_reproduces_outputs() {
    let d = tempfile::tempdir().unwrap();
    let a = run_pipeline(&small(), &opts(d.path(), "a")).unwrap();
    assert!(a.stages.iter().all(|s| !s.cache_hit));
    let b = run_pipeline(&small(), &opts(d.path(), "b")).unwrap();
    assert!(b.recomputed().is_empty(), "recomputed {:?}", b.recomputed());
    assert_eq!(hashes(&a), hashes(&b));
    assert!(a.files.iter().any(|f| f.path.ends_with("summary.tsv")));
    // A cold cache reproduces the same bytes too.
    let c = run_pipeline(&small(), &RunOptions { cache_dir: d.path().join("cold"), out_dir: d.path().join("c") }).unwrap();
    assert_eq!(hashes(&a), hashes(&c));
    assert!(d.path().join("a").join(MANIFEST_FILE).is_file());
}

#[test]
fn changing_the_atom_count_reuses_the_atomic_stages() {
    let d = tempfile::tempdir().unwrap();
    run_pipeline(&small(), &opts(d.path(), "a")).unwrap();
    let mut cfg = small();
    cfg.preparation.atoms = 120;
    let m = run_pipeline(&cfg, &opts(d.path(), "b")).unwrap();
    for stage in ["atom", "propagate", "modes"] {
        assert!(m.stage(stage).unwrap().cache_hit, "{stage} should be reused");
    }
    for stage in ["prepare", "stats"] {
        assert!(!m.stage(stage).unwrap().cache_hit, "{stage} should be recomputed");
    }
    let mut cfg = small();
    cfg.atom.dx = 0.65;
    let m = run_pipeline(&cfg, &opts(d.path(), "c")).unwrap();
    assert!(!m.stage("atom").unwrap().cache_hit && !m.stage("propagate").unwrap().cache_hit);
    assert!(m.stage("prepare").unwrap().cache_hit);
}

#[test]
fn stage_failures_name_the_stage_and_keep_the_manifest() {
    let d = tempfile::tempdir().unwrap();
    let mut p = Pipeline::new(&small(), StageCache::new(d.path().join("cache")).unwrap()).unwrap();
    p.atom().unwrap();
    let cache = d.path().join("cache/atom");
    for e in std::fs::read_dir(&cache).unwrap() {
        std::fs::write(e.unwrap().path(), b"garbage").unwrap();
    }
    let err = run_pipeline(&small(), &opts(d.path(), "x")).unwrap_err();
    assert!(matches!(&err, Error::Stage { stage, .. } if stage == "atom"), "{err}");
    let text = std::fs::read_to_string(d.path().join("x").join(MANIFEST_FILE)).unwrap();
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(m["failed_stage"], "atom");
}

#[test]
fn configuration_errors_are_caught_before_any_work() {
    let bad = [
        ("[atom]\nwidth = 3", "width"),
        ("[pulse]\nE0 = \"60 furlongs\"", "furlongs"),
        ("[detection]\nharmonics = [15, 21]\npairs = [[15, 55]]", "pair"),
        ("[preparation]\nprotocol = \"sideways\"", "sideways"),
        ("[atom]\ndx = 1.5", "dx"),
    ];
    for (text, needle) in bad {
        let err = RunConfig::from_toml(text).and_then(|c| c.resolve().map(|_| ())).unwrap_err();
        assert!(err.to_string().contains(needle), "{text:?}: {err}");
    }
    let err = reproduce_figure("fig9", &FigureOptions { cache_dir: "unused".into(), out_dir: "unused".into(), base: small() }).unwrap_err();
    assert!(matches!(err, Error::Argument(_)));
}

#[test]
fn environment_overrides_use_block_and_key() {
    let vars = [("HHG_PREPARATION_N", "64"), ("HHG_PULSE_E0", "50 GV/m"), ("HHG_CACHE_DIR", "/elsewhere"), ("PATH", "/bin")];
    let cfg = RunConfig::from_toml_with_env(SMALL, vars).unwrap();
    assert_eq!(cfg.preparation.atoms, 64);
    assert_eq!(cfg.pulse.e0, Quantity::from("50 GV/m"));
    assert_eq!(cfg.atom, small().atom);
    let text = cfg.to_toml();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
}

#[test]
fn unit_tags_and_bare_numbers_resolve_alike() {
    let a = RunConfig::from_toml("[pulse]\nE0 = \"60 GV/m\"\nomega_d = \"1.55 eV\"").unwrap().resolve().unwrap();
    let e0 = 60.0 / hhg_core::units::FIELD_GV_PER_M;
    let w = 1.55 / hhg_core::units::HARTREE_EV;
    let b = RunConfig::from_toml(&format!("[pulse]\nE0 = {e0}\nomega_d = {w}")).unwrap().resolve().unwrap();
    assert!((a.pulse.e0 - b.pulse.e0).abs() < 1e-15 && (a.pulse.omega_d - b.pulse.omega_d).abs() < 1e-15);
}

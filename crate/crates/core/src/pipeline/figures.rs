//! Panel data for the figure scenarios. Each tag loads its parameter set on top of the
//! caller's atom, pulse and detection settings and writes plain tables (plus simple SVG).

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::cache::StageCache;
use super::config::{Preparation, Protocol, Quantity, RunConfig};
use super::run::{
    bloch_table, hash_tree, joint_pairs, joint_table, photon_table, pi2_state, prepare_state, profile_table, run_pipeline,
    wigner_table, FileRecord, Pipeline, RunOptions,
};
use crate::io::TextTable;
use crate::spin::{one_axis_twisting, superradiance_sweep, superradiant_peak_time, CollectiveState, LadderOp, TwistingParams};
use crate::stats::{centered_moments, g2_and_mandel, reconstruct, ModeStatistics, PhotonStatistics};
use crate::{svg, Error, Result};

pub const FIGURE_TAGS: [&str; 8] = ["fig2", "fig3", "fig4", "fig5", "figS4", "figS5", "figS6", "figS8"];

/// Atom count of the classical-limit and Dicke panels.
pub const STATE_PANEL_ATOMS: usize = 62000;
/// Atom count of the superradiance and twisting panels.
pub const SWEEP_ATOMS: usize = 37000;
/// Atom count used for Bloch-sphere Wigner views next to the large-N panels.
pub const BLOCH_VIEW_ATOMS: usize = 100;
const PANEL_HARMONICS: [u32; 3] = [15, 21, 55];
const FIG5_PAIRS: [[u32; 2]; 3] = [[15, 21], [21, 55], [15, 55]];

#[derive(Clone, Debug)]
pub struct FigureOptions {
    pub cache_dir: PathBuf,
    /// Panel data goes to `<out_dir>/<tag>/`.
    pub out_dir: PathBuf,
    /// Atom, pulse and detector settings; the tag overrides preparation and harmonics.
    pub base: RunConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct FigureReport {
    pub tag: String,
    pub dir: PathBuf,
    pub notes: Vec<String>,
    pub files: Vec<FileRecord>,
}

pub fn reproduce_figure(tag: &str, opts: &FigureOptions) -> Result<FigureReport> {
    let dir = opts.out_dir.join(tag);
    std::fs::create_dir_all(&dir)?;
    let mut notes = Vec::new();
    match tag {
        "fig2" => state_panels(opts, &dir, &[Protocol::Ground, Protocol::Pi2, Protocol::HalfDicke], false, &mut notes)?,
        "figS6" => state_panels(opts, &dir, &[Protocol::Ground, Protocol::Pi2, Protocol::HalfDicke, Protocol::Excited], false, &mut notes)?,
        "figS8" => state_panels(opts, &dir, &[Protocol::Ground, Protocol::Pi2, Protocol::HalfDicke], true, &mut notes)?,
        "fig3" => superradiance_panels(opts, &dir, false, &mut notes)?,
        "figS4" => superradiance_panels(opts, &dir, true, &mut notes)?,
        "fig4" => twisting_panels(opts, &dir, false, &mut notes)?,
        "figS5" => twisting_panels(opts, &dir, true, &mut notes)?,
        "fig5" => correlation_panels(opts, &dir, &mut notes)?,
        _ => {
            return Err(Error::Argument(format!("unknown figure `{tag}`; known: {}", FIGURE_TAGS.join(", "))));
        }
    }
    let report = FigureReport { tag: tag.to_string(), dir: dir.clone(), notes, files: hash_tree(&dir)? };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join("figure.json"), text + "\n")?;
    Ok(report)
}

fn base(opts: &FigureOptions) -> RunConfig {
    let mut c = opts.base.clone();
    c.detection.harmonics = PANEL_HARMONICS.to_vec();
    c.detection.pairs.clear();
    c.statistics.svg = true;
    c.twa.enabled = false;
    c
}

fn cache(opts: &FigureOptions) -> Result<StageCache> {
    StageCache::new(&opts.cache_dir)
}

/// One full pipeline run per initial condition at the state-panel atom count, plus a small-N Bloch view.
fn state_panels(opts: &FigureOptions, dir: &Path, protocols: &[Protocol], twa: bool, notes: &mut Vec<String>) -> Result<()> {
    let mut combined = TextTable::new([("state", ""), ("n", ""), ("nbar", ""), ("g2", ""), ("Q", ""), ("status", "")]);
    let mut twa_combined = TextTable::new([("state", ""), ("n", ""), ("nbar", ""), ("g2", ""), ("g2_err", ""), ("Q", ""), ("Q_err", "")]);
    for (i, &proto) in protocols.iter().enumerate() {
        let mut c = base(opts);
        c.preparation.protocol = proto;
        c.preparation.atoms = STATE_PANEL_ATOMS;
        c.twa.enabled = twa;
        let sub = dir.join(proto.name());
        if !twa {
            // TWA panels reuse the quantum stage outputs but do not duplicate them on disk.
            run_pipeline(&c, &RunOptions { cache_dir: opts.cache_dir.clone(), out_dir: sub.clone() })?;
            let small = prepare_state(&c.resolve()?.preparation.with_atoms(BLOCH_VIEW_ATOMS))?;
            bloch_table(&small.state)?
                .comment(format!("Bloch-sphere Wigner function at N = {BLOCH_VIEW_ATOMS}"))
                .write(&sub.join(format!("bloch_wigner_N{BLOCH_VIEW_ATOMS}.tsv")))?;
            let s = TextTable::read(&sub.join("stats/summary.tsv"))?;
            for c in s.comments.iter().filter(|c| c.starts_with("n = ")) {
                notes.push(format!("{}: {c}", proto.name()));
            }
            for r in &s.rows {
                combined.push(vec![i as f64, r[0], r[1], r[2], r[3], r[5]]);
            }
        } else {
            let mut p = Pipeline::new(&c, cache(opts)?)?;
            let b = p.twa()?.expect("twa enabled");
            b.write_to(&sub)?;
            let s = TextTable::parse(b.get("twa/summary.tsv").expect("summary written"))?;
            for r in &s.rows {
                twa_combined.push(vec![i as f64, r[0], r[1], r[3], r[4], r[5], r[6]]);
            }
        }
        combined = combined.comment(format!("state {i} = {}", proto.name()));
        twa_combined = twa_combined.comment(format!("state {i} = {}", proto.name()));
    }
    if twa {
        twa_combined.comment(format!("N = {STATE_PANEL_ATOMS}")).write(&dir.join("twa_summary.tsv"))
    } else {
        combined.comment(format!("N = {STATE_PANEL_ATOMS}")).write(&dir.join("summary.tsv"))
    }
}

fn second_order_row(ops: &[LadderOp], state: &CollectiveState, row: &mut Vec<f64>) -> Result<()> {
    for op in ops {
        let so = g2_and_mandel(&centered_moments(op, state, 2)?)?;
        row.extend([so.nbar, so.g2, so.mandel_q]);
    }
    Ok(())
}

fn sweep_columns(first: [(&'static str, &'static str); 2]) -> Vec<(String, String)> {
    let mut cols: Vec<(String, String)> = first.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    for h in PANEL_HARMONICS {
        for q in ["nbar", "g2", "Q"] {
            cols.push((format!("{q}_{h}"), String::new()));
        }
    }
    cols
}

/// Reconstructs each harmonic at one state and writes the Wigner/photon files under `dir`.
/// Failures are noted rather than fatal, matching the stats stage.
fn panel_reconstructions(
    ops: &[LadderOp],
    state: &CollectiveState,
    p: &Pipeline,
    dir: &Path,
    label: &str,
    notes: &mut Vec<String>,
) -> Result<Vec<Option<ModeStatistics>>> {
    std::fs::create_dir_all(dir)?;
    let r = &p.resolved;
    let mut out = Vec::new();
    for (op, &h) in ops.iter().zip(&r.harmonics) {
        match reconstruct(op, state, &r.policy, &r.phase_grid) {
            Ok(ms) => {
                photon_table(&ms.photons).write(&dir.join(format!("photons_n{h}.tsv")))?;
                wigner_table(&ms.wigner).write(&dir.join(format!("wigner_n{h}.tsv")))?;
                let w = &ms.wigner;
                std::fs::write(dir.join(format!("wigner_n{h}.svg")), svg::heatmap(&w.re, &w.im, &w.w, &format!("{label}, harmonic {h}"), "Re alpha", "Im alpha"))?;
                out.push(Some(ms));
            }
            Err(e) => {
                notes.push(format!("{label}, n = {h}: {e}"));
                out.push(None);
            }
        }
    }
    Ok(out)
}

fn poisson(nbar: f64, len: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(len);
    let mut v = (-nbar).exp();
    for k in 0..len {
        p.push(v);
        v *= nbar / (k + 1) as f64;
    }
    p
}

fn photons_with_poisson(p: &PhotonStatistics) -> TextTable {
    let fit = poisson(p.mean(), p.p.len());
    let l1: f64 = p.p.iter().zip(&fit).map(|(a, b)| (a - b).abs()).sum();
    let mut t = TextTable::new([("k", ""), ("p_k", ""), ("poisson", "")])
        .comment(format!("Poisson with the same mean {}; L1 distance {l1}", p.mean()));
    for (k, (a, b)) in p.p.iter().zip(&fit).enumerate() {
        t.push(vec![k as f64, *a, *b]);
    }
    t
}

/// Superradiant decay at γN = 0.1 swept over hold times 0..3 t_m.
fn superradiance_panels(opts: &FigureOptions, dir: &Path, photons_only: bool, notes: &mut Vec<String>) -> Result<()> {
    let n = SWEEP_ATOMS;
    let mut c = base(opts);
    c.preparation.protocol = Protocol::Superradiance;
    c.preparation.atoms = n;
    c.preparation.gamma_n = Some(0.1);
    let mut p = Pipeline::new(&c, cache(opts)?)?;
    let ops = p.operators()?;
    let Preparation::Superradiance { gamma, .. } = p.resolved.preparation else { unreachable!("set above") };
    let t_m = superradiant_peak_time(gamma, n);
    let fractions: Vec<f64> = (0..=30).map(|i| i as f64 * 0.1).collect();
    let selected = [0.5, 1.0, 2.0];
    let holds: Vec<f64> = fractions.iter().chain(&selected).map(|f| f * t_m).collect();
    let (states, profile) = superradiance_sweep(gamma, n, &holds, None)?;

    if !photons_only {
        let mut sweep = TextTable::new(sweep_columns([("t_h/t_m", ""), ("t_h", "au")]))
            .comment(format!("superradiance, N = {n}, gamma N = 0.1, t_m = log N/(4 gamma N) = {t_m}"));
        let mut g2_curves: Vec<Vec<f64>> = vec![Vec::new(); ops.len()];
        for (f, st) in fractions.iter().zip(&states) {
            let mut row = vec![*f, f * t_m];
            second_order_row(&ops, st, &mut row)?;
            for (k, curve) in g2_curves.iter_mut().enumerate() {
                curve.push(row[3 + 3 * k]);
            }
            sweep.push(row);
        }
        sweep.write(&dir.join("sweep.tsv"))?;
        let labels = ["n=15", "n=21", "n=55"];
        let series: Vec<svg::Series<'_>> = labels.iter().zip(&g2_curves).map(|(l, y)| svg::Series { label: l, x: &fractions, y }).collect();
        std::fs::write(dir.join("g2_sweep.svg"), svg::line_plot(&series, false, "g2 vs hold time", "t_h/t_m", "g2"))?;
        profile_table(&profile, 4000)
            .comment(format!("log N/(4 gamma N) = {t_m}"))
            .write(&dir.join("profile.tsv"))?;
        std::fs::write(
            dir.join("profile.svg"),
            svg::line_plot(&[svg::Series { label: "I(t)", x: &profile.times, y: &profile.intensity }], false, "superradiant intensity", "t", "I"),
        )?;
    }
    for (f, st) in selected.iter().zip(&states[fractions.len()..]) {
        let sub = dir.join(format!("t_h_{f}tm"));
        let label = format!("t_h = {f} t_m");
        let rec = panel_reconstructions(&ops, st, &p, &sub, &label, notes)?;
        if photons_only {
            for (ms, h) in rec.iter().zip(PANEL_HARMONICS) {
                if let Some(ms) = ms {
                    photons_with_poisson(&ms.photons).write(&sub.join(format!("photons_poisson_n{h}.tsv")))?;
                }
            }
        }
    }
    Ok(())
}

/// Hold times in units of 2π/ω0 for the twisting sweep.
fn twisting_state(right: &CollectiveState, omega0: f64, omega_j: f64, cycles: f64) -> Result<CollectiveState> {
    one_axis_twisting(right, &TwistingParams { omega0, omega_j, t_h: cycles * 2.0 * std::f64::consts::PI / omega0 })
}

fn twisting_setup(opts: &FigureOptions, pairs: bool) -> Result<(Pipeline, f64, f64)> {
    let mut c = base(opts);
    c.preparation.protocol = Protocol::Twisting;
    c.preparation.atoms = SWEEP_ATOMS;
    c.preparation.omega0 = Quantity::Number(0.49);
    c.preparation.omega_j = "2.7 eV".into();
    if pairs {
        c.detection.pairs = FIG5_PAIRS.to_vec();
    }
    let p = Pipeline::new(&c, cache(opts)?)?;
    let Preparation::Twisting { omega0, omega_j, .. } = p.resolved.preparation else { unreachable!("set above") };
    Ok((p, omega0, omega_j))
}

/// One-axis twisting at ω_J = 2.7 eV, N = 37000, hold times ω0 t_h/2π ∈ [0, 120], with the |N/2⟩ reference.
fn twisting_panels(opts: &FigureOptions, dir: &Path, photons_only: bool, notes: &mut Vec<String>) -> Result<()> {
    let (mut p, omega0, omega_j) = twisting_setup(opts, false)?;
    let ops = p.operators()?;
    let right = pi2_state(SWEEP_ATOMS)?;
    if !photons_only {
        let cycles: Vec<f64> = (0..=120).map(f64::from).collect();
        let mut sweep = TextTable::new(sweep_columns([("omega0 t_h/2pi", ""), ("t_h", "au")]))
            .comment(format!("one-axis twisting, N = {SWEEP_ATOMS}, omega_J = 2.7 eV, omega0 = {omega0}"));
        let mut g2_curves: Vec<Vec<f64>> = vec![Vec::new(); ops.len()];
        for &x in &cycles {
            let st = twisting_state(&right, omega0, omega_j, x)?;
            let mut row = vec![x, x * 2.0 * std::f64::consts::PI / omega0];
            second_order_row(&ops, &st, &mut row)?;
            for (k, curve) in g2_curves.iter_mut().enumerate() {
                curve.push(row[3 + 3 * k]);
            }
            sweep.push(row);
        }
        sweep.write(&dir.join("sweep.tsv"))?;
        let labels = ["n=15", "n=21", "n=55"];
        let series: Vec<svg::Series<'_>> = labels.iter().zip(&g2_curves).map(|(l, y)| svg::Series { label: l, x: &cycles, y }).collect();
        std::fs::write(dir.join("g2_sweep.svg"), svg::line_plot(&series, false, "g2 vs hold time", "omega0 t_h/2pi", "g2"))?;
    }
    let half = CollectiveState::half_dicke(SWEEP_ATOMS)?;
    let reference = panel_reconstructions(&ops, &half, &p, &dir.join("half_dicke"), "|N/2>", notes)?;
    let mut l1 = TextTable::new([("omega0 t_h/2pi", ""), ("L1_15", ""), ("L1_21", ""), ("L1_55", "")])
        .comment("L1 distance between the photon statistics and those of |N/2>; NaN where a reconstruction failed");
    for x in [0.0, 10.0, 30.0, 120.0] {
        let st = twisting_state(&right, omega0, omega_j, x)?;
        let sub = dir.join(format!("cycles_{x}"));
        let rec = panel_reconstructions(&ops, &st, &p, &sub, &format!("omega0 t_h/2pi = {x}"), notes)?;
        let mut row = vec![x];
        for (a, b) in rec.iter().zip(&reference) {
            row.push(match (a, b) {
                (Some(a), Some(b)) => a.photons.l1_distance(&b.photons),
                _ => f64::NAN,
            });
        }
        l1.push(row);
        if !photons_only {
            let small = twisting_state(&pi2_state(BLOCH_VIEW_ATOMS)?, omega0, omega_j, x)?;
            bloch_table(&small)?
                .comment(format!("Bloch-sphere Wigner function at N = {BLOCH_VIEW_ATOMS} (same omega_J/N scaling)"))
                .write(&sub.join(format!("bloch_wigner_N{BLOCH_VIEW_ATOMS}.tsv")))?;
        }
    }
    l1.write(&dir.join("l1_to_half_dicke.tsv"))?;
    Ok(())
}

/// Pearson coefficient and mutual information of harmonic pairs along the twisting sweep.
fn correlation_panels(opts: &FigureOptions, dir: &Path, notes: &mut Vec<String>) -> Result<()> {
    let (mut p, omega0, omega_j) = twisting_setup(opts, true)?;
    let ops = p.operators()?;
    let right = pi2_state(SWEEP_ATOMS)?;
    let pairs: Vec<(u32, u32)> = FIG5_PAIRS.iter().map(|[a, b]| (*a, *b)).collect();
    let mut cols: Vec<(String, String)> = vec![("omega0 t_h/2pi".into(), String::new())];
    for (a, b) in &pairs {
        cols.push((format!("c_{a}_{b}"), String::new()));
        cols.push((format!("c_table_{a}_{b}"), String::new()));
        cols.push((format!("I_{a}_{b}"), "nats".into()));
    }
    let mut sweep = TextTable::new(cols)
        .comment(format!("one-axis twisting, N = {SWEEP_ATOMS}, omega_J = 2.7 eV, omega0 = {omega0}"))
        .comment("c from second-order joint moments; c_table and I from the joint photon distribution");
    let tables_at = [0.0, 30.0, 120.0];
    for x in (0..=24).map(|i| 5.0 * i as f64) {
        let st = twisting_state(&right, omega0, omega_j, x)?;
        let mut row = vec![x];
        for (&(a, b), (c, t)) in pairs.iter().zip(joint_pairs(&ops, &PANEL_HARMONICS, &pairs, &st)) {
            row.push(c);
            match t {
                Ok(t) => {
                    row.extend([t.pearson, t.mutual_information]);
                    if tables_at.contains(&x) {
                        joint_table(&t).write(&dir.join(format!("joint_{a}_{b}_cycles_{x}.tsv")))?;
                    }
                }
                Err(e) => {
                    notes.push(format!("({a}, {b}) at omega0 t_h/2pi = {x}: {e}"));
                    row.extend([f64::NAN, f64::NAN]);
                }
            }
        }
        sweep.push(row);
    }
    sweep.write(&dir.join("joint_sweep.tsv"))?;
    Ok(())
}

//! Stage driver: atom → propagate → modes → prepare → spectrum → stats → twa.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::cache::{Bundle, StageCache, StageKey};
use super::config::{unit_constants, Preparation, Resolved, RunConfig};
use crate::atom::{self, AtomicSpectrum};
use crate::bloch::{atomic_wigner_bloch, phi_grid, theta_grid, MAX_BLOCH_ATOMS};
use crate::io::{Cacheable, Decoder, Encoder, TextTable, FORMAT_VERSION};
use crate::modes::{build_modes, pauli_decompose, photonic_operator, HarmonicMode};
use crate::propagation::{emission_spectrum, propagate_dipole, spectral_dipole, DynamicalMatrixSeries, SpectralDipole};
use crate::spin::{
    one_axis_twisting, rotation_pulse, superradiance_evolve, Axis, CollectiveState, LadderOp, SpinSpace, SuperradianceParams,
    SuperradianceProfile, TwistingParams,
};
use crate::stats::{
    centered_moments, g2_and_mandel, joint_moments, joint_statistics, joint_statistics_krylov_pairs, pearson_from_moments,
    photon_cutoff, reconstruct, JointStatistics, ModeStatistics, PhotonStatistics, WignerGrid, MAX_ORDER,
};
use crate::twa::{classical_fields, classical_joint, classical_statistics, fit_theta_distribution, sample_initial_conditions};
use crate::{svg, Error, Result};

/// Where a run reads its cache and writes its outputs.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub key: String,
    pub cache_hit: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub crate_version: String,
    pub format_version: String,
    pub config: RunConfig,
    pub constants: serde_json::Value,
    pub seed: Option<u64>,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    /// Stages that were computed rather than loaded.
    pub fn recomputed(&self) -> Vec<&str> {
        self.stages.iter().filter(|s| !s.cache_hit).map(|s| s.stage.as_str()).collect()
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// A prepared collective state with the decay profile of superradiant preparations.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub state: CollectiveState,
    pub profile: Option<SuperradianceProfile>,
}

impl Cacheable for Prepared {
    const KIND: &'static str = "prepared-state";
    fn encode(&self, e: &mut Encoder) {
        self.state.encode(e);
        match &self.profile {
            Some(p) => {
                e.u64(1);
                e.f64s(&p.times);
                e.f64s(&p.sz);
                e.f64s(&p.intensity);
            }
            None => e.u64(0),
        }
    }
    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let state = CollectiveState::decode(d)?;
        let profile = match d.u64()? {
            0 => None,
            1 => Some(SuperradianceProfile { times: d.f64s()?, sz: d.f64s()?, intensity: d.f64s()? }),
            t => return Err(Error::Format(format!("bad profile tag {t}"))),
        };
        Ok(Prepared { state, profile })
    }
}

/// |⇒⟩ from |⇓⟩; a rotation by −π/2 about y under the exp(−iθS/2) convention.
pub fn pi2_state(n: usize) -> Result<CollectiveState> {
    rotation_pulse(&CollectiveState::ground(n), Axis::Y, -std::f64::consts::FRAC_PI_2)
}

pub fn prepare_state(p: &Preparation) -> Result<Prepared> {
    let plain = |state| Ok(Prepared { state, profile: None });
    match *p {
        Preparation::Ground { atoms } => plain(CollectiveState::ground(atoms)),
        Preparation::Excited { atoms } => plain(CollectiveState::excited(atoms)),
        Preparation::Pi2 { atoms } => plain(pi2_state(atoms)?),
        Preparation::HalfDicke { atoms } => plain(CollectiveState::half_dicke(atoms)?),
        Preparation::Dicke { atoms, k } => plain(CollectiveState::dicke(atoms, k)),
        Preparation::Coherent { atoms, theta, phi } => plain(CollectiveState::coherent(atoms, theta, phi)),
        Preparation::Twisting { atoms, omega0, omega_j, t_h } => {
            plain(one_axis_twisting(&pi2_state(atoms)?, &TwistingParams { omega0, omega_j, t_h })?)
        }
        Preparation::Superradiance { atoms, gamma, t_h } => {
            let (state, profile) = superradiance_evolve(&SuperradianceParams { gamma, t_h, dt_ode: None }, atoms)?;
            Ok(Prepared { state, profile: Some(profile) })
        }
    }
}

fn timed<T: Cacheable>(
    cache: &StageCache,
    records: &mut Vec<StageRecord>,
    stage: &str,
    key: StageKey,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let t = Instant::now();
    let wrap = |e: Error| match e {
        Error::Stage { .. } => e,
        e => Error::Stage { stage: stage.to_string(), source: Box::new(e) },
    };
    let (v, hit) = cache.get_or_compute(stage, &key, f).map_err(wrap)?;
    records.push(StageRecord { stage: stage.to_string(), key: key.hex(), cache_hit: hit, seconds: t.elapsed().as_secs_f64() });
    Ok(v)
}

/// One configured run; each stage is computed at most once and goes through the cache.
pub struct Pipeline {
    pub config: RunConfig,
    pub resolved: Resolved,
    cache: StageCache,
    records: Vec<StageRecord>,
    atom: Option<(StageKey, AtomicSpectrum)>,
    series: Option<(StageKey, DynamicalMatrixSeries)>,
    modes: Option<(StageKey, Vec<HarmonicMode>)>,
    dense: Option<(StageKey, SpectralDipole)>,
    prepared: Option<(StageKey, Prepared)>,
}

impl Pipeline {
    pub fn new(config: &RunConfig, cache: StageCache) -> Result<Self> {
        let resolved = config.resolve()?;
        Ok(Pipeline {
            config: config.clone(),
            resolved,
            cache,
            records: Vec::new(),
            atom: None,
            series: None,
            modes: None,
            dense: None,
            prepared: None,
        })
    }

    pub fn records(&self) -> &[StageRecord] {
        &self.records
    }

    pub fn atom_key(&self) -> StageKey {
        let r = &self.resolved;
        StageKey::new(
            "atom",
            &json!({"L": r.grid.l, "dx": r.grid.dx, "x0": r.grid.x0, "a": r.potential.a, "cab": r.potential.cab}),
            &[],
        )
    }

    pub fn propagate_key(&self) -> StageKey {
        let r = &self.resolved;
        let subset = json!({
            "E0": r.pulse.e0, "omega_d": r.pulse.omega_d, "n_cycles": r.pulse.n_cycles,
            "dt": r.propagation.dt, "t_f": r.propagation.t_f, "stepper": r.propagation.stepper,
        });
        StageKey::new("propagate", &subset, &[self.atom_key()])
    }

    pub fn modes_key(&self) -> StageKey {
        let r = &self.resolved;
        let subset = json!({"harmonics": r.harmonics, "domega": r.detector.domega, "solid_angle": r.detector.solid_angle});
        StageKey::new("modes", &subset, &[self.propagate_key()])
    }

    fn dense_key(&self) -> StageKey {
        let r = &self.resolved;
        let subset = json!({"max_order": r.spectrum_max_order, "per_order": r.spectrum_points_per_order});
        StageKey::new("spectral-dipole", &subset, &[self.propagate_key()])
    }

    pub fn prepare_key(&self) -> StageKey {
        StageKey::new("prepare", &serde_json::to_value(&self.resolved.preparation).expect("serializes"), &[])
    }

    fn spectrum_key(&self) -> StageKey {
        StageKey::new("spectrum", &json!({}), &[self.dense_key(), self.prepare_key()])
    }

    fn stats_key(&self) -> StageKey {
        let r = &self.resolved;
        let subset = json!({
            "policy": r.policy, "grid_points": r.phase_grid.points, "half_width": r.phase_grid.half_width,
            "pairs": r.pairs, "strict": r.strict, "svg": r.svg,
        });
        StageKey::new("stats", &subset, &[self.modes_key(), self.prepare_key()])
    }

    fn twa_key(&self) -> Option<StageKey> {
        let t = self.resolved.twa.as_ref()?;
        let r = &self.resolved;
        let subset = json!({
            "R": t.trajectories, "seed": t.seed, "scatter": t.scatter, "pairs": r.pairs,
            "grid_points": r.phase_grid.points, "half_width": r.phase_grid.half_width,
        });
        Some(StageKey::new("twa", &subset, &[self.modes_key(), self.prepare_key()]))
    }

    pub fn atom(&mut self) -> Result<&AtomicSpectrum> {
        if self.atom.is_none() {
            let key = self.atom_key();
            let (g, p) = (self.resolved.grid, self.resolved.potential);
            let v = timed(&self.cache, &mut self.records, "atom", key, || atom::solve_atom(&g, &p))?;
            self.atom = Some((key, v));
        }
        Ok(&self.atom.as_ref().expect("set above").1)
    }

    pub fn propagate(&mut self) -> Result<&DynamicalMatrixSeries> {
        if self.series.is_none() {
            let key = self.propagate_key();
            let v = if self.cache.contains("propagate", &key) {
                timed(&self.cache, &mut self.records, "propagate", key, || unreachable!("cache hit"))?
            } else {
                self.atom()?;
                let spectrum = &self.atom.as_ref().expect("atom computed").1;
                let (pulse, cfg) = (self.resolved.pulse, self.resolved.propagation);
                timed(&self.cache, &mut self.records, "propagate", key, || propagate_dipole(spectrum, &pulse, &cfg))?
            };
            self.series = Some((key, v));
        }
        Ok(&self.series.as_ref().expect("set above").1)
    }

    pub fn modes(&mut self) -> Result<&[HarmonicMode]> {
        if self.modes.is_none() {
            let key = self.modes_key();
            let v = if self.cache.contains("modes", &key) {
                timed(&self.cache, &mut self.records, "modes", key, || unreachable!("cache hit"))?
            } else {
                self.propagate()?;
                let series = &self.series.as_ref().expect("propagated").1;
                let r = &self.resolved;
                timed(&self.cache, &mut self.records, "modes", key, || {
                    let omegas: Vec<f64> = r.harmonics.iter().map(|&h| h as f64 * r.pulse.omega_d).collect();
                    let d = spectral_dipole(series, &omegas)?;
                    build_modes(&d, &r.harmonics, &r.detector, r.pulse.omega_d)
                })?
            };
            self.modes = Some((key, v));
        }
        Ok(&self.modes.as_ref().expect("set above").1)
    }

    fn dense_dipole(&mut self) -> Result<&SpectralDipole> {
        if self.dense.is_none() {
            let key = self.dense_key();
            let v = if self.cache.contains("spectral-dipole", &key) {
                timed(&self.cache, &mut self.records, "spectral-dipole", key, || unreachable!("cache hit"))?
            } else {
                self.propagate()?;
                let series = &self.series.as_ref().expect("propagated").1;
                let omegas = self.resolved.spectrum_frequencies();
                timed(&self.cache, &mut self.records, "spectral-dipole", key, || spectral_dipole(series, &omegas))?
            };
            self.dense = Some((key, v));
        }
        Ok(&self.dense.as_ref().expect("set above").1)
    }

    pub fn prepare(&mut self) -> Result<&Prepared> {
        if self.prepared.is_none() {
            let key = self.prepare_key();
            let prep = self.resolved.preparation.clone();
            let v = timed(&self.cache, &mut self.records, "prepare", key, || prepare_state(&prep))?;
            self.prepared = Some((key, v));
        }
        Ok(&self.prepared.as_ref().expect("set above").1)
    }

    /// Photonic operators of the configured harmonics on the prepared state's ladder.
    pub fn operators(&mut self) -> Result<Vec<LadderOp>> {
        let space = SpinSpace::new(self.resolved.preparation.atoms())?;
        Ok(self.modes()?.iter().map(|m| photonic_operator(&m.dn, space)).collect())
    }

    pub fn spectrum(&mut self) -> Result<Bundle> {
        let key = self.spectrum_key();
        if !self.cache.contains("spectrum", &key) {
            self.dense_dipole()?;
            self.prepare()?;
        }
        let (dense, prepared) = (self.dense.as_ref().map(|d| &d.1), self.prepared.as_ref().map(|p| &p.1));
        let (omega_d, svg_on) = (self.resolved.pulse.omega_d, self.resolved.svg);
        timed(&self.cache, &mut self.records, "spectrum", key, || {
            let (dense, prepared) = (dense.expect("computed on miss"), prepared.expect("computed on miss"));
            spectrum_bundle(dense, &prepared.state, omega_d, svg_on)
        })
    }

    pub fn stats(&mut self) -> Result<Bundle> {
        let key = self.stats_key();
        let ops = if self.cache.contains("stats", &key) {
            Vec::new()
        } else {
            self.prepare()?;
            self.operators()?
        };
        let prepared = self.prepared.as_ref().map(|p| &p.1);
        let r = &self.resolved;
        timed(&self.cache, &mut self.records, "stats", key, || {
            stats_bundle(r, &ops, &prepared.expect("computed on miss").state)
        })
    }

    pub fn twa(&mut self) -> Result<Option<Bundle>> {
        let Some(key) = self.twa_key() else { return Ok(None) };
        if !self.cache.contains("twa", &key) {
            self.modes()?;
        }
        let modes = self.modes.as_ref().map(|m| m.1.as_slice()).unwrap_or(&[]);
        let r = &self.resolved;
        timed(&self.cache, &mut self.records, "twa", key, || twa_bundle(r, modes)).map(Some)
    }

    pub fn write_atom(&mut self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out)?;
        atom_table(self.atom()?).write(&out.join("atom_levels.tsv"))
    }

    pub fn write_modes(&mut self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out)?;
        let n = self.resolved.preparation.atoms();
        modes_table(self.modes()?, n).write(&out.join("modes.tsv"))
    }

    pub fn write_prepare(&mut self, out: &Path) -> Result<()> {
        prepare_bundle(self.prepare()?).write_to(out)?;
        Ok(())
    }

    /// Writes the text outputs of every stage under `out`.
    pub fn write_all(&mut self, out: &Path) -> Result<()> {
        self.write_atom(out)?;
        self.propagate()?;
        self.write_modes(out)?;
        self.write_prepare(out)?;
        self.spectrum()?.write_to(out)?;
        self.stats()?.write_to(out)?;
        if let Some(b) = self.twa()? {
            b.write_to(out)?;
        }
        Ok(())
    }

    pub fn manifest(&self, out: &Path, error: Option<&Error>) -> Result<Manifest> {
        let failed_stage = match error {
            Some(Error::Stage { stage, .. }) => Some(stage.clone()),
            _ => None,
        };
        let (a, b, c) = FORMAT_VERSION;
        Ok(Manifest {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: format!("{a}.{b}.{c}"),
            config: self.config.clone(),
            constants: unit_constants(),
            seed: self.resolved.twa.as_ref().map(|t| t.seed),
            stages: self.records.clone(),
            files: hash_tree(out)?,
            failed_stage,
            error: error.map(|e| e.to_string()),
        })
    }
}

/// Hashes every file below `dir` except the manifest, in path order.
pub fn hash_tree(dir: &Path) -> Result<Vec<FileRecord>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path().strip_prefix(dir).expect("below dir").to_string_lossy().replace('\\', "/");
        if path == MANIFEST_FILE {
            continue;
        }
        let bytes = std::fs::read(entry.path())?;
        let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        out.push(FileRecord { path, sha256, bytes: bytes.len() as u64 });
    }
    Ok(out)
}

pub fn write_manifest(m: &Manifest, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let text = serde_json::to_string_pretty(m).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(out.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}

/// Runs every stage, writes outputs and the manifest. On a stage failure the manifest records
/// the failing stage and the error is returned; completed stages stay cached.
pub fn run_pipeline(config: &RunConfig, opts: &RunOptions) -> Result<Manifest> {
    let mut p = Pipeline::new(config, StageCache::new(&opts.cache_dir)?)?;
    let result = p.write_all(&opts.out_dir);
    let m = p.manifest(&opts.out_dir, result.as_ref().err())?;
    write_manifest(&m, &opts.out_dir)?;
    result.map(|_| m)
}

pub fn atom_table(a: &AtomicSpectrum) -> TextTable {
    let mut t = TextTable::new([("index", ""), ("Re w", "Ha"), ("Im w", "Ha")])
        .comment(format!("levels M = {}, L = {}, dx = {}", a.energies.len(), a.grid.l, a.grid.dx));
    for (i, e) in a.energies.iter().enumerate() {
        t.push(vec![i as f64, e.re, e.im]);
    }
    t
}

pub fn modes_table(modes: &[HarmonicMode], atoms: usize) -> TextTable {
    let mut t = TextTable::new([
        ("n", ""),
        ("Re d11", "au"),
        ("Im d11", "au"),
        ("Re d12", "au"),
        ("Im d12", "au"),
        ("Re d21", "au"),
        ("Im d21", "au"),
        ("Re d22", "au"),
        ("Im d22", "au"),
        ("Re alpha/N", "au"),
        ("Im alpha/N", "au"),
        ("u_x", "au"),
        ("u_y", "au"),
        ("u_z", "au"),
        ("v_x", "au"),
        ("v_y", "au"),
        ("v_z", "au"),
    ]);
    for m in modes {
        let pd = pauli_decompose(&m.dn, atoms);
        let a = pd.alpha / atoms as f64;
        let mut row = vec![m.n as f64];
        for z in m.dn.iter().flatten() {
            row.extend([z.re, z.im]);
        }
        row.extend([a.re, a.im]);
        row.extend(pd.u);
        row.extend(pd.v);
        t.push(row);
    }
    t
}

fn state_table(state: &CollectiveState) -> TextTable {
    let n = state.atoms();
    let sz = |k: usize| 2.0 * k as f64 - n as f64;
    match state {
        CollectiveState::Pure(v) => {
            let mut t = TextTable::new([("k", ""), ("S_z", ""), ("Re psi", ""), ("Im psi", "")])
                .comment(format!("pure state, N = {n}; zero amplitudes omitted"));
            for (k, z) in v.iter().enumerate().filter(|(_, z)| z.norm_sqr() > 0.0) {
                t.push(vec![k as f64, sz(k), z.re, z.im]);
            }
            t
        }
        CollectiveState::Mixed(p) => {
            let mut t = TextTable::new([("k", ""), ("S_z", ""), ("p", "")])
                .comment(format!("diagonal state, N = {n}; zero populations omitted"));
            for (k, x) in p.iter().enumerate().filter(|(_, x)| **x > 0.0) {
                t.push(vec![k as f64, sz(k), *x]);
            }
            t
        }
    }
}

/// Profile rows, thinned to at most `max_rows` evenly strided samples.
pub fn profile_table(p: &SuperradianceProfile, max_rows: usize) -> TextTable {
    let mut t = TextTable::new([("t", "au"), ("S_z", ""), ("I", "au")]).comment(format!("peak time {}", p.peak_time()));
    let stride = p.times.len().div_ceil(max_rows.max(1)).max(1);
    for i in (0..p.times.len()).step_by(stride) {
        t.push(vec![p.times[i], p.sz[i], p.intensity[i]]);
    }
    t
}

pub fn bloch_table(state: &CollectiveState) -> Result<TextTable> {
    let (th, ph) = (theta_grid(61), phi_grid(120));
    let w = atomic_wigner_bloch(state, &th, &ph)?;
    let mut t = TextTable::new([("theta", "rad"), ("phi", "rad"), ("W", "")]);
    for (i, &a) in th.iter().enumerate() {
        for (j, &b) in ph.iter().enumerate() {
            t.push(vec![a, b, w.w[i][j]]);
        }
    }
    Ok(t)
}

fn prepare_bundle(p: &Prepared) -> Bundle {
    let mut b = Bundle::default();
    b.add("prepare/state.tsv", state_table(&p.state).render());
    if let Some(prof) = &p.profile {
        b.add("prepare/profile.tsv", profile_table(prof, 4000).render());
    }
    if p.state.atoms() <= MAX_BLOCH_ATOMS {
        // The Bloch grid is a convenience view; states it cannot represent are simply skipped.
        if let Ok(t) = bloch_table(&p.state) {
            b.add("prepare/bloch_wigner.tsv", t.render());
        }
    }
    b
}

fn spectrum_bundle(dense: &SpectralDipole, state: &CollectiveState, omega_d: f64, svg_on: bool) -> Result<Bundle> {
    let s = emission_spectrum(dense, state)?;
    let x: Vec<f64> = dense.frequencies.iter().map(|w| w / omega_d).collect();
    let mut t = TextTable::new([("omega/omega_d", ""), ("dE/domega", "au")]);
    for (a, b) in x.iter().zip(&s) {
        t.push(vec![*a, *b]);
    }
    let mut out = Bundle::default();
    out.add("spectrum.tsv", t.render());
    if svg_on {
        out.add("spectrum.svg", svg::line_plot(&[svg::Series { label: "emission", x: &x, y: &s }], true, "emission spectrum", "omega/omega_d", "dE/domega"));
    }
    Ok(out)
}

pub fn photon_table(p: &PhotonStatistics) -> TextTable {
    let mut t = TextTable::new([("k", ""), ("p_k", "")]);
    for (k, x) in p.p.iter().enumerate() {
        t.push(vec![k as f64, *x]);
    }
    t
}

pub fn wigner_table(w: &WignerGrid) -> TextTable {
    let mut t = TextTable::new([("Re alpha", ""), ("Im alpha", ""), ("W", "")]);
    for (i, &y) in w.im.iter().enumerate() {
        for (j, &x) in w.re.iter().enumerate() {
            t.push(vec![x, y, w.w[i * w.re.len() + j]]);
        }
    }
    t
}

pub fn joint_table(j: &JointStatistics) -> TextTable {
    let mut t = TextTable::new([("n", ""), ("m", ""), ("p_nm", "")]).comment("entries below 1e-15 omitted");
    for (n, row) in j.p.iter().enumerate() {
        for (m, x) in row.iter().enumerate().filter(|(_, x)| **x >= 1e-15) {
            t.push(vec![n as f64, m as f64, *x]);
        }
    }
    t
}

/// Pearson coefficient from low-order moments plus the joint table, by the Krylov route
/// for pure states and moment inversion for diagonal ones.
pub fn joint_pairs(ops: &[LadderOp], harmonics: &[u32], pairs: &[(u32, u32)], state: &CollectiveState) -> Vec<(f64, Result<JointStatistics>)> {
    let idx = |h: u32| harmonics.iter().position(|&x| x == h).expect("pairs validated against harmonics");
    let ix: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (idx(a), idx(b))).collect();
    let pearson: Vec<f64> = ix
        .iter()
        .map(|&(i, j)| joint_moments(&ops[i], &ops[j], state, 2, 2).and_then(|m| pearson_from_moments(&m)).unwrap_or(f64::NAN))
        .collect();
    let nbar = |op: &LadderOp| centered_moments(op, state, 1).map(|t| t.unshifted().nbar());
    let tables: Vec<Result<JointStatistics>> = match state {
        CollectiveState::Pure(_) => {
            let cut: Result<Vec<usize>> = ops.iter().map(|op| nbar(op).map(photon_cutoff)).collect();
            match cut.and_then(|c| joint_statistics_krylov_pairs(ops, &c, &ix, state)) {
                Ok(v) => v.into_iter().map(Ok).collect(),
                Err(e) => ix.iter().map(|_| Err(Error::Numerical(e.to_string()))).collect(),
            }
        }
        CollectiveState::Mixed(_) => ix
            .iter()
            .map(|&(i, j)| {
                let ka = photon_cutoff(nbar(&ops[i])?).min(MAX_ORDER);
                let kb = photon_cutoff(nbar(&ops[j])?).min(MAX_ORDER);
                joint_statistics(&joint_moments(&ops[i], &ops[j], state, ka, kb)?)
            })
            .collect(),
    };
    pearson.into_iter().zip(tables).collect()
}

fn stats_bundle(r: &Resolved, ops: &[LadderOp], state: &CollectiveState) -> Result<Bundle> {
    let mut out = Bundle::default();
    let mut summary = TextTable::new([
        ("n", ""),
        ("nbar", ""),
        ("g2", ""),
        ("Q", ""),
        ("m_max", ""),
        ("status", ""),
        ("W_min", ""),
        ("W_norm", ""),
    ])
    .comment("nbar, g2 and Q from normally ordered moments up to second order")
    .comment("status: 1 converged, 0 kept an earlier order or reached the cap, -1 reconstruction failed");
    for (op, &h) in ops.iter().zip(&r.harmonics) {
        let so = g2_and_mandel(&centered_moments(op, state, 2)?)?;
        let rec: Result<ModeStatistics> = reconstruct(op, state, &r.policy, &r.phase_grid);
        match rec {
            Ok(ms) => {
                let w = &ms.wigner;
                let status = if ms.converged { 1.0 } else { 0.0 };
                summary.push(vec![h as f64, so.nbar, so.g2, so.mandel_q, ms.centered.order() as f64, status, w.min(), w.norm()]);
                out.add(format!("stats/photons_n{h}.tsv"), photon_table(&ms.photons).render());
                out.add(format!("stats/wigner_n{h}.tsv"), wigner_table(w).render());
                if r.svg {
                    out.add(format!("stats/wigner_n{h}.svg"), svg::heatmap(&w.re, &w.im, &w.w, &format!("W, harmonic {h}"), "Re alpha", "Im alpha"));
                }
            }
            Err(e) if !r.strict => {
                summary = summary.comment(format!("n = {h}: {e}"));
                summary.push(vec![h as f64, so.nbar, so.g2, so.mandel_q, f64::NAN, -1.0, f64::NAN, f64::NAN]);
            }
            Err(e) => return Err(e),
        }
    }
    out.files.insert(0, ("stats/summary.tsv".into(), summary.render()));
    if !r.pairs.is_empty() {
        let mut js = TextTable::new([("a", ""), ("b", ""), ("pearson", ""), ("pearson_table", ""), ("mutual_information", "nats")])
            .comment("pearson from second-order joint moments; table values from the joint photon distribution");
        for (&(a, b), (c, table)) in r.pairs.iter().zip(joint_pairs(ops, &r.harmonics, &r.pairs, state)) {
            match table {
                Ok(t) => {
                    js.push(vec![a as f64, b as f64, c, t.pearson, t.mutual_information]);
                    out.add(format!("stats/joint_{a}_{b}.tsv"), joint_table(&t).render());
                }
                Err(e) => {
                    js = js.comment(format!("({a}, {b}): {e}"));
                    js.push(vec![a as f64, b as f64, c, f64::NAN, f64::NAN]);
                }
            }
        }
        out.add("stats/joint_summary.tsv", js.render());
    }
    Ok(out)
}

/// Classical-sampling counterpart of the stats stage.
fn twa_bundle(r: &Resolved, modes: &[HarmonicMode]) -> Result<Bundle> {
    let t = r.twa.as_ref().expect("twa enabled");
    let prep = &r.preparation;
    let n = prep.atoms();
    let family = prep.twa_family().expect("validated at resolve");
    let dist = fit_theta_distribution(family, n)?;
    let mut ens = sample_initial_conditions(&dist, n, t.trajectories, t.seed)?;
    match *prep {
        Preparation::Pi2 { .. } => ens = ens.rotated(Axis::Y, -std::f64::consts::FRAC_PI_2),
        Preparation::Twisting { omega0, omega_j, t_h, .. } => {
            ens = ens.rotated(Axis::Y, -std::f64::consts::FRAC_PI_2).twisted(&TwistingParams { omega0, omega_j, t_h })?;
        }
        _ => {}
    }
    let mut out = Bundle::default();
    let mut summary = TextTable::new([
        ("n", ""),
        ("nbar", ""),
        ("nbar_err", ""),
        ("g2", ""),
        ("g2_err", ""),
        ("Q", ""),
        ("Q_err", ""),
    ])
    .comment(format!("R = {}, seed = {}, sigma = {}", t.trajectories, t.seed, dist.sigma))
    .comment("vacuum-subtracted moments; photon histograms include the vacuum noise");
    let fields: Vec<_> = modes.iter().map(|m| classical_fields(&ens, m, t.seed)).collect();
    for f in &fields {
        let h = f.harmonic;
        let cs = classical_statistics(f, &r.phase_grid)?;
        summary.push(vec![h as f64, cs.nbar.value, cs.nbar.stderr, cs.g2.value, cs.g2.stderr, cs.mandel_q.value, cs.mandel_q.stderr]);
        out.add(format!("twa/photons_n{h}.tsv"), photon_table(&cs.photons).render());
        let mut dens = wigner_table(&cs.density);
        dens.columns[2].0 = "density".into();
        out.add(format!("twa/density_n{h}.tsv"), dens.render());
        let mut sc = TextTable::new([("Re alpha", ""), ("Im alpha", "")]);
        for z in f.alpha.iter().take(t.scatter) {
            sc.push(vec![z.re, z.im]);
        }
        out.add(format!("twa/scatter_n{h}.tsv"), sc.render());
    }
    out.files.insert(0, ("twa/summary.tsv".into(), summary.render()));
    if !r.pairs.is_empty() {
        let idx = |h: u32| r.harmonics.iter().position(|&x| x == h).expect("validated");
        let mut js = TextTable::new([("a", ""), ("b", ""), ("pearson", ""), ("mutual_information", "nats")]);
        for &(a, b) in &r.pairs {
            let j = classical_joint(&fields[idx(a)], &fields[idx(b)])?;
            js.push(vec![a as f64, b as f64, j.pearson, j.mutual_information]);
        }
        out.add("twa/joint_summary.tsv", js.render());
    }
    Ok(out)
}

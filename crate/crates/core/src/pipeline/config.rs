//! Run configuration: TOML with unit-tagged quantities, resolved to atomic units on load.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::atom::{validate_grid, GridSpec, SoftCoulombParams};
use crate::modes::DetectorSpec;
use crate::pulse::{PropagationConfig, PulseSpec, Stepper};
use crate::stats::{OrderPolicy, PhaseGrid, MAX_ORDER};
use crate::twa::Family;
use crate::units::{ev_to_au, fs_to_au, gv_per_m_to_au, HARTREE_EV, TIME_FS};
use crate::{Error, Result};

/// Prefix of environment overrides: `HHG_<BLOCK>_<KEY>=<value>`.
pub const ENV_PREFIX: &str = "HHG_";
const BLOCKS: [&str; 6] = ["atom", "pulse", "preparation", "detection", "statistics", "twa"];

/// What kind of physical value a [`Quantity`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Energy,
    Field,
    Time,
}

/// A bare number in atomic units, or a string such as `"60 GV/m"`, `"1.55 eV"` or `"10 fs"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Tagged(String),
}

impl From<f64> for Quantity {
    fn from(x: f64) -> Self {
        Quantity::Number(x)
    }
}

impl From<&str> for Quantity {
    fn from(s: &str) -> Self {
        Quantity::Tagged(s.to_string())
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Number(x) => write!(f, "{x}"),
            Quantity::Tagged(s) => f.write_str(s),
        }
    }
}

impl Quantity {
    pub fn to_au(&self, dim: Dimension) -> Result<f64> {
        let s = match self {
            Quantity::Number(x) => return Ok(*x),
            Quantity::Tagged(s) => s.trim(),
        };
        let split = s.find(|c: char| c.is_whitespace() || c.is_alphabetic()).unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("cannot read a number from `{s}`")))?;
        let unit = unit.trim();
        let factor = match (dim, unit) {
            (_, "" | "au" | "a.u.") => 1.0,
            (Dimension::Energy, "Ha" | "hartree") => 1.0,
            (Dimension::Energy, "eV") => ev_to_au(1.0),
            (Dimension::Energy, "meV") => ev_to_au(1e-3),
            (Dimension::Field, "GV/m") => gv_per_m_to_au(1.0),
            (Dimension::Field, "MV/m") => gv_per_m_to_au(1e-3),
            (Dimension::Field, "V/m") => gv_per_m_to_au(1e-9),
            (Dimension::Time, "fs") => fs_to_au(1.0),
            (Dimension::Time, "as") => fs_to_au(1e-3),
            (Dimension::Time, "ps") => fs_to_au(1e3),
            _ => return Err(Error::Config(format!("unit `{unit}` is not a known {dim:?} unit in `{s}`"))),
        };
        Ok(value * factor)
    }
}

fn default_a() -> f64 {
    SoftCoulombParams::default().a
}
fn default_l() -> f64 {
    150.0
}
fn default_dx() -> f64 {
    0.7
}
fn default_cab() -> f64 {
    SoftCoulombParams::default().cab
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomBlock {
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_l", rename = "L", alias = "l")]
    pub l: f64,
    #[serde(default = "default_dx")]
    pub dx: f64,
    #[serde(default = "default_cab")]
    pub cab: f64,
    /// Absorber onset; 0.9·L when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

impl Default for AtomBlock {
    fn default() -> Self {
        AtomBlock { a: default_a(), l: default_l(), dx: default_dx(), cab: default_cab(), x0: None }
    }
}

fn default_e0() -> Quantity {
    "60 GV/m".into()
}
fn default_omega_d() -> Quantity {
    "1.55 eV".into()
}
fn default_cycles() -> u32 {
    40
}
fn default_steps() -> u32 {
    400
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseBlock {
    #[serde(default = "default_e0", rename = "E0", alias = "e0")]
    pub e0: Quantity,
    #[serde(default = "default_omega_d")]
    pub omega_d: Quantity,
    #[serde(default = "default_cycles")]
    pub n_cycles: u32,
    #[serde(default = "default_steps")]
    pub steps_per_cycle: u32,
    #[serde(default)]
    pub stepper: Stepper,
}

impl Default for PulseBlock {
    fn default() -> Self {
        PulseBlock {
            e0: default_e0(),
            omega_d: default_omega_d(),
            n_cycles: default_cycles(),
            steps_per_cycle: default_steps(),
            stepper: Stepper::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// |⇓⟩
    #[default]
    Ground,
    /// |⇑⟩
    Excited,
    /// π/2 pulse on |⇓⟩, giving |⇒⟩.
    Pi2,
    #[serde(alias = "dicke-half")]
    HalfDicke,
    /// |k⟩ with `k` excitations.
    Dicke,
    /// Spin-coherent state at (`theta`, `phi`).
    Coherent,
    /// |⇒⟩ followed by one-axis twisting for `t_h`.
    Twisting,
    /// |⇑⟩ decaying superradiantly for `t_h`.
    Superradiance,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Ground => "ground",
            Protocol::Excited => "excited",
            Protocol::Pi2 => "pi2",
            Protocol::HalfDicke => "half-dicke",
            Protocol::Dicke => "dicke",
            Protocol::Coherent => "coherent",
            Protocol::Twisting => "twisting",
            Protocol::Superradiance => "superradiance",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let all = [
            Protocol::Ground,
            Protocol::Excited,
            Protocol::Pi2,
            Protocol::HalfDicke,
            Protocol::Dicke,
            Protocol::Coherent,
            Protocol::Twisting,
            Protocol::Superradiance,
        ];
        let s = s.to_ascii_lowercase().replace('_', "-");
        let s = if s == "dicke-half" { "half-dicke".to_string() } else { s };
        all.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = all.iter().map(|p| p.name()).collect();
            Error::Config(format!("unknown protocol `{s}`; known: {}", names.join(", ")))
        })
    }
}

impl std::str::FromStr for Quantity {
    type Err = std::convert::Infallible;
    /// Plain numbers become atomic-unit values; anything else keeps its unit tag.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(s.trim().parse::<f64>().map(Quantity::Number).unwrap_or_else(|_| Quantity::Tagged(s.trim().to_string())))
    }
}

fn default_atoms() -> usize {
    62000
}
fn default_omega0() -> Quantity {
    Quantity::Number(0.49)
}
fn default_omega_j() -> Quantity {
    "2.7 eV".into()
}
fn default_hold() -> Quantity {
    Quantity::Number(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreparationBlock {
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default = "default_atoms", rename = "N", alias = "n")]
    pub atoms: usize,
    #[serde(default = "default_omega0")]
    pub omega0: Quantity,
    #[serde(default = "default_omega_j")]
    pub omega_j: Quantity,
    /// Single-atom decay rate; give either this or `gamma_n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Quantity>,
    /// Collective rate γN (a.u.); defaults to 0.1 when neither is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_n: Option<f64>,
    #[serde(default = "default_hold")]
    pub t_h: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

impl Default for PreparationBlock {
    fn default() -> Self {
        PreparationBlock {
            protocol: Protocol::default(),
            atoms: default_atoms(),
            omega0: default_omega0(),
            omega_j: default_omega_j(),
            gamma: None,
            gamma_n: None,
            t_h: default_hold(),
            k: None,
            theta: None,
            phi: None,
        }
    }
}

fn default_harmonics() -> Vec<u32> {
    vec![15, 21, 55]
}
fn default_domega() -> f64 {
    0.5
}
fn default_solid_angle() -> f64 {
    4.0 * std::f64::consts::PI / 3.0
}
fn default_max_order() -> u32 {
    80
}
fn default_points_per_order() -> u32 {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionBlock {
    #[serde(default = "default_harmonics")]
    pub harmonics: Vec<u32>,
    /// Detector bandwidth in units of ω_d.
    #[serde(default = "default_domega")]
    pub domega: f64,
    #[serde(default = "default_solid_angle")]
    pub solid_angle: f64,
    /// Harmonic pairs for joint statistics; each must be in `harmonics`.
    #[serde(default)]
    pub pairs: Vec<[u32; 2]>,
    /// Emission spectrum range, in harmonic orders.
    #[serde(default = "default_max_order")]
    pub spectrum_max_order: u32,
    #[serde(default = "default_points_per_order")]
    pub spectrum_points_per_order: u32,
}

impl Default for DetectionBlock {
    fn default() -> Self {
        DetectionBlock {
            harmonics: default_harmonics(),
            domega: default_domega(),
            solid_angle: default_solid_angle(),
            pairs: Vec::new(),
            spectrum_max_order: default_max_order(),
            spectrum_points_per_order: default_points_per_order(),
        }
    }
}

fn default_start() -> usize {
    20
}
fn default_step() -> usize {
    10
}
fn default_cap() -> usize {
    MAX_ORDER
}
fn default_tolerance() -> f64 {
    1e-3
}
fn default_grid_points() -> usize {
    201
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticsBlock {
    #[serde(default = "default_start")]
    pub m_start: usize,
    #[serde(default = "default_step")]
    pub m_step: usize,
    #[serde(default = "default_cap")]
    pub m_cap: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Grid half-width around the mean field; sized from the variance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Halt the stage when a harmonic fails to reconstruct instead of recording the failure.
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub svg: bool,
}

impl Default for StatisticsBlock {
    fn default() -> Self {
        StatisticsBlock {
            m_start: default_start(),
            m_step: default_step(),
            m_cap: default_cap(),
            tolerance: default_tolerance(),
            grid_points: default_grid_points(),
            half_width: None,
            strict: false,
            svg: false,
        }
    }
}

fn default_trajectories() -> usize {
    20000
}
fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwaBlock {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_trajectories", rename = "R", alias = "r")]
    pub trajectories: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Samples written to the scatter file per harmonic.
    #[serde(default = "default_scatter")]
    pub scatter: usize,
}

fn default_scatter() -> usize {
    2000
}

impl Default for TwaBlock {
    fn default() -> Self {
        TwaBlock { enabled: false, trajectories: default_trajectories(), seed: default_seed(), scatter: default_scatter() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub atom: AtomBlock,
    #[serde(default)]
    pub pulse: PulseBlock,
    #[serde(default)]
    pub preparation: PreparationBlock,
    #[serde(default)]
    pub detection: DetectionBlock,
    #[serde(default)]
    pub statistics: StatisticsBlock,
    #[serde(default)]
    pub twa: TwaBlock,
}

/// Parses `raw` as a TOML value, falling back to a plain string (`60 GV/m`, `pi2`).
fn env_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_env(text, std::iter::empty::<(String, String)>())
    }

    /// Parses `text` after applying `HHG_<BLOCK>_<KEY>` overrides from `vars`. Variables naming
    /// no config block (such as `HHG_CACHE_DIR`) are left to the caller.
    pub fn from_toml_with_env<I, K, V>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("TOML: {e}")))?;
        for (k, v) in vars {
            let Some(rest) = k.as_ref().strip_prefix(ENV_PREFIX) else { continue };
            let rest = rest.to_ascii_lowercase();
            let Some(block) = BLOCKS.iter().find(|b| rest.starts_with(&format!("{b}_"))) else { continue };
            let key = &rest[block.len() + 1..];
            let entry = table.entry(block.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(t) = entry else {
                return Err(Error::Config(format!("`{block}` must be a table")));
            };
            // Keep the file's spelling (`N`, `L`, `E0`) so the override replaces rather than duplicates.
            let name = t.keys().find(|k| k.eq_ignore_ascii_case(key)).cloned().unwrap_or_else(|| key.to_string());
            t.insert(name, env_value(v.as_ref()));
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Resolved> {
        Resolved::new(self)
    }
}

/// Hold-time preparations in atomic units.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "protocol", rename_all = "kebab-case")]
pub enum Preparation {
    Ground { atoms: usize },
    Excited { atoms: usize },
    Pi2 { atoms: usize },
    HalfDicke { atoms: usize },
    Dicke { atoms: usize, k: usize },
    Coherent { atoms: usize, theta: f64, phi: f64 },
    Twisting { atoms: usize, omega0: f64, omega_j: f64, t_h: f64 },
    Superradiance { atoms: usize, gamma: f64, t_h: f64 },
}

impl Preparation {
    pub fn atoms(&self) -> usize {
        match *self {
            Preparation::Ground { atoms }
            | Preparation::Excited { atoms }
            | Preparation::Pi2 { atoms }
            | Preparation::HalfDicke { atoms }
            | Preparation::Dicke { atoms, .. }
            | Preparation::Coherent { atoms, .. }
            | Preparation::Twisting { atoms, .. }
            | Preparation::Superradiance { atoms, .. } => atoms,
        }
    }

    /// The same preparation for a different atom count.
    pub fn with_atoms(&self, n: usize) -> Preparation {
        let mut p = self.clone();
        match &mut p {
            Preparation::Ground { atoms }
            | Preparation::Excited { atoms }
            | Preparation::Pi2 { atoms }
            | Preparation::HalfDicke { atoms }
            | Preparation::Dicke { atoms, .. }
            | Preparation::Coherent { atoms, .. }
            | Preparation::Twisting { atoms, .. }
            | Preparation::Superradiance { atoms, .. } => *atoms = n,
        }
        p
    }

    /// Starting family for classical sampling, when the preparation has a TWA counterpart.
    pub fn twa_family(&self) -> Option<Family> {
        match self {
            Preparation::Ground { .. } | Preparation::Pi2 { .. } | Preparation::Twisting { .. } => Some(Family::Down),
            Preparation::Excited { .. } => Some(Family::Up),
            Preparation::HalfDicke { .. } => Some(Family::Half),
            _ => None,
        }
    }
}

/// Validated configuration in atomic units.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub grid: GridSpec,
    pub potential: SoftCoulombParams,
    pub pulse: PulseSpec,
    pub propagation: PropagationConfig,
    pub steps_per_cycle: u32,
    pub preparation: Preparation,
    pub harmonics: Vec<u32>,
    pub pairs: Vec<(u32, u32)>,
    pub detector: DetectorSpec,
    pub spectrum_max_order: u32,
    pub spectrum_points_per_order: u32,
    pub policy: OrderPolicy,
    pub phase_grid: PhaseGrid,
    pub strict: bool,
    pub svg: bool,
    pub twa: Option<TwaBlock>,
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {x}")))
    }
}

impl Resolved {
    fn new(c: &RunConfig) -> Result<Self> {
        let a = &c.atom;
        let mut grid = GridSpec::new(positive("atom.L", a.l)?, positive("atom.dx", a.dx)?);
        if let Some(x0) = a.x0 {
            if !(x0 > 0.0 && x0 < a.l) {
                return Err(Error::Config(format!("atom.x0 must lie in (0, L), got {x0}")));
            }
            grid.x0 = x0;
        }
        let potential = SoftCoulombParams { a: positive("atom.a", a.a)?, cab: positive("atom.cab", a.cab)? };

        let p = &c.pulse;
        let pulse = PulseSpec::new(p.e0.to_au(Dimension::Field)?, p.omega_d.to_au(Dimension::Energy)?, p.n_cycles)?;
        let report = validate_grid(&grid, &potential, pulse.omega_d);
        if let Some(f) = report.failures().first() {
            return Err(Error::Config(format!("grid check failed: {} ({} vs {})", f.name, f.lhs, f.rhs)));
        }
        if p.steps_per_cycle == 0 {
            return Err(Error::Config("pulse.steps_per_cycle must be positive".into()));
        }
        let mut propagation = PropagationConfig::with_steps_per_cycle(&pulse, p.steps_per_cycle);
        propagation.stepper = p.stepper;
        propagation.validate()?;

        let preparation = resolve_preparation(&c.preparation)?;

        let d = &c.detection;
        if d.harmonics.is_empty() || d.harmonics.contains(&0) {
            return Err(Error::Config("detection.harmonics must be a non-empty list of positive orders".into()));
        }
        let mut seen = d.harmonics.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != d.harmonics.len() {
            return Err(Error::Config("detection.harmonics has duplicates".into()));
        }
        let pairs: Vec<(u32, u32)> = d.pairs.iter().map(|[x, y]| (*x, *y)).collect();
        for &(x, y) in &pairs {
            if x == y || !d.harmonics.contains(&x) || !d.harmonics.contains(&y) {
                return Err(Error::Config(format!("pair ({x}, {y}) needs two distinct listed harmonics")));
            }
        }
        let detector = DetectorSpec { domega: positive("detection.domega", d.domega)? * pulse.omega_d, solid_angle: d.solid_angle };
        detector.validate(pulse.omega_d)?;
        if d.spectrum_max_order == 0 || d.spectrum_points_per_order == 0 {
            return Err(Error::Config("spectrum range and density must be positive".into()));
        }

        let s = &c.statistics;
        if s.m_step == 0 || s.m_start == 0 || s.m_start > s.m_cap || s.m_cap > MAX_ORDER {
            return Err(Error::Config(format!(
                "statistics needs 0 < m_start <= m_cap <= {MAX_ORDER} and m_step > 0, got {}/{}/{}",
                s.m_start, s.m_step, s.m_cap
            )));
        }
        let policy = OrderPolicy { start: s.m_start, step: s.m_step, cap: s.m_cap, tolerance: positive("statistics.tolerance", s.tolerance)? };
        if s.grid_points < 11 {
            return Err(Error::Config("statistics.grid_points must be at least 11".into()));
        }
        if let Some(h) = s.half_width {
            positive("statistics.half_width", h)?;
        }
        let phase_grid = PhaseGrid { points: s.grid_points, half_width: s.half_width };

        let twa = if c.twa.enabled {
            if c.twa.trajectories < 100 {
                return Err(Error::Config("twa.R must be at least 100".into()));
            }
            if preparation.twa_family().is_none() {
                return Err(Error::Config(format!(
                    "protocol `{}` has no phase-space sampling counterpart",
                    c.preparation.protocol.name()
                )));
            }
            Some(c.twa.clone())
        } else {
            None
        };
        Ok(Resolved {
            grid,
            potential,
            pulse,
            propagation,
            steps_per_cycle: p.steps_per_cycle,
            preparation,
            harmonics: d.harmonics.clone(),
            pairs,
            detector,
            spectrum_max_order: d.spectrum_max_order,
            spectrum_points_per_order: d.spectrum_points_per_order,
            policy,
            phase_grid,
            strict: s.strict,
            svg: s.svg,
            twa,
        })
    }

    /// Frequencies of the emission spectrum, beginning one step above zero.
    pub fn spectrum_frequencies(&self) -> Vec<f64> {
        let per = self.spectrum_points_per_order as usize;
        let n = self.spectrum_max_order as usize * per;
        (1..=n).map(|i| i as f64 / per as f64 * self.pulse.omega_d).collect()
    }
}

fn resolve_preparation(p: &PreparationBlock) -> Result<Preparation> {
    let atoms = p.atoms;
    if atoms == 0 {
        return Err(Error::Config("preparation.N must be positive".into()));
    }
    let t_h = p.t_h.to_au(Dimension::Time)?;
    if !(t_h >= 0.0 && t_h.is_finite()) {
        return Err(Error::Config(format!("preparation.t_h must be >= 0, got {t_h}")));
    }
    Ok(match p.protocol {
        Protocol::Ground => Preparation::Ground { atoms },
        Protocol::Excited => Preparation::Excited { atoms },
        Protocol::Pi2 => Preparation::Pi2 { atoms },
        Protocol::HalfDicke => {
            if atoms % 2 != 0 {
                return Err(Error::Config(format!("half-Dicke preparation needs even N, got {atoms}")));
            }
            Preparation::HalfDicke { atoms }
        }
        Protocol::Dicke => {
            let k = p.k.ok_or_else(|| Error::Config("dicke preparation needs `k`".into()))?;
            if k > atoms {
                return Err(Error::Config(format!("dicke k = {k} exceeds N = {atoms}")));
            }
            Preparation::Dicke { atoms, k }
        }
        Protocol::Coherent => {
            let (Some(theta), Some(phi)) = (p.theta, p.phi) else {
                return Err(Error::Config("coherent preparation needs `theta` and `phi`".into()));
            };
            Preparation::Coherent { atoms, theta, phi }
        }
        Protocol::Twisting => Preparation::Twisting {
            atoms,
            omega0: positive("preparation.omega0", p.omega0.to_au(Dimension::Energy)?)?,
            omega_j: positive("preparation.omega_j", p.omega_j.to_au(Dimension::Energy)?)?,
            t_h,
        },
        Protocol::Superradiance => {
            let gamma = match (&p.gamma, p.gamma_n) {
                (Some(_), Some(_)) => return Err(Error::Config("give either gamma or gamma_n, not both".into())),
                (Some(g), None) => g.to_au(Dimension::Energy)?,
                (None, Some(gn)) => gn / atoms as f64,
                (None, None) => 0.1 / atoms as f64,
            };
            Preparation::Superradiance { atoms, gamma: positive("preparation.gamma", gamma)?, t_h }
        }
    })
}

/// CODATA-derived conversion factors, as recorded in run manifests.
pub fn unit_constants() -> serde_json::Value {
    serde_json::json!({
        "hartree_ev": HARTREE_EV,
        "field_au_gv_per_m": crate::units::FIELD_GV_PER_M,
        "time_au_fs": TIME_FS,
        "c_au": crate::units::C_LIGHT,
        "codata": "2018",
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_tags_resolve() {
        let e = Quantity::from("1.55 eV").to_au(Dimension::Energy).unwrap();
        assert!((e - 1.55 / HARTREE_EV).abs() < 1e-15);
        let f = Quantity::from("60GV/m").to_au(Dimension::Field).unwrap();
        assert!((f - 60.0 / crate::units::FIELD_GV_PER_M).abs() < 1e-15);
        assert!(Quantity::from("3 eV").to_au(Dimension::Time).is_err());
    }

    #[test]
    fn env_overrides_apply() {
        let c = RunConfig::from_toml_with_env(
            "[preparation]\nN = 10\n",
            [("HHG_PREPARATION_N", "12"), ("HHG_PULSE_E0", "50 GV/m"), ("HHG_CACHE_DIR", "/x")],
        )
        .unwrap();
        assert_eq!(c.preparation.atoms, 12);
        assert_eq!(c.pulse.e0, Quantity::from("50 GV/m"));
    }
}

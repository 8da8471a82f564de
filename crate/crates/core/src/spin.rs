//! Permutation-symmetric states of N two-level atoms on the Dicke ladder.
//!
//! Basis state |k⟩ has k excited atoms. Collective operators are in Pauli
//! units, so S_z|k⟩ = (2k − N)|k⟩ and S± = S_x ± iS_y.

use serde::{Deserialize, Serialize};

use crate::linalg::{expm_multiply, LinearOp, TaylorWork, C64};
use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpinSpace {
    n: usize,
}

impl SpinSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("need at least one atom".into()));
        }
        Ok(SpinSpace { n })
    }

    pub fn atoms(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// S_z eigenvalue of |k⟩.
    pub fn sz(&self, k: usize) -> f64 {
        2.0 * k as f64 - self.n as f64
    }

    /// ⟨k+1|S⁺|k⟩
    pub fn raise_amplitude(&self, k: usize) -> f64 {
        2.0 * (((k + 1) * (self.n - k)) as f64).sqrt()
    }

    /// ⟨k|S⁺S⁻|k⟩ = N(N+2) − s_z² + 2s_z
    pub fn emission_rate(&self, k: usize) -> f64 {
        4.0 * k as f64 * (self.n - k + 1) as f64
    }
}

/// Tridiagonal operator on the ladder.
///
/// `up[k] = ⟨k+1|A|k⟩`, `down[k] = ⟨k|A|k+1⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderOp {
    pub diag: Vec<C64>,
    pub up: Vec<C64>,
    pub down: Vec<C64>,
}

impl LadderOp {
    pub fn zeros(dim: usize) -> Self {
        LadderOp { diag: vec![ZERO; dim], up: vec![ZERO; dim - 1], down: vec![ZERO; dim - 1] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        op.diag.fill(C64::new(1.0, 0.0));
        op
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        let d = self.dim();
        for k in 0..d {
            let mut s = self.diag[k] * x[k];
            if k > 0 {
                s += self.up[k - 1] * x[k - 1];
            }
            if k + 1 < d {
                s += self.down[k] * x[k + 1];
            }
            y[k] = s;
        }
    }

    pub fn adjoint(&self) -> LadderOp {
        LadderOp {
            diag: self.diag.iter().map(|z| z.conj()).collect(),
            up: self.down.iter().map(|z| z.conj()).collect(),
            down: self.up.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> LadderOp {
        let f = |v: &Vec<C64>| v.iter().map(|z| z * c).collect();
        LadderOp { diag: f(&self.diag), up: f(&self.up), down: f(&self.down) }
    }

    pub fn add(&self, other: &LadderOp) -> LadderOp {
        let f = |a: &Vec<C64>, b: &Vec<C64>| a.iter().zip(b).map(|(x, y)| x + y).collect();
        LadderOp { diag: f(&self.diag, &other.diag), up: f(&self.up, &other.up), down: f(&self.down, &other.down) }
    }

    /// Row-major dense copy, for small-N checks.
    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let d = self.dim();
        let mut m = vec![vec![ZERO; d]; d];
        for k in 0..d {
            m[k][k] = self.diag[k];
            if k + 1 < d {
                m[k + 1][k] = self.up[k];
                m[k][k + 1] = self.down[k];
            }
        }
        m
    }

    /// Tr(ρA) for either kind of state.
    pub fn expectation(&self, state: &CollectiveState) -> C64 {
        match state {
            CollectiveState::Pure(psi) => {
                let mut y = vec![ZERO; psi.len()];
                self.apply(psi, &mut y);
                psi.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
            }
            CollectiveState::Mixed(p) => p.iter().zip(&self.diag).map(|(pk, d)| d * *pk).sum(),
        }
    }
}

impl LinearOp for LadderOp {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        LadderOp::apply(self, x, y)
    }
    fn norm1(&self) -> f64 {
        let d = self.dim();
        (0..d)
            .map(|k| {
                let mut s = self.diag[k].norm();
                if k > 0 {
                    s += self.down[k - 1].norm();
                }
                if k + 1 < d {
                    s += self.up[k].norm();
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct SpinOps {
    pub sx: LadderOp,
    pub sy: LadderOp,
    pub sz: LadderOp,
    pub splus: LadderOp,
    pub sminus: LadderOp,
}

pub fn build_spin_ops(n: usize) -> Result<SpinOps> {
    let space = SpinSpace::new(n)?;
    let d = space.dim();
    let mut splus = LadderOp::zeros(d);
    for k in 0..n {
        splus.up[k] = C64::new(space.raise_amplitude(k), 0.0);
    }
    let sminus = splus.adjoint();
    let mut sz = LadderOp::zeros(d);
    for k in 0..d {
        sz.diag[k] = C64::new(space.sz(k), 0.0);
    }
    let sx = splus.add(&sminus).scale(C64::new(0.5, 0.0));
    let sy = splus.add(&sminus.scale(C64::new(-1.0, 0.0))).scale(C64::new(0.0, -0.5));
    Ok(SpinOps { sx, sy, sz, splus, sminus })
}

#[derive(Clone, Debug, PartialEq)]
pub enum CollectiveState {
    /// Amplitudes ψ_k.
    Pure(Vec<C64>),
    /// Populations of a state diagonal in the ladder basis.
    Mixed(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            _ => Err(Error::Argument(format!("unknown axis {s:?}"))),
        }
    }
}

impl CollectiveState {
    pub fn dim(&self) -> usize {
        match self {
            CollectiveState::Pure(v) => v.len(),
            CollectiveState::Mixed(p) => p.len(),
        }
    }

    pub fn atoms(&self) -> usize {
        self.dim() - 1
    }

    pub fn space(&self) -> Result<SpinSpace> {
        SpinSpace::new(self.atoms())
    }

    /// All atoms in the ground state, |⇓⟩.
    pub fn ground(n: usize) -> Self {
        Self::dicke(n, 0)
    }

    /// All atoms excited, |⇑⟩.
    pub fn excited(n: usize) -> Self {
        Self::dicke(n, n)
    }

    pub fn dicke(n: usize, k: usize) -> Self {
        let mut v = vec![ZERO; n + 1];
        v[k.min(n)] = C64::new(1.0, 0.0);
        CollectiveState::Pure(v)
    }

    /// |N/2⟩, half the atoms excited.
    pub fn half_dicke(n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::Argument(format!("|N/2> needs even N, got {n}")));
        }
        Ok(Self::dicke(n, n / 2))
    }

    /// Product state with every atom's Bloch vector along (θ, φ), θ measured from the excited pole.
    pub fn coherent(n: usize, theta: f64, phi: f64) -> Self {
        let ce = C64::new((0.5 * theta).cos(), 0.0);
        let cg = C64::from_polar((0.5 * theta).sin(), phi);
        CollectiveState::Pure(product_amplitudes(n, cg, ce))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CollectiveState::Pure(v) => {
                let nrm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                if !((nrm - 1.0).abs() <= 1e-10) {
                    return Err(Error::Numerical(format!("pure state norm {nrm} differs from 1")));
                }
            }
            CollectiveState::Mixed(p) => {
                if let Some(x) = p.iter().find(|x| !(**x >= 0.0)) {
                    return Err(Error::Numerical(format!("negative population {x}")));
                }
                let s: f64 = p.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::Numerical(format!("populations sum to {s}")));
                }
            }
        }
        Ok(())
    }

    pub fn populations(&self) -> Vec<f64> {
        match self {
            CollectiveState::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            CollectiveState::Mixed(p) => p.clone(),
        }
    }

    /// (⟨S_x⟩, ⟨S_y⟩, ⟨S_z⟩)
    pub fn mean_spin(&self) -> [f64; 3] {
        let n = self.atoms();
        let space = SpinSpace { n };
        let sz: f64 = self.populations().iter().enumerate().map(|(k, p)| p * space.sz(k)).sum();
        let splus = match self {
            CollectiveState::Pure(v) => {
                (0..n).map(|k| v[k + 1].conj() * v[k] * space.raise_amplitude(k)).sum::<C64>()
            }
            CollectiveState::Mixed(_) => ZERO,
        };
        [splus.re, splus.im, sz]
    }
}

/// Ladder amplitudes of the product state (c_g|g⟩ + c_e|e⟩)^⊗N.
fn product_amplitudes(n: usize, cg: C64, ce: C64) -> Vec<C64> {
    let (ag, ae) = (cg.norm(), ce.norm());
    let mut out = vec![ZERO; n + 1];
    if ae == 0.0 {
        out[0] = cg.powu(n as u32);
        return out;
    }
    if ag == 0.0 {
        out[n] = ce.powu(n as u32);
        return out;
    }
    let (lg, le) = (ag.ln(), ae.ln());
    let (pg, pe) = (cg.arg(), ce.arg());
    let mut ln_binom = 0.0;
    for (k, o) in out.iter_mut().enumerate() {
        if k > 0 {
            ln_binom += ((n - k + 1) as f64 / k as f64).ln();
        }
        let lnmag = 0.5 * ln_binom + k as f64 * le + (n - k) as f64 * lg;
        let phase = k as f64 * pe + (n - k) as f64 * pg;
        *o = C64::from_polar(lnmag.exp(), phase);
    }
    out
}

fn basis_extreme(v: &[C64]) -> Option<(usize, C64)> {
    let n = v.len() - 1;
    let off = |skip: usize| v.iter().enumerate().all(|(k, z)| k == skip || *z == ZERO);
    if off(0) {
        Some((0, v[0]))
    } else if off(n) {
        Some((n, v[n]))
    } else {
        None
    }
}

/// Applies exp(−i·angle·S_axis/2).
pub fn rotation_pulse(state: &CollectiveState, axis: Axis, angle: f64) -> Result<CollectiveState> {
    let CollectiveState::Pure(v) = state else {
        return Err(Error::Capability("rotations act on pure states only".into()));
    };
    let n = v.len() - 1;
    if axis == Axis::Z {
        let space = SpinSpace { n };
        let out = v.iter().enumerate().map(|(k, z)| z * C64::from_polar(1.0, -0.5 * angle * space.sz(k))).collect();
        return Ok(CollectiveState::Pure(out));
    }
    let (c, s) = ((0.5 * angle).cos(), (0.5 * angle).sin());
    if let Some((k, phase)) = basis_extreme(v) {
        // Every atom starts in the same basis state, so the result is a product state.
        let (cg, ce) = match (axis, k == 0) {
            (Axis::X, true) => (C64::new(c, 0.0), C64::new(0.0, -s)),
            (Axis::Y, true) => (C64::new(c, 0.0), C64::new(-s, 0.0)),
            (Axis::X, false) => (C64::new(0.0, -s), C64::new(c, 0.0)),
            (Axis::Y, false) => (C64::new(s, 0.0), C64::new(c, 0.0)),
            (Axis::Z, _) => unreachable!(),
        };
        let out = product_amplitudes(n, cg, ce).into_iter().map(|z| z * phase).collect();
        return Ok(CollectiveState::Pure(out));
    }
    let ops = build_spin_ops(n)?;
    let gen = if axis == Axis::X { ops.sx } else { ops.sy };
    let mut out = v.clone();
    expm_multiply(&gen, C64::new(0.0, -0.5 * angle), &mut out, &mut TaylorWork::default());
    Ok(CollectiveState::Pure(out))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwistingParams {
    pub omega0: f64,
    pub omega_j: f64,
    pub t_h: f64,
}

/// Evolves under H = (ω_0/2)S_z + (ω_J/N)S_z² for the hold time.
pub fn one_axis_twisting(state: &CollectiveState, p: &TwistingParams) -> Result<CollectiveState> {
    if !(p.t_h >= 0.0) {
        return Err(Error::Argument(format!("hold time must be >= 0, got {}", p.t_h)));
    }
    let CollectiveState::Pure(v) = state else {
        return Err(Error::Capability("twisting acts on pure states only".into()));
    };
    let space = SpinSpace::new(v.len() - 1)?;
    let nf = space.atoms() as f64;
    let out = v
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let s = space.sz(k);
            let e = 0.5 * p.omega0 * s + p.omega_j / nf * s * s;
            z * C64::from_polar(1.0, -e * p.t_h)
        })
        .collect();
    Ok(CollectiveState::Pure(out))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperradianceParams {
    pub gamma: f64,
    pub t_h: f64,
    /// Integrator step; chosen automatically when absent.
    #[serde(default)]
    pub dt_ode: Option<f64>,
}

/// Time profiles of a superradiant decay, times measured from the start of the hold.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuperradianceProfile {
    pub times: Vec<f64>,
    pub sz: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl SuperradianceProfile {
    /// Time of maximum intensity.
    pub fn peak_time(&self) -> f64 {
        let (i, _) = self
            .intensity
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
        self.times.get(i).copied().unwrap_or(0.0)
    }
}

/// Step used when none is configured.
///
/// RK4 is stable for |λ·dt| < 2.78; the fastest rate on the ladder is γ·max c_k ≈ γN²,
/// so the bound 0.01/(γN) alone is unstable once N exceeds a few hundred.
pub fn default_ode_step(gamma: f64, n: usize, horizon: f64) -> f64 {
    let space = SpinSpace { n };
    let cmax = (0..=n).map(|k| space.emission_rate(k)).fold(0.0, f64::max);
    let mut dt = (0.01 / (gamma * n as f64)).min(0.5 / (gamma * cmax));
    if horizon > 0.0 {
        dt = dt.min(horizon / 1e4);
    }
    dt
}

struct Lindblad {
    gamma: f64,
    c: Vec<f64>,
}

impl Lindblad {
    fn rhs(&self, p: &[f64], out: &mut [f64]) {
        let d = p.len();
        for k in 0..d {
            let gain = if k + 1 < d { self.c[k + 1] * p[k + 1] } else { 0.0 };
            out[k] = self.gamma * (gain - self.c[k] * p[k]);
        }
    }

    fn observe(&self, t: f64, p: &[f64], prof: &mut SuperradianceProfile) {
        let n = p.len() - 1;
        let sz: f64 = p.iter().enumerate().map(|(k, x)| x * (2.0 * k as f64 - n as f64)).sum();
        let ss: f64 = p.iter().zip(&self.c).map(|(x, c)| x * c).sum();
        prof.times.push(t);
        prof.sz.push(sz);
        prof.intensity.push(self.gamma * ss);
    }
}

/// Integrates the diagonal master equation from |⇑⟩⟨⇑| and returns the state after each hold
/// time in `holds` (any order), plus the profile up to the longest hold.
pub fn superradiance_sweep(
    gamma: f64,
    n: usize,
    holds: &[f64],
    dt_ode: Option<f64>,
) -> Result<(Vec<CollectiveState>, SuperradianceProfile)> {
    if !(gamma > 0.0) {
        return Err(Error::Argument(format!("decay rate must be > 0, got {gamma}")));
    }
    if let Some(h) = holds.iter().find(|h| !(**h >= 0.0 && h.is_finite())) {
        return Err(Error::Argument(format!("hold time must be >= 0, got {h}")));
    }
    let space = SpinSpace::new(n)?;
    let horizon = holds.iter().copied().fold(0.0, f64::max);
    let dt = dt_ode.unwrap_or_else(|| default_ode_step(gamma, n, horizon));
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("ODE step must be > 0, got {dt}")));
    }
    let lb = Lindblad { gamma, c: (0..=n).map(|k| space.emission_rate(k)).collect() };
    let d = n + 1;
    let mut p = vec![0.0; d];
    p[n] = 1.0;
    let mut prof = SuperradianceProfile::default();
    lb.observe(0.0, &p, &mut prof);

    let mut order: Vec<usize> = (0..holds.len()).collect();
    order.sort_by(|&a, &b| holds[a].total_cmp(&holds[b]));
    let mut states = vec![CollectiveState::Mixed(Vec::new()); holds.len()];
    let mut t = 0.0;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for &idx in &order {
        let target = holds[idx];
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                lb.rhs(&p, &mut k1);
                for i in 0..d {
                    tmp[i] = p[i] + 0.5 * h * k1[i];
                }
                lb.rhs(&tmp, &mut k2);
                for i in 0..d {
                    tmp[i] = p[i] + 0.5 * h * k2[i];
                }
                lb.rhs(&tmp, &mut k3);
                for i in 0..d {
                    tmp[i] = p[i] + h * k3[i];
                }
                lb.rhs(&tmp, &mut k4);
                for i in 0..d {
                    p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-9 || !total.is_finite() {
                    return Err(Error::Numerical(format!(
                        "probability leaked to {total} at t = {}; reduce the ODE step ({h})",
                        t + (s + 1) as f64 * h
                    )));
                }
                lb.observe(t + (s + 1) as f64 * h, &p, &mut prof);
            }
            t = target;
        }
        // RK4 can leave populations a hair below zero on the empty tail of the ladder.
        states[idx] = CollectiveState::Mixed(p.iter().map(|x| x.max(0.0)).collect());
    }
    Ok((states, prof))
}

pub fn superradiance_evolve(p: &SuperradianceParams, n: usize) -> Result<(CollectiveState, SuperradianceProfile)> {
    let (mut states, prof) = superradiance_sweep(p.gamma, n, &[p.t_h], p.dt_ode)?;
    Ok((states.remove(0), prof))
}

/// Hold time of maximum emission in the large-N limit, log N/(4γN).
pub fn superradiant_peak_time(gamma: f64, n: usize) -> f64 {
    (n as f64).ln() / (4.0 * gamma * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherent_matches_rotated_ground() {
        let n = 7;
        let a = CollectiveState::coherent(n, 1.1, 0.0);
        // exp(-iθS_y/2) on |⇓⟩ tilts the Bloch vector from the south pole towards −x.
        let b = rotation_pulse(&CollectiveState::ground(n), Axis::Y, -(std::f64::consts::PI - 1.1)).unwrap();
        let (CollectiveState::Pure(a), CollectiveState::Pure(b)) = (a, b) else { unreachable!() };
        let ov: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        assert!((ov.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ode_step_respects_stiffness() {
        let dt = default_ode_step(0.1 / 1000.0, 1000, 100.0);
        assert!(dt * 0.1 / 1000.0 * 4.0 * 500.0 * 501.0 <= 0.5 + 1e-12);
    }
}

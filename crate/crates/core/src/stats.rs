//! Normally ordered moments of a harmonic mode and everything reconstructed from them:
//! Wigner function, photon statistics, g²(0), Mandel Q and two-mode joint statistics.

use faer::Mat;

use crate::linalg::C64;
use crate::par::map_range;
use crate::spin::{CollectiveState, LadderOp, SpinSpace};
use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
/// Factorial-range guard on the truncation order.
pub const MAX_ORDER: usize = 80;

/// values[m][l] = ⟨â†^m â^l⟩ about `shift`, i.e. for the operator â − shift.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    m_max: usize,
    values: Vec<C64>,
    pub shift: C64,
}

impl MomentTable {
    pub fn from_fn(m_max: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let d = m_max + 1;
        let mut values = vec![ZERO; d * d];
        for m in 0..d {
            for l in 0..d {
                values[m * d + l] = f(m, l);
            }
        }
        MomentTable { m_max, values, shift: ZERO }
    }

    pub fn vacuum(m_max: usize) -> Self {
        Self::from_fn(m_max, |m, l| if m == 0 && l == 0 { C64::new(1.0, 0.0) } else { ZERO })
    }

    /// Coherent state |β⟩: β̄^m β^l.
    pub fn coherent(beta: C64, m_max: usize) -> Self {
        Self::from_fn(m_max, |m, l| beta.conj().powu(m as u32) * beta.powu(l as u32))
    }

    /// Thermal state: only diagonal moments, m!·n̄^m.
    pub fn thermal(nbar: f64, m_max: usize) -> Self {
        Self::from_fn(m_max, |m, l| if m == l { C64::new(factorial(m) * nbar.powi(m as i32), 0.0) } else { ZERO })
    }

    /// Fock state |k⟩: ⟨â†^m â^m⟩ = k!/(k−m)!.
    pub fn fock(k: usize, m_max: usize) -> Self {
        Self::from_fn(m_max, |m, l| {
            if m == l && m <= k {
                C64::new(factorial(k) / factorial(k - m), 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn order(&self) -> usize {
        self.m_max
    }

    pub fn get(&self, m: usize, l: usize) -> C64 {
        self.values[m * (self.m_max + 1) + l]
    }

    /// Same moments cut to a lower order.
    pub fn truncated(&self, m_max: usize) -> Self {
        let m_max = m_max.min(self.m_max);
        let mut t = Self::from_fn(m_max, |m, l| self.get(m, l));
        t.shift = self.shift;
        t
    }

    pub fn nbar(&self) -> f64 {
        self.get(1, 1).re
    }

    /// Moments of (â − shift − β) from those of (â − shift).
    pub fn shifted_by(&self, beta: C64) -> Self {
        let d = self.m_max + 1;
        let binom = binomials(d);
        let mut pb = vec![C64::new(1.0, 0.0); d];
        let mut pbc = vec![C64::new(1.0, 0.0); d];
        for k in 1..d {
            pb[k] = pb[k - 1] * -beta;
            pbc[k] = pbc[k - 1] * -beta.conj();
        }
        let mut t = Self::from_fn(self.m_max, |m, l| {
            let mut s = ZERO;
            for i in 0..=m {
                for j in 0..=l {
                    s += self.get(i, j) * (binom[m][i] * binom[l][j]) * pbc[m - i] * pb[l - j];
                }
            }
            s
        });
        t.shift = self.shift + beta;
        t
    }

    /// Moments of â itself.
    pub fn unshifted(&self) -> Self {
        if self.shift == ZERO {
            return self.clone();
        }
        let mut t = self.shifted_by(-self.shift);
        t.shift = ZERO;
        t
    }

    /// Symmetric-ordered quadrature variances (Re, Im) of the centered field.
    fn quadrature_variances(&self) -> (f64, f64) {
        let c = if self.m_max >= 2 { self.clone() } else { return (0.25, 0.25) };
        let beta = c.get(0, 1);
        let aa = c.get(0, 2) - beta * beta;
        let n = c.get(1, 1).re - beta.norm_sqr();
        let vre = 0.25 * (2.0 * aa.re + 2.0 * n + 1.0);
        let vim = 0.25 * (-2.0 * aa.re + 2.0 * n + 1.0);
        (vre.max(0.0), vim.max(0.0))
    }
}

/// Moments centered on the shift; the mean of the centered operator is then zero.
///
/// This goes through the binomial expansion and loses about ε·|β|^{m+l} absolutely, so high
/// orders of a bright table are unusable; `centered_moments` avoids the loss.
pub fn mean_shift(table: &MomentTable) -> (MomentTable, C64) {
    let beta = table.get(0, 1);
    let t = table.shifted_by(beta);
    (t, beta)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn binomials(d: usize) -> Vec<Vec<f64>> {
    let mut b = vec![vec![0.0; d]; d];
    for n in 0..d {
        b[n][0] = 1.0;
        for k in 1..=n {
            b[n][k] = b[n - 1][k - 1] + if k < n { b[n - 1][k] } else { 0.0 };
        }
    }
    b
}

/// Vector supported on `start..start + data.len()` of the ladder.
#[derive(Clone)]
struct Window {
    start: usize,
    data: Vec<C64>,
}

impl Window {
    fn basis(k: usize) -> Self {
        Window { start: k, data: vec![C64::new(1.0, 0.0)] }
    }

    fn full(v: &[C64]) -> Self {
        Window { start: 0, data: v.to_vec() }
    }

    fn apply(&self, op: &LadderOp) -> Window {
        let d = op.dim();
        let lo = self.start.saturating_sub(1);
        let hi = (self.start + self.data.len() + 1).min(d);
        let get = |k: isize| -> C64 {
            let i = k - self.start as isize;
            if i < 0 || i as usize >= self.data.len() {
                ZERO
            } else {
                self.data[i as usize]
            }
        };
        let data = (lo..hi)
            .map(|k| {
                let ki = k as isize;
                let mut s = op.diag[k] * get(ki);
                if k > 0 {
                    s += op.up[k - 1] * get(ki - 1);
                }
                if k + 1 < d {
                    s += op.down[k] * get(ki + 1);
                }
                s
            })
            .collect();
        Window { start: lo, data }
    }

    fn dot(&self, other: &Window) -> C64 {
        let lo = self.start.max(other.start);
        let hi = (self.start + self.data.len()).min(other.start + other.data.len());
        (lo..hi).map(|k| self.data[k - self.start].conj() * other.data[k - other.start]).sum()
    }
}

/// Split points for `n` work items into at most 256 contiguous chunks.
fn chunk_bounds(n: usize) -> Vec<usize> {
    let parts = n.clamp(1, 256);
    (0..=parts).map(|i| i * n / parts).collect()
}

/// Components of a state to trace over: one full vector for a pure state, basis vectors
/// weighted by population for a diagonal one.
fn components(state: &CollectiveState) -> Vec<(f64, Window)> {
    match state {
        CollectiveState::Pure(v) => vec![(1.0, Window::full(v))],
        CollectiveState::Mixed(p) => p
            .iter()
            .enumerate()
            .filter(|(_, x)| **x > 1e-300)
            .map(|(k, x)| (*x, Window::basis(k)))
            .collect(),
    }
}

fn check_finite(t: &MomentTable) -> Result<()> {
    if t.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!(
            "moments overflow at order {}; center the operator (mean shift) or lower m_max",
            t.m_max
        )));
    }
    Ok(())
}

/// op = c0 + w·S when the ladder operator is affine in the collective spin.
fn spin_affine(op: &LadderOp) -> Option<(C64, [C64; 3])> {
    let d = op.dim();
    if d < 2 {
        return None;
    }
    let space = SpinSpace::new(d - 1).ok()?;
    let n = (d - 1) as f64;
    let a0 = space.raise_amplitude(0);
    let (p, q) = (op.up[0] / a0, op.down[0] / a0);
    let wz = 0.5 * (op.diag[1] - op.diag[0]);
    let c0 = op.diag[0] + wz * n;
    let i = C64::new(0.0, 1.0);
    let w = [p + q, i * (p - q), wz];
    let scale = op.diag.iter().chain(&op.up).chain(&op.down).map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let fits = (0..d).all(|k| (op.diag[k] - c0 - wz * space.sz(k)).norm() <= tol)
        && (0..d - 1).all(|k| {
            let a = space.raise_amplitude(k);
            (op.up[k] - p * a).norm() <= tol && (op.down[k] - q * a).norm() <= tol
        });
    fits.then_some((c0, w))
}

fn affine_op(c0: C64, w: [C64; 3], space: SpinSpace) -> LadderOp {
    let i = C64::new(0.0, 1.0);
    let (p, q) = (0.5 * (w[0] - i * w[1]), 0.5 * (w[0] + i * w[1]));
    let mut op = LadderOp::zeros(space.dim());
    for k in 0..space.dim() {
        op.diag[k] = c0 + w[2] * space.sz(k);
    }
    for k in 0..space.atoms() {
        let a = space.raise_amplitude(k);
        op.up[k] = p * a;
        op.down[k] = q * a;
    }
    op
}

/// Rotation taking −ẑ to the unit vector `v`.
fn rotation_from_south(v: [f64; 3]) -> [[f64; 3]; 3] {
    // axis (−ẑ) × v = (v_y, −v_x, 0)
    let (kx, ky) = (v[1], -v[0]);
    let s = (kx * kx + ky * ky).sqrt();
    let c = -v[2];
    if s < 1e-300 {
        return if c > 0.0 {
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        } else {
            [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]
        };
    }
    let k = [kx / s, ky / s, 0.0];
    let kx_ = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let kk: f64 = (0..3).map(|l| kx_[i][l] * kx_[l][j]).sum();
            r[i][j] = if i == j { 1.0 } else { 0.0 } + s * kx_[i][j] + (1.0 - c) * kk;
        }
    }
    r
}

/// A pure state with |⟨S⟩| = N is the spin-coherent state along ⟨S⟩. For such a state and an
/// operator affine in S, the moments equal those of the rotated operator (Rᵀw)·S in |⇓⟩.
/// The operator stays tridiagonal and the powers live on the first few ladder rungs.
fn coherent_frame(op: &LadderOp, state: &CollectiveState) -> Option<(LadderOp, CollectiveState)> {
    let CollectiveState::Pure(_) = state else { return None };
    let n = state.atoms();
    let s = state.mean_spin();
    let len = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    if !(len >= n as f64 * (1.0 - 1e-10)) {
        return None;
    }
    let (c0, w) = spin_affine(op)?;
    let r = rotation_from_south([s[0] / len, s[1] / len, s[2] / len]);
    let wr = [0, 1, 2].map(|j| (0..3).map(|i| w[i] * r[i][j]).sum::<C64>());
    let space = SpinSpace::new(n).ok()?;
    Some((affine_op(c0, wr, space), CollectiveState::ground(n)))
}

/// Largest |entry| row sum over the rungs reachable from `support` in `steps` applications.
fn reach_norm(op: &LadderOp, support: (usize, usize), steps: usize) -> f64 {
    let d = op.dim();
    let lo = support.0.saturating_sub(steps);
    let hi = (support.1 + steps).min(d - 1);
    (lo..=hi)
        .map(|k| {
            let mut s = op.diag[k].norm();
            if k > 0 {
                s += op.down[k - 1].norm() + op.up[k - 1].norm();
            }
            s
        })
        .fold(0.0, f64::max)
}

/// ⟨â†^m â^l⟩ by repeated application of `op` to the state.
///
/// Each application can inject roundoff of order ε‖â‖ times the current vector norm, so an
/// entry is only resolved above (m+l+1)·ε·‖â‖^{m+l}. Entries below ten times that floor are
/// indistinguishable from noise and are set to zero.
pub fn moments(op: &LadderOp, state: &CollectiveState, m_max: usize) -> Result<MomentTable> {
    if op.dim() != state.dim() {
        return Err(Error::Argument(format!("operator dim {} vs state dim {}", op.dim(), state.dim())));
    }
    if m_max > MAX_ORDER {
        return Err(Error::Argument(format!("m_max {m_max} exceeds the limit {MAX_ORDER}")));
    }
    let rotated = coherent_frame(op, state);
    let (op, state) = match &rotated {
        Some((o, s)) => (o, s),
        None => (op, state),
    };
    let d = m_max + 1;
    let comps = components(state);
    let chunks = chunk_bounds(comps.len());
    let partial = map_range(chunks.len() - 1, |c| {
        let mut acc = vec![ZERO; d * d];
        for (w, v0) in &comps[chunks[c]..chunks[c + 1]] {
            let mut pows = Vec::with_capacity(d);
            pows.push(v0.clone());
            for l in 1..d {
                let next = pows[l - 1].apply(op);
                pows.push(next);
            }
            for m in 0..d {
                for l in m..d {
                    acc[m * d + l] += pows[m].dot(&pows[l]) * *w;
                }
            }
        }
        acc
    });
    let mut values = vec![ZERO; d * d];
    for acc in partial {
        for (v, a) in values.iter_mut().zip(acc) {
            *v += a;
        }
    }
    let support = match state {
        CollectiveState::Pure(v) => {
            let nz = |x: &&C64| x.norm_sqr() > 1e-300;
            let first = v.iter().position(|x| nz(&x)).unwrap_or(0);
            let last = v.iter().rposition(|x| nz(&x)).unwrap_or(0);
            (first, last)
        }
        CollectiveState::Mixed(_) => (0, op.dim() - 1),
    };
    let bnorm = reach_norm(op, support, m_max);
    for m in 0..d {
        for l in m..d {
            let floor = 10.0 * (m + l + 1) as f64 * f64::EPSILON * bnorm.powi((m + l) as i32);
            if values[m * d + l].norm() < floor {
                values[m * d + l] = ZERO;
            }
        }
    }
    for m in 0..d {
        for l in 0..m {
            values[m * d + l] = values[l * d + m].conj();
        }
    }
    let t = MomentTable { m_max, values, shift: ZERO };
    check_finite(&t)?;
    Ok(t)
}

/// Moments of â − ⟨â⟩, computed with the shifted operator to avoid binomial cancellation.
pub fn centered_moments(op: &LadderOp, state: &CollectiveState, m_max: usize) -> Result<MomentTable> {
    let beta = op.expectation(state);
    let shifted = op.add(&LadderOp::identity(op.dim()).scale(-beta));
    let mut t = moments(&shifted, state, m_max)?;
    t.shift = beta;
    t.values[1] = ZERO;
    t.values[m_max + 1] = ZERO;
    Ok(t)
}

/// ξ_lm(α) via the three-term recursion in l from the two base cases.
/// Returns ξ_0m … ξ_{l_max,m}. Singular at α = 0.
pub fn xi_recursion(l_max: usize, m: usize, alpha: C64) -> Vec<C64> {
    let pi = std::f64::consts::PI;
    let r2 = alpha.norm_sqr();
    let e = 2.0 * (-2.0 * r2).exp() / pi;
    let base = C64::new(e * 2f64.powi(m as i32) / factorial(m), 0.0);
    let mut x = Vec::with_capacity(l_max + 1);
    x.push(base * alpha.powi(m as i32));
    if l_max >= 1 {
        x.push(base * alpha.powi(m as i32 - 1) * (2.0 * r2 - m as f64));
    }
    for l in 2..=l_max {
        let v = -(alpha.conj() * 2.0 * x[l - 2] + x[l - 1] * (m as f64 - l as f64 + 1.0 - 2.0 * r2)) / (alpha * l as f64);
        x.push(v);
    }
    x
}

/// ξ_lm(α) as the explicit k-sum, (2/π)e^{−2|α|²} Σ_k (2α)^{m−k}(2ᾱ)^{l−k}(−2)^k / ((m−k)!(l−k)!k!).
pub fn xi_direct(l: usize, m: usize, alpha: C64) -> C64 {
    let e = 2.0 * (-2.0 * alpha.norm_sqr()).exp() / std::f64::consts::PI;
    let mut s = ZERO;
    for k in 0..=l.min(m) {
        s += (alpha * 2.0).powu((m - k) as u32) * (alpha.conj() * 2.0).powu((l - k) as u32) * (-2f64).powi(k as i32)
            / (factorial(m - k) * factorial(l - k) * factorial(k));
    }
    s * e
}

/// Generalized Laguerre values L_0^{(a)}(x) … L_n^{(a)}(x).
fn laguerre(n: usize, a: f64, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if n >= 1 {
        out.push(1.0 + a - x);
    }
    for k in 1..n {
        let kf = k as f64;
        let v = ((2.0 * kf + 1.0 + a - x) * out[k] - (kf + a) * out[k - 1]) / (kf + 1.0);
        out.push(v);
    }
}

/// e^{−x/2}·L_k^{(a)}(x) for k = 0 … n, with a running exponent so large x cannot overflow.
fn laguerre_damped(n: usize, a: f64, x: f64, out: &mut Vec<f64>) {
    const BIG: f64 = 1e150;
    out.clear();
    let mut log_scale = -0.5 * x;
    let (mut p0, mut p1) = (1.0, 1.0 + a - x);
    out.push(log_scale.exp());
    if n >= 1 {
        out.push(p1 * log_scale.exp());
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0 + a - x) * p1 - (kf + a) * p0) / (kf + 1.0);
        (p0, p1) = (p1, p2);
        if p1.abs() > BIG {
            p0 /= BIG;
            p1 /= BIG;
            log_scale += BIG.ln();
        }
        out.push(p1 * log_scale.exp());
    }
}

/// ξ_lm(α) for l ≤ m through its Laguerre closed form
/// (2/π)e^{−2|α|²}(2α)^{m−l}(−2)^l L_l^{(m−l)}(2|α|²)/m!, which agrees with the recursion
/// and stays finite at α = 0; ξ_lm(α) = ξ_ml(ᾱ) covers l > m.
pub fn xi(l: usize, m: usize, alpha: C64) -> C64 {
    if l > m {
        return xi(m, l, alpha.conj());
    }
    let x = 2.0 * alpha.norm_sqr();
    let mut lag = Vec::new();
    laguerre(l, (m - l) as f64, x, &mut lag);
    let e = 2.0 * (-x).exp() / std::f64::consts::PI;
    (alpha * 2.0).powu((m - l) as u32) * (e * (-2f64).powi(l as i32) * lag[l] / factorial(m))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseGrid {
    /// Points per axis.
    pub points: usize,
    /// Half-width around the center; automatic when absent.
    pub half_width: Option<f64>,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        PhaseGrid { points: 201, half_width: None }
    }
}

/// W sampled on a square grid; `w[i * re.len() + j]` sits at α = re[j] + i·im[i].
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub w: Vec<f64>,
    /// Value of the highest moment shell's contribution on the grid norm.
    pub shell_drift: f64,
}

impl WignerGrid {
    pub fn cell_area(&self) -> f64 {
        (self.re[1] - self.re[0]) * (self.im[1] - self.im[0])
    }

    pub fn norm(&self) -> f64 {
        self.w.iter().sum::<f64>() * self.cell_area()
    }

    pub fn at(&self, i_im: usize, j_re: usize) -> f64 {
        self.w[i_im * self.re.len() + j_re]
    }

    pub fn min(&self) -> f64 {
        self.w.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// W(α) = Σ ⟨â†^m â^l⟩ ξ_lm(α − shift) on the grid.
pub fn wigner_from_moments(table: &MomentTable, spec: &PhaseGrid) -> Result<WignerGrid> {
    if spec.points < 3 {
        return Err(Error::Argument(format!("grid needs at least 3 points per axis, got {}", spec.points)));
    }
    check_finite(table)?;
    let half = match spec.half_width {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::Argument(format!("grid half-width must be > 0, got {h}"))),
        None => {
            let (vr, vi) = table.quadrature_variances();
            4.0 * vr.sqrt().max(vi.sqrt()).max(1.0)
        }
    };
    let center = table.shift + table.get(0, 1);
    let np = spec.points;
    let axis = |c: f64| -> Vec<f64> { (0..np).map(|i| c - half + 2.0 * half * i as f64 / (np - 1) as f64).collect() };
    let re = axis(center.re);
    let im = axis(center.im);

    // With m = l + a: coefficient T[l+a][l]·(−2)^l/(l+a)!, shared by all grid points.
    let mm = table.m_max;
    let shell_start = mm.saturating_sub(4);
    let coef: Vec<Vec<C64>> = (0..=mm)
        .map(|a| (0..=mm - a).map(|l| table.get(l + a, l) * ((-2f64).powi(l as i32) / factorial(l + a))).collect())
        .collect();
    let shift = table.shift;
    let rows = map_range(np, |i| {
        let mut lag = Vec::with_capacity(mm + 1);
        let mut row = Vec::with_capacity(np);
        let mut shell_row = 0.0;
        for &x_re in &re {
            let alpha = C64::new(x_re, im[i]) - shift;
            let x = 2.0 * alpha.norm_sqr();
            let mut zpow = C64::new(2.0 * (-0.5 * x).exp() / std::f64::consts::PI, 0.0);
            let (mut total, mut shell) = (0.0, 0.0);
            for (a, ca) in coef.iter().enumerate() {
                laguerre_damped(mm - a, a as f64, x, &mut lag);
                let (mut s, mut s_shell) = (ZERO, ZERO);
                for (l, c) in ca.iter().enumerate() {
                    let t = c * lag[l];
                    s += t;
                    if l + a >= shell_start {
                        s_shell += t;
                    }
                }
                let wgt = if a == 0 { 1.0 } else { 2.0 };
                total += wgt * (s * zpow).re;
                shell += wgt * (s_shell * zpow).re;
                zpow *= alpha * 2.0;
            }
            row.push(total);
            shell_row += shell;
        }
        (row, shell_row)
    });
    let mut w = Vec::with_capacity(np * np);
    let mut shell_sum = 0.0;
    for (r, s) in rows {
        w.extend(r);
        shell_sum += s;
    }
    let mut g = WignerGrid { re, im, w, shell_drift: 0.0 };
    g.shell_drift = (shell_sum * g.cell_area()).abs();
    if !g.w.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical("Wigner reconstruction produced non-finite values".into()));
    }
    if mm >= 5 && g.shell_drift > 1e-3 {
        return Err(Error::Convergence(format!(
            "Wigner norm moved by {:.3e} over the last 5 moment orders (m_max = {mm}); raise m_max",
            g.shell_drift
        )));
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhotonStatistics {
    pub p: Vec<f64>,
    /// Most negative raw value before clipping (0 when none).
    pub min_raw: f64,
    /// Largest partial-sum magnitude over the result, for the alternating-sum route.
    pub severity: Option<f64>,
    pub authoritative: bool,
}

impl PhotonStatistics {
    fn from_raw(raw: Vec<f64>, severity: Option<f64>) -> Result<Self> {
        let authoritative = severity.is_none_or(|s| s <= 1e8);
        let min_raw = raw.iter().copied().fold(0.0, f64::min);
        if !authoritative {
            return Ok(PhotonStatistics { p: raw, min_raw, severity, authoritative });
        }
        if min_raw < -1e-6 {
            return Err(Error::Numerical(format!("photon probability {min_raw:.3e} is negative beyond tolerance")));
        }
        let mut p: Vec<f64> = raw.iter().map(|x| x.max(0.0)).collect();
        if min_raw < 0.0 {
            let s: f64 = p.iter().sum();
            let raw_sum: f64 = raw.iter().sum();
            p.iter_mut().for_each(|x| *x *= raw_sum / s);
        }
        Ok(PhotonStatistics { p, min_raw, severity, authoritative })
    }

    /// Empirical distribution from a histogram.
    pub fn from_counts(counts: &[u64]) -> Self {
        let total: u64 = counts.iter().sum();
        let p = counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect();
        PhotonStatistics { p, min_raw: 0.0, severity: None, authoritative: true }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.p.iter().enumerate().map(|(k, x)| k as f64 * x).sum::<f64>() / self.total()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.p.iter().enumerate().map(|(k, x)| (k as f64 - m).powi(2) * x).sum::<f64>() / self.total()
    }

    pub fn l1_distance(&self, other: &PhotonStatistics) -> f64 {
        let n = self.p.len().max(other.p.len());
        (0..n).map(|k| (self.p.get(k).unwrap_or(&0.0) - other.p.get(k).unwrap_or(&0.0)).abs()).sum()
    }

    /// Two local maxima with a minimum at least `depth` (relative) below both.
    pub fn is_doubly_peaked(&self, depth: f64) -> bool {
        let p = &self.p;
        let peaks: Vec<usize> = (0..p.len())
            .filter(|&k| (k == 0 || p[k] > p[k - 1]) && (k + 1 == p.len() || p[k] >= p[k + 1]))
            .collect();
        for (i, &a) in peaks.iter().enumerate() {
            for &b in &peaks[i + 1..] {
                let dip = p[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
                if dip <= (1.0 - depth) * p[a].min(p[b]) {
                    return true;
                }
            }
        }
        false
    }
}

/// Largest photon number worth tabulating for a mean n̄.
pub fn photon_cutoff(nbar: f64) -> usize {
    let n = nbar.max(0.0);
    ((n + 8.0 * (n + 1.0).sqrt() + 10.0).ceil() as usize).min(400)
}

/// p_n = ∫ W(α) g_n(α) d²α with g_n = 2(−1)^n e^{−2|α|²} L_n(4|α|²), the kernel matching the
/// (2/π)-normalized Wigner function.
pub fn photon_statistics_from_wigner(w: &WignerGrid, k_max: usize) -> Result<PhotonStatistics> {
    let norm = w.norm();
    if (norm - 1.0).abs() > 1e-3 {
        return Err(Error::Numerical(format!("Wigner grid integrates to {norm}; widen or refine the grid")));
    }
    let nre = w.re.len();
    let rows = map_range(w.im.len(), |i| {
        let mut acc = vec![0.0; k_max + 1];
        let mut lag = Vec::with_capacity(k_max + 1);
        for j in 0..nre {
            let r2 = w.re[j] * w.re[j] + w.im[i] * w.im[i];
            let wv = w.w[i * nre + j] * 2.0;
            if wv == 0.0 {
                continue;
            }
            laguerre_damped(k_max, 0.0, 4.0 * r2, &mut lag);
            for (k, a) in acc.iter_mut().enumerate() {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                *a += s * wv * lag[k];
            }
        }
        acc
    });
    let da = w.cell_area();
    let mut raw = vec![0.0; k_max + 1];
    for r in rows {
        for (x, y) in raw.iter_mut().zip(r) {
            *x += y * da;
        }
    }
    let s: f64 = raw.iter().sum();
    if !(0.99..=1.01).contains(&s) {
        return Err(Error::Numerical(format!(
            "photon probabilities sum to {s:.6}; enlarge the grid or raise the photon cutoff"
        )));
    }
    PhotonStatistics::from_raw(raw, None)
}

/// p_n = Σ_m (−1)^{m−n}/(n!(m−n)!) ⟨â†^m â^m⟩.
pub fn photon_statistics_from_moments(table: &MomentTable) -> Result<PhotonStatistics> {
    let t = table.unshifted();
    let d = t.m_max + 1;
    let mut raw = vec![0.0; d];
    let mut worst: f64 = 1.0;
    for (n, r) in raw.iter_mut().enumerate() {
        let (mut s, mut big) = (0.0, 0.0f64);
        for m in n..d {
            let sign = if (m - n) % 2 == 0 { 1.0 } else { -1.0 };
            let term = sign * t.get(m, m).re / (factorial(n) * factorial(m - n));
            s += term;
            big = big.max(s.abs()).max(term.abs());
        }
        *r = s;
        if s.abs() > 1e-12 {
            worst = worst.max(big / s.abs());
        }
    }
    PhotonStatistics::from_raw(raw, Some(worst))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondOrder {
    pub g2: f64,
    pub mandel_q: f64,
    pub nbar: f64,
}

pub fn g2_and_mandel(table: &MomentTable) -> Result<SecondOrder> {
    let t = table.unshifted();
    if t.m_max < 2 {
        return Err(Error::Argument("g2 needs moments up to order 2".into()));
    }
    let nbar = t.get(1, 1).re;
    if !(nbar > 0.0) {
        return Err(Error::Numerical("g2 is undefined for zero mean photon number".into()));
    }
    let g2 = t.get(2, 2).re / (nbar * nbar);
    Ok(SecondOrder { g2, mandel_q: nbar * (g2 - 1.0), nbar })
}

/// values[k][l] = ⟨Â†^k Â^k B̂†^l B̂^l⟩ in exactly that operator order.
#[derive(Clone, Debug, PartialEq)]
pub struct JointMomentTable {
    pub values: Vec<Vec<C64>>,
}

pub fn joint_moments(a: &LadderOp, b: &LadderOp, state: &CollectiveState, k_max: usize, l_max: usize) -> Result<JointMomentTable> {
    if a.dim() != state.dim() || b.dim() != state.dim() {
        return Err(Error::Argument("joint moments need both operators on the state's ladder".into()));
    }
    if k_max > MAX_ORDER || l_max > MAX_ORDER {
        return Err(Error::Argument(format!("joint orders ({k_max}, {l_max}) exceed {MAX_ORDER}")));
    }
    let bdag = b.adjoint();
    let comps = components(state);
    let chunks = chunk_bounds(comps.len());
    let partial = map_range(chunks.len() - 1, |c| {
        let mut acc = vec![vec![ZERO; l_max + 1]; k_max + 1];
        for (w, v0) in &comps[chunks[c]..chunks[c + 1]] {
            // left[k] = Â^k v, the bra side of Â†^k
            let mut left = vec![v0.clone()];
            for k in 1..=k_max {
                let n = left[k - 1].apply(a);
                left.push(n);
            }
            let mut bl = v0.clone();
            for l in 0..=l_max {
                if l > 0 {
                    bl = bl.apply(b);
                }
                let mut phi = bl.clone();
                for _ in 0..l {
                    phi = phi.apply(&bdag);
                }
                for k in 0..=k_max {
                    if k > 0 {
                        phi = phi.apply(a);
                    }
                    acc[k][l] += left[k].dot(&phi) * *w;
                }
            }
        }
        acc
    });
    let mut values = vec![vec![ZERO; l_max + 1]; k_max + 1];
    for acc in partial {
        for k in 0..=k_max {
            for l in 0..=l_max {
                values[k][l] += acc[k][l];
            }
        }
    }
    if values.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("joint moments overflow; lower the orders".into()));
    }
    Ok(JointMomentTable { values })
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointStatistics {
    /// p[n][m]
    pub p: Vec<Vec<f64>>,
    pub pearson: f64,
    /// In nats.
    pub mutual_information: f64,
}

impl JointStatistics {
    pub fn marginal_a(&self) -> Vec<f64> {
        self.p.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        let m = self.p.first().map_or(0, |r| r.len());
        (0..m).map(|j| self.p.iter().map(|r| r[j]).sum()).collect()
    }
}

/// Pearson coefficient and mutual information of a joint table.
pub fn correlation_measures(p: &[Vec<f64>]) -> (f64, f64) {
    let pa: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let nb = p.first().map_or(0, |r| r.len());
    let pb: Vec<f64> = (0..nb).map(|j| p.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = pa.iter().sum();
    let mean = |q: &[f64]| q.iter().enumerate().map(|(k, x)| k as f64 * x).sum::<f64>() / total;
    let (ma, mb) = (mean(&pa), mean(&pb));
    let var = |q: &[f64], m: f64| q.iter().enumerate().map(|(k, x)| (k as f64 - m).powi(2) * x).sum::<f64>() / total;
    let (va, vb) = (var(&pa, ma), var(&pb, mb));
    let mut cov = 0.0;
    let mut mi = 0.0;
    for (n, row) in p.iter().enumerate() {
        for (m, &x) in row.iter().enumerate() {
            cov += (n as f64 - ma) * (m as f64 - mb) * x;
            if x > 0.0 && pa[n] > 0.0 && pb[m] > 0.0 {
                mi += x / total * (x * total / (pa[n] * pb[m])).ln();
            }
        }
    }
    cov /= total;
    let pearson = if va > 0.0 && vb > 0.0 { cov / (va * vb).sqrt() } else { 0.0 };
    (pearson, mi)
}

/// p_nm by the double alternating sum over k ≥ n, l ≥ m.
pub fn joint_statistics(jm: &JointMomentTable) -> Result<JointStatistics> {
    let kd = jm.values.len();
    let ld = jm.values.first().map_or(0, |r| r.len());
    let c = |n: usize, k: usize| -> f64 {
        let s = if (k - n) % 2 == 0 { 1.0 } else { -1.0 };
        s / (factorial(n) * factorial(k - n))
    };
    let mut p = vec![vec![0.0; ld]; kd];
    let mut most_negative: f64 = 0.0;
    for (n, row) in p.iter_mut().enumerate() {
        for (m, out) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in n..kd {
                for l in m..ld {
                    s += c(n, k) * c(m, l) * jm.values[k][l].re;
                }
            }
            if !s.is_finite() {
                return Err(Error::Numerical("joint statistics overflow".into()));
            }
            most_negative = most_negative.min(s);
            *out = s;
        }
    }
    if most_negative < -1e-6 {
        return Err(Error::Numerical(format!(
            "joint probability {most_negative:.3e} is negative beyond tolerance; the alternating sum is unstable here"
        )));
    }
    for x in p.iter_mut().flatten() {
        *x = x.max(0.0);
    }
    let (pearson, mutual_information) = correlation_measures(&p);
    Ok(JointStatistics { p, pearson, mutual_information })
}

/// Pearson coefficient of the photon counts from the order-(2, 2) corner of a joint table:
/// cov = ⟨Â†ÂB̂†B̂⟩ − n̄_A n̄_B and var = ⟨Â†²Â²⟩ + n̄ − n̄². Needs no alternating sums.
pub fn pearson_from_moments(jm: &JointMomentTable) -> Result<f64> {
    let v = &jm.values;
    if v.len() < 3 || v[0].len() < 3 {
        return Err(Error::Argument("Pearson coefficient needs joint moments up to order 2 in each mode".into()));
    }
    let (na, nb) = (v[1][0].re, v[0][1].re);
    let va = v[2][0].re + na - na * na;
    let vb = v[0][2].re + nb - nb * nb;
    if !(va > 0.0 && vb > 0.0) {
        return Err(Error::Numerical(format!("photon-number variances ({va:.3e}, {vb:.3e}) are not positive")));
    }
    Ok((v[1][1].re - na * nb) / (va * vb).sqrt())
}

/// Lanczos data for a Hermitian operator started from ψ: the basis and the tridiagonal T.
struct Krylov {
    basis: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    norm2: f64,
}

/// Ritz values and eigenvectors of the leading k×k block of T.
struct Ritz {
    values: Vec<f64>,
    vecs: Vec<Vec<f64>>,
    norm2: f64,
}

/// Krylov dimension for the joint statistics; the leading `KRYLOV_CHECK` block must agree.
const KRYLOV: usize = 200;
const KRYLOV_CHECK: usize = 150;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn lanczos(apply: &dyn Fn(&[C64], &mut [C64]), psi: &[C64], kmax: usize) -> Krylov {
    let norm2 = dot(psi, psi).re;
    let mut q: Vec<C64> = psi.iter().map(|z| z / norm2.sqrt()).collect();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut w = vec![ZERO; psi.len()];
    let mut scale: f64 = 0.0;
    for _ in 0..kmax.min(psi.len()) {
        apply(&q, &mut w);
        let a = dot(&q, &w).re;
        alpha.push(a);
        basis.push(q.clone());
        scale = scale.max(a.abs());
        // Classical Gram-Schmidt, repeated only when the first pass lost most of the norm.
        let before = dot(&w, &w).re;
        for pass in 0..2 {
            let c: Vec<C64> = basis.iter().map(|b| dot(b, &w)).collect();
            for (b, c) in basis.iter().zip(&c) {
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            if pass == 0 && dot(&w, &w).re > 0.25 * before {
                break;
            }
        }
        let bnorm = dot(&w, &w).re.sqrt();
        if bnorm <= 1e-13 * scale.max(1.0) {
            break;
        }
        beta.push(bnorm);
        q = w.iter().map(|z| z / bnorm).collect();
    }
    beta.truncate(alpha.len().saturating_sub(1));
    Krylov { basis, alpha, beta, norm2 }
}

impl Krylov {
    fn ritz(&self, k: usize) -> Result<Ritz> {
        let k = k.min(self.alpha.len());
        let t = Mat::<f64>::from_fn(k, k, |i, j| {
            if i == j {
                self.alpha[i]
            } else if i == j + 1 {
                self.beta[j]
            } else if j == i + 1 {
                self.beta[i]
            } else {
                0.0
            }
        });
        let evd = t
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Numerical(format!("Lanczos eigensolver failed: {e:?}")))?;
        let u = evd.U();
        Ok(Ritz {
            values: (0..k).map(|i| evd.S()[i]).collect(),
            vecs: (0..k).map(|i| (0..k).map(|r| u[(r, i)]).collect()).collect(),
            norm2: self.norm2,
        })
    }
}

/// p_n(x) = xⁿe^{−x}/n! in log space; x is clamped at 0.
fn poisson_weight(n: usize, x: f64) -> f64 {
    let x = x.max(0.0);
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let lf: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * x.ln() - x - lf).exp()
}

impl Ritz {
    /// Coefficients c_n (in the Krylov basis) of p_n(H)ψ for n = 0..=k_max.
    fn coefficients(&self, k_max: usize) -> Vec<Vec<f64>> {
        let k = self.values.len();
        let s = self.norm2.sqrt();
        (0..=k_max)
            .map(|n| {
                let mut c = vec![0.0; k];
                for (th, v) in self.values.iter().zip(&self.vecs) {
                    let f = poisson_weight(n, *th) * v[0] * s;
                    c.iter_mut().zip(v).for_each(|(c, x)| *c += x * f);
                }
                c
            })
            .collect()
    }

    /// ⟨ψ|p_n(H)|ψ⟩ by Gauss quadrature on the Ritz values.
    fn marginal(&self, k_max: usize) -> Vec<f64> {
        (0..=k_max)
            .map(|n| self.values.iter().zip(&self.vecs).map(|(th, v)| v[0] * v[0] * poisson_weight(n, *th)).sum::<f64>() * self.norm2)
            .collect()
    }
}

/// Rungs [lo, hi) that ψ occupies (|ψ_k|² above 1e-40 of the total) widened by the Krylov reach.
fn krylov_window(psi: &[C64], reach: usize) -> (usize, usize) {
    let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let keep = |z: &&C64| z.norm_sqr() > 1e-40 * total;
    let first = psi.iter().position(|z| keep(&z)).unwrap_or(0);
    let last = psi.iter().rposition(|z| keep(&z)).unwrap_or(psi.len() - 1);
    (first.saturating_sub(reach), (last + reach + 1).min(psi.len()))
}

fn restrict(op: &LadderOp, lo: usize, hi: usize) -> LadderOp {
    LadderOp { diag: op.diag[lo..hi].to_vec(), up: op.up[lo..hi - 1].to_vec(), down: op.down[lo..hi - 1].to_vec() }
}

/// Lanczos on Â†Â from ψ, with the settled-marginal check between the two Krylov dimensions.
fn number_krylov(op: &LadderOp, psi: &[C64], k_max: usize) -> Result<(Krylov, Ritz)> {
    let adj = op.adjoint();
    let apply = |x: &[C64], y: &mut [C64]| {
        let mut t = vec![ZERO; x.len()];
        op.apply(x, &mut t);
        adj.apply(&t, y);
    };
    let kr = lanczos(&apply, psi, KRYLOV);
    let full = kr.ritz(KRYLOV)?;
    if kr.alpha.len() == KRYLOV {
        let coarse = kr.ritz(KRYLOV_CHECK)?;
        let d = full.marginal(k_max).iter().zip(coarse.marginal(k_max)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if d > 1e-6 {
            return Err(Error::Convergence(format!(
                "Krylov marginals moved by {d:.3e} between dimensions {KRYLOV_CHECK} and {KRYLOV}"
            )));
        }
    }
    Ok((kr, full))
}

/// Joint photon statistics treating Â, Â†, B̂, B̂† as commuting (the same bosonic approximation that
/// drops ⟨b†[dn, dn†]b⟩): p_nm = ⟨ψ|p_n(Â†Â)·p_m(B̂†B̂)|ψ⟩ with Poisson weights p_n, evaluated by
/// Lanczos on each number operator. No alternating sums, so it works at large n̄ where the
/// moment inversion cancels catastrophically. Pure states only.
pub fn joint_statistics_krylov(a: &LadderOp, b: &LadderOp, state: &CollectiveState, k_max: usize, l_max: usize) -> Result<JointStatistics> {
    let mut out = joint_statistics_krylov_pairs(&[a.clone(), b.clone()], &[k_max, l_max], &[(0, 1)], state)?;
    Ok(out.remove(0))
}

/// [`joint_statistics_krylov`] for several pairs drawn from `ops`, sharing one Lanczos run per operator.
/// `cutoffs[i]` is the photon-number cutoff for `ops[i]`.
pub fn joint_statistics_krylov_pairs(
    ops: &[LadderOp],
    cutoffs: &[usize],
    pairs: &[(usize, usize)],
    state: &CollectiveState,
) -> Result<Vec<JointStatistics>> {
    let CollectiveState::Pure(psi) = state else {
        return Err(Error::Capability("Krylov joint statistics need a pure state".into()));
    };
    if ops.len() != cutoffs.len() {
        return Err(Error::Argument("one photon cutoff per operator is required".into()));
    }
    if ops.iter().any(|op| op.dim() != psi.len()) {
        return Err(Error::Argument("joint statistics need the operators on the state's ladder".into()));
    }
    if pairs.iter().any(|&(i, j)| i >= ops.len() || j >= ops.len()) {
        return Err(Error::Argument("pair index out of range".into()));
    }
    // Â†Â moves two rungs per application.
    let (lo, hi) = krylov_window(psi, 2 * KRYLOV + 2);
    let psi_w = &psi[lo..hi];
    let mut runs: Vec<Option<(Krylov, Vec<Vec<f64>>)>> = (0..ops.len()).map(|_| None).collect();
    for &(i, j) in pairs {
        for k in [i, j] {
            if runs[k].is_none() {
                let (kr, ritz) = number_krylov(&restrict(&ops[k], lo, hi), psi_w, cutoffs[k])?;
                let c = ritz.coefficients(cutoffs[k]);
                runs[k] = Some((kr, c));
            }
        }
    }
    pairs
        .iter()
        .map(|&(i, j)| {
            let (ka, ca) = runs[i].as_ref().expect("run computed above");
            let (kb, cb) = runs[j].as_ref().expect("run computed above");
            let gram: Vec<Vec<C64>> = map_range(ka.basis.len(), |r| kb.basis.iter().map(|v| dot(&ka.basis[r], v)).collect());
            let mut p = vec![vec![0.0; cutoffs[j] + 1]; cutoffs[i] + 1];
            for (n, row) in p.iter_mut().enumerate() {
                let left: Vec<C64> = (0..kb.basis.len()).map(|s| (0..ca[n].len()).map(|r| gram[r][s] * ca[n][r]).sum()).collect();
                for (m, out) in row.iter_mut().enumerate() {
                    *out = left.iter().zip(&cb[m]).map(|(g, c)| g.re * c).sum::<f64>().max(0.0);
                }
            }
            let (pearson, mutual_information) = correlation_measures(&p);
            Ok(JointStatistics { p, pearson, mutual_information })
        })
        .collect()
}

/// Truncation-order policy: start, step and cap for the automatic m_max search.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OrderPolicy {
    pub start: usize,
    pub step: usize,
    pub cap: usize,
    pub tolerance: f64,
}

impl Default for OrderPolicy {
    fn default() -> Self {
        OrderPolicy { start: 20, step: 10, cap: MAX_ORDER, tolerance: 1e-3 }
    }
}

/// Everything the statistics stage reports for one mode and state.
#[derive(Clone, Debug)]
pub struct ModeStatistics {
    pub raw: MomentTable,
    pub centered: MomentTable,
    pub wigner: WignerGrid,
    pub photons: PhotonStatistics,
    pub second_order: SecondOrder,
    /// False when the order search stopped at the cap or fell back to an earlier order.
    pub converged: bool,
}

/// Grows m_max until the Wigner norm and photon statistics settle. A higher order that
/// fails outright (negativity, drift) after a lower one succeeded leaves the lower result.
pub fn reconstruct(op: &LadderOp, state: &CollectiveState, policy: &OrderPolicy, grid: &PhaseGrid) -> Result<ModeStatistics> {
    let cap = policy.cap.min(MAX_ORDER);
    if policy.step == 0 {
        return Err(Error::Config("order policy step must be positive".into()));
    }
    let centered_full = centered_moments(op, state, cap)?;
    let raw = centered_full.unshifted().truncated(cap);
    let second_order = g2_and_mandel(&raw)?;
    let k_max = photon_cutoff(second_order.nbar);
    let mut prev: Option<ModeStatistics> = None;
    let mut m = policy.start.min(cap);
    loop {
        let t = centered_full.truncated(m);
        match wigner_from_moments(&t, grid).and_then(|w| photon_statistics_from_wigner(&w, k_max).map(|p| (w, p))) {
            Ok((w, p)) => {
                let cur = ModeStatistics { raw: raw.clone(), centered: t, wigner: w, photons: p, second_order, converged: false };
                if let Some(pp) = &prev {
                    if (cur.wigner.norm() - pp.wigner.norm()).abs() < policy.tolerance
                        && cur.photons.l1_distance(&pp.photons) < policy.tolerance
                    {
                        return Ok(ModeStatistics { converged: true, ..cur });
                    }
                }
                if m >= cap {
                    return Ok(cur);
                }
                prev = Some(cur);
            }
            Err(e) => {
                if let Some(pp) = prev {
                    return Ok(pp);
                }
                if m >= cap {
                    return Err(Error::Convergence(format!(
                        "no truncation order up to {cap} gave a valid reconstruction (last: {e})"
                    )));
                }
            }
        }
        m = (m + policy.step).min(cap);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_rows() {
        let b = binomials(6);
        assert_eq!(b[5], vec![1.0, 5.0, 10.0, 10.0, 5.0, 1.0]);
    }

    #[test]
    fn laguerre_closed_forms() {
        let mut v = Vec::new();
        laguerre(2, 1.5, 0.3, &mut v);
        let want = 0.5 * (0.09 - 2.0 * 3.5 * 0.3 + 3.5 * 2.5);
        assert!((v[2] - want).abs() < 1e-14);
    }
}

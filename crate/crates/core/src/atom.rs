//! Discretized 1D soft-Coulomb atom with complex absorbing boundaries.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::linalg::{SymTridiagonal, C64};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Half-box length.
    pub l: f64,
    pub dx: f64,
    /// Onset of the absorbing potential.
    pub x0: f64,
}

impl GridSpec {
    pub fn new(l: f64, dx: f64) -> Self {
        GridSpec { l, dx, x0: 0.9 * l }
    }

    /// Number of grid points, which is also the number of levels.
    pub fn level_count(&self) -> usize {
        (2.0 * self.l / self.dx).round() as usize
    }

    /// Points symmetric about the origin, spaced by `dx`.
    pub fn positions(&self) -> Vec<f64> {
        let m = self.level_count();
        let c = (m as f64 - 1.0) / 2.0;
        (0..m).map(|j| (j as f64 - c) * self.dx).collect()
    }

    fn check_shape(&self) -> Result<()> {
        if !(self.l > 0.0 && self.dx > 0.0) {
            return Err(Error::Config(format!("grid needs L > 0 and dx > 0 (L={}, dx={})", self.l, self.dx)));
        }
        if self.level_count() < 3 {
            return Err(Error::Config(format!("grid has M = {} < 3 points", self.level_count())));
        }
        if !(self.x0 >= 0.0 && self.x0 <= self.l) {
            return Err(Error::Config(format!("absorber onset x0={} outside [0, L]", self.x0)));
        }
        Ok(())
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::new(150.0, 0.7)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftCoulombParams {
    pub a: f64,
    pub cab: f64,
}

impl Default for SoftCoulombParams {
    fn default() -> Self {
        SoftCoulombParams { a: 0.816, cab: 5e-4 }
    }
}

pub fn soft_coulomb(x: f64, a: f64) -> f64 {
    -1.0 / (x * x + a * a).sqrt()
}

pub fn absorbing(x: f64, x0: f64, cab: f64) -> C64 {
    let e = x.abs() - x0;
    if e > 0.0 {
        C64::new(0.0, -cab * e * e * e)
    } else {
        C64::new(0.0, 0.0)
    }
}

pub fn build_potential(grid: &GridSpec, params: &SoftCoulombParams) -> Result<Vec<C64>> {
    grid.check_shape()?;
    if !(params.a > 0.0) {
        return Err(Error::Config(format!("softening a must be > 0, got {}", params.a)));
    }
    if !(params.cab >= 0.0) {
        return Err(Error::Config(format!("absorber strength cab must be >= 0, got {}", params.cab)));
    }
    if grid.dx >= std::f64::consts::SQRT_2 * params.a {
        return Err(Error::Config(format!(
            "grid violates dx < sqrt(2)*a: {} >= {}",
            grid.dx,
            std::f64::consts::SQRT_2 * params.a
        )));
    }
    Ok(grid
        .positions()
        .into_iter()
        .map(|x| soft_coulomb(x, params.a) + absorbing(x, grid.x0, params.cab))
        .collect())
}

/// Kinetic stencil coefficients (diagonal, off-diagonal) for second-order differences.
pub fn kinetic_stencil(dx: f64) -> (f64, f64) {
    (1.0 / (dx * dx), -0.5 / (dx * dx))
}

pub fn build_hamiltonian(grid: &GridSpec, potential: &[C64]) -> Result<Mat<C64>> {
    let m = grid.level_count();
    if potential.len() != m {
        return Err(Error::Argument(format!("potential has {} samples, grid has {}", potential.len(), m)));
    }
    let (d, o) = kinetic_stencil(grid.dx);
    Ok(Mat::from_fn(m, m, |i, j| {
        if i == j {
            potential[i] + d
        } else if i.abs_diff(j) == 1 {
            C64::new(o, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

#[derive(Clone, Debug)]
pub struct AtomicSpectrum {
    pub grid: GridSpec,
    pub energies: Vec<C64>,
    /// Eigenvectors as columns, sampled on the grid, c-normalized.
    pub states: Mat<C64>,
    /// D_mn = Σ ψ_m x ψ_n dx.
    pub dipole: Mat<C64>,
    /// Field-free Hamiltonian when it has the finite-difference tridiagonal shape.
    pub tridiagonal: Option<SymTridiagonal>,
}

impl AtomicSpectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Diagonal energy matrix W.
    pub fn energy_matrix(&self) -> Mat<C64> {
        let m = self.len();
        Mat::from_fn(m, m, |i, j| if i == j { self.energies[i] } else { C64::new(0.0, 0.0) })
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0].re
    }

    pub fn bound_count(&self) -> usize {
        self.energies.iter().filter(|w| w.re < 0.0).count()
    }

    /// Inverse of the eigenvector matrix implied by c-orthonormality: Uᵀ·dx.
    pub fn inverse_states(&self) -> Mat<C64> {
        let m = self.len();
        let dx = self.grid.dx;
        Mat::from_fn(m, m, |i, j| self.states[(j, i)] * dx)
    }

    /// max |Uᵀ U dx − I|, the c-orthonormality defect.
    pub fn biorthogonality_defect(&self) -> f64 {
        let inv = self.inverse_states();
        let p = &inv * &self.states;
        let m = self.len();
        let mut worst = 0.0f64;
        for j in 0..m {
            for i in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p[(i, j)] - target).norm());
            }
        }
        worst
    }
}

/// Eigen-decomposition of a complex-symmetric Hamiltonian sampled on `grid`.
///
/// Parity-symmetric Hamiltonians are split into even and odd blocks first, so
/// that mirror-image pairs localized in the two absorbers (nearly degenerate)
/// come out with definite parity. Any remaining near-degenerate clusters are
/// re-orthogonalized under the c-product.
pub fn diagonalize(grid: &GridSpec, h: MatRef<'_, C64>) -> Result<AtomicSpectrum> {
    let m = h.nrows();
    if m != h.ncols() || m != grid.level_count() {
        return Err(Error::Argument(format!(
            "Hamiltonian is {}x{}, grid has {} points",
            h.nrows(),
            h.ncols(),
            grid.level_count()
        )));
    }
    let blocks = if is_parity_symmetric(h) { parity_blocks(m) } else { vec![(0..m).map(|i| vec![(i, 1.0)]).collect()] };
    let mut pairs: Vec<(C64, Vec<C64>)> = Vec::with_capacity(m);
    for basis in &blocks {
        let n = basis.len();
        let hb = Mat::from_fn(n, n, |a, b| {
            let mut acc = C64::new(0.0, 0.0);
            for &(p, tp) in &basis[a] {
                for &(q, tq) in &basis[b] {
                    acc += h[(p, q)] * (tp * tq);
                }
            }
            acc
        });
        let evd = hb.eigen().map_err(|e| Error::Numerical(format!("eigensolver failed to converge: {e:?} (block of {n}, M={m})")))?;
        let (s, u) = (evd.S(), evd.U());
        let mut vecs: Vec<(C64, Vec<C64>)> = (0..n)
            .map(|k| {
                let mut v = vec![C64::new(0.0, 0.0); m];
                for (a, col) in basis.iter().enumerate() {
                    for &(p, tp) in col {
                        v[p] += u[(a, k)] * tp;
                    }
                }
                (s[k], v)
            })
            .collect();
        c_orthogonalize_clusters(&mut vecs)?;
        pairs.extend(vecs);
    }
    pairs.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));

    let dx = grid.dx;
    let mut energies = Vec::with_capacity(m);
    let mut states = Mat::<C64>::zeros(m, m);
    for (col, (w, v)) in pairs.iter().enumerate() {
        energies.push(*w);
        let norm: C64 = v.iter().map(|z| z * z).sum::<C64>() * dx;
        if norm.norm() < 1e-300 {
            return Err(Error::Numerical(format!("eigenvector {col} is self-orthogonal under the c-product")));
        }
        let mut scale = norm.sqrt().inv();
        // Fix the residual sign: the largest component gets a positive real part.
        let imax = (0..m).fold(0, |best, i| if v[i].norm() > v[best].norm() { i } else { best });
        if (v[imax] * scale).re < 0.0 {
            scale = -scale;
        }
        for i in 0..m {
            states[(i, col)] = v[i] * scale;
        }
    }
    let x = grid.positions();
    // D = Uᵀ X U dx
    let xu = Mat::from_fn(m, m, |i, j| states[(i, j)] * (x[i] * dx));
    let dipole = states.transpose() * &xu;
    Ok(AtomicSpectrum { grid: *grid, energies, states, dipole, tridiagonal: as_tridiagonal(h) })
}

fn is_parity_symmetric(h: MatRef<'_, C64>) -> bool {
    let m = h.nrows();
    (0..m).all(|j| (0..m).all(|i| h[(i, j)] == h[(m - 1 - i, m - 1 - j)]))
}

/// Sparse orthonormal bases of the even and odd subspaces under i ↦ m−1−i.
fn parity_blocks(m: usize) -> Vec<Vec<Vec<(usize, f64)>>> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    if m % 2 == 1 {
        even.push(vec![(m / 2, 1.0)]);
    }
    for k in 0..m / 2 {
        let (lo, hi) = (m / 2 - 1 - k, m - m / 2 + k);
        even.push(vec![(lo, r), (hi, r)]);
        odd.push(vec![(lo, -r), (hi, r)]);
    }
    vec![even, odd]
}

/// Gram–Schmidt under the bilinear c-product inside clusters of (nearly) equal eigenvalues.
fn c_orthogonalize_clusters(vecs: &mut [(C64, Vec<C64>)]) -> Result<()> {
    let n = vecs.len();
    let scale = vecs.iter().map(|(w, _)| w.norm()).fold(1.0, f64::max);
    let tol = 1e-7 * scale;
    let cdot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<C64>();
    for i in 0..n {
        for j in 0..i {
            if (vecs[i].0 - vecs[j].0).norm() > tol {
                continue;
            }
            let (head, tail) = vecs.split_at_mut(i);
            let vj = &head[j].1;
            let vi = &mut tail[0].1;
            let njj = cdot(vj, vj);
            if njj.norm() < 1e-300 {
                return Err(Error::Numerical("self-orthogonal vector in a degenerate cluster".into()));
            }
            let c = cdot(vj, vi) / njj;
            for (a, b) in vi.iter_mut().zip(vj) {
                *a -= c * b;
            }
        }
    }
    Ok(())
}

fn as_tridiagonal(h: MatRef<'_, C64>) -> Option<SymTridiagonal> {
    let m = h.nrows();
    if m < 2 {
        return None;
    }
    let off = h[(0, 1)];
    if off.im != 0.0 {
        return None;
    }
    for j in 0..m {
        for i in 0..m {
            let ok = match i.abs_diff(j) {
                0 => true,
                1 => h[(i, j)] == off,
                _ => h[(i, j)] == C64::new(0.0, 0.0),
            };
            if !ok {
                return None;
            }
        }
    }
    Some(SymTridiagonal { diag: (0..m).map(|i| h[(i, i)]).collect(), off: off.re })
}

/// Builds and diagonalizes the default atomic model in one call.
pub fn solve_atom(grid: &GridSpec, params: &SoftCoulombParams) -> Result<AtomicSpectrum> {
    let v = build_potential(grid, params)?;
    let h = build_hamiltonian(grid, &v)?;
    diagonalize(grid, h.as_ref())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl GridCheck {
    /// Relative slack; positive when the inequality holds.
    pub fn margin(&self) -> f64 {
        (self.rhs - self.lhs) / self.rhs.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub checks: Vec<GridCheck>,
}

impl GridReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&GridCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Checks `dx < √2·a` and `L·dx > 2/ω_d`.
pub fn validate_grid(grid: &GridSpec, params: &SoftCoulombParams, omega_d: f64) -> GridReport {
    let rhs = std::f64::consts::SQRT_2 * params.a;
    let spacing = GridCheck { name: "dx < sqrt(2)*a".into(), lhs: grid.dx, rhs, pass: grid.dx < rhs };
    let lhs = 2.0 / omega_d;
    let prod = grid.l * grid.dx;
    // Written as 2/ω_d < L·dx so that `margin` keeps its sign convention.
    let extent = GridCheck { name: "L*dx > 2/omega_d".into(), lhs, rhs: prod, pass: prod > lhs };
    GridReport { checks: vec![spacing, extent] }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_symmetric() {
        let g = GridSpec::new(10.0, 0.7);
        let x = g.positions();
        for j in 0..x.len() {
            assert!((x[j] + x[x.len() - 1 - j]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_coarse_grid() {
        let g = GridSpec::new(10.0, 1.2);
        let err = build_potential(&g, &SoftCoulombParams::default()).unwrap_err();
        assert!(err.to_string().contains("dx < sqrt(2)*a"));
    }
}

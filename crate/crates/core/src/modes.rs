//! Per-harmonic mode matrices and their photonic operators on the Dicke ladder.

use serde::{Deserialize, Serialize};

use crate::linalg::C64;
use crate::propagation::{Mat2, SpectralDipole};
use crate::spin::{CollectiveState, LadderOp, SpinSpace};
use crate::units::C_LIGHT;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Frequency window (a.u.).
    pub domega: f64,
    /// Solid angle (sr).
    pub solid_angle: f64,
}

impl DetectorSpec {
    /// Half a drive quantum of bandwidth over a third of the sphere.
    pub fn for_drive(omega_d: f64) -> Self {
        DetectorSpec { domega: 0.5 * omega_d, solid_angle: 4.0 * std::f64::consts::PI / 3.0 }
    }

    pub fn validate(&self, omega_d: f64) -> Result<()> {
        if !(self.domega > 0.0 && self.domega <= omega_d) {
            return Err(Error::Config(format!("need 0 < domega <= omega_d, got {}", self.domega)));
        }
        if !(self.solid_angle > 0.0 && self.solid_angle <= 4.0 * std::f64::consts::PI) {
            return Err(Error::Config(format!("need 0 < solid angle <= 4pi, got {}", self.solid_angle)));
        }
        Ok(())
    }

    /// √((dΩ/4π)·ω³/(πc³)·dω), the factor converting d̃(ω) into a mode matrix.
    pub fn coupling(&self, omega: f64) -> f64 {
        let pi = std::f64::consts::PI;
        (self.solid_angle / (4.0 * pi) * omega.powi(3) / (pi * C_LIGHT.powi(3)) * self.domega).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicMode {
    pub n: u32,
    pub dn: Mat2,
}

/// Pauli decomposition dn = (α/N)·I + (u + iv)·σ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliDecomposition {
    pub alpha: C64,
    pub u: [f64; 3],
    pub v: [f64; 3],
}

impl PauliDecomposition {
    /// u + iv as complex components.
    pub fn w(&self) -> [C64; 3] {
        [0, 1, 2].map(|i| C64::new(self.u[i], self.v[i]))
    }

    /// Rebuilds dn for atom count `n`.
    pub fn rebuild(&self, n: usize) -> Mat2 {
        let c = self.alpha / n as f64;
        let [wx, wy, wz] = self.w();
        let i = C64::new(0.0, 1.0);
        // Pauli matrices in (g, e) order: σ_y = [[0, i], [−i, 0]], σ_z = diag(−1, 1).
        [[c - wz, wx + i * wy], [wx - i * wy, c + wz]]
    }

    /// ⟨â⟩ for a product state with Bloch direction `s` (unit vector).
    pub fn classical_field(&self, n: usize, s: [f64; 3]) -> C64 {
        let w = self.w();
        self.alpha + (w[0] * s[0] + w[1] * s[1] + w[2] * s[2]) * n as f64
    }
}

pub fn build_mode_matrix(dipole: &SpectralDipole, n: u32, det: &DetectorSpec, omega_d: f64) -> Result<Mat2> {
    let omega = n as f64 * omega_d;
    let d = dipole
        .at(omega)
        .map_err(|_| Error::Argument(format!("harmonic {n} (omega = {omega:.6}) is not on the spectral-dipole grid")))?;
    let g = det.coupling(omega);
    Ok(crate::propagation::map2(&d, |z| z * g))
}

pub fn build_modes(dipole: &SpectralDipole, orders: &[u32], det: &DetectorSpec, omega_d: f64) -> Result<Vec<HarmonicMode>> {
    orders
        .iter()
        .map(|&n| Ok(HarmonicMode { n, dn: build_mode_matrix(dipole, n, det, omega_d)? }))
        .collect()
}

pub fn pauli_decompose(dn: &Mat2, n: usize) -> PauliDecomposition {
    let i = C64::new(0.0, 1.0);
    let c = 0.5 * (dn[0][0] + dn[1][1]);
    let wx = 0.5 * (dn[0][1] + dn[1][0]);
    let wy = (dn[0][1] - dn[1][0]) / (2.0 * i);
    let wz = 0.5 * (dn[1][1] - dn[0][0]);
    PauliDecomposition { alpha: c * n as f64, u: [wx.re, wy.re, wz.re], v: [wx.im, wy.im, wz.im] }
}

/// â = c·N + w_z·S_z + (d21·S⁺ + d12·S⁻)/2, the second-quantized b†·dn·b restricted to the
/// symmetric sector; the vacuum term is left out, so use it only inside normally ordered moments.
pub fn photonic_operator(dn: &Mat2, space: SpinSpace) -> LadderOp {
    let n = space.atoms();
    let d = space.dim();
    let c = 0.5 * (dn[0][0] + dn[1][1]);
    let wz = 0.5 * (dn[1][1] - dn[0][0]);
    let mut op = LadderOp::zeros(d);
    for k in 0..d {
        op.diag[k] = c * n as f64 + wz * space.sz(k);
    }
    for k in 0..n {
        let amp = 0.5 * space.raise_amplitude(k);
        op.up[k] = dn[1][0] * amp;
        op.down[k] = dn[0][1] * amp;
    }
    op
}

/// ⟨b†[dn, dn†]b⟩, the term dropped when treating each mode as bosonic.
pub fn commutator_check(dn: &Mat2, state: &CollectiveState) -> Result<f64> {
    let space = state.space()?;
    let adj = [[dn[0][0].conj(), dn[1][0].conj()], [dn[0][1].conj(), dn[1][1].conj()]];
    let mul = |a: &Mat2, b: &Mat2| {
        let mut r = [[C64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        r
    };
    let (p, q) = (mul(dn, &adj), mul(&adj, dn));
    let comm = [[p[0][0] - q[0][0], p[0][1] - q[0][1]], [p[1][0] - q[1][0], p[1][1] - q[1][1]]];
    Ok(photonic_operator(&comm, space).expectation(state).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_scales_with_window() {
        let a = DetectorSpec { domega: 0.02, solid_angle: 1.0 };
        let b = DetectorSpec { domega: 0.04, ..a };
        assert!((b.coupling(1.3) / a.coupling(1.3) - 2f64.sqrt()).abs() < 1e-14);
    }
}

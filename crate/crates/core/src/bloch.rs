//! Atomic Wigner function on the Bloch sphere from the multipole expansion
//! W(θ, φ) = Σ_KQ ρ_KQ Y_KQ(θ, φ) with ρ_KQ = Tr(ρ T_KQ†).
//!
//! The tensors T_KQ of spin j = N/2 are built band by band: the Q-th band of
//! T_KQ is an orthogonal polynomial in m times the (J⁺)^Q matrix element, so
//! each band family comes out of a reorthogonalized Stieltjes process.

use crate::linalg::C64;
use crate::spin::CollectiveState;
use crate::{Error, Result};

/// Largest N accepted before the multipole construction becomes too slow and lossy.
pub const MAX_BLOCH_ATOMS: usize = 400;

/// Sample grid with W[i][j] at (theta[i], phi[j]).
#[derive(Clone, Debug, PartialEq)]
pub struct BlochWigner {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

impl BlochWigner {
    /// ∫ W dΩ by trapezoid in θ (with the sin θ Jacobian) and a periodic rule in φ.
    pub fn integral(&self) -> f64 {
        let nt = self.theta.len();
        let np = self.phi.len();
        if nt < 2 || np < 1 {
            return 0.0;
        }
        let dphi = 2.0 * std::f64::consts::PI / np as f64;
        let row = |i: usize| self.w[i].iter().sum::<f64>() * dphi * self.theta[i].sin();
        let mut s = 0.0;
        for i in 0..nt - 1 {
            s += 0.5 * (row(i) + row(i + 1)) * (self.theta[i + 1] - self.theta[i]);
        }
        s
    }

    /// (θ, φ) of the largest sample.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (f64::MIN, 0, 0);
        for (i, r) in self.w.iter().enumerate() {
            for (j, &x) in r.iter().enumerate() {
                if x > best.0 {
                    best = (x, i, j);
                }
            }
        }
        (self.theta[best.1], self.phi[best.2])
    }
}

/// `n` points from 0 to π inclusive.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| std::f64::consts::PI * i as f64 / (n.max(2) - 1) as f64).collect()
}

/// `n` points on [0, 2π).
pub fn phi_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * std::f64::consts::PI * i as f64 / n as f64).collect()
}

/// Band vectors t[K−Q][m] = ⟨m+Q|T_KQ|m⟩ for K = Q..2j, m indexing 0..2j−Q (m = −j + index).
fn tensor_band(two_j: usize, q: usize) -> Vec<Vec<f64>> {
    let len = two_j + 1 - q;
    let j = 0.5 * two_j as f64;
    // ln ⟨m+Q|(J⁺)^Q|m⟩ = ½ Σ_{r<Q} ln[(j − m − r)(j + m + r + 1)]
    let weight: Vec<f64> = (0..len)
        .map(|i| {
            let m = -j + i as f64;
            (0..q).map(|r| ((j - m - r as f64) * (j + m + r as f64 + 1.0)).ln()).sum::<f64>() * 0.5
        })
        .collect();
    let wmax = weight.iter().copied().fold(f64::MIN, f64::max);
    let w0: Vec<f64> = weight.iter().map(|l| (l - wmax).exp()).collect();
    let mcoord: Vec<f64> = (0..len).map(|i| (i as f64 - 0.5 * (len - 1) as f64) / len as f64).collect();

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(len);
    let normalize = |v: &mut Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    };
    let mut v = w0;
    normalize(&mut v);
    basis.push(v);
    for _ in 1..len {
        let last = basis.last().unwrap();
        let mut v: Vec<f64> = last.iter().zip(&mcoord).map(|(a, m)| a * m).collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        normalize(&mut v);
        basis.push(v);
    }
    // Each vector is (positive-leading polynomial in m)·weight; the standard phase adds (−1)^Q.
    if q % 2 == 1 {
        for b in &mut basis {
            b.iter_mut().for_each(|x| *x = -*x);
        }
    }
    basis
}

/// Normalized associated Legendre values P̄_K^Q(cos θ) with Condon–Shortley phase, so that
/// Y_KQ = P̄_K^Q e^{iQφ}. Returned as table[Q][K − Q].
fn legendre_table(kmax: usize, theta: f64) -> Vec<Vec<f64>> {
    let (x, s) = (theta.cos(), theta.sin());
    let pi4 = 4.0 * std::f64::consts::PI;
    let mut table = Vec::with_capacity(kmax + 1);
    let mut pqq = (1.0 / pi4).sqrt();
    for q in 0..=kmax {
        if q > 0 {
            pqq *= -((2 * q + 1) as f64 / (2 * q) as f64).sqrt() * s;
        }
        let mut col = Vec::with_capacity(kmax + 1 - q);
        col.push(pqq);
        if q < kmax {
            col.push(((2 * q + 3) as f64).sqrt() * x * pqq);
        }
        for k in q + 2..=kmax {
            let kf = k as f64;
            let qf = q as f64;
            let a = ((4.0 * kf * kf - 1.0) / (kf * kf - qf * qf)).sqrt();
            let b = (((kf - 1.0).powi(2) - qf * qf) / (4.0 * (kf - 1.0).powi(2) - 1.0)).sqrt();
            let v = a * (x * col[k - q - 1] - b * col[k - q - 2]);
            col.push(v);
        }
        table.push(col);
    }
    table
}

/// State multipoles ρ_KQ for Q ≥ 0, as rho[Q][K − Q].
pub fn state_multipoles(state: &CollectiveState) -> Result<Vec<Vec<C64>>> {
    state.validate()?;
    let two_j = state.atoms();
    if two_j > MAX_BLOCH_ATOMS {
        return Err(Error::Capability(format!(
            "Bloch-sphere Wigner limited to N <= {MAX_BLOCH_ATOMS} (got {two_j}); use the phase-space sampler"
        )));
    }
    let qmax = match state {
        CollectiveState::Pure(_) => two_j,
        CollectiveState::Mixed(_) => 0,
    };
    let mut rho = Vec::with_capacity(qmax + 1);
    for q in 0..=qmax {
        // ⟨m+Q|ρ|m⟩ along the band
        let band: Vec<C64> = match state {
            CollectiveState::Pure(v) => (0..=two_j - q).map(|i| v[i + q] * v[i].conj()).collect(),
            CollectiveState::Mixed(p) => p.iter().map(|x| C64::new(*x, 0.0)).collect(),
        };
        if band.iter().all(|z| z.norm_sqr() == 0.0) {
            rho.push(vec![C64::new(0.0, 0.0); two_j + 1 - q]);
            continue;
        }
        let t = tensor_band(two_j, q);
        rho.push(t.iter().map(|tk| tk.iter().zip(&band).map(|(a, b)| b * *a).sum()).collect());
    }
    Ok(rho)
}

pub fn atomic_wigner_bloch(state: &CollectiveState, theta: &[f64], phi: &[f64]) -> Result<BlochWigner> {
    let rho = state_multipoles(state)?;
    let kmax = state.atoms();
    let qmax = rho.len() - 1;
    let mut w = Vec::with_capacity(theta.len());
    for &th in theta {
        let leg = legendre_table(kmax, th);
        let f: Vec<C64> = (0..=qmax)
            .map(|q| rho[q].iter().zip(&leg[q]).map(|(r, p)| r * *p).sum())
            .collect();
        let row = phi
            .iter()
            .map(|&ph| {
                let mut s = f[0].re;
                for (q, fq) in f.iter().enumerate().skip(1) {
                    s += 2.0 * (fq * C64::from_polar(1.0, q as f64 * ph)).re;
                }
                s
            })
            .collect();
        w.push(row);
    }
    Ok(BlochWigner { theta: theta.to_vec(), phi: phi.to_vec(), w })
}

/// Polar profile w(θ) = sin θ · W(θ) for a state symmetric about the z axis.
pub fn polar_profile(state: &CollectiveState, theta: &[f64]) -> Result<Vec<f64>> {
    let g = atomic_wigner_bloch(state, theta, &[0.0])?;
    Ok(g.w.iter().zip(theta).map(|(r, t)| r[0] * t.sin()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_are_orthonormal() {
        let t = tensor_band(6, 2);
        for a in 0..t.len() {
            for b in 0..t.len() {
                let d: f64 = t[a].iter().zip(&t[b]).map(|(x, y)| x * y).sum();
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn legendre_low_orders() {
        let th = 0.7f64;
        let t = legendre_table(2, th);
        let pi = std::f64::consts::PI;
        assert!((t[0][1] - (3.0 / (4.0 * pi)).sqrt() * th.cos()).abs() < 1e-14);
        assert!((t[1][0] + (3.0 / (8.0 * pi)).sqrt() * th.sin()).abs() < 1e-14);
    }
}

//! Phase-space Monte Carlo: classical collective spins drawn from a fitted polar
//! distribution, mapped affinely to harmonic fields with added vacuum noise.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bloch::{polar_profile, theta_grid, MAX_BLOCH_ATOMS};
use crate::linalg::C64;
use crate::modes::{pauli_decompose, HarmonicMode};
use crate::par::map_range;
use crate::spin::{Axis, CollectiveState, TwistingParams};
use crate::stats::{correlation_measures, JointStatistics, PhaseGrid, PhotonStatistics, WignerGrid};
use crate::{Error, Result};

/// Vacuum noise per quadrature has standard deviation 1/√2, so E|z|² = 1.
pub const VACUUM_INTENSITY: f64 = 1.0;
/// Trajectories per independent random stream.
const CHUNK: usize = 4096;
/// Domain tags keep the sampling and noise streams disjoint for equal seeds.
const TAG_SPIN: u64 = 0x5350_494e;
const TAG_NOISE: u64 = 0x4e4f_4953;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// All atoms excited.
    Up,
    /// Half-excited Dicke state.
    Half,
    /// All atoms in the ground state.
    Down,
}

impl Family {
    pub fn theta0(self) -> f64 {
        match self {
            Family::Up => 0.0,
            Family::Half => std::f64::consts::FRAC_PI_2,
            Family::Down => std::f64::consts::PI,
        }
    }

    /// Published scaling coefficients (a1, a2) for σ = a1·N^(−a2).
    pub fn default_coefficients(self) -> (f64, f64) {
        match self {
            Family::Up | Family::Down => (0.8887, 0.4741),
            Family::Half => (0.8956, 0.9549),
        }
    }

    /// The quantum state this family approximates.
    pub fn state(self, n: usize) -> Result<CollectiveState> {
        match self {
            Family::Up => Ok(CollectiveState::excited(n)),
            Family::Down => Ok(CollectiveState::ground(n)),
            Family::Half => CollectiveState::half_dicke(n),
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "up" | "excited" | "⇑" => Ok(Family::Up),
            "half" | "dicke" | "n/2" => Ok(Family::Half),
            "down" | "ground" | "⇓" => Ok(Family::Down),
            other => Err(Error::Capability(format!("no phase-space family '{other}' (use up, half or down)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaDistribution {
    pub family: Family,
    pub theta0: f64,
    pub sigma: f64,
    pub a1: f64,
    pub a2: f64,
}

impl ThetaDistribution {
    pub fn new(family: Family, n: usize, a1: f64, a2: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("need at least one atom".into()));
        }
        let sigma = a1 * (n as f64).powf(-a2);
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Argument(format!("sigma = a1·N^-a2 must be positive, got {sigma}")));
        }
        Ok(ThetaDistribution { family, theta0: family.theta0(), sigma, a1, a2 })
    }

    /// Fixed-width distribution, for tests and limits.
    pub fn with_sigma(family: Family, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Argument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(ThetaDistribution { family, theta0: family.theta0(), sigma, a1: sigma, a2: 0.0 })
    }

    /// Unnormalized p(θ) = |sin θ|·exp(−(θ − θ0)²/2σ²).
    pub fn density(&self, theta: f64) -> f64 {
        let d = theta - self.theta0;
        theta.sin().abs() * (-d * d / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// Proposal interval, clipped to [0, π].
    pub fn support(&self) -> (f64, f64) {
        let pi = std::f64::consts::PI;
        ((self.theta0 - 6.0 * self.sigma).max(0.0), (self.theta0 + 6.0 * self.sigma).min(pi))
    }

    /// Upper bound of p on the support from |sin θ| ≤ min(1, θ, π − θ).
    fn envelope(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        let g = |t: f64, c: f64| (-(t - c) * (t - c) / (2.0 * s2)).exp();
        // max of θ·g(θ) sits at θ* = (θ0 + √(θ0² + 4σ²))/2
        let peak = |c: f64| {
            let t = 0.5 * (c + (c * c + 4.0 * s2).sqrt());
            t * g(t, c)
        };
        let pi = std::f64::consts::PI;
        1f64.min(peak(self.theta0)).min(peak(pi - self.theta0))
    }
}

/// σ from the published coefficients for `family` at atom count `n`.
pub fn fit_theta_distribution(family: Family, n: usize) -> Result<ThetaDistribution> {
    let (a1, a2) = family.default_coefficients();
    ThetaDistribution::new(family, n, a1, a2)
}

/// Least-squares σ of A·p(θ) against the exact polar profile sin θ·W(θ) at atom count `n`.
pub fn refit_sigma(family: Family, n: usize) -> Result<f64> {
    if n > MAX_BLOCH_ATOMS {
        return Err(Error::Capability(format!("sigma refit needs the Bloch Wigner, limited to N <= {MAX_BLOCH_ATOMS}")));
    }
    let state = family.state(n)?;
    let theta = theta_grid(1441);
    let w = polar_profile(&state, &theta)?;
    let ww: f64 = w.iter().map(|x| x * x).sum();
    let residual = |ln_sigma: f64| {
        let d = ThetaDistribution { family, theta0: family.theta0(), sigma: ln_sigma.exp(), a1: 0.0, a2: 0.0 };
        let f: Vec<f64> = theta.iter().map(|&t| d.density(t)).collect();
        let wf: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
        let ff: f64 = f.iter().map(|x| x * x).sum();
        ww - wf * wf / ff
    };
    // Coarse scan then golden section around the best bracket.
    let (lo, hi) = (1e-3f64.ln(), 3f64.ln());
    let steps = 200;
    let xs: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let best = (0..=steps).min_by(|&a, &b| residual(xs[a]).total_cmp(&residual(xs[b]))).unwrap();
    let (mut a, mut b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(steps)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (residual(c), residual(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            (d, fd) = (c, fc);
            c = b - phi * (b - a);
            fc = residual(c);
        } else {
            a = c;
            (c, fc) = (d, fd);
            d = a + phi * (b - a);
            fd = residual(d);
        }
    }
    Ok((0.5 * (a + b)).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaFit {
    pub a1: f64,
    pub a2: f64,
    /// (N, fitted σ) pairs behind the regression.
    pub points: Vec<(usize, f64)>,
}

/// Refits σ at each N and regresses ln σ = ln a1 − a2 ln N.
pub fn refit_coefficients(family: Family, ns: &[usize]) -> Result<SigmaFit> {
    if ns.len() < 2 {
        return Err(Error::Argument("coefficient refit needs at least two atom counts".into()));
    }
    let points = ns.iter().map(|&n| Ok((n, refit_sigma(family, n)?))).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(SigmaFit { a1: (my - slope * mx).exp(), a2: -slope, points })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEnsemble {
    pub atoms: usize,
    pub seed: u64,
    /// Classical spin vectors with |S| = N.
    pub points: Vec<[f64; 3]>,
}

fn stream(seed: u64, tag: u64, sub: u64, chunk: usize) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&sub.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(chunk as u64);
    rng
}

fn chunked<T: Send>(r: usize, f: impl Fn(usize, std::ops::Range<usize>) -> Vec<T> + Sync + Send) -> Vec<T> {
    let chunks = r.div_ceil(CHUNK);
    map_range(chunks, |c| f(c, c * CHUNK..((c + 1) * CHUNK).min(r))).into_iter().flatten().collect()
}

/// Rejection-samples θ from p(θ) on the clipped ±6σ window and φ uniformly.
pub fn sample_initial_conditions(dist: &ThetaDistribution, n: usize, r: usize, seed: u64) -> Result<TrajectoryEnsemble> {
    if r == 0 {
        return Err(Error::Argument("need at least one trajectory".into()));
    }
    if n == 0 {
        return Err(Error::Argument("need at least one atom".into()));
    }
    let (lo, hi) = dist.support();
    let bound = dist.envelope();
    let nf = n as f64;
    let points = chunked(r, |c, range| {
        let mut rng = stream(seed, TAG_SPIN, 0, c);
        range
            .map(|_| {
                let theta = loop {
                    let t = lo + (hi - lo) * rng.random::<f64>();
                    if rng.random::<f64>() * bound <= dist.density(t) {
                        break t;
                    }
                };
                let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                let s = theta.sin();
                [nf * s * phi.cos(), nf * s * phi.sin(), nf * theta.cos()]
            })
            .collect()
    });
    Ok(TrajectoryEnsemble { atoms: n, seed, points })
}

fn rotate_vec(v: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let dot = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
    let cross = [axis[1] * v[2] - axis[2] * v[1], axis[2] * v[0] - axis[0] * v[2], axis[0] * v[1] - axis[1] * v[0]];
    [0, 1, 2].map(|i| v[i] * c + cross[i] * s + axis[i] * dot * (1.0 - c))
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean_spin(&self) -> [f64; 3] {
        let k = self.points.len() as f64;
        [0, 1, 2].map(|i| self.points.iter().map(|p| p[i]).sum::<f64>() / k)
    }

    /// Right-handed rigid rotation, the classical image of exp(−i·angle·S_axis/2).
    pub fn rotated(&self, axis: Axis, angle: f64) -> Self {
        let a = match axis {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        };
        TrajectoryEnsemble { points: self.points.iter().map(|&p| rotate_vec(p, a, angle)).collect(), ..self.clone() }
    }

    /// Classical twisting: each spin precesses about z at ω0 + 4ω_J S_z/N.
    pub fn twisted(&self, p: &TwistingParams) -> Result<Self> {
        if !(p.t_h >= 0.0) {
            return Err(Error::Argument(format!("hold time must be >= 0, got {}", p.t_h)));
        }
        let nf = self.atoms as f64;
        let points = self
            .points
            .iter()
            .map(|&s| {
                let phase = (p.omega0 + 4.0 * p.omega_j * s[2] / nf) * p.t_h;
                rotate_vec(s, [0.0, 0.0, 1.0], phase)
            })
            .collect();
        Ok(TrajectoryEnsemble { points, ..self.clone() })
    }
}

/// Classical field samples of one harmonic, vacuum noise included.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSamples {
    pub harmonic: u32,
    pub alpha: Vec<C64>,
    pub noise_intensity: f64,
}

/// α^(r) = z^(r) + α_n + (u + iv)·S^(r) with z complex Gaussian, E|z|² = 1.
pub fn classical_fields(ens: &TrajectoryEnsemble, mode: &HarmonicMode, seed: u64) -> FieldSamples {
    let pd = pauli_decompose(&mode.dn, ens.atoms);
    let w = pd.w();
    let sd = (0.5 * VACUUM_INTENSITY).sqrt();
    let pts = &ens.points;
    let alpha = chunked(pts.len(), |c, range| {
        let mut rng = stream(seed, TAG_NOISE, mode.n as u64, c);
        range
            .map(|i| {
                let (x, y): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                let s = pts[i];
                C64::new(sd * x, sd * y) + pd.alpha + w[0] * s[0] + w[1] * s[1] + w[2] * s[2]
            })
            .collect()
    });
    FieldSamples { harmonic: mode.n, alpha, noise_intensity: VACUUM_INTENSITY }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalStatistics {
    /// Histogram of round(|α|²), noise included.
    pub photons: PhotonStatistics,
    /// Normalized 2-D histogram of the samples.
    pub density: WignerGrid,
    /// Vacuum-subtracted mean intensity.
    pub nbar: Estimate,
    /// Vacuum-subtracted ⟨|β|⁴⟩/⟨|β|²⟩².
    pub g2: Estimate,
    pub mandel_q: Estimate,
    /// Raw E|α|², noise included.
    pub mean_intensity: Estimate,
}

/// Square grid of bin centers, same extent rule as the quantum Wigner grids.
pub fn density_histogram(samples: &[C64], grid: &PhaseGrid) -> Result<WignerGrid> {
    let np = grid.points;
    if np < 3 {
        return Err(Error::Argument(format!("grid needs at least 3 points per axis, got {np}")));
    }
    let k = samples.len() as f64;
    let mean: C64 = samples.iter().sum::<C64>() / k;
    let half = match grid.half_width {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::Argument(format!("grid half-width must be > 0, got {h}"))),
        None => {
            let vr = samples.iter().map(|z| (z.re - mean.re).powi(2)).sum::<f64>() / k;
            let vi = samples.iter().map(|z| (z.im - mean.im).powi(2)).sum::<f64>() / k;
            4.0 * vr.sqrt().max(vi.sqrt()).max(1.0)
        }
    };
    let h = 2.0 * half / (np - 1) as f64;
    let axis = |c: f64| -> Vec<f64> { (0..np).map(|i| c - half + h * i as f64).collect() };
    let (re, im) = (axis(mean.re), axis(mean.im));
    let mut w = vec![0.0; np * np];
    let bin = |x: f64, c: f64| {
        let b = ((x - (c - half)) / h).round();
        (b >= 0.0 && b < np as f64).then_some(b as usize)
    };
    for z in samples {
        if let (Some(j), Some(i)) = (bin(z.re, mean.re), bin(z.im, mean.im)) {
            w[i * np + j] += 1.0;
        }
    }
    let scale = 1.0 / (k * h * h);
    w.iter_mut().for_each(|x| *x *= scale);
    Ok(WignerGrid { re, im, w, shell_drift: 0.0 })
}

fn photon_count(z: &C64) -> usize {
    z.norm_sqr().round() as usize
}

/// Histogram, density and vacuum-subtracted moments of a field ensemble.
pub fn classical_statistics(f: &FieldSamples, grid: &PhaseGrid) -> Result<ClassicalStatistics> {
    let r = f.alpha.len();
    if r < 100 {
        return Err(Error::Argument(format!("statistics need at least 100 trajectories, got {r}")));
    }
    let kmax = f.alpha.iter().map(photon_count).max().unwrap_or(0);
    let mut counts = vec![0u64; kmax + 1];
    for z in &f.alpha {
        counts[photon_count(z)] += 1;
    }
    let photons = PhotonStatistics::from_counts(&counts);
    let density = density_histogram(&f.alpha, grid)?;

    let rf = r as f64;
    let i2: Vec<f64> = f.alpha.iter().map(|z| z.norm_sqr()).collect();
    let m2 = i2.iter().sum::<f64>() / rf;
    let m4 = i2.iter().map(|x| x * x).sum::<f64>() / rf;
    let v22 = i2.iter().map(|x| (x - m2).powi(2)).sum::<f64>() / (rf - 1.0);
    let v44 = i2.iter().map(|x| (x * x - m4).powi(2)).sum::<f64>() / (rf - 1.0);
    let v24 = i2.iter().map(|x| (x - m2) * (x * x - m4)).sum::<f64>() / (rf - 1.0);
    let s = f.noise_intensity;
    let n = m2 - s;
    if !(n > 0.0) {
        return Err(Error::Numerical(format!("vacuum-subtracted intensity {n:.3e} is not positive; raise R or the mode scale")));
    }
    let q4 = m4 - 4.0 * s * m2 + 2.0 * s * s;
    let g2 = q4 / (n * n);
    // Delta method on (m2, m4); gradients of g2 and Q = q4/n − n.
    let var = |a: f64, b: f64| ((a * a * v22 + 2.0 * a * b * v24 + b * b * v44) / rf).max(0.0).sqrt();
    let dg_dm2 = -4.0 * s / (n * n) - 2.0 * q4 / (n * n * n);
    let dg_dm4 = 1.0 / (n * n);
    let dq_dm2 = -4.0 * s / n - q4 / (n * n) - 1.0;
    let dq_dm4 = 1.0 / n;
    Ok(ClassicalStatistics {
        photons,
        density,
        nbar: Estimate { value: n, stderr: (v22 / rf).sqrt() },
        g2: Estimate { value: g2, stderr: var(dg_dm2, dg_dm4) },
        mandel_q: Estimate { value: q4 / n - n, stderr: var(dq_dm2, dq_dm4) },
        mean_intensity: Estimate { value: m2, stderr: (v22 / rf).sqrt() },
    })
}

/// Joint photon-count table of two harmonics sampled on the same trajectories.
pub fn classical_joint(a: &FieldSamples, b: &FieldSamples) -> Result<JointStatistics> {
    if a.alpha.len() != b.alpha.len() {
        return Err(Error::Argument("joint statistics need the same trajectories for both harmonics".into()));
    }
    let r = a.alpha.len();
    if r < 100 {
        return Err(Error::Argument(format!("statistics need at least 100 trajectories, got {r}")));
    }
    let ka = a.alpha.iter().map(photon_count).max().unwrap_or(0);
    let kb = b.alpha.iter().map(photon_count).max().unwrap_or(0);
    let mut p = vec![vec![0.0; kb + 1]; ka + 1];
    for (x, y) in a.alpha.iter().zip(&b.alpha) {
        p[photon_count(x)][photon_count(y)] += 1.0 / r as f64;
    }
    let (pearson, mutual_information) = correlation_measures(&p);
    Ok(JointStatistics { p, pearson, mutual_information })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_bounds_density() {
        for (fam, s) in [(Family::Up, 0.05), (Family::Half, 0.3), (Family::Down, 1.2)] {
            let d = ThetaDistribution::with_sigma(fam, s).unwrap();
            let (lo, hi) = d.support();
            let m = (0..=10000).map(|i| d.density(lo + (hi - lo) * i as f64 / 1e4)).fold(0.0, f64::max);
            assert!(m <= d.envelope() * (1.0 + 1e-12));
            assert!(m >= 0.5 * d.envelope());
        }
    }

    #[test]
    fn rotation_matches_quantum_sign() {
        let v = rotate_vec([0.0, 0.0, -1.0], [0.0, 1.0, 0.0], -std::f64::consts::FRAC_PI_2);
        assert!((v[0] - 1.0).abs() < 1e-15 && v[2].abs() < 1e-15);
    }
}

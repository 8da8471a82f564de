//! Time-ordered evolution under the classical drive and the compressed 2×2 dynamical matrices.
//!
//! Two equivalent steppers are provided. [`propagate`] evolves only the two
//! initial eigenvectors in the position basis, where the Hamiltonian is
//! tridiagonal, and projects back onto the eigenbasis to form o(t). This is
//! exact because o(t) only reads the first two columns of F. [`propagate_dense`]
//! exponentiates the full energy-basis generator (W − E D)dt each step and keeps
//! all of F; it is the reference used for small grids and for invariants on F.

use faer::{Mat, MatRef};

use crate::atom::AtomicSpectrum;
use crate::linalg::{expm, expm_multiply_tridiag, TaylorWork, C64, I};
use crate::pulse::{classical_field, PropagationConfig, PulseSpec};
use crate::{Error, Result};

/// Row-major 2×2 complex matrix.
pub type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
pub const MAT2_ZERO: Mat2 = [[ZERO, ZERO], [ZERO, ZERO]];

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicalMatrixSeries {
    pub times: Vec<f64>,
    pub values: Vec<Mat2>,
}

impl DynamicalMatrixSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }

    pub fn scaled(&self, s: C64) -> Self {
        DynamicalMatrixSeries {
            times: self.times.clone(),
            values: self.values.iter().map(|m| map2(m, |z| z * s)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.times != other.times {
            return Err(Error::Argument("series are sampled on different time grids".into()));
        }
        Ok(DynamicalMatrixSeries {
            times: self.times.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| zip2(a, b, |x, y| x + y)).collect(),
        })
    }
}

pub fn map2(m: &Mat2, f: impl Fn(C64) -> C64) -> Mat2 {
    [[f(m[0][0]), f(m[0][1])], [f(m[1][0]), f(m[1][1])]]
}

pub fn zip2(a: &Mat2, b: &Mat2, f: impl Fn(C64, C64) -> C64) -> Mat2 {
    [[f(a[0][0], b[0][0]), f(a[0][1], b[0][1])], [f(a[1][0], b[1][0]), f(a[1][1], b[1][1])]]
}

fn check_inputs(spectrum: &AtomicSpectrum, pulse: &PulseSpec, cfg: &PropagationConfig, obs: &[MatRef<'_, C64>]) -> Result<()> {
    pulse.validate()?;
    cfg.validate()?;
    let m = spectrum.len();
    if m < 2 {
        return Err(Error::Argument("need at least two levels".into()));
    }
    for (k, o) in obs.iter().enumerate() {
        if o.nrows() != m || o.ncols() != m {
            return Err(Error::Argument(format!("observable {k} is {}x{}, expected {m}x{m}", o.nrows(), o.ncols())));
        }
    }
    Ok(())
}

/// How F† is formed in the (non-orthonormal) eigenbasis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Adjoint {
    /// F† S with the Gram matrix S = U†U·dx, so that o_ij = ⟨ψ_i(t)|Ô|ψ_j(t)⟩
    /// in the physical inner product.
    #[default]
    Metric,
    /// Plain conjugate transpose of the coefficient matrix.
    Plain,
}

/// o_ij = l_i† O r_j for column pairs of `l` and `r`.
fn contract(o: MatRef<'_, C64>, l: MatRef<'_, C64>, r: MatRef<'_, C64>, c0: usize) -> Mat2 {
    let m = o.nrows();
    let oc = o * r.subcols(c0, 2);
    let mut out = MAT2_ZERO;
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let mut s = ZERO;
            for k in 0..m {
                s += l[(k, c0 + i)].conj() * oc[(k, j)];
            }
            *v = s;
        }
    }
    out
}

/// U†U·dx
pub fn gram_matrix(spectrum: &AtomicSpectrum) -> Mat<C64> {
    let u = &spectrum.states;
    let mut s = u.adjoint() * u;
    let dx = spectrum.grid.dx;
    for j in 0..s.ncols() {
        for i in 0..s.nrows() {
            s[(i, j)] *= dx;
        }
    }
    s
}

const BATCH: usize = 128;

/// Propagates the two lowest eigenstates and records o(t) for every observable.
///
/// Each step applies the exponentials of `cfg.stepper` to the position-basis
/// Hamiltonian. Samples are taken at t = 0, dt, …, t_f.
pub fn propagate(
    spectrum: &AtomicSpectrum,
    pulse: &PulseSpec,
    cfg: &PropagationConfig,
    observables: &[MatRef<'_, C64>],
    adjoint: Adjoint,
) -> Result<Vec<DynamicalMatrixSeries>> {
    check_inputs(spectrum, pulse, cfg, observables)?;
    let Some(h0) = spectrum.tridiagonal.as_ref() else {
        return propagate_dense(spectrum, pulse, cfg, observables, adjoint, |_, _| Ok(()));
    };
    let m = spectrum.len();
    let steps = cfg.steps();
    let dt = cfg.effective_dt();
    let x = spectrum.grid.positions();
    let uinv = spectrum.inverse_states();
    let dx = spectrum.grid.dx;
    let udag = Mat::from_fn(m, m, |i, j| spectrum.states[(j, i)].conj() * dx);

    let mut psi: [Vec<C64>; 2] = [
        (0..m).map(|i| spectrum.states[(i, 0)]).collect(),
        (0..m).map(|i| spectrum.states[(i, 1)]).collect(),
    ];
    let stages = cfg.stepper.stages();
    let mut h = h0.clone();
    let mut work = TaylorWork::default();
    let mut out: Vec<DynamicalMatrixSeries> = observables
        .iter()
        .map(|_| DynamicalMatrixSeries { times: Vec::with_capacity(steps + 1), values: Vec::with_capacity(steps + 1) })
        .collect();

    let mut snap = Mat::<C64>::zeros(m, 2 * BATCH);
    let mut snap_times = Vec::with_capacity(BATCH);
    let flush = |snap: &Mat<C64>, times: &mut Vec<f64>, out: &mut [DynamicalMatrixSeries]| {
        let n = times.len();
        let coeffs = &uinv * snap.as_ref().subcols(0, 2 * n);
        // Metric adjoint: c† S = (U†φ dx)†, obtained without forming S.
        let left = match adjoint {
            Adjoint::Metric => Some(&udag * snap.as_ref().subcols(0, 2 * n)),
            Adjoint::Plain => None,
        };
        let l = left.as_ref().map(|l| l.as_ref()).unwrap_or(coeffs.as_ref());
        for (series, o) in out.iter_mut().zip(observables) {
            for (b, &t) in times.iter().enumerate() {
                series.times.push(t);
                series.values.push(contract(*o, l, coeffs.as_ref(), 2 * b));
            }
        }
        times.clear();
    };

    for step in 0..=steps {
        let t = step as f64 * dt;
        let b = snap_times.len();
        for (c, p) in psi.iter().enumerate() {
            for i in 0..m {
                snap[(i, 2 * b + c)] = p[i];
            }
        }
        snap_times.push(t);
        if snap_times.len() == BATCH {
            flush(&snap, &mut snap_times, &mut out);
        }
        if step == steps {
            break;
        }
        for stage in &stages {
            // Stage generator: (Σ weights)·H0 − (Σ weight·E(t_k))·x, times dt.
            let wsum = stage[0].1 + stage[1].1;
            let e: f64 = stage.iter().map(|&(c, a)| a * classical_field(t + c * dt, pulse)).sum();
            for i in 0..m {
                h.diag[i] = h0.diag[i] * wsum - x[i] * e;
            }
            h.off = h0.off * wsum;
            for p in psi.iter_mut() {
                expm_multiply_tridiag(&h, dt, p, &mut work);
            }
        }
        if !psi.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Numerical(format!("wavefunction blew up at step {step} (t = {t})")));
        }
    }
    if !snap_times.is_empty() {
        flush(&snap, &mut snap_times, &mut out);
    }
    Ok(out)
}

/// Energy-basis reference stepper keeping the full evolution matrix.
///
/// `inspect` is called with (step, F) after every step, including step 0.
pub fn propagate_dense(
    spectrum: &AtomicSpectrum,
    pulse: &PulseSpec,
    cfg: &PropagationConfig,
    observables: &[MatRef<'_, C64>],
    adjoint: Adjoint,
    mut inspect: impl FnMut(usize, MatRef<'_, C64>) -> Result<()>,
) -> Result<Vec<DynamicalMatrixSeries>> {
    check_inputs(spectrum, pulse, cfg, observables)?;
    let gram = match adjoint {
        Adjoint::Metric => Some(gram_matrix(spectrum)),
        Adjoint::Plain => None,
    };
    let m = spectrum.len();
    let steps = cfg.steps();
    let dt = cfg.effective_dt();
    let d = &spectrum.dipole;
    let w = &spectrum.energies;
    let stages = cfg.stepper.stages();
    let mut f = Mat::<C64>::identity(m, m);
    let mut out: Vec<DynamicalMatrixSeries> = observables
        .iter()
        .map(|_| DynamicalMatrixSeries { times: Vec::with_capacity(steps + 1), values: Vec::with_capacity(steps + 1) })
        .collect();
    for step in 0..=steps {
        let t = step as f64 * dt;
        inspect(step, f.as_ref())?;
        let cols = f.as_ref().subcols(0, 2);
        let left = gram.as_ref().map(|g| g * cols);
        let l = left.as_ref().map(|l| l.as_ref()).unwrap_or(cols);
        for (series, o) in out.iter_mut().zip(observables) {
            series.times.push(t);
            series.values.push(contract(*o, l, cols, 0));
        }
        if step == steps {
            break;
        }
        for stage in &stages {
            let wsum = stage[0].1 + stage[1].1;
            let e: f64 = stage.iter().map(|&(c, a)| a * classical_field(t + c * dt, pulse)).sum();
            let gen = Mat::from_fn(m, m, |i, j| {
                let hij = if i == j { w[i] * wsum - d[(i, j)] * e } else { -d[(i, j)] * e };
                -I * hij * dt
            });
            let p = expm(gen.as_ref()).map_err(|err| Error::Numerical(format!("step {step}: {err}")))?;
            f = &p * &f;
        }
        if !f.is_all_finite() {
            return Err(Error::Numerical(format!("evolution matrix blew up at step {step} (t = {t})")));
        }
    }
    Ok(out)
}

/// Dipole series o(t) for O = D, the only observable the pipeline needs.
pub fn propagate_dipole(spectrum: &AtomicSpectrum, pulse: &PulseSpec, cfg: &PropagationConfig) -> Result<DynamicalMatrixSeries> {
    let mut v = propagate(spectrum, pulse, cfg, &[spectrum.dipole.as_ref()], Adjoint::Metric)?;
    Ok(v.remove(0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDipole {
    pub frequencies: Vec<f64>,
    pub values: Vec<Mat2>,
}

impl SpectralDipole {
    /// Value at `omega`, which must be one of the sampled frequencies (within 1e-9 relative).
    pub fn at(&self, omega: f64) -> Result<Mat2> {
        self.frequencies
            .iter()
            .position(|&w| (w - omega).abs() <= 1e-9 * omega.abs().max(1.0))
            .map(|k| self.values[k])
            .ok_or_else(|| Error::Argument(format!("frequency {omega} is not sampled")))
    }
}

fn is_uniform(times: &[f64]) -> bool {
    if times.len() < 3 {
        return true;
    }
    let dt = times[1] - times[0];
    times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1e-300))
}

/// Trapezoidal one-sided transform ∫ e^{iωt} d(t) dt over the sampled window.
pub fn spectral_dipole(series: &DynamicalMatrixSeries, omegas: &[f64]) -> Result<SpectralDipole> {
    if series.len() < 2 {
        return Err(Error::Argument("spectral transform needs at least two samples".into()));
    }
    if !is_uniform(&series.times) {
        return Err(Error::Argument("series is not uniformly sampled".into()));
    }
    let one = |omega: f64| -> Mat2 { transform_one(series, omega) };
    let values = crate::par::map_range(omegas.len(), |k| one(omegas[k]));
    Ok(SpectralDipole { frequencies: omegas.to_vec(), values })
}

fn transform_one(series: &DynamicalMatrixSeries, omega: f64) -> Mat2 {
    const RESYNC: usize = 256;
    let n = series.len();
    let t0 = series.times[0];
    let dt = series.times[1] - t0;
    let rot = C64::from_polar(1.0, omega * dt);
    let mut ph = C64::from_polar(1.0, omega * t0);
    let mut acc = MAT2_ZERO;
    for k in 0..n {
        if k % RESYNC == 0 {
            ph = C64::from_polar(1.0, omega * series.times[k]);
        }
        let wgt = if k == 0 || k == n - 1 { 0.5 * dt } else { dt };
        let f = ph * wgt;
        let v = &series.values[k];
        for i in 0..2 {
            for j in 0..2 {
                acc[i][j] += v[i][j] * f;
            }
        }
        ph *= rot;
    }
    acc
}

/// dε/dω = (2/3)(ω⁴/πc³)·⟨Â†Â⟩ with Â = b†·d̃(ω)·b on the collective ladder, one value per sampled ω.
pub fn emission_spectrum(dipole: &SpectralDipole, state: &crate::spin::CollectiveState) -> Result<Vec<f64>> {
    use crate::spin::CollectiveState;
    if dipole.frequencies.len() != dipole.values.len() {
        return Err(Error::Argument("spectral dipole has mismatched frequency and value grids".into()));
    }
    state.validate()?;
    let space = state.space()?;
    let c3 = crate::units::C_LIGHT.powi(3);
    let out = crate::par::map_range(dipole.frequencies.len(), |k| {
        let omega = dipole.frequencies[k];
        let a = crate::modes::photonic_operator(&dipole.values[k], space);
        let ata = match state {
            CollectiveState::Pure(psi) => {
                let mut y = vec![ZERO; psi.len()];
                a.apply(psi, &mut y);
                y.iter().map(|z| z.norm_sqr()).sum::<f64>()
            }
            CollectiveState::Mixed(p) => p
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let mut col = a.diag[j].norm_sqr();
                    if j + 1 < p.len() {
                        col += a.up[j].norm_sqr();
                    }
                    if j > 0 {
                        col += a.down[j - 1].norm_sqr();
                    }
                    w * col
                })
                .sum(),
        };
        2.0 / 3.0 * omega.powi(4) / (std::f64::consts::PI * c3) * ata
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_closed_form() {
        let c = C64::new(0.3, -1.1);
        let n = 4001;
        let tt = 10.0;
        let dt = tt / (n - 1) as f64;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let values = vec![[[c, ZERO], [ZERO, c]]; n];
        let s = DynamicalMatrixSeries { times, values };
        let w = 1.7;
        let d = spectral_dipole(&s, &[w]).unwrap();
        let want = c * ((I * w * tt).exp() - 1.0) / (I * w);
        // The trapezoid rule on e^{iωt} has O((ω dt)²) relative error.
        assert!((d.values[0][0][0] - want).norm() < 1e-5 * want.norm());
        assert_eq!(d.values[0][0][1], ZERO);
    }

    #[test]
    fn rejects_short_series() {
        let s = DynamicalMatrixSeries { times: vec![0.0], values: vec![MAT2_ZERO] };
        assert!(spectral_dipole(&s, &[1.0]).is_err());
    }
}

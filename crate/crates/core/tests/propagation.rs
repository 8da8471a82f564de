use faer::Mat;
use hhg_core::atom::*;
use hhg_core::linalg::{expm, C64, I};
use hhg_core::propagation::*;
use hhg_core::pulse::*;
use proptest::prelude::*;

fn small_atom(cab: f64) -> AtomicSpectrum {
    solve_atom(&GridSpec::new(30.0, 0.5), &SoftCoulombParams { a: 0.816, cab }).unwrap()
}

fn max_diff(a: &DynamicalMatrixSeries, b: &DynamicalMatrixSeries, stride: usize) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..b.len() {
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((a.values[k * stride][i][j] - b.values[k][i][j]).norm());
            }
        }
    }
    worst
}

#[test]
fn field_free_evolution_is_a_pure_phase() {
    let sp = small_atom(0.0);
    let pulse = PulseSpec::new(0.0, 0.057, 4).unwrap();
    let s = propagate_dipole(&sp, &pulse, &PropagationConfig::with_steps_per_cycle(&pulse, 50)).unwrap();
    let e = [sp.energies[0].re, sp.energies[1].re];
    for (t, v) in s.times.iter().zip(&s.values) {
        for i in 0..2 {
            for j in 0..2 {
                let want = sp.dipole[(i, j)] * C64::from_polar(1.0, (e[i] - e[j]) * t);
                assert!((v[i][j] - want).norm() < 1e-8, "t={t} o{i}{j} = {} vs {want}", v[i][j]);
            }
        }
    }
}

#[test]
fn tridiagonal_and_dense_steppers_agree() {
    let sp = small_atom(5e-4);
    let pulse = PulseSpec::new(0.02, 0.057, 4).unwrap();
    let cfg = PropagationConfig::with_steps_per_cycle(&pulse, 100);
    let fast = propagate(&sp, &pulse, &cfg, &[sp.dipole.as_ref()], Adjoint::Metric).unwrap();
    let dense = propagate_dense(&sp, &pulse, &cfg, &[sp.dipole.as_ref()], Adjoint::Metric, |_, _| Ok(())).unwrap();
    assert!(max_diff(&fast[0], &dense[0], 1) < 1e-8);
}

#[test]
fn magnus_converges_at_fourth_order_and_midpoint_at_second() {
    let sp = small_atom(5e-4);
    let pulse = PulseSpec::new(0.05, 0.057, 4).unwrap();
    let run = |per: u32, stepper: Stepper| {
        let cfg = PropagationConfig { stepper, ..PropagationConfig::with_steps_per_cycle(&pulse, per) };
        propagate_dipole(&sp, &pulse, &cfg).unwrap()
    };
    let reference = run(800, Stepper::Magnus4);
    let m = [run(25, Stepper::Magnus4), run(50, Stepper::Magnus4)];
    let ratio = max_diff(&reference, &m[0], 32) / max_diff(&reference, &m[1], 16);
    assert!((12.0..20.0).contains(&ratio), "Magnus error ratio {ratio}");
    let p = [run(100, Stepper::Midpoint), run(200, Stepper::Midpoint)];
    let ratio = max_diff(&reference, &p[0], 8) / max_diff(&reference, &p[1], 4);
    assert!((3.5..4.5).contains(&ratio), "midpoint error ratio {ratio}");
}

#[test]
fn spectral_transform_of_a_tone_peaks_on_resonance() {
    let dt = 0.05;
    let nu = 1.3;
    let times: Vec<f64> = (0..4001).map(|k| k as f64 * dt).collect();
    let values = times.iter().map(|&t| {
        let z = C64::from_polar(1.0, -nu * t);
        [[z, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), z]]
    }).collect();
    let s = DynamicalMatrixSeries { times, values };
    let d = spectral_dipole(&s, &[nu, 1.5 * nu]).unwrap();
    let tf = 200.0;
    assert!((d.values[0][0][0] - tf).norm() < 1e-9);
    // ∫₀^T e^{iΔt} dt with Δ = ν/2, up to trapezoid error O(dt²).
    let delta = 0.5 * nu;
    let want = (C64::from_polar(1.0, delta * tf) - 1.0) / (I * delta);
    assert!((d.values[1][1][1] - want).norm() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exponential_of_anti_hermitian_is_unitary(entries in proptest::collection::vec(-3.0f64..3.0, 32)) {
        let n = 4;
        let h = Mat::from_fn(n, n, |i, j| {
            let (a, b) = (i.min(j), i.max(j));
            let re = entries[a * n + b];
            let im = if i == j { 0.0 } else { entries[b * n + a] * if i < j { 1.0 } else { -1.0 } };
            C64::new(re, im)
        });
        let a = Mat::from_fn(n, n, |i, j| -I * h[(i, j)]);
        let u = expm(a.as_ref()).unwrap();
        let p = u.adjoint() * &u;
        for i in 0..n {
            for j in 0..n {
                let t = if i == j { 1.0 } else { 0.0 };
                prop_assert!((p[(i, j)] - t).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn spectral_transform_is_linear(re in -2.0f64..2.0, im in -2.0f64..2.0, w in 0.1f64..3.0) {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.1).collect();
        let values: Vec<Mat2> = times.iter().map(|&t| {
            let c = C64::new(t.sin(), (2.0 * t).cos());
            [[c, c * 0.5], [C64::new(0.0, t), C64::new(1.0, 0.0)]]
        }).collect();
        let s = DynamicalMatrixSeries { times, values };
        let k = C64::new(re, im);
        let a = spectral_dipole(&s.scaled(k), &[w]).unwrap();
        let b = spectral_dipole(&s, &[w]).unwrap();
        let sum = spectral_dipole(&s.add(&s).unwrap(), &[w]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((a.values[0][i][j] - k * b.values[0][i][j]).norm() < 1e-10);
                prop_assert!((sum.values[0][i][j] - b.values[0][i][j] * 2.0).norm() < 1e-10);
            }
        }
    }
}

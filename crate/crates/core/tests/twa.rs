use hhg_core::linalg::C64;
use hhg_core::modes::HarmonicMode;
use hhg_core::propagation::Mat2;
use hhg_core::spin::{Axis, TwistingParams};
use hhg_core::stats::PhaseGrid;
use hhg_core::twa::*;
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

const Z: C64 = C64::new(0.0, 0.0);

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn polar(n: usize, p: &[f64; 3]) -> f64 {
    (p[2] / n as f64).clamp(-1.0, 1.0).acos()
}

fn sigma_x(w: f64) -> Mat2 {
    [[Z, C64::new(w, 0.0)], [C64::new(w, 0.0), Z]]
}

#[test]
fn sampled_polar_angles_follow_the_target_density() {
    let n = 100;
    let dist = ThetaDistribution::with_sigma(Family::Half, 0.4).unwrap();
    let r = 20_000;
    let ens = sample_initial_conditions(&dist, n, r, 3).unwrap();
    let mut theta: Vec<f64> = ens.points.iter().map(|p| polar(n, p)).collect();
    theta.sort_by(f64::total_cmp);
    // Reference CDF by the trapezoid rule on a fine grid.
    let (lo, hi) = dist.support();
    let m = 20_000;
    let h = (hi - lo) / m as f64;
    let mut cdf = vec![0.0; m + 1];
    for k in 1..=m {
        let (a, b) = (lo + (k - 1) as f64 * h, lo + k as f64 * h);
        cdf[k] = cdf[k - 1] + 0.5 * h * (dist.density(a) + dist.density(b));
    }
    let total = cdf[m];
    let ks = theta.iter().enumerate().map(|(i, &t)| {
        let f = cdf[(((t - lo) / h).round() as usize).min(m)] / total;
        (f - i as f64 / r as f64).abs().max((f - (i + 1) as f64 / r as f64).abs())
    }).fold(0.0, f64::max);
    // 1.63/√R is the 1% critical value of the Kolmogorov statistic.
    assert!(ks < 1.63 / (r as f64).sqrt(), "KS = {ks}");
}

#[test]
fn ensembles_depend_only_on_the_seed() {
    let dist = fit_theta_distribution(Family::Up, 500).unwrap();
    let r = 10_000;
    let a = sample_initial_conditions(&dist, 500, r, 42).unwrap();
    let pool = |k| rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
    let b = pool(3).install(|| sample_initial_conditions(&dist, 500, r, 42).unwrap());
    let c = pool(1).install(|| sample_initial_conditions(&dist, 500, r, 42).unwrap());
    assert_eq!(a.points, b.points);
    assert_eq!(a.points, c.points);
    assert_ne!(a.points, sample_initial_conditions(&dist, 500, r, 43).unwrap().points);
    let mode = HarmonicMode { n: 21, dn: sigma_x(0.01) };
    assert_eq!(classical_fields(&a, &mode, 5).alpha, pool(2).install(|| classical_fields(&a, &mode, 5).alpha));
}

#[test]
fn sharp_excited_state_gives_coherent_classical_light() {
    let n = 200;
    let dist = ThetaDistribution::with_sigma(Family::Up, 1e-6).unwrap();
    let ens = sample_initial_conditions(&dist, n, 20_000, 9).unwrap();
    // σ_z mode: the field is w·S_z = w·N plus vacuum noise.
    let w = 0.01;
    let mode = HarmonicMode { n: 15, dn: [[C64::new(-w, 0.0), Z], [Z, C64::new(w, 0.0)]] };
    let s = classical_statistics(&classical_fields(&ens, &mode, 1), &PhaseGrid { points: 101, half_width: None }).unwrap();
    let target = (w * n as f64).powi(2);
    assert!((s.nbar.value - target).abs() < 4.0 * s.nbar.stderr, "nbar {:?}", s.nbar);
    assert!((s.g2.value - 1.0).abs() < 4.0 * s.g2.stderr, "g2 {:?}", s.g2);
    assert!((s.mean_intensity.value - target - 1.0).abs() < 4.0 * s.mean_intensity.stderr);
    assert!((s.photons.total() - 1.0).abs() < 1e-12);
}

#[test]
fn joint_statistics_see_shared_spin_noise_only() {
    let n = 100;
    let ens = sample_initial_conditions(&fit_theta_distribution(Family::Half, n).unwrap(), n, 20_000, 11).unwrap();
    let bright = |h| classical_fields(&ens, &HarmonicMode { n: h, dn: sigma_x(0.03) }, 2);
    let j = classical_joint(&bright(15), &bright(21)).unwrap();
    // On the equatorial ring α = wN·cos φ: the shared intensity variance is (wN)⁴/8, and each
    // mode adds vacuum variance 2⟨|α|²⟩ + 1 plus 1/12 from rounding to photon numbers.
    let a2 = (0.03 * n as f64).powi(2);
    let shared = a2 * a2 / 8.0;
    let want = shared / (shared + a2 + 1.0 + 1.0 / 12.0);
    assert!((j.pearson - want).abs() < 0.03, "shared S_x fluctuations: c = {} vs {want}", j.pearson);
    let dark = |h| classical_fields(&ens, &HarmonicMode { n: h, dn: sigma_x(0.0) }, 2);
    let j = classical_joint(&dark(15), &dark(21)).unwrap();
    assert!(j.pearson.abs() < 4.0 / (20_000f64).sqrt(), "independent vacuum noise: c = {}", j.pearson);
}

#[test]
fn classical_rotation_matches_the_quantum_convention() {
    let n = 50;
    let ens = sample_initial_conditions(&fit_theta_distribution(Family::Down, n).unwrap(), n, 2000, 1).unwrap();
    let m = ens.rotated(Axis::Y, -FRAC_PI_2).mean_spin();
    assert!(m[0] > 0.95 * n as f64, "{m:?}");
}

#[test]
fn bad_sampling_inputs_are_rejected() {
    let d = fit_theta_distribution(Family::Up, 10).unwrap();
    assert!(sample_initial_conditions(&d, 10, 0, 1).is_err());
    assert!(sample_initial_conditions(&d, 0, 10, 1).is_err());
    assert!(ThetaDistribution::with_sigma(Family::Up, -1.0).is_err());
    assert!("sideways".parse::<Family>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spin_length_is_conserved(n in 1usize..1000, seed in 0u64..1000, fam in 0usize..3, angle in -PI..PI, t_h in 0.0f64..500.0) {
        let fam = [Family::Up, Family::Half, Family::Down][fam];
        let ens = sample_initial_conditions(&fit_theta_distribution(fam, n).unwrap(), n, 300, seed).unwrap();
        let moved = ens.rotated(Axis::X, angle).twisted(&TwistingParams { omega0: 0.49, omega_j: 0.1, t_h }).unwrap();
        for p in &moved.points {
            prop_assert!((norm(*p) - n as f64).abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn width_shrinks_with_atom_count(fam in 0usize..2, n in 2usize..10_000) {
        let fam = [Family::Up, Family::Half][fam];
        let a = fit_theta_distribution(fam, n).unwrap();
        let b = fit_theta_distribution(fam, 2 * n).unwrap();
        prop_assert!(b.sigma < a.sigma);
        let (lo, hi) = a.support();
        prop_assert!(lo >= 0.0 && hi <= PI && lo < hi);
    }
}

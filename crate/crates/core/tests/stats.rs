use hhg_core::linalg::C64;
use hhg_core::modes::photonic_operator;
use hhg_core::spin::{rotation_pulse, Axis, CollectiveState, SpinSpace};
use hhg_core::stats::*;
use proptest::prelude::*;
use std::f64::consts::{FRAC_2_PI, PI};

fn grid(points: usize, half_width: f64) -> PhaseGrid {
    PhaseGrid { points, half_width: Some(half_width) }
}

fn center(w: &WignerGrid) -> f64 {
    let (i, j) = (w.im.len() / 2, w.re.len() / 2);
    assert!(w.im[i].abs() < 1e-12 && w.re[j].abs() < 1e-12, "grid is not centered on the origin");
    w.at(i, j)
}

fn displaced_thermal(nbar: f64, beta: C64, m_max: usize) -> MomentTable {
    let mut t = MomentTable::thermal(nbar, m_max);
    t.shift = beta;
    t.unshifted()
}

fn poisson(nbar: f64, k: usize) -> f64 {
    (-nbar + k as f64 * nbar.ln() - (1..=k).map(|j| (j as f64).ln()).sum::<f64>()).exp()
}

#[test]
fn vacuum_wigner_peak() {
    let w = wigner_from_moments(&MomentTable::vacuum(4), &grid(101, 4.0)).unwrap();
    assert!((center(&w) - FRAC_2_PI).abs() < 1e-9);
    assert!((w.norm() - 1.0).abs() < 1e-6);
}

#[test]
fn single_photon_wigner_is_negative_at_origin() {
    let w = wigner_from_moments(&MomentTable::fock(1, 4), &grid(101, 4.0)).unwrap();
    assert!((center(&w) + FRAC_2_PI).abs() < 1e-6, "W(0) = {}", center(&w));
}

#[test]
fn fock_photon_statistics_are_sharp() {
    let t = MomentTable::fock(2, 6);
    let p = photon_statistics_from_moments(&t).unwrap();
    for (k, &pk) in p.p.iter().enumerate() {
        let want = if k == 2 { 1.0 } else { 0.0 };
        assert!((pk - want).abs() < 1e-9, "p[{k}] = {pk}");
    }
    let so = g2_and_mandel(&t).unwrap();
    assert!((so.g2 - 0.5).abs() < 1e-12 && (so.mandel_q + 1.0).abs() < 1e-12);
}

#[test]
fn thermal_second_order() {
    let so = g2_and_mandel(&MomentTable::thermal(3.0, 4)).unwrap();
    assert!((so.g2 - 2.0).abs() < 1e-12);
    assert!((so.mandel_q - 3.0).abs() < 1e-12);
}

#[test]
fn xi_vanishing_argument_keeps_only_diagonal() {
    for m in 0..5 {
        for l in 0..5 {
            let v = xi(l, m, C64::new(0.0, 0.0));
            if l != m {
                assert_eq!(v.norm(), 0.0);
            } else {
                let want = FRAC_2_PI * (-2.0f64).powi(l as i32) / (1..=l).product::<usize>() as f64;
                assert!((v.re - want).abs() < 1e-14 * want.abs().max(1.0));
            }
        }
    }
}

#[test]
fn correlation_measures_of_a_product_table_vanish() {
    let pa = [0.2, 0.5, 0.3];
    let pb = [0.6, 0.4];
    let p: Vec<Vec<f64>> = pa.iter().map(|a| pb.iter().map(|b| a * b).collect()).collect();
    let (c, i) = correlation_measures(&p);
    assert!(c.abs() < 1e-12 && i.abs() < 1e-12);
    let diag = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
    let (c, i) = correlation_measures(&diag);
    assert!((c - 1.0).abs() < 1e-12 && (i - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn krylov_joint_statistics_match_moment_inversion_on_a_small_ladder() {
    let n = 40;
    let sp = SpinSpace::new(n).unwrap();
    let s = 0.3;
    let a = photonic_operator(&[[C64::new(0.03, 0.01) * s, C64::new(0.02, 0.0) * s], [C64::new(0.0, 0.015) * s, C64::new(-0.01, 0.0) * s]], sp);
    let b = photonic_operator(&[[C64::new(-0.02, 0.0) * s, C64::new(0.01, 0.01) * s], [C64::new(0.025, 0.0) * s, C64::new(0.02, -0.01) * s]], sp);
    let state = rotation_pulse(&CollectiveState::half_dicke(n).unwrap(), Axis::X, 0.4).unwrap();
    let k = 16;
    let jm = joint_moments(&a, &b, &state, k, k).unwrap();
    let direct = joint_statistics(&jm).unwrap();
    let kr = joint_statistics_krylov(&a, &b, &state, k, k).unwrap();
    assert!((direct.pearson - kr.pearson).abs() < 1e-3, "{} vs {}", direct.pearson, kr.pearson);
    let total: f64 = kr.p.iter().flatten().sum();
    assert!((total - 1.0).abs() < 1e-6);
    assert!((pearson_from_moments(&jm).unwrap() - direct.pearson).abs() < 1e-3);
}

#[test]
fn reconstruct_spin_coherent_state_is_near_coherent() {
    let n = 2000;
    let sp = SpinSpace::new(n).unwrap();
    let op = photonic_operator(&[[C64::new(1e-3, 0.0), C64::new(4e-4, 0.0)], [C64::new(3e-4, 0.0), C64::new(-5e-4, 0.0)]], sp);
    let state = rotation_pulse(&CollectiveState::ground(n), Axis::Y, -std::f64::consts::FRAC_PI_2).unwrap();
    let r = reconstruct(&op, &state, &OrderPolicy::default(), &PhaseGrid::default()).unwrap();
    assert!((r.second_order.g2 - 1.0).abs() < 10.0 / n as f64);
    assert!((r.photons.total() - 1.0).abs() < 1e-6);
    assert!((r.wigner.norm() - 1.0).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coherent_photons_are_poisson(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let beta = C64::new(re, im);
        let nbar = beta.norm_sqr();
        // Centered moments of |β⟩ are those of the vacuum.
        let mut t = MomentTable::vacuum(30);
        t.shift = beta;
        let w = wigner_from_moments(&t, &PhaseGrid::default()).unwrap();
        let p = photon_statistics_from_wigner(&w, photon_cutoff(nbar)).unwrap();
        for (k, &pk) in p.p.iter().enumerate() {
            prop_assert!((pk - poisson(nbar, k)).abs() < 1e-6, "k={} {} vs {}", k, pk, poisson(nbar, k));
        }
    }

    #[test]
    fn wigner_and_moment_routes_agree(coh in 0.0f64..5.0, th in 0.0f64..0.2, phase in 0.0f64..(2.0 * PI)) {
        // Displaced thermal light. The alternating moment sum needs order ~60 before its tail is
        // negligible at n̄ ≈ 5, and loses digits as the thermal part grows; its severity flag must
        // then say so.
        let mut c = MomentTable::thermal(th, MAX_ORDER);
        c.shift = C64::from_polar(coh.sqrt(), phase);
        let a = photon_statistics_from_moments(&c.unshifted()).unwrap();
        prop_assert!(a.authoritative || th > 0.05, "severity {:?}", a.severity);
        // The centered series falls off like (2·th)^m, so the Wigner side needs far fewer orders.
        let w = wigner_from_moments(&c.truncated(30), &PhaseGrid { points: 241, half_width: None }).unwrap();
        let b = photon_statistics_from_wigner(&w, a.p.len() - 1).unwrap();
        if a.authoritative {
            for k in 0..a.p.len().min(b.p.len()) {
                prop_assert!((a.p[k] - b.p[k]).abs() < 1e-6, "k={} {} vs {}", k, a.p[k], b.p[k]);
            }
        }
    }

    #[test]
    fn xi_recursion_matches_direct_sum(l_max in 0usize..=6, m in 0usize..=6, re in -1.5f64..1.5, im in -1.5f64..1.5) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let alpha = C64::new(re, im);
        let rec = xi_recursion(l_max, m, alpha);
        for (l, r) in rec.iter().enumerate() {
            let d = xi_direct(l, m, alpha);
            let scale = d.norm().max(1e-3 * FRAC_2_PI);
            prop_assert!((r - d).norm() < 1e-10 * scale.max(1.0), "l={} m={} {} vs {}", l, m, r, d);
            prop_assert!((xi(l, m, alpha) - d).norm() < 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn g2_is_invariant_under_rescaling(nbar in 0.1f64..4.0, s in 0.1f64..10.0) {
        let base = MomentTable::thermal(nbar, 2);
        let scaled = MomentTable::from_fn(2, |m, l| base.get(m, l) * s.powi((m + l) as i32));
        let (a, b) = (g2_and_mandel(&base).unwrap(), g2_and_mandel(&scaled).unwrap());
        prop_assert!((a.g2 - b.g2).abs() < 1e-12);
        prop_assert!((b.nbar - s * s * nbar).abs() < 1e-9 * b.nbar);
    }

    #[test]
    fn shifting_round_trips(re in -2.0f64..2.0, im in -2.0f64..2.0, nbar in 0.0f64..3.0) {
        let beta = C64::new(re, im);
        let t = displaced_thermal(nbar, beta, 6);
        let (c, b) = mean_shift(&t);
        prop_assert!((b - beta).norm() < 1e-12);
        let back = c.unshifted();
        for m in 0..=6 {
            for l in 0..=6 {
                prop_assert!((back.get(m, l) - t.get(m, l)).norm() < 1e-8 * t.get(m, l).norm().max(1.0));
            }
        }
    }
}

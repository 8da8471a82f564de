use faer::Mat;
use hhg_core::atom::*;
use hhg_core::linalg::C64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn residual(h: &Mat<C64>, sp: &AtomicSpectrum) -> f64 {
    let hu = h * &sp.states;
    let mut worst = 0.0f64;
    for j in 0..sp.len() {
        for i in 0..sp.len() {
            worst = worst.max((hu[(i, j)] - sp.states[(i, j)] * sp.energies[j]).norm());
        }
    }
    worst
}

#[test]
fn free_particle_matches_discrete_box_levels() {
    let grid = GridSpec::new(10.0, 0.5);
    let m = grid.level_count();
    let h = build_hamiltonian(&grid, &vec![C64::new(0.0, 0.0); m]).unwrap();
    let sp = diagonalize(&grid, h.as_ref()).unwrap();
    let mut want: Vec<f64> = (1..=m).map(|k| (1.0 - (k as f64 * PI / (m + 1) as f64).cos()) / (grid.dx * grid.dx)).collect();
    want.sort_by(f64::total_cmp);
    for (e, w) in sp.energies.iter().zip(&want) {
        assert!((e.re - w).abs() < 1e-10 && e.im.abs() < 1e-10, "{e} vs {w}");
    }
}

fn oscillator_errors(dx: f64) -> Vec<f64> {
    let grid = GridSpec::new(8.0, dx);
    let v: Vec<C64> = grid.positions().iter().map(|x| C64::new(0.5 * x * x, 0.0)).collect();
    let sp = diagonalize(&grid, build_hamiltonian(&grid, &v).unwrap().as_ref()).unwrap();
    (0..5).map(|n| sp.energies[n].re - (n as f64 + 0.5)).collect()
}

#[test]
fn harmonic_well_converges_at_second_order() {
    let (coarse, fine) = (oscillator_errors(0.1), oscillator_errors(0.05));
    for n in 0..5 {
        assert!(fine[n].abs() < 5e-3, "E{n} off by {}", fine[n]);
        let ratio = coarse[n] / fine[n];
        assert!((3.8..4.2).contains(&ratio), "n={n}: error ratio {ratio}");
    }
}

#[test]
fn working_point_spectrum_is_consistent() {
    let grid = GridSpec::default();
    let params = SoftCoulombParams::default();
    let sp = solve_atom(&grid, &params).unwrap();
    assert_eq!(sp.len(), 429);
    assert!(sp.biorthogonality_defect() < 1e-8);
    assert!(sp.energies.windows(2).all(|w| w[0].re <= w[1].re));
    // The absorber only removes probability.
    assert!(sp.energies.iter().all(|e| e.im <= 1e-12));
    assert!(sp.bound_count() > 5);
    // Parity: the ground state has no permanent dipole, ground to first excited does.
    assert!(sp.dipole[(0, 0)].norm() < 1e-10);
    assert!(sp.dipole[(0, 1)].norm() > 0.1);
    assert!((sp.dipole[(0, 1)] - sp.dipole[(1, 0)]).norm() < 1e-10);
    let h = build_hamiltonian(&grid, &build_potential(&grid, &params).unwrap()).unwrap();
    assert!(residual(&h, &sp) < 1e-9);
    assert!(validate_grid(&grid, &params, 0.057).pass());
}

#[test]
fn coarse_or_short_grids_are_reported() {
    let params = SoftCoulombParams::default();
    let r = validate_grid(&GridSpec::new(150.0, 1.2), &params, 0.057);
    assert_eq!(r.failures().len(), 1);
    assert!(r.failures()[0].name.starts_with("dx"));
    assert!(build_potential(&GridSpec::new(150.0, 1.2), &params).is_err());
    let r = validate_grid(&GridSpec::new(20.0, 0.7), &params, 0.057);
    assert!(!r.pass() && r.failures()[0].margin() < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn soft_coulomb_is_even_and_deepest_at_origin(x in -50.0f64..50.0, a in 0.1f64..3.0) {
        prop_assert_eq!(soft_coulomb(x, a), soft_coulomb(-x, a));
        prop_assert!(soft_coulomb(x, a) >= soft_coulomb(0.0, a));
        prop_assert!((soft_coulomb(0.0, a) + 1.0 / a).abs() < 1e-15);
    }

    #[test]
    fn positions_are_centered(l in 2.0f64..200.0, dx in 0.05f64..1.0) {
        let g = GridSpec::new(l, dx);
        prop_assume!(g.level_count() >= 3);
        let x = g.positions();
        let m = x.len();
        for j in 0..m {
            prop_assert!((x[j] + x[m - 1 - j]).abs() < 1e-9 * l);
        }
        prop_assert!((x[1] - x[0] - dx).abs() < 1e-12);
    }

    #[test]
    fn random_even_potentials_diagonalize_exactly(
        depth in proptest::collection::vec(-2.0f64..0.0, 12),
        cab in 0.0f64..0.5,
    ) {
        // An even potential exercises the parity split; the absorber makes it complex symmetric.
        let grid = GridSpec::new(6.0, 0.5);
        let m = grid.level_count();
        let v: Vec<C64> = (0..m).map(|j| {
            let k = j.min(m - 1 - j);
            C64::new(depth[k % depth.len()], 0.0) + absorbing(grid.positions()[j], grid.x0, cab)
        }).collect();
        let h = build_hamiltonian(&grid, &v).unwrap();
        let sp = diagonalize(&grid, h.as_ref()).unwrap();
        prop_assert!(residual(&h, &sp) < 1e-9);
        prop_assert!(sp.biorthogonality_defect() < 1e-8);
    }
}

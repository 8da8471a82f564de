//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance` runs everything; trailing numbers select criteria,
//! e.g. `cargo test --release --test acceptance -- 1 9`. The run is a report and exits 0 so the rest
//! of the workspace suite still runs; `-- --strict` makes any failing criterion a non-zero exit.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};
use std::sync::OnceLock;
use std::time::Instant;

use hhg_core::atom::{solve_atom, AtomicSpectrum, GridSpec, SoftCoulombParams};
use hhg_core::linalg::C64;
use hhg_core::modes::{build_mode_matrix, commutator_check, photonic_operator, DetectorSpec, HarmonicMode};
use hhg_core::propagation::{emission_spectrum, map2, propagate_dipole, spectral_dipole, DynamicalMatrixSeries, Mat2};
use hhg_core::pulse::{PropagationConfig, PulseSpec};
use hhg_core::spin::*;
use hhg_core::stats::*;
use hhg_core::twa::*;
use hhg_core::units::{ev_to_au, gv_per_m_to_au};
use hhg_core::Result;

const HARMONICS: [u32; 3] = [15, 21, 55];
const STATE_ATOMS: usize = 62_000;
const SWEEP_ATOMS: usize = 37_000;
const OMEGA0: f64 = 0.49;

struct WorkingPoint {
    atom: AtomicSpectrum,
    pulse: PulseSpec,
    series: DynamicalMatrixSeries,
}

impl WorkingPoint {
    fn get() -> &'static WorkingPoint {
        static CELL: OnceLock<WorkingPoint> = OnceLock::new();
        CELL.get_or_init(|| {
            let t = Instant::now();
            let atom = solve_atom(&GridSpec::default(), &SoftCoulombParams::default()).expect("atom");
            let pulse = PulseSpec::new(gv_per_m_to_au(60.0), ev_to_au(1.55), 40).expect("pulse");
            let series = propagate_dipole(&atom, &pulse, &PropagationConfig::for_pulse(&pulse)).expect("propagation");
            eprintln!("  (working-point propagation: {:.1} s)", t.elapsed().as_secs_f64());
            WorkingPoint { atom, pulse, series }
        })
    }

    fn modes(&self) -> Vec<Mat2> {
        let w = self.pulse.omega_d;
        let oms: Vec<f64> = HARMONICS.iter().map(|&h| h as f64 * w).collect();
        let d = spectral_dipole(&self.series, &oms).expect("transform");
        let det = DetectorSpec::for_drive(w);
        HARMONICS.iter().map(|&h| build_mode_matrix(&d, h, &det, w).expect("mode")).collect()
    }

    fn operators(&self, n: usize) -> Vec<LadderOp> {
        let sp = SpinSpace::new(n).expect("space");
        self.modes().iter().map(|dn| photonic_operator(dn, sp)).collect()
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn second_order(op: &LadderOp, s: &CollectiveState) -> Result<SecondOrder> {
    g2_and_mandel(&centered_moments(op, s, 2)?)
}

fn pi2(n: usize) -> CollectiveState {
    rotation_pulse(&CollectiveState::ground(n), Axis::Y, -FRAC_PI_2).expect("rotation")
}

fn twisted(n: usize, cycles: f64) -> CollectiveState {
    let p = TwistingParams { omega0: OMEGA0, omega_j: ev_to_au(2.7), t_h: cycles * 2.0 * PI / OMEGA0 };
    one_axis_twisting(&pi2(n), &p).expect("twisting")
}

fn c1_ionization() -> Result<Outcome> {
    let a = solve_atom(&GridSpec::default(), &SoftCoulombParams::default())?;
    let e1 = a.ground_energy();
    let ok = (e1 + 0.792).abs() <= 0.008 && a.len() == 429;
    Ok(Outcome { pass: ok, detail: format!("E1 = {e1:.6} (band -0.792 ± 0.008), M = {}", a.len()) })
}

fn c2_spectrum() -> Result<Outcome> {
    let pp = WorkingPoint::get();
    let w = pp.pulse.omega_d;
    let per = 10;
    let top = 90;
    let oms: Vec<f64> = (0..=top * per).map(|k| k as f64 * w / per as f64).collect();
    let s = emission_spectrum(&spectral_dipole(&pp.series, &oms)?, &CollectiveState::ground(1))?;
    let at = |q: usize| s[q * per];
    let contrast = |q: usize| at(q) / at(q - 1).max(at(q + 1));
    let predicted = pp.pulse.cutoff_order(-pp.atom.ground_energy()).round() as i64;
    // Cutoff: the last odd order still standing 10x above both even neighbours.
    let odd: Vec<usize> = (9..top).step_by(2).collect();
    let cutoff = odd.iter().copied().filter(|&q| contrast(q) >= 10.0).max().unwrap_or(0);
    let plateau: Vec<usize> = odd.iter().copied().filter(|&q| q <= cutoff).collect();
    let good = plateau.iter().filter(|&&q| contrast(q) >= 10.0).count();
    let through_predicted = odd.iter().copied().filter(|&q| q as i64 <= predicted);
    let weak: Vec<String> = through_predicted.filter(|&q| contrast(q) < 10.0).take(6).map(|q| format!("{q}:{:.1}", contrast(q))).collect();
    let ok = good == plateau.len() && (cutoff as i64 - predicted).abs() <= 4;
    Ok(Outcome {
        pass: ok,
        detail: format!(
            "cutoff {cutoff} vs predicted {predicted}; contrast ≥ 10 at {good}/{} plateau orders; first weak orders (q:contrast) {}",
            plateau.len(),
            weak.join(" ")
        ),
    })
}

fn c3_classical_limit() -> Result<Outcome> {
    let n = STATE_ATOMS;
    let ops = WorkingPoint::get().operators(n);
    let bound = 10.0 / n as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, s) in [("⇓", CollectiveState::ground(n)), ("⇒", pi2(n))] {
        for (h, op) in HARMONICS.iter().zip(&ops) {
            let g2 = second_order(op, &s)?.g2;
            let within = (g2 - 1.0).abs() <= bound;
            let on_target = *h != 21 || (g2 - 1.00002).abs() <= 5e-5;
            ok &= within && on_target;
            parts.push(format!("{name}{h}: (g²-1)N = {:.2}{}", (g2 - 1.0) * n as f64, if within { "" } else { " ✗" }));
        }
    }
    Ok(Outcome { pass: ok, detail: format!("bound |(g²-1)N| ≤ 10; {}", parts.join(", ")) })
}

fn c4_dicke() -> Result<Outcome> {
    let n = STATE_ATOMS;
    let ops = WorkingPoint::get().operators(n);
    let s = CollectiveState::half_dicke(n)?;
    let g2 = second_order(&ops[1], &s)?.g2;
    let r = reconstruct(&ops[0], &s, &OrderPolicy::default(), &PhaseGrid::default())?;
    let double = r.photons.is_doubly_peaked(0.05);
    Ok(Outcome {
        pass: (g2 - 1.71).abs() <= 0.1 && double,
        detail: format!(
            "g²(21) = {g2:.4} (1.71 ± 0.1); P(n) at 15 doubly peaked: {double} (m = {}, converged {})",
            r.centered.order(),
            r.converged
        ),
    })
}

fn c5_superradiance() -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [100, 1000] {
        let gamma = 0.1 / n as f64;
        let tm = superradiant_peak_time(gamma, n);
        let holds: Vec<f64> = (0..=30).map(|k| k as f64 * 0.1 * tm).collect();
        let (states, prof) = superradiance_sweep(gamma, n, &holds, None)?;
        let leak = states.iter().map(|s| (s.populations().iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
        let rel = (prof.peak_time() - tm) / tm;
        ok &= rel.abs() < 0.3 && leak < 1e-9;
        parts.push(format!("N={n}: peak/t_m - 1 = {rel:+.3}, max |Σp-1| = {leak:.1e}"));
    }
    Ok(Outcome { pass: ok, detail: parts.join("; ") })
}

fn c6_superradiant_hhg() -> Result<Outcome> {
    let n = 1000;
    let gamma = 0.1 / n as f64;
    let tm = superradiant_peak_time(gamma, n);
    let ops = WorkingPoint::get().operators(n);
    let holds: Vec<f64> = (0..=40).map(|k| k as f64 * 0.1 * tm).chain([10.0 * tm, 20.0 * tm]).collect();
    let (states, _) = superradiance_sweep(gamma, n, &holds, None)?;
    let bound = 10.0 / n as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for (h, op) in HARMONICS.iter().zip(&ops).take(2) {
        let so: Vec<SecondOrder> = states.iter().map(|s| second_order(op, s)).collect::<Result<_>>()?;
        let (first, last) = (so[0], *so.last().unwrap());
        let peak = so.iter().map(|x| x.g2).fold(f64::MIN, f64::max);
        let ends = (first.g2 - 1.0).abs() <= bound && (last.g2 - 1.0).abs() <= bound;
        let q = first.mandel_q.abs() <= 0.1 && last.mandel_q.abs() <= 0.1;
        ok &= ends && q;
        parts.push(format!(
            "n={h}: g²(0)-1 = {:.1e}, g²(20 t_m)-1 = {:.1e}, max g² = {peak:.3}",
            first.g2 - 1.0,
            last.g2 - 1.0
        ));
        if *h == 21 {
            ok &= peak > 1.3;
        }
    }
    Ok(Outcome { pass: ok, detail: parts.join("; ") })
}

fn c7_twisting() -> Result<Outcome> {
    let n = SWEEP_ATOMS;
    let ops = WorkingPoint::get().operators(n);
    let bound = 10.0 / n as f64;
    // Whole drive cycles of ω0 leave the linear term trivial, so only the twist acts.
    let onset = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0];
    let states: Vec<CollectiveState> = onset.iter().map(|&x| twisted(n, x)).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (h, op) in HARMONICS.iter().zip(&ops) {
        let dev: Vec<f64> = states.iter().map(|s| second_order(op, s).map(|x| (x.g2 - 1.0).abs())).collect::<Result<_>>()?;
        let start = dev[0] <= bound;
        let monotone = dev.windows(2).all(|w| w[1] > w[0]);
        ok &= start && monotone;
        parts.push(format!("n={h}: |g²(0)-1|N = {:.2}, onset monotone {monotone}", dev[0] * n as f64));
    }
    let late = twisted(n, 120.0);
    let half = CollectiveState::half_dicke(n)?;
    for (h, op) in HARMONICS.iter().zip(&ops) {
        let rec = |s| reconstruct(op, s, &OrderPolicy::default(), &PhaseGrid::default());
        match (rec(&late), rec(&half)) {
            (Ok(a), Ok(b)) => {
                let l1 = a.photons.l1_distance(&b.photons);
                ok &= l1 < 0.1;
                parts.push(format!("n={h}: L¹(120 cycles, |N/2⟩) = {l1:.4}"));
            }
            (a, b) => {
                ok = false;
                let e = a.err().or(b.err()).expect("one side failed");
                parts.push(format!("n={h}: reconstruction failed ({e})"));
            }
        }
    }
    Ok(Outcome { pass: ok, detail: parts.join("; ") })
}

fn c8_correlations() -> Result<Outcome> {
    let n = SWEEP_ATOMS;
    let ops = WorkingPoint::get().operators(n);
    // Pairs as indices into HARMONICS: (15,21), (21,55), (15,55).
    let pairs = [(0, 1), (1, 2), (0, 2)];
    let joint = |s: &CollectiveState| -> Result<Vec<JointStatistics>> {
        let cuts: Vec<usize> = ops.iter().map(|op| centered_moments(op, s, 1).map(|t| photon_cutoff(t.unshifted().nbar()))).collect::<Result<_>>()?;
        joint_statistics_krylov_pairs(&ops, &cuts, &pairs, s)
    };
    // Standard error of a Pearson estimate from the 2×10⁴-trajectory ensembles used elsewhere.
    let se = 1.0 / (2e4f64).sqrt();
    let early = joint(&twisted(n, 0.0))?;
    let late = joint(&twisted(n, 120.0))?;
    let quiet = early.iter().all(|j| j.pearson.abs() < 3.0 * se && j.mutual_information < 1e-3);
    let signs = late[0].pearson < 0.0 && late[1].pearson > 0.0;
    let fmt = |v: &[JointStatistics]| v.iter().map(|j| format!("{:+.4}/{:.1e}", j.pearson, j.mutual_information)).collect::<Vec<_>>().join(" ");
    Ok(Outcome {
        pass: quiet && signs,
        detail: format!("c/I for (15,21) (21,55) (15,55): t_h=0 [{}], 120 cycles [{}]", fmt(&early), fmt(&late)),
    })
}

fn c9_oracles() -> Result<Outcome> {
    let grid = PhaseGrid { points: 101, half_width: Some(4.0) };
    let mid = |w: &WignerGrid| w.at(w.im.len() / 2, w.re.len() / 2);
    let vac = (mid(&wigner_from_moments(&MomentTable::vacuum(4), &grid)?) - FRAC_2_PI).abs();
    let fock = (mid(&wigner_from_moments(&MomentTable::fock(1, 4), &grid)?) + FRAC_2_PI).abs();
    let mut poisson_err = 0.0f64;
    let mut route_err = 0.0f64;
    for (k, nbar) in [0.3f64, 1.0, 2.5, 5.0].iter().enumerate() {
        let beta = C64::from_polar(nbar.sqrt(), 0.7 * k as f64);
        let mut t = MomentTable::vacuum(MAX_ORDER);
        t.shift = beta;
        let w = wigner_from_moments(&t.truncated(20), &PhaseGrid::default())?;
        let a = photon_statistics_from_wigner(&w, photon_cutoff(*nbar))?;
        let b = photon_statistics_from_moments(&t.unshifted())?;
        let mut lf = 0.0;
        for (j, p) in a.p.iter().enumerate() {
            let want = (-nbar + j as f64 * nbar.ln() - lf).exp();
            lf += ((j + 1) as f64).ln();
            poisson_err = poisson_err.max((p - want).abs());
            if let Some(q) = b.p.get(j) {
                route_err = route_err.max((p - q).abs());
            }
        }
    }
    let mut xi_err = 0.0f64;
    for (re, im) in [(0.3, -0.2), (1.1, 0.4), (-0.7, 1.3)] {
        let alpha = C64::new(re, im);
        for m in 0..=6 {
            for (l, r) in xi_recursion(6, m, alpha).iter().enumerate() {
                let d = xi_direct(l, m, alpha);
                xi_err = xi_err.max((r - d).norm() / d.norm().max(1.0));
            }
        }
    }
    let ok = vac < 1e-9 && fock < 1e-6 && poisson_err < 1e-6 && route_err < 1e-6 && xi_err < 1e-10;
    Ok(Outcome {
        pass: ok,
        detail: format!(
            "|W_vac(0)-2/π| = {vac:.1e}, |W_1(0)+2/π| = {fock:.1e}, Poisson {poisson_err:.1e}, routes {route_err:.1e}, ξ {xi_err:.1e}"
        ),
    })
}

fn c10_twa() -> Result<Outcome> {
    let n = 100;
    let r = 20_000;
    let sp = SpinSpace::new(n)?;
    let mut worst: f64 = 0.0;
    for (dn, h) in WorkingPoint::get().modes().iter().zip(HARMONICS) {
        // g² is invariant under dn -> s·dn; rescale so the vacuum-subtracted estimator is resolved.
        let s = 10.0 / (n as f64 * dn.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max));
        let dn = map2(dn, |z| z * s);
        let op = photonic_operator(&dn, sp);
        for fam in [Family::Up, Family::Half] {
            let exact = second_order(&op, &fam.state(n)?)?.g2;
            let ens = sample_initial_conditions(&fit_theta_distribution(fam, n)?, n, r, 7)?;
            let f = classical_fields(&ens, &HarmonicMode { n: h, dn }, 11);
            let c = classical_statistics(&f, &PhaseGrid { points: 101, half_width: None })?;
            worst = worst.max((c.g2.value / exact - 1.0).abs());
        }
    }
    let ns = [10, 20, 50, 100, 200, 400];
    let mut fit_ok = true;
    let mut fits = Vec::new();
    for fam in [Family::Up, Family::Half] {
        let f = refit_coefficients(fam, &ns)?;
        let (a1, a2) = fam.default_coefficients();
        let (e1, e2) = (f.a1 / a1 - 1.0, f.a2 / a2 - 1.0);
        fit_ok &= e1.abs() <= 0.1 && e2.abs() <= 0.1;
        fits.push(format!("{fam:?}: a1 {e1:+.3}, a2 {e2:+.3}"));
    }
    Ok(Outcome {
        pass: worst <= 0.05 && fit_ok,
        detail: format!("max |g²_TWA/g²-1| = {worst:.4} (≤ 0.05); refit vs published: {}", fits.join(", ")),
    })
}

fn c11_mode_validity() -> Result<Outcome> {
    let modes = WorkingPoint::get().modes();
    let (lo, hi) = modes.iter().flatten().flatten().map(|z| z.norm()).fold((f64::MAX, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
    let n = 1_000_000;
    let states = [CollectiveState::ground(n), CollectiveState::excited(n), CollectiveState::coherent(n, FRAC_PI_2, 0.0), CollectiveState::half_dicke(n)?];
    let mut worst: f64 = 0.0;
    for dn in &modes {
        for s in &states {
            worst = worst.max(commutator_check(dn, s)?);
        }
    }
    Ok(Outcome {
        pass: lo >= 1e-5 && hi <= 1e-3 && worst < 1e-2,
        detail: format!("|d_n| entries at 15/21/55 in [{lo:.2e}, {hi:.2e}]; max commutator term at N = 1e6: {worst:.2e}"),
    })
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "ionization-potential calibration", c1_ionization),
        (2, "HHG spectrum shape", c2_spectrum),
        (3, "classical limit of uncorrelated emitters", c3_classical_limit),
        (4, "nonclassical Dicke emission", c4_dicke),
        (5, "superradiance profile", c5_superradiance),
        (6, "superradiant HHG interpolation", c6_superradiant_hhg),
        (7, "twisting protocol", c7_twisting),
        (8, "harmonic correlations", c8_correlations),
        (9, "reconstruction oracles", c9_oracles),
        (10, "TWA cross-validation", c10_twa),
        (11, "mode validity", c11_mode_validity),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    let strict = args.iter().any(|a| a == "--strict");
    let chosen: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if !chosen.is_empty() && !chosen.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err(hhg_core::Error::Numerical("panicked".into())));
        let (pass, detail) = match outcome {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed.push(id);
        }
        println!("criterion {id:>2} {} {name} [{:.1} s]: {detail}", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        if strict {
            std::process::exit(1);
        }
    }
}

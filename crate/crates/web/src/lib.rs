//! Browser demo over `hhg-core`.
//!
//! The `demo` functions are plain Rust so they test natively; the exported
//! wrappers only convert errors into JS exceptions.

use wasm_bindgen::prelude::*;

pub mod demo {
    use std::f64::consts::{FRAC_PI_2, PI};
    use std::fmt::Write;

    use hhg_core::bloch::{atomic_wigner_bloch, phi_grid, theta_grid, MAX_BLOCH_ATOMS};
    use hhg_core::linalg::C64;
    use hhg_core::modes::{photonic_operator, HarmonicMode};
    use hhg_core::spin::{one_axis_twisting, rotation_pulse, Axis, CollectiveState, SpinSpace, TwistingParams};
    use hhg_core::stats::*;
    use hhg_core::svg::{heatmap, line_plot, Series};
    use hhg_core::twa::{classical_fields, classical_statistics, fit_theta_distribution, sample_initial_conditions, Family};

    /// Twisting strength in units of the precession frequency, chosen so a few cycles visibly shear.
    const DEMO_TWIST: f64 = 0.25;

    /// Output of one demo operation: two SVG panels and a text summary.
    #[derive(Clone, Debug)]
    pub struct Panels {
        pub left: String,
        pub right: String,
        pub summary: String,
    }

    fn err(e: impl std::fmt::Display) -> String {
        e.to_string()
    }

    /// Named collective state; `cycles` only matters for `twisted`.
    pub fn collective_state(kind: &str, atoms: usize, cycles: f64) -> Result<CollectiveState, String> {
        let equator = || rotation_pulse(&CollectiveState::ground(atoms), Axis::Y, -FRAC_PI_2).map_err(err);
        match kind {
            "ground" => Ok(CollectiveState::ground(atoms)),
            "excited" => Ok(CollectiveState::excited(atoms)),
            "pi2" => equator(),
            "dicke" => CollectiveState::half_dicke(atoms).map_err(err),
            "twisted" => {
                let omega0 = 1.0;
                let p = TwistingParams { omega0, omega_j: DEMO_TWIST * omega0, t_h: cycles * 2.0 * PI / omega0 };
                one_axis_twisting(&equator()?, &p).map_err(err)
            }
            other => Err(format!("unknown state `{other}` (ground, excited, pi2, dicke, twisted)")),
        }
    }

    /// Atomic Wigner function of a collective state on a (φ, θ) map, plus its polar profile.
    pub fn bloch_wigner(kind: &str, atoms: usize, cycles: f64, points: usize) -> Result<Panels, String> {
        if atoms == 0 || atoms > MAX_BLOCH_ATOMS {
            return Err(format!("atoms must be in 1..={MAX_BLOCH_ATOMS}"));
        }
        let points = points.clamp(8, 120);
        let s = collective_state(kind, atoms, cycles)?;
        let (theta, phi) = (theta_grid(points), phi_grid(2 * points));
        let w = atomic_wigner_bloch(&s, &theta, &phi).map_err(err)?;
        let flat: Vec<f64> = w.w.iter().flatten().copied().collect();
        let left = heatmap(&phi, &theta, &flat, &format!("W(θ, φ), {kind}, N = {atoms}"), "φ", "θ");
        let polar: Vec<f64> = w.w.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
        let right = line_plot(&[Series { label: "φ-averaged W", x: &theta, y: &polar }], false, "polar profile", "θ", "W");
        let (t, p) = w.argmax();
        let m = s.mean_spin();
        let summary = format!(
            "∫W dΩ = {:.6}; maximum at θ = {t:.3}, φ = {p:.3}; mean spin ({:.3}, {:.3}, {:.3}); min W = {:.3e}",
            w.integral(),
            m[0],
            m[1],
            m[2],
            flat.iter().copied().fold(f64::MAX, f64::min)
        );
        Ok(Panels { left, right, summary })
    }

    /// Analytic moment table centered on its amplitude: coherent a + ib, thermal mean a displaced by b, Fock a.
    pub fn analytic_table(kind: &str, a: f64, b: f64) -> Result<MomentTable, String> {
        let mut t = match kind {
            "coherent" => MomentTable::vacuum(MAX_ORDER),
            // The moment series of a thermal field only converges fast for a weak thermal part.
            "thermal" if (0.0..=0.25).contains(&a) => MomentTable::thermal(a, MAX_ORDER),
            "fock" if (0.0..=10.0).contains(&a) => MomentTable::fock(a.round() as usize, MAX_ORDER),
            "thermal" => return Err("thermal mean must be in [0, 0.25]; the moment series diverges beyond".into()),
            "fock" => return Err("Fock number must be in 0..=10".into()),
            other => return Err(format!("unknown field `{other}` (coherent, thermal, fock)")),
        };
        t.shift = match kind {
            "coherent" => C64::new(a, b),
            "thermal" => C64::new(b, 0.0),
            _ => t.shift,
        };
        Ok(t)
    }

    /// Moments → Wigner → photon numbers, compared with the direct moment formula.
    pub fn reconstruction(kind: &str, a: f64, b: f64, order: usize) -> Result<Panels, String> {
        let t = analytic_table(kind, a, b)?;
        let order = order.clamp(2, MAX_ORDER);
        let w = wigner_from_moments(&t.truncated(order), &PhaseGrid { points: 121, half_width: None }).map_err(err)?;
        let nbar = t.unshifted().nbar();
        let via_w = photon_statistics_from_wigner(&w, photon_cutoff(nbar)).map_err(err)?;
        let direct = photon_statistics_from_moments(&t.unshifted()).map_err(err)?;
        let left = heatmap(&w.re, &w.im, &w.w, &format!("W(α), {kind}, moments to order {order}"), "Re α", "Im α");
        let ks: Vec<f64> = (0..via_w.p.len()).map(|k| k as f64).collect();
        let kd: Vec<f64> = (0..direct.p.len()).map(|k| k as f64).collect();
        let right = line_plot(
            &[Series { label: "from W", x: &ks, y: &via_w.p }, Series { label: "from moments", x: &kd, y: &direct.p }],
            false,
            "P(n)",
            "n",
            "P",
        );
        let l1: f64 = via_w.p.iter().zip(&direct.p).map(|(x, y)| (x - y).abs()).sum();
        let mut summary = format!("n̄ = {nbar:.4}; min W = {:.3e}; ∫W = {:.6}; Σ|ΔP| = {l1:.2e}", w.min(), w.norm());
        if !direct.authoritative {
            let _ = write!(summary, " (moment route not authoritative: cancellation {:.1e})", direct.severity.unwrap_or(f64::NAN));
        }
        Ok(Panels { left, right, summary })
    }

    /// Phase-space sampling of a family against the exact g² of a σx-type mode with |N·d| = `scale`.
    pub fn twa(family: &str, atoms: usize, trajectories: usize, seed: u64, scale: f64) -> Result<Panels, String> {
        let fam: Family = match family {
            "up" => Family::Up,
            "half" => Family::Half,
            "down" => Family::Down,
            other => return Err(format!("unknown family `{other}` (up, half, down)")),
        };
        if !(2..=MAX_BLOCH_ATOMS).contains(&atoms) {
            return Err(format!("atoms must be in 2..={MAX_BLOCH_ATOMS}"));
        }
        if !(100..=200_000).contains(&trajectories) {
            return Err("trajectories must be in 100..=200000".into());
        }
        let d = C64::new(scale / atoms as f64, 0.0);
        let o = C64::new(0.0, 0.0);
        let mode = HarmonicMode { n: 1, dn: [[o, d], [d, o]] };
        let op = photonic_operator(&mode.dn, SpinSpace::new(atoms).map_err(err)?);
        let exact = g2_and_mandel(&centered_moments(&op, &fam.state(atoms).map_err(err)?, 2).map_err(err)?).map_err(err)?;
        let dist = fit_theta_distribution(fam, atoms).map_err(err)?;
        let ens = sample_initial_conditions(&dist, atoms, trajectories, seed).map_err(err)?;
        let f = classical_fields(&ens, &mode, seed);
        let c = classical_statistics(&f, &PhaseGrid { points: 81, half_width: None }).map_err(err)?;
        let left = heatmap(&c.density.re, &c.density.im, &c.density.w, &format!("sampled α, {family}, N = {atoms}"), "Re α", "Im α");
        let ks: Vec<f64> = (0..c.photons.p.len()).map(|k| k as f64).collect();
        let right = line_plot(&[Series { label: "histogram of |α|²", x: &ks, y: &c.photons.p }], false, "photon counts", "n", "P");
        let summary = format!(
            "σ = {:.4}; g² sampled {:.4} ± {:.4} vs exact {:.4}; n̄ sampled {:.3} ± {:.3}",
            dist.sigma, c.g2.value, c.g2.stderr, exact.g2, c.nbar.value, c.nbar.stderr
        );
        Ok(Panels { left, right, summary })
    }
}

/// Panels handed to the page.
#[wasm_bindgen]
pub struct Output(demo::Panels);

#[wasm_bindgen]
impl Output {
    #[wasm_bindgen(getter)]
    pub fn left(&self) -> String {
        self.0.left.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn right(&self) -> String {
        self.0.right.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> String {
        self.0.summary.clone()
    }
}

fn wrap(r: Result<demo::Panels, String>) -> Result<Output, JsError> {
    r.map(Output).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bloch_wigner(kind: &str, atoms: usize, cycles: f64, points: usize) -> Result<Output, JsError> {
    wrap(demo::bloch_wigner(kind, atoms, cycles, points))
}

#[wasm_bindgen]
pub fn reconstruction(kind: &str, a: f64, b: f64, order: usize) -> Result<Output, JsError> {
    wrap(demo::reconstruction(kind, a, b, order))
}

#[wasm_bindgen]
pub fn twa(family: &str, atoms: usize, trajectories: usize, seed: u64, scale: f64) -> Result<Output, JsError> {
    wrap(demo::twa(family, atoms, trajectories, seed, scale))
}

//! Hartree atomic units and CODATA 2018 conversion factors.

/// Speed of light in atomic units (1/fine-structure constant).
pub const C_LIGHT: f64 = 137.035_999_084;
/// Hartree energy in eV.
pub const HARTREE_EV: f64 = 27.211_386_245_988;
/// Atomic unit of electric field in GV/m.
pub const FIELD_GV_PER_M: f64 = 514.220_674_763;
/// Atomic unit of time in fs.
pub const TIME_FS: f64 = 0.024_188_843_265_857;

pub fn ev_to_au(e: f64) -> f64 {
    e / HARTREE_EV
}

pub fn au_to_ev(e: f64) -> f64 {
    e * HARTREE_EV
}

pub fn gv_per_m_to_au(f: f64) -> f64 {
    f / FIELD_GV_PER_M
}

pub fn fs_to_au(t: f64) -> f64 {
    t / TIME_FS
}

/// Ponderomotive energy E0²/(4ω²).
pub fn ponderomotive(e0: f64, omega: f64) -> f64 {
    e0 * e0 / (4.0 * omega * omega)
}

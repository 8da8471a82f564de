//! Trapezoidal strong-field drive.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Peak field amplitude (a.u.).
    pub e0: f64,
    /// Carrier angular frequency (a.u.).
    pub omega_d: f64,
    pub n_cycles: u32,
}

impl PulseSpec {
    pub fn new(e0: f64, omega_d: f64, n_cycles: u32) -> Result<Self> {
        let p = PulseSpec { e0, omega_d, n_cycles };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e0 >= 0.0 && self.e0.is_finite()) {
            return Err(Error::Config(format!("E0 must be >= 0, got {}", self.e0)));
        }
        if !(self.omega_d > 0.0 && self.omega_d.is_finite()) {
            return Err(Error::Config(format!("omega_d must be > 0, got {}", self.omega_d)));
        }
        if self.n_cycles < 4 {
            return Err(Error::Config(format!("need at least 4 cycles for the ramps, got {}", self.n_cycles)));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega_d
    }

    pub fn duration(&self) -> f64 {
        self.n_cycles as f64 * self.period()
    }

    /// Piecewise-linear envelope: ramp over the first quarter, flat, ramp down over the last quarter.
    pub fn envelope(&self, t: f64) -> f64 {
        let tf = self.duration();
        let q = 0.25 * tf;
        if t <= 0.0 || t >= tf {
            0.0
        } else if t < q {
            t / q
        } else if t <= tf - q {
            1.0
        } else {
            (tf - t) / q
        }
    }

    /// Ponderomotive energy at the peak field.
    pub fn ponderomotive(&self) -> f64 {
        crate::units::ponderomotive(self.e0, self.omega_d)
    }

    /// Cutoff harmonic order (I_p + 3.17·U_p)/ω_d.
    pub fn cutoff_order(&self, ip: f64) -> f64 {
        (ip + 3.17 * self.ponderomotive()) / self.omega_d
    }
}

pub fn classical_field(t: f64, pulse: &PulseSpec) -> f64 {
    pulse.envelope(t) * pulse.e0 * (pulse.omega_d * t).cos()
}

/// Time-stepping rule for the time-ordered exponential.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    /// exp(−i H(t+dt/2) dt), second order.
    Midpoint,
    /// Two-exponential commutator-free Magnus scheme, fourth order.
    #[default]
    Magnus4,
}

impl Stepper {
    /// (field sample offsets as fractions of dt, weights) for each exponential,
    /// in the order they are applied.
    pub fn stages(&self) -> Vec<[(f64, f64); 2]> {
        match self {
            Stepper::Midpoint => vec![[(0.5, 1.0), (0.5, 0.0)]],
            Stepper::Magnus4 => {
                let r = 3f64.sqrt() / 6.0;
                let (c1, c2) = (0.5 - r, 0.5 + r);
                let (a1, a2) = (0.25 + r, 0.25 - r);
                vec![[(c1, a1), (c2, a2)], [(c1, a2), (c2, a1)]]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub dt: f64,
    pub t_f: f64,
    #[serde(default)]
    pub stepper: Stepper,
}

impl PropagationConfig {
    /// Default step of one 400th of a drive period.
    pub fn for_pulse(pulse: &PulseSpec) -> Self {
        Self::with_steps_per_cycle(pulse, 400)
    }

    pub fn with_steps_per_cycle(pulse: &PulseSpec, per_cycle: u32) -> Self {
        PropagationConfig { dt: pulse.period() / per_cycle as f64, t_f: pulse.duration(), stepper: Stepper::default() }
    }

    /// Step count; `dt` is treated as an upper bound so the grid lands exactly on `t_f`.
    pub fn steps(&self) -> usize {
        ((self.t_f / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn effective_dt(&self) -> f64 {
        self.t_f / self.steps() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_f > 0.0 && self.dt.is_finite() && self.t_f.is_finite()) {
            return Err(Error::Config(format!("need dt > 0 and t_f > 0 (dt={}, t_f={})", self.dt, self.t_f)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_corners() {
        let p = PulseSpec::new(0.1, 0.057, 8).unwrap();
        let tf = p.duration();
        assert_eq!(p.envelope(0.0), 0.0);
        assert!((p.envelope(tf / 8.0) - 0.5).abs() < 1e-12);
        assert_eq!(p.envelope(tf / 2.0), 1.0);
        assert!((p.envelope(7.0 * tf / 8.0) - 0.5).abs() < 1e-12);
        assert_eq!(p.envelope(tf * 1.01), 0.0);
    }

    #[test]
    fn steps_land_on_tf() {
        let p = PulseSpec::new(0.1, 0.057, 40).unwrap();
        let c = PropagationConfig::for_pulse(&p);
        assert_eq!(c.steps(), 16000);
        assert!((c.effective_dt() * 16000.0 - c.t_f).abs() < 1e-9);
    }
}

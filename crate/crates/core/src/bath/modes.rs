use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HeomError, Result};

/// One damped-exponential term d e^{-(γ + iω)t} of C(t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub d_re: f64,
    pub d_im: f64,
    pub omega: f64,
    pub gamma: f64,
}

impl Mode {
    pub fn amplitude(&self) -> Complex64 {
        Complex64::new(self.d_re, self.d_im)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.amplitude() * Complex64::new(-self.gamma * t, -self.omega * t).exp()
    }
}

/// The K-term decomposition C(t) = Σ_k d_k e^{-iω_k t - γ_k t} (t ≥ 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathModes {
    pub modes: Vec<Mode>,
}

impl BathModes {
    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        let m = Self { modes };
        m.validate()?;
        Ok(m)
    }

    /// A reservoir that does not couple at all; useful for closed-system runs.
    pub fn uncoupled() -> Self {
        Self {
            modes: vec![Mode { d_re: 0.0, d_im: 0.0, omega: 0.0, gamma: 1.0 }],
        }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(HeomError::InvalidParameter {
                name: "modes",
                reason: "at least one mode is required".into(),
            });
        }
        for (k, m) in self.modes.iter().enumerate() {
            let finite = [m.d_re, m.d_im, m.omega, m.gamma].iter().all(|x| x.is_finite());
            if !finite || m.gamma <= 0.0 {
                return Err(HeomError::InvalidParameter {
                    name: "modes",
                    reason: format!("mode {k} must be finite with gamma > 0, got {m:?}"),
                });
            }
        }
        Ok(())
    }

    pub fn correlation(&self, t: f64) -> Complex64 {
        self.modes.iter().map(|m| m.eval(t)).sum()
    }

    /// (1/2π) ∫ C(t) e^{iωt} dt with C(−t) = C(t)*, summed analytically.
    pub fn noise_power(&self, omega: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| (m.amplitude() / Complex64::new(m.gamma, m.omega - omega)).re)
            .sum::<f64>()
            / PI
    }

    pub fn max_rate(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.gamma.max(m.omega.abs()))
            .fold(0.0, f64::max)
    }
}

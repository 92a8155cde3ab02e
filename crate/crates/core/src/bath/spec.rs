use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{HeomError, Result};

/// Physical description of the bosonic reservoir.
///
/// Natural units: ħ = 1 and the qubit frequency ω_q = 1, so frequencies are
/// measured in ω_q and times in 1/ω_q.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    /// Spectral exponent; 1 is Ohmic, below 1 sub-Ohmic.
    pub s: f64,
    pub kappa: f64,
    pub omega_c: f64,
    pub omega_ph: f64,
    pub beta: f64,
}

impl BathSpec {
    /// Reference reservoir: βħω_q = 5, ω_c = 50 ω_q, 2πħκ = 0.04, ω_ph = ω_q.
    pub fn reference(s: f64) -> Self {
        Self {
            s,
            kappa: 0.04 / (2.0 * PI),
            omega_c: 50.0,
            omega_ph: 1.0,
            beta: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64); 5] = [
            ("s", self.s),
            ("kappa", self.kappa),
            ("omega_c", self.omega_c),
            ("omega_ph", self.omega_ph),
            ("beta", self.beta),
        ];
        for (name, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(HeomError::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// J(ω) = sgn(ω) κ ω_ph^{1-s} |ω|^s / (1 + (ω/ω_c)²)².
    pub fn spectral_density(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            return 0.0;
        }
        let x = omega / self.omega_c;
        let cut = 1.0 + x * x;
        omega.signum() * self.kappa * self.omega_ph.powf(1.0 - self.s) * omega.abs().powf(self.s)
            / (cut * cut)
    }

    /// Bose occupation n_β(ω) for ω > 0.
    pub fn bose(&self, omega: f64) -> f64 {
        1.0 / (self.beta * omega).exp_m1()
    }

    /// Spectral noise power S_β(ω) = [1 + n_β(ω)] J(ω).
    ///
    /// At ω = 0 the Ohmic limit κ/β is returned; for s < 1 the value there is
    /// `+∞` and for s > 1 it is zero.
    pub fn noise_power(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            return if self.s == 1.0 {
                self.kappa / self.beta
            } else if self.s < 1.0 {
                f64::INFINITY
            } else {
                0.0
            };
        }
        let x = self.beta * omega.abs();
        let j = self.spectral_density(omega.abs());
        if omega > 0.0 {
            j / -(-x).exp_m1()
        } else {
            j / x.exp_m1()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frequency_vanishes() {
        for s in [1.0, 0.5, 0.25, 1.0 / 14.0, 2.0] {
            assert_eq!(BathSpec::reference(s).spectral_density(0.0), 0.0);
        }
    }

    #[test]
    fn same_value_at_reference_frequency() {
        let a = BathSpec::reference(1.0).spectral_density(1.0);
        let b = BathSpec::reference(0.5).spectral_density(1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn ohmic_low_frequency_limit() {
        let spec = BathSpec::reference(1.0);
        let expected = spec.kappa / spec.beta;
        assert_eq!(spec.noise_power(0.0), expected);
        assert!((spec.noise_power(1e-7) - expected).abs() < 1e-6 * expected);
        assert!((spec.noise_power(-1e-7) - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn sub_ohmic_low_frequency_scaling() {
        let spec = BathSpec::reference(0.5);
        for w in [1e-4, 1e-5, 1e-6] {
            let approx = spec.kappa / spec.beta * (spec.omega_ph / w).powf(1.0 - spec.s);
            let rel = (spec.noise_power(w) - approx).abs() / approx;
            assert!(rel < 10.0 * spec.beta * w, "w={w} rel={rel}");
        }
        assert!(spec.noise_power(0.0).is_infinite());
    }

    #[test]
    fn rejects_nonpositive() {
        let mut spec = BathSpec::reference(1.0);
        spec.s = 0.0;
        assert!(spec.validate().is_err());
        spec.s = 1.0;
        spec.beta = f64::NAN;
        assert!(spec.validate().is_err());
    }
}

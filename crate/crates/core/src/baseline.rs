//! Born–Markov Lindblad reference dynamics without Lamb shift.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bath::BathSpec;
use crate::control::{hamiltonian, rk4, DriveParams, Evolution};
use crate::error::Result;
use crate::hierarchy::steps_for;
use crate::qubit::{Bloch4, Hamiltonian};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladRates {
    /// 2π S_β(ω_q), emission.
    pub rate_down: f64,
    /// 2π S_β(−ω_q), absorption.
    pub rate_up: f64,
}

impl LindbladRates {
    pub fn from_spec(spec: &BathSpec, omega_q: f64) -> Self {
        Self {
            rate_down: 2.0 * PI * spec.noise_power(omega_q),
            rate_up: 2.0 * PI * spec.noise_power(-omega_q),
        }
    }

    pub fn zero() -> Self {
        Self { rate_down: 0.0, rate_up: 0.0 }
    }

    /// Steady-state ⟨σ_z⟩.
    pub fn equilibrium_z(&self) -> f64 {
        -(self.rate_down - self.rate_up) / (self.rate_down + self.rate_up)
    }
}

/// −i[H, ρ] + Γ↓ D[σ₋]ρ + Γ↑ D[σ₊]ρ in Bloch form.
pub fn lindblad_rhs<T: Real>(rho: &Bloch4<T>, h: &Hamiltonian<T>, rates: &LindbladRates) -> Bloch4<T> {
    let (down, up) = (T::of(rates.rate_down), T::of(rates.rate_up));
    let total = down + up;
    let half = total / T::of(2.0);
    let unitary = h.commutator(*rho);
    Bloch4::new(
        T::zero(),
        unitary.x - half * rho.x,
        unitary.y - half * rho.y,
        unitary.z - total * rho.z - (down - up) * rho.a0,
    )
}

/// Reduced state under the Lindblad equation, integrated with RK4.
#[derive(Clone, Debug)]
pub struct Lindblad<T> {
    pub rho: Bloch4<T>,
    pub t: T,
    pub dt: T,
    pub rates: LindbladRates,
}

impl<T: Real> Lindblad<T> {
    pub fn new(rho: Bloch4<T>, rates: LindbladRates, dt: T) -> Self {
        Self { rho, t: T::zero(), dt, rates }
    }
}

impl<T: Real> Evolution<T> for Lindblad<T> {
    fn time(&self) -> T {
        self.t
    }

    fn rdo(&self) -> Bloch4<T> {
        self.rho
    }

    fn evolve(&mut self, drive: &DriveParams, duration: T, observe: &mut dyn FnMut(T, &Bloch4<T>)) -> Result<()> {
        let steps = steps_for(duration, self.dt);
        if steps == 0 {
            return Ok(());
        }
        let start = self.t;
        let h = duration / T::of(steps as f64);
        let rates = self.rates;
        let f = |t: T, a: Bloch4<T>| lindblad_rhs(&a, &hamiltonian(drive, t), &rates);
        for j in 1..=steps {
            self.rho = rk4(self.rho, self.t, h, f);
            self.t = start + h * T::of(j as f64);
            observe(self.t, &self.rho);
        }
        Ok(())
    }

    fn impulse(&mut self, theta: T, phi: T, omega_q: T) {
        let angle = phi + omega_q * self.t;
        self.rho = self.rho.rotate([angle.cos(), angle.sin(), T::zero()], theta);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detailed_balance_fixes_equilibrium() {
        let rates = LindbladRates::from_spec(&BathSpec::reference(1.0), 1.0);
        assert!((rates.rate_up / rates.rate_down - (-5.0f64).exp()).abs() < 1e-12);
        assert!((rates.equilibrium_z() + (2.5f64).tanh()).abs() < 1e-12);
        let eq = Bloch4::state(0.0, 0.0, rates.equilibrium_z());
        let d = lindblad_rhs(&eq, &hamiltonian(&DriveParams::idle(1.0), 0.0), &rates);
        assert!(d.max_abs() < 1e-12);
    }
}

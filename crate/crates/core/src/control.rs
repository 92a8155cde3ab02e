//! Drive Hamiltonian, gate sequences and frame conversions.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HeomError, Result};
use crate::hierarchy::steps_for;
use crate::qubit::{Bloch4, Hamiltonian};
use crate::scalar::Real;

/// Lab-frame drive H = (ω_q/2)σ_z + (Ω/2)[σ_x cos(ω_ex t + φ) + σ_y sin(ω_ex t + φ)].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub omega_q: f64,
    pub omega_ex: f64,
    pub amplitude: f64,
    pub phi: f64,
}

impl DriveParams {
    /// Resonant drive, ω_ex = ω_q.
    pub fn resonant(omega_q: f64, amplitude: f64, phi: f64) -> Self {
        Self { omega_q, omega_ex: omega_q, amplitude, phi }
    }

    pub fn idle(omega_q: f64) -> Self {
        Self::resonant(omega_q, 0.0, 0.0)
    }
}

pub fn hamiltonian<T: Real>(p: &DriveParams, t: T) -> Hamiltonian<T> {
    let half = T::of(0.5);
    let amp = T::of(p.amplitude) * half;
    let phase = T::of(p.omega_ex) * t + T::of(p.phi);
    Hamiltonian {
        h0: T::zero(),
        h: [amp * phase.cos(), amp * phase.sin(), T::of(p.omega_q) * half],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gate {
    RxPi,
    RxHalfPi,
    Hadamard,
}

impl Gate {
    pub const ALL: [Gate; 3] = [Gate::RxPi, Gate::RxHalfPi, Gate::Hadamard];

    /// (θ, φ) of the three pulses in application order.
    pub fn pulses(self) -> [(f64, f64); 3] {
        match self {
            Gate::RxPi => [(PI, 0.0); 3],
            Gate::RxHalfPi => [(FRAC_PI_2, 0.0); 3],
            Gate::Hadamard => [(FRAC_PI_2, -FRAC_PI_2), (FRAC_PI_2, FRAC_PI_2), (FRAC_PI_2, -FRAC_PI_2)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::RxPi => "rx-pi",
            Gate::RxHalfPi => "rx-half-pi",
            Gate::Hadamard => "hadamard",
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gate {
    type Err = HeomError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "rx-pi" | "rxpi" => Ok(Gate::RxPi),
            "rx-half-pi" | "rxhalfpi" | "rx-pi-2" => Ok(Gate::RxHalfPi),
            "hadamard" | "h" => Ok(Gate::Hadamard),
            other => Err(HeomError::InvalidParameter { name: "gate", reason: format!("unknown gate '{other}'") }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Segment {
    /// Square pulse of amplitude Ω lasting θ/Ω.
    Pulse { theta: f64, phi: f64, amplitude: f64 },
    Idle { duration: f64 },
    /// Zero-duration rotation.
    Impulse { theta: f64, phi: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Pulse { theta, amplitude, .. } => theta / amplitude,
            Segment::Idle { duration } => duration,
            Segment::Impulse { .. } => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Segment::Pulse { theta, phi, amplitude } => {
                theta.is_finite() && phi.is_finite() && amplitude.is_finite() && amplitude > 0.0
            }
            Segment::Idle { duration } => duration.is_finite() && duration >= 0.0,
            Segment::Impulse { theta, phi } => theta.is_finite() && phi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(HeomError::InvalidParameter { name: "segment", reason: format!("{self:?}") })
        }
    }
}

/// Segments applied in order; checkpoint d is the end of segment d (d = 0 is the start).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    pub segments: Vec<Segment>,
}

impl PulseProgram {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            s.validate()?;
        }
        Ok(Self { segments })
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    /// Times of checkpoints 0..=segments.len().
    pub fn checkpoint_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = vec![0.0];
        for s in &self.segments {
            t += s.duration();
            out.push(t);
        }
        out
    }
}

/// Pulse, idle, pulse, idle, pulse. An infinite amplitude gives impulses.
pub fn build_sequence(gate: Gate, amplitude: f64, delta_t: f64) -> Result<PulseProgram> {
    if !(amplitude > 0.0) || amplitude.is_nan() {
        return Err(HeomError::InvalidParameter { name: "amplitude", reason: format!("must be positive or infinite, got {amplitude}") });
    }
    if !(delta_t >= 0.0 && delta_t.is_finite()) {
        return Err(HeomError::InvalidParameter { name: "delta_t", reason: format!("must be finite and non-negative, got {delta_t}") });
    }
    let pulse = |(theta, phi): (f64, f64)| {
        if amplitude.is_infinite() {
            Segment::Impulse { theta, phi }
        } else {
            Segment::Pulse { theta, phi, amplitude }
        }
    };
    let [a, b, c] = gate.pulses();
    PulseProgram::new(vec![
        pulse(a),
        Segment::Idle { duration: delta_t },
        pulse(b),
        Segment::Idle { duration: delta_t },
        pulse(c),
    ])
}

/// Bloch vectors at one instant in the lab and rotating frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochSample {
    pub t: f64,
    pub lab: [f64; 3],
    pub rotating: [f64; 3],
}

/// Lab components and their rotating-frame counterparts R_z(−ω_q t) ρ R_z(ω_q t).
pub fn bloch<T: Real>(rho: &Bloch4<T>, t: T, omega_q: T) -> BlochSample {
    let rot = rho.rotate_z(-omega_q * t);
    let f = |v: [T; 3]| v.map(|x| x.to_f64_lossy());
    BlochSample { t: t.to_f64_lossy(), lab: f(rho.vector()), rotating: f([rot.x, rot.y, rho.z]) }
}

/// Something that carries a qubit state through a pulse program.
pub trait Evolution<T: Real> {
    fn time(&self) -> T;
    fn rdo(&self) -> Bloch4<T>;
    /// Integrates over `duration` under `drive`, observing (t, ρ) after each step.
    fn evolve(&mut self, drive: &DriveParams, duration: T, observe: &mut dyn FnMut(T, &Bloch4<T>)) -> Result<()>;
    /// Applies the instantaneous rotation R_φ(θ) in the rotating frame.
    fn impulse(&mut self, theta: T, phi: T, omega_q: T);
}

/// Runs `program` on every evolution in lockstep, segment by segment.
/// Returns the reduced states at each checkpoint (outer: checkpoint, inner: evolution).
pub fn run_program<T: Real>(
    program: &PulseProgram,
    omega_q: f64,
    evolutions: &mut [&mut dyn Evolution<T>],
    observe: &mut dyn FnMut(usize, T, &Bloch4<T>),
) -> Result<Vec<Vec<Bloch4<T>>>> {
    let mut checkpoints = vec![evolutions.iter().map(|e| e.rdo()).collect::<Vec<_>>()];
    for seg in &program.segments {
        for (j, e) in evolutions.iter_mut().enumerate() {
            apply_segment(seg, omega_q, &mut **e, &mut |t, r| observe(j, t, r))?;
        }
        checkpoints.push(evolutions.iter().map(|e| e.rdo()).collect());
    }
    Ok(checkpoints)
}

/// Carries one evolution through one segment. Impulses are observed once, after the rotation.
pub fn apply_segment<T: Real>(
    seg: &Segment,
    omega_q: f64,
    e: &mut dyn Evolution<T>,
    observe: &mut dyn FnMut(T, &Bloch4<T>),
) -> Result<()> {
    match *seg {
        Segment::Pulse { theta, phi, amplitude } => {
            let drive = DriveParams::resonant(omega_q, amplitude, phi);
            e.evolve(&drive, T::of(theta / amplitude), observe)
        }
        Segment::Idle { duration } => e.evolve(&DriveParams::idle(omega_q), T::of(duration), observe),
        Segment::Impulse { theta, phi } => {
            e.impulse(T::of(theta), T::of(phi), T::of(omega_q));
            let (t, r) = (e.time(), e.rdo());
            observe(t, &r);
            Ok(())
        }
    }
}

/// Reservoir-free qubit integrated with the same RK4 scheme as the hierarchy.
#[derive(Clone, Debug)]
pub struct Isolated<T> {
    pub rho: Bloch4<T>,
    pub t: T,
    pub dt: T,
}

impl<T: Real> Isolated<T> {
    pub fn new(rho: Bloch4<T>, dt: T) -> Self {
        Self { rho, t: T::zero(), dt }
    }
}

impl<T: Real> Evolution<T> for Isolated<T> {
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
        let f = |t: T, a: Bloch4<T>| hamiltonian(drive, t).commutator(a);
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

/// Classical RK4 step for a single 4-vector.
pub fn rk4<T: Real, F: Fn(T, Bloch4<T>) -> Bloch4<T>>(y: Bloch4<T>, t: T, h: T, f: F) -> Bloch4<T> {
    let half = h / T::of(2.0);
    let k1 = f(t, y);
    let k2 = f(t + half, y.add(k1.scale(half)));
    let k3 = f(t + half, y.add(k2.scale(half)));
    let k4 = f(t + h, y.add(k3.scale(h)));
    let sum = k1.add(k2.scale(T::of(2.0))).add(k3.scale(T::of(2.0))).add(k4);
    y.add(sum.scale(h / T::of(6.0)))
}

/// Exact isolated checkpoints at resonance: every pulse or impulse is R_φ(θ)
/// in the rotating frame, idles leave the rotating frame untouched.
pub fn closed_form_checkpoints(program: &PulseProgram, rho0: Bloch4<f64>, omega_q: f64) -> Vec<Bloch4<f64>> {
    let mut rot = rho0;
    let mut t = 0.0;
    let mut out = vec![rho0];
    for seg in &program.segments {
        match *seg {
            Segment::Pulse { theta, phi, .. } | Segment::Impulse { theta, phi } => {
                rot = rot.rotate([phi.cos(), phi.sin(), 0.0], theta);
            }
            Segment::Idle { .. } => {}
        }
        t += seg.duration();
        out.push(rot.rotate_z(omega_q * t));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_at_rest_is_diagonal() {
        let h = hamiltonian::<f64>(&DriveParams::idle(1.0), 3.0);
        assert_eq!(h.h, [0.0, 0.0, 0.5]);
        let h = hamiltonian::<f64>(&DriveParams::resonant(1.0, 0.4, 0.0), 0.0);
        assert_eq!(h.h, [0.2, 0.0, 0.5]);
    }

    #[test]
    fn impulsive_sequence_has_no_duration() {
        let p = build_sequence(Gate::RxPi, f64::INFINITY, 0.0).unwrap();
        assert_eq!(p.total_duration(), 0.0);
        assert!(p.segments.iter().all(|s| !matches!(s, Segment::Pulse { .. })));
    }

    #[test]
    fn pulse_durations_add_up() {
        let p = build_sequence(Gate::RxPi, 1.0 / 3.0, 2.0 * PI).unwrap();
        assert!((p.total_duration() - 13.0 * PI).abs() < 1e-12);
        assert_eq!(p.checkpoint_times().len(), 6);
    }

    #[test]
    fn hadamard_phases_in_application_order() {
        let p = build_sequence(Gate::Hadamard, 1.0, 0.0).unwrap();
        let phis: Vec<f64> = p
            .segments
            .iter()
            .filter_map(|s| match s {
                Segment::Pulse { phi, .. } => Some(*phi),
                _ => None,
            })
            .collect();
        assert_eq!(phis, vec![-FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_sequence(Gate::RxPi, 0.0, 1.0).is_err());
        assert!(build_sequence(Gate::RxPi, 1.0, -1.0).is_err());
        assert!("cnot".parse::<Gate>().is_err());
        assert_eq!("hadamard".parse::<Gate>().unwrap(), Gate::Hadamard);
    }

    #[test]
    fn rotating_frame_of_lab_x_at_quarter_period() {
        let s = bloch(&Bloch4::state(1.0, 0.0, 0.0), FRAC_PI_2, 1.0);
        assert!((s.rotating[0]).abs() < 1e-15);
        assert!((s.rotating[1] + 1.0).abs() < 1e-15);
        assert_eq!(s.lab, [1.0, 0.0, 0.0]);
    }
}

use serde::{Deserialize, Serialize};

use crate::control::{apply_segment, Evolution, Segment};
use crate::error::{HeomError, Result};
use crate::qubit::Bloch4;

use super::runner::{HeomRun, Hygiene};
use super::sequence::{Model, OpenRun};
use crate::baseline::Lindblad;

/// Uniform frequency grid [lo, hi] with spacing `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl FrequencyGrid {
    /// ±5% around ω_q at 10⁻⁴ ω_q.
    pub fn around(omega_q: f64) -> Self {
        Self { lo: 0.95 * omega_q, hi: 1.05 * omega_q, step: 1e-4 * omega_q }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.hi > self.lo && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(HeomError::InvalidParameter { name: "frequency grid", reason: format!("{self:?}") });
        }
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        Ok((0..=n).map(|i| self.lo + self.step * i as f64).collect())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RamseyResult {
    pub times: Vec<f64>,
    /// Lab-frame ⟨σ_x(t)⟩.
    pub sigma_x: Vec<f64>,
    pub omegas: Vec<f64>,
    pub spectrum: Vec<f64>,
    pub peak: f64,
    pub hygiene: Hygiene,
}

/// S(ω) = Re ∫₀^T dt f(t) e^{−iωt} by the trapezoid rule on the samples.
pub fn ramsey_spectrum(times: &[f64], signal: &[f64], omegas: &[f64]) -> Vec<f64> {
    let n = times.len();
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            let left = if i > 0 { times[i] - times[i - 1] } else { 0.0 };
            let right = if i + 1 < n { times[i + 1] - times[i] } else { 0.0 };
            0.5 * (left + right) * signal[i]
        })
        .collect();
    omegas.iter().map(|&w| times.iter().zip(&weights).map(|(&t, &f)| f * (w * t).cos()).sum()).collect()
}

/// Grid maximum refined by a parabola through its neighbours.
pub fn spectrum_peak(omegas: &[f64], spectrum: &[f64]) -> f64 {
    let (i, _) = spectrum.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    if i == 0 || i + 1 >= spectrum.len() {
        return omegas[i];
    }
    let (a, b, c) = (spectrum[i - 1], spectrum[i], spectrum[i + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    omegas[i] + shift.clamp(-0.5, 0.5) * (omegas[i + 1] - omegas[i])
}

/// Free precession of (|0⟩+|1⟩)/√2 ⊗ ρ_R,eq up to `t_end`, then its spectrum.
pub fn ramsey(model: &Model, t_end: f64, grid: &FrequencyGrid, omega_q: f64) -> Result<RamseyResult> {
    let start = Bloch4::state(1.0, 0.0, 0.0);
    let mut run = match model {
        Model::Heom(config) => OpenRun::Heom(HeomRun::new(config, start)?),
        Model::Lindblad { rates, dt } => {
            let mut h = Hygiene::default();
            h.observe_root(&start);
            OpenRun::Lindblad(Lindblad::new(start, *rates, *dt), h)
        }
    };
    let stride = model.sample_stride();
    let mut times = vec![0.0];
    let mut sigma_x = vec![start.x];
    let mut count = 0usize;
    let mut last = (0.0, start.x);
    apply_segment(&Segment::Idle { duration: t_end }, omega_q, &mut run, &mut |t, r| {
        count += 1;
        last = (t, r.x);
        if count % stride == 0 {
            times.push(t);
            sigma_x.push(r.x);
        }
    })?;
    if times.last() != Some(&last.0) {
        times.push(last.0);
        sigma_x.push(last.1);
    }
    let omegas = grid.points()?;
    let half: Vec<f64> = sigma_x.iter().map(|x| x / 2.0).collect();
    let spectrum = ramsey_spectrum(&times, &half, &omegas);
    let peak = spectrum_peak(&omegas, &spectrum);
    debug_assert!(run.time() > 0.0 || t_end == 0.0);
    Ok(RamseyResult { times, sigma_x, omegas, spectrum, peak, hygiene: run.hygiene() })
}

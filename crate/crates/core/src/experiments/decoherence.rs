use serde::{Deserialize, Serialize};

use crate::bath::{decoherence_exponent, BathSpec};
use crate::control::{DriveParams, Evolution};
use crate::error::Result;
use crate::hierarchy::HeomConfig;
use crate::qubit::Bloch4;

use super::runner::{HeomRun, Hygiene};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoherencePoint {
    pub t: f64,
    pub heom: f64,
    pub analytic: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecoherenceResult {
    pub points: Vec<DecoherencePoint>,
    /// max |heom − analytic| over the run.
    pub max_deviation: f64,
    pub hygiene: Hygiene,
}

/// ⟨σ_z(t)⟩ from ρ_e ⊗ ρ_R,eq with the drive off, against the short-time
/// formula exp[−4∫dω J coth(βω/2)(1 − cos ωt)/ω²], for t ≤ `t_max`.
/// `step` bounds the sampling interval; the hierarchy step is not coarsened.
pub fn universal_decoherence_check(config: &HeomConfig, spec: &BathSpec, t_max: f64, step: f64) -> Result<DecoherenceResult> {
    let mut config = config.clone();
    config.dt = config.dt.min(step);
    let mut run = HeomRun::<f64>::new(&config, Bloch4::excited())?;
    let mut samples = vec![(0.0, 1.0)];
    run.evolve(&DriveParams::idle(1.0), t_max, &mut |t, r| samples.push((t, r.z)))?;
    let mut points = Vec::with_capacity(samples.len());
    let mut max_deviation = 0.0f64;
    for (t, heom) in samples {
        let analytic = (-decoherence_exponent(spec, t)?).exp();
        max_deviation = max_deviation.max((heom - analytic).abs());
        points.push(DecoherencePoint { t, heom, analytic });
    }
    Ok(DecoherenceResult { points, max_deviation, hygiene: run.hygiene })
}

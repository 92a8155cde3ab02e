use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::control::{apply_segment, build_sequence, Evolution, Gate, PulseProgram, Segment};
use crate::error::{HeomError, Result};
use crate::hierarchy::HierarchyState;

use super::runner::Hygiene;
use super::sequence::{InitialPrep, Model, OpenRun};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodicityVariant {
    /// Impulsive R_x(π) sequence from ρ_e; the trace after the middle impulse.
    FullSequenceFromExcited,
    /// Idle Δt, impulse π, idle, from the equilibrium; the trace after the impulse.
    ReducedFromEquilibrium,
}

impl std::str::FromStr for PeriodicityVariant {
    type Err = HeomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full-sequence-from-excited" => Ok(PeriodicityVariant::FullSequenceFromExcited),
            "reduced" | "reduced-from-equilibrium" => Ok(PeriodicityVariant::ReducedFromEquilibrium),
            other => Err(HeomError::InvalidParameter { name: "variant", reason: format!("unknown variant '{other}'") }),
        }
    }
}

/// ⟨σ_z⟩ after the observed impulse, against τ = t − t_impulse.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PostPulseTrace {
    pub delta_t: f64,
    pub tau: Vec<f64>,
    pub sigma_z: Vec<f64>,
    /// Full ⟨σ_z(t)⟩ over the whole program, for plotting.
    pub whole: Vec<(f64, f64)>,
}

impl PostPulseTrace {
    pub fn span(&self) -> f64 {
        self.tau.last().copied().unwrap_or(0.0)
    }

    /// Linear interpolation in τ; τ must lie inside the trace.
    pub fn at(&self, tau: f64) -> f64 {
        let i = self.tau.partition_point(|&x| x < tau);
        if i == 0 {
            return self.sigma_z[0];
        }
        if i >= self.tau.len() {
            return *self.sigma_z.last().unwrap();
        }
        let (t0, t1) = (self.tau[i - 1], self.tau[i]);
        let w = if t1 > t0 { (tau - t0) / (t1 - t0) } else { 1.0 };
        self.sigma_z[i - 1] * (1.0 - w) + self.sigma_z[i] * w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityPair {
    pub delta_t_a: f64,
    pub delta_t_b: f64,
    /// τ range actually compared.
    pub window: f64,
    pub max_difference: f64,
    /// |a(0) − b(0)|: the part carried over from the pre-pulse state.
    pub offset: f64,
    /// max |(a(τ) − a(0)) − (b(τ) − b(0))|: the difference in shape alone.
    pub shape_difference: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodicityResult {
    pub variant: PeriodicityVariant,
    pub traces: Vec<PostPulseTrace>,
    /// Every pair of runs whose idle durations differ by π/ω_q.
    pub pairs: Vec<PeriodicityPair>,
    pub hygiene: Hygiene,
}

/// max |a(τ) − b(τ)| over τ ∈ [0, window] on the union of both sample grids.
/// Symmetric in its arguments.
pub fn compare_traces(a: &PostPulseTrace, b: &PostPulseTrace, window: f64) -> PeriodicityPair {
    let w = window.min(a.span()).min(b.span());
    let mut taus: Vec<f64> = a.tau.iter().chain(&b.tau).copied().filter(|&t| t <= w).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let (a0, b0) = (a.at(0.0), b.at(0.0));
    let mut max_difference = 0.0f64;
    let mut shape_difference = 0.0f64;
    for &t in &taus {
        let (x, y) = (a.at(t), b.at(t));
        max_difference = max_difference.max((x - y).abs());
        shape_difference = shape_difference.max(((x - a0) - (y - b0)).abs());
    }
    PeriodicityPair { delta_t_a: a.delta_t, delta_t_b: b.delta_t, window: w, max_difference, offset: (a0 - b0).abs(), shape_difference }
}

/// The program and the index of the segment whose trace is recorded. The
/// recorded segment lasts `observe_for`, or the whole second idle if shorter.
pub fn periodicity_program(variant: PeriodicityVariant, delta_t: f64, observe_for: f64) -> Result<(PulseProgram, usize)> {
    match variant {
        PeriodicityVariant::FullSequenceFromExcited => {
            let mut segments = build_sequence(Gate::RxPi, f64::INFINITY, delta_t)?.segments;
            // Observe only the first `observe_for` of the second idle so that
            // runs of different Δt share a step grid there.
            let head = delta_t.min(observe_for);
            segments.splice(3..4, [Segment::Idle { duration: head }, Segment::Idle { duration: delta_t - head }]);
            Ok((PulseProgram::new(segments)?, 3))
        }
        PeriodicityVariant::ReducedFromEquilibrium => {
            let tail = (delta_t - observe_for).max(0.0);
            Ok((
                PulseProgram::new(vec![
                    Segment::Idle { duration: delta_t },
                    Segment::Impulse { theta: PI, phi: 0.0 },
                    Segment::Idle { duration: observe_for },
                    Segment::Idle { duration: tail },
                ])?,
                2,
            ))
        }
    }
}

/// Runs the variant for every Δt and compares runs whose Δt differ by π/ω_q
/// over τ ∈ [0, window].
pub fn periodicity_experiment(
    model: &Model,
    variant: PeriodicityVariant,
    delta_ts: &[f64],
    snapshot: Option<&HierarchyState<f64>>,
    window: f64,
    omega_q: f64,
) -> Result<PeriodicityResult> {
    let prep = match variant {
        PeriodicityVariant::FullSequenceFromExcited => InitialPrep::excited(),
        PeriodicityVariant::ReducedFromEquilibrium => InitialPrep::of_kind(super::sequence::PrepKind::Equilibrium, snapshot),
    };
    let mut traces = Vec::with_capacity(delta_ts.len());
    let mut hygiene = Hygiene::default();
    for &delta_t in delta_ts {
        let (program, observed) = periodicity_program(variant, delta_t, window)?;
        let mut run = OpenRun::new(model, &prep)?;
        let mut whole = vec![(0.0, run.rdo().z)];
        let mut tau = Vec::new();
        let mut sigma_z = Vec::new();
        for (i, seg) in program.segments.iter().enumerate() {
            if i == observed {
                let t0 = run.time();
                tau.push(0.0);
                sigma_z.push(run.rdo().z);
                apply_segment(seg, omega_q, &mut run, &mut |t, r| {
                    tau.push(t - t0);
                    sigma_z.push(r.z);
                    whole.push((t, r.z));
                })?;
            } else {
                apply_segment(seg, omega_q, &mut run, &mut |t, r| whole.push((t, r.z)))?;
            }
        }
        hygiene.merge(&run.hygiene());
        traces.push(PostPulseTrace { delta_t, tau, sigma_z, whole });
    }
    let shift = PI / omega_q;
    let mut pairs = Vec::new();
    for a in &traces {
        for b in &traces {
            if (b.delta_t - a.delta_t - shift).abs() < 1e-9 * shift.max(1.0) {
                pairs.push(compare_traces(a, b, window));
            }
        }
    }
    Ok(PeriodicityResult { variant, traces, pairs, hygiene })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(delta_t: f64, f: impl Fn(f64) -> f64, n: usize, span: f64) -> PostPulseTrace {
        let tau: Vec<f64> = (0..=n).map(|i| span * i as f64 / n as f64).collect();
        let sigma_z = tau.iter().map(|&t| f(t)).collect();
        PostPulseTrace { delta_t, tau, sigma_z, whole: vec![] }
    }

    #[test]
    fn comparison_is_symmetric() {
        let a = trace(0.5, |t| t.sin(), 37, 2.0);
        let b = trace(1.5, |t| t.sin() + 0.01 * t, 51, 3.0);
        let ab = compare_traces(&a, &b, 10.0);
        let ba = compare_traces(&b, &a, 10.0);
        assert_eq!(ab.max_difference, ba.max_difference);
        assert_eq!(ab.shape_difference, ba.shape_difference);
        assert_eq!(ab.window, 2.0);
        assert!((ab.max_difference - 0.02).abs() < 1e-12);
    }
}

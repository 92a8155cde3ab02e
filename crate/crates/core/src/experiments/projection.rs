use serde::{Deserialize, Serialize};

use crate::control::{apply_segment, Evolution, PulseProgram};
use crate::error::Result;
use crate::hierarchy::HierarchyState;

use super::runner::Hygiene;
use super::sequence::{InitialPrep, Model, OpenRun};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionScheme {
    /// Project once, at t = 0.
    AtStart,
    /// Project at t = 0 and after every segment.
    AtEveryPhase,
}

impl std::str::FromStr for ProjectionScheme {
    type Err = crate::error::HeomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "at-start" | "start" | "1" => Ok(ProjectionScheme::AtStart),
            "at-every-phase" | "every-phase" | "2" => Ok(ProjectionScheme::AtEveryPhase),
            other => Err(crate::error::HeomError::InvalidParameter { name: "scheme", reason: format!("unknown scheme '{other}'") }),
        }
    }
}

/// One instant of the paired runs, in the halved ⟨σ_z⟩/2 convention.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    pub t: f64,
    pub exact: f64,
    pub projected: f64,
    /// |projected − exact|.
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub scheme: ProjectionScheme,
    pub points: Vec<ProjectionPoint>,
    /// Times at which the projection was applied.
    pub projections: Vec<f64>,
    /// Segment boundaries, d = 0..=5.
    pub checkpoints: Vec<f64>,
    pub hygiene: Hygiene,
}

impl ProjectionResult {
    /// Largest deviation over t ∈ [a, b].
    pub fn max_deviation(&self, a: f64, b: f64) -> f64 {
        self.points.iter().filter(|p| p.t >= a && p.t <= b).map(|p| p.deviation).fold(0.0, f64::max)
    }

    /// How far the deviation rises within `window` after time `t`, relative to its value at `t`.
    pub fn rise_after(&self, t: f64, window: f64) -> f64 {
        let i = self.points.partition_point(|p| p.t < t).min(self.points.len().saturating_sub(1));
        let base = self.points.get(i).map_or(0.0, |p| p.deviation);
        self.points[i..].iter().take_while(|p| p.t <= t + window).map(|p| p.deviation - base).fold(0.0, f64::max)
    }
}

/// Runs the program from the equilibrium snapshot twice, once exactly and once
/// with the reservoir reset to its bare equilibrium according to `scheme`.
pub fn projection_experiment(
    model: &Model,
    program: &PulseProgram,
    snapshot: &HierarchyState<f64>,
    scheme: ProjectionScheme,
    omega_q: f64,
) -> Result<ProjectionResult> {
    let prep = InitialPrep::equilibrium(snapshot.clone());
    let mut exact = OpenRun::new(model, &prep)?;
    let mut projected = OpenRun::new(model, &prep)?;
    projected.project();
    let mut projections = vec![0.0];

    let half_z = |r: &OpenRun| r.rdo().z / 2.0;
    let point = |t: f64, a: f64, b: f64| ProjectionPoint { t, exact: a, projected: b, deviation: (b - a).abs() };
    let mut points = vec![point(0.0, half_z(&exact), half_z(&projected))];
    let last = program.segments.len();
    for (i, seg) in program.segments.iter().enumerate() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        apply_segment(seg, omega_q, &mut exact, &mut |t, r| a.push((t, r.z / 2.0)))?;
        apply_segment(seg, omega_q, &mut projected, &mut |_, r| b.push(r.z / 2.0))?;
        // Both runs share the step grid, so samples pair up one to one.
        points.extend(a.into_iter().zip(b).map(|((t, x), y)| point(t, x, y)));
        if scheme == ProjectionScheme::AtEveryPhase && i + 1 < last {
            projected.project();
            projections.push(projected.time());
        }
    }
    let mut hygiene = exact.hygiene();
    hygiene.merge(&projected.hygiene());
    Ok(ProjectionResult { scheme, points, projections, checkpoints: program.checkpoint_times(), hygiene })
}

use serde::{Deserialize, Serialize};

use crate::baseline::{Lindblad, LindbladRates};
use crate::control::{apply_segment, bloch, BlochSample, DriveParams, Evolution, Isolated, PulseProgram};
use crate::error::{HeomError, Result};
use crate::hierarchy::{HeomConfig, HierarchyState, Propagator};
use crate::qubit::{fidelity, Bloch4};

use super::runner::{HeomRun, Hygiene};

/// Largest negative eigenvalue tolerated when a state enters the fidelity.
pub const FIDELITY_TOL: f64 = 1e-8;

/// Dynamics used for the open system.
#[derive(Clone, Debug)]
pub enum Model {
    Heom(HeomConfig),
    /// Born–Markov baseline integrated with step `dt`.
    Lindblad { rates: LindbladRates, dt: f64 },
}

impl Model {
    pub fn dt(&self) -> f64 {
        match self {
            Model::Heom(c) => c.dt,
            Model::Lindblad { dt, .. } => *dt,
        }
    }

    pub fn sample_stride(&self) -> usize {
        match self {
            Model::Heom(c) => c.sample_stride.max(1),
            Model::Lindblad { .. } => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrepKind {
    Excited,
    Ground,
    Equilibrium,
}

impl PrepKind {
    pub const ALL: [PrepKind; 3] = [PrepKind::Excited, PrepKind::Ground, PrepKind::Equilibrium];

    pub fn name(self) -> &'static str {
        match self {
            PrepKind::Excited => "excited",
            PrepKind::Ground => "ground",
            PrepKind::Equilibrium => "equilibrium",
        }
    }
}

impl std::fmt::Display for PrepKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PrepKind {
    type Err = HeomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "excited" | "e" => Ok(PrepKind::Excited),
            "ground" | "g" => Ok(PrepKind::Ground),
            "equilibrium" | "eq" => Ok(PrepKind::Equilibrium),
            other => Err(HeomError::InvalidParameter { name: "prep", reason: format!("unknown preparation '{other}'") }),
        }
    }
}

/// Initial condition of a sequence run.
#[derive(Clone, Debug)]
pub struct InitialPrep {
    pub kind: PrepKind,
    /// Converged Ω = 0 hierarchy, required for `Equilibrium` under the HEOM.
    pub snapshot: Option<HierarchyState<f64>>,
}

impl InitialPrep {
    pub fn excited() -> Self {
        Self { kind: PrepKind::Excited, snapshot: None }
    }

    pub fn ground() -> Self {
        Self { kind: PrepKind::Ground, snapshot: None }
    }

    pub fn equilibrium(snapshot: HierarchyState<f64>) -> Self {
        Self { kind: PrepKind::Equilibrium, snapshot: Some(snapshot) }
    }

    /// Excited/Ground without a snapshot; Equilibrium needs one for the HEOM.
    pub fn of_kind(kind: PrepKind, snapshot: Option<&HierarchyState<f64>>) -> Self {
        match kind {
            PrepKind::Excited => Self::excited(),
            PrepKind::Ground => Self::ground(),
            PrepKind::Equilibrium => Self { kind, snapshot: snapshot.cloned() },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub d: usize,
    pub t: f64,
    pub f: f64,
    /// (a₀, x, y, z) of the open-system reduced state.
    pub rho_sim: [f64; 4],
    pub rho_iso: [f64; 4],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub prep: PrepKind,
    /// Checkpoints d = 0..=5.
    pub fidelities: Vec<FidelityRecord>,
    /// Open-system samples every `sample_stride` steps, plus each checkpoint.
    pub trace: Vec<BlochSample>,
    pub hygiene: Hygiene,
}

impl RunRecord {
    pub fn fidelity_at(&self, d: usize) -> f64 {
        self.fidelities[d].f
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SequenceOptions {
    pub omega_q: f64,
    pub record_trace: bool,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        Self { omega_q: 1.0, record_trace: false }
    }
}

/// The open-system side of a run.
#[derive(Clone, Debug)]
pub enum OpenRun {
    Heom(HeomRun<f64>),
    Lindblad(Lindblad<f64>, Hygiene),
}

impl OpenRun {
    /// Builds the open-system evolution for `prep`, starting at t = 0.
    pub fn new(model: &Model, prep: &InitialPrep) -> Result<Self> {
        match model {
            Model::Heom(config) => {
                let propagator = Propagator::<f64>::new(config)?;
                let state = match prep.kind {
                    PrepKind::Excited => HierarchyState::factorized(propagator.indices().clone(), Bloch4::excited()),
                    PrepKind::Ground => HierarchyState::factorized(propagator.indices().clone(), Bloch4::ground()),
                    PrepKind::Equilibrium => {
                        let snap = prep.snapshot.as_ref().ok_or_else(|| HeomError::InvalidParameter {
                            name: "prep",
                            reason: "equilibrium preparation needs an equilibrated snapshot".into(),
                        })?;
                        adopt_snapshot(&propagator, snap)?
                    }
                };
                Ok(OpenRun::Heom(HeomRun::from_parts(propagator, state)))
            }
            Model::Lindblad { rates, dt } => {
                let root = match prep.kind {
                    PrepKind::Excited => Bloch4::excited(),
                    PrepKind::Ground => Bloch4::ground(),
                    PrepKind::Equilibrium => Bloch4::state(0.0, 0.0, rates.equilibrium_z()),
                };
                let mut hygiene = Hygiene::default();
                hygiene.observe_root(&root);
                Ok(OpenRun::Lindblad(Lindblad::new(root, *rates, *dt), hygiene))
            }
        }
    }

    pub fn hygiene(&self) -> Hygiene {
        match self {
            OpenRun::Heom(r) => r.hygiene,
            OpenRun::Lindblad(_, h) => *h,
        }
    }

    /// P[ρ_tot]: drops the reservoir correlations. A no-op for the Lindblad model.
    pub fn project(&mut self) {
        if let OpenRun::Heom(r) = self {
            r.state.project();
        }
    }
}

impl Evolution<f64> for OpenRun {
    fn time(&self) -> f64 {
        match self {
            OpenRun::Heom(r) => r.time(),
            OpenRun::Lindblad(l, _) => l.time(),
        }
    }

    fn rdo(&self) -> Bloch4<f64> {
        match self {
            OpenRun::Heom(r) => r.rdo(),
            OpenRun::Lindblad(l, _) => l.rdo(),
        }
    }

    fn evolve(&mut self, drive: &DriveParams, duration: f64, observe: &mut dyn FnMut(f64, &Bloch4<f64>)) -> Result<()> {
        match self {
            OpenRun::Heom(r) => r.evolve(drive, duration, observe),
            OpenRun::Lindblad(l, hygiene) => l.evolve(drive, duration, &mut |t, r| {
                hygiene.observe_root(r);
                observe(t, r);
            }),
        }
    }

    fn impulse(&mut self, theta: f64, phi: f64, omega_q: f64) {
        match self {
            OpenRun::Heom(r) => r.impulse(theta, phi, omega_q),
            OpenRun::Lindblad(l, _) => l.impulse(theta, phi, omega_q),
        }
    }
}

/// Re-homes a snapshot on the propagator's index set and restarts its clock.
pub(crate) fn adopt_snapshot(propagator: &Propagator<f64>, snap: &HierarchyState<f64>) -> Result<HierarchyState<f64>> {
    let ours = propagator.indices();
    if snap.indices.len() != ours.len() || snap.indices.active_slots() != ours.active_slots() || snap.indices.n_max() != ours.n_max() {
        return Err(HeomError::SnapshotMismatch(format!(
            "snapshot hierarchy ({} ADOs) does not match the run ({} ADOs)",
            snap.indices.len(),
            ours.len()
        )));
    }
    Ok(HierarchyState { indices: ours.clone(), data: snap.data.clone(), t: 0.0 })
}

/// Records every `stride`-th open-system sample plus the state at each segment end.
pub(crate) struct TraceRecorder {
    pub samples: Vec<BlochSample>,
    stride: usize,
    count: usize,
    omega_q: f64,
    enabled: bool,
}

impl TraceRecorder {
    pub fn new(enabled: bool, stride: usize, omega_q: f64) -> Self {
        Self { samples: Vec::new(), stride: stride.max(1), count: 0, omega_q, enabled }
    }

    pub fn step(&mut self, t: f64, r: &Bloch4<f64>) {
        self.count += 1;
        if self.count % self.stride == 0 {
            self.push(t, r);
        }
    }

    pub fn push(&mut self, t: f64, r: &Bloch4<f64>) {
        if !self.enabled {
            return;
        }
        let s = bloch(r, t, self.omega_q);
        if self.samples.last() != Some(&s) {
            self.samples.push(s);
        }
    }
}

/// Runs `program` on the open system and on the isolated reference in lockstep
/// and compares them at every checkpoint.
pub fn run_sequence(model: &Model, program: &PulseProgram, prep: &InitialPrep, opts: &SequenceOptions) -> Result<RunRecord> {
    let mut open = OpenRun::new(model, prep)?;
    let start = open.rdo();
    let iso_start = match prep.kind {
        PrepKind::Excited => Bloch4::excited(),
        PrepKind::Ground => Bloch4::ground(),
        PrepKind::Equilibrium => Bloch4::new(start.a0, 0.0, 0.0, start.z),
    };
    let mut iso = Isolated::new(iso_start, model.dt());
    let omega_q = opts.omega_q;
    let mut rec = TraceRecorder::new(opts.record_trace, model.sample_stride(), omega_q);
    rec.push(0.0, &start);
    let times = program.checkpoint_times();
    let mut fidelities = Vec::with_capacity(times.len());
    let mut check = |d: usize, sim: Bloch4<f64>, reference: Bloch4<f64>| -> Result<()> {
        let f = fidelity(&sim, &reference, FIDELITY_TOL)?;
        fidelities.push(FidelityRecord { d, t: times[d], f, rho_sim: sim.to_array(), rho_iso: reference.to_array() });
        Ok(())
    };
    check(0, start, iso_start)?;
    for (i, seg) in program.segments.iter().enumerate() {
        apply_segment(seg, omega_q, &mut open, &mut |t, r| rec.step(t, r))?;
        apply_segment(seg, omega_q, &mut iso, &mut |_, _| {})?;
        let sim = open.rdo();
        rec.push(open.time(), &sim);
        check(i + 1, sim, iso.rdo())?;
    }
    Ok(RunRecord { prep: prep.kind, fidelities, trace: rec.samples, hygiene: open.hygiene() })
}

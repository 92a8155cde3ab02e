use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bath::BathModes;
use crate::control::{bloch, hamiltonian, BlochSample, DriveParams, Evolution};
use crate::error::Result;
use crate::hierarchy::{HeomConfig, HierarchyState, IndexSet, Propagator};
use crate::qubit::Bloch4;
use crate::scalar::Real;

/// Worst values of the hygiene quantities seen during a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Hygiene {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub max_bloch_length: f64,
}

impl Hygiene {
    pub fn observe_root<T: Real>(&mut self, root: &Bloch4<T>) {
        self.max_trace_error = self.max_trace_error.max((root.trace() - T::one()).abs().to_f64_lossy());
        self.max_bloch_length = self.max_bloch_length.max(root.length().to_f64_lossy());
    }

    pub fn merge(&mut self, o: &Hygiene) {
        self.max_trace_error = self.max_trace_error.max(o.max_trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(o.max_hermiticity_error);
        self.max_bloch_length = self.max_bloch_length.max(o.max_bloch_length);
    }
}

/// A hierarchy state together with its propagator.
#[derive(Clone, Debug)]
pub struct HeomRun<T> {
    pub propagator: Propagator<T>,
    pub state: HierarchyState<T>,
    pub hygiene: Hygiene,
}

impl<T: Real> HeomRun<T> {
    pub fn new(config: &HeomConfig, root: Bloch4<T>) -> Result<Self> {
        let propagator = Propagator::new(config)?;
        let state = HierarchyState::factorized(propagator.indices().clone(), root);
        Ok(Self::from_parts(propagator, state))
    }

    pub fn from_parts(propagator: Propagator<T>, state: HierarchyState<T>) -> Self {
        let mut hygiene = Hygiene::default();
        hygiene.observe_root(&state.root());
        Self { propagator, state, hygiene }
    }

    pub fn indices(&self) -> &Arc<IndexSet> {
        self.propagator.indices()
    }

    /// Checks every ADO's matrix view for Hermiticity and folds it into the record.
    pub fn audit(&mut self) {
        let h = self.state.hermiticity_error().to_f64_lossy();
        self.hygiene.max_hermiticity_error = self.hygiene.max_hermiticity_error.max(h);
    }
}

impl<T: Real> Evolution<T> for HeomRun<T> {
    fn time(&self) -> T {
        self.state.t
    }

    fn rdo(&self) -> Bloch4<T> {
        self.state.root()
    }

    fn evolve(&mut self, drive: &DriveParams, duration: T, observe: &mut dyn FnMut(T, &Bloch4<T>)) -> Result<()> {
        let h = |t: T| hamiltonian(drive, t);
        let hygiene = &mut self.hygiene;
        self.propagator.evolve(&mut self.state, &h, duration, |s| {
            let root = s.root();
            hygiene.observe_root(&root);
            observe(s.t, &root);
        })?;
        self.audit();
        Ok(())
    }

    fn impulse(&mut self, theta: T, phi: T, omega_q: T) {
        self.state.impulsive_gate(theta, phi, omega_q);
    }
}

/// Converged Ω = 0 state and the relaxation trace that led there.
#[derive(Clone, Debug)]
pub struct Equilibrium {
    pub state: HierarchyState<f64>,
    pub trace: Vec<BlochSample>,
    /// max |d⟨σ_z⟩/dt| over the final 10% of the run.
    pub drift: f64,
    pub stationary: bool,
    pub hygiene: Hygiene,
}

impl Equilibrium {
    pub fn rdo(&self) -> Bloch4<f64> {
        self.state.root()
    }
}

/// Relaxes ρ_e ⊗ ρ_R,eq with the drive off up to `t_end`.
pub fn equilibrate(config: &HeomConfig, t_end: f64, check_tol: f64) -> Result<Equilibrium> {
    equilibrate_from(config, Bloch4::excited(), t_end, check_tol)
}

pub fn equilibrate_from(config: &HeomConfig, root: Bloch4<f64>, t_end: f64, check_tol: f64) -> Result<Equilibrium> {
    let mut run = HeomRun::<f64>::new(config, root)?;
    let drive = DriveParams::idle(1.0);
    let stride = config.sample_stride.max(1);
    let window_start = 0.9 * t_end;
    let mut trace = vec![bloch(&run.state.root(), 0.0, 1.0)];
    let mut drift = 0.0f64;
    let mut step = 0usize;
    let h = |t: f64| hamiltonian(&drive, t);
    let mut deriv = vec![0.0; run.state.data.len()];
    let HeomRun { propagator, state, hygiene } = &mut run;
    let prop_ref = propagator.clone();
    propagator.evolve(state, &h, t_end, |s| {
        step += 1;
        hygiene.observe_root(&s.root());
        if step % stride == 0 {
            trace.push(bloch(&s.root(), s.t, 1.0));
            if s.t >= window_start {
                prop_ref.rhs(&s.data, &h(s.t), &mut deriv);
                drift = drift.max(deriv[3].abs());
            }
        }
    })?;
    run.audit();
    let stationary = drift <= check_tol;
    if !stationary {
        log::warn!("equilibration not stationary: drift {drift:.3e} exceeds {check_tol:.1e}");
    }
    Ok(Equilibrium { state: run.state, trace, drift, stationary, hygiene: run.hygiene })
}

/// Convenience for closed-system checks: a hierarchy whose reservoir does not couple.
pub fn uncoupled_config(n_max: usize, dt: f64) -> HeomConfig {
    let mut c = HeomConfig::new(BathModes::uncoupled(), n_max);
    c.dt = dt;
    c
}

//! Hermitian-ADO hierarchy for a qubit coupled through V = σ_x.
//!
//! Every auxiliary density operator is stored as a real 4-vector
//! (a₀, a_x, a_y, a_z) with ρ = (a₀·1 + a·σ)/2, so Hermiticity holds by
//! construction. The root (0⃗, 0⃗) is the reduced density operator.
//!
//! When a mode has ω_k = 0 the n_k slot only ever feeds itself: the
//! sub-hierarchy with n_k = 0 is closed and contains the root. With pruning
//! on (the default) such slots are dropped, which leaves the root dynamics
//! unchanged and shrinks the hierarchy considerably.

mod index;
mod propagator;
mod snapshot;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use index::{binomial, enumerate_indices, IndexSet};
pub use propagator::{steps_for, Propagator};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotKey};

use crate::bath::BathModes;
use crate::error::{HeomError, Result};
use crate::qubit::Bloch4;
use crate::scalar::Real;

/// Default cap on the memory the state and couplings may take.
pub const DEFAULT_MEMORY_BUDGET: usize = 3 << 30;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeomConfig {
    pub modes: BathModes,
    pub n_max: usize,
    /// Base time step.
    pub dt: f64,
    /// Keep every `sample_stride`-th step in recorded traces.
    pub sample_stride: usize,
    /// Drop n_k slots of non-oscillating modes.
    pub prune: bool,
    /// Bytes.
    pub memory_budget: usize,
}

impl HeomConfig {
    pub fn new(modes: BathModes, n_max: usize) -> Self {
        let dt = default_dt(&modes, n_max);
        Self {
            modes,
            n_max,
            dt,
            sample_stride: 1,
            prune: true,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.modes.validate()?;
        if self.n_max < 1 {
            return Err(HeomError::InvalidParameter { name: "n_max", reason: "must be at least 1".into() });
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(HeomError::InvalidParameter { name: "dt", reason: format!("must be positive, got {}", self.dt) });
        }
        if self.sample_stride == 0 {
            return Err(HeomError::InvalidParameter { name: "sample_stride", reason: "must be at least 1".into() });
        }
        Ok(())
    }

    pub fn active_slots(&self) -> Vec<bool> {
        let k = self.modes.len();
        (0..2 * k)
            .map(|slot| slot < k || !self.prune || self.modes.modes[slot - k].omega != 0.0)
            .collect()
    }

    /// Rough bytes per ADO: state plus three RK4 buffers in f64 and ~3K couplings.
    pub fn bytes_per_ado(&self) -> usize {
        4 * 8 * 4 + (3 * self.modes.len() + 1) * 32 + 16 * self.modes.len()
    }

    pub fn index_set(&self) -> Result<IndexSet> {
        let max_len = self.memory_budget / self.bytes_per_ado().max(1);
        IndexSet::new(self.modes.len(), self.n_max, &self.active_slots(), max_len).map_err(|e| match e {
            HeomError::ResourceLimit { needed, .. } => HeomError::ResourceLimit {
                needed: needed.saturating_mul(self.bytes_per_ado() as u128),
                budget: self.memory_budget as u128,
            },
            other => other,
        })
    }
}

/// Base RK4 step: the inverse of the fastest hierarchy rate N_max·max(γ_k + |ω_k|),
/// and never coarser than 1/100 of a qubit period.
pub fn default_dt(modes: &BathModes, n_max: usize) -> f64 {
    let fastest = modes.modes.iter().map(|m| m.gamma + m.omega.abs()).fold(0.0, f64::max);
    let rate = n_max.max(1) as f64 * fastest;
    let period_cap = 2.0 * std::f64::consts::PI / 100.0;
    if rate > 0.0 {
        (1.0 / rate).min(period_cap)
    } else {
        period_cap
    }
}

/// The full set of ADOs at one instant.
#[derive(Clone, Debug)]
pub struct HierarchyState<T> {
    pub indices: Arc<IndexSet>,
    /// Four reals per ADO, in index order.
    pub data: Vec<T>,
    pub t: T,
}

impl<T: Real> HierarchyState<T> {
    /// Factorized state ρ_S ⊗ ρ_R,eq: root set, every other ADO zero.
    pub fn factorized(indices: Arc<IndexSet>, root: Bloch4<T>) -> Self {
        let mut data = vec![T::zero(); 4 * indices.len()];
        data[..4].copy_from_slice(&root.to_array());
        Self { indices, data, t: T::zero() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ado(&self, i: usize) -> Bloch4<T> {
        Bloch4::from_array([self.data[4 * i], self.data[4 * i + 1], self.data[4 * i + 2], self.data[4 * i + 3]])
    }

    pub fn set_ado(&mut self, i: usize, v: Bloch4<T>) {
        self.data[4 * i..4 * i + 4].copy_from_slice(&v.to_array());
    }

    /// The reduced density operator.
    pub fn root(&self) -> Bloch4<T> {
        self.ado(0)
    }

    /// P[ρ_tot] = tr_R{ρ_tot} ⊗ ρ_R,eq: zero every ADO but the root.
    pub fn project(&mut self) {
        self.data[4..].iter_mut().for_each(|v| *v = T::zero());
    }

    /// Applies U = R_z(ω_q t) R_φ(θ) R_z(−ω_q t) to every ADO at the current time.
    pub fn impulsive_gate(&mut self, theta: T, phi: T, omega_q: T) {
        let angle = phi + omega_q * self.t;
        let axis = [angle.cos(), angle.sin(), T::zero()];
        for i in 0..self.len() {
            let v = self.ado(i).rotate(axis, theta);
            self.set_ado(i, v);
        }
    }

    /// max |tr ρ_root − 1|.
    pub fn trace_error(&self) -> T {
        (self.root().trace() - T::one()).abs()
    }

    /// max ‖ρ − ρ†‖ over all ADOs, evaluated on their matrix views.
    pub fn hermiticity_error(&self) -> T {
        (0..self.len())
            .map(|i| Bloch4::from_matrix(&self.ado(i).to_matrix()).1)
            .fold(T::zero(), T::max)
    }

    /// Index of the first non-finite ADO, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite()).map(|p| p / 4)
    }

    /// Copy with scalar type `U`.
    pub fn cast<U: Real>(&self) -> HierarchyState<U> {
        HierarchyState {
            indices: self.indices.clone(),
            data: self.data.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            t: U::of(self.t.to_f64_lossy()),
        }
    }
}

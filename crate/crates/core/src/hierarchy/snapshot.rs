//! Binary dump of a hierarchy state, keyed by the parameters that produced it.
//!
//! Layout (little-endian): magic, key, active slots, t, ADO count, then four
//! f64 per ADO.

use std::io::{Read, Write};
use std::sync::Arc;

use super::index::IndexSet;
use super::HierarchyState;
use crate::bath::{BathModes, BathSpec};
use crate::error::{HeomError, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"HEOMSNP1";

/// Parameters a snapshot must match to be reused.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotKey {
    pub s: f64,
    pub kappa: f64,
    pub omega_c: f64,
    pub omega_ph: f64,
    pub beta: f64,
    pub k: u32,
    pub n_max: u32,
    pub dt: f64,
    /// FNV-1a digest of the mode parameters' bit patterns.
    pub modes_digest: u64,
}

impl SnapshotKey {
    pub fn new(spec: &BathSpec, modes: &BathModes, n_max: usize, dt: f64) -> Self {
        Self {
            s: spec.s,
            kappa: spec.kappa,
            omega_c: spec.omega_c,
            omega_ph: spec.omega_ph,
            beta: spec.beta,
            k: modes.len() as u32,
            n_max: n_max as u32,
            dt,
            modes_digest: digest(modes),
        }
    }

    /// Short hexadecimal name, stable across runs.
    pub fn id(&self) -> String {
        let mut h = Fnv::default();
        for v in [self.s, self.kappa, self.omega_c, self.omega_ph, self.beta, self.dt] {
            h.write(&v.to_bits().to_le_bytes());
        }
        h.write(&self.k.to_le_bytes());
        h.write(&self.n_max.to_le_bytes());
        h.write(&self.modes_digest.to_le_bytes());
        format!("{:016x}", h.0)
    }
}

fn digest(modes: &BathModes) -> u64 {
    let mut h = Fnv::default();
    for m in &modes.modes {
        for v in [m.d_re, m.d_im, m.omega, m.gamma] {
            h.write(&v.to_bits().to_le_bytes());
        }
    }
    h.0
}

struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

pub fn write_snapshot<T: Real, W: Write>(mut w: W, key: &SnapshotKey, state: &HierarchyState<T>) -> Result<()> {
    w.write_all(MAGIC)?;
    for v in [key.s, key.kappa, key.omega_c, key.omega_ph, key.beta] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&key.k.to_le_bytes())?;
    w.write_all(&key.n_max.to_le_bytes())?;
    w.write_all(&key.dt.to_le_bytes())?;
    w.write_all(&key.modes_digest.to_le_bytes())?;
    let active = state.indices.active_slots();
    w.write_all(&(active.len() as u32).to_le_bytes())?;
    for &slot in active {
        w.write_all(&(slot as u32).to_le_bytes())?;
    }
    w.write_all(&state.t.to_f64_lossy().to_le_bytes())?;
    w.write_all(&(state.len() as u64).to_le_bytes())?;
    for v in &state.data {
        w.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot written for `expected` into the layout of `indices`.
pub fn read_snapshot<T: Real, R: Read>(mut r: R, expected: &SnapshotKey, indices: Arc<IndexSet>) -> Result<HierarchyState<T>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(HeomError::SnapshotMismatch("not a hierarchy snapshot".into()));
    }
    let mut f = [0.0; 5];
    for v in f.iter_mut() {
        *v = read_f64(&mut r)?;
    }
    let key = SnapshotKey {
        s: f[0],
        kappa: f[1],
        omega_c: f[2],
        omega_ph: f[3],
        beta: f[4],
        k: read_u32(&mut r)?,
        n_max: read_u32(&mut r)?,
        dt: read_f64(&mut r)?,
        modes_digest: read_u64(&mut r)?,
    };
    if key != *expected {
        return Err(HeomError::SnapshotMismatch(format!("snapshot was made for {key:?}, run needs {expected:?}")));
    }
    let n_active = read_u32(&mut r)? as usize;
    let mut active = Vec::with_capacity(n_active);
    for _ in 0..n_active {
        active.push(read_u32(&mut r)? as usize);
    }
    if active != indices.active_slots() {
        return Err(HeomError::SnapshotMismatch(format!(
            "snapshot slots {active:?} differ from hierarchy slots {:?}",
            indices.active_slots()
        )));
    }
    let t = read_f64(&mut r)?;
    let count = read_u64(&mut r)? as usize;
    if count != indices.len() {
        return Err(HeomError::SnapshotMismatch(format!("snapshot has {count} ADOs, hierarchy has {}", indices.len())));
    }
    let mut data = Vec::with_capacity(4 * count);
    for _ in 0..4 * count {
        data.push(T::of(read_f64(&mut r)?));
    }
    Ok(HierarchyState { indices, data, t: T::of(t) })
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

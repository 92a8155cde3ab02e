use std::sync::Arc;

use rayon::prelude::*;

use super::index::IndexSet;
use super::{HeomConfig, HierarchyState};
use crate::bath::BathModes;
use crate::error::{HeomError, Result};
use crate::qubit::{Bloch4, Hamiltonian};
use crate::scalar::Real;

/// Hierarchies at least this long evaluate the right-hand side in parallel.
const PARALLEL_MIN_ADOS: usize = 2048;

/// One incoming coupling: coefficients of the plain, −iV^× and V° maps
/// applied to the source ADO.
#[derive(Clone, Copy, Debug)]
struct Term<T> {
    src: u32,
    plain: T,
    comm: T,
    anti: T,
}

/// Precomputed hierarchy couplings with a classical RK4 stepper.
#[derive(Clone, Debug)]
pub struct Propagator<T> {
    indices: Arc<IndexSet>,
    damping: Vec<T>,
    offsets: Vec<usize>,
    terms: Vec<Term<T>>,
    dt: T,
    buffers: [Vec<T>; 3],
}

impl<T: Real> Propagator<T> {
    pub fn new(config: &HeomConfig) -> Result<Self> {
        config.validate()?;
        let indices = Arc::new(config.index_set()?);
        Ok(Self::with_indices(&config.modes, indices, config.dt))
    }

    pub(crate) fn with_indices(modes: &BathModes, indices: Arc<IndexSet>, dt: f64) -> Self {
        let k = modes.len();
        let len = indices.len();
        let mut damping = Vec::with_capacity(len);
        let mut offsets = Vec::with_capacity(len + 1);
        let mut terms = Vec::new();
        offsets.push(0);
        for i in 0..len {
            let mut diag = 0.0;
            for (kk, mode) in modes.modes.iter().enumerate() {
                let (mi, ni) = (kk, k + kk);
                let m = indices.slot(i, mi) as f64;
                let n = indices.slot(i, ni) as f64;
                diag += (m + n) * mode.gamma;
                let (dr, di) = (mode.d_re, mode.d_im);

                if mode.omega != 0.0 {
                    // ω_k √(m_k(n_k+1)) ρ_{m−e_k, n+e_k}
                    if let Some(src) = indices.minus(i, mi).and_then(|j| indices.plus(j, ni)) {
                        terms.push(term(src, mode.omega * (m * (n + 1.0)).sqrt(), 0.0, 0.0));
                    }
                    // −ω_k √((m_k+1) n_k) ρ_{m+e_k, n−e_k}
                    if let Some(src) = indices.minus(i, ni).and_then(|j| indices.plus(j, mi)) {
                        terms.push(term(src, -mode.omega * ((m + 1.0) * n).sqrt(), 0.0, 0.0));
                    }
                }
                // −iV^× √(m_k+1) ρ_{m+e_k, n}
                if let Some(src) = indices.plus(i, mi) {
                    terms.push(term(src, 0.0, (m + 1.0).sqrt(), 0.0));
                }
                // √m_k (−i d′ V^× + d″ V°) ρ_{m−e_k, n}
                if let Some(src) = indices.minus(i, mi) {
                    let r = m.sqrt();
                    terms.push(term(src, 0.0, r * dr, r * di));
                }
                // √n_k (−i d″ V^× − d′ V°) ρ_{m, n−e_k}
                if let Some(src) = indices.minus(i, ni) {
                    let r = n.sqrt();
                    terms.push(term(src, 0.0, r * di, -r * dr));
                }
            }
            damping.push(T::of(diag));
            offsets.push(terms.len());
        }
        Self {
            indices,
            damping,
            offsets,
            terms,
            dt: T::of(dt),
            buffers: [vec![T::zero(); 4 * len], vec![T::zero(); 4 * len], vec![T::zero(); 4 * len]],
        }
    }

    pub fn indices(&self) -> &Arc<IndexSet> {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Time derivative of every ADO in `state` (flat, four reals per ADO).
    pub fn rhs(&self, state: &[T], h: &Hamiltonian<T>, out: &mut [T]) {
        let eval = |(i, chunk): (usize, &mut [T])| {
            let a = Bloch4::from_array([state[4 * i], state[4 * i + 1], state[4 * i + 2], state[4 * i + 3]]);
            let mut d = h.commutator(a).sub(a.scale(self.damping[i]));
            // Sums of sources feeding the −iV^× and V° maps; only the
            // components those maps read are kept.
            let (mut cy, mut cz, mut s0, mut sx) = (T::zero(), T::zero(), T::zero(), T::zero());
            for t in &self.terms[self.offsets[i]..self.offsets[i + 1]] {
                let s = 4 * t.src as usize;
                let src = &state[s..s + 4];
                if t.plain != T::zero() {
                    d = d.add(Bloch4::from_array([src[0], src[1], src[2], src[3]]).scale(t.plain));
                }
                cy += t.comm * src[2];
                cz += t.comm * src[3];
                s0 += t.anti * src[0];
                sx += t.anti * src[1];
            }
            let two = T::of(2.0);
            chunk[0] = d.a0 + two * sx;
            chunk[1] = d.x + two * s0;
            chunk[2] = d.y - two * cz;
            chunk[3] = d.z + two * cy;
        };
        if self.len() >= PARALLEL_MIN_ADOS {
            out.par_chunks_mut(4).enumerate().for_each(eval);
        } else {
            out.chunks_mut(4).enumerate().for_each(eval);
        }
    }

    /// One RK4 step of length `dt` with the Hamiltonian sampled at t, t+dt/2, t+dt.
    pub fn step<H>(&mut self, state: &mut HierarchyState<T>, hamiltonian: &H, dt: T) -> Result<()>
    where
        H: Fn(T) -> Hamiltonian<T>,
    {
        let t = state.t;
        let half = dt / T::of(2.0);
        let sixth = dt / T::of(6.0);
        let third = dt / T::of(3.0);
        let [mut k, mut tmp, mut acc] = std::mem::take(&mut self.buffers);
        let y = &state.data;
        acc.copy_from_slice(y);

        self.rhs(y, &hamiltonian(t), &mut k);
        axpy(&mut acc, sixth, &k);
        combine(&mut tmp, y, half, &k);
        let h_mid = hamiltonian(t + half);
        self.rhs(&tmp, &h_mid, &mut k);
        axpy(&mut acc, third, &k);
        combine(&mut tmp, y, half, &k);
        self.rhs(&tmp, &h_mid, &mut k);
        axpy(&mut acc, third, &k);
        combine(&mut tmp, y, dt, &k);
        self.rhs(&tmp, &hamiltonian(t + dt), &mut k);
        axpy(&mut acc, sixth, &k);

        std::mem::swap(&mut state.data, &mut acc);
        state.t = t + dt;
        self.buffers = [k, tmp, acc];
        if let Some(bad) = state.data.iter().position(|v| !v.is_finite()) {
            return Err(HeomError::NonFinite { ado: bad / 4, t: state.t.to_f64_lossy() });
        }
        Ok(())
    }

    /// Propagates over `duration` in equal steps no longer than the base step,
    /// calling `observe` after every step.
    pub fn evolve<H, O>(&mut self, state: &mut HierarchyState<T>, hamiltonian: &H, duration: T, mut observe: O) -> Result<()>
    where
        H: Fn(T) -> Hamiltonian<T>,
        O: FnMut(&HierarchyState<T>),
    {
        let steps = steps_for(duration, self.dt);
        if steps == 0 {
            return Ok(());
        }
        let start = state.t;
        let h = duration / T::of(steps as f64);
        for j in 1..=steps {
            self.step(state, hamiltonian, h)?;
            // Pin the clock to the segment grid so long runs do not drift.
            state.t = start + h * T::of(j as f64);
            observe(state);
        }
        Ok(())
    }
}

/// Number of equal steps of length ≤ `dt` covering `duration`.
pub fn steps_for<T: Real>(duration: T, dt: T) -> usize {
    if duration <= T::zero() {
        return 0;
    }
    let ratio = (duration / dt).to_f64_lossy();
    // Tolerate ratios that are integers up to rounding.
    (ratio * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

fn term<T: Real>(src: usize, plain: f64, comm: f64, anti: f64) -> Term<T> {
    Term {
        src: src as u32,
        plain: T::of(plain),
        comm: T::of(comm),
        anti: T::of(anti),
    }
}

fn axpy<T: Real>(acc: &mut [T], a: T, x: &[T]) {
    acc.iter_mut().zip(x).for_each(|(y, x)| *y += a * *x);
}

fn combine<T: Real>(out: &mut [T], y: &[T], a: T, x: &[T]) {
    out.iter_mut().zip(y.iter().zip(x)).for_each(|(o, (y, x))| *o = *y + a * *x);
}

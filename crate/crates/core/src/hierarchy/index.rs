//! Multi-index enumeration for the hierarchy.
//!
//! An index (m⃗, n⃗) has 2K slots, m_1..m_K followed by n_1..n_K. Slots can be
//! marked inactive; indices with a nonzero inactive slot are left out. Indices
//! are ordered lexicographically on the concatenated slot values.

use crate::error::{HeomError, Result};

pub const NONE: u32 = u32::MAX;

/// C(n, k) in u128, saturating at u128::MAX.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        let Some(next) = acc.checked_mul((n - i) as u128) else {
            return u128::MAX;
        };
        acc = next / (i as u128 + 1);
    }
    acc
}

#[derive(Clone, Debug)]
pub struct IndexSet {
    k: usize,
    n_max: usize,
    /// Full slot number (0..2K) of each active slot.
    active: Vec<usize>,
    /// Active-slot values, `active.len()` per index.
    values: Vec<u8>,
    /// Neighbor position for +1 / −1 on each full slot, NONE if absent.
    plus: Vec<u32>,
    minus: Vec<u32>,
}

/// All indices of K modes with depth ≤ `n_max`.
pub fn enumerate_indices(k: usize, n_max: usize) -> Result<IndexSet> {
    IndexSet::new(k, n_max, &vec![true; 2 * k], usize::MAX)
}

impl IndexSet {
    /// Enumerates indices over the slots flagged in `active` (length 2K).
    /// Fails with a resource error when the count exceeds `max_len`.
    pub fn new(k: usize, n_max: usize, active: &[bool], max_len: usize) -> Result<Self> {
        if k == 0 || active.len() != 2 * k {
            return Err(HeomError::InvalidParameter {
                name: "K",
                reason: format!("need K ≥ 1 and 2K slot flags, got K={k}, {} flags", active.len()),
            });
        }
        if n_max > u8::MAX as usize {
            return Err(HeomError::InvalidParameter {
                name: "n_max",
                reason: format!("depth {n_max} exceeds {}", u8::MAX),
            });
        }
        let active: Vec<usize> = (0..2 * k).filter(|&j| active[j]).collect();
        let a = active.len();
        let count = binomial((a + n_max) as u64, n_max as u64);
        if count > max_len as u128 || count >= NONE as u128 {
            return Err(HeomError::ResourceLimit { needed: count, budget: max_len.min(NONE as usize - 1) as u128 });
        }
        let count = count as usize;

        let mut values = Vec::with_capacity(count * a);
        let mut current = vec![0u8; a];
        push_all(&mut values, &mut current, 0, n_max);
        debug_assert_eq!(values.len(), count * a);

        let mut set = Self {
            k,
            n_max,
            active,
            values,
            plus: Vec::new(),
            minus: Vec::new(),
        };
        set.build_adjacency();
        Ok(set)
    }

    fn build_adjacency(&mut self) {
        let slots = 2 * self.k;
        let count = self.len();
        let mut plus = vec![NONE; count * slots];
        let mut minus = vec![NONE; count * slots];
        let ranker = Ranker::new(self.active.len(), self.n_max);
        let mut buf = vec![0u8; self.active.len()];
        for i in 0..count {
            buf.copy_from_slice(self.compact(i));
            let depth: usize = buf.iter().map(|&v| v as usize).sum();
            for (p, &slot) in self.active.iter().enumerate() {
                if depth < self.n_max {
                    buf[p] += 1;
                    plus[i * slots + slot] = ranker.rank(&buf) as u32;
                    buf[p] -= 1;
                }
                if buf[p] > 0 {
                    buf[p] -= 1;
                    minus[i * slots + slot] = ranker.rank(&buf) as u32;
                    buf[p] += 1;
                }
            }
        }
        self.plus = plus;
        self.minus = minus;
    }

    pub fn len(&self) -> usize {
        if self.active.is_empty() {
            1
        } else {
            self.values.len() / self.active.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn modes(&self) -> usize {
        self.k
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn active_slots(&self) -> &[usize] {
        &self.active
    }

    fn compact(&self, i: usize) -> &[u8] {
        let a = self.active.len();
        &self.values[i * a..(i + 1) * a]
    }

    /// (m⃗, n⃗) of the index at position `i`.
    pub fn get(&self, i: usize) -> (Vec<u8>, Vec<u8>) {
        let mut full = vec![0u8; 2 * self.k];
        for (p, &slot) in self.active.iter().enumerate() {
            full[slot] = self.compact(i)[p];
        }
        let n = full.split_off(self.k);
        (full, n)
    }

    pub fn depth(&self, i: usize) -> usize {
        self.compact(i).iter().map(|&v| v as usize).sum()
    }

    /// Position of (m⃗, n⃗), if enumerated.
    pub fn position(&self, m: &[u8], n: &[u8]) -> Option<usize> {
        if m.len() != self.k || n.len() != self.k {
            return None;
        }
        let full: Vec<u8> = m.iter().chain(n).copied().collect();
        let mut compact = Vec::with_capacity(self.active.len());
        for (slot, &v) in full.iter().enumerate() {
            if self.active.contains(&slot) {
                compact.push(v);
            } else if v != 0 {
                return None;
            }
        }
        if compact.iter().map(|&v| v as usize).sum::<usize>() > self.n_max {
            return None;
        }
        Some(Ranker::new(self.active.len(), self.n_max).rank(&compact))
    }

    /// Position of the index with full slot `slot` raised by one.
    #[inline]
    pub fn plus(&self, i: usize, slot: usize) -> Option<usize> {
        let v = self.plus[i * 2 * self.k + slot];
        (v != NONE).then_some(v as usize)
    }

    #[inline]
    pub fn minus(&self, i: usize, slot: usize) -> Option<usize> {
        let v = self.minus[i * 2 * self.k + slot];
        (v != NONE).then_some(v as usize)
    }

    /// Value of full slot `slot` at position `i`.
    #[inline]
    pub fn slot(&self, i: usize, slot: usize) -> u8 {
        match self.active.iter().position(|&s| s == slot) {
            Some(p) => self.compact(i)[p],
            None => 0,
        }
    }
}

fn push_all(out: &mut Vec<u8>, current: &mut [u8], pos: usize, remaining: usize) {
    if pos == current.len() {
        out.extend_from_slice(current);
        return;
    }
    for v in 0..=remaining {
        current[pos] = v as u8;
        push_all(out, current, pos + 1, remaining - v);
    }
    current[pos] = 0;
}

/// Lexicographic rank among tuples of `slots` entries with sum ≤ `n_max`.
struct Ranker {
    slots: usize,
    /// tail[a][r] = number of tuples with `a` entries and sum ≤ r.
    tail: Vec<Vec<usize>>,
}

impl Ranker {
    fn new(slots: usize, n_max: usize) -> Self {
        let tail = (0..=slots)
            .map(|a| (0..=n_max).map(|r| binomial((a + r) as u64, r as u64) as usize).collect())
            .collect();
        Self { slots, tail }
    }

    fn rank(&self, tuple: &[u8]) -> usize {
        let n_max = self.tail[0].len() - 1;
        let mut used = 0usize;
        let mut rank = 0usize;
        for (j, &x) in tuple.iter().enumerate() {
            let rest = self.slots - j - 1;
            for v in 0..x as usize {
                rank += self.tail[rest][n_max - used - v];
            }
            used += x as usize;
        }
        rank
    }
}

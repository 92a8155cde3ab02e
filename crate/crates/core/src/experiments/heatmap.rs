use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{build_sequence, Gate};
use crate::error::Result;
use crate::hierarchy::HierarchyState;

use super::runner::Hygiene;
use super::sequence::{run_sequence, InitialPrep, Model, PrepKind, SequenceOptions};

/// Drive amplitudes Ω/ω_q of the heatmap rows, top to bottom.
pub const HEATMAP_AMPLITUDES: [f64; 4] = [f64::INFINITY, 1.0, 0.5, 1.0 / 3.0];
/// Idle durations ω_qΔt/π of the heatmap columns, left to right.
pub const HEATMAP_DELTA_T: [f64; 4] = [0.0, 1.0, 1.5, 2.0];
/// Fidelity differences below this count as ties, not order violations.
pub const ORDER_TIE_TOL: f64 = 1e-9;

pub type Supercell = [[f64; 4]; 4];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub row: usize,
    pub col: usize,
    /// Ω/ω_q; infinite for impulses.
    pub amplitude: f64,
    pub delta_t: f64,
    /// F at d = 0..=5, NaN when the cell failed.
    pub fidelity: [f64; 6],
    pub hygiene: Hygiene,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeatmapResult {
    pub gate: Gate,
    pub s: f64,
    pub prep: PrepKind,
    /// Row-major over (Ω, Δt).
    pub cells: Vec<HeatmapCell>,
    /// Amplitude-order violations at d = 1, 3, 5.
    pub amplitude_violations: [bool; 3],
    /// Idle-order violations at d = 2, 4.
    pub idle_violations: [bool; 2],
}

impl HeatmapResult {
    /// F at checkpoint `d` as a 4×4 matrix, rows Ω and columns Δt.
    pub fn supercell(&self, d: usize) -> Supercell {
        let mut m = [[f64::NAN; 4]; 4];
        for c in &self.cells {
            m[c.row][c.col] = c.fidelity[d];
        }
        m
    }

    pub fn failures(&self) -> impl Iterator<Item = &HeatmapCell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    pub fn hygiene(&self) -> Hygiene {
        let mut h = Hygiene::default();
        for c in &self.cells {
            h.merge(&c.hygiene);
        }
        h
    }
}

/// True when some column fails to descend from top to bottom.
pub fn amplitude_order_violated(m: &Supercell) -> bool {
    (0..4).any(|c| (0..3).any(|r| m[r + 1][c] > m[r][c] + ORDER_TIE_TOL))
}

/// True when some row fails to descend from left to right.
pub fn idle_order_violated(m: &Supercell) -> bool {
    (0..4).any(|r| (0..3).any(|c| m[r][c + 1] > m[r][c] + ORDER_TIE_TOL))
}

/// Runs every (Ω, Δt) cell of one gate and preparation, in parallel.
/// A failing cell is reported in place and does not stop the others.
pub fn heatmap(model: &Model, gate: Gate, s: f64, prep: PrepKind, snapshot: Option<&HierarchyState<f64>>, omega_q: f64) -> Result<HeatmapResult> {
    let prep = InitialPrep::of_kind(prep, snapshot);
    let grid: Vec<(usize, usize)> = (0..4).flat_map(|r| (0..4).map(move |c| (r, c))).collect();
    let cells: Vec<HeatmapCell> = grid
        .par_iter()
        .map(|&(row, col)| {
            let amplitude = HEATMAP_AMPLITUDES[row] * omega_q;
            let delta_t = HEATMAP_DELTA_T[col] * PI / omega_q;
            let outcome = build_sequence(gate, amplitude, delta_t)
                .and_then(|p| run_sequence(model, &p, &prep, &SequenceOptions { omega_q, record_trace: false }));
            match outcome {
                Ok(rec) => {
                    let mut fidelity = [f64::NAN; 6];
                    for f in &rec.fidelities {
                        fidelity[f.d] = f.f;
                    }
                    HeatmapCell { row, col, amplitude, delta_t, fidelity, hygiene: rec.hygiene, error: None }
                }
                Err(e) => HeatmapCell {
                    row,
                    col,
                    amplitude,
                    delta_t,
                    fidelity: [f64::NAN; 6],
                    hygiene: Hygiene::default(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut result = HeatmapResult { gate, s, prep: prep.kind, cells, amplitude_violations: [false; 3], idle_violations: [false; 2] };
    for (i, d) in [1, 3, 5].into_iter().enumerate() {
        result.amplitude_violations[i] = amplitude_order_violated(&result.supercell(d));
    }
    for (i, d) in [2, 4].into_iter().enumerate() {
        result.idle_violations[i] = idle_order_violated(&result.supercell(d));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_are_not_violations() {
        let flat = [[0.5; 4]; 4];
        assert!(!amplitude_order_violated(&flat));
        assert!(!idle_order_violated(&flat));
    }

    #[test]
    fn detectors_look_along_their_own_axis() {
        let mut m = [[0.0; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = 1.0 - 0.1 * r as f64 + 0.01 * c as f64;
            }
        }
        assert!(!amplitude_order_violated(&m));
        assert!(idle_order_violated(&m));
    }
}

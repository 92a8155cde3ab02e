//! The numerical studies: equilibration, gate sequences and their fidelities,
//! heatmaps, projection probes, periodicity, Ramsey spectroscopy and
//! short-time decoherence.

mod decoherence;
mod heatmap;
mod periodicity;
mod projection;
mod ramsey;
mod runner;
mod sequence;

pub use decoherence::{universal_decoherence_check, DecoherencePoint, DecoherenceResult};
pub use heatmap::{
    amplitude_order_violated, heatmap, idle_order_violated, HeatmapCell, HeatmapResult, Supercell, HEATMAP_AMPLITUDES,
    HEATMAP_DELTA_T, ORDER_TIE_TOL,
};
pub use periodicity::{
    compare_traces, periodicity_experiment, periodicity_program, PeriodicityPair, PeriodicityResult, PeriodicityVariant,
    PostPulseTrace,
};
pub use projection::{projection_experiment, ProjectionPoint, ProjectionResult, ProjectionScheme};
pub use ramsey::{ramsey, ramsey_spectrum, spectrum_peak, FrequencyGrid, RamseyResult};
pub use runner::{equilibrate, equilibrate_from, uncoupled_config, Equilibrium, HeomRun, Hygiene};
pub use sequence::{
    run_sequence, FidelityRecord, InitialPrep, Model, OpenRun, PrepKind, RunRecord, SequenceOptions, FIDELITY_TOL,
};

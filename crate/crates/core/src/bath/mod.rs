//! Reservoir description, exact correlation function and its damped-exponential fit.

mod correlation;
mod fit;
mod modes;
mod spec;
mod table;

pub use correlation::{decoherence_exponent, CorrelationOracle, CORRELATION_RTOL};
pub use fit::{default_tolerance, fit_modes, FitOptions, FitReport, TimeGrid};
pub use modes::{BathModes, Mode};
pub use spec::BathSpec;
pub use table::{load_modes, read_modes, save_modes, write_modes, ModeTable};

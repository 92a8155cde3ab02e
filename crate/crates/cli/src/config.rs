//! Run configuration: TOML file, command-line flags and resolved defaults.

use std::fmt::Debug;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use heom_core::bath::BathSpec;
use heom_core::control::{Gate, Segment};
use heom_core::experiments::{PeriodicityVariant, PrepKind, ProjectionScheme};

use crate::CliError;

/// Environment variable overriding the worker-thread count.
pub const THREADS_ENV: &str = "HEOM_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fit the exponential modes of the reservoir correlation and write the mode table.
    FitBath,
    /// Relax the qubit and reservoir with the drive off and store the hierarchy snapshot.
    Equilibrate,
    /// Run one gate sequence and record fidelities and the Bloch trace.
    Sequence,
    /// Fidelity heatmaps over drive amplitude and idle time.
    Heatmap,
    /// Compare runs with and without resetting the reservoir.
    Project,
    /// Post-pulse traces for idle times differing by π/ω_q.
    Periodicity,
    /// Free precession and its spectrum.
    Ramsey,
    /// Short-time decay against the analytic decoherence formula.
    Decoherence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FitBath => "fit-bath",
            Command::Equilibrate => "equilibrate",
            Command::Sequence => "sequence",
            Command::Heatmap => "heatmap",
            Command::Project => "project",
            Command::Periodicity => "periodicity",
            Command::Ramsey => "ramsey",
            Command::Decoherence => "decoherence",
        }
    }

    fn needs_hierarchy(self) -> bool {
        self != Command::FitBath
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Parser, Debug, Default)]
#[command(name = "heom", version, about = "Driven qubit in Ohmic and sub-Ohmic reservoirs, propagated with free-pole HEOM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    /// TOML run configuration. Flags override its fields.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,

    /// Spectral exponent.
    #[arg(long, short = 's', global = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true)]
    pub omega_c: Option<f64>,
    #[arg(long, global = true)]
    pub omega_ph: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,

    /// Hierarchy depth; defaults follow the exponent.
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    /// Integration step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Keep every n-th step in time series.
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Worker threads; also read from HEOM_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Equilibration time.
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    /// Stationarity threshold on |d⟨σ_z⟩/dt|.
    #[arg(long, global = true)]
    pub check_tol: Option<f64>,
    /// Relative fit tolerance.
    #[arg(long, global = true)]
    pub fit_tol: Option<f64>,

    /// Gate, or comma-separated gates for heatmaps: rx-pi, rx-half-pi, hadamard.
    #[arg(long, global = true, value_delimiter = ',')]
    pub gate: Option<Vec<String>>,
    /// Drive amplitude Ω/ω_q, as a number, a ratio like 1/3, or `inf` for impulses.
    #[arg(long, global = true, value_parser = parse_amplitude)]
    pub amplitude: Option<f64>,
    /// Idle duration in units of π/ω_q.
    #[arg(long, global = true)]
    pub delta_t: Option<f64>,
    /// Initial preparation: excited, ground or equilibrium.
    #[arg(long, global = true)]
    pub prep: Option<String>,
    /// Periodicity variant: full or reduced.
    #[arg(long, global = true)]
    pub variant: Option<String>,
    /// Projection scheme: at-start or at-every-phase.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Idle durations for periodicity runs, in units of π/ω_q.
    #[arg(long, global = true, value_delimiter = ',')]
    pub delta_ts: Option<Vec<f64>>,
    /// Comparison window after the pulse.
    #[arg(long, global = true)]
    pub window: Option<f64>,
    /// Length of the Ramsey record.
    #[arg(long, global = true)]
    pub ramsey_t_end: Option<f64>,
    #[arg(long, global = true)]
    pub decoherence_t_max: Option<f64>,
    #[arg(long, global = true)]
    pub decoherence_step: Option<f64>,
    /// Use the Lindblad baseline instead of the hierarchy.
    #[arg(long, global = true)]
    pub lindblad: bool,
    /// Allow exponents below 1/4.
    #[arg(long, global = true)]
    pub deep: bool,

    /// Mode-table file.
    #[arg(long, global = true)]
    pub modes: Option<PathBuf>,
    /// Snapshot file; defaults to a content-addressed name in the snapshot directory.
    #[arg(long, global = true)]
    pub snapshot: Option<PathBuf>,
    #[arg(long, global = true)]
    pub snapshot_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
    /// Table format.
    #[arg(long, global = true)]
    pub format: Option<Format>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    #[serde(default)]
    pub physics: PhysicsFile,
    #[serde(default)]
    pub numerics: NumericsFile,
    #[serde(default)]
    pub experiment: ExperimentFile,
    #[serde(default)]
    pub io: IoFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsFile {
    pub s: Option<f64>,
    pub kappa: Option<f64>,
    pub omega_c: Option<f64>,
    pub omega_ph: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsFile {
    pub n_max: Option<usize>,
    pub dt: Option<f64>,
    pub sample_stride: Option<usize>,
    pub threads: Option<usize>,
    pub t_end: Option<f64>,
    pub check_tol: Option<f64>,
    pub fit_tol: Option<f64>,
    pub fit_points: Option<usize>,
    pub fit_t_end: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub gate: Option<String>,
    pub gates: Option<Vec<String>>,
    #[serde(default, deserialize_with = "amplitude_from_file")]
    pub amplitude: Option<f64>,
    pub delta_t: Option<f64>,
    pub prep: Option<String>,
    pub variant: Option<String>,
    pub scheme: Option<String>,
    pub delta_ts: Option<Vec<f64>>,
    pub window: Option<f64>,
    pub ramsey_t_end: Option<f64>,
    pub decoherence_t_max: Option<f64>,
    pub decoherence_step: Option<f64>,
    /// Explicit pulse program, used instead of gate/amplitude/delta_t.
    pub segments: Option<Vec<Segment>>,
    pub lindblad: Option<bool>,
    pub deep: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoFile {
    pub modes: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Numerics {
    pub n_max: usize,
    /// None keeps the step derived from the modes.
    pub dt: Option<f64>,
    pub sample_stride: usize,
    pub threads: Option<usize>,
    pub t_end: f64,
    pub check_tol: f64,
    pub fit_tol: Option<f64>,
    pub fit_points: usize,
    pub fit_t_end: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Experiment {
    pub gates: Vec<Gate>,
    #[serde(serialize_with = "finite_or_inf")]
    pub amplitude: f64,
    /// ω_qΔt/π.
    pub delta_t: f64,
    pub prep: PrepKind,
    pub variant: PeriodicityVariant,
    pub scheme: ProjectionScheme,
    pub delta_ts: Vec<f64>,
    pub window: f64,
    pub ramsey_t_end: f64,
    pub decoherence_t_max: f64,
    pub decoherence_step: f64,
    pub segments: Option<Vec<Segment>>,
    pub lindblad: bool,
    pub deep: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Io {
    pub modes: PathBuf,
    pub snapshot: Option<PathBuf>,
    pub snapshot_dir: PathBuf,
    pub out: PathBuf,
    pub format: Format,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub physics: BathSpec,
    pub numerics: Numerics,
    pub experiment: Experiment,
    pub io: Io,
    /// Config fields replaced by flags, as `key: file -> flag`.
    pub overrides: Vec<String>,
}

/// Reads `inf`, a ratio `a/b`, or a plain number.
pub fn parse_amplitude(v: &str) -> Result<f64, String> {
    let v = v.trim();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    match v {
        "inf" | "infinity" | "impulse" => Ok(f64::INFINITY),
        _ => match v.split_once('/') {
            Some((a, b)) => Ok(num(a)? / num(b)?),
            None => num(v),
        },
    }
}

fn amplitude_from_file<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Number(x) => Ok(Some(x)),
        Raw::Text(t) => parse_amplitude(&t).map(Some).map_err(serde::de::Error::custom),
    }
}

fn finite_or_inf<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*x)
    }
}

/// Hierarchy depth used by default for exponent `s`.
pub fn default_n_max(s: f64) -> usize {
    match s {
        s if s >= 0.5 - 1e-12 => 3,
        s if s >= 0.25 - 1e-12 => 4,
        s if s >= 0.125 - 1e-12 => 8,
        _ => 10,
    }
}

pub fn default_modes_path(s: f64) -> PathBuf {
    PathBuf::from("modes").join(format!("s-{s}.txt"))
}

struct Merge {
    overrides: Vec<String>,
}

impl Merge {
    fn pick<T: PartialEq + Debug>(&mut self, key: &str, file: Option<T>, flag: Option<T>) -> Option<T> {
        match (file, flag) {
            (Some(f), Some(g)) => {
                if f != g {
                    log::info!("{key}: flag value {g:?} overrides config value {f:?}");
                    self.overrides.push(format!("{key}: {f:?} -> {g:?}"));
                }
                Some(g)
            }
            (f, g) => g.or(f),
        }
    }
}

fn parse_named<T: FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| CliError::Config(format!("experiment.{key}: {e}")))
}

pub fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_file_config(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_file_config(text: &str) -> Result<FileConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
}

/// Combines the file (if any), the flags and `threads_env` into a validated config.
pub fn resolve(cli: &Cli, file: FileConfig, threads_env: Option<&str>) -> Result<RunConfig, CliError> {
    let mut m = Merge { overrides: Vec::new() };
    let command = m
        .pick("command", file.command, cli.command)
        .ok_or_else(|| CliError::Config("missing command: give a subcommand or set `command` in the config file".into()))?;

    let p = file.physics;
    let reference = BathSpec::reference(1.0);
    let s = m.pick("physics.s", p.s, cli.s).unwrap_or(1.0);
    let physics = BathSpec {
        s,
        kappa: m.pick("physics.kappa", p.kappa, cli.kappa).unwrap_or(reference.kappa),
        omega_c: m.pick("physics.omega_c", p.omega_c, cli.omega_c).unwrap_or(reference.omega_c),
        omega_ph: m.pick("physics.omega_ph", p.omega_ph, cli.omega_ph).unwrap_or(reference.omega_ph),
        beta: m.pick("physics.beta", p.beta, cli.beta).unwrap_or(reference.beta),
    };
    physics.validate().map_err(|e| CliError::Config(format!("physics: {e}")))?;

    let n = file.numerics;
    let env_threads = match threads_env {
        Some(v) if !v.trim().is_empty() => {
            Some(v.trim().parse::<usize>().map_err(|_| CliError::Config(format!("{THREADS_ENV}: expected a positive integer, got '{v}'")))?)
        }
        _ => None,
    };
    let file_threads = m.pick("numerics.threads", n.threads, env_threads);
    let numerics = Numerics {
        n_max: m.pick("numerics.n_max", n.n_max, cli.n_max).unwrap_or_else(|| default_n_max(s)),
        dt: m.pick("numerics.dt", n.dt, cli.dt),
        sample_stride: m.pick("numerics.sample_stride", n.sample_stride, cli.stride).unwrap_or(10),
        threads: m.pick("numerics.threads", file_threads, cli.threads),
        t_end: m.pick("numerics.t_end", n.t_end, cli.t_end).unwrap_or(200.0),
        check_tol: m.pick("numerics.check_tol", n.check_tol, cli.check_tol).unwrap_or(1e-5),
        fit_tol: m.pick("numerics.fit_tol", n.fit_tol, cli.fit_tol),
        fit_points: n.fit_points.unwrap_or(300),
        fit_t_end: n.fit_t_end.unwrap_or(200.0),
    };

    let e = file.experiment;
    let file_gates = match (e.gate, e.gates) {
        (Some(_), Some(_)) => return Err(CliError::Config("experiment: set either `gate` or `gates`, not both".into())),
        (Some(g), None) => Some(vec![g]),
        (None, g) => g,
    };
    let gate_names = m.pick("experiment.gates", file_gates, cli.gate.clone());
    let gates = match gate_names {
        Some(names) => names.iter().map(|g| parse_named::<Gate>("gate", g)).collect::<Result<Vec<_>, _>>()?,
        None if command == Command::Heatmap => Gate::ALL.to_vec(),
        None => vec![Gate::Hadamard],
    };
    let prep = m.pick("experiment.prep", e.prep, cli.prep.clone());
    let variant = m.pick("experiment.variant", e.variant, cli.variant.clone());
    let scheme = m.pick("experiment.scheme", e.scheme, cli.scheme.clone());
    let experiment = Experiment {
        gates,
        amplitude: m.pick("experiment.amplitude", e.amplitude, cli.amplitude).unwrap_or(1.0 / 3.0),
        delta_t: m.pick("experiment.delta_t", e.delta_t, cli.delta_t).unwrap_or(2.0),
        prep: prep.map(|v| parse_named("prep", &v)).transpose()?.unwrap_or(PrepKind::Excited),
        variant: variant
            .map(|v| parse_named("variant", &v))
            .transpose()?
            .unwrap_or(PeriodicityVariant::ReducedFromEquilibrium),
        scheme: scheme.map(|v| parse_named("scheme", &v)).transpose()?.unwrap_or(ProjectionScheme::AtStart),
        delta_ts: m.pick("experiment.delta_ts", e.delta_ts, cli.delta_ts.clone()).unwrap_or_else(|| vec![0.5, 1.5]),
        window: m.pick("experiment.window", e.window, cli.window).unwrap_or(std::f64::consts::PI),
        ramsey_t_end: m.pick("experiment.ramsey_t_end", e.ramsey_t_end, cli.ramsey_t_end).unwrap_or(400.0),
        decoherence_t_max: m.pick("experiment.decoherence_t_max", e.decoherence_t_max, cli.decoherence_t_max).unwrap_or(0.05),
        decoherence_step: m.pick("experiment.decoherence_step", e.decoherence_step, cli.decoherence_step).unwrap_or(1e-3),
        segments: e.segments,
        lindblad: cli.lindblad || e.lindblad.unwrap_or(false),
        deep: cli.deep || e.deep.unwrap_or(false),
    };

    let f = file.io;
    let io = Io {
        modes: m.pick("io.modes", f.modes, cli.modes.clone()).unwrap_or_else(|| default_modes_path(s)),
        snapshot: m.pick("io.snapshot", f.snapshot, cli.snapshot.clone()),
        snapshot_dir: m.pick("io.snapshot_dir", f.snapshot_dir, cli.snapshot_dir.clone()).unwrap_or_else(|| "snapshots".into()),
        out: m.pick("io.out", f.out, cli.out.clone()).unwrap_or_else(|| PathBuf::from("out").join(command.name())),
        format: m.pick("io.format", f.format, cli.format).unwrap_or_default(),
    };

    let config = RunConfig { command, physics, numerics, experiment, io, overrides: m.overrides };
    config.validate()?;
    Ok(config)
}

/// Reads `cli.config` if given, then resolves.
pub fn parse_config(cli: &Cli, threads_env: Option<&str>) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        Some(path) => read_file_config(path)?,
        None => FileConfig::default(),
    };
    resolve(cli, file, threads_env)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, why: &str| Err(CliError::Config(format!("{key}: {why}")));
        let n = &self.numerics;
        let e = &self.experiment;
        if n.n_max < 1 {
            return bad("numerics.n_max", "must be at least 1");
        }
        if let Some(dt) = n.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return bad("numerics.dt", "must be positive");
            }
        }
        if n.sample_stride < 1 {
            return bad("numerics.sample_stride", "must be at least 1");
        }
        if n.threads == Some(0) {
            return bad("numerics.threads", "must be at least 1");
        }
        for (key, v) in [
            ("numerics.t_end", n.t_end),
            ("numerics.check_tol", n.check_tol),
            ("numerics.fit_t_end", n.fit_t_end),
            ("experiment.window", e.window),
            ("experiment.ramsey_t_end", e.ramsey_t_end),
            ("experiment.decoherence_t_max", e.decoherence_t_max),
            ("experiment.decoherence_step", e.decoherence_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(key, "must be positive");
            }
        }
        if !(e.amplitude > 0.0) {
            return bad("experiment.amplitude", "must be positive or inf");
        }
        if !(e.delta_t.is_finite() && e.delta_t >= 0.0) || e.delta_ts.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("experiment.delta_t", "idle durations must be non-negative");
        }
        if e.gates.is_empty() {
            return bad("experiment.gates", "at least one gate is required");
        }
        if e.gates.len() > 1 && !matches!(self.command, Command::Heatmap) {
            return bad("experiment.gates", "several gates are only accepted by heatmap");
        }
        if self.command.needs_hierarchy() && self.physics.s < 0.25 - 1e-12 && !e.deep {
            return bad("physics.s", "exponents below 1/4 need deep hierarchies; pass --deep to run them");
        }
        if e.lindblad && matches!(self.command, Command::FitBath | Command::Equilibrate | Command::Project | Command::Decoherence) {
            return bad("experiment.lindblad", &format!("{} has no Lindblad variant", self.command.name()));
        }
        Ok(())
    }

    pub fn threads(&self) -> Option<usize> {
        self.numerics.threads
    }
}

//! Dispatch of a resolved configuration to the experiments.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use heom_core::baseline::LindbladRates;
use heom_core::bath::{fit_modes, load_modes, save_modes, CorrelationOracle, FitOptions, ModeTable, TimeGrid};
use heom_core::control::{build_sequence, Gate, PulseProgram};
use heom_core::experiments::*;
use heom_core::hierarchy::{read_snapshot, write_snapshot, HeomConfig, HierarchyState, SnapshotKey};

use crate::config::{Command, RunConfig};
use crate::output::{sha256_file, time_series, OutputDir, MANIFEST};
use crate::CliError;

const OMEGA_Q: f64 = 1.0;
/// Step of the Lindblad baseline when no dt is configured.
const LINDBLAD_DT: f64 = 1e-3;
/// Window after a projection in which the deviation rise is reported.
const PROJECTION_RISE_WINDOW: f64 = 0.5;

#[derive(Debug, Serialize)]
struct SnapshotInfo {
    path: PathBuf,
    id: String,
}

#[derive(Debug, Default, Serialize)]
struct Resolved {
    model: &'static str,
    n_max: Option<usize>,
    dt: Option<f64>,
    k: Option<usize>,
    modes_file: Option<PathBuf>,
    modes_sha256: Option<String>,
    snapshot: Option<SnapshotInfo>,
    threads: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    resolved: &'a Resolved,
    outputs: &'a [String],
}

/// Where a finished run left its files.
#[derive(Debug)]
pub struct Completed {
    pub out: PathBuf,
    pub files: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: OutputDir,
    resolved: Resolved,
}

/// Runs the configured command and writes its outputs followed by the manifest.
pub fn dispatch(cfg: &RunConfig) -> Result<Completed, CliError> {
    let out = OutputDir::create(&cfg.io.out, cfg.io.format)?;
    let resolved = Resolved { threads: rayon::current_num_threads(), ..Default::default() };
    let mut ctx = Ctx { cfg, out, resolved };
    match cfg.command {
        Command::FitBath => fit_bath(&mut ctx)?,
        Command::Equilibrate => equilibrate_cmd(&mut ctx)?,
        Command::Sequence => sequence(&mut ctx)?,
        Command::Heatmap => heatmap_cmd(&mut ctx)?,
        Command::Project => project(&mut ctx)?,
        Command::Periodicity => periodicity(&mut ctx)?,
        Command::Ramsey => ramsey_cmd(&mut ctx)?,
        Command::Decoherence => decoherence(&mut ctx)?,
    }
    let Ctx { out, resolved, .. } = ctx;
    let manifest = Manifest {
        program: "heom",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.name(),
        config: cfg,
        resolved: &resolved,
        outputs: &out.written,
    };
    crate::output::write_json(&out.dir.join(MANIFEST), &manifest)?;
    Ok(Completed { out: out.dir, files: out.written })
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl Ctx<'_> {
    fn modes(&mut self) -> Result<ModeTable, CliError> {
        let path = &self.cfg.io.modes;
        if !path.exists() {
            return Err(CliError::MissingInput {
                what: "mode table",
                path: path.clone(),
                advice: format!("run `heom fit-bath -s {}` first or pass --modes", self.cfg.physics.s),
            });
        }
        let table = load_modes(path)?;
        let (a, b) = (&table.spec, &self.cfg.physics);
        let matches = same(a.s, b.s) && same(a.kappa, b.kappa) && same(a.omega_c, b.omega_c) && same(a.omega_ph, b.omega_ph) && same(a.beta, b.beta);
        if !matches {
            return Err(CliError::Config(format!(
                "mode table {} was fitted for {:?}, the run asks for {:?}; rerun fit-bath",
                path.display(),
                a,
                b
            )));
        }
        self.resolved.modes_file = Some(path.clone());
        self.resolved.modes_sha256 = Some(sha256_file(path)?);
        self.resolved.k = Some(table.modes.len());
        Ok(table)
    }

    fn heom_config(&mut self) -> Result<(HeomConfig, ModeTable), CliError> {
        let table = self.modes()?;
        let n = &self.cfg.numerics;
        let mut config = HeomConfig::new(table.modes.clone(), n.n_max);
        if let Some(dt) = n.dt {
            config.dt = dt;
        }
        config.sample_stride = n.sample_stride;
        config.validate()?;
        self.resolved.model = "heom";
        self.resolved.n_max = Some(config.n_max);
        self.resolved.dt = Some(config.dt);
        Ok((config, table))
    }

    fn model(&mut self) -> Result<(Model, Option<HeomConfig>), CliError> {
        if self.cfg.experiment.lindblad {
            let dt = self.cfg.numerics.dt.unwrap_or(LINDBLAD_DT);
            self.resolved.model = "lindblad";
            self.resolved.dt = Some(dt);
            let rates = LindbladRates::from_spec(&self.cfg.physics, OMEGA_Q);
            Ok((Model::Lindblad { rates, dt }, None))
        } else {
            let (config, _) = self.heom_config()?;
            Ok((Model::Heom(config.clone()), Some(config)))
        }
    }

    fn snapshot_key(&self, config: &HeomConfig) -> SnapshotKey {
        SnapshotKey::new(&self.cfg.physics, &config.modes, config.n_max, config.dt)
    }

    fn snapshot_path(&self, key: &SnapshotKey) -> PathBuf {
        self.cfg.io.snapshot.clone().unwrap_or_else(|| self.cfg.io.snapshot_dir.join(format!("eq-{}.snap", key.id())))
    }

    fn load_snapshot(&mut self, config: &HeomConfig) -> Result<HierarchyState<f64>, CliError> {
        let key = self.snapshot_key(config);
        let path = self.snapshot_path(&key);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CliError::MissingInput {
                    what: "equilibrium snapshot",
                    path,
                    advice: "run `heom equilibrate` with the same physics and numerics first".into(),
                })
            }
            Err(source) => return Err(CliError::Io { path, source }),
        };
        let indices = Arc::new(config.index_set()?);
        let state = read_snapshot(BufReader::new(file), &key, indices)?;
        self.resolved.snapshot = Some(SnapshotInfo { path, id: key.id() });
        Ok(state)
    }

    /// The snapshot, when the model and preparation need one.
    fn snapshot_for(&mut self, config: Option<&HeomConfig>, needed: bool) -> Result<Option<HierarchyState<f64>>, CliError> {
        match config {
            Some(c) if needed => Ok(Some(self.load_snapshot(c)?)),
            _ => Ok(None),
        }
    }

    fn program(&self) -> Result<PulseProgram, CliError> {
        let e = &self.cfg.experiment;
        Ok(match &e.segments {
            Some(segments) => PulseProgram::new(segments.clone())?,
            None => build_sequence(e.gates[0], e.amplitude, e.delta_t * PI)?,
        })
    }
}

#[derive(Serialize)]
struct CorrelationRow {
    t: f64,
    c_re: f64,
    c_im: f64,
    c_fit_re: f64,
    c_fit_im: f64,
}

#[derive(Serialize)]
struct SpectralCheck {
    omega: f64,
    relative_error: f64,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    modes_file: &'a Path,
    k: usize,
    residual: f64,
    c0: f64,
    tolerance: f64,
    spectral_checks: Vec<SpectralCheck>,
    held_out_max_error: f64,
}

fn fit_bath(ctx: &mut Ctx) -> Result<(), CliError> {
    let spec = ctx.cfg.physics;
    let n = &ctx.cfg.numerics;
    let grid = TimeGrid::for_bath(&spec, n.fit_t_end, n.fit_points);
    let mut opts = FitOptions::for_spec(&spec);
    if let Some(tol) = n.fit_tol {
        opts.tol = tol;
    }
    let report = fit_modes(&spec, &grid, &opts)?;
    let table = ModeTable { spec, modes: report.modes.clone(), residual: report.residual };
    let path = ctx.cfg.io.modes.clone();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.to_path_buf(), source })?;
    }
    save_modes(&table, &path)?;
    ctx.resolved.modes_file = Some(path.clone());
    ctx.resolved.modes_sha256 = Some(sha256_file(&path)?);
    ctx.resolved.k = Some(table.modes.len());

    let oracle = CorrelationOracle::new(spec)?;
    let held = TimeGrid::held_out(&spec, n.fit_t_end, 150);
    let mut rows = Vec::with_capacity(held.times.len());
    let mut worst = 0.0f64;
    for &t in &held.times {
        let c = oracle.eval(t)?;
        let f = table.modes.correlation(t);
        worst = worst.max((c - f).norm() / oracle.c0());
        rows.push(CorrelationRow { t, c_re: c.re, c_im: c.im, c_fit_re: f.re, c_fit_im: f.im });
    }
    ctx.out.table("correlation", &rows)?;
    let spectral_checks =
        opts.spectral_checks.iter().zip(&report.spectral_errors).map(|(&omega, &relative_error)| SpectralCheck { omega, relative_error }).collect();
    let summary = FitSummary {
        modes_file: &path,
        k: table.modes.len(),
        residual: report.residual,
        c0: report.c0,
        tolerance: opts.tol,
        spectral_checks,
        held_out_max_error: worst,
    };
    ctx.out.json("fit", &summary)
}

#[derive(Serialize)]
struct EquilibriumSummary {
    rdo: [f64; 4],
    bloch_length: f64,
    ground_population: f64,
    coherence: f64,
    drift: f64,
    stationary: bool,
    hygiene: Hygiene,
}

fn equilibrate_cmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let (config, _) = ctx.heom_config()?;
    let n = &ctx.cfg.numerics;
    let eq = equilibrate(&config, n.t_end, n.check_tol)?;
    let key = ctx.snapshot_key(&config);
    let path = ctx.snapshot_path(&key);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.to_path_buf(), source })?;
    }
    let file = File::create(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    write_snapshot(BufWriter::new(file), &key, &eq.state)?;
    ctx.resolved.snapshot = Some(SnapshotInfo { path, id: key.id() });

    ctx.out.table("relaxation", &time_series(&eq.trace))?;
    let r = eq.rdo();
    let summary = EquilibriumSummary {
        rdo: [r.a0, r.x, r.y, r.z],
        bloch_length: r.length(),
        ground_population: (r.a0 - r.z) / 2.0,
        coherence: r.x.hypot(r.y) / 2.0,
        drift: eq.drift,
        stationary: eq.stationary,
        hygiene: eq.hygiene,
    };
    ctx.out.json("equilibrium", &summary)
}

#[derive(Serialize)]
struct FidelityRow {
    d: usize,
    t: f64,
    fidelity: f64,
    sim_a0: f64,
    sim_x: f64,
    sim_y: f64,
    sim_z: f64,
    iso_a0: f64,
    iso_x: f64,
    iso_y: f64,
    iso_z: f64,
}

#[derive(Serialize)]
struct SequenceSummary {
    prep: PrepKind,
    final_fidelity: f64,
    min_fidelity: f64,
    hygiene: Hygiene,
}

fn sequence(ctx: &mut Ctx) -> Result<(), CliError> {
    let (model, config) = ctx.model()?;
    let prep = ctx.cfg.experiment.prep;
    let snap = ctx.snapshot_for(config.as_ref(), prep == PrepKind::Equilibrium)?;
    let program = ctx.program()?;
    let opts = SequenceOptions { omega_q: OMEGA_Q, record_trace: true };
    let run = run_sequence(&model, &program, &InitialPrep::of_kind(prep, snap.as_ref()), &opts)?;
    ctx.out.table("trace", &time_series(&run.trace))?;
    let rows: Vec<FidelityRow> = run
        .fidelities
        .iter()
        .map(|f| FidelityRow {
            d: f.d,
            t: f.t,
            fidelity: f.f,
            sim_a0: f.rho_sim[0],
            sim_x: f.rho_sim[1],
            sim_y: f.rho_sim[2],
            sim_z: f.rho_sim[3],
            iso_a0: f.rho_iso[0],
            iso_x: f.rho_iso[1],
            iso_y: f.rho_iso[2],
            iso_z: f.rho_iso[3],
        })
        .collect();
    ctx.out.table("fidelity", &rows)?;
    let summary = SequenceSummary {
        prep,
        final_fidelity: run.fidelities.last().map_or(f64::NAN, |f| f.f),
        min_fidelity: run.fidelities.iter().map(|f| f.f).fold(f64::INFINITY, f64::min),
        hygiene: run.hygiene,
    };
    ctx.out.json("report", &summary)
}

#[derive(Serialize)]
struct HeatmapRow {
    gate: Gate,
    prep: PrepKind,
    amplitude: f64,
    delta_t: f64,
    d: usize,
    fidelity: f64,
}

#[derive(Serialize)]
struct SupercellJson {
    prep: PrepKind,
    /// Row labels Ω/ω_q.
    amplitudes: Vec<String>,
    /// Column labels ω_qΔt/π.
    delta_t: Vec<f64>,
    d1: Supercell,
    d2: Supercell,
    d3: Supercell,
    d4: Supercell,
    d5: Supercell,
    amplitude_violations: BTreeMap<&'static str, bool>,
    idle_violations: BTreeMap<&'static str, bool>,
    failures: Vec<String>,
    hygiene: Hygiene,
}

fn heatmap_cmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let (model, config) = ctx.model()?;
    let prep = ctx.cfg.experiment.prep;
    let snap = ctx.snapshot_for(config.as_ref(), prep == PrepKind::Equilibrium)?;
    let s = ctx.cfg.physics.s;
    let mut doc: BTreeMap<&'static str, BTreeMap<String, SupercellJson>> = BTreeMap::new();
    let mut rows = Vec::new();
    for &gate in &ctx.cfg.experiment.gates {
        let map = heatmap(&model, gate, s, prep, snap.as_ref(), OMEGA_Q)?;
        for failure in map.failures() {
            log::warn!("{gate} cell ({}, {}) failed: {}", failure.row, failure.col, failure.error.as_deref().unwrap_or(""));
        }
        for c in &map.cells {
            for d in 1..=5 {
                rows.push(HeatmapRow { gate, prep, amplitude: c.amplitude, delta_t: c.delta_t / PI, d, fidelity: c.fidelity[d] });
            }
        }
        let cell = SupercellJson {
            prep,
            amplitudes: HEATMAP_AMPLITUDES.iter().map(|a| if a.is_infinite() { "inf".into() } else { format!("{a}") }).collect(),
            delta_t: HEATMAP_DELTA_T.to_vec(),
            d1: map.supercell(1),
            d2: map.supercell(2),
            d3: map.supercell(3),
            d4: map.supercell(4),
            d5: map.supercell(5),
            amplitude_violations: [("d1", map.amplitude_violations[0]), ("d3", map.amplitude_violations[1]), ("d5", map.amplitude_violations[2])].into(),
            idle_violations: [("d2", map.idle_violations[0]), ("d4", map.idle_violations[1])].into(),
            failures: map.failures().map(|c| format!("({}, {}): {}", c.row, c.col, c.error.as_deref().unwrap_or(""))).collect(),
            hygiene: map.hygiene(),
        };
        doc.entry(gate.name()).or_default().insert(format!("{s}"), cell);
    }
    ctx.out.table("heatmap_cells", &rows)?;
    ctx.out.json("heatmap", &doc)
}

#[derive(Serialize)]
struct ProjectionRow {
    t: f64,
    sigma_z_exact: f64,
    sigma_z_projected: f64,
    deviation: f64,
}

#[derive(Serialize)]
struct PhaseDeviation {
    from: f64,
    to: f64,
    max_deviation: f64,
}

#[derive(Serialize)]
struct RiseAfterProjection {
    t: f64,
    window: f64,
    rise: f64,
}

#[derive(Serialize)]
struct ProjectionSummary {
    scheme: ProjectionScheme,
    projections: Vec<f64>,
    checkpoints: Vec<f64>,
    phases: Vec<PhaseDeviation>,
    rises: Vec<RiseAfterProjection>,
    hygiene: Hygiene,
}

fn project(ctx: &mut Ctx) -> Result<(), CliError> {
    let (config, _) = ctx.heom_config()?;
    let snap = ctx.load_snapshot(&config)?;
    let program = ctx.program()?;
    let r = projection_experiment(&Model::Heom(config), &program, &snap, ctx.cfg.experiment.scheme, OMEGA_Q)?;
    // Stored as ⟨σ_z⟩ like every other table.
    let rows: Vec<ProjectionRow> = r
        .points
        .iter()
        .map(|p| ProjectionRow { t: p.t, sigma_z_exact: 2.0 * p.exact, sigma_z_projected: 2.0 * p.projected, deviation: 2.0 * p.deviation })
        .collect();
    ctx.out.table("projection", &rows)?;
    let summary = ProjectionSummary {
        scheme: r.scheme,
        projections: r.projections.clone(),
        checkpoints: r.checkpoints.clone(),
        phases: r.checkpoints.windows(2).map(|w| PhaseDeviation { from: w[0], to: w[1], max_deviation: 2.0 * r.max_deviation(w[0], w[1]) }).collect(),
        rises: r
            .projections
            .iter()
            .map(|&t| RiseAfterProjection { t, window: PROJECTION_RISE_WINDOW, rise: 2.0 * r.rise_after(t, PROJECTION_RISE_WINDOW) })
            .collect(),
        hygiene: r.hygiene,
    };
    ctx.out.json("report", &summary)
}

#[derive(Serialize)]
struct PeriodicityRow {
    delta_t: f64,
    tau: f64,
    sigma_z: f64,
}

#[derive(Serialize)]
struct PairJson {
    delta_t_a: f64,
    delta_t_b: f64,
    window: f64,
    max_difference: f64,
    offset: f64,
    shape_difference: f64,
}

#[derive(Serialize)]
struct PeriodicitySummary {
    variant: PeriodicityVariant,
    pairs: Vec<PairJson>,
    hygiene: Hygiene,
}

fn periodicity(ctx: &mut Ctx) -> Result<(), CliError> {
    let (model, config) = ctx.model()?;
    let variant = ctx.cfg.experiment.variant;
    let snap = ctx.snapshot_for(config.as_ref(), variant == PeriodicityVariant::ReducedFromEquilibrium)?;
    let delta_ts: Vec<f64> = ctx.cfg.experiment.delta_ts.iter().map(|d| d * PI).collect();
    let r = periodicity_experiment(&model, variant, &delta_ts, snap.as_ref(), ctx.cfg.experiment.window, OMEGA_Q)?;
    let rows: Vec<PeriodicityRow> = r
        .traces
        .iter()
        .flat_map(|tr| tr.tau.iter().zip(&tr.sigma_z).map(move |(&tau, &z)| PeriodicityRow { delta_t: tr.delta_t / PI, tau, sigma_z: z }))
        .collect();
    ctx.out.table("post_pulse", &rows)?;
    let summary = PeriodicitySummary {
        variant,
        pairs: r
            .pairs
            .iter()
            .map(|p| PairJson {
                delta_t_a: p.delta_t_a / PI,
                delta_t_b: p.delta_t_b / PI,
                window: p.window,
                max_difference: p.max_difference,
                offset: p.offset,
                shape_difference: p.shape_difference,
            })
            .collect(),
        hygiene: r.hygiene,
    };
    ctx.out.json("report", &summary)
}

#[derive(Serialize)]
struct SignalRow {
    t: f64,
    sigma_x_lab: f64,
}

#[derive(Serialize)]
struct SpectrumRow {
    omega: f64,
    amplitude: f64,
}

#[derive(Serialize)]
struct RamseySummary {
    peak: f64,
    t_end: f64,
    grid: FrequencyGrid,
    hygiene: Hygiene,
}

fn ramsey_cmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let (model, _) = ctx.model()?;
    let grid = FrequencyGrid::around(OMEGA_Q);
    let t_end = ctx.cfg.experiment.ramsey_t_end;
    let r = ramsey(&model, t_end, &grid, OMEGA_Q)?;
    let signal: Vec<SignalRow> = r.times.iter().zip(&r.sigma_x).map(|(&t, &x)| SignalRow { t, sigma_x_lab: x }).collect();
    let spectrum: Vec<SpectrumRow> = r.omegas.iter().zip(&r.spectrum).map(|(&omega, &amplitude)| SpectrumRow { omega, amplitude }).collect();
    ctx.out.table("signal", &signal)?;
    ctx.out.table("spectrum", &spectrum)?;
    ctx.out.json("report", &RamseySummary { peak: r.peak, t_end, grid, hygiene: r.hygiene })
}

#[derive(Serialize)]
struct DecoherenceRow {
    t: f64,
    sigma_z_heom: f64,
    sigma_z_analytic: f64,
}

#[derive(Serialize)]
struct DecoherenceSummary {
    t_max: f64,
    max_deviation: f64,
    hygiene: Hygiene,
}

fn decoherence(ctx: &mut Ctx) -> Result<(), CliError> {
    let (config, _) = ctx.heom_config()?;
    let e = &ctx.cfg.experiment;
    let r = universal_decoherence_check(&config, &ctx.cfg.physics, e.decoherence_t_max, e.decoherence_step)?;
    let rows: Vec<DecoherenceRow> =
        r.points.iter().map(|p| DecoherenceRow { t: p.t, sigma_z_heom: p.heom, sigma_z_analytic: p.analytic }).collect();
    ctx.out.table("decoherence", &rows)?;
    let summary = DecoherenceSummary { t_max: e.decoherence_t_max, max_deviation: r.max_deviation, hygiene: r.hygiene };
    ctx.out.json("report", &summary)
}

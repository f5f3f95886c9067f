//! Command-line front end. Every command writes one CSV (or one per polarizer
//! angle) plus a `<out>.json` sidecar echoing the full configuration.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{
    self, BathPreparation, MomentumWalkConfig, PbsComparisonParams, PbsSemiclassicalInput, PurityVerifierConfig,
    UnitaryFamily, ALP_SWEEP_PARAMETER, BOLTZMANN_SI, ELECTRON_REST_ENERGY_SI, ELECTRON_VOLT_SI,
};
use crate::collision::{run_ensemble, run_trajectory, EnsembleConfig, SinglePhotonState, ThermalAngleSampler,
    OBSERVABLE_COLUMNS};
use crate::eraser::{self, EraserConfig};
use crate::heisenberg::commutator_sweep;
use crate::rng::derive_key;

#[derive(Debug, Parser)]
#[command(name = "noisy-polarizer", version, about = "Thermodynamic bounds and collision-model simulations of noisy polarizers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// 64-bit seed for every random stream of the run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; output does not depend on this.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    /// Output CSV path. The sidecar is written to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-bit cost of the classical and quantum ALP bounds against k_BT/ħω (ħω = 1).
    FigBoundsAlp(AlpArgs),
    /// Semiclassical PBS heat bound (J) and purity bound against m/m_e.
    FigBoundsPbs(PbsArgs),
    /// One collision-model trajectory of the absorbing polarizer.
    Collide(CollideArgs),
    /// Ensemble of trajectories over a list of temperatures.
    Ensemble(EnsembleArgs),
    /// Quantum-eraser sweeps.
    #[command(subcommand)]
    Eraser(EraserCommand),
    /// Modified commutator of the ensemble-averaged PBS against temperature.
    Heisenberg(HeisenbergArgs),
    /// Samples conserving unitaries and checks the quantum PBS purity bound.
    VerifyPurity(PurityArgs),
    /// Semiclassical PBS momentum random walk against its closed form.
    MomentumWalk(WalkArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct AlpArgs {
    /// Lowest k_BT/ħω of the log grid.
    #[arg(long, default_value_t = 0.1)]
    pub lo: f64,
    /// Highest k_BT/ħω of the log grid.
    #[arg(long, default_value_t = 100.0)]
    pub hi: f64,
    #[arg(long, default_value_t = 61)]
    pub points: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct PbsArgs {
    /// Photon energy ħω in eV.
    #[arg(long)]
    pub photon_energy_ev: Option<f64>,
    /// Bath temperature in kelvin.
    #[arg(long)]
    pub temperature_k: Option<f64>,
    /// Gate error ε (Hilbert-Schmidt distance).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Entropy decrease −Δs of the photon in nats.
    #[arg(long)]
    pub minus_ds: Option<f64>,
    /// Fill unset parameters with 1 eV, 300 K, ε = 0, −Δs = ln 2.
    #[arg(long)]
    pub use_defaults: bool,
    /// Lowest m/m_e of the log grid.
    #[arg(long, default_value_t = 1.0)]
    pub lo: f64,
    /// Highest m/m_e of the log grid.
    #[arg(long, default_value_t = 1e4)]
    pub hi: f64,
    #[arg(long, default_value_t = 81)]
    pub points: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct CollideArgs {
    /// Number of layers N.
    #[arg(long, default_value_t = 10_000)]
    pub layers: usize,
    /// Amplitude transmission t of one layer.
    #[arg(long, default_value_t = 0.9)]
    pub t: f64,
    /// Temperature ratio k_BT/κ of the angle fluctuations.
    #[arg(long, default_value_t = 0.0)]
    pub temp_ratio: f64,
    /// Mean polarizer angle in radians; 0 transmits h.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub mean_angle: f64,
    /// Realization index, i.e. which angle stream of the seed is used.
    #[arg(long, default_value_t = 0)]
    pub realization: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct EnsembleArgs {
    #[arg(long, default_value_t = 10_000)]
    pub layers: usize,
    /// Amplitude transmission t of one layer.
    #[arg(long, default_value_t = 0.9)]
    pub t: f64,
    /// Comma-separated k_BT/κ values.
    #[arg(long, value_delimiter = ',', default_value = "0.0025,0.01,0.04,0.09")]
    pub temp_ratios: Vec<f64>,
    /// Mean polarizer angle in radians.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub mean_angle: f64,
    #[arg(long, default_value_t = 100)]
    pub realizations: usize,
    /// Optional path for the per-trajectory energy/entropy point cloud.
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    /// Keep every k-th layer in the point cloud.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub cloud_stride: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EraserOptics {
    /// Place the which-path quarter-wave plates in the idler arms.
    #[arg(long)]
    pub marked: bool,
    /// Amplitude transmission t of one polarizer layer.
    #[arg(long, default_value_t = 0.9)]
    pub t: f64,
    #[arg(long, default_value_t = eraser::DEFAULT_LAYERS)]
    pub layers: usize,
}

#[derive(Debug, Subcommand)]
pub enum EraserCommand {
    /// Exit probabilities over a uniform φ grid, one realization of angles.
    Phase(EraserPhaseArgs),
    /// Ensemble-mean conditioned probabilities at fixed φ against temperature.
    Temperature(EraserTemperatureArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct EraserPhaseArgs {
    #[command(flatten)]
    pub optics: EraserOptics,
    /// Send the signal photon through the polarizer.
    #[arg(long)]
    pub measure: bool,
    /// Comma-separated mean polarizer angles in radians. With more than one,
    /// each gets its own file `<stem>_theta<k>.<ext>`.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', default_value = "0")]
    pub polarizer_angles: Vec<f64>,
    /// Temperature ratio k_BT/κ of the polarizer.
    #[arg(long, default_value_t = 0.0)]
    pub temp_ratio: f64,
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct EraserTemperatureArgs {
    #[command(flatten)]
    pub optics: EraserOptics,
    /// Mean polarizer angle in radians.
    #[arg(long, allow_negative_numbers = true, default_value_t = FRAC_PI_4)]
    pub polarizer_angle: f64,
    /// Comma-separated k_BT/κ values.
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2,0.4,1,4,16")]
    pub temp_ratios: Vec<f64>,
    /// Interferometer phase φ in radians.
    #[arg(long, allow_negative_numbers = true, default_value_t = FRAC_PI_2)]
    pub phi: f64,
    #[arg(long, default_value_t = 1000)]
    pub realizations: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct HeisenbergArgs {
    /// Amplitude transmission t of the beamsplitter.
    #[arg(long, default_value_t = 0.9)]
    pub t: f64,
    /// Comma-separated k_BT/κ values; defaults to 0..2 in steps of 0.05.
    #[arg(long, value_delimiter = ',')]
    pub temp_ratios: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BathArg {
    Ground,
    Excited,
    RandomPure,
    RandomMixed,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Haar,
    NearTransfer,
}

#[derive(Debug, Args, Serialize)]
pub struct PurityArgs {
    /// Number of bath qubits (1 to 3).
    #[arg(long, default_value_t = 1)]
    pub bath_qubits: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = BathArg::RandomPure)]
    pub bath: BathArg,
    #[arg(long, value_enum, default_value_t = FamilyArg::Haar)]
    pub family: FamilyArg,
    /// Perturbation strength of the near-transfer family.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct WalkArgs {
    /// Photon energy ħω in eV. The default puts ħω/mc² near 0.01, where the
    /// entropy growth over 10⁴ photons is of order one.
    #[arg(long, default_value_t = 5110.0)]
    pub photon_energy_ev: f64,
    /// Beamsplitter mass in units of m_e.
    #[arg(long, default_value_t = 1.0)]
    pub mass_over_me: f64,
    /// Temperature in kelvin.
    #[arg(long, default_value_t = 300.0)]
    pub temperature_k: f64,
    /// Kick per reflected photon in J (c = 1); defaults to 2ħω√(k_BT/mc²).
    #[arg(long)]
    pub delta_p: Option<f64>,
    /// Comma-separated photon counts, ascending.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000")]
    pub checkpoints: Vec<u64>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 50)]
    pub batches: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

/// What goes into the JSON sidecar.
#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub workers: u64,
    pub out: PathBuf,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Value>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Library(crate::Error),
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Library(e) => e.kind(),
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Io(m) => m.clone(),
            CliError::Library(e) => e.to_string(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Library(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Shortest round-trip decimal, switching to exponent form for very small or
/// very large magnitudes so columns stay readable.
fn fmt(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        (x + 0.0).to_string()
    } else {
        format!("{x:e}")
    }
}

struct Table {
    writer: csv::Writer<File>,
}

impl Table {
    fn create(path: &Path, header: &[&str]) -> CliResult<Self> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> CliResult<()> {
        self.writer.write_record(fields.into_iter().collect::<Vec<_>>())?;
        Ok(())
    }

    fn finish(mut self) -> CliResult<()> {
        self.writer.flush()?;
        Ok(())
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_sidecar(
    command: &str,
    common: &Common,
    out: &Path,
    config: &impl Serialize,
    summary: Option<Value>,
) -> CliResult<()> {
    let run = RunConfig {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION"),
        seed: common.seed,
        workers: common.workers,
        out: out.to_path_buf(),
        config: serde_json::to_value(config).map_err(|e| CliError::Io(e.to_string()))?,
        summary,
    };
    let mut f = File::create(sidecar_path(out))?;
    serde_json::to_writer_pretty(&mut f, &run).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(f)?;
    Ok(())
}

fn workers(common: &Common) -> usize {
    common.workers as usize
}

fn cmd_fig_bounds_alp(args: &AlpArgs) -> CliResult<()> {
    let grid = bounds::log_grid(args.lo, args.hi, args.points)?;
    let rows = bounds::alp_bounds_sweep(&grid)?;
    let out = &args.common.out;
    let mut table = Table::create(out, &["parameter", "value", "bound_classical", "bound_quantum"])?;
    for r in rows {
        table.row([
            ALP_SWEEP_PARAMETER.to_string(),
            fmt(r.value),
            fmt(r.bound_classical),
            fmt(r.bound_quantum),
        ])?;
    }
    table.finish()?;
    write_sidecar("fig-bounds-alp", &args.common, out, args, None)
}

fn pbs_params(args: &PbsArgs) -> CliResult<PbsComparisonParams> {
    let d = PbsComparisonParams::documented_defaults();
    let pick = |v: Option<f64>, default: f64, name: &str| match (v, args.use_defaults) {
        (Some(x), _) => Ok(x),
        (None, true) => Ok(default),
        (None, false) => Err(CliError::Usage(format!(
            "--{name} is required (or pass --use-defaults to accept the documented value {default})"
        ))),
    };
    Ok(PbsComparisonParams {
        photon_energy_ev: pick(args.photon_energy_ev, d.photon_energy_ev, "photon-energy-ev")?,
        temperature_kelvin: pick(args.temperature_k, d.temperature_kelvin, "temperature-k")?,
        epsilon: pick(args.epsilon, d.epsilon, "epsilon")?,
        minus_ds: pick(args.minus_ds, d.minus_ds, "minus-ds")?,
    })
}

fn cmd_fig_bounds_pbs(args: &PbsArgs) -> CliResult<()> {
    let params = pbs_params(args)?;
    let grid = bounds::log_grid(args.lo, args.hi, args.points)?;
    let rows = bounds::pbs_bounds_sweep(&params, &grid)?;
    let out = &args.common.out;
    let mut table = Table::create(out, &["m_over_me", "bound_semiclassical", "bound_purity"])?;
    for r in &rows {
        table.row([fmt(r.m_over_me), fmt(r.bound_semiclassical), fmt(r.bound_purity)])?;
    }
    table.finish()?;
    let crossings: Vec<f64> = bounds::crossovers(&rows).iter().map(|&k| rows[k].m_over_me).collect();
    write_sidecar(
        "fig-bounds-pbs",
        &args.common,
        out,
        &json!({ "args": args, "resolved": params }),
        Some(json!({ "crossover_after_m_over_me": crossings })),
    )
}

fn trajectory_header() -> Vec<&'static str> {
    let mut h = vec!["layer"];
    h.extend(OBSERVABLE_COLUMNS);
    h
}

fn cmd_collide(args: &CollideArgs) -> CliResult<()> {
    let key = derive_key(args.common.seed, 0);
    let mut sampler = ThermalAngleSampler::new(args.mean_angle, args.temp_ratio, key, args.realization)?;
    let record = run_trajectory(&SinglePhotonState::uniform_superposition(), args.layers, args.t, &mut sampler)?;
    let out = &args.common.out;
    let mut table = Table::create(out, &trajectory_header())?;
    for (n, obs) in record.layers.iter().enumerate() {
        table.row(std::iter::once(n.to_string()).chain(obs.to_array().map(fmt)))?;
    }
    table.finish()?;
    write_sidecar("collide", &args.common, out, args, None)
}

fn cmd_ensemble(args: &EnsembleArgs) -> CliResult<()> {
    let out = &args.common.out;
    let mut header = vec!["temperature_ratio".to_string(), "layer".to_string()];
    header.extend(OBSERVABLE_COLUMNS.iter().map(|c| format!("mean_{c}")));
    header.extend(OBSERVABLE_COLUMNS.iter().map(|c| format!("se_{c}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::create(out, &header)?;
    let mut cloud = match &args.cloud {
        Some(p) => Some(Table::create(p, &["temperature_ratio", "realization", "layer", "entropy_shannon", "energy"])?),
        None => None,
    };
    for (g, &ratio) in args.temp_ratios.iter().enumerate() {
        let cfg = EnsembleConfig {
            rho0: SinglePhotonState::uniform_superposition(),
            layers: args.layers,
            t: args.t,
            temperature_ratio: ratio,
            mean_angle: args.mean_angle,
            realizations: args.realizations,
            seed: derive_key(args.common.seed, g as u64),
            workers: workers(&args.common),
        };
        let result = run_ensemble(&cfg)?;
        let s = &result.summary;
        for (n, (m, e)) in s.mean.iter().zip(&s.std_err).enumerate() {
            let fields = [fmt(ratio), n.to_string()]
                .into_iter()
                .chain(m.to_array().map(fmt))
                .chain(e.to_array().map(fmt));
            table.row(fields)?;
        }
        if let Some(cloud) = cloud.as_mut() {
            for (k, traj) in result.trajectories.iter().enumerate() {
                for (n, obs) in traj.layers.iter().enumerate().step_by(args.cloud_stride as usize) {
                    cloud.row([fmt(ratio), k.to_string(), n.to_string(), fmt(obs.entropy_shannon), fmt(obs.energy)])?;
                }
            }
        }
    }
    table.finish()?;
    write_sidecar("ensemble", &args.common, out, args, None)?;
    if let (Some(cloud), Some(path)) = (cloud, &args.cloud) {
        cloud.finish()?;
        write_sidecar("ensemble", &args.common, path, args, None)?;
    }
    Ok(())
}

/// `<stem>_theta<k>.<ext>` next to `out`.
fn indexed_path(out: &Path, k: usize) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_theta{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}_theta{k}"),
    };
    out.with_file_name(name)
}

fn cmd_eraser_phase(args: &EraserPhaseArgs) -> CliResult<()> {
    if args.polarizer_angles.is_empty() {
        return Err(CliError::Usage("--polarizer-angles needs at least one value".into()));
    }
    let phis = eraser::uniform_phase_grid(args.points);
    for (k, &angle) in args.polarizer_angles.iter().enumerate() {
        let cfg = EraserConfig {
            marked: args.optics.marked,
            polarizer_angle: angle,
            measure: args.measure,
            temperature_ratio: args.temp_ratio,
            layers: args.optics.layers,
            t: args.optics.t,
            seed: args.common.seed,
        };
        let rows = eraser::phase_sweep(&cfg, &phis, workers(&args.common))?;
        let out = if args.polarizer_angles.len() == 1 {
            args.common.out.clone()
        } else {
            indexed_path(&args.common.out, k)
        };
        let mut table = Table::create(&out, &["phi", "p_port1", "p_port2", "p_port1_cond", "p_port2_cond"])?;
        for r in &rows {
            let p = r.probs;
            table.row([fmt(r.phi), fmt(p.p_port1), fmt(p.p_port2), fmt(p.p_port1_cond), fmt(p.p_port2_cond)])?;
        }
        table.finish()?;
        let v_cond = eraser::visibility(&rows.iter().map(|r| r.probs.p_port1_cond).collect::<Vec<_>>());
        let v = eraser::visibility(&rows.iter().map(|r| r.probs.p_port1).collect::<Vec<_>>());
        write_sidecar(
            "eraser phase",
            &args.common,
            &out,
            &json!({ "args": args, "polarizer_angle": angle }),
            Some(json!({ "visibility_port1": v, "visibility_port1_cond": v_cond })),
        )?;
    }
    Ok(())
}

fn cmd_eraser_temperature(args: &EraserTemperatureArgs) -> CliResult<()> {
    let cfg = EraserConfig {
        marked: args.optics.marked,
        polarizer_angle: args.polarizer_angle,
        measure: true,
        temperature_ratio: 0.0,
        layers: args.optics.layers,
        t: args.optics.t,
        seed: args.common.seed,
    };
    let rows = eraser::temperature_sweep(&cfg, &args.temp_ratios, args.phi, args.realizations, workers(&args.common))?;
    let out = &args.common.out;
    let mut table = Table::create(out, &["temperature_ratio", "mean_p1_cond", "se_p1", "mean_p2_cond", "se_p2"])?;
    for r in &rows {
        table.row([
            fmt(r.temperature_ratio),
            fmt(r.mean_p1_cond),
            fmt(r.se_p1),
            fmt(r.mean_p2_cond),
            fmt(r.se_p2),
        ])?;
    }
    table.finish()?;
    let violations = eraser::trend_violations(&rows, 3.0);
    write_sidecar(
        "eraser temperature",
        &args.common,
        out,
        args,
        Some(json!({ "trend_violations_3se": violations })),
    )
}

fn cmd_heisenberg(args: &HeisenbergArgs) -> CliResult<()> {
    let ratios = args
        .temp_ratios
        .clone()
        .unwrap_or_else(|| (0..=40).map(|k| k as f64 * 0.05).collect());
    let rows = commutator_sweep(args.t, &ratios)?;
    let out = &args.common.out;
    let mut table = Table::create(out, &["temperature_ratio", "chi", "commutator"])?;
    for r in rows {
        table.row([fmt(r.temperature_ratio), fmt(r.chi), fmt(r.commutator)])?;
    }
    table.finish()?;
    write_sidecar("heisenberg", &args.common, out, &json!({ "args": args, "temp_ratios": ratios }), None)
}

fn cmd_verify_purity(args: &PurityArgs) -> CliResult<()> {
    let cfg = PurityVerifierConfig {
        bath_qubits: args.bath_qubits,
        trials: args.trials,
        seed: args.common.seed,
        bath: match args.bath {
            BathArg::Ground => BathPreparation::Ground,
            BathArg::Excited => BathPreparation::Excited,
            BathArg::RandomPure => BathPreparation::RandomPure,
            BathArg::RandomMixed => BathPreparation::RandomMixed,
        },
        family: match args.family {
            FamilyArg::Haar => UnitaryFamily::HaarConserving,
            FamilyArg::NearTransfer => UnitaryFamily::NearTransfer { delta: args.delta },
        },
        workers: workers(&args.common),
    };
    let report = bounds::verify_purity_bound_small_bath(&cfg)?;
    let out = &args.common.out;
    let mut table = Table::create(
        out,
        &[
            "trial",
            "epsilon",
            "purity_before",
            "purity_after",
            "purity_loss",
            "bound",
            "satisfied",
            "assumption_held",
        ],
    )?;
    for (k, t) in report.trials.iter().enumerate() {
        table.row([
            k.to_string(),
            fmt(t.epsilon),
            fmt(t.purity_before),
            fmt(t.purity_after),
            fmt(t.purity_loss),
            fmt(t.bound),
            t.satisfied.to_string(),
            t.assumption_held.to_string(),
        ])?;
    }
    table.finish()?;
    let summary = json!({
        "trials": report.trials.len(),
        "satisfied": report.satisfied,
        "assumption_held": report.assumption_held,
        "violations_with_assumption": report.violations_with_assumption,
        "violations_without_assumption": report.violations_without_assumption,
    });
    write_sidecar("verify-purity", &args.common, out, args, Some(summary))
}

fn cmd_momentum_walk(args: &WalkArgs) -> CliResult<()> {
    let input = PbsSemiclassicalInput {
        hbar_omega: args.photon_energy_ev * ELECTRON_VOLT_SI,
        mass_energy: args.mass_over_me * ELECTRON_REST_ENERGY_SI,
        temperature: BOLTZMANN_SI * args.temperature_k,
        minus_ds: std::f64::consts::LN_2,
    };
    let delta_p = match args.delta_p {
        Some(d) => d,
        None => bounds::minimal_momentum_kick(&input)?,
    };
    let cfg = MomentumWalkConfig {
        checkpoints: args.checkpoints.clone(),
        input,
        delta_p,
        samples: args.samples,
        seed: args.common.seed,
        workers: workers(&args.common),
        batches: args.batches,
    };
    let points = bounds::simulate_pbs_momentum_walk(&cfg)?;
    let out = &args.common.out;
    let mut table = Table::create(
        out,
        &[
            "photons",
            "entropy_change",
            "entropy_std_err",
            "closed_form",
            "kick_variance",
            "kick_variance_std_err",
            "kick_variance_expected",
        ],
    )?;
    for p in points {
        table.row([
            p.photons.to_string(),
            fmt(p.entropy_change),
            fmt(p.entropy_std_err),
            fmt(p.closed_form),
            fmt(p.kick_variance),
            fmt(p.kick_variance_std_err),
            fmt(p.kick_variance_expected),
        ])?;
    }
    table.finish()?;
    write_sidecar("momentum-walk", &args.common, out, &json!({ "args": args, "delta_p": delta_p }), None)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::FigBoundsAlp(a) => cmd_fig_bounds_alp(a),
        Command::FigBoundsPbs(a) => cmd_fig_bounds_pbs(a),
        Command::Collide(a) => cmd_collide(a),
        Command::Ensemble(a) => cmd_ensemble(a),
        Command::Eraser(EraserCommand::Phase(a)) => cmd_eraser_phase(a),
        Command::Eraser(EraserCommand::Temperature(a)) => cmd_eraser_temperature(a),
        Command::Heisenberg(a) => cmd_heisenberg(a),
        Command::VerifyPurity(a) => cmd_verify_purity(a),
        Command::MomentumWalk(a) => cmd_momentum_walk(a),
    }
}

fn report(err: &CliError) -> ExitCode {
    eprintln!("{}", json!({ "error": err.kind(), "message": err.message() }));
    ExitCode::from(err.exit_code())
}

/// Parses `std::env::args`, runs the command, and maps failures to a JSON
/// line on stderr.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let message = e.render().to_string();
            return report(&CliError::Usage(message.trim().to_string()));
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

//! Dissipation bounds for absorbing polarizers and polarizing beamsplitters.
//!
//! Every evaluator takes the erasure as a non-negative number
//! `erasure = −Δs` (nats). Energies are in whatever unit the caller uses for
//! k_BT, ħω and mc²; the sweeps use ħω = 1 (ALP) and SI joules (PBS).

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    kron, partial_trace_matrix, random_density_matrix, random_state_vector, random_unitary, CMatrix,
    DensityMatrix, Subsystem,
};
use crate::parallel::map_indexed;
use crate::rng::{derive_key, NormalStream};

/// Boltzmann constant, J/K.
pub const BOLTZMANN_SI: f64 = 1.380_649e-23;
/// Electron-volt, J.
pub const ELECTRON_VOLT_SI: f64 = 1.602_176_634e-19;
/// Electron rest energy m_e c², J.
pub const ELECTRON_REST_ENERGY_SI: f64 = 8.187_105_776_9e-14;

fn non_negative(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{name} = {x} must be finite and non-negative")))
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{name} = {x} must be finite and positive")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlpClassicalInput {
    pub erasure: f64,
    /// k_B T_P of the polarizer.
    pub temperature_p: f64,
}

/// k_B T_P (e^{erasure} − 1).
pub fn alp_classical_heat_bound(input: &AlpClassicalInput) -> Result<f64> {
    non_negative("erasure", input.erasure)?;
    positive("temperature", input.temperature_p)?;
    Ok(input.temperature_p * input.erasure.exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlpQuantumInput {
    pub erasure: f64,
    /// k_B T; zero is the vacuum limit.
    pub temperature: f64,
    pub hbar_omega: f64,
}

/// (ħω/2) coth(ħω / 2k_BT), the mean energy of a thermal mode including
/// the zero-point term; ħω/2 at T = 0.
pub fn thermal_mode_energy(hbar_omega: f64, temperature: f64) -> Result<f64> {
    positive("hbar_omega", hbar_omega)?;
    non_negative("temperature", temperature)?;
    if temperature == 0.0 {
        return Ok(hbar_omega / 2.0);
    }
    let x = hbar_omega / (2.0 * temperature);
    // coth x = 1 + 2/(e^{2x} − 1), stable for small and large x
    let coth = 1.0 + 2.0 / (2.0 * x).exp_m1();
    Ok(hbar_omega / 2.0 * coth)
}

/// (ħω/2) coth(ħω/2k_BT) (e^{erasure} − 1).
pub fn alp_quantum_heat_bound(input: &AlpQuantumInput) -> Result<f64> {
    non_negative("erasure", input.erasure)?;
    Ok(thermal_mode_energy(input.hbar_omega, input.temperature)? * input.erasure.exp_m1())
}

/// Differential cost dQ/(−ds) at zero erasure, per bit.
pub fn alp_classical_cost_per_bit(temperature_p: f64) -> Result<f64> {
    positive("temperature", temperature_p)?;
    Ok(temperature_p * std::f64::consts::LN_2)
}

/// Differential cost dQ/(−ds_W) at zero erasure, per bit. This is the
/// derivative of the finite bound, so it keeps the ħω/2 prefactor.
pub fn alp_quantum_cost_per_bit(hbar_omega: f64, temperature: f64) -> Result<f64> {
    Ok(thermal_mode_energy(hbar_omega, temperature)? * std::f64::consts::LN_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PbsSemiclassicalInput {
    pub hbar_omega: f64,
    /// mc² of the beamsplitter.
    pub mass_energy: f64,
    pub temperature: f64,
    pub minus_ds: f64,
}

/// Ratio ħω/mc² above which the semiclassical bound is flagged.
pub const SEMICLASSICAL_VALIDITY_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemiclassicalBound {
    pub heat: f64,
    /// False when ħω/mc² exceeds the validity ratio.
    pub valid: bool,
}

/// (ħω/mc²)² k_BT (−ds) / 2.
pub fn pbs_semiclassical_heat_bound(input: &PbsSemiclassicalInput) -> Result<SemiclassicalBound> {
    non_negative("hbar_omega", input.hbar_omega)?;
    positive("mass_energy", input.mass_energy)?;
    non_negative("temperature", input.temperature)?;
    non_negative("minus_ds", input.minus_ds)?;
    let ratio = input.hbar_omega / input.mass_energy;
    Ok(SemiclassicalBound {
        heat: 0.5 * ratio * ratio * input.temperature * input.minus_ds,
        valid: ratio <= SEMICLASSICAL_VALIDITY_RATIO,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PbsQuantumInput {
    pub bath_qubits: usize,
    pub epsilon: f64,
}

/// (1 − 2√2ε)² / (N 2^N) for ε below 1/(2√2), zero otherwise.
pub fn pbs_quantum_purity_bound(input: &PbsQuantumInput) -> Result<f64> {
    if input.bath_qubits == 0 {
        return Err(Error::OutOfRange("bath must contain at least one qubit".into()));
    }
    let n = input.bath_qubits;
    if n > 1000 {
        return purity_bound_continuous(n as f64, input.epsilon);
    }
    non_negative("epsilon", input.epsilon)?;
    let margin = 1.0 - 2.0 * std::f64::consts::SQRT_2 * input.epsilon;
    if margin <= 0.0 {
        return Ok(0.0);
    }
    Ok(margin * margin / (n as f64 * 2f64.powi(n as i32)))
}

/// The purity bound with the bath size as a real number, used when the bath
/// size is a mass ratio. Evaluated in the log domain so large baths
/// underflow cleanly to zero.
pub fn purity_bound_continuous(bath_size: f64, epsilon: f64) -> Result<f64> {
    positive("bath size", bath_size)?;
    non_negative("epsilon", epsilon)?;
    let margin = 1.0 - 2.0 * std::f64::consts::SQRT_2 * epsilon;
    if margin <= 0.0 {
        return Ok(0.0);
    }
    let ln = 2.0 * margin.ln() - bath_size.ln() - bath_size * std::f64::consts::LN_2;
    Ok(ln.exp())
}

/// ½ ln((2πe)^D |Σ|); −∞ for a singular covariance.
pub fn gaussian_entropy_upper_bound(covariance: &DMatrix<f64>) -> Result<f64> {
    let d = covariance.nrows();
    if d == 0 || covariance.ncols() != d {
        return Err(Error::DimensionMismatch("covariance must be square and non-empty".into()));
    }
    if covariance.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let asym = (covariance - covariance.transpose()).abs().max();
    let scale = covariance.abs().max().max(f64::MIN_POSITIVE);
    if asym > 1e-12 * scale {
        return Err(Error::InvalidState("covariance is not symmetric".into()));
    }
    let eig = covariance.clone().symmetric_eigenvalues();
    let min = eig.min();
    if min < -1e-12 * scale {
        return Err(Error::InvalidState(format!("covariance has eigenvalue {min:e}")));
    }
    if min <= 1e-14 * scale {
        return Ok(f64::NEG_INFINITY);
    }
    let log_det: f64 = eig.iter().map(|x| x.ln()).sum();
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    Ok(0.5 * (d as f64 * two_pi_e.ln() + log_det))
}

/// Minimal momentum kick of the semiclassical PBS, 2ħω √(k_BT/mc²), in
/// energy units (c = 1).
pub fn minimal_momentum_kick(input: &PbsSemiclassicalInput) -> Result<f64> {
    positive("mass_energy", input.mass_energy)?;
    non_negative("temperature", input.temperature)?;
    Ok(2.0 * input.hbar_omega * (input.temperature / input.mass_energy).sqrt())
}

/// ½ ln(1 + δp² N / (4 m k_BT)).
pub fn momentum_walk_entropy_closed_form(photons: u64, delta_p: f64, input: &PbsSemiclassicalInput) -> f64 {
    let var0 = input.mass_energy * input.temperature;
    0.5 * (delta_p * delta_p * photons as f64 / (4.0 * var0)).ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumWalkConfig {
    /// Photon counts at which the ensemble is summarised, ascending.
    pub checkpoints: Vec<u64>,
    pub input: PbsSemiclassicalInput,
    pub delta_p: f64,
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
    /// Number of batches used for batch-means standard errors.
    pub batches: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumWalkPoint {
    pub photons: u64,
    /// ½ ln(var_N / var_0) of the sampled momenta.
    pub entropy_change: f64,
    pub entropy_std_err: f64,
    pub closed_form: f64,
    /// Sample variance of the summed kicks and its expected value δp²N/4.
    pub kick_variance: f64,
    pub kick_variance_std_err: f64,
    pub kick_variance_expected: f64,
}

/// Momentum of the beamsplitter after each checkpoint for one sample: the
/// initial thermal momentum, then one Bernoulli(½) kick of δp per photon.
/// Photons are consumed 64 at a time as the bits of a random u64.
fn walk_sample(cfg: &MomentumWalkConfig, sigma0: f64, index: usize) -> (f64, Vec<u64>) {
    let p0 = sigma0 * NormalStream::at(derive_key(cfg.seed, 0), index as u64, 0).next_normal();
    let mut bits = ChaCha8Rng::seed_from_u64(derive_key(cfg.seed, 1));
    bits.set_stream(index as u64);
    let mut kicks = Vec::with_capacity(cfg.checkpoints.len());
    let mut done = 0u64;
    let mut reflected = 0u64;
    for &target in &cfg.checkpoints {
        while done < target {
            let take = (target - done).min(64);
            let word = bits.next_u64();
            let masked = if take == 64 { word } else { word & ((1u64 << take) - 1) };
            reflected += masked.count_ones() as u64;
            done += take;
        }
        kicks.push(reflected);
    }
    (p0, kicks)
}

fn variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

fn batch_std_err(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    (variance(values.iter().copied()) / b).sqrt()
}

pub fn simulate_pbs_momentum_walk(cfg: &MomentumWalkConfig) -> Result<Vec<MomentumWalkPoint>> {
    if cfg.checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::OutOfRange("checkpoints must be ascending".into()));
    }
    if cfg.samples < 2 * cfg.batches.max(2) {
        return Err(Error::OutOfRange("need at least two samples per batch".into()));
    }
    positive("mass_energy", cfg.input.mass_energy)?;
    positive("temperature", cfg.input.temperature)?;
    non_negative("delta_p", cfg.delta_p)?;
    let sigma0 = (cfg.input.mass_energy * cfg.input.temperature).sqrt();
    let runs = map_indexed(cfg.workers, cfg.samples, |i| walk_sample(cfg, sigma0, i));

    let batches = cfg.batches.max(2);
    let per_batch = cfg.samples / batches;
    let used = per_batch * batches;
    let entropy = |range: std::ops::Range<usize>, c: usize| {
        let v0 = variance(runs[range.clone()].iter().map(|r| r.0));
        let vn = variance(runs[range].iter().map(|r| r.0 + cfg.delta_p * r.1[c] as f64));
        0.5 * (vn / v0).ln()
    };
    let kick_var = |range: std::ops::Range<usize>, c: usize| {
        variance(runs[range].iter().map(|r| cfg.delta_p * r.1[c] as f64))
    };

    Ok(cfg
        .checkpoints
        .iter()
        .enumerate()
        .map(|(c, &photons)| {
            let batch_entropy: Vec<f64> =
                (0..batches).map(|b| entropy(b * per_batch..(b + 1) * per_batch, c)).collect();
            let batch_kicks: Vec<f64> =
                (0..batches).map(|b| kick_var(b * per_batch..(b + 1) * per_batch, c)).collect();
            MomentumWalkPoint {
                photons,
                entropy_change: entropy(0..used, c),
                entropy_std_err: batch_std_err(&batch_entropy),
                closed_form: momentum_walk_entropy_closed_form(photons, cfg.delta_p, &cfg.input),
                kick_variance: kick_var(0..used, c),
                kick_variance_std_err: batch_std_err(&batch_kicks),
                kick_variance_expected: cfg.delta_p * cfg.delta_p * photons as f64 / 4.0,
            }
        })
        .collect())
}

/// How the bath of the purity verifier is prepared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BathPreparation {
    /// Every bath qubit in |0⟩.
    Ground,
    /// Every bath qubit in |1⟩.
    Excited,
    RandomPure,
    RandomMixed,
}

/// Family of sampled system-bath unitaries. All of them conserve the total
/// number of |1⟩ qubits (total Z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitaryFamily {
    /// Independent Haar-random blocks on every excitation-number sector.
    HaarConserving,
    /// The controlled-swap transfer composed with exp(iδH) for a random
    /// conserving Hermitian H of unit operator scale.
    NearTransfer { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PurityTrial {
    pub epsilon: f64,
    pub purity_before: f64,
    pub purity_after: f64,
    pub purity_loss: f64,
    pub bound: f64,
    pub satisfied: bool,
    /// Whether tr(ρ_B^i)² ≤ tr ρ_B² held for both control values.
    pub assumption_held: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurityReport {
    pub bath_qubits: usize,
    pub trials: Vec<PurityTrial>,
    pub satisfied: usize,
    pub assumption_held: usize,
    /// Trials where the intermediate assumption held but the bound failed.
    pub violations_with_assumption: usize,
    pub violations_without_assumption: usize,
}

/// Slack used when comparing purities.
pub const PURITY_TOL: f64 = 1e-12;

/// Qubit `q` (0 = most significant) of basis index `idx` in an `n`-qubit
/// register.
fn bit(idx: usize, q: usize, n: usize) -> usize {
    (idx >> (n - 1 - q)) & 1
}

fn ket_bra(dim: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(k, k)] = crate::numerics::c(1.0);
    m
}

/// Haar-random unitary on `n` qubits that commutes with total Z.
pub fn conserving_haar_unitary<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let dim = 1usize << n;
    let mut u = CMatrix::zeros(dim, dim);
    for k in 0..=n {
        let idx: Vec<usize> = (0..dim).filter(|i| i.count_ones() as usize == k).collect();
        let block = random_unitary(idx.len(), rng);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                u[(i, j)] = block[(a, b)];
            }
        }
    }
    u
}

/// Random Hermitian matrix that commutes with total Z, with entries of
/// order one.
fn conserving_hermitian<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let dim = 1usize << n;
    let g = CMatrix::from_fn(dim, dim, |i, j| {
        if i.count_ones() == j.count_ones() {
            crate::numerics::standard_normal_complex(rng)
        } else {
            crate::numerics::ZERO
        }
    });
    (&g + g.adjoint()).scale(0.5)
}

/// Swaps the target qubit with the first bath qubit when the control is
/// |1⟩. Qubits are ordered (control, target, bath...). Conserves total Z
/// and, with the bath qubit in |1⟩, realises the CNOT on the register
/// exactly.
pub fn controlled_swap_transfer(bath_qubits: usize) -> CMatrix {
    let n = bath_qubits + 2;
    let dim = 1usize << n;
    let mut u = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let row = if bit(col, 0, n) == 1 && bit(col, 1, n) != bit(col, 2, n) {
            col ^ (1 << (n - 2)) ^ (1 << (n - 3))
        } else {
            col
        };
        u[(row, col)] = crate::numerics::c(1.0);
    }
    u
}

/// ½(|00⟩⟨00| + |10⟩⟨10|): control mixed, target |0⟩.
pub fn register_input() -> CMatrix {
    (ket_bra(4, 0b00) + ket_bra(4, 0b10)).scale(0.5)
}

/// CNOT(control = qubit 0) applied to the register input.
pub fn ideal_register_output() -> CMatrix {
    (ket_bra(4, 0b00) + ket_bra(4, 0b11)).scale(0.5)
}

/// Evaluates one system-bath unitary on a given bath state.
pub fn evaluate_purity_trial(u: &CMatrix, rho_b: &DensityMatrix) -> Result<PurityTrial> {
    let db = rho_b.dim();
    if !db.is_power_of_two() || db < 2 || u.nrows() != 4 * db {
        return Err(Error::DimensionMismatch(format!(
            "unitary of dimension {} does not fit a register and a {db}-dimensional bath",
            u.nrows()
        )));
    }
    let n = db.trailing_zeros() as usize;
    let dims = (4, db);
    let purity = |m: &CMatrix| m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let rho_s = register_input();
    let out = u * kron(&rho_s, rho_b.matrix()) * u.adjoint();
    let rho_s_out = partial_trace_matrix(&out, dims, Subsystem::B)?;
    let diff = &rho_s_out - ideal_register_output();
    let epsilon = purity(&diff).sqrt();

    let purity_before = rho_b.purity();
    let mut branch_purities = [0.0; 2];
    let mut rho_b_out = CMatrix::zeros(db, db);
    for (i, basis) in [0b00usize, 0b10].into_iter().enumerate() {
        let joint = u * kron(&ket_bra(4, basis), rho_b.matrix()) * u.adjoint();
        let branch = partial_trace_matrix(&joint, dims, Subsystem::A)?;
        branch_purities[i] = purity(&branch);
        rho_b_out += branch.scale(0.5);
    }
    let purity_after = purity(&rho_b_out);
    let bound = pbs_quantum_purity_bound(&PbsQuantumInput { bath_qubits: n, epsilon })?;
    Ok(PurityTrial {
        epsilon,
        purity_before,
        purity_after,
        purity_loss: purity_before - purity_after,
        bound,
        satisfied: purity_after <= purity_before - bound + PURITY_TOL,
        assumption_held: branch_purities.iter().all(|&p| p <= purity_before + PURITY_TOL),
    })
}

fn prepare_bath<R: rand::Rng + ?Sized>(prep: BathPreparation, n: usize, rng: &mut R) -> Result<DensityMatrix> {
    let dim = 1usize << n;
    Ok(match prep {
        BathPreparation::Ground => DensityMatrix::basis_state(dim, 0),
        BathPreparation::Excited => DensityMatrix::basis_state(dim, dim - 1),
        BathPreparation::RandomPure => DensityMatrix::from_pure(&random_state_vector(dim, rng))?,
        BathPreparation::RandomMixed => random_density_matrix(dim, dim, rng),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurityVerifierConfig {
    pub bath_qubits: usize,
    pub trials: usize,
    pub seed: u64,
    pub bath: BathPreparation,
    pub family: UnitaryFamily,
    pub workers: usize,
}

pub fn verify_purity_bound_small_bath(cfg: &PurityVerifierConfig) -> Result<PurityReport> {
    let n = cfg.bath_qubits;
    if !(1..=3).contains(&n) {
        return Err(Error::OutOfRange(format!("bath size {n} must be 1, 2 or 3")));
    }
    if let UnitaryFamily::NearTransfer { delta } = cfg.family {
        non_negative("delta", delta)?;
    }
    let exact = controlled_swap_transfer(n);
    let results = map_indexed(cfg.workers, cfg.trials, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let rho_b = prepare_bath(cfg.bath, n, &mut rng)?;
        let u = match cfg.family {
            UnitaryFamily::HaarConserving => conserving_haar_unitary(n + 2, &mut rng),
            UnitaryFamily::NearTransfer { delta } => {
                let h = conserving_hermitian(n + 2, &mut rng);
                let gen = h.map(|z| z * crate::numerics::I * delta);
                &exact * crate::numerics::matrix_exp(&gen)
            }
        };
        evaluate_purity_trial(&u, &rho_b)
    });
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    let count = |f: &dyn Fn(&PurityTrial) -> bool| trials.iter().filter(|t| f(t)).count();
    Ok(PurityReport {
        bath_qubits: n,
        satisfied: count(&|t| t.satisfied),
        assumption_held: count(&|t| t.assumption_held),
        violations_with_assumption: count(&|t| t.assumption_held && !t.satisfied),
        violations_without_assumption: count(&|t| !t.assumption_held && !t.satisfied),
        trials,
    })
}

/// Row of the ALP comparison: per-bit differential cost of the classical and quantum
/// ALP bounds at k_BT/ħω = `value`, in ħω = 1 units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlpSweepRow {
    pub value: f64,
    pub bound_classical: f64,
    pub bound_quantum: f64,
}

pub const ALP_SWEEP_PARAMETER: &str = "kT_over_hbar_omega";

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    positive("grid start", lo)?;
    positive("grid end", hi)?;
    if points < 2 || hi <= lo {
        return Err(Error::OutOfRange("a log grid needs hi > lo and at least two points".into()));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == points - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (points - 1) as f64).exp()
            }
        })
        .collect())
}

pub fn alp_bounds_sweep(ratios: &[f64]) -> Result<Vec<AlpSweepRow>> {
    ratios
        .iter()
        .map(|&x| {
            Ok(AlpSweepRow {
                value: x,
                bound_classical: alp_classical_cost_per_bit(x)?,
                bound_quantum: alp_quantum_cost_per_bit(1.0, x)?,
            })
        })
        .collect()
}

/// Physical parameters of the PBS bound comparison, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PbsComparisonParams {
    pub photon_energy_ev: f64,
    pub temperature_kelvin: f64,
    pub epsilon: f64,
    pub minus_ds: f64,
}

impl PbsComparisonParams {
    /// 1 eV photon, 300 K, perfect gate, one bit.
    pub fn documented_defaults() -> Self {
        Self {
            photon_energy_ev: 1.0,
            temperature_kelvin: 300.0,
            epsilon: 0.0,
            minus_ds: std::f64::consts::LN_2,
        }
    }
}

/// Row of the PBS comparison: semiclassical heat bound in joules for a
/// beamsplitter of mass m, and the purity bound for a bath of m/m_e spins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbsSweepRow {
    pub m_over_me: f64,
    pub bound_semiclassical: f64,
    pub bound_purity: f64,
}

pub fn pbs_bounds_sweep(params: &PbsComparisonParams, mass_ratios: &[f64]) -> Result<Vec<PbsSweepRow>> {
    mass_ratios
        .iter()
        .map(|&m| {
            let heat = pbs_semiclassical_heat_bound(&PbsSemiclassicalInput {
                hbar_omega: params.photon_energy_ev * ELECTRON_VOLT_SI,
                mass_energy: m * ELECTRON_REST_ENERGY_SI,
                temperature: BOLTZMANN_SI * params.temperature_kelvin,
                minus_ds: params.minus_ds,
            })?;
            Ok(PbsSweepRow {
                m_over_me: m,
                bound_semiclassical: heat.heat,
                bound_purity: purity_bound_continuous(m, params.epsilon)?,
            })
        })
        .collect()
}

/// Grid indices `k` where the sign of (semiclassical − purity) changes
/// between rows `k` and `k + 1`.
pub fn crossovers(rows: &[PbsSweepRow]) -> Vec<usize> {
    let sign = |r: &PbsSweepRow| (r.bound_semiclassical - r.bound_purity).signum();
    rows.windows(2)
        .enumerate()
        .filter(|(_, w)| sign(&w[0]) != sign(&w[1]))
        .map(|(k, _)| k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, SQRT_2};

    #[test]
    fn classical_alp_examples() {
        let b = |e: f64, t: f64| alp_classical_heat_bound(&AlpClassicalInput { erasure: e, temperature_p: t }).unwrap();
        assert_eq!(b(0.0, 1.0), 0.0);
        assert!((b(LN_2, 1.0) - 1.0).abs() < 1e-15);
        let small = b(0.01, 1.0);
        assert!((small - 0.010_050_167_084_168).abs() < 1e-14);
        assert!(small >= 0.01);
        assert!(alp_classical_heat_bound(&AlpClassicalInput { erasure: -0.1, temperature_p: 1.0 }).is_err());
    }

    #[test]
    fn quantum_alp_examples() {
        let b = |e: f64, t: f64| {
            alp_quantum_heat_bound(&AlpQuantumInput { erasure: e, temperature: t, hbar_omega: 1.0 }).unwrap()
        };
        assert!((b(LN_2, 0.0) - 0.5).abs() < 1e-15);
        let coth_half = 0.5f64.cosh() / 0.5f64.sinh();
        assert!((b(LN_2, 1.0) - coth_half / 2.0).abs() < 1e-14);
        assert!((b(LN_2, 1.0) - 1.08198).abs() < 1e-5);
        for kt in [50.0, 100.0, 1000.0] {
            let classical = alp_classical_heat_bound(&AlpClassicalInput { erasure: LN_2, temperature_p: kt }).unwrap();
            assert!((b(LN_2, kt) - classical).abs() / classical < 0.01);
        }
        assert!((alp_quantum_cost_per_bit(1.0, 1e-3).unwrap() - LN_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn alp_bounds_monotone_in_erasure() {
        let mut prev = (0.0, 0.0);
        for k in 0..50 {
            let e = k as f64 * 0.1;
            let c = alp_classical_heat_bound(&AlpClassicalInput { erasure: e, temperature_p: 0.7 }).unwrap();
            let q = alp_quantum_heat_bound(&AlpQuantumInput { erasure: e, temperature: 0.7, hbar_omega: 1.3 }).unwrap();
            assert!(c >= prev.0 && q >= prev.1 && c >= 0.0 && q >= 0.0);
            prev = (c, q);
        }
    }

    #[test]
    fn semiclassical_examples() {
        let base = PbsSemiclassicalInput { hbar_omega: 1.0, mass_energy: 100.0, temperature: 1.0, minus_ds: LN_2 };
        let b = pbs_semiclassical_heat_bound(&base).unwrap();
        assert!((b.heat - LN_2 / 2e4).abs() < 1e-18);
        assert!((b.heat - 3.466e-5).abs() < 1e-8);
        assert!(b.valid);
        let zero = pbs_semiclassical_heat_bound(&PbsSemiclassicalInput { hbar_omega: 0.0, ..base }).unwrap();
        assert_eq!(zero.heat, 0.0);
        let heavy = pbs_semiclassical_heat_bound(&PbsSemiclassicalInput { mass_energy: 200.0, ..base }).unwrap();
        assert!((b.heat / heavy.heat - 4.0).abs() < 1e-12);
        let light = pbs_semiclassical_heat_bound(&PbsSemiclassicalInput { mass_energy: 5.0, ..base }).unwrap();
        assert!(!light.valid);
    }

    #[test]
    fn purity_bound_examples() {
        let b = |n: usize, e: f64| pbs_quantum_purity_bound(&PbsQuantumInput { bath_qubits: n, epsilon: e }).unwrap();
        assert_eq!(b(1, 1.0 / (2.0 * SQRT_2)), 0.0);
        assert_eq!(b(1, 0.0), 0.5);
        assert_eq!(b(2, 0.0), 0.125);
        for n in 1..20 {
            let ratio = b(n + 1, 0.1) / b(n, 0.1);
            assert!((ratio - n as f64 / (2.0 * (n as f64 + 1.0))).abs() < 1e-12);
        }
        assert!(b(3, 0.1) < b(3, 0.05));
        assert!(pbs_quantum_purity_bound(&PbsQuantumInput { bath_qubits: 0, epsilon: 0.0 }).is_err());
    }

    #[test]
    fn gaussian_entropy_examples() {
        let one = gaussian_entropy_upper_bound(&DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((one - 1.418_938_533_204_672_7).abs() < 1e-14);
        let two = gaussian_entropy_upper_bound(&DMatrix::identity(2, 2)).unwrap();
        assert!((two - 2.837_877_066_409_345_5).abs() < 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(gaussian_entropy_upper_bound(&singular).unwrap(), f64::NEG_INFINITY);
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(gaussian_entropy_upper_bound(&indefinite).is_err());
    }

    #[test]
    fn gaussian_entropy_bounds_a_histogram_estimate() {
        // correlated 2-D Gaussian, plug-in histogram entropy
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
        let bound = gaussian_entropy_upper_bound(&cov).unwrap();
        let l11 = 1.0f64;
        let l21 = 0.6;
        let l22 = (2.0f64 - 0.36).sqrt();
        let mut s = NormalStream::new(77, 0);
        let n = 1_000_000;
        let h = 0.05;
        let mut counts = std::collections::HashMap::<(i64, i64), u64>::new();
        for _ in 0..n {
            let (z1, z2) = (s.next_normal(), s.next_normal());
            let x = l11 * z1;
            let y = l21 * z1 + l22 * z2;
            *counts.entry(((x / h).floor() as i64, (y / h).floor() as i64)).or_default() += 1;
        }
        let est: f64 = counts
            .values()
            .map(|&k| {
                let p = k as f64 / n as f64;
                -p * (p / (h * h)).ln()
            })
            .sum();
        // the plug-in estimator is biased low; allow a small positive margin
        assert!(est <= bound + 0.01, "{est} vs {bound}");
        assert!(est > bound - 0.1);
    }

    fn walk_cfg(checkpoints: Vec<u64>, samples: usize) -> MomentumWalkConfig {
        let input = PbsSemiclassicalInput { hbar_omega: 1.0, mass_energy: 100.0, temperature: 1.0, minus_ds: LN_2 };
        MomentumWalkConfig {
            checkpoints,
            delta_p: minimal_momentum_kick(&input).unwrap(),
            input,
            samples,
            seed: 3,
            workers: 1,
            batches: 50,
        }
    }

    #[test]
    fn momentum_walk_zero_photons_and_closed_form() {
        let cfg = walk_cfg(vec![0, 1000, 10_000], 20_000);
        let pts = simulate_pbs_momentum_walk(&cfg).unwrap();
        assert_eq!(pts[0].entropy_change, 0.0);
        assert_eq!(pts[0].kick_variance, 0.0);
        // closed form equals ½ ln(1 + (ħω/mc²)² N)
        assert!((pts[2].closed_form - 0.5 * 2f64.ln()).abs() < 1e-15);
        for p in &pts[1..] {
            assert!((p.entropy_change - p.closed_form).abs() < 4.0 * p.entropy_std_err);
            assert!((p.kick_variance - p.kick_variance_expected).abs() < 4.0 * p.kick_variance_std_err);
        }
    }

    #[test]
    fn momentum_walk_is_worker_independent() {
        let mut cfg = walk_cfg(vec![10, 100], 1000);
        let a = simulate_pbs_momentum_walk(&cfg).unwrap();
        cfg.workers = 3;
        assert_eq!(a, simulate_pbs_momentum_walk(&cfg).unwrap());
    }

    #[test]
    fn identity_unitary_trial() {
        let rho_b = DensityMatrix::basis_state(2, 0);
        let trial = evaluate_purity_trial(&CMatrix::identity(8, 8), &rho_b).unwrap();
        assert!((trial.epsilon - 1.0 / SQRT_2).abs() < 1e-15);
        assert_eq!(trial.purity_loss, 0.0);
        assert_eq!(trial.bound, 0.0);
        assert!(trial.satisfied && trial.assumption_held);
    }

    #[test]
    fn swap_transfer_is_exact_and_tight() {
        for n in 1..=3 {
            let u = controlled_swap_transfer(n);
            assert!(crate::numerics::unitarity_defect(&u) < 1e-15);
            let dim = 1usize << n;
            let rho_b = DensityMatrix::basis_state(dim, dim - 1);
            let trial = evaluate_purity_trial(&u, &rho_b).unwrap();
            assert!(trial.epsilon < 1e-15);
            assert!((trial.purity_loss - 0.5).abs() < 1e-15);
            assert!(trial.satisfied);
            if n == 1 {
                assert!((trial.bound - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn conserving_unitaries_commute_with_total_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = conserving_haar_unitary(4, &mut rng);
        assert!(crate::numerics::unitarity_defect(&u) < 1e-12);
        for i in 0..16usize {
            for j in 0..16usize {
                if i.count_ones() != j.count_ones() {
                    assert_eq!(u[(i, j)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn ground_bath_haar_trials_satisfy_the_bound() {
        let report = verify_purity_bound_small_bath(&PurityVerifierConfig {
            bath_qubits: 1,
            trials: 300,
            seed: 8,
            bath: BathPreparation::Ground,
            family: UnitaryFamily::HaarConserving,
            workers: 1,
        })
        .unwrap();
        assert_eq!(report.trials.len(), 300);
        assert_eq!(report.violations_with_assumption, 0);
    }

    #[test]
    fn sweeps() {
        let grid = log_grid(0.1, 100.0, 31).unwrap();
        assert_eq!(grid[0], 0.1);
        assert_eq!(grid[30], 100.0);
        let rows = alp_bounds_sweep(&grid).unwrap();
        let top = rows.last().unwrap();
        assert!((top.bound_quantum - top.bound_classical).abs() / top.bound_classical < 0.01);
        let pbs = pbs_bounds_sweep(&PbsComparisonParams::documented_defaults(), &log_grid(1.0, 1e4, 81).unwrap()).unwrap();
        let cross = crossovers(&pbs);
        assert_eq!(cross.len(), 1);
        let m = pbs[cross[0]].m_over_me;
        assert!(m > 50.0 && m < 200.0, "crossover at {m}");
        assert!(pbs[0].bound_purity > pbs[0].bound_semiclassical);
        assert!(pbs.last().unwrap().bound_semiclassical > pbs.last().unwrap().bound_purity);
    }
}

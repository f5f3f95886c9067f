//! Two-photon quantum eraser with a noisy signal polarizer.
//!
//! The signal photon lives in `(|0⟩, |h⟩, |v⟩)` (index `i`), the idler has
//! polarization `j ∈ {h, v}` and path `k ∈ {1, 2}`. The 12 basis states are
//! ordered by `i + 3j + 6k`, so as a tensor product the full space is
//! path ⊗ idler polarization ⊗ signal and the density matrix is a 4×4 array
//! of 3×3 signal blocks indexed by the idler state `j + 2k`.
//!
//! Beamsplitter convention: (1/√2)[[1, i], [i, 1]] on the path. With it
//! the unmarked interferometer sends the photon to port 2 at φ = 0, and
//! P_port1 = (1 − cos φ)/2.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::Serialize;

use crate::collision::{kraus_pair, KrausPair, LayerParams, Mat3, ThermalAngleSampler};
use crate::error::{Error, Result};
use crate::numerics::{c, kron, CMatrix, CVector, DensityMatrix, I};
use crate::parallel::map_indexed;
use crate::rng::derive_key;

pub const DIM: usize = 12;
/// Number of idler basis states, and of 3×3 blocks per row.
pub const IDLER_DIM: usize = 4;

pub const PATH_1: usize = 0;
pub const PATH_2: usize = 1;

/// Idler basis index for polarization `j` (0 = h, 1 = v) on path `k`.
pub fn idler_index(j: usize, k: usize) -> usize {
    j + 2 * k
}

/// Full basis index: signal `i`, idler polarization `j`, path `k`.
pub fn basis_index(i: usize, j: usize, k: usize) -> usize {
    i + 3 * j + 6 * k
}

/// (|h, h, 1⟩ + |v, v, 1⟩)/√2, signal first.
pub fn bell_initial_state() -> DensityMatrix {
    let mut psi = CVector::zeros(DIM);
    let a = c(std::f64::consts::FRAC_1_SQRT_2);
    psi[basis_index(1, 0, PATH_1)] = a;
    psi[basis_index(2, 1, PATH_1)] = a;
    DensityMatrix::from_pure(&psi).expect("normalised state")
}

fn check_dim(sigma: &DensityMatrix) -> Result<()> {
    if sigma.dim() != DIM {
        return Err(Error::DimensionMismatch(format!(
            "two-photon state must be 12x12, got {}",
            sigma.dim()
        )));
    }
    Ok(())
}

/// Lifts a 4×4 idler operator to the full space.
fn lift_idler(w: &Matrix4<Complex64>) -> CMatrix {
    let w = CMatrix::from_fn(4, 4, |a, b| w[(a, b)]);
    kron(&w, &CMatrix::identity(3, 3))
}

fn conjugate_idler(sigma: &DensityMatrix, w: &Matrix4<Complex64>) -> Result<DensityMatrix> {
    check_dim(sigma)?;
    Ok(sigma.conjugate(&lift_idler(w)))
}

/// (1/√2)[[1, i], [i, 1]] on the path, identity on polarization.
pub fn beamsplitter_operator() -> Matrix4<Complex64> {
    let s = c(std::f64::consts::FRAC_1_SQRT_2);
    let is = I * s;
    let mut w = Matrix4::zeros();
    for j in 0..2 {
        w[(idler_index(j, PATH_1), idler_index(j, PATH_1))] = s;
        w[(idler_index(j, PATH_1), idler_index(j, PATH_2))] = is;
        w[(idler_index(j, PATH_2), idler_index(j, PATH_1))] = is;
        w[(idler_index(j, PATH_2), idler_index(j, PATH_2))] = s;
    }
    w
}

/// e^{iφ} on path 2.
pub fn phase_operator(phi: f64) -> Matrix4<Complex64> {
    let mut w = Matrix4::identity();
    let p = Complex64::from_polar(1.0, phi);
    for j in 0..2 {
        w[(idler_index(j, PATH_2), idler_index(j, PATH_2))] = p;
    }
    w
}

/// Quarter-wave plate Jones matrix with fast axis at angle `q`.
pub fn qwp_jones(q: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = q.sin_cos();
    let global = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
    let off = Complex64::new(1.0, -1.0) * s * co;
    [
        [global * (c(co * co) + I * (s * s)), global * off],
        [global * off, global * (c(s * s) + I * (co * co))],
    ]
}

/// QWP on the polarization of one path, identity on the other.
pub fn qwp_operator(path: usize, fast_axis: f64) -> Matrix4<Complex64> {
    assert!(path < 2);
    let j = qwp_jones(fast_axis);
    let mut w = Matrix4::identity();
    for a in 0..2 {
        for b in 0..2 {
            w[(idler_index(a, path), idler_index(b, path))] = j[a][b];
        }
    }
    w
}

pub fn idler_beamsplitter(sigma: &DensityMatrix) -> Result<DensityMatrix> {
    conjugate_idler(sigma, &beamsplitter_operator())
}

pub fn idler_phase(sigma: &DensityMatrix, phi: f64) -> Result<DensityMatrix> {
    conjugate_idler(sigma, &phase_operator(phi))
}

pub fn idler_qwp(sigma: &DensityMatrix, path: usize, fast_axis: f64) -> Result<DensityMatrix> {
    if path > 1 {
        return Err(Error::OutOfRange(format!("path index {path} must be 0 or 1")));
    }
    conjugate_idler(sigma, &qwp_operator(path, fast_axis))
}

/// Fast axes of the marking plates on paths 1 and 2.
pub const MARKING_AXES: [f64; 2] = [std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_4];

/// BS, then (if marked) the two QWPs, then the phase on path 2, then BS.
pub fn interferometer_operator(marked: bool, phi: f64) -> Matrix4<Complex64> {
    let bs = beamsplitter_operator();
    let mut w = bs;
    if marked {
        w = qwp_operator(PATH_2, MARKING_AXES[1]) * qwp_operator(PATH_1, MARKING_AXES[0]) * w;
    }
    bs * phase_operator(phi) * w
}

pub fn apply_interferometer(sigma: &DensityMatrix, marked: bool, phi: f64) -> Result<DensityMatrix> {
    conjugate_idler(sigma, &interferometer_operator(marked, phi))
}

/// Apply one polarizer layer to every 3×3 signal block.
pub fn apply_signal_layer(sigma: &DensityMatrix, kraus: &KrausPair) -> Result<DensityMatrix> {
    check_dim(sigma)?;
    let k1 = dense3(&kraus.k1);
    let k2 = dense3(&kraus.k2);
    let id = CMatrix::identity(IDLER_DIM, IDLER_DIM);
    let (a1, a2) = (kron(&id, &k1), kron(&id, &k2));
    let m = sigma.matrix();
    let out = &a1 * m * a1.adjoint() + &a2 * m * a2.adjoint();
    Ok(DensityMatrix::from_channel_output(out))
}

fn dense3(m: &Mat3) -> CMatrix {
    CMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

/// Polarizer of `layers` collision layers on the signal, angles drawn by
/// `sampler`. Acts on the full 12×12 state.
pub fn signal_polarizer(
    sigma: &DensityMatrix,
    t: f64,
    layers: usize,
    sampler: &mut ThermalAngleSampler,
) -> Result<DensityMatrix> {
    check_dim(sigma)?;
    let mut out = sigma.clone();
    for _ in 0..layers {
        let k = kraus_pair(LayerParams::new(t, sampler.next_angle())?);
        out = apply_signal_layer(&out, &k)?;
    }
    Ok(out)
}

/// The four diagonal signal blocks, the only part of the state the exit
/// probabilities depend on. The polarizer maps each block to itself, so
/// evolving these is exact for readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalBlocks(pub [Mat3; IDLER_DIM]);

impl DiagonalBlocks {
    pub fn of(sigma: &DensityMatrix) -> Result<Self> {
        check_dim(sigma)?;
        let mut blocks = [Mat3::zeros(); IDLER_DIM];
        for (b, block) in blocks.iter_mut().enumerate() {
            *block = Mat3::from_fn(|i, j| sigma.get(3 * b + i, 3 * b + j));
        }
        Ok(Self(blocks))
    }

    pub fn apply_layer(&mut self, kraus: &KrausPair) {
        for b in self.0.iter_mut() {
            *b = kraus.k1 * *b * kraus.k1.adjoint() + kraus.k2 * *b * kraus.k2.adjoint();
        }
    }

    pub fn apply_polarizer(&mut self, t: f64, layers: usize, sampler: &mut ThermalAngleSampler) -> Result<()> {
        for _ in 0..layers {
            self.apply_layer(&kraus_pair(LayerParams::new(t, sampler.next_angle())?));
        }
        Ok(())
    }

    pub fn exit_probabilities(&self) -> Result<ExitProbabilities> {
        let mut total = [0.0; 2];
        let mut transmitted = [0.0; 2];
        for j in 0..2 {
            for k in 0..2 {
                let b = &self.0[idler_index(j, k)];
                total[k] += b[(0, 0)].re + b[(1, 1)].re + b[(2, 2)].re;
                transmitted[k] += b[(1, 1)].re + b[(2, 2)].re;
            }
        }
        ExitProbabilities::from_weights(total, transmitted)
    }
}

/// Readout of the idler exit ports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitProbabilities {
    pub p_port1: f64,
    pub p_port2: f64,
    /// Conditioned on the signal photon being transmitted.
    pub p_port1_cond: f64,
    pub p_port2_cond: f64,
    pub transmitted: f64,
}

/// Below this transmitted weight the conditioned probabilities are refused.
pub const MIN_CONDITION_WEIGHT: f64 = 1e-300;

impl ExitProbabilities {
    fn from_weights(total: [f64; 2], transmitted: [f64; 2]) -> Result<Self> {
        // diagonal sums can dip a few ulps below zero
        let total = total.map(|x| x.max(0.0));
        let transmitted = transmitted.map(|x| x.max(0.0));
        let kept = transmitted[0] + transmitted[1];
        if kept.is_nan() || kept <= MIN_CONDITION_WEIGHT {
            return Err(Error::ZeroProbabilityCondition);
        }
        Ok(Self {
            p_port1: total[0],
            p_port2: total[1],
            p_port1_cond: transmitted[0] / kept,
            p_port2_cond: transmitted[1] / kept,
            transmitted: kept,
        })
    }
}

/// Sums of the diagonal of σ over each idler path.
pub fn exit_probabilities(sigma: &DensityMatrix) -> Result<ExitProbabilities> {
    DiagonalBlocks::of(sigma)?.exit_probabilities()
}

/// (P_max − P_min)/(P_max + P_min).
pub fn visibility(p: &[f64]) -> f64 {
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / (max + min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EraserConfig {
    pub marked: bool,
    /// Mean polarizer angle; 0 transmits the signal's h component.
    pub polarizer_angle: f64,
    /// Apply the signal polarizer at all.
    pub measure: bool,
    pub temperature_ratio: f64,
    pub layers: usize,
    pub t: f64,
    pub seed: u64,
}

pub const DEFAULT_LAYERS: usize = 1000;

impl Default for EraserConfig {
    fn default() -> Self {
        Self {
            marked: false,
            polarizer_angle: 0.0,
            measure: false,
            temperature_ratio: 0.0,
            layers: DEFAULT_LAYERS,
            t: 0.9,
            seed: 0,
        }
    }
}

/// State after the interferometer, before the signal polarizer.
pub fn interferometer_output(marked: bool, phi: f64) -> Result<DensityMatrix> {
    apply_interferometer(&bell_initial_state(), marked, phi)
}

/// One realization at phase φ. Realization `r` draws its angles from
/// stream `r` of key `key`.
pub fn run_realization(cfg: &EraserConfig, phi: f64, key: u64, realization: u64) -> Result<ExitProbabilities> {
    let mut blocks = DiagonalBlocks::of(&interferometer_output(cfg.marked, phi)?)?;
    if cfg.measure {
        let mut sampler = ThermalAngleSampler::new(cfg.polarizer_angle, cfg.temperature_ratio, key, realization)?;
        blocks.apply_polarizer(cfg.t, cfg.layers, &mut sampler)?;
    }
    blocks.exit_probabilities()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRow {
    pub phi: f64,
    pub probs: ExitProbabilities,
}

/// Phase sweep with a single realization of the polarizer angles; the same
/// angle sequence is used at every φ.
pub fn phase_sweep(cfg: &EraserConfig, phis: &[f64], workers: usize) -> Result<Vec<PhaseRow>> {
    let key = derive_key(cfg.seed, 0);
    map_indexed(workers, phis.len(), |n| {
        Ok(PhaseRow {
            phi: phis[n],
            probs: run_realization(cfg, phis[n], key, 0)?,
        })
    })
    .into_iter()
    .collect()
}

pub fn uniform_phase_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|n| 2.0 * std::f64::consts::PI * n as f64 / points as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemperatureRow {
    pub temperature_ratio: f64,
    pub mean_p1_cond: f64,
    pub se_p1: f64,
    pub mean_p2_cond: f64,
    pub se_p2: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ensemble means of the conditioned exit probabilities at each
/// temperature. Grid point `g` uses key `derive_key(seed, g + 1)`.
pub fn temperature_sweep(
    cfg: &EraserConfig,
    ratios: &[f64],
    phi: f64,
    realizations: usize,
    workers: usize,
) -> Result<Vec<TemperatureRow>> {
    if realizations == 0 {
        return Err(Error::OutOfRange("need at least one realization".into()));
    }
    let start = DiagonalBlocks::of(&interferometer_output(cfg.marked, phi)?)?;
    let jobs: Vec<(usize, usize)> = (0..ratios.len())
        .flat_map(|g| (0..realizations).map(move |r| (g, r)))
        .collect();
    let results = map_indexed(workers, jobs.len(), |n| {
        let (g, r) = jobs[n];
        let mut blocks = start;
        let mut sampler =
            ThermalAngleSampler::new(cfg.polarizer_angle, ratios[g], derive_key(cfg.seed, g as u64 + 1), r as u64)?;
        blocks.apply_polarizer(cfg.t, cfg.layers, &mut sampler)?;
        blocks.exit_probabilities()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ratios
        .iter()
        .enumerate()
        .map(|(g, &ratio)| {
            let chunk = &results[g * realizations..(g + 1) * realizations];
            let p1: Vec<f64> = chunk.iter().map(|p| p.p_port1_cond).collect();
            let p2: Vec<f64> = chunk.iter().map(|p| p.p_port2_cond).collect();
            let (mean_p1_cond, se_p1) = mean_se(&p1);
            let (mean_p2_cond, se_p2) = mean_se(&p2);
            TemperatureRow {
                temperature_ratio: ratio,
                mean_p1_cond,
                se_p1,
                mean_p2_cond,
                se_p2,
            }
        })
        .collect())
}

/// Adjacent grid pairs where |P_port1 − ½| grows by more than `sigmas`
/// combined standard errors.
pub fn trend_violations(rows: &[TemperatureRow], sigmas: f64) -> Vec<usize> {
    rows.windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let d0 = (w[0].mean_p1_cond - 0.5).abs();
            let d1 = (w[1].mean_p1_cond - 0.5).abs();
            let se = (w[0].se_p1.powi(2) + w[1].se_p1.powi(2)).sqrt();
            d1 - d0 > sigmas * se
        })
        .map(|(k, _)| k)
        .collect()
}

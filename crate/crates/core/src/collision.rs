//! Multilayer absorbing polarizer in the zero/one-photon subspace.
//!
//! States are 3×3 density matrices over `(|0⟩, |h⟩, |v⟩)`. A layer at angle
//! 0 transmits h untouched and attenuates the v amplitude by `t`; the lost
//! amplitude goes to the vacuum state (the photon left through the side port
//! and was traced out).

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, DensityMatrix, EIGEN_FLOOR, STRUCTURAL_TOL};
use crate::parallel::map_indexed;
use crate::rng::NormalStream;

pub type Mat3 = Matrix3<Complex64>;

pub const IDX_VAC: usize = 0;
pub const IDX_H: usize = 1;
pub const IDX_V: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerParams {
    pub t: f64,
    pub theta: f64,
}

impl LayerParams {
    pub fn new(t: f64, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange(format!("transmission t = {t} must lie in [0, 1]")));
        }
        if !theta.is_finite() {
            return Err(Error::OutOfRange("layer angle must be finite".into()));
        }
        Ok(Self { t, theta })
    }
}

/// Kraus operators of one layer. Both are real, but stored complex so they
/// compose directly with complex states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausPair {
    pub k1: Mat3,
    pub k2: Mat3,
}

#[rustfmt::skip]
pub fn kraus_pair(layer: LayerParams) -> KrausPair {
    let LayerParams { t, theta } = layer;
    let r = (1.0 - t * t).max(0.0).sqrt();
    let (s, c) = theta.sin_cos();
    let z = Complex64::new(0.0, 0.0);
    let re = |x: f64| Complex64::new(x, 0.0);
    let off = re((1.0 - t) * s * c);
    let k1 = Mat3::new(
        re(1.0), z, z,
        z, re(c * c + t * s * s), off,
        z, off, re(s * s + t * c * c),
    );
    let k2 = Mat3::new(
        z, re(-r * s), re(r * c),
        z, z, z,
        z, z, z,
    );
    KrausPair { k1, k2 }
}

impl KrausPair {
    /// max |K₁†K₁ + K₂†K₂ − I|.
    pub fn completeness_defect(&self) -> f64 {
        let sum = self.k1.adjoint() * self.k1 + self.k2.adjoint() * self.k2 - Mat3::identity();
        sum.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// K₁ρK₁† + K₂ρK₂†, re-symmetrised.
    pub fn apply(&self, rho: &Mat3) -> Mat3 {
        let out = self.k1 * rho * self.k1.adjoint() + self.k2 * rho * self.k2.adjoint();
        (out + out.adjoint()) * Complex64::new(0.5, 0.0)
    }
}

/// Density matrix over `(|0⟩, |h⟩, |v⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonState(Mat3);

impl SinglePhotonState {
    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        if rho.dim() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "single-photon state must be 3x3, got {}",
                rho.dim()
            )));
        }
        Ok(Self(Mat3::from_fn(|i, j| rho.get(i, j))))
    }

    pub fn new(m: Mat3) -> Result<Self> {
        let dense = CMatrix::from_fn(3, 3, |i, j| m[(i, j)]);
        DensityMatrix::new(dense)?;
        Ok(Self(m))
    }

    /// Stores `m` without validation; for channel outputs.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    pub fn vacuum() -> Self {
        let mut m = Mat3::zeros();
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        Self(m)
    }

    /// Every entry equal to 1/3: the equal superposition of vacuum, h and v.
    pub fn uniform_superposition() -> Self {
        Self(Mat3::from_element(Complex64::new(1.0 / 3.0, 0.0)))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_channel_output(CMatrix::from_fn(3, 3, |i, j| self.0[(i, j)]))
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re]
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let e = self.0.symmetric_eigenvalues();
        [e[0], e[1], e[2]]
    }

    pub fn observables(&self) -> LayerObservables {
        let [p0, ph, pv] = self.populations();
        let ev = self.eigenvalues();
        LayerObservables {
            p0,
            ph,
            pv,
            coh_hv2: self.0[(IDX_H, IDX_V)].norm_sqr(),
            coh_v02: self.0[(IDX_V, IDX_VAC)].norm_sqr(),
            coh_h02: self.0[(IDX_H, IDX_VAC)].norm_sqr(),
            entropy_shannon: entropy_of(&[p0, ph, pv]),
            entropy_vn: entropy_of(&ev),
            energy: 1.0 - p0,
        }
    }

    /// Trace, Hermiticity and positivity check with the same tolerances as
    /// `DensityMatrix::new`.
    pub fn check(&self) -> Result<()> {
        let herm = (self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > STRUCTURAL_TOL {
            return Err(Error::InvalidState(format!("hermiticity defect {herm:e}")));
        }
        let tr = self.0.trace().re;
        if (tr - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < EIGEN_FLOOR {
            return Err(Error::InvalidState(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// −Σ p ln p over non-negative entries; tiny negative round-off is ignored.
fn entropy_of(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).fold(0.0, |acc, &x| acc - x * x.ln())
}

pub fn apply_layer(rho: &SinglePhotonState, layer: LayerParams) -> SinglePhotonState {
    SinglePhotonState(kraus_pair(layer).apply(&rho.0))
}

/// Gaussian polarizer angles with variance `temperature_ratio` = k_BT/κ.
///
/// Angle `n` of a sampler is draw `n` of its counter-based stream, so
/// realizations can be regenerated in any order.
#[derive(Debug, Clone)]
pub struct ThermalAngleSampler {
    mean_angle: f64,
    temperature_ratio: f64,
    sigma: f64,
    stream: NormalStream,
}

impl ThermalAngleSampler {
    pub fn new(mean_angle: f64, temperature_ratio: f64, key: u64, stream: u64) -> Result<Self> {
        if !temperature_ratio.is_finite() || temperature_ratio < 0.0 {
            return Err(Error::OutOfRange(format!(
                "temperature ratio {temperature_ratio} must be finite and non-negative"
            )));
        }
        Ok(Self {
            mean_angle,
            temperature_ratio,
            sigma: temperature_ratio.sqrt(),
            stream: NormalStream::new(key, stream),
        })
    }

    pub fn mean_angle(&self) -> f64 {
        self.mean_angle
    }

    pub fn temperature_ratio(&self) -> f64 {
        self.temperature_ratio
    }

    pub fn next_angle(&mut self) -> f64 {
        let z = self.stream.next_normal();
        self.mean_angle + self.sigma * z
    }

    /// Repositions the sampler at layer `index` (0-based).
    pub fn seek(&mut self, index: u64) {
        self.stream.seek(index);
    }
}

/// Observables of one layer of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerObservables {
    pub p0: f64,
    pub ph: f64,
    pub pv: f64,
    pub coh_hv2: f64,
    pub coh_v02: f64,
    pub coh_h02: f64,
    pub entropy_shannon: f64,
    pub entropy_vn: f64,
    pub energy: f64,
}

pub const OBSERVABLE_COLUMNS: [&str; 9] = [
    "p0",
    "ph",
    "pv",
    "coh_hv2",
    "coh_v02",
    "coh_h02",
    "entropy_shannon",
    "entropy_vn",
    "energy",
];

impl LayerObservables {
    pub fn to_array(&self) -> [f64; 9] {
        [
            self.p0,
            self.ph,
            self.pv,
            self.coh_hv2,
            self.coh_v02,
            self.coh_h02,
            self.entropy_shannon,
            self.entropy_vn,
            self.energy,
        ]
    }

    pub fn from_array(a: [f64; 9]) -> Self {
        Self {
            p0: a[0],
            ph: a[1],
            pv: a[2],
            coh_hv2: a[3],
            coh_v02: a[4],
            coh_h02: a[5],
            entropy_shannon: a[6],
            entropy_vn: a[7],
            energy: a[8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryConfig {
    pub layers: usize,
    pub t: f64,
    pub temperature_ratio: f64,
    pub mean_angle: f64,
}

/// Observables at layers `0..=layers`; entry 0 describes the input state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub config: TrajectoryConfig,
    pub layers: Vec<LayerObservables>,
    pub final_state: SinglePhotonState,
}

impl TrajectoryRecord {
    pub fn column(&self, f: impl Fn(&LayerObservables) -> f64) -> Vec<f64> {
        self.layers.iter().map(f).collect()
    }
}

/// State checks are run every `check_stride` layers (and at the last one).
pub const DEFAULT_CHECK_STRIDE: usize = 1;

pub fn run_trajectory(
    rho0: &SinglePhotonState,
    layers: usize,
    t: f64,
    sampler: &mut ThermalAngleSampler,
) -> Result<TrajectoryRecord> {
    run_trajectory_with_stride(rho0, layers, t, sampler, DEFAULT_CHECK_STRIDE)
}

pub fn run_trajectory_with_stride(
    rho0: &SinglePhotonState,
    layers: usize,
    t: f64,
    sampler: &mut ThermalAngleSampler,
    check_stride: usize,
) -> Result<TrajectoryRecord> {
    if layers == 0 {
        return Err(Error::OutOfRange("a trajectory needs at least one layer".into()));
    }
    LayerParams::new(t, 0.0)?;
    let stride = check_stride.max(1);
    let mut rho = *rho0;
    let mut obs = Vec::with_capacity(layers + 1);
    obs.push(rho.observables());
    for n in 1..=layers {
        let layer = LayerParams { t, theta: sampler.next_angle() };
        rho = apply_layer(&rho, layer);
        if n % stride == 0 || n == layers {
            rho.check()?;
        }
        obs.push(rho.observables());
    }
    Ok(TrajectoryRecord {
        config: TrajectoryConfig {
            layers,
            t,
            temperature_ratio: sampler.temperature_ratio(),
            mean_angle: sampler.mean_angle(),
        },
        layers: obs,
        final_state: rho,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleConfig {
    #[serde(skip)]
    pub rho0: SinglePhotonState,
    pub layers: usize,
    pub t: f64,
    pub temperature_ratio: f64,
    pub mean_angle: f64,
    pub realizations: usize,
    /// Key of the angle streams; realization `k` uses stream `k`.
    pub seed: u64,
    pub workers: usize,
}

impl EnsembleConfig {
    /// The sampler used by realization `k`.
    pub fn sampler(&self, k: usize) -> Result<ThermalAngleSampler> {
        ThermalAngleSampler::new(self.mean_angle, self.temperature_ratio, self.seed, k as u64)
    }
}

/// Per-layer mean and standard error of the mean across realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub mean: Vec<LayerObservables>,
    pub std_err: Vec<LayerObservables>,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub trajectories: Vec<TrajectoryRecord>,
    pub summary: EnsembleSummary,
}

pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleResult> {
    if config.realizations == 0 {
        return Err(Error::OutOfRange("an ensemble needs at least one realization".into()));
    }
    let runs = map_indexed(config.workers, config.realizations, |k| {
        let mut sampler = config.sampler(k)?;
        run_trajectory(&config.rho0, config.layers, config.t, &mut sampler)
    });
    let trajectories = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = summarize(&trajectories);
    Ok(EnsembleResult { trajectories, summary })
}

/// Sequential mean and standard error, so the result does not depend on
/// how the trajectories were produced.
pub fn summarize(trajectories: &[TrajectoryRecord]) -> EnsembleSummary {
    let n = trajectories.len();
    let len = trajectories.iter().map(|r| r.layers.len()).min().unwrap_or(0);
    let mut mean = Vec::with_capacity(len);
    let mut std_err = Vec::with_capacity(len);
    for layer in 0..len {
        let mut m = [0.0; 9];
        for r in trajectories {
            for (acc, x) in m.iter_mut().zip(r.layers[layer].to_array()) {
                *acc += x;
            }
        }
        m.iter_mut().for_each(|x| *x /= n as f64);
        let mut se = [0.0; 9];
        if n > 1 {
            for r in trajectories {
                for ((acc, x), mu) in se.iter_mut().zip(r.layers[layer].to_array()).zip(m) {
                    *acc += (x - mu) * (x - mu);
                }
            }
            se.iter_mut().for_each(|x| *x = (*x / (n - 1) as f64 / n as f64).sqrt());
        }
        mean.push(LayerObservables::from_array(m));
        std_err.push(LayerObservables::from_array(se));
    }
    EnsembleSummary { mean, std_err }
}

/// First index at which `series` drops below `threshold`.
pub fn first_crossing_below(series: &[f64], threshold: f64) -> Option<usize> {
    series.iter().position(|&x| x < threshold)
}

/// Start of the first window of `width` consecutive layer steps in which
/// both the entropy and the energy change by less than `threshold` per
/// layer. Step `n` is the change from layer `n` to `n + 1`.
pub fn find_plateau(record: &TrajectoryRecord, width: usize, threshold: f64) -> Option<usize> {
    let flat = flat_steps(&record.layers, threshold);
    let mut run = 0;
    for (n, &ok) in flat.iter().enumerate() {
        run = if ok { run + 1 } else { 0 };
        if run >= width {
            return Some(n + 1 - width);
        }
    }
    None
}

/// Whether every step in `start..start + width` is flat.
pub fn is_plateau_window(record: &TrajectoryRecord, start: usize, width: usize, threshold: f64) -> bool {
    let flat = flat_steps(&record.layers, threshold);
    start + width <= flat.len() && flat[start..start + width].iter().all(|&ok| ok)
}

fn flat_steps(layers: &[LayerObservables], threshold: f64) -> Vec<bool> {
    layers
        .windows(2)
        .map(|w| {
            (w[1].entropy_shannon - w[0].entropy_shannon).abs() < threshold
                && (w[1].energy - w[0].energy).abs() < threshold
        })
        .collect()
}

//! Heisenberg-picture description of a single PBS whose angle is drawn from
//! the thermal distribution θ ~ N(0, k_BT/κ).
//!
//! Averaging a_k' = Σ_j S_θ,kj a_j over θ only needs E[cos²θ], E[sin²θ] and
//! E[sin θ cos θ]; the last vanishes by symmetry and E[sin²θ] = χ.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numerics::{c, CMatrix, DensityMatrix};
use crate::pbs_channel::{build_evolution_operator, reflection, rotated_pbs, FockTruncation};

/// Default Gauss–Hermite order for θ averages.
pub const DEFAULT_QUADRATURE_ORDER: usize = 64;

fn check_ratio(temperature_ratio: f64) -> Result<()> {
    if temperature_ratio >= 0.0 && temperature_ratio.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!(
            "temperature ratio {temperature_ratio} must be finite and non-negative"
        )))
    }
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("transmission t = {t} must lie in [0, 1]")))
    }
}

/// χ = (1 − e^{−2 k_BT/κ})/2 = E[sin²θ].
pub fn chi(temperature_ratio: f64) -> Result<f64> {
    check_ratio(temperature_ratio)?;
    Ok(-0.5 * (-2.0 * temperature_ratio).exp_m1())
}

/// Gauss–Hermite rule for the weight e^{−x²}, from the Golub–Welsch
/// eigenproblem of the Jacobi matrix.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::OutOfRange("quadrature order must be positive".into()));
        }
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let b = (k as f64 / 2.0).sqrt();
            jacobi[(k, k - 1)] = b;
            jacobi[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], sqrt_pi * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// E[f(θ)] for θ ~ N(mean, variance), as (θ_i, w_i) with Σ w_i = 1.
    pub fn gaussian_points(&self, mean: f64, variance: f64) -> Vec<(f64, f64)> {
        let scale = (2.0 * variance).sqrt();
        let norm = 1.0 / std::f64::consts::PI.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (mean + scale * x, w * norm))
            .collect()
    }

    pub fn gaussian_expectation(&self, mean: f64, variance: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.gaussian_points(mean, variance).into_iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Ensemble-averaged scattering matrix S̄ = E_θ[R_θ S R_θ†].
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedScattering {
    pub matrix: DMatrix<f64>,
    pub chi: f64,
    pub t: f64,
}

pub fn averaged_scattering(t: f64, temperature_ratio: f64) -> Result<AveragedScattering> {
    check_t(t)?;
    averaged_scattering_from_chi(t, chi(temperature_ratio)?)
}

pub fn averaged_scattering_from_chi(t: f64, chi: f64) -> Result<AveragedScattering> {
    check_t(t)?;
    if !(0.0..=0.5).contains(&chi) {
        return Err(Error::OutOfRange(format!("chi = {chi} must lie in [0, 1/2]")));
    }
    let r = reflection(t);
    let diag_h = 1.0 - chi * (1.0 - t);
    let diag_v = t + chi * (1.0 - t);
    let cross_h = r * chi;
    let cross_v = r * (1.0 - chi);
    #[rustfmt::skip]
    let matrix = DMatrix::from_row_slice(4, 4, &[
        diag_h,   0.0,      cross_h, 0.0,
        0.0,      diag_v,   0.0,     cross_v,
        -cross_h, 0.0,      diag_h,  0.0,
        0.0,      -cross_v, 0.0,     diag_v,
    ]);
    Ok(AveragedScattering { matrix, chi, t })
}

impl AveragedScattering {
    /// (c_a, c_b) in a_k' = c_a a_k + c_b b_k for k = h (0) or v (1).
    pub fn mode_coefficients(&self, polarization: usize) -> (f64, f64) {
        assert!(polarization < 2);
        (
            self.matrix[(polarization, polarization)],
            self.matrix[(polarization, polarization + 2)],
        )
    }

    /// [a_k', a_k'†] = Σ_j |S̄_kj|² for output mode `k`.
    pub fn commutator(&self, mode: usize) -> f64 {
        self.matrix.row(mode).iter().map(|x| x * x).sum()
    }

    /// max |S̄†S̄ − I|.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.matrix.transpose() * &self.matrix - DMatrix::<f64>::identity(4, 4);
        d.abs().max()
    }

    pub fn to_complex(&self) -> CMatrix {
        self.matrix.map(c)
    }
}

/// 1 − 2(1−t)(χ − χ²).
pub fn modified_commutator(t: f64, chi: f64) -> Result<f64> {
    check_t(t)?;
    if !(0.0..=0.5).contains(&chi) {
        return Err(Error::OutOfRange(format!("chi = {chi} must lie in [0, 1/2]")));
    }
    Ok(1.0 - 2.0 * (1.0 - t) * (chi - chi * chi))
}

/// T^{ij}_{kl} = E_θ[S*_θ,ik S_θ,jl]. A quadratic operator Σ X_ij a_i†a_j
/// evolves under the averaged adjoint map into Σ_kl (Σ_ij X_ij T^{ij}_{kl})
/// a_k†a_l.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTransferTensor {
    data: Vec<f64>,
}

fn tensor_index(i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * 4 + j) * 4 + k) * 4 + l
}

impl QuadraticTransferTensor {
    /// Weighted sum of S*_ik S_jl over a set of scattering matrices.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = (f64, &'a CMatrix)>) -> Self {
        let mut data = vec![0.0; 256];
        for (w, s) in samples {
            for i in 0..4 {
                for j in 0..4 {
                    for k in 0..4 {
                        for l in 0..4 {
                            data[tensor_index(i, j, k, l)] += w * (s[(i, k)].conj() * s[(j, l)]).re;
                        }
                    }
                }
            }
        }
        Self { data }
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[tensor_index(i, j, k, l)]
    }

    /// Coefficients X'_kl of the evolved operator.
    pub fn evolve(&self, x: &CMatrix) -> CMatrix {
        assert_eq!(x.shape(), (4, 4));
        CMatrix::from_fn(4, 4, |k, l| {
            let mut acc = c(0.0);
            for i in 0..4 {
                for j in 0..4 {
                    acc += x[(i, j)] * self.get(i, j, k, l);
                }
            }
            acc
        })
    }
}

/// Quadratic transfer tensor by Gauss–Hermite quadrature over θ.
pub fn quadratic_transfer(t: f64, temperature_ratio: f64, order: usize) -> Result<QuadraticTransferTensor> {
    check_ratio(temperature_ratio)?;
    let points = thermal_points(temperature_ratio, order)?;
    let mats = points
        .iter()
        .map(|&(theta, _)| Ok(rotated_pbs(theta, t)?.into_matrix()))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuadraticTransferTensor::from_samples(
        points.iter().map(|p| p.1).zip(mats.iter()),
    ))
}

fn thermal_points(temperature_ratio: f64, order: usize) -> Result<Vec<(f64, f64)>> {
    if temperature_ratio == 0.0 {
        return Ok(vec![(0.0, 1.0)]);
    }
    Ok(GaussHermite::new(order)?.gaussian_points(0.0, temperature_ratio))
}

/// ⟨Σ X_kl a_k†a_l⟩ in state `sigma` on a four-mode truncation.
pub fn quadratic_expectation(x: &CMatrix, sigma: &DensityMatrix, trunc: &FockTruncation) -> f64 {
    (sigma.matrix() * trunc.quadratic_operator(x)).trace().re
}

/// Ensemble-averaged Schrödinger-picture map ℰ(σ) = E_θ[U_θ σ U_θ†] on the
/// four-mode truncation, by quadrature over θ.
pub fn averaged_channel(
    sigma: &DensityMatrix,
    t: f64,
    temperature_ratio: f64,
    order: usize,
    trunc: &FockTruncation,
) -> Result<DensityMatrix> {
    check_ratio(temperature_ratio)?;
    if sigma.dim() != trunc.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} on a truncation of dimension {}",
            sigma.dim(),
            trunc.dim()
        )));
    }
    let mut out = CMatrix::zeros(trunc.dim(), trunc.dim());
    for (theta, w) in thermal_points(temperature_ratio, order)? {
        let u = build_evolution_operator(&rotated_pbs(theta, t)?, trunc)?;
        out += (&u * sigma.matrix() * u.adjoint()).scale(w);
    }
    Ok(DensityMatrix::from_channel_output(out))
}

/// One row of the decoherence-versus-temperature sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommutatorRow {
    pub temperature_ratio: f64,
    pub chi: f64,
    pub commutator: f64,
}

pub fn commutator_sweep(t: f64, ratios: &[f64]) -> Result<Vec<CommutatorRow>> {
    ratios
        .iter()
        .map(|&ratio| {
            let chi = chi(ratio)?;
            Ok(CommutatorRow {
                temperature_ratio: ratio,
                chi,
                commutator: modified_commutator(t, chi)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_abs_diff, random_state_vector, CVector};
    use crate::pbs_channel::rotated_pbs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chi_limits_and_value() {
        assert_eq!(chi(0.0).unwrap(), 0.0);
        assert!((chi(1e6).unwrap() - 0.5).abs() < 1e-15);
        assert!((chi(0.5).unwrap() - 0.316060).abs() < 1e-6);
        assert!(chi(-0.1).is_err());
        let mut prev = 0.0;
        for k in 1..100 {
            let x = chi(k as f64 * 0.05).unwrap();
            assert!(x > prev && x < 0.5);
            prev = x;
        }
    }

    #[test]
    fn gauss_hermite_integrates_moments() {
        let gh = GaussHermite::new(20).unwrap();
        let total: f64 = gh.weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        // E[θ⁴] = 3σ⁴
        let m4 = gh.gaussian_expectation(0.0, 0.7, |x| x.powi(4));
        assert!((m4 - 3.0 * 0.49).abs() < 1e-12);
        let sin2 = GaussHermite::new(64).unwrap().gaussian_expectation(0.0, 0.5, |x| x.sin().powi(2));
        assert!((sin2 - chi(0.5).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_temperature_average_is_the_bare_pbs() {
        let s = averaged_scattering(0.9, 0.0).unwrap();
        let bare = crate::pbs_channel::pbs_scattering(0.9).unwrap();
        assert!(max_abs_diff(&s.to_complex(), bare.matrix()) < 1e-15);
        assert!(s.unitarity_defect() < 1e-15);
    }

    #[test]
    fn infinite_temperature_coefficients_coincide() {
        let t = 0.6;
        let s = averaged_scattering(t, 1e9).unwrap();
        let (ha, hb) = s.mode_coefficients(0);
        let (va, vb) = s.mode_coefficients(1);
        assert!((ha - (1.0 + t) / 2.0).abs() < 1e-15);
        assert!((ha - va).abs() < 1e-15);
        assert!((hb - vb).abs() < 1e-15);
        assert!((hb.abs() - reflection(t) / 2.0).abs() < 1e-15);
        assert!(s.unitarity_defect() > 1e-3);
    }

    #[test]
    fn closed_form_matches_quadrature_average() {
        let (t, ratio) = (0.9, 0.5);
        let closed = averaged_scattering(t, ratio).unwrap();
        let points = GaussHermite::new(64).unwrap().gaussian_points(0.0, ratio);
        let mut avg = DMatrix::<f64>::zeros(4, 4);
        for (theta, w) in points {
            avg += rotated_pbs(theta, t).unwrap().matrix().map(|z| z.re) * w;
        }
        assert!((avg - &closed.matrix).abs().max() < 1e-12);
    }

    #[test]
    fn commutator_matches_coefficients() {
        let t = 0.9;
        let chi = chi(0.5).unwrap();
        let expect = modified_commutator(t, chi).unwrap();
        assert!((expect - 0.956767).abs() < 1e-6);
        let s = averaged_scattering_from_chi(t, chi).unwrap();
        for mode in 0..2 {
            let (ca, cb) = s.mode_coefficients(mode);
            assert!((ca * ca + cb * cb - expect).abs() < 1e-12);
            assert!((s.commutator(mode) - expect).abs() < 1e-12);
        }
        assert_eq!(modified_commutator(1.0, 0.3).unwrap(), 1.0);
        assert_eq!(modified_commutator(0.4, 0.0).unwrap(), 1.0);
        let min = modified_commutator(0.4, 0.5).unwrap();
        assert!((min - (1.0 - 0.6 / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn tensor_factorizes_at_zero_temperature() {
        let tensor = quadratic_transfer(0.7, 0.0, 64).unwrap();
        let s = rotated_pbs(0.0, 0.7).unwrap().into_matrix();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        let want = (s[(i, k)].conj() * s[(j, l)]).re;
                        assert!((tensor.get(i, j, k, l) - want).abs() < 1e-15);
                    }
                }
            }
        }
    }

    fn random_one_photon_state(rng: &mut ChaCha8Rng, trunc: &FockTruncation) -> DensityMatrix {
        // vacuum ancilla: amplitude only on vacuum, a_h and a_v
        let psi = random_state_vector(3, rng);
        let mut full = CVector::zeros(trunc.dim());
        full[0] = psi[0];
        full[1] = psi[1];
        full[2] = psi[2];
        DensityMatrix::from_pure(&full).unwrap()
    }

    #[test]
    fn adjoint_duality_on_quadratic_operators() {
        let trunc = FockTruncation::new(4, 1);
        let (t, ratio) = (0.8, 0.3);
        let tensor = quadratic_transfer(t, ratio, 48).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let sigma = random_one_photon_state(&mut rng, &trunc);
            let x = crate::numerics::random_density_matrix(4, 4, &mut rng).into_matrix();
            let heis = quadratic_expectation(&tensor.evolve(&x), &sigma, &trunc);
            let schr = quadratic_expectation(&x, &averaged_channel(&sigma, t, ratio, 48, &trunc).unwrap(), &trunc);
            assert!((heis - schr).abs() < 1e-12);
        }
    }

    #[test]
    fn photon_number_is_not_amplified() {
        let trunc = FockTruncation::new(4, 1);
        let tensor = quadratic_transfer(0.9, 0.2, 64).unwrap();
        let number = CMatrix::identity(4, 4);
        let mut a_only = CMatrix::zeros(4, 4);
        a_only[(0, 0)] = c(1.0);
        a_only[(1, 1)] = c(1.0);
        assert!(max_abs_diff(&tensor.evolve(&number), &number) < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let sigma = random_one_photon_state(&mut rng, &trunc);
            let before = quadratic_expectation(&a_only, &sigma, &trunc);
            let after = quadratic_expectation(&tensor.evolve(&a_only), &sigma, &trunc);
            assert!(after <= before + 1e-13);
        }
    }

    #[test]
    fn sweep_rows() {
        let rows = commutator_sweep(0.9, &[0.0, 0.5]).unwrap();
        assert_eq!(rows[0].commutator, 1.0);
        assert!((rows[1].chi - 0.316060).abs() < 1e-6);
    }
}

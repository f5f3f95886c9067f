//! Dense complex matrix utilities shared by every simulation module.
//!
//! Everything here works on small (dimension ≤ 32) dense matrices, so the
//! routines favour exactness and simple invariants over asymptotic speed.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Structural tolerance: Hermiticity, trace, probability normalisation.
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Spectral round-trip tolerance (log/exp).
pub const SPECTRAL_TOL: f64 = 1e-9;
/// Unitarity tolerance accepted on input matrices.
pub const UNITARY_TOL: f64 = 1e-10;
/// Smallest eigenvalue still accepted as "positive semidefinite".
pub const EIGEN_FLOOR: f64 = -1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// max |m - m†|.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// max |m†m - I|.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    if n != m.ncols() {
        return f64::INFINITY;
    }
    max_abs_diff(&(m.adjoint() * m), &CMatrix::identity(n, n))
}

pub fn ensure_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn ensure_unitary(m: &CMatrix, tol: f64) -> Result<()> {
    ensure_finite(m)?;
    let defect = unitarity_defect(m);
    if defect > tol {
        Err(Error::NotUnitary { defect })
    } else {
        Ok(())
    }
}

/// (m + m†)/2.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// A unit-trace, Hermitian, positive semidefinite complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Validates all density-matrix invariants.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        ensure_finite(&m)?;
        let herm = hermiticity_defect(&m);
        if herm > STRUCTURAL_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > STRUCTURAL_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_ev = hermitian_eigenvalues(&m)[0];
        if min_ev < EIGEN_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_ev:e}")));
        }
        Ok(Self { m })
    }

    /// Wraps a matrix produced by a trace-preserving channel, re-symmetrising
    /// it to suppress Hermiticity drift. No validation is performed.
    pub fn from_channel_output(m: CMatrix) -> Self {
        Self { m: symmetrize(&m) }
    }

    pub fn from_pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if !(norm.is_finite()) || norm == 0.0 {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = psi.unscale(norm);
        Self::new(&v * v.adjoint())
    }

    /// |k⟩⟨k| in dimension `dim`.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(k, k)] = ONE;
        Self { m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }

    /// Diagonal of ρ as real numbers.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)].re).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.m)[0]
    }

    /// Von Neumann entropy −tr ρ ln ρ in nats.
    pub fn von_neumann_entropy(&self) -> f64 {
        hermitian_eigenvalues(&self.m)
            .into_iter()
            .filter(|&l| l > 0.0)
            .map(|l| -l * l.ln())
            .fold(0.0, |acc, x| acc + x)
    }

    /// U ρ U†.
    pub fn conjugate(&self, u: &CMatrix) -> Self {
        Self::from_channel_output(u * &self.m * u.adjoint())
    }

    /// Re-checks every invariant; useful for strided validation inside
    /// long iterations.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.m.clone()).map(|_| ())
    }
}

/// Probabilities summing to one. Entries within −1e−12 of zero are clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidProbabilities("empty".into()));
        }
        if p.iter().any(|x| !x.is_finite() || *x < -STRUCTURAL_TOL || *x > 1.0 + STRUCTURAL_TOL) {
            return Err(Error::InvalidProbabilities(format!("entries out of [0,1]: {p:?}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::InvalidProbabilities(format!("sum is {total}")));
        }
        Ok(Self(p.into_iter().map(|x| x.clamp(0.0, 1.0)).collect()))
    }

    /// Weighted mixture λp + (1−λ)q.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        if self.0.len() != other.0.len() {
            return Err(Error::DimensionMismatch("mixing vectors of different length".into()));
        }
        Self::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// −Σ pᵢ ln pᵢ in nats, with 0·ln 0 = 0.
pub fn shannon_entropy(p: &ProbabilityVector) -> f64 {
    p.0.iter().filter(|&&x| x > 0.0).fold(0.0, |acc, &x| acc - x * x.ln())
}

/// tr ρ².
pub fn purity(rho: &DensityMatrix) -> f64 {
    // tr(ρ²) = Σ_ij |ρ_ij|² for Hermitian ρ.
    rho.m.iter().map(|z| z.norm_sqr()).sum()
}

/// Which factor of a bipartite A⊗B space is traced out. A is the outer
/// (slow) index of the Kronecker product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of an arbitrary square matrix on A⊗B.
pub fn partial_trace_matrix(m: &CMatrix, dims: (usize, usize), traced: Subsystem) -> Result<CMatrix> {
    let (da, db) = dims;
    if da == 0 || db == 0 || m.nrows() != da * db || m.ncols() != da * db {
        return Err(Error::DimensionMismatch(format!(
            "dims {da}x{db} do not match a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let out = match traced {
        Subsystem::B => CMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()
        }),
        Subsystem::A => CMatrix::from_fn(db, db, |k, l| {
            (0..da).map(|i| m[(i * db + k, i * db + l)]).sum()
        }),
    };
    Ok(out)
}

/// Reduced density matrix after tracing out one factor of A⊗B.
pub fn partial_trace(rho: &DensityMatrix, dims: (usize, usize), traced: Subsystem) -> Result<DensityMatrix> {
    partial_trace_matrix(&rho.m, dims, traced).map(DensityMatrix::from_channel_output)
}

/// Principal logarithm of a unitary matrix.
///
/// Unitary matrices are normal, so the complex Schur form is diagonal and
/// ln S = Q diag(ln λ) Q† with each eigenphase taken in (−π, π].
pub fn matrix_log_unitary(s: &CMatrix) -> Result<CMatrix> {
    ensure_unitary(s, UNITARY_TOL)?;
    let n = s.nrows();
    let schur = Schur::try_new(s.clone(), 1e-15, 10_000).ok_or(Error::NoConvergence)?;
    let (q, t) = schur.unpack();
    let logs = CVector::from_fn(n, |i, _| {
        let lambda = t[(i, i)];
        let mut phase = lambda.arg();
        if phase <= -std::f64::consts::PI + 1e-14 {
            phase = std::f64::consts::PI;
        }
        Complex64::new(lambda.norm().ln(), phase)
    });
    Ok(&q * CMatrix::from_diagonal(&logs) * q.adjoint())
}

/// Matrix exponential (scaling and squaring Padé).
pub fn matrix_exp(m: &CMatrix) -> CMatrix {
    m.exp()
}

pub fn standard_normal_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix with the
/// usual phase correction on R's diagonal.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| standard_normal_complex(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CVector::from_fn(dim, |i, _| {
        let d = r[(i, i)];
        if d.norm() > 0.0 {
            d / d.norm()
        } else {
            ONE
        }
    });
    q * CMatrix::from_diagonal(&phases)
}

/// Random density matrix of the given rank (Ginibre ensemble).
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let rank = rank.clamp(1, dim);
    let g = CMatrix::from_fn(dim, rank, |_, _| standard_normal_complex(rng));
    let w = &g * g.adjoint();
    let tr = w.trace();
    DensityMatrix::from_channel_output(w.unscale(tr.re))
}

/// Random pure state.
pub fn random_state_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(dim, |_, _| standard_normal_complex(rng));
    let n = v.norm();
    v.unscale(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: ρ_A[i,j] = Σ_k ⟨i k| M |j k⟩ evaluated by explicit
    /// basis-vector sandwiches rather than index arithmetic.
    fn trace_b_oracle(m: &CMatrix, da: usize, db: usize) -> CMatrix {
        let mut out = CMatrix::zeros(da, da);
        for i in 0..da {
            for j in 0..da {
                for k in 0..db {
                    let mut bra = CVector::zeros(da);
                    bra[i] = ONE;
                    let mut ket = CVector::zeros(da);
                    ket[j] = ONE;
                    let mut e = CVector::zeros(db);
                    e[k] = ONE;
                    let left = kron(&CMatrix::from_column_slice(da, 1, bra.as_slice()), &CMatrix::from_column_slice(db, 1, e.as_slice()));
                    let right = kron(&CMatrix::from_column_slice(da, 1, ket.as_slice()), &CMatrix::from_column_slice(db, 1, e.as_slice()));
                    out[(i, j)] += (left.adjoint() * m * right)[(0, 0)];
                }
            }
        }
        out
    }

    #[test]
    fn partial_trace_of_product_state_recovers_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_density_matrix(3, 2, &mut rng);
        let b = random_density_matrix(2, 2, &mut rng);
        let ab = DensityMatrix::new(kron(a.matrix(), b.matrix())).unwrap();
        let ra = partial_trace(&ab, (3, 2), Subsystem::B).unwrap();
        let rb = partial_trace(&ab, (3, 2), Subsystem::A).unwrap();
        assert!(max_abs_diff(ra.matrix(), a.matrix()) < 1e-14);
        assert!(max_abs_diff(rb.matrix(), b.matrix()) < 1e-14);
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let s = 1.0 / 2f64.sqrt();
        let psi = CVector::from_vec(vec![c(s), ZERO, ZERO, c(s)]);
        let bell = DensityMatrix::from_pure(&psi).unwrap();
        let ra = partial_trace(&bell, (2, 2), Subsystem::B).unwrap();
        assert!(max_abs_diff(ra.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
    }

    #[test]
    fn partial_trace_matches_sandwich_oracle_after_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let rho = random_density_matrix(2, 2, &mut rng);
            let eta = random_density_matrix(2, 1, &mut rng);
            let u = random_unitary(4, &mut rng);
            let joint = DensityMatrix::new(kron(rho.matrix(), eta.matrix())).unwrap().conjugate(&u);
            let fast = partial_trace(&joint, (2, 2), Subsystem::B).unwrap();
            let slow = trace_b_oracle(joint.matrix(), 2, 2);
            assert!(max_abs_diff(fast.matrix(), &slow) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let rho = DensityMatrix::maximally_mixed(6);
        assert!(matches!(
            partial_trace(&rho, (4, 2), Subsystem::B),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn log_of_identity_is_zero() {
        let l = matrix_log_unitary(&CMatrix::identity(4, 4)).unwrap();
        assert!(max_abs(&l) < 1e-14);
    }

    #[test]
    fn log_of_diagonal_phases() {
        for &phi in &[0.3, -1.2, 2.9, -3.1] {
            let s = CMatrix::from_diagonal(&CVector::from_vec(vec![
                Complex64::from_polar(1.0, phi),
                Complex64::from_polar(1.0, -phi),
            ]));
            let l = matrix_log_unitary(&s).unwrap();
            let expected = CMatrix::from_diagonal(&CVector::from_vec(vec![
                Complex64::new(0.0, phi),
                Complex64::new(0.0, -phi),
            ]));
            assert!(max_abs_diff(&l, &expected) < 1e-12, "phi={phi}");
        }
    }

    #[test]
    fn log_rejects_non_unitary() {
        let mut m = CMatrix::identity(3, 3);
        m[(0, 0)] = c(1.1);
        assert!(matches!(matrix_log_unitary(&m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn log_round_trips_random_4x4_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_unitary(4, &mut rng);
        let l = matrix_log_unitary(&s).unwrap();
        assert!(max_abs_diff(&matrix_exp(&l), &s) < SPECTRAL_TOL);
        assert!(max_abs_diff(&l, &(-l.adjoint())) < SPECTRAL_TOL);
    }

    #[test]
    fn log_handles_degenerate_spectrum() {
        // Real rotation in a 2D block embedded next to a degenerate identity block.
        let phi: f64 = 0.7;
        let mut s = CMatrix::identity(4, 4);
        s[(1, 1)] = c(phi.cos());
        s[(1, 3)] = c(phi.sin());
        s[(3, 1)] = c(-phi.sin());
        s[(3, 3)] = c(phi.cos());
        let l = matrix_log_unitary(&s).unwrap();
        assert!(max_abs_diff(&matrix_exp(&l), &s) < 1e-12);
        assert!((l[(1, 3)].re - phi).abs() < 1e-12);
        assert!(l[(0, 0)].norm() < 1e-12 && l[(2, 2)].norm() < 1e-12);
    }

    #[test]
    fn shannon_examples() {
        let e = |v: Vec<f64>| shannon_entropy(&ProbabilityVector::new(v).unwrap());
        assert_eq!(e(vec![1.0, 0.0, 0.0]), 0.0);
        assert!((e(vec![1.0 / 3.0; 3]) - 3f64.ln()).abs() < 1e-15);
        assert!((e(vec![0.5, 0.25, 0.25]) - 1.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn probability_vector_rejects_bad_input() {
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbabilityVector::new(vec![]).is_err());
    }

    #[test]
    fn purity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pure = DensityMatrix::from_pure(&random_state_vector(5, &mut rng)).unwrap();
        assert!((purity(&pure) - 1.0).abs() < 1e-14);
        assert!((purity(&DensityMatrix::maximally_mixed(4)) - 0.25).abs() < 1e-15);
        let d = DensityMatrix::new(CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.7), c(0.3)]))).unwrap();
        assert!((purity(&d) - 0.58).abs() < 1e-15);
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = CMatrix::identity(2, 2).unscale(2.0);
        m[(0, 1)] = Complex64::new(0.0, 0.1);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 0)] = Complex64::new(0.0, -0.1);
        assert!(DensityMatrix::new(m).is_ok());
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.2), c(-0.2)]));
        assert!(DensityMatrix::new(neg).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(2, 2)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn partial_trace_preserves_trace_and_positivity(seed in any::<u64>(), da in 1usize..=4, db in 1usize..=4, rank in 1usize..=16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_matrix(da * db, rank, &mut rng);
            for traced in [Subsystem::A, Subsystem::B] {
                let r = partial_trace(&rho, (da, db), traced).unwrap();
                prop_assert!((r.trace() - 1.0).abs() < 1e-12);
                prop_assert!(r.min_eigenvalue() >= EIGEN_FLOOR);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn log_exp_round_trip(seed in any::<u64>(), dim in 1usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_unitary(dim, &mut rng);
            let l = matrix_log_unitary(&s).unwrap();
            prop_assert!(max_abs_diff(&matrix_exp(&l), &s) < SPECTRAL_TOL);
            // and the other direction on a principal-branch generator
            let h = {
                let g = CMatrix::from_fn(dim, dim, |_, _| standard_normal_complex(&mut rng));
                symmetrize(&g).scale(0.4)
            };
            let a = h.map(|z| z * I);
            let back = matrix_log_unitary(&matrix_exp(&a)).unwrap();
            // spectral radius of `a` stays below π for these scales with overwhelming probability
            let radius = hermitian_eigenvalues(&h).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if radius < 3.0 {
                prop_assert!(max_abs_diff(&back, &a) < SPECTRAL_TOL);
            }
        }

        #[test]
        fn shannon_is_concave(a in prop::collection::vec(0.0f64..1.0, 4), b in prop::collection::vec(0.0f64..1.0, 4), lambda in 0.0f64..=1.0) {
            let norm = |v: Vec<f64>| {
                let s: f64 = v.iter().sum::<f64>() + 1e-9;
                let mut p: Vec<f64> = v.iter().map(|x| (x + 1e-9 / 4.0) / s).collect();
                let tot: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= tot);
                ProbabilityVector::new(p).unwrap()
            };
            let p = norm(a);
            let q = norm(b);
            let mix = p.mix(&q, lambda).unwrap();
            prop_assert!(shannon_entropy(&mix) >= lambda * shannon_entropy(&p) + (1.0 - lambda) * shannon_entropy(&q) - 1e-12);
        }
    }
}

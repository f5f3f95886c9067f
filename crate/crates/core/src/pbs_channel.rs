//! Quantum polarizing beamsplitter.
//!
//! Modes are always ordered `(a_h, a_v, b_h, b_v)`: port `a` carries the
//! signal, port `b` the environment ancilla. A scattering matrix `S` acts on
//! annihilation operators, `a_k' = Σ_j S_kj a_j`, and the Schrödinger-picture
//! evolution operator on a truncated Fock space is
//! `U = exp(Σ_ij ln(S)_ij a_i† a_j)`.

use std::collections::HashMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::{
    c, ensure_unitary, matrix_exp, matrix_log_unitary, CMatrix, DensityMatrix, UNITARY_TOL, ZERO,
};

pub const MODE_AH: usize = 0;
pub const MODE_AV: usize = 1;
pub const MODE_BH: usize = 2;
pub const MODE_BV: usize = 3;

/// Largest Fock-space dimension the evolution-operator builder accepts by
/// default: four modes with at most two photons.
pub const DEFAULT_DIM_CAP: usize = 15;

/// A 4×4 unitary acting on `(a_h, a_v, b_h, b_v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix(CMatrix);

impl ScatteringMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.shape() != (4, 4) {
            return Err(Error::DimensionMismatch(format!(
                "scattering matrix must be 4x4, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        ensure_unitary(&m, UNITARY_TOL)?;
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(CMatrix::identity(4, 4))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

fn check_transmission(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) || !t.is_finite() {
        return Err(Error::OutOfRange(format!("transmission t = {t} must lie in [0, 1]")));
    }
    Ok(())
}

/// Reflection amplitude, always the non-negative root of 1 − t².
pub fn reflection(t: f64) -> f64 {
    (1.0 - t * t).max(0.0).sqrt()
}

/// PBS transmitting h and mixing the v modes of both ports with amplitude
/// `t` (transmitted) and `r = √(1−t²)` (reflected).
pub fn pbs_scattering(t: f64) -> Result<ScatteringMatrix> {
    check_transmission(t)?;
    let r = reflection(t);
    let mut m = CMatrix::zeros(4, 4);
    m[(MODE_AH, MODE_AH)] = c(1.0);
    m[(MODE_AV, MODE_AV)] = c(t);
    m[(MODE_AV, MODE_BV)] = c(r);
    m[(MODE_BH, MODE_BH)] = c(1.0);
    m[(MODE_BV, MODE_AV)] = c(-r);
    m[(MODE_BV, MODE_BV)] = c(t);
    ScatteringMatrix::new(m)
}

/// Block-diagonal polarization rotation R_θ acting identically on both ports.
pub fn polarization_rotation(theta: f64) -> CMatrix {
    let (s, co) = theta.sin_cos();
    let mut m = CMatrix::zeros(4, 4);
    for port in [0, 2] {
        m[(port, port)] = c(co);
        m[(port, port + 1)] = c(-s);
        m[(port + 1, port)] = c(s);
        m[(port + 1, port + 1)] = c(co);
    }
    m
}

/// R_θ S R_θ†.
pub fn rotate_scattering(s: &ScatteringMatrix, theta: f64) -> ScatteringMatrix {
    let r = polarization_rotation(theta);
    ScatteringMatrix(&r * &s.0 * r.adjoint())
}

/// PBS with transmission axis rotated by θ.
pub fn rotated_pbs(theta: f64, t: f64) -> Result<ScatteringMatrix> {
    Ok(rotate_scattering(&pbs_scattering(t)?, theta))
}

/// Fock space of `n_modes` bosonic modes holding at most `max_total_photons`.
///
/// Basis states are ordered by total photon number, and within one photon
/// number in descending lexicographic order of the occupation tuple, so the
/// one-photon block lists `e_0, e_1, …` in mode order. For two modes and one
/// photon this is `|0⟩, |h⟩, |v⟩`.
#[derive(Debug, Clone)]
pub struct FockTruncation {
    n_modes: usize,
    max_total_photons: usize,
    basis: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    blocks: Vec<Range<usize>>,
}

fn compositions(total: usize, modes: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if modes == 1 {
        prefix.push(total as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first as u8);
        compositions(total - first, modes - 1, prefix, out);
        prefix.pop();
    }
}

impl FockTruncation {
    pub fn new(n_modes: usize, max_total_photons: usize) -> Self {
        assert!(n_modes >= 1, "need at least one mode");
        let mut basis = Vec::new();
        let mut blocks = Vec::new();
        for n in 0..=max_total_photons {
            let start = basis.len();
            compositions(n, n_modes, &mut Vec::with_capacity(n_modes), &mut basis);
            blocks.push(start..basis.len());
        }
        let index = basis.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
        Self {
            n_modes,
            max_total_photons,
            basis,
            index,
            blocks,
        }
    }

    /// Two-mode (h, v) space whose dimension is `dim`, if `dim` is one of
    /// 1, 3, 6, 10, …
    pub fn two_mode_for_dim(dim: usize) -> Result<Self> {
        let mut m = 0;
        while (m + 1) * (m + 2) / 2 < dim {
            m += 1;
        }
        if (m + 1) * (m + 2) / 2 != dim {
            return Err(Error::DimensionMismatch(format!(
                "dimension {dim} is not that of a two-mode truncated Fock space"
            )));
        }
        Ok(Self::new(2, m))
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn max_total_photons(&self) -> usize {
        self.max_total_photons
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<u8>] {
        &self.basis
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Index range of the states with exactly `n` photons.
    pub fn block(&self, n: usize) -> Range<usize> {
        self.blocks[n].clone()
    }

    pub fn total_photons(&self, idx: usize) -> usize {
        self.basis[idx].iter().map(|&x| x as usize).sum()
    }

    /// Matrix of a_mode. Exact on the truncation: lowering never leaves it.
    pub fn annihilation(&self, mode: usize) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for (col, occ) in self.basis.iter().enumerate() {
            let n = occ[mode];
            if n == 0 {
                continue;
            }
            let mut lowered = occ.clone();
            lowered[mode] -= 1;
            let row = self.index[&lowered];
            m[(row, col)] = c((n as f64).sqrt());
        }
        m
    }

    /// Matrix of a_i† a_j, built directly so that number-conserving
    /// operators are exact on every photon-number block.
    pub fn hopping(&self, i: usize, j: usize) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for (col, occ) in self.basis.iter().enumerate() {
            let nj = occ[j];
            if nj == 0 {
                continue;
            }
            let mut out = occ.clone();
            out[j] -= 1;
            let ni = out[i];
            out[i] += 1;
            let row = self.index[&out];
            m[(row, col)] = c(((nj as f64) * (ni as f64 + 1.0)).sqrt());
        }
        m
    }

    /// Σ_ij X_ij a_i† a_j.
    pub fn quadratic_operator(&self, coeffs: &CMatrix) -> CMatrix {
        assert_eq!(coeffs.shape(), (self.n_modes, self.n_modes));
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.n_modes {
            for j in 0..self.n_modes {
                let x = coeffs[(i, j)];
                if x != ZERO {
                    m += self.hopping(i, j) * x;
                }
            }
        }
        m
    }

    /// Total photon number operator.
    pub fn number_operator(&self) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_fn(self.dim(), |i, _| {
            c(self.total_photons(i) as f64)
        }))
    }
}

/// U = exp(Σ_ij ln(S)_ij a_i† a_j) with the default dimension cap.
pub fn build_evolution_operator(s: &ScatteringMatrix, trunc: &FockTruncation) -> Result<CMatrix> {
    build_evolution_operator_capped(s, trunc, DEFAULT_DIM_CAP)
}

pub fn build_evolution_operator_capped(
    s: &ScatteringMatrix,
    trunc: &FockTruncation,
    cap: usize,
) -> Result<CMatrix> {
    if trunc.n_modes() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "PBS evolution needs 4 modes, truncation has {}",
            trunc.n_modes()
        )));
    }
    if trunc.dim() > cap {
        return Err(Error::TruncationCap { dim: trunc.dim(), cap });
    }
    let log_s = matrix_log_unitary(s.matrix())?;
    Ok(matrix_exp(&trunc.quadratic_operator(&log_s)))
}

/// S_h = a_h† b_h − b_h† a_h.
pub fn generator_h(trunc: &FockTruncation) -> CMatrix {
    trunc.hopping(MODE_AH, MODE_BH) - trunc.hopping(MODE_BH, MODE_AH)
}

/// S_v = a_v† b_v − b_v† a_v.
pub fn generator_v(trunc: &FockTruncation) -> CMatrix {
    trunc.hopping(MODE_AV, MODE_BV) - trunc.hopping(MODE_BV, MODE_AV)
}

/// S_c = ½(b_v† a_h + b_h† a_v − a_v† b_h − a_h† b_v).
pub fn generator_c(trunc: &FockTruncation) -> CMatrix {
    (trunc.hopping(MODE_BV, MODE_AH) + trunc.hopping(MODE_BH, MODE_AV)
        - trunc.hopping(MODE_AV, MODE_BH)
        - trunc.hopping(MODE_AH, MODE_BV))
    .scale(0.5)
}

/// The PBS generator split into its three polarization channels.
#[derive(Debug, Clone)]
pub struct GeneratorDecomposition {
    pub coeff_h: f64,
    pub coeff_v: f64,
    pub coeff_c: f64,
    /// φ·[sin²θ S_h + cos²θ S_v + sin 2θ S_c] on the truncation.
    pub generator: CMatrix,
}

/// Generator of the rotated PBS with transmission `t = cos φ`.
pub fn generator_decomposition(theta: f64, phi: f64, trunc: &FockTruncation) -> GeneratorDecomposition {
    let (s, co) = theta.sin_cos();
    let coeff_h = phi * s * s;
    let coeff_v = phi * co * co;
    let coeff_c = phi * (2.0 * theta).sin();
    let generator =
        generator_h(trunc).scale(coeff_h) + generator_v(trunc).scale(coeff_v) + generator_c(trunc).scale(coeff_c);
    GeneratorDecomposition {
        coeff_h,
        coeff_v,
        coeff_c,
        generator,
    }
}

/// Normalised generator H_θ = sin²θ S_h + cos²θ S_v + sin 2θ S_c.
pub fn unit_generator(theta: f64, trunc: &FockTruncation) -> CMatrix {
    generator_decomposition(theta, 1.0, trunc).generator
}

/// Embedding of a-port ⊗ b-port states into the four-mode truncation and
/// the bookkeeping needed to trace out port b again.
struct PortLayout {
    joint: FockTruncation,
    a_in: FockTruncation,
    b_in: FockTruncation,
    a_out: FockTruncation,
}

impl PortLayout {
    fn new(dim_a: usize, dim_b: usize, cap: usize) -> Result<Self> {
        let a_in = FockTruncation::two_mode_for_dim(dim_a)?;
        let b_in = FockTruncation::two_mode_for_dim(dim_b)?;
        let total = a_in.max_total_photons() + b_in.max_total_photons();
        let joint = FockTruncation::new(4, total);
        if joint.dim() > cap {
            return Err(Error::TruncationCap { dim: joint.dim(), cap });
        }
        let a_out = FockTruncation::new(2, total);
        Ok(Self {
            joint,
            a_in,
            b_in,
            a_out,
        })
    }

    fn joint_index(&self, a: &[u8], b: &[u8]) -> usize {
        let occ = [a[0], a[1], b[0], b[1]];
        self.joint.index_of(&occ).expect("joint occupation inside truncation")
    }

    fn embed(&self, rho: &CMatrix, eta: &CMatrix) -> CMatrix {
        let mut sigma = CMatrix::zeros(self.joint.dim(), self.joint.dim());
        let a = self.a_in.basis();
        let b = self.b_in.basis();
        for (ia, oa) in a.iter().enumerate() {
            for (ja, pa) in a.iter().enumerate() {
                let r = rho[(ia, ja)];
                if r == ZERO {
                    continue;
                }
                for (ib, ob) in b.iter().enumerate() {
                    for (jb, pb) in b.iter().enumerate() {
                        let e = eta[(ib, jb)];
                        if e == ZERO {
                            continue;
                        }
                        sigma[(self.joint_index(oa, ob), self.joint_index(pa, pb))] = r * e;
                    }
                }
            }
        }
        sigma
    }

    /// Trace over port b, with the result on the a-port truncation that can
    /// hold every photon of the joint space.
    fn trace_b(&self, sigma: &CMatrix) -> CMatrix {
        let basis = self.joint.basis();
        let mut out = CMatrix::zeros(self.a_out.dim(), self.a_out.dim());
        for (p, op) in basis.iter().enumerate() {
            let ap = self.a_out.index_of(&op[0..2]).expect("a occupation fits");
            for (q, oq) in basis.iter().enumerate() {
                if op[2..4] != oq[2..4] {
                    continue;
                }
                let aq = self.a_out.index_of(&oq[0..2]).expect("a occupation fits");
                out[(ap, aq)] += sigma[(p, q)];
            }
        }
        out
    }
}

/// F_θ(ρ) = tr_b{U_θ (ρ ⊗ η) U_θ†}.
///
/// `rho` lives on the two-mode Fock space of port a and `eta` on that of
/// port b (dimension 1 for a truncated vacuum, 3 for ≤1 photon, …). The
/// output is expressed on port a with room for all photons of the input, so
/// it has the same dimension as `rho` whenever `eta` is the vacuum.
pub fn pbs_cptp(rho: &DensityMatrix, theta: f64, t: f64, eta: &DensityMatrix) -> Result<DensityMatrix> {
    pbs_cptp_capped(rho, theta, t, eta, DEFAULT_DIM_CAP)
}

pub fn pbs_cptp_capped(
    rho: &DensityMatrix,
    theta: f64,
    t: f64,
    eta: &DensityMatrix,
    cap: usize,
) -> Result<DensityMatrix> {
    let layout = PortLayout::new(rho.dim(), eta.dim(), cap)?;
    let u = build_evolution_operator_capped(&rotated_pbs(theta, t)?, &layout.joint, cap)?;
    let sigma = layout.embed(rho.matrix(), eta.matrix());
    let evolved = &u * sigma * u.adjoint();
    Ok(DensityMatrix::from_channel_output(layout.trace_b(&evolved)))
}

/// tr_b[H_θ, ρ ⊗ η], the first-order generator of the layered dynamics in
/// the small-φ limit.
pub fn first_order_generator(rho: &DensityMatrix, theta: f64, eta: &DensityMatrix) -> Result<CMatrix> {
    let layout = PortLayout::new(rho.dim(), eta.dim(), DEFAULT_DIM_CAP)?;
    let h = unit_generator(theta, &layout.joint);
    let sigma = layout.embed(rho.matrix(), eta.matrix());
    let commutator = &h * &sigma - &sigma * &h;
    Ok(layout.trace_b(&commutator))
}

/// Vacuum of one two-mode port as a 1×1 density matrix.
pub fn port_vacuum() -> DensityMatrix {
    DensityMatrix::basis_state(1, 0)
}

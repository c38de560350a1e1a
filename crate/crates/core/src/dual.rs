//! Recovered, finite-element equilibrated stress from a stress POD basis.
//!
//! `σ̂(μ) = Σ_i α̃_i φ̃_i + σ^{h,p}(μ)` with `α̃` minimising
//! `‖σ̂ - σ^h(μ)‖_C(μ)`. The stress modes balance zero load against every
//! test field vanishing on the boundary, so the truth fluctuation drops out
//! of the normal equations and only the lifting enters the right-hand side.

use log::warn;
use nalgebra::{DMatrix, Vector3};

use crate::dense::{compensated_sum, PivotedCholesky};
use crate::error::{Error, Result};
use crate::fem::{element_strains, StressField};
use crate::parameter::{AffineCoefficients, ParameterPoint, N_DIRICHLET_TERMS, N_MATERIAL_TERMS};
use crate::pod::PodBasis;
use crate::truth::TruthModel;

/// Condition estimate above which trailing stress modes are dropped.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct DualReducedModel {
    pub basis: PodBasis,
    /// `D(μ0) : ε(ψ̃_t)` per load factor.
    pub particular_factors: Vec<StressField>,
    /// `[k][i][j] = ∫ φ̃_j : C̄_k : φ̃_i`.
    pub compliance_blocks: Vec<DMatrix<f64>>,
    /// `[w][j] = ∫ ε(ψ_w) : φ̃_j`.
    pub lifting_coupling: DMatrix<f64>,
    /// `[k][t][j] = -∫ φ̃_j : C̄_k : σ̄^p_t`.
    pub particular_blocks: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredStress {
    pub mu: ParameterPoint,
    pub alpha_tilde: Vec<f64>,
    /// Modes actually used after the conditioning guard.
    pub n_phi_stress: usize,
}

pub fn precompute_dual_operators(truth: &TruthModel, basis: PodBasis) -> Result<DualReducedModel> {
    let mesh = truth.mesh();
    let n = basis.len();
    let ne = mesh.triangle_count();
    let modes: Vec<Vec<Vector3<f64>>> = basis
        .modes
        .iter()
        .map(|m| {
            (0..ne)
                .map(|e| Vector3::new(m[3 * e], m[3 * e + 1], m[3 * e + 2]))
                .collect()
        })
        .collect();
    let areas: Vec<f64> = (0..ne).map(|e| mesh.area(e)).collect();
    let factors = truth.compliance_factors();
    let particular = truth.particular_factors().to_vec();

    let mut compliance_blocks = Vec::with_capacity(N_MATERIAL_TERMS);
    let mut particular_blocks = Vec::with_capacity(N_MATERIAL_TERMS);
    for k in 0..N_MATERIAL_TERMS {
        let c = &factors[k];
        let weighted = |a: &[Vector3<f64>], b: &[Vector3<f64>]| -> f64 {
            compensated_sum((0..ne).map(|e| areas[e] * a[e].dot(&(c[e] * b[e]))))
        };
        let mut kk = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = weighted(&modes[i], &modes[j]);
                kk[(i, j)] = v;
                kk[(j, i)] = v;
            }
        }
        compliance_blocks.push(kk);
        particular_blocks.push(DMatrix::from_fn(particular.len(), n, |t, j| {
            -weighted(&modes[j], particular[t].values())
        }));
    }
    let lift_strains: Vec<Vec<Vector3<f64>>> = truth
        .liftings()
        .iter()
        .map(|l| element_strains(mesh, l.values()))
        .collect();
    let lifting_coupling = DMatrix::from_fn(N_DIRICHLET_TERMS, n, |w, j| {
        compensated_sum((0..ne).map(|e| areas[e] * lift_strains[w][e].dot(&modes[j][e])))
    });
    Ok(DualReducedModel {
        basis,
        particular_factors: particular,
        compliance_blocks,
        lifting_coupling,
        particular_blocks,
    })
}

impl DualReducedModel {
    pub fn max_modes(&self) -> usize {
        self.basis.len()
    }

    /// `K̃^r(μ) = Σ_k γc_k K̃^r_k` on the leading `n` modes.
    pub fn reduced_matrix(&self, c: &AffineCoefficients, n: usize) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(n, n);
        for (block, g) in self.compliance_blocks.iter().zip(c.gamma_c) {
            k += block.view((0, 0), (n, n)) * g;
        }
        k
    }

    /// `Σ_w γw_w ∫ ε(ψ_w) : φ̃_j - Σ_k γc_k Σ_t γ_t ∫ φ̃_j : C̄_k : σ̄^p_t`.
    pub fn reduced_rhs(&self, c: &AffineCoefficients, n: usize) -> Vec<f64> {
        let lw = c.load_weights();
        (0..n)
            .map(|j| {
                let lift: f64 = (0..N_DIRICHLET_TERMS)
                    .map(|w| c.gamma_w[w] * self.lifting_coupling[(w, j)])
                    .sum();
                let part: f64 = self
                    .particular_blocks
                    .iter()
                    .zip(c.gamma_c)
                    .map(|(b, gc)| {
                        gc * lw
                            .iter()
                            .enumerate()
                            .map(|(t, g)| g * b[(t, j)])
                            .sum::<f64>()
                    })
                    .sum();
                lift + part
            })
            .collect()
    }

    /// Solves the normal equations on the leading `n_phi_stress` modes,
    /// dropping trailing modes while the system is too ill-conditioned.
    pub fn solve_recovered_stress(
        &self,
        mu: &ParameterPoint,
        c: &AffineCoefficients,
        n_phi_stress: usize,
    ) -> Result<RecoveredStress> {
        if n_phi_stress == 0 || n_phi_stress > self.max_modes() {
            return Err(Error::RankDeficiency {
                requested: n_phi_stress,
                rank: self.max_modes(),
            });
        }
        let mut n = n_phi_stress;
        loop {
            let k = self.reduced_matrix(c, n);
            let attempt = PivotedCholesky::new(&k);
            match attempt {
                Ok(chol) if chol.condition_estimate() <= CONDITION_LIMIT => {
                    let alpha_tilde = chol.solve(&self.reduced_rhs(c, n));
                    if alpha_tilde.iter().any(|v| !v.is_finite()) {
                        return Err(Error::ReducedSingularity {
                            condition: chol.condition_estimate(),
                        });
                    }
                    return Ok(RecoveredStress {
                        mu: *mu,
                        alpha_tilde,
                        n_phi_stress: n,
                    });
                }
                other => {
                    let condition = match other {
                        Ok(chol) => chol.condition_estimate(),
                        Err(Error::ReducedSingularity { condition }) => condition,
                        Err(e) => return Err(e),
                    };
                    if n == 1 {
                        return Err(Error::ReducedSingularity { condition });
                    }
                    warn!(
                        "stress system at mu = {:?} has condition {condition:.3e}; using {} of {} modes",
                        mu.0,
                        n - 1,
                        n_phi_stress
                    );
                    n -= 1;
                }
            }
        }
    }

    /// `σ^{h,p}(μ)` from the stored factors.
    pub fn particular_stress(&self, c: &AffineCoefficients, triangle_count: usize) -> StressField {
        let mut s = StressField::zeros(triangle_count);
        for (f, g) in self.particular_factors.iter().zip(c.load_weights()) {
            s.axpy(g, f);
        }
        s
    }

    /// Full-dimension `σ̂`.
    pub fn reconstruct(
        &self,
        c: &AffineCoefficients,
        stress: &RecoveredStress,
        triangle_count: usize,
    ) -> StressField {
        crate::instrument::record_field_op();
        let mut flat = self.particular_stress(c, triangle_count).to_flat();
        for (phi, a) in self.basis.modes.iter().zip(&stress.alpha_tilde) {
            for (s, p) in flat.iter_mut().zip(phi) {
                *s += a * p;
            }
        }
        StressField::from_flat(&flat)
    }
}

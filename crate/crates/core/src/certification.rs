//! Error bounds, effectivities, the homogenisation quantity of interest and
//! interval bounds on the effective moduli.
//!
//! The upper bound is the constitutive relation error
//! `‖D(μ):ε(u^r) - σ̂‖_C(μ)`. Online it is evaluated from triangular factors
//! of the per-phase cross-Gram matrix of the dictionary
//! `{D^mat:ε(φ_i), D^mat:ε(ψ_w), φ̃_i, σ̄^p_t}`: on each phase both tensors
//! are scalar multiples of the matrix tensors, so the error field is
//! `X_p c_p` for a phase-wise coefficient vector and
//! `ν² = Σ_p s_p ‖R_p c_p‖²` with `X_p = Q_p R_p`. Working with `R_p`
//! instead of `R_pᵀ R_p` avoids the cancellation of a Gram contraction when
//! the bound is small.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::dense::compensated_sum;
use crate::dual::{DualReducedModel, RecoveredStress};
use crate::error::{Error, Result};
use crate::fem::{element_strains, element_stress, DisplacementField, StressField};
use crate::mesh::Phase;
use crate::parameter::{macro_strain, AffineCoefficients, ParameterPoint, N_DIRICHLET_TERMS};
use crate::primal::{PrimalReducedModel, ReducedSolution};
use crate::truth::TruthModel;

/// Relative size of `‖ẽ‖_D` below which the enrichment is considered empty.
pub const DEGENERATE_ENRICHMENT: f64 = 1e-14;
/// Relative size of the true error below which effectivities are undefined.
pub const NEGLIGIBLE_ERROR: f64 = 1e-14;

/// Triangular factors of the per-phase cross-Gram matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct CreFactor {
    pub n_modes: usize,
    pub n_lifts: usize,
    pub n_stress_modes: usize,
    pub n_loads: usize,
    /// Matrix phase, then inclusion phase; `min(rows, m) × m` with
    /// `m = n_modes + n_lifts + n_stress_modes + n_loads`.
    pub phase_factors: Vec<DMatrix<f64>>,
}

impl CreFactor {
    pub fn width(&self) -> usize {
        self.n_modes + self.n_lifts + self.n_stress_modes + self.n_loads
    }

    fn coefficients(
        &self,
        c: &AffineCoefficients,
        h: f64,
        alpha: &[f64],
        alpha_tilde: &[f64],
    ) -> DVector<f64> {
        let d = c.elasticity_scale(h);
        let mut v = DVector::zeros(self.width());
        for (i, a) in alpha.iter().enumerate() {
            v[i] = d * a;
        }
        let o = self.n_modes;
        for w in 0..self.n_lifts {
            v[o + w] = d * c.gamma_w[w];
        }
        let o = o + self.n_lifts;
        for (i, a) in alpha_tilde.iter().enumerate() {
            v[o + i] = -a;
        }
        let o = o + self.n_stress_modes;
        for (t, g) in c.load_weights().iter().enumerate() {
            v[o + t] = -g;
        }
        v
    }
}

/// Builds the phase factors by Householder QR of the weighted dictionary.
pub fn build_cre_factor(
    truth: &TruthModel,
    primal: &PrimalReducedModel,
    dual: &DualReducedModel,
) -> Result<CreFactor> {
    let mesh = truth.mesh();
    let ne = mesh.triangle_count();
    let d_mat = truth.matrix_elasticity();
    let chol = truth.matrix_compliance().cholesky().ok_or_else(|| {
        Error::InvalidMaterial("matrix compliance is not positive definite".into())
    })?;
    let lt = chol.l().transpose();

    let mut columns: Vec<Vec<Vector3<f64>>> = Vec::new();
    for m in &primal.basis.modes {
        columns.push(
            element_strains(mesh, m)
                .into_iter()
                .map(|e| d_mat * e)
                .collect(),
        );
    }
    for l in &primal.lifting_fields {
        columns.push(
            element_strains(mesh, l.values())
                .into_iter()
                .map(|e| d_mat * e)
                .collect(),
        );
    }
    for m in &dual.basis.modes {
        columns.push(
            (0..ne)
                .map(|e| Vector3::new(m[3 * e], m[3 * e + 1], m[3 * e + 2]))
                .collect(),
        );
    }
    for p in &dual.particular_factors {
        columns.push(p.values().to_vec());
    }
    let width = columns.len();

    let mut phase_factors = Vec::with_capacity(2);
    for phase in [Phase::Matrix, Phase::Inclusion] {
        let elems: Vec<usize> = (0..ne).filter(|&e| mesh.phases()[e] == phase).collect();
        let rows = 3 * elems.len();
        if rows == 0 {
            phase_factors.push(DMatrix::zeros(0, width));
            continue;
        }
        let mut x = DMatrix::zeros(rows, width);
        for (col, field) in columns.iter().enumerate() {
            for (r, &e) in elems.iter().enumerate() {
                let v = lt * field[e] * mesh.area(e).sqrt();
                x[(3 * r, col)] = v[0];
                x[(3 * r + 1, col)] = v[1];
                x[(3 * r + 2, col)] = v[2];
            }
        }
        phase_factors.push(x.qr().r());
    }
    Ok(CreFactor {
        n_modes: primal.basis.len(),
        n_lifts: primal.lifting_fields.len(),
        n_stress_modes: dual.basis.len(),
        n_loads: dual.particular_factors.len(),
        phase_factors,
    })
}

/// `ν_up` from the phase factors; `O(m²)` work.
pub fn upper_bound_fast(
    factor: &CreFactor,
    c: &AffineCoefficients,
    alpha: &[f64],
    alpha_tilde: &[f64],
) -> f64 {
    let mut s = 0.0;
    for (p, r) in factor.phase_factors.iter().enumerate() {
        if r.nrows() == 0 {
            continue;
        }
        let h = if p == 0 { 0.0 } else { 1.0 };
        let v = r * factor.coefficients(c, h, alpha, alpha_tilde);
        s += c.compliance_scale(h) * v.norm_squared();
    }
    s.max(0.0).sqrt()
}

/// `ν_up` by full-field quadrature.
pub fn upper_bound_reference(
    truth: &TruthModel,
    primal: &PrimalReducedModel,
    dual: &DualReducedModel,
    c: &AffineCoefficients,
    alpha: &[f64],
    stress: &RecoveredStress,
) -> Result<f64> {
    let ur = primal.reconstruct(c, alpha);
    let sr = element_stress(truth.mesh(), &ur, &truth.elasticity(c))?;
    let sh = dual.reconstruct(c, stress, truth.mesh().triangle_count());
    truth.stress_norm(&sr.sub(&sh), c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub nu_low: f64,
    /// `‖u^2r - u^r‖_D(μ)`.
    pub enrichment_norm: f64,
    /// `‖u^2r‖_D(μ)`.
    pub enriched_norm: f64,
}

fn enrichment(reduced: &ReducedSolution, enriched: &ReducedSolution) -> Vec<f64> {
    enriched
        .alpha
        .iter()
        .enumerate()
        .map(|(i, a)| a - reduced.alpha.get(i).copied().unwrap_or(0.0))
        .collect()
}

/// `ν_low = |R(ẽ)| / ‖ẽ‖_D` with `ẽ = u^2r - u^r`, from reduced blocks.
pub fn lower_bound_fast(
    primal: &PrimalReducedModel,
    c: &AffineCoefficients,
    reduced: &ReducedSolution,
    enriched: &ReducedSolution,
) -> LowerBound {
    let delta = enrichment(reduced, enriched);
    let zero = [0.0; N_DIRICHLET_TERMS];
    let e2 = primal
        .energy_product(c, (&delta, &zero), (&delta, &zero))
        .max(0.0);
    let enriched_norm = primal.energy_squared(c, &enriched.alpha).max(0.0).sqrt();
    let enrichment_norm = e2.sqrt();
    let nu_low =
        if enrichment_norm <= DEGENERATE_ENRICHMENT * enriched_norm || enrichment_norm == 0.0 {
            0.0
        } else {
            primal.reduced_residual(c, reduced, &delta, &zero).abs() / enrichment_norm
        };
    LowerBound {
        nu_low,
        enrichment_norm,
        enriched_norm,
    }
}

/// The same quantities by full-field quadrature.
pub fn lower_bound_reference(
    truth: &TruthModel,
    primal: &PrimalReducedModel,
    c: &AffineCoefficients,
    reduced: &ReducedSolution,
    enriched: &ReducedSolution,
) -> Result<LowerBound> {
    let mesh = truth.mesh();
    let d = truth.elasticity(c);
    let delta = enrichment(reduced, enriched);
    let mut e = DisplacementField::zeros(mesh.node_count());
    for (phi, a) in primal.basis.modes.iter().zip(&delta) {
        for (x, p) in e.values_mut().iter_mut().zip(phi) {
            *x += a * p;
        }
    }
    let ur = primal.reconstruct(c, &reduced.alpha);
    let u2r = primal.reconstruct(c, &enriched.alpha);
    let enrichment_norm = truth.energy_norm(&e, c)?;
    let enriched_norm = truth.energy_norm(&u2r, c)?;
    let nu_low =
        if enrichment_norm <= DEGENERATE_ENRICHMENT * enriched_norm || enrichment_norm == 0.0 {
            0.0
        } else {
            let sr = element_stress(mesh, &ur, &d)?;
            let eps = element_strains(mesh, e.values());
            let work = compensated_sum(
                (0..mesh.triangle_count()).map(|k| mesh.area(k) * eps[k].dot(&sr.values()[k])),
            );
            let load = crate::dense::dot(&truth.load_vector(c), e.values());
            (load - work).abs() / enrichment_norm
        };
    Ok(LowerBound {
        nu_low,
        enrichment_norm,
        enriched_norm,
    })
}

/// `Q = ε^M : ⟨D(μ) : ε(u^r)⟩_Ω` from reduced blocks.
pub fn qoi_fast(
    primal: &PrimalReducedModel,
    c: &AffineCoefficients,
    alpha: &[f64],
    area: f64,
) -> f64 {
    primal.macro_work(c, alpha) / area
}

/// `Q` of an arbitrary displacement field by quadrature.
pub fn qoi_reference(
    truth: &TruthModel,
    mu: &ParameterPoint,
    u: &DisplacementField,
) -> Result<f64> {
    let c = truth.coefficients(mu)?;
    let mesh = truth.mesh();
    let sigma = element_stress(mesh, u, &truth.elasticity(&c))?;
    let em = macro_strain(mu).voigt();
    let work = compensated_sum(
        sigma
            .values()
            .iter()
            .enumerate()
            .map(|(e, s)| mesh.area(e) * em.dot(s)),
    );
    Ok(work / mesh.total_area())
}

/// Bounds divided by `‖u^2r‖_D(μ)`.
pub fn relative_bounds(nu_up: f64, nu_low: f64, enriched_norm: f64) -> Result<(f64, f64)> {
    if !(enriched_norm > 0.0) || !enriched_norm.is_finite() {
        return Err(Error::UndefinedRelative);
    }
    Ok((nu_up / enriched_norm, nu_low / enriched_norm))
}

/// `(θ_up, θ_low)`.
pub fn effectivities(
    nu_up: f64,
    nu_low: f64,
    true_error: f64,
    truth_norm: f64,
) -> Result<(f64, f64)> {
    if !(true_error > NEGLIGIBLE_ERROR * truth_norm) {
        return Err(Error::EffectivityUndefined);
    }
    Ok((nu_up / true_error, nu_low / true_error))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    /// Collapses an interval inverted by round-off to its midpoint.
    pub fn new(lower: f64, upper: f64) -> Self {
        if upper < lower && lower - upper < 1e-12 {
            let mid = 0.5 * (lower + upper);
            Self {
                lower: mid,
                upper: mid,
            }
        } else {
            Self { lower, upper }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthExtras {
    /// `‖u^h - u^r‖_D(μ)`.
    pub err_true: f64,
    pub truth_norm: f64,
    pub theta_up: Option<f64>,
    pub theta_low: Option<f64>,
    pub qoi_truth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuliBounds {
    pub contrast: f64,
    pub shear_estimate: f64,
    pub shear: Interval,
    pub lame_estimate: f64,
    pub lame: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedEvaluation {
    pub mu: [f64; 4],
    pub n_phi: usize,
    pub n_phi_stress: usize,
    pub n_phi_enriched: usize,
    pub nu_up: f64,
    pub nu_low: f64,
    pub nu_up_rel: Option<f64>,
    pub nu_low_rel: Option<f64>,
    pub enriched_norm: f64,
    pub qoi: f64,
    pub moduli_bounds: Option<ModuliBounds>,
    pub truth: Option<TruthExtras>,
}

/// Shear test at `(μ1, 0, 0, 1)` and axial test at `(μ1, 1, 0, 0)` give
/// `G = Q_shear` and `λ = Q_axial - 2G`; the compliance identity
/// `Q^h = Q^r - ‖e^r‖²_D / |Ω|` turns the energy bounds into intervals.
pub fn effective_moduli_bounds(
    shear: &CertifiedEvaluation,
    axial: &CertifiedEvaluation,
    area: f64,
) -> ModuliBounds {
    let g = shear.qoi;
    let lambda = axial.qoi - 2.0 * g;
    let (gu, gl) = (shear.nu_up.powi(2) / area, shear.nu_low.powi(2) / area);
    let (au, al) = (axial.nu_up.powi(2) / area, axial.nu_low.powi(2) / area);
    ModuliBounds {
        contrast: shear.mu[0],
        shear_estimate: g,
        shear: Interval::new(g - gu, g - gl),
        lame_estimate: lambda,
        lame: Interval::new(lambda - au + 2.0 * gl, lambda - al + 2.0 * gu),
    }
}

/// Evaluations at the full truth solution, used by validation and tests.
pub fn truth_extras(
    truth: &TruthModel,
    mu: &ParameterPoint,
    ur: &DisplacementField,
    nu_up: f64,
    nu_low: f64,
) -> Result<(TruthExtras, StressField)> {
    let sol = truth.solve(mu)?;
    let c = &sol.coefficients;
    let err = truth.energy_norm(&sol.u.sub(ur), c)?;
    let norm = truth.energy_norm(&sol.u, c)?;
    let (theta_up, theta_low) = match effectivities(nu_up, nu_low, err, norm) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(_) => (None, None),
    };
    let qoi_truth = qoi_reference(truth, mu, &sol.u)?;
    Ok((
        TruthExtras {
            err_true: err,
            truth_norm: norm,
            theta_up,
            theta_low,
            qoi_truth,
        },
        sol.sigma,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(mu: [f64; 4], nu_up: f64, nu_low: f64, qoi: f64) -> CertifiedEvaluation {
        CertifiedEvaluation {
            mu,
            n_phi: 1,
            n_phi_stress: 1,
            n_phi_enriched: 2,
            nu_up,
            nu_low,
            nu_up_rel: None,
            nu_low_rel: None,
            enriched_norm: 1.0,
            qoi,
            moduli_bounds: None,
            truth: None,
        }
    }

    #[test]
    fn relative_bounds_cases() {
        assert_eq!(relative_bounds(0.0, 0.0, 2.0).unwrap(), (0.0, 0.0));
        assert_eq!(relative_bounds(1.0, 0.5, 2.0).unwrap(), (0.5, 0.25));
        assert!(matches!(
            relative_bounds(1.0, 0.5, 0.0),
            Err(Error::UndefinedRelative)
        ));
    }

    #[test]
    fn effectivity_cases() {
        assert_eq!(effectivities(2.0, 0.5, 1.0, 10.0).unwrap(), (2.0, 0.5));
        assert!(matches!(
            effectivities(1.0, 0.0, 1e-20, 1.0),
            Err(Error::EffectivityUndefined)
        ));
    }

    #[test]
    fn zero_error_moduli_intervals_collapse() {
        let g = 1.0 / 2.6;
        let s = eval([1.0, 0.0, 0.0, 1.0], 0.0, 0.0, g);
        let a = eval([1.0, 1.0, 0.0, 0.0], 0.0, 0.0, 0.576923 + 2.0 * g);
        let b = effective_moduli_bounds(&s, &a, 1.0);
        assert_eq!(b.shear.width(), 0.0);
        assert_eq!(b.shear.lower, g);
        assert!((b.lame_estimate - 0.576923).abs() < 1e-12);
    }

    #[test]
    fn moduli_interval_arithmetic() {
        let s = eval([2.0, 0.0, 0.0, 1.0], 0.3, 0.1, 0.5);
        let a = eval([2.0, 1.0, 0.0, 0.0], 0.2, 0.1, 1.6);
        let b = effective_moduli_bounds(&s, &a, 1.0);
        assert!((b.shear.lower - 0.41).abs() < 1e-15 && (b.shear.upper - 0.49).abs() < 1e-15);
        assert!((b.lame_estimate - 0.6).abs() < 1e-15);
        assert!((b.lame.lower - (0.6 - 0.04 + 0.02)).abs() < 1e-15);
        assert!((b.lame.upper - (0.6 - 0.01 + 0.18)).abs() < 1e-15);
    }

    #[test]
    fn inverted_by_roundoff_collapses() {
        let i = Interval::new(1.0 + 1e-14, 1.0);
        assert_eq!(i.lower, i.upper);
        let j = Interval::new(2.0, 1.0);
        assert_eq!((j.lower, j.upper), (2.0, 1.0));
    }
}

//! The online reduced model: certified evaluation from precomputed blocks.

use serde::{Deserialize, Serialize};

use crate::certification::{
    effective_moduli_bounds, lower_bound_fast, lower_bound_reference, qoi_fast, qoi_reference,
    relative_bounds, truth_extras, upper_bound_fast, upper_bound_reference, CertifiedEvaluation,
    CreFactor, LowerBound, ModuliBounds,
};
use crate::dual::{DualReducedModel, RecoveredStress};
use crate::error::{Error, Result};
use crate::fem::{element_force_scale, fe_equilibrium_residual, DisplacementField, StressField};
use crate::parameter::{AffineCoefficients, ParameterDomain, ParameterPoint};
use crate::primal::{PrimalReducedModel, ReducedSolution};
use crate::truth::{coefficients_with_loads, LoadKind, LoadWeight, Material, TruthModel};

/// Sizes of the three reduced spaces used by one evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n_phi: usize,
    pub n_phi_stress: usize,
    pub n_phi_enriched: usize,
}

impl Dimensions {
    /// `ñ = n + 2`, `n^2r = n + 1`.
    pub fn coupled(n_phi: usize) -> Self {
        Self {
            n_phi,
            n_phi_stress: n_phi + 2,
            n_phi_enriched: n_phi + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel {
    pub primal: PrimalReducedModel,
    pub dual: DualReducedModel,
    pub cre: CreFactor,
    pub material: Material,
    pub domain: ParameterDomain,
    pub mu0: ParameterPoint,
    pub load_terms: Vec<(LoadKind, LoadWeight)>,
    pub area: f64,
    pub triangle_count: usize,
}

/// Reduced solutions at one parameter point.
#[derive(Clone, Debug)]
pub struct OnlineState {
    pub mu: ParameterPoint,
    pub coefficients: AffineCoefficients,
    pub dims: Dimensions,
    pub reduced: ReducedSolution,
    pub enriched: ReducedSolution,
    pub stress: RecoveredStress,
}

impl ReducedModel {
    pub fn max_modes(&self) -> usize {
        self.primal.max_modes()
    }

    pub fn max_stress_modes(&self) -> usize {
        self.dual.max_modes()
    }

    pub fn coefficients(&self, mu: &ParameterPoint) -> Result<AffineCoefficients> {
        coefficients_with_loads(mu, self.load_terms.iter().copied())
    }

    pub fn check_dimensions(&self, d: &Dimensions) -> Result<()> {
        let nmax = self.max_modes();
        if d.n_phi == 0 || d.n_phi > nmax {
            return Err(Error::InvalidArgument(format!(
                "n_phi = {} must lie in [1, {nmax}] (stored displacement modes)",
                d.n_phi
            )));
        }
        if d.n_phi_enriched < d.n_phi || d.n_phi_enriched > nmax {
            return Err(Error::InvalidArgument(format!(
                "n_phi_enriched = {} must lie in [n_phi = {}, {nmax}] (stored displacement modes)",
                d.n_phi_enriched, d.n_phi
            )));
        }
        let smax = self.max_stress_modes();
        if d.n_phi_stress == 0 || d.n_phi_stress > smax {
            return Err(Error::InvalidArgument(format!(
                "n_phi_stress = {} must lie in [1, {smax}] (stored stress modes)",
                d.n_phi_stress
            )));
        }
        Ok(())
    }

    /// Solves the three reduced problems at `μ`.
    pub fn solve_online(&self, mu: &ParameterPoint, dims: Dimensions) -> Result<OnlineState> {
        self.check_dimensions(&dims)?;
        let c = self.coefficients(mu)?;
        let reduced = self.primal.solve_reduced(mu, &c, dims.n_phi)?;
        let enriched = if dims.n_phi_enriched == dims.n_phi {
            reduced.clone()
        } else {
            self.primal.solve_enriched(mu, &c, dims.n_phi_enriched)?
        };
        let stress = self
            .dual
            .solve_recovered_stress(mu, &c, dims.n_phi_stress)?;
        Ok(OnlineState {
            mu: *mu,
            coefficients: c,
            dims,
            reduced,
            enriched,
            stress,
        })
    }

    fn assemble(
        &self,
        state: &OnlineState,
        nu_up: f64,
        low: LowerBound,
        qoi: f64,
    ) -> CertifiedEvaluation {
        let rel = relative_bounds(nu_up, low.nu_low, low.enriched_norm).ok();
        CertifiedEvaluation {
            mu: state.mu.0,
            n_phi: state.dims.n_phi,
            n_phi_stress: state.stress.n_phi_stress,
            n_phi_enriched: state.dims.n_phi_enriched,
            nu_up,
            nu_low: low.nu_low,
            nu_up_rel: rel.map(|r| r.0),
            nu_low_rel: rel.map(|r| r.1),
            enriched_norm: low.enriched_norm,
            qoi,
            moduli_bounds: None,
            truth: None,
        }
    }

    /// Certified evaluation from reduced blocks only.
    pub fn evaluate(&self, mu: &ParameterPoint, dims: Dimensions) -> Result<CertifiedEvaluation> {
        let s = self.solve_online(mu, dims)?;
        Ok(self.evaluate_state(&s))
    }

    pub fn evaluate_state(&self, s: &OnlineState) -> CertifiedEvaluation {
        let c = &s.coefficients;
        let nu_up = upper_bound_fast(&self.cre, c, &s.reduced.alpha, &s.stress.alpha_tilde);
        let low = lower_bound_fast(&self.primal, c, &s.reduced, &s.enriched);
        let qoi = qoi_fast(&self.primal, c, &s.reduced.alpha, self.area);
        self.assemble(s, nu_up, low, qoi)
    }

    /// The same quantities by full-field quadrature.
    pub fn evaluate_reference(
        &self,
        truth: &TruthModel,
        mu: &ParameterPoint,
        dims: Dimensions,
    ) -> Result<CertifiedEvaluation> {
        let s = self.solve_online(mu, dims)?;
        let c = &s.coefficients;
        let nu_up = upper_bound_reference(
            truth,
            &self.primal,
            &self.dual,
            c,
            &s.reduced.alpha,
            &s.stress,
        )?;
        let low = lower_bound_reference(truth, &self.primal, c, &s.reduced, &s.enriched)?;
        let qoi = qoi_reference(truth, mu, &self.reduced_field(&s))?;
        Ok(self.assemble(&s, nu_up, low, qoi))
    }

    /// Fast evaluation plus the true error and effectivities.
    pub fn evaluate_with_truth(
        &self,
        truth: &TruthModel,
        mu: &ParameterPoint,
        dims: Dimensions,
    ) -> Result<CertifiedEvaluation> {
        let s = self.solve_online(mu, dims)?;
        let mut e = self.evaluate_state(&s);
        let (extras, _) = truth_extras(truth, mu, &self.reduced_field(&s), e.nu_up, e.nu_low)?;
        e.truth = Some(extras);
        Ok(e)
    }

    /// `u^r(μ)` at full dimension.
    pub fn reduced_field(&self, s: &OnlineState) -> DisplacementField {
        self.primal.reconstruct(&s.coefficients, &s.reduced.alpha)
    }

    pub fn enriched_field(&self, s: &OnlineState) -> DisplacementField {
        self.primal.reconstruct(&s.coefficients, &s.enriched.alpha)
    }

    /// `σ̂(μ)` at full dimension.
    pub fn recovered_stress_field(&self, s: &OnlineState) -> StressField {
        self.dual
            .reconstruct(&s.coefficients, &s.stress, self.triangle_count)
    }

    /// Euclidean norm of the finite-element equilibrium residual of `σ̂`,
    /// with the element-force scale of `σ̂`.
    pub fn equilibrium_residual(&self, truth: &TruthModel, s: &OnlineState) -> (f64, f64) {
        let sigma = self.recovered_stress_field(s);
        let f = truth.load_vector(&s.coefficients);
        let r = fe_equilibrium_residual(truth.mesh(), &sigma, Some(&f));
        (
            r.iter().map(|v| v * v).sum::<f64>().sqrt(),
            element_force_scale(truth.mesh(), &sigma),
        )
    }

    /// `n_φ = 7`, `ñ_φ = n_φ + 2`, `n_φ^2r = n_φ + 1`, each capped by the
    /// stored modes.
    pub fn default_dimensions(&self) -> Dimensions {
        let n = self.max_modes().min(7);
        Dimensions {
            n_phi: n,
            n_phi_stress: (n + 2).min(self.max_stress_modes()),
            n_phi_enriched: (n + 1).min(self.max_modes()),
        }
    }

    /// Shear and axial tests at one contrast.
    pub fn homogenize(
        &self,
        contrast: f64,
        dims: Dimensions,
    ) -> Result<(ModuliBounds, [CertifiedEvaluation; 2])> {
        let shear = self.evaluate(&ParameterPoint::new(contrast, 0.0, 0.0, 1.0), dims)?;
        let axial = self.evaluate(&ParameterPoint::new(contrast, 1.0, 0.0, 0.0), dims)?;
        Ok((
            effective_moduli_bounds(&shear, &axial, self.area),
            [shear, axial],
        ))
    }
}

//! The parametrised finite-element model: affine material factors, lifting
//! and Riesz load fields, and the full ("truth") solve at one parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_stiffness, element_stress, energy_norm_displacement, energy_norm_stress,
    internal_force, solve_dirichlet, DisplacementField, StressField, Voigt,
};
use crate::mesh::{Mesh, Phase};
use crate::parameter::{
    evaluate_affine_coefficients, hooke_plane_strain, AffineCoefficients, MacroStrain,
    ParameterDomain, ParameterPoint, N_DIRICHLET_TERMS,
};

/// Isotropic matrix material; the inclusion is the same material scaled by
/// the contrast.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            young: 1.0,
            poisson: 0.3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadKind {
    Traction,
    Body,
}

/// Scalar weight of an affine load term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LoadWeight {
    Constant(f64),
    /// The given coordinate of the parameter vector.
    Parameter(usize),
}

/// One affine load term `γ(μ) l̄`, stored as consistent nodal forces on all DOFs.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadFactor {
    pub kind: LoadKind,
    pub weight: LoadWeight,
    pub forces: Vec<f64>,
}

/// Affine weights including the load terms, in the given order.
pub fn coefficients_with_loads(
    mu: &ParameterPoint,
    loads: impl IntoIterator<Item = (LoadKind, LoadWeight)>,
) -> Result<AffineCoefficients> {
    let mut c = evaluate_affine_coefficients(mu)?;
    for (kind, weight) in loads {
        let w = match weight {
            LoadWeight::Constant(v) => v,
            LoadWeight::Parameter(i) => mu.0[i],
        };
        match kind {
            LoadKind::Traction => c.gamma_t.push(w),
            LoadKind::Body => c.gamma_b.push(w),
        }
    }
    Ok(c)
}

#[derive(Clone, Debug)]
pub struct TruthSolution {
    pub mu: ParameterPoint,
    pub coefficients: AffineCoefficients,
    /// `u^h = u^{h,0} + u^{h,p}`.
    pub u: DisplacementField,
    pub u0: DisplacementField,
    pub sigma: StressField,
    /// `σ^h - σ^{h,p}`.
    pub sigma0: StressField,
}

/// Everything the full model needs besides the parameter value.
#[derive(Clone, Debug)]
pub struct TruthModel {
    mesh: Mesh,
    material: Material,
    d_mat: Voigt,
    c_mat: Voigt,
    domain: ParameterDomain,
    mu0: ParameterPoint,
    loads: Vec<LoadFactor>,
    liftings: Vec<DisplacementField>,
    riesz: Vec<DisplacementField>,
    particular: Vec<StressField>,
}

impl TruthModel {
    /// Homogenisation setup: `μ0 = (1, 0, 0, 0)`, no loads.
    pub fn homogenization(mesh: Mesh, material: Material) -> Result<Self> {
        Self::new(
            mesh,
            material,
            ParameterDomain::default(),
            ParameterPoint::new(1.0, 0.0, 0.0, 0.0),
            Vec::new(),
        )
    }

    pub fn new(
        mesh: Mesh,
        material: Material,
        domain: ParameterDomain,
        mu0: ParameterPoint,
        loads: Vec<LoadFactor>,
    ) -> Result<Self> {
        let (d_mat, c_mat) = hooke_plane_strain(material.young, material.poisson)?;
        mu0.validate()?;
        let mut sorted = loads;
        // traction terms first, matching the order of the load weights
        sorted.sort_by_key(|l| l.kind == LoadKind::Body);
        for l in &sorted {
            if l.forces.len() != mesh.dof_count() {
                return Err(Error::InvalidArgument(format!(
                    "load factor has {} entries for {} DOFs",
                    l.forces.len(),
                    mesh.dof_count()
                )));
            }
            if let LoadWeight::Parameter(i) = l.weight {
                if i >= 4 {
                    return Err(Error::InvalidArgument(format!(
                        "load weight refers to parameter {i}"
                    )));
                }
            }
        }
        let mut model = Self {
            mesh,
            material,
            d_mat,
            c_mat,
            domain,
            mu0,
            loads: sorted,
            liftings: Vec::new(),
            riesz: Vec::new(),
            particular: Vec::new(),
        };
        model.liftings = model.compute_liftings()?;
        model.riesz = model.compute_riesz_load_fields()?;
        let d0 = model.elasticity(&model.coefficients(&mu0)?);
        model.particular = model
            .riesz
            .iter()
            .map(|r| element_stress(&model.mesh, r, &d0))
            .collect::<Result<_>>()?;
        Ok(model)
    }

    /// Reassembles a model from stored lifting and Riesz fields without
    /// solving again.
    pub fn from_parts(
        mesh: Mesh,
        material: Material,
        domain: ParameterDomain,
        mu0: ParameterPoint,
        loads: Vec<LoadFactor>,
        liftings: Vec<DisplacementField>,
        riesz: Vec<DisplacementField>,
    ) -> Result<Self> {
        let (d_mat, c_mat) = hooke_plane_strain(material.young, material.poisson)?;
        mu0.validate()?;
        if liftings.len() != N_DIRICHLET_TERMS || riesz.len() != loads.len() {
            return Err(Error::InvalidArgument(format!(
                "{} lifting and {} Riesz fields for {} load factors",
                liftings.len(),
                riesz.len(),
                loads.len()
            )));
        }
        if liftings
            .iter()
            .chain(&riesz)
            .any(|f| f.values().len() != mesh.dof_count())
            || loads.iter().any(|l| l.forces.len() != mesh.dof_count())
        {
            return Err(Error::InvalidArgument(
                "stored field does not match the mesh".into(),
            ));
        }
        let mut model = Self {
            mesh,
            material,
            d_mat,
            c_mat,
            domain,
            mu0,
            loads,
            liftings,
            riesz,
            particular: Vec::new(),
        };
        let d0 = model.elasticity(&model.coefficients(&mu0)?);
        model.particular = model
            .riesz
            .iter()
            .map(|r| element_stress(&model.mesh, r, &d0))
            .collect::<Result<_>>()?;
        Ok(model)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn material(&self) -> Material {
        self.material
    }

    pub fn matrix_elasticity(&self) -> Voigt {
        self.d_mat
    }

    pub fn matrix_compliance(&self) -> Voigt {
        self.c_mat
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn mu0(&self) -> ParameterPoint {
        self.mu0
    }

    pub fn loads(&self) -> &[LoadFactor] {
        &self.loads
    }

    /// Lifting fields `ψ_w`, one per unit macro strain.
    pub fn liftings(&self) -> &[DisplacementField] {
        &self.liftings
    }

    /// Riesz load fields `ψ̃_t`, one per load factor.
    pub fn riesz_fields(&self) -> &[DisplacementField] {
        &self.riesz
    }

    /// Stress factors `D(μ0) : ε(ψ̃_t)`.
    pub fn particular_factors(&self) -> &[StressField] {
        &self.particular
    }

    pub fn coefficients(&self, mu: &ParameterPoint) -> Result<AffineCoefficients> {
        coefficients_with_loads(mu, self.loads.iter().map(|l| (l.kind, l.weight)))
    }

    /// Per-element `D̄_k`: the matrix tensor everywhere, then the matrix
    /// tensor restricted to the inclusions.
    pub fn elasticity_factors(&self) -> [Vec<Voigt>; 2] {
        self.phase_factors(self.d_mat)
    }

    pub fn compliance_factors(&self) -> [Vec<Voigt>; 2] {
        self.phase_factors(self.c_mat)
    }

    fn phase_factors(&self, t: Voigt) -> [Vec<Voigt>; 2] {
        let all = vec![t; self.mesh.triangle_count()];
        let inc = self
            .mesh
            .phases()
            .iter()
            .map(|p| t * p.indicator())
            .collect();
        [all, inc]
    }

    pub fn elasticity(&self, c: &AffineCoefficients) -> Vec<Voigt> {
        self.mesh
            .phases()
            .iter()
            .map(|p| self.d_mat * c.elasticity_scale(p.indicator()))
            .collect()
    }

    pub fn compliance(&self, c: &AffineCoefficients) -> Vec<Voigt> {
        self.mesh
            .phases()
            .iter()
            .map(|p| self.c_mat * c.compliance_scale(p.indicator()))
            .collect()
    }

    /// `u^{h,p}(μ) = Σ_w γw_w ψ_w`.
    pub fn lifting(&self, c: &AffineCoefficients) -> DisplacementField {
        let mut u = DisplacementField::zeros(self.mesh.node_count());
        for (psi, g) in self.liftings.iter().zip(c.gamma_w) {
            if g != 0.0 {
                u.axpy(g, psi);
            }
        }
        u
    }

    /// `σ^{h,p}(μ) = Σ_t γ_t D(μ0) : ε(ψ̃_t)`.
    pub fn particular_stress(&self, c: &AffineCoefficients) -> StressField {
        let mut s = StressField::zeros(self.mesh.triangle_count());
        for (f, g) in self.particular.iter().zip(c.load_weights()) {
            s.axpy(g, f);
        }
        s
    }

    /// Consistent nodal forces of the load at `μ`.
    pub fn load_vector(&self, c: &AffineCoefficients) -> Vec<f64> {
        let mut f = vec![0.0; self.mesh.dof_count()];
        for (l, g) in self.loads.iter().zip(c.load_weights()) {
            for (fi, li) in f.iter_mut().zip(&l.forces) {
                *fi += g * li;
            }
        }
        f
    }

    fn compute_liftings(&self) -> Result<Vec<DisplacementField>> {
        let d0 = self.elasticity(&evaluate_affine_coefficients(&self.mu0)?);
        let system = assemble_stiffness(&self.mesh, &d0)?;
        (0..N_DIRICHLET_TERMS)
            .map(|w| {
                let strain = MacroStrain::unit(w);
                let g = DisplacementField::interpolate(&self.mesh, |x| strain.displacement(x));
                let fint = internal_force(&self.mesh, &element_stress(&self.mesh, &g, &d0)?);
                let rhs: Vec<f64> = self.mesh.free_dofs().iter().map(|&d| -fint[d]).collect();
                let mut psi = solve_dirichlet(&self.mesh, &system, &rhs)?;
                psi.axpy(1.0, &g);
                Ok(psi)
            })
            .collect()
    }

    fn compute_riesz_load_fields(&self) -> Result<Vec<DisplacementField>> {
        if self.loads.is_empty() {
            return Ok(Vec::new());
        }
        let d0 = self.elasticity(&evaluate_affine_coefficients(&self.mu0)?);
        let system = assemble_stiffness(&self.mesh, &d0)?;
        self.loads
            .iter()
            .map(|l| {
                let rhs: Vec<f64> = self.mesh.free_dofs().iter().map(|&d| l.forces[d]).collect();
                solve_dirichlet(&self.mesh, &system, &rhs)
            })
            .collect()
    }

    /// Full finite-element solve at `μ`.
    pub fn solve(&self, mu: &ParameterPoint) -> Result<TruthSolution> {
        self.solve_inner(mu).map_err(|e| match e {
            Error::InvalidParameter(_) => e,
            other => Error::TruthSolve {
                mu: mu.0,
                source: Box::new(other),
            },
        })
    }

    fn solve_inner(&self, mu: &ParameterPoint) -> Result<TruthSolution> {
        let c = self.coefficients(mu)?;
        let d = self.elasticity(&c);
        let system = assemble_stiffness(&self.mesh, &d)?;
        let up = self.lifting(&c);
        let fint = internal_force(&self.mesh, &element_stress(&self.mesh, &up, &d)?);
        let f = self.load_vector(&c);
        let rhs: Vec<f64> = self
            .mesh
            .free_dofs()
            .iter()
            .map(|&k| f[k] - fint[k])
            .collect();
        let u0 = solve_dirichlet(&self.mesh, &system, &rhs)?;
        let mut u = u0.clone();
        u.axpy(1.0, &up);
        let sigma = element_stress(&self.mesh, &u, &d)?;
        let sigma0 = sigma.sub(&self.particular_stress(&c));
        Ok(TruthSolution {
            mu: *mu,
            coefficients: c,
            u,
            u0,
            sigma,
            sigma0,
        })
    }

    /// `‖u‖_D(μ)`.
    pub fn energy_norm(&self, u: &DisplacementField, c: &AffineCoefficients) -> Result<f64> {
        energy_norm_displacement(&self.mesh, u, &self.elasticity(c))
    }

    /// `‖σ‖_C(μ)`.
    pub fn stress_norm(&self, sigma: &StressField, c: &AffineCoefficients) -> Result<f64> {
        energy_norm_stress(&self.mesh, sigma, &self.compliance(c))
    }

    /// Area of the inclusion phase.
    pub fn inclusion_area(&self) -> f64 {
        (0..self.mesh.triangle_count())
            .filter(|&e| self.mesh.phases()[e] == Phase::Inclusion)
            .map(|e| self.mesh.area(e))
            .sum()
    }
}

//! Galerkin-POD displacement surrogate with affine reduced operators.
//!
//! A reduced field is `u = Σ_i α_i φ_i + Σ_w β_w ψ_w`; every online
//! quantity is a contraction of the precomputed blocks with `(α, β)` and the
//! affine weights.

use nalgebra::{DMatrix, Vector3};

use crate::dense::{bilinear, compensated_sum, dot, solve_spd};
use crate::error::{Error, Result};
use crate::fem::{element_strains, DisplacementField};
use crate::parameter::{
    AffineCoefficients, MacroStrain, ParameterPoint, N_DIRICHLET_TERMS, N_MATERIAL_TERMS,
};
use crate::pod::PodBasis;
use crate::truth::TruthModel;

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalReducedModel {
    pub basis: PodBasis,
    pub lifting_fields: Vec<DisplacementField>,
    /// `[k][i][j] = ā_k(φ_j, φ_i)`.
    pub stiffness_blocks: Vec<DMatrix<f64>>,
    /// `[k][w][j] = ā_k(ψ_w, φ_j)`.
    pub lifting_blocks: Vec<DMatrix<f64>>,
    /// `[k][w][v] = ā_k(ψ_w, ψ_v)`.
    pub lifting_lifting_blocks: Vec<DMatrix<f64>>,
    /// `[t][j] = l̄_t(φ_j)`.
    pub load_blocks: DMatrix<f64>,
    /// `[t][w] = l̄_t(ψ_w)`.
    pub load_lifting_blocks: DMatrix<f64>,
    /// `[k][w][j] = ∫ ε̄_w : D̄_k : ε(φ_j)`.
    pub macro_blocks: Vec<DMatrix<f64>>,
    /// `[k][w][v] = ∫ ε̄_w : D̄_k : ε(ψ_v)`.
    pub macro_lifting_blocks: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSolution {
    pub mu: ParameterPoint,
    pub alpha: Vec<f64>,
    pub n_phi: usize,
}

/// Integrates every block once at full dimension.
pub fn precompute_primal_operators(
    truth: &TruthModel,
    basis: PodBasis,
) -> Result<PrimalReducedModel> {
    let mesh = truth.mesh();
    let n = basis.len();
    let nw = N_DIRICHLET_TERMS;
    let nl = truth.loads().len();
    let mode_strains: Vec<Vec<Vector3<f64>>> = basis
        .modes
        .iter()
        .map(|m| element_strains(mesh, m))
        .collect();
    let lift_strains: Vec<Vec<Vector3<f64>>> = truth
        .liftings()
        .iter()
        .map(|l| element_strains(mesh, l.values()))
        .collect();
    let macro_strains: Vec<Vector3<f64>> = (0..nw).map(|w| MacroStrain::unit(w).voigt()).collect();
    let factors = truth.elasticity_factors();
    let areas: Vec<f64> = (0..mesh.triangle_count()).map(|e| mesh.area(e)).collect();

    let pair = |k: usize, a: &[Vector3<f64>], b: &[Vector3<f64>]| -> f64 {
        let d = &factors[k];
        compensated_sum((0..areas.len()).map(|e| areas[e] * a[e].dot(&(d[e] * b[e]))))
    };
    let uniform = |k: usize, strain: &Vector3<f64>, b: &[Vector3<f64>]| -> f64 {
        let d = &factors[k];
        compensated_sum((0..areas.len()).map(|e| areas[e] * strain.dot(&(d[e] * b[e]))))
    };

    let mut stiffness_blocks = Vec::with_capacity(N_MATERIAL_TERMS);
    let mut lifting_blocks = Vec::with_capacity(N_MATERIAL_TERMS);
    let mut lifting_lifting_blocks = Vec::with_capacity(N_MATERIAL_TERMS);
    let mut macro_blocks = Vec::with_capacity(N_MATERIAL_TERMS);
    let mut macro_lifting_blocks = Vec::with_capacity(N_MATERIAL_TERMS);
    for k in 0..N_MATERIAL_TERMS {
        let mut kk = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = pair(k, &mode_strains[i], &mode_strains[j]);
                kk[(i, j)] = v;
                kk[(j, i)] = v;
            }
        }
        stiffness_blocks.push(kk);
        lifting_blocks.push(DMatrix::from_fn(nw, n, |w, j| {
            pair(k, &lift_strains[w], &mode_strains[j])
        }));
        let mut ll = DMatrix::zeros(nw, nw);
        for w in 0..nw {
            for v in 0..=w {
                let x = pair(k, &lift_strains[w], &lift_strains[v]);
                ll[(w, v)] = x;
                ll[(v, w)] = x;
            }
        }
        lifting_lifting_blocks.push(ll);
        macro_blocks.push(DMatrix::from_fn(nw, n, |w, j| {
            uniform(k, &macro_strains[w], &mode_strains[j])
        }));
        macro_lifting_blocks.push(DMatrix::from_fn(nw, nw, |w, v| {
            uniform(k, &macro_strains[w], &lift_strains[v])
        }));
    }
    let loads = truth.loads();
    let load_blocks = DMatrix::from_fn(nl, n, |t, j| dot(&loads[t].forces, &basis.modes[j]));
    let load_lifting_blocks = DMatrix::from_fn(nl, nw, |t, w| {
        dot(&loads[t].forces, truth.liftings()[w].values())
    });

    Ok(PrimalReducedModel {
        basis,
        lifting_fields: truth.liftings().to_vec(),
        stiffness_blocks,
        lifting_blocks,
        lifting_lifting_blocks,
        load_blocks,
        load_lifting_blocks,
        macro_blocks,
        macro_lifting_blocks,
    })
}

impl PrimalReducedModel {
    pub fn max_modes(&self) -> usize {
        self.basis.len()
    }

    pub fn load_count(&self) -> usize {
        self.load_blocks.nrows()
    }

    /// `K^r(μ)` on the leading `n` modes.
    pub fn reduced_matrix(&self, c: &AffineCoefficients, n: usize) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(n, n);
        for (block, g) in self.stiffness_blocks.iter().zip(c.gamma_d) {
            k += block.view((0, 0), (n, n)) * g;
        }
        k
    }

    /// `F_j = Σ_t γ_t l̄_t(φ_j) - Σ_k γd_k Σ_w γw_w ā_k(ψ_w, φ_j)`.
    pub fn reduced_rhs(&self, c: &AffineCoefficients, n: usize) -> Vec<f64> {
        let lw = c.load_weights();
        (0..n)
            .map(|j| {
                let load: f64 = lw
                    .iter()
                    .enumerate()
                    .map(|(t, g)| g * self.load_blocks[(t, j)])
                    .sum();
                let lift: f64 = self
                    .lifting_blocks
                    .iter()
                    .zip(c.gamma_d)
                    .map(|(b, gd)| {
                        gd * (0..N_DIRICHLET_TERMS)
                            .map(|w| c.gamma_w[w] * b[(w, j)])
                            .sum::<f64>()
                    })
                    .sum();
                load - lift
            })
            .collect()
    }

    fn check_dimension(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.max_modes() {
            return Err(Error::RankDeficiency {
                requested: n,
                rank: self.max_modes(),
            });
        }
        Ok(())
    }

    /// Galerkin projection on the leading `n_phi` modes.
    pub fn solve_reduced(
        &self,
        mu: &ParameterPoint,
        c: &AffineCoefficients,
        n_phi: usize,
    ) -> Result<ReducedSolution> {
        self.check_dimension(n_phi)?;
        let alpha = solve_spd(&self.reduced_matrix(c, n_phi), &self.reduced_rhs(c, n_phi))?;
        Ok(ReducedSolution {
            mu: *mu,
            alpha,
            n_phi,
        })
    }

    /// The same projection on a larger leading subset of the hierarchy.
    pub fn solve_enriched(
        &self,
        mu: &ParameterPoint,
        c: &AffineCoefficients,
        n_phi_2r: usize,
    ) -> Result<ReducedSolution> {
        self.solve_reduced(mu, c, n_phi_2r)
    }

    /// `a(u_a, u_b; μ)` for reduced fields given by mode and lifting coefficients.
    pub fn energy_product(
        &self,
        c: &AffineCoefficients,
        (alpha_a, beta_a): (&[f64], &[f64]),
        (alpha_b, beta_b): (&[f64], &[f64]),
    ) -> f64 {
        let mut s = 0.0;
        for k in 0..N_MATERIAL_TERMS {
            let g = c.gamma_d[k];
            if g == 0.0 {
                continue;
            }
            let term = bilinear(&self.stiffness_blocks[k], alpha_a, alpha_b)
                + bilinear(&self.lifting_blocks[k], beta_a, alpha_b)
                + bilinear(&self.lifting_blocks[k], beta_b, alpha_a)
                + bilinear(&self.lifting_lifting_blocks[k], beta_a, beta_b);
            s += g * term;
        }
        s
    }

    /// `l(v; μ)`.
    pub fn load_value(&self, c: &AffineCoefficients, alpha: &[f64], beta: &[f64]) -> f64 {
        c.load_weights()
            .iter()
            .enumerate()
            .map(|(t, g)| {
                let modes: f64 = alpha
                    .iter()
                    .enumerate()
                    .map(|(j, a)| a * self.load_blocks[(t, j)])
                    .sum();
                let lifts: f64 = beta
                    .iter()
                    .enumerate()
                    .map(|(w, b)| b * self.load_lifting_blocks[(t, w)])
                    .sum();
                g * (modes + lifts)
            })
            .sum()
    }

    /// `R(v; μ) = l(v; μ) - a(u^r, v; μ)` for `v = Σ α_v φ + Σ β_v ψ`.
    pub fn reduced_residual(
        &self,
        c: &AffineCoefficients,
        solution: &ReducedSolution,
        v_alpha: &[f64],
        v_beta: &[f64],
    ) -> f64 {
        self.load_value(c, v_alpha, v_beta)
            - self.energy_product(c, (&solution.alpha, &c.gamma_w), (v_alpha, v_beta))
    }

    /// `‖u^r‖²_D(μ)` including the lifting.
    pub fn energy_squared(&self, c: &AffineCoefficients, alpha: &[f64]) -> f64 {
        self.energy_product(c, (alpha, &c.gamma_w), (alpha, &c.gamma_w))
    }

    /// `ε^M(μ) : ∫ D(μ) : ε(u) dΩ` for `u = Σ α φ + u^{h,p}(μ)`.
    pub fn macro_work(&self, c: &AffineCoefficients, alpha: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..N_MATERIAL_TERMS {
            let g = c.gamma_d[k];
            if g == 0.0 {
                continue;
            }
            s += g
                * (bilinear(&self.macro_blocks[k], &c.gamma_w, alpha)
                    + bilinear(&self.macro_lifting_blocks[k], &c.gamma_w, &c.gamma_w));
        }
        s
    }

    /// `Σ α_i φ_i + u^{h,p}(μ)` at full dimension.
    pub fn reconstruct(&self, c: &AffineCoefficients, alpha: &[f64]) -> DisplacementField {
        crate::instrument::record_field_op();
        let mut u =
            DisplacementField::zeros(self.lifting_fields.first().map_or(0, |l| l.node_count()));
        for (psi, g) in self.lifting_fields.iter().zip(c.gamma_w) {
            u.axpy(g, psi);
        }
        for (phi, a) in self.basis.modes.iter().zip(alpha) {
            for (ui, p) in u.values_mut().iter_mut().zip(phi) {
                *ui += a * p;
            }
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_full_stiffness, internal_force, DisplacementField};
    use crate::mesh::build_structured_mesh;
    use crate::microstructure::{tag_elements, Circle, InclusionSet};
    use crate::pod::{compute_snapshots, snapshot_pod, MassInnerProduct};
    use crate::truth::Material;

    fn setup() -> (TruthModel, PrimalReducedModel) {
        let set = InclusionSet {
            circles: vec![
                Circle {
                    center: [0.3, 0.3],
                    radius: 0.15,
                },
                Circle {
                    center: [0.7, 0.65],
                    radius: 0.2,
                },
            ],
            seed: 0,
        };
        let mesh = tag_elements(&build_structured_mesh(10).unwrap(), &set);
        let truth = TruthModel::homogenization(mesh, Material::default()).unwrap();
        let pts: Vec<ParameterPoint> = [0.2, 0.5, 2.0, 5.0, 9.0]
            .iter()
            .flat_map(|&c| {
                [
                    ParameterPoint::new(c, 1.0, 0.0, 0.0),
                    ParameterPoint::new(c, 0.0, -0.5, 1.0),
                ]
            })
            .collect();
        let db = compute_snapshots(&truth, &pts).unwrap();
        let ip = MassInnerProduct::new(truth.mesh());
        let basis = snapshot_pod(&db.displacement_vectors(), 8, &ip).unwrap();
        let model = precompute_primal_operators(&truth, basis).unwrap();
        (truth, model)
    }

    #[test]
    fn blocks_are_symmetric_and_match_projection() {
        let (truth, model) = setup();
        for b in &model.stiffness_blocks {
            assert!((b - b.transpose()).abs().max() <= 1e-12 * b.abs().max());
        }
        assert!(model.stiffness_blocks[0].clone().cholesky().is_some());
        let mu = ParameterPoint::new(3.3, 0.2, 0.1, -0.4);
        let c = truth.coefficients(&mu).unwrap();
        let k = assemble_full_stiffness(truth.mesh(), &truth.elasticity(&c)).unwrap();
        let kr = model.reduced_matrix(&c, 8);
        for i in 0..8 {
            for j in 0..8 {
                let oracle = k.bilinear(model.basis.mode(i), model.basis.mode(j));
                assert!((kr[(i, j)] - oracle).abs() <= 1e-12 * kr.abs().max());
            }
        }
    }

    #[test]
    fn contrast_one_needs_no_correction() {
        let (truth, model) = setup();
        let mu = ParameterPoint::new(1.0, 0.4, -0.3, 0.8);
        let c = truth.coefficients(&mu).unwrap();
        let s = model.solve_reduced(&mu, &c, 5).unwrap();
        assert!(s.alpha.iter().all(|a| a.abs() < 1e-12));
    }

    #[test]
    fn galerkin_orthogonality_and_residual() {
        let (truth, model) = setup();
        let mu = ParameterPoint::new(4.2, 0.3, 0.5, -0.7);
        let c = truth.coefficients(&mu).unwrap();
        let sol = model.solve_reduced(&mu, &c, 4).unwrap();
        let ur = model.reconstruct(&c, &sol.alpha);
        let uh = truth.solve(&mu).unwrap();
        let err = uh.u.sub(&ur);
        let k = assemble_full_stiffness(truth.mesh(), &truth.elasticity(&c)).unwrap();
        let scale = truth.energy_norm(&uh.u, &c).unwrap();
        for i in 0..4 {
            let phi = DisplacementField::from_vec(model.basis.mode(i).to_vec());
            let v = k.bilinear(err.values(), phi.values());
            assert!(v.abs() <= 1e-9 * scale * scale);
        }
        // residual on a mode outside the reduced space, against full assembly
        let v = model.basis.mode(5);
        let fint = internal_force(
            truth.mesh(),
            &crate::fem::element_stress(truth.mesh(), &ur, &truth.elasticity(&c)).unwrap(),
        );
        let oracle = -dot(&fint, v);
        let mut e5 = vec![0.0; 6];
        e5[5] = 1.0;
        let fast = model.reduced_residual(&c, &sol, &e5, &[0.0; 3]);
        assert!(
            (fast - oracle).abs() <= 1e-12 * oracle.abs().max(1e-300),
            "{fast} vs {oracle}"
        );
        let inside = model.reduced_residual(&c, &sol, &[0.3, -1.0, 0.2, 0.5], &[0.0; 3]);
        assert!(inside.abs() <= 1e-10 * scale);
    }

    #[test]
    fn enriched_with_same_size_is_identical() {
        let (truth, model) = setup();
        let mu = ParameterPoint::new(6.0, 0.0, 0.0, 1.0);
        let c = truth.coefficients(&mu).unwrap();
        let a = model.solve_reduced(&mu, &c, 5).unwrap();
        let b = model.solve_enriched(&mu, &c, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_checks() {
        let (truth, model) = setup();
        let mu = ParameterPoint::new(2.0, 0.0, 0.0, 1.0);
        let c = truth.coefficients(&mu).unwrap();
        assert!(matches!(
            model.solve_reduced(&mu, &c, 9),
            Err(Error::RankDeficiency {
                requested: 9,
                rank: 8
            })
        ));
        assert!(model.solve_reduced(&mu, &c, 0).is_err());
    }

    #[test]
    fn energy_and_macro_work_match_fields() {
        let (truth, model) = setup();
        let mu = ParameterPoint::new(0.3, -0.6, 0.2, 0.9);
        let c = truth.coefficients(&mu).unwrap();
        let sol = model.solve_reduced(&mu, &c, 6).unwrap();
        let ur = model.reconstruct(&c, &sol.alpha);
        let e2 = truth.energy_norm(&ur, &c).unwrap().powi(2);
        assert!((model.energy_squared(&c, &sol.alpha) - e2).abs() <= 1e-12 * e2);
        let sig = crate::fem::element_stress(truth.mesh(), &ur, &truth.elasticity(&c)).unwrap();
        let em = crate::parameter::macro_strain(&mu).voigt();
        let q = crate::dense::compensated_sum(
            sig.values()
                .iter()
                .enumerate()
                .map(|(e, s)| truth.mesh().area(e) * em.dot(s)),
        );
        assert!((model.macro_work(&c, &sol.alpha) - q).abs() <= 1e-12 * q.abs());
    }
}

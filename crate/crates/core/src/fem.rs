//! Linear triangle (P1) plane-strain elasticity.
//!
//! Voigt convention throughout: stresses `(σ11, σ22, σ12)` and strains
//! `(ε11, ε22, γ12)` with engineering shear `γ12 = 2 ε12`, so that
//! `σ : ε = σ_v · ε_v`. Strains are constant per element and all element
//! integrals use the exact one-point centroid rule.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::dense::compensated_sum;
use crate::error::{Error, Result};
use crate::instrument;
use crate::mesh::Mesh;
use crate::sparse::{CsrMatrix, SparseSpdSystem};

/// A 3×3 Voigt elasticity or compliance tensor.
pub type Voigt = Matrix3<f64>;

/// Nodal displacement vector, DOFs `2i` and `2i + 1` for node `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    values: Vec<f64>,
}

impl DisplacementField {
    pub fn zeros(node_count: usize) -> Self {
        Self {
            values: vec![0.0; 2 * node_count],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        assert!(
            values.len() % 2 == 0,
            "displacement vectors carry two DOFs per node"
        );
        Self { values }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut values = Vec::with_capacity(mesh.dof_count());
        for &p in mesh.nodes() {
            values.extend_from_slice(&f(p));
        }
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn node_count(&self) -> usize {
        self.values.len() / 2
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        [self.values[2 * i], self.values[2 * i + 1]]
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: f64, other: &DisplacementField) {
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a += factor * b);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn sub(&self, other: &DisplacementField) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Values on the free DOFs of `mesh`.
    pub fn restrict(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.free_dofs().iter().map(|&d| self.values[d]).collect()
    }
}

/// Piecewise constant stress, one Voigt vector per triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct StressField {
    values: Vec<Vector3<f64>>,
}

impl StressField {
    pub fn zeros(triangle_count: usize) -> Self {
        Self {
            values: vec![Vector3::zeros(); triangle_count],
        }
    }

    pub fn from_vec(values: Vec<Vector3<f64>>) -> Self {
        Self { values }
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        assert!(flat.len() % 3 == 0);
        Self {
            values: flat
                .chunks_exact(3)
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values
            .iter()
            .flat_map(|v| [v[0], v[1], v[2]])
            .collect()
    }

    pub fn values(&self) -> &[Vector3<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axpy(&mut self, factor: f64, other: &StressField) {
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a += factor * b);
    }

    pub fn sub(&self, other: &StressField) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Constant strain-displacement data of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementKinematics {
    pub area: f64,
    /// `∂N_a/∂x` for the three vertices.
    pub dndx: [f64; 3],
    /// `∂N_a/∂y` for the three vertices.
    pub dndy: [f64; 3],
}

impl ElementKinematics {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let area = crate::mesh::signed_area(p[0], p[1], p[2]);
        let two_a = 2.0 * area;
        let mut dndx = [0.0; 3];
        let mut dndy = [0.0; 3];
        for a in 0..3 {
            let b = (a + 1) % 3;
            let c = (a + 2) % 3;
            dndx[a] = (p[b][1] - p[c][1]) / two_a;
            dndy[a] = (p[c][0] - p[b][0]) / two_a;
        }
        Self { area, dndx, dndy }
    }

    pub fn of(mesh: &Mesh, e: usize) -> Self {
        let t = mesh.triangles()[e];
        let n = mesh.nodes();
        Self::new([n[t[0]], n[t[1]], n[t[2]]])
    }

    /// The 3×6 matrix `B` with `ε = B u_e`, local DOF order `(u1x, u1y, u2x, ...)`.
    pub fn b_matrix(&self) -> SMatrix<f64, 3, 6> {
        let mut b = SMatrix::<f64, 3, 6>::zeros();
        for a in 0..3 {
            b[(0, 2 * a)] = self.dndx[a];
            b[(1, 2 * a + 1)] = self.dndy[a];
            b[(2, 2 * a)] = self.dndy[a];
            b[(2, 2 * a + 1)] = self.dndx[a];
        }
        b
    }

    pub fn strain(&self, ue: &[f64; 6]) -> Vector3<f64> {
        let mut eps = Vector3::zeros();
        for a in 0..3 {
            let (ux, uy) = (ue[2 * a], ue[2 * a + 1]);
            eps[0] += self.dndx[a] * ux;
            eps[1] += self.dndy[a] * uy;
            eps[2] += self.dndy[a] * ux + self.dndx[a] * uy;
        }
        eps
    }
}

/// Element stiffness `area · Bᵀ D B`.
pub fn element_stiffness(p: [[f64; 2]; 3], d: &Voigt) -> SMatrix<f64, 6, 6> {
    let k = ElementKinematics::new(p);
    let b = k.b_matrix();
    b.transpose() * d * b * k.area
}

fn element_dofs(tri: [usize; 3]) -> [usize; 6] {
    [
        2 * tri[0],
        2 * tri[0] + 1,
        2 * tri[1],
        2 * tri[1] + 1,
        2 * tri[2],
        2 * tri[2] + 1,
    ]
}

fn gather(u: &[f64], tri: [usize; 3]) -> [f64; 6] {
    let d = element_dofs(tri);
    [u[d[0]], u[d[1]], u[d[2]], u[d[3]], u[d[4]], u[d[5]]]
}

/// Checks that a Voigt tensor is symmetric positive definite.
pub fn check_spd(t: &Voigt) -> Result<()> {
    let scale = t.abs().max();
    if !(scale > 0.0) || (t - t.transpose()).abs().max() > 1e-12 * scale {
        return Err(Error::InvalidMaterial(format!(
            "tensor is not symmetric: {t}"
        )));
    }
    if t.cholesky().is_none() {
        return Err(Error::InvalidMaterial(format!(
            "tensor is not positive definite: {t}"
        )));
    }
    Ok(())
}

fn check_sizes(mesh: &Mesh, tensors: &[Voigt]) -> Result<()> {
    if tensors.len() != mesh.triangle_count() {
        return Err(Error::InvalidArgument(format!(
            "{} material tensors for {} triangles",
            tensors.len(),
            mesh.triangle_count()
        )));
    }
    Ok(())
}

fn check_materials(mesh: &Mesh, tensors: &[Voigt]) -> Result<()> {
    check_sizes(mesh, tensors)?;
    // per-element tensors are usually shared by phase; check distinct ones once
    let mut seen: Vec<Voigt> = Vec::new();
    for t in tensors {
        if !seen.contains(t) {
            check_spd(t)?;
            seen.push(*t);
        }
    }
    Ok(())
}

/// Stiffness on all DOFs (no boundary elimination).
pub fn assemble_full_stiffness(mesh: &Mesh, elasticity: &[Voigt]) -> Result<CsrMatrix> {
    check_materials(mesh, elasticity)?;
    instrument::record_field_op();
    let mut trip = Vec::with_capacity(36 * mesh.triangle_count());
    for (e, &tri) in mesh.triangles().iter().enumerate() {
        let n = mesh.nodes();
        let ke = element_stiffness([n[tri[0]], n[tri[1]], n[tri[2]]], &elasticity[e]);
        let dofs = element_dofs(tri);
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                trip.push((i, j, ke[(a, b)]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.dof_count(), trip))
}

/// Stiffness restricted to the free DOFs (Dirichlet by elimination).
pub fn assemble_stiffness(mesh: &Mesh, elasticity: &[Voigt]) -> Result<SparseSpdSystem> {
    check_materials(mesh, elasticity)?;
    instrument::record_field_op();
    let mut trip = Vec::with_capacity(36 * mesh.triangle_count());
    for (e, &tri) in mesh.triangles().iter().enumerate() {
        let n = mesh.nodes();
        let ke = element_stiffness([n[tri[0]], n[tri[1]], n[tri[2]]], &elasticity[e]);
        let dofs = element_dofs(tri);
        for (a, &i) in dofs.iter().enumerate() {
            let Some(fi) = mesh.free_index(i) else {
                continue;
            };
            for (b, &j) in dofs.iter().enumerate() {
                if let Some(fj) = mesh.free_index(j) {
                    trip.push((fi, fj, ke[(a, b)]));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(mesh.free_dof_count(), trip);
    Ok(SparseSpdSystem::new(matrix, mesh.free_dofs().to_vec()))
}

/// Consistent P1 mass matrix on all DOFs; `uᵀ M u = ∫ u·u dΩ`.
pub fn assemble_mass(mesh: &Mesh) -> SparseSpdSystem {
    instrument::record_field_op();
    let mut trip = Vec::with_capacity(18 * mesh.triangle_count());
    for (e, &tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.area(e);
        for a in 0..3 {
            for b in 0..3 {
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                for c in 0..2 {
                    trip.push((2 * tri[a] + c, 2 * tri[b] + c, m));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(mesh.dof_count(), trip);
    SparseSpdSystem::new(matrix, (0..mesh.dof_count()).collect())
}

/// Solves the eliminated system and scatters the result to a full field
/// that vanishes on the boundary.
pub fn solve_dirichlet(
    mesh: &Mesh,
    system: &SparseSpdSystem,
    rhs: &[f64],
) -> Result<DisplacementField> {
    if system.dofs() != mesh.free_dofs() {
        return Err(Error::InvalidArgument(
            "system is not defined on the mesh's free DOFs".into(),
        ));
    }
    let x = system.solve(rhs)?;
    let mut u = DisplacementField::zeros(mesh.node_count());
    for (&d, v) in mesh.free_dofs().iter().zip(x) {
        u.values[d] = v;
    }
    Ok(u)
}

/// Per-element strains of a nodal field.
pub fn element_strains(mesh: &Mesh, u: &[f64]) -> Vec<Vector3<f64>> {
    assert_eq!(u.len(), mesh.dof_count(), "field does not match the mesh");
    instrument::record_field_op();
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(e, &tri)| ElementKinematics::of(mesh, e).strain(&gather(u, tri)))
        .collect()
}

/// `σ_e = D_e ε_e(u)`.
pub fn element_stress(
    mesh: &Mesh,
    u: &DisplacementField,
    elasticity: &[Voigt],
) -> Result<StressField> {
    check_sizes(mesh, elasticity)?;
    let eps = element_strains(mesh, u.values());
    Ok(StressField {
        values: eps.iter().zip(elasticity).map(|(e, d)| d * e).collect(),
    })
}

/// `(Σ_e area_e ε_e : D_e : ε_e)^{1/2}`.
pub fn energy_norm_displacement(
    mesh: &Mesh,
    u: &DisplacementField,
    elasticity: &[Voigt],
) -> Result<f64> {
    check_sizes(mesh, elasticity)?;
    let eps = element_strains(mesh, u.values());
    let s = compensated_sum(
        eps.iter()
            .zip(elasticity)
            .enumerate()
            .map(|(e, (eps_e, d))| mesh.area(e) * eps_e.dot(&(d * eps_e))),
    );
    Ok(s.max(0.0).sqrt())
}

/// `(Σ_e area_e σ_e : C_e : σ_e)^{1/2}`.
pub fn energy_norm_stress(mesh: &Mesh, sigma: &StressField, compliance: &[Voigt]) -> Result<f64> {
    check_materials(mesh, compliance)?;
    if sigma.len() != mesh.triangle_count() {
        return Err(Error::InvalidArgument(format!(
            "stress field has {} entries for {} triangles",
            sigma.len(),
            mesh.triangle_count()
        )));
    }
    instrument::record_field_op();
    let s = compensated_sum(
        sigma
            .values()
            .iter()
            .zip(compliance)
            .enumerate()
            .map(|(e, (sig, c))| mesh.area(e) * sig.dot(&(c * sig))),
    );
    Ok(s.max(0.0).sqrt())
}

/// `Σ_e area_e B_eᵀ σ_e` on all DOFs.
pub fn internal_force(mesh: &Mesh, sigma: &StressField) -> Vec<f64> {
    assert_eq!(sigma.len(), mesh.triangle_count());
    instrument::record_field_op();
    let mut f = vec![0.0; mesh.dof_count()];
    for (e, &tri) in mesh.triangles().iter().enumerate() {
        let k = ElementKinematics::of(mesh, e);
        let s = sigma.values()[e];
        for a in 0..3 {
            f[2 * tri[a]] += k.area * (k.dndx[a] * s[0] + k.dndy[a] * s[2]);
            f[2 * tri[a] + 1] += k.area * (k.dndy[a] * s[1] + k.dndx[a] * s[2]);
        }
    }
    f
}

/// Euclidean size of the unassembled element force vectors of `σ`: the
/// scale against which the cancellation in the assembled residual is judged.
pub fn element_force_scale(mesh: &Mesh, sigma: &StressField) -> f64 {
    let mut sum = 0.0;
    for e in 0..mesh.triangle_count() {
        let k = ElementKinematics::of(mesh, e);
        let s = sigma.values()[e];
        for a in 0..3 {
            sum += (k.area * (k.dndx[a] * s[0] + k.dndy[a] * s[2])).powi(2);
            sum += (k.area * (k.dndy[a] * s[1] + k.dndx[a] * s[2])).powi(2);
        }
    }
    sum.sqrt()
}

/// Virtual-work residual of a stress field against every test field that
/// vanishes on the boundary: `-∫ σ : ε(u*) + l(u*)` per free DOF.
/// `load` is a consistent nodal force vector on all DOFs.
pub fn fe_equilibrium_residual(mesh: &Mesh, sigma: &StressField, load: Option<&[f64]>) -> Vec<f64> {
    let fint = internal_force(mesh, sigma);
    mesh.free_dofs()
        .iter()
        .map(|&d| load.map_or(0.0, |l| l[d]) - fint[d])
        .collect()
}

/// Consistent nodal forces of a uniform body force.
pub fn body_force_load(mesh: &Mesh, b: [f64; 2]) -> Vec<f64> {
    let mut f = vec![0.0; mesh.dof_count()];
    for (e, &tri) in mesh.triangles().iter().enumerate() {
        let share = mesh.area(e) / 3.0;
        for &n in &tri {
            f[2 * n] += share * b[0];
            f[2 * n + 1] += share * b[1];
        }
    }
    f
}

/// Consistent nodal forces of a uniform traction on the boundary edges
/// whose both end points satisfy `on_edge`.
pub fn edge_traction_load(
    mesh: &Mesh,
    on_edge: impl Fn([f64; 2]) -> bool,
    t: [f64; 2],
) -> Vec<f64> {
    let mut f = vec![0.0; mesh.dof_count()];
    let nodes = mesh.nodes();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for tri in mesh.triangles() {
        for a in 0..3 {
            let (i, j) = (tri[a], tri[(a + 1) % 3]);
            if on_edge(nodes[i]) && on_edge(nodes[j]) {
                edges.push((i.min(j), i.max(j)));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    for (i, j) in edges {
        let len =
            ((nodes[i][0] - nodes[j][0]).powi(2) + (nodes[i][1] - nodes[j][1]).powi(2)).sqrt();
        for n in [i, j] {
            f[2 * n] += 0.5 * len * t[0];
            f[2 * n + 1] += 0.5 * len * t[1];
        }
    }
    f
}

//! Truth snapshots and snapshot POD.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, DisplacementField, StressField, Voigt};
use crate::mesh::Mesh;
use crate::parameter::ParameterPoint;
use crate::sparse::CsrMatrix;
use crate::truth::TruthModel;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const TRUNCATION_FLOOR: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerProductKind {
    /// `∫ u · v dΩ` with the consistent mass matrix.
    L2Mass,
    /// `∫ σ : C(μ0) : τ dΩ` with element-wise constant stresses.
    Compliance,
}

/// A symmetric positive inner product on flat field vectors.
pub trait InnerProduct: Sync {
    fn kind(&self) -> InnerProductKind;

    /// The Gram operator applied to `x`, so that `⟨x, y⟩ = x · apply(y)`.
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    fn dot(&self, x: &[f64], y: &[f64]) -> f64 {
        crate::dense::dot(x, &self.apply(y))
    }

    /// A square-root factor: `W x` with `‖W x‖² = ⟨x, x⟩`.
    fn factor(&self, x: &[f64]) -> Vec<f64>;
}

pub struct MassInnerProduct {
    mass: CsrMatrix,
    triangles: Vec<[usize; 3]>,
    sqrt_areas: Vec<f64>,
    /// Upper Cholesky factor of the unit-area element mass `(1 + δ_ab) / 12`.
    element_factor: Matrix3<f64>,
}

impl MassInnerProduct {
    pub fn new(mesh: &Mesh) -> Self {
        let unit = Matrix3::new(2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0) / 12.0;
        let element_factor = unit
            .cholesky()
            .expect("element mass is positive definite")
            .l()
            .transpose();
        Self {
            mass: assemble_mass(mesh).matrix().clone(),
            triangles: mesh.triangles().to_vec(),
            sqrt_areas: (0..mesh.triangle_count())
                .map(|e| mesh.area(e).sqrt())
                .collect(),
            element_factor,
        }
    }
}

impl InnerProduct for MassInnerProduct {
    fn kind(&self) -> InnerProductKind {
        InnerProductKind::L2Mass
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.mass.mul_vec(x)
    }

    fn factor(&self, x: &[f64]) -> Vec<f64> {
        crate::instrument::record_field_op();
        let mut out = Vec::with_capacity(6 * self.triangles.len());
        for (tri, s) in self.triangles.iter().zip(&self.sqrt_areas) {
            for comp in 0..2 {
                let v = Vector3::new(
                    x[2 * tri[0] + comp],
                    x[2 * tri[1] + comp],
                    x[2 * tri[2] + comp],
                );
                let w = self.element_factor * v * *s;
                out.extend_from_slice(w.as_slice());
            }
        }
        out
    }
}

pub struct ComplianceInnerProduct {
    /// `area_e C_e` per element.
    weights: Vec<Voigt>,
    /// `√area_e L_eᵀ` with `C_e = L_e L_eᵀ`.
    factors: Vec<Voigt>,
}

impl ComplianceInnerProduct {
    pub fn new(mesh: &Mesh, compliance: &[Voigt]) -> Self {
        let mut cache: Vec<(Voigt, Voigt)> = Vec::new();
        let factors = compliance
            .iter()
            .enumerate()
            .map(|(e, c)| {
                let lt = match cache.iter().find(|(k, _)| k == c) {
                    Some((_, lt)) => *lt,
                    None => {
                        let lt = c
                            .cholesky()
                            .expect("compliance is positive definite")
                            .l()
                            .transpose();
                        cache.push((*c, lt));
                        lt
                    }
                };
                lt * mesh.area(e).sqrt()
            })
            .collect();
        Self {
            weights: compliance
                .iter()
                .enumerate()
                .map(|(e, c)| c * mesh.area(e))
                .collect(),
            factors,
        }
    }
}

impl InnerProduct for ComplianceInnerProduct {
    fn kind(&self) -> InnerProductKind {
        InnerProductKind::Compliance
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        crate::instrument::record_field_op();
        let mut out = vec![0.0; x.len()];
        for (e, w) in self.weights.iter().enumerate() {
            for a in 0..3 {
                out[3 * e + a] = (0..3).map(|b| w[(a, b)] * x[3 * e + b]).sum();
            }
        }
        out
    }

    fn factor(&self, x: &[f64]) -> Vec<f64> {
        crate::instrument::record_field_op();
        let mut out = Vec::with_capacity(x.len());
        for (e, f) in self.factors.iter().enumerate() {
            let w = f * Vector3::new(x[3 * e], x[3 * e + 1], x[3 * e + 2]);
            out.extend_from_slice(w.as_slice());
        }
        out
    }
}

/// Truth fields at the training points.
#[derive(Clone, Debug)]
pub struct SnapshotDatabase {
    pub training_points: Vec<ParameterPoint>,
    pub u0_snapshots: Vec<DisplacementField>,
    pub sigma0_snapshots: Vec<StressField>,
    pub mu0: ParameterPoint,
}

impl SnapshotDatabase {
    pub fn len(&self) -> usize {
        self.training_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.training_points.is_empty()
    }

    pub fn displacement_vectors(&self) -> Vec<Vec<f64>> {
        self.u0_snapshots
            .iter()
            .map(|u| u.values().to_vec())
            .collect()
    }

    pub fn stress_vectors(&self) -> Vec<Vec<f64>> {
        self.sigma0_snapshots
            .iter()
            .map(StressField::to_flat)
            .collect()
    }
}

/// Runs the truth solves in parallel on the current rayon pool; the result
/// order follows `training_points`.
pub fn compute_snapshots(
    truth: &TruthModel,
    training_points: &[ParameterPoint],
) -> Result<SnapshotDatabase> {
    if training_points.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    for mu in training_points {
        if !truth.domain().contains(mu) {
            return Err(Error::InvalidParameter(format!(
                "training point {:?} outside the parameter domain",
                mu.0
            )));
        }
    }
    let solutions: Vec<_> = training_points
        .par_iter()
        .map(|mu| truth.solve(mu))
        .collect::<Result<_>>()?;
    let (u0_snapshots, sigma0_snapshots) = solutions.into_iter().map(|s| (s.u0, s.sigma0)).unzip();
    Ok(SnapshotDatabase {
        training_points: training_points.to_vec(),
        u0_snapshots,
        sigma0_snapshots,
        mu0: truth.mu0(),
    })
}

/// `H_ij = ⟨s_i, s_j⟩`.
pub fn gram_matrix(snapshots: &[Vec<f64>], ip: &dyn InnerProduct) -> DMatrix<f64> {
    let applied: Vec<Vec<f64>> = snapshots.par_iter().map(|s| ip.apply(s)).collect();
    let n = snapshots.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5
                * (crate::dense::dot(&snapshots[i], &applied[j])
                    + crate::dense::dot(&snapshots[j], &applied[i]));
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending; column `i` of
/// `vectors` belongs to `values[i]`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi rotations.
pub fn symmetric_eigendecomposition(h: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}×{}, not square",
            n,
            h.ncols()
        )));
    }
    let scale = h.abs().max();
    if (h - h.transpose()).abs().max() > 1e-12 * scale {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericFailure(
            "matrix has non-finite entries".into(),
        ));
    }
    let mut a = h.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                let g = 100.0 * apq.abs();
                // negligible against both diagonals: annihilate without rotating
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NumericFailure(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Orthonormal POD modes with their eigenvalue spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis {
    pub kind: InnerProductKind,
    /// All Gram eigenvalues, descending, negatives clamped to zero.
    pub eigenvalues: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
}

impl PodBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Number of eigenvalues above the truncation floor.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.eigenvalues)
    }

    pub fn mode(&self, i: usize) -> &[f64] {
        &self.modes[i]
    }
}

pub fn numerical_rank(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    values
        .iter()
        .filter(|&&l| l > TRUNCATION_FLOOR * max)
        .count()
}

/// `φ_i = Σ_j s_j ζ_ij / √λ_i`, followed by one Cholesky
/// re-orthonormalisation pass that preserves the nested spans.
pub fn pod_modes(
    eigen: &SymmetricEigen,
    snapshots: &[Vec<f64>],
    n_modes: usize,
    ip: &dyn InnerProduct,
) -> Result<PodBasis> {
    let rank = numerical_rank(&eigen.values);
    if n_modes > rank {
        return Err(Error::RankDeficiency {
            requested: n_modes,
            rank,
        });
    }
    let dim = snapshots.first().map_or(0, Vec::len);
    let mut modes: Vec<Vec<f64>> = (0..n_modes)
        .into_par_iter()
        .map(|i| {
            let inv = 1.0 / eigen.values[i].sqrt();
            let mut phi = vec![0.0; dim];
            for (j, s) in snapshots.iter().enumerate() {
                let w = eigen.vectors[(j, i)] * inv;
                for (p, x) in phi.iter_mut().zip(s) {
                    *p += w * x;
                }
            }
            phi
        })
        .collect();
    reorthonormalize(&mut modes, ip)?;
    let eigenvalues = eigen.values.iter().map(|&l| l.max(0.0)).collect();
    Ok(PodBasis {
        kind: ip.kind(),
        eigenvalues,
        modes,
    })
}

/// `Φ ← Φ L⁻ᵀ` with `ΦᵀGΦ = L Lᵀ`; the leading-k spans are unchanged.
fn reorthonormalize(modes: &mut [Vec<f64>], ip: &dyn InnerProduct) -> Result<()> {
    if modes.is_empty() {
        return Ok(());
    }
    let g = gram_matrix(modes, ip);
    let l = g
        .cholesky()
        .ok_or_else(|| Error::NumericFailure("POD modes are numerically dependent".into()))?
        .l();
    let n = modes.len();
    let dim = modes[0].len();
    // row k of Φᵀ: forward substitution L Yᵀ = Φᵀ
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut y = modes[k].clone();
        for (j, prev) in out.iter().enumerate() {
            let f = l[(k, j)];
            for d in 0..dim {
                y[d] -= f * prev[d];
            }
        }
        let inv = 1.0 / l[(k, k)];
        y.iter_mut().for_each(|v| *v *= inv);
        out.push(y);
    }
    modes.clone_from_slice(&out);
    Ok(())
}

/// Eigenpairs of the Gram matrix without forming it: Householder QR of the
/// weighted snapshot matrix `Y = [W s_j]`, then one-sided Jacobi rotations
/// on `R` until its columns are orthogonal. Since `H = RᵀR`, the rotations
/// are the cyclic Jacobi rotations of `H`; working on `R` keeps small
/// eigenvalues accurate relative to themselves rather than to `λ_max`.
pub fn gram_eigendecomposition(
    snapshots: &[Vec<f64>],
    ip: &dyn InnerProduct,
) -> Result<SymmetricEigen> {
    let n = snapshots.len();
    if n == 0 {
        return Err(Error::InvalidArgument("snapshot list is empty".into()));
    }
    let weighted: Vec<Vec<f64>> = snapshots.par_iter().map(|s| ip.factor(s)).collect();
    let rows = weighted[0].len();
    let y = DMatrix::from_fn(rows, n, |r, c| weighted[c][r]);
    let mut a = if rows >= n { y.qr().r() } else { y };
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut a, &mut v] {
                    for k in 0..m.nrows() {
                        let (xp, xq) = (m[(k, p)], m[(k, q)]);
                        m[(k, p)] = c * xp - s * xq;
                        m[(k, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericFailure(format!(
            "one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps"
        )));
    }
    let sq: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sq[j].total_cmp(&sq[i]));
    Ok(SymmetricEigen {
        values: order.iter().map(|&i| sq[i]).collect(),
        vectors: DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]),
    })
}

/// Full pipeline: spectrum of the Gram matrix, then modes.
pub fn snapshot_pod(
    snapshots: &[Vec<f64>],
    n_modes: usize,
    ip: &dyn InnerProduct,
) -> Result<PodBasis> {
    let eigen = gram_eigendecomposition(snapshots, ip)?;
    pod_modes(&eigen, snapshots, n_modes, ip)
}

/// `Σ_j ‖s_j - Π_m s_j‖²` with `Π_m` the orthogonal projector onto the
/// first `m` modes.
pub fn projection_residual(
    snapshots: &[Vec<f64>],
    basis: &PodBasis,
    m: usize,
    ip: &dyn InnerProduct,
) -> f64 {
    snapshots
        .par_iter()
        .map(|s| {
            let gs = ip.apply(s);
            let mut r = s.clone();
            for phi in &basis.modes[..m] {
                let c = crate::dense::dot(phi, &gs);
                for (ri, p) in r.iter_mut().zip(phi) {
                    *ri -= c * p;
                }
            }
            ip.dot(&r, &r)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;

    struct Euclid;

    impl InnerProduct for Euclid {
        fn kind(&self) -> InnerProductKind {
            InnerProductKind::L2Mass
        }

        fn apply(&self, x: &[f64]) -> Vec<f64> {
            x.to_vec()
        }

        fn factor(&self, x: &[f64]) -> Vec<f64> {
            x.to_vec()
        }
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = symmetric_eigendecomposition(&h).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn jacobi_matches_reference_eigensolver() {
        let mut seed = 7;
        let b = DMatrix::from_fn(20, 20, |_, _| lcg(&mut seed));
        let h = &b * b.transpose() + DMatrix::identity(20, 20) * 0.1;
        let e = symmetric_eigendecomposition(&h).unwrap();
        let mut reference: Vec<f64> = h
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        let hn = h.norm();
        for (a, b) in e.values.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-10 * hn);
        }
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
        let rec = &e.vectors * lam * e.vectors.transpose();
        assert!((rec - &h).abs().max() <= 1e-12 * hn);
        for i in 0..20 {
            let r = &h * e.vectors.column(i) - e.vectors.column(i) * e.values[i];
            assert!(r.norm() <= 1e-10 * hn);
        }
        let id = e.vectors.transpose() * &e.vectors;
        assert!((id - DMatrix::identity(20, 20)).abs().max() < 1e-13);
    }

    #[test]
    fn single_snapshot_gram() {
        let s = vec![vec![1.0, 2.0, 2.0]];
        let h = gram_matrix(&s, &Euclid);
        assert_eq!(h[(0, 0)], 9.0);
    }

    #[test]
    fn duplicated_snapshot_is_rank_deficient() {
        let s = vec![vec![1.0, 2.0, 0.5], vec![1.0, 2.0, 0.5]];
        let e = symmetric_eigendecomposition(&gram_matrix(&s, &Euclid)).unwrap();
        assert!(e.values[1] <= 1e-12 * e.values[0]);
        assert!(matches!(
            pod_modes(&e, &s, 2, &Euclid),
            Err(Error::RankDeficiency {
                requested: 2,
                rank: 1
            })
        ));
    }

    #[test]
    fn mass_gram_matches_quadrature() {
        let mesh = build_structured_mesh(4).unwrap();
        let f1 = DisplacementField::interpolate(&mesh, |x| [x[0], 0.0]);
        let f2 = DisplacementField::interpolate(&mesh, |x| [1.0, x[1]]);
        let ip = MassInnerProduct::new(&mesh);
        let h = gram_matrix(&[f1.into_vec(), f2.into_vec()], &ip);
        // exact integrals of products of linear fields over the unit square
        assert!((h[(0, 0)] - 1.0 / 3.0).abs() < 1e-14);
        assert!((h[(0, 1)] - 0.5).abs() < 1e-14);
        assert!((h[(1, 1)] - (1.0 + 1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn truncation_identity_and_orthonormality() {
        let mut seed = 3;
        let dim = 60;
        let snaps: Vec<Vec<f64>> = (0..12)
            .map(|j| {
                let decay = 0.5f64.powi(j);
                (0..dim).map(|_| decay * lcg(&mut seed)).collect()
            })
            .collect();
        let basis = snapshot_pod(&snaps, 12, &Euclid).unwrap();
        let g = gram_matrix(&basis.modes, &Euclid);
        assert!((g - DMatrix::identity(12, 12)).abs().max() < 1e-12);
        for m in 0..12 {
            let tail: f64 = basis.eigenvalues[m..].iter().sum();
            let res = projection_residual(&snaps, &basis, m, &Euclid);
            assert!(
                (res - tail).abs() <= 1e-10 * tail,
                "m = {m}: {res} vs {tail}"
            );
        }
        assert!(projection_residual(&snaps, &basis, 12, &Euclid) < 1e-20);
    }

    #[test]
    fn factors_reproduce_inner_products() {
        let mesh = build_structured_mesh(5).unwrap();
        let mut seed = 5;
        let x: Vec<f64> = (0..mesh.dof_count()).map(|_| lcg(&mut seed)).collect();
        let ip = MassInnerProduct::new(&mesh);
        let w = ip.factor(&x);
        let a = crate::dense::dot(&w, &w);
        assert!((a - ip.dot(&x, &x)).abs() <= 1e-14 * a);
        let (_, c) = crate::parameter::hooke_plane_strain(1.0, 0.3).unwrap();
        let cs = vec![c; mesh.triangle_count()];
        let ip = ComplianceInnerProduct::new(&mesh, &cs);
        let s: Vec<f64> = (0..3 * mesh.triangle_count())
            .map(|_| lcg(&mut seed))
            .collect();
        let w = ip.factor(&s);
        let b = crate::dense::dot(&w, &w);
        assert!((b - ip.dot(&s, &s)).abs() <= 1e-14 * b);
    }

    #[test]
    fn factored_spectrum_matches_gram_route() {
        let mut seed = 9;
        let snaps: Vec<Vec<f64>> = (0..8)
            .map(|j| (0..40).map(|_| 0.3f64.powi(j) * lcg(&mut seed)).collect())
            .collect();
        let a = gram_eigendecomposition(&snaps, &Euclid).unwrap();
        let b = symmetric_eigendecomposition(&gram_matrix(&snaps, &Euclid)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-13 * a.values[0]);
        }
        // graded spectrum: the factored route keeps small eigenvalues accurate
        let basis = snapshot_pod(&snaps, 8, &Euclid).unwrap();
        for m in 0..8 {
            let tail: f64 = basis.eigenvalues[m..].iter().sum();
            let res = projection_residual(&snaps, &basis, m, &Euclid);
            assert!((res - tail).abs() <= 1e-10 * tail, "m = {m}");
        }
    }
}

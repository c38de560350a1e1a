//! The parameter vector, its admissible hypercube and the affine
//! decomposition of material and boundary data.
//!
//! `μ = (μ1, μ2, μ3, μ4)`: `μ1` is the elastic contrast `E_inc / E_mat` and
//! `(μ2, μ3, μ4)` weight the three unit macro strains
//! `e1⊗e1`, `e2⊗e2` and `sym(e1⊗e2)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Voigt;

/// Barycentre of the unit square.
pub const CENTER: [f64; 2] = [0.5, 0.5];

/// Number of affine terms of the elasticity and compliance tensors.
pub const N_MATERIAL_TERMS: usize = 2;
/// Number of affine Dirichlet terms.
pub const N_DIRICHLET_TERMS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint(pub [f64; 4]);

impl ParameterPoint {
    pub fn new(contrast: f64, e11: f64, e22: f64, e12: f64) -> Self {
        Self([contrast, e11, e22, e12])
    }

    pub fn contrast(&self) -> f64 {
        self.0[0]
    }

    pub fn load(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.0.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite parameter {:?}",
                self.0
            )));
        }
        if self.0[0] <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "contrast must be positive, got {}",
                self.0[0]
            )));
        }
        Ok(())
    }
}

/// Closed intervals per parameter coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    pub bounds: [[f64; 2]; 4],
}

impl Default for ParameterDomain {
    fn default() -> Self {
        Self {
            bounds: [[0.1, 10.0], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]],
        }
    }
}

impl ParameterDomain {
    pub fn contains(&self, mu: &ParameterPoint) -> bool {
        mu.0.iter()
            .zip(&self.bounds)
            .all(|(v, b)| *v >= b[0] && *v <= b[1])
    }

    /// Affine map from the unit hypercube.
    pub fn from_unit(&self, u: [f64; 4]) -> ParameterPoint {
        let mut mu = [0.0; 4];
        for k in 0..4 {
            let [lo, hi] = self.bounds[k];
            mu[k] = lo + (hi - lo) * u[k];
        }
        ParameterPoint(mu)
    }
}

/// Scalar weights of the affine expansions at one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineCoefficients {
    /// Elasticity weights: `D = D̄1 γd1 + D̄2 γd2`.
    pub gamma_d: [f64; 2],
    /// Compliance weights: `C = C̄1 γc1 + C̄2 γc2`.
    pub gamma_c: [f64; 2],
    /// Dirichlet weights of the three unit macro strains.
    pub gamma_w: [f64; 3],
    /// Traction load weights.
    pub gamma_t: Vec<f64>,
    /// Body load weights.
    pub gamma_b: Vec<f64>,
}

impl AffineCoefficients {
    /// Elasticity scale on a phase with inclusion indicator `h`.
    pub fn elasticity_scale(&self, h: f64) -> f64 {
        self.gamma_d[0] + self.gamma_d[1] * h
    }

    pub fn compliance_scale(&self, h: f64) -> f64 {
        self.gamma_c[0] + self.gamma_c[1] * h
    }

    /// Traction then body weights, in the order of the load factors.
    pub fn load_weights(&self) -> Vec<f64> {
        self.gamma_t.iter().chain(&self.gamma_b).copied().collect()
    }
}

/// Plane-strain Hooke tensor and its inverse.
pub fn hooke_plane_strain(young: f64, poisson: f64) -> Result<(Voigt, Voigt)> {
    if poisson >= 0.5 {
        return Err(Error::IncompressibleMaterial(poisson));
    }
    if !(young > 0.0) || poisson < 0.0 {
        return Err(Error::InvalidMaterial(format!(
            "E = {young}, nu = {poisson}"
        )));
    }
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let shear = young / (2.0 * (1.0 + poisson));
    let d = Voigt::new(
        lambda + 2.0 * shear,
        lambda,
        0.0,
        lambda,
        lambda + 2.0 * shear,
        0.0,
        0.0,
        0.0,
        shear,
    );
    // closed-form inverse of the block structure
    let det = (lambda + 2.0 * shear).powi(2) - lambda * lambda;
    let c = Voigt::new(
        (lambda + 2.0 * shear) / det,
        -lambda / det,
        0.0,
        -lambda / det,
        (lambda + 2.0 * shear) / det,
        0.0,
        0.0,
        0.0,
        1.0 / shear,
    );
    Ok((d, c))
}

/// Lamé constants `(λ, G)` of an isotropic material.
pub fn lame(young: f64, poisson: f64) -> (f64, f64) {
    (
        young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson)),
        young / (2.0 * (1.0 + poisson)),
    )
}

/// Affine weights of the two-phase composite: `γd = (1, μ1 - 1)`,
/// `γc = (1, 1/μ1 - 1)`, `γw = (μ2, μ3, μ4)`. The composite carries no
/// traction or body loads.
pub fn evaluate_affine_coefficients(mu: &ParameterPoint) -> Result<AffineCoefficients> {
    mu.validate()?;
    let c = mu.contrast();
    Ok(AffineCoefficients {
        gamma_d: [1.0, c - 1.0],
        gamma_c: [1.0, 1.0 / c - 1.0],
        gamma_w: mu.load(),
        gamma_t: Vec::new(),
        gamma_b: Vec::new(),
    })
}

/// Symmetric 2×2 macroscopic strain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacroStrain {
    pub e11: f64,
    pub e22: f64,
    pub e12: f64,
}

impl MacroStrain {
    /// The unit strains `ε̄1 = e1⊗e1`, `ε̄2 = e2⊗e2`, `ε̄3 = sym(e1⊗e2)`.
    pub fn unit(k: usize) -> Self {
        match k {
            0 => Self {
                e11: 1.0,
                e22: 0.0,
                e12: 0.0,
            },
            1 => Self {
                e11: 0.0,
                e22: 1.0,
                e12: 0.0,
            },
            2 => Self {
                e11: 0.0,
                e22: 0.0,
                e12: 0.5,
            },
            _ => panic!("macro strain index {k} out of range"),
        }
    }

    /// `w(x) = ε (x - x̄)`.
    pub fn displacement(&self, x: [f64; 2]) -> [f64; 2] {
        let dx = x[0] - CENTER[0];
        let dy = x[1] - CENTER[1];
        [self.e11 * dx + self.e12 * dy, self.e12 * dx + self.e22 * dy]
    }

    /// Voigt strain with engineering shear.
    pub fn voigt(&self) -> Vector3<f64> {
        Vector3::new(self.e11, self.e22, 2.0 * self.e12)
    }
}

/// `ε^M(μ) = μ2 ε̄1 + μ3 ε̄2 + μ4 ε̄3`.
pub fn macro_strain(mu: &ParameterPoint) -> MacroStrain {
    let [a, b, c] = mu.load();
    MacroStrain {
        e11: a,
        e22: b,
        e12: 0.5 * c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hooke_reference_values() {
        let (d, c) = hooke_plane_strain(1.0, 0.3).unwrap();
        let (lambda, g) = lame(1.0, 0.3);
        assert!((lambda - 0.576923).abs() < 5e-7);
        assert!((g - 0.384615).abs() < 5e-7);
        assert!((d[(0, 0)] - 1.3461538).abs() < 5e-7);
        assert_eq!(d[(0, 1)], lambda);
        assert_eq!(d[(2, 2)], g);
        assert!(((d * c) - Voigt::identity()).abs().max() <= 1e-14);
    }

    #[test]
    fn zero_poisson_is_diagonal() {
        let (d, _) = hooke_plane_strain(2.0, 0.0).unwrap();
        assert_eq!(d[(0, 1)], 0.0);
        assert_eq!(d[(0, 0)], 2.0);
    }

    #[test]
    fn incompressible_rejected() {
        assert!(matches!(
            hooke_plane_strain(1.0, 0.5),
            Err(Error::IncompressibleMaterial(_))
        ));
    }

    #[test]
    fn affine_weights() {
        let g = evaluate_affine_coefficients(&ParameterPoint::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(g.gamma_d, [1.0, 0.0]);
        assert_eq!(g.gamma_c, [1.0, 0.0]);
        let g = evaluate_affine_coefficients(&ParameterPoint::new(10.0, 0.2, -0.3, 0.4)).unwrap();
        assert!((g.gamma_c[1] + 0.9).abs() < 1e-15);
        assert_eq!(g.gamma_w, [0.2, -0.3, 0.4]);
        assert!(g.gamma_t.is_empty() && g.gamma_b.is_empty());
        assert!(matches!(
            evaluate_affine_coefficients(&ParameterPoint::new(0.0, 0.0, 0.0, 0.0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn inclusion_tensor_scales_with_contrast() {
        let (d, c) = hooke_plane_strain(1.0, 0.3).unwrap();
        let g = evaluate_affine_coefficients(&ParameterPoint::new(10.0, 0.0, 0.0, 0.0)).unwrap();
        let d_inc = d * g.gamma_d[0] + d * g.gamma_d[1];
        assert!((d_inc - d * 10.0).abs().max() <= 1e-14);
        let c_inc = c * g.compliance_scale(1.0);
        assert!(((d_inc * c_inc) - Voigt::identity()).abs().max() <= 1e-14);
    }

    #[test]
    fn macro_strain_evaluation() {
        let w = macro_strain(&ParameterPoint::new(3.0, 0.0, 0.0, 1.0));
        assert_eq!(w.displacement([1.0, 1.0]), [0.25, 0.25]);
        assert_eq!(w.displacement([0.5, 0.5]), [0.0, 0.0]);
        let w0 = macro_strain(&ParameterPoint::new(3.0, 0.0, 0.0, 0.0));
        assert_eq!(w0.displacement([0.1, 0.9]), [0.0, 0.0]);
    }

    #[test]
    fn domain_mapping() {
        let d = ParameterDomain::default();
        let mid = d.from_unit([0.5; 4]);
        assert_eq!(mid.0, [5.05, 0.0, 0.0, 0.0]);
        assert!(d.contains(&mid));
        assert!(!d.contains(&ParameterPoint::new(11.0, 0.0, 0.0, 0.0)));
    }
}

//! Invariant suite run against a stored archive.

use std::path::Path;
use std::time::Instant;

use crate::archive::{inspect_archive, LoadedArchive};
use crate::certification::truth_extras;
use crate::fem::assemble_full_stiffness;
use crate::model::Dimensions;
use crate::parameter::ParameterPoint;
use crate::pod::{
    projection_residual, ComplianceInnerProduct, InnerProduct, MassInnerProduct, PodBasis,
};
use crate::sobol::sobol_sample_skip;

pub const ORTHONORMALITY_TOL: f64 = 1e-10;
pub const POD_TAIL_TOL: f64 = 1e-10;
pub const OPERATOR_TOL: f64 = 1e-12;
pub const PATH_TOL: f64 = 1e-12;
pub const SANDWICH_SLACK: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const EQUILIBRIUM_TOL: f64 = 1e-9;
pub const SNAPSHOT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(CheckOutcome {
            name,
            passed,
            detail,
        });
    }
}

/// Reads the archive leniently and runs the suite. `quick` keeps the
/// checks that need no truth solve.
pub fn validate_archive(dir: &Path, quick: bool) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (archive_report, loaded) = inspect_archive(dir);
    let detail = if archive_report.is_clean() {
        "all checksums match".into()
    } else {
        archive_report.issues.join("; ")
    };
    report.push("manifest", archive_report.is_clean(), detail);
    if let Ok(archive) = loaded {
        run_checks(&archive, quick, &mut report);
    }
    report
}

fn fmt(v: f64) -> String {
    format!("{v:.3e}")
}

pub fn run_checks(a: &LoadedArchive, quick: bool, report: &mut ValidationReport) {
    let start = Instant::now();
    let truth = &a.truth;
    let model = &a.model;
    let dims = model.default_dimensions();
    let mass = MassInnerProduct::new(truth.mesh());
    let c0 = match truth.coefficients(&truth.mu0()) {
        Ok(c) => c,
        Err(e) => {
            report.push("reference parameter", false, e.to_string());
            return;
        }
    };
    let compliance = ComplianceInnerProduct::new(truth.mesh(), &truth.compliance(&c0));

    let e = orthonormality_error(&model.primal.basis, &mass);
    report.push(
        "displacement modes orthonormal",
        e <= ORTHONORMALITY_TOL,
        fmt(e),
    );
    let e = orthonormality_error(&model.dual.basis, &compliance);
    report.push("stress modes orthonormal", e <= ORTHONORMALITY_TOL, fmt(e));

    for (name, basis) in [
        ("displacement spectrum", &model.primal.basis),
        ("stress spectrum", &model.dual.basis),
    ] {
        let ok = basis.eigenvalues.windows(2).all(|w| w[0] >= w[1])
            && basis.eigenvalues.iter().all(|v| *v >= 0.0);
        report.push(name, ok, format!("{} eigenvalues", basis.eigenvalues.len()));
    }

    let probes = sobol_sample_skip(&model.domain, 3, 101);
    let mut worst = 0.0f64;
    let mut failure = None;
    for mu in &probes {
        match operator_mismatch(a, mu) {
            Ok(v) => worst = worst.max(v),
            Err(e) => failure = Some(e),
        }
    }
    report.push(
        "affine operators match projections",
        failure.is_none() && worst <= OPERATOR_TOL,
        failure.unwrap_or_else(|| fmt(worst)),
    );

    let mut worst = 0.0f64;
    let mut failure = None;
    for mu in &probes {
        match (
            model.evaluate(mu, dims),
            model.evaluate_reference(truth, mu, dims),
        ) {
            (Ok(f), Ok(r)) => {
                worst = worst
                    .max(rel(f.nu_up, r.nu_up))
                    .max(rel(f.nu_low, r.nu_low))
                    .max(rel(f.qoi, r.qoi));
            }
            (Err(e), _) | (_, Err(e)) => failure = Some(e.to_string()),
        }
    }
    report.push(
        "fast and reference paths agree",
        failure.is_none() && worst <= PATH_TOL,
        failure.unwrap_or_else(|| fmt(worst)),
    );

    if !quick {
        pod_tail_checks(a, &mass, &compliance, report);
        truth_checks(a, dims, report);
    }
    log::info!(
        "validation finished in {:.3} s",
        start.elapsed().as_secs_f64()
    );
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `max |⟨φ_i, φ_j⟩ - δ_ij|`.
pub fn orthonormality_error(basis: &PodBasis, ip: &dyn InnerProduct) -> f64 {
    let applied: Vec<Vec<f64>> = basis.modes.iter().map(|m| ip.apply(m)).collect();
    let mut worst = 0.0f64;
    for (i, a) in applied.iter().enumerate() {
        for (j, m) in basis.modes.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            let v = crate::dense::dot(m, a);
            if !v.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

/// Largest relative entry mismatch between the affine reduced stiffness and
/// compliance matrices and direct projections of the assembled operators.
fn operator_mismatch(a: &LoadedArchive, mu: &ParameterPoint) -> Result<f64, String> {
    let truth = &a.truth;
    let c = truth.coefficients(mu).map_err(|e| e.to_string())?;
    let primal = &a.model.primal;
    let n = primal.max_modes();
    let k =
        assemble_full_stiffness(truth.mesh(), &truth.elasticity(&c)).map_err(|e| e.to_string())?;
    let applied: Vec<Vec<f64>> = primal.basis.modes.iter().map(|m| k.mul_vec(m)).collect();
    let affine = primal.reduced_matrix(&c, n);
    let mut worst = 0.0f64;
    let scale = affine.abs().max();
    for i in 0..n {
        for j in 0..n {
            let direct = crate::dense::dot(&primal.basis.modes[i], &applied[j]);
            worst = worst.max((direct - affine[(i, j)]).abs() / scale);
        }
    }
    let dual = &a.model.dual;
    let m = dual.max_modes();
    let ip = ComplianceInnerProduct::new(truth.mesh(), &truth.compliance(&c));
    let applied: Vec<Vec<f64>> = dual.basis.modes.iter().map(|s| ip.apply(s)).collect();
    let affine = dual.reduced_matrix(&c, m);
    let scale = affine.abs().max();
    for i in 0..m {
        for j in 0..m {
            let direct = crate::dense::dot(&dual.basis.modes[i], &applied[j]);
            worst = worst.max((direct - affine[(i, j)]).abs() / scale);
        }
    }
    Ok(worst)
}

/// Largest relative gap between the snapshot projection residual and the
/// eigenvalue tail, over every truncation stored.
pub fn pod_tail_error(snapshots: &[Vec<f64>], basis: &PodBasis, ip: &dyn InnerProduct) -> f64 {
    let mut worst = 0.0f64;
    for m in 0..basis.len() {
        let tail: f64 = basis.eigenvalues[m..].iter().sum();
        let res = projection_residual(snapshots, basis, m, ip);
        worst = worst.max((res - tail).abs() / tail);
    }
    worst
}

fn pod_tail_checks(
    a: &LoadedArchive,
    mass: &MassInnerProduct,
    compliance: &ComplianceInnerProduct,
    report: &mut ValidationReport,
) {
    let e = pod_tail_error(
        &a.snapshots.displacement_vectors(),
        &a.model.primal.basis,
        mass,
    );
    report.push(
        "displacement projection residual matches eigenvalue tail",
        e <= POD_TAIL_TOL,
        fmt(e),
    );
    let e = pod_tail_error(
        &a.snapshots.stress_vectors(),
        &a.model.dual.basis,
        compliance,
    );
    report.push(
        "stress projection residual matches eigenvalue tail",
        e <= POD_TAIL_TOL,
        fmt(e),
    );
}

fn truth_checks(a: &LoadedArchive, dims: Dimensions, report: &mut ValidationReport) {
    let truth = &a.truth;
    let model = &a.model;

    // stored snapshot 0 is reproduced by a fresh truth solve
    let mu = a.snapshots.training_points[0];
    match truth.solve(&mu) {
        Ok(sol) => {
            let stored = a.snapshots.u0_snapshots[0].values();
            let diff = sol
                .u0
                .values()
                .iter()
                .zip(stored)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let scale = stored
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
            report.push(
                "stored snapshot reproduced",
                diff <= SNAPSHOT_TOL * scale,
                fmt(diff / scale),
            );
        }
        Err(e) => report.push("stored snapshot reproduced", false, e.to_string()),
    }

    let mut points: Vec<ParameterPoint> = [0.1, 0.5, 1.6, 4.0, 10.0]
        .iter()
        .map(|&c| ParameterPoint::new(c, 0.0, 0.0, 1.0))
        .collect();
    points.extend(sobol_sample_skip(&model.domain, 3, 211));
    let mut sandwich = (true, 0.0f64);
    let mut pythagoras = 0.0f64;
    let mut equilibrium = 0.0f64;
    let mut failure = None;
    for mu in &points {
        let mut run = || -> crate::error::Result<()> {
            let s = model.solve_online(mu, dims)?;
            let e = model.evaluate_state(&s);
            let ur = model.reduced_field(&s);
            let (extras, sigma_h) = truth_extras(truth, mu, &ur, e.nu_up, e.nu_low)?;
            let err = extras.err_true;
            let slack = SANDWICH_SLACK * e.nu_up.max(err);
            if e.nu_low > err + slack || err > e.nu_up + slack {
                sandwich.0 = false;
            }
            sandwich.1 = sandwich
                .1
                .max((e.nu_low - err).max(err - e.nu_up) / e.nu_up.max(f64::MIN_POSITIVE));
            let sigma_hat = model.recovered_stress_field(&s);
            let gap = truth.stress_norm(&sigma_h.sub(&sigma_hat), &s.coefficients)?;
            if e.nu_up > 0.0 {
                pythagoras = pythagoras
                    .max((e.nu_up.powi(2) - err * err - gap * gap).abs() / e.nu_up.powi(2));
            }
            let (r, scale) = model.equilibrium_residual(truth, &s);
            equilibrium = equilibrium.max(r / scale.max(f64::MIN_POSITIVE));
            Ok(())
        };
        if let Err(e) = run() {
            failure = Some(format!("mu = {:?}: {e}", mu.0));
        }
    }
    let detail = |v: f64| failure.clone().unwrap_or_else(|| fmt(v));
    report.push(
        "error sandwiched by the bounds",
        failure.is_none() && sandwich.0,
        detail(sandwich.1),
    );
    report.push(
        "hypercircle identity",
        failure.is_none() && pythagoras <= IDENTITY_TOL,
        detail(pythagoras),
    );
    report.push(
        "recovered stress is equilibrated",
        failure.is_none() && equilibrium <= EQUILIBRIUM_TOL,
        detail(equilibrium),
    );

    let exact = ParameterPoint::new(1.0, 0.0, 0.0, 1.0);
    match model.evaluate_with_truth(truth, &exact, dims) {
        Ok(e) => {
            let t = e.truth.expect("truth attached");
            let ok = t.err_true <= 1e-10 && e.nu_low <= 1e-10;
            report.push(
                "exact at unit contrast",
                ok,
                format!("err {} nu_low {}", fmt(t.err_true), fmt(e.nu_low)),
            );
        }
        Err(e) => report.push("exact at unit contrast", false, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::save_archive;
    use crate::offline::{build_offline, OfflineConfig};

    fn archive() -> tempfile::TempDir {
        let build = build_offline(&OfflineConfig {
            mesh_n: 10,
            n_samples: 10,
            ..OfflineConfig::default()
        })
        .unwrap();
        let tmp = tempfile::tempdir().unwrap();
        save_archive(&build, tmp.path()).unwrap();
        tmp
    }

    #[test]
    fn fresh_archive_passes_everything() {
        let tmp = archive();
        let report = validate_archive(tmp.path(), false);
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert!(report.checks.len() >= 14);
        let quick = validate_archive(tmp.path(), true);
        assert!(quick.passed());
        assert!(quick.checks.len() < report.checks.len());
    }

    #[test]
    fn tampered_mode_is_detected() {
        let tmp = archive();
        let path = tmp.path().join("displacement_modes.f64");
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8 * 40 + 7] ^= 0x01;
        std::fs::write(&path, bytes).unwrap();
        let report = validate_archive(tmp.path(), true);
        assert!(!report.passed());
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert!(failed.contains(&"manifest"));
        assert!(failed.contains(&"displacement modes orthonormal"));
    }

    #[test]
    fn missing_archive_fails() {
        let tmp = tempfile::tempdir().unwrap();
        let report = validate_archive(tmp.path(), true);
        assert!(!report.passed());
    }
}

//! Parameter sweeps and homogenisation charts, with their CSV emitters.
//!
//! Every float is written as `{:.16e}` (17 significant digits); undefined
//! values (relative bounds with a zero reference, effectivities with a zero
//! error) are written as empty fields.

use std::io::Write;

use rayon::prelude::*;

use crate::certification::{CertifiedEvaluation, ModuliBounds};
use crate::error::{Error, Result};
use crate::model::{Dimensions, ReducedModel};
use crate::parameter::ParameterPoint;
use crate::truth::TruthModel;

pub const CONTRAST_RANGE: [f64; 2] = [0.1, 10.0];

pub const SWEEP_HEADER: [&str; 9] = [
    "mu1",
    "mu2",
    "mu3",
    "mu4",
    "nu_up",
    "nu_low",
    "nu_up_rel",
    "nu_low_rel",
    "qoi",
];
pub const SWEEP_TRUTH_HEADER: [&str; 3] = ["err_true", "theta_up", "theta_low"];
pub const HOMOGENIZATION_HEADER: [&str; 7] = [
    "contrast",
    "shear",
    "shear_lower",
    "shear_upper",
    "lame",
    "lame_lower",
    "lame_upper",
];
pub const HOMOGENIZATION_TRUTH_HEADER: [&str; 2] = ["shear_truth", "lame_truth"];

/// `steps` contrasts spaced logarithmically over `[0.1, 10]`, ascending.
pub fn log_contrasts(steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let (a, b) = (CONTRAST_RANGE[0].ln(), CONTRAST_RANGE[1].ln());
    if steps == 1 {
        return Ok(vec![CONTRAST_RANGE[0]]);
    }
    Ok((0..steps)
        .map(|i| match i {
            0 => CONTRAST_RANGE[0],
            i if i == steps - 1 => CONTRAST_RANGE[1],
            i => (a + (b - a) * i as f64 / (steps - 1) as f64).exp(),
        })
        .collect())
}

/// The shear slice `μ = (μ1, 0, 0, 1)`.
pub fn shear_slice(steps: usize) -> Result<Vec<ParameterPoint>> {
    Ok(log_contrasts(steps)?
        .into_iter()
        .map(|c| ParameterPoint::new(c, 0.0, 0.0, 1.0))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub evaluation: CertifiedEvaluation,
}

/// Evaluates every point; with a truth model the true error and
/// effectivities are added. Rows come back sorted by `μ1`.
pub fn run_sweep(
    model: &ReducedModel,
    truth: Option<&TruthModel>,
    points: &[ParameterPoint],
    dims: Dimensions,
) -> Result<Vec<SweepRow>> {
    model.check_dimensions(&dims)?;
    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .map(|mu| {
            let evaluation = match truth {
                Some(t) => model.evaluate_with_truth(t, mu, dims)?,
                None => model.evaluate(mu, dims)?,
            };
            Ok(SweepRow { evaluation })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.evaluation.mu[0].total_cmp(&b.evaluation.mu[0]));
    Ok(rows)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(out: &mut W, rows: &[SweepRow], with_truth: bool) -> Result<()> {
    let mut header: Vec<&str> = SWEEP_HEADER.to_vec();
    if with_truth {
        header.extend(SWEEP_TRUTH_HEADER);
    }
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let e = &row.evaluation;
        let mut fields: Vec<String> = e.mu.iter().map(|v| num(*v)).collect();
        fields.extend([
            num(e.nu_up),
            num(e.nu_low),
            opt(e.nu_up_rel),
            opt(e.nu_low_rel),
            num(e.qoi),
        ]);
        if with_truth {
            let t = e.truth.as_ref().ok_or_else(|| {
                Error::InvalidArgument("truth columns requested for rows without truth data".into())
            })?;
            fields.extend([num(t.err_true), opt(t.theta_up), opt(t.theta_low)]);
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomogenizationRow {
    pub bounds: ModuliBounds,
    /// `(G^h, λ^h)` from truth solves.
    pub truth: Option<(f64, f64)>,
}

pub fn run_homogenization(
    model: &ReducedModel,
    truth: Option<&TruthModel>,
    contrasts: &[f64],
    dims: Dimensions,
) -> Result<Vec<HomogenizationRow>> {
    model.check_dimensions(&dims)?;
    let mut rows: Vec<HomogenizationRow> = contrasts
        .par_iter()
        .map(|&c| {
            let (bounds, _) = model.homogenize(c, dims)?;
            let truth = match truth {
                Some(t) => Some(truth_moduli(t, c)?),
                None => None,
            };
            Ok(HomogenizationRow { bounds, truth })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.bounds.contrast.total_cmp(&b.bounds.contrast));
    Ok(rows)
}

/// `(G^h, λ^h)` from the shear and axial truth tests.
pub fn truth_moduli(truth: &TruthModel, contrast: f64) -> Result<(f64, f64)> {
    let q = |mu: ParameterPoint| -> Result<f64> {
        let sol = truth.solve(&mu)?;
        crate::certification::qoi_reference(truth, &mu, &sol.u)
    };
    let g = q(ParameterPoint::new(contrast, 0.0, 0.0, 1.0))?;
    let axial = q(ParameterPoint::new(contrast, 1.0, 0.0, 0.0))?;
    Ok((g, axial - 2.0 * g))
}

pub fn write_homogenization_csv<W: Write>(
    out: &mut W,
    rows: &[HomogenizationRow],
    with_truth: bool,
) -> Result<()> {
    let mut header: Vec<&str> = HOMOGENIZATION_HEADER.to_vec();
    if with_truth {
        header.extend(HOMOGENIZATION_TRUTH_HEADER);
    }
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let b = &row.bounds;
        let mut fields = vec![
            num(b.contrast),
            num(b.shear_estimate),
            num(b.shear.lower),
            num(b.shear.upper),
            num(b.lame_estimate),
            num(b.lame.lower),
            num(b.lame.upper),
        ];
        if with_truth {
            let (g, l) = row.truth.ok_or_else(|| {
                Error::InvalidArgument("truth columns requested for rows without truth data".into())
            })?;
            fields.extend([num(g), num(l)]);
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrasts_are_log_spaced_and_hit_the_ends() {
        let c = log_contrasts(5).unwrap();
        assert_eq!(c[0], 0.1);
        assert_eq!(c[4], 10.0);
        assert!((c[2] - 1.0).abs() < 1e-14);
        for w in c.windows(3) {
            assert!((w[1] * w[1] - w[0] * w[2]).abs() < 1e-12);
        }
        assert_eq!(log_contrasts(1).unwrap(), vec![0.1]);
        assert!(log_contrasts(0).is_err());
    }

    #[test]
    fn shear_slice_fixes_the_load() {
        for mu in shear_slice(4).unwrap() {
            assert_eq!(mu.load(), [0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 2.5e-300, -7.123456789012345e12] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}

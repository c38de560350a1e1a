//! The offline pipeline: geometry, training set, snapshots, both PODs and
//! every precomputed block.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::certification::build_cre_factor;
use crate::dual::precompute_dual_operators;
use crate::error::{Error, Result};
use crate::mesh::{build_structured_mesh, Mesh};
use crate::microstructure::{generate_inclusions, tag_elements, InclusionSet, PackingConfig};
use crate::model::ReducedModel;
use crate::parameter::ParameterDomain;
use crate::pod::{
    compute_snapshots, gram_eigendecomposition, numerical_rank, pod_modes, ComplianceInnerProduct,
    InnerProduct, MassInnerProduct, PodBasis, SnapshotDatabase,
};
use crate::primal::precompute_primal_operators;
use crate::sobol::sobol_sample;
use crate::truth::{Material, TruthModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineConfig {
    /// Cells per side of the structured mesh.
    pub mesh_n: usize,
    pub packing: PackingConfig,
    pub material: Material,
    pub domain: ParameterDomain,
    pub n_samples: usize,
    /// Cap on stored displacement modes (defaults to `n_samples`).
    pub max_modes: Option<usize>,
    /// Cap on stored stress modes (defaults to `n_samples`).
    pub max_stress_modes: Option<usize>,
    /// Worker threads for the snapshot loop; `None` uses all cores. Not
    /// stored: results do not depend on it.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self {
            mesh_n: 32,
            packing: PackingConfig::default(),
            material: Material::default(),
            domain: ParameterDomain::default(),
            n_samples: 20,
            max_modes: None,
            max_stress_modes: None,
            threads: None,
        }
    }
}

/// Everything produced offline.
#[derive(Clone, Debug)]
pub struct OfflineBuild {
    pub config: OfflineConfig,
    /// `None` when a pre-tagged mesh was supplied.
    pub inclusions: Option<InclusionSet>,
    pub truth: TruthModel,
    pub snapshots: SnapshotDatabase,
    pub model: ReducedModel,
    pub warnings: Vec<String>,
}

/// Builds the tagged mesh from the configuration.
pub fn build_geometry(config: &OfflineConfig) -> Result<(Mesh, InclusionSet)> {
    let inclusions = generate_inclusions(&config.packing)?;
    let mesh = tag_elements(&build_structured_mesh(config.mesh_n)?, &inclusions);
    Ok((mesh, inclusions))
}

pub fn build_offline(config: &OfflineConfig) -> Result<OfflineBuild> {
    let (mesh, inclusions) = build_geometry(config)?;
    build_offline_on_mesh(config, mesh, Some(inclusions))
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| {
        log::error!("offline stage '{name}' failed: {e}");
        e
    })
}

/// Runs the pipeline on a given tagged mesh.
pub fn build_offline_on_mesh(
    config: &OfflineConfig,
    mesh: Mesh,
    inclusions: Option<InclusionSet>,
) -> Result<OfflineBuild> {
    if config.n_samples == 0 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = config.threads {
            b = b.num_threads(t.max(1));
        }
        b.build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
    };
    pool.install(|| run(config, mesh, inclusions))
}

fn run(
    config: &OfflineConfig,
    mesh: Mesh,
    inclusions: Option<InclusionSet>,
) -> Result<OfflineBuild> {
    let mut warnings = Vec::new();
    let truth = stage(
        "liftings",
        TruthModel::new(
            mesh,
            config.material,
            config.domain,
            crate::parameter::ParameterPoint::new(1.0, 0.0, 0.0, 0.0),
            Vec::new(),
        ),
    )?;
    let points = sobol_sample(&config.domain, config.n_samples);
    let snapshots = stage("snapshots", compute_snapshots(&truth, &points))?;

    let mass = MassInnerProduct::new(truth.mesh());
    let c0 = truth.coefficients(&truth.mu0())?;
    let compliance = ComplianceInnerProduct::new(truth.mesh(), &truth.compliance(&c0));
    let disp = stage(
        "displacement POD",
        truncated_pod(
            &snapshots.displacement_vectors(),
            config.max_modes,
            &mass,
            "displacement",
            &mut warnings,
        ),
    )?;
    let stress = stage(
        "stress POD",
        truncated_pod(
            &snapshots.stress_vectors(),
            config.max_stress_modes,
            &compliance,
            "stress",
            &mut warnings,
        ),
    )?;

    let primal = stage("primal blocks", precompute_primal_operators(&truth, disp))?;
    let dual = stage("dual blocks", precompute_dual_operators(&truth, stress))?;
    let cre = stage(
        "error-bound factors",
        build_cre_factor(&truth, &primal, &dual),
    )?;
    let model = ReducedModel {
        primal,
        dual,
        cre,
        material: config.material,
        domain: config.domain,
        mu0: truth.mu0(),
        load_terms: truth.loads().iter().map(|l| (l.kind, l.weight)).collect(),
        area: truth.mesh().total_area(),
        triangle_count: truth.mesh().triangle_count(),
    };
    Ok(OfflineBuild {
        config: config.clone(),
        inclusions,
        truth,
        snapshots,
        model,
        warnings,
    })
}

fn truncated_pod(
    snapshots: &[Vec<f64>],
    cap: Option<usize>,
    ip: &dyn InnerProduct,
    label: &str,
    warnings: &mut Vec<String>,
) -> Result<PodBasis> {
    let eigen = gram_eigendecomposition(snapshots, ip)?;
    let rank = numerical_rank(&eigen.values);
    info!("{label} POD spectrum: {:?}", eigen.values);
    let wanted = cap.unwrap_or(snapshots.len()).min(snapshots.len());
    if rank < wanted {
        let msg = format!(
            "{label} snapshots have numerical rank {rank} < {wanted}; storing {rank} modes"
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let n = wanted.min(rank);
    if n == 0 {
        return Err(Error::RankDeficiency {
            requested: wanted,
            rank,
        });
    }
    pod_modes(&eigen, snapshots, n, ip)
}

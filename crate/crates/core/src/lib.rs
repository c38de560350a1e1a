//! Certified reduced-order modelling of two-phase plane-strain elasticity.
//!
//! A Galerkin-POD displacement surrogate and a POD stress surrogate are
//! built offline from finite-element snapshots; online, both are solved from
//! small precomputed blocks and combined into guaranteed upper and lower
//! bounds on the energy-norm reduction error.

pub mod archive;
pub mod certification;
pub mod dense;
pub mod dual;
pub mod error;
pub mod fem;
pub mod instrument;
pub mod mesh;
pub mod microstructure;
pub mod model;
pub mod offline;
pub mod parameter;
pub mod pod;
pub mod primal;
pub mod sobol;
pub mod sparse;
pub mod sweep;
pub mod truth;
pub mod validate;

pub use archive::{load_archive, save_archive, ArchiveMeta, LoadedArchive};
pub use certification::{CertifiedEvaluation, Interval, ModuliBounds, TruthExtras};
pub use error::{Error, Result};
pub use fem::{DisplacementField, StressField};
pub use mesh::{build_structured_mesh, Mesh, Phase};
pub use microstructure::{InclusionSet, PackingConfig};
pub use model::{Dimensions, OnlineState, ReducedModel};
pub use offline::{build_offline, OfflineBuild, OfflineConfig};
pub use parameter::{ParameterDomain, ParameterPoint};
pub use pod::PodBasis;
pub use sweep::{HomogenizationRow, SweepRow};
pub use truth::{Material, TruthModel};
pub use validate::{validate_archive, ValidationReport};

//! On-disk model archives.
//!
//! An archive is a directory holding `meta.json`, the tagged mesh as JSON and
//! one raw file per array (little-endian f64, row-major). The manifest in
//! `meta.json` records the shape and SHA-256 of every array file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certification::CreFactor;
use crate::dual::DualReducedModel;
use crate::error::{Error, Result};
use crate::fem::{DisplacementField, StressField};
use crate::mesh::Mesh;
use crate::microstructure::InclusionSet;
use crate::model::ReducedModel;
use crate::offline::{OfflineBuild, OfflineConfig};
use crate::parameter::{ParameterDomain, ParameterPoint, N_DIRICHLET_TERMS, N_MATERIAL_TERMS};
use crate::pod::{InnerProductKind, PodBasis, SnapshotDatabase};
use crate::primal::PrimalReducedModel;
use crate::truth::{LoadFactor, LoadKind, LoadWeight, Material, TruthModel};

pub const FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const MESH_FILE: &str = "mesh.json";
pub const INCLUSIONS_FILE: &str = "inclusions.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub file: String,
    pub shape: Vec<usize>,
    pub sha256: String,
}

impl ArrayEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingMeta {
    pub sequence: String,
    pub direction_numbers: String,
    pub skip: u32,
    pub scaling: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadTerm {
    pub kind: LoadKind,
    pub weight: LoadWeight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub version: u32,
    pub mesh_file: String,
    pub mesh_sha256: String,
    pub inclusions_file: Option<String>,
    pub material: Material,
    pub mu0: [f64; 4],
    pub domain: ParameterDomain,
    pub n_samples: usize,
    pub n_phi_max: usize,
    pub n_phi_stress_max: usize,
    pub sampling: SamplingMeta,
    pub config: OfflineConfig,
    pub load_terms: Vec<LoadTerm>,
    pub warnings: Vec<String>,
    pub arrays: Vec<ArrayEntry>,
}

impl ArchiveMeta {
    pub fn entry(&self, name: &str) -> Option<&ArrayEntry> {
        self.arrays.iter().find(|a| a.name == name)
    }
}

/// Everything restored from an archive.
#[derive(Clone, Debug)]
pub struct LoadedArchive {
    pub meta: ArchiveMeta,
    pub inclusions: Option<InclusionSet>,
    /// Rebuilt from stored liftings and Riesz fields without any solve.
    pub truth: TruthModel,
    pub snapshots: SnapshotDatabase,
    pub model: ReducedModel,
}

struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn matrix(m: &DMatrix<f64>) -> Array {
    let data = (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect();
    Array {
        shape: vec![m.nrows(), m.ncols()],
        data,
    }
}

fn stack(ms: &[DMatrix<f64>]) -> Array {
    let (r, c) = ms.first().map_or((0, 0), |m| (m.nrows(), m.ncols()));
    let data = ms.iter().flat_map(|m| matrix(m).data).collect();
    Array {
        shape: vec![ms.len(), r, c],
        data,
    }
}

fn rows(vs: &[Vec<f64>], width: usize) -> Array {
    Array {
        shape: vec![vs.len(), width],
        data: vs.concat(),
    }
}

fn vector(v: &[f64]) -> Array {
    Array {
        shape: vec![v.len()],
        data: v.to_vec(),
    }
}

fn collect_arrays(build: &OfflineBuild) -> Vec<(&'static str, Array)> {
    let truth = &build.truth;
    let mesh = truth.mesh();
    let ndof = mesh.dof_count();
    let nsig = 3 * mesh.triangle_count();
    let snaps = &build.snapshots;
    let m = &build.model;
    let p = &m.primal;
    let d = &m.dual;
    let fields = |fs: &[DisplacementField]| {
        rows(
            &fs.iter().map(|f| f.values().to_vec()).collect::<Vec<_>>(),
            ndof,
        )
    };
    let stresses = |fs: &[StressField]| {
        rows(
            &fs.iter().map(StressField::to_flat).collect::<Vec<_>>(),
            nsig,
        )
    };
    vec![
        (
            "training_points",
            rows(
                &snaps
                    .training_points
                    .iter()
                    .map(|p| p.0.to_vec())
                    .collect::<Vec<_>>(),
                4,
            ),
        ),
        ("u0_snapshots", fields(&snaps.u0_snapshots)),
        ("sigma0_snapshots", stresses(&snaps.sigma0_snapshots)),
        ("displacement_eigenvalues", vector(&p.basis.eigenvalues)),
        ("displacement_modes", rows(&p.basis.modes, ndof)),
        ("stress_eigenvalues", vector(&d.basis.eigenvalues)),
        ("stress_modes", rows(&d.basis.modes, nsig)),
        ("liftings", fields(truth.liftings())),
        ("riesz_fields", fields(truth.riesz_fields())),
        (
            "load_forces",
            rows(
                &truth
                    .loads()
                    .iter()
                    .map(|l| l.forces.clone())
                    .collect::<Vec<_>>(),
                ndof,
            ),
        ),
        ("primal_stiffness", stack(&p.stiffness_blocks)),
        ("primal_lifting", stack(&p.lifting_blocks)),
        ("primal_lifting_lifting", stack(&p.lifting_lifting_blocks)),
        ("primal_load", matrix(&p.load_blocks)),
        ("primal_load_lifting", matrix(&p.load_lifting_blocks)),
        ("primal_macro", stack(&p.macro_blocks)),
        ("primal_macro_lifting", stack(&p.macro_lifting_blocks)),
        ("dual_particular_factors", stresses(&d.particular_factors)),
        ("dual_compliance", stack(&d.compliance_blocks)),
        ("dual_lifting_coupling", matrix(&d.lifting_coupling)),
        ("dual_particular", stack(&d.particular_blocks)),
        ("cre_matrix_factor", matrix(&m.cre.phase_factors[0])),
        ("cre_inclusion_factor", matrix(&m.cre.phase_factors[1])),
    ]
}

fn encode(data: &[f64]) -> Vec<u8> {
    data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn decode(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the archive into `dir`, replacing any previous archive there. The
/// files are staged in a sibling directory and moved into place at the end,
/// so a failed write leaves nothing behind.
pub fn save_archive(build: &OfflineBuild, dir: &Path) -> Result<ArchiveMeta> {
    let staging = staging_path(dir);
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    let result = write_into(build, &staging).and_then(|meta| {
        if dir.exists() {
            let is_archive = dir.join(META_FILE).exists();
            let is_empty = fs::read_dir(dir)?.next().is_none();
            if !is_archive && !is_empty {
                return Err(Error::InvalidArgument(format!(
                    "{} exists and is not a model archive; refusing to overwrite",
                    dir.display()
                )));
            }
            fs::remove_dir_all(dir)?;
        }
        fs::rename(&staging, dir)?;
        Ok(meta)
    });
    if result.is_err() && staging.exists() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

fn staging_path(dir: &Path) -> PathBuf {
    let name = dir
        .file_name()
        .map_or_else(|| "archive".into(), |n| n.to_string_lossy().into_owned());
    dir.with_file_name(format!(".{name}.partial"))
}

fn write_into(build: &OfflineBuild, dir: &Path) -> Result<ArchiveMeta> {
    fs::create_dir_all(dir)?;
    let truth = &build.truth;
    let mesh_json = serde_json::to_string(&truth.mesh().to_file())?;
    fs::write(dir.join(MESH_FILE), &mesh_json)?;
    let inclusions_file = match &build.inclusions {
        Some(set) => {
            fs::write(dir.join(INCLUSIONS_FILE), set.to_json()?)?;
            Some(INCLUSIONS_FILE.to_string())
        }
        None => None,
    };
    let mut arrays = Vec::new();
    for (name, array) in collect_arrays(build) {
        debug_assert_eq!(array.shape.iter().product::<usize>(), array.data.len());
        let bytes = encode(&array.data);
        let file = format!("{name}.f64");
        fs::write(dir.join(&file), &bytes)?;
        arrays.push(ArrayEntry {
            name: name.into(),
            file,
            shape: array.shape,
            sha256: sha256_hex(&bytes),
        });
    }
    let meta = ArchiveMeta {
        version: FORMAT_VERSION,
        mesh_file: MESH_FILE.into(),
        mesh_sha256: sha256_hex(mesh_json.as_bytes()),
        inclusions_file,
        material: truth.material(),
        mu0: truth.mu0().0,
        domain: *truth.domain(),
        n_samples: build.snapshots.len(),
        n_phi_max: build.model.max_modes(),
        n_phi_stress_max: build.model.max_stress_modes(),
        sampling: SamplingMeta {
            sequence: "sobol".into(),
            direction_numbers: crate::sobol::DIRECTION_NUMBERS.into(),
            skip: 1,
            scaling: "linear".into(),
        },
        config: build.config.clone(),
        load_terms: truth
            .loads()
            .iter()
            .map(|l| LoadTerm {
                kind: l.kind,
                weight: l.weight,
            })
            .collect(),
        warnings: build.warnings.clone(),
        arrays,
    };
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

/// Problems found while reading an archive leniently.
#[derive(Clone, Debug, Default)]
pub struct ArchiveReport {
    pub issues: Vec<String>,
}

impl ArchiveReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Strict load: any manifest, checksum or shape problem is an error.
pub fn load_archive(dir: &Path) -> Result<LoadedArchive> {
    let mut report = ArchiveReport::default();
    let loaded = read_archive(dir, true, &mut report)?;
    Ok(loaded)
}

/// Lenient load: checksum and mesh-hash mismatches are reported and the
/// data is used as found, so numerical checks can still run on it.
/// Structural problems (missing files, wrong sizes) remain fatal.
pub fn inspect_archive(dir: &Path) -> (ArchiveReport, Result<LoadedArchive>) {
    let mut report = ArchiveReport::default();
    let loaded = read_archive(dir, false, &mut report);
    if let Err(e) = &loaded {
        report.issues.push(e.to_string());
    }
    (report, loaded)
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn read_archive(dir: &Path, strict: bool, report: &mut ArchiveReport) -> Result<LoadedArchive> {
    let meta_path = dir.join(META_FILE);
    if !meta_path.exists() {
        return Err(format_err(format!("{} not found", meta_path.display())));
    }
    let meta: ArchiveMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| format_err(format!("{META_FILE}: {e}")))?;
    if meta.version != FORMAT_VERSION {
        return Err(format_err(format!(
            "unsupported archive version {} (expected {FORMAT_VERSION})",
            meta.version
        )));
    }

    let mut flag = |msg: String| -> Result<()> {
        if strict {
            Err(format_err(msg))
        } else {
            report.issues.push(msg);
            Ok(())
        }
    };

    let mesh_text = fs::read_to_string(dir.join(&meta.mesh_file))
        .map_err(|e| format_err(format!("mesh file '{}': {e}", meta.mesh_file)))?;
    if sha256_hex(mesh_text.as_bytes()) != meta.mesh_sha256 {
        flag(format!("mesh file '{}' checksum mismatch", meta.mesh_file))?;
    }
    let mesh = Mesh::from_file(serde_json::from_str(&mesh_text)?)?;
    let inclusions = match &meta.inclusions_file {
        Some(f) => Some(InclusionSet::from_json(&fs::read_to_string(dir.join(f))?)?),
        None => None,
    };

    let mut arrays: BTreeMap<String, Array> = BTreeMap::new();
    for entry in &meta.arrays {
        let bytes = fs::read(dir.join(&entry.file))
            .map_err(|e| format_err(format!("array '{}' ({}): {e}", entry.name, entry.file)))?;
        if bytes.len() != 8 * entry.len() {
            return Err(format_err(format!(
                "array '{}' has {} bytes but shape {:?} needs {}",
                entry.name,
                bytes.len(),
                entry.shape,
                8 * entry.len()
            )));
        }
        if sha256_hex(&bytes) != entry.sha256 {
            flag(format!("array '{}' checksum mismatch", entry.name))?;
        }
        arrays.insert(
            entry.name.clone(),
            Array {
                shape: entry.shape.clone(),
                data: decode(&bytes),
            },
        );
    }
    assemble(meta, mesh, inclusions, arrays)
}

struct Reader {
    arrays: BTreeMap<String, Array>,
}

impl Reader {
    fn take(&mut self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let a = self
            .arrays
            .remove(name)
            .ok_or_else(|| format_err(format!("array '{name}' missing from manifest")))?;
        if a.shape != shape {
            return Err(format_err(format!(
                "array '{name}' has shape {:?}, expected {shape:?}",
                a.shape
            )));
        }
        Ok(a.data)
    }

    fn shape(&self, name: &str) -> Result<&[usize]> {
        self.arrays
            .get(name)
            .map(|a| a.shape.as_slice())
            .ok_or_else(|| format_err(format!("array '{name}' missing from manifest")))
    }

    fn rows(&mut self, name: &str, count: usize, width: usize) -> Result<Vec<Vec<f64>>> {
        let data = self.take(name, &[count, width])?;
        Ok(if width == 0 {
            vec![Vec::new(); count]
        } else {
            data.chunks(width).map(<[f64]>::to_vec).collect()
        })
    }

    fn matrix(&mut self, name: &str, r: usize, c: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(r, c, &self.take(name, &[r, c])?))
    }

    fn stack(&mut self, name: &str, k: usize, r: usize, c: usize) -> Result<Vec<DMatrix<f64>>> {
        let expected = if k == 0 { vec![0, 0, 0] } else { vec![k, r, c] };
        let data = self.take(name, &expected)?;
        Ok((0..k)
            .map(|i| DMatrix::from_row_slice(r, c, &data[i * r * c..(i + 1) * r * c]))
            .collect())
    }
}

fn assemble(
    meta: ArchiveMeta,
    mesh: Mesh,
    inclusions: Option<InclusionSet>,
    arrays: BTreeMap<String, Array>,
) -> Result<LoadedArchive> {
    let mut rd = Reader { arrays };
    let ndof = mesh.dof_count();
    let ne = mesh.triangle_count();
    let ns = meta.n_samples;
    let n = meta.n_phi_max;
    let m = meta.n_phi_stress_max;
    let nl = meta.load_terms.len();
    let nw = N_DIRICHLET_TERMS;
    let nk = N_MATERIAL_TERMS;
    if n == 0 || m == 0 || n > ns || m > ns {
        return Err(format_err(format!(
            "mode counts ({n}, {m}) inconsistent with {ns} snapshots"
        )));
    }

    let training_points = rd
        .rows("training_points", ns, 4)?
        .into_iter()
        .map(|r| ParameterPoint([r[0], r[1], r[2], r[3]]))
        .collect();
    let u0_snapshots = rd
        .rows("u0_snapshots", ns, ndof)?
        .into_iter()
        .map(DisplacementField::from_vec)
        .collect();
    let sigma0_snapshots = rd
        .rows("sigma0_snapshots", ns, 3 * ne)?
        .iter()
        .map(|r| StressField::from_flat(r))
        .collect();
    let disp_basis = PodBasis {
        kind: InnerProductKind::L2Mass,
        eigenvalues: rd.take("displacement_eigenvalues", &[ns])?,
        modes: rd.rows("displacement_modes", n, ndof)?,
    };
    let stress_basis = PodBasis {
        kind: InnerProductKind::Compliance,
        eigenvalues: rd.take("stress_eigenvalues", &[ns])?,
        modes: rd.rows("stress_modes", m, 3 * ne)?,
    };
    let liftings: Vec<DisplacementField> = rd
        .rows("liftings", nw, ndof)?
        .into_iter()
        .map(DisplacementField::from_vec)
        .collect();
    let riesz: Vec<DisplacementField> = rd
        .rows("riesz_fields", nl, ndof)?
        .into_iter()
        .map(DisplacementField::from_vec)
        .collect();
    let loads: Vec<LoadFactor> = rd
        .rows("load_forces", nl, ndof)?
        .into_iter()
        .zip(&meta.load_terms)
        .map(|(forces, t)| LoadFactor {
            kind: t.kind,
            weight: t.weight,
            forces,
        })
        .collect();

    let primal = PrimalReducedModel {
        basis: disp_basis,
        lifting_fields: liftings.clone(),
        stiffness_blocks: rd.stack("primal_stiffness", nk, n, n)?,
        lifting_blocks: rd.stack("primal_lifting", nk, nw, n)?,
        lifting_lifting_blocks: rd.stack("primal_lifting_lifting", nk, nw, nw)?,
        load_blocks: rd.matrix("primal_load", nl, n)?,
        load_lifting_blocks: rd.matrix("primal_load_lifting", nl, nw)?,
        macro_blocks: rd.stack("primal_macro", nk, nw, n)?,
        macro_lifting_blocks: rd.stack("primal_macro_lifting", nk, nw, nw)?,
    };
    let dual = DualReducedModel {
        basis: stress_basis,
        particular_factors: rd
            .rows("dual_particular_factors", nl, 3 * ne)?
            .iter()
            .map(|r| StressField::from_flat(r))
            .collect(),
        compliance_blocks: rd.stack("dual_compliance", nk, m, m)?,
        lifting_coupling: rd.matrix("dual_lifting_coupling", nw, m)?,
        particular_blocks: rd.stack("dual_particular", nk, nl, m)?,
    };
    let width = n + nw + m + nl;
    let mut factor = |name: &str| -> Result<DMatrix<f64>> {
        let r = rd.shape(name)?.first().copied().unwrap_or(0);
        rd.matrix(name, r, width)
    };
    let cre = CreFactor {
        n_modes: n,
        n_lifts: nw,
        n_stress_modes: m,
        n_loads: nl,
        phase_factors: vec![
            factor("cre_matrix_factor")?,
            factor("cre_inclusion_factor")?,
        ],
    };
    if let Some(extra) = rd.arrays.keys().next() {
        return Err(format_err(format!(
            "unexpected array '{extra}' in manifest"
        )));
    }

    let mu0 = ParameterPoint(meta.mu0);
    let truth = TruthModel::from_parts(
        mesh,
        meta.material,
        meta.domain,
        mu0,
        loads,
        liftings,
        riesz,
    )?;
    let model = ReducedModel {
        primal,
        dual,
        cre,
        material: meta.material,
        domain: meta.domain,
        mu0,
        load_terms: meta.load_terms.iter().map(|t| (t.kind, t.weight)).collect(),
        area: truth.mesh().total_area(),
        triangle_count: ne,
    };
    let snapshots = SnapshotDatabase {
        training_points,
        u0_snapshots,
        sigma0_snapshots,
        mu0,
    };
    Ok(LoadedArchive {
        meta,
        inclusions,
        truth,
        snapshots,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offline::build_offline;

    fn small() -> OfflineBuild {
        let config = OfflineConfig {
            mesh_n: 8,
            n_samples: 6,
            ..OfflineConfig::default()
        };
        build_offline(&config).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let build = small();
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("model");
        save_archive(&build, &dir).unwrap();
        let back = load_archive(&dir).unwrap();
        assert_eq!(back.model, build.model);
        assert_eq!(
            back.snapshots.training_points,
            build.snapshots.training_points
        );
        for (a, b) in back
            .snapshots
            .u0_snapshots
            .iter()
            .zip(&build.snapshots.u0_snapshots)
        {
            assert_eq!(a.values(), b.values());
        }
        for (a, b) in back
            .snapshots
            .sigma0_snapshots
            .iter()
            .zip(&build.snapshots.sigma0_snapshots)
        {
            assert_eq!(a.to_flat(), b.to_flat());
        }
        assert_eq!(back.truth.liftings(), build.truth.liftings());
        assert_eq!(back.inclusions, build.inclusions);

        // saving the loaded pieces reproduces the files byte for byte
        let again = OfflineBuild {
            config: back.meta.config.clone(),
            inclusions: back.inclusions.clone(),
            truth: back.truth.clone(),
            snapshots: back.snapshots.clone(),
            model: back.model.clone(),
            warnings: back.meta.warnings.clone(),
        };
        let dir2 = tmp.path().join("model2");
        save_archive(&again, &dir2).unwrap();
        for entry in fs::read_dir(&dir).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                fs::read(dir.join(&name)).unwrap(),
                fs::read(dir2.join(&name)).unwrap(),
                "{name:?}"
            );
        }
    }

    #[test]
    fn manifest_shapes_match_byte_lengths() {
        let build = small();
        let tmp = tempfile::tempdir().unwrap();
        let meta = save_archive(&build, tmp.path()).unwrap();
        for entry in &meta.arrays {
            let len = fs::metadata(tmp.path().join(&entry.file)).unwrap().len() as usize;
            assert_eq!(len, 8 * entry.len(), "{}", entry.name);
        }
    }

    #[test]
    fn corrupted_byte_is_rejected_strictly_and_reported_leniently() {
        let build = small();
        let tmp = tempfile::tempdir().unwrap();
        save_archive(&build, tmp.path()).unwrap();
        let path = tmp.path().join("displacement_modes.f64");
        let mut bytes = fs::read(&path).unwrap();
        bytes[100] ^= 0x40;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_archive(tmp.path()), Err(Error::Format(_))));
        let (report, loaded) = inspect_archive(tmp.path());
        assert!(loaded.is_ok());
        assert_eq!(report.issues.len(), 1);
        assert!(report.issues[0].contains("displacement_modes"));
    }

    #[test]
    fn truncated_file_is_fatal() {
        let build = small();
        let tmp = tempfile::tempdir().unwrap();
        save_archive(&build, tmp.path()).unwrap();
        let path = tmp.path().join("stress_modes.f64");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(load_archive(tmp.path()).is_err());
        assert!(inspect_archive(tmp.path()).1.is_err());
    }

    #[test]
    fn refuses_to_overwrite_foreign_directory() {
        let build = small();
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("notes.txt"), "keep").unwrap();
        assert!(save_archive(&build, tmp.path()).is_err());
        assert!(tmp.path().join("notes.txt").exists());
        assert!(!staging_path(tmp.path()).exists());
    }

    #[test]
    fn missing_meta_is_a_format_error() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(load_archive(tmp.path()), Err(Error::Format(_))));
    }
}

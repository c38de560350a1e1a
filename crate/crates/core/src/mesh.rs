//! P1 triangulations of the unit square.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BOUNDARY_TOL: f64 = 1e-12;
const AREA_TOL: f64 = 1e-12;

/// Material phase of a triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Matrix,
    Inclusion,
}

impl Phase {
    pub fn code(self) -> u8 {
        match self {
            Phase::Matrix => 0,
            Phase::Inclusion => 1,
        }
    }

    pub fn from_code(code: u64) -> Result<Self> {
        match code {
            0 => Ok(Phase::Matrix),
            1 => Ok(Phase::Inclusion),
            other => Err(Error::InvalidMesh(format!("unknown phase tag {other}"))),
        }
    }

    /// Value of the inclusion indicator function on this phase.
    pub fn indicator(self) -> f64 {
        match self {
            Phase::Matrix => 0.0,
            Phase::Inclusion => 1.0,
        }
    }
}

/// A conforming P1 triangle mesh of `[0,1]²` with two displacement DOFs per
/// node (`2*i` and `2*i + 1` for node `i`).
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    phase: Vec<Phase>,
    boundary_nodes: Vec<usize>,
    free_dofs: Vec<usize>,
    /// Maps a global DOF to its position in `free_dofs`.
    free_index: Vec<Option<usize>>,
}

impl Mesh {
    /// Builds a mesh after checking every structural invariant.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        phase: Vec<Phase>,
        boundary_nodes: Vec<usize>,
    ) -> Result<Self> {
        if phase.len() != triangles.len() {
            return Err(Error::InvalidMesh(format!(
                "{} phase tags for {} triangles",
                phase.len(),
                triangles.len()
            )));
        }
        for (i, p) in nodes.iter().enumerate() {
            let inside = |v: f64| (-BOUNDARY_TOL..=1.0 + BOUNDARY_TOL).contains(&v);
            if !inside(p[0]) || !inside(p[1]) {
                return Err(Error::InvalidMesh(format!(
                    "node {i} at {p:?} lies outside the unit square"
                )));
            }
        }
        let mut total_area = 0.0;
        for (e, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {e} references a missing node"
                )));
            }
            let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if area <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {e} has non-positive signed area {area:e}"
                )));
            }
            total_area += area;
        }
        if (total_area - 1.0).abs() > AREA_TOL {
            return Err(Error::InvalidMesh(format!(
                "triangles cover an area of {total_area}, expected 1"
            )));
        }
        let expected: Vec<usize> = nodes
            .iter()
            .enumerate()
            .filter(|(_, p)| on_boundary(**p))
            .map(|(i, _)| i)
            .collect();
        let mut sorted = boundary_nodes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != expected {
            return Err(Error::InvalidMesh(
                "boundary node list does not match the nodes lying on the square's edges".into(),
            ));
        }

        let mut is_boundary = vec![false; nodes.len()];
        for &b in &sorted {
            is_boundary[b] = true;
        }
        let mut free_dofs = Vec::new();
        let mut free_index = vec![None; 2 * nodes.len()];
        for (n, &b) in is_boundary.iter().enumerate() {
            if !b {
                for c in 0..2 {
                    free_index[2 * n + c] = Some(free_dofs.len());
                    free_dofs.push(2 * n + c);
                }
            }
        }
        Ok(Self {
            nodes,
            triangles,
            phase,
            boundary_nodes: sorted,
            free_dofs,
            free_index,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phase
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Position of a global DOF in the free DOF list, `None` on the boundary.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn dof_count(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn free_dof_count(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn area(&self, e: usize) -> f64 {
        let t = self.triangles[e];
        signed_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]])
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let t = self.triangles[e];
        let (a, b, c) = (self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangle_count()).map(|e| self.area(e)).sum()
    }

    /// Copy of this mesh with new per-triangle phase tags.
    pub fn with_phases(&self, phase: Vec<Phase>) -> Result<Self> {
        if phase.len() != self.triangles.len() {
            return Err(Error::InvalidMesh(format!(
                "{} phase tags for {} triangles",
                phase.len(),
                self.triangles.len()
            )));
        }
        Ok(Self {
            phase,
            ..self.clone()
        })
    }

    pub fn to_file(&self) -> MeshFile {
        MeshFile {
            version: 1,
            nodes: self.nodes.clone(),
            triangles: self
                .triangles
                .iter()
                .zip(&self.phase)
                .map(|(t, p)| [t[0] as u64, t[1] as u64, t[2] as u64, p.code() as u64])
                .collect(),
            boundary_nodes: self.boundary_nodes.iter().map(|&b| b as u64).collect(),
        }
    }

    pub fn from_file(file: MeshFile) -> Result<Self> {
        if file.version != 1 {
            return Err(Error::Format(format!(
                "unsupported mesh file version {}",
                file.version
            )));
        }
        let mut triangles = Vec::with_capacity(file.triangles.len());
        let mut phase = Vec::with_capacity(file.triangles.len());
        for t in &file.triangles {
            triangles.push([t[0] as usize, t[1] as usize, t[2] as usize]);
            phase.push(Phase::from_code(t[3])?);
        }
        let boundary = file.boundary_nodes.iter().map(|&b| b as usize).collect();
        Mesh::new(file.nodes, triangles, phase, boundary)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_file())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Mesh::from_file(serde_json::from_str(&text)?)
    }
}

/// On-disk JSON layout of a mesh. Triangles carry `[i, j, k, phase]` with
/// `phase` 0 for matrix and 1 for inclusion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshFile {
    pub version: u32,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[u64; 4]>,
    pub boundary_nodes: Vec<u64>,
}

/// Uniform `n × n` grid of the unit square, each cell split along the
/// diagonal starting at its lowest-index corner. Nodes are numbered
/// row-major from the origin and all triangles start in the matrix phase.
pub fn build_structured_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "mesh needs at least one cell per side".into(),
        ));
    }
    let side = n + 1;
    let h = 1.0 / n as f64;
    let mut nodes = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            // exact end points keep the boundary test free of round-off
            let x = if i == n { 1.0 } else { i as f64 * h };
            let y = if j == n { 1.0 } else { j as f64 * h };
            nodes.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = j * side + i;
            let b = a + 1;
            let c = a + side + 1;
            let d = a + side;
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let boundary = nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| on_boundary(**p))
        .map(|(i, _)| i)
        .collect();
    let phase = vec![Phase::Matrix; triangles.len()];
    Mesh::new(nodes, triangles, phase, boundary)
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn on_boundary(p: [f64; 2]) -> bool {
    p.iter()
        .any(|&v| v.abs() <= BOUNDARY_TOL || (v - 1.0).abs() <= BOUNDARY_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_grid() {
        let m = build_structured_mesh(1).unwrap();
        assert_eq!(m.node_count(), 4);
        assert_eq!(m.triangle_count(), 2);
        assert_eq!(m.boundary_nodes().len(), 4);
        assert_eq!(m.free_dof_count(), 0);
    }

    #[test]
    fn two_by_two_counts() {
        let m = build_structured_mesh(2).unwrap();
        assert_eq!(m.node_count(), 9);
        assert_eq!(m.triangle_count(), 8);
        assert_eq!(m.boundary_nodes().len(), 8);
        assert_eq!(m.free_dofs(), &[8, 9]);
    }

    #[test]
    fn area_sums_to_one() {
        let m = build_structured_mesh(16).unwrap();
        let mut total = 0.0;
        for t in m.triangles() {
            let (a, b, c) = (m.nodes()[t[0]], m.nodes()[t[1]], m.nodes()[t[2]]);
            let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
            assert!(area > 0.0);
            total += area;
        }
        assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(matches!(
            build_structured_mesh(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let m = build_structured_mesh(3).unwrap();
        let mut phases = m.phases().to_vec();
        phases[4] = Phase::Inclusion;
        let m = m.with_phases(phases).unwrap();
        let text = serde_json::to_string(&m.to_file()).unwrap();
        assert!(text.starts_with("{\"version\":1,"));
        let back = Mesh::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_clockwise_triangle() {
        let m = build_structured_mesh(1).unwrap();
        let mut tris = m.triangles().to_vec();
        tris[0].swap(1, 2);
        let err = Mesh::new(
            m.nodes().to_vec(),
            tris,
            m.phases().to_vec(),
            m.boundary_nodes().to_vec(),
        );
        assert!(matches!(err, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn rejects_wrong_boundary_list() {
        let m = build_structured_mesh(2).unwrap();
        let mut b = m.boundary_nodes().to_vec();
        b.pop();
        let err = Mesh::new(
            m.nodes().to_vec(),
            m.triangles().to_vec(),
            m.phases().to_vec(),
            b,
        );
        assert!(matches!(err, Err(Error::InvalidMesh(_))));
    }
}

//! Core surface types shared across the pipeline.

use nalgebra::Vector3;

use crate::error::{MeshError, Result};

/// Indexed triangle mesh. Construction validates the structural invariants
/// every downstream stage relies on: indices in range, no degenerate faces,
/// and at least a tetrahedron's worth of vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.len() < 4 {
            return Err(MeshError::TooFewVertices { vertices: vertices.len() });
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MeshError::NonFinite { context: "vertex coordinates" });
        }
        let count = vertices.len();
        for face in &faces {
            for &idx in face {
                if idx as usize >= count {
                    return Err(MeshError::IndexOutOfRange { index: idx, count });
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(MeshError::DegenerateFace { index: face[0] });
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn position(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.vertices[i])
    }

    /// Mean of the vertex positions.
    pub fn vertex_centroid(&self) -> Vector3<f64> {
        let mut c = Vector3::zeros();
        for v in &self.vertices {
            c += Vector3::from(*v);
        }
        c / self.vertices.len() as f64
    }

    /// Undirected edge list with the number of incident faces per edge.
    pub fn edge_face_counts(&self) -> std::collections::BTreeMap<(u32, u32), u32> {
        let mut counts = std::collections::BTreeMap::new();
        for face in &self.faces {
            for (a, b) in [(face[0], face[1]), (face[1], face[2]), (face[2], face[0])] {
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_insert(0u32) += 1;
            }
        }
        counts
    }

    /// True when every edge is shared by exactly two faces.
    pub fn is_closed_manifold(&self) -> bool {
        self.edge_face_counts().values().all(|&c| c == 2)
    }

    /// Signed volume via the divergence theorem; positive for outward-wound
    /// closed surfaces.
    pub fn signed_volume(&self) -> f64 {
        let mut vol = 0.0;
        for face in &self.faces {
            let a = self.position(face[0] as usize);
            let b = self.position(face[1] as usize);
            let c = self.position(face[2] as usize);
            vol += a.dot(&b.cross(&c)) / 6.0;
        }
        vol
    }
}

/// Per-vertex scalar values aligned with a mesh's vertex order.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexScalarField {
    values: Vec<f64>,
}

impl VertexScalarField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MeshError::NonFinite { context: "scalar field" });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

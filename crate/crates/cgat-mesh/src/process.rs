//! Geometry preprocessing: unit-sphere normalization, discrete mean
//! curvature, centroid distances, and dataset-wide feature scaling.

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{MeshError, Result};
use crate::types::{Mesh, VertexScalarField};

/// Translate the vertex centroid to the origin and scale so the farthest
/// vertex sits at distance exactly 1.
pub fn normalize_unit_sphere(mesh: &Mesh) -> Result<Mesh> {
    let centroid = mesh.vertex_centroid();
    let max_norm = mesh
        .vertices()
        .iter()
        .map(|v| (Vector3::from(*v) - centroid).norm())
        .fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Err(MeshError::DegenerateMesh);
    }
    let scale = 1.0 / max_norm;
    let vertices = mesh
        .vertices()
        .iter()
        .map(|v| {
            let p = (Vector3::from(*v) - centroid) * scale;
            [p.x, p.y, p.z]
        })
        .collect();
    Mesh::new(vertices, mesh.faces().to_vec())
}

/// Euclidean distance of every vertex to the vertex centroid.
pub fn distance_to_centroid(mesh: &Mesh) -> VertexScalarField {
    let centroid = mesh.vertex_centroid();
    let values = mesh
        .vertices()
        .iter()
        .map(|v| (Vector3::from(*v) - centroid).norm())
        .collect();
    VertexScalarField::new(values).expect("distances are finite")
}

fn cot(a: Vector3<f64>, b: Vector3<f64>) -> f64 {
    let cross = a.cross(&b).norm();
    if cross < 1e-300 {
        0.0
    } else {
        a.dot(&b) / cross
    }
}

/// Signed discrete mean curvature per vertex, from the cotangent
/// Laplace-Beltrami operator with mixed Voronoi areas. The sign follows the
/// dot product of the curvature vector with the outward vertex normal, so
/// convex regions come out positive. Boundary vertices get 0.
pub fn mean_curvature(mesh: &Mesh) -> Result<VertexScalarField> {
    let nv = mesh.n_vertices();
    let edge_counts = mesh.edge_face_counts();
    for ((a, b), count) in &edge_counts {
        if *count > 2 {
            return Err(MeshError::NonManifoldInput {
                detail: format!("edge ({}, {}) borders {} faces", a, b, count),
            });
        }
    }
    let mut boundary = vec![false; nv];
    for ((a, b), count) in &edge_counts {
        if *count == 1 {
            boundary[*a as usize] = true;
            boundary[*b as usize] = true;
        }
    }

    let mut laplace: Vec<Vector3<f64>> = vec![Vector3::zeros(); nv];
    let mut mixed_area = vec![0.0; nv];
    let mut normal: Vec<Vector3<f64>> = vec![Vector3::zeros(); nv];

    for face in mesh.faces() {
        let idx = [face[0] as usize, face[1] as usize, face[2] as usize];
        let p = [mesh.position(idx[0]), mesh.position(idx[1]), mesh.position(idx[2])];
        let face_normal = (p[1] - p[0]).cross(&(p[2] - p[0]));
        let area = face_normal.norm() / 2.0;
        if area < 1e-300 {
            continue;
        }
        // Interior angles to classify the triangle for Meyer mixed areas.
        let mut cots = [0.0; 3];
        let mut obtuse_at = None;
        for k in 0..3 {
            let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            cots[k] = cot(b - a, c - a);
            if cots[k] < 0.0 {
                obtuse_at = Some(k);
            }
        }
        for k in 0..3 {
            let i = idx[k];
            let (j1, j2) = (idx[(k + 1) % 3], idx[(k + 2) % 3]);
            // Cotangent weights: the angle opposite edge (i, j) contributes.
            laplace[i] += cots[(k + 2) % 3] * (p[k] - mesh.position(j1));
            laplace[i] += cots[(k + 1) % 3] * (p[k] - mesh.position(j2));
            normal[i] += face_normal;
            mixed_area[i] += match obtuse_at {
                None => {
                    let e1 = (p[(k + 1) % 3] - p[k]).norm_squared();
                    let e2 = (p[(k + 2) % 3] - p[k]).norm_squared();
                    (e1 * cots[(k + 2) % 3] + e2 * cots[(k + 1) % 3]) / 8.0
                }
                Some(o) if o == k => area / 2.0,
                Some(_) => area / 4.0,
            };
        }
    }

    let mut values = vec![0.0; nv];
    for i in 0..nv {
        if boundary[i] || mixed_area[i] < 1e-300 {
            continue;
        }
        let k_vec = laplace[i] / (2.0 * mixed_area[i]);
        let magnitude = k_vec.norm() / 2.0;
        let sign = if k_vec.dot(&normal[i]) >= 0.0 { 1.0 } else { -1.0 };
        values[i] = sign * magnitude;
    }
    VertexScalarField::new(values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureChannels {
    Curvature,
    Distance,
    Both,
}

impl FeatureChannels {
    pub fn count(&self) -> usize {
        match self {
            Self::Curvature | Self::Distance => 1,
            Self::Both => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Curvature => "curv",
            Self::Distance => "dist",
            Self::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "curv" => Some(Self::Curvature),
            "dist" => Some(Self::Distance),
            "both" => Some(Self::Both),
            _ => None,
        }
    }
}

/// Per-vertex inputs for one sample, prior to scaling.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    pub curvature: VertexScalarField,
    pub centroid_distance: VertexScalarField,
}

impl FeatureSet {
    pub fn compute(mesh: &Mesh) -> Result<Self> {
        Ok(Self {
            curvature: mean_curvature(mesh)?,
            centroid_distance: distance_to_centroid(mesh),
        })
    }

    fn channel(&self, name: &'static str) -> &VertexScalarField {
        match name {
            "curv" => &self.curvature,
            _ => &self.centroid_distance,
        }
    }
}

/// Dataset-wide min-max bounds per selected channel. Fit only on the
/// training split; applying maps values affinely into [-1, 1] with training
/// extremes at the endpoints (held-out values may land outside, unclipped).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureScaler {
    channels: FeatureChannels,
    bounds: Vec<(f64, f64)>,
}

fn channel_names(channels: FeatureChannels) -> &'static [&'static str] {
    match channels {
        FeatureChannels::Curvature => &["curv"],
        FeatureChannels::Distance => &["dist"],
        FeatureChannels::Both => &["curv", "dist"],
    }
}

pub fn fit_scaler(dataset: &[FeatureSet], channels: FeatureChannels) -> Result<FeatureScaler> {
    if dataset.is_empty() {
        return Err(MeshError::InvalidParams { detail: "empty dataset for scaler fit".into() });
    }
    let mut bounds = Vec::new();
    for name in channel_names(channels) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for sample in dataset {
            for &v in sample.channel(name).values() {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if !(max > min) {
            return Err(MeshError::ConstantChannel { channel: name });
        }
        bounds.push((min, max));
    }
    Ok(FeatureScaler { channels, bounds })
}

/// Row-major V x d feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub data: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

pub fn apply_scaler(scaler: &FeatureScaler, features: &FeatureSet) -> FeatureMatrix {
    let names = channel_names(scaler.channels);
    let rows = features.channel(names[0]).len();
    let cols = names.len();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for (c, name) in names.iter().enumerate() {
            let (min, max) = scaler.bounds[c];
            let x = features.channel(name).values()[r];
            data.push(2.0 * (x - min) / (max - min) - 1.0);
        }
    }
    FeatureMatrix { data, rows, cols }
}

impl FeatureScaler {
    pub fn channels(&self) -> FeatureChannels {
        self.channels
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = format!("channels\t{}\n", self.channels.name());
        for (name, (min, max)) in channel_names(self.channels).iter().zip(&self.bounds) {
            text.push_str(&format!("{}\t{:.17e}\t{:.17e}\n", name, min, max));
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let bad = |detail: &str| MeshError::MalformedFile { line: 0, detail: detail.into() };
        let header = lines.next().ok_or_else(|| bad("empty scaler file"))?;
        let channels = header
            .strip_prefix("channels\t")
            .and_then(FeatureChannels::parse)
            .ok_or_else(|| bad("missing channels header"))?;
        let mut bounds = Vec::new();
        for name in channel_names(channels) {
            let line = lines.next().ok_or_else(|| bad("truncated scaler file"))?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields[0] != *name {
                return Err(bad(&format!("expected bounds row for {}", name)));
            }
            let min: f64 = fields[1].parse().map_err(|_| bad("bad min"))?;
            let max: f64 = fields[2].parse().map_err(|_| bad("bad max"))?;
            bounds.push((min, max));
        }
        Ok(Self { channels, bounds })
    }
}

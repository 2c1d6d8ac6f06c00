//! Deterministic generator of five-class staged tooth shapes.
//!
//! Stages 0 through 4 form an ordinal progression: a bare superellipsoid
//! crown, roots that protrude and lengthen stage by stage, root apices that
//! stay cratered (open) until the final stage closes them. The surface is a
//! star-shaped radial field sampled on a longitude/latitude grid, so every
//! output is a closed genus-0 manifold by construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MeshError, Result};
use crate::types::Mesh;

pub const N_STAGES: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct StageShapeParams {
    /// Ordinal class, 0..=4.
    pub stage: u8,
    /// Superellipsoid crown semi-axes (x, y, z).
    pub crown_radii: [f64; 3],
    /// Superellipsoid exponent in (0, 1]; 1 is an ellipsoid, smaller is boxier.
    pub squareness: f64,
    /// Number of roots protruding from the crown base (0 for stage 0).
    pub root_count: u8,
    /// Root length as a fraction of the crown height (2 * z semi-axis).
    pub root_length_ratio: f64,
    /// Angular half-width of each root bump, radians.
    pub root_width: f64,
    /// Apex state: 1 = fully closed (stage 4 only), lower values leave an
    /// open crater at each root tip.
    pub apex_closure: f64,
    /// Vertex jitter as a fraction of the local edge length.
    pub noise: f64,
    pub seed: u64,
}

impl StageShapeParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(MeshError::InvalidParams { detail });
        if self.stage as usize >= N_STAGES {
            return fail(format!("stage {} out of range", self.stage));
        }
        if self.crown_radii.iter().any(|&r| !(r > 0.0)) {
            return fail(format!("crown radii must be positive: {:?}", self.crown_radii));
        }
        if !(self.squareness > 0.0 && self.squareness <= 1.0) {
            return fail(format!("squareness {} outside (0, 1]", self.squareness));
        }
        if self.root_count > 2 {
            return fail(format!("root count {} exceeds 2", self.root_count));
        }
        if self.stage == 0 && (self.root_count != 0 || self.root_length_ratio != 0.0) {
            return fail("stage 0 must have no roots".into());
        }
        if self.stage > 0 && self.root_count == 0 {
            return fail(format!("stage {} requires at least one root", self.stage));
        }
        if !(0.0..=1.0).contains(&self.apex_closure) {
            return fail(format!("apex closure {} outside [0, 1]", self.apex_closure));
        }
        if (self.apex_closure == 1.0) != (self.stage == 4) {
            return fail("apices close exactly at the final stage".into());
        }
        if !(self.root_length_ratio >= 0.0) {
            return fail(format!("negative root length ratio {}", self.root_length_ratio));
        }
        if !(0.0..=0.1).contains(&self.noise) {
            return fail(format!("noise {} outside [0, 0.1]", self.noise));
        }
        if self.root_count > 0 && !(0.2..=0.7).contains(&self.root_width) {
            return fail(format!("root width {} outside [0.2, 0.7]", self.root_width));
        }
        Ok(())
    }

    /// Draw parameters for a stage from its designated range. Adjacent-stage
    /// ranges overlap slightly so classes stay confusable at the margin.
    pub fn sample(stage: u8, seed: u64, rng: &mut impl Rng) -> Self {
        let ratio_range = match stage {
            0 => (0.0, 0.0),
            1 => (0.25, 0.45),
            2 => (0.40, 0.75),
            3 => (0.70, 1.10),
            _ => (1.05, 1.45),
        };
        let root_count = if stage == 0 {
            0
        } else if rng.random::<f64>() < 0.5 {
            1
        } else {
            2
        };
        let apex_closure = if stage == 4 {
            1.0
        } else if stage == 0 {
            0.0
        } else {
            rng.random_range(0.0..0.35)
        };
        StageShapeParams {
            stage,
            crown_radii: [
                rng.random_range(0.8..1.0),
                rng.random_range(0.8..1.0),
                rng.random_range(0.75..0.95),
            ],
            squareness: rng.random_range(0.6..0.9),
            root_count,
            root_length_ratio: if stage == 0 {
                0.0
            } else {
                rng.random_range(ratio_range.0..ratio_range.1)
            },
            root_width: rng.random_range(0.35..0.5),
            apex_closure,
            noise: rng.random_range(0.01..0.03),
            seed,
        }
    }
}

/// Root axis directions, tilted off the crown's downward axis when there is
/// more than one root.
pub fn root_directions(root_count: u8) -> Vec<nalgebra::Vector3<f64>> {
    let tilt = 25.0_f64.to_radians();
    match root_count {
        0 => vec![],
        1 => vec![nalgebra::Vector3::new(0.0, 0.0, -1.0)],
        _ => vec![
            nalgebra::Vector3::new(tilt.sin(), 0.0, -tilt.cos()),
            nalgebra::Vector3::new(-tilt.sin(), 0.0, -tilt.cos()),
        ],
    }
}

/// Radial distance of the superellipsoid along a unit direction.
fn crown_radius(dir: nalgebra::Vector3<f64>, radii: &[f64; 3], squareness: f64) -> f64 {
    let p = 2.0 / squareness;
    let term = (dir.x / radii[0]).abs().powf(p)
        + (dir.y / radii[1]).abs().powf(p)
        + (dir.z / radii[2]).abs().powf(p);
    term.powf(-1.0 / p)
}

fn radial_field(dir: nalgebra::Vector3<f64>, params: &StageShapeParams) -> f64 {
    let mut r = crown_radius(dir, &params.crown_radii, params.squareness);
    if params.root_count == 0 {
        return r;
    }
    let crown_height = 2.0 * params.crown_radii[2];
    let length = params.root_length_ratio * crown_height;
    let crater_depth = (1.0 - params.apex_closure) * 0.35 * length;
    let crater_width = params.root_width * 0.35;
    for axis in root_directions(params.root_count) {
        let angle = dir.dot(&axis).clamp(-1.0, 1.0).acos();
        let bump = length * (-(angle / params.root_width).powi(2)).exp();
        let crater = crater_depth * (-(angle / crater_width).powi(2)).exp();
        r += bump - crater;
    }
    r
}

/// Closed longitude/latitude triangulation: two pole vertices plus
/// `(n_rings - 1)` rings of `n_slices` vertices.
fn sphere_grid(n_slices: usize, n_rings: usize) -> (Vec<nalgebra::Vector3<f64>>, Vec<[u32; 3]>) {
    let mut dirs = Vec::with_capacity(n_slices * (n_rings - 1) + 2);
    dirs.push(nalgebra::Vector3::new(0.0, 0.0, 1.0));
    for ring in 1..n_rings {
        let theta = std::f64::consts::PI * ring as f64 / n_rings as f64;
        for slice in 0..n_slices {
            let phi = 2.0 * std::f64::consts::PI * slice as f64 / n_slices as f64;
            dirs.push(nalgebra::Vector3::new(
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ));
        }
    }
    dirs.push(nalgebra::Vector3::new(0.0, 0.0, -1.0));

    let ring_start = |ring: usize| 1 + (ring - 1) * n_slices;
    let mut faces = Vec::new();
    for slice in 0..n_slices {
        let a = (ring_start(1) + slice) as u32;
        let b = (ring_start(1) + (slice + 1) % n_slices) as u32;
        faces.push([0, a, b]);
    }
    for ring in 1..n_rings - 1 {
        for slice in 0..n_slices {
            let a = (ring_start(ring) + slice) as u32;
            let b = (ring_start(ring) + (slice + 1) % n_slices) as u32;
            let c = (ring_start(ring + 1) + slice) as u32;
            let d = (ring_start(ring + 1) + (slice + 1) % n_slices) as u32;
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    let south = (dirs.len() - 1) as u32;
    for slice in 0..n_slices {
        let a = (ring_start(n_rings - 1) + slice) as u32;
        let b = (ring_start(n_rings - 1) + (slice + 1) % n_slices) as u32;
        faces.push([a, south, b]);
    }
    (dirs, faces)
}

pub fn generate_tooth(params: &StageShapeParams) -> Result<Mesh> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n_slices = rng.random_range(52..=64usize);
    let n_rings = rng.random_range(36..=44usize);
    let (dirs, faces) = sphere_grid(n_slices, n_rings);

    let mut vertices: Vec<[f64; 3]> = dirs
        .iter()
        .map(|d| {
            let p = d * radial_field(*d, params);
            [p.x, p.y, p.z]
        })
        .collect();

    if params.noise > 0.0 {
        // Local scale for jitter: mean incident edge length per vertex.
        let mut edge_sum = vec![0.0; vertices.len()];
        let mut edge_count = vec![0u32; vertices.len()];
        for f in &faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let pa = nalgebra::Vector3::from(vertices[a as usize]);
                let pb = nalgebra::Vector3::from(vertices[b as usize]);
                let len = (pa - pb).norm();
                edge_sum[a as usize] += len;
                edge_count[a as usize] += 1;
                edge_sum[b as usize] += len;
                edge_count[b as usize] += 1;
            }
        }
        for (i, v) in vertices.iter_mut().enumerate() {
            let local = edge_sum[i] / edge_count[i].max(1) as f64;
            let dir: nalgebra::Vector3<f64> = loop {
                let d = nalgebra::Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let n = d.norm();
                if n > 1e-3 && n <= 1.0 {
                    break d / n;
                }
            };
            let amp = params.noise * local * rng.random::<f64>();
            for c in 0..3 {
                v[c] += amp * dir[c];
            }
        }
    }

    Mesh::new(vertices, faces)
}

/// Coarse anatomical regions used to sanity-check explanations: the cap
/// around the root apices versus the equatorial crown flank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToothRegion {
    RootApex,
    CrownFlank,
    Other,
}

/// Classify a vertex of a (possibly decimated and normalized) tooth by its
/// direction from the centroid. The apex cap is wide enough to cover both
/// one- and two-root configurations.
pub fn classify_region(direction: nalgebra::Vector3<f64>) -> ToothRegion {
    let down = nalgebra::Vector3::new(0.0, 0.0, -1.0);
    let angle = direction.normalize().dot(&down).clamp(-1.0, 1.0).acos();
    if angle < 0.7 {
        ToothRegion::RootApex
    } else if (1.3..1.9).contains(&angle) {
        ToothRegion::CrownFlank
    } else {
        ToothRegion::Other
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClassProfile {
    /// Equal sample counts for all five stages.
    Balanced { per_class: usize },
    /// Long-tailed mix echoing a clinical stage distribution: stage 3
    /// dominates at about two thirds and stage 0 sits near 3%.
    Imbalanced { total: usize },
}

const IMBALANCED_WEIGHTS: [usize; N_STAGES] = [18, 40, 52, 351, 67];

impl ClassProfile {
    pub fn counts(&self) -> [usize; N_STAGES] {
        match self {
            Self::Balanced { per_class } => [*per_class; N_STAGES],
            Self::Imbalanced { total } => {
                let weight_sum: usize = IMBALANCED_WEIGHTS.iter().sum();
                // Largest-remainder apportionment of `total` over the weights.
                let mut counts = [0usize; N_STAGES];
                let mut remainders: Vec<(f64, usize)> = Vec::new();
                let mut assigned = 0;
                for (i, &w) in IMBALANCED_WEIGHTS.iter().enumerate() {
                    let exact = *total as f64 * w as f64 / weight_sum as f64;
                    counts[i] = exact.floor() as usize;
                    assigned += counts[i];
                    remainders.push((exact - exact.floor(), i));
                }
                remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                for k in 0..(*total - assigned) {
                    counts[remainders[k].1] += 1;
                }
                counts
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedSample {
    pub mesh: Mesh,
    pub label: u8,
    pub params: StageShapeParams,
}

/// Generate one mesh per manifest row, deterministically: sample i draws
/// from an independent stream of the root seed, so any subset can be
/// regenerated without the rest.
pub fn generate_dataset(profile: &ClassProfile, seed: u64) -> Result<Vec<GeneratedSample>> {
    let counts = profile.counts();
    if counts.iter().any(|&c| c == 0) {
        return Err(MeshError::InvalidParams {
            detail: "every class needs at least one sample".into(),
        });
    }
    let mut samples = Vec::with_capacity(counts.iter().sum());
    let mut index = 0u64;
    for (stage, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index);
            let params = StageShapeParams::sample(stage as u8, seed.wrapping_add(index), &mut rng);
            let mesh = generate_tooth(&params)?;
            samples.push(GeneratedSample { mesh, label: stage as u8, params });
            index += 1;
        }
    }
    Ok(samples)
}

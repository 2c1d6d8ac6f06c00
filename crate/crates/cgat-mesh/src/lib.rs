//! Triangle-mesh toolkit for the staged-tooth classification pipeline:
//! ASCII mesh formats, quadric simplification, curvature and distance
//! features, dataset-wide scaling, and the synthetic shape generator.

mod decimate;
mod error;
mod io;
mod manifest;
mod primitives;
mod process;
mod synth;
mod types;

pub use decimate::decimate_qem;
pub use error::{MeshError, Result};
pub use io::{
    load_mesh, parse_mesh, ply_scalar_text, write_ply, write_ply_scalar, MeshFormat,
};
pub use manifest::{
    manifest_to_string, parse_manifest, read_manifest, write_manifest, ManifestEntry, Split,
};
pub use primitives::{icosphere, tetrahedron};
pub use process::{
    apply_scaler, distance_to_centroid, fit_scaler, mean_curvature, normalize_unit_sphere,
    FeatureChannels, FeatureMatrix, FeatureScaler, FeatureSet,
};
pub use synth::{
    classify_region, generate_dataset, generate_tooth, root_directions, ClassProfile,
    GeneratedSample, StageShapeParams, ToothRegion, N_STAGES,
};
pub use types::{Mesh, VertexScalarField};

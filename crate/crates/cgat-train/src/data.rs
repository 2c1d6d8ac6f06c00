//! Labeled graph collections ready for batching.

use cgat_graph::{AugmentedGraph, ClsMode, Graph, GraphBatch};
use cgat_mesh::FeatureChannels;
use cgat_tensor::Tensor;

use crate::{Result, TrainError};

/// Graphs with stage labels. Feature columns follow the channel order used
/// during preprocessing (curvature before centroid distance).
#[derive(Clone, Debug)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub channels: FeatureChannels,
}

impl Dataset {
    pub fn new(
        graphs: Vec<Graph>,
        labels: Vec<usize>,
        classes: usize,
        channels: FeatureChannels,
    ) -> Result<Self> {
        if graphs.len() != labels.len() {
            return Err(TrainError::DataMismatch {
                detail: format!("{} graphs but {} labels", graphs.len(), labels.len()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(TrainError::DataMismatch {
                detail: format!("label {bad} outside {classes} classes"),
            });
        }
        let want = channels.count();
        if let Some(g) = graphs.iter().find(|g| g.d_in() != want) {
            return Err(TrainError::DataMismatch {
                detail: format!("graph carries {} feature columns, expected {want}", g.d_in()),
            });
        }
        Ok(Self { graphs, labels, classes, channels })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Project onto a channel subset. Only a two-channel dataset can be
    /// narrowed; asking for what is already present is a cheap clone.
    pub fn with_features(&self, target: FeatureChannels) -> Result<Self> {
        if target == self.channels {
            return Ok(self.clone());
        }
        if self.channels != FeatureChannels::Both {
            return Err(TrainError::DataMismatch {
                detail: format!(
                    "cannot derive {} features from a {} dataset",
                    target.name(),
                    self.channels.name()
                ),
            });
        }
        let col = match target {
            FeatureChannels::Curvature => 0,
            FeatureChannels::Distance => 1,
            FeatureChannels::Both => unreachable!("handled above"),
        };
        let graphs = self
            .graphs
            .iter()
            .map(|g| {
                let n = g.num_nodes();
                let values: Vec<f64> = (0..n).map(|r| g.x().row(r)[col]).collect();
                let x = Tensor::matrix(n, 1, values).expect("projection preserves row count");
                Graph::new(x, g.edges().to_vec()).expect("edges already validated")
            })
            .collect();
        Ok(Self {
            graphs,
            labels: self.labels.clone(),
            classes: self.classes,
            channels: target,
        })
    }

    /// Assemble the selected samples into one batch, CLS-augmented when a
    /// mode is given and plain (self-loops only) otherwise.
    pub fn batch(&self, indices: &[usize], cls: Option<ClsMode>) -> Result<GraphBatch> {
        match cls {
            Some(mode) => {
                let augmented: Vec<AugmentedGraph> = indices
                    .iter()
                    .map(|&i| AugmentedGraph::new(self.graphs[i].clone(), mode))
                    .collect();
                Ok(GraphBatch::from_augmented(&augmented)?)
            }
            None => {
                let plain: Vec<Graph> =
                    indices.iter().map(|&i| self.graphs[i].clone()).collect();
                Ok(GraphBatch::from_plain(&plain)?)
            }
        }
    }

    pub fn labels_of(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }
}

//! Mesh-to-graph conversion, CLS-node augmentation, and block-diagonal
//! batching with target-sorted edge lists.
//!
//! Edge lists are kept in COO form sorted by (target, source) everywhere, so
//! each node's incoming edges form one contiguous segment: exactly the
//! layout the per-target attention softmax consumes.

use std::rc::Rc;

use thiserror::Error;

use cgat_mesh::Mesh;
use cgat_tensor::{Segments, Tensor};

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("feature rows {rows} do not match {nodes} nodes")]
    FeatureLengthMismatch { rows: usize, nodes: usize },
    #[error("edge ({from}, {to}) out of range for {nodes} nodes")]
    EdgeOutOfRange { from: u32, to: u32, nodes: usize },
    #[error("cannot batch graphs with mixed CLS modes")]
    MixedModeBatch,
    #[error("cannot batch graphs with feature widths {a} and {b}")]
    MixedFeatureWidth { a: usize, b: usize },
    #[error("batch needs at least one graph")]
    EmptyBatch,
}

/// How the appended CLS node is wired to the real nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClsMode {
    /// Real nodes feed the CLS node; nothing flows back.
    Directed,
    /// Edges in both directions.
    Undirected,
}

impl ClsMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Directed => "directed",
            Self::Undirected => "undirected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "directed" => Some(Self::Directed),
            "undirected" => Some(Self::Undirected),
            _ => None,
        }
    }
}

fn sort_edges(edges: &mut [(u32, u32)]) {
    edges.sort_unstable_by_key(|&(s, t)| (t, s));
}

/// Plain sample graph: symmetric mesh connectivity plus node features.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    x: Tensor,
    edges: Vec<(u32, u32)>,
    num_nodes: usize,
}

impl Graph {
    pub fn new(x: Tensor, mut edges: Vec<(u32, u32)>) -> Result<Self> {
        let num_nodes = x.rows();
        for &(s, t) in &edges {
            if s as usize >= num_nodes || t as usize >= num_nodes {
                return Err(GraphError::EdgeOutOfRange { from: s, to: t, nodes: num_nodes });
            }
        }
        sort_edges(&mut edges);
        Ok(Self { x, edges, num_nodes })
    }

    pub fn x(&self) -> &Tensor {
        &self.x
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn d_in(&self) -> usize {
        self.x.cols()
    }
}

/// Build a graph from mesh connectivity: one node per vertex, both edge
/// directions for every unique face edge.
pub fn mesh_to_graph(mesh: &Mesh, features: Tensor) -> Result<Graph> {
    if features.rows() != mesh.n_vertices() {
        return Err(GraphError::FeatureLengthMismatch {
            rows: features.rows(),
            nodes: mesh.n_vertices(),
        });
    }
    let mut undirected = std::collections::BTreeSet::new();
    for face in mesh.faces() {
        for (a, b) in [(face[0], face[1]), (face[1], face[2]), (face[2], face[0])] {
            undirected.insert((a.min(b), a.max(b)));
        }
    }
    let mut edges = Vec::with_capacity(undirected.len() * 2);
    for (a, b) in undirected {
        edges.push((a, b));
        edges.push((b, a));
    }
    Graph::new(features, edges)
}

/// A graph with self-loops on every real node and one CLS node appended at
/// index N. The CLS node has no self-loop and no feature row of its own; its
/// input embedding is supplied by the model.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedGraph {
    base: Graph,
    cls_mode: ClsMode,
    edges: Vec<(u32, u32)>,
}

impl AugmentedGraph {
    pub fn new(base: Graph, cls_mode: ClsMode) -> Self {
        let n = base.num_nodes as u32;
        let mut edges = base.edges.clone();
        edges.reserve(base.num_nodes * 2 + base.num_nodes);
        for i in 0..n {
            edges.push((i, i));
            edges.push((i, n));
            if cls_mode == ClsMode::Undirected {
                edges.push((n, i));
            }
        }
        sort_edges(&mut edges);
        Self { base, cls_mode, edges }
    }

    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn cls_mode(&self) -> ClsMode {
        self.cls_mode
    }

    /// Index of the CLS node: always the last one.
    pub fn cls_index(&self) -> usize {
        self.base.num_nodes
    }

    /// Node count including the CLS node.
    pub fn num_nodes(&self) -> usize {
        self.base.num_nodes + 1
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }
}

/// Several samples merged into one disconnected graph. Per-sample node
/// blocks appear in order, each ending with its CLS node when augmented.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    x_real: Tensor,
    edges: Vec<(u32, u32)>,
    node_graph: Vec<u32>,
    cls_indices: Vec<usize>,
    real_counts: Vec<usize>,
    cls_mode: Option<ClsMode>,
    d_in: usize,
}

impl GraphBatch {
    pub fn from_augmented(graphs: &[AugmentedGraph]) -> Result<Self> {
        let first = graphs.first().ok_or(GraphError::EmptyBatch)?;
        let mode = first.cls_mode;
        let d_in = first.base.d_in();
        for g in graphs {
            if g.cls_mode != mode {
                return Err(GraphError::MixedModeBatch);
            }
            if g.base.d_in() != d_in {
                return Err(GraphError::MixedFeatureWidth { a: d_in, b: g.base.d_in() });
            }
        }
        let mut x_real = Vec::new();
        let mut edges = Vec::new();
        let mut node_graph = Vec::new();
        let mut cls_indices = Vec::new();
        let mut real_counts = Vec::new();
        let mut offset = 0u32;
        for (gi, g) in graphs.iter().enumerate() {
            x_real.extend_from_slice(g.base.x.data());
            for &(s, t) in &g.edges {
                edges.push((s + offset, t + offset));
            }
            node_graph.extend(std::iter::repeat(gi as u32).take(g.num_nodes()));
            cls_indices.push(offset as usize + g.cls_index());
            real_counts.push(g.base.num_nodes);
            offset += g.num_nodes() as u32;
        }
        let total_real: usize = real_counts.iter().sum();
        Ok(Self {
            x_real: Tensor::new(&[total_real, d_in], x_real).expect("consistent widths"),
            edges,
            node_graph,
            cls_indices,
            real_counts,
            cls_mode: Some(mode),
            d_in,
        })
    }

    /// Batch without CLS nodes, adding only self-loops. Used by readout
    /// baselines that pool over all nodes instead of a virtual one.
    pub fn from_plain(graphs: &[Graph]) -> Result<Self> {
        let first = graphs.first().ok_or(GraphError::EmptyBatch)?;
        let d_in = first.d_in();
        for g in graphs {
            if g.d_in() != d_in {
                return Err(GraphError::MixedFeatureWidth { a: d_in, b: g.d_in() });
            }
        }
        let mut x_real = Vec::new();
        let mut edges = Vec::new();
        let mut node_graph = Vec::new();
        let mut real_counts = Vec::new();
        let mut offset = 0u32;
        for (gi, g) in graphs.iter().enumerate() {
            x_real.extend_from_slice(g.x.data());
            let mut local: Vec<(u32, u32)> = g.edges.clone();
            local.extend((0..g.num_nodes as u32).map(|i| (i, i)));
            sort_edges(&mut local);
            edges.extend(local.into_iter().map(|(s, t)| (s + offset, t + offset)));
            node_graph.extend(std::iter::repeat(gi as u32).take(g.num_nodes));
            real_counts.push(g.num_nodes);
            offset += g.num_nodes as u32;
        }
        let total_real: usize = real_counts.iter().sum();
        Ok(Self {
            x_real: Tensor::new(&[total_real, d_in], x_real).expect("consistent widths"),
            edges,
            node_graph,
            cls_indices: Vec::new(),
            real_counts,
            cls_mode: None,
            d_in,
        })
    }

    pub fn n_graphs(&self) -> usize {
        self.real_counts.len()
    }

    /// Total node count including CLS nodes.
    pub fn total_nodes(&self) -> usize {
        self.node_graph.len()
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn cls_mode(&self) -> Option<ClsMode> {
        self.cls_mode
    }

    /// Stacked real-node features in batch order, CLS rows excluded.
    pub fn real_features(&self) -> &Tensor {
        &self.x_real
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn cls_indices(&self) -> &[usize] {
        &self.cls_indices
    }

    pub fn node_graph(&self) -> &[u32] {
        &self.node_graph
    }

    pub fn real_counts(&self) -> &[usize] {
        &self.real_counts
    }

    /// First global node index of each sample's block.
    pub fn node_offset(&self, graph: usize) -> usize {
        let per = |g: usize| self.real_counts[g] + usize::from(self.cls_mode.is_some());
        (0..graph).map(per).sum()
    }

    pub fn sources(&self) -> Rc<Vec<u32>> {
        Rc::new(self.edges.iter().map(|&(s, _)| s).collect())
    }

    pub fn targets(&self) -> Vec<u32> {
        self.edges.iter().map(|&(_, t)| t).collect()
    }

    /// Per-target contiguous segments over the sorted edge list.
    pub fn incoming_segments(&self) -> Segments {
        Segments::from_sorted_targets(&self.targets(), self.total_nodes())
            .expect("edges sorted by target")
    }

    /// Per-graph segments over REAL node rows (batch order), for mean
    /// readouts.
    pub fn real_node_segments(&self) -> Segments {
        let mut offsets = Vec::with_capacity(self.n_graphs() + 1);
        offsets.push(0);
        let mut acc = 0;
        for &n in &self.real_counts {
            acc += n;
            offsets.push(acc);
        }
        Segments::from_offsets(offsets).expect("monotone offsets")
    }

    /// Permutation building the model's input: row j of the augmented input
    /// comes from row aug_perm[j] of [real_features; cls_embedding_rows],
    /// where sample g's CLS row sits at total_real + g.
    pub fn aug_perm(&self) -> Vec<u32> {
        let total_real: usize = self.real_counts.iter().sum();
        let mut perm = Vec::with_capacity(self.total_nodes());
        let mut real_base = 0usize;
        for (g, &n) in self.real_counts.iter().enumerate() {
            for i in 0..n {
                perm.push((real_base + i) as u32);
            }
            if self.cls_mode.is_some() {
                perm.push((total_real + g) as u32);
            }
            real_base += n;
        }
        perm
    }

    /// Recover the member graphs of a CLS-augmented batch.
    pub fn unbatch(&self) -> Vec<AugmentedGraph> {
        let mode = self.cls_mode.expect("unbatch applies to CLS-augmented batches");
        let mut out = Vec::with_capacity(self.n_graphs());
        let mut real_base = 0usize;
        for (g, &n) in self.real_counts.iter().enumerate() {
            let offset = self.node_offset(g) as u32;
            let total = (n + 1) as u32;
            let mut x = Vec::with_capacity(n * self.d_in);
            x.extend_from_slice(
                &self.x_real.data()[real_base * self.d_in..(real_base + n) * self.d_in],
            );
            // Strip augmentation edges; Graph::new re-sorts the remainder.
            let base_edges: Vec<(u32, u32)> = self
                .edges
                .iter()
                .filter(|&&(s, t)| {
                    s >= offset && s < offset + total && t >= offset && t < offset + total
                })
                .map(|&(s, t)| (s - offset, t - offset))
                .filter(|&(s, t)| s != t && s as usize != n && t as usize != n)
                .collect();
            let graph = Graph::new(
                Tensor::new(&[n, self.d_in], x).expect("row slice"),
                base_edges,
            )
            .expect("edges were valid in the batch");
            out.push(AugmentedGraph::new(graph, mode));
            real_base += n;
        }
        out
    }
}

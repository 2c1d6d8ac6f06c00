//! On-disk graph cache: one tab-separated file per sample holding scaled
//! node features and mesh connectivity, tied together by the dataset
//! manifest. Also the split-assignment file that `train` emits and `eval`
//! consumes.

use std::path::{Path, PathBuf};

use cgat_graph::Graph;
use cgat_mesh::{read_manifest, FeatureChannels, N_STAGES};
use cgat_tensor::Tensor;
use cgat_train::{Dataset, Split};

use crate::error::{file_error, CliError, Result};

pub const CACHE_MANIFEST_FILE: &str = "manifest.tsv";
pub const SCALER_FILE: &str = "scaler.tsv";

pub fn graph_to_text(graph: &Graph, label: u8) -> String {
    let x = graph.x();
    let mut out = String::new();
    out.push_str(&format!("nodes\t{}\n", graph.num_nodes()));
    out.push_str(&format!("channels\t{}\n", graph.d_in()));
    out.push_str(&format!("label\t{label}\n"));
    for r in 0..x.rows() {
        out.push('v');
        for c in 0..x.cols() {
            out.push_str(&format!("\t{:.17e}", x.data()[r * x.cols() + c]));
        }
        out.push('\n');
    }
    for &(s, t) in graph.edges() {
        out.push_str(&format!("e\t{s}\t{t}\n"));
    }
    out
}

pub fn parse_graph(text: &str, origin: &Path) -> Result<(Graph, u8)> {
    let bad = |line: usize, detail: String| {
        CliError::Data(format!("{} line {}: {}", origin.display(), line + 1, detail))
    };
    let mut nodes: Option<usize> = None;
    let mut channels: Option<usize> = None;
    let mut label: Option<u8> = None;
    let mut features: Vec<f64> = Vec::new();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[0] {
            "nodes" | "channels" | "label" if fields.len() != 2 => {
                return Err(bad(i, format!("{} takes one value", fields[0])));
            }
            "nodes" => {
                nodes = Some(fields[1].parse().map_err(|_| {
                    bad(i, format!("bad node count {:?}", fields[1]))
                })?);
            }
            "channels" => {
                channels = Some(fields[1].parse().map_err(|_| {
                    bad(i, format!("bad channel count {:?}", fields[1]))
                })?);
            }
            "label" => {
                label = Some(fields[1].parse().map_err(|_| {
                    bad(i, format!("bad label {:?}", fields[1]))
                })?);
            }
            "v" => {
                let width = channels.ok_or_else(|| {
                    bad(i, "feature row before the channels header".into())
                })?;
                if fields.len() != width + 1 {
                    return Err(bad(i, format!(
                        "expected {} feature values, got {}",
                        width,
                        fields.len() - 1
                    )));
                }
                for f in &fields[1..] {
                    features.push(f.parse().map_err(|_| {
                        bad(i, format!("bad feature value {f:?}"))
                    })?);
                }
            }
            "e" => {
                if fields.len() != 3 {
                    return Err(bad(i, "edges take source and target".into()));
                }
                let s = fields[1]
                    .parse()
                    .map_err(|_| bad(i, format!("bad edge source {:?}", fields[1])))?;
                let t = fields[2]
                    .parse()
                    .map_err(|_| bad(i, format!("bad edge target {:?}", fields[2])))?;
                edges.push((s, t));
            }
            other => return Err(bad(i, format!("unknown record {other:?}"))),
        }
    }
    let nodes = nodes.ok_or_else(|| bad(0, "missing nodes header".into()))?;
    let channels = channels.ok_or_else(|| bad(0, "missing channels header".into()))?;
    let label = label.ok_or_else(|| bad(0, "missing label header".into()))?;
    if features.len() != nodes * channels {
        return Err(CliError::Data(format!(
            "{}: {} feature values for {} nodes x {} channels",
            origin.display(),
            features.len(),
            nodes,
            channels
        )));
    }
    let x = Tensor::new(&[nodes, channels], features)?;
    let graph = Graph::new(x, edges)?;
    Ok((graph, label))
}

pub struct LoadedCache {
    pub dataset: Dataset,
    /// Graph files in manifest order, for provenance hashing.
    pub files: Vec<PathBuf>,
    pub manifest_path: PathBuf,
}

/// Read a preprocessed cache directory into a dataset projected onto the
/// requested feature channels. Caches always store both channels.
pub fn load_dataset(dir: &Path, channels: FeatureChannels) -> Result<LoadedCache> {
    let manifest_path = dir.join(CACHE_MANIFEST_FILE);
    let entries = read_manifest(&manifest_path).map_err(|e| file_error(&manifest_path, e))?;
    if entries.is_empty() {
        return Err(file_error(&manifest_path, "empty dataset manifest"));
    }
    let mut graphs = Vec::with_capacity(entries.len());
    let mut labels = Vec::with_capacity(entries.len());
    let mut files = Vec::with_capacity(entries.len());
    for entry in &entries {
        let path = dir.join(&entry.path);
        let text = std::fs::read_to_string(&path).map_err(|e| file_error(&path, e))?;
        let (graph, label) = parse_graph(&text, &path)?;
        if label != entry.label {
            return Err(file_error(
                &path,
                format!("label {} disagrees with manifest label {}", label, entry.label),
            ));
        }
        graphs.push(graph);
        labels.push(label as usize);
        files.push(path);
    }
    let dataset =
        Dataset::new(graphs, labels, N_STAGES, FeatureChannels::Both)?.with_features(channels)?;
    Ok(LoadedCache { dataset, files, manifest_path })
}

pub fn split_to_text(split: &Split) -> String {
    let mut tagged: Vec<(usize, &str)> = Vec::new();
    for &i in &split.train {
        tagged.push((i, "train"));
    }
    for &i in &split.val {
        tagged.push((i, "val"));
    }
    for &i in &split.test {
        tagged.push((i, "test"));
    }
    tagged.sort_unstable();
    let mut out = String::new();
    for (i, tag) in tagged {
        out.push_str(&format!("{i}\t{tag}\n"));
    }
    out
}

pub fn parse_split_file(text: &str, origin: &Path, n_samples: usize) -> Result<Split> {
    let bad = |line: usize, detail: String| {
        CliError::Data(format!("{} line {}: {}", origin.display(), line + 1, detail))
    };
    let mut split = Split { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    let mut seen = vec![false; n_samples];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (index, tag) = line
            .split_once('\t')
            .ok_or_else(|| bad(i, format!("expected index\ttag, got {line:?}")))?;
        let index: usize =
            index.parse().map_err(|_| bad(i, format!("bad sample index {index:?}")))?;
        if index >= n_samples {
            return Err(bad(i, format!("index {index} out of range for {n_samples} samples")));
        }
        if seen[index] {
            return Err(bad(i, format!("sample {index} assigned twice")));
        }
        seen[index] = true;
        match tag {
            "train" => split.train.push(index),
            "val" => split.val.push(index),
            "test" => split.test.push(index),
            other => return Err(bad(i, format!("unknown split tag {other:?}"))),
        }
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

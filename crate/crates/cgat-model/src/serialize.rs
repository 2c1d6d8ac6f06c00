//! On-disk model format: a text header (magic, architecture, config) then
//! each parameter as a name/shape line followed by little-endian 32-bit
//! float coefficients in declaration order.

use std::path::Path;

use cgat_graph::ClsMode;
use cgat_mesh::FeatureChannels;
use cgat_tensor::{ParamStore, Tensor};

use crate::arch::architecture;
use crate::config::{AttentionKind, HeadMerge, ModelConfig};
use crate::error::{ModelError, Result};
use crate::model::Model;

const MAGIC: &str = "CGAT1";

fn corrupt(detail: impl Into<String>) -> ModelError {
    ModelError::CorruptCheckpoint { detail: detail.into() }
}

pub(crate) fn save_model(
    path: &Path,
    arch: &str,
    config: &ModelConfig,
    store: &ParamStore,
) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC.as_bytes());
    out.push(b'\n');
    let mut line = |k: &str, v: String| {
        out.extend_from_slice(k.as_bytes());
        out.push(b'\t');
        out.extend_from_slice(v.as_bytes());
        out.push(b'\n');
    };
    line("arch", arch.to_string());
    line("blocks", config.blocks.to_string());
    line("heads", config.heads.to_string());
    line("hidden", config.hidden.to_string());
    line("features", config.features.name().to_string());
    line("cls", config.cls_mode.name().to_string());
    line("attention", config.attention.name().to_string());
    line("head_merge", config.head_merge.name().to_string());
    line("classes", config.classes.to_string());
    line("dropout_p", config.dropout_p.to_string());
    line("conv_bias", config.conv_bias.to_string());
    out.extend_from_slice(b"end\n");
    for p in store.iter() {
        let dims: Vec<String> = p.value.shape().iter().map(|d| d.to_string()).collect();
        out.extend_from_slice(p.name.as_bytes());
        out.push(b'\t');
        out.extend_from_slice(dims.join("x").as_bytes());
        out.push(b'\n');
        for v in p.value.data() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn read_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| corrupt("unterminated header line"))?;
    let line = std::str::from_utf8(&rest[..end]).map_err(|_| corrupt("non-UTF8 header line"))?;
    *pos += end + 1;
    Ok(line)
}

pub(crate) fn load_model(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path)?;
    let mut pos = 0;
    if read_line(&bytes, &mut pos)? != MAGIC {
        return Err(corrupt("bad magic"));
    }

    let mut arch_name = None;
    let mut config = ModelConfig::default();
    loop {
        let line = read_line(&bytes, &mut pos)?;
        if line == "end" {
            break;
        }
        let (key, value) = line
            .split_once('\t')
            .ok_or_else(|| corrupt(format!("malformed config line '{line}'")))?;
        let bad = || corrupt(format!("bad value '{value}' for '{key}'"));
        match key {
            "arch" => arch_name = Some(value.to_string()),
            "blocks" => config.blocks = value.parse().map_err(|_| bad())?,
            "heads" => config.heads = value.parse().map_err(|_| bad())?,
            "hidden" => config.hidden = value.parse().map_err(|_| bad())?,
            "features" => config.features = FeatureChannels::parse(value).ok_or_else(bad)?,
            "cls" => config.cls_mode = ClsMode::parse(value).ok_or_else(bad)?,
            "attention" => config.attention = AttentionKind::parse(value).ok_or_else(bad)?,
            "head_merge" => config.head_merge = HeadMerge::parse(value).ok_or_else(bad)?,
            "classes" => config.classes = value.parse().map_err(|_| bad())?,
            "dropout_p" => config.dropout_p = value.parse().map_err(|_| bad())?,
            "conv_bias" => config.conv_bias = value.parse().map_err(|_| bad())?,
            _ => return Err(corrupt(format!("unknown config key '{key}'"))),
        }
    }
    let arch_name = arch_name.ok_or_else(|| corrupt("missing arch line"))?;
    let arch = architecture(&arch_name)
        .ok_or_else(|| ModelError::UnknownArchitecture(arch_name.clone()))?;
    config.validate()?;

    // Build the parameter skeleton, then overwrite every value from the blob
    // section, insisting on the exact declared order and shapes.
    let mut store = arch.build_params(&config, 0)?;
    for idx in 0..store.len() {
        let header = read_line(&bytes, &mut pos)?;
        let (name, dims) = header
            .split_once('\t')
            .ok_or_else(|| corrupt(format!("malformed parameter header '{header}'")))?;
        let shape: Vec<usize> = dims
            .split('x')
            .map(|d| d.parse().map_err(|_| corrupt(format!("bad shape '{dims}'"))))
            .collect::<Result<_>>()?;
        let id = store.id(name).map_err(|_| corrupt(format!("unknown parameter '{name}'")))?;
        if id.index() != idx {
            return Err(corrupt(format!("parameter '{name}' out of declaration order")));
        }
        let param = store.get_mut(id);
        if param.value.shape() != shape.as_slice() {
            return Err(corrupt(format!(
                "parameter '{name}' shape {:?} vs stored {:?}",
                param.value.shape(),
                shape
            )));
        }
        let len = param.value.len();
        let blob_end = pos + len * 4;
        if blob_end > bytes.len() {
            return Err(corrupt(format!("truncated coefficients for '{name}'")));
        }
        let mut data = Vec::with_capacity(len);
        for chunk in bytes[pos..blob_end].chunks_exact(4) {
            data.push(f32::from_le_bytes(chunk.try_into().expect("4-byte chunk")) as f64);
        }
        param.value = Tensor::new(&shape, data)?;
        pos = blob_end;
    }
    if pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - pos)));
    }
    store.zero_grads();
    Ok(Model::from_parts(arch, config, store))
}

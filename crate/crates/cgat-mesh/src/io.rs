//! ASCII mesh readers (OFF, OBJ, PLY) and the color-annotated PLY writer.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{MeshError, Result};
use crate::types::{Mesh, VertexScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl MeshFormat {
    /// Pick a format from a file extension (case-insensitive).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(Self::Off),
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

pub fn parse_mesh(bytes: &[u8], format: MeshFormat) -> Result<Mesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::MalformedFile {
        line: 0,
        detail: format!("not utf-8 text: {}", e),
    })?;
    match format {
        MeshFormat::Off => parse_off(text),
        MeshFormat::Obj => parse_obj(text),
        MeshFormat::Ply => parse_ply(text),
    }
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let format = MeshFormat::from_path(path).ok_or_else(|| MeshError::MalformedFile {
        line: 0,
        detail: format!("unrecognized mesh extension: {}", path.display()),
    })?;
    let bytes = std::fs::read(path)?;
    parse_mesh(&bytes, format)
}

fn malformed(line: usize, detail: impl Into<String>) -> MeshError {
    MeshError::MalformedFile { line, detail: detail.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| malformed(line, format!("bad number {:?}", tok)))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| malformed(line, format!("bad count {:?}", tok)))
}

/// Face indices arrive as raw integers; range checking happens in Mesh::new.
fn face_from_tokens(tokens: &[&str], line: usize) -> Result<[u32; 3]> {
    if tokens.len() != 3 {
        return Err(MeshError::NonTriangleFace { line, arity: tokens.len() });
    }
    let mut face = [0u32; 3];
    for (slot, tok) in face.iter_mut().zip(tokens) {
        *slot = tok.parse::<u32>().map_err(|_| malformed(line, format!("bad index {:?}", tok)))?;
    }
    Ok(face)
}

fn parse_off(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (first_no, first) = lines.next().ok_or_else(|| malformed(0, "empty OFF file"))?;
    let counts_line = if first.eq_ignore_ascii_case("OFF") {
        lines.next().ok_or_else(|| malformed(first_no, "missing OFF counts"))?
    } else {
        (first_no, first)
    };
    let toks: Vec<&str> = counts_line.1.split_whitespace().collect();
    if toks.len() < 2 {
        return Err(malformed(counts_line.0, "OFF counts need vertices and faces"));
    }
    let nv = parse_usize(toks[0], counts_line.0)?;
    let nf = parse_usize(toks[1], counts_line.0)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, l) = lines.next().ok_or_else(|| malformed(0, "truncated vertex list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(malformed(no, "vertex needs three coordinates"));
        }
        vertices.push([parse_f64(t[0], no)?, parse_f64(t[1], no)?, parse_f64(t[2], no)?]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (no, l) = lines.next().ok_or_else(|| malformed(0, "truncated face list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.is_empty() {
            return Err(malformed(no, "empty face record"));
        }
        let arity = parse_usize(t[0], no)?;
        if arity != 3 {
            return Err(MeshError::NonTriangleFace { line: no, arity });
        }
        if t.len() < 4 {
            return Err(malformed(no, "face indices missing"));
        }
        faces.push(face_from_tokens(&t[1..4], no)?);
    }
    Mesh::new(vertices, faces)
}

fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let t: Vec<&str> = toks.collect();
                if t.len() < 3 {
                    return Err(malformed(no, "vertex needs three coordinates"));
                }
                vertices.push([
                    parse_f64(t[0], no)?,
                    parse_f64(t[1], no)?,
                    parse_f64(t[2], no)?,
                ]);
            }
            Some("f") => {
                let refs: Vec<&str> = toks.collect();
                if refs.len() != 3 {
                    return Err(MeshError::NonTriangleFace { line: no, arity: refs.len() });
                }
                let mut face = [0u32; 3];
                for (slot, r) in face.iter_mut().zip(&refs) {
                    // "f 1/2/3" style records: the vertex index is the lead token.
                    let lead = r.split('/').next().unwrap_or("");
                    let idx: i64 = lead
                        .parse()
                        .map_err(|_| malformed(no, format!("bad face reference {:?}", r)))?;
                    if idx < 1 {
                        return Err(malformed(no, "only positive 1-based indices supported"));
                    }
                    *slot = (idx - 1) as u32;
                }
                faces.push(face);
            }
            _ => {} // normals, uvs, groups, materials: ignored
        }
    }
    Mesh::new(vertices, faces)
}

fn parse_ply(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (no, magic) = lines.next().ok_or_else(|| malformed(0, "empty PLY file"))?;
    if magic != "ply" {
        return Err(malformed(no, "missing ply magic"));
    }

    // Header: gather elements in order with their counts; for the vertex
    // element, record which property columns hold x, y, z.
    let mut elements: Vec<(String, usize)> = Vec::new();
    let mut vertex_props: Vec<String> = Vec::new();
    let mut ascii = false;
    loop {
        let (no, line) = lines.next().ok_or_else(|| malformed(0, "unterminated header"))?;
        if line == "end_header" {
            break;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(malformed(no, "only ascii PLY supported"));
                }
                ascii = true;
            }
            Some("element") => {
                if toks.len() < 3 {
                    return Err(malformed(no, "element needs a name and count"));
                }
                elements.push((toks[1].to_string(), parse_usize(toks[2], no)?));
            }
            Some("property") => {
                if let Some((name, _)) = elements.last() {
                    if name == "vertex" {
                        if toks.get(1) == Some(&"list") {
                            return Err(malformed(no, "list property on vertex element"));
                        }
                        let pname = toks.last().ok_or_else(|| malformed(no, "unnamed property"))?;
                        vertex_props.push((*pname).to_string());
                    }
                }
            }
            Some(other) => return Err(malformed(no, format!("unknown header record {:?}", other))),
        }
    }
    if !ascii {
        return Err(malformed(0, "missing format declaration"));
    }
    let col = |axis: &str| -> Result<usize> {
        vertex_props.iter().position(|p| p == axis).ok_or_else(|| {
            malformed(0, format!("vertex element lacks {} property", axis))
        })
    };

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (element, count) in &elements {
        match element.as_str() {
            "vertex" => {
                let (xc, yc, zc) = (col("x")?, col("y")?, col("z")?);
                for _ in 0..*count {
                    let (no, l) =
                        lines.next().ok_or_else(|| malformed(0, "truncated vertex list"))?;
                    let t: Vec<&str> = l.split_whitespace().collect();
                    if t.len() < vertex_props.len() {
                        return Err(malformed(no, "vertex row shorter than declared"));
                    }
                    vertices.push([
                        parse_f64(t[xc], no)?,
                        parse_f64(t[yc], no)?,
                        parse_f64(t[zc], no)?,
                    ]);
                }
            }
            "face" => {
                for _ in 0..*count {
                    let (no, l) =
                        lines.next().ok_or_else(|| malformed(0, "truncated face list"))?;
                    let t: Vec<&str> = l.split_whitespace().collect();
                    if t.is_empty() {
                        return Err(malformed(no, "empty face record"));
                    }
                    let arity = parse_usize(t[0], no)?;
                    if arity != 3 {
                        return Err(MeshError::NonTriangleFace { line: no, arity });
                    }
                    if t.len() < 4 {
                        return Err(malformed(no, "face indices missing"));
                    }
                    faces.push(face_from_tokens(&t[1..4], no)?);
                }
            }
            _ => {
                // Unknown element: its body is count lines, skip them.
                for _ in 0..*count {
                    lines.next().ok_or_else(|| malformed(0, "truncated element body"))?;
                }
            }
        }
    }
    Mesh::new(vertices, faces)
}

/// 256-entry color ramp, linearly interpolated between fixed anchors so the
/// output bytes never depend on a plotting library.
fn color_ramp() -> &'static [[u8; 3]; 256] {
    use std::sync::OnceLock;
    static LUT: OnceLock<[[u8; 3]; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        const ANCHORS: [[f64; 3]; 9] = [
            [68.0, 1.0, 84.0],
            [72.0, 40.0, 120.0],
            [62.0, 74.0, 137.0],
            [49.0, 104.0, 142.0],
            [38.0, 130.0, 142.0],
            [31.0, 158.0, 137.0],
            [53.0, 183.0, 121.0],
            [109.0, 205.0, 89.0],
            [253.0, 231.0, 37.0],
        ];
        let mut lut = [[0u8; 3]; 256];
        for (i, entry) in lut.iter_mut().enumerate() {
            let t = i as f64 / 255.0 * (ANCHORS.len() - 1) as f64;
            let lo = (t.floor() as usize).min(ANCHORS.len() - 2);
            let frac = t - lo as f64;
            for c in 0..3 {
                let v = ANCHORS[lo][c] * (1.0 - frac) + ANCHORS[lo + 1][c] * frac;
                entry[c] = v.round() as u8;
            }
        }
        lut
    })
}

/// Render a mesh plus scalar field to ASCII PLY text. The field is written
/// verbatim as the per-vertex quality and min-max mapped onto the color ramp.
pub fn ply_scalar_text(mesh: &Mesh, field: &VertexScalarField) -> Result<String> {
    if field.len() != mesh.n_vertices() {
        return Err(MeshError::FieldLengthMismatch {
            field: field.len(),
            vertices: mesh.n_vertices(),
        });
    }
    let values = field.values();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let lut = color_ramp();

    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", mesh.n_vertices());
    out.push_str(
        "property float x\nproperty float y\nproperty float z\nproperty float quality\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n",
    );
    let _ = writeln!(out, "element face {}", mesh.n_faces());
    out.push_str("property list uchar int vertex_indices\nend_header\n");

    for (v, &q) in mesh.vertices().iter().zip(values) {
        let t = if span > 0.0 { (q - min) / span } else { 0.0 };
        let idx = (t * 255.0).round().clamp(0.0, 255.0) as usize;
        let [r, g, b] = lut[idx];
        let _ = writeln!(
            out,
            "{:.8e} {:.8e} {:.8e} {:.8e} {} {} {}",
            v[0], v[1], v[2], q, r, g, b
        );
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    Ok(out)
}

pub fn write_ply_scalar(mesh: &Mesh, field: &VertexScalarField, path: &Path) -> Result<()> {
    let text = ply_scalar_text(mesh, field)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Plain geometry export with a zero quality channel.
pub fn write_ply(mesh: &Mesh, path: &Path) -> Result<()> {
    let field = VertexScalarField::new(vec![0.0; mesh.n_vertices()])?;
    write_ply_scalar(mesh, &field, path)
}

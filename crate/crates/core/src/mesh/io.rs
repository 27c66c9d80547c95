//! OBJ and ASCII PLY reading and writing.
//!
//! Only geometry is read: `v`/`f` statements for OBJ, the `vertex` x/y/z
//! properties and the `face` index list for PLY. Everything else is skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Mesh, Placement};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::PlyAscii),
            _ => Err(Error::invalid(format!(
                "cannot infer mesh format from {}",
                path.display()
            ))),
        }
    }
}

/// Reads a mesh and applies `placement` (identity leaves positions untouched).
pub fn load_mesh(path: &Path, format: MeshFormat, placement: &Placement) -> Result<Mesh> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mesh = match format {
        MeshFormat::Obj => parse_obj(reader)?,
        MeshFormat::PlyAscii => parse_ply(reader)?,
    };
    Ok(if placement.is_identity() {
        mesh
    } else {
        mesh.transformed(placement)
    })
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        message: "missing coordinate".into(),
    })?;
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("bad number {tok:?}"),
    })
}

pub fn parse_obj<R: BufRead>(reader: R) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::io("<obj>", e))?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), lineno)?;
                let y = parse_f64(toks.next(), lineno)?;
                let z = parse_f64(toks.next(), lineno)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in toks {
                    let head = tok.split('/').next().unwrap_or("");
                    let idx: i64 = head.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("bad face index {tok:?}"),
                    })?;
                    let resolved = match idx {
                        0 => {
                            return Err(Error::Parse {
                                line: lineno,
                                message: "face index 0 is invalid".into(),
                            })
                        }
                        i if i > 0 => i - 1,
                        i => vertices.len() as i64 + i,
                    };
                    if resolved < 0 || resolved >= u32::MAX as i64 {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("face index {idx} out of range"),
                        });
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "face needs at least 3 vertices".into(),
                    });
                }
                for k in 1..poly.len() - 1 {
                    triangles.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Mesh::new(vertices, triangles)
}

struct PlyElement {
    name: String,
    count: usize,
    // (name, is_list)
    props: Vec<(String, bool)>,
}

pub fn parse_ply<R: BufRead>(reader: R) -> Result<Mesh> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(n, l)| l.map(|l| (n + 1, l)).map_err(|e| Error::io("<ply>", e)));
    let bad = |line: usize, message: &str| Error::Parse {
        line,
        message: message.to_string(),
    };

    let (_, magic) = lines.next().ok_or_else(|| bad(1, "empty file"))??;
    if magic.trim() != "ply" {
        return Err(bad(1, "missing ply magic"));
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let (n, line) = lines.next().ok_or_else(|| bad(0, "unterminated header"))??;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(bad(n, "only ascii PLY is supported"));
                }
            }
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad(n, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", _, _, name] => elements
                .last_mut()
                .ok_or_else(|| bad(n, "property before element"))?
                .props
                .push((name.to_string(), true)),
            ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| bad(n, "property before element"))?
                .props
                .push((name.to_string(), false)),
            ["end_header"] => break,
            _ => {}
        }
    }

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let (n, line) = lines.next().ok_or_else(|| bad(0, "truncated body"))??;
            let mut toks = line.split_whitespace();
            let mut xyz = [f64::NAN; 3];
            let mut poly: Option<Vec<u32>> = None;
            for (name, is_list) in &el.props {
                if *is_list {
                    let len: usize = toks
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(n, "bad list length"))?;
                    let mut items = Vec::with_capacity(len);
                    for _ in 0..len {
                        let v: i64 = toks
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| bad(n, "bad list entry"))?;
                        if v < 0 || v >= u32::MAX as i64 {
                            return Err(bad(n, "negative or huge face index"));
                        }
                        items.push(v as u32);
                    }
                    if name == "vertex_indices" || name == "vertex_index" {
                        poly = Some(items);
                    }
                } else {
                    let tok = toks.next();
                    let slot = match name.as_str() {
                        "x" => Some(0),
                        "y" => Some(1),
                        "z" => Some(2),
                        _ => None,
                    };
                    match slot {
                        Some(s) if el.name == "vertex" => xyz[s] = parse_f64(tok, n)?,
                        _ => {
                            tok.ok_or_else(|| bad(n, "missing property value"))?;
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    if xyz.iter().any(|c| c.is_nan()) {
                        return Err(bad(n, "vertex lacks x/y/z"));
                    }
                    vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                }
                "face" => {
                    let poly = poly.ok_or_else(|| bad(n, "face without vertex_indices"))?;
                    if poly.len() < 3 {
                        return Err(bad(n, "face needs at least 3 vertices"));
                    }
                    for k in 1..poly.len() - 1 {
                        triangles.push([poly[0], poly[k], poly[k + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    Mesh::new(vertices, triangles)
}

/// Writes ASCII PLY. Coordinates use the shortest representation that
/// parses back to the identical `f64`.
pub fn write_ply<W: Write>(mut out: W, mesh: &Mesh, colors: Option<&[[u8; 3]]>) -> std::io::Result<()> {
    if let Some(c) = colors {
        assert_eq!(c.len(), mesh.vertex_count(), "one color per vertex");
    }
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", mesh.vertex_count())?;
    writeln!(out, "property double x")?;
    writeln!(out, "property double y")?;
    writeln!(out, "property double z")?;
    if colors.is_some() {
        writeln!(out, "property uchar red")?;
        writeln!(out, "property uchar green")?;
        writeln!(out, "property uchar blue")?;
    }
    writeln!(out, "element face {}", mesh.triangle_count())?;
    writeln!(out, "property list uchar int vertex_indices")?;
    writeln!(out, "end_header")?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        match colors {
            Some(c) => {
                let [r, g, b] = c[i];
                writeln!(out, "{} {} {} {r} {g} {b}", v.x, v.y, v.z)?
            }
            None => writeln!(out, "{} {} {}", v.x, v.y, v.z)?,
        }
    }
    for [a, b, c] in mesh.triangles() {
        writeln!(out, "3 {a} {b} {c}")?;
    }
    Ok(())
}

pub fn write_obj<W: Write>(mut out: W, mesh: &Mesh) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for [a, b, c] in mesh.triangles() {
        writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1)?;
    }
    Ok(())
}

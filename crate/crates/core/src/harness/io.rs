//! CSV, JSON and PLY persistence. Every write goes to a temporary file in
//! the target directory and is renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::attention::colormap;
use crate::fixation::FixationPoint;
use crate::gaze::PoseSample;
use crate::mesh::{write_ply, Mesh};
use crate::saliency::SaliencyMap;
use crate::{Error, Result, Vec3};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline, as written by [`write_json`].
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Files in `dir` whose names end with `suffix`, sorted by name.
pub fn list_files(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(suffix)) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// File name with `suffix` removed.
pub fn stem(path: &Path, suffix: &str) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    name.strip_suffix(suffix).unwrap_or(name).to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordingRow {
    t: f64,
    px: f64,
    py: f64,
    pz: f64,
    ox: f64,
    oy: f64,
    oz: f64,
    sx: f64,
    sy: f64,
}

/// Head-tracking recording: `t,px,py,pz,ox,oy,oz,sx,sy`.
pub fn read_recording(path: &Path) -> Result<Vec<PoseSample>> {
    Ok(read_rows::<RecordingRow>(path)?
        .into_iter()
        .map(|r| PoseSample {
            t: r.t,
            position: Vec3::new(r.px, r.py, r.pz),
            orientation: Vec3::new(r.ox, r.oy, r.oz),
            eye_offset: Vector2::new(r.sx, r.sy),
        })
        .collect())
}

pub fn write_recording(path: &Path, samples: &[PoseSample]) -> Result<()> {
    write_rows(
        path,
        samples.iter().map(|s| RecordingRow {
            t: s.t,
            px: s.position.x,
            py: s.position.y,
            pz: s.position.z,
            ox: s.orientation.x,
            oy: s.orientation.y,
            oz: s.orientation.z,
            sx: s.eye_offset.x,
            sy: s.eye_offset.y,
        }),
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct FixationRow {
    fixation_id: usize,
    x: f64,
    y: f64,
    z: f64,
    head_x: f64,
    head_y: f64,
    head_z: f64,
    head_ox: f64,
    head_oy: f64,
    head_oz: f64,
    duration: f64,
    weight: usize,
    center_sample: usize,
    t_start: f64,
}

pub fn write_fixations(path: &Path, fixations: &[FixationPoint]) -> Result<()> {
    write_rows(
        path,
        fixations.iter().enumerate().map(|(i, f)| FixationRow {
            fixation_id: i,
            x: f.position.x,
            y: f.position.y,
            z: f.position.z,
            head_x: f.head_position.x,
            head_y: f.head_position.y,
            head_z: f.head_position.z,
            head_ox: f.head_orientation.x,
            head_oy: f.head_orientation.y,
            head_oz: f.head_orientation.z,
            duration: f.duration,
            weight: f.weight,
            center_sample: f.center_sample,
            t_start: f.t_start,
        }),
    )
}

pub fn read_fixations(path: &Path) -> Result<Vec<FixationPoint>> {
    Ok(read_rows::<FixationRow>(path)?
        .into_iter()
        .map(|r| FixationPoint {
            position: Vec3::new(r.x, r.y, r.z),
            head_position: Vec3::new(r.head_x, r.head_y, r.head_z),
            head_orientation: Vec3::new(r.head_ox, r.head_oy, r.head_oz),
            duration: r.duration,
            weight: r.weight,
            center_sample: r.center_sample,
            t_start: r.t_start,
        })
        .collect())
}

#[derive(Debug, Serialize)]
struct ValueRow {
    vertex_id: usize,
    value: f64,
}

/// Per-vertex map: `vertex_id,value`.
pub fn write_values(path: &Path, values: &[f64]) -> Result<()> {
    write_rows(
        path,
        values
            .iter()
            .enumerate()
            .map(|(vertex_id, &value)| ValueRow { vertex_id, value }),
    )
}

/// Reads a per-vertex map with `vertex_count` entries from a CSV with a
/// `vertex_id` column and a `value` (or saliency `S`) column. Vertices not
/// listed are zero.
pub fn read_values(path: &Path, vertex_count: usize) -> Result<Vec<f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("vertex_id").ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("{}: missing vertex_id column", path.display()),
    })?;
    let val_col = col("value").or_else(|| col("S")).ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("{}: missing value or S column", path.display()),
    })?;
    let mut out = vec![0.0; vertex_count];
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |m: &str| Error::Parse {
            line: k + 2,
            message: format!("{}: {m}", path.display()),
        };
        let id: usize = rec[id_col].parse().map_err(|_| bad("bad vertex_id"))?;
        let v: f64 = rec[val_col].parse().map_err(|_| bad("bad value"))?;
        if id >= vertex_count {
            return Err(bad("vertex_id out of range"));
        }
        out[id] = v;
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct VisibilityRow {
    vertex_id: usize,
    visible: u8,
}

/// Binary visibility field: `vertex_id,visible`.
pub fn write_visibility(path: &Path, mask: &[bool]) -> Result<()> {
    write_rows(
        path,
        mask.iter().enumerate().map(|(vertex_id, &v)| VisibilityRow {
            vertex_id,
            visible: v as u8,
        }),
    )
}

pub fn read_visibility(path: &Path, vertex_count: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; vertex_count];
    for row in read_rows::<VisibilityRow>(path)? {
        if row.vertex_id >= vertex_count {
            return Err(Error::Parse {
                line: row.vertex_id,
                message: format!("{}: vertex_id out of range", path.display()),
            });
        }
        mask[row.vertex_id] = row.visible != 0;
    }
    Ok(mask)
}

#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
struct SaliencyRow {
    vertex_id: usize,
    S: f64,
    U: f64,
    C: f64,
}

pub fn write_saliency(path: &Path, map: &SaliencyMap) -> Result<()> {
    write_rows(
        path,
        (0..map.s.len()).map(|i| SaliencyRow {
            vertex_id: i,
            S: map.s[i],
            U: map.u[i],
            C: map.c[i],
        }),
    )
}

/// Mesh colored by `values` from blue (low) to red (high).
pub fn write_colored_ply(path: &Path, mesh: &Mesh, values: &[f64]) -> Result<()> {
    let colors = colormap(values);
    let mut buf = Vec::new();
    write_ply(&mut buf, mesh, Some(&colors)).map_err(|e| Error::io(path, e))?;
    write_atomic(path, &buf)
}

//! Plain-text mesh files.
//!
//! Format: line 1 `NV NC`; then `NV` lines `x y`; then `NC` lines
//! `m i1 ... im` with 0-based CCW vertex indices. `#` starts a comment.
//! Coordinates are written with shortest round-trip precision, so
//! write-then-read is the identity on points and connectivity.

use super::{build_topology, Cell, Mesh, MeshError};
use crate::geometry::Point2;
use std::fs;
use std::io::Write;
use std::path::Path;

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<(), MeshError> {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", mesh.points.len(), mesh.cells.len()));
    for p in &mesh.points {
        out.push_str(&format!("{} {}\n", p.x, p.y));
    }
    for c in &mesh.cells {
        out.push_str(&c.vertex_ids.len().to_string());
        for &v in &c.vertex_ids {
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<Mesh, MeshError> {
    let text = fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub(crate) fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line_no, header) = lines
        .next()
        .ok_or(MeshError::Parse { line: 0, msg: "empty file".into() })?;
    let mut it = header.split_whitespace();
    let nv: usize = parse_field(it.next(), line_no, "vertex count")?;
    let nc: usize = parse_field(it.next(), line_no, "cell count")?;

    let mut points = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line_no, l) = lines.next().ok_or(MeshError::Parse {
            line: 0,
            msg: "unexpected end of file in vertex block".into(),
        })?;
        let mut it = l.split_whitespace();
        let x: f64 = parse_field(it.next(), line_no, "x coordinate")?;
        let y: f64 = parse_field(it.next(), line_no, "y coordinate")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(MeshError::Parse { line: line_no, msg: "non-finite coordinate".into() });
        }
        points.push(Point2::new(x, y));
    }

    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (line_no, l) = lines.next().ok_or(MeshError::Parse {
            line: 0,
            msg: "unexpected end of file in cell block".into(),
        })?;
        let mut it = l.split_whitespace();
        let m: usize = parse_field(it.next(), line_no, "cell vertex count")?;
        let mut vertex_ids = Vec::with_capacity(m);
        for _ in 0..m {
            let v: usize = parse_field(it.next(), line_no, "vertex index")?;
            vertex_ids.push(v);
        }
        cells.push(Cell { vertex_ids });
    }

    build_topology(points, cells)
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, MeshError> {
    field
        .ok_or_else(|| MeshError::Parse { line, msg: format!("missing {what}") })?
        .parse()
        .map_err(|_| MeshError::Parse { line, msg: format!("invalid {what}") })
}

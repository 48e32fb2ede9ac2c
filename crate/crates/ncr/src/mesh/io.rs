//! Line-oriented text mesh format:
//!
//! ```text
//! ncr-mesh 1
//! <nvertices> <ncells>
//! x y            (nvertices lines, 17 significant digits)
//! i j k          (ncells lines, 0-based vertex indices)
//! ```
//!
//! Facets and boundary flags are derived on read, never stored.

use std::fs;
use std::path::Path;

use super::{build_connectivity, Triangulation};
use crate::{Error, Result};

pub fn write_mesh(tri: &Triangulation, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("ncr-mesh 1\n");
    out.push_str(&format!("{} {}\n", tri.nvertices(), tri.ncells()));
    for j in 0..tri.nvertices() {
        let v = tri.vertex(j);
        out.push_str(&format!("{:.16e} {:.16e}\n", v[0], v[1]));
    }
    for l in 0..tri.ncells() {
        let c = tri.cell(l);
        out.push_str(&format!("{} {} {}\n", c[0], c[1], c[2]));
    }
    fs::write(path, out)?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MeshParse {
        line,
        msg: msg.into(),
    }
}

pub fn read_mesh(path: &Path) -> Result<Triangulation> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (n0, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file, expected 'ncr-mesh 1' header"))?;
    if header.trim() != "ncr-mesh 1" {
        return Err(parse_err(n0 + 1, format!("bad header '{header}'")));
    }

    let (n1, counts) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing '<nvertices> <ncells>' line"))?;
    let mut it = counts.split_whitespace();
    let nv: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(n1 + 1, "cannot parse vertex count"))?;
    let nc: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(n1 + 1, "cannot parse cell count"))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(2 + vertices.len() + 1, "unexpected end of vertex list"))?;
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(ln + 1, "cannot parse x coordinate"))?;
        let y: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(ln + 1, "cannot parse y coordinate"))?;
        vertices.push([x, y]);
    }

    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(2 + nv + cells.len() + 1, "unexpected end of cell list"))?;
        let mut idx = [0usize; 3];
        let mut it = line.split_whitespace();
        for slot in &mut idx {
            *slot = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(ln + 1, "cannot parse vertex index"))?;
            if *slot >= nv {
                return Err(parse_err(
                    ln + 1,
                    format!("vertex index {} out of range (nvertices = {nv})", slot),
                ));
            }
        }
        cells.push(idx);
    }

    build_connectivity(vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, DiagonalMode};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("ncr-mesh-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m3.txt");
        let tri = generate_structured(3, DiagonalMode::Alternating).unwrap();
        write_mesh(&tri, &path).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(tri.nvertices(), back.nvertices());
        assert_eq!(tri.ncells(), back.ncells());
        for j in 0..tri.nvertices() {
            let a = tri.vertex(j);
            let b = back.vertex(j);
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
        for l in 0..tri.ncells() {
            assert_eq!(tri.cell(l), back.cell(l));
        }
    }

    #[test]
    fn out_of_range_cell_index_names_the_line() {
        let dir = std::env::temp_dir().join("ncr-mesh-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.txt");
        std::fs::write(
            &path,
            "ncr-mesh 1\n3 1\n0 0\n1 0\n0 1\n0 1 3\n",
        )
        .unwrap();
        match read_mesh(&path) {
            Err(Error::MeshParse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_a_header_error() {
        let dir = std::env::temp_dir().join("ncr-mesh-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.txt");
        std::fs::write(&path, "").unwrap();
        match read_mesh(&path) {
            Err(Error::MeshParse { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
    }
}

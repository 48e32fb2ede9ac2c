//! Simplicial 2D triangulation: connectivity, boundary classification,
//! geometric caches, generators, macro-elements and file IO.
//!
//! Cells are stored counterclockwise. Each facet carries a canonical unit
//! normal: outward for boundary facets, out of the lower-indexed incident
//! cell for interior ones.

mod generate;
mod io;
mod macro_element;

pub use generate::{generate_kershaw, generate_structured, DiagonalMode};
pub use io::{read_mesh, write_mesh};
pub use macro_element::{macro_element, FanCellNormals, MacroElement, Quadrangle};

use std::collections::HashMap;

use crate::{Error, Result};

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

/// One mesh facet (edge).
#[derive(Debug, Clone)]
pub struct Facet {
    /// Endpoint vertex indices, lower first.
    pub vertices: [usize; 2],
    /// Incident cells; the canonical normal points out of the first.
    /// Boundary facets have `None` in the second slot.
    pub cells: [Option<usize>; 2],
    /// Canonical unit normal.
    pub normal: Point,
    /// Facet barycentre.
    pub midpoint: Point,
    pub length: f64,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.cells[1].is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    facets: Vec<Facet>,
    /// Per cell, facet indices ordered so entry k is opposite local vertex k.
    cell_facets: Vec<[usize; 3]>,
    vertex_cells: Vec<Vec<usize>>,
    vertex_vertices: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    cell_area: Vec<f64>,
    cell_centroid: Vec<Point>,
    /// Grid spacing 1/n for generated meshes; reported as the mesh size.
    grid_h: Option<f64>,
}

impl Triangulation {
    pub fn nvertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn ncells(&self) -> usize {
        self.cells.len()
    }

    pub fn nfacets(&self) -> usize {
        self.facets.len()
    }

    pub fn vertex(&self, j: usize) -> Point {
        self.vertices[j]
    }

    pub fn cell(&self, l: usize) -> [usize; 3] {
        self.cells[l]
    }

    pub fn facet(&self, f: usize) -> &Facet {
        &self.facets[f]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn cell_facets(&self, l: usize) -> [usize; 3] {
        self.cell_facets[l]
    }

    pub fn vertex_cells(&self, j: usize) -> &[usize] {
        &self.vertex_cells[j]
    }

    pub fn vertex_vertices(&self, j: usize) -> &[usize] {
        &self.vertex_vertices[j]
    }

    pub fn is_boundary_vertex(&self, j: usize) -> bool {
        self.boundary_vertex[j]
    }

    pub fn area(&self, l: usize) -> f64 {
        self.cell_area[l]
    }

    pub fn centroid(&self, l: usize) -> Point {
        self.cell_centroid[l]
    }

    pub fn total_area(&self) -> f64 {
        self.cell_area.iter().sum()
    }

    /// Scaled outward normal of cell `l` at the edge opposite local vertex
    /// `k`; its norm equals that edge's length.
    pub fn scaled_normal(&self, l: usize, k: usize) -> Point {
        let c = self.cells[l];
        let a = self.vertices[c[(k + 1) % 3]];
        let b = self.vertices[c[(k + 2) % 3]];
        let d = sub(b, a);
        [d[1], -d[0]]
    }

    /// Local index of vertex `j` within cell `l`.
    pub fn local_vertex(&self, l: usize, j: usize) -> Option<usize> {
        self.cells[l].iter().position(|&v| v == j)
    }

    /// Barycentric coordinate of `x` with respect to local vertex `k` of
    /// cell `l` (affine; 1 at the vertex, 0 on the opposite edge).
    pub fn barycentric(&self, l: usize, k: usize, x: Point) -> f64 {
        let v = self.vertices[self.cells[l][k]];
        let s = self.scaled_normal(l, k);
        1.0 - dot(sub(x, v), s) / (2.0 * self.cell_area[l])
    }

    /// Largest cell diameter.
    pub fn max_diameter(&self) -> f64 {
        let mut h: f64 = 0.0;
        for f in &self.facets {
            h = h.max(f.length);
        }
        h
    }

    /// Reported mesh size: grid spacing for generated meshes, otherwise
    /// the largest cell diameter.
    pub fn mesh_size(&self) -> f64 {
        self.grid_h.unwrap_or_else(|| self.max_diameter())
    }

    pub(crate) fn set_grid_h(&mut self, h: f64) {
        self.grid_h = Some(h);
    }

    pub fn interior_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nfacets()).filter(|&f| !self.facets[f].is_boundary())
    }

    pub fn boundary_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nfacets()).filter(|&f| self.facets[f].is_boundary())
    }
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(sub(b, a), sub(c, a))
}

/// Build the full connectivity from raw vertices and cells. Cells given
/// clockwise are re-oriented; degenerate cells and non-manifold facets are
/// rejected.
pub fn build_connectivity(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<Triangulation> {
    let nv = vertices.len();
    let mut span: f64 = 0.0;
    for v in &vertices {
        span = span.max(v[0].abs()).max(v[1].abs());
    }
    let degenerate_tol = 1e-14 * span.max(1.0) * span.max(1.0);

    let mut oriented = Vec::with_capacity(cells.len());
    for (l, cell) in cells.iter().enumerate() {
        for &v in cell {
            if v >= nv {
                return Err(Error::Mesh(format!(
                    "cell {l} references vertex {v} but the mesh has {nv} vertices"
                )));
            }
        }
        let a = signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
        if a.abs() <= degenerate_tol {
            return Err(Error::DegenerateCell(l));
        }
        if a > 0.0 {
            oriented.push(*cell);
        } else {
            oriented.push([cell[0], cell[2], cell[1]]);
        }
    }

    // Facets keyed by sorted vertex pair; enumeration order is first-seen
    // over cells, which makes the numbering deterministic.
    let mut facet_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut facet_verts: Vec<[usize; 2]> = Vec::new();
    let mut incident: Vec<Vec<usize>> = Vec::new();
    let mut cell_facets = vec![[usize::MAX; 3]; oriented.len()];
    for (l, cell) in oriented.iter().enumerate() {
        for k in 0..3 {
            let a = cell[(k + 1) % 3];
            let b = cell[(k + 2) % 3];
            let key = (a.min(b), a.max(b));
            let f = *facet_of.entry(key).or_insert_with(|| {
                facet_verts.push([key.0, key.1]);
                incident.push(Vec::new());
                facet_verts.len() - 1
            });
            if incident[f].len() >= 2 {
                return Err(Error::NonManifoldFacet(key.0, key.1));
            }
            incident[f].push(l);
            cell_facets[l][k] = f;
        }
    }

    let cell_area: Vec<f64> = oriented
        .iter()
        .map(|c| signed_area(vertices[c[0]], vertices[c[1]], vertices[c[2]]))
        .collect();
    let cell_centroid: Vec<Point> = oriented
        .iter()
        .map(|c| {
            [
                (vertices[c[0]][0] + vertices[c[1]][0] + vertices[c[2]][0]) / 3.0,
                (vertices[c[0]][1] + vertices[c[1]][1] + vertices[c[2]][1]) / 3.0,
            ]
        })
        .collect();

    let mut facets = Vec::with_capacity(facet_verts.len());
    for (f, verts) in facet_verts.iter().enumerate() {
        let mut inc = incident[f].clone();
        inc.sort_unstable();
        let first = inc[0];
        let second = inc.get(1).copied();
        let a = vertices[verts[0]];
        let b = vertices[verts[1]];
        let length = norm(sub(b, a));
        let midpoint = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        // Outward normal of the first incident cell at this facet.
        let k = oriented[first]
            .iter()
            .position(|&v| v != verts[0] && v != verts[1])
            .expect("facet belongs to cell");
        let d = {
            let c = oriented[first];
            let va = vertices[c[(k + 1) % 3]];
            let vb = vertices[c[(k + 2) % 3]];
            sub(vb, va)
        };
        let normal = [d[1] / length, -d[0] / length];
        facets.push(Facet {
            vertices: *verts,
            cells: [Some(first), second],
            normal,
            midpoint,
            length,
        });
    }

    let mut vertex_cells = vec![Vec::new(); nv];
    for (l, cell) in oriented.iter().enumerate() {
        for &v in cell {
            vertex_cells[v].push(l);
        }
    }
    let mut vertex_vertices = vec![Vec::new(); nv];
    let mut boundary_vertex = vec![false; nv];
    for facet in &facets {
        let [a, b] = facet.vertices;
        vertex_vertices[a].push(b);
        vertex_vertices[b].push(a);
        if facet.is_boundary() {
            boundary_vertex[a] = true;
            boundary_vertex[b] = true;
        }
    }
    for vv in &mut vertex_vertices {
        vv.sort_unstable();
    }

    Ok(Triangulation {
        vertices,
        cells: oriented,
        facets,
        cell_facets,
        vertex_cells,
        vertex_vertices,
        boundary_vertex,
        cell_area,
        cell_centroid,
        grid_h: None,
    })
}

/// Structural report from [`validate`]. Report-only: nothing here aborts.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub orientation_ok: bool,
    pub euler_ok: bool,
    pub manifold_ok: bool,
    pub normal_sums_ok: bool,
    /// Cells with two or more boundary edges (violations of the
    /// at-most-one-boundary-edge mesh restriction).
    pub hypothesis_41_violations: Vec<usize>,
}

impl ValidationReport {
    pub fn hypothesis_41_pass(&self) -> bool {
        self.hypothesis_41_violations.is_empty()
    }

    pub fn all_structural_ok(&self) -> bool {
        self.orientation_ok && self.euler_ok && self.manifold_ok && self.normal_sums_ok
    }
}

pub fn validate(tri: &Triangulation) -> ValidationReport {
    let orientation_ok = (0..tri.ncells()).all(|l| tri.area(l) > 0.0);
    let euler_ok =
        tri.nvertices() as i64 - tri.nfacets() as i64 + tri.ncells() as i64 == 1;
    let manifold_ok = tri.facets.iter().all(|f| f.cells[0].is_some());
    let mut normal_sums_ok = true;
    for l in 0..tri.ncells() {
        let mut s = [0.0, 0.0];
        let mut perim = 0.0;
        for k in 0..3 {
            let n = tri.scaled_normal(l, k);
            s[0] += n[0];
            s[1] += n[1];
            perim += norm(n);
        }
        if norm(s) > 1e-14 * perim {
            normal_sums_ok = false;
        }
    }
    let mut hypothesis_41_violations = Vec::new();
    for l in 0..tri.ncells() {
        let nb = tri.cell_facets[l]
            .iter()
            .filter(|&&f| tri.facets[f].is_boundary())
            .count();
        if nb >= 2 {
            hypothesis_41_violations.push(l);
        }
    }
    ValidationReport {
        orientation_ok,
        euler_ok,
        manifold_ok,
        normal_sums_ok,
        hypothesis_41_violations,
    }
}

//! Macro-element extraction: the ordered fan of cells and edges around one
//! vertex, with the scaled normals and the quadrangle subdivision used by
//! the multi-point gradient reconstruction.

use super::{cross, sub, Point, Triangulation};
use crate::{Error, Result};

/// Quadrangle joining the center vertex, one edge midpoint, the cell
/// barycentre and the next edge midpoint. Its area is a third of the cell.
#[derive(Debug, Clone)]
pub struct Quadrangle {
    pub points: [Point; 4],
    pub area: f64,
    pub centroid: Point,
}

fn polygon_area_centroid(pts: &[Point]) -> (f64, Point) {
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..pts.len() {
        let p = pts[i];
        let q = pts[(i + 1) % pts.len()];
        let w = cross(p, q);
        a2 += w;
        cx += (p[0] + q[0]) * w;
        cy += (p[1] + q[1]) * w;
    }
    let area = 0.5 * a2;
    (area, [cx / (3.0 * a2), cy / (3.0 * a2)])
}

/// Scaled outward normals of one fan cell. `entry` is the normal at the
/// fan edge entering the cell, `exit` at the edge leaving it, `outer` at
/// the edge opposite the center vertex. Norms equal the edge lengths.
#[derive(Debug, Clone)]
pub struct FanCellNormals {
    pub entry: Point,
    pub exit: Point,
    pub outer: Point,
}

/// The ordered fan around one vertex. Interior fans are cyclic with as
/// many edges as cells; boundary fans carry one extra edge, with the first
/// and last edges on the domain boundary.
#[derive(Debug, Clone)]
pub struct MacroElement {
    pub center: usize,
    pub is_boundary: bool,
    /// Fan cells in counterclockwise order (global indices).
    pub cells: Vec<usize>,
    /// Fan edges (global facet indices); edge i enters cell i, edge i+1
    /// leaves it (cyclically for interior fans).
    pub edges: Vec<usize>,
    /// Outer endpoints of the fan edges (global vertex indices).
    pub fan_vertices: Vec<usize>,
    pub normals: Vec<FanCellNormals>,
    pub quadrangles: Vec<Quadrangle>,
}

impl MacroElement {
    pub fn ncells(&self) -> usize {
        self.cells.len()
    }

    pub fn nedges(&self) -> usize {
        self.edges.len()
    }

    /// Fan edge index entering / leaving fan cell `i`.
    pub fn entry_edge(&self, i: usize) -> usize {
        i
    }

    pub fn exit_edge(&self, i: usize) -> usize {
        (i + 1) % self.edges.len()
    }
}

/// For cell `l` around center vertex `j` placed at local index `a`, the
/// counterclockwise traversal enters through the facet (j, v_{a+1}) and
/// leaves through (j, v_{a+2}).
fn cell_fan_edges(tri: &Triangulation, l: usize, j: usize) -> (usize, usize) {
    let a = tri.local_vertex(l, j).expect("center vertex in cell");
    let facets = tri.cell_facets(l);
    // facet opposite v_{a+2} joins j and v_{a+1}; opposite v_{a+1} joins j and v_{a+2}
    (facets[(a + 2) % 3], facets[(a + 1) % 3])
}

/// Extract the ordered macro-element of vertex `j`.
pub fn macro_element(tri: &Triangulation, j: usize) -> Result<MacroElement> {
    let incident = tri.vertex_cells(j);
    if incident.is_empty() {
        return Err(Error::Mesh(format!("vertex {j} has no incident cells")));
    }
    let is_boundary = tri.is_boundary_vertex(j);

    // entry edge -> cell map for the walk
    let mut entry_of: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for &l in incident {
        let (entry, _) = cell_fan_edges(tri, l, j);
        if entry_of.insert(entry, l).is_some() {
            return Err(Error::Mesh(format!(
                "non-manifold fan at vertex {j}: edge shared as entry twice"
            )));
        }
    }

    let start_edge = if is_boundary {
        // The boundary edge that is an entry edge of its unique cell; the
        // ccw walk from it sweeps the interior sector.
        let mut start = None;
        for &l in incident {
            let (entry, _) = cell_fan_edges(tri, l, j);
            if tri.facet(entry).is_boundary() {
                if start.replace(entry).is_some() {
                    return Err(Error::Mesh(format!(
                        "vertex {j}: more than one boundary entry edge (non-manifold boundary)"
                    )));
                }
            }
        }
        start.ok_or_else(|| {
            Error::Mesh(format!(
                "boundary vertex {j} has no boundary entry edge"
            ))
        })?
    } else {
        // Smallest incident facet index.
        incident
            .iter()
            .flat_map(|&l| {
                let (e, x) = cell_fan_edges(tri, l, j);
                [e, x]
            })
            .min()
            .unwrap()
    };

    let mut cells = Vec::with_capacity(incident.len());
    let mut edges = vec![start_edge];
    let mut edge = start_edge;
    loop {
        let Some(&l) = entry_of.get(&edge) else {
            break; // reached the far boundary edge
        };
        let (_, exit) = cell_fan_edges(tri, l, j);
        cells.push(l);
        if exit == start_edge {
            break; // interior fan closed
        }
        edges.push(exit);
        edge = exit;
        if cells.len() > incident.len() {
            return Err(Error::Mesh(format!(
                "fan walk at vertex {j} did not terminate"
            )));
        }
    }

    if cells.len() != incident.len() {
        return Err(Error::Mesh(format!(
            "vertex {j}: fan covers {} of {} incident cells (non-manifold fan)",
            cells.len(),
            incident.len()
        )));
    }
    if is_boundary {
        debug_assert_eq!(edges.len(), cells.len() + 1);
    } else {
        debug_assert_eq!(edges.len(), cells.len());
    }

    let fan_vertices: Vec<usize> = edges
        .iter()
        .map(|&f| {
            let [a, b] = tri.facet(f).vertices;
            if a == j {
                b
            } else {
                a
            }
        })
        .collect();

    let center = tri.vertex(j);
    let mut normals = Vec::with_capacity(cells.len());
    let mut quadrangles = Vec::with_capacity(cells.len());
    for (i, &l) in cells.iter().enumerate() {
        let a = tri.local_vertex(l, j).unwrap();
        let s_i = fan_vertices[i];
        let s_ip1 = fan_vertices[(i + 1) % fan_vertices.len()];
        let local_si = tri.local_vertex(l, s_i).unwrap();
        let local_sip1 = tri.local_vertex(l, s_ip1).unwrap();
        normals.push(FanCellNormals {
            entry: tri.scaled_normal(l, local_sip1),
            exit: tri.scaled_normal(l, local_si),
            outer: tri.scaled_normal(l, a),
        });

        let m_i = tri.facet(edges[i]).midpoint;
        let m_ip1 = tri.facet(edges[(i + 1) % edges.len()]).midpoint;
        let g = tri.centroid(l);
        let pts = [center, m_i, g, m_ip1];
        let (area, centroid) = polygon_area_centroid(&pts);
        quadrangles.push(Quadrangle {
            points: pts,
            area,
            centroid,
        });
    }

    Ok(MacroElement {
        center: j,
        is_boundary,
        cells,
        edges,
        fan_vertices,
        normals,
        quadrangles,
    })
}

#[allow(dead_code)]
fn fan_is_ccw(tri: &Triangulation, me: &MacroElement) -> bool {
    let c = tri.vertex(me.center);
    me.cells.iter().enumerate().all(|(i, _)| {
        let a = tri.vertex(me.fan_vertices[i]);
        let b = tri.vertex(me.fan_vertices[(i + 1) % me.fan_vertices.len()]);
        cross(sub(a, c), sub(b, c)) > 0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::norm;
    use crate::mesh::{generate_structured, DiagonalMode};

    fn interior_vertex_with_fan(tri: &Triangulation, want: usize) -> Option<usize> {
        (0..tri.nvertices())
            .find(|&j| !tri.is_boundary_vertex(j) && tri.vertex_cells(j).len() == want)
    }

    #[test]
    fn interior_fan_of_six_cells() {
        let tri = generate_structured(4, DiagonalMode::Uniform).unwrap();
        let j = interior_vertex_with_fan(&tri, 6).unwrap();
        let me = macro_element(&tri, j).unwrap();
        assert!(!me.is_boundary);
        assert_eq!(me.ncells(), 6);
        assert_eq!(me.nedges(), 6);
        assert!(fan_is_ccw(&tri, &me));
        // consecutive cells share the fan edge between them
        for i in 0..me.ncells() {
            let shared = me.edges[me.exit_edge(i)];
            let next = me.cells[(i + 1) % me.ncells()];
            assert!(tri.cell_facets(next).contains(&shared));
            assert!(tri.cell_facets(me.cells[i]).contains(&shared));
        }
    }

    #[test]
    fn boundary_fan_with_four_edges() {
        let tri = generate_structured(4, DiagonalMode::Uniform).unwrap();
        // a mid-edge boundary vertex of the uniform mesh has 3 cells, 4 edges
        let j = (0..tri.nvertices())
            .find(|&j| tri.is_boundary_vertex(j) && tri.vertex_cells(j).len() == 3)
            .unwrap();
        let me = macro_element(&tri, j).unwrap();
        assert!(me.is_boundary);
        assert_eq!(me.ncells(), 3);
        assert_eq!(me.nedges(), 4);
        assert!(tri.facet(me.edges[0]).is_boundary());
        assert!(tri.facet(*me.edges.last().unwrap()).is_boundary());
        for &e in &me.edges[1..me.nedges() - 1] {
            assert!(!tri.facet(e).is_boundary());
        }
        assert!(fan_is_ccw(&tri, &me));
    }

    #[test]
    fn shared_edge_normals_are_opposite() {
        let tri = generate_structured(5, DiagonalMode::Alternating).unwrap();
        for j in 0..tri.nvertices() {
            let me = macro_element(&tri, j).unwrap();
            let last = if me.is_boundary {
                me.ncells() - 1
            } else {
                me.ncells()
            };
            for i in 0..last {
                let a = &me.normals[i];
                let b = &me.normals[(i + 1) % me.ncells()];
                let s = [a.exit[0] + b.entry[0], a.exit[1] + b.entry[1]];
                assert!(norm(s) < 1e-14, "vertex {j} fan position {i}");
            }
        }
    }

    #[test]
    fn quadrangle_areas_are_a_third_of_the_cell() {
        let tri = generate_structured(4, DiagonalMode::Alternating).unwrap();
        for j in 0..tri.nvertices() {
            let me = macro_element(&tri, j).unwrap();
            for (i, q) in me.quadrangles.iter().enumerate() {
                let want = tri.area(me.cells[i]) / 3.0;
                assert!(q.area > 0.0);
                assert!((q.area - want).abs() <= 1e-14 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn quadrangles_tile_every_cell() {
        for tri in [
            generate_structured(4, DiagonalMode::Alternating).unwrap(),
            crate::mesh::generate_kershaw(8, 0.6).unwrap(),
        ] {
            let mut covered = vec![0.0; tri.ncells()];
            for j in 0..tri.nvertices() {
                let me = macro_element(&tri, j).unwrap();
                for (i, q) in me.quadrangles.iter().enumerate() {
                    covered[me.cells[i]] += q.area;
                }
            }
            for l in 0..tri.ncells() {
                let rel = (covered[l] - tri.area(l)).abs() / tri.area(l);
                assert!(rel < 1e-13, "cell {l}");
            }
        }
    }

    #[test]
    fn corner_fan_with_single_cell() {
        let tri = generate_structured(2, DiagonalMode::Uniform).unwrap();
        // corner (1,0) of the uniform mesh belongs to exactly one triangle
        let j = (0..tri.nvertices())
            .find(|&j| tri.vertex(j) == [1.0, 0.0])
            .unwrap();
        let me = macro_element(&tri, j).unwrap();
        assert_eq!(me.ncells(), 1);
        assert_eq!(me.nedges(), 2);
        assert!(me.is_boundary);
    }
}

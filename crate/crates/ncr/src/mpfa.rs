//! Multi-point reconstruction of the pressure gradient.
//!
//! Around each vertex, a piecewise-affine pressure is built on the
//! quadrangle subdivision of the fan. Auxiliary values on the fan edges
//! are eliminated per vertex: flux continuity across interior fan edges,
//! and prescribed normal fluxes on the two boundary edges of boundary
//! fans. The result is one constant gradient per quadrangle, affine in
//! the surrounding cell values, which assembles into a global operator
//! tested against the CR velocity basis.
//!
//! The reconstruction is exact for affine pressures: with cell values
//! taken at barycentres and matching boundary fluxes, every quadrangle
//! gradient equals the true one.

use crate::linalg::{CsrMatrix, SmallLu, Triplets};
use crate::mesh::{dot, macro_element, MacroElement, Point, Triangulation};
use crate::{Error, Result};

/// Condition-estimate threshold for the local fan solves.
pub const LOCAL_CONDITION_LIMIT: f64 = 1e12;

/// Eliminated local system of one macro-element: per quadrangle, the
/// gradient as an affine function of the fan's cell values.
#[derive(Debug, Clone)]
pub struct LocalReconstruction {
    /// Global cell indices of the fan (column order of `coeff`).
    pub cells: Vec<usize>,
    /// Per quadrangle i and fan cell c, the 2-vector coefficient of the
    /// cell value: G_i = sum_c coeff[i][c] * qbar_c + g0[i].
    pub coeff: Vec<Vec<Point>>,
    /// Forcing-induced constant part (nonzero only on boundary fans with
    /// nonzero flux data).
    pub g0: Vec<Point>,
    /// Per quadrangle, gradient response to a unit flux on each of the
    /// two boundary half-edges (empty for interior fans).
    pub g0_unit: Vec<[Point; 2]>,
    /// Infinity-norm condition estimate of the eliminated system.
    pub cond: f64,
}

impl LocalReconstruction {
    /// Evaluate the per-quadrangle gradients for given cell values (one
    /// value per fan cell, in fan order).
    pub fn gradients(&self, cell_values: &[f64]) -> Vec<Point> {
        assert_eq!(cell_values.len(), self.cells.len());
        self.coeff
            .iter()
            .zip(&self.g0)
            .map(|(row, g0)| {
                let mut g = *g0;
                for (c, v) in row.iter().zip(cell_values) {
                    g[0] += c[0] * v;
                    g[1] += c[1] * v;
                }
                g
            })
            .collect()
    }
}

/// d = 2: gradient scale (d+1)/(d |K|) and auxiliary weight 1/d.
fn gradient_scale(area: f64) -> f64 {
    1.5 / area
}

/// Local gradient of quadrangle i from the two auxiliary edge values and
/// the cell value: (d+1)/(d |K_i|) (qt_i S_entry + qt_next S_exit + qbar S_outer).
pub fn local_gradient_formula(
    tri: &Triangulation,
    me: &MacroElement,
    i: usize,
    qt_entry: f64,
    qt_exit: f64,
    qbar: f64,
) -> Point {
    let s = gradient_scale(tri.area(me.cells[i]));
    let n = &me.normals[i];
    [
        s * (qt_entry * n.entry[0] + qt_exit * n.exit[0] + qbar * n.outer[0]),
        s * (qt_entry * n.entry[1] + qt_exit * n.exit[1] + qbar * n.outer[1]),
    ]
}

struct FanSystem {
    /// n_edges x n_edges coefficient matrix over the auxiliary values.
    a: Vec<f64>,
    /// n_edges x n_cells right-hand side in the cell values.
    b: Vec<f64>,
    /// n_edges extra right-hand side from boundary flux data.
    r: Vec<f64>,
}

/// Gradient of quadrangle i as rows over (auxiliary values | cell values):
/// returns (aux weights at entry/exit positions, cell weight) scaled.
fn accumulate_gradient_row(
    tri: &Triangulation,
    me: &MacroElement,
    i: usize,
    direction: Point,
    scale: f64,
    sys: &mut FanSystem,
    row: usize,
) {
    let n_edges = me.nedges();
    let n_cells = me.ncells();
    let s = gradient_scale(tri.area(me.cells[i])) * scale;
    let n = &me.normals[i];
    sys.a[row * n_edges + me.entry_edge(i)] += s * dot(n.entry, direction);
    sys.a[row * n_edges + me.exit_edge(i)] += s * dot(n.exit, direction);
    sys.b[row * n_cells + i] -= s * dot(n.outer, direction);
}

fn eliminate(
    tri: &Triangulation,
    me: &MacroElement,
    flux_data: Option<[f64; 2]>,
) -> Result<LocalReconstruction> {
    let n_edges = me.nedges();
    let n_cells = me.ncells();
    let mut sys = FanSystem {
        a: vec![0.0; n_edges * n_edges],
        b: vec![0.0; n_edges * n_cells],
        r: vec![0.0; n_edges],
    };

    if me.is_boundary {
        let flux = flux_data.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "boundary macro-element at vertex {} needs flux data",
                me.center
            ))
        })?;
        // continuity across the interior fan edges: each cell contributes
        // with its own outward normal there (the two are opposite)
        for i in 0..n_cells - 1 {
            let shared = me.exit_edge(i);
            accumulate_gradient_row(tri, me, i, me.normals[i].exit, 1.0, &mut sys, shared);
            accumulate_gradient_row(tri, me, i + 1, me.normals[i + 1].entry, 1.0, &mut sys, shared);
        }
        // prescribed normal flux on the two boundary half-edges;
        // row scale |half-edge| * unit normal
        let first = me.edges[0];
        let last = me.edges[n_edges - 1];
        for (row, (facet, cell_i, data)) in [
            (0usize, (first, 0usize, flux[0])),
            (n_edges - 1, (last, n_cells - 1, flux[1])),
        ] {
            let f = tri.facet(facet);
            let half = 0.5 * f.length;
            accumulate_gradient_row(tri, me, cell_i, f.normal, half, &mut sys, row);
            sys.r[row] = data;
        }
    } else {
        // cyclic continuity: one equation per shared fan edge
        for i in 0..n_cells {
            let next = (i + 1) % n_cells;
            let shared = me.exit_edge(i);
            accumulate_gradient_row(tri, me, i, me.normals[i].exit, 1.0, &mut sys, shared);
            accumulate_gradient_row(tri, me, next, me.normals[next].entry, 1.0, &mut sys, shared);
        }
    }

    let lu = SmallLu::new(&sys.a, n_edges).ok_or(Error::NearSingularLocalSystem {
        vertex: me.center,
        fan_size: n_edges,
        cond: f64::INFINITY,
    })?;
    let cond = lu.condition_estimate(&sys.a);
    if cond > LOCAL_CONDITION_LIMIT {
        return Err(Error::NearSingularLocalSystem {
            vertex: me.center,
            fan_size: n_edges,
            cond,
        });
    }

    // aux = W qbar + w
    let mut w_cols: Vec<Vec<f64>> = Vec::with_capacity(n_cells);
    for c in 0..n_cells {
        let col: Vec<f64> = (0..n_edges).map(|r| sys.b[r * n_cells + c]).collect();
        w_cols.push(lu.solve(&col));
    }
    let w0 = lu.solve(&sys.r);
    // unit-flux responses for boundary fans (rows 0 and n_edges-1)
    let w_unit: Option<[Vec<f64>; 2]> = me.is_boundary.then(|| {
        let mut e0 = vec![0.0; n_edges];
        e0[0] = 1.0;
        let mut e1 = vec![0.0; n_edges];
        e1[n_edges - 1] = 1.0;
        [lu.solve(&e0), lu.solve(&e1)]
    });

    let mut coeff = Vec::with_capacity(n_cells);
    let mut g0 = Vec::with_capacity(n_cells);
    let mut g0_unit = Vec::with_capacity(n_cells);
    for i in 0..n_cells {
        let s = gradient_scale(tri.area(me.cells[i]));
        let n = &me.normals[i];
        let (e, x) = (me.entry_edge(i), me.exit_edge(i));
        let mut row: Vec<Point> = Vec::with_capacity(n_cells);
        for c in 0..n_cells {
            let we = w_cols[c][e];
            let wx = w_cols[c][x];
            let own = if c == i { 1.0 } else { 0.0 };
            row.push([
                s * (we * n.entry[0] + wx * n.exit[0] + own * n.outer[0]),
                s * (we * n.entry[1] + wx * n.exit[1] + own * n.outer[1]),
            ]);
        }
        coeff.push(row);
        g0.push([
            s * (w0[e] * n.entry[0] + w0[x] * n.exit[0]),
            s * (w0[e] * n.entry[1] + w0[x] * n.exit[1]),
        ]);
        if let Some(wu) = &w_unit {
            g0_unit.push([
                [
                    s * (wu[0][e] * n.entry[0] + wu[0][x] * n.exit[0]),
                    s * (wu[0][e] * n.entry[1] + wu[0][x] * n.exit[1]),
                ],
                [
                    s * (wu[1][e] * n.entry[0] + wu[1][x] * n.exit[0]),
                    s * (wu[1][e] * n.entry[1] + wu[1][x] * n.exit[1]),
                ],
            ]);
        }
    }

    Ok(LocalReconstruction {
        cells: me.cells.clone(),
        coeff,
        g0,
        g0_unit,
        cond,
    })
}

/// Eliminate the auxiliary values of an interior fan.
pub fn eliminate_interior(tri: &Triangulation, me: &MacroElement) -> Result<LocalReconstruction> {
    assert!(!me.is_boundary);
    eliminate(tri, me, None)
}

/// Eliminate the auxiliary values of a boundary fan with prescribed
/// normal fluxes on its two boundary half-edges (first and last).
pub fn eliminate_boundary(
    tri: &Triangulation,
    me: &MacroElement,
    flux_data: [f64; 2],
) -> Result<LocalReconstruction> {
    assert!(me.is_boundary);
    eliminate(tri, me, Some(flux_data))
}

/// Integral of f . n over the half-edge from the center vertex to the
/// midpoint of boundary fan edge `facet` (2-point Gauss).
pub fn half_edge_flux(
    tri: &Triangulation,
    center: usize,
    facet: usize,
    f: impl Fn(Point) -> Point,
) -> f64 {
    let fac = tri.facet(facet);
    let a = tri.vertex(center);
    let b = fac.midpoint;
    let len = 0.5 * fac.length;
    crate::fem::quadrature::GAUSS_SEGMENT_2
        .iter()
        .map(|&(t, w)| {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            w * len * dot(f(x), fac.normal)
        })
        .sum()
}

/// Per-vertex boundary flux data: two half-edge flux values for each
/// boundary vertex, zeros elsewhere.
#[derive(Debug, Clone)]
pub struct FluxTables {
    pub by_vertex: Vec<[f64; 2]>,
}

impl FluxTables {
    pub fn zeros(tri: &Triangulation) -> Self {
        Self {
            by_vertex: vec![[0.0, 0.0]; tri.nvertices()],
        }
    }

    /// Integrated normal fluxes of a vector function over every boundary
    /// fan's two half-edges (2-point Gauss).
    pub fn from_function(tri: &Triangulation, f: impl Fn(Point) -> Point) -> Result<Self> {
        let mut by_vertex = vec![[0.0, 0.0]; tri.nvertices()];
        for j in 0..tri.nvertices() {
            if !tri.is_boundary_vertex(j) {
                continue;
            }
            let me = macro_element(tri, j)?;
            by_vertex[j] = [
                half_edge_flux(tri, j, me.edges[0], &f),
                half_edge_flux(tri, j, *me.edges.last().unwrap(), &f),
            ];
        }
        Ok(Self { by_vertex })
    }
}

/// The assembled gradient operator: for a cell pressure vector q and flux
/// tables d, the velocity-tested gradient is `gmat q + flux_matrix d`.
pub struct MpfaOperator {
    pub gmat: CsrMatrix,
    /// Boundary-forcing part for the tables given at assembly.
    pub g0vec: Vec<f64>,
    /// Linear map from flattened flux tables (2 entries per boundary
    /// vertex, vertex-id order) to the tested-gradient vector.
    flux_matrix: CsrMatrix,
    boundary_vertices: Vec<usize>,
    locals: Vec<LocalReconstruction>,
}

impl MpfaOperator {
    pub fn locals(&self) -> &[LocalReconstruction] {
        &self.locals
    }

    /// Apply to a pressure vector including the boundary-forcing part.
    pub fn apply(&self, pressure: &[f64]) -> Vec<f64> {
        let mut g = self.gmat.matvec(pressure);
        for (gi, f) in g.iter_mut().zip(&self.g0vec) {
            *gi += f;
        }
        g
    }

    /// Boundary-forcing vector for arbitrary flux tables (reusing the
    /// assembled geometry).
    pub fn g0_from_tables(&self, tables: &FluxTables) -> Vec<f64> {
        let flat: Vec<f64> = self
            .boundary_vertices
            .iter()
            .flat_map(|&j| tables.by_vertex[j])
            .collect();
        self.flux_matrix.matvec(&flat)
    }
}

/// Assemble the velocity-tested gradient operator for the whole mesh.
pub fn assemble_mpfa_with_tables(
    tri: &Triangulation,
    tables: &FluxTables,
) -> Result<MpfaOperator> {
    let nf = tri.nfacets();
    let mut gmat = Triplets::new(2 * nf, tri.ncells());
    let boundary_vertices: Vec<usize> =
        (0..tri.nvertices()).filter(|&j| tri.is_boundary_vertex(j)).collect();
    let mut bv_index = vec![usize::MAX; tri.nvertices()];
    for (i, &j) in boundary_vertices.iter().enumerate() {
        bv_index[j] = i;
    }
    let mut flux_matrix = Triplets::new(2 * nf, 2 * boundary_vertices.len());
    let mut locals = Vec::with_capacity(tri.nvertices());

    for j in 0..tri.nvertices() {
        let me = macro_element(tri, j)?;
        let rec = if me.is_boundary {
            eliminate_boundary(tri, &me, tables.by_vertex[j])?
        } else {
            eliminate_interior(tri, &me)?
        };

        for (i, quad) in me.quadrangles.iter().enumerate() {
            let l = me.cells[i];
            let facets = tri.cell_facets(l);
            for k in 0..3 {
                // exact integral of the linear basis over the quadrangle
                let psi = quad.area * crate::fem::cr_basis(tri, l, facets[k], quad.centroid);
                for comp in 0..2 {
                    let row = comp * nf + facets[k];
                    for (c, &cell) in rec.cells.iter().enumerate() {
                        let v = psi * rec.coeff[i][c][comp];
                        if v != 0.0 {
                            gmat.push(row, cell, v);
                        }
                    }
                    if me.is_boundary {
                        for side in 0..2 {
                            let v = psi * rec.g0_unit[i][side][comp];
                            if v != 0.0 {
                                flux_matrix.push(row, 2 * bv_index[j] + side, v);
                            }
                        }
                    }
                }
            }
        }
        locals.push(rec);
    }

    let flux_matrix = flux_matrix.compress()?;
    let flat: Vec<f64> = boundary_vertices
        .iter()
        .flat_map(|&j| tables.by_vertex[j])
        .collect();
    let g0vec = flux_matrix.matvec(&flat);
    Ok(MpfaOperator {
        gmat: gmat.compress()?,
        g0vec,
        flux_matrix,
        boundary_vertices,
        locals,
    })
}

/// Assemble with flux data integrated from a vector function.
pub fn assemble_mpfa(tri: &Triangulation, f: impl Fn(Point) -> Point) -> Result<MpfaOperator> {
    assemble_mpfa_with_tables(tri, &FluxTables::from_function(tri, f)?)
}

/// Per-quadrangle reconstructed gradient of a P0 pressure field, for
/// diagnostics and the affine-exactness checks.
pub struct QuadrangleGradient {
    pub vertex: usize,
    pub cell: usize,
    pub centroid: Point,
    pub area: f64,
    pub gradient: Point,
}

pub fn reconstruct_field_with_tables(
    tri: &Triangulation,
    pressure: &[f64],
    tables: &FluxTables,
) -> Result<Vec<QuadrangleGradient>> {
    assert_eq!(pressure.len(), tri.ncells());
    let mut out = Vec::new();
    for j in 0..tri.nvertices() {
        let me = macro_element(tri, j)?;
        let rec = if me.is_boundary {
            eliminate_boundary(tri, &me, tables.by_vertex[j])?
        } else {
            eliminate_interior(tri, &me)?
        };
        let values: Vec<f64> = me.cells.iter().map(|&l| pressure[l]).collect();
        let grads = rec.gradients(&values);
        for (i, g) in grads.into_iter().enumerate() {
            out.push(QuadrangleGradient {
                vertex: j,
                cell: me.cells[i],
                centroid: me.quadrangles[i].centroid,
                area: me.quadrangles[i].area,
                gradient: g,
            });
        }
    }
    Ok(out)
}

pub fn reconstruct_field(
    tri: &Triangulation,
    pressure: &[f64],
    f: impl Fn(Point) -> Point,
) -> Result<Vec<QuadrangleGradient>> {
    reconstruct_field_with_tables(tri, pressure, &FluxTables::from_function(tri, f)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_connectivity, generate_structured, DiagonalMode};

    fn unit_triangle_fan() -> (Triangulation, MacroElement) {
        let tri = build_connectivity(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let me = macro_element(&tri, 0).unwrap();
        (tri, me)
    }

    #[test]
    fn local_formula_constant_values_give_zero() {
        let (tri, me) = unit_triangle_fan();
        let g = local_gradient_formula(&tri, &me, 0, 3.7, 3.7, 3.7);
        assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14);
    }

    #[test]
    fn local_formula_affine_values_reproduce_the_gradient() {
        let (tri, me) = unit_triangle_fan();
        let (a, b, c) = (0.4, -1.2, 2.5);
        let phi = |p: Point| a + b * p[0] + c * p[1];
        // auxiliary values at the one-third points of the fan edges
        let center = tri.vertex(0);
        let third = |to: Point| {
            [
                center[0] + (to[0] - center[0]) / 3.0,
                center[1] + (to[1] - center[1]) / 3.0,
            ]
        };
        let qt1 = phi(third(tri.vertex(me.fan_vertices[0])));
        let qt2 = phi(third(tri.vertex(me.fan_vertices[1])));
        let qbar = phi(tri.centroid(0));
        let g = local_gradient_formula(&tri, &me, 0, qt1, qt2, qbar);
        assert!((g[0] - b).abs() < 1e-13);
        assert!((g[1] - c).abs() < 1e-13);
    }

    #[test]
    fn local_formula_single_aux_value_frozen_case() {
        // unit right triangle, center (0,0), entry aux 1, exit aux 0, cell 0:
        // 3/(2|K|) * S_entry = 3 * (0, -1)
        let (tri, me) = unit_triangle_fan();
        assert_eq!(me.fan_vertices, vec![1, 2]);
        let g = local_gradient_formula(&tri, &me, 0, 1.0, 0.0, 0.0);
        assert!((g[0] - 0.0).abs() < 1e-14);
        assert!((g[1] + 3.0).abs() < 1e-14);
    }

    #[test]
    fn interior_elimination_constant_and_affine_exactness() {
        let tri = generate_structured(4, DiagonalMode::Alternating).unwrap();
        let j = (0..tri.nvertices())
            .find(|&j| !tri.is_boundary_vertex(j))
            .unwrap();
        let me = macro_element(&tri, j).unwrap();
        let rec = eliminate_interior(&tri, &me).unwrap();

        // constants annihilate
        let grads = rec.gradients(&vec![2.25; me.ncells()]);
        for g in &grads {
            assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
        }
        // coefficient rows sum to zero componentwise
        for row in &rec.coeff {
            let sx: f64 = row.iter().map(|c| c[0]).sum();
            let sy: f64 = row.iter().map(|c| c[1]).sum();
            assert!(sx.abs() < 1e-12 && sy.abs() < 1e-12);
        }

        // affine exactness with barycentre values
        let (b, c) = (1.7, -0.6);
        let values: Vec<f64> = me
            .cells
            .iter()
            .map(|&l| {
                let g = tri.centroid(l);
                b * g[0] + c * g[1]
            })
            .collect();
        for g in rec.gradients(&values) {
            assert!((g[0] - b).abs() < 1e-12 && (g[1] - c).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_elimination_affine_exactness_and_zero_data() {
        let tri = generate_structured(4, DiagonalMode::Alternating).unwrap();
        for j in (0..tri.nvertices()).filter(|&j| tri.is_boundary_vertex(j)) {
            let me = macro_element(&tri, j).unwrap();

            // zero flux and constant values: zero gradients
            let rec = eliminate_boundary(&tri, &me, [0.0, 0.0]).unwrap();
            for g in rec.gradients(&vec![1.0; me.ncells()]) {
                assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
            }

            // affine field with exact fluxes
            let (b, c) = (-0.8, 0.45);
            let grad = [b, c];
            let flux = [
                half_edge_flux(&tri, j, me.edges[0], |_x| grad),
                half_edge_flux(&tri, j, *me.edges.last().unwrap(), |_x| grad),
            ];
            let rec = eliminate_boundary(&tri, &me, flux).unwrap();
            let values: Vec<f64> = me
                .cells
                .iter()
                .map(|&l| {
                    let g = tri.centroid(l);
                    b * g[0] + c * g[1]
                })
                .collect();
            for g in rec.gradients(&values) {
                assert!((g[0] - b).abs() < 1e-11, "vertex {j}");
                assert!((g[1] - c).abs() < 1e-11, "vertex {j}");
            }
        }
    }

    #[test]
    fn flux_continuity_residual_after_elimination() {
        use rand::{Rng, SeedableRng};
        let tri = generate_structured(5, DiagonalMode::Alternating).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for j in 0..tri.nvertices() {
            let me = macro_element(&tri, j).unwrap();
            let rec = if me.is_boundary {
                eliminate_boundary(&tri, &me, [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                    .unwrap()
            } else {
                eliminate_interior(&tri, &me).unwrap()
            };
            let values: Vec<f64> = (0..me.ncells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let grads = rec.gradients(&values);
            let max_q = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let max_s = me
                .normals
                .iter()
                .flat_map(|n| [n.entry, n.exit, n.outer])
                .fold(0.0f64, |m, s| m.max(crate::mesh::norm(s)));
            let min_area = me
                .cells
                .iter()
                .map(|&l| tri.area(l))
                .fold(f64::INFINITY, f64::min);
            let scale = (max_q * max_s / min_area).max(1.0);
            let pairs = if me.is_boundary {
                me.ncells() - 1
            } else {
                me.ncells()
            };
            for i in 0..pairs {
                let next = (i + 1) % me.ncells();
                let res = dot(grads[i], me.normals[i].exit)
                    + dot(grads[next], me.normals[next].entry);
                assert!(res.abs() <= 1e-12 * scale, "vertex {j} edge {i}: {res}");
            }
        }
    }

    #[test]
    fn assembled_operator_matches_quadrangle_quadrature_oracle() {
        use rand::{Rng, SeedableRng};
        let tri = generate_structured(4, DiagonalMode::Alternating).unwrap();
        let zero = |_x: Point| [0.0, 0.0];
        let op = assemble_mpfa(&tri, zero).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let q: Vec<f64> = (0..tri.ncells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nf = tri.nfacets();
        let v: Vec<f64> = (0..2 * nf).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let lhs: f64 = op
            .apply(&q)
            .iter()
            .zip(&v)
            .map(|(a, b)| a * b)
            .sum();

        // oracle: per-quadrangle integration of G . v_h with an independent
        // rule (split each quadrangle into two triangles, midpoint rule).
        let quads = reconstruct_field(&tri, &q, zero).unwrap();
        let mut rhs = 0.0;
        for qg in &quads {
            let me = macro_element(&tri, qg.vertex).unwrap();
            let i = me.cells.iter().position(|&l| l == qg.cell).unwrap();
            let pts = me.quadrangles[i].points;
            for tri_pts in [[pts[0], pts[1], pts[2]], [pts[0], pts[2], pts[3]]] {
                let area = 0.5
                    * ((tri_pts[1][0] - tri_pts[0][0]) * (tri_pts[2][1] - tri_pts[0][1])
                        - (tri_pts[1][1] - tri_pts[0][1]) * (tri_pts[2][0] - tri_pts[0][0]));
                for e in 0..3 {
                    let m = [
                        0.5 * (tri_pts[e][0] + tri_pts[(e + 1) % 3][0]),
                        0.5 * (tri_pts[e][1] + tri_pts[(e + 1) % 3][1]),
                    ];
                    let val = crate::fem::cr_vector_value(&tri, &v, qg.cell, m);
                    rhs += area / 3.0 * dot(qg.gradient, val);
                }
            }
        }
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn affine_reconstruction_is_exact_on_every_quadrangle() {
        let tri = generate_structured(5, DiagonalMode::Alternating).unwrap();
        let (a, b, c) = (0.3, -1.1, 0.8);
        let grad = [b, c];
        let q: Vec<f64> = (0..tri.ncells())
            .map(|l| {
                let g = tri.centroid(l);
                a + b * g[0] + c * g[1]
            })
            .collect();
        let quads = reconstruct_field(&tri, &q, |_x| grad).unwrap();
        for qg in &quads {
            assert!((qg.gradient[0] - b).abs() < 1e-11);
            assert!((qg.gradient[1] - c).abs() < 1e-11);
        }
    }

    #[test]
    fn constant_pressure_and_zero_forcing_give_zero_operator_action() {
        let tri = generate_structured(3, DiagonalMode::Alternating).unwrap();
        let op = assemble_mpfa(&tri, |_x| [0.0, 0.0]).unwrap();
        let g = op.apply(&vec![5.0; tri.ncells()]);
        for v in &g {
            assert!(v.abs() < 1e-11);
        }
        let z = op.apply(&vec![0.0; tri.ncells()]);
        for v in &z {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn refinement_improves_pointwise_gradient_accuracy() {
        // p = sin(2 pi x) sin(2 pi y), sampled at barycentres
        let p = |x: Point| (2.0 * std::f64::consts::PI * x[0]).sin()
            * (2.0 * std::f64::consts::PI * x[1]).sin();
        let gp = |x: Point| -> Point {
            let t = 2.0 * std::f64::consts::PI;
            [
                t * (t * x[0]).cos() * (t * x[1]).sin(),
                t * (t * x[0]).sin() * (t * x[1]).cos(),
            ]
        };
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let tri = generate_structured(n, DiagonalMode::Alternating).unwrap();
            let q: Vec<f64> = (0..tri.ncells()).map(|l| p(tri.centroid(l))).collect();
            let quads = reconstruct_field(&tri, &q, gp).unwrap();
            let mut err: f64 = 0.0;
            for qg in &quads {
                let want = gp(qg.centroid);
                err = err.max((qg.gradient[0] - want[0]).abs())
                    .max((qg.gradient[1] - want[1]).abs());
            }
            errs.push(err);
        }
        // max-norm deviation at quadrangle centroids: first order, the
        // observed ratio approaches 1 from below
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "errs {errs:?}");
        assert!(order1 >= 0.95, "orders {order1:.2}, {order2:.2}, errs {errs:?}");
        assert!(order2 >= 0.95, "orders {order1:.2}, {order2:.2}, errs {errs:?}");
    }
}

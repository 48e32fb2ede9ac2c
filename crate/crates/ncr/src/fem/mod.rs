//! Crouzeix-Raviart basis, interpolation, quadrature, broken norms and the
//! scheme-independent operators (mass, stiffness, divergence, vertex
//! gradient coupling).

pub mod norms;
pub mod operators;
pub mod quadrature;

use crate::mesh::{Point, Triangulation};

/// Degree-of-freedom layouts carried by a [`DofField`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofLayout {
    /// One value per facet (the facet mean).
    CrScalar,
    /// Two stacked CR scalar blocks, x then y.
    CrVector,
    /// One value per cell.
    P0,
    /// One value per vertex (continuous hats).
    P1,
    /// P0 block followed by a P1 block.
    P0PlusP1,
}

impl DofLayout {
    pub fn len(&self, tri: &Triangulation) -> usize {
        match self {
            DofLayout::CrScalar => tri.nfacets(),
            DofLayout::CrVector => 2 * tri.nfacets(),
            DofLayout::P0 => tri.ncells(),
            DofLayout::P1 => tri.nvertices(),
            DofLayout::P0PlusP1 => tri.ncells() + tri.nvertices(),
        }
    }
}

/// A vector of degrees of freedom tagged with its layout.
#[derive(Debug, Clone)]
pub struct DofField {
    pub layout: DofLayout,
    pub values: Vec<f64>,
}

impl DofField {
    pub fn zeros(layout: DofLayout, tri: &Triangulation) -> Self {
        Self {
            layout,
            values: vec![0.0; layout.len(tri)],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Index of the (facet, component) velocity dof inside a CR vector field.
#[inline]
pub fn vector_dof(nfacets: usize, facet: usize, comp: usize) -> usize {
    comp * nfacets + facet
}

/// CR basis value of the dof attached to `facet` evaluated at `x` inside
/// cell `l`: 1 - 2*lambda of the opposite vertex. Zero outside the cell's
/// facets.
pub fn cr_basis(tri: &Triangulation, l: usize, facet: usize, x: Point) -> f64 {
    let k = (0..3)
        .find(|&k| tri.cell_facets(l)[k] == facet)
        .expect("facet belongs to cell");
    1.0 - 2.0 * tri.barycentric(l, k, x)
}

/// Constant gradient of the CR basis of `facet` on cell `l`.
pub fn cr_basis_gradient(tri: &Triangulation, l: usize, facet: usize) -> Point {
    let k = (0..3)
        .find(|&k| tri.cell_facets(l)[k] == facet)
        .expect("facet belongs to cell");
    let s = tri.scaled_normal(l, k);
    let a = tri.area(l);
    [s[0] / a, s[1] / a]
}

/// Value of a CR scalar field at `x` inside cell `l`.
pub fn cr_value(tri: &Triangulation, field: &[f64], l: usize, x: Point) -> f64 {
    let facets = tri.cell_facets(l);
    let mut v = 0.0;
    for k in 0..3 {
        v += field[facets[k]] * (1.0 - 2.0 * tri.barycentric(l, k, x));
    }
    v
}

/// Constant gradient of a CR scalar field on cell `l`.
pub fn cr_gradient(tri: &Triangulation, field: &[f64], l: usize) -> Point {
    let facets = tri.cell_facets(l);
    let a = tri.area(l);
    let mut g = [0.0, 0.0];
    for k in 0..3 {
        let s = tri.scaled_normal(l, k);
        g[0] += field[facets[k]] * s[0] / a;
        g[1] += field[facets[k]] * s[1] / a;
    }
    g
}

/// Facet mean of a scalar function by 3-point Gauss (exact to degree 5).
pub fn facet_mean(tri: &Triangulation, f: usize, g: impl Fn(Point) -> f64) -> f64 {
    let facet = tri.facet(f);
    let a = tri.vertex(facet.vertices[0]);
    let b = tri.vertex(facet.vertices[1]);
    quadrature::GAUSS_SEGMENT_3
        .iter()
        .map(|&(t, w)| {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            w * g(x)
        })
        .sum()
}

/// CR interpolation of a scalar function: per-facet means.
pub fn interpolate_cr(tri: &Triangulation, g: impl Fn(Point) -> f64) -> DofField {
    let values = (0..tri.nfacets()).map(|f| facet_mean(tri, f, &g)).collect();
    DofField {
        layout: DofLayout::CrScalar,
        values,
    }
}

/// Componentwise CR interpolation of a vector function.
pub fn interpolate_cr_vector(tri: &Triangulation, g: impl Fn(Point) -> Point) -> DofField {
    let nf = tri.nfacets();
    let mut values = vec![0.0; 2 * nf];
    for f in 0..nf {
        let m = facet_mean(tri, f, |x| g(x)[0]);
        values[vector_dof(nf, f, 0)] = m;
        values[vector_dof(nf, f, 1)] = facet_mean(tri, f, |x| g(x)[1]);
    }
    DofField {
        layout: DofLayout::CrVector,
        values,
    }
}

/// Evaluate a pressure field (P0 or P0+P1) at a point of cell `l`.
pub fn pressure_value(tri: &Triangulation, p: &DofField, l: usize, x: Point) -> f64 {
    match p.layout {
        DofLayout::P0 => p.values[l],
        DofLayout::P0PlusP1 => {
            let mut v = p.values[l];
            let cell = tri.cell(l);
            for k in 0..3 {
                v += p.values[tri.ncells() + cell[k]] * tri.barycentric(l, k, x);
            }
            v
        }
        _ => panic!("pressure_value expects a pressure layout"),
    }
}

/// Value of a CR vector field at `x` inside cell `l`.
pub fn cr_vector_value(tri: &Triangulation, field: &[f64], l: usize, x: Point) -> Point {
    let nf = tri.nfacets();
    [
        cr_value(tri, &field[..nf], l, x),
        cr_value(tri, &field[nf..], l, x),
    ]
}

/// Per-cell 2x2 gradient of a CR vector field (rows are components).
pub fn cr_vector_gradient(tri: &Triangulation, field: &[f64], l: usize) -> [[f64; 2]; 2] {
    let nf = tri.nfacets();
    [
        cr_gradient(tri, &field[..nf], l),
        cr_gradient(tri, &field[nf..], l),
    ]
}

pub use quadrature::QuadratureRule;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_connectivity, generate_structured, DiagonalMode};

    fn unit_triangle() -> Triangulation {
        build_connectivity(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn cr_basis_values_at_named_points() {
        let tri = unit_triangle();
        for k in 0..3 {
            let f = tri.cell_facets(0)[k];
            // 1 at its own facet midpoint
            assert!((cr_basis(&tri, 0, f, tri.facet(f).midpoint) - 1.0).abs() < 1e-14);
            // -1 at the opposite vertex
            let v = tri.vertex(tri.cell(0)[k]);
            assert!((cr_basis(&tri, 0, f, v) + 1.0).abs() < 1e-14);
            // 1/3 at the barycentre
            assert!((cr_basis(&tri, 0, f, tri.centroid(0)) - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolation_preserves_constants_and_affines() {
        let tri = generate_structured(3, DiagonalMode::Alternating).unwrap();
        let c = interpolate_cr(&tri, |_| 4.25);
        assert!(c.values.iter().all(|&v| (v - 4.25).abs() < 1e-14));

        let g = |x: Point| 1.0 + 2.0 * x[0] - 0.5 * x[1];
        let a = interpolate_cr(&tri, g);
        for f in 0..tri.nfacets() {
            assert!((a.values[f] - g(tri.facet(f).midpoint)).abs() < 1e-14);
        }
        // interpolant reproduces the affine pointwise
        for l in 0..tri.ncells() {
            let x = tri.centroid(l);
            assert!((cr_value(&tri, &a.values, l, x) - g(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn facet_mean_of_x_squared() {
        let tri = unit_triangle();
        // facet from (0,0) to (1,0) is opposite vertex (0,1) = local 2
        let f = tri.cell_facets(0)[2];
        assert_eq!(tri.facet(f).vertices, [0, 1]);
        let m = facet_mean(&tri, f, |x| x[0] * x[0]);
        assert!((m - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn facet_mean_continuity_of_cr_fields() {
        // interior facet means of a random CR field match from both sides
        let tri = generate_structured(4, DiagonalMode::Alternating).unwrap();
        let field: Vec<f64> = (0..tri.nfacets()).map(|f| (f as f64 * 0.37).sin()).collect();
        for f in tri.interior_facets() {
            let facet = tri.facet(f);
            let (l0, l1) = (facet.cells[0].unwrap(), facet.cells[1].unwrap());
            let a = tri.vertex(facet.vertices[0]);
            let b = tri.vertex(facet.vertices[1]);
            let mean = |l: usize| -> f64 {
                quadrature::GAUSS_SEGMENT_3
                    .iter()
                    .map(|&(t, w)| {
                        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                        w * cr_value(&tri, &field, l, x)
                    })
                    .sum()
            };
            assert!((mean(l0) - mean(l1)).abs() < 1e-13);
        }
    }
}

//! Assembly of the scheme-independent operators on CR dofs: scalar mass
//! and stiffness, the cell divergence rows, the vertex (P1 hat) gradient
//! coupling, and load vectors.
//!
//! CR gradients are constant per cell, so stiffness and divergence entries
//! are exact; mass uses the degree-2 midpoint rule, which is exact for the
//! quadratic integrand.

use super::quadrature::{physical_point, QuadratureRule};
use super::{cr_basis_gradient, vector_dof};
use crate::linalg::{CsrMatrix, Triplets};
use crate::mesh::{dot, Point, Triangulation};
use crate::Result;

/// Scalar CR stiffness: K[f,g] = sum_K grad psi_f . grad psi_g |K|.
pub fn assemble_stiffness(tri: &Triangulation) -> Result<CsrMatrix> {
    let nf = tri.nfacets();
    let mut t = Triplets::new(nf, nf);
    for l in 0..tri.ncells() {
        let facets = tri.cell_facets(l);
        let grads: [Point; 3] = [
            cr_basis_gradient(tri, l, facets[0]),
            cr_basis_gradient(tri, l, facets[1]),
            cr_basis_gradient(tri, l, facets[2]),
        ];
        let area = tri.area(l);
        for a in 0..3 {
            for b in 0..3 {
                t.push(facets[a], facets[b], area * dot(grads[a], grads[b]));
            }
        }
    }
    t.compress()
}

/// Scalar CR mass matrix; the midpoint rule makes the local block
/// (|K|/3) I, so the consistent matrix is already diagonal.
pub fn assemble_mass(tri: &Triangulation, lumped: bool) -> Result<CsrMatrix> {
    let nf = tri.nfacets();
    let mut t = Triplets::new(nf, nf);
    for l in 0..tri.ncells() {
        let facets = tri.cell_facets(l);
        let area = tri.area(l);
        for a in 0..3 {
            for b in 0..3 {
                let mut m = 0.0;
                for &(bary, w) in QuadratureRule::TriangleDegree2.points() {
                    let x = physical_point(tri, l, bary);
                    m += w * area
                        * super::cr_basis(tri, l, facets[a], x)
                        * super::cr_basis(tri, l, facets[b], x);
                }
                if lumped {
                    t.push(facets[a], facets[a], m);
                } else {
                    t.push(facets[a], facets[b], m);
                }
            }
        }
    }
    t.compress()
}

/// Divergence rows: D[l, dof(f,c)] = integral over K_l of d_c psi_f, i.e.
/// the scaled-normal component; (D v)_l is the exact integral of div v on
/// cell l.
pub fn assemble_divergence(tri: &Triangulation) -> Result<CsrMatrix> {
    let nf = tri.nfacets();
    let mut t = Triplets::new(tri.ncells(), 2 * nf);
    for l in 0..tri.ncells() {
        let facets = tri.cell_facets(l);
        for k in 0..3 {
            let s = tri.scaled_normal(l, k);
            t.push(l, vector_dof(nf, facets[k], 0), s[0]);
            t.push(l, vector_dof(nf, facets[k], 1), s[1]);
        }
    }
    t.compress()
}

/// Vertex gradient coupling: C[j, dof(f,c)] = integral over the cells
/// around j of psi_f times the c-component of the hat gradient. Exact:
/// the hat gradient is constant per cell and each basis integrates to
/// |K|/3 there, giving -S_{j,l}/6 per (cell, facet) pair.
pub fn assemble_p1_gradient_coupling(tri: &Triangulation) -> Result<CsrMatrix> {
    let nf = tri.nfacets();
    let mut t = Triplets::new(tri.nvertices(), 2 * nf);
    for l in 0..tri.ncells() {
        let cell = tri.cell(l);
        let facets = tri.cell_facets(l);
        for k in 0..3 {
            let j = cell[k];
            let s = tri.scaled_normal(l, k);
            for &f in &facets {
                t.push(j, vector_dof(nf, f, 0), -s[0] / 6.0);
                t.push(j, vector_dof(nf, f, 1), -s[1] / 6.0);
            }
        }
    }
    t.compress()
}

/// Load vector (f, psi_dof) per component, degree-5 rule.
pub fn assemble_load(tri: &Triangulation, f: impl Fn(Point) -> Point) -> Vec<f64> {
    let nf = tri.nfacets();
    let mut load = vec![0.0; 2 * nf];
    for l in 0..tri.ncells() {
        let facets = tri.cell_facets(l);
        let area = tri.area(l);
        for &(bary, w) in QuadratureRule::TriangleDegree5.points() {
            let x = physical_point(tri, l, bary);
            let fx = f(x);
            for k in 0..3 {
                let psi = 1.0 - 2.0 * bary[k];
                load[vector_dof(nf, facets[k], 0)] += w * area * psi * fx[0];
                load[vector_dof(nf, facets[k], 1)] += w * area * psi * fx[1];
            }
        }
    }
    load
}

/// Weights of the cell-mean zero constraint: cell areas.
pub fn p0_zero_mean_weights(tri: &Triangulation) -> Vec<f64> {
    (0..tri.ncells()).map(|l| tri.area(l)).collect()
}

/// Weights of the vertex zero-mean constraint: integrals of the hats.
pub fn p1_zero_mean_weights(tri: &Triangulation) -> Vec<f64> {
    let mut w = vec![0.0; tri.nvertices()];
    for l in 0..tri.ncells() {
        for &j in &tri.cell(l) {
            w[j] += tri.area(l) / 3.0;
        }
    }
    w
}

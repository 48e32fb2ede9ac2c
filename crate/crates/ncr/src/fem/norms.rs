//! Broken H1 seminorm, L2 norms/errors and the error measures reported by
//! the harness: velocity errors are relative unless the exact velocity is
//! identically zero, in which case the unnormalized discrete norm is used;
//! pressure errors are always relative.

use super::quadrature::{integrate, physical_point, QuadratureRule};
use super::{cr_vector_value, pressure_value, DofField, DofLayout};
use crate::mesh::{Point, Triangulation};

/// Broken H1 seminorm of a CR field (scalar or vector): gradients are
/// constant per cell so the sum is exact.
pub fn broken_h1(tri: &Triangulation, field: &DofField) -> f64 {
    let mut total = 0.0;
    match field.layout {
        DofLayout::CrScalar => {
            for l in 0..tri.ncells() {
                let g = super::cr_gradient(tri, &field.values, l);
                total += tri.area(l) * (g[0] * g[0] + g[1] * g[1]);
            }
        }
        DofLayout::CrVector => {
            let nf = tri.nfacets();
            for l in 0..tri.ncells() {
                let gx = super::cr_gradient(tri, &field.values[..nf], l);
                let gy = super::cr_gradient(tri, &field.values[nf..], l);
                total += tri.area(l)
                    * (gx[0] * gx[0] + gx[1] * gx[1] + gy[0] * gy[0] + gy[1] * gy[1]);
            }
        }
        _ => panic!("broken_h1 expects a CR layout"),
    }
    total.sqrt()
}

/// L2 norm of the difference between a CR vector field and an exact
/// vector function, degree-5 rule.
pub fn l2_error_velocity(
    tri: &Triangulation,
    field: &DofField,
    exact: impl Fn(Point) -> Point,
) -> f64 {
    assert_eq!(field.layout, DofLayout::CrVector);
    let mut total = 0.0;
    for l in 0..tri.ncells() {
        let area = tri.area(l);
        for &(bary, w) in QuadratureRule::TriangleDegree5.points() {
            let x = physical_point(tri, l, bary);
            let v = cr_vector_value(tri, &field.values, l, x);
            let e = exact(x);
            let dx = v[0] - e[0];
            let dy = v[1] - e[1];
            total += w * area * (dx * dx + dy * dy);
        }
    }
    total.sqrt()
}

/// L2 norm of the difference between a discrete pressure and an exact
/// scalar function, degree-5 rule.
pub fn l2_error_pressure(
    tri: &Triangulation,
    p: &DofField,
    exact: impl Fn(Point) -> f64,
) -> f64 {
    let mut total = 0.0;
    for l in 0..tri.ncells() {
        let area = tri.area(l);
        for &(bary, w) in QuadratureRule::TriangleDegree5.points() {
            let x = physical_point(tri, l, bary);
            let d = pressure_value(tri, p, l, x) - exact(x);
            total += w * area * d * d;
        }
    }
    total.sqrt()
}

/// Velocity error measure: unnormalized discrete L2 norm when the exact
/// velocity vanishes identically (`exact_norm == 0`), relative otherwise.
pub fn eps0_velocity(
    tri: &Triangulation,
    field: &DofField,
    exact: impl Fn(Point) -> Point,
    exact_norm: f64,
) -> f64 {
    let err = l2_error_velocity(tri, field, exact);
    if exact_norm == 0.0 {
        err
    } else {
        err / exact_norm
    }
}

/// Pressure error measure: always relative.
pub fn eps0_pressure(
    tri: &Triangulation,
    p: &DofField,
    exact: impl Fn(Point) -> f64,
    exact_norm: f64,
) -> f64 {
    l2_error_pressure(tri, p, exact) / exact_norm
}

/// L2 norm of an exact scalar function by quadrature (for cross-checks of
/// the closed-form normalization constants).
pub fn l2_norm_of(tri: &Triangulation, f: impl Fn(Point) -> f64) -> f64 {
    integrate(tri, QuadratureRule::TriangleDegree5, |x| {
        let v = f(x);
        v * v
    })
    .sqrt()
}

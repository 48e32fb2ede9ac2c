//! Quadrature rules: Gauss points on the unit segment and symmetric rules
//! on triangles in barycentric form.

use crate::mesh::{Point, Triangulation};

/// (parameter in [0,1], weight), weights summing to one.
pub type SegmentRule = &'static [(f64, f64)];

/// 2-point Gauss on [0,1], exact to degree 3.
pub const GAUSS_SEGMENT_2: SegmentRule = &[
    (0.211324865405187118, 0.5),
    (0.788675134594812882, 0.5),
];

/// 3-point Gauss on [0,1], exact to degree 5.
pub const GAUSS_SEGMENT_3: SegmentRule = &[
    (0.112701665379258311, 0.277777777777777778),
    (0.5, 0.444444444444444444),
    (0.887298334620741689, 0.277777777777777778),
];

/// Symmetric triangle rule in barycentric coordinates; weights sum to one
/// and scale by the cell area on application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Edge-midpoint rule, exact to degree 2.
    TriangleDegree2,
    /// 7-point rule, exact to degree 5.
    TriangleDegree5,
}

impl QuadratureRule {
    pub fn points(&self) -> &'static [([f64; 3], f64)] {
        match self {
            QuadratureRule::TriangleDegree2 => &MIDPOINT_RULE,
            QuadratureRule::TriangleDegree5 => &SEVEN_POINT_RULE,
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            QuadratureRule::TriangleDegree2 => 2,
            QuadratureRule::TriangleDegree5 => 5,
        }
    }
}

const MIDPOINT_RULE: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

// Radon's degree-5 rule: centroid, plus two symmetric orbits with weights
// (155 +- sqrt(15))/1200.
const A1: f64 = 0.059715871789769820;
const B1: f64 = 0.470142064105115090;
const W1: f64 = 0.132394152788506181;
const A2: f64 = 0.797426985353087322;
const B2: f64 = 0.101286507323456339;
const W2: f64 = 0.125939180544827153;

const SEVEN_POINT_RULE: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([A1, B1, B1], W1),
    ([B1, A1, B1], W1),
    ([B1, B1, A1], W1),
    ([A2, B2, B2], W2),
    ([B2, A2, B2], W2),
    ([B2, B2, A2], W2),
];

/// Map a barycentric point of cell `l` to physical coordinates.
pub fn physical_point(tri: &Triangulation, l: usize, bary: [f64; 3]) -> Point {
    let c = tri.cell(l);
    let mut x = [0.0, 0.0];
    for k in 0..3 {
        let v = tri.vertex(c[k]);
        x[0] += bary[k] * v[0];
        x[1] += bary[k] * v[1];
    }
    x
}

/// Integrate a scalar function over one cell.
pub fn integrate_cell(
    tri: &Triangulation,
    l: usize,
    rule: QuadratureRule,
    f: impl Fn(Point) -> f64,
) -> f64 {
    let area = tri.area(l);
    rule.points()
        .iter()
        .map(|&(bary, w)| w * area * f(physical_point(tri, l, bary)))
        .sum()
}

/// Integrate a scalar function over the whole mesh.
pub fn integrate(tri: &Triangulation, rule: QuadratureRule, f: impl Fn(Point) -> f64) -> f64 {
    (0..tri.ncells())
        .map(|l| integrate_cell(tri, l, rule, &f))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_connectivity;

    /// Exact integral of x^p y^q over the unit right triangle.
    fn monomial_exact(p: u32, q: u32) -> f64 {
        // p! q! / (p+q+2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
        fact(p) * fact(q) / fact(p + q + 2)
    }

    #[test]
    fn rules_integrate_monomials_to_declared_degree() {
        let tri = build_connectivity(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        for rule in [QuadratureRule::TriangleDegree2, QuadratureRule::TriangleDegree5] {
            let deg = rule.degree() as u32;
            for p in 0..=deg {
                for q in 0..=(deg - p) {
                    let got = integrate_cell(&tri, 0, rule, |x| {
                        x[0].powi(p as i32) * x[1].powi(q as i32)
                    });
                    let want = monomial_exact(p, q);
                    assert!(
                        (got - want).abs() <= 1e-14 * want.abs().max(1.0),
                        "{rule:?} x^{p} y^{q}: got {got}, want {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn weights_are_positive_and_sum_to_one() {
        for rule in [QuadratureRule::TriangleDegree2, QuadratureRule::TriangleDegree5] {
            let total: f64 = rule.points().iter().map(|&(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-15);
            assert!(rule.points().iter().all(|&(_, w)| w > 0.0));
        }
        for rule in [GAUSS_SEGMENT_2, GAUSS_SEGMENT_3] {
            let total: f64 = rule.iter().map(|&(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn segment_rules_are_exact_to_declared_degree() {
        for (rule, deg) in [(GAUSS_SEGMENT_2, 3u32), (GAUSS_SEGMENT_3, 5u32)] {
            for p in 0..=deg {
                let got: f64 = rule.iter().map(|&(t, w)| w * t.powi(p as i32)).sum();
                let want = 1.0 / (p as f64 + 1.0);
                assert!((got - want).abs() < 1e-14, "degree {p}");
            }
        }
    }
}

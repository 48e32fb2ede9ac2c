//! Mesh generators for the unit square: a structured grid with either a
//! uniform or an alternating diagonal split, and a Kershaw-type distorted
//! family obtained by a two-layer z-shear of the vertical coordinate.

use super::{build_connectivity, Triangulation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagonalMode {
    /// Every square splits along the lower-left to upper-right diagonal.
    Uniform,
    /// Diagonal direction flips with square parity so that each corner
    /// square's diagonal touches the domain corner; corner triangles then
    /// carry exactly one boundary edge.
    Alternating,
}

impl std::str::FromStr for DiagonalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(DiagonalMode::Uniform),
            "alternating" => Ok(DiagonalMode::Alternating),
            other => Err(Error::InvalidArgument(format!(
                "unknown diagonal mode '{other}' (expected uniform|alternating)"
            ))),
        }
    }
}

fn grid_vertices(n: usize, shear: impl Fn(f64, f64) -> f64) -> Vec<[f64; 2]> {
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = i as f64 / n as f64;
            let y = j as f64 / n as f64;
            vertices.push([x, shear(x, y)]);
        }
    }
    vertices
}

fn square_cells(n: usize, diag_main: impl Fn(usize, usize) -> bool) -> Vec<[usize; 3]> {
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = vid(i, j);
            let b = vid(i + 1, j);
            let c = vid(i + 1, j + 1);
            let d = vid(i, j + 1);
            if diag_main(i, j) {
                cells.push([a, b, c]);
                cells.push([a, c, d]);
            } else {
                cells.push([a, b, d]);
                cells.push([b, c, d]);
            }
        }
    }
    cells
}

/// Uniform grid of (0,1)^2 with (n+1)^2 vertices and 2n^2 triangles.
pub fn generate_structured(n: usize, mode: DiagonalMode) -> Result<Triangulation> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "structured mesh needs n >= 2, got {n}"
        )));
    }
    let vertices = grid_vertices(n, |_, y| y);
    let cells = match mode {
        DiagonalMode::Uniform => square_cells(n, |_, _| true),
        DiagonalMode::Alternating => square_cells(n, |i, j| {
            // Parity pattern; for odd n the two corner squares whose parity
            // points the diagonal away from the corner are overridden.
            if (i, j) == (n - 1, 0) || (i, j) == (0, n - 1) {
                false
            } else if (i, j) == (0, 0) || (i, j) == (n - 1, n - 1) {
                true
            } else {
                (i + j) % 2 == 0
            }
        }),
    };
    let mut tri = build_connectivity(vertices, cells)?;
    tri.set_grid_h(1.0 / n as f64);
    Ok(tri)
}

/// Kershaw-type distorted mesh: the vertical coordinate is sheared by a
/// z-shaped profile (up over the first quarter, down across the middle
/// half, back up over the last quarter), with amplitude growing linearly
/// from both horizontal boundaries. Squares split along the lower-left to
/// upper-right diagonal. `distortion = 0` reproduces the uniform
/// structured mesh exactly.
pub fn generate_kershaw(n: usize, distortion: f64) -> Result<Triangulation> {
    if n < 4 || n % 4 != 0 {
        return Err(Error::InvalidArgument(format!(
            "kershaw mesh needs n >= 4 divisible by 4, got {n}"
        )));
    }
    if !(0.0..1.0).contains(&distortion) {
        return Err(Error::InvalidArgument(format!(
            "kershaw distortion must lie in [0, 1), got {distortion}"
        )));
    }
    let zigzag = |x: f64| -> f64 {
        if x <= 0.25 {
            4.0 * x
        } else if x <= 0.75 {
            1.0 - 4.0 * (x - 0.25)
        } else {
            -1.0 + 4.0 * (x - 0.75)
        }
    };
    let vertices = grid_vertices(n, |x, y| y + distortion * zigzag(x) * y.min(1.0 - y));
    let cells = square_cells(n, |_, _| true);
    let mut tri = build_connectivity(vertices, cells)?;
    tri.set_grid_h(1.0 / n as f64);
    Ok(tri)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate;

    #[test]
    fn structured_counts_and_euler() {
        let tri = generate_structured(2, DiagonalMode::Uniform).unwrap();
        assert_eq!(tri.nvertices(), 9);
        assert_eq!(tri.ncells(), 8);
        assert_eq!(tri.nfacets(), 16);
        assert_eq!(
            tri.nvertices() as i64 - tri.nfacets() as i64 + tri.ncells() as i64,
            1
        );
    }

    #[test]
    fn structured_rejects_small_n() {
        assert!(generate_structured(1, DiagonalMode::Uniform).is_err());
    }

    #[test]
    fn structured_n10_counts_by_enumeration() {
        let n = 10;
        let tri = generate_structured(n, DiagonalMode::Alternating).unwrap();
        assert_eq!(tri.ncells(), 2 * n * n);
        assert_eq!(tri.nfacets(), 3 * n * n + 2 * n);
        assert!((tri.max_diameter() - 2f64.sqrt() / n as f64).abs() < 1e-14);
        assert!((tri.mesh_size() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn uniform_mesh_has_two_corner_cells_with_two_boundary_edges() {
        for n in [2, 4] {
            let tri = generate_structured(n, DiagonalMode::Uniform).unwrap();
            let report = validate(&tri);
            assert!(!report.hypothesis_41_pass());
            // the main-diagonal split leaves the (1,0) and (0,1) corner
            // triangles with both of their boundary edges
            assert_eq!(report.hypothesis_41_violations.len(), 2, "n={n}");
            for &l in &report.hypothesis_41_violations {
                let touches_corner = tri.cell(l).iter().any(|&v| {
                    let p = tri.vertex(v);
                    p == [1.0, 0.0] || p == [0.0, 1.0]
                });
                assert!(touches_corner);
            }
        }
    }

    #[test]
    fn alternating_meshes_satisfy_hypothesis_41() {
        for n in [2, 3, 4, 5, 7, 10, 16] {
            let tri = generate_structured(n, DiagonalMode::Alternating).unwrap();
            let report = validate(&tri);
            assert!(report.all_structural_ok(), "n={n}");
            assert!(report.hypothesis_41_pass(), "n={n}");
        }
    }

    #[test]
    fn kershaw_zero_distortion_reduces_to_structured_uniform() {
        let a = generate_kershaw(8, 0.0).unwrap();
        let b = generate_structured(8, DiagonalMode::Uniform).unwrap();
        assert_eq!(a.nvertices(), b.nvertices());
        assert_eq!(a.ncells(), b.ncells());
        for j in 0..a.nvertices() {
            assert_eq!(a.vertex(j), b.vertex(j));
        }
        for l in 0..a.ncells() {
            assert_eq!(a.cell(l), b.cell(l));
        }
    }

    #[test]
    fn kershaw_distorted_cells_stay_positive_and_valid() {
        for (n, d) in [(8, 0.6), (16, 0.6), (8, 0.9)] {
            let tri = generate_kershaw(n, d).unwrap();
            for l in 0..tri.ncells() {
                assert!(tri.area(l) > 0.0, "n={n} d={d} cell={l}");
            }
            let report = validate(&tri);
            assert!(report.all_structural_ok());
            assert!(report.euler_ok);
        }
    }

    #[test]
    fn kershaw_rejects_bad_parameters() {
        assert!(generate_kershaw(6, 0.5).is_err());
        assert!(generate_kershaw(8, 1.0).is_err());
        assert!(generate_kershaw(2, 0.0).is_err());
    }

    #[test]
    fn generated_meshes_cover_the_unit_square() {
        for tri in [
            generate_structured(5, DiagonalMode::Alternating).unwrap(),
            generate_kershaw(8, 0.6).unwrap(),
        ] {
            assert!((tri.total_area() - 1.0).abs() < 1e-13);
        }
    }
}

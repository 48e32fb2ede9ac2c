//! Steady Stokes assembly and solve under the three schemes.
//!
//! All three share the CR velocity block and the cell mass-conservation
//! rows; they differ in the momentum pressure coupling: the transpose
//! divergence for the plain P0 pressure, the additional vertex-gradient
//! block for the enriched pressure, and the reconstructed-gradient
//! operator for the multi-point scheme (whose system is not symmetric).
//! Homogeneous or not, Dirichlet velocity dofs are eliminated with a
//! right-hand-side correction rather than penalized.

use crate::cases::ManufacturedCase;
use crate::fem::{facet_mean, operators, DofField, DofLayout};
use crate::linalg::{solve_saddle, CsrMatrix, SaddleBlocks, Triplets};
use crate::mesh::Triangulation;
use crate::mpfa;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// CR velocity with piecewise-constant pressure.
    CrP0,
    /// CR velocity with constant-plus-vertex pressure.
    TrioP0P1,
    /// CR velocity, constant pressure, multi-point gradient reconstruction.
    Mps,
}

impl SchemeKind {
    pub fn pressure_layout(&self) -> DofLayout {
        match self {
            SchemeKind::CrP0 | SchemeKind::Mps => DofLayout::P0,
            SchemeKind::TrioP0P1 => DofLayout::P0PlusP1,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SchemeKind::CrP0 => "cr",
            SchemeKind::TrioP0P1 => "trio",
            SchemeKind::Mps => "mps",
        }
    }

    pub fn all() -> [SchemeKind; 3] {
        [SchemeKind::CrP0, SchemeKind::TrioP0P1, SchemeKind::Mps]
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cr" | "cr-p0" => Ok(SchemeKind::CrP0),
            "trio" | "p0p1" => Ok(SchemeKind::TrioP0P1),
            "mps" | "mpfa" => Ok(SchemeKind::Mps),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown scheme '{other}' (expected cr|trio|mps)"
            ))),
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Mapping between full CR vector dofs and the reduced interior-only
/// unknowns of the solve.
pub struct VelocityDofMap {
    nfacets: usize,
    interior: Vec<usize>,
    reduced_of: Vec<Option<usize>>,
}

impl VelocityDofMap {
    pub fn new(tri: &Triangulation) -> Self {
        let nfacets = tri.nfacets();
        let interior: Vec<usize> = tri.interior_facets().collect();
        let mut reduced_of = vec![None; nfacets];
        for (i, &f) in interior.iter().enumerate() {
            reduced_of[f] = Some(i);
        }
        Self {
            nfacets,
            interior,
            reduced_of,
        }
    }

    pub fn n_interior_facets(&self) -> usize {
        self.interior.len()
    }

    pub fn n_reduced(&self) -> usize {
        2 * self.interior.len()
    }

    pub fn reduced_dof(&self, facet: usize, comp: usize) -> Option<usize> {
        self.reduced_of[facet].map(|i| comp * self.interior.len() + i)
    }

    pub fn full_dof(&self, reduced: usize) -> usize {
        let ni = self.interior.len();
        let comp = reduced / ni;
        comp * self.nfacets + self.interior[reduced % ni]
    }

    /// Reassemble a full CR vector field from reduced interior values and
    /// prescribed boundary dofs.
    pub fn expand(&self, reduced: &[f64], boundary: &[f64]) -> Vec<f64> {
        assert_eq!(reduced.len(), self.n_reduced());
        assert_eq!(boundary.len(), 2 * self.nfacets);
        let mut full = boundary.to_vec();
        for r in 0..reduced.len() {
            full[self.full_dof(r)] = reduced[r];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        (0..self.n_reduced()).map(|r| full[self.full_dof(r)]).collect()
    }
}

/// Expand the scalar stiffness to the reduced 2-component velocity block,
/// scaled by the viscosity.
fn velocity_block(
    k_scalar: &CsrMatrix,
    map: &VelocityDofMap,
    nu: f64,
) -> Result<CsrMatrix> {
    let n = map.n_reduced();
    let mut t = Triplets::new(n, n);
    for (f, g, v) in k_scalar.iter() {
        if let (Some(rf), Some(rg)) = (map.reduced_of[f], map.reduced_of[g]) {
            let ni = map.n_interior_facets();
            t.push(rf, rg, nu * v);
            t.push(ni + rf, ni + rg, nu * v);
        }
    }
    t.compress()
}

/// Restrict the columns of an operator on full velocity dofs (rows stay).
fn restrict_velocity_cols(op: &CsrMatrix, map: &VelocityDofMap) -> Result<CsrMatrix> {
    let nf = map.nfacets;
    let mut t = Triplets::new(op.nrows(), map.n_reduced());
    for (r, c, v) in op.iter() {
        let (facet, comp) = (c % nf, c / nf);
        if let Some(rc) = map.reduced_dof(facet, comp) {
            t.push(r, rc, v);
        }
    }
    t.compress()
}

/// Restrict the rows of an operator on full velocity dofs (columns stay).
fn restrict_velocity_rows(op: &CsrMatrix, map: &VelocityDofMap) -> Result<CsrMatrix> {
    let nf = map.nfacets;
    let mut t = Triplets::new(map.n_reduced(), op.ncols());
    for (r, c, v) in op.iter() {
        let (facet, comp) = (r % nf, r / nf);
        if let Some(rr) = map.reduced_dof(facet, comp) {
            t.push(rr, c, v);
        }
    }
    t.compress()
}

/// Multiply an operator acting on full velocity dofs by the boundary part
/// of a field (interior entries zeroed).
fn apply_to_boundary(op: &CsrMatrix, map: &VelocityDofMap, full: &[f64]) -> Vec<f64> {
    let nf = map.nfacets;
    let mut masked = full.to_vec();
    for comp in 0..2 {
        for &f in &map.interior {
            masked[comp * nf + f] = 0.0;
        }
    }
    op.matvec(&masked)
}

/// Dirichlet dof values of the case velocity: facet means at time `t`
/// (exactly zero for the homogeneous steady cases).
pub fn boundary_values(
    tri: &Triangulation,
    case: &ManufacturedCase,
    t: f64,
    nu: f64,
) -> Vec<f64> {
    let nf = tri.nfacets();
    let mut ub = vec![0.0; 2 * nf];
    for f in tri.boundary_facets() {
        for comp in 0..2 {
            ub[comp * nf + f] = facet_mean(tri, f, |x| case.velocity_at(x, t, nu)[comp]);
        }
    }
    ub
}

/// Assembled steady system: blocks sized for the reduced interior
/// velocity unknowns plus the scheme's pressure dofs.
pub struct StokesSystem {
    pub scheme: SchemeKind,
    pub nu: f64,
    pub map: VelocityDofMap,
    pub velocity_block: CsrMatrix,
    pub coupling: CsrMatrix,
    pub constraint: CsrMatrix,
    pub zero_mean: Vec<(usize, Vec<f64>)>,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    pub boundary: Vec<f64>,
}

pub fn assemble_stokes(
    tri: &Triangulation,
    scheme: SchemeKind,
    nu: f64,
    case: &ManufacturedCase,
    t: f64,
) -> Result<StokesSystem> {
    if scheme == SchemeKind::TrioP0P1 {
        let report = crate::mesh::validate(tri);
        if !report.hypothesis_41_pass() {
            eprintln!(
                "warning: mesh has {} cell(s) with more than one boundary edge; \
                 the enriched scheme's inf-sup constant is not covered there",
                report.hypothesis_41_violations.len()
            );
        }
    }

    let map = VelocityDofMap::new(tri);
    let k_scalar = operators::assemble_stiffness(tri)?;
    let div_full = operators::assemble_divergence(tri)?;
    let ub = boundary_values(tri, case, t, nu);

    let vel = velocity_block(&k_scalar, &map, nu)?;
    let div_int = restrict_velocity_cols(&div_full, &map)?;

    // momentum rhs: load minus the boundary columns of the velocity block
    let load_full = operators::assemble_load(tri, |x| case.forcing_at(x, t, nu));
    let mut rhs_u = map.restrict(&load_full);
    {
        // nu * K acting on the boundary part, componentwise
        let nf = map.nfacets;
        let ni = map.n_interior_facets();
        for (f, g, v) in k_scalar.iter() {
            if let Some(rf) = map.reduced_of[f] {
                for comp in 0..2 {
                    let b = ub[comp * nf + g];
                    if b != 0.0 && map.reduced_of[g].is_none() {
                        rhs_u[comp * ni + rf] -= nu * v * b;
                    }
                }
            }
        }
    }

    let (coupling, constraint, zero_mean, rhs_p) = match scheme {
        SchemeKind::CrP0 => {
            let coupling = {
                // -(div)^T on interior rows
                let mut tr = Triplets::new(map.n_reduced(), tri.ncells());
                for (r, c, v) in div_int.iter() {
                    tr.push(c, r, -v);
                }
                tr.compress()?
            };
            let constraint = scale(&div_int, -1.0)?;
            let rhs_p = apply_to_boundary(&div_full, &map, &ub);
            (
                coupling,
                constraint,
                vec![(0, operators::p0_zero_mean_weights(tri))],
                rhs_p,
            )
        }
        SchemeKind::TrioP0P1 => {
            let c_full = operators::assemble_p1_gradient_coupling(tri)?;
            let c_int = restrict_velocity_cols(&c_full, &map)?;
            let np = tri.ncells() + tri.nvertices();
            let mut coup = Triplets::new(map.n_reduced(), np);
            for (r, c, v) in div_int.iter() {
                coup.push(c, r, -v); // transpose into the momentum rows
            }
            let mut cons = Triplets::new(np, map.n_reduced());
            for (r, c, v) in div_int.iter() {
                cons.push(r, c, -v);
            }
            for (r, c, v) in c_int.iter() {
                coup.push(c, tri.ncells() + r, v);
                cons.push(tri.ncells() + r, c, v);
            }
            let mut rhs_p = apply_to_boundary(&div_full, &map, &ub);
            let cb = apply_to_boundary(&c_full, &map, &ub);
            rhs_p.extend(cb.iter().map(|v| -v));
            (
                coup.compress()?,
                cons.compress()?,
                vec![
                    (0, operators::p0_zero_mean_weights(tri)),
                    (tri.ncells(), operators::p1_zero_mean_weights(tri)),
                ],
                rhs_p,
            )
        }
        SchemeKind::Mps => {
            let op = mpfa::assemble_mpfa(tri, |x| case.forcing_at(x, t, nu))?;
            let coupling = restrict_velocity_rows(&op.gmat, &map)?;
            // boundary-forcing part moves to the momentum rhs
            let ni = map.n_interior_facets();
            let nf = map.nfacets;
            for comp in 0..2 {
                for (i, &f) in map.interior.iter().enumerate() {
                    rhs_u[comp * ni + i] -= op.g0vec[comp * nf + f];
                }
            }
            let constraint = scale(&div_int, -1.0)?;
            let rhs_p = apply_to_boundary(&div_full, &map, &ub);
            (
                coupling,
                constraint,
                vec![(0, operators::p0_zero_mean_weights(tri))],
                rhs_p,
            )
        }
    };

    Ok(StokesSystem {
        scheme,
        nu,
        map,
        velocity_block: vel,
        coupling,
        constraint,
        zero_mean,
        rhs_u,
        rhs_p,
        boundary: ub,
    })
}

fn scale(m: &CsrMatrix, s: f64) -> Result<CsrMatrix> {
    let mut t = Triplets::new(m.nrows(), m.ncols());
    for (r, c, v) in m.iter() {
        t.push(r, c, s * v);
    }
    t.compress()
}

/// Velocity and pressure fields of one steady solve.
pub struct StokesSolution {
    pub scheme: SchemeKind,
    pub nu: f64,
    pub velocity: DofField,
    pub pressure: DofField,
    pub multipliers: Vec<f64>,
}

pub fn solve_system(sys: &StokesSystem) -> Result<StokesSolution> {
    let blocks = SaddleBlocks {
        velocity: &sys.velocity_block,
        coupling: &sys.coupling,
        constraint: &sys.constraint,
        zero_mean: sys.zero_mean.clone(),
    };
    let sol = solve_saddle(&blocks, &sys.rhs_u, &sys.rhs_p)?;
    let velocity = DofField {
        layout: DofLayout::CrVector,
        values: sys.map.expand(&sol.velocity, &sys.boundary),
    };
    let pressure = DofField {
        layout: sys.scheme.pressure_layout(),
        values: sol.pressure,
    };
    Ok(StokesSolution {
        scheme: sys.scheme,
        nu: sys.nu,
        velocity,
        pressure,
        multipliers: sol.multipliers,
    })
}

pub fn solve_stokes(
    tri: &Triangulation,
    scheme: SchemeKind,
    nu: f64,
    case: &ManufacturedCase,
) -> Result<StokesSolution> {
    let sys = assemble_stokes(tri, scheme, nu, case, 0.0)?;
    solve_system(&sys)
}

/// Largest cell-integrated divergence of a solution field.
pub fn max_cell_divergence(tri: &Triangulation, velocity: &DofField) -> f64 {
    let d = operators::assemble_divergence(tri).expect("divergence assembly");
    d.matvec(&velocity.values)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::find_case;
    use crate::fem::norms;
    use crate::mesh::{generate_structured, DiagonalMode};

    fn bordered_matrix(sys: &StokesSystem) -> CsrMatrix {
        let nu = sys.velocity_block.nrows();
        let np = sys.coupling.ncols();
        let nc = sys.zero_mean.len();
        let mut b = crate::linalg::SystemBuilder::new(nu + np + nc);
        b.add_block(0, 0, &sys.velocity_block, 1.0);
        b.add_block(0, nu, &sys.coupling, 1.0);
        b.add_block(nu, 0, &sys.constraint, 1.0);
        for (k, (off, w)) in sys.zero_mean.iter().enumerate() {
            for (j, &wj) in w.iter().enumerate() {
                if wj != 0.0 {
                    b.add_entry(nu + off + j, nu + np + k, wj);
                    b.add_entry(nu + np + k, nu + off + j, wj);
                }
            }
        }
        b.finish().unwrap().0
    }

    #[test]
    fn cr_system_is_symmetric() {
        let tri = generate_structured(4, DiagonalMode::Alternating).unwrap();
        let case = find_case("noflow-sin").unwrap();
        let sys = assemble_stokes(&tri, SchemeKind::CrP0, 1.0, &case, 0.0).unwrap();
        let a = bordered_matrix(&sys);
        let at = a.transpose();
        let mut asym: f64 = 0.0;
        for (r, c, v) in a.iter() {
            asym = asym.max((v - at.get(r, c)).abs());
        }
        assert!(asym <= 1e-13, "asymmetry {asym}");
    }

    #[test]
    fn trio_system_is_symmetric_with_expected_size() {
        let tri = generate_structured(10, DiagonalMode::Alternating).unwrap();
        let case = find_case("noflow-sin").unwrap();
        let sys = assemble_stokes(&tri, SchemeKind::TrioP0P1, 1.0, &case, 0.0).unwrap();
        assert_eq!(sys.coupling.ncols(), tri.ncells() + tri.nvertices());
        assert_eq!(sys.zero_mean.len(), 2);
        let a = bordered_matrix(&sys);
        let at = a.transpose();
        let mut asym: f64 = 0.0;
        for (r, c, v) in a.iter() {
            asym = asym.max((v - at.get(r, c)).abs());
        }
        assert!(asym <= 1e-13, "asymmetry {asym}");
    }

    #[test]
    fn mps_system_is_strictly_asymmetric_and_differs_from_transpose_divergence() {
        let tri = generate_structured(2, DiagonalMode::Alternating).unwrap();
        let case = find_case("noflow-sin").unwrap();
        let sys = assemble_stokes(&tri, SchemeKind::Mps, 1.0, &case, 0.0).unwrap();
        let a = bordered_matrix(&sys);
        let at = a.transpose();
        let mut asym: f64 = 0.0;
        for (r, c, v) in a.iter() {
            asym = asym.max((v - at.get(r, c)).abs());
        }
        assert!(asym > 0.0);

        // the reconstructed gradient is not the transpose divergence
        let op = crate::mpfa::assemble_mpfa(&tri, |_| [0.0, 0.0]).unwrap();
        let d = operators::assemble_divergence(&tri).unwrap();
        let mut diff: f64 = 0.0;
        for (r, c, v) in op.gmat.iter() {
            diff = diff.max((v - (-d.get(c, r))).abs());
        }
        for (r, c, v) in d.iter() {
            diff = diff.max((op.gmat.get(c, r) - (-v)).abs());
        }
        assert!(diff > 0.0);
    }

    #[test]
    fn zero_forcing_gives_zero_solution() {
        let tri = generate_structured(3, DiagonalMode::Alternating).unwrap();
        let case = find_case("noflow-sin").unwrap();
        for scheme in SchemeKind::all() {
            let mut sys = assemble_stokes(&tri, scheme, 1.0, &case, 0.0).unwrap();
            sys.rhs_u.iter_mut().for_each(|v| *v = 0.0);
            sys.rhs_p.iter_mut().for_each(|v| *v = 0.0);
            let sol = solve_system(&sys).unwrap();
            assert!(sol.velocity.values.iter().all(|v| v.abs() < 1e-12));
            assert!(sol.pressure.values.iter().all(|v| v.abs() < 1e-12));
            assert!(sol.multipliers.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn solutions_conserve_mass_cellwise_with_zero_mean_pressure() {
        let tri = generate_structured(6, DiagonalMode::Alternating).unwrap();
        let case = find_case("sin-sin").unwrap();
        for scheme in SchemeKind::all() {
            let sol = solve_stokes(&tri, scheme, 1.0, &case).unwrap();
            let umax = sol
                .velocity
                .values
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let div = max_cell_divergence(&tri, &sol.velocity);
            assert!(div <= 1e-10 * umax.max(1.0), "{scheme}: div {div}");

            let w0 = operators::p0_zero_mean_weights(&tri);
            let mean0: f64 = w0
                .iter()
                .zip(&sol.pressure.values)
                .map(|(w, p)| w * p)
                .sum();
            let pnorm = sol
                .pressure
                .values
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(1.0);
            assert!(mean0.abs() <= 1e-10 * pnorm, "{scheme}: mean {mean0}");
            if scheme == SchemeKind::TrioP0P1 {
                let w1 = operators::p1_zero_mean_weights(&tri);
                let mean1: f64 = w1
                    .iter()
                    .zip(&sol.pressure.values[tri.ncells()..])
                    .map(|(w, p)| w * p)
                    .sum();
                assert!(mean1.abs() <= 1e-10 * pnorm);
            }
        }
    }

    #[test]
    fn affine_pressure_is_exact_for_trio_and_mps() {
        let tri = generate_structured(6, DiagonalMode::Alternating).unwrap();
        let case = find_case("affine-p").unwrap();
        for scheme in [SchemeKind::TrioP0P1, SchemeKind::Mps] {
            let sol = solve_stokes(&tri, scheme, 1.0, &case).unwrap();
            let unorm = norms::l2_error_velocity(&tri, &sol.velocity, |_| [0.0, 0.0]);
            assert!(unorm <= 1e-10, "{scheme}: |u| = {unorm:.3e}");
        }
        // the plain scheme is polluted by the jump terms
        let sol = solve_stokes(&tri, SchemeKind::CrP0, 1.0, &case).unwrap();
        let unorm = norms::l2_error_velocity(&tri, &sol.velocity, |_| [0.0, 0.0]);
        assert!(unorm > 1e-6);
    }

    #[test]
    fn quadratic_pressure_is_exact_for_trio_only() {
        let tri = generate_structured(6, DiagonalMode::Alternating).unwrap();
        let case = find_case("quadratic-p").unwrap();
        let sol = solve_stokes(&tri, SchemeKind::TrioP0P1, 1.0, &case).unwrap();
        let unorm = norms::l2_error_velocity(&tri, &sol.velocity, |_| [0.0, 0.0]);
        assert!(unorm <= 1e-9, "|u| = {unorm:.3e}");

        let sol = solve_stokes(&tri, SchemeKind::Mps, 1.0, &case).unwrap();
        let unorm = norms::l2_error_velocity(&tri, &sol.velocity, |_| [0.0, 0.0]);
        assert!(unorm > 1e-8);
    }
}

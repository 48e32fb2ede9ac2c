//! Transient incompressible Navier-Stokes by prediction-correction:
//! an implicit-diffusion predictor with explicit skew-symmetrized
//! convection, a pressure-increment projection, and a velocity correction
//! that enforces the discrete continuity rows exactly.
//!
//! The projection operator (the divergence of the mass-plus-diffusion
//! inverse applied to the pressure coupling) is never formed: each step
//! solves one cached sparse factorization of the augmented system
//! [[Mt, -G], [B, 0]] bordered with the zero-mean constraints, which
//! yields the pressure increment and the correction velocity together.

use crate::cases::ManufacturedCase;
use crate::fem::{operators, DofField, DofLayout};
use crate::linalg::{BorderedLu, CsrMatrix, LuFactors, Triplets};
use crate::mesh::{dot, Point, Triangulation};
use crate::mpfa::{self, FluxTables};
use crate::stokes::{boundary_values, SchemeKind, VelocityDofMap};
use crate::{Error, Result};

/// How the step size is picked from the mesh size before the CFL guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtRule {
    /// dt targets C*h (the stability bound itself).
    CflLinear,
    /// dt targets C*h^2, resolving the diffusive scale so spatial orders
    /// are measurable at a fixed final time.
    CflParabolic,
}

#[derive(Debug, Clone)]
pub struct TransientOptions {
    pub t_max: f64,
    pub cfl: f64,
    pub dt_rule: DtRule,
    /// Replace the mass-plus-diffusion operator by the (diagonal) mass in
    /// the projection and correction; faster, less accurate.
    pub lumped_projection: bool,
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self {
            t_max: 0.01,
            cfl: 0.5,
            dt_rule: DtRule::CflParabolic,
            lumped_projection: false,
        }
    }
}

pub struct TransientResult {
    pub velocity: DofField,
    pub pressure: DofField,
    pub t_final: f64,
    pub dt: f64,
    pub nsteps: usize,
    /// Largest cell-integrated divergence seen after any correction.
    pub max_divergence: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Final-step boundary closure tables (multi-point scheme only).
    pub boundary_flux: Option<FluxTables>,
}

/// Skew-symmetrized convection block on scalar CR dofs: entries
/// (|K|/3) w(M_g) . grad psi_f, antisymmetrized in (g, f). The same block
/// acts on both velocity components.
pub fn assemble_convection(tri: &Triangulation, w_full: &[f64]) -> Result<CsrMatrix> {
    let nf = tri.nfacets();
    assert_eq!(w_full.len(), 2 * nf);
    let mut t = Triplets::new(nf, nf);
    for l in 0..tri.ncells() {
        let facets = tri.cell_facets(l);
        let scale = tri.area(l) / 3.0;
        for (k, &g) in facets.iter().enumerate() {
            let wg = [w_full[g], w_full[nf + g]];
            let _ = k;
            for &f in &facets {
                let gf = crate::fem::cr_basis_gradient(tri, l, f);
                let base = scale * dot(wg, gf);
                if base != 0.0 {
                    t.push(g, f, 0.5 * base);
                    t.push(f, g, -0.5 * base);
                }
            }
        }
    }
    t.compress()
}

/// Convection vector L(w) u on full CR vector dofs.
pub fn convection_vector(tri: &Triangulation, w_full: &[f64], u_full: &[f64]) -> Result<Vec<f64>> {
    let nf = tri.nfacets();
    let block = assemble_convection(tri, w_full)?;
    let mut out = vec![0.0; 2 * nf];
    out[..nf].copy_from_slice(&block.matvec(&u_full[..nf]));
    out[nf..].copy_from_slice(&block.matvec(&u_full[nf..]));
    Ok(out)
}

/// Apply a scalar facet operator to both components of a full CR vector.
fn apply_scalar_blocks(op: &CsrMatrix, full: &[f64]) -> Vec<f64> {
    let nf = op.nrows();
    let mut out = vec![0.0; 2 * nf];
    out[..nf].copy_from_slice(&op.matvec(&full[..nf]));
    out[nf..].copy_from_slice(&op.matvec(&full[nf..]));
    out
}

/// Momentum pressure coupling (interior velocity rows x pressure dofs)
/// and the continuity rows (pressure dofs x interior velocity columns).
struct SchemeOperators {
    coupling: CsrMatrix,
    constraint: CsrMatrix,
    constraint_full: CsrMatrix,
    zero_mean: Vec<(usize, Vec<f64>)>,
    mpfa: Option<mpfa::MpfaOperator>,
    np: usize,
}

fn build_scheme_operators(
    tri: &Triangulation,
    scheme: SchemeKind,
    map: &VelocityDofMap,
) -> Result<SchemeOperators> {
    let nf = tri.nfacets();
    let div_full = operators::assemble_divergence(tri)?;
    let restrict_cols = |op: &CsrMatrix| -> Result<CsrMatrix> {
        let mut t = Triplets::new(op.nrows(), map.n_reduced());
        for (r, c, v) in op.iter() {
            if let Some(rc) = map.reduced_dof(c % nf, c / nf) {
                t.push(r, rc, v);
            }
        }
        t.compress()
    };
    let restrict_rows = |op: &CsrMatrix| -> Result<CsrMatrix> {
        let mut t = Triplets::new(map.n_reduced(), op.ncols());
        for (r, c, v) in op.iter() {
            if let Some(rr) = map.reduced_dof(r % nf, r / nf) {
                t.push(rr, c, v);
            }
        }
        t.compress()
    };
    let neg = |op: &CsrMatrix| -> Result<CsrMatrix> {
        let mut t = Triplets::new(op.nrows(), op.ncols());
        for (r, c, v) in op.iter() {
            t.push(r, c, -v);
        }
        t.compress()
    };

    match scheme {
        SchemeKind::CrP0 => {
            let div_int = restrict_cols(&div_full)?;
            let mut coup = Triplets::new(map.n_reduced(), tri.ncells());
            for (r, c, v) in div_int.iter() {
                coup.push(c, r, -v);
            }
            Ok(SchemeOperators {
                coupling: coup.compress()?,
                constraint: neg(&div_int)?,
                constraint_full: neg(&div_full)?,
                zero_mean: vec![(0, operators::p0_zero_mean_weights(tri))],
                mpfa: None,
                np: tri.ncells(),
            })
        }
        SchemeKind::TrioP0P1 => {
            let c_full = operators::assemble_p1_gradient_coupling(tri)?;
            let np = tri.ncells() + tri.nvertices();
            let div_int = restrict_cols(&div_full)?;
            let c_int = restrict_cols(&c_full)?;
            let mut coup = Triplets::new(map.n_reduced(), np);
            let mut cons = Triplets::new(np, map.n_reduced());
            for (r, c, v) in div_int.iter() {
                coup.push(c, r, -v);
                cons.push(r, c, -v);
            }
            for (r, c, v) in c_int.iter() {
                coup.push(c, tri.ncells() + r, v);
                cons.push(tri.ncells() + r, c, v);
            }
            let mut cons_full = Triplets::new(np, 2 * nf);
            for (r, c, v) in div_full.iter() {
                cons_full.push(r, c, -v);
            }
            for (r, c, v) in c_full.iter() {
                cons_full.push(tri.ncells() + r, c, v);
            }
            Ok(SchemeOperators {
                coupling: coup.compress()?,
                constraint: cons.compress()?,
                constraint_full: cons_full.compress()?,
                zero_mean: vec![
                    (0, operators::p0_zero_mean_weights(tri)),
                    (tri.ncells(), operators::p1_zero_mean_weights(tri)),
                ],
                mpfa: None,
                np,
            })
        }
        SchemeKind::Mps => {
            let op = mpfa::assemble_mpfa_with_tables(tri, &FluxTables::zeros(tri))?;
            let coupling = restrict_rows(&op.gmat)?;
            let div_int = restrict_cols(&div_full)?;
            Ok(SchemeOperators {
                coupling,
                constraint: neg(&div_int)?,
                constraint_full: neg(&div_full)?,
                zero_mean: vec![(0, operators::p0_zero_mean_weights(tri))],
                mpfa: Some(op),
                np: tri.ncells(),
            })
        }
    }
}

/// L2 projection of the exact initial pressure onto the scheme's space.
fn project_initial_pressure(
    tri: &Triangulation,
    scheme: SchemeKind,
    case: &ManufacturedCase,
    nu: f64,
) -> Result<DofField> {
    use crate::fem::quadrature::{integrate_cell, QuadratureRule};
    let p_exact = |x: Point| case.pressure_at(x, 0.0, nu);
    match scheme {
        SchemeKind::CrP0 | SchemeKind::Mps => {
            let values: Vec<f64> = (0..tri.ncells())
                .map(|l| integrate_cell(tri, l, QuadratureRule::TriangleDegree5, p_exact) / tri.area(l))
                .collect();
            Ok(DofField {
                layout: DofLayout::P0,
                values,
            })
        }
        SchemeKind::TrioP0P1 => {
            let nc = tri.ncells();
            let nv = tri.nvertices();
            let n = nc + nv;
            let mut body = Triplets::new(n, n);
            for l in 0..nc {
                body.push(l, l, tri.area(l));
                for &j in &tri.cell(l) {
                    body.push(l, nc + j, tri.area(l) / 3.0);
                    body.push(nc + j, l, tri.area(l) / 3.0);
                }
            }
            // vertex mass by the degree-2 rule (exact for hat products)
            for l in 0..nc {
                let cell = tri.cell(l);
                for a in 0..3 {
                    for b in 0..3 {
                        let m = if a == b {
                            tri.area(l) / 6.0
                        } else {
                            tri.area(l) / 12.0
                        };
                        body.push(nc + cell[a], nc + cell[b], m);
                    }
                }
            }
            let borders = vec![
                (0, operators::p0_zero_mean_weights(tri)),
                (nc, operators::p1_zero_mean_weights(tri)),
            ];
            let solver = BorderedLu::new(&body, &borders)?;
            let mut rhs = vec![0.0; solver.n()];
            for l in 0..nc {
                rhs[l] = integrate_cell(tri, l, QuadratureRule::TriangleDegree5, p_exact);
            }
            for l in 0..nc {
                let cell = tri.cell(l);
                for (k, &j) in cell.iter().enumerate() {
                    rhs[nc + j] += integrate_cell(tri, l, QuadratureRule::TriangleDegree5, |x| {
                        p_exact(x) * tri.barycentric(l, k, x)
                    });
                }
            }
            let x = solver.solve(&rhs)?;
            Ok(DofField {
                layout: DofLayout::P0PlusP1,
                values: x[..n].to_vec(),
            })
        }
    }
}

/// One configured time integrator over a fixed mesh and scheme.
pub struct TransientStepper<'a> {
    tri: &'a Triangulation,
    case: &'a ManufacturedCase,
    scheme: SchemeKind,
    nu: f64,
    pub dt: f64,
    map: VelocityDofMap,
    mass_scalar: CsrMatrix,
    stiff_scalar: CsrMatrix,
    ops: SchemeOperators,
    predictor: LuFactors,
    projector: BorderedLu,
    div_full: CsrMatrix,
    lumped_projection: bool,
}

/// Time-marching state.
pub struct TransientState {
    /// Full CR vector dofs including Dirichlet boundary values.
    pub u_full: Vec<f64>,
    pub pressure: Vec<f64>,
    pub t: f64,
    pub flux_tables: Option<FluxTables>,
}

impl<'a> TransientStepper<'a> {
    pub fn new(
        tri: &'a Triangulation,
        scheme: SchemeKind,
        nu: f64,
        case: &'a ManufacturedCase,
        dt: f64,
        lumped_projection: bool,
    ) -> Result<Self> {
        let map = VelocityDofMap::new(tri);
        let mass_scalar = operators::assemble_mass(tri, false)?;
        let stiff_scalar = operators::assemble_stiffness(tri)?;
        let ops = build_scheme_operators(tri, scheme, &map)?;
        let div_full = operators::assemble_divergence(tri)?;

        // reduced Mt = M + dt nu K over both components
        let nred = map.n_reduced();
        let ni = map.n_interior_facets();
        let mut mt = Triplets::new(nred, nred);
        let mut mt_proj = Triplets::new(nred, nred);
        for (f, g, v) in mass_scalar.iter() {
            if let (Some(rf), Some(rg)) = (map.reduced_dof(f, 0), map.reduced_dof(g, 0)) {
                for comp in 0..2 {
                    mt.push(rf + comp * ni, rg + comp * ni, v);
                    mt_proj.push(rf + comp * ni, rg + comp * ni, v);
                }
            }
        }
        for (f, g, v) in stiff_scalar.iter() {
            if let (Some(rf), Some(rg)) = (map.reduced_dof(f, 0), map.reduced_dof(g, 0)) {
                for comp in 0..2 {
                    mt.push(rf + comp * ni, rg + comp * ni, dt * nu * v);
                    if !lumped_projection {
                        mt_proj.push(rf + comp * ni, rg + comp * ni, dt * nu * v);
                    }
                }
            }
        }
        let predictor = LuFactors::new(&mt.compress()?)?;

        // augmented projection system [[Mt, -G], [B, 0]] + borders
        let np = ops.np;
        let n = nred + np;
        let mut body = Triplets::new(n, n);
        for &(r, c, v) in mt_proj.entries() {
            body.push(r, c, v);
        }
        for (r, c, v) in ops.coupling.iter() {
            body.push(r, nred + c, -v);
        }
        for (r, c, v) in ops.constraint.iter() {
            body.push(nred + r, c, v);
        }
        let borders: Vec<(usize, Vec<f64>)> = ops
            .zero_mean
            .iter()
            .map(|(off, w)| (nred + off, w.clone()))
            .collect();
        let projector = BorderedLu::new(&body, &borders)?;

        Ok(Self {
            tri,
            case,
            scheme,
            nu,
            dt,
            map,
            mass_scalar,
            stiff_scalar,
            ops,
            predictor,
            projector,
            div_full,
            lumped_projection,
        })
    }

    pub fn initial_state(&self) -> Result<TransientState> {
        let tri = self.tri;
        let u0 = crate::fem::interpolate_cr_vector(tri, |x| self.case.velocity_at(x, 0.0, self.nu));
        let p0 = project_initial_pressure(tri, self.scheme, self.case, self.nu)?;
        let flux_tables = if self.scheme == SchemeKind::Mps {
            Some(self.residual_flux_tables(&u0.values, &u0.values, 0.0, false)?)
        } else {
            None
        };
        Ok(TransientState {
            u_full: u0.values,
            pressure: p0.values,
            t: 0.0,
            flux_tables,
        })
    }

    /// Boundary closure data: normal flux of f + (u_star - u)/dt + (u.grad)u
    /// over the boundary half-edges, evaluated from the discrete fields.
    /// With `with_time_derivative` false the rate term is dropped (used at
    /// initialization where no previous step exists).
    fn residual_flux_tables(
        &self,
        u_full: &[f64],
        u_star: &[f64],
        t_forcing: f64,
        with_time_derivative: bool,
    ) -> Result<FluxTables> {
        let tri = self.tri;
        let mut tables = FluxTables::zeros(tri);
        for j in 0..tri.nvertices() {
            if !tri.is_boundary_vertex(j) {
                continue;
            }
            let me = crate::mesh::macro_element(tri, j)?;
            let sides = [
                (0usize, me.edges[0], me.cells[0]),
                (1usize, *me.edges.last().unwrap(), *me.cells.last().unwrap()),
            ];
            for (side, facet, cell) in sides {
                let fac = tri.facet(facet);
                let a = tri.vertex(j);
                let b = fac.midpoint;
                let len = 0.5 * fac.length;
                let grad = crate::fem::cr_vector_gradient(tri, u_full, cell);
                let mut total = 0.0;
                for &(s, w) in crate::fem::quadrature::GAUSS_SEGMENT_2 {
                    let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    let f = self.case.forcing_at(x, t_forcing, self.nu);
                    let u = crate::fem::cr_vector_value(tri, u_full, cell, x);
                    let conv = [
                        u[0] * grad[0][0] + u[1] * grad[0][1],
                        u[0] * grad[1][0] + u[1] * grad[1][1],
                    ];
                    let mut r = [f[0] + conv[0], f[1] + conv[1]];
                    if with_time_derivative {
                        let us = crate::fem::cr_vector_value(tri, u_star, cell, x);
                        r[0] += (us[0] - u[0]) / self.dt;
                        r[1] += (us[1] - u[1]) / self.dt;
                    }
                    total += w * len * dot(r, fac.normal);
                }
                tables.by_vertex[j][side] += total;
            }
        }
        Ok(tables)
    }

    /// Momentum coupling applied to the pressure, including the
    /// multi-point boundary part.
    fn pressure_gradient_interior(&self, state: &TransientState) -> Vec<f64> {
        let mut g = self.ops.coupling.matvec(&state.pressure);
        if let (Some(op), Some(tables)) = (&self.ops.mpfa, &state.flux_tables) {
            let g0 = op.g0_from_tables(tables);
            let nf = self.tri.nfacets();
            let ni = self.map.n_interior_facets();
            for comp in 0..2 {
                for r in 0..ni {
                    let facet = self.map.full_dof(r) % nf;
                    g[comp * ni + r] += g0[comp * nf + facet];
                }
            }
        }
        g
    }

    /// Predictor: implicit diffusion, explicit convection and pressure.
    pub fn predict(&self, state: &TransientState) -> Result<Vec<f64>> {
        let tri = self.tri;
        let t_next = state.t + self.dt;
        let conv = convection_vector(tri, &state.u_full, &state.u_full)?;
        let load = operators::assemble_load(tri, |x| self.case.forcing_at(x, state.t, self.nu));
        let mu = apply_scalar_blocks(&self.mass_scalar, &state.u_full);
        let gp = self.pressure_gradient_interior(state);

        let ub_next = boundary_values(tri, self.case, t_next, self.nu);
        // Mt columns at boundary dofs: (M + dt nu K) u_b
        let mut masked = ub_next.clone();
        let nf = tri.nfacets();
        for comp in 0..2 {
            for f in tri.interior_facets() {
                masked[comp * nf + f] = 0.0;
            }
        }
        let mb = apply_scalar_blocks(&self.mass_scalar, &masked);
        let kb = apply_scalar_blocks(&self.stiff_scalar, &masked);

        let nred = self.map.n_reduced();
        let mut rhs = vec![0.0; nred];
        for r in 0..nred {
            let full = self.map.full_dof(r);
            rhs[r] = mu[full] + self.dt * (load[full] - conv[full]) - self.dt * gp[r]
                - (mb[full] + self.dt * self.nu * kb[full]);
        }
        let ustar_int = self.predictor.solve(&rhs)?;
        Ok(self.map.expand(&ustar_int, &ub_next))
    }

    /// Projection solve: returns the pressure increment and the correction
    /// velocity w with Mt w = G dP + delta_g0.
    pub fn pressure_update(
        &self,
        state: &TransientState,
        u_star: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, Option<FluxTables>)> {
        let nred = self.map.n_reduced();
        let np = self.ops.np;
        let mut rhs = vec![0.0; self.projector.n()];

        let new_tables = if self.scheme == SchemeKind::Mps {
            let t_next = state.t + self.dt;
            let tables =
                self.residual_flux_tables(&state.u_full, u_star, t_next, true)?;
            let op = self.ops.mpfa.as_ref().unwrap();
            let g_new = op.g0_from_tables(&tables);
            let g_old = op.g0_from_tables(state.flux_tables.as_ref().unwrap());
            let nf = self.tri.nfacets();
            let ni = self.map.n_interior_facets();
            for comp in 0..2 {
                for r in 0..ni {
                    let facet = self.map.full_dof(r) % nf;
                    rhs[comp * ni + r] = -(g_new[comp * nf + facet] - g_old[comp * nf + facet]);
                }
            }
            Some(tables)
        } else {
            None
        };

        let cons = self.ops.constraint_full.matvec(u_star);
        for r in 0..np {
            rhs[nred + r] = cons[r] / self.dt;
        }
        let x = self.projector.solve(&rhs)?;
        let w = x[..nred].to_vec();
        let dp = x[nred..nred + np].to_vec();
        Ok((dp, w, new_tables))
    }

    /// Correction: subtract the divergence-carrying part from the
    /// predictor; boundary dofs stay at their Dirichlet values.
    pub fn correct(&self, u_star: &[f64], w: &[f64]) -> Vec<f64> {
        let mut u = u_star.to_vec();
        for r in 0..self.map.n_reduced() {
            u[self.map.full_dof(r)] -= self.dt * w[r];
        }
        u
    }

    pub fn step(&self, state: &mut TransientState) -> Result<f64> {
        let u_star = self.predict(state)?;
        let (dp, w, new_tables) = self.pressure_update(state, &u_star)?;
        let u_next = self.correct(&u_star, &w);

        let div = self
            .div_full
            .matvec(&u_next)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let umax = u_next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if umax > 1e6 {
            return Err(Error::BlowUp(umax));
        }

        state.u_full = u_next;
        for (p, d) in state.pressure.iter_mut().zip(&dp) {
            *p += d;
        }
        if let Some(t) = new_tables {
            state.flux_tables = Some(t);
        }
        state.t += self.dt;
        Ok(div)
    }

    pub fn kinetic_energy(&self, u_full: &[f64]) -> f64 {
        let mu = apply_scalar_blocks(&self.mass_scalar, u_full);
        0.5 * mu.iter().zip(u_full).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Integrate to the final time; the step count divides t_max exactly and
/// the step size stays strictly below the CFL bound.
pub fn run_transient(
    tri: &Triangulation,
    scheme: SchemeKind,
    nu: f64,
    case: &ManufacturedCase,
    opts: &TransientOptions,
) -> Result<TransientResult> {
    if !case.time_dependent && opts.t_max > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "case '{}' is not time-dependent",
            case.name
        )));
    }
    let h = tri.mesh_size();
    let limit = opts.cfl * h;
    if opts.t_max == 0.0 {
        let stepper = TransientStepper::new(tri, scheme, nu, case, limit.min(1.0) * 0.5, opts.lumped_projection)?;
        let state = stepper.initial_state()?;
        let e0 = stepper.kinetic_energy(&state.u_full);
        return Ok(TransientResult {
            velocity: DofField {
                layout: DofLayout::CrVector,
                values: state.u_full,
            },
            pressure: DofField {
                layout: scheme.pressure_layout(),
                values: state.pressure,
            },
            t_final: 0.0,
            dt: 0.0,
            nsteps: 0,
            max_divergence: 0.0,
            initial_energy: e0,
            final_energy: e0,
            boundary_flux: state.flux_tables,
        });
    }

    let target = match opts.dt_rule {
        DtRule::CflLinear => opts.cfl * h,
        DtRule::CflParabolic => opts.cfl * h * h,
    };
    let mut nsteps = (opts.t_max / target).ceil().max(1.0) as usize;
    while opts.t_max / nsteps as f64 >= limit {
        nsteps += 1;
    }
    let dt = opts.t_max / nsteps as f64;
    if dt >= limit {
        return Err(Error::CflViolation { dt, limit });
    }

    let stepper = TransientStepper::new(tri, scheme, nu, case, dt, opts.lumped_projection)?;
    let mut state = stepper.initial_state()?;
    let initial_energy = stepper.kinetic_energy(&state.u_full);
    let mut max_divergence: f64 = 0.0;
    for _ in 0..nsteps {
        let div = stepper.step(&mut state)?;
        max_divergence = max_divergence.max(div);
    }
    let final_energy = stepper.kinetic_energy(&state.u_full);

    Ok(TransientResult {
        velocity: DofField {
            layout: DofLayout::CrVector,
            values: state.u_full.clone(),
        },
        pressure: DofField {
            layout: scheme.pressure_layout(),
            values: state.pressure.clone(),
        },
        t_final: state.t,
        dt,
        nsteps,
        max_divergence,
        initial_energy,
        final_energy,
        boundary_flux: state.flux_tables,
    })
}

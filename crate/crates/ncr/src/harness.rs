//! Convergence studies: per-level solves, error measures, experimental
//! orders, viscosity sweeps, and CSV reports.
//!
//! Levels of one study may run in parallel (capped by `NCR_THREADS`);
//! deterministic mode runs them sequentially and zeroes the wall-time
//! column so repeated runs emit bitwise-identical files.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::cases::ManufacturedCase;
use crate::fem::{norms, DofField};
use crate::mesh::{generate_kershaw, generate_structured, DiagonalMode, Triangulation};
use crate::ns::{run_transient, TransientOptions};
use crate::stokes::{solve_stokes, SchemeKind};
use crate::{Error, Result};

/// Error floor below which an EOC is suppressed rather than reported.
pub const EOC_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub enum MeshFamily {
    Structured(DiagonalMode),
    Kershaw { distortion: f64 },
}

impl MeshFamily {
    pub fn build(&self, n: usize) -> Result<Triangulation> {
        match *self {
            MeshFamily::Structured(mode) => generate_structured(n, mode),
            MeshFamily::Kershaw { distortion } => generate_kershaw(n, distortion),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub scheme: SchemeKind,
    pub case: String,
    pub nu: f64,
    pub n: usize,
    pub h: f64,
    pub ncells: usize,
    pub err_u: f64,
    pub err_p: f64,
    pub eoc_u: Option<f64>,
    pub eoc_p: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of ln(err) against ln(h) over the levels above
    /// the error floor; the headline order.
    pub fitted_u: Option<f64>,
    pub fitted_p: Option<f64>,
}

/// Pairwise orders between consecutive levels plus the least-squares
/// slope. Entries below the floor suppress their EOC.
pub fn fit_eoc(hs: &[f64], errs: &[f64]) -> (Option<f64>, Vec<Option<f64>>) {
    assert_eq!(hs.len(), errs.len());
    let mut pairwise = vec![None; errs.len()];
    for i in 1..errs.len() {
        if errs[i] >= EOC_FLOOR && errs[i - 1] >= EOC_FLOOR {
            pairwise[i] = Some((errs[i - 1] / errs[i]).ln() / (hs[i - 1] / hs[i]).ln());
        }
    }
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errs)
        .filter(|&(_, &e)| e >= EOC_FLOOR)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    let fitted = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    } else {
        None
    };
    (fitted, pairwise)
}

/// Velocity and pressure error measures of a steady solution.
pub fn solution_errors(
    tri: &Triangulation,
    sol: &crate::stokes::StokesSolution,
    case: &ManufacturedCase,
    t: f64,
) -> (f64, f64) {
    let nu = sol.nu;
    let err_u = norms::eps0_velocity(
        tri,
        &sol.velocity,
        |x| case.velocity_at(x, t, nu),
        (case.velocity_norm)(t, nu),
    );
    let err_p = pressure_error(tri, &sol.pressure, sol.scheme, case, t, nu, None);
    (err_u, err_p)
}

/// Pressure error measure per scheme. The multi-point scheme's pressure is
/// its piecewise-affine reconstruction on the quadrangle mesh (the raw
/// cell values are only first-order accurate and would hide the scheme's
/// superconvergence); `flux` supplies the reconstruction closure data,
/// defaulting to the case forcing at time `t`.
pub fn pressure_error(
    tri: &Triangulation,
    pressure: &DofField,
    scheme: SchemeKind,
    case: &ManufacturedCase,
    t: f64,
    nu: f64,
    flux: Option<&dyn Fn(crate::mesh::Point) -> crate::mesh::Point>,
) -> f64 {
    let pnorm = (case.pressure_norm)(t, nu);
    match scheme {
        SchemeKind::CrP0 | SchemeKind::TrioP0P1 => norms::eps0_pressure(
            tri,
            pressure,
            |x| case.pressure_at(x, t, nu),
            pnorm,
        ),
        SchemeKind::Mps => {
            let default_flux = |x: crate::mesh::Point| case.forcing_at(x, t, nu);
            let quads = match flux {
                Some(f) => crate::mpfa::reconstruct_field(tri, &pressure.values, f),
                None => crate::mpfa::reconstruct_field(tri, &pressure.values, default_flux),
            }
            .expect("mpfa reconstruction");
            let mut total = 0.0;
            for qg in &quads {
                let anchor = tri.centroid(qg.cell);
                let base = pressure.values[qg.cell];
                // split the quadrangle into two triangles, degree-2 rule
                // (exact: the integrand is quadratic in the affine error
                // only up to the smooth exact pressure, which the midpoint
                // rule handles at the same order as the field error)
                let me = crate::mesh::macro_element(tri, qg.vertex).expect("fan");
                let i = me.cells.iter().position(|&l| l == qg.cell).unwrap();
                let pts = me.quadrangles[i].points;
                for tr in [[pts[0], pts[1], pts[2]], [pts[0], pts[2], pts[3]]] {
                    let area = 0.5
                        * ((tr[1][0] - tr[0][0]) * (tr[2][1] - tr[0][1])
                            - (tr[1][1] - tr[0][1]) * (tr[2][0] - tr[0][0]));
                    for e in 0..3 {
                        let m = [
                            0.5 * (tr[e][0] + tr[(e + 1) % 3][0]),
                            0.5 * (tr[e][1] + tr[(e + 1) % 3][1]),
                        ];
                        let v = base
                            + qg.gradient[0] * (m[0] - anchor[0])
                            + qg.gradient[1] * (m[1] - anchor[1])
                            - case.pressure_at(m, t, nu);
                        total += area / 3.0 * v * v;
                    }
                }
            }
            total.sqrt() / pnorm
        }
    }
}

fn thread_cap() -> usize {
    std::env::var("NCR_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run_levels<T: Send>(
    levels: &[usize],
    deterministic: bool,
    work: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if deterministic {
        levels.iter().map(|&n| work(n)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(thread_cap().min(levels.len().max(1)))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| levels.par_iter().map(|&n| work(n)).collect())
    }
}

/// Steady convergence study over ascending levels.
pub fn run_convergence(
    scheme: SchemeKind,
    case: &ManufacturedCase,
    nu: f64,
    levels: &[usize],
    family: MeshFamily,
    deterministic: bool,
) -> Result<ConvergenceReport> {
    let results = run_levels(levels, deterministic, |n| {
        let t0 = Instant::now();
        let tri = family.build(n)?;
        let sol = solve_stokes(&tri, scheme, nu, case)?;
        let (err_u, err_p) = solution_errors(&tri, &sol, case, 0.0);
        let wall_ms = if deterministic {
            0.0
        } else {
            t0.elapsed().as_secs_f64() * 1e3
        };
        Ok((n, tri.mesh_size(), tri.ncells(), err_u, err_p, wall_ms))
    })?;
    Ok(build_report(scheme, case.name, nu, &results))
}

/// Transient convergence study at the final time of each level's run.
pub fn run_transient_convergence(
    scheme: SchemeKind,
    case: &ManufacturedCase,
    nu: f64,
    levels: &[usize],
    family: MeshFamily,
    opts: &TransientOptions,
    deterministic: bool,
) -> Result<ConvergenceReport> {
    let results = run_levels(levels, deterministic, |n| {
        let t0 = Instant::now();
        let tri = family.build(n)?;
        let out = run_transient(&tri, scheme, nu, case, opts)?;
        let t = out.t_final;
        let err_u = norms::eps0_velocity(
            &tri,
            &out.velocity,
            |x| case.velocity_at(x, t, nu),
            (case.velocity_norm)(t, nu),
        );
        let flux = out.boundary_flux.clone();
        let err_p = pressure_error(
            &tri,
            &out.pressure,
            scheme,
            case,
            t,
            nu,
            flux.as_ref()
                .map(|f| f as &dyn Fn(crate::mesh::Point) -> crate::mesh::Point),
        );
        let wall_ms = if deterministic {
            0.0
        } else {
            t0.elapsed().as_secs_f64() * 1e3
        };
        Ok((n, tri.mesh_size(), tri.ncells(), err_u, err_p, wall_ms))
    })?;
    Ok(build_report(scheme, case.name, nu, &results))
}

fn build_report(
    scheme: SchemeKind,
    case: &str,
    nu: f64,
    results: &[(usize, f64, usize, f64, f64, f64)],
) -> ConvergenceReport {
    let mut sorted = results.to_vec();
    sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let hs: Vec<f64> = sorted.iter().map(|r| r.1).collect();
    let eus: Vec<f64> = sorted.iter().map(|r| r.3).collect();
    let eps: Vec<f64> = sorted.iter().map(|r| r.4).collect();
    let (fitted_u, pair_u) = fit_eoc(&hs, &eus);
    let (fitted_p, pair_p) = fit_eoc(&hs, &eps);
    let rows = sorted
        .iter()
        .enumerate()
        .map(|(i, &(n, h, ncells, err_u, err_p, wall_ms))| ConvergenceRow {
            scheme,
            case: case.to_string(),
            nu,
            n,
            h,
            ncells,
            err_u,
            err_p,
            eoc_u: pair_u[i],
            eoc_p: pair_p[i],
            wall_ms,
        })
        .collect();
    ConvergenceReport {
        rows,
        fitted_u,
        fitted_p,
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub scheme: SchemeKind,
    pub nu: f64,
    pub err_u: f64,
    pub err_p: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub case: String,
    pub n: usize,
    pub rows: Vec<SweepRow>,
    /// Per scheme, the largest viscosity at which the velocity error has
    /// grown by more than a factor of two over its value at the largest
    /// viscosity (the spurious-velocity tipping point), if any.
    pub tipping: Vec<(SchemeKind, Option<f64>)>,
}

/// Fixed mesh, varying viscosity.
pub fn run_viscosity_sweep(
    schemes: &[SchemeKind],
    case: &ManufacturedCase,
    nus: &[f64],
    n: usize,
    family: MeshFamily,
    deterministic: bool,
) -> Result<SweepReport> {
    let tri = family.build(n)?;
    let mut rows = Vec::new();
    for &scheme in schemes {
        for &nu in nus {
            let t0 = Instant::now();
            let sol = solve_stokes(&tri, scheme, nu, case)?;
            let (err_u, err_p) = solution_errors(&tri, &sol, case, 0.0);
            let wall_ms = if deterministic {
                0.0
            } else {
                t0.elapsed().as_secs_f64() * 1e3
            };
            rows.push(SweepRow {
                scheme,
                nu,
                err_u,
                err_p,
                wall_ms,
            });
        }
    }
    let mut tipping = Vec::new();
    for &scheme in schemes {
        let mut series: Vec<&SweepRow> = rows.iter().filter(|r| r.scheme == scheme).collect();
        series.sort_by(|a, b| b.nu.partial_cmp(&a.nu).unwrap());
        let tip = series.first().and_then(|base| {
            series
                .iter()
                .find(|r| r.err_u > 2.0 * base.err_u)
                .map(|r| r.nu)
        });
        tipping.push((scheme, tip));
    }
    Ok(SweepReport {
        case: case.name.to_string(),
        n,
        rows,
        tipping,
    })
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with the fixed header; EOC cells are empty when suppressed.
pub fn write_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let mut out = String::from("scheme,case,nu,n,h,ncells,err_u,err_p,eoc_u,eoc_p,wall_ms\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.scheme,
            r.case,
            fmt17(r.nu),
            r.n,
            fmt17(r.h),
            r.ncells,
            fmt17(r.err_u),
            fmt17(r.err_p),
            r.eoc_u.map(fmt17).unwrap_or_default(),
            r.eoc_p.map(fmt17).unwrap_or_default(),
            fmt17(r.wall_ms),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Sweep CSV shares the schema; the level column carries the fixed n.
pub fn write_sweep_csv(report: &SweepReport, path: &Path) -> Result<()> {
    let mut out = String::from("scheme,case,nu,n,h,ncells,err_u,err_p,eoc_u,eoc_p,wall_ms\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},,,{}\n",
            r.scheme,
            report.case,
            fmt17(r.nu),
            report.n,
            fmt17(1.0 / report.n as f64),
            2 * report.n * report.n,
            fmt17(r.err_u),
            fmt17(r.err_p),
            fmt17(r.wall_ms),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_of_exact_power_law_is_exact() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let errs: Vec<f64> = hs.iter().map(|h| 3.7 * h * h).collect();
        let (fitted, pairwise) = fit_eoc(&hs, &errs);
        assert!((fitted.unwrap() - 2.0).abs() < 1e-12);
        for p in pairwise.iter().skip(1) {
            assert!((p.unwrap() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_level_has_no_eoc_and_no_crash() {
        let (fitted, pairwise) = fit_eoc(&[0.1], &[1e-3]);
        assert!(fitted.is_none());
        assert_eq!(pairwise, vec![None]);
    }

    #[test]
    fn paper_error_sequence_reproduces_its_fitted_order() {
        // four tabulated velocity errors of the multi-point scheme on the
        // no-flow case; the least-squares slope lands near 2.9
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let errs = [1.59e-4, 1.78e-5, 2.10e-6, 3.91e-7];
        let (fitted, _) = fit_eoc(&hs, &errs);
        assert!((fitted.unwrap() - 2.89).abs() < 0.05, "{fitted:?}");
    }

    #[test]
    fn floor_suppresses_eoc() {
        let hs = [0.1, 0.05, 0.025];
        let errs = [1e-3, 5e-10, 3e-10];
        let (_, pairwise) = fit_eoc(&hs, &errs);
        assert!(pairwise[1].is_none());
        assert!(pairwise[2].is_none());
    }

    #[test]
    fn csv_round_trips_exactly() {
        let case = crate::cases::find_case("noflow-sin").unwrap();
        let report = run_convergence(
            SchemeKind::CrP0,
            &case,
            1.0,
            &[4, 8],
            MeshFamily::Structured(DiagonalMode::Alternating),
            true,
        )
        .unwrap();
        let dir = std::env::temp_dir().join("ncr-harness-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.csv");
        write_csv(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scheme,case,nu,n,h,ncells,err_u,err_p,eoc_u,eoc_p,wall_ms"
        );
        for (line, row) in lines.zip(&report.rows) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[0], "cr");
            assert_eq!(cols[1], "noflow-sin");
            assert_eq!(cols[3].parse::<usize>().unwrap(), row.n);
            assert_eq!(cols[4].parse::<f64>().unwrap().to_bits(), row.h.to_bits());
            assert_eq!(
                cols[6].parse::<f64>().unwrap().to_bits(),
                row.err_u.to_bits()
            );
            assert_eq!(
                cols[7].parse::<f64>().unwrap().to_bits(),
                row.err_p.to_bits()
            );
            match row.eoc_u {
                Some(e) => assert_eq!(cols[8].parse::<f64>().unwrap().to_bits(), e.to_bits()),
                None => assert!(cols[8].is_empty()),
            }
        }
    }

    #[test]
    fn deterministic_runs_are_bitwise_identical() {
        let case = crate::cases::find_case("noflow-sin").unwrap();
        let make = || {
            run_convergence(
                SchemeKind::Mps,
                &case,
                1.0,
                &[4, 8],
                MeshFamily::Structured(DiagonalMode::Alternating),
                true,
            )
            .unwrap()
        };
        let a = make();
        let b = make();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.err_u.to_bits(), rb.err_u.to_bits());
            assert_eq!(ra.err_p.to_bits(), rb.err_p.to_bits());
            assert_eq!(ra.wall_ms.to_bits(), rb.wall_ms.to_bits());
        }
    }
}

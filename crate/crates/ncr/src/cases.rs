//! Manufactured solutions: exact velocity/pressure pairs, their analytic
//! forcing, and the closed-form norms used to normalize errors.
//!
//! Steady forcing satisfies f = -nu lap(u) + grad(p); the transient vortex
//! solves the full Navier-Stokes momentum with f = 0. Every registered
//! case is residual-checked on a sample grid at registration.

use std::f64::consts::PI;

use crate::mesh::Point;
use crate::{Error, Result};

/// Point in space-time handed to the case closures; steady cases ignore
/// `t`. `nu` enters the forcing (and the vortex decay rates).
pub type SpaceTime = fn(x: f64, y: f64, t: f64, nu: f64) -> [f64; 2];
pub type SpaceTimeScalar = fn(x: f64, y: f64, t: f64, nu: f64) -> f64;

#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub time_dependent: bool,
    pub velocity: SpaceTime,
    pub pressure: SpaceTimeScalar,
    pub forcing: SpaceTime,
    /// Analytic pieces for the residual check and the transient closures.
    pub grad_p: SpaceTime,
    pub lap_u: SpaceTime,
    pub du_dt: SpaceTime,
    pub conv_u: SpaceTime,
    /// L2 norm of the exact velocity over the unit square at time t
    /// (exactly 0 for the no-flow cases, selecting the unnormalized error).
    pub velocity_norm: fn(t: f64, nu: f64) -> f64,
    pub pressure_norm: fn(t: f64, nu: f64) -> f64,
}

impl ManufacturedCase {
    pub fn velocity_at(&self, x: Point, t: f64, nu: f64) -> Point {
        (self.velocity)(x[0], x[1], t, nu)
    }

    pub fn pressure_at(&self, x: Point, t: f64, nu: f64) -> f64 {
        (self.pressure)(x[0], x[1], t, nu)
    }

    pub fn forcing_at(&self, x: Point, t: f64, nu: f64) -> Point {
        (self.forcing)(x[0], x[1], t, nu)
    }
}

fn zero2(_x: f64, _y: f64, _t: f64, _nu: f64) -> [f64; 2] {
    [0.0, 0.0]
}

fn zero_norm(_t: f64, _nu: f64) -> f64 {
    0.0
}

// ---- the common sinusoidal fields -------------------------------------

fn u_sin(x: f64, y: f64, _t: f64, _nu: f64) -> [f64; 2] {
    [
        ((2.0 * PI * x).cos() - 1.0) * (2.0 * PI * y).sin(),
        -((2.0 * PI * y).cos() - 1.0) * (2.0 * PI * x).sin(),
    ]
}

fn u_sin_norm(_t: f64, _nu: f64) -> f64 {
    (1.5f64).sqrt()
}

fn lap_u_sin(x: f64, y: f64, _t: f64, _nu: f64) -> [f64; 2] {
    let sx = (2.0 * PI * x).sin();
    let cx = (2.0 * PI * x).cos();
    let sy = (2.0 * PI * y).sin();
    let cy = (2.0 * PI * y).cos();
    let k = 4.0 * PI * PI;
    [-k * (2.0 * cx - 1.0) * sy, k * (2.0 * cy - 1.0) * sx]
}

fn p_sinsin(x: f64, y: f64, _t: f64, _nu: f64) -> f64 {
    (2.0 * PI * x).sin() * (2.0 * PI * y).sin()
}

fn grad_p_sinsin(x: f64, y: f64, _t: f64, _nu: f64) -> [f64; 2] {
    [
        2.0 * PI * (2.0 * PI * x).cos() * (2.0 * PI * y).sin(),
        2.0 * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).cos(),
    ]
}

fn p_sinsin_norm(_t: f64, _nu: f64) -> f64 {
    0.5
}

// ---- case: noflow-sin ---------------------------------------------------

fn f_noflow(x: f64, y: f64, t: f64, nu: f64) -> [f64; 2] {
    grad_p_sinsin(x, y, t, nu)
}

// ---- case: sin-sin (sinusoidal velocity and pressure) -------------------

fn f_sinsin(x: f64, y: f64, _t: f64, nu: f64) -> [f64; 2] {
    let sx = (2.0 * PI * x).sin();
    let cx = (2.0 * PI * x).cos();
    let sy = (2.0 * PI * y).sin();
    let cy = (2.0 * PI * y).cos();
    [
        2.0 * PI * (2.0 * PI * nu * (2.0 * cx - 1.0) + cx) * sy,
        2.0 * PI * (-2.0 * PI * nu * (2.0 * cy - 1.0) + cy) * sx,
    ]
}

// ---- case: affine pressure ----------------------------------------------

fn p_affine(x: f64, y: f64, _t: f64, _nu: f64) -> f64 {
    x + y - 1.0
}

fn grad_p_affine(_x: f64, _y: f64, _t: f64, _nu: f64) -> [f64; 2] {
    [1.0, 1.0]
}

fn p_affine_norm(_t: f64, _nu: f64) -> f64 {
    (1.0f64 / 6.0).sqrt()
}

fn f_affine_sin(x: f64, y: f64, _t: f64, nu: f64) -> [f64; 2] {
    let k = 4.0 * PI * PI * nu;
    [
        k * (2.0 * (2.0 * PI * x).cos() - 1.0) * (2.0 * PI * y).sin() + 1.0,
        -k * (2.0 * (2.0 * PI * y).cos() - 1.0) * (2.0 * PI * x).sin() + 1.0,
    ]
}

// ---- case: quadratic pressure --------------------------------------------

fn p_quadratic(x: f64, y: f64, _t: f64, _nu: f64) -> f64 {
    x * x + x * y + y * y - 11.0 / 12.0
}

fn grad_p_quadratic(x: f64, y: f64, _t: f64, _nu: f64) -> [f64; 2] {
    [2.0 * x + y, x + 2.0 * y]
}

fn p_quadratic_norm(_t: f64, _nu: f64) -> f64 {
    (283.0f64 / 720.0).sqrt()
}

// ---- case: quintic pressure ----------------------------------------------

fn p_quintic(x: f64, y: f64, _t: f64, _nu: f64) -> f64 {
    x.powi(5) + x.powi(4) * y.powi(3) + x * x * y + y.powi(4) - 7.0 / 12.0
}

fn grad_p_quintic(x: f64, y: f64, _t: f64, _nu: f64) -> [f64; 2] {
    [
        5.0 * x.powi(4) + 4.0 * x.powi(3) * y.powi(3) + 2.0 * x * y,
        3.0 * x.powi(4) * y * y + x * x + 4.0 * y.powi(3),
    ]
}

fn p_quintic_norm(_t: f64, _nu: f64) -> f64 {
    (22409.0f64 / 55440.0).sqrt()
}

// ---- case: decaying vortex (transient, f = 0) ----------------------------

fn gt_decay(t: f64, nu: f64) -> f64 {
    (-8.0 * PI * PI * nu * t).exp()
}

fn u_vortex(x: f64, y: f64, t: f64, nu: f64) -> [f64; 2] {
    let d = gt_decay(t, nu);
    [
        -(2.0 * PI * x).cos() * (2.0 * PI * y).sin() * d,
        (2.0 * PI * x).sin() * (2.0 * PI * y).cos() * d,
    ]
}

fn p_vortex(x: f64, y: f64, t: f64, nu: f64) -> f64 {
    -0.25 * ((4.0 * PI * x).cos() + (4.0 * PI * y).cos()) * gt_decay(t, nu).powi(2)
}

fn grad_p_vortex(x: f64, y: f64, t: f64, nu: f64) -> [f64; 2] {
    let d2 = gt_decay(t, nu).powi(2);
    [PI * (4.0 * PI * x).sin() * d2, PI * (4.0 * PI * y).sin() * d2]
}

fn du_dt_vortex(x: f64, y: f64, t: f64, nu: f64) -> [f64; 2] {
    let u = u_vortex(x, y, t, nu);
    let k = -8.0 * PI * PI * nu;
    [k * u[0], k * u[1]]
}

fn lap_u_vortex(x: f64, y: f64, t: f64, nu: f64) -> [f64; 2] {
    let u = u_vortex(x, y, t, nu);
    let k = -8.0 * PI * PI;
    [k * u[0], k * u[1]]
}

fn conv_u_vortex(x: f64, y: f64, t: f64, nu: f64) -> [f64; 2] {
    let d2 = gt_decay(t, nu).powi(2);
    [
        -PI * (4.0 * PI * x).sin() * d2,
        -PI * (4.0 * PI * y).sin() * d2,
    ]
}

fn u_vortex_norm(t: f64, nu: f64) -> f64 {
    (0.5f64).sqrt() * gt_decay(t, nu)
}

fn p_vortex_norm(t: f64, nu: f64) -> f64 {
    0.25 * gt_decay(t, nu).powi(2)
}

/// All built-in cases, residual-checked.
pub fn register_builtin_cases() -> Result<Vec<ManufacturedCase>> {
    let cases = vec![
        ManufacturedCase {
            name: "noflow-sin",
            time_dependent: false,
            velocity: zero2,
            pressure: p_sinsin,
            forcing: f_noflow,
            grad_p: grad_p_sinsin,
            lap_u: zero2,
            du_dt: zero2,
            conv_u: zero2,
            velocity_norm: zero_norm,
            pressure_norm: p_sinsin_norm,
        },
        ManufacturedCase {
            name: "sin-sin",
            time_dependent: false,
            velocity: u_sin,
            pressure: p_sinsin,
            forcing: f_sinsin,
            grad_p: grad_p_sinsin,
            lap_u: lap_u_sin,
            du_dt: zero2,
            conv_u: zero2,
            velocity_norm: u_sin_norm,
            pressure_norm: p_sinsin_norm,
        },
        ManufacturedCase {
            name: "affine-p",
            time_dependent: false,
            velocity: zero2,
            pressure: p_affine,
            forcing: grad_p_affine,
            grad_p: grad_p_affine,
            lap_u: zero2,
            du_dt: zero2,
            conv_u: zero2,
            velocity_norm: zero_norm,
            pressure_norm: p_affine_norm,
        },
        ManufacturedCase {
            name: "affine-p-sin",
            time_dependent: false,
            velocity: u_sin,
            pressure: p_affine,
            forcing: f_affine_sin,
            grad_p: grad_p_affine,
            lap_u: lap_u_sin,
            du_dt: zero2,
            conv_u: zero2,
            velocity_norm: u_sin_norm,
            pressure_norm: p_affine_norm,
        },
        ManufacturedCase {
            name: "quadratic-p",
            time_dependent: false,
            velocity: zero2,
            pressure: p_quadratic,
            forcing: grad_p_quadratic,
            grad_p: grad_p_quadratic,
            lap_u: zero2,
            du_dt: zero2,
            conv_u: zero2,
            velocity_norm: zero_norm,
            pressure_norm: p_quadratic_norm,
        },
        ManufacturedCase {
            name: "quintic-p",
            time_dependent: false,
            velocity: zero2,
            pressure: p_quintic,
            forcing: grad_p_quintic,
            grad_p: grad_p_quintic,
            lap_u: zero2,
            du_dt: zero2,
            conv_u: zero2,
            velocity_norm: zero_norm,
            pressure_norm: p_quintic_norm,
        },
        ManufacturedCase {
            name: "green-taylor",
            time_dependent: true,
            velocity: u_vortex,
            pressure: p_vortex,
            forcing: zero2,
            grad_p: grad_p_vortex,
            lap_u: lap_u_vortex,
            du_dt: du_dt_vortex,
            conv_u: conv_u_vortex,
            velocity_norm: u_vortex_norm,
            pressure_norm: p_vortex_norm,
        },
    ];
    for case in &cases {
        residual_check(case)?;
        zero_mean_check(case)?;
    }
    Ok(cases)
}

pub fn find_case(name: &str) -> Result<ManufacturedCase> {
    register_builtin_cases()?
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::UnknownCase(name.to_string()))
}

pub fn case_names() -> Vec<&'static str> {
    register_builtin_cases()
        .expect("builtin cases are consistent")
        .iter()
        .map(|c| c.name)
        .collect()
}

/// Pointwise momentum residual of the registered closed forms on a 5x5
/// interior sample grid, two viscosities, two times.
fn residual_check(case: &ManufacturedCase) -> Result<()> {
    let mut worst: f64 = 0.0;
    let times = if case.time_dependent {
        vec![0.0, 0.004]
    } else {
        vec![0.0]
    };
    for &nu in &[1.0, 1e-3] {
        for &t in &times {
            for i in 0..5 {
                for j in 0..5 {
                    let x = 0.1 + 0.2 * i as f64;
                    let y = 0.1 + 0.2 * j as f64;
                    let f = (case.forcing)(x, y, t, nu);
                    let gp = (case.grad_p)(x, y, t, nu);
                    let lu = (case.lap_u)(x, y, t, nu);
                    let dt = (case.du_dt)(x, y, t, nu);
                    let cv = (case.conv_u)(x, y, t, nu);
                    for c in 0..2 {
                        let r = dt[c] - nu * lu[c] + cv[c] + gp[c] - f[c];
                        worst = worst.max(r.abs());
                    }
                }
            }
        }
    }
    if worst > 1e-10 {
        return Err(Error::CaseResidual {
            name: case.name.to_string(),
            residual: worst,
        });
    }
    Ok(())
}

/// Zero mean of the exact pressure by composite 3-point tensor Gauss
/// (exact for the polynomial cases, 1e-13-level for the sinusoids).
fn zero_mean_check(case: &ManufacturedCase) -> Result<()> {
    let n = 64;
    let h = 1.0 / n as f64;
    let g = crate::fem::quadrature::GAUSS_SEGMENT_3;
    let mut mean = 0.0;
    for i in 0..n {
        for j in 0..n {
            for &(tx, wx) in g {
                for &(ty, wy) in g {
                    let x = (i as f64 + tx) * h;
                    let y = (j as f64 + ty) * h;
                    mean += wx * wy * h * h * (case.pressure)(x, y, 0.0, 1.0);
                }
            }
        }
    }
    if mean.abs() > 1e-12 {
        return Err(Error::CaseResidual {
            name: case.name.to_string(),
            residual: mean.abs(),
        });
    }
    Ok(())
}

// Temporary scratch: print no-flow errors per scheme and level.
use ncr::cases::find_case;
use ncr::fem::norms;
use ncr::mesh::{generate_structured, DiagonalMode};
use ncr::stokes::{solve_stokes, SchemeKind};

fn fitted_slope(hs: &[f64], errs: &[f64]) -> f64 {
    let n = hs.len() as f64;
    let sx: f64 = hs.iter().map(|h| h.ln()).sum();
    let sy: f64 = errs.iter().map(|e| e.ln()).sum();
    let sxx: f64 = hs.iter().map(|h| h.ln() * h.ln()).sum();
    let sxy: f64 = hs.iter().zip(errs).map(|(h, e)| h.ln() * e.ln()).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
#[ignore]
fn print_noflow_table() {
    let case = find_case("noflow-sin").unwrap();
    for scheme in SchemeKind::all() {
        let mut hs = Vec::new();
        let mut eus = Vec::new();
        let mut eps = Vec::new();
        let mut eprs = Vec::new();
        for n in [10usize, 20, 40, 80] {
            let tri = generate_structured(n, DiagonalMode::Alternating).unwrap();
            let sol = solve_stokes(&tri, scheme, 1.0, &case).unwrap();
            let eu = norms::eps0_velocity(&tri, &sol.velocity, |_| [0.0, 0.0], 0.0);
            let ep = norms::eps0_pressure(
                &tri,
                &sol.pressure,
                |x| case.pressure_at(x, 0.0, 1.0),
                0.5,
            );
            // reconstructed affine pressure error for the mps scheme
            let epr = if scheme == SchemeKind::Mps {
                let quads = ncr::mpfa::reconstruct_field(&tri, &sol.pressure.values, |x| {
                    case.forcing_at(x, 0.0, 1.0)
                })
                .unwrap();
                let mut total = 0.0;
                for qg in &quads {
                    // integrate (qbar + G.(x - Gcell) - p)^2 over the quadrangle:
                    // oracle-level 2x-triangle split, degree-5 rule
                    let centroid_cell = tri.centroid(qg.cell);
                    let me = ncr::mesh::macro_element(&tri, qg.vertex).unwrap();
                    let i = me.cells.iter().position(|&l| l == qg.cell).unwrap();
                    let pts = me.quadrangles[i].points;
                    for t in [[pts[0], pts[1], pts[2]], [pts[0], pts[2], pts[3]]] {
                        let area = 0.5
                            * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1])
                                - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0]));
                        for e in 0..3 {
                            let m = [
                                0.5 * (t[e][0] + t[(e + 1) % 3][0]),
                                0.5 * (t[e][1] + t[(e + 1) % 3][1]),
                            ];
                            let val = sol.pressure.values[qg.cell]
                                + qg.gradient[0] * (m[0] - centroid_cell[0])
                                + qg.gradient[1] * (m[1] - centroid_cell[1])
                                - case.pressure_at(m, 0.0, 1.0);
                            total += area / 3.0 * val * val;
                        }
                    }
                }
                total.sqrt() / 0.5
            } else {
                f64::NAN
            };
            hs.push(1.0 / n as f64);
            eus.push(eu);
            eps.push(ep);
            eprs.push(epr);
            println!("{scheme} n={n:3}  eps_u={eu:.3e}  eps_p_raw={ep:.3e}  eps_p_rec={epr:.3e}");
        }
        println!(
            "{scheme} fitted: tau_u={:.2} tau_p_raw={:.2} tau_p_rec={:.2}",
            fitted_slope(&hs, &eus),
            fitted_slope(&hs, &eps),
            if scheme == SchemeKind::Mps {
                fitted_slope(&hs, &eprs)
            } else {
                f64::NAN
            }
        );
    }
}

use ncr::cases::find_case;
use ncr::fem::norms;
use ncr::mesh::{generate_structured, DiagonalMode};
use ncr::stokes::{solve_stokes, SchemeKind};

#[test]
#[ignore]
fn mps_noflow_on_uniform_mesh() {
    let case = find_case("noflow-sin").unwrap();
    for mode in [DiagonalMode::Uniform, DiagonalMode::Alternating] {
        let mut prev: Option<f64> = None;
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for n in [10usize, 20, 40, 80] {
            let tri = generate_structured(n, mode).unwrap();
            let sol = solve_stokes(&tri, SchemeKind::Mps, 1.0, &case).unwrap();
            let eu = norms::eps0_velocity(&tri, &sol.velocity, |_| [0.0, 0.0], 0.0);
            let t = prev.map(|p: f64| (p / eu).log2()).unwrap_or(f64::NAN);
            println!("{mode:?} n={n:3} eps_u={eu:.3e} eoc={t:.2}");
            prev = Some(eu);
            errs.push(eu.ln());
            hs.push((1.0 / n as f64).ln());
        }
        let n = hs.len() as f64;
        let sx: f64 = hs.iter().sum();
        let sy: f64 = errs.iter().sum();
        let sxx: f64 = hs.iter().map(|x| x * x).sum();
        let sxy: f64 = hs.iter().zip(&errs).map(|(x, y)| x * y).sum();
        println!("{mode:?} fitted tau_u = {:.3}", (n * sxy - sx * sy) / (n * sxx - sx * sx));
    }
}

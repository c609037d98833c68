use nabla_bvp::certify::{certify, verify_ulam_hyers, LipschitzData};
use nabla_bvp::green::{apply_kernel, build_kernel, verify_properties};
use nabla_bvp::oracle::{assemble_operator, direct_solve_linear, direct_solve_nonlinear};
use nabla_bvp::{parse, CoupledProblem, GridFunction, SolverConfig};

fn problem(a: i64, b: i64, alpha1: f64, alpha2: f64) -> CoupledProblem {
    CoupledProblem::new(
        a,
        b,
        alpha1,
        alpha2,
        parse("0.01*exp(-t)*(1 + atan(u1) + atan(u2))").unwrap(),
        parse("0.02*(exp(-t) + sin(u1) + sin(u2))").unwrap(),
    )
    .unwrap()
}

#[test]
fn solve_certify_and_cross_check() {
    let p = problem(0, 9, 1.5, 1.5);
    let lip = LipschitzData::with_computed_bounds(&p, [0.01, 0.01, 0.02, 0.02]).unwrap();
    let cert = certify(&p, &lip);
    assert!(cert.is_ok());

    let cfg = SolverConfig {
        contraction: Some(cert.l),
        ..SolverConfig::default()
    };
    let sol = nabla_bvp::system::solve_picard(&p, &cfg).unwrap();
    assert!(sol.converged && sol.certified);
    assert!(sol.u1.norm() + sol.u2.norm() <= cert.r_min.unwrap());

    let newton = direct_solve_nonlinear(&p).unwrap();
    assert!(newton.u1.distance(&sol.u1) <= 1e-8);
    assert!(newton.u2.distance(&sol.u2) <= 1e-8);

    let uh = verify_ulam_hyers(&p, &cert, (&sol.u1, &sol.u2), [1e-4, 5e-4], 20, 7).unwrap();
    assert!(uh.all_hold(), "{uh}");
}

#[test]
fn minimal_grid_round_trip() {
    // b - a = 2 leaves a single interior equation per component
    let p = problem(3, 5, 1.2, 1.8);
    let sol = nabla_bvp::system::solve_picard(&p, &SolverConfig::default()).unwrap();
    assert!(sol.converged);
    assert!(sol.max_residual() <= 1e-12);
    let newton = direct_solve_nonlinear(&p).unwrap();
    assert!(newton.u1.distance(&sol.u1) <= 1e-10);

    let g = build_kernel(1.2, 3, 5).unwrap();
    let report = verify_properties(&g);
    for id in 1..=4 {
        assert!(report.check(id).passed, "{report}");
    }
    let h = GridFunction::from_fn(4, 5, |t| t as f64);
    let via_kernel = apply_kernel(&g, &h).unwrap();
    let direct = direct_solve_linear(1.2, 3, 5, &h).unwrap();
    assert!(via_kernel.distance(&direct) <= 1e-12);
    assert_eq!(assemble_operator(1.2, 3, 5).unwrap().upper_max(), 0.0);
}

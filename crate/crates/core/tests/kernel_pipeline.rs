//! Kernel solver, transform and controller checks that run the full FD pipeline.

use ptstring::controller::pt_control;
use ptstring::kernel_fd::{max_kernel_time, solve_inverse_kernel, solve_kernel_fd_strided};
use ptstring::simulator::Profile;
use ptstring::transforms::{forward_transform, inverse_transform};
use ptstring::verify::check_fd_bound;
use ptstring::*;

fn setup() -> (StringParams64, GainSchedule64, GainProfile64) {
    let params = StringParams64::reference();
    let sched = GainSchedule64::from_config(&PtConfig64::reference());
    (params, sched, GainProfile::PrescribedTime(sched))
}

fn fd_kernel(n: usize, t_end: f64, stride: usize) -> KernelField64 {
    let (params, _, gain) = setup();
    let grid = TriGrid::new(n).unwrap();
    let dt = 0.7 * grid.h::<f64>() / params.wave_speed();
    solve_kernel_fd_strided(&params, &gain, grid, dt, t_end, stride).unwrap()
}

#[test]
fn fd_kernel_respects_bound_up_to_ninety_percent_of_horizon() {
    let (_, sched, _) = setup();
    let k = fd_kernel(51, 0.9 * sched.horizon(), 1);
    let c = check_fd_bound(&k, &sched);
    assert!(c.passed, "{}", c.summary_line());
}

#[test]
fn reachable_time_is_reported_and_enforced() {
    let (params, sched, gain) = setup();
    let grid = TriGrid::new(51).unwrap();
    let dt = 0.7 * grid.h::<f64>() / params.wave_speed();
    let reach = max_kernel_time(&gain, grid, dt).unwrap();
    assert!(reach > 0.9 * sched.horizon() && reach < sched.horizon());
    assert!(matches!(solve_kernel_fd_strided(&params, &gain, grid, dt, reach + dt, 1), Err(Error::HorizonExceeded { .. })));
    assert!(matches!(
        solve_kernel_fd_strided(&params, &gain, grid, 0.4 * grid.h::<f64>() / params.wave_speed(), 0.5, 1),
        Err(Error::CflViolation { .. })
    ));
}

#[test]
fn initial_control_matches_oracle_quadrature() {
    let (params, _, gain) = setup();
    let oracle = SeriesKernel64::with_tolerance(&params, &gain, 0.0, 1e-12).unwrap();
    let fine = 2001;
    let p = FieldSnapshot64::from_fn(0.0, fine, |x| Profile::Parabola.eval(x));
    let u_ref = pt_control(&p, -0.5, &oracle.boundary_traces(0.0, fine).unwrap(), &params).unwrap().u;
    let k = fd_kernel(51, 0.1, 1);
    let nx = 201;
    let p = FieldSnapshot64::from_fn(0.0, nx, |x| Profile::Parabola.eval(x));
    let u_fd = pt_control(&p, -0.5, &k.boundary_traces(0.0).unwrap().resample(nx).unwrap(), &params).unwrap().u;
    assert!(((u_fd - u_ref) / u_ref).abs() <= 0.01, "u_fd={u_fd} u_ref={u_ref}");
}

#[test]
fn frozen_gain_traces_stay_bounded_while_prescribed_time_traces_grow() {
    let (params, sched, _) = setup();
    let grid = TriGrid::new(31).unwrap();
    let frozen = solve_kernel_fd_strided(&params, &GainProfile::frozen_at_start(&sched), grid, 0.0, 0.0, 1).unwrap();
    let pt = fd_kernel(31, 2.4, 10);
    let f0 = frozen.boundary_traces(0.0).unwrap();
    let f1 = frozen.boundary_traces(2.4).unwrap();
    assert_eq!(f0.k11, f1.k11);
    let p1 = pt.boundary_traces(2.4).unwrap();
    assert!(p1.k11.abs() > 20.0 * f1.k11.abs());
    let sup = |r: &[f64]| r.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    assert!(sup(&p1.kx_row) > 5.0 * sup(&f1.kx_row));
}

#[test]
fn round_trip_error_contracts_under_refinement() {
    let p0 = |x: f64| Profile::Parabola.eval(x);
    let mut errs = Vec::new();
    for (nx, n) in [(101usize, 26usize), (201, 51), (401, 101)] {
        let k = fd_kernel(n, 0.05, 1);
        let r = solve_inverse_kernel(&k).unwrap();
        let p = FieldSnapshot64::from_fn(0.0, nx, p0);
        let back = inverse_transform(&forward_transform(&p, &k).unwrap(), &r).unwrap();
        errs.push(p.values.iter().zip(&back.values).map(|(a, b)| (a - b).abs()).fold(0.0_f64, f64::max));
    }
    assert!(errs[0] >= 3.0 * errs[1] && errs[1] >= 3.0 * errs[2], "{errs:?}");
}

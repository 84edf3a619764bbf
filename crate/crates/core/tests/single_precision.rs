//! The generic pipeline instantiated at `f32`.

use ptstring::kernel_fd::{solve_inverse_kernel, solve_kernel_fd_strided};
use ptstring::simulator::{simulate, Scenario, SimulationSetup};
use ptstring::transforms::{forward_transform, inverse_transform};
use ptstring::*;

#[test]
fn f32_pipeline_agrees_with_f64() {
    let p32 = StringParams::<f32>::reference();
    let s32 = GainSchedule::from_config(&PtConfig::<f32>::reference());
    let grid = TriGrid::new(21).unwrap();
    let dt = 0.7 * grid.h::<f32>() / p32.wave_speed();
    let k32 = solve_kernel_fd_strided(&p32, &GainProfile::PrescribedTime(s32), grid, dt, 0.5, 5).unwrap();
    let r32 = solve_inverse_kernel(&k32).unwrap();
    let p = FieldSnapshot::<f32>::from_fn(0.0, 51, |x| 0.5 * x * (1.0 - x));
    let back = inverse_transform(&forward_transform(&p, &k32).unwrap(), &r32).unwrap();
    assert!(p.values.iter().zip(&back.values).all(|(a, b)| (a - b).abs() < 1e-4));

    let p64 = StringParams64::reference();
    let s64 = GainSchedule64::from_config(&PtConfig64::reference());
    let dt64 = 0.7 * grid.h::<f64>() / p64.wave_speed();
    let k64 = solve_kernel_fd_strided(&p64, &GainProfile::PrescribedTime(s64), grid, dt64, 0.5, 5).unwrap();
    let a = k32.field().sample(0.8, 0.4, 0.4).unwrap() as f64;
    let b = k64.field().sample(0.8, 0.4, 0.4).unwrap();
    assert!((a - b).abs() < 1e-4 * b.abs().max(1.0), "{a} vs {b}");

    let mut setup = SimulationSetup::<f32>::reference();
    setup.nx = 51;
    setup.kernel_n = 21;
    setup.t_end = 0.5;
    let open = simulate(Scenario::OpenLoop, &setup, None).unwrap();
    let e0 = open.norms[0].ek + open.norms[0].ep;
    let e1 = open.norms.last().map(|n| n.ek + n.ep).unwrap();
    assert!(((e1 - e0) / e0).abs() < 0.01);
    let closed = simulate(Scenario::ClosedLoop, &setup, None).unwrap();
    assert!(closed.controls.iter().all(|c| c.u.is_finite()));
}

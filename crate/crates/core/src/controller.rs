//! Backstepping boundary force and its frozen-gain baseline.

use crate::error::{Error, Result};
use crate::kernel_fd::BoundaryTraces;
use crate::params::{f64_of, StringParams};
use crate::quadrature::integrate_1d;
use crate::scalar::Scalar;
use crate::transforms::FieldSnapshot;

/// Boundary force `u` applied at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSample<S> {
    pub t: S,
    pub u: S,
}

/// Relative tolerance when matching snapshot and trace times.
pub const TIME_MATCH_TOL: f64 = 1e-9;

/// Evaluates
/// `u = Tf k11 p(1) + Tf int k_x(1,y) p + (M Tf / rho0) (k11 p_x(1) - k_y(1,1) p(1) + int k_yy(1,y) p)`.
pub fn backstepping_control<S: Scalar>(
    p: &FieldSnapshot<S>,
    px1: S,
    traces: &BoundaryTraces<S>,
    params: &StringParams<S>,
) -> Result<ControlSample<S>> {
    if (p.t - traces.t).abs() > S::of(TIME_MATCH_TOL) * p.t.abs().max(S::one()) {
        return Err(Error::TimeMismatch { state: f64_of(p.t), traces: f64_of(traces.t) });
    }
    if traces.ny() != p.nx() || traces.kyy_row.len() != p.nx() {
        return Err(Error::GridMismatch(format!("traces on {} nodes, state on {}", traces.ny(), p.nx())));
    }
    let dx = p.dx();
    let p1 = *p.values.last().expect("non-empty snapshot");
    let wx: Vec<S> = traces.kx_row.iter().zip(&p.values).map(|(k, v)| *k * *v).collect();
    let wyy: Vec<S> = traces.kyy_row.iter().zip(&p.values).map(|(k, v)| *k * *v).collect();
    let ix = integrate_1d(&wx, dx)?;
    let iyy = integrate_1d(&wyy, dx)?;
    let tf = params.tension();
    let mass_term = params.tip_mass() * tf / params.rho0() * (traces.k11 * px1 - traces.ky11 * p1 + iyy);
    Ok(ControlSample { t: p.t, u: tf * traces.k11 * p1 + tf * ix + mass_term })
}

/// Prescribed-time law with traces of the time-varying kernel.
pub fn pt_control<S: Scalar>(
    p: &FieldSnapshot<S>,
    px1: S,
    traces: &BoundaryTraces<S>,
    params: &StringParams<S>,
) -> Result<ControlSample<S>> {
    backstepping_control(p, px1, traces, params)
}

/// Exponential baseline: the same law with traces of the kernel for `mu` frozen at `mu0^2`.
pub fn exp_baseline_control<S: Scalar>(
    p: &FieldSnapshot<S>,
    px1: S,
    frozen_traces: &BoundaryTraces<S>,
    params: &StringParams<S>,
) -> Result<ControlSample<S>> {
    backstepping_control(p, px1, frozen_traces, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::{GainProfile, GainSchedule};
    use crate::series::SeriesKernel;
    use proptest::prelude::*;

    fn oracle_traces(t: f64, ny: usize) -> BoundaryTraces<f64> {
        let p = StringParams::reference();
        let g = GainProfile::PrescribedTime(GainSchedule::new(5.0, 3.0).unwrap());
        SeriesKernel::with_tolerance(&p, &g, t.max(0.1), 1e-12).unwrap().boundary_traces(t, ny).unwrap()
    }

    #[test]
    fn zero_state_gives_zero_force() {
        let p = FieldSnapshot::new(0.0, vec![0.0; 41]);
        let tr = oracle_traces(0.0, 41);
        assert_eq!(pt_control(&p, 0.0, &tr, &StringParams::reference()).unwrap().u, 0.0);
    }

    #[test]
    fn massless_tip_keeps_first_two_terms() {
        let params = StringParams::new(1.0, 45.0, 0.0).unwrap();
        let p = FieldSnapshot::from_fn(0.0, 41, |x: f64| x);
        let tr = oracle_traces(0.0, 41);
        let u = pt_control(&p, 1.0, &tr, &params).unwrap().u;
        let wx: Vec<f64> = tr.kx_row.iter().zip(&p.values).map(|(a, b)| a * b).collect();
        let expect = 45.0 * tr.k11 + 45.0 * integrate_1d(&wx, p.dx()).unwrap();
        assert!((u - expect).abs() < 1e-12);
    }

    #[test]
    fn mismatches_are_rejected() {
        let p = FieldSnapshot::new(0.5, vec![0.0; 41]);
        let params = StringParams::reference();
        assert!(matches!(pt_control(&p, 0.0, &oracle_traces(0.0, 41), &params), Err(Error::TimeMismatch { .. })));
        let p = FieldSnapshot::new(0.0, vec![0.0; 21]);
        assert!(matches!(pt_control(&p, 0.0, &oracle_traces(0.0, 41), &params), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn baseline_matches_at_start() {
        let params = StringParams::<f64>::reference();
        let s = GainSchedule::new(5.0, 3.0).unwrap();
        let frozen = SeriesKernel::with_tolerance(&params, &GainProfile::frozen_at_start(&s), 0.0, 1e-13).unwrap();
        let p = FieldSnapshot::from_fn(0.0, 101, |x: f64| -0.5 * x * (x - 1.0));
        let a = pt_control(&p, -0.5, &oracle_traces(0.0, 101), &params).unwrap().u;
        let b = exp_baseline_control(&p, -0.5, &frozen.boundary_traces(0.0, 101).unwrap(), &params).unwrap().u;
        // the kernels agree at t = 0 but their time derivatives differ, which changes k_yy and k_x
        assert!(((a - b) / a).abs() < 0.05, "{a} vs {b}");
        let late = frozen.boundary_traces(2.9, 101).unwrap();
        assert_eq!(late.kx_row, frozen.boundary_traces(0.0, 101).unwrap().kx_row);
    }

    proptest! {
        #[test]
        fn linear_in_state(alpha in -5.0_f64..5.0) {
            let params = StringParams::reference();
            let tr = oracle_traces(0.0, 41);
            let p = FieldSnapshot::from_fn(0.0, 41, |x: f64| x * (1.3 - x));
            let q = FieldSnapshot::new(0.0, p.values.iter().map(|v| alpha * v).collect());
            let u = pt_control(&p, p.right_slope(), &tr, &params).unwrap().u;
            let uq = pt_control(&q, q.right_slope(), &tr, &params).unwrap().u;
            prop_assert!((uq - alpha * u).abs() < 1e-10 * (1.0 + u.abs()));
        }
    }
}

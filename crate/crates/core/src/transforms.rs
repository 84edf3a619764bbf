//! Volterra transform `v = p - int_0^x k p`, its inverse and the target-system residual probe.

use crate::error::{Error, Result};
use crate::gain::GainProfile;
use crate::kernel_fd::{InverseKernelField, KernelField, TriField};
use crate::params::{f64_of, StringParams};
use crate::quadrature::integrate_1d;
use crate::scalar::Scalar;
use crate::series::SeriesKernel;

/// Field values on the uniform grid of `[0, 1]` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot<S> {
    pub t: S,
    pub values: Vec<S>,
}

impl<S: Scalar> FieldSnapshot<S> {
    pub fn new(t: S, values: Vec<S>) -> Self {
        Self { t, values }
    }

    /// Samples `f` on `nx` uniform nodes.
    pub fn from_fn(t: S, nx: usize, f: impl Fn(S) -> S) -> Self {
        let values = (0..nx).map(|i| f(S::of_usize(i) / S::of_usize(nx - 1))).collect();
        Self { t, values }
    }

    pub fn nx(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> S {
        S::one() / S::of_usize(self.values.len() - 1)
    }

    /// Trapezoid `L^2` norm.
    pub fn l2_norm(&self) -> S {
        let sq: Vec<S> = self.values.iter().map(|v| *v * *v).collect();
        integrate_1d(&sq, self.dx()).unwrap_or_else(|_| S::zero()).sqrt()
    }

    pub fn sup_norm(&self) -> S {
        self.values.iter().fold(S::zero(), |a, v| a.max(v.abs()))
    }

    /// Second-order one-sided slope at `x = 1`.
    pub fn right_slope(&self) -> S {
        let n = self.values.len();
        let v = &self.values;
        (S::of(3.0) * v[n - 1] - S::of(4.0) * v[n - 2] + v[n - 3]) / (S::of(2.0) * self.dx())
    }
}

/// Source of kernel samples on a uniform grid.
pub trait KernelSource<S: Scalar> {
    /// Lower-triangular samples `K[i][j] = k(x_i, x_j, t)` for `j <= i` on `nx` nodes.
    fn sample_matrix(&self, nx: usize, t: S) -> Result<Vec<Vec<S>>>;
}

impl<S: Scalar> KernelSource<S> for TriField<S> {
    fn sample_matrix(&self, nx: usize, t: S) -> Result<Vec<Vec<S>>> {
        self.sample_on_grid(nx, t)
    }
}

impl<S: Scalar> KernelSource<S> for KernelField<S> {
    fn sample_matrix(&self, nx: usize, t: S) -> Result<Vec<Vec<S>>> {
        self.field().sample_on_grid(nx, t)
    }
}

impl<S: Scalar> KernelSource<S> for InverseKernelField<S> {
    fn sample_matrix(&self, nx: usize, t: S) -> Result<Vec<Vec<S>>> {
        self.field().sample_on_grid(nx, t)
    }
}

impl<S: Scalar> KernelSource<S> for SeriesKernel<S> {
    fn sample_matrix(&self, nx: usize, t: S) -> Result<Vec<Vec<S>>> {
        let node = |i: usize| S::of_usize(i) / S::of_usize(nx - 1);
        (0..nx).map(|i| (0..=i).map(|j| self.eval(node(i), node(j), t)).collect()).collect()
    }
}

/// Identically zero kernel.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroKernel;

impl<S: Scalar> KernelSource<S> for ZeroKernel {
    fn sample_matrix(&self, nx: usize, _t: S) -> Result<Vec<Vec<S>>> {
        Ok((0..nx).map(|i| vec![S::zero(); i + 1]).collect())
    }
}

fn check_matrix<S>(m: &[Vec<S>], nx: usize) -> Result<()> {
    if m.len() != nx || m.iter().enumerate().any(|(i, r)| r.len() != i + 1) {
        return Err(Error::GridMismatch(format!("kernel matrix does not match a {}-node grid", nx)));
    }
    Ok(())
}

/// `out_i = f_i + sign * int_0^{x_i} K(x_i, y) f(y) dy` with a precomputed kernel matrix.
pub fn apply_volterra<S: Scalar>(f: &FieldSnapshot<S>, kmat: &[Vec<S>], sign: S) -> Result<FieldSnapshot<S>> {
    let nx = f.nx();
    check_matrix(kmat, nx)?;
    let dx = f.dx();
    let half = S::of(0.5);
    let values = (0..nx)
        .map(|i| {
            if i == 0 {
                return f.values[0];
            }
            let row = &kmat[i];
            let mut acc = half * (row[0] * f.values[0] + row[i] * f.values[i]);
            for j in 1..i {
                acc += row[j] * f.values[j];
            }
            f.values[i] + sign * dx * acc
        })
        .collect();
    Ok(FieldSnapshot { t: f.t, values })
}

/// `v(x) = p(x) - int_0^x k(x, y, t) p(y) dy`.
pub fn forward_transform<S: Scalar, K: KernelSource<S> + ?Sized>(p: &FieldSnapshot<S>, k: &K) -> Result<FieldSnapshot<S>> {
    let m = k.sample_matrix(p.nx(), p.t)?;
    apply_volterra(p, &m, -S::one())
}

/// `p(x) = v(x) + int_0^x r(x, y, t) v(y) dy`.
pub fn inverse_transform<S: Scalar, K: KernelSource<S> + ?Sized>(v: &FieldSnapshot<S>, r: &K) -> Result<FieldSnapshot<S>> {
    let m = r.sample_matrix(v.nx(), v.t)?;
    apply_volterra(v, &m, S::one())
}

/// Residual of `rho0 v_tt - Tf v_xx + mu v` at the middle snapshot, where `v` is the forward
/// transform of each snapshot at its own time. End nodes are reported as zero.
pub fn target_residual<S: Scalar, K: KernelSource<S> + ?Sized>(
    history: [&FieldSnapshot<S>; 3],
    k: &K,
    params: &StringParams<S>,
    gain: &GainProfile<S>,
) -> Result<FieldSnapshot<S>> {
    let [a, b, c] = history;
    let nx = b.nx();
    if a.nx() != nx || c.nx() != nx {
        return Err(Error::GridMismatch("snapshots have different lengths".into()));
    }
    let dt = b.t - a.t;
    let dt2 = c.t - b.t;
    if !(dt > S::zero()) || (dt2 - dt).abs() > S::of(1e-9) * dt.abs().max(S::one()) {
        return Err(Error::Domain(format!("non-uniform time spacing {} vs {}", f64_of(dt), f64_of(dt2))));
    }
    let va = forward_transform(a, k)?;
    let vb = forward_transform(b, k)?;
    let vc = forward_transform(c, k)?;
    let dx = b.dx();
    let mu = gain.value(b.t);
    let two = S::of(2.0);
    let mut values = vec![S::zero(); nx];
    for i in 1..nx - 1 {
        let vtt = (vc.values[i] - two * vb.values[i] + va.values[i]) / (dt * dt);
        let vxx = (vb.values[i + 1] - two * vb.values[i] + vb.values[i - 1]) / (dx * dx);
        values[i] = params.rho0() * vtt - params.tension() * vxx + mu * vb.values[i];
    }
    Ok(FieldSnapshot { t: b.t, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::GainSchedule;
    use crate::kernel_fd::{default_kernel_dt, solve_inverse_kernel, solve_kernel_fd_strided};
    use crate::params::TriGrid;
    use proptest::prelude::*;

    #[test]
    fn trivial_cases() {
        let p = FieldSnapshot::from_fn(0.0, 21, |x: f64| x * (1.0 - x));
        let v = forward_transform(&p, &ZeroKernel).unwrap();
        assert_eq!(v, p);
        let back = inverse_transform(&p, &ZeroKernel).unwrap();
        assert_eq!(back, p);
        let z = FieldSnapshot::new(0.0, vec![0.0; 21]);
        let series = SeriesKernel::build(&StringParams::reference(), &GainProfile::Frozen(25.0), 4).unwrap();
        assert!(forward_transform(&z, &series).unwrap().values.iter().all(|v| *v == 0.0));
        assert_eq!(forward_transform(&p, &series).unwrap().values[0], 0.0);
    }

    #[test]
    fn round_trip_is_second_order() {
        let params = StringParams::<f64>::reference();
        let g = GainProfile::PrescribedTime(GainSchedule::new(5.0, 3.0).unwrap());
        let grid = TriGrid::new(31).unwrap();
        let k = solve_kernel_fd_strided(&params, &g, grid, default_kernel_dt(&params, grid), 0.0, 1).unwrap();
        let r = solve_inverse_kernel(&k).unwrap();
        let err = |nx: usize| {
            let p = FieldSnapshot::from_fn(0.0, nx, |x: f64| -0.5 * x * (x - 1.0));
            let back = inverse_transform(&forward_transform(&p, &k).unwrap(), &r).unwrap();
            back.values.iter().zip(&p.values).fold(0.0_f64, |a, (u, v)| a.max((u - v).abs()))
        };
        assert!(err(101) < 1e-4);
    }

    #[test]
    fn open_wave_has_small_residual_with_zero_kernel() {
        // p = sin(pi x / 2) cos(pi c t / 2) solves the wave equation exactly
        let params = StringParams::<f64>::new(1.0, 45.0, 0.0).unwrap();
        let c = params.wave_speed();
        let w = |t: f64, nx: usize| {
            FieldSnapshot::from_fn(t, nx, |x: f64| {
                (std::f64::consts::FRAC_PI_2 * x).sin() * (std::f64::consts::FRAC_PI_2 * c * t).cos()
            })
        };
        let dt = 1e-3;
        let (a, b, cc) = (w(0.3, 201), w(0.3 + dt, 201), w(0.3 + 2.0 * dt, 201));
        let r = target_residual([&a, &b, &cc], &ZeroKernel, &params, &GainProfile::Frozen(0.0)).unwrap();
        assert!(r.sup_norm() < 1e-2);
        let z = FieldSnapshot::new(0.0, vec![0.0; 201]);
        let z1 = FieldSnapshot::new(dt, vec![0.0; 201]);
        let z2 = FieldSnapshot::new(2.0 * dt, vec![0.0; 201]);
        assert_eq!(target_residual([&z, &z1, &z2], &ZeroKernel, &params, &GainProfile::Frozen(25.0)).unwrap().sup_norm(), 0.0);
        let bad = FieldSnapshot::new(5.0 * dt, vec![0.0; 201]);
        assert!(target_residual([&z, &z1, &bad], &ZeroKernel, &params, &GainProfile::Frozen(25.0)).is_err());
    }

    proptest! {
        #[test]
        fn transform_is_linear(a in -3.0_f64..3.0, b in -3.0_f64..3.0, t in 0.0_f64..2.0) {
            let params = StringParams::<f64>::reference();
            let s = GainSchedule::new(5.0, 3.0).unwrap();
            let k = SeriesKernel::build(&params, &GainProfile::PrescribedTime(s), 6).unwrap();
            let f = FieldSnapshot::from_fn(t, 31, |x: f64| x * (1.0 - 0.5 * x));
            let g = FieldSnapshot::from_fn(t, 31, |x: f64| (3.0 * x).sin());
            let combo = FieldSnapshot::new(t, f.values.iter().zip(&g.values).map(|(u, v)| a * u + b * v).collect());
            let lhs = forward_transform(&combo, &k).unwrap();
            let tf = forward_transform(&f, &k).unwrap();
            let tg = forward_transform(&g, &k).unwrap();
            for i in 0..31 {
                prop_assert!((lhs.values[i] - (a * tf.values[i] + b * tg.values[i])).abs() < 1e-12);
            }
        }
    }
}

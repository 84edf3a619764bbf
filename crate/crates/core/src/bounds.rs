//! Modified Bessel series and the explicit kernel bounds.

use crate::error::{Error, Result};
use crate::gain::GainSchedule;
use crate::params::{f64_of, StringParams, TriGrid};
use crate::scalar::Scalar;

/// `I_lambda(z) = sum_n (z/2)^(lambda + 2n) / (n! (n + lambda)!)`, summed until the term drops
/// below `1e-16` of the partial sum.
pub fn bessel_i<S: Scalar>(lambda: u32, z: S) -> S {
    if z == S::zero() {
        return if lambda == 0 { S::one() } else { S::zero() };
    }
    let half = z / S::of(2.0);
    let mut term = half.powi(lambda as i32);
    for k in 2..=lambda as usize {
        term /= S::of_usize(k);
    }
    let mut sum = term;
    let q = half * half;
    let eps = S::of(1e-16).max(S::epsilon() * S::of(0.5));
    let mut n = 0usize;
    loop {
        n += 1;
        term *= q / (S::of_usize(n) * S::of_usize(n + lambda as usize));
        sum += term;
        if term <= eps * sum || n > 100_000 {
            return sum;
        }
    }
}

/// `I_1(z)`.
pub fn bessel_i1<S: Scalar>(z: S) -> S {
    bessel_i(1, z)
}

/// Switch point of the small-argument branch of `I_1(z) / z`.
pub const SMALL_Z: f64 = 1e-4;

/// `I_1(z) / z`, with `1/2 + z^2/16` for `z < 1e-4`.
pub fn i1_over_z<S: Scalar>(z: S) -> S {
    if z < S::of(SMALL_Z) {
        S::of(0.5) + z * z / S::of(16.0)
    } else {
        bessel_i1(z) / z
    }
}

/// Calibration constants of the gain envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams<S> {
    ck: S,
    c: S,
}

impl<S: Scalar> BoundParams<S> {
    /// `C = 6 + mu0^2 T^2` with a user-chosen `Ck > 0`.
    pub fn new(ck: S, sched: &GainSchedule<S>) -> Result<Self> {
        if !(ck > S::zero() && ck.is_finite()) {
            return Err(Error::InvalidParameter { name: "ck", reason: "must be finite and > 0".into() });
        }
        Ok(Self { ck, c: composite_constant(sched) })
    }

    pub fn ck(&self) -> S {
        self.ck
    }

    pub fn c(&self) -> S {
        self.c
    }
}

/// `6 + mu0^2 T^2`.
pub fn composite_constant<S: Scalar>(sched: &GainSchedule<S>) -> S {
    S::of(6.0) + sched.scale() * sched.scale()
}

fn bessel_argument<S: Scalar>(x: S, y: S, mu: S, params: &StringParams<S>, sched: &GainSchedule<S>) -> S {
    let c = composite_constant(sched);
    (S::E() * mu * c * (x * x - y * y) / (params.tension() * sched.scale() * sched.scale())).sqrt()
}

/// Pointwise kernel bound `(y C / Tf) mu I_1(z) / z` with
/// `z = sqrt(e mu C (x^2 - y^2) / (Tf mu0^2 T^2))`.
pub fn kernel_bound<S: Scalar>(x: S, y: S, t: S, params: &StringParams<S>, sched: &GainSchedule<S>) -> Result<S> {
    if y < S::zero() || y > x || x > S::one() {
        return Err(Error::Domain(format!("need 0 <= y <= x <= 1, got x={}, y={}", x, y)));
    }
    let mu = sched.mu(t)?;
    let z = bessel_argument(x, y, mu, params, sched);
    Ok(y * composite_constant(sched) / params.tension() * mu * i1_over_z(z))
}

/// `exp(sqrt(e mu C (x^2 - y^2) / Tf) / (mu0 T))`, the exponential majorant of `I_1(z) / (2 z)`.
pub fn exponential_majorant<S: Scalar>(x: S, y: S, t: S, params: &StringParams<S>, sched: &GainSchedule<S>) -> Result<S> {
    let mu = sched.mu(t)?;
    Ok(bessel_argument(x, y, mu, params, sched).exp())
}

/// `M_k(t) = Ck mu exp(sqrt(e mu C / Tf) / (mu0 T))`; the inverse-kernel envelope `M_r` is the same.
pub fn gain_envelope_mk<S: Scalar>(t: S, bp: &BoundParams<S>, sched: &GainSchedule<S>, tension: S) -> Result<S> {
    let mu = sched.mu(t)?;
    Ok(bp.ck * mu * ((S::E() * mu * bp.c / tension).sqrt() / sched.scale()).exp())
}

/// Calibrates `Ck` as `1.01` times the supremum of `kernel_bound / (mu exp(...))` over the grid
/// nodes and the sample times.
pub fn calibrate_ck<S: Scalar>(
    params: &StringParams<S>,
    sched: &GainSchedule<S>,
    grid: TriGrid,
    times: &[S],
) -> Result<BoundParams<S>> {
    if times.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let unit = BoundParams { ck: S::one(), c: composite_constant(sched) };
    let mut sup = S::zero();
    for &t in times {
        let env = gain_envelope_mk(t, &unit, sched, params.tension())?;
        for i in 0..grid.n() {
            for j in 0..=i {
                let b = kernel_bound(grid.node(i), grid.node(j), t, params, sched)?;
                sup = sup.max(b / env);
            }
        }
    }
    if !(sup > S::zero()) {
        return Err(Error::Domain(format!("degenerate calibration supremum {}", f64_of(sup))));
    }
    BoundParams::new(sup * S::of(1.01), sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn setup() -> (StringParams<f64>, GainSchedule<f64>) {
        (StringParams::reference(), GainSchedule::new(5.0, 3.0).unwrap())
    }

    #[test]
    fn bessel_examples() {
        assert_eq!(bessel_i1(0.0_f64), 0.0);
        assert!((bessel_i1(1.0_f64) - 0.565_159_104_0).abs() < 1e-9);
        assert!((bessel_i1(2.0_f64) - 1.590_636_854_6).abs() < 1e-9);
        assert!((bessel_i(0, 1.0_f64) - 1.266_065_877_8).abs() < 1e-9);
    }

    #[test]
    fn small_argument_branch_is_continuous() {
        let z = SMALL_Z;
        let series = bessel_i1(z) / z;
        let taylor = 0.5 + z * z / 16.0;
        assert!((series - taylor).abs() < 1e-12);
        assert_eq!(i1_over_z(0.0_f64), 0.5);
    }

    #[test]
    fn kernel_bound_examples() {
        let (p, s) = setup();
        assert_eq!(kernel_bound(0.7, 0.0, 1.0, &p, &s).unwrap(), 0.0);
        let diag = kernel_bound(1.0, 1.0, 0.0, &p, &s).unwrap();
        assert!((diag - 64.166_666_666_7).abs() < 1e-9);
        let z = (std::f64::consts::E * 25.0 * 231.0 * 0.75 / (45.0 * 225.0)).sqrt();
        let expect = 0.5 * 231.0 / 45.0 * 25.0 * bessel_i1(z) / z;
        assert!((kernel_bound(1.0, 0.5, 0.0, &p, &s).unwrap() - expect).abs() < 1e-12);
        assert!(kernel_bound(0.4, 0.5, 0.0, &p, &s).is_err());
    }

    #[test]
    fn mk_at_start() {
        let (p, s) = setup();
        let bp = BoundParams::new(1.0, &s).unwrap();
        let v = gain_envelope_mk(0.0, &bp, &s, p.tension()).unwrap();
        assert!((v - 86.837).abs() < 5e-3, "{v}");
        assert!(gain_envelope_mk(3.0, &bp, &s, p.tension()).is_err());
    }

    #[test]
    fn calibrated_envelope_dominates_bound() {
        let (p, s) = setup();
        let grid = TriGrid::new(21).unwrap();
        let bp = calibrate_ck(&p, &s, grid, &[0.0, 0.9, 1.8, 2.7]).unwrap();
        for &t in &[0.0, 0.5, 1.3, 2.2, 2.9] {
            let mk = gain_envelope_mk(t, &bp, &s, p.tension()).unwrap();
            for i in 0..21 {
                for j in 0..=i {
                    assert!(kernel_bound(grid.node(i), grid.node(j), t, &p, &s).unwrap() <= mk);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn mk_increasing(t1 in 0.0_f64..2.9, d in 1e-4_f64..0.09) {
            let (p, s) = setup();
            let bp = BoundParams::new(1.0, &s).unwrap();
            prop_assert!(gain_envelope_mk(t1, &bp, &s, p.tension()).unwrap() < gain_envelope_mk(t1 + d, &bp, &s, p.tension()).unwrap());
        }

        #[test]
        fn exponential_majorization(x in 0.0_f64..1.0, f in 0.0_f64..1.0, t in 0.0_f64..2.9) {
            let (p, s) = setup();
            let y = x * f;
            let mu = s.mu(t).unwrap();
            let z = bessel_argument(x, y, mu, &p, &s);
            prop_assert!(0.5 * i1_over_z(z) <= exponential_majorant(x, y, t, &p, &s).unwrap());
        }
    }
}

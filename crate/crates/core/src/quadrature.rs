//! Composite trapezoid quadrature and the double-integral identity self-test.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Composite trapezoid rule for samples on a uniform grid with spacing `dx`.
pub fn integrate_1d<S: Scalar>(samples: &[S], dx: S) -> Result<S> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    let n = samples.len();
    let inner: S = samples[1..n - 1].iter().copied().sum();
    Ok(dx * (inner + S::of(0.5) * (samples[0] + samples[n - 1])))
}

/// Trapezoid rule on `[a, b]` with `m` uniform nodes applied to `f`.
pub(crate) fn trapezoid_fn<S: Scalar>(a: S, b: S, m: usize, f: impl Fn(S) -> S) -> S {
    let h = (b - a) / S::of_usize(m - 1);
    let mut acc = S::zero();
    for i in 0..m {
        let w = if i == 0 || i == m - 1 { S::of(0.5) } else { S::one() };
        acc += w * f(a + h * S::of_usize(i));
    }
    acc * h
}

/// Numerical and closed-form values of one double-integral identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityPair<S> {
    pub numeric: S,
    pub closed_form: S,
}

/// Both identities checked by [`integrate_moment_identities`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentIdentities<S> {
    /// `int_0^eta int_0^tau (s tau)^(n-1) (s + tau) ds dtau = eta^(2n+1) / (n (n+1))`.
    pub first: IdentityPair<S>,
    /// `int_eta^xi int_0^eta (s tau)^(n-1) (tau - s) ds dtau = (xi eta)^n (xi - eta) / (n (n+1))`.
    ///
    /// With the factor written as `(s - tau)` the integral is the negative of this closed form,
    /// since `s <= eta <= tau` on the domain.
    pub second: IdentityPair<S>,
}

/// Evaluates both identities by nested trapezoid quadrature with `resolution` nodes per axis.
pub fn integrate_moment_identities<S: Scalar>(n: u32, xi: S, eta: S, resolution: usize) -> Result<MomentIdentities<S>> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if resolution < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: resolution });
    }
    if eta < S::zero() || eta > xi {
        return Err(Error::Domain("identities require 0 <= eta <= xi".into()));
    }
    let k = (n - 1) as i32;
    let integrand = |s: S, tau: S| (s * tau).powi(k) * (s + tau);
    let nn = S::of_usize(n as usize);
    let denom = nn * (nn + S::one());

    let first_num =
        trapezoid_fn(S::zero(), eta, resolution, |tau| trapezoid_fn(S::zero(), tau, resolution, |s| integrand(s, tau)));
    let first_cf = eta.powi(2 * n as i32 + 1) / denom;

    let second_num =
        trapezoid_fn(eta, xi, resolution, |tau| trapezoid_fn(S::zero(), eta, resolution, |s| (s * tau).powi(k) * (tau - s)));
    let second_cf = (xi * eta).powi(n as i32) * (xi - eta) / denom;

    Ok(MomentIdentities {
        first: IdentityPair { numeric: first_num, closed_form: first_cf },
        second: IdentityPair { numeric: second_num, closed_form: second_cf },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trapezoid_examples() {
        let ones = vec![1.0_f64; 7];
        assert!((integrate_1d(&ones, 1.0 / 6.0).unwrap() - 1.0).abs() < 1e-15);
        let lin: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        assert!((integrate_1d(&lin, 0.1).unwrap() - 0.5).abs() < 1e-15);
        let sq: Vec<f64> = (0..101).map(|i| (i as f64 / 100.0).powi(2)).collect();
        assert!((integrate_1d(&sq, 0.01).unwrap() - 1.0 / 3.0).abs() < 2e-5);
        assert!(integrate_1d(&[1.0_f64], 0.1).is_err());
    }

    #[test]
    fn moment_identity_examples() {
        let c = integrate_moment_identities(1, 1.0_f64, 1.0, 11).unwrap();
        assert!((c.first.closed_form - 0.5).abs() < 1e-15);
        let c = integrate_moment_identities(1, 1.0_f64, 0.0, 11).unwrap();
        assert_eq!(c.second.closed_form, 0.0);
        assert_eq!(c.second.numeric, 0.0);
        let c = integrate_moment_identities(2, 1.0_f64, 0.5, 11).unwrap();
        assert!((c.second.closed_form - 0.020_833_333).abs() < 1e-8);
        assert!(integrate_moment_identities(2, 0.5_f64, 1.0, 11).is_err());
    }

    proptest! {
        #[test]
        fn trapezoid_exact_for_affine(a in -10.0_f64..10.0, b in -10.0_f64..10.0, nx in 2usize..60) {
            let dx = 1.0 / (nx - 1) as f64;
            let s: Vec<f64> = (0..nx).map(|i| a + b * i as f64 * dx).collect();
            let v = integrate_1d(&s, dx).unwrap();
            prop_assert!((v - (a + 0.5 * b)).abs() < 1e-12 * (1.0 + a.abs() + b.abs()));
        }
    }
}

//! Prescribed-time gain `mu(t) = mu0^2 T^2 / (T - t)^2`, its derivatives and the decay envelope.

use crate::error::{Error, Result};
use crate::params::{f64_of, PtConfig};
use crate::scalar::Scalar;

/// Gain schedule blowing up at the prescribed time `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSchedule<S> {
    mu0: S,
    horizon: S,
}

impl<S: Scalar> GainSchedule<S> {
    pub fn new(mu0: S, horizon: S) -> Result<Self> {
        if !(mu0 > S::zero() && mu0.is_finite()) {
            return Err(Error::InvalidParameter { name: "mu0", reason: "must be finite and > 0".into() });
        }
        if !(horizon > S::zero() && horizon.is_finite()) {
            return Err(Error::InvalidParameter { name: "horizon", reason: "must be finite and > 0".into() });
        }
        Ok(Self { mu0, horizon })
    }

    pub fn from_config(cfg: &PtConfig<S>) -> Self {
        Self { mu0: cfg.mu0(), horizon: cfg.horizon() }
    }

    pub fn mu0(&self) -> S {
        self.mu0
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    /// `mu0 * T`, the scale appearing in every derivative.
    pub fn scale(&self) -> S {
        self.mu0 * self.horizon
    }

    fn check(&self, t: S) -> Result<()> {
        if t >= S::zero() && t < self.horizon {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t: f64_of(t), lo: 0.0, hi: f64_of(self.horizon) })
        }
    }

    /// `mu(t)` for `0 <= t < T`.
    pub fn mu(&self, t: S) -> Result<S> {
        self.check(t)?;
        Ok(self.mu_unchecked(t))
    }

    /// Analytic continuation of `mu` to any `t < T`, including negative times.
    #[inline]
    pub fn mu_unchecked(&self, t: S) -> S {
        let s = self.scale() / (self.horizon - t);
        s * s
    }

    /// `l`-th derivative `mu^(l/2 + 1) (l + 1)! / (mu0 T)^l`, evaluated in log space.
    pub fn mu_derivative(&self, l: u32, t: S) -> Result<S> {
        self.check(t)?;
        let mu = self.mu_unchecked(t);
        if l == 0 {
            return Ok(mu);
        }
        let lf = S::of(l as f64);
        let mut log_fact = S::zero();
        for k in 2..=(l as usize + 1) {
            log_fact += S::of_usize(k).ln();
        }
        let log_v = (lf / S::of(2.0) + S::one()) * mu.ln() + log_fact - lf * self.scale().ln();
        Ok(log_v.exp())
    }

    /// `exp(-2 r mu0^2 T t / (T - t))`, the combined form of
    /// `exp(2 r mu0^2 T) exp(-2 r mu0^2 T * T / (T - t))` with `r = lambda1 / sigma3`.
    pub fn varsigma(&self, lambda1_over_sigma3: S, t: S) -> Result<S> {
        self.check(t)?;
        let two = S::of(2.0);
        let rate = two * lambda1_over_sigma3 * self.mu0 * self.mu0 * self.horizon;
        Ok((-rate * t / (self.horizon - t)).exp())
    }

    /// `int_0^t mu(s) ds = mu0^2 T t / (T - t)`.
    pub fn mu_integral(&self, t: S) -> Result<S> {
        self.check(t)?;
        Ok(self.mu_unchecked_integral(t))
    }

    /// Unchecked form of [`GainSchedule::mu_integral`].
    pub fn mu_unchecked_integral(&self, t: S) -> S {
        self.mu0 * self.mu0 * self.horizon * t / (self.horizon - t)
    }
}

/// Gain law driving the kernel equations: the prescribed-time schedule or a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainProfile<S> {
    /// Time-varying schedule `mu(t)`.
    PrescribedTime(GainSchedule<S>),
    /// Constant gain (the exponential-stabilization baseline uses `mu0^2`).
    Frozen(S),
}

impl<S: Scalar> GainProfile<S> {
    /// Gain frozen at `mu(0) = mu0^2`.
    pub fn frozen_at_start(sched: &GainSchedule<S>) -> Self {
        GainProfile::Frozen(sched.mu0() * sched.mu0())
    }

    /// Gain value; for the schedule this is the analytic continuation valid for `t < T`.
    #[inline]
    pub fn value(&self, t: S) -> S {
        match self {
            GainProfile::PrescribedTime(s) => s.mu_unchecked(t),
            GainProfile::Frozen(v) => *v,
        }
    }

    /// Factor `D_a` with `d^2/dt^2 mu^a = D_a mu^(a+1)`.
    pub fn power_second_derivative(&self, a: u32) -> S {
        match self {
            GainProfile::PrescribedTime(s) => {
                let a = S::of(a as f64);
                let two = S::of(2.0);
                two * a * (two * a + S::one()) / (s.scale() * s.scale())
            }
            GainProfile::Frozen(_) => S::zero(),
        }
    }

    /// Factor `E_a(t)` with `d/dt mu^a = E_a mu^a`.
    pub fn power_first_derivative(&self, a: u32, t: S) -> S {
        match self {
            GainProfile::PrescribedTime(s) => S::of(2.0) * S::of(a as f64) / (s.horizon() - t),
            GainProfile::Frozen(_) => S::zero(),
        }
    }

    /// Singular time, if any.
    pub fn horizon(&self) -> Option<S> {
        match self {
            GainProfile::PrescribedTime(s) => Some(s.horizon()),
            GainProfile::Frozen(_) => None,
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self, GainProfile::Frozen(_))
    }
}

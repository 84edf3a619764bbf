//! Physical parameters, prescribed-time settings and grids.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn f64_of<S: Scalar>(x: S) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn require(cond: bool, name: &'static str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: reason.to_string() })
    }
}

/// String with a tip payload on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringParams<S> {
    rho0: S,
    tension: S,
    tip_mass: S,
}

impl<S: Scalar> StringParams<S> {
    /// Validates `rho0 > 0`, `tension > 0`, `tip_mass >= 0`.
    pub fn new(rho0: S, tension: S, tip_mass: S) -> Result<Self> {
        require(rho0.is_finite() && rho0 > S::zero(), "rho0", "must be finite and > 0")?;
        require(tension.is_finite() && tension > S::zero(), "tension", "must be finite and > 0")?;
        require(tip_mass.is_finite() && tip_mass >= S::zero(), "tip_mass", "must be finite and >= 0")?;
        Ok(Self { rho0, tension, tip_mass })
    }

    /// `rho0 = 1`, `Tf = 45`, `M = 1`.
    pub fn reference() -> Self {
        Self { rho0: S::one(), tension: S::of(45.0), tip_mass: S::one() }
    }

    pub fn rho0(&self) -> S {
        self.rho0
    }

    pub fn tension(&self) -> S {
        self.tension
    }

    pub fn tip_mass(&self) -> S {
        self.tip_mass
    }

    /// String length, fixed to one.
    pub fn length(&self) -> S {
        S::one()
    }

    /// `sqrt(Tf / rho0)`.
    pub fn wave_speed(&self) -> S {
        (self.tension / self.rho0).sqrt()
    }

    /// One wave round trip, `2 L / c`.
    pub fn minimal_time(&self) -> S {
        S::of(2.0) * self.length() / self.wave_speed()
    }
}

/// Free-function form of [`StringParams::wave_speed`].
pub fn wave_speed<S: Scalar>(params: &StringParams<S>) -> S {
    params.wave_speed()
}

/// Free-function form of [`StringParams::minimal_time`].
pub fn minimal_time<S: Scalar>(params: &StringParams<S>) -> S {
    params.minimal_time()
}

/// Prescribed convergence time, gain base and the stop margin before `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtConfig<S> {
    horizon: S,
    mu0: S,
    eps_stop: S,
}

impl<S: Scalar> PtConfig<S> {
    /// Validates `T > minimal_time`, `mu0 > 0` and `0 < eps_stop < T`.
    pub fn new(params: &StringParams<S>, horizon: S, mu0: S, eps_stop: S) -> Result<Self> {
        require(horizon.is_finite(), "horizon", "must be finite")?;
        require(
            horizon > params.minimal_time(),
            "horizon",
            &format!("must exceed the minimal time {:.6}", f64_of(params.minimal_time())),
        )?;
        require(mu0.is_finite() && mu0 > S::zero(), "mu0", "must be finite and > 0")?;
        require(eps_stop > S::zero() && eps_stop < horizon, "eps_stop", "must lie in (0, T)")?;
        Ok(Self { horizon, mu0, eps_stop })
    }

    /// `T = 3`, `mu0 = 5`, `eps_stop = 0.05`.
    pub fn reference() -> Self {
        Self { horizon: S::of(3.0), mu0: S::of(5.0), eps_stop: S::of(0.05) }
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn mu0(&self) -> S {
        self.mu0
    }

    pub fn eps_stop(&self) -> S {
        self.eps_stop
    }

    /// Last simulated time, `T - eps_stop`.
    pub fn stop_time(&self) -> S {
        self.horizon - self.eps_stop
    }
}

/// Uniform grid on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialGrid {
    nx: usize,
}

impl SpatialGrid {
    /// Requires `nx >= 3`.
    pub fn new(nx: usize) -> Result<Self> {
        require(nx >= 3, "nx", "need at least 3 nodes")?;
        Ok(Self { nx })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx<S: Scalar>(&self) -> S {
        S::one() / S::of_usize(self.nx - 1)
    }

    /// Node `i`, computed as `i / (nx - 1)` so the last node is exactly 1.
    pub fn node<S: Scalar>(&self, i: usize) -> S {
        S::of_usize(i) / S::of_usize(self.nx - 1)
    }

    pub fn nodes<S: Scalar>(&self) -> Vec<S> {
        (0..self.nx).map(|i| self.node(i)).collect()
    }
}

/// Lower triangle `0 <= y <= x <= 1` sampled with `n` nodes per axis.
///
/// Entry `(i, j)` with `j <= i` is stored at `i (i + 1) / 2 + j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriGrid {
    n: usize,
}

impl TriGrid {
    /// Requires `n >= 3`.
    pub fn new(n: usize) -> Result<Self> {
        require(n >= 3, "n", "need at least 3 nodes per axis")?;
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h<S: Scalar>(&self) -> S {
        S::one() / S::of_usize(self.n - 1)
    }

    pub fn node<S: Scalar>(&self, i: usize) -> S {
        S::of_usize(i) / S::of_usize(self.n - 1)
    }

    pub fn len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of `(i, j)`; `None` above the diagonal or outside the grid.
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        (i < self.n && j <= i).then(|| i * (i + 1) / 2 + j)
    }

    #[inline]
    pub(crate) fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i < self.n);
        i * (i + 1) / 2 + j
    }
}

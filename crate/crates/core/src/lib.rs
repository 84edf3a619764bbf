//! Prescribed-time backstepping boundary control of a string with a tip payload.
//!
//! The plant is `rho0 p_tt = Tf p_xx` on `[0, 1]` with `p(0, t) = 0` and the tip dynamics
//! `Tf p_x(1, t) + M p_tt(1, t) = u(t)`. The controller uses a time-varying backstepping kernel
//! driven by `mu(t) = mu0^2 T^2 / (T - t)^2`.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod controller;
pub mod diagnostics;
pub mod error;
pub mod gain;
pub mod kernel_fd;
pub mod params;
pub mod quadrature;
pub mod scalar;
pub mod series;
pub mod simulator;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
pub use gain::{GainProfile, GainSchedule};
pub use kernel_fd::{BoundaryTraces, InverseKernelField, KernelField, TriField};
pub use params::{minimal_time, wave_speed, PtConfig, SpatialGrid, StringParams, TriGrid};
pub use scalar::Scalar;
pub use series::{MonomialTerm, SeriesKernel};
pub use transforms::FieldSnapshot;

pub type StringParams64 = StringParams<f64>;
pub type PtConfig64 = PtConfig<f64>;
pub type GainSchedule64 = GainSchedule<f64>;
pub type GainProfile64 = GainProfile<f64>;
pub type SeriesKernel64 = SeriesKernel<f64>;
pub type KernelField64 = KernelField<f64>;
pub type InverseKernelField64 = InverseKernelField<f64>;
pub type BoundaryTraces64 = BoundaryTraces<f64>;
pub type FieldSnapshot64 = FieldSnapshot<f64>;

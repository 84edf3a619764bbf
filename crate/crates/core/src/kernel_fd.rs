//! Finite-difference kernel solver, inverse kernel and controller traces.
//!
//! The kernel is marched on the characteristic lattice `xi = a h`, `eta = b h` with `t` as a
//! transverse coordinate. Row `eta = 0` carries the diagonal data `-mu xi / (4 Tf)` and the
//! edge `xi = eta` carries `k(x, 0) = 0`. Each step
//! `F(a+1,b+1) = F(a+1,b) + F(a,b+1) - F(a,b) + (h^2/2) (G(a+1,b) + G(a,b+1))`
//! uses `G = (rho0 F_tt + mu F) / (4 Tf)` with a centred `F_tt`, so the valid `t` window
//! shrinks by one level per dependency. The `t` grid is padded on both sides to absorb it.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gain::GainProfile;
use crate::params::{f64_of, StringParams, TriGrid};
use crate::scalar::Scalar;

/// Boundary traces consumed by the control law on a uniform `y` grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTraces<S> {
    pub t: S,
    /// `k(1, 1, t)`.
    pub k11: S,
    /// `k_y(1, 1, t)`.
    pub ky11: S,
    /// `k_x(1, y_j, t)`.
    pub kx_row: Vec<S>,
    /// `k_yy(1, y_j, t)`.
    pub kyy_row: Vec<S>,
}

impl<S: Scalar> BoundaryTraces<S> {
    /// Identically zero traces.
    pub fn zero(t: S, ny: usize) -> Self {
        Self { t, k11: S::zero(), ky11: S::zero(), kx_row: vec![S::zero(); ny], kyy_row: vec![S::zero(); ny] }
    }

    pub fn ny(&self) -> usize {
        self.kx_row.len()
    }

    /// Linear resampling of the rows onto `ny` uniform nodes.
    pub fn resample(&self, ny: usize) -> Result<Self> {
        if ny < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: ny });
        }
        if ny == self.ny() {
            return Ok(self.clone());
        }
        Ok(Self {
            t: self.t,
            k11: self.k11,
            ky11: self.ky11,
            kx_row: resample_uniform(&self.kx_row, ny),
            kyy_row: resample_uniform(&self.kyy_row, ny),
        })
    }

    fn lerp(&self, other: &Self, w: S, t: S) -> Self {
        let mix = |a: S, b: S| a + w * (b - a);
        Self {
            t,
            k11: mix(self.k11, other.k11),
            ky11: mix(self.ky11, other.ky11),
            kx_row: self.kx_row.iter().zip(&other.kx_row).map(|(a, b)| mix(*a, *b)).collect(),
            kyy_row: self.kyy_row.iter().zip(&other.kyy_row).map(|(a, b)| mix(*a, *b)).collect(),
        }
    }
}

pub(crate) fn resample_uniform<S: Scalar>(src: &[S], ny: usize) -> Vec<S> {
    let m = src.len() - 1;
    (0..ny)
        .map(|j| {
            let u = S::of_usize(j) * S::of_usize(m) / S::of_usize(ny - 1);
            let i = u.floor().to_usize().unwrap_or(0).min(m.saturating_sub(1));
            let f = u - S::of_usize(i);
            src[i] + f * (src[i + 1] - src[i])
        })
        .collect()
}

/// Values on a [`TriGrid`] at uniformly spaced time slices starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriField<S> {
    grid: TriGrid,
    slice_dt: S,
    slices: Vec<Vec<S>>,
    stationary: bool,
}

impl<S: Scalar> TriField<S> {
    /// Builds a field from explicit slices; a single slice is treated as time independent.
    pub fn from_slices(grid: TriGrid, slice_dt: S, slices: Vec<Vec<S>>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if slices.iter().any(|s| s.len() != grid.len()) {
            return Err(Error::GridMismatch("slice length differs from triangle size".into()));
        }
        let stationary = slices.len() == 1;
        if !stationary && !(slice_dt > S::zero()) {
            return Err(Error::InvalidParameter { name: "slice_dt", reason: "must be > 0".into() });
        }
        Ok(Self { grid, slice_dt, slices, stationary })
    }

    pub fn grid(&self) -> TriGrid {
        self.grid
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    pub fn slice_count(&self) -> usize {
        self.slices.len()
    }

    pub fn slice_dt(&self) -> S {
        self.slice_dt
    }

    pub fn slice_time(&self, l: usize) -> S {
        S::of_usize(l) * self.slice_dt
    }

    /// Last stored time (zero for a stationary field).
    pub fn t_max(&self) -> S {
        self.slice_time(self.slices.len() - 1)
    }

    pub fn slice(&self, l: usize) -> &[S] {
        &self.slices[l]
    }

    pub fn node(&self, i: usize, j: usize, l: usize) -> S {
        self.slices[l][self.grid.idx(i, j)]
    }

    /// Bracketing slices and weight for `t`.
    pub fn locate(&self, t: S) -> Result<(usize, usize, S)> {
        if self.stationary {
            return Ok((0, 0, S::zero()));
        }
        let tol = self.slice_dt * S::of(1e-9);
        if !(t >= -tol && t <= self.t_max() + tol) {
            return Err(Error::TimeOutOfRange { t: f64_of(t), lo: 0.0, hi: f64_of(self.t_max()) });
        }
        let u = (t / self.slice_dt).max(S::zero());
        let last = self.slices.len() - 1;
        let l = u.floor().to_usize().unwrap_or(0).min(last.saturating_sub(1));
        let w = (u - S::of_usize(l)).min(S::one());
        Ok((l, (l + 1).min(last), w))
    }

    fn sample_slice(&self, l: usize, x: S, y: S) -> S {
        let m = self.grid.n() - 1;
        let ms = S::of_usize(m);
        let u = (x * ms).max(S::zero()).min(ms);
        let v = (y * ms).max(S::zero()).min(u);
        let i = u.floor().to_usize().unwrap_or(0).min(m - 1);
        let j = v.floor().to_usize().unwrap_or(0).min(i);
        let fx = u - S::of_usize(i);
        let fy = v - S::of_usize(j);
        let f = |a: usize, b: usize| self.node(a, b, l);
        let one = S::one();
        if j < i {
            (one - fx) * (one - fy) * f(i, j)
                + fx * (one - fy) * f(i + 1, j)
                + (one - fx) * fy * f(i, j + 1)
                + fx * fy * f(i + 1, j + 1)
        } else {
            let fy = fy.min(fx);
            (one - fx) * f(i, i) + (fx - fy) * f(i + 1, i) + fy * f(i + 1, i + 1)
        }
    }

    /// Piecewise-linear interpolation in `(x, y)` and linear interpolation in `t`.
    pub fn sample(&self, x: S, y: S, t: S) -> Result<S> {
        if y < S::zero() || y > x || x > S::one() {
            return Err(Error::Domain(format!("need 0 <= y <= x <= 1, got x={}, y={}", x, y)));
        }
        let (l0, l1, w) = self.locate(t)?;
        let a = self.sample_slice(l0, x, y);
        if l0 == l1 || w == S::zero() {
            return Ok(a);
        }
        let b = self.sample_slice(l1, x, y);
        Ok(a + w * (b - a))
    }

    /// Lower-triangular matrix of samples at the nodes of an `nx` grid, row-major by `x`.
    pub fn sample_on_grid(&self, nx: usize, t: S) -> Result<Vec<Vec<S>>> {
        let (l0, l1, w) = self.locate(t)?;
        let node = |i: usize| S::of_usize(i) / S::of_usize(nx - 1);
        Ok((0..nx)
            .map(|i| {
                (0..=i)
                    .map(|j| {
                        let a = self.sample_slice(l0, node(i), node(j));
                        if l0 == l1 || w == S::zero() {
                            a
                        } else {
                            a + w * (self.sample_slice(l1, node(i), node(j)) - a)
                        }
                    })
                    .collect()
            })
            .collect())
    }

    /// Time derivative at slice `l` by second-order differences across slices.
    pub fn time_derivative_slice(&self, l: usize) -> Vec<S> {
        let n = self.slices.len();
        if self.stationary || n < 3 {
            return vec![S::zero(); self.grid.len()];
        }
        let two = S::of(2.0);
        let d = two * self.slice_dt;
        let s = &self.slices;
        (0..self.grid.len())
            .map(|k| {
                if l == 0 {
                    (-S::of(3.0) * s[0][k] + S::of(4.0) * s[1][k] - s[2][k]) / d
                } else if l == n - 1 {
                    (S::of(3.0) * s[n - 1][k] - S::of(4.0) * s[n - 2][k] + s[n - 3][k]) / d
                } else {
                    (s[l + 1][k] - s[l - 1][k]) / d
                }
            })
            .collect()
    }

    /// Writes `t,x,y,<name>` rows for every `every`-th slice.
    pub fn write_csv<W: Write>(&self, out: W, name: &str, every: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "y", name])?;
        let every = every.max(1);
        let n = self.grid.n();
        for l in (0..self.slices.len()).step_by(every) {
            let t = f64_of(self.slice_time(l)).to_string();
            for i in 0..n {
                let x = f64_of(self.grid.node::<S>(i)).to_string();
                for j in 0..=i {
                    let y = f64_of(self.grid.node::<S>(j)).to_string();
                    w.write_record([t.as_str(), x.as_str(), y.as_str(), &f64_of(self.node(i, j, l)).to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Kernel `k(x, y, t)` on a triangle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField<S> {
    field: TriField<S>,
    params: StringParams<S>,
    gain: GainProfile<S>,
    solver_dt: S,
}

/// Inverse kernel `r(x, y, t)` on the same grid and slices as its kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseKernelField<S> {
    field: TriField<S>,
    /// Number of sweeps used per slice.
    pub sweeps: Vec<usize>,
}

impl<S: Scalar> KernelField<S> {
    /// Wraps precomputed slices (used for synthetic kernels in tests and tools).
    pub fn from_field(field: TriField<S>, params: StringParams<S>, gain: GainProfile<S>) -> Self {
        let solver_dt = field.slice_dt();
        Self { field, params, gain, solver_dt }
    }

    pub fn field(&self) -> &TriField<S> {
        &self.field
    }

    pub fn params(&self) -> &StringParams<S> {
        &self.params
    }

    pub fn gain(&self) -> &GainProfile<S> {
        &self.gain
    }

    pub fn solver_dt(&self) -> S {
        self.solver_dt
    }

    pub fn grid(&self) -> TriGrid {
        self.field.grid()
    }

    pub fn t_max(&self) -> S {
        self.field.t_max()
    }

    /// Controller traces at slice `l`.
    pub fn slice_traces(&self, l: usize) -> BoundaryTraces<S> {
        let t = if self.field.is_stationary() { S::zero() } else { self.field.slice_time(l) };
        let grid = self.grid();
        let m = grid.n() - 1;
        let h = grid.h::<S>();
        let f = |i: usize, j: usize| self.field.node(i, j, l);
        let (two, three, four, five) = (S::of(2.0), S::of(3.0), S::of(4.0), S::of(5.0));
        let k11 = -self.gain.value(t) / (two * self.params.tension());
        let ky11 = (three * f(m, m) - four * f(m, m - 1) + f(m, m - 2)) / (two * h);
        let mut kx_row = vec![S::zero(); m + 1];
        for (j, v) in kx_row.iter_mut().enumerate().take(m - 1) {
            *v = (three * f(m, j) - four * f(m - 1, j) + f(m - 2, j)) / (two * h);
        }
        kx_row[m] = k11 - ky11;
        kx_row[m - 1] = if m >= 4 {
            S::of(0.25) * kx_row[m - 4] - kx_row[m - 3] + S::of(1.5) * kx_row[m - 2] + S::of(0.25) * kx_row[m]
        } else {
            S::of(0.5) * (kx_row[m - 2] + kx_row[m])
        };
        let row: Vec<S> = (0..=m).map(|j| f(m, j)).collect();
        let h2 = h * h;
        let mut kyy_row = vec![S::zero(); m + 1];
        for j in 1..m {
            kyy_row[j] = (row[j + 1] - two * row[j] + row[j - 1]) / h2;
        }
        if m >= 3 {
            kyy_row[0] = (two * row[0] - five * row[1] + four * row[2] - row[3]) / h2;
            kyy_row[m] = (two * row[m] - five * row[m - 1] + four * row[m - 2] - row[m - 3]) / h2;
        } else {
            kyy_row[0] = (row[0] - two * row[1] + row[2]) / h2;
            kyy_row[m] = (row[m] - two * row[m - 1] + row[m - 2]) / h2;
        }
        BoundaryTraces { t, k11, ky11, kx_row, kyy_row }
    }

    /// Traces at time `t`, linearly interpolated between stored slices.
    pub fn boundary_traces(&self, t: S) -> Result<BoundaryTraces<S>> {
        let (l0, l1, w) = self.field.locate(t)?;
        let a = self.slice_traces(l0);
        let mut out = if l0 == l1 || w == S::zero() { a } else { a.lerp(&self.slice_traces(l1), w, t) };
        out.t = t;
        if !self.field.is_stationary() {
            out.k11 = -self.gain.value(t) / (S::of(2.0) * self.params.tension());
        }
        Ok(out)
    }

    /// Clamps `t` into the stored range (no-op for a stationary field).
    pub fn clamp_time(&self, t: S) -> S {
        if self.field.is_stationary() {
            t
        } else {
            t.max(S::zero()).min(self.t_max())
        }
    }

    /// `k_t` sampled on an `nx` grid by a centred difference across slices at `t`.
    pub fn time_derivative_matrix(&self, nx: usize, t: S) -> Result<Vec<Vec<S>>> {
        if self.field.is_stationary() || self.field.slice_count() < 2 {
            return Ok((0..nx).map(|i| vec![S::zero(); i + 1]).collect());
        }
        let d = self.field.slice_dt();
        let lo = (t - d).max(S::zero());
        let hi = (t + d).min(self.t_max());
        let a = self.field.sample_on_grid(nx, lo)?;
        let b = self.field.sample_on_grid(nx, hi)?;
        let span = hi - lo;
        Ok(a.iter().zip(&b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (*y - *x) / span).collect()).collect())
    }

    /// Writes `t,x,y,k` rows.
    pub fn write_csv<W: Write>(&self, out: W, every: usize) -> Result<()> {
        self.field.write_csv(out, "k", every)
    }
}

impl<S: Scalar> InverseKernelField<S> {
    pub fn field(&self) -> &TriField<S> {
        &self.field
    }

    /// Writes `t,x,y,r` rows.
    pub fn write_csv<W: Write>(&self, out: W, every: usize) -> Result<()> {
        self.field.write_csv(out, "r", every)
    }
}

/// Default transverse step, `0.7 h / c`.
pub fn default_kernel_dt<S: Scalar>(params: &StringParams<S>, grid: TriGrid) -> S {
    S::of(0.7) * grid.h::<S>() / params.wave_speed()
}

/// Smallest stable transverse step, `h / (2 c)`.
pub fn min_kernel_dt<S: Scalar>(params: &StringParams<S>, grid: TriGrid) -> S {
    grid.h::<S>() / (S::of(2.0) * params.wave_speed())
}

/// Window shrink per lattice node: `(shrink of the value, shrink of its G)`.
fn shrink_table(m: usize) -> (Vec<Vec<(usize, usize)>>, usize) {
    let width = 2 * m + 1;
    let mut rows = Vec::with_capacity(m + 1);
    let mut row0 = vec![(0usize, 1usize); width];
    row0[0] = (0, 0);
    let mut pad = 0;
    rows.push(row0);
    for b in 0..m {
        let prev = &rows[b];
        let mut cur = vec![(0usize, 0usize); width];
        cur[b + 1] = (0, 0);
        if 2 * m >= b + 2 {
            for a in (b + 1)..=(2 * m - b - 2) {
                let s = prev[a + 1].1.max(cur[a].1).max(prev[a].0);
                cur[a + 1] = (s, s + 1);
                pad = pad.max(s);
            }
        }
        rows.push(cur);
    }
    (rows, pad)
}

/// Number of padding levels the march consumes on a grid with `n` nodes per axis.
pub fn window_padding(grid: TriGrid) -> usize {
    shrink_table(grid.n() - 1).1 + 1
}

/// Largest `t_end` reachable for a prescribed-time gain with transverse step `dt`.
pub fn max_kernel_time<S: Scalar>(gain: &GainProfile<S>, grid: TriGrid, dt: S) -> Option<S> {
    gain.horizon().map(|h| h - S::of_usize(window_padding(grid)) * dt)
}

/// Solves the kernel with one stored slice per transverse step.
pub fn solve_kernel_fd<S: Scalar>(
    params: &StringParams<S>,
    gain: &GainProfile<S>,
    grid: TriGrid,
    dt: S,
    t_end: S,
) -> Result<KernelField<S>> {
    solve_kernel_fd_strided(params, gain, grid, dt, t_end, 1)
}

/// Solves the kernel on `[0, t_end]`, storing every `stride`-th transverse level.
///
/// The stored range is rounded up to a whole number of strides. For a frozen gain the
/// solution is time independent and a single slice is returned.
pub fn solve_kernel_fd_strided<S: Scalar>(
    params: &StringParams<S>,
    gain: &GainProfile<S>,
    grid: TriGrid,
    dt: S,
    t_end: S,
    stride: usize,
) -> Result<KernelField<S>> {
    let stride = stride.max(1);
    let m = grid.n() - 1;
    let h = grid.h::<S>();
    let stationary = gain.is_stationary();
    let (shrink, pad) = if stationary { (Vec::new(), 0) } else { shrink_table(m) };
    let (pad, n_out) = if stationary {
        (0, 0)
    } else {
        if !(t_end >= S::zero()) {
            return Err(Error::InvalidParameter { name: "t_end", reason: "must be >= 0".into() });
        }
        if !(dt >= min_kernel_dt(params, grid) * S::of(1.0 - 1e-12)) {
            return Err(Error::CflViolation {
                dt: f64_of(dt),
                reason: format!("characteristic march needs dt >= h/(2c) = {:.6e}", f64_of(min_kernel_dt(params, grid))),
            });
        }
        let chunks = (t_end / (dt * S::of_usize(stride)) - S::of(1e-9)).ceil().max(S::zero());
        let n_out = chunks.to_usize().unwrap_or(0) * stride;
        let pad = pad + 1;
        if let Some(hz) = gain.horizon() {
            let reach = S::of_usize(n_out + pad) * dt;
            if !(reach < hz) {
                return Err(Error::HorizonExceeded { reach: f64_of(reach), limit: f64_of(hz) });
            }
        }
        (pad, n_out)
    };
    let levels = if stationary { 1 } else { n_out + 2 * pad + 1 };
    let four_tf = S::of(4.0) * params.tension();
    let rho0 = params.rho0();
    let half_h2 = h * h / S::of(2.0);
    let inv_dt2 = if stationary { S::zero() } else { S::one() / (dt * dt) };
    let mu: Vec<S> = (0..levels)
        .map(|l| if stationary { gain.value(S::zero()) } else { gain.value(S::of(l as f64 - pad as f64) * dt) })
        .collect();
    let range = |s: usize| if stationary { (0, 0) } else { (s, levels - 1 - s) };
    let gain_range = |s: usize| if stationary { (0, 0) } else { (s + 1, levels - 2 - s) };

    let n_slices = if stationary { 1 } else { n_out / stride + 1 };
    let mut out: Vec<Vec<S>> = vec![vec![S::zero(); grid.len()]; n_slices];
    let store = |out: &mut Vec<Vec<S>>, a: usize, b: usize, vals: &[S]| {
        if (a + b).is_multiple_of(2) && a + b <= 2 * m {
            let i = (a + b) / 2;
            let j = (a - b) / 2;
            let k = grid.idx(i, j);
            for (q, slot) in out.iter_mut().enumerate() {
                slot[k] = vals[pad + q * stride];
            }
        }
    };
    let shrink_of = |a: usize, b: usize| if stationary { (0, 0) } else { shrink[b][a] };
    let compute_g = |f: &[S], s: usize, edge: bool| -> Vec<S> {
        let mut g = vec![S::zero(); levels];
        if edge {
            return g;
        }
        if stationary {
            g[0] = mu[0] * f[0] / four_tf;
            return g;
        }
        let (lo, hi) = gain_range(s);
        for l in lo..=hi {
            let ftt = (f[l + 1] - S::of(2.0) * f[l] + f[l - 1]) * inv_dt2;
            g[l] = (rho0 * ftt + mu[l] * f[l]) / four_tf;
        }
        g
    };

    let width = 2 * m + 1;
    let mut f_prev: Vec<Vec<S>> = (0..width).map(|a| mu.iter().map(|&mv| -mv * S::of_usize(a) * h / four_tf).collect()).collect();
    let mut g_prev: Vec<Vec<S>> = (0..width).map(|a| compute_g(&f_prev[a], shrink_of(a, 0).0, a == 0)).collect();
    for (a, vals) in f_prev.iter().enumerate() {
        store(&mut out, a, 0, vals);
    }
    for b in 0..m {
        let mut f_cur: Vec<Vec<S>> = vec![Vec::new(); width];
        let mut g_cur: Vec<Vec<S>> = vec![Vec::new(); width];
        f_cur[b + 1] = vec![S::zero(); levels];
        g_cur[b + 1] = vec![S::zero(); levels];
        store(&mut out, b + 1, b + 1, &f_cur[b + 1]);
        if 2 * m >= b + 2 {
            for a in (b + 1)..=(2 * m - b - 2) {
                let s = shrink_of(a + 1, b + 1).0;
                let (lo, hi) = range(s);
                let mut vals = vec![S::zero(); levels];
                {
                    let (fr, fc, fd) = (&f_prev[a + 1], &f_cur[a], &f_prev[a]);
                    let (gr, gc) = (&g_prev[a + 1], &g_cur[a]);
                    for l in lo..=hi {
                        vals[l] = fr[l] + fc[l] - fd[l] + half_h2 * (gr[l] + gc[l]);
                    }
                }
                g_cur[a + 1] = compute_g(&vals, s, false);
                store(&mut out, a + 1, b + 1, &vals);
                f_cur[a + 1] = vals;
            }
        }
        f_prev = f_cur;
        g_prev = g_cur;
    }

    if out.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Instability { t: f64_of(t_end) });
    }
    let field = TriField { grid, slice_dt: dt * S::of_usize(stride), slices: out, stationary };
    Ok(KernelField { field, params: *params, gain: *gain, solver_dt: dt })
}

/// Maximum number of sweeps per slice for the inverse kernel.
pub const MAX_INVERSE_SWEEPS: usize = 500;
/// Relative stopping tolerance for the inverse kernel.
pub const INVERSE_TOLERANCE: f64 = 1e-10;

fn inverse_slice<S: Scalar>(grid: TriGrid, k: &[S], t: f64) -> Result<(Vec<S>, usize)> {
    let n = grid.n();
    let h = grid.h::<S>();
    let half = S::of(0.5);
    let mut r = k.to_vec();
    let tol = S::of(INVERSE_TOLERANCE);
    for sweep in 1..=MAX_INVERSE_SWEEPS {
        let mut change = S::zero();
        let mut sup = S::zero();
        for j in 0..n {
            for i in (j + 1)..n {
                let mut acc = half * k[grid.idx(i, j)] * r[grid.idx(j, j)];
                for g in (j + 1)..i {
                    acc += k[grid.idx(i, g)] * r[grid.idx(g, j)];
                }
                let new = (k[grid.idx(i, j)] + h * acc) / (S::one() - half * h * k[grid.idx(i, i)]);
                let slot = &mut r[grid.idx(i, j)];
                change = change.max((new - *slot).abs());
                *slot = new;
                sup = sup.max(new.abs());
            }
        }
        if !change.is_finite() {
            return Err(Error::NoConvergence { t, iterations: sweep });
        }
        if change <= tol * sup.max(S::one()) {
            return Ok((r, sweep));
        }
    }
    Err(Error::NoConvergence { t, iterations: MAX_INVERSE_SWEEPS })
}

/// Sup norm of `r - k - int_y^x k(x, g) r(g, y) dg` on one slice (trapezoid in `g`).
pub fn inverse_residual<S: Scalar>(grid: TriGrid, k: &[S], r: &[S]) -> S {
    let n = grid.n();
    let h = grid.h::<S>();
    let half = S::of(0.5);
    let mut worst = S::zero();
    for i in 0..n {
        for j in 0..=i {
            let mut acc = S::zero();
            if i > j {
                acc = half * (k[grid.idx(i, j)] * r[grid.idx(j, j)] + k[grid.idx(i, i)] * r[grid.idx(i, j)]);
                for g in (j + 1)..i {
                    acc += k[grid.idx(i, g)] * r[grid.idx(g, j)];
                }
            }
            let res = r[grid.idx(i, j)] - k[grid.idx(i, j)] - h * acc;
            worst = worst.max(res.abs());
        }
    }
    worst
}

/// Inverse kernel from the Volterra relation `r = k + int_y^x k(x, g) r(g, y) dg`.
///
/// Each slice runs in-place sweeps in increasing `x` (one column `y_j` at a time), solving the
/// trapezoid self-term `h k(x, x) r(x, y) / 2` implicitly, until the
/// sup-norm change falls below `1e-10 * max(1, sup |r|)`. Slices are processed in parallel.
pub fn solve_inverse_kernel<S: Scalar>(k: &KernelField<S>) -> Result<InverseKernelField<S>> {
    let field = k.field();
    let grid = field.grid();
    let results: Vec<Result<(Vec<S>, usize)>> = (0..field.slice_count())
        .into_par_iter()
        .map(|l| inverse_slice(grid, field.slice(l), f64_of(field.slice_time(l))))
        .collect();
    let mut slices = Vec::with_capacity(results.len());
    let mut sweeps = Vec::with_capacity(results.len());
    for r in results {
        let (s, n) = r?;
        slices.push(s);
        sweeps.push(n);
    }
    let field = TriField { grid, slice_dt: field.slice_dt(), slices, stationary: field.is_stationary() };
    Ok(InverseKernelField { field, sweeps })
}

/// Sup residual of `rho0 r_tt - Tf (r_xx - r_yy) - mu r` over interior nodes of slice `l`,
/// together with the sup of `|Tf r_xx|` for scale.
pub fn inverse_pde_residual<S: Scalar>(k: &KernelField<S>, r: &InverseKernelField<S>, l: usize) -> (S, S) {
    let f = r.field();
    let grid = f.grid();
    let n = grid.n();
    let h2 = grid.h::<S>() * grid.h::<S>();
    let two = S::of(2.0);
    let tf = k.params().tension();
    let nl = f.slice_count();
    let t = f.slice_time(l);
    let mu = k.gain().value(if f.is_stationary() { S::zero() } else { t });
    let (mut worst, mut scale) = (S::zero(), S::zero());
    for i in 2..n - 1 {
        for j in 1..i - 1 {
            let v = |a: usize, b: usize, q: usize| f.node(a, b, q);
            let rxx = (v(i + 1, j, l) - two * v(i, j, l) + v(i - 1, j, l)) / h2;
            let ryy = (v(i, j + 1, l) - two * v(i, j, l) + v(i, j - 1, l)) / h2;
            let rtt = if f.is_stationary() || l == 0 || l + 1 >= nl {
                S::zero()
            } else {
                (v(i, j, l + 1) - two * v(i, j, l) + v(i, j, l - 1)) / (f.slice_dt() * f.slice_dt())
            };
            let res = k.params().rho0() * rtt - tf * (rxx - ryy) - mu * v(i, j, l);
            worst = worst.max(res.abs());
            scale = scale.max((tf * rxx).abs());
        }
    }
    (worst, scale)
}

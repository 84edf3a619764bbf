//! Explicit three-level simulation of the plant and of the target system.

use crate::controller::{backstepping_control, ControlSample};
use crate::diagnostics::energy_from_velocity;
use crate::error::{Error, Result};
use crate::gain::{GainProfile, GainSchedule};
use crate::kernel_fd::{max_kernel_time, solve_kernel_fd_strided, KernelField, TriField};
use crate::params::{f64_of, PtConfig, SpatialGrid, StringParams, TriGrid};
use crate::scalar::Scalar;
use crate::transforms::{apply_volterra, FieldSnapshot, KernelSource};

/// Field shapes used as initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Zero,
    /// `-x (x - 1) / 2`.
    Parabola,
    /// `sin(pi x / 2)`.
    QuarterSine,
    /// `2 x^2 (1 - x)`.
    Cubic,
}

impl Profile {
    pub fn eval<S: Scalar>(&self, x: S) -> S {
        match self {
            Profile::Zero => S::zero(),
            Profile::Parabola => -S::of(0.5) * x * (x - S::one()),
            Profile::QuarterSine => (S::FRAC_PI_2() * x).sin(),
            Profile::Cubic => S::of(2.0) * x * x * (S::one() - x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Zero => "zero",
            Profile::Parabola => "parabola",
            Profile::QuarterSine => "quarter_sine",
            Profile::Cubic => "cubic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(Profile::Zero),
            "parabola" => Some(Profile::Parabola),
            "quarter_sine" => Some(Profile::QuarterSine),
            "cubic" => Some(Profile::Cubic),
            _ => None,
        }
    }
}

/// Two consecutive time levels of the string displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState<S> {
    prev: Vec<S>,
    curr: Vec<S>,
    t: S,
    dt: S,
}

/// Plant step `0.9 dx / c`.
pub fn default_plant_dt<S: Scalar>(params: &StringParams<S>, grid: SpatialGrid) -> S {
    S::of(0.9) * grid.dx::<S>() / params.wave_speed()
}

fn check_cfl<S: Scalar>(params: &StringParams<S>, grid: SpatialGrid, dt: S) -> Result<()> {
    let limit = grid.dx::<S>() / params.wave_speed();
    if !(dt > S::zero() && dt <= limit * S::of(1.0 + 1e-12)) {
        return Err(Error::CflViolation { dt: f64_of(dt), reason: format!("need 0 < dt <= dx/c = {:.6e}", f64_of(limit)) });
    }
    Ok(())
}

fn second_difference<S: Scalar>(f: &impl Fn(S) -> S, x: S, dx: S) -> S {
    (f(x + dx) - S::of(2.0) * f(x) + f(x - dx)) / (dx * dx)
}

/// Tip value enforcing `Tf p_x(1) = u` with the one-sided slope.
fn massless_tip<S: Scalar>(values: &[S], u: S, dx: S, tension: S) -> S {
    let n = values.len();
    (S::of(2.0) * dx * u / tension + S::of(4.0) * values[n - 2] - values[n - 3]) / S::of(3.0)
}

/// Second-order one-sided slope at `x = 1`.
pub fn right_slope<S: Scalar>(values: &[S], dx: S) -> S {
    let n = values.len();
    (S::of(3.0) * values[n - 1] - S::of(4.0) * values[n - 2] + values[n - 3]) / (S::of(2.0) * dx)
}

/// Samples `p0` and builds `p(-dt)` by a second-order Taylor start.
///
/// Interior nodes use `p0 - dt v0 + (dt^2/2)(Tf/rho0) p0''`. The tip uses the acceleration of
/// its own equation, `(tip_force - Tf p0'(1)) / M`; for `M = 0` the slope condition is imposed.
pub fn init_state<S: Scalar>(
    grid: SpatialGrid,
    params: &StringParams<S>,
    p0: impl Fn(S) -> S,
    v0: impl Fn(S) -> S,
    dt: S,
    tip_force: S,
) -> Result<WaveState<S>> {
    check_cfl(params, grid, dt)?;
    let nx = grid.nx();
    let dx = grid.dx::<S>();
    let c2 = params.tension() / params.rho0();
    let half = S::of(0.5);
    let mut curr: Vec<S> = (0..nx).map(|i| p0(grid.node(i))).collect();
    curr[0] = S::zero();
    let mut prev = vec![S::zero(); nx];
    for i in 1..nx - 1 {
        let x = grid.node(i);
        prev[i] = curr[i] - dt * v0(x) + half * dt * dt * c2 * second_difference(&p0, x, dx);
    }
    if params.tip_mass() > S::zero() {
        let acc = (tip_force - params.tension() * right_slope(&curr, dx)) / params.tip_mass();
        prev[nx - 1] = curr[nx - 1] - dt * v0(S::one()) + half * dt * dt * acc;
    } else {
        prev[nx - 1] = massless_tip(&prev, tip_force, dx, params.tension());
    }
    Ok(WaveState { prev, curr, t: S::zero(), dt })
}

impl<S: Scalar> WaveState<S> {
    pub fn t(&self) -> S {
        self.t
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    pub fn current(&self) -> FieldSnapshot<S> {
        FieldSnapshot::new(self.t, self.curr.clone())
    }

    pub fn previous(&self) -> FieldSnapshot<S> {
        FieldSnapshot::new(self.t - self.dt, self.prev.clone())
    }

    pub fn values(&self) -> &[S] {
        &self.curr
    }

    pub fn previous_values(&self) -> &[S] {
        &self.prev
    }

    /// Slope `p_x(1, t)` of the current level.
    pub fn tip_slope(&self) -> S {
        right_slope(&self.curr, S::one() / S::of_usize(self.curr.len() - 1))
    }

    fn next_level(&self, u: S, params: &StringParams<S>, damping: impl Fn(S) -> S) -> Result<Vec<S>> {
        let n = self.curr.len();
        let dx = S::one() / S::of_usize(n - 1);
        let r2 = params.tension() / params.rho0() * self.dt * self.dt / (dx * dx);
        let two = S::of(2.0);
        let dt2 = self.dt * self.dt;
        let (p, q) = (&self.curr, &self.prev);
        let mut next = vec![S::zero(); n];
        for i in 1..n - 1 {
            next[i] = two * p[i] - q[i] + r2 * (p[i + 1] - two * p[i] + p[i - 1]) - dt2 * damping(p[i]);
        }
        next[n - 1] = if params.tip_mass() > S::zero() {
            two * p[n - 1] - q[n - 1] + dt2 / params.tip_mass() * (u - params.tension() * right_slope(p, dx))
        } else {
            massless_tip(&next, u, dx, params.tension())
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability { t: f64_of(self.t + self.dt) });
        }
        Ok(next)
    }

    fn advance_with(&mut self, next: Vec<S>) {
        self.prev = std::mem::replace(&mut self.curr, next);
        self.t += self.dt;
    }

    /// Advances the plant one step with boundary force `u`.
    pub fn advance(&mut self, u: S, params: &StringParams<S>) -> Result<()> {
        let next = self.next_level(u, params, |_| S::zero())?;
        self.advance_with(next);
        Ok(())
    }
}

/// Functional form of [`WaveState::advance`].
pub fn step<S: Scalar>(state: &WaveState<S>, u: Option<ControlSample<S>>, params: &StringParams<S>) -> Result<WaveState<S>> {
    let mut next = state.clone();
    next.advance(u.map_or(S::zero(), |c| c.u), params)?;
    Ok(next)
}

/// Simulated configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// `u = 0`.
    OpenLoop,
    /// Prescribed-time law with the time-varying kernel.
    ClosedLoop,
    /// Same law with the kernel of the frozen gain `mu0^2`.
    Baseline,
    /// Target system `rho0 v_tt = Tf v_xx - mu v`, `Tf v_x(1) = -M v_tt(1)`, from the induced data.
    Target,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::OpenLoop => "open",
            Scenario::ClosedLoop => "closed",
            Scenario::Baseline => "baseline",
            Scenario::Target => "target",
        }
    }
}

/// Resolution and run settings of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSetup<S> {
    pub params: StringParams<S>,
    pub pt: PtConfig<S>,
    pub nx: usize,
    pub kernel_n: usize,
    /// Plant step as a fraction of `dx / c`.
    pub plant_dt_factor: S,
    /// Kernel transverse step as a fraction of `h / c`.
    pub kernel_dt_factor: S,
    pub t_end: S,
    /// Record a snapshot every `snapshot_stride` steps.
    pub snapshot_stride: usize,
    pub initial: Profile,
    pub initial_velocity: Profile,
}

impl<S: Scalar> SimulationSetup<S> {
    /// Reference string and schedule, `nx = 201`, `n = 51`, run to `T - eps_stop`.
    pub fn reference() -> Self {
        let pt = PtConfig::reference();
        Self {
            params: StringParams::reference(),
            pt,
            nx: 201,
            kernel_n: 51,
            plant_dt_factor: S::of(0.9),
            kernel_dt_factor: S::of(0.7),
            t_end: pt.stop_time(),
            snapshot_stride: 20,
            initial: Profile::Parabola,
            initial_velocity: Profile::Zero,
        }
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.nx)
    }

    pub fn tri_grid(&self) -> Result<TriGrid> {
        TriGrid::new(self.kernel_n)
    }

    pub fn schedule(&self) -> GainSchedule<S> {
        GainSchedule::from_config(&self.pt)
    }

    pub fn plant_dt(&self) -> Result<S> {
        let grid = self.grid()?;
        Ok(self.plant_dt_factor * grid.dx::<S>() / self.params.wave_speed())
    }

    pub fn kernel_dt(&self) -> Result<S> {
        let grid = self.tri_grid()?;
        Ok(self.kernel_dt_factor * grid.h::<S>() / self.params.wave_speed())
    }

    /// Checks every precondition of the scenario before any work starts.
    pub fn validate(&self, scenario: Scenario) -> Result<()> {
        let grid = self.grid()?;
        let tri = self.tri_grid()?;
        PtConfig::new(&self.params, self.pt.horizon(), self.pt.mu0(), self.pt.eps_stop())?;
        check_cfl(&self.params, grid, self.plant_dt()?)?;
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter { name: "snapshot_stride", reason: "must be >= 1".into() });
        }
        if !(self.t_end > S::zero()) {
            return Err(Error::InvalidParameter { name: "t_end", reason: "must be > 0".into() });
        }
        if matches!(scenario, Scenario::ClosedLoop | Scenario::Target) && self.t_end > self.pt.stop_time() * S::of(1.0 + 1e-12) {
            return Err(Error::InvalidParameter { name: "t_end", reason: "must not exceed T - eps_stop".into() });
        }
        if matches!(scenario, Scenario::ClosedLoop | Scenario::Target) {
            let dt = self.kernel_dt()?;
            let min = crate::kernel_fd::min_kernel_dt(&self.params, tri);
            if dt < min * S::of(1.0 - 1e-12) {
                return Err(Error::CflViolation {
                    dt: f64_of(dt),
                    reason: format!("kernel march needs dt >= h/(2c) = {:.6e}", f64_of(min)),
                });
            }
            let g = GainProfile::PrescribedTime(self.schedule());
            if max_kernel_time(&g, tri, dt).is_none_or(|t| t <= S::zero()) {
                return Err(Error::HorizonExceeded { reach: f64_of(self.pt.horizon()), limit: f64_of(self.pt.horizon()) });
            }
        }
        Ok(())
    }

    /// Solves the kernel needed by `scenario` on `[0, min(t_end, reachable)]`.
    pub fn solve_kernel(&self, scenario: Scenario) -> Result<Option<KernelField<S>>> {
        let tri = self.tri_grid()?;
        let sched = self.schedule();
        match scenario {
            Scenario::OpenLoop => Ok(None),
            Scenario::Baseline => {
                let g = GainProfile::frozen_at_start(&sched);
                Ok(Some(solve_kernel_fd_strided(&self.params, &g, tri, S::zero(), S::zero(), 1)?))
            }
            Scenario::ClosedLoop | Scenario::Target => {
                let g = GainProfile::PrescribedTime(sched);
                let dt = self.kernel_dt()?;
                let reach = max_kernel_time(&g, tri, dt).expect("time-varying gain");
                let t_end = match scenario {
                    Scenario::Target => S::of(4.0) * dt,
                    _ => self.t_end.min(reach - S::of(1.01) * dt),
                };
                Ok(Some(solve_kernel_fd_strided(&self.params, &g, tri, dt, t_end, 1)?))
            }
        }
    }
}

/// One recorded state with its centred nodal velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRecord<S> {
    pub state: FieldSnapshot<S>,
    pub velocity: Vec<S>,
}

/// Per-step scalar history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSample<S> {
    pub t: S,
    pub l2: S,
    pub ek: S,
    pub ep: S,
    pub u: S,
}

/// Output of [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub scenario: Scenario,
    pub dt: S,
    /// Displacement `p`, or `v` for the target scenario.
    pub records: Vec<StateRecord<S>>,
    pub norms: Vec<NormSample<S>>,
    pub controls: Vec<ControlSample<S>>,
    /// Time from which the kernel traces are held at the last solved slice.
    pub trace_hold_from: Option<S>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn initial_norm(&self) -> S {
        self.norms.first().map_or(S::zero(), |n| n.l2)
    }

    pub fn final_sample(&self) -> Option<&NormSample<S>> {
        self.norms.last()
    }
}

fn induced_target_data<S: Scalar>(
    kernel: &KernelField<S>,
    p0: &FieldSnapshot<S>,
    v0: &FieldSnapshot<S>,
) -> Result<(FieldSnapshot<S>, FieldSnapshot<S>)> {
    let nx = p0.nx();
    let k0 = kernel.sample_matrix(nx, S::zero())?;
    let f = kernel.field();
    let kt = TriField::from_slices(f.grid(), S::zero(), vec![f.time_derivative_slice(0)])?;
    let kt0 = kt.sample_on_grid(nx, S::zero())?;
    let v_init = apply_volterra(p0, &k0, -S::one())?;
    let vt = apply_volterra(v0, &k0, -S::one())?;
    let ktp = apply_volterra(&FieldSnapshot::new(S::zero(), p0.values.clone()), &kt0, -S::one())?;
    let vt_values: Vec<S> = vt.values.iter().zip(ktp.values.iter().zip(&p0.values)).map(|(a, (b, p))| *a + (*b - *p)).collect();
    Ok((v_init, FieldSnapshot::new(S::zero(), vt_values)))
}

/// Runs `scenario` from the configured initial data to `t_end`.
///
/// Closed-loop and baseline runs evaluate the control from kernel traces at every step; the
/// kernel is solved here when `kernel` is `None`. Past the last solved kernel slice the traces
/// are held constant and the hold time is reported.
pub fn simulate<S: Scalar>(
    scenario: Scenario,
    setup: &SimulationSetup<S>,
    kernel: Option<&KernelField<S>>,
) -> Result<Trajectory<S>> {
    setup.validate(scenario)?;
    let owned;
    let kernel = match (scenario, kernel) {
        (Scenario::OpenLoop, _) => None,
        (_, Some(k)) => Some(k),
        (_, None) => {
            owned = setup.solve_kernel(scenario)?;
            owned.as_ref()
        }
    };
    let grid = setup.grid()?;
    let nx = grid.nx();
    let params = setup.params;
    let base_dt = setup.plant_dt()?;
    let steps = (setup.t_end / base_dt - S::of(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    let dt = setup.t_end / S::of_usize(steps);
    let sched = setup.schedule();
    let p0 = FieldSnapshot::from_fn(S::zero(), nx, |x| setup.initial.eval(x));
    let v0 = FieldSnapshot::from_fn(S::zero(), nx, |x| setup.initial_velocity.eval(x));

    let mut trace_hold_from = None;
    let control = |state: &WaveState<S>, hold: &mut Option<S>| -> Result<S> {
        let k = match (scenario, kernel) {
            (Scenario::ClosedLoop | Scenario::Baseline, Some(k)) => k,
            _ => return Ok(S::zero()),
        };
        let t = state.t();
        let tq = if k.field().is_stationary() { t } else { t.min(k.t_max()) };
        if tq < t && hold.is_none() {
            *hold = Some(tq);
        }
        let mut tr = k.boundary_traces(tq)?.resample(nx)?;
        tr.t = t;
        Ok(backstepping_control(&state.current(), state.tip_slope(), &tr, &params)?.u)
    };

    let (mut state, mu_of): (WaveState<S>, Box<dyn Fn(S) -> S>) = if scenario == Scenario::Target {
        let k = kernel.expect("target scenario has a kernel");
        let (vi, vti) = induced_target_data(k, &p0, &v0)?;
        let c2 = params.tension() / params.rho0();
        let mu0 = sched.mu_unchecked(S::zero());
        let dx = grid.dx::<S>();
        let half = S::of(0.5);
        let mut prev = vec![S::zero(); nx];
        for i in 1..nx - 1 {
            let vxx = (vi.values[i + 1] - S::of(2.0) * vi.values[i] + vi.values[i - 1]) / (dx * dx);
            let acc = c2 * vxx - mu0 / params.rho0() * vi.values[i];
            prev[i] = vi.values[i] - dt * vti.values[i] + half * dt * dt * acc;
        }
        if params.tip_mass() > S::zero() {
            let acc = -params.tension() * right_slope(&vi.values, dx) / params.tip_mass();
            prev[nx - 1] = vi.values[nx - 1] - dt * vti.values[nx - 1] + half * dt * dt * acc;
        } else {
            prev[nx - 1] = massless_tip(&prev, S::zero(), dx, params.tension());
        }
        check_cfl(&params, grid, dt)?;
        (WaveState { prev, curr: vi.values, t: S::zero(), dt }, Box::new(move |t: S| sched.mu_unchecked(t) / params.rho0()))
    } else {
        let probe = init_state(grid, &params, |x| setup.initial.eval(x), |x| setup.initial_velocity.eval(x), dt, S::zero())?;
        let u0 = control(&probe, &mut trace_hold_from)?;
        let st = init_state(grid, &params, |x| setup.initial.eval(x), |x| setup.initial_velocity.eval(x), dt, u0)?;
        (st, Box::new(|_| S::zero()))
    };

    let mut records = Vec::new();
    let mut norms = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let two_dt = S::of(2.0) * dt;
    for n in 0..=steps {
        let u = control(&state, &mut trace_hold_from)?;
        let mu = mu_of(state.t());
        let next = state.next_level(u, &params, |p| mu * p)?;
        let velocity: Vec<S> = next.iter().zip(state.previous_values()).map(|(a, b)| (*a - *b) / two_dt).collect();
        let snap = state.current();
        let (ek, ep) = energy_from_velocity(&snap, &velocity, &params)?;
        norms.push(NormSample { t: snap.t, l2: snap.l2_norm(), ek, ep, u });
        controls.push(ControlSample { t: snap.t, u });
        if n % setup.snapshot_stride == 0 || n == steps {
            records.push(StateRecord { state: snap, velocity });
        }
        if n < steps {
            state.advance_with(next);
        }
    }
    Ok(Trajectory { scenario, dt, records, norms, controls, trace_hold_from })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_norm_and_zero_dynamics() {
        let params = StringParams::<f64>::reference();
        let grid = SpatialGrid::new(201).unwrap();
        let dt = default_plant_dt(&params, grid);
        let s = init_state(grid, &params, |x| Profile::Parabola.eval(x), |_| 0.0, dt, 0.0).unwrap();
        assert!((s.current().l2_norm() - (1.0_f64 / 120.0).sqrt()).abs() < 1e-5);
        let mut z = init_state(grid, &params, |_| 0.0, |_| 0.0, dt, 0.0).unwrap();
        for _ in 0..500 {
            z.advance(0.0, &params).unwrap();
            assert!(z.values().iter().all(|v| *v == 0.0));
        }
        assert!(init_state(grid, &params, |x| Profile::QuarterSine.eval(x), |_| 0.0, dt, 0.0).is_ok());
        assert!(init_state(grid, &params, |x: f64| x, |_| 0.0, 2.0 * dt, 0.0).is_err());
    }

    #[test]
    fn pinned_end_stays_zero() {
        let params = StringParams::<f64>::reference();
        let grid = SpatialGrid::new(101).unwrap();
        let mut s =
            init_state(grid, &params, |x| Profile::Cubic.eval(x), |x: f64| x, default_plant_dt(&params, grid), 0.0).unwrap();
        for k in 0..300 {
            s.advance((k as f64 * 0.1).sin(), &params).unwrap();
            assert_eq!(s.values()[0], 0.0);
        }
    }

    #[test]
    fn massless_tip_imposes_slope() {
        let params = StringParams::<f64>::new(1.0, 45.0, 0.0).unwrap();
        let grid = SpatialGrid::new(101).unwrap();
        let mut s =
            init_state(grid, &params, |x| Profile::Parabola.eval(x), |_| 0.0, default_plant_dt(&params, grid), 0.0).unwrap();
        s.advance(9.0, &params).unwrap();
        assert!((45.0 * s.tip_slope() - 9.0).abs() < 1e-10);
    }

    /// Lowest mode `sin(w x) cos(c w t)` with `w tan w = rho0 / M` for the reference string.
    fn mode_frequency() -> f64 {
        let (mut lo, mut hi) = (0.1_f64, 1.5_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.tan() < 1.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        lo
    }

    fn run_mode(nx: usize, t_end: f64) -> Vec<f64> {
        let params = StringParams::<f64>::reference();
        let grid = SpatialGrid::new(nx).unwrap();
        let w = mode_frequency();
        let steps = (t_end / default_plant_dt(&params, grid)).ceil() as usize;
        let dt = t_end / steps as f64;
        let mut s = init_state(grid, &params, |x| (w * x).sin(), |_| 0.0, dt, 0.0).unwrap();
        for _ in 0..steps {
            s.advance(0.0, &params).unwrap();
        }
        s.values().to_vec()
    }

    #[test]
    fn open_loop_scheme_is_second_order() {
        let w = mode_frequency();
        let c = StringParams::<f64>::reference().wave_speed();
        let t_end = 0.8;
        let exact = |x: f64| (w * x).sin() * (c * w * t_end).cos();
        let err = |nx: usize| {
            run_mode(nx, t_end).iter().enumerate().fold(0.0_f64, |a, (i, v)| a.max((v - exact(i as f64 / (nx - 1) as f64)).abs()))
        };
        let (e1, e2) = (err(51), err(101));
        assert!(e1 / e2 >= 3.0, "{e1} {e2}");
        let reference = run_mode(801, t_end);
        let ref_err = |nx: usize| {
            let stride = 800 / (nx - 1);
            run_mode(nx, t_end).iter().enumerate().fold(0.0_f64, |a, (i, v)| a.max((v - reference[i * stride]).abs()))
        };
        assert!(ref_err(51) / ref_err(101) >= 3.0);
    }

    #[test]
    fn step_function_matches_advance() {
        let params = StringParams::<f64>::reference();
        let grid = SpatialGrid::new(21).unwrap();
        let s = init_state(grid, &params, |x| Profile::Parabola.eval(x), |_| 0.0, default_plant_dt(&params, grid), 0.0).unwrap();
        let a = step(&s, Some(ControlSample { t: 0.0, u: 0.3 }), &params).unwrap();
        let mut b = s.clone();
        b.advance(0.3, &params).unwrap();
        assert_eq!(a, b);
    }
}

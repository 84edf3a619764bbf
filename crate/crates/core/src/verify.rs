//! Acceptance checks with pinned tolerances, shared by the test suite and the CLI.
//!
//! Every check reports the measured quantities next to their limits. Solver errors become
//! failing checks rather than panics so a report can always be produced.

use rayon::prelude::*;

use crate::bounds::{bessel_i1, calibrate_ck, kernel_bound, BoundParams};
use crate::diagnostics::{evaluate_trajectory, DiagnosticSample, LyapunovWeights};
use crate::error::Result;
use crate::gain::{GainProfile, GainSchedule};
use crate::kernel_fd::{inverse_residual, solve_inverse_kernel, solve_kernel_fd_strided, InverseKernelField, KernelField};
use crate::params::{minimal_time, PtConfig, StringParams, TriGrid};
use crate::quadrature::integrate_moment_identities;
use crate::series::SeriesKernel;
use crate::simulator::{simulate, Profile, Scenario, SimulationSetup, Trajectory};
use crate::transforms::{forward_transform, inverse_transform, FieldSnapshot};

/// Pinned limits of the acceptance criteria.
pub mod tol {
    pub const MINIMAL_TIME: f64 = 0.29814;
    pub const MINIMAL_TIME_TOL: f64 = 1e-4;
    pub const SERIES_DIAGONAL: f64 = 1e-12;
    pub const FD_DIAGONAL: f64 = 1e-3;
    pub const ORACLE_REL: f64 = 0.02;
    pub const REFINEMENT_GAIN: f64 = 3.0;
    pub const BESSEL: f64 = 1e-6;
    pub const BESSEL_I1_1: f64 = 0.5651591;
    pub const BESSEL_I1_2: f64 = 1.5906369;
    pub const MOMENT_IDENTITY: f64 = 1e-6;
    pub const MOMENT_RESOLUTION: usize = 1001;
    pub const GAIN_DERIVATIVE_REL: f64 = 1e-4;
    pub const ENERGY_DRIFT: f64 = 0.01;
    pub const DECAY_RATIO: f64 = 0.05;
    pub const ROUND_TRIP: f64 = 1e-3;
    pub const FIXED_POINT: f64 = 1e-8;
    pub const CONTROL_TAIL_RATIO: f64 = 0.1;
    /// FD kernel may exceed the analytic bound by this factor (discretisation slack).
    pub const FD_BOUND_SLACK: f64 = 1.05;
    /// Relative ripple allowed in the non-increasing `V` trend.
    pub const LYAPUNOV_RIPPLE: f64 = 0.02;
}

/// One measured quantity against its limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Metric {
    /// Passes when `value <= limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, passed: value <= limit }
    }

    /// Passes when `value >= limit`.
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, passed: value >= limit }
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// Acceptance criterion number, or `None` for a module property.
    pub criterion: Option<u8>,
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    /// Informational checks are reported but do not decide the exit status.
    pub gating: bool,
    pub metrics: Vec<Metric>,
    pub note: String,
}

impl Check {
    fn from_metrics(criterion: Option<u8>, name: &str, metrics: Vec<Metric>, note: String) -> Self {
        let passed = !metrics.is_empty() && metrics.iter().all(|m| m.passed);
        Self { criterion, name: name.into(), passed, skipped: false, gating: true, metrics, note }
    }

    fn failed(criterion: Option<u8>, name: &str, note: String) -> Self {
        Self { criterion, name: name.into(), passed: false, skipped: false, gating: true, metrics: Vec::new(), note }
    }

    fn skipped(criterion: Option<u8>, name: &str, note: &str) -> Self {
        Self { criterion, name: name.into(), passed: false, skipped: true, gating: true, metrics: Vec::new(), note: note.into() }
    }

    fn informational(mut self) -> Self {
        self.gating = false;
        self
    }

    /// `true` unless this is a gating check that failed or was skipped.
    pub fn acceptable(&self) -> bool {
        !self.gating || self.passed
    }

    /// `PASS criterion 3: oracle agreement (rel_err_n51=4.3e-4 <= 2e-2, ...)`.
    pub fn summary_line(&self) -> String {
        let verdict = if self.skipped {
            "SKIP"
        } else if self.passed {
            "PASS"
        } else if self.gating {
            "FAIL"
        } else {
            "INFO"
        };
        let label = match self.criterion {
            Some(c) => format!("criterion {c}: {}", self.name),
            None => self.name.clone(),
        };
        let metrics: Vec<String> = self
            .metrics
            .iter()
            .map(|m| format!("{}={:.6e} (limit {:.3e}{})", m.name, m.value, m.limit, if m.passed { "" } else { ", violated" }))
            .collect();
        let mut line = format!("{verdict} {label}");
        if !metrics.is_empty() {
            line.push_str(&format!(" [{}]", metrics.join(", ")));
        }
        if !self.note.is_empty() {
            line.push_str(&format!(" {}", self.note));
        }
        line
    }
}

fn guarded(criterion: Option<u8>, name: &str, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::failed(criterion, name, format!("error: {e}")))
}

fn reference_parts() -> (StringParams<f64>, GainSchedule<f64>) {
    let params = StringParams::reference();
    let sched = GainSchedule::from_config(&PtConfig::reference());
    (params, sched)
}

/// Criterion 1: one wave round trip for the reference string.
pub fn check_minimal_time() -> Check {
    let tm = minimal_time(&StringParams::<f64>::reference());
    let err = (tm - tol::MINIMAL_TIME).abs();
    Check::from_metrics(
        Some(1),
        "minimal time",
        vec![Metric::at_most("abs_err", err, tol::MINIMAL_TIME_TOL)],
        format!("T_min={tm:.7}"),
    )
}

/// Criterion 2: diagonal condition for the series oracle (20 samples) and the FD solver at `n = 51`.
pub fn check_kernel_diagonal() -> Check {
    guarded(Some(2), "kernel diagonal", || {
        let (params, sched) = reference_parts();
        let gain = GainProfile::PrescribedTime(sched);
        let t_hi = 0.9 * sched.horizon();
        let oracle = SeriesKernel::with_tolerance(&params, &gain, t_hi, 1e-12)?;
        let mut series_err = 0.0_f64;
        for k in 0..20 {
            let x = (k + 1) as f64 / 20.0;
            let t = t_hi * k as f64 / 19.0;
            let exact = -sched.mu(t)? * x / (2.0 * params.tension());
            series_err = series_err.max((oracle.eval(x, x, t)? - exact).abs());
        }
        let grid = TriGrid::new(51)?;
        let dt = 0.7 * grid.h::<f64>() / params.wave_speed();
        let fd = solve_kernel_fd_strided(&params, &gain, grid, dt, t_hi, 10)?;
        let mut fd_err = 0.0_f64;
        for l in 0..fd.field().slice_count() {
            let t = fd.field().slice_time(l);
            let mu = sched.mu(t)?;
            for i in 0..grid.n() {
                let x = grid.node::<f64>(i);
                fd_err = fd_err.max((fd.field().node(i, i, l) + mu * x / (2.0 * params.tension())).abs());
            }
        }
        Ok(Check::from_metrics(
            Some(2),
            "kernel diagonal",
            vec![
                Metric::at_most("series_abs_err", series_err, tol::SERIES_DIAGONAL),
                Metric::at_most("fd_abs_err", fd_err, tol::FD_DIAGONAL),
            ],
            format!("series order {}", oracle.order()),
        ))
    })
}

/// Worst per-slice `sup |k_fd - k_series| / sup |k_series|` over slices with `t <= t_max`.
pub fn fd_oracle_error(fd: &KernelField<f64>, oracle: &SeriesKernel<f64>, t_max: f64) -> Result<f64> {
    let f = fd.field();
    let grid = f.grid();
    let errs: Vec<Result<f64>> = (0..f.slice_count())
        .into_par_iter()
        .filter(|&l| f.slice_time(l) <= t_max + 1e-12)
        .map(|l| {
            let t = f.slice_time(l);
            let (mut diff, mut scale) = (0.0_f64, 0.0_f64);
            for i in 0..grid.n() {
                for j in 0..=i {
                    let exact = oracle.eval(grid.node(i), grid.node(j), t)?;
                    diff = diff.max((f.node(i, j, l) - exact).abs());
                    scale = scale.max(exact.abs());
                }
            }
            Ok(if scale > 0.0 { diff / scale } else { diff })
        })
        .collect();
    let mut worst = 0.0_f64;
    for e in errs {
        worst = worst.max(e?);
    }
    Ok(worst)
}

/// Criterion 3: FD versus oracle on `[0, 0.8T]` at `n = 51`, and the gain from halving the steps.
pub fn check_oracle_agreement() -> Check {
    guarded(Some(3), "oracle agreement", || {
        let (params, sched) = reference_parts();
        let gain = GainProfile::PrescribedTime(sched);
        let t_hi = 0.8 * sched.horizon();
        let oracle = SeriesKernel::with_tolerance(&params, &gain, t_hi, 1e-10)?;
        let mut errs = Vec::new();
        for (n, stride) in [(51usize, 12usize), (101, 24)] {
            let grid = TriGrid::new(n)?;
            let dt = 0.7 * grid.h::<f64>() / params.wave_speed();
            let fd = solve_kernel_fd_strided(&params, &gain, grid, dt, t_hi, stride)?;
            errs.push(fd_oracle_error(&fd, &oracle, t_hi)?);
        }
        let gain_ratio = errs[0] / errs[1].max(f64::MIN_POSITIVE);
        Ok(Check::from_metrics(
            Some(3),
            "oracle agreement",
            vec![
                Metric::at_most("rel_err_n51", errs[0], tol::ORACLE_REL),
                Metric::at_least("refinement_gain", gain_ratio, tol::REFINEMENT_GAIN),
            ],
            format!("rel_err_n101={:.3e}", errs[1]),
        ))
    })
}

/// Criterion 4: oracle magnitude against the closed-form bound on the `51 x 51` grid.
pub fn check_kernel_bound() -> Check {
    guarded(Some(4), "kernel bound", || {
        let (params, sched) = reference_parts();
        let gain = GainProfile::PrescribedTime(sched);
        let times: Vec<f64> = [0.0, 0.3, 0.6, 0.9].iter().map(|f| f * sched.horizon()).collect();
        let oracle = SeriesKernel::with_tolerance(&params, &gain, times[3], 1e-12)?;
        let grid = TriGrid::new(51)?;
        let mut violations = 0usize;
        let mut min_ratio = f64::INFINITY;
        for &t in &times {
            for i in 0..grid.n() {
                for j in 0..=i {
                    let (x, y) = (grid.node::<f64>(i), grid.node::<f64>(j));
                    let k = oracle.eval(x, y, t)?.abs();
                    let b = kernel_bound(x, y, t, &params, &sched)?;
                    if k > b {
                        violations += 1;
                    }
                    if k > 0.0 {
                        min_ratio = min_ratio.min(b / k);
                    }
                }
            }
        }
        Ok(Check::from_metrics(
            Some(4),
            "kernel bound",
            vec![Metric::at_most("violations", violations as f64, 0.0)],
            format!("min bound/|k| = {min_ratio:.3}"),
        ))
    })
}

/// Criterion 5: modified Bessel function values.
pub fn check_bessel() -> Check {
    let e1 = (bessel_i1(1.0_f64) - tol::BESSEL_I1_1).abs();
    let e2 = (bessel_i1(2.0_f64) - tol::BESSEL_I1_2).abs();
    Check::from_metrics(
        Some(5),
        "bessel",
        vec![Metric::at_most("abs_err_z1", e1, tol::BESSEL), Metric::at_most("abs_err_z2", e2, tol::BESSEL)],
        String::new(),
    )
}

/// Criterion 6: the two integral identities for `n = 1..5` on sample points inside the domain.
pub fn check_moment_identities() -> Check {
    guarded(Some(6), "integral identities", || {
        let points: [(f64, f64); 4] = [(1.5, 0.5), (1.2, 0.8), (0.9, 0.3), (0.4, 0.1)];
        let mut worst = 0.0_f64;
        for n in 1..=5u32 {
            for &(xi, eta) in &points {
                let c = integrate_moment_identities(n, xi, eta, tol::MOMENT_RESOLUTION)?;
                worst = worst.max((c.first.numeric - c.first.closed_form).abs());
                worst = worst.max((c.second.numeric - c.second.closed_form).abs());
            }
        }
        Ok(Check::from_metrics(
            Some(6),
            "integral identities",
            vec![Metric::at_most("abs_err", worst, tol::MOMENT_IDENTITY)],
            String::new(),
        ))
    })
}

/// Criterion 7: closed-form gain derivatives against centred differences at 10 times in `[0, 0.8T]`.
pub fn check_gain_derivatives() -> Check {
    guarded(Some(7), "gain derivatives", || {
        let (_, sched) = reference_parts();
        let (mut e1, mut e2) = (0.0_f64, 0.0_f64);
        for k in 0..10 {
            let t = 0.8 * sched.horizon() * k as f64 / 9.0;
            let mu = |s: f64| sched.mu_unchecked(s);
            let h1 = 1e-5;
            let d1 = (mu(t + h1) - mu(t - h1)) / (2.0 * h1);
            let h2 = 1e-3;
            let d2 = (mu(t + h2) - 2.0 * mu(t) + mu(t - h2)) / (h2 * h2);
            let a1 = sched.mu_derivative(1, t)?;
            let a2 = sched.mu_derivative(2, t)?;
            e1 = e1.max(((d1 - a1) / a1).abs());
            e2 = e2.max(((d2 - a2) / a2).abs());
        }
        Ok(Check::from_metrics(
            Some(7),
            "gain derivatives",
            vec![
                Metric::at_most("rel_err_l1", e1, tol::GAIN_DERIVATIVE_REL),
                Metric::at_most("rel_err_l2", e2, tol::GAIN_DERIVATIVE_REL),
            ],
            String::new(),
        ))
    })
}

/// Criterion 8: `max |E - E0| / E0` of an uncontrolled run.
pub fn check_open_loop(traj: &Trajectory<f64>) -> Check {
    let e0 = traj.norms.first().map_or(0.0, |n| n.ek + n.ep);
    let drift = traj.norms.iter().map(|n| (n.ek + n.ep - e0).abs()).fold(0.0_f64, f64::max) / e0.max(f64::MIN_POSITIVE);
    let t_end = traj.final_sample().map_or(0.0, |n| n.t);
    Check::from_metrics(
        Some(8),
        "open-loop conservation",
        vec![Metric::at_most("energy_drift", drift, tol::ENERGY_DRIFT)],
        format!("E0={e0:.6}, run to t={t_end:.3}"),
    )
}

/// Peak norm in consecutive windows of length at most `T_min` covering `[T/2, T - eps_stop]`.
pub fn late_window_peaks(traj: &Trajectory<f64>, pt: &PtConfig<f64>, t_min: f64) -> Vec<f64> {
    let (lo, hi) = (0.5 * pt.horizon(), pt.stop_time());
    let count = ((hi - lo) / t_min).ceil().max(1.0) as usize;
    let width = (hi - lo) / count as f64;
    let mut peaks = vec![0.0_f64; count];
    for n in &traj.norms {
        if n.t >= lo - 1e-12 && n.t <= hi + 1e-12 {
            let w = (((n.t - lo) / width).floor() as usize).min(count - 1);
            peaks[w] = peaks[w].max(n.l2);
        }
    }
    peaks
}

fn decay_metrics(label: &str, traj: &Trajectory<f64>, pt: &PtConfig<f64>, t_min: f64) -> (Vec<Metric>, f64) {
    let n0 = traj.initial_norm();
    let fin = traj.final_sample().map_or(f64::NAN, |n| n.l2);
    let ratio = fin / n0;
    let peaks = late_window_peaks(traj, pt, t_min);
    let rises = peaks.windows(2).filter(|w| !(w[1] <= w[0])).count();
    let ratio_metric =
        Metric { name: format!("{label}norm_ratio"), value: ratio, limit: tol::DECAY_RATIO, passed: ratio <= tol::DECAY_RATIO };
    (vec![ratio_metric, Metric::at_most(format!("{label}late_envelope_rises"), rises as f64, 0.0)], fin)
}

/// Criterion 9: decay of the closed-loop norm and a monotone late-time envelope.
pub fn check_closed_loop_decay(traj: &Trajectory<f64>, setup: &SimulationSetup<f64>) -> Check {
    let (metrics, fin) = decay_metrics("", traj, &setup.pt, setup.params.minimal_time());
    let peaks = late_window_peaks(traj, &setup.pt, setup.params.minimal_time());
    let peaks: Vec<String> = peaks.iter().map(|p| format!("{p:.3e}")).collect();
    let hold = traj.trace_hold_from.map(|t| format!(", traces held from t={t:.4}")).unwrap_or_default();
    Check::from_metrics(
        Some(9),
        "closed-loop decay",
        metrics,
        format!("||p0||={:.4e}, ||p(end)||={fin:.4e}, window peaks [{}]{hold}", traj.initial_norm(), peaks.join(", ")),
    )
}

/// Criterion 10: the decay threshold for every listed initial profile.
pub fn check_ic_independence(runs: &[(Profile, Trajectory<f64>)], setup: &SimulationSetup<f64>) -> Check {
    let mut metrics = Vec::new();
    for (p, traj) in runs {
        let (m, _) = decay_metrics(&format!("{}_", p.name()), traj, &setup.pt, setup.params.minimal_time());
        metrics.push(m.into_iter().next().expect("ratio metric"));
    }
    let note = format!("{} profiles", runs.len());
    let mut c = Check::from_metrics(Some(10), "initial-condition independence", metrics, note);
    if runs.len() < 3 {
        c.passed = false;
    }
    c
}

/// Criterion 11: `inverse(forward(p0))` at `t = 0` and the fixed-point residual of every slice.
pub fn check_round_trip(kernel: &KernelField<f64>, inverse: &InverseKernelField<f64>, nx: usize, p0: Profile) -> Check {
    guarded(Some(11), "transform round trip", || {
        let p = FieldSnapshot::from_fn(0.0, nx, |x| p0.eval(x));
        let v = forward_transform(&p, kernel)?;
        let back = inverse_transform(&v, inverse)?;
        let err = p.values.iter().zip(&back.values).map(|(a, b)| (a - b).abs()).fold(0.0_f64, f64::max);
        let f = kernel.field();
        let residual = (0..f.slice_count())
            .into_par_iter()
            .map(|l| inverse_residual(f.grid(), f.slice(l), inverse.field().slice(l)))
            .reduce(|| 0.0, f64::max);
        Ok(Check::from_metrics(
            Some(11),
            "transform round trip",
            vec![
                Metric::at_most("round_trip_sup_err", err, tol::ROUND_TRIP),
                Metric::at_most("fixed_point_residual", residual, tol::FIXED_POINT),
            ],
            format!(
                "{} slices up to t={:.4}, max sweeps {}",
                f.slice_count(),
                kernel.t_max(),
                inverse.sweeps.iter().max().unwrap_or(&0)
            ),
        ))
    })
}

/// Criterion 12: bracketing of `V` and the Poincare inequality on every evaluated snapshot.
pub fn check_inequalities(runs: &[(&str, &[DiagnosticSample<f64>])]) -> Check {
    let (mut total, mut bracket_fail, mut poincare_fail) = (0usize, 0usize, 0usize);
    for (_, samples) in runs {
        for s in samples.iter() {
            total += 1;
            if !s.lyapunov_bracket_holds() {
                bracket_fail += 1;
            }
            if !s.poincare_holds() {
                poincare_fail += 1;
            }
        }
    }
    let names: Vec<&str> = runs.iter().map(|(n, _)| *n).collect();
    let mut c = Check::from_metrics(
        Some(12),
        "lyapunov bracketing and poincare",
        vec![
            Metric::at_most("bracketing_violations", bracket_fail as f64, 0.0),
            Metric::at_most("poincare_violations", poincare_fail as f64, 0.0),
        ],
        format!("{total} snapshots from runs [{}]", names.join(", ")),
    );
    if total == 0 {
        c.passed = false;
    }
    c
}

/// Criterion 13: finite control with a small terminal value relative to its peak.
pub fn check_bounded_control(traj: &Trajectory<f64>) -> Check {
    let peak = traj.controls.iter().map(|c| c.u.abs()).fold(0.0_f64, |a, b| if b.is_finite() { a.max(b) } else { f64::INFINITY });
    let last = traj.controls.last().map_or(f64::NAN, |c| c.u.abs());
    let finite = if peak.is_finite() { 0.0 } else { 1.0 };
    let ratio = last / peak;
    Check::from_metrics(
        Some(13),
        "bounded control",
        vec![Metric::at_most("non_finite", finite, 0.0), Metric::at_most("terminal_over_peak", ratio, tol::CONTROL_TAIL_RATIO)],
        format!("max|u|={peak:.4e}, |u(end)|={last:.4e}"),
    )
}

/// FD kernel magnitude against `1.05` times the closed-form bound for `t <= 0.9T`.
pub fn check_fd_bound(kernel: &KernelField<f64>, sched: &GainSchedule<f64>) -> Check {
    guarded(None, "fd kernel within bound", || {
        let f = kernel.field();
        let grid = f.grid();
        let params = kernel.params();
        let t_hi = 0.9 * sched.horizon();
        let mut violations = 0usize;
        for l in (0..f.slice_count()).step_by(10) {
            let t = f.slice_time(l);
            if t > t_hi {
                break;
            }
            for i in 0..grid.n() {
                for j in 0..=i {
                    let b = kernel_bound(grid.node(i), grid.node(j), t, params, sched)?;
                    if f.node(i, j, l).abs() > tol::FD_BOUND_SLACK * b {
                        violations += 1;
                    }
                }
            }
        }
        Ok(Check::from_metrics(
            None,
            "fd kernel within bound",
            vec![Metric::at_most("violations", violations as f64, 0.0)],
            String::new(),
        ))
    })
}

/// `||v|| <= sqrt(2V/(sigma2 Tf))` on every snapshot (reported only).
pub fn check_norm_bound(runs: &[(&str, &[DiagnosticSample<f64>])], tension: f64) -> Check {
    let bad: usize = runs.iter().map(|(_, s)| s.iter().filter(|d| !d.norm_bound_holds(tension)).count()).sum();
    Check::from_metrics(
        None,
        "target norm below lyapunov bound",
        vec![Metric::at_most("violations", bad as f64, 0.0)],
        String::new(),
    )
    .informational()
}

/// Largest relative rise of `V` on the closed-loop run after the first `T_min` (reported only).
pub fn check_lyapunov_trend(samples: &[DiagnosticSample<f64>], t_min: f64) -> Check {
    let mut worst = 0.0_f64;
    let mut best = f64::INFINITY;
    for s in samples.iter().filter(|s| s.t >= t_min) {
        let v = s.lyapunov.v;
        if best.is_finite() && best > 0.0 {
            worst = worst.max((v - best) / best);
        }
        best = best.min(v);
    }
    Check::from_metrics(
        None,
        "lyapunov value non-increasing",
        vec![Metric::at_most("max_relative_rise", worst, tol::LYAPUNOV_RIPPLE)],
        String::new(),
    )
    .informational()
}

/// Length of the prefix on which the decay envelope exists (reported only).
pub fn check_envelope_window(weights: &LyapunovWeights<f64>, sched: &GainSchedule<f64>) -> Check {
    let end = crate::diagnostics::envelope_validity_end(weights, sched);
    let note = match end {
        Some(t) => format!("lambda1 > 0 on [0, {t:.4})"),
        None => "lambda1 <= 0 already at t = 0 for these weights".into(),
    };
    Check::from_metrics(
        None,
        "decay envelope validity window",
        vec![Metric::at_least("valid_until", end.unwrap_or(0.0), sched.horizon())],
        note,
    )
    .informational()
}

type DiagnosticJob<'a> = (String, &'a Trajectory<f64>, Option<&'a KernelField<f64>>);

/// Every run the suite evaluates, computed once.
#[derive(Debug, Clone)]
pub struct SuiteRuns {
    pub setup: SimulationSetup<f64>,
    pub kernel: KernelField<f64>,
    pub inverse: InverseKernelField<f64>,
    pub open_loop: Trajectory<f64>,
    pub closed_loop: Vec<(Profile, Trajectory<f64>)>,
    pub baseline: Trajectory<f64>,
    pub target: Trajectory<f64>,
    pub weights: LyapunovWeights<f64>,
    pub bound_params: BoundParams<f64>,
    /// Per-run snapshot diagnostics, in the order open, closed..., baseline, target.
    pub diagnostics: Vec<(String, Vec<DiagnosticSample<f64>>)>,
}

/// Initial profiles of the independence sweep.
pub const SWEEP_PROFILES: [Profile; 3] = [Profile::Parabola, Profile::QuarterSine, Profile::Cubic];

impl SuiteRuns {
    /// Solves the closed-loop kernel once and runs every scenario from `setup`.
    ///
    /// The open-loop run extends to `T`; the closed-loop runs cover [`SWEEP_PROFILES`] in parallel.
    pub fn compute(setup: &SimulationSetup<f64>) -> Result<Self> {
        setup.validate(Scenario::ClosedLoop)?;
        let kernel = setup.solve_kernel(Scenario::ClosedLoop)?.expect("closed loop uses a kernel");
        let inverse = solve_inverse_kernel(&kernel)?;
        let mut open_setup = setup.clone();
        open_setup.t_end = setup.pt.horizon();
        let open_loop = simulate(Scenario::OpenLoop, &open_setup, None)?;
        let closed: Vec<Result<(Profile, Trajectory<f64>)>> = SWEEP_PROFILES
            .par_iter()
            .map(|&p| {
                let mut s = setup.clone();
                s.initial = p;
                simulate(Scenario::ClosedLoop, &s, Some(&kernel)).map(|t| (p, t))
            })
            .collect();
        let closed_loop = closed.into_iter().collect::<Result<Vec<_>>>()?;
        let baseline = simulate(Scenario::Baseline, setup, None)?;
        let target = simulate(Scenario::Target, setup, None)?;
        let params = setup.params;
        let sched = setup.schedule();
        let weights = LyapunovWeights::default_for(&params);
        let times: Vec<f64> = (0..=9).map(|k| 0.09 * sched.horizon() * k as f64).collect();
        let bound_params = calibrate_ck(&params, &sched, setup.tri_grid()?, &times)?;
        let base_kernel = setup.solve_kernel(Scenario::Baseline)?;
        let mut jobs: Vec<DiagnosticJob> = vec![("open".into(), &open_loop, None)];
        for (p, t) in &closed_loop {
            jobs.push((format!("closed_{}", p.name()), t, Some(&kernel)));
        }
        jobs.push(("baseline".into(), &baseline, base_kernel.as_ref()));
        jobs.push(("target".into(), &target, None));
        let diagnostics = jobs
            .par_iter()
            .map(|(name, traj, k)| {
                evaluate_trajectory(traj, *k, &weights, &params, &sched, &bound_params).map(|d| (name.clone(), d))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            setup: setup.clone(),
            kernel,
            inverse,
            open_loop,
            closed_loop,
            baseline,
            target,
            weights,
            bound_params,
            diagnostics,
        })
    }

    /// The reference-profile closed-loop run.
    pub fn reference_closed_loop(&self) -> &Trajectory<f64> {
        &self.closed_loop[0].1
    }

    fn diagnostic_views(&self) -> Vec<(&str, &[DiagnosticSample<f64>])> {
        self.diagnostics.iter().map(|(n, d)| (n.as_str(), d.as_slice())).collect()
    }

    pub fn check_open_loop(&self) -> Check {
        check_open_loop(&self.open_loop)
    }

    pub fn check_closed_loop_decay(&self) -> Check {
        check_closed_loop_decay(self.reference_closed_loop(), &self.setup)
    }

    pub fn check_ic_independence(&self) -> Check {
        check_ic_independence(&self.closed_loop, &self.setup)
    }

    pub fn check_round_trip(&self) -> Check {
        check_round_trip(&self.kernel, &self.inverse, self.setup.nx, self.setup.initial)
    }

    pub fn check_inequalities(&self) -> Check {
        check_inequalities(&self.diagnostic_views())
    }

    pub fn check_bounded_control(&self) -> Check {
        check_bounded_control(self.reference_closed_loop())
    }

    /// Module properties reported next to the criteria.
    pub fn property_checks(&self) -> Vec<Check> {
        let sched = self.setup.schedule();
        let closed = &self.diagnostics[1].1;
        vec![
            check_fd_bound(&self.kernel, &sched),
            check_norm_bound(&self.diagnostic_views(), self.setup.params.tension()),
            check_lyapunov_trend(closed, self.setup.params.minimal_time()),
            check_envelope_window(&self.weights, &sched),
        ]
    }
}

/// Validates `setup` for every scenario the suite runs.
pub fn check_configuration(setup: &SimulationSetup<f64>) -> Check {
    let errs: Vec<String> = [Scenario::OpenLoop, Scenario::ClosedLoop, Scenario::Baseline, Scenario::Target]
        .iter()
        .filter_map(|s| setup.validate(*s).err().map(|e| format!("{}: {e}", s.name())))
        .collect();
    if errs.is_empty() {
        Check::from_metrics(None, "configuration", vec![Metric::at_most("errors", 0.0, 0.0)], String::new())
    } else {
        Check::failed(None, "configuration", errs.join("; "))
    }
}

/// Runs the whole suite for `setup`: configuration, criteria 1 to 13, then module properties.
///
/// When the configuration is invalid every other check is reported as skipped.
pub fn run_suite(setup: &SimulationSetup<f64>) -> Vec<Check> {
    let config = check_configuration(setup);
    if !config.passed {
        let names = [
            "minimal time",
            "kernel diagonal",
            "oracle agreement",
            "kernel bound",
            "bessel",
            "integral identities",
            "gain derivatives",
            "open-loop conservation",
            "closed-loop decay",
            "initial-condition independence",
            "transform round trip",
            "lyapunov bracketing and poincare",
            "bounded control",
        ];
        let mut out = vec![config];
        out.extend(names.iter().enumerate().map(|(i, n)| Check::skipped(Some(i as u8 + 1), n, "invalid configuration")));
        return out;
    }
    let mut out = vec![
        config,
        check_minimal_time(),
        check_kernel_diagonal(),
        check_oracle_agreement(),
        check_kernel_bound(),
        check_bessel(),
        check_moment_identities(),
        check_gain_derivatives(),
    ];
    match SuiteRuns::compute(setup) {
        Ok(runs) => {
            out.extend([
                runs.check_open_loop(),
                runs.check_closed_loop_decay(),
                runs.check_ic_independence(),
                runs.check_round_trip(),
                runs.check_inequalities(),
                runs.check_bounded_control(),
            ]);
            out.extend(runs.property_checks());
        }
        Err(e) => {
            for (c, n) in [
                (8, "open-loop conservation"),
                (9, "closed-loop decay"),
                (10, "initial-condition independence"),
                (11, "transform round trip"),
                (12, "lyapunov bracketing and poincare"),
                (13, "bounded control"),
            ] {
                out.push(Check::failed(Some(c), n, format!("error: {e}")));
            }
        }
    }
    out
}

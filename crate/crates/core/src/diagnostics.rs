//! Energies, the Poincare-type inequality and the Lyapunov functional with its envelope.

use crate::bounds::{gain_envelope_mk, BoundParams};
use crate::error::{Error, Result};
use crate::gain::GainSchedule;
use crate::kernel_fd::KernelField;
use crate::params::StringParams;
use crate::quadrature::integrate_1d;
use crate::scalar::Scalar;
use crate::simulator::{Scenario, StateRecord, Trajectory};
use crate::transforms::{apply_volterra, FieldSnapshot, KernelSource};

/// `(Ek, Ep)` from a displacement and a nodal velocity.
///
/// `Ek = M v(1)^2 / 2 + (rho0/2) int v^2` (trapezoid) and `Ep = (Tf/2) int p_x^2` from
/// cellwise differences.
pub fn energy_from_velocity<S: Scalar>(p: &FieldSnapshot<S>, velocity: &[S], params: &StringParams<S>) -> Result<(S, S)> {
    if velocity.len() != p.nx() {
        return Err(Error::GridMismatch("velocity and displacement lengths differ".into()));
    }
    let half = S::of(0.5);
    let dx = p.dx();
    let v2: Vec<S> = velocity.iter().map(|v| *v * *v).collect();
    let tip = *velocity.last().expect("non-empty");
    let ek = half * params.tip_mass() * tip * tip + half * params.rho0() * integrate_1d(&v2, dx)?;
    let ep = half * params.tension() * slope_energy(&p.values, dx);
    Ok((ek, ep))
}

/// `int p_x^2` with the slope constant on each cell.
pub fn slope_energy<S: Scalar>(values: &[S], dx: S) -> S {
    values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<S>() / dx
}

/// `(Ek, Ep)` at `curr`; the velocity is centred when `next` is given and backward otherwise.
pub fn energy_eval<S: Scalar>(
    prev: Option<&FieldSnapshot<S>>,
    curr: &FieldSnapshot<S>,
    next: Option<&FieldSnapshot<S>>,
    params: &StringParams<S>,
) -> Result<(S, S)> {
    let prev = prev.ok_or(Error::MissingVelocity)?;
    let velocity: Vec<S> = match next {
        Some(nx) => {
            let d = nx.t - prev.t;
            nx.values.iter().zip(&prev.values).map(|(a, b)| (*a - *b) / d).collect()
        }
        None => {
            let d = curr.t - prev.t;
            curr.values.iter().zip(&prev.values).map(|(a, b)| (*a - *b) / d).collect()
        }
    };
    energy_from_velocity(curr, &velocity, params)
}

/// `(int p^2, L^2 int p_x^2)`; requires `p(0) = 0`.
pub fn poincare_check<S: Scalar>(p: &FieldSnapshot<S>) -> Result<(S, S)> {
    if p.values[0].abs() > S::of(1e-12) * p.sup_norm().max(S::one()) {
        return Err(Error::Domain(format!("p(0) = {} is not zero", p.values[0])));
    }
    let sq: Vec<S> = p.values.iter().map(|v| *v * *v).collect();
    Ok((integrate_1d(&sq, p.dx())?, slope_energy(&p.values, p.dx())))
}

/// Second-order nodal derivative (central inside, one-sided at the ends).
pub fn gradient<S: Scalar>(values: &[S], dx: S) -> Vec<S> {
    let n = values.len();
    let two = S::of(2.0);
    let three = S::of(3.0);
    let four = S::of(4.0);
    (0..n)
        .map(|i| {
            if i == 0 {
                (-three * values[0] + four * values[1] - values[2]) / (two * dx)
            } else if i == n - 1 {
                (three * values[n - 1] - four * values[n - 2] + values[n - 3]) / (two * dx)
            } else {
                (values[i + 1] - values[i - 1]) / (two * dx)
            }
        })
        .collect()
}

/// Weights of the Lyapunov functional `V = V1 + V2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovWeights<S> {
    alpha: S,
    beta: S,
    delta1: S,
    delta2: S,
    rho0: S,
    tension: S,
}

impl<S: Scalar> LyapunovWeights<S> {
    /// Requires positive weights and `alpha < min(beta rho0, beta Tf) / (2 rho0)`.
    pub fn new(alpha: S, beta: S, delta1: S, delta2: S, params: &StringParams<S>) -> Result<Self> {
        if !(alpha > S::zero() && beta > S::zero() && delta1 > S::zero() && delta2 > S::zero()) {
            return Err(Error::InadmissibleWeights("all weights must be > 0".into()));
        }
        let ceiling = (beta * params.rho0()).min(beta * params.tension()) / (S::of(2.0) * params.rho0());
        if !(alpha < ceiling) {
            return Err(Error::InadmissibleWeights(format!("alpha = {} must be below {}", alpha, ceiling)));
        }
        Ok(Self { alpha, beta, delta1, delta2, rho0: params.rho0(), tension: params.tension() })
    }

    /// `beta = 1`, `alpha` at 40% of its ceiling, `delta1 = delta2 = 1`.
    pub fn default_for(params: &StringParams<S>) -> Self {
        let alpha = S::of(0.4) * params.rho0().min(params.tension()) / (S::of(2.0) * params.rho0());
        Self::new(alpha, S::one(), S::one(), S::one(), params).expect("default weights are admissible")
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    pub fn beta(&self) -> S {
        self.beta
    }

    pub fn sigma1(&self) -> S {
        S::of(2.0) * self.alpha * self.rho0 / (self.beta * self.rho0).min(self.beta * self.tension)
    }

    pub fn sigma2(&self) -> S {
        S::one() - self.sigma1()
    }

    pub fn sigma3(&self) -> S {
        S::one() + self.sigma1()
    }

    pub fn delta3(&self) -> S {
        (self.alpha * self.tension).max(self.alpha * self.rho0).max(self.beta * self.tension)
    }

    pub fn phi1(&self, mu: S) -> S {
        self.alpha * self.rho0 / (S::of(2.0) * mu) - self.beta / self.delta1
    }

    pub fn phi2(&self, mu: S) -> S {
        self.alpha * self.tension / (S::of(2.0) * mu)
            - self.alpha * self.delta2
            - self.beta * self.delta1
            - self.alpha / self.delta1
    }

    /// `min(2 phi1 / (beta rho0), 2 phi2 / (beta Tf))`.
    pub fn lambda1(&self, mu: S) -> S {
        let two = S::of(2.0);
        (two * self.phi1(mu) / (self.beta * self.rho0)).min(two * self.phi2(mu) / (self.beta * self.tension))
    }

    /// `(delta3 / 2) (v_x(1) + v_t(1))^2`.
    pub fn epsilon(&self, vx1: S, vt1: S) -> S {
        self.delta3() / S::of(2.0) * (vx1 + vt1) * (vx1 + vt1)
    }
}

/// Values of the Lyapunov functional on one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValues<S> {
    pub v1: S,
    pub v2: S,
    pub v: S,
    pub sigma2: S,
    pub sigma3: S,
}

/// `V1 = (beta/2)(rho0 int v_t^2 + Tf int v_x^2)`, `V2 = alpha rho0 int x v_x v_t`.
pub fn lyapunov_eval<S: Scalar>(
    vt: &[S],
    vx: &[S],
    weights: &LyapunovWeights<S>,
    params: &StringParams<S>,
) -> Result<LyapunovValues<S>> {
    if vt.len() != vx.len() {
        return Err(Error::GridMismatch("v_t and v_x lengths differ".into()));
    }
    let dx = S::one() / S::of_usize(vt.len() - 1);
    let half = S::of(0.5);
    let t2: Vec<S> = vt.iter().map(|v| *v * *v).collect();
    let x2: Vec<S> = vx.iter().map(|v| *v * *v).collect();
    let cross: Vec<S> = vt.iter().zip(vx).enumerate().map(|(i, (a, b))| S::of_usize(i) * dx * *a * *b).collect();
    let v1 = half * weights.beta() * (params.rho0() * integrate_1d(&t2, dx)? + params.tension() * integrate_1d(&x2, dx)?);
    let v2 = weights.alpha() * params.rho0() * integrate_1d(&cross, dx)?;
    Ok(LyapunovValues { v1, v2, v: v1 + v2, sigma2: weights.sigma2(), sigma3: weights.sigma3() })
}

/// Last time at which `lambda1(mu(t)) > 0`, by bisection; `None` if it fails at `t = 0`.
pub fn envelope_validity_end<S: Scalar>(weights: &LyapunovWeights<S>, sched: &GainSchedule<S>) -> Option<S> {
    let ok = |t: S| weights.lambda1(sched.mu_unchecked(t)) > S::zero();
    if !ok(S::zero()) {
        return None;
    }
    let (mut lo, mut hi) = (S::zero(), sched.horizon());
    for _ in 0..200 {
        let mid = (lo + hi) / S::of(2.0);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Decay envelope `(1 + M_r(t)) sqrt((2/(sigma2 Tf)) (vs(t) V0 + eps int_0^t exp(2 r (I(s) - I(t))) ds))`
/// with `r = lambda1(mu(t)) / sigma3` and `I(s) = int_0^s mu`.
///
/// Returns `Ok(None)` when `lambda1` is not positive on `[0, t]`.
pub fn decay_envelope<S: Scalar>(
    t: S,
    v0: S,
    eps: S,
    weights: &LyapunovWeights<S>,
    sched: &GainSchedule<S>,
    params: &StringParams<S>,
    bp: &BoundParams<S>,
) -> Result<Option<S>> {
    let mu = sched.mu(t)?;
    let lambda1 = weights.lambda1(mu);
    if !(lambda1 > S::zero()) {
        return Ok(None);
    }
    let rate = lambda1 / weights.sigma3();
    let decay = sched.varsigma(rate, t)?;
    let it = sched.mu_integral(t)?;
    let two = S::of(2.0);
    let integral = if t > S::zero() {
        crate::quadrature::trapezoid_fn(S::zero(), t, 2001, |s| (two * rate * (sched.mu_unchecked_integral(s) - it)).exp())
    } else {
        S::zero()
    };
    let mr = gain_envelope_mk(t, bp, sched, params.tension())?;
    let inner = two / (weights.sigma2() * params.tension()) * (decay * v0 + eps * integral);
    Ok(Some((S::one() + mr) * inner.max(S::zero()).sqrt()))
}

/// Target-coordinate fields `(v, v_t, v_x)` of a recorded plant state.
///
/// With a kernel, `v = p - int k p` and `v_t = p_t - int k p_t - int k_t p`, both evaluated at
/// the record time clamped into the kernel's stored range. Without one the state is used as is.
pub fn transformed_fields<S: Scalar>(
    record: &StateRecord<S>,
    kernel: Option<&KernelField<S>>,
) -> Result<(FieldSnapshot<S>, Vec<S>, Vec<S>)> {
    let p = &record.state;
    let nx = p.nx();
    let (v, vt) = match kernel {
        None => (p.clone(), record.velocity.clone()),
        Some(k) => {
            let t = k.clamp_time(p.t);
            let km = k.sample_matrix(nx, t)?;
            let ktm = k.time_derivative_matrix(nx, t)?;
            let v = apply_volterra(p, &km, -S::one())?;
            let pt = FieldSnapshot::new(p.t, record.velocity.clone());
            let a = apply_volterra(&pt, &km, -S::one())?;
            let b = apply_volterra(p, &ktm, -S::one())?;
            let vt = a.values.iter().zip(b.values.iter().zip(&p.values)).map(|(x, (y, q))| *x + (*y - *q)).collect();
            (v, vt)
        }
    };
    let vx = gradient(&v.values, v.dx());
    Ok((v, vt, vx))
}

/// Diagnostics of one recorded snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticSample<S> {
    pub t: S,
    /// Plant norm; `None` for the target scenario, whose state is already `v`.
    pub l2_p: Option<S>,
    pub l2_v: S,
    pub lyapunov: LyapunovValues<S>,
    pub envelope: Option<S>,
    pub ek: S,
    pub ep: S,
    /// `(int p^2, int p_x^2)` of the recorded state.
    pub poincare: (S, S),
    /// Running maximum of `(delta3/2)(v_x(1) + v_t(1))^2`.
    pub epsilon: S,
}

impl<S: Scalar> DiagnosticSample<S> {
    /// `0 <= sigma2 V1 <= V <= sigma3 V1` up to a relative rounding slack.
    pub fn lyapunov_bracket_holds(&self) -> bool {
        let l = &self.lyapunov;
        let slack = S::of(1e-12) * l.v1.abs().max(S::min_positive_value());
        l.sigma2 * l.v1 >= -slack && l.sigma2 * l.v1 <= l.v + slack && l.v <= l.sigma3 * l.v1 + slack
    }

    /// `int p^2 <= int p_x^2` up to a relative rounding slack.
    pub fn poincare_holds(&self) -> bool {
        self.poincare.0 <= self.poincare.1 * (S::one() + S::of(1e-12))
    }

    /// `||v|| <= sqrt(2 V / (sigma2 Tf))`.
    pub fn norm_bound_holds(&self, tension: S) -> bool {
        let b = (S::of(2.0) * self.lyapunov.v / (self.lyapunov.sigma2 * tension)).max(S::zero()).sqrt();
        self.l2_v <= b * (S::one() + S::of(1e-9))
    }
}

/// Evaluates every record of a trajectory.
pub fn evaluate_trajectory<S: Scalar>(
    traj: &Trajectory<S>,
    kernel: Option<&KernelField<S>>,
    weights: &LyapunovWeights<S>,
    params: &StringParams<S>,
    sched: &GainSchedule<S>,
    bp: &BoundParams<S>,
) -> Result<Vec<DiagnosticSample<S>>> {
    let target = traj.scenario == Scenario::Target;
    let kernel = if target { None } else { kernel };
    let mut out = Vec::with_capacity(traj.records.len());
    let mut eps = S::zero();
    let mut v0 = None;
    for rec in &traj.records {
        let (v, vt, vx) = transformed_fields(rec, kernel)?;
        let lyapunov = lyapunov_eval(&vt, &vx, weights, params)?;
        let n = vt.len();
        eps = eps.max(weights.epsilon(vx[n - 1], vt[n - 1]));
        let v_init = *v0.get_or_insert(lyapunov.v);
        let envelope = if rec.state.t < sched.horizon() {
            decay_envelope(rec.state.t, v_init, eps, weights, sched, params, bp)?
        } else {
            None
        };
        let (ek, ep) = energy_from_velocity(&rec.state, &rec.velocity, params)?;
        let poincare = poincare_check(&rec.state)?;
        out.push(DiagnosticSample {
            t: rec.state.t,
            l2_p: (!target).then(|| rec.state.l2_norm()),
            l2_v: v.l2_norm(),
            lyapunov,
            envelope,
            ek,
            ep,
            poincare,
            epsilon: eps,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn energy_examples() {
        let params = StringParams::<f64>::reference();
        let p = FieldSnapshot::from_fn(0.0, 2001, |x: f64| -0.5 * x * (x - 1.0));
        let (ek, ep) = energy_from_velocity(&p, &vec![0.0; 2001], &params).unwrap();
        assert_eq!(ek, 0.0);
        assert!((ep - 1.875).abs() < 1e-6);
        let z = FieldSnapshot::new(0.0, vec![0.0; 11]);
        let z1 = FieldSnapshot::new(0.01, vec![0.0; 11]);
        assert_eq!(energy_eval(Some(&z), &z1, None, &params).unwrap(), (0.0, 0.0));
        assert!(matches!(energy_eval(None, &z, None, &params), Err(Error::MissingVelocity)));
        let lin = FieldSnapshot::from_fn(0.0, 11, |x: f64| x);
        let (_, ep) = energy_from_velocity(&lin, &[0.0; 11], &params).unwrap();
        assert!((ep - 22.5).abs() < 1e-12);
    }

    #[test]
    fn poincare_examples() {
        let p = FieldSnapshot::from_fn(0.0, 2001, |x: f64| x);
        let (l, r) = poincare_check(&p).unwrap();
        assert!((l - 1.0 / 3.0).abs() < 1e-6 && (r - 1.0).abs() < 1e-12);
        let s = FieldSnapshot::from_fn(0.0, 2001, |x: f64| (std::f64::consts::FRAC_PI_2 * x).sin());
        let (l, r) = poincare_check(&s).unwrap();
        assert!((l - 0.5).abs() < 1e-6 && (r - std::f64::consts::PI.powi(2) / 8.0).abs() < 1e-6);
        assert_eq!(poincare_check(&FieldSnapshot::new(0.0, vec![0.0; 5])).unwrap(), (0.0, 0.0));
        assert!(poincare_check(&FieldSnapshot::new(0.0, vec![1.0; 5])).is_err());
    }

    #[test]
    fn weights_and_lyapunov_basics() {
        let params = StringParams::<f64>::reference();
        let w = LyapunovWeights::default_for(&params);
        assert!((w.alpha() - 0.2).abs() < 1e-15);
        assert!((w.sigma2() - 0.6).abs() < 1e-15 && (w.sigma3() - 1.4).abs() < 1e-15);
        assert!(LyapunovWeights::new(0.5, 1.0, 1.0, 1.0, &params).is_err());
        let z = vec![0.0; 11];
        let v = lyapunov_eval(&z, &z, &w, &params).unwrap();
        assert_eq!((v.v1, v.v2, v.v), (0.0, 0.0, 0.0));
        let tiny = LyapunovWeights::new(1e-9, 1.0, 1.0, 1.0, &params).unwrap();
        let vt: Vec<f64> = (0..11).map(|i| (i as f64).sin()).collect();
        let vx: Vec<f64> = (0..11).map(|i| (i as f64).cos()).collect();
        let v = lyapunov_eval(&vt, &vx, &tiny, &params).unwrap();
        assert!(((v.v - v.v1) / v.v1).abs() < 1e-8);
        assert!((tiny.sigma2() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reference_weights_never_give_positive_rate() {
        let params = StringParams::<f64>::reference();
        let sched = GainSchedule::new(5.0, 3.0).unwrap();
        let w = LyapunovWeights::default_for(&params);
        assert!(envelope_validity_end(&w, &sched).is_none());
        // phi1 > 0 forces beta delta1 > 2 beta^2 mu / (alpha rho0), contradicting phi2 > 0 at mu = 25
        for &d1 in &[1.0, 10.0, 100.0, 1000.0] {
            let w = LyapunovWeights::new(0.2, 1.0, d1, 1e-3, &params).unwrap();
            assert!(w.lambda1(25.0) <= 0.0);
        }
    }

    #[test]
    fn envelope_trivial_cases() {
        let params = StringParams::<f64>::reference();
        let sched = GainSchedule::new(0.1, 3.0).unwrap();
        let w = LyapunovWeights::new(0.4, 1.0, 0.5, 0.5, &params).unwrap();
        assert!(w.lambda1(sched.mu(0.0).unwrap()) > 0.0);
        let bp = BoundParams::new(1.0, &sched).unwrap();
        for &t in &[0.0, 0.5, 1.2] {
            assert_eq!(decay_envelope(t, 0.0, 0.0, &w, &sched, &params, &bp).unwrap(), Some(0.0));
        }
        let v0 = 2.0;
        let e0 = decay_envelope(0.0, v0, 0.3, &w, &sched, &params, &bp).unwrap().unwrap();
        let mr = gain_envelope_mk(0.0, &bp, &sched, 45.0).unwrap();
        assert!((e0 - (1.0 + mr) * (2.0 * v0 / (w.sigma2() * 45.0)).sqrt()).abs() < 1e-12);
        assert!(decay_envelope(3.0, v0, 0.0, &w, &sched, &params, &bp).is_err());
        let end = envelope_validity_end(&w, &sched).unwrap();
        assert!(decay_envelope(end + 1e-3, v0, 0.0, &w, &sched, &params, &bp).unwrap().is_none());
    }

    proptest! {
        #[test]
        fn lyapunov_bracketing(seed in proptest::collection::vec(-2.0_f64..2.0, 22), alpha in 0.01_f64..0.49) {
            let params = StringParams::<f64>::reference();
            let w = LyapunovWeights::new(alpha, 1.0, 1.0, 1.0, &params).unwrap();
            let (vt, vx) = seed.split_at(11);
            let v = lyapunov_eval(vt, vx, &w, &params).unwrap();
            prop_assert!(0.0 <= v.sigma2 * v.v1 + 1e-12);
            prop_assert!(v.sigma2 * v.v1 <= v.v + 1e-12);
            prop_assert!(v.v <= v.sigma3 * v.v1 + 1e-12);
        }

        #[test]
        fn poincare_on_random_profiles(vals in proptest::collection::vec(-1.0_f64..1.0, 2..60)) {
            let mut values = vec![0.0];
            values.extend(vals);
            if values.len() < 3 { values.push(0.1); }
            let (l, r) = poincare_check(&FieldSnapshot::new(0.0, values)).unwrap();
            prop_assert!(l <= r + 1e-12);
        }
    }
}

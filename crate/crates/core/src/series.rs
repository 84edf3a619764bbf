//! Successive-approximation kernel in characteristic coordinates.
//!
//! With `xi = x + y`, `eta = x - y` and `F(xi, eta, t) = k(x, y, t)` the kernel solves
//! `F = -mu (xi - eta)/(4 Tf) + (1/(4 Tf)) int_eta^xi int_0^eta (rho0 F_tt + mu F) ds dtau`.
//! Every iterate is an exact sum of monomials `c mu^a xi^p eta^q`.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::gain::{GainProfile, GainSchedule};
use crate::kernel_fd::BoundaryTraces;
use crate::params::{f64_of, StringParams};
use crate::scalar::Scalar;

/// One term `coeff * mu(t)^a * xi^p * eta^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonomialTerm<S> {
    pub coeff: S,
    pub a: u32,
    pub p: u32,
    pub q: u32,
}

/// Maps `(x, y)` with `0 <= y <= x` to `(xi, eta) = (x + y, x - y)`.
pub fn to_characteristic<S: Scalar>(x: S, y: S) -> Result<(S, S)> {
    if y > x || y < S::zero() {
        return Err(Error::Domain(format!("need 0 <= y <= x, got x={}, y={}", x, y)));
    }
    Ok((x + y, x - y))
}

/// First iterate `-mu (xi - eta) / (4 Tf)`.
pub fn seed_iterate<S: Scalar>(params: &StringParams<S>) -> Vec<MonomialTerm<S>> {
    let c = S::one() / (S::of(4.0) * params.tension());
    vec![MonomialTerm { coeff: -c, a: 1, p: 1, q: 0 }, MonomialTerm { coeff: c, a: 1, p: 0, q: 1 }]
}

/// Applies one step of the integral recursion to `prev`.
///
/// `d_tt mu^a = D_a mu^(a+1)`, multiplication by `mu` raises `a` by one, and
/// `int_eta^xi int_0^eta tau^p s^q ds dtau = (xi^(p+1) - eta^(p+1)) eta^(q+1) / ((p+1)(q+1))`.
pub fn next_iterate<S: Scalar>(
    prev: &[MonomialTerm<S>],
    params: &StringParams<S>,
    gain: &GainProfile<S>,
) -> Vec<MonomialTerm<S>> {
    let four_tf = S::of(4.0) * params.tension();
    let mut acc: BTreeMap<(u32, u32, u32), S> = BTreeMap::new();
    for t in prev {
        let time_factor = (params.rho0() * gain.power_second_derivative(t.a) + S::one()) / four_tf;
        let f = t.coeff * time_factor / (S::of(t.p as f64 + 1.0) * S::of(t.q as f64 + 1.0));
        *acc.entry((t.a + 1, t.p + 1, t.q + 1)).or_insert_with(S::zero) += f;
        *acc.entry((t.a + 1, 0, t.p + t.q + 2)).or_insert_with(S::zero) -= f;
    }
    let floor = S::of(1e-300);
    acc.into_iter()
        .filter(|(_, c)| *c != S::zero() && c.abs() >= floor)
        .map(|((a, p, q), coeff)| MonomialTerm { coeff, a, p, q })
        .collect()
}

#[inline]
fn falling<S: Scalar>(p: u32, d: u32) -> S {
    (0..d).fold(S::one(), |acc, k| acc * S::of((p as f64) - (k as f64)))
}

#[inline]
fn power_derivative<S: Scalar>(v: S, p: u32, d: u32) -> S {
    if d > p {
        S::zero()
    } else {
        falling::<S>(p, d) * v.powi((p - d) as i32)
    }
}

/// Evaluates `d^dxi_xi d^deta_eta d^dt_t` of an iterate; `dt <= 2`.
pub fn eval_iterate<S: Scalar>(
    terms: &[MonomialTerm<S>],
    gain: &GainProfile<S>,
    xi: S,
    eta: S,
    t: S,
    orders: (u32, u32, u32),
) -> S {
    let (dxi, deta, dt) = orders;
    let mu = gain.value(t);
    let mut acc = S::zero();
    for m in terms {
        let time = match dt {
            0 => mu.powi(m.a as i32),
            1 => gain.power_first_derivative(m.a, t) * mu.powi(m.a as i32),
            2 => gain.power_second_derivative(m.a) * mu.powi(m.a as i32 + 1),
            _ => panic!("time derivative order above 2 not supported"),
        };
        acc += m.coeff * time * power_derivative(xi, m.p, dxi) * power_derivative(eta, m.q, deta);
    }
    acc
}

/// Kernel value and the partial derivatives used by the controller and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelDerivatives<S> {
    pub k: S,
    pub kx: S,
    pub ky: S,
    pub kyy: S,
    pub kt: S,
    pub ktt: S,
}

/// Truncated series `sum_{n=1}^N Delta F^n`.
#[derive(Debug, Clone)]
pub struct SeriesKernel<S> {
    params: StringParams<S>,
    gain: GainProfile<S>,
    iterates: Vec<Vec<MonomialTerm<S>>>,
}

/// Order cap for automatic truncation.
pub const MAX_SERIES_ORDER: usize = 200;

impl<S: Scalar> SeriesKernel<S> {
    /// Builds the first `order` iterates.
    pub fn build(params: &StringParams<S>, gain: &GainProfile<S>, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("series order must be >= 1".into()));
        }
        let mut iterates = vec![seed_iterate(params)];
        while iterates.len() < order {
            let next = next_iterate(iterates.last().expect("non-empty"), params, gain);
            iterates.push(next);
        }
        Ok(Self { params: *params, gain: *gain, iterates })
    }

    /// Chooses the order for accuracy `tol` up to time `t_max`.
    ///
    /// For the prescribed-time gain the order starts at the smallest `N` with
    /// `truncation_bound(N + 1, 2, 1, t_max) < tol`. In all cases iterates are then appended
    /// until the first omitted iterate is below `tol * max(1, sup |k|)` on a sample of the
    /// triangle at `t_max`.
    pub fn with_tolerance(params: &StringParams<S>, gain: &GainProfile<S>, t_max: S, tol: S) -> Result<Self> {
        if let Some(h) = gain.horizon() {
            if !(t_max >= S::zero() && t_max < h) {
                return Err(Error::TimeOutOfRange { t: f64_of(t_max), lo: 0.0, hi: f64_of(h) });
            }
        }
        let mut order = 1;
        if let GainProfile::PrescribedTime(sched) = gain {
            let two = S::of(2.0);
            while order < MAX_SERIES_ORDER && truncation_bound(order + 1, two, S::one(), t_max, params, sched) >= tol {
                order += 1;
            }
        }
        let mut kernel = Self::build(params, gain, order)?;
        let samples = sample_points::<S>(11);
        loop {
            let next = next_iterate(kernel.iterates.last().expect("non-empty"), params, gain);
            let mut sup_next = S::zero();
            let mut sup_k = S::zero();
            for &(xi, eta) in &samples {
                sup_next = sup_next.max(eval_iterate(&next, gain, xi, eta, t_max, (0, 0, 0)).abs());
                sup_k = sup_k.max(kernel.eval_xi_eta(xi, eta, t_max, (0, 0, 0)).abs());
            }
            if !sup_next.is_finite() || kernel.iterates.len() >= MAX_SERIES_ORDER {
                return Err(Error::SeriesDivergent { t: f64_of(t_max), order: kernel.iterates.len(), tol: f64_of(tol) });
            }
            if sup_next < tol * sup_k.max(S::one()) {
                return Ok(kernel);
            }
            kernel.iterates.push(next);
        }
    }

    pub fn order(&self) -> usize {
        self.iterates.len()
    }

    pub fn iterates(&self) -> &[Vec<MonomialTerm<S>>] {
        &self.iterates
    }

    pub fn params(&self) -> &StringParams<S> {
        &self.params
    }

    pub fn gain(&self) -> &GainProfile<S> {
        &self.gain
    }

    fn check_time(&self, t: S) -> Result<()> {
        if let Some(h) = self.gain.horizon() {
            if !(t >= S::zero() && t < h) {
                return Err(Error::TimeOutOfRange { t: f64_of(t), lo: 0.0, hi: f64_of(h) });
            }
        }
        Ok(())
    }

    fn eval_xi_eta(&self, xi: S, eta: S, t: S, orders: (u32, u32, u32)) -> S {
        self.iterates.iter().map(|it| eval_iterate(it, &self.gain, xi, eta, t, orders)).sum()
    }

    /// Kernel value `k(x, y, t)`; exactly zero on `y = 0`.
    pub fn eval(&self, x: S, y: S, t: S) -> Result<S> {
        self.check_time(t)?;
        let (xi, eta) = to_characteristic(x, y)?;
        if y == S::zero() {
            return Ok(S::zero());
        }
        Ok(self.eval_xi_eta(xi, eta, t, (0, 0, 0)))
    }

    /// Partial sum with the first `n` iterates.
    pub fn eval_partial(&self, x: S, y: S, t: S, n: usize) -> Result<S> {
        self.check_time(t)?;
        let (xi, eta) = to_characteristic(x, y)?;
        if y == S::zero() {
            return Ok(S::zero());
        }
        Ok(self.iterates.iter().take(n).map(|it| eval_iterate(it, &self.gain, xi, eta, t, (0, 0, 0))).sum())
    }

    /// Single iterate `Delta F^n(xi, eta, t)`, `n >= 1`.
    pub fn iterate_value(&self, n: usize, xi: S, eta: S, t: S) -> Result<S> {
        self.check_time(t)?;
        let it = self.iterates.get(n.wrapping_sub(1)).ok_or_else(|| Error::Domain(format!("iterate {} not built", n)))?;
        Ok(eval_iterate(it, &self.gain, xi, eta, t, (0, 0, 0)))
    }

    /// Exact partial derivatives of the truncated series.
    pub fn derivatives(&self, x: S, y: S, t: S) -> Result<KernelDerivatives<S>> {
        self.check_time(t)?;
        let (xi, eta) = to_characteristic(x, y)?;
        let e = |o| self.eval_xi_eta(xi, eta, t, o);
        let f_xi = e((1, 0, 0));
        let f_eta = e((0, 1, 0));
        let two = S::of(2.0);
        Ok(KernelDerivatives {
            k: if y == S::zero() { S::zero() } else { e((0, 0, 0)) },
            kx: f_xi + f_eta,
            ky: f_xi - f_eta,
            kyy: e((2, 0, 0)) - two * e((1, 1, 0)) + e((0, 2, 0)),
            kt: e((0, 0, 1)),
            ktt: e((0, 0, 2)),
        })
    }

    /// Controller traces on `ny` uniform nodes of `y in [0, 1]` from exact derivatives.
    pub fn boundary_traces(&self, t: S, ny: usize) -> Result<BoundaryTraces<S>> {
        if ny < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: ny });
        }
        let one = S::one();
        let mut kx_row = Vec::with_capacity(ny);
        let mut kyy_row = Vec::with_capacity(ny);
        let mut ky11 = S::zero();
        for j in 0..ny {
            let y = S::of_usize(j) / S::of_usize(ny - 1);
            let d = self.derivatives(one, y, t)?;
            kx_row.push(d.kx);
            kyy_row.push(d.kyy);
            if j == ny - 1 {
                ky11 = d.ky;
            }
        }
        let k11 = -self.gain.value(t) / (S::of(2.0) * self.params.tension());
        Ok(BoundaryTraces { t, k11, ky11, kx_row, kyy_row })
    }

    /// Writes the monomial table, one term per line as `coeff,a,p,q`.
    pub fn write_table<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["coeff", "a", "p", "q"])?;
        for it in &self.iterates {
            for m in it {
                w.write_record([format!("{:e}", f64_of(m.coeff)), m.a.to_string(), m.p.to_string(), m.q.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn sample_points<S: Scalar>(n: usize) -> Vec<(S, S)> {
    let mut v = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            let x = S::of_usize(i) / S::of_usize(n - 1);
            let y = S::of_usize(j) / S::of_usize(n - 1);
            v.push((x + y, x - y));
        }
    }
    v
}

/// One-shot evaluation of the `N`-term series for the prescribed-time gain.
pub fn eval_kernel_series<S: Scalar>(
    x: S,
    y: S,
    t: S,
    order: usize,
    params: &StringParams<S>,
    sched: &GainSchedule<S>,
) -> Result<S> {
    SeriesKernel::build(params, &GainProfile::PrescribedTime(*sched), order)?.eval(x, y, t)
}

/// General term bound
/// `(1/(4Tf))^(n+1) (mu0 T)^(-2n) mu^(n+1) 2 e^n C^(n+1) (xi eta)^n (xi - eta) / (n! (n+1)!)`
/// with `C = 6 + mu0^2 T^2`; it bounds the iterate `Delta F^(n+1)`.
pub fn truncation_bound<S: Scalar>(n: usize, xi: S, eta: S, t: S, params: &StringParams<S>, sched: &GainSchedule<S>) -> S {
    let prod = xi * eta;
    let diff = xi - eta;
    if prod <= S::zero() || diff <= S::zero() {
        return S::zero();
    }
    let nn = S::of_usize(n);
    let c = S::of(6.0) + sched.scale() * sched.scale();
    let mu = sched.mu_unchecked(t);
    let mut log_fact = S::zero();
    let mut log_fact1 = S::zero();
    for k in 2..=n + 1 {
        let lk = S::of_usize(k).ln();
        log_fact1 += lk;
        if k <= n {
            log_fact += lk;
        }
    }
    let log_v = (nn + S::one()) * (mu * c / (S::of(4.0) * params.tension())).ln() - S::of(2.0) * nn * sched.scale().ln()
        + S::of(2.0).ln()
        + nn
        + nn * prod.ln()
        + diff.ln()
        - log_fact
        - log_fact1;
    log_v.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (StringParams<f64>, GainSchedule<f64>, GainProfile<f64>) {
        let p = StringParams::reference();
        let s = GainSchedule::new(5.0, 3.0).unwrap();
        (p, s, GainProfile::PrescribedTime(s))
    }

    #[test]
    fn characteristic_map() {
        assert_eq!(to_characteristic(1.0, 1.0).unwrap(), (2.0, 0.0));
        assert_eq!(to_characteristic(1.0, 0.0).unwrap(), (1.0, 1.0));
        assert_eq!(to_characteristic(0.75, 0.25).unwrap(), (1.0, 0.5));
        assert!(to_characteristic(0.2, 0.3).is_err());
    }

    #[test]
    fn second_iterate_matches_hand_integration() {
        // Delta F^2 = c1 mu^2 [ -(xi^2 - eta^2) eta / 2 + (xi - eta) eta^2 / 2 ], c1 = (rho0 D_1 + 1)/(4 Tf)^2
        let (p, s, g) = setup();
        let it2 = next_iterate(&seed_iterate(&p), &p, &g);
        let c1 = (6.0 / 225.0 + 1.0) / (180.0 * 180.0);
        for &(xi, eta, t) in &[(1.3, 0.4, 0.0), (1.0, 0.9, 1.2), (1.7, 0.2, 2.0)] {
            let mu = s.mu(t).unwrap();
            let expect = c1 * mu * mu * (-(xi * xi - eta * eta) * eta / 2.0 + (xi - eta) * eta * eta / 2.0);
            let got = eval_iterate(&it2, &g, xi, eta, t, (0, 0, 0));
            assert!((got - expect).abs() < 1e-15 * (1.0 + expect.abs()), "{got} vs {expect}");
        }
    }

    #[test]
    fn second_iterate_matches_double_quadrature() {
        // Delta F^2 = (1/(4Tf)) int_eta^xi int_0^eta (rho0 d_tt + mu) Delta F^1(tau, s) ds dtau
        let (p, s, g) = setup();
        let it2 = next_iterate(&seed_iterate(&p), &p, &g);
        let (xi, eta, t) = (1.5, 0.6, 0.9);
        let mu = s.mu(t).unwrap();
        let mutt = s.mu_derivative(2, t).unwrap();
        let integrand = |tau: f64, s_: f64| (mutt + mu * mu) * (-(tau - s_) / 180.0) / 180.0;
        let m = 401;
        let num = crate::quadrature::trapezoid_fn(eta, xi, m, |tau| {
            crate::quadrature::trapezoid_fn(0.0, eta, m, |s_| integrand(tau, s_))
        });
        let got = eval_iterate(&it2, &g, xi, eta, t, (0, 0, 0));
        assert!((got - num).abs() < 1e-9 * num.abs().max(1e-12), "{got} vs {num}");
    }

    #[test]
    fn zero_input_and_eta_zero() {
        let (p, _, g) = setup();
        assert!(next_iterate(&[], &p, &g).is_empty());
        let k = SeriesKernel::build(&p, &g, 6).unwrap();
        for n in 2..=6 {
            assert_eq!(k.iterate_value(n, 1.4, 0.0, 0.5).unwrap(), 0.0);
            assert!(k.iterate_value(n, 0.7, 0.7, 0.5).unwrap().abs() < 1e-17);
        }
    }

    #[test]
    fn kernel_examples() {
        let (p, s, _) = setup();
        assert!((eval_kernel_series(1.0, 1.0, 0.0, 5, &p, &s).unwrap() + 0.277_777_777_8).abs() < 1e-10);
        assert!((eval_kernel_series(0.5, 0.25, 0.0, 1, &p, &s).unwrap() + 0.069_444_444_4).abs() < 1e-10);
        assert_eq!(eval_kernel_series(0.6, 0.0, 1.0, 8, &p, &s).unwrap(), 0.0);
        assert!(eval_kernel_series(0.6, 0.3, 3.0, 8, &p, &s).is_err());
    }

    #[test]
    fn automatic_order_matches_bound_rule() {
        let (p, _, g) = setup();
        let cases = [(0.0, 8usize), (0.9, 9), (1.5, 11), (2.4, 20)];
        for (t, n_rule) in cases {
            let k = SeriesKernel::with_tolerance(&p, &g, t, 1e-10).unwrap();
            assert!(k.order() >= n_rule, "t={t}: order {} < {n_rule}", k.order());
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (p, _, g) = setup();
        let k = SeriesKernel::with_tolerance(&p, &g, 2.0, 1e-12).unwrap();
        let (x, y, t) = (0.8, 0.35, 1.4);
        let d = k.derivatives(x, y, t).unwrap();
        let h = 1e-4;
        let f = |x: f64, y: f64, t: f64| k.eval(x, y, t).unwrap();
        let kx = (f(x + h, y, t) - f(x - h, y, t)) / (2.0 * h);
        let ky = (f(x, y + h, t) - f(x, y - h, t)) / (2.0 * h);
        let kyy = (f(x, y + h, t) - 2.0 * f(x, y, t) + f(x, y - h, t)) / (h * h);
        let kt = (f(x, y, t + h) - f(x, y, t - h)) / (2.0 * h);
        let ktt = (f(x, y, t + h) - 2.0 * f(x, y, t) + f(x, y, t - h)) / (h * h);
        assert!((d.kx - kx).abs() < 1e-7);
        assert!((d.ky - ky).abs() < 1e-7);
        assert!((d.kyy - kyy).abs() < 1e-4);
        assert!((d.kt - kt).abs() < 1e-7);
        assert!((d.ktt - ktt).abs() < 1e-4);
    }

    #[test]
    fn frozen_series_solves_stationary_equation() {
        // k_xx - k_yy = (mu/Tf) k for constant gain
        let p = StringParams::<f64>::reference();
        let g = GainProfile::Frozen(25.0);
        let k = SeriesKernel::with_tolerance(&p, &g, 0.0, 1e-13).unwrap();
        let (x, y) = (0.7, 0.3);
        let h = 1e-3;
        let f = |x: f64, y: f64| k.eval(x, y, 0.0).unwrap();
        let kxx = (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
        let kyy = (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
        assert!((kxx - kyy - 25.0 / 45.0 * f(x, y)).abs() < 1e-6);
        assert_eq!(k.eval(0.7, 0.3, 2.99).unwrap(), k.eval(0.7, 0.3, 0.0).unwrap());
    }

    #[test]
    fn truncation_bound_degenerate_cases() {
        let (p, s, _) = setup();
        assert_eq!(truncation_bound(3, 1.0, 0.0, 0.5, &p, &s), 0.0);
        assert_eq!(truncation_bound(3, 0.8, 0.8, 0.5, &p, &s), 0.0);
        assert!(truncation_bound(2, 2.0, 1.0, 0.0, &p, &s) > 0.0);
    }

    #[test]
    fn monomial_table_export() {
        let (p, _, g) = setup();
        let k = SeriesKernel::build(&p, &g, 2).unwrap();
        let mut buf = Vec::new();
        k.write_table(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("coeff,a,p,q\n"));
        let rows = text.lines().count() - 1;
        assert_eq!(rows, k.iterates().iter().map(Vec::len).sum::<usize>());
    }

    #[test]
    fn single_precision_series() {
        let p = StringParams::<f32>::reference();
        let s = GainSchedule::<f32>::new(5.0, 3.0).unwrap();
        let v = eval_kernel_series(1.0_f32, 1.0, 0.0, 4, &p, &s).unwrap();
        assert!((v + 0.277_777_8).abs() < 1e-6);
    }
}

//! Properties of the successive-approximation series that need many iterates.

use ptstring::series::truncation_bound;
use ptstring::*;

fn setup() -> (StringParams64, GainSchedule64, GainProfile64) {
    let params = StringParams64::reference();
    let sched = GainSchedule64::from_config(&PtConfig64::reference());
    (params, sched, GainProfile::PrescribedTime(sched))
}

/// Interior sample points `(xi, eta)` with `y > 0` on an 11-node triangle.
fn samples() -> Vec<(f64, f64)> {
    let mut v = Vec::new();
    for i in 1..=10 {
        for j in 1..=i {
            let (x, y) = (i as f64 / 10.0, j as f64 / 10.0);
            v.push((x + y, x - y));
        }
    }
    v
}

#[test]
fn iterates_stay_below_general_term_up_to_order_twenty() {
    let (params, sched, gain) = setup();
    let kernel = SeriesKernel64::build(&params, &gain, 21).unwrap();
    for t in [0.0, 1.5, 2.4] {
        for n in 1..=20 {
            for &(xi, eta) in &samples() {
                let d = kernel.iterate_value(n + 1, xi, eta, t).unwrap().abs();
                let b = truncation_bound(n, xi, eta, t, &params, &sched);
                assert!(d <= b, "n={n} t={t} xi={xi} eta={eta}: {d:e} > {b:e}");
            }
        }
    }
}

#[test]
fn simplified_general_term_is_exceeded_at_high_order() {
    let (params, sched, gain) = setup();
    let kernel = SeriesKernel64::build(&params, &gain, 41).unwrap();
    let exceeded = (25..=40).any(|n| {
        samples().iter().any(|&(xi, eta)| {
            kernel.iterate_value(n + 1, xi, eta, 0.0).unwrap().abs() > truncation_bound(n, xi, eta, 0.0, &params, &sched)
        })
    });
    assert!(exceeded, "the 2 e^n factor was expected to undercount the time-derivative growth");
}

#[test]
fn partial_sums_are_cauchy() {
    let (params, sched, gain) = setup();
    let kernel = SeriesKernel64::build(&params, &gain, 21).unwrap();
    let t = 1.5;
    for &(xi, eta) in &samples() {
        let (x, y) = ((xi + eta) / 2.0, (xi - eta) / 2.0);
        for n in 2..=20 {
            let step = (kernel.eval_partial(x, y, t, n + 1).unwrap() - kernel.eval_partial(x, y, t, n).unwrap()).abs();
            assert!(step <= truncation_bound(n, xi, eta, t, &params, &sched) * (1.0 + 1e-12) + 1e-300);
        }
    }
    let auto = SeriesKernel64::with_tolerance(&params, &gain, t, 1e-10).unwrap();
    let n = auto.order();
    let tail = SeriesKernel64::build(&params, &gain, n + 1).unwrap();
    for &(xi, eta) in &samples() {
        let (x, y) = ((xi + eta) / 2.0, (xi - eta) / 2.0);
        let d = (tail.eval(x, y, t).unwrap() - auto.eval(x, y, t).unwrap()).abs();
        assert!(d < 1e-10 * auto.eval(x, y, t).unwrap().abs().max(1.0));
    }
}

/// `-mu (xi - eta)/(4 Tf) + (1/(4 Tf)) int_eta^xi int_0^eta (rho0 F_tt + mu F)(tau, s) ds dtau`
/// by nested trapezoid sums with `m` nodes per axis.
fn integral_rhs(kernel: &SeriesKernel64, xi: f64, eta: f64, t: f64, m: usize) -> f64 {
    let params = kernel.params();
    let mu = kernel.gain().value(t);
    let tf = params.tension();
    let g = |tau: f64, s: f64| {
        let d = kernel.derivatives((tau + s) / 2.0, (tau - s) / 2.0, t).unwrap();
        params.rho0() * d.ktt + mu * d.k
    };
    let trap = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
        let h = (b - a) / (m - 1) as f64;
        let mut acc = 0.5 * (f(a) + f(b));
        for i in 1..m - 1 {
            acc += f(a + h * i as f64);
        }
        acc * h
    };
    let outer = trap(eta, xi, &|tau| trap(0.0, eta, &|s| g(tau, s)));
    -mu * (xi - eta) / (4.0 * tf) + outer / (4.0 * tf)
}

#[test]
fn truncated_series_reproduces_its_integral_equation() {
    let (params, sched, gain) = setup();
    let t = 0.9;
    let kernel = SeriesKernel64::build(&params, &gain, 12).unwrap();
    for (xi, eta) in [(1.2, 0.6), (1.5, 0.3), (0.8, 0.7)] {
        let (x, y) = ((xi + eta) / 2.0, (xi - eta) / 2.0);
        let f = kernel.eval(x, y, t).unwrap();
        let coarse = integral_rhs(&kernel, xi, eta, t, 81);
        let fine = integral_rhs(&kernel, xi, eta, t, 161);
        let quad = (fine - coarse).abs();
        let trunc = truncation_bound(12, xi, eta, t, &params, &sched);
        assert!((fine - f).abs() <= trunc + quad, "xi={xi} eta={eta}: {:e} vs {:e} + {:e}", (fine - f).abs(), trunc, quad);
    }
}

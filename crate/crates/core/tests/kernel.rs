mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riesz_lab::kernel::{decay_envelope_estimate, phi, phi_origin, phi_scaled, radial_derivative, scan_radii};
use riesz_lab::BRParams;

fn critical_line() -> BRParams {
    BRParams::critical(1, 2.0 / 3.0, 1.0).unwrap()
}

#[test]
fn origin_value_matches_quadrature() {
    let params = BRParams::new(1, 1.0, 1.0).unwrap();
    let oracle = common::integrate(|xi| 1.0 - xi * xi, -1.0, 1.0, 1e-15);
    assert!((phi(&[0.0], &params) - oracle).abs() < 1e-6);
    assert!((phi_origin(&params) - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn line_kernel_matches_direct_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &delta in &[0.5, 1.0, 1.75] {
        let params = BRParams::new(1, delta, 1.0).unwrap();
        for _ in 0..50 {
            let x: f64 = rng.gen_range(-10.0..10.0);
            let oracle = common::phi_direct_1d(x, delta);
            let got = phi(&[x], &params);
            assert!(common::rel_err(got, oracle) < 1e-6, "δ={delta} x={x}: {got} vs {oracle}");
        }
    }
}

#[test]
fn plane_kernel_matches_direct_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let params = BRParams::critical(2, 0.8, 1.0).unwrap();
    for _ in 0..50 {
        let x = [rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0)];
        let oracle = common::phi_direct_2d(x, params.delta());
        let got = phi(&x, &params);
        assert!(common::rel_err(got, oracle) < 1e-6, "x={x:?}: {got} vs {oracle}");
    }
}

#[test]
fn dilates_scale_the_origin_value() {
    let params = BRParams::new(1, 1.0, 2.0).unwrap();
    assert!((phi_scaled(&[0.0], &params) - 8.0 / 3.0).abs() < 1e-12);
}

#[test]
fn first_derivative_matches_finite_differences() {
    let params = critical_line();
    let h = 1e-5;
    for &r in &[0.7, 3.0, 11.3] {
        let fd = (phi(&[r + h], &params) - phi(&[r - h], &params)) / (2.0 * h);
        let d = radial_derivative(&[r], &params, 1).unwrap();
        assert!(common::rel_err(d, fd) < 1e-6, "ρ={r}");
        let fd2 = (phi(&[r + h], &params) - 2.0 * phi(&[r], &params) + phi(&[r - h], &params)) / (h * h);
        let d2 = radial_derivative(&[r], &params, 2).unwrap();
        assert!((d2 - fd2).abs() < 1e-4 * d2.abs().max(1.0), "ρ={r}");
    }
}

#[test]
fn derivative_vanishes_at_radial_extremum() {
    let params = critical_line();
    let f = |r: f64| phi(&[r], &params);
    let (mut a, mut b) = (0.8, 1.6);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let d = radial_derivative(&[(a + b) / 2.0], &params, 1).unwrap();
    assert!(d.abs() < 1e-6, "derivative {d} at {}", (a + b) / 2.0);
}

#[test]
fn derivative_rejects_origin() {
    assert!(radial_derivative(&[1e-7], &critical_line(), 1).is_err());
}

#[test]
fn envelope_saturates_between_100_and_200() {
    let params = critical_line();
    let a = decay_envelope_estimate(&params, 2, 100.0).unwrap();
    let b = decay_envelope_estimate(&params, 2, 200.0).unwrap();
    assert!(b.c_hat >= a.c_hat);
    assert!(b.c_hat / a.c_hat < 1.05, "{} -> {}", a.c_hat, b.c_hat);
}

#[test]
fn weighted_kernel_bounded_on_scan() {
    let params = critical_line();
    let env = decay_envelope_estimate(&params, 0, 200.0).unwrap();
    let kappa = 1.5;
    for r in scan_radii::<f64>(200.0) {
        assert!((1.0 + r).powf(kappa) * phi(&[r], &params).abs() <= env.c_hat);
    }
    assert!(env.c_hat.is_finite());
}

#[test]
fn weighted_derivative_saturates() {
    let params = critical_line();
    let sup = |radius: f64| {
        scan_radii::<f64>(radius)
            .into_iter()
            .filter(|&r| r > 1e-3)
            .map(|r| (1.0 + r).powf(1.5) * radial_derivative(&[r], &params, 1).unwrap().abs())
            .fold(0.0, f64::max)
    };
    assert!(sup(200.0) < 1.5 * sup(100.0));
}

#[test]
fn integer_case_envelope_is_finite() {
    let params = BRParams::critical(1, 0.5, 1.0).unwrap();
    assert!((params.delta() - 1.0).abs() < 1e-12);
    assert!(decay_envelope_estimate(&params, 2, 100.0).unwrap().c_hat.is_finite());
}

#[test]
fn plane_envelope_saturates() {
    let params = BRParams::critical(2, 0.8, 1.0).unwrap();
    let a = decay_envelope_estimate(&params, 2, 50.0).unwrap();
    let b = decay_envelope_estimate(&params, 2, 100.0).unwrap();
    assert!(b.c_hat / a.c_hat < 1.05);
}

#[test]
fn envelope_dominates_innermost_sample() {
    let params = critical_line();
    let env = decay_envelope_estimate(&params, 0, 10.0).unwrap();
    let r0 = scan_radii::<f64>(10.0)[0];
    assert!(env.c_hat >= (1.0 + r0).powf(1.5) * phi(&[r0], &params).abs());
}

proptest! {
    #[test]
    fn kernel_is_even(x in -50.0f64..50.0, y in -50.0f64..50.0) {
        let line = critical_line();
        prop_assert_eq!(phi(&[x], &line), phi(&[-x], &line));
        let plane = BRParams::critical(2, 0.8, 1.0).unwrap();
        prop_assert_eq!(phi(&[x, y], &plane), phi(&[-x, -y], &plane));
    }

    #[test]
    fn dilation_identity(x in -20.0f64..20.0, r in 0.1f64..16.0) {
        let params = critical_line().with_radius(r).unwrap();
        let lhs = phi_scaled(&[x], &params) / r;
        let rhs = phi(&[r * x], &critical_line());
        prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1e-300) + 1e-300);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn envelope_monotone_in_radius(a in 1.0f64..40.0, b in 1.0f64..40.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let params = critical_line();
        let x = decay_envelope_estimate(&params, 1, lo).unwrap().c_hat;
        let y = decay_envelope_estimate(&params, 1, hi).unwrap().c_hat;
        prop_assert!(y >= x);
    }
}

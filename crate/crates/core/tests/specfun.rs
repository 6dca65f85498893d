mod common;

use common::{bessel_oracle, bessel_poisson, rel_err, SCIPY_BESSEL, SCIPY_GAMMA};
use proptest::prelude::*;
use riesz_lab::specfun::{bessel_j, gamma, BesselOrder};

#[test]
fn gamma_matches_reference_table() {
    for (x, g) in SCIPY_GAMMA {
        assert!(rel_err(gamma(x).unwrap(), g) < 1e-10, "Γ({x})");
    }
}

#[test]
fn gamma_matches_libm_on_fine_scan() {
    for k in 1..=500 {
        let x = 0.1 * k as f64;
        assert!(rel_err(gamma(x).unwrap(), libm::tgamma(x)) < 1e-10, "Γ({x})");
    }
}

#[test]
fn bessel_matches_reference_table() {
    for (mu, t, j) in SCIPY_BESSEL {
        let got = bessel_j(mu, t).unwrap();
        assert!((got - j).abs() <= 1e-8 * j.abs().max(1e-3), "J_{mu}({t}) = {got}, expected {j}");
    }
}

#[test]
fn bessel_matches_integral_oracles_on_lattice() {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let mu = 0.5 + 5.5 * i as f64 / 19.0;
        for k in 0..20 {
            let t = 0.25 + 199.75 * (k as f64 / 19.0).powi(2);
            let oracle = bessel_oracle(mu, t);
            let got = bessel_j(mu, t).unwrap();
            let scale = oracle.abs().max(1e-3 * (2.0 / (std::f64::consts::PI * t)).sqrt().min(1.0));
            worst = worst.max((got - oracle).abs() / scale);
        }
    }
    assert!(worst < 1e-8, "worst relative error {worst:e}");
}

#[test]
fn integral_representations_agree() {
    for &(mu, t) in &[(0.5, 3.0), (1.7, 8.0), (3.2, 12.0), (5.5, 15.0)] {
        assert!((bessel_poisson(mu, t) - common::bessel_schlafli(mu, t)).abs() < 1e-11);
    }
}

#[test]
fn half_order_closed_form_on_interval() {
    for k in 0..=1000 {
        let t = 0.1 + 49.9 * k as f64 / 1000.0;
        let exact = (2.0 / (std::f64::consts::PI * t)).sqrt() * t.sin();
        let got = bessel_j(0.5, t).unwrap();
        assert!((got - exact).abs() <= 1e-8 * exact.abs().max(1e-6), "t = {t}");
    }
}

#[test]
fn scaled_derivative_identity() {
    for &mu in &[0.75, 1.0, 1.5, 2.5] {
        let order = BesselOrder::<f64>::new(mu).unwrap();
        let next = BesselOrder::<f64>::new(mu + 1.0).unwrap();
        for &t in &[0.5, 2.0, 7.3, 25.0, 60.0] {
            let h = 1e-4;
            let fd = (order.scaled(t + h) - order.scaled(t - h)) / (2.0 * h);
            let exact = -next.scaled(t) * t;
            let scale = exact.abs().max(1e-3 * t.powf(-mu - 0.5));
            assert!((fd - exact).abs() <= 1e-6 * scale, "μ={mu} t={t}");
        }
    }
}

proptest! {
    #[test]
    fn recurrence_residual(mu in 1.0f64..6.0, t in 1.0f64..100.0) {
        let a = bessel_j(mu - 1.0, t).unwrap();
        let b = bessel_j(mu + 1.0, t).unwrap();
        let c = bessel_j(mu, t).unwrap();
        prop_assert!((a + b - 2.0 * mu / t * c).abs() <= 1e-7 * (1.0 + c.abs()));
    }

    #[test]
    fn gamma_recurrence(x in 0.05f64..48.0) {
        let lhs = gamma(x + 1.0).unwrap();
        let rhs = x * gamma(x).unwrap();
        prop_assert!(rel_err(lhs, rhs) < 1e-10);
    }

    #[test]
    fn bessel_bounded_by_one(mu in 0.0f64..6.0, t in 0.0f64..200.0) {
        prop_assert!(bessel_j(mu, t).unwrap().abs() <= 1.0 + 1e-12);
    }
}

//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod_15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = 0.0;
    let mut g = 0.0;
    for (i, (&x, &w)) in KRONROD_NODES.iter().zip(&KRONROD_WEIGHTS).enumerate() {
        let v = if x == 0.0 { f(c) } else { f(c - h * x) + f(c + h * x) };
        k += w * v;
        if i % 2 == 1 {
            g += GAUSS_WEIGHTS[i / 2] * v;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let (left, el) = kronrod_15(f, a, 0.5 * (a + b));
    let (right, er) = kronrod_15(f, 0.5 * (a + b), b);
    let sum = left + right;
    if depth == 0 || el + er <= tol || (sum - whole).abs() <= 1e-15 * sum.abs() {
        return sum;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, left, tol / 2.0, depth - 1) + adapt(f, m, b, right, tol / 2.0, depth - 1)
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (whole, _) = kronrod_15(&f, a, b);
    adapt(&f, a, b, whole, tol, 40)
}

/// `∫_a^b f` split into `pieces` panels, for oscillatory integrands.
pub fn integrate_panels(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let w = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| integrate(&f, a + i as f64 * w, a + (i + 1) as f64 * w, tol / pieces as f64))
        .sum()
}

/// `J_μ(t)` from the Poisson integral with `Γ` taken from libm.
pub fn bessel_poisson(mu: f64, t: f64) -> f64 {
    let pre = (t / 2.0).powf(mu) / (libm::tgamma(mu + 0.5) * PI.sqrt());
    let pieces = 8 + t.ceil() as usize;
    pre * integrate_panels(|s| (t * s).cos() * (1.0 - s * s).max(0.0).powf(mu - 0.5), -1.0, 1.0, pieces, 1e-14)
}

/// `J_μ(t)` from Schläfli's integral, which has no large cancelling prefactor.
pub fn bessel_schlafli(mu: f64, t: f64) -> f64 {
    let pieces = 8 + t.ceil() as usize;
    let oscillatory = integrate_panels(|tau| (mu * tau - t * tau.sin()).cos(), 0.0, PI, pieces, 1e-14) / PI;
    let top = (60.0 / t).asinh().max(60.0 / mu.max(1e-3)).min(60.0);
    let damped = integrate_panels(|s| (-t * s.sinh() - mu * s).exp(), 0.0, top, 64, 1e-15);
    oscillatory - (mu * PI).sin() / PI * damped
}

/// Poisson integral for small arguments, Schläfli's integral beyond.
pub fn bessel_oracle(mu: f64, t: f64) -> f64 {
    if t <= 10.0 {
        bessel_poisson(mu, t)
    } else {
        bessel_schlafli(mu, t)
    }
}

/// `∫_{|ξ|≤1} (1 - |ξ|²)^δ e^{2πi x·ξ} dξ` evaluated directly for `n = 1`.
pub fn phi_direct_1d(x: f64, delta: f64) -> f64 {
    let pieces = 8 + (4.0 * x.abs()).ceil() as usize;
    2.0 * integrate_panels(|s| (1.0 - s * s).max(0.0).powf(delta) * (2.0 * PI * x * s).cos(), 0.0, 1.0, pieces, 1e-13)
}

/// The same integral for `n = 2` in polar coordinates; the angular integral
/// is done numerically rather than through a Bessel function.
pub fn phi_direct_2d(x: [f64; 2], delta: f64) -> f64 {
    let r = x[0].hypot(x[1]);
    let pieces = 8 + (4.0 * r).ceil() as usize;
    integrate_panels(
        |rho| {
            let angular = 2.0
                * integrate_panels(|theta| (2.0 * PI * r * rho * theta.cos()).cos(), 0.0, PI, pieces, 1e-13);
            (1.0 - rho * rho).max(0.0).powf(delta) * rho * angular
        },
        0.0,
        1.0,
        pieces,
        1e-12,
    )
}

/// `J_μ(t)` reference values from scipy.special.jv.
pub const SCIPY_BESSEL: [(f64, f64, f64); 10] = [
    (0.5, 0.1, 0.2518929403260012),
    (0.5, 1.5707963267948966, 0.6366197723675822),
    (1.0, 30.0, -0.11875106261662291),
    (1.5, 2.0, 0.49129377868716273),
    (2.5, 10.0, 0.19665848358181753),
    (3.25, 45.0, 0.0054514783769817905),
    (4.0, 120.0, 0.0724903963091012),
    (5.75, 7.5, 0.3538166805510145),
    (0.75, 200.0, -0.05603368661737143),
    (6.0, 60.0, 0.10164054540455696),
];

/// `Γ(x)` reference values from scipy.special.gamma.
pub const SCIPY_GAMMA: [(f64, f64); 6] = [
    (0.3, 2.991568987687591),
    (1.7, 0.9086387328532907),
    (4.5, 11.63172839656745),
    (10.25, 639232.5987795768),
    (33.0, 2.6313083693369355e35),
    (49.5, 8.667601843135275e61),
];

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

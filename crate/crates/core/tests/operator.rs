use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riesz_lab::grid::{GridBox, GridFunction};
use riesz_lab::kernel::phi_scaled;
use riesz_lab::operator::{
    br_apply_convolution, br_apply_spectral, br_maximal, dyadic_half_grid, hardy_littlewood, FrequencyGrid,
};
use riesz_lab::BRParams;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;

fn line(l: f64, m: usize, f: impl Fn(f64) -> f64) -> GridFunction<f64> {
    GridFunction::from_fn(GridBox::new(1, l).unwrap(), m, |x| f(x[0])).unwrap()
}

fn bump(c: f64, w: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        let t = (x - c) / w;
        if t.abs() < 1.0 {
            (-1.0 / (1.0 - t * t)).exp()
        } else {
            0.0
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn spectral_and_convolution_routes_agree_on_bumps() {
    let params = BRParams::new(1, 0.5, 4.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let w = rng.gen_range(0.5..3.0);
        let c = rng.gen_range(-4.0 + w..4.0 - w);
        let a = rng.gen_range(0.5..2.0);
        let f = line(16.0, 4096, |x| a * bump(c, w)(x));
        let s = br_apply_spectral(&f, &params).unwrap();
        let k = br_apply_convolution(&f, &params).unwrap();
        let diff: Vec<f64> = s.output.values().iter().zip(k.output.values()).map(|(a, b)| a - b).collect();
        let rel = l2(&diff) / l2(f.values());
        let allowed = 1e-3f64.max(k.tail_bound + s.wrap_bound);
        assert!(rel <= allowed, "relative L² gap {rel:e} above {allowed:e}");
    }
}

#[test]
fn single_modes_are_scaled_exactly() {
    let (l, m) = (4.0, 256);
    let params = BRParams::new(1, 0.5, 3.0).unwrap();
    for k in [1usize, 5, 12, 23, 24, 40] {
        let xi = k as f64 / (2.0 * l);
        let f = line(l, m, |x| (2.0 * PI * xi * x).cos());
        let out = br_apply_spectral(&f, &params).unwrap().output;
        let factor = if xi >= 3.0 { 0.0 } else { (1.0 - xi * xi / 9.0).sqrt() };
        for (o, v) in out.values().iter().zip(f.values()) {
            assert!((o - factor * v).abs() < 1e-12, "mode {k}");
        }
    }
}

#[test]
fn plane_mode_is_scaled_exactly() {
    let (l, m) = (2.0, 32);
    let params = BRParams::new(2, 1.25, 2.0).unwrap();
    let (a, b) = (3.0 / (2.0 * l), 4.0 / (2.0 * l));
    let f = GridFunction::from_fn(GridBox::new(2, l).unwrap(), m, |x: &[f64]| (2.0 * PI * (a * x[0] + b * x[1])).sin())
        .unwrap();
    let out = br_apply_spectral(&f, &params).unwrap().output;
    let factor = (1.0f64 - (a * a + b * b) / 4.0).powf(1.25);
    for (o, v) in out.values().iter().zip(f.values()) {
        assert!((o - factor * v).abs() < 1e-12);
    }
}

#[test]
fn impulse_reproduces_sampled_kernel() {
    let (l, m) = (16.0, 2048);
    let params = BRParams::new(1, 0.5, 2.0).unwrap();
    let h = 2.0 * l / m as f64;
    let mut v = vec![0.0; m];
    v[m / 2] = 1.0 / h;
    let f = GridFunction::from_values(GridBox::new(1, l).unwrap(), m, v).unwrap();
    let x0 = f.point(m / 2)[0];
    let conv = br_apply_convolution(&f, &params).unwrap();
    let spec = br_apply_spectral(&f, &params).unwrap();
    let peak = phi_scaled(&[0.0], &params);
    for i in (0..m).step_by(7) {
        let x = f.point(i)[0] - x0;
        if x.abs() > l / 2.0 {
            continue;
        }
        let exact = phi_scaled(&[x], &params);
        assert!((conv.output.values()[i] - exact).abs() <= 1e-12 * peak + conv.tail_bound);
        assert!((spec.output.values()[i] - exact).abs() <= h * peak + spec.wrap_bound, "x = {x}");
    }
}

#[test]
fn radius_scaling_covariance() {
    let m = 512;
    let f = line(8.0, m, bump(0.5, 1.5));
    let r = 2.5;
    let a = br_apply_spectral(&f, &BRParams::new(1, 0.5, r).unwrap()).unwrap().output;
    let g = GridFunction::from_values(GridBox::new(1, 8.0 * r).unwrap(), m, f.values().to_vec()).unwrap();
    let b = br_apply_spectral(&g, &BRParams::new(1, 0.5, 1.0).unwrap()).unwrap().output;
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn multiplier_grid_invariants() {
    let f = line(4.0, 128, |_| 0.0);
    let grid = FrequencyGrid::new(&f, &BRParams::new(1, 0.75, 5.0).unwrap()).unwrap();
    assert_eq!(grid.values()[0], 1.0);
    for (k, &v) in grid.values().iter().enumerate() {
        assert!((0.0..=1.0).contains(&v));
        if grid.frequency(k).abs() >= 5.0 {
            assert_eq!(v, 0.0);
        }
    }
}

#[test]
fn maximal_over_singleton_is_modulus() {
    let f = line(8.0, 512, |x| bump(0.0, 1.0)(x) * (3.0 * x).sin());
    let single = br_maximal(&f, 0.5, &[3.0]).unwrap();
    let direct = br_apply_spectral(&f, &BRParams::new(1, 0.5, 3.0).unwrap()).unwrap().output;
    for (a, b) in single.values().iter().zip(direct.values()) {
        assert_eq!(*a, b.abs());
    }
}

#[test]
fn maximal_dominates_each_radius() {
    let f = line(8.0, 512, bump(0.3, 1.2));
    let radii = dyadic_half_grid(0.5, 10);
    let max = br_maximal(&f, 0.5, &radii).unwrap();
    for &r in &radii {
        let one = br_apply_spectral(&f, &BRParams::new(1, 0.5, r).unwrap()).unwrap().output;
        for (a, b) in max.values().iter().zip(one.values()) {
            assert!(*a >= b.abs());
        }
    }
}

#[test]
fn maximal_saturates_under_radius_refinement() {
    let f = line(16.0, 4096, |x| bump(0.0, 1.0)(x) * (1.0 - 3.0 * x * x));
    let coarse = dyadic_half_grid(0.25, 16);
    let fine: Vec<f64> = (0..31).map(|k| 0.25 * 2f64.powf(k as f64 / 4.0)).collect();
    let a = br_maximal(&f, 0.5, &coarse).unwrap();
    let b = br_maximal(&f, 0.5, &fine).unwrap();
    let gap = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 0.02 * b.max_abs(), "gap {gap}");
}

#[test]
fn hardy_littlewood_basic_properties() {
    let f = line(4.0, 256, |x| (2.0 * x).cos());
    let h = f.spacing();
    let m = hardy_littlewood(&f, &[h, 4.0 * h, 1.0]).unwrap();
    for (a, b) in m.values().iter().zip(f.values()) {
        assert!(*a >= b.abs() - 1e-12);
    }
    let one = line(4.0, 256, |_| 1.0);
    let m1 = hardy_littlewood(&one, &[h, 2.0, 8.0]).unwrap();
    assert!(m1.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert!(hardy_littlewood(&one, &[h / 2.0]).is_err());
}

#[test]
fn hardy_littlewood_of_indicator_decays_like_inverse_distance() {
    let f = line(16.0, 2048, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 });
    let h = f.spacing();
    let radii: Vec<f64> = (1..=2048).map(|k| k as f64 * h).collect();
    let m = hardy_littlewood(&f, &radii).unwrap();
    for i in 0..f.len() {
        let x = f.point(i)[0];
        if (4.0..=8.0).contains(&x.abs()) {
            let expected = 1.0 / (2.0 * x.abs());
            assert!((m.values()[i] / expected - 1.0).abs() < 0.2, "x = {x}");
        }
    }
}

fn spectrum(v: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operator_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -2.0f64..2.0) {
        let params = BRParams::new(1, 0.5, 2.0).unwrap();
        let f = line(8.0, 256, bump(c, 1.0));
        let g = line(8.0, 256, |x| x * bump(-c, 1.5)(x));
        let lhs = br_apply_spectral(&f.zip_map(&g, |x, y| a * x + b * y), &params).unwrap().output;
        let tf = br_apply_spectral(&f, &params).unwrap().output;
        let tg = br_apply_spectral(&g, &params).unwrap().output;
        for i in 0..lhs.len() {
            let rhs = a * tf.values()[i] + b * tg.values()[i];
            prop_assert!((lhs.values()[i] - rhs).abs() < 1e-12);
        }
        let lhs = br_apply_convolution(&f.zip_map(&g, |x, y| a * x + b * y), &params).unwrap().output;
        let tf = br_apply_convolution(&f, &params).unwrap().output;
        let tg = br_apply_convolution(&g, &params).unwrap().output;
        for i in 0..lhs.len() {
            prop_assert!((lhs.values()[i] - (a * tf.values()[i] + b * tg.values()[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn output_spectrum_never_grows(v in prop::collection::vec(-1.0f64..1.0, 128), r in 0.5f64..8.0, d in 0.6f64..2.0) {
        let f = GridFunction::from_values(GridBox::new(1, 4.0).unwrap(), 128, v).unwrap();
        let out = br_apply_spectral(&f, &BRParams::new(1, d, r).unwrap()).unwrap().output;
        for (a, b) in spectrum(out.values()).iter().zip(spectrum(f.values())) {
            prop_assert!(*a <= b + 1e-12);
        }
    }
}

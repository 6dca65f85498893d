mod common;

use proptest::prelude::*;
use riesz_lab::grid::{multi_indices, Cube, GridBox, GridFunction};

fn line(l: f64, m: usize, f: impl Fn(f64) -> f64) -> GridFunction<f64> {
    GridFunction::from_fn(GridBox::new(1, l).unwrap(), m, |x| f(x[0])).unwrap()
}

#[test]
fn gaussian_integral_against_quadrature_oracle() {
    let oracle = common::integrate(|x| (-x * x).exp(), -8.0, 8.0, 1e-15);
    let g = line(8.0, 4096, |x| (-x * x).exp());
    assert!((g.integrate() - oracle).abs() < 1e-8);
}

#[test]
fn plane_integral_against_quadrature_oracle() {
    let one_d = common::integrate(|x| (-x * x).exp() * (1.0 + x * x), -6.0, 6.0, 1e-15);
    let g = GridFunction::from_fn(GridBox::new(2, 6.0).unwrap(), 512, |x: &[f64]| {
        (-(x[0] * x[0] + x[1] * x[1])).exp() * (1.0 + x[0] * x[0]) * (1.0 + x[1] * x[1])
    })
    .unwrap();
    assert!((g.integrate() - one_d * one_d).abs() < 1e-8 * one_d * one_d);
}

#[test]
fn refinement_converges_at_second_order() {
    let f = |x: f64| (1.0 + x * x).recip() * (3.0 * x).cos();
    let i = |m| line(2.0, m, f).integrate();
    for m in [16, 32, 64, 128] {
        let (a, b, c) = (i(m), i(2 * m), i(4 * m));
        assert!((a - b).abs() <= 4.0 * (b - c).abs() + 1e-12, "M = {m}");
    }
}

#[test]
fn moments_of_plane_monomials() {
    let g = GridFunction::from_fn(GridBox::new(2, 1.0).unwrap(), 256, |x| x[0] * x[0]).unwrap();
    for alpha in multi_indices(2, 3) {
        let m = g.moment(&alpha, &[0.0, 0.0]);
        let exact = |k: usize| if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
        let want = exact(alpha[0] + 2) * exact(alpha[1]);
        assert!((m - want).abs() < 1e-4, "α = {alpha:?}");
    }
}

#[test]
fn cubes_partition_the_line() {
    let g = line(4.0, 64, |_| 1.0);
    let mut seen = vec![0u8; g.len()];
    for k in 0..8 {
        let cube = Cube::new(vec![-3.5 + k as f64], 1.0).unwrap();
        for i in g.cells_in(&cube) {
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
}

#[test]
fn single_precision_tracks_double() {
    let d = line(8.0, 1024, |x| (-x * x).exp()).integrate();
    let s = GridFunction::<f32>::from_fn(GridBox::new(1, 8.0f32).unwrap(), 1024, |x| (-x[0] * x[0]).exp())
        .unwrap()
        .integrate();
    assert!((s as f64 - d).abs() < 1e-5);
}

#[test]
fn csv_round_trip_preserves_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    let g = GridFunction::from_fn(GridBox::new(2, 1.5).unwrap(), 8, |x| x[0] - 2.0 * x[1]).unwrap();
    g.write_csv(&path).unwrap();
    let back = GridFunction::read_csv(&path).unwrap();
    assert_eq!(back.header(), g.header());
    assert_eq!(back.values(), g.values());
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 64)
}

proptest! {
    #[test]
    fn integrate_is_linear(a in samples(), b in samples(), s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let dom = GridBox::new(1, 2.0).unwrap();
        let f = GridFunction::from_values(dom, 64, a).unwrap();
        let g = GridFunction::from_values(dom, 64, b).unwrap();
        let combo = f.zip_map(&g, |x, y| s * x + t * y);
        let lhs = combo.integrate();
        let rhs = s * f.integrate() + t * g.integrate();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + f.l1_norm() + g.l1_norm()) * (1.0 + s.abs() + t.abs()));
    }

    #[test]
    fn integrate_is_positive(a in prop::collection::vec(0.0f64..5.0, 64)) {
        let f = GridFunction::from_values(GridBox::new(1, 3.0).unwrap(), 64, a).unwrap();
        prop_assert!(f.integrate() >= 0.0);
    }

    #[test]
    fn zeroth_moment_is_integral(a in samples(), c in -5.0f64..5.0) {
        let f = GridFunction::from_values(GridBox::new(1, 2.0).unwrap(), 64, a).unwrap();
        prop_assert!((f.moment(&[0], &[c]) - f.integrate()).abs() <= 1e-12 * (1.0 + f.l1_norm()));
    }

    #[test]
    fn dilation_keeps_centre(x in -3.0f64..3.0, y in -3.0f64..3.0, side in 0.01f64..4.0, lambda in 0.1f64..8.0) {
        let q = Cube::new(vec![x, y], side).unwrap();
        let d = q.dilate(lambda).unwrap();
        prop_assert_eq!(d.center(), q.center());
        prop_assert!((d.side() - lambda * side).abs() <= 1e-15 * lambda * side);
    }
}

//! Discrete Fourier transforms on the periodized box.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;
use num_traits::Float;
use rustfft::{Fft, FftNum, FftPlanner};

use crate::grid::GridFunction;
use crate::scalar::{from_usize, Real};

/// Transform of a grid function, kept for repeated multiplier application.
pub(crate) struct Spectrum<T> {
    data: Vec<Complex<T>>,
    dim: usize,
    points: usize,
    half_width: T,
}

/// Signed lattice frequency `ξ_k = k'/(2L)` with `k' ∈ [-M/2, M/2)`.
#[inline]
pub(crate) fn frequency<T: Real>(k: usize, points: usize, half_width: T) -> T {
    let signed = if k < points / 2 { k as f64 } else { k as f64 - points as f64 };
    T::lit(signed) / (half_width + half_width)
}

type PlanKey = (TypeId, usize, bool);

/// Shared plan for a transform length and direction.
fn plan<T: FftNum>(points: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    static PLANS: OnceLock<Mutex<HashMap<PlanKey, Box<dyn Any + Send + Sync>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (TypeId::of::<T>(), points, inverse);
    let mut map = plans.lock().expect("fft plan cache poisoned");
    let entry = map.entry(key).or_insert_with(|| {
        let mut planner = FftPlanner::<T>::new();
        let fft = if inverse {
            planner.plan_fft_inverse(points)
        } else {
            planner.plan_fft_forward(points)
        };
        Box::new(fft)
    });
    entry
        .downcast_ref::<Arc<dyn Fft<T>>>()
        .expect("plan cache keyed by scalar type")
        .clone()
}

fn transform<T: Real + FftNum>(data: &mut [Complex<T>], dim: usize, points: usize, inverse: bool) {
    let fft = plan::<T>(points, inverse);
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    if dim == 1 {
        return;
    }
    let mut column = vec![Complex::new(T::zero(), T::zero()); points];
    for j in 0..points {
        for i in 0..points {
            column[i] = data[i * points + j];
        }
        fft.process_with_scratch(&mut column, &mut scratch);
        for i in 0..points {
            data[i * points + j] = column[i];
        }
    }
}

impl<T: Real + FftNum> Spectrum<T> {
    pub(crate) fn forward(f: &GridFunction<T>) -> Self {
        let mut data: Vec<Complex<T>> = f.values().iter().map(|&v| Complex::new(v, T::zero())).collect();
        transform(&mut data, f.dim(), f.points_per_axis(), false);
        Self {
            data,
            dim: f.dim(),
            points: f.points_per_axis(),
            half_width: f.half_width(),
        }
    }

    /// `|ξ|²` at every stored coefficient.
    pub(crate) fn frequency_norms2(&self) -> Vec<T> {
        let m = self.points;
        let l = self.half_width;
        if self.dim == 1 {
            return (0..m).map(|k| frequency(k, m, l).powi(2)).collect();
        }
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            let a = frequency(i, m, l).powi(2);
            for j in 0..m {
                out.push(a + frequency(j, m, l).powi(2));
            }
        }
        out
    }

    /// Inverse transform of `m_k · f̂_k`; returns the real part and the largest
    /// discarded imaginary magnitude.
    pub(crate) fn apply(&self, multiplier: &[T]) -> (Vec<T>, T) {
        let mut data: Vec<Complex<T>> = self
            .data
            .iter()
            .zip(multiplier)
            .map(|(&c, &m)| c * m)
            .collect();
        transform(&mut data, self.dim, self.points, true);
        let scale = T::one() / from_usize::<T>(data.len());
        let mut residue = T::zero();
        let values = data
            .into_iter()
            .map(|c| {
                residue = residue.max(Float::abs(c.im * scale));
                c.re * scale
            })
            .collect();
        (values, residue)
    }

    /// Inverse transform of `f̂ · k` into `buf`, then `acc_i = max(acc_i, |Re|, |Im|)`.
    /// For a real `f` and `k = k_a + i k_b` with real kernels `k_a`, `k_b`,
    /// the real and imaginary parts are the two convolutions.
    pub(crate) fn convolve_max_into(&self, kernel: &[Complex<T>], buf: &mut Vec<Complex<T>>, acc: &mut [T]) {
        buf.clear();
        buf.extend(self.data.iter().zip(kernel).map(|(&a, &b)| a * b));
        transform(buf, self.dim, self.points, true);
        let scale = T::one() / from_usize::<T>(buf.len());
        for (a, c) in acc.iter_mut().zip(buf.iter()) {
            *a = a.max(Float::abs(c.re * scale)).max(Float::abs(c.im * scale));
        }
    }
}

/// Transform of `h^n k` for a kernel sampled at wrapped offsets.
pub(crate) fn kernel_spectrum<T: Real + FftNum>(
    kernel: &[T],
    dim: usize,
    points: usize,
    cell_volume: T,
) -> Vec<Complex<T>> {
    let mut k: Vec<Complex<T>> = kernel.iter().map(|&v| Complex::new(v * cell_volume, T::zero())).collect();
    transform(&mut k, dim, points, false);
    k
}

/// Wrapped lattice offset of index `k`: `k·h` for `k < M/2`, else `(k - M)·h`.
#[inline]
pub(crate) fn wrapped_offset<T: Real>(k: usize, points: usize, spacing: T) -> T {
    let signed = if k < points / 2 { k as f64 } else { k as f64 - points as f64 };
    T::lit(signed) * spacing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridBox;

    #[test]
    fn identity_multiplier_round_trips() {
        let f = GridFunction::from_fn(GridBox::new(2, 1.0).unwrap(), 16, |x: &[f64]| x[0] - 2.0 * x[1] * x[1]).unwrap();
        let (back, residue) = Spectrum::forward(&f).apply(&vec![1.0; f.len()]);
        assert!(residue < 1e-14);
        for (a, b) in back.iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn frequencies_are_signed() {
        assert_eq!(frequency::<f64>(1, 8, 2.0), 0.25);
        assert_eq!(frequency::<f64>(7, 8, 2.0), -0.25);
        assert_eq!(frequency::<f64>(4, 8, 2.0), -1.0);
        assert_eq!(wrapped_offset::<f64>(6, 8, 0.5), -1.0);
    }

    #[test]
    fn delta_kernel_convolution_is_identity() {
        let f = GridFunction::from_fn(GridBox::new(1, 1.0).unwrap(), 32, |x: &[f64]| x[0].sin()).unwrap();
        let h = f.spacing();
        let mut kernel = vec![0.0; 32];
        kernel[0] = 1.0 / h;
        let mut out = vec![0.0; 32];
        Spectrum::forward(&f).convolve_max_into(&kernel_spectrum(&kernel, 1, 32, h), &mut Vec::new(), &mut out);
        for (a, b) in out.iter().zip(f.values()) {
            assert!((a - b.abs()).abs() < 1e-13);
        }
    }
}

//! Bochner–Riesz means `T^δ_R` by two independent routes, the maximal
//! operator `T^δ_*` over a finite radius grid, and the centred Hardy–Littlewood
//! maximal function.
//!
//! The spectral route multiplies the discrete transform on the periodized box
//! by `m(ξ) = (1 - |ξ|²/R²)^δ_+`. The convolution route sums the sampled kernel
//! `φ_{1/R}` directly over a finite window. Both carry an error bound against
//! the operator on `ℝ^n`.

use log::{debug, warn};
use rayon::prelude::*;
use rustfft::FftNum;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::{frequency, Spectrum};
use crate::grid::GridFunction;
use crate::kernel::{envelope_constant, phi_scaled, BRParams};
use crate::scalar::{from_usize, Real};

/// Imaginary residue tolerated by the spectral route, relative to `max |f|`.
pub const RESIDUE_LIMIT: f64 = 1e-9;
/// Convolution tails above this fraction of `max |f|` are logged.
pub const TAIL_WARN: f64 = 1e-3;
/// Convolution windows are sized to push the tail below this fraction of `max |f|`.
pub const TAIL_TARGET: f64 = 1e-8;

/// `m(ξ) = (1 - |ξ|²/R²)^δ_+` from `|ξ|²`.
#[inline]
pub fn multiplier<T: Real>(xi_norm2: T, radius: T, delta: T) -> T {
    let base = T::one() - xi_norm2 / (radius * radius);
    if base <= T::zero() {
        T::zero()
    } else {
        base.powf(delta)
    }
}

/// Dual lattice `ξ_k = k/(2L)` of a periodized box with the multiplier sampled on it.
#[derive(Clone, Debug)]
pub struct FrequencyGrid<T> {
    dim: usize,
    points: usize,
    half_width: T,
    values: Vec<T>,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(f: &GridFunction<T>, params: &BRParams<T>) -> Result<Self> {
        check_dims(f, params)?;
        let (m, l) = (f.points_per_axis(), f.half_width());
        let xi2 = |k: usize| frequency(k, m, l).powi(2);
        let values = if f.dim() == 1 {
            (0..m).map(|k| multiplier(xi2(k), params.radius(), params.delta())).collect()
        } else {
            let mut v = Vec::with_capacity(m * m);
            for i in 0..m {
                for j in 0..m {
                    v.push(multiplier(xi2(i) + xi2(j), params.radius(), params.delta()));
                }
            }
            v
        };
        Ok(Self {
            dim: f.dim(),
            points: m,
            half_width: l,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Frequency of lattice index `k` along one axis.
    pub fn frequency(&self, k: usize) -> T {
        frequency(k, self.points, self.half_width)
    }

    /// Largest resolved frequency `M/(4L)`.
    pub fn nyquist(&self) -> T {
        from_usize::<T>(self.points) / (T::lit(4.0) * self.half_width)
    }

    /// Multiplier samples in the storage order of the grid.
    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Output of [`br_apply_spectral`].
#[derive(Clone, Debug)]
pub struct SpectralOutput<T> {
    pub output: GridFunction<T>,
    /// Largest discarded imaginary part.
    pub imaginary_residue: T,
    /// Pointwise bound on the periodization error against `ℝ^n`.
    pub wrap_bound: T,
}

/// Output of [`br_apply_convolution`].
#[derive(Clone, Debug)]
pub struct ConvolutionOutput<T> {
    pub output: GridFunction<T>,
    /// Pointwise bound on the kernel mass dropped outside the window.
    pub tail_bound: T,
    /// Half-width of the summation window.
    pub window: T,
}

/// Error metadata shared by both routes.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RouteMetadata {
    pub route: String,
    pub delta: f64,
    pub radius: f64,
    pub imaginary_residue: f64,
    pub wrap_bound: f64,
    pub tail_bound: f64,
    pub window: f64,
}

fn check_dims<T: Real>(f: &GridFunction<T>, params: &BRParams<T>) -> Result<()> {
    if f.dim() != params.dim() {
        return Err(Error::InvalidParams(format!(
            "grid dimension {} does not match operator dimension {}",
            f.dim(),
            params.dim()
        )));
    }
    Ok(())
}

/// Envelope `R^n Ĉ (1 + R d)^{-κ}` bounding `|φ_{1/R}|` at distance `d`.
fn kernel_envelope(params_dim: usize, delta: f64, radius: f64, distance: f64) -> f64 {
    let kappa = (params_dim as f64 + 1.0) / 2.0 + delta;
    let c_hat = envelope_constant(params_dim, delta, 0);
    radius.powi(params_dim as i32) * c_hat * (1.0 + radius * distance.max(0.0)).powf(-kappa)
}

/// `‖f‖₁ Σ_{m ≠ 0} sup |φ_{1/R}|` over the periodic images of the support.
fn wrap_bound<T: Real>(f: &GridFunction<T>, params: &BRParams<T>) -> f64 {
    let l = f.half_width().to_f64_lossy();
    let support = match f.support_radius(T::zero()) {
        Some(s) => s.to_f64_lossy(),
        None => return 0.0,
    };
    let mass = f.l1_norm().to_f64_lossy();
    let (n, delta, radius) = (params.dim(), params.delta().to_f64_lossy(), params.radius().to_f64_lossy());
    let kappa = (n as f64 + 1.0) / 2.0 + delta;
    let image = |k: f64| kernel_envelope(n, delta, radius, 2.0 * l * k - l - support);
    let count = |k: usize| if n == 1 { 2.0 } else { 8.0 * k as f64 };
    const SHELLS: usize = 4096;
    let mut sum: f64 = (1..=SHELLS).map(|k| count(k) * image(k as f64)).sum();
    // remaining shells: Σ_{k>K} c k^{n-1} (R(2Lk - L - s))^{-κ} by an integral bound
    let k0 = SHELLS as f64;
    let d0 = 2.0 * l * k0 - l - support;
    if d0 > 0.0 && kappa > n as f64 {
        let per = radius.powi(n as i32) * envelope_constant(n, delta, 0) * (radius * 2.0 * l).powf(-kappa);
        let c = if n == 1 { 2.0 } else { 8.0 };
        let shift = (l + support) / (2.0 * l);
        sum += c * per * (k0 - shift).powf(n as f64 - kappa) / (kappa - n as f64) * (k0 / (k0 - shift)).powi(n as i32 - 1);
    } else {
        sum = f64::INFINITY;
    }
    mass * sum
}

/// `T^δ_R f` as the inverse transform of `m(ξ) f̂(ξ)` on the periodized box.
pub fn br_apply_spectral<T: Real + FftNum>(f: &GridFunction<T>, params: &BRParams<T>) -> Result<SpectralOutput<T>> {
    let freq = FrequencyGrid::new(f, params)?;
    if params.radius() > freq.nyquist() {
        debug!(
            "R = {} exceeds the grid Nyquist frequency {}; spectral and kernel routes differ",
            params.radius(),
            freq.nyquist()
        );
    }
    let spectrum = Spectrum::forward(f);
    let (values, residue) = spectrum.apply(freq.values());
    check_residue(residue, f.max_abs())?;
    Ok(SpectralOutput {
        output: f.with_values(values),
        imaginary_residue: residue,
        wrap_bound: T::lit(wrap_bound(f, params)),
    })
}

fn check_residue<T: Real>(residue: T, scale: T) -> Result<()> {
    let limit = T::lit(RESIDUE_LIMIT) * scale;
    if residue > limit && residue > T::epsilon() {
        return Err(Error::ImaginaryResidue {
            residue: residue.to_f64_lossy(),
            limit: limit.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `T^δ_R f = φ_{1/R} * f` by direct summation over a kernel window.
pub fn br_apply_convolution<T: Real>(f: &GridFunction<T>, params: &BRParams<T>) -> Result<ConvolutionOutput<T>> {
    check_dims(f, params)?;
    let n = f.dim();
    let m = f.points_per_axis();
    let h = f.spacing();
    let l = f.half_width().to_f64_lossy();
    let scale = f.max_abs().to_f64_lossy();
    let mass = f.l1_norm().to_f64_lossy();
    let (delta, radius) = (params.delta().to_f64_lossy(), params.radius().to_f64_lossy());

    // smallest window whose tail is below target, capped at the box diameter
    let diameter = 2.0 * l * (n as f64).sqrt();
    let tail_at = |w: f64| mass * kernel_envelope(n, delta, radius, w);
    let target = TAIL_TARGET * scale;
    let (window, tail) = if tail_at(diameter) <= target || scale == 0.0 {
        let (mut lo, mut hi) = (0.0, diameter);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if tail_at(mid) <= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (hi, tail_at(hi))
    } else {
        (diameter, 0.0)
    };
    let (window, tail) = if window >= diameter { (diameter, 0.0) } else { (window, tail) };
    if tail > TAIL_WARN * scale {
        warn!("convolution tail bound {tail:.3e} exceeds {TAIL_WARN} max|f|");
    }

    let reach = ((window / h.to_f64_lossy()).ceil() as usize).min(m - 1);
    let width = 2 * reach + 1;
    let kernel: Vec<T> = if n == 1 {
        (0..width)
            .map(|d| phi_scaled(&[from_usize::<T>(d) * h - from_usize::<T>(reach) * h], params))
            .collect()
    } else {
        (0..width * width)
            .into_par_iter()
            .map(|k| {
                let (a, b) = (k / width, k % width);
                let off = from_usize::<T>(reach) * h;
                phi_scaled(&[from_usize::<T>(a) * h - off, from_usize::<T>(b) * h - off], params)
            })
            .collect()
    };

    let support: Vec<(usize, T)> = f
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != T::zero())
        .map(|(i, &v)| (i, v))
        .collect();
    let vol = f.cell_volume();
    let values: Vec<T> = (0..f.len())
        .into_par_iter()
        .map(|i| {
            let xi = f.unflatten(i);
            let mut acc = T::zero();
            for &(j, v) in &support {
                let xj = f.unflatten(j);
                let d0 = xi[0] as isize - xj[0] as isize;
                if d0.unsigned_abs() > reach {
                    continue;
                }
                let k = if n == 1 {
                    (d0 + reach as isize) as usize
                } else {
                    let d1 = xi[1] as isize - xj[1] as isize;
                    if d1.unsigned_abs() > reach {
                        continue;
                    }
                    (d0 + reach as isize) as usize * width + (d1 + reach as isize) as usize
                };
                acc += kernel[k] * v;
            }
            acc * vol
        })
        .collect();
    Ok(ConvolutionOutput {
        output: f.with_values(values),
        tail_bound: T::lit(tail),
        window: T::lit(window),
    })
}

/// `max_{R ∈ R_grid} |T^δ_R f|` by the spectral route, a lower estimate of `T^δ_* f`.
pub fn br_maximal<T: Real + FftNum>(f: &GridFunction<T>, delta: T, radii: &[T]) -> Result<GridFunction<T>> {
    if radii.is_empty() {
        return Err(Error::InvalidParams("radius grid is empty".into()));
    }
    let params: Vec<BRParams<T>> = radii
        .iter()
        .map(|&r| BRParams::new(f.dim(), delta, r))
        .collect::<Result<_>>()?;
    let spectrum = Spectrum::forward(f);
    let xi2 = spectrum.frequency_norms2();
    let scale = f.max_abs();
    let outputs: Vec<Vec<T>> = params
        .par_iter()
        .map(|p| {
            let mult: Vec<T> = xi2.iter().map(|&x| multiplier(x, p.radius(), delta)).collect();
            let (values, residue) = spectrum.apply(&mult);
            check_residue(residue, scale).map(|_| values)
        })
        .collect::<Result<_>>()?;
    let mut best = vec![T::zero(); f.len()];
    for out in outputs {
        for (b, v) in best.iter_mut().zip(out) {
            *b = b.max(v.abs());
        }
    }
    Ok(f.with_values(best))
}

/// Dyadic-half radius grid `base · 2^{k/2}`, `k = 0..count`.
pub fn dyadic_half_grid<T: Real>(base: T, count: usize) -> Vec<T> {
    (0..count)
        .map(|k| base * T::lit(2f64.powf(k as f64 / 2.0)))
        .collect()
}

/// Centred maximal function `max_r avg_{Q(x, r) ∩ box} |f|` over cubes of side `r`.
pub fn hardy_littlewood<T: Real>(f: &GridFunction<T>, radii: &[T]) -> Result<GridFunction<T>> {
    if radii.is_empty() {
        return Err(Error::InvalidParams("radius list is empty".into()));
    }
    let h = f.spacing();
    let diameter = T::lit(2.0) * f.half_width();
    for &r in radii {
        if r < h * (T::one() - T::lit(1e-12)) || r > diameter * (T::one() + T::lit(1e-12)) {
            return Err(Error::InvalidParams(format!("radius {r} outside [h, 2L] = [{h}, {diameter}]")));
        }
    }
    let m = f.points_per_axis();
    let abs: Vec<T> = f.values().iter().map(|v| v.abs()).collect();
    // offsets k with k h ∈ [-r/2, r/2)
    let span = |r: T| -> (isize, isize) {
        let lo = (-r / (T::lit(2.0) * h)).ceil().to_isize().unwrap_or(0);
        let hi = (r / (T::lit(2.0) * h)).ceil().to_isize().unwrap_or(0) - 1;
        (lo, hi.max(lo))
    };
    let clip = |i: usize, (lo, hi): (isize, isize)| -> (usize, usize) {
        let a = (i as isize + lo).max(0) as usize;
        let b = ((i as isize + hi).min(m as isize - 1) + 1) as usize;
        (a, b)
    };
    let mut best = vec![T::zero(); f.len()];
    if f.dim() == 1 {
        let mut prefix = vec![T::zero(); m + 1];
        for i in 0..m {
            prefix[i + 1] = prefix[i] + abs[i];
        }
        for &r in radii {
            let s = span(r);
            for (i, b) in best.iter_mut().enumerate() {
                let (lo, hi) = clip(i, s);
                let avg = (prefix[hi] - prefix[lo]) / from_usize::<T>(hi - lo);
                *b = b.max(avg);
            }
        }
    } else {
        let w = m + 1;
        let mut table = vec![T::zero(); w * w];
        for i in 0..m {
            for j in 0..m {
                table[(i + 1) * w + j + 1] =
                    abs[i * m + j] + table[i * w + j + 1] + table[(i + 1) * w + j] - table[i * w + j];
            }
        }
        for &r in radii {
            let s = span(r);
            best.par_iter_mut().enumerate().for_each(|(idx, b)| {
                let (i, j) = (idx / m, idx % m);
                let (i0, i1) = clip(i, s);
                let (j0, j1) = clip(j, s);
                let sum = table[i1 * w + j1] - table[i0 * w + j1] - table[i1 * w + j0] + table[i0 * w + j0];
                let avg = sum / from_usize::<T>((i1 - i0) * (j1 - j0));
                *b = b.max(avg);
            });
        }
    }
    Ok(f.with_values(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridBox;

    fn line(l: f64, m: usize, f: impl Fn(f64) -> f64) -> GridFunction<f64> {
        GridFunction::from_fn(GridBox::new(1, l).unwrap(), m, |x: &[f64]| f(x[0])).unwrap()
    }

    #[test]
    fn multiplier_range() {
        assert_eq!(multiplier(0.0, 2.0, 0.5), 1.0);
        assert_eq!(multiplier(4.0, 2.0, 0.5), 0.0);
        assert_eq!(multiplier(9.0, 2.0, 0.5), 0.0);
        assert!((multiplier(1.0f64, 2.0, 1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn constant_passes_through() {
        let f = line(4.0, 64, |_| 3.0);
        let p = BRParams::new(1, 0.5, 1.0).unwrap();
        let out = br_apply_spectral(&f, &p).unwrap();
        for v in out.output.values() {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hardy_littlewood_of_constant() {
        let f = GridFunction::from_fn(GridBox::new(2, 1.0).unwrap(), 16, |_: &[f64]| 2.0).unwrap();
        let h = f.spacing();
        let mf = hardy_littlewood(&f, &[h, 4.0 * h, 2.0]).unwrap();
        for v in mf.values() {
            assert!((v - 2.0).abs() < 1e-12);
        }
        assert!(hardy_littlewood(&f, &[h / 2.0]).is_err());
        assert!(hardy_littlewood(&f, &[]).is_err());
    }

    #[test]
    fn dyadic_half_grid_values() {
        let g = dyadic_half_grid(1.0, 3);
        assert_eq!(g[0], 1.0);
        assert!((g[1] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(g[2], 2.0);
    }
}

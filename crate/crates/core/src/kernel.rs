//! The Bochner–Riesz convolution kernel
//! `φ(x) = π^{-δ} Γ(δ+1) |x|^{-(n/2+δ)} J_{n/2+δ}(2π|x|)`, i.e. the Fourier
//! transform of `(1 - |ξ|²)^δ_+`, its dilates and its decay envelope.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Real};
use crate::specfun::{bessel_j_unchecked, gamma_pos, BesselOrder};

/// Below this radius `φ` returns its value at the origin.
pub const ORIGIN_RADIUS: f64 = 1e-8;
/// Up to this radius `φ` uses a three-term ascending series.
pub const SERIES_RADIUS: f64 = 1e-3;
/// Radial derivatives are only evaluated beyond this radius.
pub const DERIVATIVE_MIN_RADIUS: f64 = 1e-6;
/// Log-spaced radial samples per decade in envelope scans.
pub const SAMPLES_PER_DECADE: usize = 2000;
/// Innermost radius of envelope scans.
pub const SCAN_MIN_RADIUS: f64 = 1e-3;

/// Parameters of `T^δ_R`: dimension, smoothing order, summation radius and,
/// for the critical index, the exponent `p` with `δ = n/p - (n+1)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BRParams<T> {
    dim: usize,
    p: Option<T>,
    delta: T,
    radius: T,
}

impl<T: Real> BRParams<T> {
    /// Arbitrary order `δ > 0`.
    pub fn new(dim: usize, delta: T, radius: T) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParams(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::InvalidParams(format!("delta must be positive, got {delta}")));
        }
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidParams(format!("R must be positive, got {radius}")));
        }
        Ok(Self {
            dim,
            p: None,
            delta,
            radius,
        })
    }

    /// Critical index `δ = n/p - (n+1)/2` for `0 < p < 1`.
    pub fn critical(dim: usize, p: T, radius: T) -> Result<Self> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::InvalidParams(format!("critical index needs 0 < p < 1, got {p}")));
        }
        let n = from_usize::<T>(dim);
        let delta = n / p - (n + T::one()) / T::lit(2.0);
        let mut params = Self::new(dim, delta, radius)?;
        params.p = Some(p);
        Ok(params)
    }

    /// Same operator order at another summation radius.
    pub fn with_radius(&self, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidParams(format!("R must be positive, got {radius}")));
        }
        Ok(Self { radius, ..*self })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> Option<T> {
        self.p
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn is_critical(&self) -> bool {
        self.p.is_some()
    }

    /// Bessel order `μ = n/2 + δ`.
    pub fn order(&self) -> BesselOrder<T> {
        BesselOrder::new(from_usize::<T>(self.dim) / T::lit(2.0) + self.delta)
            .expect("delta > 0 gives a valid order")
    }

    /// `|φ(x)| ≲ |x|^{-κ}` with `κ = (n+1)/2 + δ`; equals `n/p` at the critical index.
    pub fn decay_exponent(&self) -> T {
        (from_usize::<T>(self.dim) + T::one()) / T::lit(2.0) + self.delta
    }

    /// Whether `n(1/p - 1)` is a positive integer (within `1e-9`).
    pub fn is_integer_case(dim: usize, p: T) -> bool {
        let v = from_usize::<T>(dim) * (T::one() / p - T::one());
        let r = v.round();
        r >= T::one() && (v - r).abs() <= T::lit(1e-9)
    }

    /// Critical parameters whose `n(1/p - 1)` is not a positive integer.
    pub fn check_boundedness_hypothesis(&self) -> Result<()> {
        match self.p {
            None => Err(Error::InvalidParams("parameters are not at the critical index".into())),
            Some(p) if Self::is_integer_case(self.dim, p) => Err(Error::InvalidParams(format!(
                "n(1/p - 1) = {} is a positive integer",
                from_usize::<T>(self.dim) * (T::one() / p - T::one())
            ))),
            Some(_) => Ok(()),
        }
    }

    fn amplitude(&self) -> T {
        T::PI().powf(-self.delta) * gamma_pos(self.delta + T::one())
    }
}

/// `φ(0) = π^{n/2} Γ(δ+1) / Γ(n/2 + δ + 1) = ∫_{|ξ|≤1} (1-|ξ|²)^δ dξ`.
pub fn phi_origin<T: Real>(params: &BRParams<T>) -> T {
    let half_n = from_usize::<T>(params.dim) / T::lit(2.0);
    T::PI().powf(half_n) * gamma_pos(params.delta + T::one()) / gamma_pos(half_n + params.delta + T::one())
}

/// Radial profile `φ(ρ)`, `ρ = |x| ≥ 0`.
pub fn phi_radial<T: Real>(rho: T, params: &BRParams<T>) -> T {
    let rho = rho.abs();
    let mu = params.order().mu();
    if rho <= T::lit(ORIGIN_RADIUS) {
        return phi_origin(params);
    }
    let amp = params.amplitude();
    if rho <= T::lit(SERIES_RADIUS) {
        // ρ^{-μ} J_μ(2πρ) = Σ_k (-1)^k π^{2k+μ} ρ^{2k} / (k! Γ(μ+k+1))
        let pr2 = (T::PI() * rho).powi(2);
        let mut sum = T::zero();
        let mut coeff = T::one();
        for k in 0..3usize {
            sum += coeff / gamma_pos(mu + from_usize::<T>(k + 1));
            coeff = -coeff * pr2 / from_usize::<T>(k + 1);
        }
        return amp * T::PI().powf(mu) * sum;
    }
    let t = T::TAU() * rho;
    amp * T::TAU().powf(mu) * params.order().scaled(t)
}

/// `φ(x)` for `x ∈ ℝ^n`.
pub fn phi<T: Real>(x: &[T], params: &BRParams<T>) -> T {
    phi_radial(norm(x), params)
}

/// `φ_{1/R}(x) = R^n φ(Rx)`.
pub fn phi_scaled<T: Real>(x: &[T], params: &BRParams<T>) -> T {
    let r = params.radius;
    r.powi(params.dim as i32) * phi_radial(r * norm(x), params)
}

fn norm<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

/// First or second derivative of the radial profile at `|x|`, from
/// `d/dt [t^{-μ} J_μ(t)] = -t^{-μ} J_{μ+1}(t)`.
pub fn radial_derivative<T: Real>(x: &[T], params: &BRParams<T>, order: u8) -> Result<T> {
    let rho = norm(x);
    if rho <= T::lit(DERIVATIVE_MIN_RADIUS) {
        return Err(Error::InvalidParams(format!(
            "radial derivative needs |x| > {DERIVATIVE_MIN_RADIUS}, got {rho}"
        )));
    }
    let mu = params.order().mu();
    let amp = params.amplitude();
    let two_pi = T::TAU();
    let t = two_pi * rho;
    let j1 = bessel_j_unchecked(mu + T::one(), t);
    match order {
        1 => Ok(-amp * two_pi.powf(mu + T::one()) * j1 / t.powf(mu)),
        2 => {
            let j2 = bessel_j_unchecked(mu + T::lit(2.0), t);
            let bracket = j1 / t.powf(mu + T::one()) - j2 / t.powf(mu);
            Ok(-amp * two_pi.powf(mu + T::lit(2.0)) * bracket)
        }
        other => Err(Error::InvalidParams(format!("derivative order {other} not in {{1, 2}}"))),
    }
}

/// Result of a weighted sup scan `max (1+|x|)^κ |D^α φ(x)|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport<T> {
    /// Maximum over all tested orders.
    pub c_hat: T,
    /// Maximum per total derivative order `|α| = 0, 1, …`.
    pub per_order: Vec<T>,
    /// Radius at which `c_hat` was attained.
    pub argmax_radius: T,
    pub exponent: T,
    pub samples: usize,
}

/// Log-spaced scan radii `10^{-3} · 10^{k/D} ≤ radius`. Nested in `radius`.
pub fn scan_radii<T: Real>(radius: T) -> Vec<T> {
    let mut out = Vec::new();
    let base = T::lit(SCAN_MIN_RADIUS);
    let step = T::lit(10.0).powf(T::one() / from_usize::<T>(SAMPLES_PER_DECADE));
    let mut rho = base;
    let mut k = 0usize;
    while rho <= radius {
        out.push(rho);
        k += 1;
        rho = base * step.powi(k as i32);
    }
    out
}

// 4th-order central differences on offsets -2..=2.
const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// `max_{|α| = k} |D^α φ(x)|` for `k = 0..=alpha_max` by finite differences with
/// step `max(1e-4, 1e-3 |x|)`.
fn derivative_magnitudes<T: Real>(x: [T; 2], params: &BRParams<T>, alpha_max: usize) -> Vec<T> {
    let n = params.dim;
    let rho = norm(&x[..n]);
    let h = T::lit(1e-4).max(T::lit(1e-3) * rho);
    let f = |dx: i32, dy: i32| -> T {
        let p = [x[0] + h * T::lit(dx as f64), x[1] + h * T::lit(dy as f64)];
        phi(&p[..n], params)
    };
    let mut out = vec![phi(&x[..n], params).abs()];
    if alpha_max == 0 {
        return out;
    }
    let axis_samples = |axis: usize| -> [T; 5] {
        let mut s = [T::zero(); 5];
        for (k, off) in (-2i32..=2).enumerate() {
            s[k] = if axis == 0 { f(off, 0) } else { f(0, off) };
        }
        s
    };
    let apply = |c: &[f64; 5], s: &[T; 5]| -> T {
        c.iter().zip(s).map(|(&ci, &si)| T::lit(ci) * si).sum::<T>()
    };
    let axes: Vec<[T; 5]> = (0..n).map(axis_samples).collect();
    let first = axes
        .iter()
        .map(|s| (apply(&D1, s) / h).abs())
        .fold(T::zero(), T::max);
    out.push(first);
    if alpha_max >= 2 {
        let mut second = axes
            .iter()
            .map(|s| (apply(&D2, s) / (h * h)).abs())
            .fold(T::zero(), T::max);
        if n == 2 {
            let mut mixed = T::zero();
            for (i, &ci) in D1.iter().enumerate() {
                for (j, &cj) in D1.iter().enumerate() {
                    if ci != 0.0 && cj != 0.0 {
                        mixed += T::lit(ci * cj) * f(i as i32 - 2, j as i32 - 2);
                    }
                }
            }
            second = second.max((mixed / (h * h)).abs());
        }
        out.push(second);
    }
    out
}

fn envelope_scan<T: Real>(params: &BRParams<T>, alpha_max: usize, radius: T, exponent: T) -> EnvelopeReport<T> {
    let radii = scan_radii(radius);
    let directions: Vec<T> = if params.dim == 1 {
        vec![T::zero()]
    } else {
        vec![T::zero(), T::PI() / T::lit(8.0), T::FRAC_PI_4()]
    };
    let orders = alpha_max + 1;
    let init = || (vec![T::zero(); orders], T::zero(), T::zero());
    let (per_order, c_hat, argmax) = radii
        .par_iter()
        .map(|&rho| {
            let weight = (T::one() + rho).powf(exponent);
            let mut best = vec![T::zero(); orders];
            for &theta in &directions {
                let x = [rho * theta.cos(), rho * theta.sin()];
                for (k, m) in derivative_magnitudes(x, params, alpha_max).into_iter().enumerate() {
                    best[k] = best[k].max(weight * m);
                }
            }
            let top = best.iter().copied().fold(T::zero(), T::max);
            (best, top, rho)
        })
        .reduce(init, |a, b| {
            let per: Vec<T> = a.0.iter().zip(&b.0).map(|(&x, &y)| x.max(y)).collect();
            if b.1 > a.1 || (b.1 == a.1 && b.2 < a.2) {
                (per, b.1, b.2)
            } else {
                (per, a.1, a.2)
            }
        });
    EnvelopeReport {
        c_hat,
        per_order,
        argmax_radius: argmax,
        exponent,
        samples: radii.len(),
    }
}

/// `Ĉ = max (1+|x|)^{n/p} |D^α φ(x)|` over log-spaced radii in `(0, radius]` and
/// `|α| ≤ alpha_max ≤ 2`. Requires critical parameters.
pub fn decay_envelope_estimate<T: Real>(
    params: &BRParams<T>,
    alpha_max: usize,
    radius: T,
) -> Result<EnvelopeReport<T>> {
    let p = params
        .p
        .ok_or_else(|| Error::InvalidParams("envelope estimate needs critical parameters".into()))?;
    if alpha_max > 2 {
        return Err(Error::InvalidParams(format!("alpha_max {alpha_max} exceeds 2")));
    }
    if !(radius > T::lit(SCAN_MIN_RADIUS)) {
        return Err(Error::InvalidParams(format!("scan radius {radius} too small")));
    }
    let exponent = from_usize::<T>(params.dim) / p;
    Ok(envelope_scan(params, alpha_max, radius, exponent))
}

/// Radius of the cached envelope scans used for tail bounds.
pub const TAIL_SCAN_RADIUS: f64 = 200.0;

/// Cached `max_{|α| ≤ alpha_max} sup (1+|x|)^κ |D^α φ(x)|` with `κ` the decay
/// exponent of `φ`, for `R = 1`. Used by wrap-around and tail bounds.
pub fn envelope_constant(dim: usize, delta: f64, alpha_max: usize) -> f64 {
    type Key = (usize, u64, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (dim, delta.to_bits(), alpha_max);
    if let Some(&v) = cache.lock().expect("envelope cache poisoned").get(&key) {
        return v;
    }
    let params = BRParams::new(dim, delta, 1.0).expect("valid kernel parameters");
    let report = envelope_scan(&params, alpha_max.min(2), TAIL_SCAN_RADIUS, params.decay_exponent());
    cache.lock().expect("envelope cache poisoned").insert(key, report.c_hat);
    report.c_hat
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn critical_params_and_hypothesis() {
        let p = BRParams::critical(1, 2.0 / 3.0, 1.0).unwrap();
        assert_relative_eq!(p.delta(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(p.decay_exponent(), 1.5, max_relative = 1e-14);
        assert!(p.check_boundedness_hypothesis().is_ok());
        let half = BRParams::critical(1, 0.5, 1.0).unwrap();
        assert_relative_eq!(half.delta(), 1.0);
        assert!(half.check_boundedness_hypothesis().is_err());
        assert!(BRParams::critical(2, 0.5, 1.0).unwrap().check_boundedness_hypothesis().is_err());
        assert!(BRParams::critical(1, 1.0, 1.0).is_err());
        assert!(BRParams::new(1, 0.0, 1.0).is_err());
        assert!(BRParams::new(1, 1.0, -1.0).is_err());
    }

    #[test]
    fn origin_value_one_dimension() {
        let params = BRParams::new(1, 1.0, 1.0).unwrap();
        assert_relative_eq!(phi(&[0.0], &params), 4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(phi_origin(&params), 4.0 / 3.0, max_relative = 1e-12);
        let scaled = BRParams::new(1, 1.0, 2.0).unwrap();
        assert_relative_eq!(phi_scaled(&[0.0], &scaled), 8.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn profile_is_continuous_across_regimes() {
        let params = BRParams::critical(2, 0.7, 1.0).unwrap();
        for &r in &[ORIGIN_RADIUS, SERIES_RADIUS] {
            let a = phi_radial(r * (1.0 - 1e-9), &params);
            let b = phi_radial(r * (1.0 + 1e-9), &params);
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn derivative_rejects_origin_and_bad_order() {
        let params = BRParams::new(1, 1.0, 1.0).unwrap();
        assert!(radial_derivative(&[1e-7], &params, 1).is_err());
        assert!(radial_derivative(&[1.0], &params, 3).is_err());
    }

    #[test]
    fn scan_radii_are_nested() {
        let a = scan_radii(100.0f64);
        let b = scan_radii(200.0f64);
        assert_eq!(&b[..a.len()], &a[..]);
        assert!(*a.last().unwrap() <= 100.0);
    }

    #[test]
    fn envelope_requires_critical() {
        let params = BRParams::new(1, 1.0, 1.0).unwrap();
        assert!(decay_envelope_estimate(&params, 0, 10.0).is_err());
    }
}

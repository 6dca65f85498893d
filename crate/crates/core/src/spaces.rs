//! Weighted strong and weak `L^p` quasi-norms, the moment index, certified
//! probe families and the maximal functions `M^+_φ` and `G^+_w` built on them.

use std::sync::OnceLock;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftNum;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{kernel_spectrum, wrapped_offset, Spectrum};
use crate::grid::{multi_indices, GridFunction};
use crate::scalar::Real;
use crate::weights::Weight;

/// Certified probes keep at least this margin below the admissibility bound.
pub const CERTIFY_MARGIN: f64 = 1e-3;
/// Breakpoint lists in reports are thinned to at most this many values.
pub const MAX_REPORTED_BREAKPOINTS: usize = 512;
/// Default number of probes in a family.
pub const DEFAULT_FAMILY_SIZE: usize = 6;

const SCAN_POINTS_1D: usize = 20_001;
const SCAN_POINTS_2D: usize = 1_601;

fn check_same_grid<T: Real>(f: &GridFunction<T>, w: &Weight<T>) -> Result<()> {
    if !f.same_grid(w.samples()) {
        return Err(Error::InvalidGrid("function and weight live on different grids".into()));
    }
    Ok(())
}

fn check_exponent<T: Real>(p: T) -> Result<()> {
    if !(p > T::zero()) || !p.is_finite() {
        return Err(Error::InvalidParams(format!("exponent p must be positive, got {p}")));
    }
    Ok(())
}

/// `(h^n Σ |f|^p w)^{1/p}`.
pub fn lp_w_norm<T: Real>(f: &GridFunction<T>, p: T, w: &Weight<T>) -> Result<T> {
    check_exponent(p)?;
    check_same_grid(f, w)?;
    let sum: T = f
        .values()
        .iter()
        .zip(w.samples().values())
        .map(|(&v, &wv)| v.abs().powf(p) * wv)
        .sum();
    Ok((f.cell_volume() * sum).powf(T::one() / p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    StrongP,
    WeakP,
    HardyP,
    WeakHardyP,
}

/// A quasi-norm value. Weak kinds also carry the level at which the supremum
/// is approached and a thinned list of the breakpoints `|f(x_i)|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport<T> {
    pub value: T,
    pub kind: NormKind,
    pub p: T,
    pub argmax_lambda: Option<T>,
    pub lambda_breakpoints: Vec<T>,
}

/// Distinct levels `v_1 > v_2 > … > 0` of `|f|` with `W_k = w({|f| ≥ v_k})`,
/// optionally restricted to the cells where `mask` is set.
pub fn level_profile<T: Real>(f: &GridFunction<T>, w: &Weight<T>, mask: Option<&[bool]>) -> Result<Vec<(T, T)>> {
    check_same_grid(f, w)?;
    let wv = w.samples().values();
    let mut cells: Vec<(T, T)> = f
        .values()
        .iter()
        .enumerate()
        .filter(|(i, v)| v.abs() > T::zero() && mask.is_none_or(|m| m[*i]))
        .map(|(i, v)| (v.abs(), wv[i]))
        .collect();
    cells.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let vol = f.cell_volume();
    let mut out: Vec<(T, T)> = Vec::new();
    let mut acc = T::zero();
    for (v, wi) in cells {
        acc += wi;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = acc * vol,
            _ => out.push((v, acc * vol)),
        }
    }
    Ok(out)
}

/// `max_k v_k W_k^{1/p}` over a level profile and the maximizing index.
pub fn weak_sup<T: Real>(profile: &[(T, T)], p: T) -> (T, Option<usize>) {
    let inv = T::one() / p;
    let mut best = (T::zero(), None);
    for (k, &(v, m)) in profile.iter().enumerate() {
        let val = v * m.powf(inv);
        if best.1.is_none() || val > best.0 {
            best = (val, Some(k));
        }
    }
    best
}

/// Keeps at most [`MAX_REPORTED_BREAKPOINTS`] levels, roughly log-spaced, always
/// including `keep`.
fn thin_levels<T: Real>(profile: &[(T, T)], keep: Option<usize>) -> Vec<T> {
    if profile.len() <= MAX_REPORTED_BREAKPOINTS {
        return profile.iter().map(|l| l.0).collect();
    }
    let top = profile[0].0.to_f64_lossy();
    let bottom = profile[profile.len() - 1].0.to_f64_lossy();
    let step = (top / bottom).ln() / (MAX_REPORTED_BREAKPOINTS - 2) as f64;
    let mut out = Vec::with_capacity(MAX_REPORTED_BREAKPOINTS);
    let mut last = f64::INFINITY;
    for (k, &(v, _)) in profile.iter().enumerate() {
        let lv = v.to_f64_lossy().ln();
        if Some(k) == keep || last - lv >= step || k == 0 {
            out.push(v);
            last = lv;
        }
    }
    if out.len() > MAX_REPORTED_BREAKPOINTS {
        let pinned = keep.map(|k| profile[k].0);
        let mut trimmed: Vec<T> = out.iter().copied().take(MAX_REPORTED_BREAKPOINTS - 1).collect();
        if let Some(v) = pinned {
            if !trimmed.contains(&v) {
                trimmed.push(v);
            }
        }
        out = trimmed;
    }
    out
}

fn weak_report<T: Real>(profile: &[(T, T)], p: T, kind: NormKind) -> NormReport<T> {
    let (value, arg) = weak_sup(profile, p);
    NormReport {
        value,
        kind,
        p,
        argmax_lambda: arg.map(|k| profile[k].0 * (T::one() - T::lit(1e-15))),
        lambda_breakpoints: thin_levels(profile, arg),
    }
}

/// `sup_λ λ · w({|f| > λ})^{1/p}`, exact over the breakpoints of a grid function.
pub fn weak_lp_w_norm<T: Real>(f: &GridFunction<T>, p: T, w: &Weight<T>) -> Result<NormReport<T>> {
    check_exponent(p)?;
    let profile = level_profile(f, w, None)?;
    Ok(weak_report(&profile, p, NormKind::WeakP))
}

/// Strong norm wrapped in a report.
pub fn strong_report<T: Real>(f: &GridFunction<T>, p: T, w: &Weight<T>) -> Result<NormReport<T>> {
    Ok(NormReport {
        value: lp_w_norm(f, p, w)?,
        kind: NormKind::StrongP,
        p,
        argmax_lambda: None,
        lambda_breakpoints: Vec::new(),
    })
}

/// `N = ⌊n (q_w/p - 1)⌋`, with values within `1e-9` of an integer snapped to it.
pub fn moment_index(n: usize, p: f64, q_w: f64) -> Result<usize> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParams(format!("moment index needs 0 < p <= 1, got {p}")));
    }
    if !(q_w >= 1.0) || !q_w.is_finite() {
        return Err(Error::InvalidParams(format!("critical index must be finite and >= 1, got {q_w}")));
    }
    let v = n as f64 * (q_w / p - 1.0);
    let r = v.round();
    let v = if (v - r).abs() <= 1e-9 { r } else { v };
    Ok(v.floor().max(0.0) as usize)
}

/// Profile of a separable probe, scaled by `width` along each axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ProbeShape {
    /// `Π e^{-(x_k/σ)²}`.
    Gaussian { width: f64 },
    /// `Π b(x_k/σ)` with `b(u) = e^{-1/(1-u²)}` on `|u| < 1`.
    Bump { width: f64 },
}

impl ProbeShape {
    pub fn width(&self) -> f64 {
        match *self {
            ProbeShape::Gaussian { width } | ProbeShape::Bump { width } => width,
        }
    }

    /// Integral of the unit-amplitude one-dimensional profile.
    fn integral_1d(&self) -> f64 {
        match *self {
            ProbeShape::Gaussian { width } => width * std::f64::consts::PI.sqrt(),
            ProbeShape::Bump { width } => width * bump_integral(),
        }
    }

    /// Radius beyond which all derivatives are negligible.
    fn reach(&self) -> f64 {
        match *self {
            ProbeShape::Gaussian { width } => 12.0 * width,
            ProbeShape::Bump { width } => width,
        }
    }
}

fn bump_integral() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let m = 200_000;
        let h = 2.0 / m as f64;
        (0..m).map(|i| bump_derivative(-1.0 + (i as f64 + 0.5) * h, 0)).sum::<f64>() * h
    })
}

/// `d^k/du^k e^{-u²} = (-1)^k H_k(u) e^{-u²}`.
fn gaussian_derivative(u: f64, k: usize) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * u);
    let hk = match k {
        0 => h0,
        _ => {
            for j in 1..k {
                let next = 2.0 * u * h1 - 2.0 * j as f64 * h0;
                h0 = h1;
                h1 = next;
            }
            h1
        }
    };
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * hk * (-u * u).exp()
}

/// Coefficients of `P_k` in `b^{(k)}(u) = P_k(u) b(u) / (1-u²)^{2k}`.
fn bump_polynomial(k: usize) -> Vec<f64> {
    let mut p = vec![1.0];
    for j in 0..k {
        // P_{j+1} = P_j' (1-u²)² + 4 j u (1-u²) P_j - 2 u P_j
        let deg = p.len() + 4;
        let mut next = vec![0.0; deg];
        for (i, &c) in p.iter().enumerate().skip(1) {
            let d = c * i as f64;
            next[i - 1] += d;
            next[i + 1] -= 2.0 * d;
            next[i + 3] += d;
        }
        for (i, &c) in p.iter().enumerate() {
            next[i + 1] += (4.0 * j as f64 - 2.0) * c;
            next[i + 3] -= 4.0 * j as f64 * c;
        }
        while next.len() > 1 && next[next.len() - 1] == 0.0 {
            next.pop();
        }
        p = next;
    }
    p
}

fn bump_derivative(u: f64, k: usize) -> f64 {
    let s = 1.0 - u * u;
    if s <= 0.0 || 1.0 / s > 700.0 {
        return 0.0;
    }
    let poly = bump_polynomial(k);
    let pk = poly.iter().rev().fold(0.0, |acc, &c| acc * u + c);
    pk / s.powi(2 * k as i32) * (-1.0 / s).exp()
}

/// `k`-th derivative of the unit-amplitude profile along one axis at `x`.
fn profile_derivative(shape: &ProbeShape, x: f64, k: usize) -> f64 {
    let sigma = shape.width();
    let u = x / sigma;
    let d = match shape {
        ProbeShape::Gaussian { .. } => gaussian_derivative(u, k),
        ProbeShape::Bump { .. } => bump_derivative(u, k),
    };
    d / sigma.powi(k as i32)
}

/// A separable smooth test function `ψ(x) = c Π_k g(x_k/σ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probe {
    shape: ProbeShape,
    dim: usize,
    amplitude: f64,
}

impl Probe {
    pub fn new(shape: ProbeShape, dim: usize, amplitude: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParams(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(shape.width() > 0.0) || !shape.width().is_finite() {
            return Err(Error::InvalidParams(format!("probe width must be positive, got {}", shape.width())));
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidParams("probe amplitude must be finite".into()));
        }
        Ok(Self { shape, dim, amplitude })
    }

    /// The probe scaled to unit integral.
    pub fn unit_mass(shape: ProbeShape, dim: usize) -> Result<Self> {
        let unit = Self::new(shape, dim, 1.0)?;
        Self::new(shape, dim, 1.0 / unit.integral())
    }

    /// The zero function.
    pub fn zero(dim: usize) -> Self {
        Self {
            shape: ProbeShape::Gaussian { width: 1.0 },
            dim,
            amplitude: 0.0,
        }
    }

    pub fn shape(&self) -> ProbeShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { amplitude, ..*self }
    }

    pub fn integral(&self) -> f64 {
        self.amplitude * self.shape.integral_1d().powi(self.dim as i32)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.derivative(x, &[0, 0][..self.dim])
    }

    /// `D^α ψ(x)`.
    pub fn derivative(&self, x: &[f64], alpha: &[usize]) -> f64 {
        x.iter()
            .zip(alpha)
            .take(self.dim)
            .fold(self.amplitude, |acc, (&xi, &k)| acc * profile_derivative(&self.shape, xi, k))
    }
}

/// A point and multi-index where the admissibility bound is largest or violated.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub x: Vec<f64>,
    pub alpha: Vec<usize>,
    pub value: f64,
}

/// Outcome of [`certify_probe`]: `margin = 1 - max_value`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub pass: bool,
    pub margin: f64,
    pub max_value: f64,
    pub worst: Option<ScanPoint>,
}

/// `max_{x, |α| ≤ N+1} (1+|x|)^{N+n+1} |D^α ψ(x)|` over a dense grid on
/// `[0, reach]^n`, using the reflection symmetry of every `|D^α ψ|`.
fn admissibility_scan(probe: &Probe, index: usize) -> ScanPoint {
    let n = probe.dim;
    let order = index + 1;
    let power = (index + n + 1) as i32;
    let reach = probe.shape.reach();
    let count = if n == 1 { SCAN_POINTS_1D } else { SCAN_POINTS_2D };
    let xs: Vec<f64> = (0..count).map(|i| reach * i as f64 / (count - 1) as f64).collect();
    let table: Vec<Vec<f64>> = (0..=order)
        .map(|k| xs.iter().map(|&x| profile_derivative(&probe.shape, x, k).abs()).collect())
        .collect();
    let amp = probe.amplitude.abs();
    let mut best = ScanPoint {
        x: vec![0.0; n],
        alpha: vec![0; n],
        value: 0.0,
    };
    if n == 1 {
        for (i, &x) in xs.iter().enumerate() {
            let weight = (1.0 + x).powi(power);
            for (k, row) in table.iter().enumerate() {
                let v = amp * weight * row[i];
                if v > best.value {
                    best = ScanPoint {
                        x: vec![x],
                        alpha: vec![k],
                        value: v,
                    };
                }
            }
        }
        return best;
    }
    let alphas: Vec<Vec<usize>> = multi_indices(2, order);
    let rows: Vec<ScanPoint> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut local = ScanPoint {
                x: vec![0.0; 2],
                alpha: vec![0; 2],
                value: 0.0,
            };
            for j in 0..count {
                let r = (xs[i] * xs[i] + xs[j] * xs[j]).sqrt();
                let weight = (1.0 + r).powi(power);
                for a in &alphas {
                    let v = amp * weight * table[a[0]][i] * table[a[1]][j];
                    if v > local.value {
                        local = ScanPoint {
                            x: vec![xs[i], xs[j]],
                            alpha: a.clone(),
                            value: v,
                        };
                    }
                }
            }
            local
        })
        .collect();
    for r in rows {
        if r.value > best.value {
            best = r;
        }
    }
    best
}

/// Checks `(1+|x|)^{N+n+1} |D^α ψ(x)| ≤ 1` for all `|α| ≤ N+1` on a dense scan.
pub fn certify_probe(probe: &Probe, index: usize) -> Certificate {
    let worst = admissibility_scan(probe, index);
    let pass = worst.value <= 1.0;
    Certificate {
        pass,
        margin: 1.0 - worst.value,
        max_value: worst.value,
        worst: if worst.value > 0.0 { Some(worst) } else { None },
    }
}

/// The probe of the given shape with the largest amplitude that certifies with
/// margin [`CERTIFY_MARGIN`].
pub fn auto_scaled_probe(shape: ProbeShape, dim: usize, index: usize) -> Result<Probe> {
    let unit = Probe::new(shape, dim, 1.0)?;
    let peak = admissibility_scan(&unit, index).value;
    let probe = unit.with_amplitude((1.0 - CERTIFY_MARGIN) * (1.0 - 1e-12) / peak);
    let cert = certify_probe(&probe, index);
    if !cert.pass || cert.margin < CERTIFY_MARGIN {
        return Err(Error::InvalidParams(format!(
            "probe failed certification after scaling (margin {})",
            cert.margin
        )));
    }
    Ok(probe)
}

/// Dyadic scales `4h · 2^k ≤ L/2`.
pub fn dyadic_t_grid(spacing: f64, half_width: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 4.0 * spacing;
    while t <= half_width / 2.0 * (1.0 + 1e-12) {
        out.push(t);
        t *= 2.0;
    }
    out
}

/// A finite certified subset of the test class, with the scales used for it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeFamily {
    index: usize,
    dim: usize,
    members: Vec<Probe>,
    t_grid: Vec<f64>,
}

impl ProbeFamily {
    /// `size` probes, half Gaussians and half bumps, with widths `2^{3j/c}`,
    /// `j < c`, per shape, each auto-scaled. Doubling `size` adds widths
    /// between the existing ones.
    pub fn standard(dim: usize, index: usize, size: usize, t_grid: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParams("probe family needs at least one member".into()));
        }
        let gaussians = size.div_ceil(2);
        let bumps = size / 2;
        let width = |j: usize, c: usize| 2f64.powf(3.0 * j as f64 / c as f64);
        let mut shapes: Vec<ProbeShape> = (0..gaussians)
            .map(|j| ProbeShape::Gaussian { width: width(j, gaussians) })
            .collect();
        shapes.extend((0..bumps).map(|j| ProbeShape::Bump { width: width(j, bumps) }));
        let members = shapes
            .par_iter()
            .map(|&s| auto_scaled_probe(s, dim, index))
            .collect::<Result<Vec<_>>>()?;
        Self::from_members(dim, index, members, t_grid)
    }

    /// A family from explicit members; every member must certify.
    pub fn from_members(dim: usize, index: usize, members: Vec<Probe>, t_grid: Vec<f64>) -> Result<Self> {
        if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidParams("scale grid must be nonempty and positive".into()));
        }
        for (k, m) in members.iter().enumerate() {
            if m.dim != dim {
                return Err(Error::InvalidParams(format!("probe {k} has the wrong dimension")));
            }
            if !certify_probe(m, index).pass {
                return Err(Error::InvalidParams(format!("probe {k} fails certification")));
            }
        }
        Ok(Self {
            index,
            dim,
            members,
            t_grid,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn members(&self) -> &[Probe] {
        &self.members
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Whether some member has nonzero integral.
    pub fn has_nonzero_integral(&self) -> bool {
        self.members.iter().any(|m| m.integral() != 0.0)
    }
}

/// Transformed kernels `ψ_t(x) = t^{-n} ψ(x/t)` on one grid, for repeated
/// maximal-function evaluation. Kernels are stored in pairs `k_a + i k_b` so
/// one inverse transform yields two real convolutions.
pub struct ConvolutionBank<T> {
    dim: usize,
    points: usize,
    half_width: T,
    kernels: usize,
    spectra: Vec<Vec<Complex<T>>>,
}

impl<T: Real + FftNum> ConvolutionBank<T> {
    /// Kernels for every `(probe, t)`. With `unit_mass` each sampled kernel is
    /// renormalized to discrete integral 1.
    pub fn new(grid: &GridFunction<T>, probes: &[Probe], t_grid: &[f64], unit_mass: bool) -> Result<Self> {
        let n = grid.dim();
        if let Some(p) = probes.iter().find(|p| p.dim != n) {
            return Err(Error::InvalidParams(format!(
                "probe of dimension {} on a grid of dimension {n}",
                p.dim
            )));
        }
        let m = grid.points_per_axis();
        let h = grid.spacing().to_f64_lossy();
        let vol = grid.cell_volume();
        let offsets: Vec<f64> = (0..m).map(|k| wrapped_offset(k, m, h)).collect();
        let pairs: Vec<(Probe, f64)> = probes
            .iter()
            .flat_map(|p| t_grid.iter().map(move |&t| (*p, t)))
            .collect();
        let spectra = pairs
            .par_iter()
            .map(|(probe, t)| {
                let scale = t.powi(-(n as i32));
                let mut kernel: Vec<f64> = if n == 1 {
                    offsets.iter().map(|&y| scale * probe.value(&[y / t])).collect()
                } else {
                    let mut k = Vec::with_capacity(m * m);
                    for &a in &offsets {
                        for &b in &offsets {
                            k.push(scale * probe.value(&[a / t, b / t]));
                        }
                    }
                    k
                };
                if unit_mass {
                    let mass: f64 = kernel.iter().sum::<f64>() * vol.to_f64_lossy();
                    if mass != 0.0 {
                        kernel.iter_mut().for_each(|v| *v /= mass);
                    }
                }
                let kernel: Vec<T> = kernel.into_iter().map(T::lit).collect();
                kernel_spectrum(&kernel, n, m, vol)
            })
            .collect::<Vec<_>>();
        let i = Complex::new(T::zero(), T::one());
        let spectra = spectra
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a.iter().zip(b).map(|(&x, &y)| x + i * y).collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
        Ok(Self {
            dim: n,
            points: m,
            half_width: grid.half_width(),
            kernels: pairs.len(),
            spectra,
        })
    }

    /// Number of `(ψ, t)` kernels.
    pub fn len(&self) -> usize {
        self.kernels
    }

    pub fn is_empty(&self) -> bool {
        self.kernels == 0
    }

    /// `max_{ψ, t} |ψ_t * f|` pointwise.
    pub fn apply(&self, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        if f.dim() != self.dim || f.points_per_axis() != self.points || f.half_width() != self.half_width {
            return Err(Error::InvalidGrid("function grid differs from the convolution bank grid".into()));
        }
        let spectrum = Spectrum::forward(f);
        let len = f.len();
        let best = self
            .spectra
            .par_iter()
            .fold(
                || (vec![T::zero(); len], Vec::new()),
                |(mut acc, mut buf), k| {
                    spectrum.convolve_max_into(k, &mut buf, &mut acc);
                    (acc, buf)
                },
            )
            .map(|(acc, _)| acc)
            .reduce(
                || vec![T::zero(); len],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x = x.max(y));
                    a
                },
            );
        Ok(f.with_values(best))
    }
}

/// `M^+_φ f = max_{t ∈ t_grid} |φ_t * f|` for a unit-mass probe.
pub fn mplus_maximal<T: Real + FftNum>(f: &GridFunction<T>, probe: &Probe, t_grid: &[f64]) -> Result<GridFunction<T>> {
    if (probe.integral() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParams(format!(
            "mollifier must have unit integral, got {}",
            probe.integral()
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidParams("scale grid is empty".into()));
    }
    ConvolutionBank::new(f, std::slice::from_ref(probe), t_grid, true)?.apply(f)
}

/// Lower estimate of the radial grand maximal function: the pointwise maximum
/// over family members and scales.
pub fn radial_grand_maximal<T: Real + FftNum>(f: &GridFunction<T>, probes: &ProbeFamily) -> Result<GridFunction<T>> {
    ConvolutionBank::new(f, &probes.members, &probes.t_grid, false)?.apply(f)
}

/// `‖M^+_φ f‖_{L^p_w}` with a unit-mass mollifier.
pub fn hardy_norm<T: Real + FftNum>(
    f: &GridFunction<T>,
    p: T,
    w: &Weight<T>,
    mollifier: &Probe,
    t_grid: &[f64],
) -> Result<NormReport<T>> {
    let m = mplus_maximal(f, mollifier, t_grid)?;
    Ok(NormReport {
        value: lp_w_norm(&m, p, w)?,
        kind: NormKind::HardyP,
        p,
        argmax_lambda: None,
        lambda_breakpoints: Vec::new(),
    })
}

/// `‖G^+ f‖_{WL^p_w}` over a probe family.
pub fn weak_hardy_norm<T: Real + FftNum>(
    f: &GridFunction<T>,
    p: T,
    w: &Weight<T>,
    probes: &ProbeFamily,
) -> Result<NormReport<T>> {
    check_exponent(p)?;
    let g = radial_grand_maximal(f, probes)?;
    let profile = level_profile(&g, w, None)?;
    Ok(weak_report(&profile, p, NormKind::WeakHardyP))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridBox;

    #[test]
    fn moment_index_examples() {
        assert_eq!(moment_index(1, 2.0 / 3.0, 1.0).unwrap(), 0);
        assert_eq!(moment_index(2, 0.7, 1.0).unwrap(), 0);
        assert_eq!(moment_index(2, 0.4, 1.0).unwrap(), 3);
        assert!(moment_index(1, 1.5, 1.0).is_err());
    }

    #[test]
    fn bump_polynomials_match_closed_forms() {
        assert_eq!(bump_polynomial(1), vec![0.0, -2.0]);
        // b'' = b (6u⁴ - 2) / (1-u²)^4
        let p2 = bump_polynomial(2);
        assert_eq!(p2, vec![-2.0, 0.0, 0.0, 0.0, 6.0]);
        let u = 0.3;
        let h = 1e-4;
        let fd = (bump_derivative(u + h, 1) - bump_derivative(u - h, 1)) / (2.0 * h);
        assert!((fd - bump_derivative(u, 2)).abs() < 1e-7);
    }

    #[test]
    fn gaussian_derivatives_match_differences() {
        for k in 0..4 {
            let u = 0.7;
            let h = 1e-5;
            let fd = (gaussian_derivative(u + h, k) - gaussian_derivative(u - h, k)) / (2.0 * h);
            assert!((fd - gaussian_derivative(u, k + 1)).abs() < 1e-7, "order {k}");
        }
    }

    #[test]
    fn bump_integral_value() {
        assert!((bump_integral() - 0.443_993_816_168_079_4).abs() < 1e-12);
    }

    #[test]
    fn zero_probe_has_unit_margin() {
        let c = certify_probe(&Probe::zero(1), 0);
        assert!(c.pass);
        assert_eq!(c.margin, 1.0);
    }

    #[test]
    fn weak_norm_two_level() {
        let d = GridBox::new(1, 2.0).unwrap();
        let f = GridFunction::from_fn(d, 64, |x: &[f64]| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 }).unwrap();
        let w = Weight::constant(d, 64, 1.0).unwrap();
        let r = weak_lp_w_norm(&f, 0.5, &w).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.lambda_breakpoints, vec![1.0]);
    }
}

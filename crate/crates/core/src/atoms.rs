//! Weighted `(p, q, s)`-atoms: construction with exact vanishing moments and
//! sharp `L^q_w` size, validation of the three atom conditions, moments of
//! `T^δ_R a`, and the far-field decay of `T^δ_* a`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftNum;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{multi_indices, Cube, GridFunction};
use crate::kernel::{envelope_constant, BRParams};
use crate::operator::{br_apply_spectral, br_maximal};
use crate::scalar::{from_usize, Real};
use crate::spaces::{lp_w_norm, moment_index};
use crate::weights::{critical_index_estimate, weighted_measure, Weight};

/// Relative tolerance of the sharp size condition.
pub const SIZE_TOLERANCE: f64 = 1e-9;
/// Moments relative to `∫ |a(x)| |x^α| dx` below this count as vanishing.
pub const MOMENT_TOLERANCE: f64 = 1e-10;
/// Quadrature part of the tolerance for moments of `T^δ_R a`, relative to `‖a‖₁`.
pub const BR_MOMENT_TOLERANCE: f64 = 1e-4;

/// Tolerances for [`validate_atom`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AtomTolerance {
    pub size: f64,
    pub moment: f64,
}

impl Default for AtomTolerance {
    fn default() -> Self {
        Self {
            size: SIZE_TOLERANCE,
            moment: MOMENT_TOLERANCE,
        }
    }
}

/// The three atom conditions with measured slacks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomValidation<T> {
    /// (a) every sample outside the cube vanishes.
    pub support_ok: bool,
    pub cells_outside: usize,
    pub max_outside: T,
    /// (b) `‖a‖_{L^q_w} ≤ w(Q)^{1/q - 1/p}`; `size_ratio` is their quotient.
    pub size_ok: bool,
    pub size_ratio: T,
    /// (c) relative moments `|∫ a x^α| / ∫ |a| |x^α|` for `|α| ≤ s`.
    pub moments_ok: bool,
    pub max_moment: T,
    pub worst_alpha: Vec<usize>,
}

impl<T> AtomValidation<T> {
    pub fn passed(&self) -> bool {
        self.support_ok && self.size_ok && self.moments_ok
    }
}

/// A sampled atom together with its cube, exponents and weight.
#[derive(Clone, Debug)]
pub struct Atom<T> {
    samples: GridFunction<T>,
    cube: Cube<T>,
    p: T,
    q: T,
    s: usize,
    weight: Weight<T>,
    validation: AtomValidation<T>,
}

impl<T: Real> Atom<T> {
    /// Wraps samples as a candidate atom and validates it with default tolerances.
    pub fn from_parts(samples: GridFunction<T>, cube: Cube<T>, p: T, q: T, s: usize, weight: Weight<T>) -> Result<Self> {
        if !samples.same_grid(weight.samples()) {
            return Err(Error::InvalidGrid("atom and weight live on different grids".into()));
        }
        if cube.dim() != samples.dim() {
            return Err(Error::InvalidParams("cube dimension differs from the grid".into()));
        }
        let mut atom = Self {
            samples,
            cube,
            p,
            q,
            s,
            weight,
            validation: AtomValidation {
                support_ok: false,
                cells_outside: 0,
                max_outside: T::zero(),
                size_ok: false,
                size_ratio: T::zero(),
                moments_ok: false,
                max_moment: T::zero(),
                worst_alpha: Vec::new(),
            },
        };
        atom.validation = validate_atom(&atom, AtomTolerance::default());
        Ok(atom)
    }

    pub fn samples(&self) -> &GridFunction<T> {
        &self.samples
    }

    pub fn cube(&self) -> &Cube<T> {
        &self.cube
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn weight(&self) -> &Weight<T> {
        &self.weight
    }

    pub fn validation(&self) -> &AtomValidation<T> {
        &self.validation
    }

    /// The same data with other samples, revalidated.
    pub fn with_samples(&self, samples: GridFunction<T>) -> Result<Self> {
        Self::from_parts(samples, self.cube.clone(), self.p, self.q, self.s, self.weight.clone())
    }

    /// `c · a`, revalidated.
    pub fn scaled(&self, c: T) -> Result<Self> {
        self.with_samples(self.samples.map(|v| v * c))
    }

    /// `w(Q)^{1/q - 1/p}`, the size bound of condition (b).
    pub fn size_bound(&self) -> T {
        size_bound(&self.weight, &self.cube, self.p, self.q)
    }
}

fn size_bound<T: Real>(w: &Weight<T>, cube: &Cube<T>, p: T, q: T) -> T {
    w.measure_of(cube).powf(T::one() / q - T::one() / p)
}

/// `e^{-1/(1-u²)}` on `|u| < 1`.
fn bump(u: f64) -> f64 {
    let s = 1.0 - u * u;
    if s <= 0.0 || 1.0 / s > 700.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

fn monomial(u: &[f64], alpha: &[usize]) -> f64 {
    u.iter().zip(alpha).map(|(&x, &k)| x.powi(k as i32)).product()
}

/// Builds an atom on `Q`: a bump times a seeded random polynomial of degree
/// `s + 2`, with the moments of order `≤ s` projected out and the `L^q_w`
/// norm set to `w(Q)^{1/q - 1/p}`.
pub fn make_atom<T: Real>(cube: &Cube<T>, w: &Weight<T>, p: T, q: T, s: usize, seed: u64) -> Result<Atom<T>> {
    let grid = w.samples();
    let n = grid.dim();
    if cube.dim() != n {
        return Err(Error::InvalidParams("cube dimension differs from the grid".into()));
    }
    if !(p > T::zero() && p <= T::one()) || !(q > T::one()) || !q.is_finite() {
        return Err(Error::InvalidParams(format!("atom exponents need 0 < p <= 1 < q, got p = {p}, q = {q}")));
    }
    let quarter = grid.half_width() / T::lit(4.0);
    let (lo, hi) = cube.corners();
    if lo.iter().chain(&hi).any(|&c| !(c > -quarter && c < quarter)) {
        return Err(Error::InvalidParams(format!(
            "atom cube must lie strictly inside [-L/4, L/4]^n = [{}, {}]^n",
            -quarter, quarter
        )));
    }
    let q_w = match w.closed_form_critical_index() {
        Some(v) => v.to_f64_lossy(),
        None => critical_index_estimate(w)?.value.to_f64_lossy(),
    };
    let needed = moment_index(n, p.to_f64_lossy(), q_w)?;
    if s < needed {
        return Err(Error::InvalidParams(format!("s = {s} is below the moment index N = {needed}")));
    }

    let cells = grid.cells_in(cube);
    let center: Vec<f64> = cube.center().iter().map(|c| c.to_f64_lossy()).collect();
    let half = cube.side().to_f64_lossy() / 2.0;
    let local: Vec<Vec<f64>> = cells
        .iter()
        .map(|&i| {
            let x = grid.point(i);
            (0..n).map(|k| (x[k].to_f64_lossy() - center[k]) / half).collect()
        })
        .collect();
    let envelope: Vec<f64> = local.iter().map(|u| u.iter().map(|&v| bump(v)).product()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seed_terms = multi_indices(n, s + 2);
    let coeffs: Vec<f64> = seed_terms.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut g: Vec<f64> = local
        .iter()
        .zip(&envelope)
        .map(|(u, &b)| b * seed_terms.iter().zip(&coeffs).map(|(a, &c)| c * monomial(u, a)).sum::<f64>())
        .collect();
    let seed_norm = g.iter().map(|v| v.abs()).sum::<f64>();

    let basis_terms = multi_indices(n, s);
    let k = basis_terms.len();
    let basis: Vec<Vec<f64>> = basis_terms
        .iter()
        .map(|a| local.iter().zip(&envelope).map(|(u, &b)| b * monomial(u, a)).collect())
        .collect();
    let powers: Vec<Vec<f64>> = basis_terms
        .iter()
        .map(|a| local.iter().map(|u| monomial(u, a)).collect())
        .collect();
    let gram = DMatrix::from_fn(k, k, |i, j| powers[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum::<f64>());
    let lu = gram.lu();
    if !lu.is_invertible() {
        return Err(Error::SingularGram);
    }
    // two projection passes remove the rounding left by the first
    for _ in 0..2 {
        let rhs = DVector::from_fn(k, |i, _| powers[i].iter().zip(&g).map(|(a, b)| a * b).sum::<f64>());
        let c = lu.solve(&rhs).ok_or(Error::SingularGram)?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularGram);
        }
        for (j, b) in basis.iter().enumerate() {
            for (gi, bi) in g.iter_mut().zip(b) {
                *gi -= c[j] * bi;
            }
        }
    }
    let residual_norm = g.iter().map(|v| v.abs()).sum::<f64>();
    if !(residual_norm > 1e-12 * seed_norm) {
        return Err(Error::ZeroAtom);
    }

    let mut values = vec![T::zero(); grid.len()];
    for (&i, &v) in cells.iter().zip(&g) {
        values[i] = T::lit(v);
    }
    let raw = grid.with_values(values);
    let norm = lp_w_norm(&raw, q, w)?;
    if !(norm > T::zero()) {
        return Err(Error::ZeroAtom);
    }
    let scale = size_bound(w, cube, p, q) / norm;
    Atom::from_parts(raw.map(|v| v * scale), cube.clone(), p, q, s, w.clone())
}

/// Checks support, size and moment conditions of an atom.
pub fn validate_atom<T: Real>(atom: &Atom<T>, tol: AtomTolerance) -> AtomValidation<T> {
    let a = &atom.samples;
    let mask = a.mask_of(&atom.cube);
    let mut cells_outside = 0;
    let mut max_outside = T::zero();
    for (v, &inside) in a.values().iter().zip(&mask) {
        if !inside && *v != T::zero() {
            cells_outside += 1;
            max_outside = max_outside.max(v.abs());
        }
    }
    let size_ratio = lp_w_norm(a, atom.q, &atom.weight)
        .map(|norm| norm / atom.size_bound())
        .unwrap_or(T::infinity());
    let n = a.dim();
    let origin = vec![T::zero(); n];
    let mut max_moment = T::zero();
    let mut worst_alpha = vec![0; n];
    for alpha in multi_indices(n, atom.s) {
        let m = a.moment(&alpha, &origin);
        let scale = moment_scale(a, &alpha);
        let rel = if scale > T::zero() { m.abs() / scale } else { T::zero() };
        if rel > max_moment {
            max_moment = rel;
            worst_alpha = alpha;
        }
    }
    AtomValidation {
        support_ok: cells_outside == 0,
        cells_outside,
        max_outside,
        size_ok: size_ratio <= T::one() + T::lit(tol.size),
        size_ratio,
        moments_ok: max_moment <= T::lit(tol.moment),
        max_moment,
        worst_alpha,
    }
}

/// `∫ |f(x)| |x^α| dx`, the scale against which `∫ f x^α` is judged.
pub fn moment_scale<T: Real>(f: &GridFunction<T>, alpha: &[usize]) -> T {
    let n = f.dim();
    let sum: T = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = f.point(i);
            (0..n).fold(v.abs(), |acc, k| acc * x[k].abs().powi(alpha[k] as i32))
        })
        .sum();
    sum * f.cell_volume()
}

/// Moments of `T^δ_R a` up to order `N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentCheck<T> {
    pub radius: T,
    pub moments: Vec<(Vec<usize>, T)>,
    pub max_abs_moment: T,
    pub l1_norm: T,
    /// `1e-4 ‖a‖₁`.
    pub quadrature_tolerance: T,
    /// Bound on the moment mass of `T^δ_R a` outside the box.
    pub tail_bound: T,
    /// Within quadrature tolerance plus tail bound.
    pub pass: bool,
    /// Within quadrature tolerance alone.
    pub strict_pass: bool,
}

/// Computes `∫ T^δ_R a(y) y^γ dy` over the box for `|γ| ≤ N` by the spectral
/// route. The tail outside the box uses `|T^δ_R a(y)| ≤ ‖a‖₁ Ĉ 2^κ R^{n-κ} |y|^{-κ}`
/// for `|y| ≥ L`, valid because the atom sits inside `[-L/4, L/4]^n`.
pub fn br_moment_check<T: Real + FftNum>(
    a: &GridFunction<T>,
    params: &BRParams<T>,
    index: usize,
) -> Result<MomentCheck<T>> {
    let out = br_apply_spectral(a, params)?.output;
    let n = a.dim();
    let origin = vec![T::zero(); n];
    let moments: Vec<(Vec<usize>, T)> = multi_indices(n, index)
        .into_iter()
        .map(|g| {
            let m = out.moment(&g, &origin);
            (g, m)
        })
        .collect();
    let max_abs_moment = moments.iter().fold(T::zero(), |m, (_, v)| m.max(v.abs()));
    let l1 = a.l1_norm();
    let kappa = params.decay_exponent().to_f64_lossy();
    let c_hat = envelope_constant(n, params.delta().to_f64_lossy(), 0);
    let radius = params.radius().to_f64_lossy();
    let l = a.half_width().to_f64_lossy();
    let sphere = if n == 1 { 2.0 } else { std::f64::consts::TAU };
    let gamma = index as f64;
    let tail = if kappa > n as f64 + gamma {
        l1.to_f64_lossy() * c_hat * 2f64.powf(kappa) * radius.powf(n as f64 - kappa) * sphere
            * l.powf(n as f64 + gamma - kappa)
            / (kappa - n as f64 - gamma)
    } else {
        f64::INFINITY
    };
    let quad = T::lit(BR_MOMENT_TOLERANCE) * l1;
    let tail_bound = T::lit(tail);
    Ok(MomentCheck {
        radius: params.radius(),
        moments,
        max_abs_moment,
        l1_norm: l1,
        quadrature_tolerance: quad,
        tail_bound,
        pass: max_abs_moment <= quad + tail_bound,
        strict_pass: max_abs_moment <= quad,
    })
}

/// Annulus of probe points `min < |y - x0| ≤ max` for decay measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayWindow<T> {
    pub min_distance: T,
    pub max_distance: T,
}

impl<T: Real> DecayWindow<T> {
    /// From `√n r` out to `L/4`.
    pub fn standard(atom: &Atom<T>) -> Self {
        let n = from_usize::<T>(atom.samples.dim());
        Self {
            min_distance: n.sqrt() * atom.cube.side(),
            max_distance: atom.samples.half_width() / T::lit(4.0),
        }
    }
}

/// `Ĉ = max_y T^δ_* a(y) |y - x0|^{n/p} w(Q)^{1/p} / r^{n/p}` over the window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport<T> {
    pub c_hat: T,
    pub argmax_distance: T,
    pub probe_points: usize,
}

/// The critical order `δ = n/p - (n+1)/2`.
pub fn critical_delta<T: Real>(dim: usize, p: T) -> T {
    let n = from_usize::<T>(dim);
    n / p - (n + T::one()) / T::lit(2.0)
}

/// Decay constant of `T^δ_* a` over a radius grid.
pub fn atom_decay_ratio<T: Real + FftNum>(
    atom: &Atom<T>,
    delta: T,
    radii: &[T],
    window: DecayWindow<T>,
) -> Result<DecayReport<T>> {
    let n = atom.samples.dim();
    let expected = critical_delta(n, atom.p);
    if (delta - expected).abs() > T::lit(1e-12) * expected.max(T::one()) {
        return Err(Error::InvalidParams(format!(
            "decay ratio needs the critical order {expected}, got {delta}"
        )));
    }
    let maximal = br_maximal(&atom.samples, delta, radii)?;
    decay_ratio_of(&maximal, atom, window)
}

/// [`atom_decay_ratio`] for a precomputed maximal function.
pub fn decay_ratio_of<T: Real>(maximal: &GridFunction<T>, atom: &Atom<T>, window: DecayWindow<T>) -> Result<DecayReport<T>> {
    let n = atom.samples.dim();
    let exponent = from_usize::<T>(n) / atom.p;
    let w_q = weighted_measure(&atom.weight, &atom.samples.cells_in(&atom.cube));
    let r = atom.cube.side();
    let norm = w_q.powf(T::one() / atom.p) / r.powf(exponent);
    let center = atom.cube.center();
    let mut best = (T::zero(), T::zero());
    let mut count = 0usize;
    for (i, &v) in maximal.values().iter().enumerate() {
        let d = maximal.distance(i, center);
        if d > window.min_distance && d <= window.max_distance {
            count += 1;
            let c = v * d.powf(exponent) * norm;
            if c > best.0 {
                best = (c, d);
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidParams("decay window contains no grid points".into()));
    }
    Ok(DecayReport {
        c_hat: best.0,
        argmax_distance: best.1,
        probe_points: count,
    })
}

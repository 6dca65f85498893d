//! Gamma function and Bessel functions `J_μ` of real order `μ ≥ 0`.
//!
//! `J_μ(t)` is evaluated from the Poisson integral
//!
//! ```text
//! J_μ(t) = (t/2)^μ / (Γ(μ+½) Γ(½)) ∫_{-1}^{1} cos(ts) (1-s²)^{μ-½} ds
//! ```
//!
//! with Gauss–Jacobi quadrature for `t ≤ max(18, μ²/6)` and by the Hankel
//! large-argument expansion beyond that.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Real};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Most quadrature nodes ever used for one Bessel evaluation.
pub const MAX_NODES: usize = 512;

/// `Γ(x)` for `x > 0`.
pub fn gamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::Domain {
            func: "gamma",
            arg: x.to_f64_lossy(),
        });
    }
    Ok(gamma_pos(x))
}

/// Lanczos approximation; the caller guarantees `x > 0`.
pub(crate) fn gamma_pos<T: Real>(x: T) -> T {
    if x < T::lit(0.5) {
        // Γ(x) = Γ(x+1)/x keeps the argument in the accurate range.
        return gamma_pos(x + T::one()) / x;
    }
    let z = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (k, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += T::lit(c) / (z + from_usize(k));
    }
    let t = z + T::lit(LANCZOS_G + 0.5);
    let log_part = (z + T::lit(0.5)) * t.ln() - t;
    (T::TAU()).sqrt() * log_part.exp() * acc
}

/// Argument above which the asymptotic expansion replaces quadrature.
pub fn switch_point(mu: f64) -> f64 {
    18f64.max(mu * mu / 6.0)
}

/// Quadrature nodes used at argument `t`: `⌈t⌉ + 40`, capped at [`MAX_NODES`].
pub fn quadrature_nodes(t: f64) -> usize {
    ((t.ceil() as usize) + 40).min(MAX_NODES)
}

/// Gauss–Jacobi rule for the symmetric weight `(1 - s²)^a` on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussJacobi {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussJacobi {
    /// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix, weights come
    /// from the first eigenvector components.
    pub fn symmetric(a: f64, n: usize) -> Result<Self> {
        if !(a > -1.0) || n == 0 {
            return Err(Error::InvalidParams(format!(
                "Gauss-Jacobi needs exponent > -1 and at least one node (a = {a}, n = {n})"
            )));
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let kf = k as f64;
            let b2 = if k == 1 && (a + 0.5).abs() < 1e-15 {
                0.5
            } else {
                kf * (kf + 2.0 * a) / (4.0 * (kf + a) * (kf + a) - 1.0)
            };
            let b = b2.sqrt();
            jac[(k - 1, k)] = b;
            jac[(k, k - 1)] = b;
        }
        let g = |x: f64| gamma_pos(x);
        let mass = 2f64.powf(2.0 * a + 1.0) * g(a + 1.0) * g(a + 1.0) / g(2.0 * a + 2.0);
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mass * v0 * v0)
            })
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_{-1}^{1} f(s) (1-s²)^a ds`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

type RuleCache = Mutex<HashMap<(u64, usize), Arc<GaussJacobi>>>;

fn cached_rule(a: f64, n: usize) -> Arc<GaussJacobi> {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (a.to_bits(), n);
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&key) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(GaussJacobi::symmetric(a, n).expect("exponent checked by caller"));
    cache
        .lock()
        .expect("rule cache poisoned")
        .entry(key)
        .or_insert(rule)
        .clone()
}

/// `J_μ(t)` for `μ ≥ 0`, `t ≥ 0`.
pub fn bessel_j<T: Real>(mu: T, t: T) -> Result<T> {
    if !(mu >= T::zero()) || !mu.is_finite() {
        return Err(Error::Domain {
            func: "bessel_j (order)",
            arg: mu.to_f64_lossy(),
        });
    }
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::Domain {
            func: "bessel_j (argument)",
            arg: t.to_f64_lossy(),
        });
    }
    Ok(bessel_j_unchecked(mu, t))
}

pub(crate) fn bessel_j_unchecked<T: Real>(mu: T, t: T) -> T {
    if t == T::zero() {
        return if mu == T::zero() { T::one() } else { T::zero() };
    }
    let mu64 = mu.to_f64_lossy();
    let t64 = t.to_f64_lossy();
    if t64 <= switch_point(mu64) {
        bessel_quadrature(mu, t)
    } else {
        bessel_asymptotic(mu, t)
    }
}

fn bessel_quadrature<T: Real>(mu: T, t: T) -> T {
    let half = T::lit(0.5);
    let rule = cached_rule((mu - half).to_f64_lossy(), quadrature_nodes(t.to_f64_lossy()));
    let integral: T = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| T::lit(w) * (t * T::lit(s)).cos())
        .sum();
    let prefactor = (t * half).powf(mu) / (gamma_pos(mu + half) * T::PI().sqrt());
    prefactor * integral
}

fn bessel_asymptotic<T: Real>(mu: T, t: T) -> T {
    let nu4 = T::lit(4.0) * mu * mu;
    let mut p = T::one();
    let mut q = T::zero();
    let mut term = T::one();
    let mut prev = T::infinity();
    let rising = (mu * mu / (T::lit(2.0) * t)).to_f64_lossy().ceil() as usize + 4;
    for k in 1..=60usize {
        let odd = T::lit((2 * k - 1) as f64);
        term = term * (nu4 - odd * odd) / (T::lit(8.0) * from_usize::<T>(k) * t);
        let mag = term.abs();
        if mag == T::zero() || (k > rising && mag > prev) {
            break;
        }
        // signs follow (-1)^{⌊k/2⌋} in P and Q respectively
        let sign = if (k / 2) % 2 == 0 { T::one() } else { -T::one() };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if k > rising && mag <= T::epsilon() * T::lit(1e-2) * (p.abs() + q.abs()) {
            break;
        }
        prev = mag;
    }
    let omega = t - mu * T::FRAC_PI_2() - T::FRAC_PI_4();
    (T::lit(2.0) / (T::PI() * t)).sqrt() * (p * omega.cos() - q * omega.sin())
}

/// Order of a Bessel function, `μ ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselOrder<T> {
    mu: T,
}

impl<T: Real> BesselOrder<T> {
    pub fn new(mu: T) -> Result<Self> {
        if !(mu >= T::zero()) || !mu.is_finite() {
            return Err(Error::Domain {
                func: "BesselOrder",
                arg: mu.to_f64_lossy(),
            });
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    /// `J_μ(t)`; negative `t` is rejected.
    pub fn j(&self, t: T) -> Result<T> {
        bessel_j(self.mu, t)
    }

    /// `t^{-μ} J_μ(t)`, continuous at `t = 0` with value `1 / (2^μ Γ(μ+1))`.
    pub fn scaled(&self, t: T) -> T {
        if t == T::zero() {
            return T::one() / (T::lit(2.0).powf(self.mu) * gamma_pos(self.mu + T::one()));
        }
        bessel_j_unchecked(self.mu, t) / t.powf(self.mu)
    }
}

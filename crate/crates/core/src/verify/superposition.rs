//! Weak-type bounds for `ℓ^p`-summable combinations of functions with
//! `w({|f_j| > α}) ≤ α^{-p}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Cube, GridFunction};
use crate::spaces::level_profile;
use crate::verify::report::Status;
use crate::weights::{weighted_measure, Weight};

/// Log-spaced levels evaluated in addition to the breakpoints.
const ALPHA_GRID: usize = 256;

/// `(2 - p)/(1 - p)`.
pub fn superposition_constant(p: f64) -> f64 {
    (2.0 - p) / (1.0 - p)
}

/// A seeded family of calibrated two-level members `±w(E_j)^{-1/p} χ_{E_j}`
/// combined with equal coefficients `λ_j = (normalization/J)^{1/p}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuperpositionFamily {
    pub members: usize,
    pub seed: u64,
    /// `Σ|λ_j|^p`.
    pub normalization: f64,
}

impl Default for SuperpositionFamily {
    fn default() -> Self {
        Self {
            members: 8,
            seed: 7,
            normalization: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuperpositionReport {
    pub p: f64,
    pub bound_constant: f64,
    pub coefficient_sum: f64,
    pub hypothesis_holds: bool,
    /// `max_j sup_α α^p w({|f_j| > α})`, 1 for an exactly calibrated family.
    pub member_calibration: f64,
    /// `sup_α α^p w({|F| > α})` over the bound constant.
    pub worst_ratio: f64,
    pub worst_alpha: f64,
    pub violating_alpha: Option<f64>,
    pub alpha_points: usize,
    /// Direct level-set sums agree with the sorted profile on the α grid.
    pub brute_force_agrees: bool,
    pub status: Status,
}

/// `w({|f| > α})` by summing over the grid.
pub fn distribution_brute_force(f: &GridFunction<f64>, w: &Weight<f64>, alpha: f64) -> f64 {
    let wv = w.samples().values();
    f.cell_volume()
        * f.values()
            .iter()
            .zip(wv)
            .filter(|(v, _)| v.abs() > alpha)
            .map(|(_, &wi)| wi)
            .sum::<f64>()
}

/// `w({|f| > α})` from a descending level profile.
fn distribution_from_profile(profile: &[(f64, f64)], alpha: f64) -> f64 {
    let k = profile.partition_point(|&(v, _)| v > alpha);
    if k == 0 {
        0.0
    } else {
        profile[k - 1].1
    }
}

/// `sup_α α^p w({|f| > α})`, attained as `α` increases to a breakpoint.
pub fn weak_p_sup(profile: &[(f64, f64)], p: f64) -> (f64, f64) {
    profile
        .iter()
        .map(|&(v, m)| (v.powf(p) * m, v))
        .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a })
}

/// Members and coefficients of a calibrated family on the weight's grid.
pub fn calibrated_family(w: &Weight<f64>, p: f64, family: &SuperpositionFamily) -> Result<(Vec<GridFunction<f64>>, Vec<f64>)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParams(format!("superposition needs p in (0, 1), got {p}")));
    }
    if family.members == 0 || !(family.normalization > 0.0) {
        return Err(Error::InvalidParams("family needs members and a positive normalization".into()));
    }
    let grid = w.samples();
    let n = grid.dim();
    let l = grid.half_width();
    let h = grid.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(family.seed);
    let mut members = Vec::with_capacity(family.members);
    for _ in 0..family.members {
        let side = (8.0 * h) * (l / (8.0 * h)).powf(rng.gen::<f64>());
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-l + side / 2.0..=l - side / 2.0)).collect();
        let cube = Cube::new(center, side)?;
        let cells = grid.cells_in(&cube);
        let measure = weighted_measure(w, &cells);
        if !(measure > 0.0) {
            return Err(Error::InvalidParams("family member has an empty support".into()));
        }
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let height = sign * measure.powf(-1.0 / p);
        let mut values = vec![0.0; grid.len()];
        for i in cells {
            values[i] = height;
        }
        members.push(grid.with_values(values));
    }
    let lambda = (family.normalization / family.members as f64).powf(1.0 / p);
    Ok((members, vec![lambda; family.members]))
}

/// Evaluates `w({|Σ λ_j f_j| > α})` against `((2-p)/(1-p)) α^{-p}` at every
/// breakpoint and on a log-spaced α grid.
pub fn check_superposition(
    p: f64,
    w: &Weight<f64>,
    family: &SuperpositionFamily,
    tolerance: f64,
) -> Result<SuperpositionReport> {
    let (members, lambdas) = calibrated_family(w, p, family)?;
    let coefficient_sum: f64 = lambdas.iter().map(|l| l.abs().powf(p)).sum();
    let hypothesis_holds = coefficient_sum <= 1.0 + tolerance;
    let mut member_calibration: f64 = 0.0;
    for f in &members {
        let (s, _) = weak_p_sup(&level_profile(f, w, None)?, p);
        member_calibration = member_calibration.max(s);
    }
    let grid = w.samples();
    let mut combined = vec![0.0; grid.len()];
    for (f, &l) in members.iter().zip(&lambdas) {
        for (c, &v) in combined.iter_mut().zip(f.values()) {
            *c += l * v;
        }
    }
    let combined = grid.with_values(combined);
    let profile = level_profile(&combined, w, None)?;
    let bound = superposition_constant(p);

    let (mut worst_ratio, mut worst_alpha) = (0.0, 0.0);
    let mut violating_alpha = None;
    let mut consider = |alpha: f64, value: f64| {
        let ratio = alpha.powf(p) * value / bound;
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_alpha = alpha;
        }
        if ratio > 1.0 + tolerance && violating_alpha.is_none() {
            violating_alpha = Some(alpha);
        }
    };
    for &(v, m) in &profile {
        consider(v, m);
    }
    let mut brute_force_agrees = true;
    let mut alpha_points = profile.len();
    if let (Some(&(top, _)), Some(&(bottom, _))) = (profile.first(), profile.last()) {
        let (lo, hi) = ((bottom / 4.0).ln(), (top * 2.0).ln());
        for k in 0..ALPHA_GRID {
            let alpha = (lo + (hi - lo) * k as f64 / (ALPHA_GRID - 1) as f64).exp();
            let fast = distribution_from_profile(&profile, alpha);
            let slow = distribution_brute_force(&combined, w, alpha);
            if (fast - slow).abs() > 1e-9 * slow.max(f64::MIN_POSITIVE) {
                brute_force_agrees = false;
            }
            consider(alpha, fast);
        }
        alpha_points += ALPHA_GRID;
    }
    let status = if !hypothesis_holds {
        Status::HypothesisViolated
    } else if violating_alpha.is_some() || !brute_force_agrees {
        Status::Fail
    } else {
        Status::Pass
    };
    Ok(SuperpositionReport {
        p,
        bound_constant: bound,
        coefficient_sum,
        hypothesis_holds,
        member_calibration,
        worst_ratio,
        worst_alpha,
        violating_alpha,
        alpha_points,
        brute_force_agrees,
        status,
    })
}

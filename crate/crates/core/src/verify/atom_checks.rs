//! Per-atom measurements: pointwise domination by the Hardy–Littlewood
//! function, the decay envelope of `G^+` off `Q*`, and the weak-type sums
//! `sup_λ λ^p w({G > λ})` split at `Q*`.

use serde::Serialize;

use crate::atoms::Atom;
use crate::error::Result;
use crate::grid::GridFunction;
use crate::kernel::BRParams;
use crate::operator::{br_apply_spectral, br_maximal, hardy_littlewood};
use crate::spaces::{level_profile, radial_grand_maximal, ProbeFamily};
use crate::verify::superposition::weak_p_sup;
use crate::weights::{weighted_measure, Weight, WeightKind};

/// Denominators below this are treated as zero in pointwise ratios.
pub const RATIO_FLOOR: f64 = 1e-12;
/// Envelope bins per factor of two in distance.
const BINS_PER_OCTAVE: usize = 4;

/// Cube sides `h · 2^k ≤ 2L` for the Hardy–Littlewood function. The largest
/// cube around any grid point covers the whole box.
pub fn hardy_littlewood_sides(grid: &GridFunction<f64>) -> Vec<f64> {
    let diameter = 2.0 * grid.half_width();
    let mut out = Vec::new();
    let mut s = grid.spacing();
    while s < diameter * (1.0 - 1e-12) {
        out.push(s);
        s *= 2.0;
    }
    out.push(diameter);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominationReport {
    pub max_ratio: f64,
    pub location: Option<Vec<f64>>,
    /// Both sides vanish everywhere.
    pub vacuous: bool,
    #[serde(skip)]
    pub ratio: GridFunction<f64>,
}

/// `T^δ_* f / M f` where `M f > 1e-12`, with the maximal Bochner–Riesz
/// function taken over `radii` and `M` over cubes of the given sides.
pub fn check_pointwise_domination(
    f: &GridFunction<f64>,
    delta: f64,
    radii: &[f64],
    sides: &[f64],
) -> Result<DominationReport> {
    let top = br_maximal(f, delta, radii)?;
    let hl = hardy_littlewood(f, sides)?;
    Ok(domination_ratio(&top, &hl))
}

/// Pointwise `top / hl` for precomputed maximal functions.
pub fn domination_ratio(top: &GridFunction<f64>, hl: &GridFunction<f64>) -> DominationReport {
    let mut best: (f64, Option<usize>) = (0.0, None);
    let values: Vec<f64> = top
        .values()
        .iter()
        .zip(hl.values())
        .enumerate()
        .map(|(i, (&t, &m))| {
            if m > RATIO_FLOOR {
                let r = t / m;
                if r > best.0 {
                    best = (r, Some(i));
                }
                r
            } else {
                0.0
            }
        })
        .collect();
    let vacuous = top.max_abs() <= RATIO_FLOOR && hl.max_abs() <= RATIO_FLOOR;
    DominationReport {
        max_ratio: best.0,
        location: best.1.map(|i| top.point(i)[..top.dim()].to_vec()),
        vacuous,
        ratio: top.with_values(values),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrandDecayReport {
    /// `max G(x) |x - x0|^{n/p} w(Q)^{1/p} / r^{n/p}` over `x ∉ Q*`, `|x - x0| ≤ L/4`.
    pub c7: f64,
    pub argmax_distance: f64,
    /// Distance from the centre to the boundary of `Q*` along an axis.
    pub boundary_distance: f64,
    /// Envelope at twice the boundary distance over the envelope at the boundary.
    pub drop_ratio: f64,
    /// `2^{-n/p}`.
    pub expected_drop: f64,
    pub points: usize,
    /// `(d, max G)` over log-spaced annuli outside `Q*`.
    pub envelope: Vec<(f64, f64)>,
}

/// `G := G^+(T^δ_R a)` off `Q*` for one radius.
pub fn check_grand_decay(a: &Atom<f64>, params: &BRParams<f64>, probes: &ProbeFamily) -> Result<GrandDecayReport> {
    let t = br_apply_spectral(a.samples(), params)?.output;
    let g = radial_grand_maximal(&t, probes)?;
    Ok(grand_decay_of(&g, a))
}

fn atom_normalization(a: &Atom<f64>) -> f64 {
    let n = a.samples().dim() as f64;
    let wq = weighted_measure(a.weight(), &a.samples().cells_in(a.cube()));
    wq.powf(1.0 / a.p()) / a.cube().side().powf(n / a.p())
}

/// [`check_grand_decay`] for a precomputed `G`.
pub fn grand_decay_of(g: &GridFunction<f64>, a: &Atom<f64>) -> GrandDecayReport {
    let n = g.dim();
    let exponent = n as f64 / a.p();
    let norm = atom_normalization(a);
    let star = a.cube().enlarged();
    let d0 = star.side() / 2.0;
    let dmax = g.half_width() / 4.0;
    let center = a.cube().center();
    let octave = 2f64.powf(1.0 / BINS_PER_OCTAVE as f64);
    let bins = ((dmax / d0).ln() / octave.ln()).ceil().max(1.0) as usize;
    let mut envelope = vec![0.0; bins];
    let mut best = (0.0, 0.0);
    let mut points = 0usize;
    for (i, &v) in g.values().iter().enumerate() {
        let x = g.point(i);
        if star.contains(&x[..n]) {
            continue;
        }
        let d = g.distance(i, center);
        if d > dmax {
            continue;
        }
        points += 1;
        let c = v * d.powf(exponent) * norm;
        if c > best.0 {
            best = (c, d);
        }
        let b = (((d / d0).ln() / octave.ln()).floor().max(0.0) as usize).min(bins - 1);
        envelope[b] = f64::max(envelope[b], v);
    }
    let profile: Vec<(f64, f64)> = envelope
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(b, &v)| (d0 * octave.powi(b as i32), v))
        .collect();
    let drop_ratio = if bins > BINS_PER_OCTAVE && envelope[0] > 0.0 {
        envelope[BINS_PER_OCTAVE] / envelope[0]
    } else {
        f64::NAN
    };
    GrandDecayReport {
        c7: best.0,
        argmax_distance: best.1,
        boundary_distance: d0,
        drop_ratio,
        expected_drop: 2f64.powf(-exponent),
        points,
        envelope: profile,
    }
}

/// Weak-type sums of one `G` against one atom.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakBoundSample {
    /// `sup_λ λ^p w({G > λ})`.
    pub s: f64,
    /// The same restricted to `Q*`.
    pub i1: f64,
    /// The same restricted to the complement of `Q*`.
    pub i2: f64,
    pub argmax_lambda: f64,
    /// Growth of `S` when the level sets are continued outside the box along
    /// `K |x - x0|^{-n/p}`, with `K` fitted on `L/4 ≤ |x - x0| ≤ L/2`.
    pub tail: f64,
    /// `max_{x ∉ Q*} G(x) |x - x0|^{n/p} w(Q)^{1/p} / r^{n/p}` over the whole box.
    pub c7_global: f64,
    /// No point off `Q*` exceeds the envelope value at the `Q*` boundary.
    pub i2_empty_above_envelope: bool,
}

/// `w(B(0, ρ))` for the analytic weights, `max w · |B(0, ρ)|` otherwise.
fn ball_weight(w: &Weight<f64>, rho: f64) -> f64 {
    let n = w.dim() as f64;
    let (volume, sphere) = if w.dim() == 1 {
        (2.0 * rho, 2.0)
    } else {
        (std::f64::consts::PI * rho * rho, std::f64::consts::TAU)
    };
    match w.kind() {
        WeightKind::Constant { c } => c * volume,
        WeightKind::Power { a } => sphere * rho.powf(n + a) / (n + a),
        WeightKind::Tabulated => w.samples().max_abs() * volume,
    }
}

/// `S`, `I₁`, `I₂` and the exterior tail for `G` over atom `a`.
pub fn weak_bound_sample(g: &GridFunction<f64>, a: &Atom<f64>, w: &Weight<f64>) -> Result<WeakBoundSample> {
    let p = a.p();
    let n = g.dim();
    let exponent = n as f64 / p;
    let star = a.cube().enlarged();
    let inside = g.mask_of(&star);
    let outside: Vec<bool> = inside.iter().map(|b| !b).collect();
    let profile = level_profile(g, w, None)?;
    let (s, at) = weak_p_sup(&profile, p);
    let (i1, _) = weak_p_sup(&level_profile(g, w, Some(&inside))?, p);
    let (i2, _) = weak_p_sup(&level_profile(g, w, Some(&outside))?, p);

    let center = a.cube().center();
    let l = g.half_width();
    let norm = atom_normalization(a);
    let d0 = star.side() / 2.0;
    let mut k_edge: f64 = 0.0;
    let mut c7_global: f64 = 0.0;
    for (i, &v) in g.values().iter().enumerate() {
        if inside[i] {
            continue;
        }
        let d = g.distance(i, center);
        c7_global = c7_global.max(v * d.powf(exponent) * norm);
        if d >= l / 4.0 && d <= l / 2.0 {
            k_edge = k_edge.max(v * d.powf(exponent));
        }
    }
    let envelope_at_boundary = c7_global / norm * d0.powf(-exponent);
    let i2_empty_above_envelope = g
        .values()
        .iter()
        .zip(&outside)
        .all(|(&v, &out)| !out || v <= envelope_at_boundary * (1.0 + 1e-12));

    let offset = center.iter().map(|c| c * c).sum::<f64>().sqrt();
    let reach = l - offset;
    let mut extended = s;
    if k_edge > 0.0 && reach > 0.0 {
        let lambda_edge = k_edge * reach.powf(-exponent);
        let inner = ball_weight(w, l);
        let exterior = |lambda: f64| {
            let rho = offset + (k_edge / lambda).powf(1.0 / exponent);
            (ball_weight(w, rho) - inner).max(0.0)
        };
        for &(v, m) in profile.iter().filter(|l| l.0 <= lambda_edge) {
            extended = extended.max(v.powf(p) * (m + exterior(v)));
        }
        for k in 0..=240 {
            let lambda = lambda_edge * 10f64.powf(-(k as f64) / 20.0);
            let inside_box = {
                let j = profile.partition_point(|&(v, _)| v > lambda);
                if j == 0 {
                    0.0
                } else {
                    profile[j - 1].1
                }
            };
            extended = extended.max(lambda.powf(p) * (inside_box + exterior(lambda)));
        }
    }
    Ok(WeakBoundSample {
        s,
        i1,
        i2,
        argmax_lambda: at * (1.0 - 1e-15),
        tail: extended - s,
        c7_global,
        i2_empty_above_envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{critical_delta, make_atom};
    use crate::grid::{Cube, GridBox};
    use crate::spaces::dyadic_t_grid;

    fn setup() -> (Weight<f64>, Atom<f64>) {
        let w = Weight::constant(GridBox::new(1, 16.0).unwrap(), 2048, 1.0).unwrap();
        let a = make_atom(&Cube::new(vec![0.0], 1.0).unwrap(), &w, 2.0 / 3.0, 2.0, 0, 3).unwrap();
        (w, a)
    }

    #[test]
    fn zero_input_is_vacuous() {
        let f = GridFunction::zeros(GridBox::new(1, 4.0).unwrap(), 256).unwrap();
        let r = check_pointwise_domination(&f, 1.0, &[1.0, 2.0], &[0.125, 0.25]).unwrap();
        assert!(r.vacuous);
        assert_eq!(r.max_ratio, 0.0);
        assert!(r.location.is_none());
    }

    #[test]
    fn homogeneous_in_the_atom() {
        let (w, a) = setup();
        let g = a.samples().map(f64::abs);
        let base = weak_bound_sample(&g, &a, &w).unwrap();
        for c in [0.5, 2.0] {
            let scaled = weak_bound_sample(&g.map(|v| c * v), &a, &w).unwrap();
            let expected = c.powf(a.p()) * base.s;
            assert!((scaled.s - expected).abs() <= 1e-12 * expected);
        }
        assert!(base.s <= base.i1 + base.i2 + 1e-15);
    }

    #[test]
    fn grand_decay_envelope_is_finite() {
        let (_, a) = setup();
        let h = a.samples().spacing();
        let fam = ProbeFamily::standard(1, 0, 2, dyadic_t_grid(h, 16.0)).unwrap();
        let params = BRParams::new(1, critical_delta(1, a.p()), 1.0).unwrap();
        let r = check_grand_decay(&a, &params, &fam).unwrap();
        assert!(r.c7.is_finite() && r.c7 > 0.0);
        assert!(r.points > 0);
        assert!((r.expected_drop - 2f64.powf(-1.5)).abs() < 1e-15);
    }
}

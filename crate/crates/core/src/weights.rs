//! Muckenhoupt weights on a grid: weighted measures, `A_1`/`A_q` constants over
//! a finite cube family, the critical index `q_w`, and the doubling and
//! measure-comparison estimates of `A_1` weights.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, GridBox, GridFunction};
use crate::scalar::{from_usize, Real};

/// Cube averages of `w^{-1/(q-1)}` beyond this are reported as saturated.
pub const SATURATION: f64 = 1e30;
/// Upper end of the `q_w` bisection interval.
pub const MAX_Q: f64 = 8.0;
/// A constant is stable when one grid refinement changes it by less than this factor.
pub const STABILITY_FACTOR: f64 = 1.1;
const BISECTION_STEPS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind<T> {
    Constant { c: T },
    /// `w(x) = |x|^a`.
    Power { a: T },
    Tabulated,
}

/// A strictly positive weight sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight<T> {
    kind: WeightKind<T>,
    samples: GridFunction<T>,
}

impl<T: Real> Weight<T> {
    pub fn constant(domain: GridBox<T>, points: usize, c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidParams(format!("constant weight must be positive, got {c}")));
        }
        Ok(Self {
            kind: WeightKind::Constant { c },
            samples: GridFunction::from_fn(domain, points, |_| c)?,
        })
    }

    /// `|x|^a` with `a > -n`, sampled at cell centres.
    pub fn power(domain: GridBox<T>, points: usize, a: T) -> Result<Self> {
        let n = from_usize::<T>(domain.dim());
        if !(a > -n) || !a.is_finite() {
            return Err(Error::InvalidParams(format!(
                "power weight |x|^a needs a > -n = {}, got {a}",
                -n
            )));
        }
        let samples = GridFunction::from_fn(domain, points, |x| {
            x.iter().map(|&v| v * v).sum::<T>().sqrt().powf(a)
        })?;
        Self::checked(WeightKind::Power { a }, samples)
    }

    pub fn tabulated(samples: GridFunction<T>) -> Result<Self> {
        Self::checked(WeightKind::Tabulated, samples)
    }

    fn checked(kind: WeightKind<T>, samples: GridFunction<T>) -> Result<Self> {
        if let Some(i) = samples.values().iter().position(|&v| !(v > T::zero())) {
            return Err(Error::InvalidParams(format!("weight sample {i} is not positive")));
        }
        Ok(Self { kind, samples })
    }

    pub fn kind(&self) -> WeightKind<T> {
        self.kind
    }

    pub fn samples(&self) -> &GridFunction<T> {
        &self.samples
    }

    pub fn dim(&self) -> usize {
        self.samples.dim()
    }

    /// `c · w`; tabulated weights stay tabulated.
    pub fn scaled(&self, c: T) -> Result<Self> {
        let kind = match self.kind {
            WeightKind::Constant { c: k } => WeightKind::Constant { c: k * c },
            _ => WeightKind::Tabulated,
        };
        Self::checked(kind, self.samples.map(|v| v * c))
    }

    /// The same weight on a grid with `points` cells per axis. Analytic kinds are
    /// resampled; tabulated weights only support exact halving by averaging.
    pub fn resampled(&self, points: usize) -> Result<Self> {
        let domain = self.samples.domain();
        match self.kind {
            WeightKind::Constant { c } => Self::constant(domain, points, c),
            WeightKind::Power { a } => Self::power(domain, points, a),
            WeightKind::Tabulated => {
                let m = self.samples.points_per_axis();
                if points * 2 != m {
                    return Err(Error::InvalidParams(format!(
                        "tabulated weight on {m} points can only be coarsened to {}",
                        m / 2
                    )));
                }
                let quarter = T::one() / from_usize::<T>(1 << self.dim());
                let v = self.samples.values();
                let values: Vec<T> = if self.dim() == 1 {
                    (0..points).map(|i| (v[2 * i] + v[2 * i + 1]) * quarter).collect()
                } else {
                    let mut out = Vec::with_capacity(points * points);
                    for i in 0..points {
                        for j in 0..points {
                            let at = |a: usize, b: usize| v[(2 * i + a) * m + 2 * j + b];
                            out.push((at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1)) * quarter);
                        }
                    }
                    out
                };
                Self::tabulated(GridFunction::from_values(domain, points, values)?)
            }
        }
    }

    /// Closed-form critical index: 1 for constants and `|x|^a` with `a ≤ 0`,
    /// `1 + a/n` for `a > 0`.
    pub fn closed_form_critical_index(&self) -> Option<T> {
        match self.kind {
            WeightKind::Constant { .. } => Some(T::one()),
            WeightKind::Power { a } => Some(T::one().max(T::one() + a / from_usize::<T>(self.dim()))),
            WeightKind::Tabulated => None,
        }
    }

    /// `w(Q)` over the cells of a cube.
    pub fn measure_of(&self, cube: &Cube<T>) -> T {
        weighted_measure(self, &self.samples.cells_in(cube))
    }
}

/// Serializable description of a weight, built onto a concrete grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Constant { c: f64 },
    Power { a: f64 },
    Tabulated { path: PathBuf },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Constant { c: 1.0 }
    }
}

impl WeightSpec {
    pub fn build(&self, domain: GridBox<f64>, points: usize) -> Result<Weight<f64>> {
        match self {
            WeightSpec::Constant { c } => Weight::constant(domain, points, *c),
            WeightSpec::Power { a } => Weight::power(domain, points, *a),
            WeightSpec::Tabulated { path } => {
                let samples = GridFunction::read_csv(path)?;
                if samples.domain() != domain || samples.points_per_axis() != points {
                    return Err(Error::InvalidGrid(format!(
                        "tabulated weight {} does not match the experiment grid",
                        path.display()
                    )));
                }
                Weight::tabulated(samples)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightSpec::Constant { c } => format!("constant({c})"),
            WeightSpec::Power { a } => format!("|x|^{a}"),
            WeightSpec::Tabulated { path } => format!("tabulated({})", path.display()),
        }
    }
}

/// `w(E) = h^n Σ_{x ∈ E} w(x)` for a set of flat cell indices.
pub fn weighted_measure<T: Real>(w: &Weight<T>, cells: &[usize]) -> T {
    let v = w.samples.values();
    w.samples.cell_volume() * cells.iter().map(|&i| v[i]).sum::<T>()
}

/// Dyadic cubes of side `2L/2^k ≥ 4h` tiling the box, plus their half-step
/// translates that stay inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeFamily<T> {
    domain: GridBox<T>,
    points: usize,
    cubes: Vec<Cube<T>>,
}

impl<T: Real> CubeFamily<T> {
    pub fn new(domain: GridBox<T>, points: usize) -> Result<Self> {
        let probe = GridFunction::<T>::zeros(domain, points)?;
        let n = domain.dim();
        let l = domain.half_width();
        let h = probe.spacing();
        let min_cells = 1usize << (2 * n);
        let mut cubes = Vec::new();
        let mut level = 0u32;
        loop {
            let per_axis = 1usize << level;
            let side = (l + l) / from_usize::<T>(per_axis);
            if side < T::lit(4.0) * h * (T::one() - T::lit(1e-12)) {
                break;
            }
            let half = side / T::lit(2.0);
            let shifts: Vec<Vec<bool>> = if n == 1 {
                vec![vec![false], vec![true]]
            } else {
                vec![vec![false, false], vec![true, false], vec![false, true], vec![true, true]]
            };
            for shift in &shifts {
                let counts: Vec<usize> = shift.iter().map(|&s| if s { per_axis - 1 } else { per_axis }).collect();
                let total: usize = counts.iter().product();
                for flat in 0..total {
                    let idx = if n == 1 { [flat, 0] } else { [flat / counts[1], flat % counts[1]] };
                    let center: Vec<T> = (0..n)
                        .map(|k| {
                            let offset = if shift[k] { half } else { T::zero() };
                            -l + (from_usize::<T>(idx[k]) + T::lit(0.5)) * side + offset
                        })
                        .collect();
                    let cube = Cube::new(center, side)?;
                    if probe.cells_in(&cube).len() >= min_cells {
                        cubes.push(cube);
                    }
                }
            }
            level += 1;
        }
        Ok(Self { domain, points, cubes })
    }

    /// Family for the grid of a weight.
    pub fn for_weight(w: &Weight<T>) -> Result<Self> {
        Self::new(w.samples.domain(), w.samples.points_per_axis())
    }

    pub fn cubes(&self) -> &[Cube<T>] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn points(&self) -> usize {
        self.points
    }

    fn check_grid(&self, w: &Weight<T>) -> Result<()> {
        if w.samples.domain() != self.domain || w.samples.points_per_axis() != self.points {
            return Err(Error::InvalidGrid("cube family and weight live on different grids".into()));
        }
        Ok(())
    }
}

/// Estimate of a Muckenhoupt constant over a cube family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantReport<T> {
    pub value: T,
    pub saturated: bool,
    pub family_size: usize,
    /// Index in the family of the cube attaining the maximum.
    pub argmax: Option<usize>,
}

fn max_report<T: Real>(values: Vec<(T, bool)>) -> ConstantReport<T> {
    let family_size = values.len();
    let saturated = values.iter().any(|v| v.1);
    let mut best = (T::zero(), None);
    for (i, (v, _)) in values.into_iter().enumerate() {
        if best.1.is_none() || v > best.0 {
            best = (v, Some(i));
        }
    }
    ConstantReport {
        value: if saturated { T::infinity() } else { best.0 },
        saturated,
        family_size,
        argmax: best.1,
    }
}

/// `(avg_Q w) (avg_Q w^{-1/(q-1)})^{q-1}` for one set of cells.
fn local_a_q<T: Real>(values: &[T], cells: &[usize], q: T) -> (T, bool) {
    let count = from_usize::<T>(cells.len());
    let e = -T::one() / (q - T::one());
    let avg_w = cells.iter().map(|&i| values[i]).sum::<T>() / count;
    let avg_dual = cells.iter().map(|&i| values[i].powf(e)).sum::<T>() / count;
    if !(avg_dual <= T::lit(SATURATION)) {
        return (T::infinity(), true);
    }
    (avg_w * avg_dual.powf(q - T::one()), false)
}

/// `avg_Q w / min_Q w` for one set of cells.
fn local_a_1<T: Real>(values: &[T], cells: &[usize]) -> T {
    let count = from_usize::<T>(cells.len());
    let sum = cells.iter().map(|&i| values[i]).sum::<T>();
    let min = cells.iter().map(|&i| values[i]).fold(T::infinity(), T::min);
    sum / count / min
}

/// `sup_Q (avg_Q w)(avg_Q w^{-1/(q-1)})^{q-1}` over the family.
pub fn a_q_constant<T: Real>(w: &Weight<T>, q: T, family: &CubeFamily<T>) -> Result<ConstantReport<T>> {
    if !(q > T::one()) {
        return Err(Error::InvalidParams(format!("A_q needs q > 1, got {q}")));
    }
    family.check_grid(w)?;
    let values = w.samples.values();
    let per: Vec<(T, bool)> = family
        .cubes
        .par_iter()
        .map(|c| local_a_q(values, &w.samples.cells_in(c), q))
        .collect();
    Ok(max_report(per))
}

/// `sup_Q avg_Q w / min_Q w` over the family.
pub fn a_1_constant<T: Real>(w: &Weight<T>, family: &CubeFamily<T>) -> Result<ConstantReport<T>> {
    family.check_grid(w)?;
    let values = w.samples.values();
    let per: Vec<(T, bool)> = family
        .cubes
        .par_iter()
        .map(|c| (local_a_1(values, &w.samples.cells_in(c)), false))
        .collect();
    Ok(max_report(per))
}

/// `A_1` ratio `avg_Q w / min_Q w` of a single cube.
pub fn local_a_1_constant<T: Real>(w: &Weight<T>, cube: &Cube<T>) -> Result<T> {
    let cells = w.samples.cells_in(cube);
    if cells.is_empty() {
        return Err(Error::InvalidParams("cube contains no grid cells".into()));
    }
    Ok(local_a_1(w.samples.values(), &cells))
}

/// A weight on a grid and on its refinement (or coarsening, for tabulated
/// weights), each with its cube family.
struct RefinementPair<T> {
    coarse: (Weight<T>, CubeFamily<T>),
    fine: (Weight<T>, CubeFamily<T>),
}

impl<T: Real> RefinementPair<T> {
    fn new(w: &Weight<T>) -> Result<Self> {
        let m = w.samples.points_per_axis();
        let (coarse, fine) = match w.kind {
            WeightKind::Tabulated => (w.resampled(m / 2)?, w.clone()),
            _ => (w.clone(), w.resampled(2 * m)?),
        };
        Ok(Self {
            coarse: (coarse.clone(), CubeFamily::for_weight(&coarse)?),
            fine: (fine.clone(), CubeFamily::for_weight(&fine)?),
        })
    }

    fn a_q(&self, q: T) -> Result<(ConstantReport<T>, ConstantReport<T>)> {
        Ok((
            a_q_constant(&self.coarse.0, q, &self.coarse.1)?,
            a_q_constant(&self.fine.0, q, &self.fine.1)?,
        ))
    }

    fn a_1(&self) -> Result<(ConstantReport<T>, ConstantReport<T>)> {
        Ok((a_1_constant(&self.coarse.0, &self.coarse.1)?, a_1_constant(&self.fine.0, &self.fine.1)?))
    }
}

fn stable<T: Real>(pair: &(ConstantReport<T>, ConstantReport<T>)) -> bool {
    !pair.0.saturated && !pair.1.saturated && pair.1.value < pair.0.value * T::lit(STABILITY_FACTOR)
}

/// Ratio of a constant on the refined grid to the one on the base grid.
pub fn refinement_ratio<T: Real>(coarse: &ConstantReport<T>, fine: &ConstantReport<T>) -> T {
    fine.value / coarse.value
}

/// Outcome of the `q_w` bisection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalIndexReport<T> {
    /// `+∞` when `A_q` is saturated or unstable up to `q = 8`.
    pub value: T,
    pub unbounded: bool,
    pub a_1_stable: bool,
    /// Refinement ratio of the constant at the returned index.
    pub refinement_ratio: T,
}

/// Refinement-sensitivity figures of the `A_1` and `A_q` constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementReport<T> {
    pub coarse: ConstantReport<T>,
    pub fine: ConstantReport<T>,
    pub ratio: T,
}

/// `A_q` (or `A_1` when `q` is `None`) on a grid and its refinement.
pub fn refinement_sensitivity<T: Real>(w: &Weight<T>, q: Option<T>) -> Result<RefinementReport<T>> {
    let pair = RefinementPair::new(w)?;
    let (coarse, fine) = match q {
        Some(q) => pair.a_q(q)?,
        None => pair.a_1()?,
    };
    let ratio = refinement_ratio(&coarse, &fine);
    Ok(RefinementReport { coarse, fine, ratio })
}

/// Smallest `q ∈ (1, 8]` whose `A_q` constant is finite and stable under one
/// grid refinement, found by bisection; 1 when the `A_1` constant is stable.
pub fn critical_index_estimate<T: Real>(w: &Weight<T>) -> Result<CriticalIndexReport<T>> {
    let pair = RefinementPair::new(w)?;
    let a1 = pair.a_1()?;
    if stable(&a1) {
        return Ok(CriticalIndexReport {
            value: T::one(),
            unbounded: false,
            a_1_stable: true,
            refinement_ratio: refinement_ratio(&a1.0, &a1.1),
        });
    }
    let top = pair.a_q(T::lit(MAX_Q))?;
    if !stable(&top) {
        return Ok(CriticalIndexReport {
            value: T::infinity(),
            unbounded: true,
            a_1_stable: false,
            refinement_ratio: refinement_ratio(&top.0, &top.1),
        });
    }
    let (mut lo, mut hi) = (T::one(), T::lit(MAX_Q));
    let mut at_hi = top;
    for _ in 0..BISECTION_STEPS {
        let mid = (lo + hi) / T::lit(2.0);
        let r = pair.a_q(mid)?;
        if stable(&r) {
            hi = mid;
            at_hi = r;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalIndexReport {
        value: hi,
        unbounded: false,
        a_1_stable: false,
        refinement_ratio: refinement_ratio(&at_hi.0, &at_hi.1),
    })
}

/// `w(λQ) / (λ^n w(Q))` against the `A_1`-derived bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoublingReport<T> {
    pub ratio: T,
    pub bound: T,
    pub pass: bool,
}

/// Doubling ratio of `Q` under dilation by `λ ≥ 1`. The bound is the larger of
/// the family `A_1` constant and the local one on `λQ`, corrected for the cell
/// count of the discrete cubes.
pub fn check_doubling<T: Real>(w: &Weight<T>, cube: &Cube<T>, lambda: T, a_1: T) -> Result<DoublingReport<T>> {
    if !(lambda >= T::one()) {
        return Err(Error::InvalidParams(format!("dilation factor must be at least 1, got {lambda}")));
    }
    let big = cube.dilate(lambda)?;
    if !w.samples.contains_cube(&big) {
        return Err(Error::InvalidParams("dilated cube leaves the box".into()));
    }
    let inner = w.samples.cells_in(cube);
    let outer = w.samples.cells_in(&big);
    if inner.is_empty() {
        return Err(Error::InvalidParams("cube contains no grid cells".into()));
    }
    let ln = lambda.powi(w.dim() as i32);
    let ratio = weighted_measure(w, &outer) / (ln * weighted_measure(w, &inner));
    let count_factor = from_usize::<T>(outer.len()) / (ln * from_usize::<T>(inner.len()));
    let local = local_a_1(w.samples.values(), &outer) * count_factor.max(T::one());
    let bound = a_1.max(local);
    Ok(DoublingReport {
        ratio,
        bound,
        pass: ratio <= bound * (T::one() + T::lit(1e-6)),
    })
}

/// `(w(E)/w(Q)) / (|E|/|Q|)` against `1/A_1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport<T> {
    pub ratio: T,
    pub lower_bound: T,
    pub pass: bool,
}

/// Measure comparison for a set `E` of cells inside `Q`. The lower bound is
/// `1/max(A_1, A_1(Q))`.
pub fn check_measure_comparison<T: Real>(
    w: &Weight<T>,
    subset: &[usize],
    cube: &Cube<T>,
    a_1: T,
) -> Result<ComparisonReport<T>> {
    let cells = w.samples.cells_in(cube);
    if cells.is_empty() || subset.is_empty() {
        return Err(Error::InvalidParams("cube and subset must contain grid cells".into()));
    }
    let mask = w.samples.mask_of(cube);
    if let Some(&bad) = subset.iter().find(|&&i| i >= mask.len() || !mask[i]) {
        return Err(Error::InvalidParams(format!("cell {bad} of E lies outside Q")));
    }
    let ratio = (weighted_measure(w, subset) / weighted_measure(w, &cells))
        / (from_usize::<T>(subset.len()) / from_usize::<T>(cells.len()));
    let local = local_a_1(w.samples.values(), &cells);
    let lower_bound = T::one() / a_1.max(local);
    Ok(ComparisonReport {
        ratio,
        lower_bound,
        pass: ratio >= lower_bound - T::lit(1e-6),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> GridBox<f64> {
        GridBox::new(1, 4.0).unwrap()
    }

    #[test]
    fn family_sizes_and_membership() {
        let fam = CubeFamily::new(line(), 64).unwrap();
        // sides 8, 4, 2, 1, 0.5 with 2^k + 2^k - 1 cubes each
        assert_eq!(fam.len(), 1 + 3 + 7 + 15 + 31);
        let probe = GridFunction::<f64>::zeros(line(), 64).unwrap();
        assert!(fam.cubes().iter().all(|c| probe.cells_in(c).len() >= 4));
        let plane = CubeFamily::new(GridBox::new(2, 1.0).unwrap(), 16).unwrap();
        assert_eq!(plane.len(), 1 + (4 + 2 + 2 + 1) + (16 + 12 + 12 + 9));
    }

    #[test]
    fn constant_weight_constants_are_one() {
        let w = Weight::constant(line(), 64, 3.0).unwrap();
        let fam = CubeFamily::for_weight(&w).unwrap();
        assert_eq!(a_1_constant(&w, &fam).unwrap().value, 1.0);
        assert_eq!(a_q_constant(&w, 2.0, &fam).unwrap().value, 1.0);
        assert!(a_q_constant(&w, 1.0, &fam).is_err());
    }

    #[test]
    fn power_weight_validation() {
        assert!(Weight::power(line(), 8, -1.0).is_err());
        assert!(Weight::power(GridBox::new(2, 1.0).unwrap(), 8, -1.5).is_ok());
        let w = Weight::power(line(), 8, 0.5).unwrap();
        assert_eq!(w.closed_form_critical_index(), Some(1.5));
    }

    #[test]
    fn tabulated_coarsening_averages() {
        let w = Weight::power(line(), 16, 1.0).unwrap();
        let t = Weight::tabulated(w.samples().clone()).unwrap();
        let c = t.resampled(8).unwrap();
        assert_eq!(c.samples().points_per_axis(), 8);
        assert!((c.samples().values()[0] - 3.5).abs() < 1e-12);
        assert!(t.resampled(4).is_err());
    }

    #[test]
    fn saturation_is_flagged() {
        let w = Weight::power(line(), 64, 0.5).unwrap();
        let fam = CubeFamily::for_weight(&w).unwrap();
        let r = a_q_constant(&w, 1.001, &fam).unwrap();
        assert!(r.saturated);
        assert!(r.value.is_infinite());
    }
}

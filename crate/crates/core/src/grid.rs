//! Uniform cell-centred grids on boxes `[-L, L]^n`, axis-parallel cubes, midpoint
//! quadrature and polynomial moments.
//!
//! Samples live at cell centres `x_i = -L + (i + 1/2) h` with `h = 2L / M`, so no
//! sample ever sits on the box boundary or at the origin. Flattened storage is
//! row-major with axis 0 varying slowest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Real};

/// Smallest accepted number of cells per axis.
pub const MIN_POINTS: usize = 4;

/// Largest total moment order accepted by [`GridFunction::moment`].
pub const MAX_MOMENT_ORDER: usize = 8;

/// The truncated domain `[-L, L]^n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBox<T> {
    dim: usize,
    half_width: T,
}

impl<T: Real> GridBox<T> {
    pub fn new(dim: usize, half_width: T) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        Ok(Self { dim, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn volume(&self) -> T {
        (self.half_width + self.half_width).powi(self.dim as i32)
    }
}

/// Axis-parallel cube `Q(x0, r)`: centre `x0`, side length `r`.
///
/// Membership is half-open per axis, `[x0 - r/2, x0 + r/2)`, so dyadic partitions
/// assign every cell to exactly one cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube<T> {
    center: Vec<T>,
    side: T,
}

impl<T: Real> Cube<T> {
    pub fn new(center: Vec<T>, side: T) -> Result<Self> {
        if center.is_empty() || center.len() > 2 {
            return Err(Error::InvalidParams(format!(
                "cube centre must have 1 or 2 coordinates, got {}",
                center.len()
            )));
        }
        if !(side > T::zero()) || !side.is_finite() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams(format!("degenerate cube side {side}")));
        }
        Ok(Self { center, side })
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn side(&self) -> T {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Lebesgue measure `r^n`.
    pub fn measure(&self) -> T {
        self.side.powi(self.dim() as i32)
    }

    /// `λQ`: same centre, side `λ r`. With `λ = 4√n` this is the enlarged cube `Q*`.
    pub fn dilate(&self, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(Error::InvalidParams(format!("dilation factor {lambda} must be positive")));
        }
        Ok(Self {
            center: self.center.clone(),
            side: self.side * lambda,
        })
    }

    /// The enlargement `(4√n) Q` used to split near and far field.
    pub fn enlarged(&self) -> Self {
        let n = from_usize::<T>(self.dim());
        Self {
            center: self.center.clone(),
            side: self.side * T::lit(4.0) * n.sqrt(),
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        let half = self.side / T::lit(2.0);
        self.center
            .iter()
            .zip(x)
            .all(|(&c, &xi)| xi >= c - half && xi < c + half)
    }

    /// Lower and upper corners of the closed hull.
    pub fn corners(&self) -> (Vec<T>, Vec<T>) {
        let half = self.side / T::lit(2.0);
        (
            self.center.iter().map(|&c| c - half).collect(),
            self.center.iter().map(|&c| c + half).collect(),
        )
    }
}

/// Samples of a real function at the cell centres of a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    domain: GridBox<T>,
    points: usize,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    /// Zero-initialised grid with `points` cells per axis.
    pub fn zeros(domain: GridBox<T>, points: usize) -> Result<Self> {
        if points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points per axis, got {points}"
            )));
        }
        let len = points
            .checked_pow(domain.dim as u32)
            .ok_or_else(|| Error::InvalidGrid("grid size overflows".into()))?;
        Ok(Self {
            domain,
            points,
            values: vec![T::zero(); len],
        })
    }

    /// Samples `f` at every cell centre. `f` receives a slice of length `n`.
    pub fn from_fn(domain: GridBox<T>, points: usize, f: impl Fn(&[T]) -> T) -> Result<Self> {
        let mut grid = Self::zeros(domain, points)?;
        let n = domain.dim;
        for idx in 0..grid.values.len() {
            let x = grid.point(idx);
            grid.values[idx] = f(&x[..n]);
        }
        grid.check_finite()?;
        Ok(grid)
    }

    pub fn from_values(domain: GridBox<T>, points: usize, values: Vec<T>) -> Result<Self> {
        let mut grid = Self::zeros(domain, points)?;
        if values.len() != grid.values.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.values.len(),
                values.len()
            )));
        }
        grid.values = values;
        grid.check_finite()?;
        Ok(grid)
    }

    fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::InvalidGrid(format!("non-finite sample at index {i}"))),
            None => Ok(()),
        }
    }

    /// A grid function on the same grid with the given samples.
    ///
    /// # Panics
    /// If `values` has the wrong length.
    pub fn with_values(&self, values: Vec<T>) -> Self {
        assert_eq!(values.len(), self.values.len(), "sample count mismatch");
        Self {
            domain: self.domain,
            points: self.points,
            values,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two functions on the same grid.
    ///
    /// # Panics
    /// If the grids differ.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert!(self.same_grid(other), "grid mismatch");
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.domain == other.domain && self.points == other.points
    }

    pub fn domain(&self) -> GridBox<T> {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn half_width(&self) -> T {
        self.domain.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn spacing(&self) -> T {
        (self.domain.half_width + self.domain.half_width) / from_usize(self.points)
    }

    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.dim() as i32)
    }

    /// Cell-centre coordinate of index `i` along any axis.
    #[inline]
    pub fn axis_coord(&self, i: usize) -> T {
        -self.domain.half_width + (from_usize::<T>(i) + T::lit(0.5)) * self.spacing()
    }

    /// Per-axis indices of a flat index (second entry is 0 when `n = 1`).
    #[inline]
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [idx, 0]
        } else {
            [idx / self.points, idx % self.points]
        }
    }

    #[inline]
    pub fn flatten(&self, ij: [usize; 2]) -> usize {
        if self.dim() == 1 {
            ij[0]
        } else {
            ij[0] * self.points + ij[1]
        }
    }

    /// Coordinates of sample `idx`; only the first `n` entries are meaningful.
    #[inline]
    pub fn point(&self, idx: usize) -> [T; 2] {
        let ij = self.unflatten(idx);
        let y = if self.dim() == 1 { T::zero() } else { self.axis_coord(ij[1]) };
        [self.axis_coord(ij[0]), y]
    }

    /// Euclidean distance from sample `idx` to `center`.
    pub fn distance(&self, idx: usize, center: &[T]) -> T {
        let x = self.point(idx);
        center
            .iter()
            .zip(x)
            .map(|(&c, xi)| (xi - c) * (xi - c))
            .sum::<T>()
            .sqrt()
    }

    /// Midpoint rule: `h^n Σ f(x_i)`.
    pub fn integrate(&self) -> T {
        self.cell_volume() * self.values.iter().copied().sum::<T>()
    }

    /// `∫ f(x) (x - center)^γ dx` by the midpoint rule.
    ///
    /// # Panics
    /// If `γ` has the wrong length or `|γ|` exceeds [`MAX_MOMENT_ORDER`].
    pub fn moment(&self, gamma: &[usize], center: &[T]) -> T {
        let n = self.dim();
        assert_eq!(gamma.len(), n, "multi-index length must equal the dimension");
        assert_eq!(center.len(), n, "centre length must equal the dimension");
        assert!(
            gamma.iter().sum::<usize>() <= MAX_MOMENT_ORDER,
            "moment order exceeds {MAX_MOMENT_ORDER}"
        );
        let sum: T = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let x = self.point(idx);
                (0..n).fold(v, |acc, k| acc * (x[k] - center[k]).powi(gamma[k] as i32))
            })
            .sum();
        sum * self.cell_volume()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn l1_norm(&self) -> T {
        self.cell_volume() * self.values.iter().map(|v| v.abs()).sum::<T>()
    }

    pub fn l2_norm(&self) -> T {
        (self.cell_volume() * self.values.iter().map(|&v| v * v).sum::<T>()).sqrt()
    }

    /// Index range `[lo, hi)` along one axis of cells whose centres lie in
    /// `[a, b)`.
    pub fn axis_range(&self, a: T, b: T) -> (usize, usize) {
        let h = self.spacing();
        let l = self.domain.half_width;
        let m = from_usize::<T>(self.points);
        let to_index = |x: T| -> usize {
            let k = ((x + l) / h - T::lit(0.5)).ceil();
            k.max(T::zero()).min(m).to_usize().unwrap_or(0)
        };
        (to_index(a), to_index(b))
    }

    /// Flat indices of all cells whose centres lie in `cube` (half-open).
    pub fn cells_in(&self, cube: &Cube<T>) -> Vec<usize> {
        assert_eq!(cube.dim(), self.dim(), "cube dimension mismatch");
        let (lo, hi) = cube.corners();
        let r0 = self.axis_range(lo[0], hi[0]);
        if self.dim() == 1 {
            return (r0.0..r0.1).collect();
        }
        let r1 = self.axis_range(lo[1], hi[1]);
        let mut out = Vec::with_capacity((r0.1 - r0.0) * (r1.1 - r1.0));
        for i in r0.0..r0.1 {
            for j in r1.0..r1.1 {
                out.push(self.flatten([i, j]));
            }
        }
        out
    }

    /// Boolean mask of [`cells_in`](Self::cells_in).
    pub fn mask_of(&self, cube: &Cube<T>) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for idx in self.cells_in(cube) {
            mask[idx] = true;
        }
        mask
    }

    /// Whether the closed hull of `cube` fits inside the box.
    pub fn contains_cube(&self, cube: &Cube<T>) -> bool {
        let (lo, hi) = cube.corners();
        let l = self.domain.half_width;
        lo.iter().all(|&a| a >= -l) && hi.iter().all(|&b| b <= l)
    }

    /// Largest sup-norm distance from the origin of a sample with `|f| > threshold`,
    /// or `None` when no sample exceeds it.
    pub fn support_radius(&self, threshold: T) -> Option<T> {
        let n = self.dim();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > threshold)
            .map(|(idx, _)| {
                let x = self.point(idx);
                x[..n].iter().fold(T::zero(), |m, c| m.max(c.abs()))
            })
            .fold(None, |acc: Option<T>, r| Some(acc.map_or(r, |a| a.max(r))))
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            n: self.dim(),
            half_width: self.half_width().to_f64_lossy(),
            points: self.points,
        }
    }
}

/// All multi-indices `α ∈ ℕ^n` with `|α| ≤ max_order`, ordered by total degree.
pub fn multi_indices(dim: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for order in 0..=max_order {
        match dim {
            1 => out.push(vec![order]),
            2 => {
                for a in (0..=order).rev() {
                    out.push(vec![a, order - a]);
                }
            }
            _ => panic!("dimension {dim} not supported"),
        }
    }
    out
}

/// JSON header accompanying a CSV snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "M")]
    pub points: usize,
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

impl GridFunction<f64> {
    /// Writes one row per sample (coordinates, then value) plus a `.json`
    /// header next to it.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut wtr = csv::Writer::from_path(path)?;
        let n = self.dim();
        let mut head: Vec<String> = (0..n).map(|k| if n == 1 { "x".into() } else { format!("x{k}") }).collect();
        head.push("value".into());
        wtr.write_record(&head)?;
        for (idx, v) in self.values.iter().enumerate() {
            let x = self.point(idx);
            let mut row: Vec<String> = x[..n].iter().map(|c| format!("{c:.17e}")).collect();
            row.push(format!("{v:.17e}"));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        let header = serde_json::to_string_pretty(&self.header())?;
        fs::write(sidecar_path(path), header).map_err(|e| Error::io(sidecar_path(path), e))?;
        Ok(())
    }

    /// Reads a snapshot written by [`write_csv`](Self::write_csv). When the JSON
    /// header is missing, `n` comes from the column count, `M` from the row count
    /// and `L` from the first cell centre.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let ncols = rdr.headers()?.len();
        if !(2..=3).contains(&ncols) {
            return Err(Error::InvalidGrid(format!("expected 2 or 3 columns, found {ncols}")));
        }
        let n = ncols - 1;
        let mut first = None;
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec[k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidGrid(format!("bad number '{}': {e}", &rec[k])))
            };
            if first.is_none() {
                first = Some(parse(0)?);
            }
            values.push(parse(n)?);
        }
        let header = match fs::read_to_string(sidecar_path(path)) {
            Ok(text) => serde_json::from_str::<GridHeader>(&text)?,
            Err(_) => {
                let points = match n {
                    1 => values.len(),
                    _ => (values.len() as f64).sqrt().round() as usize,
                };
                let x0 = first.ok_or_else(|| Error::InvalidGrid("empty csv".into()))?;
                let half_width = -x0 / (1.0 - 1.0 / points as f64);
                GridHeader { n, half_width, points }
            }
        };
        if header.n != n {
            return Err(Error::InvalidGrid(format!(
                "header dimension {} disagrees with {} coordinate columns",
                header.n, n
            )));
        }
        GridFunction::from_values(GridBox::new(n, header.half_width)?, header.points, values)
    }
}

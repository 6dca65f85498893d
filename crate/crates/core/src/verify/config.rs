//! Experiment configuration: a single JSON document with every default embedded.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atoms::critical_delta;
use crate::error::{Error, Result};
use crate::grid::{Cube, GridBox};
use crate::kernel::BRParams;
use crate::weights::{Weight, WeightSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "M")]
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 32.0,
            points: 8192,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSpec {
    pub count: usize,
    /// Atom `j` uses seed `seed + j`.
    pub seed: u64,
    /// Moment order; the moment index `N` when absent.
    pub s: Option<usize>,
}

impl Default for AtomSpec {
    fn default() -> Self {
        Self {
            count: 20,
            seed: 1,
            s: None,
        }
    }
}

/// Radii `R_k = base/r · 2^{k/2}` for `k < count`, per atom side `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiusGridSpec {
    pub count: usize,
    pub base: f64,
}

impl Default for RadiusGridSpec {
    fn default() -> Self {
        Self { count: 16, base: 0.25 }
    }
}

impl RadiusGridSpec {
    /// Dyadic-half grid for a cube of side `r`.
    pub fn radii(&self, r: f64) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.base / r * 2f64.powf(k as f64 / 2.0))
            .collect()
    }

    /// The same span with twice the density, `2^{k/4}`.
    pub fn refined(&self, r: f64) -> Vec<f64> {
        (0..2 * self.count.max(1) - 1)
            .map(|k| self.base / r * 2f64.powf(k as f64 / 4.0))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    pub size: usize,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            size: crate::spaces::DEFAULT_FAMILY_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaSpec {
    pub max_breakpoints: usize,
}

impl Default for LambdaSpec {
    fn default() -> Self {
        Self {
            max_breakpoints: crate::spaces::MAX_REPORTED_BREAKPOINTS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuperpositionSpec {
    pub p_list: Vec<f64>,
    pub members: usize,
    pub seed: u64,
    /// Target `Σ|λ_j|^p`; above 1 the hypothesis is violated on purpose.
    pub normalization: f64,
}

impl Default for SuperpositionSpec {
    fn default() -> Self {
        Self {
            p_list: vec![0.3, 0.5, 0.6, 2.0 / 3.0],
            members: 8,
            seed: 7,
            normalization: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub radius: f64,
    pub alpha_max: usize,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            radius: 100.0,
            alpha_max: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted ensemble max/median.
    pub max_median: f64,
    /// Largest accepted refinement-sensitivity ratio.
    pub refinement: f64,
    /// Tail bounds above this fraction of `S` make a result inconclusive.
    pub tail_fraction: f64,
    /// Relative change of the kernel envelope when the scan radius doubles.
    pub envelope_saturation: f64,
    /// Accepted factor between the measured and expected envelope drop.
    pub slope_factor: f64,
    /// Relative slack in the superposition bound.
    pub superposition: f64,
    /// Relative error accepted for `S(c a) = c^p S(a)`.
    pub homogeneity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            max_median: 10.0,
            refinement: 2.0,
            tail_fraction: 0.1,
            envelope_saturation: 0.05,
            slope_factor: 2.0,
            superposition: 1e-9,
            homogeneity: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub plots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("riesz-lab-out"),
            plots: true,
        }
    }
}

/// Everything an experiment needs; unset fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub weight: WeightSpec,
    pub grid: GridSpec,
    pub atoms: AtomSpec,
    pub r_list: Vec<f64>,
    pub r_grid: RadiusGridSpec,
    pub probes: ProbeSpec,
    pub lambda: LambdaSpec,
    pub superposition: SuperpositionSpec,
    pub kernel: KernelSpec,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1,
            p: 2.0 / 3.0,
            q: 2.0,
            weight: WeightSpec::default(),
            grid: GridSpec::default(),
            atoms: AtomSpec::default(),
            r_list: vec![1.0, 0.5, 0.25],
            r_grid: RadiusGridSpec::default(),
            probes: ProbeSpec::default(),
            lambda: LambdaSpec::default(),
            superposition: SuperpositionSpec::default(),
            kernel: KernelSpec::default(),
            tolerances: Tolerances::default(),
            output: OutputSpec::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

impl ExperimentConfig {
    /// Reads and validates a JSON config.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 1 && self.n != 2 {
            return Err(invalid(format!("dimension must be 1 or 2, got {}", self.n)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if BRParams::<f64>::is_integer_case(self.n, self.p) {
            return Err(invalid(format!(
                "n(1/p - 1) = {} is a positive integer; the boundedness result excludes this case",
                self.n as f64 * (1.0 / self.p - 1.0)
            )));
        }
        if !(self.q > 1.0) || !self.q.is_finite() {
            return Err(invalid(format!("q must exceed 1, got {}", self.q)));
        }
        if !(self.grid.half_width > 0.0) || !self.grid.half_width.is_finite() {
            return Err(invalid("grid half-width must be positive"));
        }
        if self.grid.points < 64 || !self.grid.points.is_power_of_two() {
            return Err(invalid(format!(
                "grid points must be a power of two of at least 64, got {}",
                self.grid.points
            )));
        }
        if self.atoms.count == 0 {
            return Err(invalid("atom count must be positive"));
        }
        if self.r_list.is_empty() {
            return Err(invalid("r list must not be empty"));
        }
        let h = 2.0 * self.grid.half_width / self.grid.points as f64;
        for &r in &self.r_list {
            if !(r > 0.0) || !r.is_finite() {
                return Err(invalid(format!("cube side {r} must be positive")));
            }
            let enlarged = r * 4.0 * (self.n as f64).sqrt();
            if enlarged / 2.0 >= self.grid.half_width / 4.0 {
                return Err(invalid(format!("enlarged cube of side {r} leaves the central quarter of the box")));
            }
            if r < 8.0 * h {
                return Err(invalid(format!("cube side {r} spans fewer than 8 grid cells")));
            }
        }
        if self.r_grid.count == 0 || !(self.r_grid.base > 0.0) {
            return Err(invalid("radius grid needs a positive count and base"));
        }
        if self.probes.size == 0 {
            return Err(invalid("probe family must not be empty"));
        }
        if self.lambda.max_breakpoints < 2 {
            return Err(invalid("at least two λ breakpoints are required"));
        }
        if self.superposition.members == 0 || !(self.superposition.normalization > 0.0) {
            return Err(invalid("superposition family needs members and a positive normalization"));
        }
        if self.superposition.p_list.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(invalid("superposition exponents must lie in (0, 1)"));
        }
        if !(self.kernel.radius > 1.0) {
            return Err(invalid("kernel scan radius must exceed 1"));
        }
        let t = &self.tolerances;
        if [t.max_median, t.refinement, t.slope_factor].iter().any(|&v| !(v > 1.0)) {
            return Err(invalid("ratio tolerances must exceed 1"));
        }
        if let Some(s) = self.atoms.s {
            if s > crate::grid::MAX_MOMENT_ORDER {
                return Err(invalid(format!("moment order {s} is too large")));
            }
        }
        Ok(())
    }

    /// `δ = n/p - (n+1)/2`.
    pub fn delta(&self) -> f64 {
        critical_delta(self.n, self.p)
    }

    pub fn params(&self, radius: f64) -> Result<BRParams<f64>> {
        BRParams::critical(self.n, self.p, radius)
    }

    pub fn domain(&self) -> Result<GridBox<f64>> {
        GridBox::new(self.n, self.grid.half_width)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.grid.half_width / self.grid.points as f64
    }

    pub fn build_weight(&self) -> Result<Weight<f64>> {
        self.weight.build(self.domain()?, self.grid.points)
    }

    /// The cube `Q(0, r)`.
    pub fn cube(&self, r: f64) -> Result<Cube<f64>> {
        Cube::new(vec![0.0; self.n], r)
    }

    /// Copy with the grid resolution doubled.
    pub fn refined(&self) -> Self {
        let mut out = self.clone();
        out.grid.points *= 2;
        out
    }
}

//! Config-driven checks and report assembly.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::atoms::{br_moment_check, decay_ratio_of, make_atom, Atom, DecayWindow, BR_MOMENT_TOLERANCE};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::kernel::{decay_envelope_estimate, phi_radial, BRParams};
use crate::operator::{br_apply_spectral, br_maximal, hardy_littlewood};
use crate::spaces::{dyadic_t_grid, level_profile, moment_index, ConvolutionBank, ProbeFamily};
use crate::verify::atom_checks::{
    domination_ratio, grand_decay_of, hardy_littlewood_sides, weak_bound_sample, GrandDecayReport,
};
use crate::verify::config::ExperimentConfig;
use crate::verify::report::{CheckReport, MeasuredConstant, Plot, PlotKind, Status, TailBound, VerificationReport};
use crate::verify::superposition::{check_superposition, SuperpositionFamily};
use crate::weights::{critical_index_estimate, Weight};

/// Negative-control moments must exceed the quadrature tolerance by this factor.
pub const NEGATIVE_CONTROL_FACTOR: f64 = 1e3;

/// The checks a run can select.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Saturation of the kernel decay envelope.
    KernelDecay,
    /// Weak-type superposition of calibrated families.
    Superposition,
    /// Decay of `T^δ_* a` off the atom and its domination by `M a`.
    AtomDecay,
    /// Vanishing moments of `T^δ_R a`.
    MomentCancellation,
    /// Decay envelope of `G^+(T^δ_R a)` off `Q*`.
    GrandDecay,
    /// Per-atom weak-type bound for `G^+(T^δ_R a)`.
    WeakBound,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::KernelDecay,
        Check::Superposition,
        Check::AtomDecay,
        Check::MomentCancellation,
        Check::GrandDecay,
        Check::WeakBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::KernelDecay => "kernel_decay",
            Check::Superposition => "superposition",
            Check::AtomDecay => "atom_decay",
            Check::MomentCancellation => "moment_cancellation",
            Check::GrandDecay => "grand_decay",
            Check::WeakBound => "weak_bound",
        }
    }

    pub fn from_name(name: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == name)
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    match v.len() {
        0 => f64::NAN,
        k if k % 2 == 1 => v[k / 2],
        k => 0.5 * (v[k / 2 - 1] + v[k / 2]),
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn ratio(fine: f64, coarse: f64) -> f64 {
    if coarse > 0.0 {
        fine / coarse
    } else if fine > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// One atom of the ensemble.
pub struct AtomCase {
    pub seed: u64,
    pub r: f64,
    pub atom: Atom<f64>,
}

/// Everything that depends on the grid resolution but not on the check.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub weight: Weight<f64>,
    pub critical_index: f64,
    pub moment_index: usize,
    pub atoms: Vec<AtomCase>,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let weight = cfg.build_weight()?;
        let critical_index = match weight.closed_form_critical_index() {
            Some(q) => q,
            None => critical_index_estimate(&weight)?.value,
        };
        if !critical_index.is_finite() {
            return Err(Error::InvalidParams("weight has no finite critical index on this grid".into()));
        }
        let index = moment_index(cfg.n, cfg.p, critical_index)?;
        let s = cfg.atoms.s.unwrap_or(index);
        if s < index {
            return Err(Error::InvalidParams(format!(
                "moment order {s} is below the required index {index}"
            )));
        }
        let specs: Vec<(u64, f64)> = cfg
            .r_list
            .iter()
            .flat_map(|&r| (0..cfg.atoms.count as u64).map(move |j| (cfg.atoms.seed + j, r)))
            .collect();
        let atoms = specs
            .par_iter()
            .map(|&(seed, r)| {
                let atom = make_atom(&cfg.cube(r)?, &weight, cfg.p, cfg.q, s, seed)?;
                Ok(AtomCase { seed, r, atom })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            weight,
            critical_index,
            moment_index: index,
            atoms,
        })
    }

    fn t_grid(&self) -> Vec<f64> {
        dyadic_t_grid(self.cfg.spacing(), self.cfg.grid.half_width)
    }

    fn family(&self, size: usize) -> Result<ProbeFamily> {
        ProbeFamily::standard(self.cfg.n, self.moment_index, size, self.t_grid())
    }

    fn params(&self, radius: f64) -> Result<BRParams<f64>> {
        self.cfg.params(radius)
    }
}

/// Per-atom results of the `(atom × R)` sweep of `G^+(T^δ_R a)`.
#[derive(Clone, Debug, Serialize)]
pub struct CaseSweep {
    pub seed: u64,
    pub r: f64,
    pub s_base: f64,
    pub s_refined: f64,
    pub s_doubled: f64,
    pub i1: f64,
    pub i2: f64,
    pub i1_doubled: f64,
    pub i2_doubled: f64,
    pub c7_base: f64,
    pub c7_refined: f64,
    pub c7_doubled: f64,
    pub worst_radius: f64,
    pub tail_relative: f64,
    pub i2_empty_above_envelope: bool,
    #[serde(skip)]
    pub decay: GrandDecayReport,
}

/// The whole sweep plus the homogeneity probe.
pub struct Sweep {
    pub cases: Vec<CaseSweep>,
    pub homogeneity_error: f64,
    pub level_curve: Vec<(f64, f64)>,
}

fn sweep_case(ctx: &Context, case: &AtomCase, small: &ConvolutionBank<f64>, large: &ConvolutionBank<f64>) -> Result<CaseSweep> {
    let radii = ctx.cfg.r_grid.refined(case.r);
    let a = &case.atom;
    let mut gsup: Option<GridFunction<f64>> = None;
    let mut out = CaseSweep {
        seed: case.seed,
        r: case.r,
        s_base: 0.0,
        s_refined: 0.0,
        s_doubled: 0.0,
        i1: 0.0,
        i2: 0.0,
        i1_doubled: 0.0,
        i2_doubled: 0.0,
        c7_base: 0.0,
        c7_refined: 0.0,
        c7_doubled: 0.0,
        worst_radius: radii[0],
        tail_relative: 0.0,
        i2_empty_above_envelope: true,
        decay: grand_decay_of(a.samples(), a),
    };
    for (k, &radius) in radii.iter().enumerate() {
        let base = k % 2 == 0;
        let t = br_apply_spectral(a.samples(), &ctx.params(radius)?)?.output;
        let g = small.apply(&t)?;
        let sample = weak_bound_sample(&g, a, &ctx.weight)?;
        let c7 = grand_decay_of(&g, a).c7;
        out.s_refined = out.s_refined.max(sample.s);
        out.c7_refined = out.c7_refined.max(c7);
        if sample.s > 0.0 {
            out.tail_relative = out.tail_relative.max(sample.tail / sample.s);
        }
        out.i2_empty_above_envelope &= sample.i2_empty_above_envelope;
        if !base {
            continue;
        }
        if sample.s > out.s_base {
            out.s_base = sample.s;
            out.worst_radius = radius;
        }
        out.i1 = out.i1.max(sample.i1);
        out.i2 = out.i2.max(sample.i2);
        out.c7_base = out.c7_base.max(c7);
        let g2 = large.apply(&t)?;
        let doubled = weak_bound_sample(&g2, a, &ctx.weight)?;
        out.s_doubled = out.s_doubled.max(doubled.s);
        out.i1_doubled = out.i1_doubled.max(doubled.i1);
        out.i2_doubled = out.i2_doubled.max(doubled.i2);
        out.c7_doubled = out.c7_doubled.max(grand_decay_of(&g2, a).c7);
        gsup = Some(match gsup {
            None => g,
            Some(prev) => prev.zip_map(&g, f64::max),
        });
    }
    if let Some(g) = gsup {
        out.decay = grand_decay_of(&g, a);
    }
    Ok(out)
}

/// Levels thinned to at most `max` log-spaced values, as `(λ, λ^p W)`.
fn level_curve(profile: &[(f64, f64)], p: f64, max: usize) -> Vec<(f64, f64)> {
    if profile.is_empty() {
        return Vec::new();
    }
    let step = ((profile[0].0 / profile[profile.len() - 1].0).ln() / max.saturating_sub(1).max(1) as f64).max(0.0);
    let mut out = Vec::new();
    let mut last = f64::INFINITY;
    for &(v, m) in profile {
        let lv = v.ln();
        if out.is_empty() || last - lv >= step {
            out.push((v, v.powf(p) * m));
            last = lv;
        }
        if out.len() == max {
            break;
        }
    }
    out
}

impl Sweep {
    pub fn run(ctx: &Context) -> Result<Self> {
        let grid = ctx.weight.samples();
        let t_grid = ctx.t_grid();
        let small = ConvolutionBank::new(grid, ctx.family(ctx.cfg.probes.size)?.members(), &t_grid, false)?;
        let large = ConvolutionBank::new(grid, ctx.family(2 * ctx.cfg.probes.size)?.members(), &t_grid, false)?;
        let cases = ctx
            .atoms
            .par_iter()
            .map(|c| sweep_case(ctx, c, &small, &large))
            .collect::<Result<Vec<_>>>()?;

        let first = &ctx.atoms[0];
        let radius = ctx.cfg.r_grid.radii(first.r)[0];
        let params = ctx.params(radius)?;
        let g = small.apply(&br_apply_spectral(first.atom.samples(), &params)?.output)?;
        let s = weak_bound_sample(&g, &first.atom, &ctx.weight)?.s;
        let mut homogeneity_error: f64 = 0.0;
        for c in [0.5, 2.0] {
            let scaled = first.atom.samples().map(|v| c * v);
            let gc = small.apply(&br_apply_spectral(&scaled, &params)?.output)?;
            let sc = weak_bound_sample(&gc, &first.atom, &ctx.weight)?.s;
            let expected = c.powf(ctx.cfg.p) * s;
            homogeneity_error = homogeneity_error.max((sc - expected).abs() / expected);
        }

        let (worst, case) = cases
            .iter()
            .enumerate()
            .fold((0, &cases[0]), |acc, (i, c)| if c.s_base > acc.1.s_base { (i, c) } else { acc });
        let atom = &ctx.atoms[worst].atom;
        let g = small.apply(&br_apply_spectral(atom.samples(), &ctx.params(case.worst_radius)?)?.output)?;
        let profile = level_profile(&g, &ctx.weight, None)?;
        let level_curve = level_curve(&profile, ctx.cfg.p, ctx.cfg.lambda.max_breakpoints);
        Ok(Self {
            cases,
            homogeneity_error,
            level_curve,
        })
    }
}

/// Runs selected checks with one escalation of the grid per check.
pub struct Runner {
    cfg: ExperimentConfig,
    contexts: BTreeMap<usize, Context>,
    sweeps: BTreeMap<usize, Sweep>,
}

impl Runner {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            contexts: BTreeMap::new(),
            sweeps: BTreeMap::new(),
        })
    }

    fn context(&mut self, cfg: &ExperimentConfig) -> Result<&Context> {
        let m = cfg.grid.points;
        if !self.contexts.contains_key(&m) {
            self.contexts.insert(m, Context::new(cfg)?);
        }
        Ok(&self.contexts[&m])
    }

    fn sweep(&mut self, cfg: &ExperimentConfig) -> Result<(&Context, &Sweep)> {
        let m = cfg.grid.points;
        self.context(cfg)?;
        if !self.sweeps.contains_key(&m) {
            let sweep = Sweep::run(&self.contexts[&m])?;
            self.sweeps.insert(m, sweep);
        }
        Ok((&self.contexts[&m], &self.sweeps[&m]))
    }

    fn run_at(&mut self, check: Check, cfg: &ExperimentConfig) -> Result<CheckReport> {
        match check {
            Check::KernelDecay => kernel_decay(cfg),
            Check::Superposition => {
                let w = self.context(cfg)?.weight.clone();
                superposition(cfg, &w)
            }
            Check::AtomDecay => atom_decay(self.context(cfg)?),
            Check::MomentCancellation => moment_cancellation(self.context(cfg)?),
            Check::GrandDecay => {
                let (ctx, sweep) = self.sweep(cfg)?;
                Ok(grand_decay(ctx, sweep))
            }
            Check::WeakBound => {
                let (ctx, sweep) = self.sweep(cfg)?;
                Ok(weak_bound(ctx, sweep))
            }
        }
    }

    /// Runs one check; a refinement ratio at or above the tolerance triggers a
    /// rerun at twice the grid resolution, and a second excess makes the
    /// result inconclusive.
    pub fn run(&mut self, check: Check) -> Result<CheckReport> {
        let limit = self.cfg.tolerances.refinement;
        let unstable = |r: &CheckReport| r.constants.iter().any(|c| c.worst_sensitivity() >= limit);
        let cfg = self.cfg.clone();
        let report = self.run_at(check, &cfg)?;
        if !unstable(&report) || check == Check::KernelDecay {
            return Ok(report);
        }
        let refined = cfg.refined();
        let mut second = self.run_at(check, &refined)?;
        if let serde_json::Value::Object(map) = &mut second.details {
            map.insert("escalated_points".into(), json!(refined.grid.points));
        }
        if unstable(&second) {
            second.status = second.status.combine(Status::Inconclusive);
            second.message = format!("{}; refinement sensitivity persists after escalation", second.message);
        }
        Ok(second)
    }
}

/// Runs `checks` in the given order and assembles a report.
pub fn run_checks(cfg: &ExperimentConfig, checks: &[Check]) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut runner = Runner::new(cfg)?;
    let mut report = VerificationReport::new(Some(cfg.clone()));
    for &check in checks {
        report.push(runner.run(check)?);
    }
    report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

/// The per-atom weak-type experiment alone.
pub fn weak_bound_experiment(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    run_checks(cfg, &[Check::WeakBound])
}

fn finish(mut report: CheckReport, failures: Vec<String>, inconclusive: Vec<String>, limit: f64) -> CheckReport {
    for c in &report.constants {
        if c.worst_sensitivity() >= limit {
            report.status = report.status.combine(Status::Inconclusive);
            report.message.push_str(&format!("{} is refinement sensitive; ", c.name));
        }
    }
    if !inconclusive.is_empty() {
        report.status = report.status.combine(Status::Inconclusive);
        report.message.push_str(&inconclusive.join("; "));
    }
    if !failures.is_empty() {
        report.status = report.status.combine(Status::Fail);
        if !report.message.is_empty() && !report.message.ends_with("; ") {
            report.message.push_str("; ");
        }
        report.message.push_str(&failures.join("; "));
    }
    if report.message.is_empty() {
        report.message = "all measured quantities within tolerance".into();
    }
    report.message = report.message.trim_end_matches("; ").to_string();
    report
}

fn kernel_decay(cfg: &ExperimentConfig) -> Result<CheckReport> {
    let params = cfg.params(1.0)?;
    let radius = cfg.kernel.radius;
    let base = decay_envelope_estimate(&params, cfg.kernel.alpha_max, radius)?;
    let doubled = decay_envelope_estimate(&params, cfg.kernel.alpha_max, 2.0 * radius)?;
    let mut report = CheckReport::new(Check::KernelDecay.name());
    let mut failures = Vec::new();
    let tol = cfg.tolerances.envelope_saturation;
    for (k, (&a, &b)) in base.per_order.iter().zip(&doubled.per_order).enumerate() {
        let r = ratio(b, a);
        report.constants.push(MeasuredConstant::new(format!("envelope_order_{k}"), a).with("scan_radius_doubling", r));
        if !a.is_finite() || (r - 1.0).abs() >= tol {
            failures.push(format!("order {k} envelope changes by {:.3e} when the scan radius doubles", r - 1.0));
        }
    }
    report.constants.push(
        MeasuredConstant::new("envelope", base.c_hat).with("scan_radius_doubling", ratio(doubled.c_hat, base.c_hat)),
    );
    report.details = json!({
        "delta": params.delta(),
        "exponent": base.exponent,
        "scan_radius": radius,
        "argmax_radius": base.argmax_radius,
        "samples": base.samples,
    });
    let mut points = Vec::new();
    let bins = 80;
    for b in 0..bins {
        let lo = radius.powf(b as f64 / bins as f64);
        let hi = radius.powf((b + 1) as f64 / bins as f64);
        let top = (0..32)
            .map(|j| phi_radial(lo + (hi - lo) * j as f64 / 31.0, &params).abs())
            .fold(0.0, f64::max);
        points.push((lo, top));
    }
    report.plots.push(Plot {
        name: "kernel_envelope".into(),
        kind: PlotKind::Envelope,
        title: "kernel magnitude".into(),
        x_label: "|x|".into(),
        y_label: "max |phi|".into(),
        points,
        guide_slope: Some(-base.exponent),
    });
    Ok(finish(report, failures, Vec::new(), f64::INFINITY))
}

fn superposition(cfg: &ExperimentConfig, w: &Weight<f64>) -> Result<CheckReport> {
    let family = SuperpositionFamily {
        members: cfg.superposition.members,
        seed: cfg.superposition.seed,
        normalization: cfg.superposition.normalization,
    };
    let fine = w.resampled(2 * cfg.grid.points)?;
    let tol = cfg.tolerances.superposition;
    let mut report = CheckReport::new(Check::Superposition.name());
    let mut details = Vec::new();
    let mut failures = Vec::new();
    let mut status = Status::Pass;
    for &p in &cfg.superposition.p_list {
        let base = check_superposition(p, w, &family, tol)?;
        let refined = check_superposition(p, &fine, &family, tol)?;
        report.constants.push(
            MeasuredConstant::new(format!("worst_ratio_p{p:.4}"), base.worst_ratio)
                .with("grid_doubling", ratio(refined.worst_ratio, base.worst_ratio)),
        );
        status = status.combine(base.status).combine(refined.status);
        if let Some(alpha) = base.violating_alpha.or(refined.violating_alpha) {
            if base.hypothesis_holds {
                failures.push(format!("bound violated at p = {p}, alpha = {alpha:e}"));
            }
        }
        if !base.brute_force_agrees || !refined.brute_force_agrees {
            failures.push(format!("level-set sums disagree at p = {p}"));
        }
        details.push(json!({ "p": p, "base": base, "refined": refined }));
    }
    report.status = status;
    if status == Status::HypothesisViolated {
        report.message = "coefficients exceed the summability hypothesis; bound not tested".into();
    }
    report.details = json!({ "family": family, "exponents": details });
    Ok(finish(report, failures, Vec::new(), cfg.tolerances.refinement))
}

fn atom_decay(ctx: &Context) -> Result<CheckReport> {
    let cfg = &ctx.cfg;
    let delta = cfg.delta();
    let grid = ctx.weight.samples();
    let sides = hardy_littlewood_sides(grid);
    struct Row {
        c: f64,
        c_ref: f64,
        dom: f64,
        dom_ref: f64,
        location: Option<Vec<f64>>,
        valid: bool,
    }
    let rows = ctx
        .atoms
        .par_iter()
        .map(|case| {
            let a = case.atom.samples();
            let window = DecayWindow::standard(&case.atom);
            let base = br_maximal(a, delta, &cfg.r_grid.radii(case.r))?;
            let fine = br_maximal(a, delta, &cfg.r_grid.refined(case.r))?;
            let hl = hardy_littlewood(a, &sides)?;
            let d = domination_ratio(&base, &hl);
            let d_ref = domination_ratio(&fine, &hl);
            Ok(Row {
                c: decay_ratio_of(&base, &case.atom, window)?.c_hat,
                c_ref: decay_ratio_of(&fine, &case.atom, window)?.c_hat,
                dom: d.max_ratio,
                dom_ref: d_ref.max_ratio,
                location: d.location,
                valid: case.atom.validation().passed(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c: Vec<f64> = rows.iter().map(|r| r.c).collect();
    let c_ref: Vec<f64> = rows.iter().map(|r| r.c_ref).collect();
    let (cmax, cmax_ref) = (max_of(c.iter().copied()), max_of(c_ref.iter().copied()));
    let spread = cmax / median(&c);
    let spread_ref = cmax_ref / median(&c_ref);
    let dmax = max_of(rows.iter().map(|r| r.dom));
    let dmax_ref = max_of(rows.iter().map(|r| r.dom_ref));
    let mut report = CheckReport::new(Check::AtomDecay.name());
    report.constants = vec![
        MeasuredConstant::new("decay_constant", cmax).with("radius_grid", ratio(cmax_ref, cmax)),
        MeasuredConstant::new("decay_max_over_median", spread).with("radius_grid", ratio(spread_ref, spread)),
        MeasuredConstant::new("domination_ratio", dmax).with("radius_grid", ratio(dmax_ref, dmax)),
    ];
    let mut failures = Vec::new();
    if !cmax.is_finite() || !(cmax > 0.0) {
        failures.push(format!("decay constant {cmax} is not finite and positive"));
    }
    if !(spread < cfg.tolerances.max_median) {
        failures.push(format!("decay constant max/median {spread:.3} reaches {}", cfg.tolerances.max_median));
    }
    if !dmax.is_finite() {
        failures.push("domination ratio is unbounded".into());
    }
    let invalid = rows.iter().filter(|r| !r.valid).count();
    if invalid > 0 {
        failures.push(format!("{invalid} atoms fail validation"));
    }
    let worst = rows
        .iter()
        .zip(&ctx.atoms)
        .fold(None::<(&Row, &AtomCase)>, |acc, (r, a)| match acc {
            Some((b, _)) if b.dom >= r.dom => acc,
            _ => Some((r, a)),
        });
    report.details = json!({
        "atoms": rows.len(),
        "moment_index": ctx.moment_index,
        "critical_index": ctx.critical_index,
        "per_atom": ctx.atoms.iter().zip(&rows).map(|(a, r)| json!({
            "seed": a.seed, "r": a.r, "decay": r.c, "decay_refined": r.c_ref,
            "domination": r.dom, "domination_refined": r.dom_ref,
        })).collect::<Vec<_>>(),
        "domination_argmax": worst.map(|(r, a)| json!({ "seed": a.seed, "r": a.r, "location": r.location })),
    });
    Ok(finish(report, failures, Vec::new(), cfg.tolerances.refinement))
}

fn moment_cancellation(ctx: &Context) -> Result<CheckReport> {
    let cfg = &ctx.cfg;
    let index = ctx.moment_index;
    struct Row {
        worst: f64,
        worst_ref: f64,
        all_pass: bool,
        strict: usize,
        tail: f64,
        control: f64,
        control_ref: f64,
    }
    let rows = ctx
        .atoms
        .par_iter()
        .map(|case| {
            let a = case.atom.samples();
            let control_input = a.map(f64::abs);
            let mut row = Row {
                worst: 0.0,
                worst_ref: 0.0,
                all_pass: true,
                strict: 0,
                tail: 0.0,
                control: f64::INFINITY,
                control_ref: f64::INFINITY,
            };
            for (k, &radius) in cfg.r_grid.refined(case.r).iter().enumerate() {
                let params = cfg.params(radius)?;
                let m = br_moment_check(a, &params, index)?;
                let normalized = m.max_abs_moment / m.l1_norm;
                let control = br_moment_check(&control_input, &params, index)?;
                let c = control.max_abs_moment / control.quadrature_tolerance;
                row.worst_ref = row.worst_ref.max(normalized);
                row.control_ref = row.control_ref.min(c);
                if k % 2 == 0 {
                    row.worst = row.worst.max(normalized);
                    row.all_pass &= m.pass;
                    row.strict += usize::from(m.strict_pass);
                    row.tail = row.tail.max(m.tail_bound / m.l1_norm);
                    row.control = row.control.min(c);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = max_of(rows.iter().map(|r| r.worst));
    let worst_ref = max_of(rows.iter().map(|r| r.worst_ref));
    let control = rows.iter().map(|r| r.control).fold(f64::INFINITY, f64::min);
    let control_ref = rows.iter().map(|r| r.control_ref).fold(f64::INFINITY, f64::min);
    let floor = BR_MOMENT_TOLERANCE;
    let mut report = CheckReport::new(Check::MomentCancellation.name());
    report.constants = vec![
        MeasuredConstant::new("worst_normalized_moment", worst)
            .with("radius_grid", ratio(worst_ref + floor, worst + floor)),
        MeasuredConstant::new("negative_control_ratio", control).with("radius_grid", ratio(control_ref, control)),
    ];
    let tail = max_of(rows.iter().map(|r| r.tail));
    report.tail_bounds.push(TailBound {
        name: "moment_tail_over_l1".into(),
        value: tail,
        relative: tail / floor,
    });
    let mut failures = Vec::new();
    let failing = rows.iter().filter(|r| !r.all_pass).count();
    if failing > 0 {
        failures.push(format!("{failing} atoms have moments above tolerance plus tail"));
    }
    if !(control >= NEGATIVE_CONTROL_FACTOR) {
        failures.push(format!("negative control reaches only {control:.3e} times the tolerance"));
    }
    let total = rows.len() * cfg.r_grid.count;
    let strict: usize = rows.iter().map(|r| r.strict).sum();
    report.details = json!({
        "moment_index": index,
        "evaluations": total,
        "within_quadrature_tolerance_alone": strict,
        "quadrature_tolerance_over_l1": floor,
    });
    Ok(finish(report, failures, Vec::new(), cfg.tolerances.refinement))
}

fn within_factor(value: f64, expected: f64, factor: f64) -> bool {
    value.is_finite() && value >= expected / factor && value <= expected * factor
}

fn grand_decay(ctx: &Context, sweep: &Sweep) -> CheckReport {
    let cfg = &ctx.cfg;
    let cases = &sweep.cases;
    let c7: Vec<f64> = cases.iter().map(|c| c.c7_base).collect();
    let cmax = max_of(c7.iter().copied());
    let cref = max_of(cases.iter().map(|c| c.c7_refined));
    let cdbl = max_of(cases.iter().map(|c| c.c7_doubled));
    let mut report = CheckReport::new(Check::GrandDecay.name());
    report.constants = vec![MeasuredConstant::new("c7", cmax)
        .with("radius_grid", ratio(cref, cmax))
        .with("probe_family", ratio(cdbl, cmax))];
    let mut failures = Vec::new();
    if !cmax.is_finite() || !(cmax > 0.0) {
        failures.push(format!("envelope constant {cmax} is not finite and positive"));
    }
    let mut slopes = Vec::new();
    for &r in &cfg.r_list {
        let drops: Vec<f64> = cases.iter().filter(|c| c.r == r).map(|c| c.decay.drop_ratio).collect();
        let drop = median(&drops);
        let expected = cases[0].decay.expected_drop;
        let ok = within_factor(drop, expected, cfg.tolerances.slope_factor);
        if !ok {
            failures.push(format!(
                "envelope drop {drop:.3} at r = {r} is not within a factor {} of {expected:.3}",
                cfg.tolerances.slope_factor
            ));
        }
        slopes.push(json!({ "r": r, "median_drop": drop, "expected_drop": expected, "ok": ok }));
        if let Some(case) = cases.iter().find(|c| c.r == r) {
            report.plots.push(Plot {
                name: format!("envelope_r{r}"),
                kind: PlotKind::Envelope,
                title: format!("grand maximal envelope, r = {r}, seed {}", case.seed),
                x_label: "|x - x0|".into(),
                y_label: "G".into(),
                points: case.decay.envelope.clone(),
                guide_slope: Some(-(cfg.n as f64) / cfg.p),
            });
        }
    }
    report.details = json!({
        "max_over_median": cmax / median(&c7),
        "slopes": slopes,
        "per_atom": cases.iter().map(|c| json!({
            "seed": c.seed, "r": c.r, "c7": c.c7_base, "c7_refined": c.c7_refined,
            "c7_doubled": c.c7_doubled, "drop": c.decay.drop_ratio,
        })).collect::<Vec<_>>(),
    });
    finish(report, failures, Vec::new(), cfg.tolerances.refinement)
}

fn weak_bound(ctx: &Context, sweep: &Sweep) -> CheckReport {
    let cfg = &ctx.cfg;
    let tol = &cfg.tolerances;
    let cases = &sweep.cases;
    let s: Vec<f64> = cases.iter().map(|c| c.s_base).collect();
    let s_ref: Vec<f64> = cases.iter().map(|c| c.s_refined).collect();
    let s_dbl: Vec<f64> = cases.iter().map(|c| c.s_doubled).collect();
    let smax = max_of(s.iter().copied());
    let smax_ref = max_of(s_ref.iter().copied());
    let smax_dbl = max_of(s_dbl.iter().copied());
    let spread = smax / median(&s);
    let spread_ref = max_of(s_ref.iter().copied()) / median(&s_ref);
    let spread_dbl = max_of(s_dbl.iter().copied()) / median(&s_dbl);
    let i1 = max_of(cases.iter().map(|c| c.i1));
    let i2 = max_of(cases.iter().map(|c| c.i2));
    let i1_dbl = max_of(cases.iter().map(|c| c.i1_doubled));
    let i2_dbl = max_of(cases.iter().map(|c| c.i2_doubled));
    let per_r: Vec<f64> = cfg
        .r_list
        .iter()
        .map(|&r| max_of(cases.iter().filter(|c| c.r == r).map(|c| c.s_base)))
        .collect();
    let per_r_ref: Vec<f64> = cfg
        .r_list
        .iter()
        .map(|&r| max_of(cases.iter().filter(|c| c.r == r).map(|c| c.s_refined)))
        .collect();
    let sweep_ratio = |v: &[f64]| max_of(v.iter().copied()) / v.iter().copied().fold(f64::INFINITY, f64::min);
    let (r_ratio, r_ratio_ref) = (sweep_ratio(&per_r), sweep_ratio(&per_r_ref));

    let mut report = CheckReport::new(Check::WeakBound.name());
    report.constants = vec![
        MeasuredConstant::new("weak_constant", smax)
            .with("radius_grid", ratio(smax_ref, smax))
            .with("probe_family", ratio(smax_dbl, smax)),
        MeasuredConstant::new("max_over_median", spread)
            .with("radius_grid", ratio(spread_ref, spread))
            .with("probe_family", ratio(spread_dbl, spread)),
        MeasuredConstant::new("near_part", i1).with("probe_family", ratio(i1_dbl, i1)),
        MeasuredConstant::new("far_part", i2).with("probe_family", ratio(i2_dbl, i2)),
        MeasuredConstant::new("cube_size_sweep", r_ratio).with("radius_grid", ratio(r_ratio_ref, r_ratio)),
    ];
    let tail = max_of(cases.iter().map(|c| c.tail_relative));
    report.tail_bounds.push(TailBound {
        name: "exterior_level_sets".into(),
        value: tail * smax,
        relative: tail,
    });
    let mut failures = Vec::new();
    let mut inconclusive = Vec::new();
    if !smax.is_finite() || !(smax > 0.0) {
        failures.push(format!("weak constant {smax} is not finite and positive"));
    }
    if !(spread < tol.max_median) {
        failures.push(format!("max/median {spread:.3} reaches {}", tol.max_median));
    }
    if !(sweep.homogeneity_error <= tol.homogeneity) {
        failures.push(format!("homogeneity error {:.3e}", sweep.homogeneity_error));
    }
    if !(r_ratio < tol.max_median) {
        failures.push(format!("cube-size sweep ratio {r_ratio:.3} reaches {}", tol.max_median));
    }
    if cases.iter().any(|c| !c.i2_empty_above_envelope) {
        failures.push("far level sets are not empty above the boundary envelope".into());
    }
    if !(tail <= tol.tail_fraction) {
        inconclusive.push(format!("exterior tail reaches {tail:.3} of the measured weak constant"));
    }
    report.details = json!({
        "moment_index": ctx.moment_index,
        "critical_index": ctx.critical_index,
        "homogeneity_error": sweep.homogeneity_error,
        "per_cube_size": cfg.r_list.iter().zip(&per_r).map(|(r, v)| json!({ "r": r, "max_s": v })).collect::<Vec<_>>(),
        "per_atom": cases,
    });
    report.plots.push(Plot {
        name: "level_curve".into(),
        kind: PlotKind::LevelCurve,
        title: "weak-type level curve of the worst atom".into(),
        x_label: "lambda".into(),
        y_label: "lambda^p w(G > lambda)".into(),
        points: sweep.level_curve.clone(),
        guide_slope: None,
    });
    finish(report, failures, inconclusive, tol.refinement)
}

//! Subcommand implementations. Each writes its artifacts and prints a JSON
//! summary on stdout.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context as _, Result};
use log::info;
use riesz_lab::atoms::make_atom;
use riesz_lab::grid::{Cube, GridBox, GridFunction};
use riesz_lab::kernel::{decay_envelope_estimate, phi_scaled, scan_radii, BRParams};
use riesz_lab::operator::{br_apply_convolution, br_apply_spectral, br_maximal, dyadic_half_grid};
use riesz_lab::spaces::{
    dyadic_t_grid, hardy_norm, moment_index, strong_report, weak_hardy_norm, weak_lp_w_norm, Probe, ProbeFamily,
    ProbeShape, DEFAULT_FAMILY_SIZE,
};
use riesz_lab::verify::{emit_report, run_checks, Check, ExperimentConfig, Format};
use riesz_lab::weights::{
    a_1_constant, a_q_constant, critical_index_estimate, refinement_sensitivity, CubeFamily, Weight, WeightSpec,
};
use serde_json::{json, Value};

use super::{
    AtomArgs, Command, FormatArg, KernelArgs, NormKindArg, NormsArgs, OperatorArgs, Route, VerifyArgs, WeightKindArg,
    WeightsArgs,
};

pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::Kernel(a) => kernel(a),
        Command::Operator(a) => operator(a),
        Command::Weights(a) => weights(a),
        Command::Norms(a) => norms(a),
        Command::Atom(a) => atom(a),
        Command::Verify(a) => verify(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(value)?);
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &Value) -> Result<u8> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(0)
}

/// `lebesgue`, `constant:C`, `power:A`, `file:PATH`, or a JSON object.
pub fn parse_weight(spec: &str) -> Result<WeightSpec> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        return serde_json::from_str(spec).with_context(|| format!("weight {spec:?}"));
    }
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let number = || arg.parse::<f64>().map_err(|_| anyhow!("weight {spec:?} needs a numeric parameter"));
    Ok(match kind {
        "lebesgue" | "one" => WeightSpec::Constant { c: 1.0 },
        "constant" if arg.is_empty() => WeightSpec::Constant { c: 1.0 },
        "constant" => WeightSpec::Constant { c: number()? },
        "power" => WeightSpec::Power { a: number()? },
        "file" if !arg.is_empty() => WeightSpec::Tabulated { path: arg.into() },
        _ => bail!("unrecognized weight {spec:?}"),
    })
}

/// Closed-form critical index when available, otherwise the estimate.
fn critical_index(w: &Weight<f64>) -> Result<f64> {
    Ok(match w.closed_form_critical_index() {
        Some(q) => q,
        None => critical_index_estimate(w)?.value,
    })
}

fn kernel(args: KernelArgs) -> Result<u8> {
    let params = BRParams::critical(args.n, args.p, args.big_r)?;
    let base = decay_envelope_estimate(&params, args.alpha_max, args.radius)?;
    let doubled = decay_envelope_estimate(&params, args.alpha_max, 2.0 * args.radius)?;
    let radii = scan_radii(args.radius);
    let values: Vec<f64> = radii
        .iter()
        .map(|&rho| {
            let mut x = vec![0.0; args.n];
            x[0] = rho;
            phi_scaled(&x, &params)
        })
        .collect();
    let mut envelope = vec![0.0; values.len()];
    let mut running: f64 = 0.0;
    for i in (0..values.len()).rev() {
        running = running.max(values[i].abs());
        envelope[i] = running;
    }
    let mut csv = String::from("abs_x,phi,envelope\n");
    for ((r, v), e) in radii.iter().zip(&values).zip(&envelope) {
        let _ = writeln!(csv, "{r:e},{v:e},{e:e}");
    }
    create_dir(&args.out)?;
    let path = args.out.join("kernel.csv");
    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    let summary = json!({
        "n": args.n,
        "p": args.p,
        "delta": params.delta(),
        "R": args.big_r,
        "radius": args.radius,
        "alpha_max": args.alpha_max,
        "C_hat": base.c_hat,
        "per_order": base.per_order,
        "exponent": base.exponent,
        "argmax_radius": base.argmax_radius,
        "saturation_ratio": doubled.c_hat / base.c_hat,
    });
    write_json(&args.out.join("kernel.json"), &summary)?;
    print_json(&summary)
}

fn operator(args: OperatorArgs) -> Result<u8> {
    let f = GridFunction::read_csv(&args.input)?;
    let params = BRParams::new(f.dim(), args.delta, args.big_r)?;
    let (output, meta) = match args.route {
        Route::Spectral => {
            let s = br_apply_spectral(&f, &params)?;
            let meta = json!({
                "route": "spectral",
                "tail_bound": s.wrap_bound,
                "imaginary_residue": s.imaginary_residue,
            });
            (s.output, meta)
        }
        Route::Convolution => {
            let c = br_apply_convolution(&f, &params)?;
            let meta = json!({ "route": "convolution", "tail_bound": c.tail_bound, "window": c.window });
            (c.output, meta)
        }
        Route::Maximal => {
            let radii = dyadic_half_grid(args.big_r, args.count);
            let m = br_maximal(&f, args.delta, &radii)?;
            (m, json!({ "route": "maximal", "radii": radii }))
        }
    };
    create_dir(&args.out)?;
    output.write_csv(args.out.join("output.csv"))?;
    let mut meta = meta;
    meta["delta"] = json!(args.delta);
    meta["R"] = json!(args.big_r);
    meta["input"] = json!(args.input);
    meta["output_max_abs"] = json!(output.max_abs());
    write_json(&args.out.join("metadata.json"), &meta)?;
    print_json(&meta)
}

fn weights(args: WeightsArgs) -> Result<u8> {
    let domain = GridBox::new(args.n, args.half_width)?;
    let w = match args.kind {
        WeightKindArg::Constant => Weight::constant(domain, args.points, args.c)?,
        WeightKindArg::Power => Weight::power(domain, args.points, args.a)?,
        WeightKindArg::Tabulated => {
            let path = args.file.ok_or_else(|| anyhow!("a tabulated weight needs --file"))?;
            Weight::tabulated(GridFunction::read_csv(path)?)?
        }
    };
    let family = CubeFamily::for_weight(&w)?;
    let a_q = a_q_constant(&w, args.q, &family)?;
    let a_1 = a_1_constant(&w, &family)?;
    let refinement = refinement_sensitivity(&w, Some(args.q))?;
    let q_w = critical_index_estimate(&w)?;
    print_json(&json!({
        "A_q_estimate": a_q.value,
        "A_q_saturated": a_q.saturated,
        "A_1_estimate": a_1.value,
        "family_size": a_q.family_size,
        "refinement_ratio": refinement.ratio,
        "q_w_estimate": q_w.value,
        "q_w_closed_form": w.closed_form_critical_index(),
        "q": args.q,
    }))
}

fn norms(args: NormsArgs) -> Result<u8> {
    let f = GridFunction::read_csv(&args.input)?;
    let w = parse_weight(&args.weight)?.build(f.domain(), f.points_per_axis())?;
    let t_grid = dyadic_t_grid(f.spacing(), f.half_width());
    let wants = |k: NormKindArg| args.kind == k || args.kind == NormKindArg::All;
    let mut out = serde_json::Map::new();
    if wants(NormKindArg::Strong) {
        out.insert("strong".into(), serde_json::to_value(strong_report(&f, args.p, &w)?)?);
    }
    if wants(NormKindArg::Weak) {
        out.insert("weak".into(), serde_json::to_value(weak_lp_w_norm(&f, args.p, &w)?)?);
    }
    if wants(NormKindArg::Hardy) {
        let mollifier = Probe::unit_mass(ProbeShape::Gaussian { width: 1.0 }, f.dim())?;
        out.insert("hardy".into(), serde_json::to_value(hardy_norm(&f, args.p, &w, &mollifier, &t_grid)?)?);
    }
    if wants(NormKindArg::WeakHardy) {
        let index = moment_index(f.dim(), args.p, critical_index(&w)?)?;
        let probes = ProbeFamily::standard(f.dim(), index, DEFAULT_FAMILY_SIZE, t_grid)?;
        out.insert("weak_hardy".into(), serde_json::to_value(weak_hardy_norm(&f, args.p, &w, &probes)?)?);
    }
    print_json(&Value::Object(out))
}

fn atom(args: AtomArgs) -> Result<u8> {
    let spec = parse_weight(&args.weight)?;
    let w = spec.build(GridBox::new(args.n, args.grid.half_width)?, args.grid.points)?;
    let s = match args.s {
        Some(s) => s,
        None => moment_index(args.n, args.p, critical_index(&w)?)?,
    };
    let center = args.center.unwrap_or_else(|| vec![0.0; args.n]);
    if center.len() != args.n {
        bail!("--center needs {} coordinates, got {}", args.n, center.len());
    }
    let cube = Cube::new(center.clone(), args.r)?;
    let a = make_atom(&cube, &w, args.p, args.q, s, args.seed)?;
    create_dir(&args.out)?;
    a.samples().write_csv(args.out.join("atom.csv"))?;
    let summary = json!({
        "n": args.n,
        "p": args.p,
        "q": args.q,
        "s": s,
        "r": args.r,
        "center": center,
        "seed": args.seed,
        "weight": spec,
        "passed": a.validation().passed(),
        "validation": a.validation(),
    });
    write_json(&args.out.join("validation.json"), &summary)?;
    print_json(&summary)?;
    Ok(if a.validation().passed() { 0 } else { 1 })
}

/// Check names accepted on the command line besides the report names.
fn check_alias(name: &str) -> Option<Check> {
    Some(match name {
        "lemma41" => Check::KernelDecay,
        "lemma42" => Check::Superposition,
        "lemma43" => Check::AtomDecay,
        "eq6" => Check::MomentCancellation,
        "eq7" => Check::GrandDecay,
        "thm11" => Check::WeakBound,
        _ => return None,
    })
}

pub fn parse_checks(names: &[String]) -> Result<Vec<Check>> {
    let mut out: Vec<Check> = Vec::new();
    for name in names {
        let name = name.trim().to_ascii_lowercase();
        if name == "all" {
            out.extend(Check::ALL);
            continue;
        }
        let check = Check::from_name(&name)
            .or_else(|| check_alias(&name))
            .ok_or_else(|| anyhow!("unknown check {name:?}"))?;
        out.push(check);
    }
    let mut seen = Vec::new();
    out.retain(|c| {
        let fresh = !seen.contains(c);
        seen.push(*c);
        fresh
    });
    if out.is_empty() {
        bail!("no checks selected");
    }
    Ok(out)
}

fn verify(args: VerifyArgs) -> Result<u8> {
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let checks = parse_checks(&args.check)?;
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let formats: Vec<Format> = match &args.format {
        Some(list) => list
            .iter()
            .map(|f| match f {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
                FormatArg::Svg => Format::Svg,
            })
            .collect(),
        None if cfg.output.plots => Format::ALL.to_vec(),
        None => vec![Format::Json, Format::Csv],
    };
    info!("running {} checks into {}", checks.len(), dir.display());
    let report = run_checks(&cfg, &checks)?;
    let written = emit_report(&report, &dir, &formats)?;
    for c in &report.checks {
        println!("{:<20} {:<20} {}", c.name, c.status.as_str(), c.message);
    }
    println!("overall: {}", report.status.as_str());
    for path in written {
        info!("wrote {}", path.display());
    }
    Ok(u8::try_from(report.exit_code()).unwrap_or(1))
}

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::json;

use isostab::bounds::{
    ball_membership, midpoint_inequality, verify_bounds, BallMembership, BoundReport,
    MidpointCheck,
};
use isostab::extractor::FrameIdentities;
use isostab::report::{format_vector_csv, parse_vector_csv, write_residual_csv, Report, RunManifest};
use isostab::search::SearchResult;
use isostab::{
    assemble_frame, certify, search_sharp_a, CertReport, ExtractionConfig, ExtractionResult, Family,
    IsometryFrame, Map, MapSpec, SamplerConfig, SearchConfig, Vector,
};

use crate::{Cli, Command, GalleryCommand};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Tolerances for reporting whether the assembled frame is a projection pair.
const IDENTITY_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-9;

struct Ctx<'a> {
    cli: &'a Cli,
    started: Instant,
}

impl Ctx<'_> {
    fn emit<P: Serialize>(&self, command: &str, config: serde_json::Value, payload: P) -> anyhow::Result<()> {
        let wall_time_ms = if self.cli.no_timing {
            0
        } else {
            self.started.elapsed().as_millis() as u64
        };
        let manifest = RunManifest {
            command: command.to_string(),
            config,
            seed: self.cli.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_ms,
        };
        let mut text = Report::new(manifest, payload).to_json();
        text.push('\n');
        match &self.cli.out {
            Some(path) => write_file(path, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_map(path: &Path) -> anyhow::Result<Map> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = MapSpec::from_toml_str(&text).with_context(|| format!("map file {}", path.display()))?;
    Ok(Map::new(spec)?)
}

fn parse_point(map: &Map, text: &str) -> anyhow::Result<Vector> {
    let x = parse_vector_csv(text).context("--x")?;
    if x.dim() != map.dim_in() {
        bail!("--x has {} coordinates, map expects {}", x.dim(), map.dim_in());
    }
    Ok(x)
}

fn map_config(path: &PathBuf, map: &Map) -> serde_json::Value {
    json!({ "map_path": path, "map": map.spec() })
}

fn with_map(mut config: serde_json::Value, path: &PathBuf, map: &Map) -> serde_json::Value {
    if let (Some(obj), serde_json::Value::Object(m)) = (config.as_object_mut(), map_config(path, map)) {
        obj.extend(m);
    }
    config
}

pub fn run(cli: &Cli) -> anyhow::Result<u8> {
    let ctx = Ctx {
        cli,
        started: Instant::now(),
    };
    match &cli.command {
        Command::Gallery(GalleryCommand::List) => gallery_list(&ctx),
        Command::Gallery(GalleryCommand::Eval { map, x }) => gallery_eval(&ctx, map, x),
        Command::Certify { map, samples, radius } => cmd_certify(&ctx, map, *samples, *radius),
        Command::Extract { map, tol, nmax } => cmd_extract(&ctx, map, *tol, *nmax),
        Command::Bounds {
            map,
            samples,
            radius,
            tol,
            nmax,
            csv,
        } => cmd_bounds(&ctx, map, *samples, *radius, *tol, *nmax, csv.as_deref()),
        Command::Prooftrace { map, x, k } => cmd_prooftrace(&ctx, map, x, *k),
        Command::Search {
            eps,
            knots,
            tmax,
            iters,
            restarts,
        } => cmd_search(&ctx, *eps, *knots, *tmax, *iters, *restarts),
    }
}

#[derive(Serialize)]
struct FamilyEntry {
    name: &'static str,
    parameters: &'static str,
}

fn gallery_list(ctx: &Ctx) -> anyhow::Result<u8> {
    let entries: Vec<FamilyEntry> = Family::ALL
        .iter()
        .map(|f| FamilyEntry {
            name: f.name(),
            parameters: f.parameter_doc(),
        })
        .collect();
    if ctx.cli.out.is_some() {
        ctx.emit("gallery list", json!({}), &entries)?;
    } else {
        for e in &entries {
            println!("{}: {}", e.name, e.parameters);
        }
    }
    Ok(EXIT_PASS)
}

#[derive(Serialize)]
struct EvalPayload {
    x: Vector,
    fx: Vector,
    fx_csv: String,
}

fn gallery_eval(ctx: &Ctx, path: &PathBuf, x: &str) -> anyhow::Result<u8> {
    let map = load_map(path)?;
    let x = parse_point(&map, x)?;
    let fx = map.eval(&x)?;
    let fx_csv = format_vector_csv(&fx);
    if ctx.cli.out.is_some() {
        let config = with_map(json!({ "x": x }), path, &map);
        ctx.emit("gallery eval", config, EvalPayload { x, fx, fx_csv })?;
    } else {
        println!("{fx_csv}");
    }
    Ok(EXIT_PASS)
}

fn cmd_certify(ctx: &Ctx, path: &PathBuf, samples: usize, radius: f64) -> anyhow::Result<u8> {
    let map = load_map(path)?;
    let sampler = SamplerConfig {
        samples,
        radius,
        seed: ctx.cli.seed,
    };
    let report: CertReport = certify(&map, &sampler)?;
    if report.low_coverage {
        eprintln!("note: low coverage, only {} random pairs", samples);
    }
    eprintln!(
        "certify: {} (max violation {:e} over {} pairs)",
        if report.certified { "certified" } else { "VIOLATION" },
        report.max_violation,
        report.samples_checked
    );
    let code = if report.certified { EXIT_PASS } else { EXIT_FAIL };
    ctx.emit("certify", with_map(json!({ "sampler": sampler }), path, &map), report)?;
    Ok(code)
}

#[derive(Serialize)]
struct ExtractPayload {
    result: ExtractionResult,
    frame: IsometryFrame,
    identities: FrameIdentities,
    achieved_accuracy: f64,
}

fn cmd_extract(ctx: &Ctx, path: &PathBuf, tol: f64, n_max: u32) -> anyhow::Result<u8> {
    let map = load_map(path)?;
    let cfg = ExtractionConfig {
        tol,
        n_max,
        seed: ctx.cli.seed,
    };
    let (result, frame) = assemble_frame(&map, &cfg)?;
    let achieved_accuracy = result.per_column_bound.iter().fold(0.0_f64, |a, b| a.max(*b));
    let code = if result.converged {
        eprintln!("extract: converged, per-column n {:?}", result.per_column_n);
        EXIT_PASS
    } else {
        eprintln!("extract: stopped at n_max = {n_max}, achieved accuracy {achieved_accuracy:e} > tol {tol:e}");
        EXIT_FAIL
    };
    let identities = frame.identities();
    let payload = ExtractPayload {
        result,
        frame,
        identities,
        achieved_accuracy,
    };
    ctx.emit("extract", with_map(json!({ "extraction": cfg }), path, &map), payload)?;
    Ok(code)
}

#[derive(Serialize)]
struct BoundsPayload {
    extraction_converged: bool,
    identities: FrameIdentities,
    identities_hold: bool,
    report: BoundReport,
}

fn cmd_bounds(
    ctx: &Ctx,
    path: &PathBuf,
    samples: usize,
    radius: f64,
    tol: f64,
    n_max: u32,
    csv: Option<&Path>,
) -> anyhow::Result<u8> {
    let map = load_map(path)?;
    let extraction = ExtractionConfig {
        tol,
        n_max,
        seed: ctx.cli.seed,
    };
    let sampler = SamplerConfig {
        samples,
        radius,
        seed: ctx.cli.seed,
    };
    sampler.validate()?;
    let (result, frame) = assemble_frame(&map, &extraction).context("frame extraction")?;
    let report = verify_bounds(&map, &frame, &sampler)?;
    if let Some(csv) = csv {
        write_file(csv, &write_residual_csv(report.epsilon, &report.samples)?)?;
    }
    let identities = frame.identities();
    eprintln!(
        "bounds: {} (min margins {:e}, {:e}, {:e})",
        if report.all_pass { "all pass" } else { "FAIL" },
        report.min_margin2,
        report.min_margin3,
        report.min_margin4
    );
    let code = if report.all_pass { EXIT_PASS } else { EXIT_FAIL };
    let payload = BoundsPayload {
        extraction_converged: result.converged,
        identities_hold: identities.hold(IDENTITY_TOL, NORM_TOL),
        identities,
        report,
    };
    let config = with_map(
        json!({ "sampler": sampler, "extraction": extraction, "csv": csv }),
        path,
        &map,
    );
    ctx.emit("bounds", config, payload)?;
    Ok(code)
}

#[derive(Serialize)]
struct TracePayload {
    x: Vector,
    r: f64,
    k: u64,
    y: Vector,
    membership: BallMembership,
    check: MidpointCheck,
    /// `6 eps r + eps^2`, the value the right-hand side tends to as k grows
    limit: f64,
}

fn cmd_prooftrace(ctx: &Ctx, path: &PathBuf, x: &str, k: u64) -> anyhow::Result<u8> {
    let map = load_map(path)?;
    let x = parse_point(&map, x)?;
    let y = map.eval(&x)?;
    let membership = ball_membership(&map, &x, k)?;
    let check = midpoint_inequality(&map, &x, k, &y)?;
    let eps = map.epsilon();
    let r = x.norm();
    eprintln!(
        "prooftrace: lhs {} rhs {} ({})",
        check.lhs,
        check.rhs,
        if check.holds { "holds" } else { "VIOLATED" }
    );
    let code = if check.holds { EXIT_PASS } else { EXIT_FAIL };
    let payload = TracePayload {
        x: x.clone(),
        r,
        k,
        y,
        membership,
        check,
        limit: 6.0 * eps * r + eps * eps,
    };
    ctx.emit("prooftrace", with_map(json!({ "x": x, "k": k }), path, &map), payload)?;
    Ok(code)
}

#[derive(Serialize)]
struct SearchPayload {
    result: SearchResult,
    witness: MapSpec,
}

fn cmd_search(
    ctx: &Ctx,
    epsilon: f64,
    knot_count: usize,
    t_max: f64,
    iterations: usize,
    restarts: usize,
) -> anyhow::Result<u8> {
    let cfg = SearchConfig {
        epsilon,
        knot_count,
        t_max,
        iterations,
        restarts,
        seed: ctx.cli.seed,
        ..SearchConfig::default()
    };
    let result = search_sharp_a(&cfg)?;
    eprintln!(
        "search: A_hat = {} at t = {} (restart {}, {} evaluations)",
        result.a_hat, result.witness_t, result.restart, result.evaluations
    );
    let witness = result.witness_spec(epsilon);
    ctx.emit("search", json!({ "search": cfg }), SearchPayload { result, witness })?;
    Ok(EXIT_PASS)
}

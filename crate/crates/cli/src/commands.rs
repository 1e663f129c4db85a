use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qg_core::barvinok::{bound_q, bound_report, bound_t, count_hyperplane_solutions, HyperplaneSolutions};
use qg_core::crofton::{estimate_length, length_vs_bound, sample_hyperplane};
use qg_core::flow::{graph_geodesic_diameter, morse_check, trajectory_diameter_estimate, EstimateOptions};
use qg_core::manifold::{regularity_check, sample_points};
use qg_core::reduction::{regular_eps_search, slack_lift, strict_to_nonstrict, thicken};
use qg_core::rng::{derive_seed, substream};
use qg_core::scene::{parse_scene, serialize_scene};
use qg_core::thalweg::{default_seeds, dimension_check, perturb, trace_thalweg, ThalwegCurve};
use qg_core::{io, Error, Hyperplane, Point, Polyline, Quadric, SceneSystem};

use crate::report::{display, scene_digest, RunReport};
use crate::svg::polylines_svg;

#[derive(Debug, Parser)]
#[command(name = "qg", version, about = "Geodesic diameter tools for bounded intersections of quadrics")]
pub struct Cli {
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "QG_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Print the run report as JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "qg-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Graph,
    Trajectory,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regularity of the constraints and (if present) the Morse property of P.
    Check {
        scene: PathBuf,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Fail with a usage error when the scene has no morse quadric.
        #[arg(long)]
        require_morse: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Trace the thalweg of the scene's morse quadric.
    Thalweg {
        scene: PathBuf,
        /// Perturb P and the equations by this scale first.
        #[arg(long)]
        perturb: Option<f64>,
        #[arg(long, default_value_t = 32)]
        seeds: usize,
        /// Box-counting cell size for the dimension check (default 0.05 R).
        #[arg(long)]
        resolution: Option<f64>,
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Crofton length of a polyline CSV, or of a scene's thalweg.
    Length {
        input: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Sampling radius for CSV input (default: smallest unit-multiple ball containing the curve).
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        perturb: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Count solutions of the parameterized system on hyperplanes.
    Solve {
        scene: PathBuf,
        /// "a1,...,an,b" for the hyperplane a·x = b.
        #[arg(long, allow_hyphen_values = true)]
        hyperplane: Option<String>,
        /// Number of random hyperplanes (default 1 when no hyperplane is given).
        #[arg(long)]
        random_planes: Option<usize>,
        #[arg(long, default_value_t = 200)]
        starts: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Bound table for k quadrics in n variables.
    Bounds { k: usize, n: usize },
    /// Geodesic diameter estimate.
    Diameter {
        scene: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Graph)]
        method: Method,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 12)]
        neighbors: usize,
        /// Start point "x1,...,xn" (trajectory method).
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Slack lift of the inequalities to equations.
    Lift {
        scene: PathBuf,
        /// Replace strict inequalities Q > 0 by Q - eps >= 0.
        #[arg(long, conflicts_with = "witness")]
        strict_eps: Option<f64>,
        /// Polyline CSV of witness paths for choosing eps.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Replace equations by thin shells.
    Thicken {
        scene: PathBuf,
        /// Comma-separated eps per equation; searched when omitted.
        #[arg(long, conflicts_with = "search")]
        eps: Option<String>,
        #[arg(long)]
        search: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Sample points of M.
    Sample {
        scene: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or unreadable input.
    #[error("{0}")]
    Usage(String),
    /// The analysis ran and failed.
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Analysis(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Schema { .. }
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Io(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::MissingMorse => CliError::Usage(e.to_string()),
            _ => CliError::Analysis(e.to_string()),
        }
    }
}

pub struct Outcome {
    pub report: RunReport,
    /// Human-readable body.
    pub text: String,
    /// `false` for a completed run whose verdict is negative (exit 1).
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

struct Ctx {
    name: &'static str,
    seed: u64,
    threads: usize,
    start: Instant,
    digest: Option<String>,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

impl Ctx {
    fn new(name: &'static str, seed: u64, threads: usize) -> Self {
        Ctx {
            name,
            seed,
            threads,
            start: Instant::now(),
            digest: None,
            outputs: vec![],
            warnings: vec![],
        }
    }

    fn scene(&mut self, path: &Path) -> Result<SceneSystem, CliError> {
        let s = load_scene(path)?;
        self.digest = Some(scene_digest(&s));
        Ok(s)
    }

    fn write(&mut self, dir: &Path, name: &str, body: &[u8]) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", display(dir))))?;
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", display(&p))))?;
        self.outputs.push(display(&p));
        Ok(())
    }

    fn finish(self, summary: serde_json::Value, text: String, passed: bool) -> Outcome {
        Outcome {
            report: RunReport {
                command: self.name.into(),
                scene_digest: self.digest,
                seed: self.seed,
                threads: self.threads,
                wall_time: self.start.elapsed().as_secs_f64(),
                outputs: self.outputs,
                warnings: self.warnings,
                summary,
            },
            text,
            passed,
        }
    }
}

pub fn load_scene(path: &Path) -> Result<SceneSystem, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", display(path))))?;
    parse_scene(&text).map_err(|e| CliError::Usage(format!("{}: {e}", display(path))))
}

fn load_polylines(path: &Path) -> Result<Vec<Polyline>, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", display(path))))?;
    io::read_polylines(f).map_err(|e| CliError::Usage(format!("{}: {e}", display(path))))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{what}: cannot parse {t:?} as a number"))))
        .collect()
}

fn parse_point(s: &str, n: usize, what: &str) -> Result<Point, CliError> {
    let v = parse_list(s, what)?;
    if v.len() != n {
        return Err(CliError::Usage(format!("{what}: expected {n} coordinates, found {}", v.len())));
    }
    Ok(Point::from_vec(v))
}

fn polylines_csv(lines: &[Polyline]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    io::write_polylines(&mut buf, lines)?;
    Ok(buf)
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let t = cli.threads;
    match &cli.command {
        Command::Check {
            scene,
            samples,
            require_morse,
            seed,
        } => check(scene, *samples, *require_morse, *seed, t),
        Command::Thalweg {
            scene,
            perturb,
            seeds,
            resolution,
            svg,
            common,
        } => thalweg(scene, *perturb, *seeds, *resolution, *svg, common, t),
        Command::Length {
            input,
            samples,
            radius,
            perturb,
            common,
        } => length(input, *samples, *radius, *perturb, common, t),
        Command::Solve {
            scene,
            hyperplane,
            random_planes,
            starts,
            common,
        } => solve(scene, hyperplane.as_deref(), *random_planes, *starts, common, t),
        Command::Bounds { k, n } => bounds(*k, *n, t),
        Command::Diameter {
            scene,
            method,
            samples,
            neighbors,
            from,
            to,
            common,
        } => diameter(scene, *method, *samples, *neighbors, from.as_deref(), to.as_deref(), common, t),
        Command::Lift {
            scene,
            strict_eps,
            witness,
            common,
        } => lift(scene, *strict_eps, witness.as_deref(), common, t),
        Command::Thicken { scene, eps, search: _, common } => thicken_cmd(scene, eps.as_deref(), common, t),
        Command::Sample { scene, count, common } => sample(scene, *count, common, t),
    }
}

fn check(path: &Path, samples: usize, require_morse: bool, seed: u64, threads: usize) -> Result<Outcome, CliError> {
    let mut ctx = Ctx::new("check", seed, threads);
    let scene = ctx.scene(path)?;
    if require_morse && scene.morse().is_none() {
        return Err(CliError::Usage(format!("{}: scene has no morse quadric", display(path))));
    }
    let reg = regularity_check(&scene, samples, derive_seed(seed, "cli.check.regularity"));
    let mut text = if reg.verdict {
        format!(
            "regularity: PASS (min σ = {:.3e} over {} samples, threshold {:.1e})\n",
            reg.min_sigma_over_samples, reg.sample_count, reg.threshold
        )
    } else {
        let at = reg.worst_point.as_ref().map(|x| format!(" near {}", fmt_point(x))).unwrap_or_default();
        let pair = reg
            .worst_pair
            .map(|(i, j)| format!(": constraints {i} and {j} are dependent"))
            .unwrap_or_default();
        format!(
            "regularity: FAIL{pair}{at} (min σ = {:.3e}, threshold {:.1e})\n",
            reg.min_sigma_over_samples, reg.threshold
        )
    };
    let mut passed = reg.verdict;
    let mut morse_json = serde_json::Value::Null;
    if let Some(p) = scene.morse() {
        let m = morse_check(&scene, p, derive_seed(seed, "cli.check.morse"))?;
        let (maxima, minima) = (m.maxima().count(), m.minima().count());
        text.push_str(&format!(
            "morse: {} ({} critical points, {maxima} maxima, {minima} minima)\n",
            if m.is_morse() { "PASS" } else { "FAIL" },
            m.critical_points.len()
        ));
        if !m.distinct_values {
            text.push_str("morse: critical values are not distinct\n");
        }
        if !m.nondegenerate {
            text.push_str("morse: degenerate critical point\n");
        }
        ctx.warnings.extend(m.warnings.iter().cloned());
        passed &= m.is_morse();
        morse_json = json!({
            "is_morse": m.is_morse(),
            "critical_points": m.critical_points.len(),
            "maxima": maxima,
            "minima": minima,
            "distinct_values": m.distinct_values,
            "nondegenerate": m.nondegenerate,
        });
    }
    let summary = json!({ "regularity": reg, "morse": morse_json, "passed": passed });
    Ok(ctx.finish(summary, text, passed))
}

fn fmt_point(x: &Point) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.4}")).collect();
    format!("({})", parts.join(", "))
}

/// Scene and quadric to trace, optionally perturbed.
fn traced_system(scene: &SceneSystem, scale: Option<f64>, seed: u64) -> Result<(SceneSystem, Quadric, serde_json::Value), CliError> {
    let p = scene.require_morse()?.clone();
    match scale {
        None => Ok((scene.clone(), p, serde_json::Value::Null)),
        Some(s) => {
            let (ps, pp, info) = perturb(scene, &p, s, derive_seed(seed, "cli.perturb"))?;
            Ok((ps, pp, json!({ "scale": info.scale, "attempt": info.attempt })))
        }
    }
}

fn trace(scene: &SceneSystem, p: &Quadric, seeds: usize, seed: u64) -> Result<ThalwegCurve, CliError> {
    let s = default_seeds(scene, seeds, derive_seed(seed, "cli.thalweg"))?;
    Ok(trace_thalweg(scene, p, &s)?)
}

fn degenerate_hint(ctx: &mut Ctx, curve: &ThalwegCurve) {
    ctx.warnings.extend(curve.warnings.iter().cloned());
    if curve.warnings.iter().any(|w| w.starts_with("degenerate")) {
        ctx.warnings.push("rerun with --perturb 1e-2".into());
    }
}

#[allow(clippy::too_many_arguments)]
fn thalweg(
    path: &Path,
    scale: Option<f64>,
    seeds: usize,
    resolution: Option<f64>,
    svg: bool,
    common: &Common,
    threads: usize,
) -> Result<Outcome, CliError> {
    let mut ctx = Ctx::new("thalweg", common.seed, threads);
    let base = ctx.scene(path)?;
    let (scene, p, pert) = traced_system(&base, scale, common.seed)?;
    let curve = trace(&scene, &p, seeds, common.seed)?;
    degenerate_hint(&mut ctx, &curve);
    let r = scene.ball_radius();
    let mut dim = serde_json::Value::Null;
    if scene.dim() <= 4 {
        match dimension_check(&scene, &p, resolution.unwrap_or(0.05 * r), derive_seed(common.seed, "cli.dimension")) {
            Ok(d) => dim = serde_json::to_value(&d).expect("serializable"),
            Err(Error::Inconclusive(m)) => ctx.warnings.push(format!("dimension check inconclusive: {m}")),
            Err(e) => return Err(e.into()),
        }
    }
    let lengths = curve.lengths();
    let mut text = format!("{} branch(es), total length {:.6}\n", curve.branches.len(), curve.total_length());
    const LISTED: usize = 8;
    for (i, (b, l)) in curve.branches.iter().zip(&lengths).enumerate() {
        if i == LISTED {
            let points = curve.branches[i..].iter().filter(|b| b.len() == 1).count();
            text.push_str(&format!("  ... {} more ({points} isolated points)\n", curve.branches.len() - LISTED));
            break;
        }
        text.push_str(&format!(
            "  branch {i}: {} vertices, length {l:.6}{}\n",
            b.len(),
            if b.is_closed() { ", closed" } else { "" }
        ));
    }
    text.push_str(&format!("max eigen residual {:.3e} (tolerance {:.3e})\n", curve.max_residual, curve.tolerance));
    if let Some(s) = dim.get("slope").and_then(|v| v.as_f64()) {
        text.push_str(&format!("box-counting dimension ≈ {s:.3}\n"));
    }
    ctx.write(&common.out, "thalweg.csv", &polylines_csv(&curve.branches)?)?;
    let summary = json!({
        "branches": curve.branches.len(),
        "lengths": lengths,
        "closed": curve.branches.iter().map(Polyline::is_closed).collect::<Vec<_>>(),
        "total_length": curve.total_length(),
        "max_residual": curve.max_residual,
        "tolerance": curve.tolerance,
        "seeds_used": curve.seeds_used,
        "dimension": dim,
        "perturbation": pert,
    });
    ctx.write(&common.out, "thalweg.json", &json_bytes(&summary))?;
    if svg {
        ctx.write(&common.out, "thalweg.svg", polylines_svg(&curve.branches, r).as_bytes())?;
    }
    Ok(ctx.finish(summary, text, true))
}

fn length(
    input: &Path,
    samples: usize,
    radius: Option<f64>,
    scale: Option<f64>,
    common: &Common,
    threads: usize,
) -> Result<Outcome, CliError> {
    let mut ctx = Ctx::new("length", common.seed, threads);
    let seed = derive_seed(common.seed, "cli.length");
    let is_scene = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let (summary, text) = if is_scene {
        let base = ctx.scene(input)?;
        let (scene, p, _) = traced_system(&base, scale, common.seed)?;
        let curve = trace(&scene, &p, 32, common.seed)?;
        degenerate_hint(&mut ctx, &curve);
        let r = radius.unwrap_or(scene.ball_radius());
        let rep = length_vs_bound(&curve.branches, scene.codim(), scene.dim(), samples, r, seed)?;
        let text = format!(
            "thalweg length ≈ {:.6} ± {:.2e} ({} hyperplanes, R = {})\ntraced length {:.6}\nbound ν(n)·p_k(n) = 10^{:.2}: {}\n",
            rep.estimate.length,
            rep.estimate.stderr,
            rep.estimate.samples,
            rep.estimate.radius,
            curve.total_length(),
            rep.log10_bound,
            if rep.holds { "holds" } else { "VIOLATED" }
        );
        let mut v = serde_json::to_value(&rep).expect("serializable");
        v["traced_length"] = json!(curve.total_length());
        (v, text)
    } else {
        if scale.is_some() {
            return Err(CliError::Usage("--perturb applies to scene input only".into()));
        }
        let curves = load_polylines(input)?;
        let extent = curves.iter().map(Polyline::extent).fold(0.0, f64::max);
        let r = radius.unwrap_or_else(|| extent.ceil().max(1.0));
        let est = estimate_length(&curves, samples, r, seed)?;
        let text = format!(
            "length ≈ {:.6} ± {:.2e} ({} hyperplanes, R = {})\n",
            est.length, est.stderr, est.samples, est.radius
        );
        (serde_json::to_value(&est).expect("serializable"), text)
    };
    ctx.write(&common.out, "crofton.json", &json_bytes(&summary))?;
    let holds = summary.get("holds").and_then(|v| v.as_bool()).unwrap_or(true);
    Ok(ctx.finish(summary, text, holds))
}

fn solutions_csv(all: &[(usize, HyperplaneSolutions)]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header_done = false;
    for (plane, sols) in all {
        for s in &sols.solutions {
            if !header_done {
                let mut h = vec!["plane".to_string()];
                h.extend((1..=s.x.len()).map(|i| format!("x{i}")));
                h.push("lambda".into());
                h.extend((1..=s.p.mu.len()).map(|i| format!("mu{i}")));
                h.extend((1..=s.p.u.len()).map(|i| format!("u{i}")));
                h.push("residual".into());
                w.write_record(&h).map_err(Error::from)?;
                header_done = true;
            }
            let mut row = vec![plane.to_string()];
            row.extend(s.x.iter().map(|v| format!("{v:.17e}")));
            row.push(format!("{:.17e}", s.p.lambda));
            row.extend(s.p.mu.iter().chain(s.p.u.iter()).map(|v| format!("{v:.17e}")));
            row.push(format!("{:.3e}", s.residual));
            w.write_record(&row).map_err(Error::from)?;
        }
    }
    w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

fn solve(
    path: &Path,
    hyperplane: Option<&str>,
    random: Option<usize>,
    starts: usize,
    common: &Common,
    threads: usize,
) -> Result<Outcome, CliError> {
    let mut ctx = Ctx::new("solve", common.seed, threads);
    let scene = ctx.scene(path)?;
    scene.require_morse()?;
    let n = scene.dim();
    let mut planes = Vec::new();
    if let Some(s) = hyperplane {
        let v = parse_list(s, "--hyperplane")?;
        if v.len() != n + 1 {
            return Err(CliError::Usage(format!("--hyperplane: expected {} numbers (a1..a{n}, b), found {}", n + 1, v.len())));
        }
        planes.push(Hyperplane::new(Point::from_column_slice(&v[..n]), v[n])?);
    }
    let m = random.unwrap_or(if planes.is_empty() { 1 } else { 0 });
    let mut g = substream(common.seed, "cli.planes", 0);
    for _ in 0..m {
        planes.push(sample_hyperplane(n, scene.ball_radius(), &mut g));
    }
    let mut all = Vec::with_capacity(planes.len());
    let mut text = String::new();
    for (i, h) in planes.iter().enumerate() {
        let sols = count_hyperplane_solutions(&scene, h, starts, substream_seed(common.seed, i))?;
        text.push_str(&format!(
            "plane {i}: {} solution(s), bound p_k(n) = 10^{:.2} {}\n",
            sols.count,
            sols.bound_log10,
            if sols.within_bound { "holds" } else { "VIOLATED" }
        ));
        all.push((i, sols));
    }
    let passed = all.iter().all(|(_, s)| s.within_bound);
    ctx.write(&common.out, "solutions.csv", &solutions_csv(&all)?)?;
    let summary = json!({
        "planes": planes.iter().map(|h| json!({ "a": h.normal().as_slice(), "b": h.offset() })).collect::<Vec<_>>(),
        "counts": all.iter().map(|(_, s)| s.count).collect::<Vec<_>>(),
        "starts": starts,
        "bound_log10": all.first().map(|(_, s)| s.bound_log10),
        "within_bound": passed,
    });
    Ok(ctx.finish(summary, text, passed))
}

fn substream_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, &format!("cli.solve.{i}"))
}

fn bounds(k: usize, n: usize, threads: usize) -> Result<Outcome, CliError> {
    if n == 0 {
        return Err(CliError::Usage("n must be at least 1".into()));
    }
    let ctx = Ctx::new("bounds", 0, threads);
    let rep = bound_report(k, n);
    let mut text = format!("k = {k}, n = {n}, c(k) = {}, ν(n) = {:.6}\n", rep.c, rep.nu);
    text.push_str(&format!("{:<14} {:>12} {:>14}  {}\n", "bound", "log10", "value", "formula"));
    for row in &rep.rows {
        let log = row.log10.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        let val = row.value.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
        text.push_str(&format!("{:<14} {:>12} {:>14}  {}\n", row.name, log, val, row.note));
    }
    let summary = serde_json::to_value(&rep).expect("serializable");
    Ok(ctx.finish(summary, text, true))
}

/// `q_k(n)` for equations-only scenes, `t_k(n)` with all constraints counted otherwise.
fn diameter_bound(scene: &SceneSystem) -> (&'static str, f64) {
    let k = scene.constraints().len();
    if !scene.has_inequalities() || k == 0 {
        ("q", bound_q(scene.codim(), scene.dim()).log10())
    } else {
        ("t", bound_t(k, scene.dim()).log10())
    }
}

#[allow(clippy::too_many_arguments)]
fn diameter(
    path: &Path,
    method: Method,
    samples: usize,
    neighbors: usize,
    from: Option<&str>,
    to: Option<&str>,
    common: &Common,
    threads: usize,
) -> Result<Outcome, CliError> {
    let mut ctx = Ctx::new("diameter", common.seed, threads);
    let scene = ctx.scene(path)?;
    let (bname, blog) = diameter_bound(&scene);
    let seed = derive_seed(common.seed, "cli.diameter");
    let (summary, text, total) = match method {
        Method::Graph => {
            let g = graph_geodesic_diameter(&scene, samples, neighbors, seed)?;
            ctx.warnings.extend(g.warnings.iter().cloned());
            let mut text = format!("{} component(s) from {} samples, {} neighbors\n", g.components.len(), g.sample_count, g.neighbor_count);
            for c in &g.components {
                text.push_str(&format!(
                    "  component {}: {} points, diameter {:.6} between {} and {}\n",
                    c.component_id,
                    c.size,
                    c.diameter,
                    fmt_point(&c.witness_pair.0),
                    fmt_point(&c.witness_pair.1)
                ));
            }
            let total = g.total();
            text.push_str(&format!("sum of diameters {total:.6}\n"));
            let mut v = serde_json::to_value(&g).expect("serializable");
            v["total"] = json!(total);
            (v, text, total)
        }
        Method::Trajectory => {
            let p = scene.require_morse()?;
            let n = scene.dim();
            let (x, y) = match (from, to) {
                (Some(a), Some(b)) => (parse_point(a, n, "--from")?, parse_point(b, n, "--to")?),
                (None, None) => {
                    let g = graph_geodesic_diameter(&scene, samples.min(600), neighbors, seed)?;
                    let c = g
                        .components
                        .iter()
                        .max_by(|a, b| a.diameter.total_cmp(&b.diameter))
                        .ok_or_else(|| CliError::Analysis("no component found".into()))?;
                    c.witness_pair.clone()
                }
                _ => return Err(CliError::Usage("--from and --to must be given together".into())),
            };
            let opts = EstimateOptions {
                seed,
                ..EstimateOptions::default()
            };
            let est = trajectory_diameter_estimate(&scene, p, &x, &y, &opts)?;
            let text = format!(
                "distance estimate {:.6} between {} and {} (ascents {:.6} + {:.6}, gap {:.2e})\n",
                est.estimate,
                fmt_point(&x),
                fmt_point(&y),
                est.ascent_x.arc_length,
                est.ascent_y.arc_length,
                est.gap
            );
            let v = json!({
                "estimate": est.estimate,
                "from": x.as_slice(),
                "to": y.as_slice(),
                "ascent_lengths": [est.ascent_x.arc_length, est.ascent_y.arc_length],
                "gap": est.gap,
            });
            let paths = [est.ascent_x.polyline.clone(), est.ascent_y.polyline.clone()];
            ctx.write(&common.out, "trajectories.csv", &polylines_csv(&paths)?)?;
            (v, text, est.estimate)
        }
    };
    let holds = total == 0.0 || total.log10() <= blog;
    let mut text = text;
    text.push_str(&format!("bound {bname} = 10^{blog:.2}: {}\n", if holds { "holds" } else { "VIOLATED" }));
    let mut summary = summary;
    summary["bound"] = json!({ "name": bname, "log10": blog, "holds": holds });
    ctx.write(&common.out, "diameter.json", &json_bytes(&summary))?;
    Ok(ctx.finish(summary, text, holds))
}

fn lift(path: &Path, strict_eps: Option<f64>, witness: Option<&Path>, common: &Common, threads: usize) -> Result<Outcome, CliError> {
    let mut ctx = Ctx::new("lift", common.seed, threads);
    let mut scene = ctx.scene(path)?;
    let mut strict = serde_json::Value::Null;
    let mut text = String::new();
    if scene.has_strict() {
        let paths = witness.map(load_polylines).transpose()?;
        if paths.is_none() && strict_eps.is_none() {
            return Err(CliError::Usage("scene has strict inequalities: pass --strict-eps or --witness".into()));
        }
        let rep = strict_to_nonstrict(&scene, paths.as_deref(), strict_eps)?;
        text.push_str(&format!("replaced {} strict inequality(ies) with eps = {:.6e}\n", rep.replaced, rep.eps_strict));
        strict = serde_json::to_value(&rep).expect("serializable");
        scene = rep.scene;
    }
    let l = slack_lift(&scene)?;
    let reg = regularity_check(&l.lifted, 500, derive_seed(common.seed, "cli.lift.regularity"));
    text.push_str(&format!(
        "lifted to n = {}, k = {} (radius {}); variables {}\n",
        l.lifted.dim(),
        l.lifted.codim(),
        l.lifted.ball_radius(),
        l.variable_map.join(" ")
    ));
    for (i, (a, m)) in l.a.iter().zip(&l.max_abs).enumerate() {
        text.push_str(&format!("  y{i}: a = {a:.6e} (max |Q| = {m:.6e})\n"));
    }
    text.push_str(&format!(
        "lifted regularity: {} (min σ = {:.3e})\n",
        if reg.verdict { "PASS" } else { "FAIL" },
        reg.min_sigma_over_samples
    ));
    ctx.write(&common.out, "lifted.json", serialize_scene(&l.lifted).as_bytes())?;
    let summary = json!({
        "lift": l,
        "strict": strict,
        "regularity": reg,
    });
    Ok(ctx.finish(summary, text, reg.verdict))
}

fn thicken_cmd(path: &Path, eps: Option<&str>, common: &Common, threads: usize) -> Result<Outcome, CliError> {
    let mut ctx = Ctx::new("thicken", common.seed, threads);
    let scene = ctx.scene(path)?;
    let (eps, search) = match eps {
        Some(s) => (parse_list(s, "--eps")?, serde_json::Value::Null),
        None => {
            let s = regular_eps_search(&scene, derive_seed(common.seed, "cli.thicken"))?;
            (s.eps.clone(), serde_json::to_value(&s).expect("serializable"))
        }
    };
    let t = thicken(&scene, &eps)?;
    let list: Vec<String> = t.eps.iter().map(|e| format!("{e:.6e}")).collect();
    let text = format!(
        "eps = [{}]; {} constraint(s) after thickening\n",
        list.join(", "),
        t.result.constraints().len()
    );
    ctx.write(&common.out, "thickened.json", serialize_scene(&t.result).as_bytes())?;
    let summary = json!({ "eps": t.eps, "search": search });
    Ok(ctx.finish(summary, text, true))
}

fn sample(path: &Path, count: usize, common: &Common, threads: usize) -> Result<Outcome, CliError> {
    let mut ctx = Ctx::new("sample", common.seed, threads);
    let scene = ctx.scene(path)?;
    let pts = sample_points(&scene, count, derive_seed(common.seed, "cli.sample"))?;
    let mut buf = Vec::new();
    io::write_points(&mut buf, &pts)?;
    ctx.write(&common.out, "points.csv", &buf)?;
    let worst = pts.iter().map(|x| scene.equation_residual(x)).fold(0.0, f64::max);
    let text = format!("{} point(s), max equation residual {worst:.3e}\n", pts.len());
    Ok(ctx.finish(json!({ "count": pts.len(), "max_residual": worst }), text, true))
}

//! Command-line driver: recursion tables, fiber counts, invariance runs,
//! intersections and SVG renderings of curve images.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tropic::enumeration::{
    fiber, fiber_degree, invariance_check, rng_from_seed, sample_fiber, ConfigJson, FiberSolution, PointConfig, Request,
};
use tropic::kontsevich::{intersection_total, recursion_nd, tropical_intersection};
use tropic::linalg::{format_rational, int, Rational};
use tropic::moduli_maps::M4Ray;
use tropic::plane::{Degree, PlaneCurve, PlaneJson, Point};

#[derive(Parser)]
#[command(name = "tropic", version, about = "Counts of rational plane tropical curves")]
struct Cli {
    /// Worker threads for the fiber searches (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Print N_d for d = 1..dmax from the recursion.
    Nd {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        dmax: u32,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Enumerate a fiber of ev (or of π with --ray) and report its solutions.
    Count {
        #[arg(long, short)]
        d: usize,
        /// Sampling seed; falls back to TROPICAL_SEED.
        #[arg(long, env = "TROPICAL_SEED", conflicts_with = "points")]
        seed: Option<u64>,
        /// Point configuration file instead of a sampled one.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Sample a π target on this ray (A, B or C) at a large length.
        #[arg(long, conflicts_with = "points")]
        ray: Option<String>,
        /// Write each solution's curve to DIR/curve_<i>.json.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Check that the degree of π agrees across rays and lengths.
    Invariance {
        #[arg(long, short)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, env = "TROPICAL_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Intersect the images of two curves.
    Intersect { first: PathBuf, second: PathBuf },
    /// Draw the image of a curve as SVG.
    Render {
        curve: PathBuf,
        #[arg(long)]
        svg: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<String> {
    match command {
        Command::Nd { dmax, format } => Ok(nd(dmax as usize, format)),
        Command::Count { d, seed, points, ray, curves } => {
            count(d, seed, points.as_deref(), ray.as_deref(), curves.as_deref())
        }
        Command::Invariance { d, trials, seed } => invariance(d, trials, seed),
        Command::Intersect { first, second } => {
            let hits = tropical_intersection(&read_curve(&first)?, &read_curve(&second)?)?;
            let mut out = String::new();
            for h in &hits {
                writeln!(out, "{} mult {}", h.point, h.mult)?;
            }
            writeln!(out, "total = {}", intersection_total(&hits))?;
            Ok(out)
        }
        Command::Render { curve, svg } => {
            let c = read_curve(&curve)?;
            fs::write(&svg, render_svg(&c)).with_context(|| format!("writing {}", svg.display()))?;
            Ok(format!("wrote {}\n", svg.display()))
        }
    }
}

fn nd(dmax: usize, format: Format) -> String {
    let table = recursion_nd(dmax);
    match format {
        Format::Text => table.iter().map(|(d, n)| format!("{d}: {n}\n")).collect(),
        Format::Json => {
            let rows: Vec<Value> = table.iter().map(|(d, n)| json!({ "d": d, "n": n.to_string() })).collect();
            format!("{}\n", serde_json::to_string_pretty(&rows).expect("serializable"))
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_curve(path: &Path) -> Result<PlaneCurve> {
    let j: PlaneJson = read_json(path)?;
    Ok(PlaneCurve::from_json(&j)?)
}

fn count(
    d: usize,
    seed: Option<u64>,
    points: Option<&Path>,
    ray: Option<&str>,
    curves: Option<&Path>,
) -> Result<String> {
    if d == 0 {
        bail!("degree must be at least 1");
    }
    let degree = Degree::projective(d);
    let (cfg, sols) = match points {
        Some(path) => {
            let cfg = PointConfig::from_json(&read_json::<ConfigJson>(path)?)?;
            let sols = fiber(&degree, &cfg)?;
            (cfg, sols)
        }
        None => {
            let seed = seed.context("either --seed, TROPICAL_SEED or --points is required")?;
            let request = match ray {
                None => Request::Ev,
                Some(r) => match M4Ray::parse(r) {
                    Some(ray) if ray != M4Ray::D => Request::Pi { ray, scale: 1 },
                    _ => bail!("ray must be one of A, B, C"),
                },
            };
            sample_fiber(&degree, &request, &mut rng_from_seed(seed))?
        }
    };
    if let Some(dir) = curves {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, s) in sols.iter().enumerate() {
            let path = dir.join(format!("curve_{i}.json"));
            fs::write(&path, serde_json::to_string_pretty(&s.curve.to_json())?)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    let report = json!({
        "degree": d,
        "map": cfg.kind(),
        "config": cfg.to_json(),
        "solutions": sols.iter().map(solution_json).collect::<Vec<_>>(),
        "total": fiber_degree(&sols),
    });
    Ok(format!("{}\n", serde_json::to_string_pretty(&report)?))
}

fn solution_json(s: &FiberSolution) -> Value {
    let t = s.plane_type();
    json!({
        "vertices": t.graph().vertex_count(),
        "contracted_edges": t.contracted_bounded_edges(),
        "coords": s.coords.iter().map(format_rational).collect::<Vec<_>>(),
        "mult": s.mult,
        "curve": s.curve.to_json(),
    })
}

fn invariance(d: usize, trials: usize, seed: u64) -> Result<String> {
    if d < 2 {
        bail!("π needs degree at least 2");
    }
    let report = invariance_check(d, trials, seed)?;
    let mut out = String::new();
    for s in &report.samples {
        writeln!(out, "ray {} length {}: {}", s.ray, format_rational(&s.length), s.degree)?;
    }
    match report.common_degree() {
        Some(deg) => writeln!(out, "degree = {deg}, invariant: yes")?,
        None => bail!("{out}degrees differ across samples, invariant: no"),
    }
    Ok(out)
}

/// Six decimals; exact values are rounded only here.
fn fmt(r: &Rational) -> String {
    use num_traits::ToPrimitive;
    let v = r.to_f64().expect("finite coordinate");
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn render_svg(c: &PlaneCurve) -> String {
    let mut anchors = c.vertex_positions();
    let marks: Vec<Point> = (0..c.plane_type().marks().len()).map(|i| c.mark_position(i)).collect();
    anchors.extend(marks.iter().cloned());
    let lo_x = anchors.iter().map(|p| &p.x).min().expect("curve has a vertex").clone();
    let hi_x = anchors.iter().map(|p| &p.x).max().expect("curve has a vertex").clone();
    let lo_y = anchors.iter().map(|p| &p.y).min().expect("curve has a vertex").clone();
    let hi_y = anchors.iter().map(|p| &p.y).max().expect("curve has a vertex").clone();
    let spread = std::cmp::max(&hi_x - &lo_x, &hi_y - &lo_y);
    let ray_len = if spread > Rational::from_integer(0.into()) { spread.clone() / int(2) } else { int(1) };
    let pad = &ray_len + &ray_len / int(10);
    let (min_x, max_y) = (&lo_x - &pad, &hi_y + &pad);
    let width = &hi_x - &lo_x + &pad * int(2);
    let height = &hi_y - &lo_y + &pad * int(2);
    let stroke = std::cmp::max(width.clone(), height.clone()) / int(300);
    // SVG y grows downwards, so points are drawn at (x, -y)
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        fmt(&min_x),
        fmt(&-max_y),
        fmt(&width),
        fmt(&height)
    )
    .expect("string write");
    writeln!(out, r#"<g stroke="black" stroke-width="{}" stroke-linecap="round">"#, fmt(&stroke))
        .expect("string write");
    for s in c.image_segments() {
        let end = s.end().unwrap_or_else(|| s.start.offset(&ray_len, s.dir));
        let class = if s.length.is_some() { "edge" } else { "ray" };
        writeln!(
            out,
            r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            fmt(&s.start.x),
            fmt(&-&s.start.y),
            fmt(&end.x),
            fmt(&-&end.y)
        )
        .expect("string write");
    }
    writeln!(out, "</g>").expect("string write");
    let radius = &stroke * int(3);
    for (i, p) in marks.iter().enumerate() {
        writeln!(
            out,
            r#"<circle class="mark" data-mark="{}" cx="{}" cy="{}" r="{}" fill="red"/>"#,
            i + 1,
            fmt(&p.x),
            fmt(&-&p.y),
            fmt(&radius)
        )
        .expect("string write");
    }
    out.push_str("</svg>\n");
    out
}

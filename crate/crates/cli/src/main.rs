mod plan;
mod render;
mod resolve;
mod serve;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bbtime::connectivity::{build_mesh_table, connectivity_report};
use bbtime::format::{self, Container, MESH};
use bbtime::ingest::{
    add_taxi_edges, add_walk_edges, generate_synthetic, load_feeds, FeedConfig, GeneratorSpec, MultimodalConfig, TaxiRules,
};
use bbtime::network::{cluster_stations, Network};
use bbtime::overlay::{parse_feed, Overlay, OverlayHandle};
use bbtime::par::Parallelism;
use bbtime::precompute::{precompute, EstimatorConfig, PrecomputeConfig, TripletStore};
use bbtime::search::GeoGate;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::plan::{Loaded, NoRouteFound, PlanRequest};

const EXIT_INTERNAL: i32 = 1;
const EXIT_INPUT: i32 = 2;
const EXIT_NO_ROUTE: i32 = 3;

#[derive(Parser)]
#[command(name = "bbtime", version, about = "Timed branch-and-bound journey planner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a network file from GTFS feeds or a generator spec.
    Build(BuildArgs),
    /// Add triplet matrices and the mesh table to a network file.
    Precompute(PrecomputeArgs),
    /// Plan one trip.
    Plan(PlanArgs),
    /// Print a connectivity report.
    Diagnose(NetArg),
    /// Answer line-delimited JSON requests on a local TCP port.
    Serve(ServeArgs),
}

#[derive(Args)]
struct NetArg {
    /// Network file.
    #[arg(long, env = "BBTIME_NET")]
    net: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    out: PathBuf,
    /// GTFS directory, optionally with a UTC offset: `feed@+01:00`.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    gtfs: Vec<String>,
    /// First local service date of the GTFS horizon.
    #[arg(long, requires = "gtfs")]
    start_date: Option<NaiveDate>,
    #[arg(long, default_value_t = 14)]
    days: u32,
    /// Generator spec file (`key = value` lines).
    #[arg(long)]
    synthetic: Option<PathBuf>,
    /// Generator seed; overrides a `seed` key in the spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Walk edges between stations up to this far apart; 0 disables.
    #[arg(long, default_value_t = 1500.0)]
    walk_m: f64,
    /// Generate taxi edges between nearby airports and to isolated stations.
    #[arg(long)]
    taxi: bool,
    /// Merge stations within this radius into clusters.
    #[arg(long)]
    cluster_m: Option<f64>,
}

#[derive(Args)]
struct PrecomputeArgs {
    #[command(flatten)]
    net: NetArg,
    #[arg(long, default_value_t = bbtime::precompute::MAX_T)]
    tmax: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    samples: u32,
    /// Keep every candidate regardless of detour.
    #[arg(long)]
    no_geo: bool,
    /// Mesh cell size in degrees.
    #[arg(long, default_value_t = 0.05)]
    mesh_cell: f64,
    #[arg(long)]
    no_mesh: bool,
    #[arg(long, conflicts_with = "threads")]
    sequential: bool,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    net: NetArg,
    #[command(flatten)]
    req: PlanRequest,
    /// Print the machine-readable report instead of the listing.
    #[arg(long)]
    json: bool,
    /// Annotation feed applied before planning; repeatable.
    #[arg(long)]
    overlay: Vec<PathBuf>,
    /// Leave search time out of the listing footer.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    net: NetArg,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 7878)]
    port: u16,
    #[arg(long)]
    overlay: Vec<PathBuf>,
}

/// Maps an error to the process exit code.
pub(crate) fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.downcast_ref::<NoRouteFound>().is_some() {
            return EXIT_NO_ROUTE;
        }
        if let Some(err) = cause.downcast_ref::<bbtime::Error>() {
            return match err {
                bbtime::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_INPUT,
                bbtime::Error::Io(_) | bbtime::Error::Contract(_) => EXIT_INTERNAL,
                _ => EXIT_INPUT,
            };
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_INPUT;
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return EXIT_INPUT;
            }
        }
    }
    EXIT_INTERNAL
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<NoRouteFound>().is_none() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Build(a) => build(a),
        Cmd::Precompute(a) => precompute_cmd(a),
        Cmd::Plan(a) => plan_cmd(a),
        Cmd::Diagnose(a) => {
            let loaded = Loaded::read(&a.net)?;
            print!("{}", connectivity_report(&loaded.net, Parallelism::Auto));
            Ok(())
        }
        Cmd::Serve(a) => {
            let loaded = Loaded::read(&a.net.net)?;
            let overlay = load_overlay(&loaded.net, &a.overlay)?;
            serve::serve(loaded, OverlayHandle::new(overlay), a.port)
        }
    }
}

/// `+01:00`, `-0500` or plain seconds.
fn parse_offset(s: &str) -> Result<i32> {
    if let Ok(v) = s.parse::<i32>() {
        return Ok(v);
    }
    let (sign, rest) = match s.as_bytes().first() {
        Some(b'+') => (1, &s[1..]),
        Some(b'-') => (-1, &s[1..]),
        _ => bail!(UsageError(format!("bad UTC offset {s:?}"))),
    };
    let digits: String = rest.chars().filter(|c| *c != ':').collect();
    if digits.len() != 4 || !digits.chars().all(|c| c.is_ascii_digit()) {
        bail!(UsageError(format!("bad UTC offset {s:?}")));
    }
    let h: i32 = digits[..2].parse()?;
    let m: i32 = digits[2..].parse()?;
    Ok(sign * (h * 3600 + m * 60))
}

fn build(a: BuildArgs) -> Result<()> {
    let mut net: Network = if let Some(spec_path) = &a.synthetic {
        let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
        let (spec, spec_seed) = GeneratorSpec::parse(&text)?;
        generate_synthetic(&spec, a.seed.or(spec_seed).unwrap_or(0))?
    } else {
        let Some(start) = a.start_date else {
            bail!(UsageError("--start-date is required with --gtfs".into()));
        };
        let mut configs = Vec::new();
        for g in &a.gtfs {
            let (path, offset) = match g.rsplit_once('@') {
                Some((p, o)) => (p, parse_offset(o)?),
                None => (g.as_str(), 0),
            };
            let mut c = FeedConfig::new(path, start, offset);
            c.service_horizon_days = a.days;
            configs.push(c);
        }
        let (net, reports) = load_feeds(&configs)?;
        for r in &reports {
            println!(
                "feed {}: {} stations, {} hops, {} events",
                r.feed.display(),
                r.stations,
                r.hops,
                r.events
            );
            if !r.record_errors.is_empty() {
                eprintln!("feed {}: {} records skipped", r.feed.display(), r.record_errors.len());
                for e in r.record_errors.iter().take(10) {
                    eprintln!("  {e}");
                }
            }
        }
        net
    };

    let mut mm = MultimodalConfig::default();
    if a.walk_m > 0.0 {
        mm.max_walk_pair_m = a.walk_m;
        net = add_walk_edges(net, &mm)?;
    }
    if a.taxi {
        mm.generated_taxi = Some(TaxiRules::default());
        net = add_taxi_edges(net, &mm)?;
    }
    if let Some(r) = a.cluster_m {
        net = cluster_stations(net, r)?;
    }

    let mut c = Container::new();
    format::write_network(&mut c, &net);
    c.write(&a.out)?;
    println!(
        "{} stations, {} hops, {} events -> {}",
        net.station_count(),
        net.hops().len(),
        net.event_count(),
        a.out.display()
    );
    Ok(())
}

fn precompute_cmd(a: PrecomputeArgs) -> Result<()> {
    let path = &a.net.net;
    let mut c = Container::read(path).with_context(|| format!("reading {}", path.display()))?;
    let net = format::read_network(&c)?;
    let parallelism = if a.sequential {
        Parallelism::Sequential
    } else if let Some(n) = a.threads {
        Parallelism::Parallel(n)
    } else {
        Parallelism::Auto
    };
    let config = PrecomputeConfig {
        estimator: EstimatorConfig {
            sample_count: a.samples,
            seed: a.seed,
            ..EstimatorConfig::default()
        },
        geo_gate: (!a.no_geo).then(GeoGate::default),
        max_t: a.tmax,
        parallelism,
    };
    let (store, report) = precompute(&net, &config)?;
    store.write_to(&mut c);
    print!("{report}");
    if a.no_mesh {
        c.remove(MESH);
    } else {
        if a.mesh_cell.is_nan() || a.mesh_cell <= 0.0 {
            bail!(UsageError("--mesh-cell must be positive".into()));
        }
        let mesh = build_mesh_table(&net, a.mesh_cell, parallelism);
        println!("mesh: {} cell pairs at {} degrees", mesh.len(), a.mesh_cell);
        c.set(MESH, mesh.to_bytes());
    }
    c.write(path)?;
    Ok(())
}

fn load_overlay(net: &Network, files: &[PathBuf]) -> Result<Overlay> {
    let mut o = Overlay::new();
    for f in files {
        let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        for a in parse_feed(&f.display().to_string(), &text)? {
            o.apply(net, a)?;
        }
    }
    Ok(o)
}

fn plan_cmd(a: PlanArgs) -> Result<()> {
    let loaded = Loaded::read(&a.net.net)?;
    warn_unprecomputed(&a.net.net, &loaded.store);
    let overlay = load_overlay(&loaded.net, &a.overlay)?;
    let report = plan::run(&loaded, &overlay, &a.req)?;
    let mut out = std::io::stdout().lock();
    if a.json {
        writeln!(out, "{}", serde_json::to_string(&report)?)?;
    } else {
        write!(out, "{}", render::render(&loaded.net, &report, !a.no_timing))?;
    }
    out.flush()?;
    if report.itinerary.is_none() {
        return Err(NoRouteFound.into());
    }
    Ok(())
}

fn warn_unprecomputed(path: &Path, store: &TripletStore) {
    if store.max_t().is_none() {
        eprintln!("note: {} has no triplets; run `bbtime precompute` for faster queries", path.display());
    }
}

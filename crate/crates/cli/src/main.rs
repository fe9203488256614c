//! `hilbertnet`: mappings, exact and variational ground states, distance
//! statistics and grid experiments from the command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 some grid points failed,
//! 3 internal error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hilbertnet::experiment::{
    parallel_schedule, run_point, Engine, ExperimentKind, ExperimentSpec, GridPoint, RESULTS_FILE,
};
use hilbertnet::model::distance_histogram;
use hilbertnet::{ed_ground_state, map_to_chain, Boundary, CurveKind, Error, Geometry, IsingModel2D, SiteMapping};
use serde_json::{json, Value};

/// Overrides the default output directory when `--out` is not given.
const OUT_ENV: &str = "HILBERTNET_OUT";
const DEFAULT_EXPERIMENT_OUT: &str = "hilbertnet-out";

#[derive(Parser)]
#[command(name = "hilbertnet", version, about = "2D transverse-field Ising ground states on space-filling-curve chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print or write the chain ordering of the lattice.
    Map(Common),
    /// Exact ground state by Lanczos (at most 20 sites).
    Ed(Common),
    /// Two-site DMRG on a matrix product state.
    Dmrg(Solver),
    /// Variational tree tensor network.
    Ttn(Solver),
    /// Chain and tree distance statistics of the mapped couplings.
    Dist(Common),
    /// Run a parameter grid; list flags take comma-separated values.
    Experiment(ExperimentArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Linear lattice size.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    n: Vec<usize>,
    /// Transverse field strength.
    #[arg(long, value_delimiter = ',', default_value = "2.9")]
    lambda: Vec<f64>,
    /// Bond dimension.
    #[arg(long, value_delimiter = ',', default_value = "20")]
    m: Vec<usize>,
    /// hilbert or snake.
    #[arg(long, value_delimiter = ',', default_value = "hilbert")]
    mapping: Vec<String>,
    /// obc or pbc.
    #[arg(long, value_delimiter = ',', default_value = "obc")]
    boundary: Vec<String>,
    #[arg(long, default_value_t = 1234)]
    seed: u64,
    /// Output directory; falls back to $HILBERTNET_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON experiment spec whose fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct Solver {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Keep a resumable checkpoint in the output directory.
    #[arg(long)]
    checkpoint: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    /// One of energy_vs_m, delta_e_vs_n, delta_e_vs_lambda,
    /// magnetization_vs_lambda, distance_dist, local_z_diff, map_dump, ed_reference.
    #[arg(long)]
    kind: Option<String>,
    /// ed, mps or ttn.
    #[arg(long, value_delimiter = ',', default_value = "mps")]
    engine: Vec<String>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Input(String),
    Partial(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) | Error::NotConverged { .. } | Error::NotSymmetric(_) | Error::DimensionMismatch(_) => {
                Failure::Internal(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(Failure::Internal(msg))
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Map(c) => map(&c),
        Command::Ed(c) => ed(&c),
        Command::Dmrg(s) => solve(&s, Engine::Mps),
        Command::Ttn(s) => solve(&s, Engine::Ttn),
        Command::Dist(c) => dist(&c),
        Command::Experiment(e) => experiment(&e),
    }
}

fn out_dir(flag: &Option<PathBuf>) -> Option<PathBuf> {
    flag.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
}

fn parse_list<T: std::str::FromStr<Err = Error>>(values: &[String]) -> Result<Vec<T>, Failure> {
    values.iter().map(|v| v.parse::<T>().map_err(Failure::from)).collect()
}

/// Builds a spec from flags, then lets the config file replace any field.
/// Scalars in the config are accepted where a grid is expected.
fn build_spec(c: &Common, kind: ExperimentKind, engines: Vec<Engine>, max_sweeps: Option<usize>) -> Result<ExperimentSpec, Failure> {
    let mut spec = ExperimentSpec {
        kind,
        n: c.n.clone(),
        lambda: c.lambda.clone(),
        m: c.m.clone(),
        mapping: parse_list::<CurveKind>(&c.mapping)?,
        engine: engines,
        boundary: parse_list::<Boundary>(&c.boundary)?,
        out_dir: out_dir(&c.out).unwrap_or_else(|| PathBuf::from(DEFAULT_EXPERIMENT_OUT)),
        seed: c.seed,
        ..ExperimentSpec::default()
    };
    if let Some(s) = max_sweeps {
        spec.solver.max_sweeps = s;
    }
    if let Some(path) = &c.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        let overrides: Value = serde_json::from_str(&text)?;
        let Value::Object(overrides) = overrides else {
            return Err(Failure::Input("config must be a JSON object".into()));
        };
        let mut merged = serde_json::to_value(&spec)?;
        let grids = ["n", "lambda", "m", "mapping", "engine", "boundary"];
        for (key, value) in overrides {
            let value = match value {
                Value::Array(_) => value,
                v if grids.contains(&key.as_str()) => Value::Array(vec![v]),
                v => v,
            };
            merged[key] = value;
        }
        spec = serde_json::from_value(merged)?;
    }
    Ok(spec)
}

fn single<T: Copy>(name: &str, values: &[T]) -> Result<T, Failure> {
    match values {
        [v] => Ok(*v),
        _ => Err(Failure::Input(format!("--{name} takes exactly one value for this command"))),
    }
}

fn single_point(spec: &ExperimentSpec, engine: Engine) -> Result<GridPoint, Failure> {
    Ok(GridPoint {
        n: single("n", &spec.n)?,
        lambda: single("lambda", &spec.lambda)?,
        m: if engine == Engine::Ed { 0 } else { single("m", &spec.m)? },
        mapping: single("mapping", &spec.mapping)?,
        engine,
        boundary: single("boundary", &spec.boundary)?,
    })
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, body: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), body)?;
    Ok(())
}

fn map(c: &Common) -> Result<(), Failure> {
    let spec = build_spec(c, ExperimentKind::MapDump, vec![Engine::Ed], None)?;
    let mapping = SiteMapping::new(single("mapping", &spec.mapping)?, single("n", &spec.n)?)?;
    let mut body = Vec::new();
    mapping.write_text(&mut body)?;
    match out_dir(&c.out) {
        Some(dir) => {
            let name = format!("mapping_{}_n{}.txt", mapping.kind(), mapping.n());
            write_file(&dir, &name, &body)?;
            write_file(&dir, &name.replace(".txt", ".json"), &serde_json::to_vec_pretty(&mapping.to_json())?)?;
        }
        None => std::io::stdout().lock().write_all(&body)?,
    }
    Ok(())
}

fn ed(c: &Common) -> Result<(), Failure> {
    let spec = build_spec(c, ExperimentKind::EdReference, vec![Engine::Ed], None)?;
    let p = single_point(&spec, Engine::Ed)?;
    let mapping = SiteMapping::new(p.mapping, p.n)?;
    let terms = map_to_chain(&IsingModel2D::new(p.n, p.lambda, p.boundary)?, &mapping)?;
    let gs = ed_ground_state(&terms, 1e-10)?;
    let report = gs.to_report(p.n, p.lambda, p.boundary, p.mapping);
    if let Some(dir) = out_dir(&c.out) {
        write_file(&dir, "ed.json", &serde_json::to_vec_pretty(&report)?)?;
    }
    print_json(&report)
}

fn solve(s: &Solver, engine: Engine) -> Result<(), Failure> {
    let kind = ExperimentKind::EnergyVsM;
    let mut spec = build_spec(&s.common, kind, vec![engine], s.max_sweeps)?;
    let dir = out_dir(&s.common.out);
    spec.checkpoints = s.checkpoint;
    if s.checkpoint && dir.is_none() {
        return Err(Failure::Input("--checkpoint needs --out or $HILBERTNET_OUT".into()));
    }
    // Without an output directory the trace goes to a scratch dir and is dropped.
    let scratch = std::env::temp_dir().join(format!("hilbertnet-{}", std::process::id()));
    spec.out_dir = dir.clone().unwrap_or_else(|| scratch.clone());
    let point = single_point(&spec, engine)?;
    let result = run_point(&spec, &point);
    if dir.is_none() {
        let _ = fs::remove_dir_all(&scratch);
    }
    let mut result = result?;
    match &dir {
        Some(d) => write_file(d, &format!("{engine}.json"), &serde_json::to_vec_pretty(&result)?)?,
        None => result.trace_file = None,
    }
    print_json(&result)
}

fn dist(c: &Common) -> Result<(), Failure> {
    let spec = build_spec(c, ExperimentKind::DistanceDist, vec![Engine::Ed], None)?;
    let n = single("n", &spec.n)?;
    let kind = single("mapping", &spec.mapping)?;
    let boundary = single("boundary", &spec.boundary)?;
    let mapping = SiteMapping::new(kind, n)?;
    let terms = map_to_chain(&IsingModel2D::new(n, 0.0, boundary)?, &mapping)?;
    let dir = out_dir(&c.out);
    let mut summary = Vec::new();
    for geometry in [Geometry::Chain, Geometry::Tree] {
        let hist = match distance_histogram(&terms, geometry) {
            Ok(h) => h,
            // Tree distances need a power-of-two site count.
            Err(e) if geometry == Geometry::Tree => {
                summary.push(json!({ "geometry": geometry, "error": e.to_string() }));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(d) = &dir {
            let mut body = Vec::new();
            hist.write_csv(&mut body)?;
            write_file(d, &format!("distance_{geometry}_{kind}_{boundary}_n{n}.csv"), &body)?;
        }
        summary.push(json!({
            "geometry": geometry,
            "mean": hist.mean(),
            "max": hist.max_distance(),
            "tail_mass": hist.tail_mass(0.9),
            "counts": hist.counts.iter().collect::<Vec<_>>(),
        }));
    }
    print_json(&json!({ "n": n, "mapping": kind, "boundary": boundary, "distances": summary }))
}

fn experiment(e: &ExperimentArgs) -> Result<(), Failure> {
    let kind = match &e.kind {
        Some(k) => k.parse::<ExperimentKind>()?,
        None if e.common.config.is_some() => ExperimentKind::EdReference,
        None => return Err(Failure::Input("--kind is required without --config".into())),
    };
    let spec = build_spec(&e.common, kind, parse_list::<Engine>(&e.engine)?, e.max_sweeps)?;
    if e.kind.is_none() && !config_sets_kind(e.common.config.as_deref())? {
        return Err(Failure::Input("the config does not name an experiment kind".into()));
    }
    spec.validate()?;
    let workers = e.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = parallel_schedule(&spec, workers)?;
    eprintln!(
        "{}: {} results, {} failures, index at {}",
        spec.kind,
        report.results.len(),
        report.failures.len(),
        spec.out_dir.join(RESULTS_FILE).display()
    );
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(format!("{} grid points failed", report.failures.len())))
    }
}

fn config_sets_kind(path: Option<&Path>) -> Result<bool, Failure> {
    let Some(path) = path else { return Ok(false) };
    let value: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(value.get("kind").is_some())
}

//! Grid experiments: one solver run per grid point, plot-ready CSV series
//! named after the figure they reproduce, and a merged `results.json`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ed::{ed_ground_state, MAX_ED_SITES};
use crate::error::{Error, Result};
use crate::model::{distance_histogram, map_to_chain, Boundary, Geometry, IsingModel2D, TermList1D};
use crate::mps::{dmrg_ground_state, DmrgConfig};
use crate::observables::{
    energy_difference, local_z_map, magnetization_difference, signed_staggered_magnetization,
    staggered_magnetization, MagnetizationMap, SpinExpectations,
};
use crate::spacefill::{CurveKind, SiteMapping};
use crate::trace::ConvergenceTrace;
use crate::ttn::{ttn_ground_state, TtnConfig};
use crate::fmt_f64;

pub const RESULTS_FILE: &str = "results.json";
const ED_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Ed,
    Mps,
    Ttn,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Ed => "ed",
            Engine::Mps => "mps",
            Engine::Ttn => "ttn",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ed" => Ok(Engine::Ed),
            "mps" | "dmrg" => Ok(Engine::Mps),
            "ttn" => Ok(Engine::Ttn),
            other => Err(Error::InvalidParameter(format!("unknown engine '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EnergyVsM,
    DeltaEVsN,
    DeltaEVsLambda,
    MagnetizationVsLambda,
    DistanceDist,
    LocalZDiff,
    MapDump,
    EdReference,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::EnergyVsM,
        ExperimentKind::DeltaEVsN,
        ExperimentKind::DeltaEVsLambda,
        ExperimentKind::MagnetizationVsLambda,
        ExperimentKind::DistanceDist,
        ExperimentKind::LocalZDiff,
        ExperimentKind::MapDump,
        ExperimentKind::EdReference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EnergyVsM => "energy_vs_m",
            ExperimentKind::DeltaEVsN => "delta_e_vs_n",
            ExperimentKind::DeltaEVsLambda => "delta_e_vs_lambda",
            ExperimentKind::MagnetizationVsLambda => "magnetization_vs_lambda",
            ExperimentKind::DistanceDist => "distance_dist",
            ExperimentKind::LocalZDiff => "local_z_diff",
            ExperimentKind::MapDump => "map_dump",
            ExperimentKind::EdReference => "ed_reference",
        }
    }

    /// Kinds that compare the two mappings always run both, whatever the
    /// mapping grid says.
    fn pairs_mappings(self) -> bool {
        matches!(
            self,
            ExperimentKind::DeltaEVsN | ExperimentKind::DeltaEVsLambda | ExperimentKind::LocalZDiff
        )
    }

    fn runs_solvers(self) -> bool {
        !matches!(self, ExperimentKind::DistanceDist | ExperimentKind::MapDump)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment '{s}'")))
    }
}

/// Sweep controls shared by both variational engines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_sweeps: usize,
    pub energy_tol: f64,
    pub lanczos_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = DmrgConfig::default();
        Self {
            max_sweeps: d.max_sweeps,
            energy_tol: d.energy_tol,
            lanczos_tol: d.lanczos_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub n: Vec<usize>,
    pub lambda: Vec<f64>,
    pub m: Vec<usize>,
    pub mapping: Vec<CurveKind>,
    pub engine: Vec<Engine>,
    pub boundary: Vec<Boundary>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub solver: SolverSettings,
    /// Keep a resumable checkpoint per grid point under `out_dir/checkpoints`.
    pub checkpoints: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::EdReference,
            n: vec![4],
            lambda: vec![2.9],
            m: vec![20],
            mapping: vec![CurveKind::Hilbert, CurveKind::Snake],
            engine: vec![Engine::Mps],
            boundary: vec![Boundary::Open],
            out_dir: PathBuf::from("out"),
            seed: 1234,
            solver: SolverSettings::default(),
            checkpoints: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("n", self.n.is_empty()),
            ("lambda", self.lambda.is_empty()),
            ("m", self.m.is_empty()),
            ("mapping", self.mapping.is_empty()),
            ("engine", self.engine.is_empty()),
            ("boundary", self.boundary.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidParameter(format!("grid '{name}' is empty")));
        }
        self.validate_values()
    }

    fn validate_values(&self) -> Result<()> {
        let hilbert = self.kind.pairs_mappings() || self.mapping.contains(&CurveKind::Hilbert);
        for &n in &self.n {
            if n < 2 {
                return Err(Error::InvalidSize(format!("lattice size {n} < 2")));
            }
            if hilbert && !n.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(n));
            }
        }
        if let Some(l) = self.lambda.iter().find(|l| !l.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda {l} is not finite")));
        }
        if self.m.contains(&0) {
            return Err(Error::InvalidParameter("bond dimension must be >= 1".into()));
        }
        let s = &self.solver;
        if s.max_sweeps == 0 || !(s.energy_tol > 0.0) || !(s.lanczos_tol > 0.0) {
            return Err(Error::InvalidParameter("solver settings must be positive".into()));
        }
        Ok(())
    }

    /// Solver grid points in a fixed nested order: n, boundary, engine, m, lambda, mapping.
    pub fn points(&self) -> Vec<GridPoint> {
        if !self.kind.runs_solvers() {
            return Vec::new();
        }
        let mappings = if self.kind.pairs_mappings() {
            vec![CurveKind::Hilbert, CurveKind::Snake]
        } else {
            self.mapping.clone()
        };
        let engines = if self.kind == ExperimentKind::EdReference { vec![Engine::Ed] } else { self.engine.clone() };
        let mut out = Vec::new();
        for &n in &self.n {
            for &boundary in &self.boundary {
                for &engine in &engines {
                    // ED has no bond dimension
                    let ms = if engine == Engine::Ed { vec![0] } else { self.m.clone() };
                    for &m in &ms {
                        for &lambda in &self.lambda {
                            for &mapping in &mappings {
                                out.push(GridPoint { n, lambda, m, mapping, engine, boundary });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn point_hash(&self, p: &GridPoint) -> String {
        #[derive(Serialize)]
        struct HashInput<'a> {
            point: &'a GridPoint,
            seed: u64,
            solver: &'a SolverSettings,
        }
        let bytes = serde_json::to_vec(&HashInput { point: p, seed: self.seed, solver: &self.solver })
            .expect("grid points serialize");
        format!("{:x}", Sha256::digest(bytes))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub lambda: f64,
    /// Bond dimension; 0 for exact diagonalization.
    pub m: usize,
    pub mapping: CurveKind,
    pub engine: Engine,
    pub boundary: Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub n: usize,
    pub lambda: f64,
    pub boundary: Boundary,
    pub mapping: CurveKind,
    pub engine: Engine,
    pub m: usize,
    pub energy: f64,
    pub energy_density: f64,
    pub converged: bool,
    pub sweeps: usize,
    /// Not serialized, so that reruns produce identical JSON; see `timings.csv`.
    #[serde(skip)]
    pub wall_time_s: f64,
    pub config_hash: String,
    /// Relative path of the per-sweep trace, if the engine sweeps.
    pub trace_file: Option<String>,
    pub staggered_magnetization: f64,
    pub signed_staggered_magnetization: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub point: GridPoint,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub n: usize,
    pub mapping: CurveKind,
    pub boundary: Boundary,
    pub geometry: Geometry,
    pub mean: f64,
    pub max: usize,
    /// Mass in the top decile of distances.
    pub tail_mass: f64,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalZSummary {
    pub n: usize,
    pub lambda: f64,
    pub m: usize,
    pub engine: Engine,
    pub boundary: Boundary,
    pub bulk_mean: f64,
    pub boundary_mean: f64,
    pub file: String,
}

/// Contents of `results.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub results: Vec<RunResult>,
    pub failures: Vec<PointFailure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distances: Vec<DistanceSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub local_z: Vec<LocalZSummary>,
    /// Every data file written, relative to the output directory.
    pub files: Vec<String>,
}

impl ExperimentReport {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(dir.join(RESULTS_FILE))?)?)
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    parallel_schedule(spec, rayon::current_num_threads())
}

/// Runs the grid on a pool of `workers` threads. Results are kept in grid
/// order, so the report does not depend on the worker count. An empty grid
/// gives an empty report.
pub fn parallel_schedule(spec: &ExperimentSpec, workers: usize) -> Result<ExperimentReport> {
    if workers == 0 {
        return Err(Error::InvalidParameter("workers must be >= 1".into()));
    }
    spec.validate_values()?;
    fs::create_dir_all(&spec.out_dir)?;
    let mut report = ExperimentReport {
        kind: spec.kind,
        seed: spec.seed,
        results: Vec::new(),
        failures: Vec::new(),
        distances: Vec::new(),
        local_z: Vec::new(),
        files: Vec::new(),
    };
    let mut files = Files::new(&spec.out_dir);
    match spec.kind {
        ExperimentKind::MapDump => map_dump(spec, &mut files)?,
        ExperimentKind::DistanceDist => {
            report.distances = distance_dist(spec, &mut files, &mut report.failures)?;
        }
        _ => {
            let points = spec.points();
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
            let outcomes: Vec<Result<PointOutcome>> =
                pool.install(|| points.par_iter().map(|p| solve_point(spec, p)).collect());
            let mut maps = Vec::new();
            for (p, outcome) in points.iter().zip(outcomes) {
                match outcome {
                    Ok(o) => {
                        if let Some(name) = &o.result.trace_file {
                            files.record(name);
                        }
                        maps.push((o.result.clone(), o.map));
                        report.results.push(o.result);
                    }
                    Err(e) => report.failures.push(PointFailure { point: *p, error: e.to_string() }),
                }
            }
            write_timings(&report.results, &mut files)?;
            report.local_z = write_series(spec, &report.results, &maps, &mut files)?;
        }
    }
    report.files = files.written;
    let tmp = spec.out_dir.join(format!("{RESULTS_FILE}.tmp"));
    fs::write(&tmp, serde_json::to_vec_pretty(&report)?)?;
    fs::rename(tmp, spec.out_dir.join(RESULTS_FILE))?;
    Ok(report)
}

struct Files {
    dir: PathBuf,
    written: Vec<String>,
}

impl Files {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), written: Vec::new() }
    }

    fn record(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    fn write(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, body)?;
        self.record(name);
        Ok(())
    }
}

struct PointOutcome {
    result: RunResult,
    map: MagnetizationMap,
}

fn chain_terms(p: &GridPoint) -> Result<(SiteMapping, TermList1D)> {
    let mapping = SiteMapping::new(p.mapping, p.n)?;
    let model = IsingModel2D::new(p.n, p.lambda, p.boundary)?;
    let terms = map_to_chain(&model, &mapping)?;
    Ok((mapping, terms))
}

/// Solves one grid point with the spec's seed and solver settings. The
/// sweep trace, if any, goes to `out_dir/traces`.
pub fn run_point(spec: &ExperimentSpec, p: &GridPoint) -> Result<RunResult> {
    spec.validate_values()?;
    Ok(solve_point(spec, p)?.result)
}

fn solve_point(spec: &ExperimentSpec, p: &GridPoint) -> Result<PointOutcome> {
    let (mapping, terms) = chain_terms(p)?;
    let config_hash = spec.point_hash(p);
    let checkpoint = spec
        .checkpoints
        .then(|| spec.out_dir.join("checkpoints").join(format!("{config_hash}.json")));
    if let Some(c) = &checkpoint {
        fs::create_dir_all(c.parent().expect("checkpoint has a parent"))?;
    }
    let start = Instant::now();
    let s = &spec.solver;
    let (energy, converged, trace, observed) = match p.engine {
        Engine::Ed => {
            if terms.num_sites() > MAX_ED_SITES {
                return Err(Error::InvalidSize(format!("n = {} is too large for exact diagonalization", p.n)));
            }
            let gs = ed_ground_state(&terms, ED_TOL)?;
            (gs.energy, true, None, observe(&gs, &mapping)?)
        }
        Engine::Mps => {
            let config = DmrgConfig {
                max_bond: p.m,
                max_sweeps: s.max_sweeps,
                energy_tol: s.energy_tol,
                lanczos_tol: s.lanczos_tol,
                seed: spec.seed,
                checkpoint,
                config_hash: config_hash.clone(),
                ..DmrgConfig::default()
            };
            let out = dmrg_ground_state(&terms, &config)?;
            let observed = observe(&out.state, &mapping)?;
            (out.energy, out.trace.converged, Some(out.trace), observed)
        }
        Engine::Ttn => {
            let config = TtnConfig {
                max_bond: p.m,
                max_sweeps: s.max_sweeps,
                energy_tol: s.energy_tol,
                lanczos_tol: s.lanczos_tol,
                seed: spec.seed,
                checkpoint,
                config_hash: config_hash.clone(),
                ..TtnConfig::default()
            };
            let out = ttn_ground_state(&terms, &config)?;
            let observed = observe(&out.state, &mapping)?;
            (out.energy, out.trace.converged, Some(out.trace), observed)
        }
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    let sweeps = trace.as_ref().map_or(0, ConvergenceTrace::sweeps);
    let trace_file = match trace {
        Some(t) => {
            let name = format!("traces/{config_hash}.json");
            let path = spec.out_dir.join(&name);
            fs::create_dir_all(path.parent().expect("trace has a parent"))?;
            fs::write(path, serde_json::to_vec_pretty(&t.without_timing())?)?;
            Some(name)
        }
        None => None,
    };
    let (stag, signed, map) = observed;
    Ok(PointOutcome {
        result: RunResult {
            n: p.n,
            lambda: p.lambda,
            boundary: p.boundary,
            mapping: p.mapping,
            engine: p.engine,
            m: p.m,
            energy,
            energy_density: energy / terms.num_sites() as f64,
            converged,
            sweeps,
            wall_time_s,
            config_hash,
            trace_file,
            staggered_magnetization: stag,
            signed_staggered_magnetization: signed,
        },
        map,
    })
}

fn observe(state: &impl SpinExpectations, mapping: &SiteMapping) -> Result<(f64, f64, MagnetizationMap)> {
    Ok((
        staggered_magnetization(state, mapping)?,
        signed_staggered_magnetization(state, mapping)?,
        local_z_map(state, mapping)?,
    ))
}

fn csv(header: &str, rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{header}").expect("writing to a Vec");
    for r in rows {
        writeln!(out, "{}", r.join(",")).expect("writing to a Vec");
    }
    out
}

fn write_timings(results: &[RunResult], files: &mut Files) -> Result<()> {
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| vec![r.config_hash.clone(), fmt_f64(r.wall_time_s)])
        .collect();
    files.write("timings.csv", &csv("config_hash,wall_time_s", &rows))
}

/// Key shared by the two mappings of a compared pair.
type PairKey = (usize, Boundary, Engine, usize, u64);

fn pair_key(r: &RunResult) -> PairKey {
    (r.n, r.boundary, r.engine, r.m, r.lambda.to_bits())
}

fn mapping_pairs<'a>(results: &'a [RunResult]) -> Vec<(&'a RunResult, &'a RunResult)> {
    let mut hilbert: BTreeMap<PairKey, &RunResult> = BTreeMap::new();
    for r in results.iter().filter(|r| r.mapping == CurveKind::Hilbert) {
        hilbert.insert(pair_key(r), r);
    }
    results
        .iter()
        .filter(|r| r.mapping == CurveKind::Snake)
        .filter_map(|s| hilbert.get(&pair_key(s)).map(|h| (*h, s)))
        .collect()
}

fn write_series(
    spec: &ExperimentSpec,
    results: &[RunResult],
    maps: &[(RunResult, MagnetizationMap)],
    files: &mut Files,
) -> Result<Vec<LocalZSummary>> {
    let mut summaries = Vec::new();
    match spec.kind {
        ExperimentKind::EnergyVsM => {
            let mut groups: BTreeMap<(Engine, usize), Vec<Vec<String>>> = BTreeMap::new();
            for r in results {
                groups.entry((r.engine, r.n)).or_default().push(vec![
                    r.boundary.to_string(),
                    fmt_f64(r.lambda),
                    r.m.to_string(),
                    r.mapping.to_string(),
                    fmt_f64(r.energy_density),
                    r.converged.to_string(),
                ]);
            }
            for ((engine, n), rows) in groups {
                let fig = match engine {
                    Engine::Mps => "fig3",
                    Engine::Ttn => "fig4",
                    Engine::Ed => "ed",
                };
                let name = format!("{fig}_energy_vs_m_n{n}.csv");
                files.write(&name, &csv("boundary,lambda,m,mapping,energy_density,converged", &rows))?;
            }
        }
        ExperimentKind::DeltaEVsN | ExperimentKind::DeltaEVsLambda => {
            let by_n = spec.kind == ExperimentKind::DeltaEVsN;
            let mut groups: BTreeMap<(Engine, usize), Vec<Vec<String>>> = BTreeMap::new();
            for (h, s) in mapping_pairs(results) {
                let key = (h.engine, if by_n { 0 } else { h.n });
                groups.entry(key).or_default().push(vec![
                    h.boundary.to_string(),
                    h.n.to_string(),
                    h.m.to_string(),
                    fmt_f64(h.lambda),
                    fmt_f64(h.energy_density),
                    fmt_f64(s.energy_density),
                    fmt_f64(energy_difference(s, h)?),
                ]);
            }
            let header = "boundary,n,m,lambda,energy_density_hilbert,energy_density_snake,delta_e";
            for ((engine, n), rows) in groups {
                let name = if by_n {
                    format!("fig6_delta_e_vs_n_{engine}.csv")
                } else {
                    format!("fig9_delta_e_vs_lambda_n{n}_{engine}.csv")
                };
                files.write(&name, &csv(header, &rows))?;
            }
        }
        ExperimentKind::MagnetizationVsLambda => {
            let mut groups: BTreeMap<(Engine, usize), Vec<Vec<String>>> = BTreeMap::new();
            for r in results {
                groups.entry((r.engine, r.n)).or_default().push(vec![
                    r.boundary.to_string(),
                    r.m.to_string(),
                    r.mapping.to_string(),
                    fmt_f64(r.lambda),
                    fmt_f64(r.staggered_magnetization),
                    fmt_f64(r.signed_staggered_magnetization),
                    fmt_f64(r.energy_density),
                ]);
            }
            let header = "boundary,m,mapping,lambda,staggered_magnetization,signed_staggered_magnetization,energy_density";
            for ((engine, n), rows) in groups {
                files.write(&format!("fig2_magnetization_vs_lambda_n{n}_{engine}.csv"), &csv(header, &rows))?;
            }
        }
        ExperimentKind::LocalZDiff => {
            let find = |r: &RunResult| maps.iter().find(|(q, _)| q.config_hash == r.config_hash).map(|(_, m)| m);
            for (h, s) in mapping_pairs(results) {
                let (Some(mh), Some(ms)) = (find(h), find(s)) else { continue };
                let diff = magnetization_difference(mh, ms)?;
                let stem = format!("fig8_local_z_n{}_lambda{}_m{}_{}_{}", h.n, h.lambda, h.m, h.engine, h.boundary);
                for (label, map) in [("hilbert", mh), ("snake", ms), ("diff", &diff)] {
                    let mut body = Vec::new();
                    map.write_csv(&mut body)?;
                    files.write(&format!("{stem}_{label}.csv"), &body)?;
                }
                let json_name = format!("{stem}_diff.json");
                files.write(&json_name, &serde_json::to_vec_pretty(&diff)?)?;
                let (bulk_mean, boundary_mean) = diff.bulk_and_boundary_means();
                summaries.push(LocalZSummary {
                    n: h.n,
                    lambda: h.lambda,
                    m: h.m,
                    engine: h.engine,
                    boundary: h.boundary,
                    bulk_mean,
                    boundary_mean,
                    file: format!("{stem}_diff.csv"),
                });
            }
        }
        ExperimentKind::EdReference => {
            let rows: Vec<Vec<String>> = results
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.mapping.to_string(),
                        r.boundary.to_string(),
                        fmt_f64(r.lambda),
                        fmt_f64(r.energy),
                        fmt_f64(r.energy_density),
                        fmt_f64(r.staggered_magnetization),
                    ]
                })
                .collect();
            let header = "n,mapping,boundary,lambda,energy,energy_density,staggered_magnetization";
            files.write("ed_reference.csv", &csv(header, &rows))?;
        }
        ExperimentKind::DistanceDist | ExperimentKind::MapDump => {}
    }
    Ok(summaries)
}

fn map_dump(spec: &ExperimentSpec, files: &mut Files) -> Result<()> {
    for &n in &spec.n {
        for &kind in &spec.mapping {
            let mapping = SiteMapping::new(kind, n)?;
            let mut body = Vec::new();
            mapping.write_text(&mut body)?;
            files.write(&format!("fig1_mapping_{kind}_n{n}.txt"), &body)?;
        }
    }
    Ok(())
}

fn distance_dist(
    spec: &ExperimentSpec,
    files: &mut Files,
    failures: &mut Vec<PointFailure>,
) -> Result<Vec<DistanceSummary>> {
    let mut out = Vec::new();
    for &n in &spec.n {
        for &boundary in &spec.boundary {
            for &kind in &spec.mapping {
                let point = GridPoint { n, lambda: 0.0, m: 0, mapping: kind, engine: Engine::Ed, boundary };
                let terms = match chain_terms(&point) {
                    Ok((_, t)) => t,
                    Err(e) => {
                        failures.push(PointFailure { point, error: e.to_string() });
                        continue;
                    }
                };
                for (geometry, fig) in [(Geometry::Chain, "fig5"), (Geometry::Tree, "fig7")] {
                    let hist = match distance_histogram(&terms, geometry) {
                        Ok(h) => h,
                        Err(e) => {
                            failures.push(PointFailure { point, error: format!("{geometry}: {e}") });
                            continue;
                        }
                    };
                    let name = format!("{fig}_distance_{geometry}_{kind}_{boundary}_n{n}.csv");
                    let mut body = Vec::new();
                    hist.write_csv(&mut body)?;
                    files.write(&name, &body)?;
                    out.push(DistanceSummary {
                        n,
                        mapping: kind,
                        boundary,
                        geometry,
                        mean: hist.mean(),
                        max: hist.max_distance().unwrap_or(0),
                        tail_mass: hist.tail_mass(0.9),
                        file: name,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ExperimentKind, dir: &Path) -> ExperimentSpec {
        ExperimentSpec {
            kind,
            n: vec![2],
            lambda: vec![0.5, 3.0],
            m: vec![2, 4],
            engine: vec![Engine::Mps, Engine::Ttn],
            out_dir: dir.to_path_buf(),
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in ExperimentKind::ALL {
            assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
        assert_eq!("ttn".parse::<Engine>().unwrap(), Engine::Ttn);
        assert!("peps".parse::<Engine>().is_err());
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(ExperimentKind::EnergyVsM, dir.path());
        assert!(s.validate().is_ok());
        s.n = vec![3];
        assert!(matches!(s.validate(), Err(Error::NotPowerOfTwo(3))));
        s.mapping = vec![CurveKind::Snake];
        assert!(s.validate().is_ok());
        s.kind = ExperimentKind::DeltaEVsN;
        assert!(s.validate().is_err());
        s.n = vec![];
        assert!(s.validate().is_err());
        let mut s = spec(ExperimentKind::EnergyVsM, dir.path());
        s.m = vec![0];
        assert!(s.validate().is_err());
    }

    #[test]
    fn grid_order_and_pairing() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(ExperimentKind::DeltaEVsLambda, dir.path());
        s.mapping = vec![CurveKind::Snake];
        let points = s.points();
        assert_eq!(points.len(), 2 * 2 * 2 * 2);
        assert_eq!(points[0].mapping, CurveKind::Hilbert);
        assert_eq!(points[1].mapping, CurveKind::Snake);
        s.kind = ExperimentKind::EdReference;
        assert!(s.points().iter().all(|p| p.engine == Engine::Ed && p.m == 0));
        assert_eq!(s.points().len(), 2);
        s.kind = ExperimentKind::MapDump;
        assert!(s.points().is_empty());
    }

    #[test]
    fn hashes_cover_every_input() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(ExperimentKind::EnergyVsM, dir.path());
        let p = s.points()[0];
        let h = s.point_hash(&p);
        assert_eq!(h.len(), 64);
        assert_eq!(h, s.point_hash(&p));
        assert_ne!(h, s.point_hash(&GridPoint { lambda: 0.25, ..p }));
        let mut other = s.clone();
        other.seed += 1;
        assert_ne!(h, other.point_hash(&p));
        other.seed = s.seed;
        other.solver.max_sweeps += 1;
        assert_ne!(h, other.point_hash(&p));
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(ExperimentKind::EdReference, dir.path());
        s.n = vec![2, 8];
        s.lambda = vec![1.0];
        let report = run_experiment(&s).unwrap();
        assert_eq!(report.results.len(), 2);
        assert_eq!(report.failures.len(), 2);
        assert!(report.failures.iter().all(|f| f.point.n == 8));
        let loaded = ExperimentReport::load(dir.path()).unwrap();
        assert_eq!(serde_json::to_value(&loaded).unwrap(), serde_json::to_value(&report).unwrap());
    }

    #[test]
    fn empty_grid_gives_empty_report() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(ExperimentKind::EnergyVsM, dir.path());
        s.lambda.clear();
        assert!(run_experiment(&s).is_err());
        let report = parallel_schedule(&s, 3).unwrap();
        assert!(report.results.is_empty() && report.failures.is_empty());
    }
}

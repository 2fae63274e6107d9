//! Command-line front end.
//!
//! `generate` optimizes one node set (building the lower-dimensional face
//! sets first when compatibility is automatic), `evaluate` prints metrics
//! of a node file, `compare` tabulates metrics of several distributions
//! and `tabulate` fills a directory with node files plus a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::baselines::{baseline_distribution, BaselineKind};
use crate::compatibility::{prescriptions_for, FacePrescription};
use crate::error::{Error, Result};
use crate::geometry::ElementKind;
use crate::metrics::{self, MetricReport};
use crate::nodefile::{config_hash, write_atomic, NodeFile};
use crate::optimizer::{optimize_nodes, OptimizerConfig};
use crate::parallel::ExecMode;
use crate::symmetry::NodalDistribution;

pub const CSV_HEADER: &str = "element,degree,distribution,lebesgue_constant,lebesgue_objective,mass_condition,resolution";
pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Parser)]
#[command(name = "symnodes", version, about = "Symmetric optimized interpolation nodes for reference elements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a node set and write it as a node file.
    Generate {
        #[arg(long)]
        element: ElementKind,
        #[arg(long)]
        degree: usize,
        /// Output file; defaults to `<cache-dir>/<element>_p<degree>.nodes`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        gen: GenerateArgs,
    },
    /// Print one CSV row of metrics for a node file.
    Evaluate {
        file: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        /// Print the CSV header first.
        #[arg(long)]
        header: bool,
    },
    /// Metrics of several distributions over a degree range.
    Compare {
        #[arg(long)]
        element: ElementKind,
        /// Inclusive range such as `1..10`, or a single degree.
        #[arg(long = "degree-range", alias = "degree")]
        degrees: DegreeRange,
        /// Distribution names: optimized, gll, uniform.
        #[arg(long, value_delimiter = ',', default_value = "optimized,gll,uniform")]
        distributions: Vec<String>,
        /// Extra node files to include (their element must match).
        #[arg(long = "file")]
        files: Vec<PathBuf>,
        /// CSV output path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        gen: GenerateArgs,
    },
    /// Write node files for every (element, degree) plus a manifest.
    Tabulate {
        #[arg(long, value_delimiter = ',', required = true)]
        element: Vec<ElementKind>,
        #[arg(long = "degree-range", alias = "degree")]
        degrees: DegreeRange,
        /// Output directory; also used as the dependency cache.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        gen: GenerateArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// `auto`, `off`, or comma-separated node files of the face geometries.
    #[arg(long, default_value = "auto")]
    pub compat: String,
    /// Directory for lower-dimensional node sets built by `--compat auto`.
    #[arg(long, default_value = "nodes")]
    pub cache_dir: PathBuf,
    /// Lattice resolution per direction for the Lebesgue constant.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub kkt_tol: f64,
    #[arg(long, default_value_t = 3)]
    pub multistart: usize,
    #[arg(long, default_value_t = 3)]
    pub max_candidates: usize,
    /// Use finite-difference gradients instead of analytic ones.
    #[arg(long)]
    pub fd_gradient: bool,
    /// Run single-threaded.
    #[arg(long)]
    pub sequential: bool,
    /// Permit degrees beyond the default caps (long runtimes).
    #[arg(long)]
    pub allow_high_degree: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeRange {
    pub first: usize,
    pub last: usize,
}

impl DegreeRange {
    pub fn iter(self) -> impl Iterator<Item = usize> {
        self.first..=self.last
    }
}

impl std::str::FromStr for DegreeRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad degree '{t}'"));
        let (first, last) = if let Some((a, b)) = s.split_once("..") {
            (parse(a)?, parse(b.trim_start_matches('='))?)
        } else if let Some((a, b)) = s.split_once('-') {
            (parse(a)?, parse(b)?)
        } else {
            let p = parse(s)?;
            (p, p)
        };
        if first == 0 || first > last {
            return Err(format!("empty or invalid degree range '{s}'"));
        }
        Ok(DegreeRange { first, last })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompatMode {
    Auto,
    Off,
    Files(Vec<PathBuf>),
}

impl CompatMode {
    pub fn parse(s: &str) -> Self {
        match s.trim() {
            "auto" => CompatMode::Auto,
            "off" => CompatMode::Off,
            files => CompatMode::Files(files.split(',').map(|f| PathBuf::from(f.trim())).collect()),
        }
    }
}

/// Everything that determines the generated nodes.
#[derive(Debug, Clone)]
pub struct Generator {
    pub config: OptimizerConfig,
    pub compat: CompatMode,
    pub cache_dir: PathBuf,
    pub resolution: Option<usize>,
    pub allow_high_degree: bool,
    memo: BTreeMap<(usize, usize), NodalDistribution>,
    /// `(element, degree, file)` of every node set written or reused.
    pub produced: Vec<(ElementKind, usize, PathBuf)>,
}

fn kind_key(kind: ElementKind) -> usize {
    ElementKind::ALL.iter().position(|k| *k == kind).unwrap()
}

impl Generator {
    pub fn new(args: &GenerateArgs) -> Self {
        let config = OptimizerConfig {
            kkt_tol: args.kkt_tol,
            max_major_iterations: args.max_iters,
            gradient_mode: if args.fd_gradient {
                crate::optimizer::GradientMode::FiniteDifference
            } else {
                crate::optimizer::GradientMode::Analytic
            },
            multistart_count: args.multistart,
            max_candidates: args.max_candidates,
            seed: args.seed,
            exec: if args.sequential { ExecMode::Sequential } else { ExecMode::Parallel },
            metrics_resolution: args.resolution,
            // metrics are computed by the callers that need them
            compute_metrics: false,
            ..OptimizerConfig::default()
        };
        Generator {
            config,
            compat: CompatMode::parse(&args.compat),
            cache_dir: args.cache_dir.clone(),
            resolution: args.resolution,
            allow_high_degree: args.allow_high_degree,
            memo: BTreeMap::new(),
            produced: Vec::new(),
        }
    }

    /// Hash of the settings that affect node positions.
    pub fn config_hash(&self) -> Result<String> {
        let c = &self.config;
        let mut text = format!(
            "format=1;kkt_tol={:e};max_iters={};gradient={:?};fd_step={:e};multistart={};seed={};cap={};candidates={};compat=",
            c.kkt_tol,
            c.max_major_iterations,
            c.gradient_mode,
            c.fd_step,
            c.multistart_count,
            c.seed,
            c.collection_cap,
            c.max_candidates
        );
        match &self.compat {
            CompatMode::Auto => text.push_str("auto"),
            CompatMode::Off => text.push_str("off"),
            CompatMode::Files(files) => {
                for f in files {
                    let body = std::fs::read_to_string(f)?;
                    write!(text, "{},", config_hash(&body)).unwrap();
                }
            }
        }
        Ok(config_hash(&text))
    }

    fn check_degree(&self, kind: ElementKind, p: usize) -> Result<()> {
        if p == 0 {
            return Err(Error::Argument("degree must be at least 1".into()));
        }
        if p > kind.default_degree_cap() && !self.allow_high_degree {
            return Err(Error::Argument(format!(
                "degree {p} exceeds the {kind} cap of {}; pass --allow-high-degree to proceed",
                kind.default_degree_cap()
            )));
        }
        Ok(())
    }

    pub fn cache_path(&self, kind: ElementKind, p: usize) -> PathBuf {
        cache_file(&self.cache_dir, kind, p)
    }

    /// The cached node set if it exists, parses, and was produced with the
    /// current settings.
    fn load_cached(&self, path: &Path, hash: &str) -> Option<NodalDistribution> {
        let file = NodeFile::read(path).ok()?;
        if file.config_hash != hash || file.source != "optimized" {
            return None;
        }
        file.to_distribution().ok()
    }

    fn prescriptions(&mut self, kind: ElementKind, p: usize) -> Result<Vec<FacePrescription>> {
        match self.compat.clone() {
            CompatMode::Off => Ok(Vec::new()),
            CompatMode::Auto => {
                if kind == ElementKind::Line {
                    return Ok(vec![FacePrescription::Vertex]);
                }
                let mut faces = Vec::new();
                for fk in kind.face_kinds().into_iter().flatten() {
                    faces.push(self.cached_or_generate(fk, p)?);
                }
                prescriptions_for(kind, &faces)
            }
            CompatMode::Files(files) => {
                if kind == ElementKind::Line {
                    return Ok(vec![FacePrescription::Vertex]);
                }
                let faces = files
                    .iter()
                    .map(|f| NodeFile::read_distribution(f))
                    .collect::<Result<Vec<_>>>()?;
                prescriptions_for(kind, &faces)
            }
        }
    }

    /// Optimize without touching the cache for this (kind, p); face sets
    /// still come from the cache under `--compat auto`.
    pub fn generate(&mut self, kind: ElementKind, p: usize) -> Result<NodalDistribution> {
        self.check_degree(kind, p)?;
        if let Some(d) = self.memo.get(&(kind_key(kind), p)) {
            return Ok(d.clone());
        }
        let pres = self.prescriptions(kind, p)?;
        let result = optimize_nodes(kind, p, &pres, &self.config)?;
        self.memo.insert((kind_key(kind), p), result.dist.clone());
        Ok(result.dist)
    }

    /// Reuse `<cache-dir>/<element>_p<degree>.nodes` when valid, otherwise
    /// generate and write it.
    pub fn cached_or_generate(&mut self, kind: ElementKind, p: usize) -> Result<NodalDistribution> {
        self.check_degree(kind, p)?;
        let path = self.cache_path(kind, p);
        let hash = self.config_hash()?;
        if let Some(d) = self.load_cached(&path, &hash) {
            self.memo.insert((kind_key(kind), p), d.clone());
            self.record(kind, p, path);
            return Ok(d);
        }
        let d = self.generate(kind, p)?;
        NodeFile::from_distribution(&d, hash).write_atomic(&path)?;
        self.record(kind, p, path);
        Ok(d)
    }

    fn record(&mut self, kind: ElementKind, p: usize, path: PathBuf) {
        if !self.produced.iter().any(|(k, q, _)| *k == kind && *q == p) {
            self.produced.push((kind, p, path));
        }
    }

    pub fn resolution_for(&self, kind: ElementKind) -> usize {
        self.resolution.unwrap_or_else(|| metrics::default_resolution(kind))
    }

    pub fn exec(&self) -> ExecMode {
        self.config.exec
    }
}

pub fn cache_file(dir: &Path, kind: ElementKind, p: usize) -> PathBuf {
    dir.join(format!("{}_p{}.nodes", kind.name(), p))
}

/// One CSV row; empty metric cells when `report` is `None`.
pub fn csv_row(kind: ElementKind, p: usize, name: &str, report: Option<&MetricReport>, resolution: usize) -> String {
    match report {
        Some(r) => format!(
            "{},{},{},{},{},{},{}",
            kind, p, name, r.lebesgue_constant, r.lebesgue_objective, r.mass_condition, r.sampler_resolution
        ),
        None => format!("{kind},{p},{name},,,,{resolution}"),
    }
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    element: String,
    degree: usize,
    file: Option<String>,
    config: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    lebesgue_constant: Option<f64>,
    lebesgue_objective: Option<f64>,
    mass_condition: Option<f64>,
    resolution: usize,
}

fn cmd_generate(element: ElementKind, degree: usize, out: Option<PathBuf>, args: &GenerateArgs) -> Result<String> {
    let mut gen = Generator::new(args);
    let dist = gen.generate(element, degree)?;
    let hash = gen.config_hash()?;
    let path = out.unwrap_or_else(|| gen.cache_path(element, degree));
    NodeFile::from_distribution(&dist, hash).write_atomic(&path)?;
    let res = gen.resolution_for(element);
    let m = metrics::evaluate(&dist, res, gen.exec())?;
    Ok(format!(
        "{element} p={degree}: {} nodes -> {} (lebesgue {:.6}, objective {:.6}, mass condition {:.4e}, resolution {res})\n",
        dist.len(),
        path.display(),
        m.lebesgue_constant,
        m.lebesgue_objective,
        m.mass_condition
    ))
}

fn cmd_evaluate(file: &Path, resolution: Option<usize>, header: bool) -> Result<String> {
    let nf = NodeFile::read(file)?;
    let dist = nf.to_distribution()?;
    let res = resolution.unwrap_or_else(|| metrics::default_resolution(dist.kind));
    let m = metrics::evaluate(&dist, res, ExecMode::default())?;
    let mut out = String::new();
    if header {
        writeln!(out, "{CSV_HEADER}").unwrap();
    }
    writeln!(out, "{}", csv_row(dist.kind, dist.degree, &nf.source, Some(&m), res)).unwrap();
    Ok(out)
}

/// Build the compare CSV; warnings go to `warn`.
pub fn compare_csv(
    element: ElementKind,
    degrees: DegreeRange,
    distributions: &[String],
    files: &[PathBuf],
    args: &GenerateArgs,
    warn: &mut dyn FnMut(String),
) -> Result<String> {
    let mut gen = Generator::new(args);
    let res = gen.resolution_for(element);
    let mut extra = Vec::new();
    for f in files {
        match NodeFile::read(f).and_then(|nf| Ok((nf.to_distribution()?, nf))) {
            Ok((d, _)) if d.kind != element => warn(format!("{}: element {} differs, skipped", f.display(), d.kind)),
            Ok((d, nf)) => {
                let name = f
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or(nf.source);
                extra.push((name, d));
            }
            Err(e) => warn(format!("{}: {e}", f.display())),
        }
    }
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    let mut ok_rows = 0;
    for p in degrees.iter() {
        for name in distributions {
            let dist = match name.as_str() {
                "optimized" => gen.cached_or_generate(element, p),
                other => match other.parse::<BaselineKind>() {
                    Ok(b) => baseline_distribution(element, p, b),
                    Err(_) => {
                        warn(format!("unknown distribution '{other}', skipped"));
                        continue;
                    }
                },
            };
            let report = dist.and_then(|d| metrics::evaluate(&d, res, gen.exec()));
            match report {
                Ok(r) => {
                    ok_rows += 1;
                    writeln!(out, "{}", csv_row(element, p, name, Some(&r), res)).unwrap();
                }
                Err(e) => {
                    warn(format!("{element} p={p} {name}: {e}"));
                    writeln!(out, "{}", csv_row(element, p, name, None, res)).unwrap();
                }
            }
        }
        for (name, d) in extra.iter().filter(|(_, d)| d.degree == p) {
            match metrics::evaluate(d, res, gen.exec()) {
                Ok(r) => {
                    ok_rows += 1;
                    writeln!(out, "{}", csv_row(element, p, name, Some(&r), res)).unwrap();
                }
                Err(e) => {
                    warn(format!("{element} p={p} {name}: {e}"));
                    writeln!(out, "{}", csv_row(element, p, name, None, res)).unwrap();
                }
            }
        }
    }
    if ok_rows == 0 {
        return Err(Error::Argument("no distribution could be evaluated".into()));
    }
    Ok(out)
}

/// Fill `out` with node files and a manifest. Existing files generated
/// with the same settings are reused.
pub fn tabulate(
    elements: &[ElementKind],
    degrees: DegreeRange,
    out: &Path,
    args: &GenerateArgs,
    warn: &mut dyn FnMut(String),
) -> Result<Vec<(ElementKind, usize, bool)>> {
    let mut args = args.clone();
    args.cache_dir = out.to_path_buf();
    let mut gen = Generator::new(&args);
    let hash = gen.config_hash()?;
    let mut kinds = elements.to_vec();
    kinds.sort_by_key(|k| (k.dim(), kind_key(*k)));
    kinds.dedup();
    let mut failures = Vec::new();
    let mut statuses = Vec::new();
    for &kind in &kinds {
        for p in degrees.iter() {
            match gen.cached_or_generate(kind, p) {
                Ok(_) => statuses.push((kind, p, true)),
                Err(e) => {
                    warn(format!("{kind} p={p}: {e}"));
                    failures.push((kind, p, e.to_string()));
                    statuses.push((kind, p, false));
                }
            }
        }
    }
    let mut lines = String::new();
    let mut produced = gen.produced.clone();
    produced.sort_by_key(|(k, p, _)| (k.dim(), kind_key(*k), *p));
    for (kind, p, path) in produced {
        let res = gen.resolution_for(kind);
        let report = NodeFile::read_distribution(&path).and_then(|d| metrics::evaluate(&d, res, gen.exec()));
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned());
        let entry = match report {
            Ok(r) => ManifestEntry {
                element: kind.name().into(),
                degree: p,
                file,
                config: hash.clone(),
                status: "ok".into(),
                error: None,
                lebesgue_constant: Some(r.lebesgue_constant),
                lebesgue_objective: Some(r.lebesgue_objective),
                mass_condition: Some(r.mass_condition),
                resolution: res,
            },
            Err(e) => ManifestEntry {
                element: kind.name().into(),
                degree: p,
                file,
                config: hash.clone(),
                status: "metrics-failed".into(),
                error: Some(e.to_string()),
                lebesgue_constant: None,
                lebesgue_objective: None,
                mass_condition: None,
                resolution: res,
            },
        };
        writeln!(lines, "{}", serde_json::to_string(&entry).map_err(|e| Error::Internal(e.to_string()))?).unwrap();
    }
    for (kind, p, msg) in failures {
        let entry = ManifestEntry {
            element: kind.name().into(),
            degree: p,
            file: None,
            config: hash.clone(),
            status: "failed".into(),
            error: Some(msg),
            lebesgue_constant: None,
            lebesgue_objective: None,
            mass_condition: None,
            resolution: gen.resolution_for(kind),
        };
        writeln!(lines, "{}", serde_json::to_string(&entry).map_err(|e| Error::Internal(e.to_string()))?).unwrap();
    }
    write_atomic(&out.join(MANIFEST_NAME), lines.as_bytes())?;
    Ok(statuses)
}

/// Run a parsed command, returning what it prints on standard output.
pub fn run(cli: Cli, warn: &mut dyn FnMut(String)) -> Result<String> {
    match cli.command {
        Command::Generate { element, degree, out, gen } => cmd_generate(element, degree, out, &gen),
        Command::Evaluate { file, resolution, header } => cmd_evaluate(&file, resolution, header),
        Command::Compare {
            element,
            degrees,
            distributions,
            files,
            out,
            gen,
        } => {
            let csv = compare_csv(element, degrees, &distributions, &files, &gen, warn)?;
            match out {
                Some(path) => {
                    write_atomic(&path, csv.as_bytes())?;
                    Ok(String::new())
                }
                None => Ok(csv),
            }
        }
        Command::Tabulate { element, degrees, out, gen } => {
            let statuses = tabulate(&element, degrees, &out, &gen, warn)?;
            let ok = statuses.iter().filter(|s| s.2).count();
            if ok == 0 {
                return Err(Error::Internal("every tabulation job failed".into()));
            }
            Ok(format!("{ok} of {} node sets written to {}\n", statuses.len(), out.display()))
        }
    }
}

/// Entry point shared by the binary: parse, run, map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut warn = |msg: String| eprintln!("warning: {msg}");
    match run(cli, &mut warn) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() || matches!(e, Error::Io(_)) {
        2
    } else {
        1
    }
}

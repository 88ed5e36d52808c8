//! Command-line surface: argument parsing, JSON config loading, dispatch,
//! and report emission.
//!
//! Every command is deterministic given (config, seed). JSON output is the
//! fixed envelope {command, config_echo, seed, results, warnings} with keys
//! in canonical order and floats at 17 significant digits; CSV output is a
//! header row plus data rows. All state flows through flags and the config
//! file; no environment variables are read.

use crate::dataset::{ingest_csv, parse_column_refs, DatasetFrame};
use crate::error::{Error, Result};
use crate::estimator::estimate_cca;
use crate::fluctuation::{eta, theta1, theta2, Field};
use crate::linalg::{half_whiten, sym_eigenvalues_desc};
use crate::measure::DiscreteMeasure;
use crate::phase::{assess_spike_cov, fisher_spike_limit, CcaChain, PsiForm, SpikeSpec};
use crate::report::{envelope, to_csv_string, to_json_string, Cell, Json};
use crate::simulate::{
    lsd_curve_cca, lsd_curve_cov, lsd_curve_fisher, run_clt_with, run_mse, run_pair_clt_with,
    study_design_cca, study_design_cov, study_design_fisher, Centering, CltSummary, DensityCurve,
    ModelSpec, PairSummary,
};
use crate::stats::{histogram, normal_qq_pairs};
use crate::stieltjes::SpectralLaw;
use clap::{Parser, Subcommand};
use serde::Deserialize;
use std::path::PathBuf;

/// Seed used when neither the config nor --seed provides one.
pub const DEFAULT_SEED: u64 = 20260822;

const DEFAULT_CLT_REPS: usize = 500;
const HISTOGRAM_BINS: usize = 25;

fn obj() -> Json {
    Json::obj()
}

#[derive(Debug, Parser)]
#[command(
    name = "spiked-fisher",
    version,
    about = "Spiked-eigenvalue analysis for signal-plus-noise, Fisher-type, and canonical-correlation ensembles",
    after_help = "Model parameters come from a JSON config (--config); flags override its \
scalar fields. Each command has built-in defaults, so `spiked-fisher phase` runs as is. \
--threads controls the worker pool and is excluded from config echoes: results are \
identical at any thread count."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
    /// JSON config file; flags override its scalar fields
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for all random draws
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replication count for clt; overrides every design's count for mse
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Report format
    #[arg(long, global = true, value_parser = ["json", "csv"])]
    pub format: Option<String>,
    /// Input CSV for cca-analyze
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Columns forming the x block: comma-separated names or 0-based indices
    #[arg(long = "x-cols", global = true, value_name = "COLS")]
    pub x_cols: Option<String>,
    /// Columns forming the y block
    #[arg(long = "y-cols", global = true, value_name = "COLS")]
    pub y_cols: Option<String>,
    /// Worker threads (default: one per core); never changes results
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CliCommand {
    /// Spike limit maps, phase validity, and variance scales per spike
    Phase,
    /// Replicated standardized spike statistics with normality diagnostics
    Clt,
    /// Replicated plug-in estimator errors over study designs
    Mse,
    /// Canonical-correlation analysis of a CSV dataset
    #[command(name = "cca-analyze")]
    CcaAnalyze,
    /// Limit spectral density curves
    Lsd,
}

impl CliCommand {
    fn name(self) -> &'static str {
        match self {
            CliCommand::Phase => "phase",
            CliCommand::Clt => "clt",
            CliCommand::Mse => "mse",
            CliCommand::CcaAnalyze => "cca-analyze",
            CliCommand::Lsd => "lsd",
        }
    }
}

/// One spike in config form: a bare value or [value, multiplicity].
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum SpikeEntry {
    Bare(f64),
    Pair(f64, usize),
}

impl SpikeEntry {
    fn pair(self) -> (f64, usize) {
        match self {
            SpikeEntry::Bare(v) => (v, 1),
            SpikeEntry::Pair(v, m) => (v, m),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// JSON config document. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Informational; must match the subcommand when present.
    pub command: Option<String>,
    pub model: Option<String>,
    pub p: Option<usize>,
    pub n: Option<usize>,
    /// Second sample count of the ratio ensemble.
    pub n2: Option<usize>,
    /// Larger block dimension of the paired ensemble.
    pub q: Option<usize>,
    pub spikes: Option<Vec<SpikeEntry>>,
    /// Bulk atoms as [location, weight] pairs.
    pub bulk: Option<Vec<(f64, f64)>>,
    pub field: Option<String>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    /// Sample count used to turn r1/r2 ratios into integer dimensions.
    pub scale_n: Option<usize>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub spike_index: Option<usize>,
    pub centering: Option<String>,
    /// "single" or "pair".
    pub mode: Option<String>,
    pub reference_count: Option<usize>,
    /// Named accuracy study: covariance | fisher | cca | cca-multi.
    pub study: Option<String>,
    pub p_grid: Option<Vec<usize>>,
    pub reps_grid: Option<Vec<usize>>,
    pub grid: Option<GridConfig>,
    pub input: Option<String>,
    pub out: Option<String>,
    pub format: Option<String>,
    pub x_cols: Option<String>,
    pub y_cols: Option<String>,
    /// Leading sample correlations treated as spikes by cca-analyze.
    pub spikes_count: Option<usize>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutFormat {
    Json,
    Csv,
}

/// Fully resolved invocation: config file overlaid with flags.
struct Resolved {
    command: CliCommand,
    cfg: FileConfig,
    seed: u64,
    format: OutFormat,
    out: Option<PathBuf>,
    threads: Option<usize>,
}

fn load_config(path: &PathBuf) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read config {}: {e}", path.display()),
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
}

fn resolve(cli: &Cli) -> Result<Resolved> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => FileConfig::default(),
    };
    if let Some(cmd) = &cfg.command {
        if cmd != cli.command.name() {
            return Err(Error::Config(format!(
                "config is for command '{cmd}', invoked as '{}'",
                cli.command.name()
            )));
        }
    }
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(r) = cli.reps {
        cfg.reps = Some(r);
    }
    if let Some(f) = &cli.format {
        cfg.format = Some(f.clone());
    }
    if let Some(p) = &cli.input {
        cfg.input = Some(p.display().to_string());
    }
    if let Some(x) = &cli.x_cols {
        cfg.x_cols = Some(x.clone());
    }
    if let Some(y) = &cli.y_cols {
        cfg.y_cols = Some(y.clone());
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.display().to_string());
    }
    if let Some(r) = cfg.reps {
        if r == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
    }
    let format = match cfg.format.as_deref() {
        None | Some("json") => OutFormat::Json,
        Some("csv") => OutFormat::Csv,
        Some(other) => {
            return Err(Error::Config(format!(
                "format must be json or csv, got '{other}'"
            )))
        }
    };
    Ok(Resolved {
        command: cli.command,
        seed: cfg.seed.unwrap_or(DEFAULT_SEED),
        format,
        out: cfg.out.clone().map(PathBuf::from),
        threads: cfg.threads,
        cfg,
    })
}

fn parse_field(cfg: &FileConfig) -> Result<Field> {
    match cfg.field.as_deref() {
        None | Some("real") => Ok(Field::Real),
        Some("complex") => Ok(Field::Complex),
        Some(other) => Err(Error::Config(format!(
            "field must be real or complex, got '{other}'"
        ))),
    }
}

fn parse_centering(cfg: &FileConfig) -> Result<Centering> {
    match cfg.centering.as_deref() {
        None | Some("adjusted") => Ok(Centering::EmpiricalAdjusted),
        Some("design") => Ok(Centering::DesignRatios),
        Some(other) => Err(Error::Config(format!(
            "centering must be adjusted or design, got '{other}'"
        ))),
    }
}

fn parse_bulk(cfg: &FileConfig, default_atom: f64) -> Result<DiscreteMeasure> {
    match &cfg.bulk {
        Some(atoms) => DiscreteMeasure::new(atoms.clone()),
        None => Ok(DiscreteMeasure::point_mass(default_atom)),
    }
}

fn spike_pairs(cfg: &FileConfig, default: &[(f64, usize)]) -> Vec<(f64, usize)> {
    match &cfg.spikes {
        Some(list) => list.iter().map(|e| e.pair()).collect(),
        None => default.to_vec(),
    }
}

fn field_name(field: Field) -> &'static str {
    match field {
        Field::Real => "real",
        Field::Complex => "complex",
    }
}

fn centering_name(c: Centering) -> &'static str {
    match c {
        Centering::EmpiricalAdjusted => "adjusted",
        Centering::DesignRatios => "design",
    }
}

fn bulk_json(m: &DiscreteMeasure) -> Json {
    Json::Array(
        m.atoms()
            .iter()
            .map(|&(loc, w)| Json::Array(vec![Json::Float(loc), Json::Float(w)]))
            .collect(),
    )
}

fn spikes_json(spikes: &[(f64, usize)]) -> Json {
    Json::Array(
        spikes
            .iter()
            .map(|&(v, m)| Json::Array(vec![Json::Float(v), Json::UInt(m as u64)]))
            .collect(),
    )
}

fn model_echo(spec: &ModelSpec) -> Json {
    let pop = spec.population();
    let spikes: Vec<(f64, usize)> = pop.spikes.iter().map(|s| (s.value, s.multiplicity)).collect();
    let dims = match *spec {
        ModelSpec::Covariance { p, n, .. } => obj().with("p", p).with("n", n),
        ModelSpec::Fisher { p, n1, n2, .. } => obj().with("p", p).with("n", n1).with("n2", n2),
        ModelSpec::Cca { p, q, n, .. } => obj().with("p", p).with("q", q).with("n", n),
    };
    obj()
        .with("model", spec.kind_name())
        .extend(dims)
        .with("spikes", spikes_json(&spikes))
        .with("bulk", bulk_json(&pop.bulk))
        .with("field", field_name(spec.field()))
}

/// Build the simulation model from config, falling back to the covariance
/// reference design (200, 2000) with one spike of 10.
fn build_model(cfg: &FileConfig) -> Result<ModelSpec> {
    let field = parse_field(cfg)?;
    match cfg.model.as_deref() {
        None | Some("covariance") => {
            let p = cfg.p.unwrap_or(200);
            let n = cfg.n.unwrap_or(2000);
            let spikes = spike_pairs(cfg, &[(10.0, 1)]);
            ModelSpec::covariance(p, n, &spikes, parse_bulk(cfg, 1.0)?, field)
        }
        Some("fisher") => {
            let p = cfg.p.unwrap_or(200);
            let n = cfg.n.unwrap_or(2000);
            let n2 = cfg.n2.unwrap_or(1000);
            let spikes = spike_pairs(cfg, &[(10.0, 1)]);
            ModelSpec::fisher(p, n, n2, &spikes, parse_bulk(cfg, 1.0)?, field)
        }
        Some("cca") => {
            let p = cfg.p.unwrap_or(200);
            let q = cfg.q.unwrap_or(200);
            let n = cfg.n.unwrap_or(1000);
            let spikes = spike_pairs(cfg, &[(10.0 / 11.0, 1)]);
            ModelSpec::cca(p, q, n, &spikes, parse_bulk(cfg, 0.0)?, field)
        }
        Some(other) => Err(Error::Config(format!(
            "model must be covariance, fisher, or cca, got '{other}'"
        ))),
    }
}

/// Execute a parsed invocation. Returns the report text, or None when it was
/// written to a file.
pub fn execute(cli: &Cli) -> Result<Option<String>> {
    let resolved = resolve(cli)?;
    let text = match resolved.threads {
        Some(workers) => {
            if workers == 0 {
                return Err(Error::Config("threads must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot build a {workers}-thread pool: {e}")))?;
            pool.install(|| dispatch(&resolved))?
        }
        None => dispatch(&resolved)?,
    };
    match &resolved.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("cannot write {}: {e}", path.display()),
                ))
            })?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

fn dispatch(r: &Resolved) -> Result<String> {
    match r.command {
        CliCommand::Phase => cmd_phase(r),
        CliCommand::Clt => cmd_clt(r),
        CliCommand::Mse => cmd_mse(r),
        CliCommand::CcaAnalyze => cmd_cca_analyze(r),
        CliCommand::Lsd => cmd_lsd(r),
    }
}

fn render(
    r: &Resolved,
    config_echo: Json,
    results: Json,
    warnings: Vec<String>,
    csv: Option<(Vec<&str>, Vec<Vec<Cell>>)>,
) -> Result<String> {
    match (r.format, csv) {
        (OutFormat::Csv, Some((header, rows))) => Ok(to_csv_string(&header, &rows)),
        (OutFormat::Csv, None) => Err(Error::Config(format!(
            "command '{}' has no CSV form for this mode; use --format json",
            r.command.name()
        ))),
        (OutFormat::Json, _) => Ok(to_json_string(&envelope(
            r.command.name(),
            config_echo,
            r.seed,
            results,
            &warnings,
        ))),
    }
}

// ---------------------------------------------------------------- phase ----

struct PhaseRow {
    spike: f64,
    lambda_c: Option<f64>,
    limit: Option<f64>,
    valid: bool,
    class: &'static str,
    scale: Option<f64>,
    extra: Vec<(&'static str, Option<f64>)>,
    notes: Vec<String>,
}

fn class_name(report: &crate::phase::SpikeLimitReport) -> &'static str {
    match report.class {
        crate::phase::PhaseClass::Valid => "valid",
        crate::phase::PhaseClass::Critical => "critical",
        crate::phase::PhaseClass::Invalid => "invalid",
    }
}

fn cmd_phase(r: &Resolved) -> Result<String> {
    let cfg = &r.cfg;
    let model = cfg.model.clone().unwrap_or_else(|| "fisher".into());
    let field = parse_field(cfg)?;
    let beta = field.beta();
    let mut warnings = Vec::new();
    let (echo, scale_kind, rows) = match model.as_str() {
        "covariance" | "fisher" => {
            let c1 = cfg
                .c1
                .or_else(|| match (cfg.p, cfg.n) {
                    (Some(p), Some(n)) => Some(p as f64 / n as f64),
                    _ => None,
                })
                .unwrap_or(0.1);
            let bulk = parse_bulk(cfg, 1.0)?;
            let law = SpectralLaw::Discrete(bulk.clone());
            let spikes = spike_pairs(cfg, &[(10.0, 1), (7.5, 1)]);
            let fisher = model == "fisher";
            let c2 = if fisher {
                Some(
                    cfg.c2
                        .or_else(|| match (cfg.p, cfg.n2) {
                            (Some(p), Some(n2)) => Some(p as f64 / n2 as f64),
                            _ => None,
                        })
                        .unwrap_or(0.2),
                )
            } else {
                None
            };
            let mut rows = Vec::new();
            for &(value, _) in &spikes {
                let spike = SpikeSpec::solitary(value)?;
                let report = if let Some(c2) = c2 {
                    fisher_spike_limit(&law, c1, c2, &spike, PsiForm::Sum)?
                } else {
                    assess_spike_cov(&law, c1, &spike, PsiForm::Sum)?
                };
                let valid = report.is_valid();
                let (limit, scale) = if let Some(c2) = c2 {
                    let scale = if valid {
                        Some(beta * theta2(&law, c1, c2, value)?.theta2)
                    } else {
                        None
                    };
                    (report.lambda, scale)
                } else {
                    let scale = if valid {
                        Some(beta * theta1(&law, c1, value)?.theta1)
                    } else {
                        None
                    };
                    (report.lambda_c, scale)
                };
                rows.push(PhaseRow {
                    spike: value,
                    lambda_c: report.lambda_c,
                    limit,
                    valid,
                    class: class_name(&report),
                    scale,
                    extra: Vec::new(),
                    notes: report.notes,
                });
            }
            let mut echo = obj().with("model", model.as_str()).with("c1", c1);
            if let Some(c2) = c2 {
                echo = echo.with("c2", c2);
            }
            let echo = echo
                .with("spikes", spikes_json(&spikes))
                .with("bulk", bulk_json(&bulk))
                .with("field", field_name(field));
            (echo, if fisher { "beta_theta2" } else { "beta_theta1" }, rows)
        }
        "cca" => {
            let scale_n = cfg.scale_n.unwrap_or(1000);
            let (p, q, n) = match (cfg.p, cfg.q, cfg.n) {
                (Some(p), Some(q), Some(n)) => (p, q, n),
                _ => {
                    let r1 = cfg.r1.unwrap_or(0.2);
                    let r2 = cfg.r2.unwrap_or(0.2);
                    let p = (r1 * scale_n as f64).round() as usize;
                    let q = (r2 * scale_n as f64).round() as usize;
                    (p, q, scale_n)
                }
            };
            let bulk = parse_bulk(cfg, 0.0)?;
            let chain = CcaChain::new(p, q, n, bulk.clone())?;
            let spikes = spike_pairs(cfg, &[(0.5, 1)]);
            let mut rows = Vec::new();
            for &(value, _) in &spikes {
                let spike = SpikeSpec::solitary(value)?;
                let report = chain.assess(&spike);
                let valid = report.is_valid();
                let scale = if valid {
                    Some(beta * eta(&chain, value)?.eta)
                } else {
                    None
                };
                rows.push(PhaseRow {
                    spike: value,
                    lambda_c: report.lambda_c,
                    limit: report.t,
                    valid,
                    class: class_name(&report),
                    scale,
                    extra: vec![
                        ("f", report.f_alpha),
                        ("psi_xi", report.psi_xi),
                        ("psi", report.lambda),
                    ],
                    notes: report.notes,
                });
            }
            let echo = obj()
                .with("model", "cca")
                .with("p", p)
                .with("q", q)
                .with("n", n)
                .with("spikes", spikes_json(&spikes))
                .with("bulk", bulk_json(&bulk))
                .with("field", field_name(field));
            (echo, "beta_eta", rows)
        }
        other => {
            return Err(Error::Config(format!(
                "model must be covariance, fisher, or cca, got '{other}'"
            )))
        }
    };
    for row in rows.iter().filter(|row| !row.valid) {
        warnings.push(format!(
            "spike {} is {} (no separated limit)",
            row.spike, row.class
        ));
    }
    let opt = |v: Option<f64>| v.map(Json::Float).unwrap_or(Json::Null);
    let results = Json::Array(
        rows.iter()
            .map(|row| {
                let mut o = obj().with("spike", row.spike).with("lambda_c", opt(row.lambda_c));
                for &(k, v) in &row.extra {
                    o = o.with(k, opt(v));
                }
                o.with("limit", opt(row.limit))
                    .with("valid", row.valid)
                    .with("class", row.class)
                    .with(scale_kind, opt(row.scale))
                    .with(
                        "notes",
                        Json::Array(row.notes.iter().map(|n| Json::Str(n.clone())).collect()),
                    )
            })
            .collect(),
    );
    let header = vec!["spike", "lambda_c", "limit", "valid", "scale"];
    let cell = |v: Option<f64>| v.map(Cell::Float).unwrap_or(Cell::Str(String::new()));
    let csv_rows = rows
        .iter()
        .map(|row| {
            vec![
                Cell::Float(row.spike),
                cell(row.lambda_c),
                cell(row.limit),
                Cell::Str(row.class.to_string()),
                cell(row.scale),
            ]
        })
        .collect();
    render(
        r,
        echo,
        obj().with("scale_kind", scale_kind).with("rows", results),
        warnings,
        Some((header, csv_rows)),
    )
}

// ------------------------------------------------------------------ clt ----

fn clt_echo(spec: &ModelSpec, r: &Resolved, mode: &str, centering: Centering, reps: usize) -> Json {
    model_echo(spec)
        .with("spike_index", r.cfg.spike_index.unwrap_or(0))
        .with("mode", mode)
        .with("centering", centering_name(centering))
        .with("reps", reps)
}

fn histogram_json(gamma: &[f64]) -> Result<Json> {
    let bins = histogram(gamma, HISTOGRAM_BINS)?;
    Ok(Json::Array(
        bins.iter()
            .map(|b| {
                obj()
                    .with("center", b.center)
                    .with("count", b.count)
                    .with("density", b.density)
            })
            .collect(),
    ))
}

fn qq_json(gamma: &[f64]) -> Json {
    Json::Array(
        normal_qq_pairs(gamma)
            .into_iter()
            .map(|(t, e)| Json::Array(vec![Json::Float(t), Json::Float(e)]))
            .collect(),
    )
}

fn clt_csv(summary: &CltSummary) -> Result<(Vec<&'static str>, Vec<Vec<Cell>>)> {
    let bins = histogram(&summary.gamma, HISTOGRAM_BINS)?;
    let qq = normal_qq_pairs(&summary.gamma);
    let blank = || Cell::Str(String::new());
    let rows = (0..summary.gamma.len().max(bins.len()))
        .map(|i| {
            let mut row = vec![Cell::UInt(i as u64)];
            match summary.gamma.get(i) {
                Some(&g) => row.push(Cell::Float(g)),
                None => row.push(blank()),
            }
            match bins.get(i) {
                Some(b) => {
                    row.push(Cell::Float(b.center));
                    row.push(Cell::UInt(b.count as u64));
                    row.push(Cell::Float(b.density));
                }
                None => {
                    row.push(blank());
                    row.push(blank());
                    row.push(blank());
                }
            }
            match qq.get(i) {
                Some(&(t, e)) => {
                    row.push(Cell::Float(t));
                    row.push(Cell::Float(e));
                }
                None => {
                    row.push(blank());
                    row.push(blank());
                }
            }
            row
        })
        .collect();
    Ok((
        vec![
            "index",
            "gamma",
            "hist_center",
            "hist_count",
            "hist_density",
            "qq_theoretical",
            "qq_empirical",
        ],
        rows,
    ))
}

fn cmd_clt(r: &Resolved) -> Result<String> {
    let cfg = &r.cfg;
    let spec = build_model(cfg)?;
    let reps = cfg.reps.unwrap_or(DEFAULT_CLT_REPS);
    let spike_index = cfg.spike_index.unwrap_or(0);
    let centering = parse_centering(cfg)?;
    let mode = cfg.mode.clone().unwrap_or_else(|| "single".into());
    match mode.as_str() {
        "single" => {
            let summary = run_clt_with(&spec, spike_index, reps, r.seed, centering)?;
            let echo = clt_echo(&spec, r, "single", centering, reps);
            let results = obj()
                .with("spike_value", summary.spike_value)
                .with("center", summary.theory.center)
                .with("scale", summary.theory.scale)
                .with("mean", summary.mean)
                .with("variance", summary.variance)
                .with("ks_distance", summary.ks.distance)
                .with("ks_p_value", summary.ks.p_value)
                .with("reps", summary.reps)
                .with("histogram", histogram_json(&summary.gamma)?)
                .with("qq", qq_json(&summary.gamma))
                .with("gamma", Json::floats(&summary.gamma));
            let (header, rows) = clt_csv(&summary)?;
            render(r, echo, results, Vec::new(), Some((header, rows)))
        }
        "pair" => {
            let reference_count = cfg.reference_count.unwrap_or(20_000);
            let summary: PairSummary =
                run_pair_clt_with(&spec, spike_index, reps, r.seed, centering, reference_count)?;
            let echo = clt_echo(&spec, r, "pair", centering, reps);
            let pairs = Json::Array(
                summary
                    .pairs
                    .iter()
                    .map(|&(u, l)| Json::Array(vec![Json::Float(u), Json::Float(l)]))
                    .collect(),
            );
            let results = obj()
                .with("spike_value", summary.spike_value)
                .with("center", summary.theory.center)
                .with("scale", summary.theory.scale)
                .with("reference_count", summary.reference.len())
                .with("planar_ks_distance", summary.distance)
                .with("reps", summary.reps)
                .with("pairs", pairs);
            let header = vec!["index", "gamma_upper", "gamma_lower"];
            let rows = summary
                .pairs
                .iter()
                .enumerate()
                .map(|(i, &(u, l))| vec![Cell::UInt(i as u64), Cell::Float(u), Cell::Float(l)])
                .collect();
            render(r, echo, results, Vec::new(), Some((header, rows)))
        }
        other => Err(Error::Config(format!(
            "mode must be single or pair, got '{other}'"
        ))),
    }
}

// ------------------------------------------------------------------ mse ----

fn study_designs(cfg: &FileConfig, field: Field) -> Result<Vec<(ModelSpec, usize)>> {
    let study = cfg.study.clone().unwrap_or_else(|| "covariance".into());
    let p_grid = cfg.p_grid.clone().unwrap_or_else(|| vec![100, 200, 400]);
    let reps_for = |i: usize| -> Result<usize> {
        if let Some(grid) = &cfg.reps_grid {
            return grid.get(i).copied().ok_or_else(|| {
                Error::Config(format!(
                    "reps_grid has {} entries for {} grid points",
                    grid.len(),
                    p_grid.len()
                ))
            });
        }
        if let Some(r) = cfg.reps {
            return Ok(r);
        }
        // graded defaults keep the largest design affordable
        Ok(match i {
            0 => 500,
            1 => 250,
            _ => 150,
        })
    };
    p_grid
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let spec = match study.as_str() {
                "covariance" => study_design_cov(p, field)?,
                "fisher" => study_design_fisher(p, field)?,
                "cca" => study_design_cca(p, field, false)?,
                "cca-multi" => study_design_cca(p, field, true)?,
                other => {
                    return Err(Error::Config(format!(
                        "study must be covariance, fisher, cca, or cca-multi, got '{other}'"
                    )))
                }
            };
            let reps = reps_for(i)?;
            if reps == 0 {
                return Err(Error::Config("reps must be at least 1".into()));
            }
            Ok((spec, reps))
        })
        .collect()
}

fn cmd_mse(r: &Resolved) -> Result<String> {
    let cfg = &r.cfg;
    let field = parse_field(cfg)?;
    let designs = if cfg.model.is_some() {
        let reps = cfg.reps.unwrap_or(DEFAULT_CLT_REPS);
        vec![(build_model(cfg)?, reps)]
    } else {
        study_designs(cfg, field)?
    };
    let summary = run_mse(&designs, r.seed)?;
    let design_echo = Json::Array(
        designs
            .iter()
            .map(|(spec, reps)| model_echo(spec).with("reps", *reps))
            .collect(),
    );
    let mut echo = obj();
    if let Some(study) = &cfg.study {
        echo = echo.with("study", study.as_str());
    }
    let echo = echo.with("designs", design_echo);
    let cells = Json::Array(
        summary
            .cells
            .iter()
            .map(|c| {
                obj()
                    .with("estimator", c.kind)
                    .with("p", c.p)
                    .with("spike_index", c.spike_index)
                    .with("spike_value", c.spike_value)
                    .with("estimate_mean", c.estimate_mean)
                    .with("mse", c.mse)
                    .with("reps", c.reps)
            })
            .collect(),
    );
    let header = vec![
        "p",
        "estimator",
        "spike_index",
        "spike_value",
        "estimate_mean",
        "mse",
        "reps",
    ];
    let rows = summary
        .cells
        .iter()
        .map(|c| {
            vec![
                Cell::UInt(c.p as u64),
                Cell::Str(c.kind.to_string()),
                Cell::UInt(c.spike_index as u64),
                Cell::Float(c.spike_value),
                Cell::Float(c.estimate_mean),
                Cell::Float(c.mse),
                Cell::UInt(c.reps as u64),
            ]
        })
        .collect();
    render(
        r,
        echo,
        obj().with("cells", cells),
        Vec::new(),
        Some((header, rows)),
    )
}

// --------------------------------------------------------- cca-analyze ----

/// Squared sample canonical correlations of a centered dataset, descending.
fn sample_cca_spectrum(frame: &DatasetFrame) -> Result<Vec<f64>> {
    let n = frame.x.ncols() as f64;
    let sxx = &frame.x * frame.x.transpose() / n;
    let syy = &frame.y * frame.y.transpose() / n;
    let sxy = &frame.x * frame.y.transpose() / n;
    let a = half_whiten(&sxx, &sxy)?;
    let g = half_whiten(&syy, &a.transpose())?.transpose();
    let eigs = sym_eigenvalues_desc(&(&g * g.transpose()))?;
    // clamp eigensolver jitter at the domain boundary
    Ok(eigs.into_iter().map(|l| l.clamp(0.0, 1.0 - 1e-12)).collect())
}

fn cmd_cca_analyze(r: &Resolved) -> Result<String> {
    let cfg = &r.cfg;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| Error::Config("cca-analyze requires --input <csv>".into()))?;
    let x_cols = parse_column_refs(
        cfg.x_cols
            .as_deref()
            .ok_or_else(|| Error::Config("cca-analyze requires --x-cols".into()))?,
    );
    let y_cols = parse_column_refs(
        cfg.y_cols
            .as_deref()
            .ok_or_else(|| Error::Config("cca-analyze requires --y-cols".into()))?,
    );
    let mut warnings = Vec::new();
    let mut frame = ingest_csv(&input, &x_cols, &y_cols)?;
    if frame.dropped_rows > 0 {
        warnings.push(format!(
            "dropped {} row(s) with missing values in selected columns",
            frame.dropped_rows
        ));
    }
    if frame.p() > frame.q() {
        // the analysis operates on the smaller block; correlations are
        // symmetric in the two blocks
        std::mem::swap(&mut frame.x, &mut frame.y);
        std::mem::swap(&mut frame.x_names, &mut frame.y_names);
        warnings.push("x block is larger than y; blocks swapped for analysis".into());
    }
    let (p, q, n) = (frame.p(), frame.q(), frame.retained_rows);
    let lambda_sq = sample_cca_spectrum(&frame)?;
    let reports = estimate_cca(&lambda_sq, p, q, n)?;
    let spikes_count = cfg.spikes_count.unwrap_or(1).min(p);
    // variance scales use the non-spiked sample correlations as the bulk
    let rest: Vec<f64> = lambda_sq[spikes_count..].to_vec();
    let chain = if rest.is_empty() {
        None
    } else {
        CcaChain::new(
            p - spikes_count,
            q,
            n,
            DiscreteMeasure::from_eigenvalues(&rest)?,
        )
        .ok()
    };
    let mut estimates = Vec::new();
    let mut est_cells: Vec<(usize, f64, f64, Option<f64>)> = Vec::new();
    for k in 0..spikes_count {
        let rho_sq = reports[k].estimate;
        let scale = chain.as_ref().and_then(|c| match eta(c, rho_sq) {
            Ok(s) => Some(Field::Real.beta() * s.eta),
            Err(e) => {
                warnings.push(format!("no variance scale for estimate {k}: {e}"));
                None
            }
        });
        est_cells.push((k, lambda_sq[k], rho_sq, scale));
        estimates.push(
            obj()
                .with("index", k)
                .with("lambda_sq", lambda_sq[k])
                .with(
                    "fisher_scale",
                    reports[k].intermediate.map(Json::Float).unwrap_or(Json::Null),
                )
                .with("rho_sq_hat", rho_sq)
                .with("exclusion_set_size", reports[k].exclusion_set_size)
                .with("beta_eta", scale.map(Json::Float).unwrap_or(Json::Null)),
        );
    }
    let scale_f = (n - q) as f64 / q as f64;
    let fisher_scale: Vec<f64> = lambda_sq.iter().map(|&l| l / (1.0 - l) * scale_f).collect();
    let echo = obj()
        .with("input", input.as_str())
        .with("x_cols", frame.x_names.join(","))
        .with("y_cols", frame.y_names.join(","))
        .with("spikes_count", spikes_count);
    let results = obj()
        .with("p", p)
        .with("q", q)
        .with("n_retained", n)
        .with("dropped_rows", frame.dropped_rows)
        .with("lambda_sq", Json::floats(&lambda_sq))
        .with("fisher_scale", Json::floats(&fisher_scale))
        .with("estimates", Json::Array(estimates))
        .with("tracy_widom_p_value", "not computed (out of scope)");
    let header = vec!["index", "lambda_sq", "fisher_scale", "rho_sq_hat", "beta_eta"];
    let rows = (0..p)
        .map(|k| {
            let est = est_cells.iter().find(|c| c.0 == k);
            vec![
                Cell::UInt(k as u64),
                Cell::Float(lambda_sq[k]),
                Cell::Float(fisher_scale[k]),
                est.map(|c| Cell::Float(c.2)).unwrap_or(Cell::Str(String::new())),
                est.and_then(|c| c.3.map(Cell::Float))
                    .unwrap_or(Cell::Str(String::new())),
            ]
        })
        .collect();
    render(r, echo, results, warnings, Some((header, rows)))
}

// ------------------------------------------------------------------ lsd ----

fn curve_payload(curve: &DensityCurve) -> Json {
    obj()
        .with("xs", Json::floats(&curve.xs))
        .with("density", Json::floats(&curve.density))
        .with("cdf", Json::floats(&curve.cdf))
}

fn grid_json(g: &GridConfig) -> Json {
    obj().with("lo", g.lo).with("hi", g.hi).with("points", g.points)
}

fn cmd_lsd(r: &Resolved) -> Result<String> {
    let cfg = &r.cfg;
    let model = cfg.model.clone().unwrap_or_else(|| "covariance".into());
    let (echo, curve) = match model.as_str() {
        "covariance" => {
            let c1 = cfg
                .c1
                .or_else(|| match (cfg.p, cfg.n) {
                    (Some(p), Some(n)) => Some(p as f64 / n as f64),
                    _ => None,
                })
                .unwrap_or(0.1);
            let bulk = parse_bulk(cfg, 1.0)?;
            let g = cfg.grid.unwrap_or(GridConfig { lo: 0.05, hi: 4.5, points: 500 });
            let curve = lsd_curve_cov(&bulk, c1, g.lo, g.hi, g.points)?;
            let echo = obj()
                .with("model", "covariance")
                .with("c1", c1)
                .with("bulk", bulk_json(&bulk))
                .with("grid", grid_json(&g));
            (echo, curve)
        }
        "fisher" => {
            let c1 = cfg.c1.unwrap_or(0.1);
            let c2 = cfg.c2.unwrap_or(0.2);
            let bulk = parse_bulk(cfg, 1.0)?;
            let g = cfg.grid.unwrap_or(GridConfig { lo: 0.05, hi: 9.0, points: 500 });
            let curve = lsd_curve_fisher(&bulk, c1, c2, g.lo, g.hi, g.points)?;
            let echo = obj()
                .with("model", "fisher")
                .with("c1", c1)
                .with("c2", c2)
                .with("bulk", bulk_json(&bulk))
                .with("grid", grid_json(&g));
            (echo, curve)
        }
        "cca" => {
            let p = cfg.p.unwrap_or(200);
            let q = cfg.q.unwrap_or(200);
            let n = cfg.n.unwrap_or(1000);
            let bulk = parse_bulk(cfg, 0.0)?;
            let chain = CcaChain::new(p, q, n, bulk.clone())?;
            let g = cfg.grid.unwrap_or(GridConfig { lo: 0.005, hi: 0.995, points: 500 });
            let curve = lsd_curve_cca(&chain, g.lo, g.hi, g.points)?;
            let echo = obj()
                .with("model", "cca")
                .with("p", p)
                .with("q", q)
                .with("n", n)
                .with("bulk", bulk_json(&bulk))
                .with("grid", grid_json(&g));
            (echo, curve)
        }
        other => {
            return Err(Error::Config(format!(
                "model must be covariance, fisher, or cca, got '{other}'"
            )))
        }
    };
    let header = vec!["x", "density", "cdf"];
    let rows = curve
        .xs
        .iter()
        .zip(curve.density.iter())
        .zip(curve.cdf.iter())
        .map(|((&x, &d), &c)| vec![Cell::Float(x), Cell::Float(d), Cell::Float(c)])
        .collect();
    render(
        r,
        echo,
        curve_payload(&curve),
        Vec::new(),
        Some((header, rows)),
    )
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 engine or I/O failure (or a failed `verify`),
//! 2 invalid input, 3 size cap exceeded.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::correlation_gap::{correlation_gap_with, write_gap_csv, GapReport};
use crate::cost_sharing::{certify, certify_partial_prefix, incremental_scheme, lift_scheme, Certification, PartialPrefixCheck};
use crate::distributions::{independent_expectation_mc, McEstimate};
use crate::error::{Error, Result};
use crate::instances::{builtin, BuiltinParams, NamedInstance, Payload, BUILTINS};
use crate::model::{Instance, SetFunction};
use crate::robust::{approximation_ratio, DecisionSpace, RobustSolveReport};
use crate::simplex::LpOptions;
use crate::split::{verify_split_properties, SplitMap};
use crate::verify::{verify_all, verify_named, VerifyReport};
use crate::welfare::welfare_report;
use crate::worst_case::{check_certificate, worst_case_lp_with, CertificateCheck, WorstCaseResult, CERTIFICATE_TOL};

#[derive(Debug, Parser)]
#[command(name = "corrgap", version, about = "Correlation-robust expectations of set functions")]
pub struct Cli {
    /// Print the built-in instance names and exit.
    #[arg(long, global = false)]
    pub list_instances: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Worst-case and independent expectations and their ratio.
    Gap(GapArgs),
    /// Worst-case distribution with its dual certificate.
    WorstCase(CommonArgs),
    /// Robust and independent decisions over a decision space.
    Robust(CommonArgs),
    /// Welfare with identical players: integer optimum, upper bound, rounding.
    Welfare(WelfareArgs),
    /// Check the split properties for given copy counts.
    SplitVerify(SplitArgs),
    /// Certify the incremental cost-sharing scheme, optionally lifted to a split.
    CertifyScheme(CertifyArgs),
    /// Recompute expected facts; `--all` runs the full regression suite.
    Verify(VerifyArgs),
    /// Print the built-in instance names.
    ListInstances(OutputArgs),
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON file holding an instance, a decision space or a named instance.
    #[arg(long, conflicts_with = "builtin")]
    pub instance: Option<PathBuf>,
    /// Built-in instance name (see `list-instances`).
    #[arg(long)]
    pub builtin: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simplex pivot tolerance.
    #[arg(long)]
    pub tol_lp: Option<f64>,
    /// Tolerance for certificate and property checks.
    #[arg(long)]
    pub tol_check: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also estimate the independent expectation by Monte Carlo (needs --seed).
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct WelfareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of players; inferred from uniform marginals 1/K when omitted.
    #[arg(long)]
    pub players: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Copies per element, comma separated; defaults to 2 for every element.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Copies per element for the lifted scheme.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
    /// Block label per copy, enabling the partial-prefix check.
    #[arg(long, value_delimiter = ',', requires = "counts")]
    pub partition: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Run every built-in fact and every property suite.
    #[arg(long)]
    pub all: bool,
}

/// Maps an error onto the exit-code contract.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_size_cap() {
        3
    } else if e.is_validation() {
        2
    } else {
        1
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("CORRGAP_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::invalid(format!("CORRGAP_THREADS must be a positive integer, got {value:?}")))?;
    // A pool may already exist when the CLI runs in-process more than once.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<i32> {
    if cli.list_instances {
        return list_instances(&OutputArgs { out: None, format: Format::Json }).map(|_| 0);
    }
    let Some(command) = cli.command else {
        return Err(Error::invalid("no command given; try --help"));
    };
    match command {
        Command::Gap(a) => cmd_gap(&a).map(|_| 0),
        Command::WorstCase(a) => cmd_worst_case(&a).map(|_| 0),
        Command::Robust(a) => cmd_robust(&a).map(|_| 0),
        Command::Welfare(a) => cmd_welfare(&a).map(|_| 0),
        Command::SplitVerify(a) => cmd_split_verify(&a).map(|_| 0),
        Command::CertifyScheme(a) => cmd_certify(&a).map(|_| 0),
        Command::Verify(a) => cmd_verify(&a),
        Command::ListInstances(a) => list_instances(&a).map(|_| 0),
    }
}

fn load(a: &CommonArgs) -> Result<NamedInstance> {
    match (&a.instance, &a.builtin) {
        (Some(path), None) => load_file(path),
        (None, Some(name)) => builtin(name, BuiltinParams { n: a.n, k: a.k, seed: a.seed }),
        _ => Err(Error::invalid("give exactly one of --instance or --builtin")),
    }
}

fn load_file(path: &PathBuf) -> Result<NamedInstance> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let name = path.display().to_string();
    let named = if value.get("payload").is_some() {
        serde_json::from_value::<NamedInstance>(value)?
    } else if value.get("decisions").is_some() {
        NamedInstance {
            name,
            description: String::new(),
            payload: Payload::Space(serde_json::from_value(value)?),
            facts: Vec::new(),
        }
    } else {
        NamedInstance {
            name,
            description: String::new(),
            payload: Payload::Instance(serde_json::from_value(value)?),
            facts: Vec::new(),
        }
    };
    match &named.payload {
        Payload::Instance(inst) => inst.validate()?,
        Payload::Space(space) => space.validate()?,
    }
    Ok(named)
}

fn lp_options(a: &CommonArgs) -> Result<LpOptions> {
    let mut options = LpOptions::default();
    if let Some(t) = a.tol_lp {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("--tol-lp must lie in (0, 1), got {t}")));
        }
        options.pivot_tol = t;
    }
    Ok(options)
}

fn check_tol(a: &CommonArgs) -> Result<f64> {
    match a.tol_check {
        Some(t) if !(t >= 0.0 && t.is_finite()) => Err(Error::invalid(format!("--tol-check must be finite and >= 0, got {t}"))),
        Some(t) => Ok(t),
        None => Ok(CERTIFICATE_TOL),
    }
}

/// `(label, instance)` pairs: one for an instance, one per decision for a
/// decision space.
fn instances_of(named: &NamedInstance) -> Vec<(String, Instance)> {
    match &named.payload {
        Payload::Instance(inst) => vec![(named.name.clone(), inst.clone())],
        Payload::Space(space) => space
            .decisions
            .iter()
            .map(|d| (d.label.clone(), Instance { function: d.function.clone(), marginals: space.marginals.clone() }))
            .collect(),
    }
}

fn require_instance(named: &NamedInstance) -> Result<&Instance> {
    match &named.payload {
        Payload::Instance(inst) => Ok(inst),
        Payload::Space(_) => Err(Error::invalid(format!("{} is a decision space; this command needs one instance", named.name))),
    }
}

fn require_space(named: &NamedInstance) -> Result<&DecisionSpace> {
    match &named.payload {
        Payload::Space(space) => Ok(space),
        Payload::Instance(_) => Err(Error::invalid(format!("{} is a single instance; this command needs a decision space", named.name))),
    }
}

fn emit_json<T: Serialize>(output: &OutputArgs, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(output, text.as_bytes())
}

fn emit_csv<T: Serialize>(output: &OutputArgs, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_bytes(output, &bytes)
}

fn write_bytes(output: &OutputArgs, bytes: &[u8]) -> Result<()> {
    match &output.out {
        Some(path) => fs::write(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GapRow {
    label: String,
    #[serde(flatten)]
    report: GapReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    independent_mc: Option<McEstimate>,
}

fn cmd_gap(a: &GapArgs) -> Result<()> {
    let c = &a.common;
    if a.samples.is_some() && c.seed.is_none() {
        return Err(Error::invalid("Monte Carlo estimation (--samples) requires --seed"));
    }
    let named = load(c)?;
    let options = lp_options(c)?;
    let mut rows = Vec::new();
    for (label, inst) in instances_of(&named) {
        let report = correlation_gap_with(&inst, None, &options)?;
        let independent_mc = match (a.samples, c.seed) {
            (Some(samples), Some(seed)) => Some(independent_expectation_mc(&inst.function, &inst.marginals, samples, seed)?),
            _ => None,
        };
        rows.push(GapRow { label, report, independent_mc });
    }
    match c.output.format {
        Format::Json if rows.len() == 1 => emit_json(&c.output, &rows[0]),
        Format::Json => emit_json(&c.output, &serde_json::json!({ "name": named.name, "decisions": rows })),
        Format::Csv => {
            let plain: Vec<(String, GapReport)> = rows.into_iter().map(|r| (r.label, r.report)).collect();
            let mut buf = Vec::new();
            write_gap_csv(&mut buf, &plain)?;
            write_bytes(&c.output, &buf)
        }
    }
}

#[derive(Serialize)]
struct WorstCaseRow {
    label: String,
    #[serde(flatten)]
    result: WorstCaseResult,
    certificate: CertificateCheck,
    certificate_holds: bool,
}

#[derive(Serialize)]
struct SupportRow<'a> {
    label: &'a str,
    mask: u32,
    elements: String,
    p: f64,
}

fn cmd_worst_case(a: &CommonArgs) -> Result<()> {
    let named = load(a)?;
    let options = lp_options(a)?;
    let tol = check_tol(a)?;
    let mut rows = Vec::new();
    for (label, inst) in instances_of(&named) {
        let result = worst_case_lp_with(&inst, &options)?;
        let certificate = check_certificate(&inst, &result)?;
        rows.push(WorstCaseRow { label, certificate_holds: certificate.holds(tol), result, certificate });
    }
    match a.output.format {
        Format::Json if rows.len() == 1 => emit_json(&a.output, &rows[0]),
        Format::Json => emit_json(&a.output, &serde_json::json!({ "name": named.name, "decisions": rows })),
        Format::Csv => {
            let support: Vec<SupportRow> = rows
                .iter()
                .flat_map(|r| {
                    r.result.distribution.support.iter().map(|s| SupportRow {
                        label: &r.label,
                        mask: s.mask.bits(),
                        elements: format!("{:?}", s.mask),
                        p: s.p,
                    })
                })
                .collect();
            emit_csv(&a.output, &support)
        }
    }
}

#[derive(Serialize)]
struct RobustOutput {
    name: String,
    #[serde(flatten)]
    report: RobustSolveReport,
}

fn cmd_robust(a: &CommonArgs) -> Result<()> {
    let named = load(a)?;
    let space = require_space(&named)?;
    let report = approximation_ratio(space)?;
    match a.output.format {
        Format::Json => emit_json(&a.output, &RobustOutput { name: named.name.clone(), report }),
        Format::Csv => emit_csv(&a.output, &report.decisions),
    }
}

fn infer_players(inst: &Instance) -> Result<usize> {
    let p = inst.marginals.first().copied().unwrap_or(0.0);
    let k = (1.0 / p).round();
    let uniform = inst.marginals.iter().all(|&q| q == p);
    if p > 0.0 && uniform && (k * p - 1.0).abs() < 1e-12 {
        Ok(k as usize)
    } else {
        Err(Error::invalid("marginals are not uniform 1/K; pass --players"))
    }
}

fn cmd_welfare(a: &WelfareArgs) -> Result<()> {
    let c = &a.common;
    let named = load(c)?;
    let inst = require_instance(&named)?;
    let k = match a.players {
        Some(k) => k,
        None => infer_players(inst)?,
    };
    let report = welfare_report(&inst.function, k)?;
    match c.output.format {
        Format::Json => emit_json(&c.output, &report),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                n: usize,
                k: usize,
                opt_ip: f64,
                upper_bound: f64,
                rounding_value: f64,
                ratio_rounding_over_opt: Option<f64>,
                ratio_opt_over_upper: Option<f64>,
            }
            emit_csv(
                &c.output,
                &[Row {
                    n: report.n,
                    k: report.k,
                    opt_ip: report.opt_ip,
                    upper_bound: report.upper_bound,
                    rounding_value: report.rounding_value,
                    ratio_rounding_over_opt: report.ratio_rounding_over_opt,
                    ratio_opt_over_upper: report.ratio_opt_over_upper,
                }],
            )
        }
    }
}

fn cmd_split_verify(a: &SplitArgs) -> Result<()> {
    let c = &a.common;
    let named = load(c)?;
    let inst = require_instance(&named)?;
    let counts = a.counts.clone().unwrap_or_else(|| vec![2; inst.n()]);
    let report = verify_split_properties(inst, counts)?;
    match c.output.format {
        Format::Json => emit_json(&c.output, &report),
        Format::Csv => {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let r = &report;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "counts",
                "original_monotone",
                "p1_monotone",
                "worst_original",
                "worst_split",
                "p2_worst_case_preserved",
                "independent_original",
                "independent_split",
                "p3_independent_not_increased",
                "kappa_original",
                "kappa_split",
                "kappa_not_decreased",
            ])?;
            w.write_record([
                r.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
                r.original_monotone.to_string(),
                r.p1_monotone.to_string(),
                r.worst_original.to_string(),
                r.worst_split.to_string(),
                r.p2_worst_case_preserved.to_string(),
                r.independent_original.to_string(),
                r.independent_split.to_string(),
                r.p3_independent_not_increased.to_string(),
                opt(r.kappa_original),
                opt(r.kappa_split),
                r.kappa_not_decreased.to_string(),
            ])?;
            let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            write_bytes(&c.output, &buf)
        }
    }
}

#[derive(Serialize)]
struct CertifyOutput {
    name: String,
    incremental: Certification,
    #[serde(skip_serializing_if = "Option::is_none")]
    lifted: Option<Certification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    partial_prefix: Option<PartialPrefixCheck>,
}

fn cmd_certify(a: &CertifyArgs) -> Result<()> {
    let c = &a.common;
    let named = load(c)?;
    let f = require_instance(&named)?.function.clone();
    let incremental = certify(&incremental_scheme(f.clone()), &f)?;
    let (lifted, partial_prefix) = match &a.counts {
        None => (None, None),
        Some(counts) => {
            let mut map = SplitMap::new(counts.clone())?;
            if let Some(labels) = &a.partition {
                map = map.with_partition(labels.clone())?;
            }
            if map.original_size() != f.n() {
                return Err(Error::invalid(format!("--counts has {} entries, expected {}", map.original_size(), f.n())));
            }
            let scheme = lift_scheme(incremental_scheme(f.clone()), map.clone())?;
            let split_f = SetFunction::Split { base: Box::new(f), map: map.clone() };
            let cert = certify(&scheme, &split_f)?;
            let prefix = if map.partition().is_some() { Some(certify_partial_prefix(&scheme)?) } else { None };
            (Some(cert), prefix)
        }
    };
    let out = CertifyOutput { name: named.name.clone(), incremental, lifted, partial_prefix };
    match c.output.format {
        Format::Json => emit_json(&c.output, &out),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row<'a> {
                scheme: &'a str,
                n: usize,
                beta_star: Option<f64>,
                eta_star: Option<f64>,
                eta_star_full_set: Option<f64>,
                over_recovery: f64,
                cross_monotone: bool,
            }
            let row = |scheme, c: &Certification| Row {
                scheme,
                n: c.n,
                beta_star: c.beta_star,
                eta_star: c.eta_star,
                eta_star_full_set: c.eta_star_full_set,
                over_recovery: c.over_recovery,
                cross_monotone: c.cross_monotone,
            };
            let mut rows = vec![row("incremental", &out.incremental)];
            if let Some(l) = &out.lifted {
                rows.push(row("lifted", l));
            }
            emit_csv(&c.output, &rows)
        }
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let c = &a.common;
    let report: VerifyReport = if a.all {
        if c.instance.is_some() || c.builtin.is_some() {
            return Err(Error::invalid("--all takes no instance"));
        }
        verify_all()?
    } else {
        verify_named(&load(c)?)
    };
    match c.output.format {
        Format::Json => emit_json(&c.output, &report)?,
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                check: String,
                expected: Option<f64>,
                actual: Option<f64>,
                pass: bool,
            }
            let mut rows: Vec<Row> = report
                .facts
                .iter()
                .map(|f| Row {
                    check: format!("{} {}", f.instance, serde_json::to_string(&f.quantity).unwrap_or_default()),
                    expected: Some(f.expected),
                    actual: f.actual,
                    pass: f.pass,
                })
                .collect();
            rows.extend(report.suites.iter().map(|s| Row { check: s.name.clone(), expected: None, actual: None, pass: s.pass }));
            emit_csv(&c.output, &rows)?;
        }
    }
    Ok(if report.all_pass { 0 } else { 1 })
}

fn list_instances(output: &OutputArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Entry {
        name: &'static str,
        description: &'static str,
    }
    let entries: Vec<Entry> = BUILTINS.iter().map(|&(name, description)| Entry { name, description }).collect();
    match output.format {
        Format::Json => emit_json(output, &entries),
        Format::Csv => emit_csv(output, &entries),
    }
}

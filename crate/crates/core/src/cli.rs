//! `cps` command-line front end.
//!
//! Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::PlatformConfig;
use crate::engine::{simulate, DemandMode, RunMetrics};
use crate::platform::{build_topology, PlatformKind};
use crate::report::{
    compare_runs, reference_rows, render_report, render_run, write_output, ReportFormat, GEOMEAN,
};
use crate::workload::{builtin, load_model, param_count, DnnModelSpec};

#[derive(Debug, Parser)]
#[command(
    name = "cps",
    version,
    about = "2.5D photonic chiplet accelerator simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a model descriptor and check its parameter count.
    Validate {
        /// Descriptor path or shipped model name.
        model: String,
    },
    /// Run one model on one platform.
    Simulate(SimulateArgs),
    /// Sweep models x platforms and compare against a baseline platform.
    Compare(CompareArgs),
    /// Dump the wired platform topology as JSON.
    Topology {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        platform: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Platform config (TOML); defaults to the shipped configuration.
    #[arg(long, env = "CPS_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json", "tsv"])]
    format: String,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    platform: Option<String>,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    no_overlap: bool,
    #[arg(long)]
    no_resipi: bool,
    #[arg(long)]
    epoch_us: Option<f64>,
    #[arg(long, value_parser = ["oracle", "trailing"])]
    demand: Option<String>,
    /// Per-layer rows instead of a single summary row.
    #[arg(long)]
    detail: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Comma-separated models, or `all` for the shipped set.
    #[arg(long, default_value = "all")]
    models: String,
    #[arg(long, default_value = "siph,elec,mono")]
    platforms: String,
    #[arg(long, default_value = "mono")]
    baseline: String,
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    output: OutputArgs,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn cli_main<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    2
                }
            };
        }
    };
    let result = match cli.command {
        Command::Validate { model } => validate(&model, stdout),
        Command::Simulate(args) => run_simulate(&args, stdout),
        Command::Compare(args) => run_compare(&args, stdout, stderr),
        Command::Topology {
            config,
            platform,
            out,
        } => run_topology(&config, platform.as_deref(), out.as_deref(), stdout),
    };
    match result {
        Ok(()) => 0,
        Err(Failure(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    }
}

fn load_config(arg: &ConfigArg) -> Result<PlatformConfig, Failure> {
    match &arg.config {
        Some(p) => Ok(PlatformConfig::from_path(p)?),
        None => Ok(PlatformConfig::shipped()),
    }
}

/// A descriptor file if `name` exists on disk, otherwise a shipped model
/// by stem (`lenet5`, `lenet5.desc` and `LeNet5` all resolve).
fn resolve_model(name: &str) -> Result<DnnModelSpec, Failure> {
    let path = Path::new(name);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure(format!("cannot read {name}: {e}")))?;
        return load_model(&text).map_err(|e| Failure(format!("{name}: {e}")));
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name);
    match builtin::load(stem) {
        Some(m) => m.map_err(|e| Failure(format!("{name}: {e}"))),
        None => Err(Failure(format!(
            "no descriptor file or shipped model named `{name}`"
        ))),
    }
}

fn parse_platform(s: &str) -> Result<PlatformKind, Failure> {
    PlatformKind::parse(s).ok_or_else(|| {
        Failure(format!(
            "unknown platform `{s}` (expected siph, elec or mono)"
        ))
    })
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> CmdResult {
    match out {
        Some(p) => Ok(write_output(text, p)?),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn validate(model: &str, stdout: &mut dyn Write) -> CmdResult {
    let m = resolve_model(model)?;
    writeln!(stdout, "{} parameters OK", param_count(&m))?;
    Ok(())
}

fn run_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> CmdResult {
    let cfg = load_config(&args.config)?;
    let model = resolve_model(&args.model)?;
    let kind = match &args.platform {
        Some(p) => parse_platform(p)?,
        None => cfg.platform.kind,
    };
    let mut options = cfg.engine.clone();
    if args.no_overlap {
        options.overlap = false;
    }
    if args.no_resipi {
        options.resipi = false;
    }
    if let Some(us) = args.epoch_us {
        options.epoch_s = us * 1e-6;
    }
    if let Some(d) = &args.demand {
        options.demand = if d == "trailing" {
            DemandMode::Trailing
        } else {
            DemandMode::Oracle
        };
    }
    options.validate().map_err(Failure)?;
    let topo = build_topology(&cfg, kind)?;
    let metrics = simulate(&model, &topo, &cfg.devices, &options)?;
    let format = ReportFormat::parse(&args.output.format)?;
    emit(
        &render_run(&metrics, format, args.detail)?,
        args.output.out.as_deref(),
        stdout,
    )
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .collect()
}

fn run_compare(args: &CompareArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let cfg = load_config(&args.config)?;
    let models: Vec<DnnModelSpec> = if args.models.trim().eq_ignore_ascii_case("all") {
        builtin::all()
    } else {
        split_list(&args.models)
            .into_iter()
            .map(resolve_model)
            .collect::<Result<_, _>>()?
    };
    let kinds: Vec<PlatformKind> = split_list(&args.platforms)
        .into_iter()
        .map(parse_platform)
        .collect::<Result<_, _>>()?;
    if models.is_empty() || kinds.is_empty() {
        return Err(Failure("need at least one model and one platform".into()));
    }
    let baseline = parse_platform(&args.baseline)?;
    if !kinds.contains(&baseline) {
        return Err(Failure(format!(
            "baseline `{}` is not among the compared platforms",
            baseline.name()
        )));
    }
    let topos = kinds
        .iter()
        .map(|&k| build_topology(&cfg, k))
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(&DnnModelSpec, usize)> = models
        .iter()
        .flat_map(|m| (0..topos.len()).map(move |t| (m, t)))
        .collect();
    let runs: Vec<RunMetrics> = jobs
        .par_iter()
        .map(|&(m, t)| simulate(m, &topos[t], &cfg.devices, &cfg.engine))
        .collect::<Result<_, _>>()?;

    let mut rows = compare_runs(&runs, baseline.name())?;
    let summary: Vec<String> = rows
        .iter()
        .filter(|r| r.model == GEOMEAN && r.platform != baseline.name())
        .map(|r| {
            format!(
                "geomean {}/{}: latency {:.3}x, power {:.3}x, epb {:.3}x",
                r.platform,
                baseline.name(),
                r.normalized_latency.unwrap_or(f64::NAN),
                r.normalized_power.unwrap_or(f64::NAN),
                r.normalized_epb.unwrap_or(f64::NAN),
            )
        })
        .collect();
    rows.extend(reference_rows());
    let format = ReportFormat::parse(&args.output.format)?;
    let text = render_report(&rows, format)?;
    emit(&text, args.output.out.as_deref(), stdout)?;
    // keep piped table output clean
    let note: &mut dyn Write = if args.output.out.is_some() {
        stdout
    } else {
        stderr
    };
    for line in summary {
        writeln!(note, "{line}")?;
    }
    Ok(())
}

fn run_topology(
    config: &ConfigArg,
    platform: Option<&str>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> CmdResult {
    let cfg = load_config(config)?;
    let kind = match platform {
        Some(p) => parse_platform(p)?,
        None => cfg.platform.kind,
    };
    let topo = build_topology(&cfg, kind)?;
    let mut text = serde_json::to_string_pretty(&topo)?;
    text.push('\n');
    emit(&text, out, stdout)
}

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use netspot::geometry::{bounding_region, snap_events};
use netspot::gibbs::{run_chains, SamplerConfig, Trace};
use netspot::model::{Hyperparams, Prior};
use netspot::posterior::{
    modal_partition, num_groups_posterior, num_groups_posterior_restricted, restrict,
};
use netspot::{aggregate, io, Execution};
use serde::{Deserialize, Serialize};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "netspot",
    version,
    about = "Hot-spot detection on linear networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grid network with planted clusters.
    Simulate(SimulateArgs),
    /// Snap events, aggregate them per edge and run the Gibbs sampler.
    Fit(FitArgs),
    /// Summarize one or more traces into plot-ready tables.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML scenario file.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed stored in the scenario.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    /// Rerun exactly the fit recorded in a manifest; other fit flags are ignored.
    #[arg(long, conflicts_with_all = ["edges", "events"])]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    edges: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    events: Option<PathBuf>,
    #[arg(long, default_value_t = 15_000)]
    iters: usize,
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Gamma prior `shape,rate` on cluster intensities.
    #[arg(long, value_parser = parse_pair, default_value = "1.1,0.1")]
    lambda_prior: (f64, f64),
    /// Gamma prior `shape,rate` on the penalty.
    #[arg(long, value_parser = parse_pair, default_value = "1e11,1e4")]
    tau_prior: (f64, f64),
    /// Gamma prior `shape,rate` on the total mass.
    #[arg(long, value_parser = parse_pair, default_value = "1.1,0.1")]
    theta_prior: (f64, f64),
    #[arg(long)]
    fixed_theta: Option<f64>,
    #[arg(long)]
    fixed_tau: Option<f64>,
    /// Maximum snapping distance; unlimited by default.
    #[arg(long)]
    snap_tol: Option<f64>,
    /// Relative margin added around the network's bounding box.
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    /// Resolution thresholds recorded in the manifest for summarization.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,6")]
    lambda_star: Vec<f64>,
    /// Output directory; with `--manifest`, overrides the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Trace files in JSON-lines form.
    #[arg(long, num_args = 1.., required = true)]
    trace: Vec<PathBuf>,
    /// Pool several chains into one trace.
    #[arg(long)]
    pool: bool,
    /// Per-edge dataset written by `fit`; defaults to `dataset.csv` beside the first trace.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,6")]
    lambda_star: Vec<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Everything needed to reproduce a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RunManifest {
    tool_version: String,
    seed: u64,
    edges: PathBuf,
    events: PathBuf,
    out: PathBuf,
    config: SamplerConfig,
    hyper: Hyperparams,
    chains: usize,
    /// `None` means unlimited.
    snap_tol: Option<f64>,
    margin: f64,
    lambda_star: Vec<f64>,
    traces: Vec<PathBuf>,
}

/// Marks failures caused by unreadable or malformed inputs.
#[derive(Debug)]
struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input<T>(path: &Path, r: netspot::Result<T>) -> Result<T> {
    r.map_err(|e| InputError(format!("{}: {e}", path.display())).into())
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn threshold_tag(l: f64) -> String {
    format!("{l}")
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let scenario = input(&args.scenario, io::read_scenario_file(&args.scenario))?;
    let seed = args.seed.or(scenario.seed).unwrap_or(0);
    let (network, events, truth) = input(&args.scenario, scenario.generate(seed))?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    io::write_edges_file(&args.out.join("edges.csv"), &network)?;
    io::write_events_file(&args.out.join("events.csv"), &events)?;
    io::write_ground_truth_file(&args.out.join("ground_truth.csv"), &truth)?;
    eprintln!(
        "{} events on {} edges written to {}",
        events.len(),
        truth.labels.len(),
        args.out.display()
    );
    Ok(())
}

fn manifest_from_flags(args: &FitArgs) -> Result<RunManifest> {
    let prior = |fixed: Option<f64>, (shape, rate): (f64, f64)| match fixed {
        Some(v) => Prior::fixed(v),
        None => Prior::gamma(shape, rate),
    };
    let hyper = Hyperparams {
        lambda_shape: args.lambda_prior.0,
        lambda_rate: args.lambda_prior.1,
        theta: prior(args.fixed_theta, args.theta_prior),
        tau: prior(args.fixed_tau, args.tau_prior),
    };
    let config = SamplerConfig {
        iterations: args.iters,
        burnin: args.burnin,
        thin: args.thin,
        seed: args.seed,
        hyper,
    };
    Ok(RunManifest {
        tool_version: VERSION.to_string(),
        seed: args.seed,
        edges: std::path::absolute(args.edges.as_ref().expect("required by clap"))?,
        events: std::path::absolute(args.events.as_ref().expect("required by clap"))?,
        out: std::path::absolute(args.out.as_deref().unwrap_or(Path::new(".")))?,
        config,
        hyper,
        chains: args.chains,
        snap_tol: args.snap_tol.filter(|t| t.is_finite()),
        margin: args.margin,
        lambda_star: args.lambda_star.clone(),
        traces: (0..args.chains)
            .map(|c| PathBuf::from(format!("trace.{c}.jsonl")))
            .collect(),
    })
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let manifest = match &args.manifest {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
            let m: RunManifest = serde_json::from_str(&text)
                .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
            if m.tool_version != VERSION {
                eprintln!(
                    "warning: manifest written by version {}, running {VERSION}",
                    m.tool_version
                );
            }
            RunManifest {
                out: args.out.clone().unwrap_or(m.out.clone()),
                ..m
            }
        }
        None => manifest_from_flags(args)?,
    };
    if manifest.chains == 0 {
        return Err(InputError("--chains must be at least 1".into()).into());
    }
    if manifest.config.hyper != manifest.hyper || manifest.config.seed != manifest.seed {
        return Err(InputError(
            "manifest hyperparameters or seed disagree with its sampler config".into(),
        )
        .into());
    }
    input(Path::new("configuration"), manifest.config.validate())?;

    let network = input(&manifest.edges, io::read_edges_file(&manifest.edges))?;
    let raw = input(&manifest.events, io::read_events_file(&manifest.events))?;
    let events = if raw.assignments.is_some() {
        input(&manifest.events, raw.validate(&network).map(|_| raw))?
    } else {
        let tol = manifest.snap_tol.unwrap_or(f64::INFINITY);
        input(&manifest.events, snap_events(&network, &raw, tol))?
    };
    let region = input(&manifest.edges, bounding_region(&network, manifest.margin))?;
    let dataset = input(&manifest.events, aggregate(&network, &events, &region))?;

    let traces = run_chains(
        &dataset,
        &manifest.config,
        manifest.chains,
        Execution::default(),
    )?;

    let out = &manifest.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    io::write_dataset_file(&out.join("dataset.csv"), &dataset)?;
    for (trace, name) in traces.iter().zip(&manifest.traces) {
        io::write_trace_file(&out.join(name), trace)?;
    }
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(out.join("manifest.json"), json + "\n").context("writing manifest")?;
    eprintln!(
        "{} edges, {} events; {} chain(s) of {} records written to {}",
        dataset.n(),
        dataset.total_events(),
        traces.len(),
        manifest.config.kept(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    records: usize,
    modal_frequency: f64,
    modal_records: usize,
    modal_groups: usize,
    mean_intensity: Vec<f64>,
    mean_groups: f64,
    restricted: Vec<RestrictedSummary>,
}

#[derive(Serialize)]
struct RestrictedSummary {
    lambda_star: f64,
    selected_groups: Vec<usize>,
    mean_groups: f64,
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<()> {
    if args.trace.len() > 1 && !args.pool {
        return Err(InputError("several traces given; pass --pool to combine them".into()).into());
    }
    let mut traces = Vec::new();
    for path in &args.trace {
        traces.push(input(path, io::read_trace_file(path))?);
    }
    let trace = Trace::pool(traces);
    if trace.is_empty() {
        return Err(InputError("trace has no records".into()).into());
    }
    let dataset_path = match &args.dataset {
        Some(p) => p.clone(),
        None => args.trace[0]
            .parent()
            .unwrap_or(Path::new("."))
            .join("dataset.csv"),
    };
    let summaries = input(
        &dataset_path,
        io::read_dataset_summaries_file(&dataset_path),
    )?;
    if summaries.len() != trace.records[0].partition.n() {
        bail!(InputError(format!(
            "{} has {} edges but the trace clusters {}",
            dataset_path.display(),
            summaries.len(),
            trace.records[0].partition.n()
        )));
    }
    for &l in &args.lambda_star {
        if !l.is_finite() || l < 0.0 {
            bail!(InputError(format!(
                "resolution threshold must be finite and nonnegative, got {l}"
            )));
        }
    }

    let est = modal_partition(&trace)?;
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    io::write_modal_partition_file(&out.join("modal_partition.csv"), &summaries, &est)?;
    io::write_lambda_samples_file(&out.join("lambda_samples.csv"), &est)?;
    let unrestricted = num_groups_posterior(&trace)?;
    io::write_distribution_file(&out.join("k_posterior.csv"), &unrestricted)?;

    let mut restricted = Vec::new();
    for &l in &args.lambda_star {
        let tag = threshold_tag(l);
        let selection = restrict(&est, l);
        io::write_hotspots_file(
            &out.join(format!("hotspots_{tag}.csv")),
            &summaries,
            &est,
            &selection,
        )?;
        let post = num_groups_posterior_restricted(&trace, l)?;
        io::write_distribution_file(&out.join(format!("k_posterior_{tag}.csv")), &post)?;
        restricted.push(RestrictedSummary {
            lambda_star: l,
            selected_groups: selection.selected_groups.iter().map(|g| g + 1).collect(),
            mean_groups: post.mean,
        });
    }
    let summary = Summary {
        records: trace.len(),
        modal_frequency: est.frequency,
        modal_records: est.m(),
        modal_groups: est.partition.k(),
        mean_intensity: est.mean_intensity.clone(),
        mean_groups: unrestricted.mean,
        restricted,
    };
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )
    .context("writing summary")?;
    eprintln!(
        "modal partition: {} groups, frequency {:.4}; E[K] = {:.3}",
        est.partition.k(),
        est.frequency,
        unrestricted.mean
    );
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let input = err.chain().any(|c| {
        c.downcast_ref::<InputError>().is_some()
            || c.downcast_ref::<netspot::Error>()
                .is_some_and(netspot::Error::is_input_error)
    });
    if input {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Summarize(a) => cmd_summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! `afesi`: selective tests for generated features, and the simulation
//! experiments built on them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afesi::afe::{SearchConfig, Transform};
use afesi::baselines::CoefficientSelection;
use afesi::harness::{
    load_csv, run_power_experiment, run_realdata_experiment, run_type1_experiment,
    write_records_csv, write_summary_json, ExperimentResult, ExperimentSpec, Mode, SigmaSpec,
};
use afesi::report::{run_single_test, Method};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "afesi", version, about = "Selective inference for auto-generated features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the search on a CSV and test each generated feature.
    Test(TestArgs),
    /// Type-I error experiment on null data.
    Type1(ExperimentArgs),
    /// Power experiment on data with planted nonlinear features.
    Power(ExperimentArgs),
    /// Subsampling experiment on a CSV.
    Realdata(RealdataArgs),
}

/// Search hyperparameters; defaults are D=6, N=3, M=3, γ=2 and all four
/// transformations.
#[derive(Args, Debug, Clone)]
struct SearchArgs {
    /// Maximum depth D.
    #[arg(long, default_value_t = 6)]
    depth: usize,
    /// Nodes generated per depth N.
    #[arg(long, default_value_t = 3)]
    nodes: usize,
    /// Parents kept per depth M.
    #[arg(long, default_value_t = 3)]
    parents: usize,
    /// Non-improvement tolerance γ.
    #[arg(long, default_value_t = 2)]
    gamma: u32,
    /// Transformations, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "sin,expc,sqrtabs,mul")]
    ops: Vec<Transform>,
    /// Relative residual below which a candidate is collinear.
    #[arg(long, default_value_t = 1e-6)]
    collinearity_tol: f64,
}

impl SearchArgs {
    fn config(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            max_depth: self.depth,
            max_nodes: self.nodes,
            max_parents: self.parents,
            tolerance: self.gamma,
            seed,
            transforms: self.ops.clone(),
            collinearity_tol: self.collinearity_tol,
        }
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    /// CSV with a header row.
    csv: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    target: String,
    /// Search seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// identity, ar:<rho>, scaled:<variance> or estimated.
    #[arg(long, default_value = "identity")]
    sigma: SigmaSpec,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_delimiter = ',', default_value = "proposed,oc,naive,bonferroni")]
    methods: Vec<Method>,
    /// Coefficients to test: `generated`, `all`, or 1-based indices `3,5`.
    #[arg(long, default_value = "generated")]
    features: String,
    /// Include wall times in the report.
    #[arg(long)]
    timing: bool,
    /// Write `report.json` here instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Replications (type1); power mode runs until --target-tests.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Base seed; replication r uses base + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// identity, ar:<rho>, scaled:<variance> or estimated.
    #[arg(long, default_value = "identity")]
    sigma: SigmaSpec,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Signal strength Δ (power).
    #[arg(long, default_value_t = 0.6)]
    delta: f64,
    /// Matched tests to collect (power).
    #[arg(long, default_value_t = 300)]
    target_tests: usize,
    #[arg(long, value_delimiter = ',', default_value = "proposed,oc,naive,bonferroni,ds")]
    methods: Vec<Method>,
    #[command(flatten)]
    search: SearchArgs,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "afesi-out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RealdataArgs {
    /// CSV with a header row.
    csv: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    target: String,
    #[command(flatten)]
    common: ExperimentArgs,
}

impl ExperimentArgs {
    fn spec(&self, mode: Mode) -> ExperimentSpec {
        ExperimentSpec {
            mode,
            n: self.n,
            m: self.m,
            sigma: self.sigma,
            delta: if mode == Mode::Power { self.delta } else { 0.0 },
            reps: self.reps,
            base_seed: self.seed,
            alpha: self.alpha,
            methods: self.methods.clone(),
            afe: self.search.config(0),
            target_tests: self.target_tests,
            threads: self.threads,
            csv: None,
        }
    }
}

fn parse_selection(text: &str) -> anyhow::Result<CoefficientSelection> {
    Ok(match text {
        "generated" => CoefficientSelection::Generated,
        "all" => CoefficientSelection::All,
        list => CoefficientSelection::Explicit(
            list.split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .with_context(|| format!("--features: expected generated, all or indices, got '{list}'"))?,
        ),
    })
}

fn cmd_test(args: &TestArgs) -> anyhow::Result<()> {
    let data = load_csv(&args.csv, &args.target)
        .with_context(|| format!("reading {}", args.csv.display()))?;
    for c in &data.dropped_columns {
        eprintln!("warning: dropped constant column '{c}'");
    }
    if !data.dropped_rows.is_empty() {
        eprintln!("warning: dropped {} rows with missing values", data.dropped_rows.len());
    }
    let config = args.search.config(args.seed);
    config.validate()?;
    let sigma = args.sigma.inference_covariance(&data.dataset)?;
    let selection = parse_selection(&args.features)?;
    let report = run_single_test(&data.dataset, &sigma, &config, &args.methods, &selection, args.timing)?;
    let json = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("report.json");
            fs::write(&path, json + "\n")?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn write_outputs(result: &ExperimentResult, out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_records_csv(out.join("records.csv"), &result.records)?;
    write_summary_json(out.join("summary.json"), &result.summary)?;
    let s = &result.summary;
    for m in &s.methods {
        println!(
            "{:<10} rate {:.4} ({}/{}) se {:.4} ks {:.4} mean_aic {:.3} empty {} errors {}",
            m.method.to_string(),
            m.rate,
            m.rejections,
            m.tests,
            m.se,
            m.ks_statistic,
            m.mean_aic,
            m.empty,
            m.errors
        );
    }
    if let (Some(matched), Some(budget)) = (s.matched_tests, s.rep_budget) {
        println!(
            "matched tests {matched} of target {} in {} reps (budget {budget}){}",
            s.spec.target_tests,
            s.reps_run,
            if s.target_reached == Some(true) { "" } else { ", target not reached" }
        );
    }
    println!("wrote {} and {}", out.join("records.csv").display(), out.join("summary.json").display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Test(args) => cmd_test(&args),
        Command::Type1(args) => {
            let result = run_type1_experiment(&args.spec(Mode::Type1))?;
            write_outputs(&result, &args.out)
        }
        Command::Power(args) => {
            let result = run_power_experiment(&args.spec(Mode::Power))?;
            write_outputs(&result, &args.out)
        }
        Command::Realdata(args) => {
            let data = load_csv(&args.csv, &args.target)
                .with_context(|| format!("reading {}", args.csv.display()))?;
            for c in &data.dropped_columns {
                eprintln!("warning: dropped constant column '{c}'");
            }
            let mut spec = args.common.spec(Mode::Realdata);
            spec.csv = Some(args.csv.clone());
            if spec.n > data.dataset.n() {
                bail!("--n {} exceeds the {} complete rows", spec.n, data.dataset.n());
            }
            let result = run_realdata_experiment(&data.dataset, &spec)?;
            write_outputs(&result, &args.common.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use lfabc::harness::{
    analytic_exponential_posterior, compare_chains, posterior_predictive, predictive_series, summarize,
    write_run_outputs, write_summary_files, ExperimentManifest, RunMetadata,
};
use lfabc::samplers::{read_chain_csv, run_chain};
use lfabc::simulators::SimulatorConfig;
use lfabc::Error;

#[derive(Parser)]
#[command(name = "lfabc", version, about = "Likelihood-free ABC-MCMC experiments")]
struct Cli {
    /// Worker threads for concurrent runs and simulation batches.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiment manifests.
    Run(RunArgs),
    /// Posterior summary, histograms and scatter data for a chain file.
    Summarize(SummarizeArgs),
    /// Posterior-predictive simulations from a finished run.
    Predictive(PredictiveArgs),
    /// Closed-form posterior for the exponential toy.
    Oracle(OracleArgs),
    /// Compare two chain files dimension by dimension.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, required = true)]
    manifest: Vec<PathBuf>,
    /// Override the chain seed of every manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Parent directory for run outputs (one subdirectory per manifest name).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Chain CSV written by `run`.
    chain: PathBuf,
    /// Defaults to the burn-in recorded in the neighbouring metadata.json.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Defaults to the chain's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long, default_value_t = 2000)]
    scatter: usize,
}

#[derive(Args)]
struct PredictiveArgs {
    /// Run directory containing chain.csv and metadata.json.
    run: PathBuf,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Read prior and observation from a manifest instead of the flags.
    #[arg(long, conflicts_with_all = ["alpha", "beta", "n", "y_bar"])]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long)]
    y_bar: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 0)]
    burn_in_a: usize,
    #[arg(long, default_value_t = 0)]
    burn_in_b: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Predictive(a) => cmd_predictive(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::NumericalDegeneracy { .. } => 3,
        _ => 1,
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> lfabc::Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> lfabc::Result<()> {
    let mut manifests = args
        .manifest
        .iter()
        .map(|p| ExperimentManifest::load(p))
        .collect::<lfabc::Result<Vec<_>>>()?;
    for m in &mut manifests {
        if let Some(s) = args.seed {
            m.run.seed = s;
        }
    }
    let mut names: Vec<&str> = manifests.iter().map(|m| m.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("manifest names must be unique within one run".into()));
    }
    let results: Vec<lfabc::Result<RunMetadata>> = manifests
        .par_iter()
        .map(|m| {
            let parent = args
                .out
                .clone()
                .or_else(|| m.output_dir.as_ref().map(|d| m.base_dir.join(d)))
                .unwrap_or_else(|| PathBuf::from("runs"));
            run_one(m, &parent.join(&m.name))
        })
        .collect();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(meta) => println!(
                "{}: {} samples, {} simulation calls, acceptance {:.3}, {:.1}s",
                meta.name, meta.samples, meta.total_calls, meta.acceptance_rate, meta.wall_time_secs
            ),
            Err(e) => {
                eprintln!("error: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn run_one(m: &ExperimentManifest, dir: &Path) -> lfabc::Result<RunMetadata> {
    let observed = m.observed()?;
    log::info!("running {} into {}", m.name, dir.display());
    let out = run_chain(&m.run, &observed)?;
    let stat_names = m.run.simulator.build()?.spec().stat_names.clone();
    write_run_outputs(m, &out, &stat_names, dir)
}

fn metadata_near(chain: &Path) -> Option<RunMetadata> {
    let p = chain.parent()?.join("metadata.json");
    p.is_file().then(|| RunMetadata::read(&p).ok()).flatten()
}

fn cmd_summarize(args: SummarizeArgs) -> lfabc::Result<()> {
    let table = read_chain_csv(&args.chain)?;
    let meta = metadata_near(&args.chain);
    let burn_in = args.burn_in.or(meta.as_ref().map(|m| m.burn_in)).unwrap_or(0);
    let summary = summarize(&table, burn_in)?;
    let dir = args
        .out
        .unwrap_or_else(|| args.chain.parent().unwrap_or(Path::new(".")).to_path_buf());
    write_summary_files(&summary, &table.samples(burn_in), &dir, args.bins, args.scatter)?;
    if let Some(m) = &meta {
        if m.step_calls != summary.step_calls {
            log::warn!(
                "chain reports {} step calls but metadata has {}",
                summary.step_calls,
                m.step_calls
            );
        }
    }
    print_json(&summary)
}

fn cmd_predictive(args: PredictiveArgs) -> lfabc::Result<()> {
    let meta = RunMetadata::read(&args.run.join("metadata.json"))?;
    let table = read_chain_csv(&args.run.join("chain.csv"))?;
    let samples = table.samples(meta.burn_in);
    let draws = args.draws.unwrap_or(1);
    let thin = args.thin.unwrap_or(10);
    let seed = args.seed.unwrap_or(meta.seed);
    let out_dir = args.out.unwrap_or_else(|| args.run.clone());
    std::fs::create_dir_all(&out_dir)?;

    let sim = &meta.config.simulator;
    let stat_names = sim.build()?.spec().stat_names.clone();
    let pred = posterior_predictive(&samples, sim, draws, thin, seed)?;
    let mut w = csv::Writer::from_path(out_dir.join("predictive.csv"))?;
    w.write_record(&stat_names)?;
    for row in &pred.stats {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;

    if let SimulatorConfig::Blowfly(cfg) = sim {
        let series = predictive_series(&samples, cfg, thin, seed)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("predictive_series.csv"))?);
        for s in &series {
            let line: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", line.join(","))?;
        }
    }
    println!(
        "{} predictive draws ({} failures) written to {}",
        pred.stats.len(),
        pred.failures,
        out_dir.display()
    );
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> lfabc::Result<()> {
    let post = match &args.manifest {
        Some(p) => {
            let m = ExperimentManifest::load(p)?;
            let y = m.observed()?;
            let mut m = m;
            m.analytic_oracle = true;
            m.validate()?;
            m.analytic_posterior(&y)?.expect("oracle enabled")
        }
        None => {
            let y_bar = args
                .y_bar
                .ok_or_else(|| Error::Config("oracle needs --y-bar or --manifest".into()))?;
            analytic_exponential_posterior(args.alpha, args.beta, args.n, y_bar)?
        }
    };
    print_json(&serde_json::json!({
        "shape": post.shape,
        "rate": post.rate,
        "mean": post.mean(),
        "std": post.std(),
    }))
}

fn cmd_compare(args: CompareArgs) -> lfabc::Result<()> {
    let a = read_chain_csv(&args.a)?;
    let b = read_chain_csv(&args.b)?;
    if a.param_names != b.param_names {
        return Err(Error::InvalidArgument("chain files have different parameters".into()));
    }
    let (sa, sb) = (a.samples(args.burn_in_a), b.samples(args.burn_in_b));
    if sa.is_empty() || sb.is_empty() {
        return Err(Error::InvalidArgument("no samples left after burn-in".into()));
    }
    print_json(&compare_chains(&a.param_names, &sa, &sb))
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pmlp::bench::{
    load_model, run_campaign, save_model, write_outputs, ExperimentConfig, Model, SeriesSource,
};
use pmlp::metrics::ErrorSummary;
use pmlp::par::Exec;
use pmlp::prune::{classical_train, two_stage_train};
use pmlp::series::{
    embed_lags, load_csv, split, synth_series, write_csv, ColumnSelector, Scaler, SeriesKind,
};

#[derive(Parser)]
#[command(name = "pmlp", version, about = "Pruned MLP forecasting experiments")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a fully connected network on one series.
    Train(FitArgs),
    /// Fit a network with the two-stage pruning procedure.
    PruneTrain(FitArgs),
    /// Run an MLP versus pruned-MLP campaign and write report files.
    Compare(CompareArgs),
    /// Write a synthetic hourly series as CSV.
    Synth(SynthArgs),
    /// Score a saved model on a CSV series.
    Eval(EvalArgs),
}

#[derive(Args)]
struct FitArgs {
    /// CSV file holding the series.
    #[arg(long)]
    data: PathBuf,
    /// Column name or zero-based index.
    #[arg(long, default_value = "value")]
    column: ColumnSelector,
}

#[derive(Args)]
struct CompareArgs {
    /// CSV series to compare on instead of the configured ones.
    #[arg(long)]
    data: Vec<PathBuf>,
    /// Column of every `--data` file.
    #[arg(long)]
    column: Option<ColumnSelector>,
    /// Run every cell on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    kind: SeriesKind,
    #[arg(long, default_value_t = 3607)]
    length: usize,
    /// Stationary noise level; defaults to the kind's typical value.
    #[arg(long)]
    noise_sd: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "value")]
    column: ColumnSelector,
    /// Lag order used to embed the series; defaults to the config's.
    #[arg(long)]
    lags: Option<usize>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)
            .with_context(|| format!("config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn require_out(cli: &Cli) -> Result<&Path> {
    match &cli.out {
        Some(p) => Ok(p),
        None => bail!("--out is required for this subcommand"),
    }
}

fn fit(cli: &Cli, args: &FitArgs, pruned: bool) -> Result<()> {
    let config = load_config(cli)?;
    let topology = config.topology.build()?;
    let series = load_csv(&args.data, &args.column)?;
    let ds = embed_lags(&series, topology.n_inputs())?;
    let (train, test) = split(&ds, config.split)?;
    let scaler = Scaler::fit(config.scaling, &train)?;
    let scaled = scaler.apply(&train);
    let (network, outcome, note) = if pruned {
        let out = two_stage_train(
            &topology,
            &scaled,
            &config.two_stage_config(),
            config.master_seed,
        )?;
        let note = format!(
            " pruned {}/{} (ratio {:.3})",
            out.report.n_pruned(),
            topology.n_params(),
            out.report.pruning_ratio
        );
        (out.network, out.outcome, note)
    } else {
        let (net, out) = classical_train(&topology, &scaled, &config.lm, config.master_seed)?;
        (net, out, String::new())
    };
    let model = Model { network, scaler };
    let pred = model.predict(&test)?;
    let errors = ErrorSummary::compute(&pred, test.targets(), config.normalizer)?;
    println!(
        "{topology} nRMSE {:.4} nMAE {:.4} iterations {} ({}){note}",
        errors.nrmse, errors.nmae, outcome.iterations, outcome.termination
    );
    if let Some(out) = &cli.out {
        save_model(&model, out)?;
    }
    Ok(())
}

fn compare(cli: &Cli, args: &CompareArgs) -> Result<()> {
    let mut config = load_config(cli)?;
    if !args.data.is_empty() {
        config.series = args
            .data
            .iter()
            .map(|path| SeriesSource::Csv {
                path: path.clone(),
                column: args.column.clone(),
                data: None,
                name: None,
            })
            .collect();
    }
    if args.sequential {
        config.exec = Exec::Sequential;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let campaign = run_campaign(&config)?;
    let written = write_outputs(&campaign, &dir)?;
    println!(
        "{} records, grand mean pruning ratio {:.3}, grand mean nRMSE ratio {:.3}; {} files in {}",
        campaign.records.len(),
        campaign.report.grand_mean_pruning_ratio,
        campaign.report.grand_mean_nrmse_ratio,
        written.len(),
        dir.display()
    );
    Ok(())
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let out = require_out(cli)?;
    let noise = args.noise_sd.unwrap_or(args.kind.default_noise_sd());
    if !(noise >= 0.0 && noise.is_finite()) {
        bail!("--noise-sd must be a finite non-negative number");
    }
    let series = synth_series(args.kind, args.length, noise, cli.seed.unwrap_or(0));
    write_csv(&series, out)?;
    Ok(())
}

fn eval(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let config = load_config(cli)?;
    let model =
        load_model(&args.model).with_context(|| format!("model {}", args.model.display()))?;
    let width = model.network.topology().n_inputs();
    let lags = args.lags.unwrap_or(config.topology.n_inputs);
    if lags != width {
        bail!("lag order {lags} does not match the model's input width {width}");
    }
    let series = load_csv(&args.data, &args.column)?;
    let ds = embed_lags(&series, lags)?;
    let pred = model.predict(&ds)?;
    let errors = ErrorSummary::compute(&pred, ds.targets(), config.normalizer)?;
    println!(
        "samples {} nRMSE {:.4} nMAE {:.4}",
        errors.n, errors.nrmse, errors.nmae
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => fit(cli, a, false),
        Command::PruneTrain(a) => fit(cli, a, true),
        Command::Compare(a) => compare(cli, a),
        Command::Synth(a) => synth(cli, a),
        Command::Eval(a) => eval(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

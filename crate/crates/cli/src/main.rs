use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use turbo_ra::channel::dump_trial;
use turbo_ra::coding::{LdpcCode, ParityCheckMatrix};
use turbo_ra::detector::write_trace_csv;
use turbo_ra::harness::{
    evaluate, generate_world, plot, read_results_csv, run_campaign, score, trial_rng,
    write_campaign, CampaignSpec, NmseSupport,
};
use turbo_ra::scenario::SystemConfig;
use turbo_ra::turbo::Receiver;

#[derive(Parser)]
#[command(name = "turbo-ra", version, about = "Turbo receiver simulator for grant-free massive random access")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo campaign over a sweep of active-user counts.
    Run(RunArgs),
    /// A single seeded trial, optionally with detector trace and dumps.
    Trial(TrialArgs),
    /// SVG line charts from a results.csv.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// N = 200, M = 64, L = 50, T = 200.
    Full,
    /// N = 50, M = 16, L = 20, T = 170.
    Reduced,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (TOML or JSON); unspecified keys keep the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in parameter set used when no config file is given.
    #[arg(long, value_enum, default_value = "full")]
    preset: Preset,
    /// Master seed; overrides the config value.
    #[arg(long)]
    seed: Option<u64>,
    /// Parity-check matrix in alist format instead of the bundled code.
    #[arg(long)]
    alist: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Active-user counts, comma separated (default: the config's K).
    #[arg(long, value_delimiter = ',')]
    sweep_k: Vec<usize>,
    /// Receivers, comma separated: turbo, data_assisted, separate, genie.
    #[arg(long, value_delimiter = ',', default_value = "turbo,data_assisted,separate,genie")]
    receivers: Vec<Receiver>,
    #[arg(long, default_value_t = 500)]
    trials: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Record wall-clock time per point (results then differ run to run).
    #[arg(long)]
    timing: bool,
    /// Compute NMSE over truly active columns only.
    #[arg(long)]
    nmse_active_only: bool,
    /// Also write figures/*.svg.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct TrialArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Number of active users (default: the config's K).
    #[arg(long)]
    k: Option<usize>,
    /// Trial index under the master seed.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long, value_delimiter = ',', default_value = "turbo,data_assisted,separate,genie")]
    receivers: Vec<Receiver>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write the per-iteration detector trace of every round as CSV.
    #[arg(long)]
    trace: bool,
    /// Dump H, X and Y of the trial (CSV and binary).
    #[arg(long)]
    dump: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// results.csv produced by `run`.
    #[arg(long, default_value = "out/results.csv")]
    input: PathBuf,
    /// Directory for the SVG files.
    #[arg(long, default_value = "out/figures")]
    out: PathBuf,
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

fn load_config(args: &ConfigArgs) -> CliResult<SystemConfig> {
    let mut cfg = match &args.config {
        Some(path) => SystemConfig::load(path)?,
        None => match args.preset {
            Preset::Full => SystemConfig::default(),
            Preset::Reduced => SystemConfig::reduced(),
        },
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_code(args: &ConfigArgs) -> CliResult<LdpcCode> {
    Ok(match &args.alist {
        Some(path) => LdpcCode::new(ParityCheckMatrix::from_alist(&fs::read_to_string(path)?)?)?,
        None => LdpcCode::default_code(),
    })
}

fn write_plots(rows: &[turbo_ra::harness::ResultRow], dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    for metric in plot::Metric::ALL {
        let path = dir.join(format!("{}.svg", metric.file_stem()));
        fs::write(&path, plot::render_svg(rows, metric))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let cfg = load_config(&args.config)?;
    let code = load_code(&args.config)?;
    let sweep = if args.sweep_k.is_empty() {
        vec![cfg.n_active]
    } else {
        args.sweep_k.clone()
    };
    let mut spec = CampaignSpec::new(cfg, sweep, args.receivers.clone(), args.trials);
    spec.timing = args.timing;
    if args.nmse_active_only {
        spec.nmse_support = NmseSupport::ActiveOnly;
    }
    let campaign = run_campaign(&spec, &code)?;
    let (results, records) = write_campaign(&args.out, &campaign)?;
    for p in &campaign.summary {
        println!(
            "{:<14} K={:<4} activity_err={:.3e} nmse={:.2} dB bler={:.3e} (+-{:.1e}, {} errors)",
            p.receiver, p.k, p.activity_err, p.nmse_db, p.bler, p.bler_ci95, p.block_errors
        );
    }
    println!("wrote {} and {}", results.display(), records.display());
    if args.plot {
        let rows = read_results_csv(BufReader::new(File::open(&results)?))?;
        write_plots(&rows, &args.out.join("figures"))?;
    }
    Ok(())
}

fn cmd_trial(args: TrialArgs) -> CliResult<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(k) = args.k {
        cfg.n_active = k;
    }
    cfg.validate()?;
    let code = load_code(&args.config)?;
    let world = generate_world(&cfg, &code, &mut trial_rng(cfg.master_seed, cfg.n_active, args.trial))?;
    if args.dump || args.trace {
        fs::create_dir_all(&args.out)?;
    }
    if args.dump {
        dump_trial(&args.out.join("dump"), &world.channel, &world.block, &world.received)?;
    }
    for &receiver in &args.receivers {
        let result = evaluate(receiver, &cfg, &world, &code, args.trace)?;
        let record = score(receiver, args.trial, &world, &result, NmseSupport::All);
        println!("{}", serde_json::to_string(&record)?);
        for (round, rows) in result.traces.iter().enumerate() {
            let path = args.out.join(format!("trace_{receiver}_round{}.csv", round + 1));
            write_trace_csv(BufWriter::new(File::create(&path)?), rows)?;
            info!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> CliResult<()> {
    let rows = read_results_csv(BufReader::new(File::open(&args.input)?))?;
    write_plots(&rows, &args.out)?;
    println!("wrote {} charts to {}", plot::Metric::ALL.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Trial(a) => cmd_trial(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

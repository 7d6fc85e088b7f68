use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use wdma_vlc::experiment::{self, Mode, ReportBundle};
use wdma_vlc::scenario::{load_scenario, ScenarioConfig};
use wdma_vlc::RewardScale;

#[derive(Parser)]
#[command(
    name = "wdma-vlc",
    version,
    about = "WDMA visible-light network: channel tracing, Q-learning and exhaustive oracle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace, solve with the oracle, train the agent and compare.
    Run(RunArgs),
    /// Exhaustive optimal assignment only.
    Oracle(RunArgs),
    /// Q-learning only.
    Train(RunArgs),
    /// Trace the channel and dump the received-power matrix.
    TraceChannel(SourceArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Builtin scenario name.
    #[arg(long, default_value = "scenario1", conflicts_with = "config")]
    scenario: String,
    /// Scenario TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "WDMA_VLC_OUT", default_value = "out")]
    out: PathBuf,
    /// Directory for cached power matrices.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Seed for the agent (defaults to the configured one).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the reward scale.
    #[arg(long, value_enum)]
    reward_scale: Option<ScaleArg>,
    /// Override the episode limit.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Linear,
    Db,
}

impl SourceArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        match &self.config {
            Some(path) => ScenarioConfig::from_file(path)
                .with_context(|| format!("loading {}", path.display())),
            None => load_scenario(&self.scenario).context("loading scenario"),
        }
    }
}

fn run_mode(args: &RunArgs, mode: Mode) -> Result<()> {
    let mut cfg = args.source.load()?;
    if let Some(scale) = args.reward_scale {
        cfg.reward_scale = match (scale, cfg.reward_scale) {
            (ScaleArg::Linear, _) => RewardScale::Linear,
            (ScaleArg::Db, RewardScale::Db { floor_db }) => RewardScale::Db { floor_db },
            (ScaleArg::Db, RewardScale::Linear) => RewardScale::DB,
        };
    }
    if let Some(n) = args.episodes {
        cfg.hyperparams.max_episodes = n;
    }
    let seed = args.seed.unwrap_or(cfg.hyperparams.seed);
    let out = &args.source.out;
    let bundle = experiment::run(&cfg, mode, seed, out, args.source.cache_dir.as_deref())
        .context("running experiment")?;
    print_summary(&bundle, out);
    Ok(())
}

fn print_summary(b: &ReportBundle, out: &Path) {
    println!(
        "{} ({} scale, seed {}, {} actions)",
        b.scenario,
        b.reward_scale.name(),
        b.seed,
        b.num_actions
    );
    for m in &b.methods {
        println!("  {:<10} sum SINR {:.6e}", m.method, m.sum_sinr);
        for u in &m.per_user {
            println!(
                "    user {} -> AP {} {:<6} {:8.3} dB",
                u.user, u.ap, u.wavelength, u.sinr_db
            );
        }
    }
    if let Some(t) = &b.training {
        println!(
            "  training: {} episodes, converged = {}, final epsilon {:.4}",
            t.episodes_run, t.converged, t.final_epsilon
        );
    }
    if let Some(g) = b.optimality_gap_percent {
        println!("  optimality gap {g:.6}%");
    }
    if let Some(a) = &b.oracle_alternate_scale {
        if a.diverges {
            println!(
                "  note: the {} scale prefers a different assignment",
                a.scale.name()
            );
        }
    }
    println!("  reports written to {}", out.display());
}

fn trace_channel(args: &SourceArgs) -> Result<()> {
    let cfg = args.load()?;
    let model = cfg.channel_model()?;
    let breakdown = model.compute_breakdown();
    let total = breakdown.total();
    if let Some(dir) = &args.cache_dir {
        let path = wdma_vlc::cache::PowerCache::new(dir).store(&cfg.channel_hash(), &total)?;
        println!("cached power matrix at {}", path.display());
    }
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join("power_matrix.csv");
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "user",
        "ap",
        "wavelength",
        "los_w",
        "first_order_w",
        "second_order_w",
        "total_w",
    ])?;
    let (k_n, l_n, n_n) = total.dims();
    for k in 0..k_n {
        for l in 0..l_n {
            for n in 0..n_n {
                w.write_record([
                    (k + 1).to_string(),
                    (l + 1).to_string(),
                    cfg.wavelengths[n].color.to_string(),
                    breakdown.los.get(k, l, n).to_string(),
                    breakdown.first_order.get(k, l, n).to_string(),
                    breakdown.second_order.get(k, l, n).to_string(),
                    total.get(k, l, n).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    println!("{}: {k_n} users x {l_n} APs x {n_n} wavelengths", cfg.name);
    println!("power matrix written to {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run_mode(a, Mode::Compare),
        Command::Oracle(a) => run_mode(a, Mode::Oracle),
        Command::Train(a) => run_mode(a, Mode::Train),
        Command::TraceChannel(a) => trace_channel(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use graph_sync::par::Exec;
use graph_sync::posegraph::{read_graph, rmse_ate, rmse_ate_robot};
use graph_sync::proxy::ProxyParams;
use graph_sync::sim::{calibrate, generate_scenario, run_epochs, summary_text, write_report, RunConfig, Scenario,
    DEFAULT_THRESHOLD_FLOOR,
};
use graph_sync_cli::{finish, read_toml, CliError, Settings, ThresholdFile};

#[derive(Parser)]
#[command(name = "sim", about = "Closed-loop multi-robot consistency simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV reports and final graphs.
    Run(RunArgs),
    /// Absolute trajectory error of an estimate against ground truth.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Preset name (euroc-like, tunnel, indoor-outdoor) or scenario TOML file.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of epochs; the whole scenario when omitted.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Weight edges by squared distance.
    #[arg(long)]
    squared_distance: bool,
    /// Half-width of mid-band constraints, in hops.
    #[arg(long)]
    mid_hops: Option<usize>,
    /// Per-band thresholds TOML (`small`, `mid`, `large`, optional `[reduced]` table).
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Run settings TOML.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let scenario = Scenario::load(&args.scenario, args.seed)?;
    let settings: Settings = match &args.config {
        Some(p) => read_toml(p)?,
        None => Settings::default(),
    };
    let mut config = RunConfig {
        epochs: args.epochs,
        ..RunConfig::default()
    };
    if let Some(s) = settings.strategy {
        config.strategy = s;
    }
    if let Some(o) = settings.oracle {
        config.oracle = o;
    }
    if settings.sequential == Some(true) {
        config.exec = Exec::Sequential;
    }
    let proxy = settings.radius.map_or(config.discrepancy.proxy, ProxyParams::with_radius);
    config.monitor.proxy = proxy;
    // the kernel choice applies to the comparison graphs; the broadcast keeps
    // the default weights so its reduction is unchanged
    config.discrepancy.proxy = ProxyParams {
        squared_distance: args.squared_distance || settings.squared_distance == Some(true),
        ..proxy
    };
    if let Some(h) = args.mid_hops.or(settings.mid_hops) {
        config.discrepancy.mid_hops = h;
    }
    if let Some(t) = settings.thresholds {
        t.apply(&mut config.discrepancy);
    }
    if let Some(p) = &args.thresholds {
        read_toml::<ThresholdFile>(p)?.apply(&mut config.discrepancy);
    }
    let pinned = args.thresholds.is_some() || settings.thresholds.is_some();
    if settings.calibrate.unwrap_or(!pinned) {
        let floor = settings.threshold_floor.unwrap_or(DEFAULT_THRESHOLD_FLOOR);
        let c = calibrate(&scenario, &config, floor)?;
        c.apply(&mut config.discrepancy);
        let t = c.thresholds;
        eprintln!("calibrated thresholds: small {:.4} mid {:.4} large {:.4}", t.small, t.mid, t.large);
        if let Some(t) = c.reduced_thresholds {
            eprintln!("reduced broadcasts: small {:.4} mid {:.4} large {:.4}", t.small, t.mid, t.large);
        }
    }
    config.discrepancy.validate()?;

    let data = generate_scenario(&scenario)?;
    let out = run_epochs(&data, &config)?;
    write_report(&out, &args.out)?;
    print!("{}", summary_text(&out.metrics));
    Ok(())
}

fn eval(estimate: PathBuf, truth: PathBuf) -> Result<(), CliError> {
    let est = read_graph(&estimate)?;
    let gt = read_graph(&truth)?;
    let all = rmse_ate(&est, &gt).map_err(|e| CliError::Invalid(e.to_string()))?;
    println!("robot,rmse_ate_m");
    println!("all,{all}");
    for r in est.robot_ids() {
        if let Ok(v) = rmse_ate_robot(&est, &gt, r) {
            println!("{r},{v}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    finish(match cli.command {
        Command::Run(args) => run(args),
        Command::Eval { estimate, truth } => eval(estimate, truth),
    })
}

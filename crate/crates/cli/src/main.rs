use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use postshift_cli::config::{EpsilonSetting, Method, MetricConfig, MetricName, RunConfig};
use postshift_cli::report::{self, summary_table};
use postshift_cli::{run, sweep, synth};

#[derive(Parser)]
#[command(name = "postshift", version, about = "Optimize black-box classification metrics by post-shifting")]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    spacing: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured method.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every candidate of the config's [sweep] grid and keep the best.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a simulated benchmark and its oracle value.
    Synth {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid points per class weight for the oracle; 0 skips it.
        #[arg(long, default_value_t = 20)]
        oracle_resolution: usize,
    },
    /// Score a predictions file.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_parser = parse_metric)]
        metric: MetricName,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        costs: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        positive: usize,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown method {s:?}"))
}

fn parse_metric(s: &str) -> Result<MetricName, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown metric {s:?}"))
}

fn load(path: &PathBuf, o: Overrides) -> Result<RunConfig> {
    let mut c = RunConfig::load(path)?;
    if let Some(s) = o.seed {
        c.seed = s;
    }
    if let Some(m) = o.method {
        c.method = m;
    }
    if let Some(e) = o.epsilon {
        c.optim.epsilon = Some(EpsilonSetting::Fixed(e));
    }
    if let Some(t) = o.iterations {
        c.optim.iterations = t;
    }
    if let Some(s) = o.spacing {
        c.optim.spacing = s;
    }
    if let Some(out) = o.out {
        c.output = out;
    }
    c.validate()?;
    Ok(c)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { config, overrides } => {
            let c = load(&config, overrides)?;
            let r = run(&c)?;
            print!("{}", summary_table(std::slice::from_ref(&r)));
        }
        Command::Sweep { config, overrides } => {
            let c = load(&config, overrides)?;
            let s = sweep(&c)?;
            let ok = s.candidates.iter().filter(|c| c.ok).count();
            println!("{} of {} candidates succeeded; best is candidate {}", ok, s.candidates.len(), s.best);
            print!("{}", summary_table(std::slice::from_ref(&s.report)));
        }
        Command::Synth { config, out, oracle_resolution } => {
            let c = RunConfig::load(&config)?;
            match synth::synth(&c, &out, oracle_resolution)? {
                Some(o) => println!("wrote {}; oracle {:.6} at resolution {}", out.display(), o.value, o.resolution),
                None => println!("wrote {}", out.display()),
            }
        }
        Command::Eval { predictions, metric, split, weights, costs, positive } => {
            let mc = MetricConfig { weights, costs, positive, ..MetricConfig::named(metric) };
            let p = report::read_predictions(&predictions, &split)?;
            let spec = mc.build(p.data.n_classes())?;
            let value = spec.evaluate(&p.data, &p.predictions).context("evaluating the metric")?;
            println!("{}", serde_json::json!({ "split": split, "metric": spec.name(), "n": p.data.len(), "value": value }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

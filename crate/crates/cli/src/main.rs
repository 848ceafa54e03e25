use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hodl_cli::config::{IrfSettings, SelectionSettings};
use hodl_cli::demo::{write_demo, DemoSpec};
use hodl_cli::pipeline;
use hodl_cli::{run_pipeline, ConfigError, Members, Pipeline, RunConfig, RunError, Stage};
use hodl_core::HorizonInterval;
use log::{error, info};

#[derive(Parser)]
#[command(name = "hodl", version, about = "Buy-hold-sell simulation and macro impulse-response pipeline")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true, default_value = "run.json")]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed_simulate: Option<u64>,
    #[arg(long, global = true)]
    seed_select: Option<u64>,
    #[arg(long, global = true)]
    seed_irf: Option<u64>,
    /// Rerun the stage even when its outputs are current.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load and clean token panels.
    Ingest,
    /// Draw buy-hold-sell episodes.
    Simulate {
        /// Restrict to one configured basket (or ALL).
        #[arg(long)]
        basket: Option<String>,
        /// Restrict to these intervals, e.g. 731-1095. Repeatable.
        #[arg(long)]
        interval: Vec<HorizonInterval>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        fee: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Overall and weekly risk metrics.
    Metrics,
    /// Weekly standardized feature tensors.
    Features,
    /// Stability selection of macro features.
    Select {
        /// Tensor directory; runs outside the pipeline and writes into --output (default: .).
        #[arg(long)]
        tensor: Option<PathBuf>,
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Local-projection impulse responses with simultaneous bands.
    Irf {
        /// Tensor directory; with --features runs outside the pipeline.
        #[arg(long, requires = "features")]
        tensor: Option<PathBuf>,
        #[arg(long, requires = "tensor")]
        features: Option<PathBuf>,
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Foreign surface CSV to compare against.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Figures, tables and the report bundle.
    Report,
    /// Every stage in order, skipping those whose outputs are current.
    All,
    /// Write a synthetic data set and a matching run.json.
    DemoData {
        #[arg(long, default_value = "demo")]
        dir: PathBuf,
        #[arg(long, default_value_t = 3)]
        tokens: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(o) = &cli.output {
        cfg.paths.output = o.clone();
    }
    if let Some(s) = cli.seed_simulate {
        cfg.seeds.simulate = s;
    }
    if let Some(s) = cli.seed_select {
        cfg.seeds.select = s;
    }
    if let Some(s) = cli.seed_irf {
        cfg.seeds.irf = s;
    }
    Ok(cfg)
}

/// Config for the standalone select/irf modes: the file when present, defaults otherwise.
fn optional_config(cli: &Cli) -> Result<Option<RunConfig>, ConfigError> {
    if cli.config.is_file() {
        load_config(cli).map(Some)
    } else {
        Ok(None)
    }
}

fn restrict_simulate(cfg: &mut RunConfig, basket: &Option<String>, intervals: &[HorizonInterval]) -> Result<(), ConfigError> {
    if let Some(b) = basket {
        let members = match cfg.baskets.remove(b) {
            Some(m) => m,
            None if b == "ALL" => Members::All,
            None => return Err(ConfigError(format!("basket {b} is not configured"))),
        };
        cfg.baskets = [(b.clone(), members)].into();
    }
    if !intervals.is_empty() {
        cfg.intervals = intervals.to_vec();
        let uppers: Vec<u32> = intervals.iter().map(|i| i.upper).collect();
        cfg.horizons.retain(|h| uppers.contains(h));
        if cfg.horizons.is_empty() {
            cfg.horizons = uppers;
        }
    }
    Ok(())
}

fn run_one(cfg: RunConfig, stage: Stage, force: bool) -> Result<(), RunError> {
    let mut p = Pipeline::new(cfg)?;
    let status = p.run_stage(stage, force)?;
    info!("{stage}: {status:?}");
    Ok(())
}

fn standalone(stage: Stage, f: impl FnOnce() -> anyhow::Result<()>) -> Result<(), RunError> {
    f().map_err(|error| RunError::Stage { stage, error })
}

fn run(cli: Cli) -> Result<(), RunError> {
    let stage_of = |c: &Cmd| match c {
        Cmd::Ingest => Some(Stage::Ingest),
        Cmd::Metrics => Some(Stage::Metrics),
        Cmd::Features => Some(Stage::Features),
        Cmd::Report => Some(Stage::Report),
        _ => None,
    };
    if let Some(stage) = stage_of(&cli.cmd) {
        return run_one(load_config(&cli)?, stage, cli.force);
    }
    match &cli.cmd {
        Cmd::All => {
            let bundle = run_pipeline(load_config(&cli)?)?;
            for (stage, status) in &bundle.stages {
                info!("{stage}: {status:?}");
            }
            Ok(())
        }
        Cmd::Simulate {
            basket,
            interval,
            n,
            fee,
            seed,
        } => {
            let mut cfg = load_config(&cli)?;
            restrict_simulate(&mut cfg, basket, interval)?;
            if let Some(n) = n {
                cfg.n_per_interval = *n;
            }
            if let Some(f) = fee {
                cfg.fee = *f;
            }
            if let Some(s) = seed {
                cfg.seeds.simulate = *s;
            }
            run_one(cfg, Stage::Simulate, cli.force)
        }
        Cmd::Select {
            tensor,
            bootstrap,
            seed,
        } => {
            let Some(tensor) = tensor else {
                let mut cfg = load_config(&cli)?;
                if let Some(b) = bootstrap {
                    cfg.selection.bootstrap = *b;
                }
                if let Some(s) = seed {
                    cfg.seeds.select = *s;
                }
                return run_one(cfg, Stage::Select, cli.force);
            };
            let cfg = optional_config(&cli)?;
            let mut settings = cfg.as_ref().map(|c| c.selection.clone()).unwrap_or_else(SelectionSettings::default);
            if let Some(b) = bootstrap {
                settings.bootstrap = *b;
            }
            let seed = seed.or(cli.seed_select).or(cfg.map(|c| c.seeds.select)).unwrap_or(7);
            let out = cli.output.clone().unwrap_or_else(|| PathBuf::from("."));
            standalone(Stage::Select, || pipeline::select(tensor, &out, &settings.to_core(), seed))
        }
        Cmd::Irf {
            tensor,
            features,
            bootstrap,
            lambda,
            seed,
            compare,
        } => {
            let apply = |s: &mut IrfSettings| {
                if let Some(b) = bootstrap {
                    s.bootstrap = *b;
                }
                if let Some(l) = lambda {
                    s.lambda = *l;
                }
                if let Some(c) = compare {
                    s.compare = Some(c.clone());
                }
            };
            let (Some(tensor), Some(features)) = (tensor, features) else {
                let mut cfg = load_config(&cli)?;
                apply(&mut cfg.irf);
                if let Some(s) = seed {
                    cfg.seeds.irf = *s;
                }
                return run_one(cfg, Stage::Irf, cli.force);
            };
            let cfg = optional_config(&cli)?;
            let mut settings = cfg.as_ref().map(|c| c.irf.clone()).unwrap_or_default();
            apply(&mut settings);
            let seed = seed.or(cli.seed_irf).or(cfg.map(|c| c.seeds.irf)).unwrap_or(9);
            let out = cli.output.clone().unwrap_or_else(|| PathBuf::from("."));
            if let Some(c) = &settings.compare {
                if !c.is_file() {
                    return Err(ConfigError(format!("--compare: {} does not exist", c.display())).into());
                }
            }
            standalone(Stage::Irf, || {
                pipeline::irf(tensor, features, &out, &settings.to_core(), seed, settings.compare.as_deref())
            })
        }
        Cmd::DemoData { dir, tokens, seed } => {
            if *tokens == 0 {
                return Err(ConfigError("--tokens must be at least 1".into()).into());
            }
            let spec = DemoSpec {
                tokens: *tokens,
                seed: *seed,
                ..DemoSpec::default()
            };
            write_demo(dir, &spec).map_err(|e| ConfigError(format!("writing demo data: {e:#}")))?;
            info!("demo data written to {}", Path::new(dir).display());
            Ok(())
        }
        _ => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
